use sounder::capture::{simulate_calibration, simulate_capture, SimulationSetup};
use sounder::channel::{planted_nlos_channel, PlantedPath};
use sounder::io::{read_capture, write_capture};
use sounder::processing::{directional_pdp, PdpOptions};
use sounder::waveform::{newman_phases, SoundingWaveform, TonePlan};

#[test]
fn processing_a_written_capture_matches_memory_bit_for_bit() {
    let plan = TonePlan::table_one();
    let w = SoundingWaveform::from_phases(plan.clone(), newman_phases(plan.num_tones), "newman")
        .unwrap();
    let setup = SimulationSetup::new(w, 11);
    let paths = [
        PlantedPath::new(100e-9, -110.0, -5.0, 20.0),
        PlantedPath::new(250e-9, -120.0, 30.0, -40.0),
    ];
    let ch = planted_nlos_channel(&paths, &plan, setup.link.carrier_freq_hz, 11).unwrap();
    let cap = simulate_capture(&setup, &ch).unwrap();
    let cal = simulate_calibration(&setup).unwrap();

    let dir = tempfile::tempdir().unwrap();
    write_capture(&cap, dir.path().join("c.mmws")).unwrap();
    write_capture(&cal, dir.path().join("k.mmws")).unwrap();
    let cap2 = read_capture(dir.path().join("c.mmws")).unwrap();
    let cal2 = read_capture(dir.path().join("k.mmws")).unwrap();
    assert_eq!(cap2, cap);
    assert_eq!(cal2, cal);

    let a = directional_pdp(&cap, &cal, &PdpOptions::default()).unwrap();
    let b = directional_pdp(&cap2, &cal2, &PdpOptions::default()).unwrap();
    assert!(a
        .power
        .iter()
        .zip(&b.power)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}
