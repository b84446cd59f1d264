//! Binary capture container, raw-sample sidecar and atomic file output.
//!
//! Container layout (all integers little-endian):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `MMWS` |
//! | 4 | 2 | version (1) |
//! | 6 | 2 | reserved, zero |
//! | 8 | 4 | metadata length `M` |
//! | 12 | 4 | tones per record `N` |
//! | 16 | 4 | record count `R` |
//! | 20 | 4 | CRC-32 of bytes 0..20 |
//! | 24 | M | metadata, UTF-8 TOML |
//! | 24+M | 4 | CRC-32 of bytes 0..24+M |
//! | 28+M | R × (16 + 16N) | records |
//! | end−4 | 4 | CRC-32 of every preceding byte |
//!
//! Each record is a 16-byte header (slot u32, AGC i16 centi-dB, flags u16,
//! snapshot u32, CRC-32 of the first 12 header bytes and the payload)
//! followed by `N` pairs of f64 (I, Q).

mod samples;

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crc32fast::Hasher;
use num_complex::Complex64;

use crate::capture::{CaptureMetadata, CaptureRecord, CaptureSet};
use crate::impairments::AgcGain;
use crate::{Error, Result};

pub use samples::{read_raw_samples, write_raw_samples, RawSamples, RAW_MAGIC};

pub const MAGIC: [u8; 4] = *b"MMWS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;

/// Part of a container a checksum covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Header,
    Metadata,
    Record(u32),
    File,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::Header => f.write_str("header"),
            Region::Metadata => f.write_str("metadata"),
            Region::Record(i) => write!(f, "record {i}"),
            Region::File => f.write_str("file"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a capture container (magic {found:02x?})")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported container version {found} (this reader handles {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("file truncated: needed {needed} bytes at offset {offset}")]
    Truncated { offset: u64, needed: u64 },

    #[error("CRC mismatch in {region} starting at byte offset {offset} (stored {stored:08x}, computed {computed:08x})")]
    Crc {
        region: Region,
        offset: u64,
        stored: u32,
        computed: u32,
    },

    #[error("{count} unexpected bytes after the trailing checksum at offset {offset}")]
    TrailingBytes { offset: u64, count: u64 },

    #[error("invalid metadata: {0}")]
    Metadata(String),

    #[error("capture shape: {0}")]
    Shape(String),
}

/// Bytes in one record with `num_tones` tones.
pub fn record_stride(num_tones: usize) -> usize {
    RECORD_HEADER_LEN + 16 * num_tones
}

fn crc(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Serializes a capture. Output is byte-identical for equal inputs.
pub fn encode_capture(set: &CaptureSet) -> Result<Vec<u8>> {
    let n = set.plan().num_tones;
    if let Some(r) = set.records.iter().find(|r| r.h.len() != n) {
        return Err(FormatError::Shape(format!(
            "record for slot {} has {} tones, metadata plan has {n}",
            r.slot,
            r.h.len()
        ))
        .into());
    }
    let meta = set.metadata.to_text()?;
    let count = u32::try_from(set.records.len())
        .map_err(|_| FormatError::Shape("more than 2^32 records".into()))?;
    let meta_len =
        u32::try_from(meta.len()).map_err(|_| FormatError::Shape("metadata over 4 GiB".into()))?;

    let mut out =
        Vec::with_capacity(HEADER_LEN + meta.len() + 8 + set.records.len() * record_stride(n));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    let hc = crc(&out);
    out.extend_from_slice(&hc.to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    let mc = crc(&out);
    out.extend_from_slice(&mc.to_le_bytes());

    for r in &set.records {
        let start = out.len();
        out.extend_from_slice(&r.slot.to_le_bytes());
        out.extend_from_slice(&r.agc.0.to_le_bytes());
        out.extend_from_slice(&r.flags.to_le_bytes());
        out.extend_from_slice(&r.snapshot.to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        for v in &r.h {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        let mut h = Hasher::new();
        h.update(&out[start..start + 12]);
        h.update(&out[start + RECORD_HEADER_LEN..]);
        let rc = h.finalize();
        out[start + 12..start + 16].copy_from_slice(&rc.to_le_bytes());
    }
    let fc = crc(&out);
    out.extend_from_slice(&fc.to_le_bytes());
    Ok(out)
}

/// Reader that tracks its offset and the running whole-file checksum.
struct Tracked<R> {
    inner: R,
    offset: u64,
    hasher: Hasher,
}

impl<R: Read> Tracked<R> {
    fn take(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(FormatError::Truncated {
                        offset: self.offset,
                        needed: buf.len() as u64,
                    }
                    .into())
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.hasher.update(buf);
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0; 4];
        self.take(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Streams a container. Metadata is parsed and checked before any record is
/// decoded; every region's checksum is verified as it is read.
pub fn read_capture_from(reader: impl Read) -> Result<CaptureSet> {
    let mut r = Tracked {
        inner: reader,
        offset: 0,
        hasher: Hasher::new(),
    };
    let mut head = [0u8; HEADER_LEN];
    r.take(&mut head[..4])?;
    if head[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            found: [head[0], head[1], head[2], head[3]],
        }
        .into());
    }
    r.take(&mut head[4..])?;
    let stored = le_u32(&head[20..]);
    let computed = crc(&head[..20]);
    if stored != computed {
        return Err(FormatError::Crc {
            region: Region::Header,
            offset: 0,
            stored,
            computed,
        }
        .into());
    }
    let version = le_u16(&head[4..]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: VERSION,
        }
        .into());
    }
    let meta_len = le_u32(&head[8..]) as usize;
    let n = le_u32(&head[12..]) as usize;
    let count = le_u32(&head[16..]);

    let mut meta = vec![0u8; meta_len];
    r.take(&mut meta)?;
    let computed = r.hasher.clone().finalize();
    let stored = r.u32()?;
    if stored != computed {
        return Err(FormatError::Crc {
            region: Region::Metadata,
            offset: HEADER_LEN as u64,
            stored,
            computed,
        }
        .into());
    }
    let text = String::from_utf8(meta).map_err(|e| FormatError::Metadata(e.to_string()))?;
    let metadata =
        CaptureMetadata::from_text(&text).map_err(|e| FormatError::Metadata(e.to_string()))?;
    metadata
        .setup
        .plan()
        .validate()
        .map_err(|e| FormatError::Metadata(e.to_string()))?;
    if metadata.setup.plan().num_tones != n {
        return Err(FormatError::Metadata(format!(
            "header declares {n} tones, metadata plan has {}",
            metadata.setup.plan().num_tones
        ))
        .into());
    }

    let stride = record_stride(n);
    let mut buf = vec![0u8; stride];
    let mut records = Vec::with_capacity(count.min(1 << 16) as usize);
    for i in 0..count {
        let at = r.offset;
        r.take(&mut buf)?;
        let stored = le_u32(&buf[12..]);
        let mut h = Hasher::new();
        h.update(&buf[..12]);
        h.update(&buf[RECORD_HEADER_LEN..]);
        let computed = h.finalize();
        if stored != computed {
            return Err(FormatError::Crc {
                region: Region::Record(i),
                offset: at,
                stored,
                computed,
            }
            .into());
        }
        let f = |k: usize| f64::from_le_bytes(buf[k..k + 8].try_into().expect("8 bytes"));
        records.push(CaptureRecord {
            slot: le_u32(&buf[0..]),
            agc: AgcGain(i16::from_le_bytes([buf[4], buf[5]])),
            flags: le_u16(&buf[6..]),
            snapshot: le_u32(&buf[8..]),
            h: (0..n)
                .map(|k| {
                    let o = RECORD_HEADER_LEN + 16 * k;
                    Complex64::new(f(o), f(o + 8))
                })
                .collect(),
        });
    }

    let computed = r.hasher.clone().finalize();
    let trailer_at = r.offset;
    let stored = r.u32()?;
    if stored != computed {
        return Err(FormatError::Crc {
            region: Region::File,
            offset: trailer_at,
            stored,
            computed,
        }
        .into());
    }
    let mut extra = Vec::new();
    r.inner.read_to_end(&mut extra)?;
    if !extra.is_empty() {
        return Err(FormatError::TrailingBytes {
            offset: r.offset,
            count: extra.len() as u64,
        }
        .into());
    }
    Ok(CaptureSet { metadata, records })
}

pub fn decode_capture(bytes: &[u8]) -> Result<CaptureSet> {
    read_capture_from(bytes)
}

pub fn write_capture(set: &CaptureSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &encode_capture(set)?)
}

pub fn read_capture(path: impl AsRef<Path>) -> Result<CaptureSet> {
    read_capture_from(BufReader::new(fs::File::open(path)?))
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = tempfile::NamedTempFile::new_in(parent_of(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(bytes)?;
        w.flush()?;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{flags, CaptureKind, SimulationSetup};
    use crate::waveform::{newman_phases, SoundingWaveform, TonePlan};

    fn small(records: usize) -> CaptureSet {
        let plan = TonePlan::new(4, 500e3, 50e6).unwrap();
        let w = SoundingWaveform::from_phases(plan, newman_phases(4), "newman").unwrap();
        let setup = SimulationSetup::new(w, 7);
        CaptureSet {
            metadata: CaptureMetadata {
                kind: CaptureKind::Capture,
                channel: None,
                setup,
                extra: Default::default(),
            },
            records: (0..records)
                .map(|i| CaptureRecord {
                    slot: i as u32,
                    snapshot: 0,
                    agc: AgcGain(-120 + i as i16),
                    flags: flags::ANCHOR,
                    h: (0..4)
                        .map(|k| Complex64::new(k as f64, -(i as f64) * 1e-7))
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_exact_and_deterministic() {
        let set = small(3);
        let a = encode_capture(&set).unwrap();
        assert_eq!(a, encode_capture(&set).unwrap());
        assert_eq!(decode_capture(&a).unwrap(), set);
        let meta = set.metadata.to_text().unwrap().len();
        assert_eq!(a.len(), HEADER_LEN + meta + 4 + 3 * record_stride(4) + 4);
    }

    #[test]
    fn every_single_byte_corruption_is_detected() {
        let bytes = encode_capture(&small(2)).unwrap();
        for i in 0..bytes.len() {
            for mask in [0x01u8, 0x80] {
                let mut b = bytes.clone();
                b[i] ^= mask;
                assert!(decode_capture(&b).is_err(), "byte {i} mask {mask:#x}");
            }
        }
    }

    #[test]
    fn record_corruption_names_region_and_offset() {
        let set = small(3);
        let bytes = encode_capture(&set).unwrap();
        let second = HEADER_LEN + set.metadata.to_text().unwrap().len() + 4 + record_stride(4);
        let mut b = bytes.clone();
        b[second + 20] ^= 4;
        match decode_capture(&b) {
            Err(Error::Format(FormatError::Crc { region, offset, .. })) => {
                assert_eq!(region, Region::Record(1));
                assert_eq!(offset, second as u64);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn future_version_is_refused() {
        let mut b = encode_capture(&small(1)).unwrap();
        b[4..6].copy_from_slice(&99u16.to_le_bytes());
        let c = crc(&b[..20]);
        b[20..24].copy_from_slice(&c.to_le_bytes());
        assert!(matches!(
            decode_capture(&b),
            Err(Error::Format(FormatError::UnsupportedVersion {
                found: 99,
                ..
            }))
        ));
    }

    #[test]
    fn distinct_structural_errors() {
        let bytes = encode_capture(&small(2)).unwrap();
        assert!(matches!(
            decode_capture(b"RIFF....").unwrap_err(),
            Error::Format(FormatError::BadMagic { .. })
        ));
        assert!(matches!(
            decode_capture(&bytes[..bytes.len() - 10]).unwrap_err(),
            Error::Format(FormatError::Truncated { .. })
        ));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(
            decode_capture(&longer).unwrap_err(),
            Error::Format(FormatError::TrailingBytes { count: 1, .. })
        ));
        let mut bad = small(1);
        bad.records[0].h.pop();
        assert!(matches!(
            encode_capture(&bad),
            Err(Error::Format(FormatError::Shape(_)))
        ));
    }

    #[test]
    fn empty_capture_is_valid() {
        let set = small(0);
        assert_eq!(decode_capture(&encode_capture(&set).unwrap()).unwrap(), set);
    }

    #[test]
    fn default_stride() {
        assert_eq!(record_stride(801), 12_832);
        assert_eq!(3610 * record_stride(801), 46_323_520);
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cap.mmws");
        std::fs::write(&path, b"old").unwrap();
        write_capture(&small(2), &path).unwrap();
        assert_eq!(read_capture(&path).unwrap(), small(2));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
