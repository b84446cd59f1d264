//! Post-processing of captures into directional delay profiles, angular
//! products, path loss and extracted paths.

mod drift;
mod extract;
mod pdp;
mod products;
pub mod tables;
mod window;

pub use drift::{correct_drift, estimate_drift, DriftEstimate, AMBIGUITY_STEP_RAD};
pub use extract::{extract_paths, ExtractOptions, ExtractedPath, DEFAULT_DETECTION_MARGIN_DB};
pub use pdp::{calibrated_response, directional_pdp, DirectionalPdp, PdpOptions};
pub use products::{
    noise_floor, padp, pas, path_loss_360, sector_pdp, threshold_for, thresholded_sector_pdp, Padp,
    Pas, SystemGains, DEFAULT_THRESHOLD_DB,
};
pub use window::{delay_windows, DelayWindow, Hann, Rectangular};
