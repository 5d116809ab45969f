//! Consequences of the plane identity, each reduced to a numerical check.

mod bl;
mod convolution;
mod multilinear;
mod optimality;
mod schrodinger;
pub mod simplex;
mod weighted;

pub use bl::{bl_feasibility, BLFeasibility, BLInstance, BASIS_DET_FLOOR, MAX_MAPS};
pub use convolution::{convolution_identity_check, product_wedge_factor, ConvolutionReport, NORMAL_WEDGE_FLOOR};
pub use multilinear::{multilinear_l2_ratio, MultilinearReport};
pub use optimality::{gt_violation_scan, GtViolationReport, DEFAULT_VARIATION_FLOOR};
pub use schrodinger::{schrodinger_energy_scan, EnergySample};
pub use weighted::{weighted_identity_check, KPlaneWeight, WeightedReport};

/// `(max - min) / |mean|`; zero for constant or empty input.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if max == min {
        0.0
    } else {
        (max - min) / mean.abs()
    }
}
