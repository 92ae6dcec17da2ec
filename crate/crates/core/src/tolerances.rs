//! Numerical thresholds shared across modules.
//!
//! Every constant has a matching field in [`Tolerances`] so that
//! configuration files can override it.

use serde::{Deserialize, Serialize};

/// Slack allowed when an angle argument leaves `[0, π]` through rounding.
pub const ANGLE_DOMAIN_TOL: f64 = 1e-12;
/// Band on the value of `D` inside which a pair counts as lightlike.
pub const LIGHTCONE_TOL: f64 = 1e-9;
/// Relative shrink applied to the `θ_max / 2` cap radius.
pub const CAP_MARGIN: f64 = 0.02;
/// Weight below which a point is not treated as part of the support.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Angular radius (radians) under which points are merged.
pub const MERGE_RADIUS: f64 = 1e-6;
/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;
/// Mass deviation that triggers a warning when loading a measure file.
pub const LOAD_RENORMALIZE_WARN: f64 = 1e-9;
/// `sin θ` below which directional derivatives of the angle are refused.
pub const SINGULAR_SIN: f64 = 1e-9;
/// Angular radius used to group support points into clusters for reporting.
pub const CLUSTER_RADIUS: f64 = 1e-3;
/// Default Fibonacci grid size for quadrature.
pub const DEFAULT_GRID_RESOLUTION: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub lightcone_tol: f64,
    pub cap_margin: f64,
    pub weight_floor: f64,
    pub merge_radius: f64,
    /// Spread allowed between the weight-gradients of support points.
    pub station_tol: f64,
    /// Required drop of `ℓ` below the support level before inserting.
    pub insert_tol: f64,
    /// Allowed negative exterior gap at convergence.
    pub el_tol: f64,
    /// Smallest geodesic step length for point motion.
    pub step_tol: f64,
    /// Relative action decrease below which point motion stops.
    pub action_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            lightcone_tol: LIGHTCONE_TOL,
            cap_margin: CAP_MARGIN,
            weight_floor: WEIGHT_FLOOR,
            merge_radius: MERGE_RADIUS,
            station_tol: 1e-10,
            insert_tol: 1e-9,
            el_tol: 1e-7,
            step_tol: 1e-12,
            action_tol: 1e-13,
        }
    }
}
