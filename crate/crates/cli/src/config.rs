use std::path::{Path, PathBuf};

use causal_sphere::optimizer::OptimizerConfig;
use causal_sphere::tolerances::DEFAULT_GRID_RESOLUTION;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Everything a run can be configured with; each subcommand reads its own
/// section. Flags given on the command line override file values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
    pub sweep: SweepConfig,
    pub diagnose: DiagnoseConfig,
    pub verify: VerifyConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub measure: Option<PathBuf>,
    /// Evaluate at this τ instead of the one stored in the measure file.
    pub override_tau: Option<f64>,
    /// Grid for the Euler–Lagrange residual.
    pub grid_resolution: usize,
    /// Fibonacci cap centers in the nodal tiling (support points are added).
    pub cap_centers: usize,
    /// Caps with fewer support points than this are reported but not judged.
    pub cap_min_points: usize,
    pub nodal_ratio_tol: f64,
    pub audit_tol: f64,
    pub el_tol: f64,
    pub gram_tol: f64,
    /// Box-counting scales `2^-k` for k in this inclusive range.
    pub scale_exponents: [i32; 2],
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            measure: None,
            override_tau: None,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            cap_centers: 256,
            cap_min_points: 12,
            nodal_ratio_tol: 1e-6,
            audit_tol: 1e-2,
            el_tol: 1e-3,
            gram_tol: 1e-8,
            scale_exponents: [3, 9],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub taus: Vec<f64>,
    pub pairs: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            taus: vec![1.0, 1.5, 2.0, 2.2, 2.5, 3.0],
            pairs: 10_000,
            samples: 10_000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("causal-sphere-out"))
    }
}
