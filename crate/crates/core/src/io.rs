//! JSON measure files:
//!
//! ```json
//! { "format_version": 1, "tau": 2.0,
//!   "points": [[0.0, 0.0, 1.0], ...], "weights": [0.5, ...] }
//! ```
//!
//! Weights are rescaled to unit mass on load; a warning is logged when the
//! stored mass is off by more than `1e−9`.

use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SpherePoint;
use crate::measure::DiscreteMeasure;
use crate::tolerances::LOAD_RENORMALIZE_WARN;

pub const MEASURE_FORMAT_VERSION: u32 = 1;

/// Stored points may be off the sphere by at most this much before loading
/// fails.
const POINT_NORM_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub format_version: u32,
    pub tau: f64,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl MeasureFile {
    pub fn from_measure(tau: f64, mu: &DiscreteMeasure) -> Self {
        MeasureFile {
            format_version: MEASURE_FORMAT_VERSION,
            tau,
            points: mu.points().iter().map(|p| p.coords()).collect(),
            weights: mu.weights().to_vec(),
        }
    }

    pub fn into_measure(self) -> Result<(f64, DiscreteMeasure)> {
        if self.format_version != MEASURE_FORMAT_VERSION {
            return Err(Error::InvalidMeasure(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let points = self
            .points
            .iter()
            .map(|&v| {
                let n = crate::geometry::norm(v);
                if (n - 1.0).abs() > POINT_NORM_SLACK {
                    return Err(Error::InvalidMeasure(format!(
                        "point {v:?} has norm {n}, expected 1"
                    )));
                }
                SpherePoint::from_vector(v)
            })
            .collect::<Result<Vec<_>>>()?;
        let mass: f64 = self.weights.iter().sum();
        if (mass - 1.0).abs() > LOAD_RENORMALIZE_WARN {
            warn!("measure mass is {mass}, renormalizing to 1");
        }
        let mu = DiscreteMeasure::from_unnormalized(points, self.weights)?;
        Ok((self.tau, mu))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure file serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }
}

pub fn save_measure(path: &Path, tau: f64, mu: &DiscreteMeasure) -> Result<()> {
    let mut text = MeasureFile::from_measure(tau, mu).to_json();
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_measure(path: &Path) -> Result<(f64, DiscreteMeasure)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    MeasureFile::from_json(&text, &path.display().to_string())?.into_measure()
}
