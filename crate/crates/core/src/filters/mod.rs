//! Textural corruptions: Gaussian blur, median smoothing and
//! salt-and-pepper speckle, plus whole-dataset materialization.

mod dataset;
mod gaussian;
mod kernel;
mod median;
mod snp;

pub use dataset::{corrupt_dataset, DatasetManifest};
pub use gaussian::gaussian_blur;
pub use kernel::{gaussian_kernel_1d, Kernel1D, GAUSSIAN_TRUNCATE};
pub use median::{median_filter, window_offsets};
pub use snp::{salt_pepper, salt_pepper_with_levels, splitmix64, voxel_uniform};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume3D;

/// A corruption recipe. Its canonical name doubles as the dataset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Identity,
    Gaussian {
        sigma: f64,
    },
    Median {
        size: usize,
    },
    SaltPepper {
        prob: f64,
        seed: u64,
        /// Overrides the per-volume min/max paint levels.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<[f64; 2]>,
    },
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl NoiseSpec {
    pub fn salt_pepper(prob: f64, seed: u64) -> Self {
        NoiseSpec::SaltPepper {
            prob,
            seed,
            levels: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Identity => Ok(()),
            NoiseSpec::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            NoiseSpec::Gaussian { sigma } => Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            ))),
            NoiseSpec::Median { size } if size >= 2 => Ok(()),
            NoiseSpec::Median { size } => Err(Error::InvalidParameter(format!(
                "median size must be at least 2, got {size}"
            ))),
            NoiseSpec::SaltPepper { prob, .. } if (0.0..=0.5).contains(&prob) => Ok(()),
            NoiseSpec::SaltPepper { prob, .. } => Err(Error::InvalidParameter(format!(
                "salt-and-pepper prob must be in [0, 0.5], got {prob}"
            ))),
        }
    }

    /// `t2norm`, `gausK`, `medianK`, `snpPP` (PP = prob * 100, two digits).
    pub fn name(&self) -> String {
        match *self {
            NoiseSpec::Identity => "t2norm".to_string(),
            NoiseSpec::Gaussian { sigma } => format!("gaus{}", format_number(sigma)),
            NoiseSpec::Median { size } => format!("median{size}"),
            NoiseSpec::SaltPepper { prob, .. } => {
                let pct = (prob * 100.0 * 1e6).round() / 1e6;
                if pct.fract() == 0.0 {
                    format!("snp{:02}", pct as i64)
                } else {
                    format!("snp{pct}")
                }
            }
        }
    }

    /// Parses a canonical dataset name. Salt-and-pepper specs get `seed`.
    pub fn from_name(name: &str, seed: u64) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognized dataset name {name:?}"));
        let spec = if name == "t2norm" {
            NoiseSpec::Identity
        } else if let Some(rest) = name.strip_prefix("gaus") {
            NoiseSpec::Gaussian {
                sigma: rest.parse().map_err(|_| bad())?,
            }
        } else if let Some(rest) = name.strip_prefix("median") {
            NoiseSpec::Median {
                size: rest.parse().map_err(|_| bad())?,
            }
        } else if let Some(rest) = name.strip_prefix("snp") {
            let pct: f64 = rest.parse().map_err(|_| bad())?;
            NoiseSpec::salt_pepper(pct / 100.0, seed)
        } else {
            return Err(bad());
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Copy of this spec with the salt-and-pepper seed replaced.
    pub fn with_seed(&self, new_seed: u64) -> Self {
        match self {
            NoiseSpec::SaltPepper { prob, levels, .. } => NoiseSpec::SaltPepper {
                prob: *prob,
                seed: new_seed,
                levels: *levels,
            },
            other => other.clone(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            NoiseSpec::SaltPepper { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn apply(&self, vol: &Volume3D) -> Result<Volume3D> {
        match *self {
            NoiseSpec::Identity => Ok(vol.clone()),
            NoiseSpec::Gaussian { sigma } => gaussian_blur(vol, sigma),
            NoiseSpec::Median { size } => median_filter(vol, size),
            NoiseSpec::SaltPepper {
                prob,
                seed,
                levels: None,
            } => salt_pepper(vol, prob, seed),
            NoiseSpec::SaltPepper {
                prob,
                seed,
                levels: Some([black, white]),
            } => salt_pepper_with_levels(vol, prob, seed, black, white),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseSpec::from_name(s, 0)
    }
}
