//! Analysis configuration: a single structured JSON document describing the
//! scenario, the uncertainty source, the frequency grid, embedding and solver
//! settings, and the performance bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global::EmbeddingKind;
use crate::lti::RationalTransfer;
use crate::scenario::ControllerChoice;
use crate::sdp::SolverOptions;
use crate::uncertainty::{AffineRationalPlant, Ellipsoid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioConfig {
    /// Built-in vehicle platoon with uniformly dispersed true parameters.
    Platoon {
        n_mod: usize,
        seed: u64,
        dispersion: f64,
        controller: ControllerConfig,
    },
    /// Explicit tables: affine plants, controllers, and the information-flow
    /// matrices (dense row-major).
    Explicit {
        plants: Vec<AffineRationalPlant>,
        controllers: Vec<RationalTransfer>,
        adjacency: DenseMatrix,
        input_map: DenseMatrix,
        /// True parameters, required by the synthetic/identify sources.
        #[serde(default)]
        theta_true: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerConfig {
    Initial,
    Improved,
    Custom(RationalTransfer),
}

impl ControllerConfig {
    pub fn to_choice(&self) -> ControllerChoice {
        match self {
            ControllerConfig::Initial => ControllerChoice::Initial,
            ControllerConfig::Improved => ControllerChoice::Improved,
            ControllerConfig::Custom(k) => ControllerChoice::Custom(k.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipsoidSource {
    /// Rotated diagonal covariances scaled to the true parameters; centers
    /// drawn around the truth (or pinned to it).
    Synthetic {
        relative_std: f64,
        seed: u64,
        #[serde(default)]
        center_on_truth: bool,
    },
    /// Desk-scale output-error identification of each local loop.
    Identify {
        n_id: usize,
        ts: f64,
        excitation_variance: f64,
        noise_variance: f64,
        seed: u64,
    },
    /// Ellipsoids supplied directly.
    Explicit { ellipsoids: Vec<Ellipsoid> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyGrid {
    /// Explicit ascending list, in Hz.
    List { hz: Vec<f64> },
    /// Logarithmically spaced, inclusive endpoints, in Hz.
    LogRange { start_hz: f64, stop_hz: f64, count: usize },
}

impl FrequencyGrid {
    pub fn to_hz(&self) -> Result<Vec<f64>> {
        match self {
            FrequencyGrid::List { hz } => {
                if hz.is_empty() {
                    return Err(Error::Config {
                        field: "frequencies.hz".into(),
                        detail: "frequency list must be nonempty".into(),
                    });
                }
                for w in hz.windows(2) {
                    if w[1] <= w[0] {
                        return Err(Error::Config {
                            field: "frequencies.hz".into(),
                            detail: "frequency list must be strictly ascending".into(),
                        });
                    }
                }
                if hz.iter().any(|&f| !(f > 0.0)) {
                    return Err(Error::Config {
                        field: "frequencies.hz".into(),
                        detail: "frequencies must be positive".into(),
                    });
                }
                Ok(hz.clone())
            }
            FrequencyGrid::LogRange {
                start_hz,
                stop_hz,
                count,
            } => {
                if !(*start_hz > 0.0) || !(*stop_hz > *start_hz) || *count < 2 {
                    return Err(Error::Config {
                        field: "frequencies.log_range".into(),
                        detail: "need 0 < start < stop and count >= 2".into(),
                    });
                }
                let l0 = start_hz.log10();
                let l1 = stop_hz.log10();
                Ok((0..*count)
                    .map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / (*count - 1) as f64))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WBoundConfig {
    /// Knots (omega rad/s, dB), piecewise log-linear.
    Table { knots: Vec<(f64, f64)> },
    /// +40 dB/decade through the crossover, capped.
    Default {
        crossover_rad_s: f64,
        cap_db: f64,
    },
}

impl Default for WBoundConfig {
    fn default() -> Self {
        WBoundConfig::Default {
            crossover_rad_s: 1.5,
            cap_db: 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_feas_tol")]
    pub feas_tol: f64,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_barrier_reduction")]
    pub barrier_reduction: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton_per_stage: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_feas_tol() -> f64 {
    1e-8
}
fn default_gap_tol() -> f64 {
    1e-8
}
fn default_barrier_reduction() -> f64 {
    10.0
}
fn default_max_newton() -> usize {
    200
}
fn default_margin() -> f64 {
    1e-9
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feas_tol: default_feas_tol(),
            gap_tol: default_gap_tol(),
            barrier_reduction: default_barrier_reduction(),
            max_newton_per_stage: default_max_newton(),
            margin: default_margin(),
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            feas_tol: self.feas_tol,
            gap_tol: self.gap_tol,
            barrier_reduction: self.barrier_reduction,
            max_newton_per_stage: self.max_newton_per_stage,
            margin: self.margin,
            ..SolverOptions::default()
        }
    }
}

fn default_probability() -> f64 {
    0.95
}
fn default_band_angles() -> usize {
    32
}
fn default_mc_samples() -> usize {
    1000
}
fn default_embeddings() -> EmbeddingKind {
    EmbeddingKind::DiscAndBand
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub scenario: ScenarioConfig,
    pub ellipsoids: EllipsoidSource,
    pub frequencies: FrequencyGrid,
    #[serde(default = "default_probability")]
    pub probability: f64,
    #[serde(default = "default_embeddings")]
    pub embeddings: EmbeddingKind,
    #[serde(default = "default_band_angles")]
    pub band_angles: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub w_bound: WBoundConfig,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.probability > 0.0 && self.probability < 1.0) {
            return Err(Error::Config {
                field: "probability".into(),
                detail: format!("must lie strictly in (0,1), got {}", self.probability),
            });
        }
        if self.band_angles < 2 {
            return Err(Error::Config {
                field: "band_angles".into(),
                detail: "need at least 2 orientations".into(),
            });
        }
        self.frequencies.to_hz()?;
        match &self.scenario {
            ScenarioConfig::Platoon {
                n_mod, dispersion, ..
            } => {
                if *n_mod < 1 {
                    return Err(Error::Config {
                        field: "scenario.platoon.n_mod".into(),
                        detail: "need at least one module".into(),
                    });
                }
                if !(0.0..=0.5).contains(dispersion) {
                    return Err(Error::Config {
                        field: "scenario.platoon.dispersion".into(),
                        detail: format!("must lie in [0, 0.5], got {dispersion}"),
                    });
                }
            }
            ScenarioConfig::Explicit {
                plants,
                controllers,
                adjacency,
                input_map,
                theta_true,
            } => {
                let n = plants.len();
                if n == 0 {
                    return Err(Error::Config {
                        field: "scenario.explicit.plants".into(),
                        detail: "need at least one plant".into(),
                    });
                }
                if controllers.len() != n {
                    return Err(Error::Config {
                        field: "scenario.explicit.controllers".into(),
                        detail: format!("{} controllers for {} plants", controllers.len(), n),
                    });
                }
                if adjacency.rows != n || adjacency.cols != n {
                    return Err(Error::Config {
                        field: "scenario.explicit.adjacency".into(),
                        detail: format!("must be {n}x{n}"),
                    });
                }
                if adjacency.entries.len() != n * n {
                    return Err(Error::Config {
                        field: "scenario.explicit.adjacency.entries".into(),
                        detail: "entry count must equal rows*cols".into(),
                    });
                }
                if input_map.rows != n {
                    return Err(Error::Config {
                        field: "scenario.explicit.input_map".into(),
                        detail: format!("must have {n} rows"),
                    });
                }
                if input_map.entries.len() != input_map.rows * input_map.cols {
                    return Err(Error::Config {
                        field: "scenario.explicit.input_map.entries".into(),
                        detail: "entry count must equal rows*cols".into(),
                    });
                }
                if let Some(tt) = theta_true {
                    if tt.len() != n {
                        return Err(Error::Config {
                            field: "scenario.explicit.theta_true".into(),
                            detail: format!("{} entries for {} plants", tt.len(), n),
                        });
                    }
                }
            }
        }
        match &self.ellipsoids {
            EllipsoidSource::Synthetic { relative_std, .. } => {
                if !(*relative_std > 0.0) {
                    return Err(Error::Config {
                        field: "ellipsoids.synthetic.relative_std".into(),
                        detail: "must be positive".into(),
                    });
                }
            }
            EllipsoidSource::Identify { n_id, ts, .. } => {
                if *n_id < 10 {
                    return Err(Error::Config {
                        field: "ellipsoids.identify.n_id".into(),
                        detail: "need at least 10 samples".into(),
                    });
                }
                if !(*ts > 0.0) {
                    return Err(Error::Config {
                        field: "ellipsoids.identify.ts".into(),
                        detail: "sampling period must be positive".into(),
                    });
                }
            }
            EllipsoidSource::Explicit { ellipsoids } => {
                if ellipsoids.is_empty() {
                    return Err(Error::Config {
                        field: "ellipsoids.explicit.ellipsoids".into(),
                        detail: "need at least one ellipsoid".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
            "scenario": {"platoon": {"n_mod": 2, "seed": 1, "dispersion": 0.1,
                         "controller": "improved"}},
            "ellipsoids": {"synthetic": {"relative_std": 0.05, "seed": 7}},
            "frequencies": {"list": {"hz": [0.13, 0.15, 0.17]}}
        }"#
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = AnalysisConfig::from_json(minimal_json()).unwrap();
        assert_eq!(cfg.probability, 0.95);
        assert_eq!(cfg.band_angles, 32);
        assert_eq!(cfg.mc_samples, 1000);
        assert!(!cfg.parallel);
        assert_eq!(cfg.embeddings, EmbeddingKind::DiscAndBand);
    }

    #[test]
    fn config_roundtrip() {
        let cfg = AnalysisConfig::from_json(minimal_json()).unwrap();
        let json = cfg.to_json().unwrap();
        let cfg2 = AnalysisConfig::from_json(&json).unwrap();
        let json2 = cfg2.to_json().unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn empty_frequency_list_names_field() {
        let text = r#"{
            "scenario": {"platoon": {"n_mod": 1, "seed": 1, "dispersion": 0.0,
                         "controller": "initial"}},
            "ellipsoids": {"synthetic": {"relative_std": 0.05, "seed": 7}},
            "frequencies": {"list": {"hz": []}}
        }"#;
        let err = AnalysisConfig::from_json(text).unwrap_err();
        assert!(err.to_string().contains("frequencies.hz"), "{err}");
    }

    #[test]
    fn log_range_grid() {
        let g = FrequencyGrid::LogRange {
            start_hz: 0.01,
            stop_hz: 1.0,
            count: 5,
        };
        let hz = g.to_hz().unwrap();
        assert_eq!(hz.len(), 5);
        assert!((hz[0] - 0.01).abs() < 1e-12);
        assert!((hz[4] - 1.0).abs() < 1e-12);
        assert!((hz[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bad_probability_rejected() {
        let text = r#"{
            "scenario": {"platoon": {"n_mod": 1, "seed": 1, "dispersion": 0.0,
                         "controller": "initial"}},
            "ellipsoids": {"synthetic": {"relative_std": 0.05, "seed": 7}},
            "frequencies": {"list": {"hz": [0.1]}},
            "probability": 1.5
        }"#;
        assert!(AnalysisConfig::from_json(text).is_err());
    }
}
