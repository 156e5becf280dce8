//! Independent brute-force references: sampled worst-case gains (lower
//! bounds), dense-grid embedding tightness audits, and the decision-variable
//! complexity estimator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::global::NetworkSpec;
use crate::lti::{global_gain, FrequencyPoint};
use crate::uncertainty::{eval_factorized, Ellipsoid, FactorizationData, SampleMode};

/// Sampled worst-case gain at one frequency: the max over joint parameter
/// draws (independent per module, center + boundary/interior mix) of the
/// closed network gain. A valid lower bound on the true worst case;
/// deterministic given the seed, and nondecreasing in the sample count for a
/// fixed seed (draws form a prefix-stable stream).
pub fn worst_case_gain_sampled(
    network: &NetworkSpec,
    ellipsoids: &[Ellipsoid],
    p: &FrequencyPoint,
    samples_per_module: usize,
    seed: u64,
) -> Result<SampledGain> {
    if samples_per_module < 1 {
        return Err(Error::InvalidArgument(
            "samples_per_module must be at least 1".into(),
        ));
    }
    network.validate()?;
    let n = network.n_mod();
    let factored: Vec<FactorizationData> = network
        .plants
        .iter()
        .zip(&network.controllers)
        .map(|(plant, k)| crate::uncertainty::factorize_closed_loop(plant, k, p))
        .collect::<Result<_>>()?;

    // Per-module prefix-stable draw streams: index 0 is the center, then
    // boundary and interior draws alternate.
    let draws: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            let e = &ellipsoids[i];
            let module_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64);
            let half = samples_per_module / 2 + 1;
            let boundary = e.sample(module_seed, SampleMode::Boundary, half);
            let interior = e.sample(module_seed ^ 0x5DEE_CE66, SampleMode::Interior, half);
            let mut out = Vec::with_capacity(samples_per_module);
            out.push(e.theta_hat().to_vec());
            for t in 1..samples_per_module {
                let k = (t - 1) / 2;
                if (t - 1) % 2 == 0 {
                    out.push(boundary[k].clone());
                } else {
                    out.push(interior[k].clone());
                }
            }
            out
        })
        .collect();

    let m = network.interconnection_at(p.omega);
    let mut best = f64::NEG_INFINITY;
    let mut best_theta: Vec<Vec<f64>> = Vec::new();
    let mut skipped = 0usize;
    for t in 0..samples_per_module {
        let mut deltas = Vec::with_capacity(n);
        let mut joint = Vec::with_capacity(n);
        let mut ok = true;
        for i in 0..n {
            match eval_factorized(&factored[i], &draws[i][t]) {
                Ok(h) => {
                    deltas.push(h);
                    joint.push(draws[i][t].clone());
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            skipped += 1;
            continue;
        }
        match global_gain(&deltas, m) {
            Ok(g) => {
                if g > best {
                    best = g;
                    best_theta = joint;
                }
            }
            Err(_) => skipped += 1,
        }
    }
    if !best.is_finite() {
        return Err(Error::Singular(
            "every sampled interconnection was singular".into(),
        ));
    }
    Ok(SampledGain {
        gamma_lb: best,
        argmax_theta: best_theta,
        skipped_samples: skipped,
    })
}

#[derive(Debug, Clone)]
pub struct SampledGain {
    pub gamma_lb: f64,
    /// Joint parameter draw achieving the bound (outer index: module).
    pub argmax_theta: Vec<Vec<f64>>,
    /// Samples dropped because the loop matrix went singular.
    pub skipped_samples: usize,
}

/// Tightness report of one embedding against a dense grid over the
/// ellipsoid (polar parameterization through the Cholesky factor; the whole
/// interior is gridded because worst cases need not sit on the boundary).
#[derive(Debug, Clone)]
pub struct TightnessReport {
    /// Grid extremum: max |T - c| for a disc, max spread of Re(n* T) for a
    /// band.
    pub grid_extremum: f64,
    /// LMI optimum: the disc radius or band width.
    pub lmi_optimum: f64,
    /// lmi_optimum - grid_extremum; the grid is a lower bound on the true
    /// worst case, so negative slack beyond round-off flags unsoundness.
    pub slack: f64,
    pub grid_points: usize,
}

/// Dense-grid audit; only 2-parameter ellipsoids support the full grid.
pub fn embedding_tightness(
    f: &FactorizationData,
    e: &Ellipsoid,
    embedding: &Embedding,
    grid_resolution: usize,
) -> Result<TightnessReport> {
    if grid_resolution < 16 {
        return Err(Error::InvalidArgument(
            "grid resolution below 16 is meaningless for a tightness audit".into(),
        ));
    }
    if e.dim() != 2 {
        return Err(Error::InvalidArgument(
            "dense tightness grids require a 2-parameter ellipsoid".into(),
        ));
    }
    let chol = e.cholesky_factor();
    let sqrt_chi = e.chi().sqrt();
    let mut count = 0usize;
    let mut disc_max = 0.0f64;
    let mut proj_max = f64::NEG_INFINITY;
    let mut proj_min = f64::INFINITY;
    let (center, orientation) = match embedding {
        Embedding::Disc(d) => (d.center, Complex64::new(1.0, 0.0)),
        Embedding::Band(b) => (Complex64::new(0.0, 0.0), b.orientation),
    };
    for ir in 0..grid_resolution {
        // r = 0 adds only the center once; include it via ir = 0.
        let r = ir as f64 / (grid_resolution - 1) as f64;
        for ia in 0..grid_resolution {
            let ang = 2.0 * std::f64::consts::PI * ia as f64 / grid_resolution as f64;
            let d = [ang.cos(), ang.sin()];
            let scale = sqrt_chi * r;
            let theta = [
                e.theta_hat()[0] + scale * chol[0] * d[0],
                e.theta_hat()[1] + scale * (chol[2] * d[0] + chol[3] * d[1]),
            ];
            let Ok(h) = eval_factorized(f, &theta) else {
                continue;
            };
            count += 1;
            match embedding {
                Embedding::Disc(_) => {
                    disc_max = disc_max.max((h - center).norm());
                }
                Embedding::Band(_) => {
                    let proj = (orientation.conj() * h).re;
                    proj_max = proj_max.max(proj);
                    proj_min = proj_min.min(proj);
                }
            }
            if ir == 0 {
                break;
            }
        }
    }
    let (grid_extremum, lmi_optimum) = match embedding {
        Embedding::Disc(d) => (disc_max, d.radius),
        Embedding::Band(b) => (proj_max - proj_min, b.width()),
    };
    Ok(TightnessReport {
        grid_extremum,
        lmi_optimum,
        slack: lmi_optimum - grid_extremum,
        grid_points: count,
    })
}

/// Analysis mode of the complexity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplexityMode {
    Direct,
    HierarchicalSerial,
    HierarchicalParallel,
}

/// Decision-variable counts and the cubic interior-point cost model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub mode: ComplexityMode,
    /// Variables of the single direct LMI, when applicable.
    pub direct_vars: Option<usize>,
    /// Variables of one local embedding LMI.
    pub local_vars: Option<usize>,
    /// Number of local LMIs solved.
    pub local_solves: Option<usize>,
    /// Variables of the one global LMI.
    pub global_vars: Option<usize>,
    /// Sum of cubes of the solve sizes (parallel mode counts the local cost
    /// once, not N_mod times).
    pub predicted_cost: f64,
    /// Leading order in the module count.
    pub order_in_n_mod: String,
}

/// Closed-form decision-variable counts of the cost model: the direct
/// whole-network LMI has 2 + n(n-1)/2 variables with n = N_mod * n_theta_bar;
/// the hierarchical scheme solves N_mod * n_d local LMIs with
/// 3 + n_theta_bar (n_theta_bar - 1)/2 variables each plus one global LMI
/// with N_mod * n_d variables. Cost is cubic per solve.
pub fn complexity_estimate(
    n_mod: usize,
    n_theta_bar: usize,
    n_d: usize,
    mode: ComplexityMode,
) -> Result<ComplexityEstimate> {
    if n_mod == 0 || n_theta_bar == 0 || n_d == 0 {
        return Err(Error::InvalidArgument(
            "complexity arguments must be positive".into(),
        ));
    }
    let cube = |v: usize| (v as f64).powi(3);
    match mode {
        ComplexityMode::Direct => {
            let n_theta = n_mod * n_theta_bar;
            let vars = 2 + n_theta * (n_theta - 1) / 2;
            Ok(ComplexityEstimate {
                mode,
                direct_vars: Some(vars),
                local_vars: None,
                local_solves: None,
                global_vars: None,
                predicted_cost: cube(vars),
                order_in_n_mod: "O(N_mod^6)".into(),
            })
        }
        ComplexityMode::HierarchicalSerial | ComplexityMode::HierarchicalParallel => {
            let local_vars = 3 + n_theta_bar * (n_theta_bar - 1) / 2;
            let local_solves = n_mod * n_d;
            let global_vars = n_mod * n_d;
            let local_cost = if mode == ComplexityMode::HierarchicalSerial {
                local_solves as f64 * cube(local_vars)
            } else {
                n_d as f64 * cube(local_vars)
            };
            Ok(ComplexityEstimate {
                mode,
                direct_vars: None,
                local_vars: Some(local_vars),
                local_solves: Some(local_solves),
                global_vars: Some(global_vars),
                predicted_cost: local_cost + cube(global_vars),
                order_in_n_mod: "O(N_mod^3)".into(),
            })
        }
    }
}
