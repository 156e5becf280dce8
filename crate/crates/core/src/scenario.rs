//! Builders for the automated-highway platoon benchmark: double-integrator
//! vehicle plants with first-order actuator lag, decentralized controllers,
//! the bidirectional chain topology, and two ellipsoid generators (synthetic
//! covariances, and a desk-scale output-error identification run).

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global::NetworkSpec;
use crate::lti::{
    build_interconnection, closed_loop, Domain, Polynomial, RationalTransfer,
};
use crate::numerics::ComplexMatrix;
use crate::uncertainty::{chi2_quantile, AffineRationalPlant, Ellipsoid};

pub const NOMINAL_TAU: f64 = 0.105;
pub const NOMINAL_GAIN: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControllerChoice {
    Initial,
    Improved,
    Custom(RationalTransfer),
}

/// The vehicle-platoon scenario: true parameters, controller, chain topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatoonScenario {
    pub n_mod: usize,
    /// Per-module true (tau_i, k_i).
    pub theta_true: Vec<[f64; 2]>,
    pub controller: ControllerChoice,
}

/// K(s) = (2s + 1)/(0.05s + 1).
pub fn initial_controller() -> RationalTransfer {
    RationalTransfer::new(
        Polynomial::new(&[1.0, 2.0]),
        Polynomial::new(&[1.0, 0.05]),
        Domain::Continuous,
    )
    .expect("static controller data")
}

/// K(s) = 12111 (s + 10)(s^2 + 0.9s + 0.4) / (s (s^2 + 111.6s + 6230)).
pub fn improved_controller() -> RationalTransfer {
    let num = Polynomial::new(&[10.0, 1.0])
        .mul(&Polynomial::new(&[0.4, 0.9, 1.0]))
        .scale(12111.0);
    let den = Polynomial::new(&[0.0, 1.0]).mul(&Polynomial::new(&[6230.0, 111.6, 1.0]));
    RationalTransfer::new(num, den, Domain::Continuous).expect("static controller data")
}

/// Vehicle plant G(s, theta) = k / (s^2 (tau s + 1)) as an affine family in
/// theta = (tau, k).
pub fn vehicle_plant() -> AffineRationalPlant {
    AffineRationalPlant::new(
        Polynomial::zero(),
        Polynomial::new(&[0.0, 0.0, 1.0]),
        vec![Polynomial::zero(), Polynomial::constant(1.0)],
        vec![Polynomial::new(&[0.0, 0.0, 0.0, 1.0]), Polynomial::zero()],
        Domain::Continuous,
    )
    .expect("static plant data")
}

impl PlatoonScenario {
    pub fn controller_tf(&self) -> RationalTransfer {
        match &self.controller {
            ControllerChoice::Initial => initial_controller(),
            ControllerChoice::Improved => improved_controller(),
            ControllerChoice::Custom(k) => k.clone(),
        }
    }

    pub fn plants(&self) -> Vec<AffineRationalPlant> {
        vec![vehicle_plant(); self.n_mod]
    }

    /// Full network: plants, controllers, and the tracking interconnection
    /// built from the chain adjacency.
    pub fn network(&self) -> Result<NetworkSpec> {
        let (a, b) = chain_adjacency(self.n_mod)?;
        let m = build_interconnection(&a, &b)?;
        Ok(NetworkSpec {
            plants: self.plants(),
            controllers: vec![self.controller_tf(); self.n_mod],
            interconnection: m,
            interconnection_overrides: Vec::new(),
        })
    }
}

/// True parameters drawn uniformly around the nominal values with the given
/// relative dispersion; deterministic per seed.
pub fn build_platoon(
    n_mod: usize,
    seed: u64,
    dispersion: f64,
    controller: ControllerChoice,
) -> Result<PlatoonScenario> {
    if n_mod < 1 {
        return Err(Error::InvalidArgument("n_mod must be at least 1".into()));
    }
    if !(0.0..=0.5).contains(&dispersion) {
        return Err(Error::InvalidArgument(format!(
            "dispersion must lie in [0, 0.5], got {dispersion}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta_true = Vec::with_capacity(n_mod);
    for _ in 0..n_mod {
        let tau = if dispersion == 0.0 {
            NOMINAL_TAU
        } else {
            NOMINAL_TAU * (1.0 + rng.random_range(-dispersion..dispersion))
        };
        let k = if dispersion == 0.0 {
            NOMINAL_GAIN
        } else {
            NOMINAL_GAIN * (1.0 + rng.random_range(-dispersion..dispersion))
        };
        theta_true.push([tau, k]);
    }
    Ok(PlatoonScenario {
        n_mod,
        theta_true,
        controller,
    })
}

/// Bidirectional-chain information flow: neighbors weighted 1/2, the last
/// node listening only to its predecessor, the external reference entering
/// at node 1. Every row of [A | B] sums to 1.
pub fn chain_adjacency(n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if n < 1 {
        return Err(Error::InvalidArgument("chain needs at least one node".into()));
    }
    let mut a = ComplexMatrix::zeros(n, n);
    let mut b = ComplexMatrix::zeros(n, 1);
    if n == 1 {
        // Degenerate chain: the single node tracks the reference directly.
        b.set(0, 0, Complex64::new(1.0, 0.0));
        return Ok((a, b));
    }
    let half = Complex64::new(0.5, 0.0);
    a.set(0, 1, half);
    b.set(0, 0, half);
    for i in 1..n - 1 {
        a.set(i, i - 1, half);
        a.set(i, i + 1, half);
    }
    a.set(n - 1, n - 2, Complex64::new(1.0, 0.0));
    Ok((a, b))
}

/// Synthetic ellipsoid generator: rotated diagonal covariance scaled to the
/// true parameters, center drawn from the matching Gaussian and resampled
/// until the truth lies inside (the identification premise).
pub fn synthetic_identification(
    scenario: &PlatoonScenario,
    relative_std: f64,
    probability: f64,
    seed: u64,
) -> Result<Vec<Ellipsoid>> {
    if !(relative_std > 0.0) {
        return Err(Error::InvalidArgument(
            "relative_std must be positive".into(),
        ));
    }
    let chi = chi2_quantile(probability, 2)?;
    let mut out = Vec::with_capacity(scenario.n_mod);
    for (i, theta) in scenario.theta_true.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64),
        );
        let s1 = relative_std * theta[0];
        let s2 = relative_std * theta[1];
        let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (c, s) = (phi.cos(), phi.sin());
        // P = R diag(s1^2, s2^2) R'
        let p = vec![
            c * c * s1 * s1 + s * s * s2 * s2,
            c * s * (s1 * s1 - s2 * s2),
            c * s * (s1 * s1 - s2 * s2),
            s * s * s1 * s1 + c * c * s2 * s2,
        ];
        let template = Ellipsoid::new(theta.to_vec(), p.clone(), chi)?;
        let chol = template.cholesky_factor().to_vec();
        let mut accepted = None;
        for _ in 0..100 {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            // theta_hat = theta_true + L z; truth containment means |z|^2 < chi.
            if z1 * z1 + z2 * z2 < chi {
                let hat = vec![
                    theta[0] + chol[0] * z1,
                    theta[1] + chol[2] * z1 + chol[3] * z2,
                ];
                accepted = Some(hat);
                break;
            }
        }
        let Some(hat) = accepted else {
            return Err(Error::Identification(format!(
                "module {i}: resampling cap exceeded while enforcing truth containment"
            )));
        };
        out.push(Ellipsoid::new(hat, p, chi)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Zero-order-hold discretization and discrete simulation.
// ---------------------------------------------------------------------------

/// Step-invariant (zero-order-hold) discrete equivalent of a stable,
/// strictly proper continuous transfer function with distinct poles and a
/// nonvanishing DC denominator, computed from the partial fractions of
/// T(s)/s.
pub fn zoh_discretize(t: &RationalTransfer, ts: f64) -> Result<RationalTransfer> {
    if t.domain != Domain::Continuous {
        return Err(Error::InvalidArgument(
            "zoh discretization expects a continuous-time system".into(),
        ));
    }
    if !(ts > 0.0) {
        return Err(Error::InvalidArgument("sampling period must be positive".into()));
    }
    let m = t.den.degree();
    if t.num.degree() >= m {
        return Err(Error::InvalidArgument(
            "zoh discretization expects a strictly proper system".into(),
        ));
    }
    let d0 = t.den.eval(Complex64::new(0.0, 0.0));
    if d0.norm() < 1e-12 * t.den.norm() {
        return Err(Error::Singular(
            "denominator vanishes at s = 0; the step response has no finite limit".into(),
        ));
    }
    let dc = t.num.eval(Complex64::new(0.0, 0.0)) / d0;
    let poles = t.den.roots()?;
    // Distinctness check, scaled to the pole spread.
    let scale = poles.iter().map(|p| p.norm()).fold(1.0f64, f64::max);
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            if (poles[i] - poles[j]).norm() < 1e-6 * scale {
                return Err(Error::Identification(
                    "repeated closed-loop poles; partial-fraction discretization unavailable"
                        .into(),
                ));
            }
        }
        if poles[i].norm() < 1e-9 * scale {
            return Err(Error::Singular("pole at the origin".into()));
        }
    }
    // Residues of T(s)/s at the denominator roots: N(p)/(p D'(p)).
    let dprime: Vec<f64> = {
        let c = t.den.coeffs();
        (1..c.len()).map(|i| c[i] * i as f64).collect()
    };
    let dprime_poly = Polynomial::new(&dprime);
    let lead = *t.den.coeffs().last().unwrap();
    let residues: Vec<Complex64> = poles
        .iter()
        .map(|&p| t.num.eval(p) / (p * dprime_poly.eval(p)))
        .collect();
    let q: Vec<Complex64> = poles.iter().map(|&p| (p * ts).exp()).collect();

    // T_d(z) = dc + sum_i R_i (z - 1) / (z - q_i), over the common
    // denominator prod (z - q_i).
    let one = Complex64::new(1.0, 0.0);
    let poly_mul = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    };
    let mut den_c = vec![one];
    for &qi in &q {
        den_c = poly_mul(&den_c, &[-qi, one]);
    }
    let mut num_c = den_c.iter().map(|&c| c * dc).collect::<Vec<_>>();
    for (i, (&ri, _)) in residues.iter().zip(&q).enumerate() {
        let mut partial = vec![one];
        for (j, &qj) in q.iter().enumerate() {
            if j != i {
                partial = poly_mul(&partial, &[-qj, one]);
            }
        }
        let term = poly_mul(&partial, &[-one, one]); // (z - 1)
        for (k, &c) in term.iter().enumerate() {
            num_c[k] += ri * c;
        }
        let _ = lead;
    }
    // Conjugate pole pairs make the coefficients real up to round-off.
    let imag_worst = num_c
        .iter()
        .chain(den_c.iter())
        .map(|c| c.im.abs())
        .fold(0.0f64, f64::max);
    let real_scale = num_c
        .iter()
        .chain(den_c.iter())
        .map(|c| c.re.abs())
        .fold(1.0f64, f64::max);
    if imag_worst > 1e-8 * real_scale {
        return Err(Error::Solver(format!(
            "discretized coefficients have imaginary residue {imag_worst:.3e}"
        )));
    }
    let num = Polynomial::new(&num_c.iter().map(|c| c.re).collect::<Vec<_>>());
    let den = Polynomial::new(&den_c.iter().map(|c| c.re).collect::<Vec<_>>());
    RationalTransfer::new(num, den, Domain::Discrete { ts })
}

/// Run the discrete filter over an input sequence (zero initial state).
pub fn simulate_discrete(tf: &RationalTransfer, input: &[f64]) -> Result<Vec<f64>> {
    let Domain::Discrete { .. } = tf.domain else {
        return Err(Error::InvalidArgument(
            "simulation expects a discrete-time system".into(),
        ));
    };
    let a = tf.den.coeffs();
    let b = tf.num.coeffs();
    let m = tf.den.degree();
    let am = a[m];
    if am.abs() < 1e-300 {
        return Err(Error::Singular("discrete denominator not normalizable".into()));
    }
    let mut y = vec![0.0; input.len()];
    for n in 0..input.len() {
        let mut acc = 0.0;
        // y[n] = (sum_l b_{m-l} u[n-l] - sum_{l>=1} a_{m-l} y[n-l]) / a_m
        for l in 0..=m {
            if n >= l {
                if m >= l {
                    let bi = m - l;
                    if bi < b.len() {
                        acc += b[bi] * input[n - l];
                    }
                }
                if l >= 1 {
                    acc -= a[m - l] * y[n - l];
                }
            }
        }
        y[n] = acc / am;
    }
    Ok(y)
}

/// All continuous-time poles strictly in the left half plane.
pub fn is_stable_continuous(tf: &RationalTransfer) -> Result<bool> {
    let roots = tf.den.roots()?;
    Ok(roots.iter().all(|p| p.re < 0.0))
}

/// Result of one output-error identification run.
#[derive(Debug, Clone)]
pub struct IdentifiedModule {
    pub theta_hat: [f64; 2],
    pub ellipsoid: Ellipsoid,
    pub ssr: f64,
    pub iterations: usize,
}

/// Simulate each local closed loop in discrete time (ZOH), perturb the
/// measured output with white noise, and fit (tau, k) by output-error least
/// squares with a damped Gauss-Newton started near the true values. The
/// covariance estimate is the standard Jacobian-based one. This is a
/// simplified stand-in for a full prediction-error identification.
#[allow(clippy::too_many_arguments)]
pub fn simulate_and_identify(
    scenario: &PlatoonScenario,
    n_id: usize,
    ts: f64,
    excitation_variance: f64,
    noise_variance: f64,
    probability: f64,
    seed: u64,
) -> Result<Vec<IdentifiedModule>> {
    if n_id < 10 {
        return Err(Error::InvalidArgument(
            "identification needs at least 10 samples".into(),
        ));
    }
    let k = scenario.controller_tf();
    let plant = vehicle_plant();
    let chi = chi2_quantile(probability, 2)?;
    let mut out = Vec::with_capacity(scenario.n_mod);

    let simulate_theta = |theta: &[f64; 2], excitation: &[f64]| -> Result<Vec<f64>> {
        let g = plant.at(theta)?;
        let t = closed_loop(&g, &k)?;
        let td = zoh_discretize(&t, ts)?;
        simulate_discrete(&td, excitation)
    };

    for (i, theta_true) in scenario.theta_true.iter().enumerate() {
        let g = plant.at(theta_true)?;
        let t = closed_loop(&g, &k)?;
        if !is_stable_continuous(&t)? {
            return Err(Error::Identification(format!(
                "module {i}: closed loop unstable with the scenario controller"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(i as u64),
        );
        let exc_std = excitation_variance.sqrt();
        let noise_std = noise_variance.sqrt();
        let excitation: Vec<f64> = (0..n_id)
            .map(|_| exc_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let clean = simulate_theta(theta_true, &excitation)?;
        let measured: Vec<f64> = clean
            .iter()
            .map(|y| y + noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect();

        // Damped Gauss-Newton (Levenberg-Marquardt ridge) on the output-error
        // cost, started at the truth (the identification experiment presumes
        // a consistent initializer).
        let ssr_of = |ysim: &[f64]| -> f64 {
            measured
                .iter()
                .zip(ysim)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let jacobian = |theta: &[f64; 2]| -> Result<Vec<[f64; 2]>> {
            let mut jac = vec![[0.0f64; 2]; n_id];
            for jcol in 0..2 {
                let h = 1e-6 * theta[jcol].abs().max(1e-9);
                let mut tp = *theta;
                tp[jcol] += h;
                let mut tm = *theta;
                tm[jcol] -= h;
                let yp = simulate_theta(&tp, &excitation)?;
                let ym = simulate_theta(&tm, &excitation)?;
                for n in 0..n_id {
                    jac[n][jcol] = (yp[n] - ym[n]) / (2.0 * h);
                }
            }
            Ok(jac)
        };
        let mut theta = *theta_true;
        let mut ysim = simulate_theta(&theta, &excitation)?;
        let mut ssr = ssr_of(&ysim);
        let mut iterations = 0;
        let mut lambda = 1e-6f64;
        let mut jt_j = [0.0f64; 4];
        for _ in 0..80 {
            iterations += 1;
            let jac = jacobian(&theta)?;
            let mut jt_r = [0.0f64; 2];
            jt_j = [0.0f64; 4];
            for n in 0..n_id {
                let r = measured[n] - ysim[n];
                for a in 0..2 {
                    jt_r[a] += jac[n][a] * r;
                    for b in 0..2 {
                        jt_j[a * 2 + b] += jac[n][a] * jac[n][b];
                    }
                }
            }
            // Ridge-damped step, with the ridge scaled to the diagonal.
            let mut improved = false;
            for _ in 0..40 {
                let d0 = jt_j[0] * (1.0 + lambda);
                let d3 = jt_j[3] * (1.0 + lambda);
                let det = d0 * d3 - jt_j[1] * jt_j[2];
                if det.abs() < 1e-300 {
                    break;
                }
                let delta = [
                    (d3 * jt_r[0] - jt_j[1] * jt_r[1]) / det,
                    (-jt_j[2] * jt_r[0] + d0 * jt_r[1]) / det,
                ];
                let trial = [theta[0] + delta[0], theta[1] + delta[1]];
                if trial[0] > 0.0 && trial[1] > 0.0 {
                    if let Ok(ytrial) = simulate_theta(&trial, &excitation) {
                        let s = ssr_of(&ytrial);
                        if s < ssr {
                            theta = trial;
                            ysim = ytrial;
                            ssr = s;
                            improved = true;
                            lambda = (lambda * 0.25).max(1e-12);
                            break;
                        }
                    }
                }
                lambda *= 8.0;
                if lambda > 1e12 {
                    break;
                }
            }
            if !improved {
                break;
            }
            // Converged when the gradient is negligible against the curvature.
            let grad_norm = jt_r[0].hypot(jt_r[1]);
            let curv = (jt_j[0] + jt_j[3]).max(1e-300);
            if grad_norm <= 1e-10 * curv * (theta[0].hypot(theta[1]) + 1.0) {
                break;
            }
        }
        // Refresh the normal matrix at the final iterate.
        {
            let jac = jacobian(&theta)?;
            jt_j = [0.0f64; 4];
            for row in &jac {
                for a in 0..2 {
                    for b in 0..2 {
                        jt_j[a * 2 + b] += row[a] * row[b];
                    }
                }
            }
        }

        // Covariance estimate sigma^2 (J'J)^{-1} at the optimum.
        let dof = (n_id - 2) as f64;
        let sigma2 = (ssr / dof).max(1e-300);
        let det = jt_j[0] * jt_j[3] - jt_j[1] * jt_j[2];
        if det <= 0.0 {
            return Err(Error::Identification(format!(
                "module {i}: covariance estimate is not positive definite"
            )));
        }
        let p = vec![
            sigma2 * jt_j[3] / det,
            -sigma2 * jt_j[1] / det,
            -sigma2 * jt_j[2] / det,
            sigma2 * jt_j[0] / det,
        ];
        let ellipsoid = Ellipsoid::new(theta.to_vec(), p, chi)?;
        out.push(IdentifiedModule {
            theta_hat: theta,
            ellipsoid,
            ssr,
            iterations,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Frequency-domain performance bound W.
// ---------------------------------------------------------------------------

/// Piecewise log-linear magnitude bound: knots (omega rad/s, dB), linear
/// interpolation in log10(omega), edge slopes extended beyond the knots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WBound {
    pub knots: Vec<(f64, f64)>,
}

impl WBound {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument(
                "W bound needs at least two knots".into(),
            ));
        }
        knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if knots.iter().any(|k| !(k.0 > 0.0)) {
            return Err(Error::InvalidArgument(
                "W bound knots need positive frequencies".into(),
            ));
        }
        Ok(WBound { knots })
    }

    /// Default tracking-performance bound: +40 dB/decade through 0 dB at the
    /// crossover, flattening at the cap. Chosen for shape, not tied to any
    /// specific dataset.
    pub fn default_tracking(crossover_rad_s: f64, cap_db: f64) -> WBound {
        let wc = crossover_rad_s;
        let w_cap = wc * 10f64.powf(cap_db / 40.0);
        WBound {
            knots: vec![
                (wc * 1e-3, -120.0),
                (wc, 0.0),
                (w_cap, cap_db),
                (w_cap * 1e3, cap_db),
            ],
        }
    }

    pub fn eval_db(&self, omega: f64) -> f64 {
        let x = omega.max(1e-300).log10();
        let k = &self.knots;
        let seg = |a: (f64, f64), b: (f64, f64), x: f64| -> f64 {
            let xa = a.0.log10();
            let xb = b.0.log10();
            if (xb - xa).abs() < 1e-15 {
                return a.1;
            }
            a.1 + (b.1 - a.1) * (x - xa) / (xb - xa)
        };
        if x <= k[0].0.log10() {
            return seg(k[0], k[1], x);
        }
        for w in k.windows(2) {
            if x <= w[1].0.log10() {
                return seg(w[0], w[1], x);
            }
        }
        seg(k[k.len() - 2], k[k.len() - 1], x)
    }
}
