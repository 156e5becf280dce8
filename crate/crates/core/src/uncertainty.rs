//! Ellipsoidal uncertainty sets from identification, the chi-squared level
//! for a probability target, and the frequency-pointwise factorization of the
//! uncertain closed loop into (e + Z_N theta)/(1 + Z_D theta).

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{Domain, FrequencyPoint, Polynomial, RationalTransfer};
use crate::numerics::{jacobi_eig_sym, RealSymMatrix};

/// Parameter-space confidence ellipsoid
/// { theta | (theta - theta_hat)' P^{-1} (theta - theta_hat) < chi }.
///
/// Serializes as (theta_hat, dense P row-major, chi); deserialization
/// re-validates through the constructor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EllipsoidRepr", into = "EllipsoidRepr")]
pub struct Ellipsoid {
    theta_hat: Vec<f64>,
    /// Dense row-major covariance, symmetric positive definite.
    p: Vec<f64>,
    chi: f64,
    /// Lower Cholesky factor of P, cached at construction.
    chol: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidRepr {
    theta_hat: Vec<f64>,
    p: Vec<f64>,
    chi: f64,
}

impl TryFrom<EllipsoidRepr> for Ellipsoid {
    type Error = Error;
    fn try_from(r: EllipsoidRepr) -> Result<Self> {
        Ellipsoid::new(r.theta_hat, r.p, r.chi)
    }
}

impl From<Ellipsoid> for EllipsoidRepr {
    fn from(e: Ellipsoid) -> Self {
        EllipsoidRepr {
            theta_hat: e.theta_hat,
            p: e.p,
            chi: e.chi,
        }
    }
}

impl Ellipsoid {
    pub fn new(theta_hat: Vec<f64>, p_row_major: Vec<f64>, chi: f64) -> Result<Self> {
        let n = theta_hat.len();
        if p_row_major.len() != n * n {
            return Err(Error::Dimension(format!(
                "covariance must be {n}x{n} row-major"
            )));
        }
        if !(chi > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "chi must be positive, got {chi}"
            )));
        }
        let mut sym = RealSymMatrix::zeros(n);
        sym.data.copy_from_slice(&p_row_major);
        for i in 0..n {
            for j in (i + 1)..n {
                if (sym.get(i, j) - sym.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "covariance asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let chol = sym.cholesky().map_err(|_| {
            Error::NotPositiveDefinite("covariance must be positive definite".into())
        })?;
        let (eigs, _) = jacobi_eig_sym(&sym);
        let lmin = eigs[0];
        let lmax = *eigs.last().unwrap();
        if !(lmin > 0.0) || lmax / lmin > 1e12 {
            return Err(Error::Singular(
                "covariance condition number exceeds 1e12".into(),
            ));
        }
        Ok(Ellipsoid {
            theta_hat,
            p: p_row_major,
            chi,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn covariance(&self) -> &[f64] {
        &self.p
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn with_chi(&self, chi: f64) -> Result<Self> {
        Ellipsoid::new(self.theta_hat.clone(), self.p.clone(), chi)
    }

    pub fn with_center(&self, theta_hat: Vec<f64>) -> Result<Self> {
        Ellipsoid::new(theta_hat, self.p.clone(), self.chi)
    }

    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// Dense row-major P^{-1}, symmetrized exactly.
    pub fn precision(&self) -> Vec<f64> {
        let n = self.dim();
        // Invert via the Cholesky factor: P^{-1} = L^{-T} L^{-1}.
        let mut linv = vec![0.0; n * n];
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            for i in 0..n {
                let mut v = e[i];
                for k in 0..i {
                    v -= self.chol[i * n + k] * e[k];
                }
                e[i] = v / self.chol[i * n + i];
            }
            for i in 0..n {
                linv[i * n + col] = e[i];
            }
        }
        let mut pinv = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += linv[k * n + i] * linv[k * n + j];
                }
                pinv[i * n + j] = acc;
                pinv[j * n + i] = acc;
            }
        }
        pinv
    }

    /// (theta - theta_hat)' P^{-1} (theta - theta_hat) via the Cholesky
    /// factor: the squared norm of L^{-1}(theta - theta_hat).
    pub fn quadratic_form(&self, theta: &[f64]) -> Result<f64> {
        let n = self.dim();
        if theta.len() != n {
            return Err(Error::Dimension(format!(
                "theta has {} entries, ellipsoid lives in dimension {n}",
                theta.len()
            )));
        }
        let mut u: Vec<f64> = theta
            .iter()
            .zip(&self.theta_hat)
            .map(|(t, h)| t - h)
            .collect();
        for i in 0..n {
            let mut v = u[i];
            for k in 0..i {
                v -= self.chol[i * n + k] * u[k];
            }
            u[i] = v / self.chol[i * n + i];
        }
        Ok(u.iter().map(|x| x * x).sum())
    }

    /// Strict membership test: quadratic form < chi.
    pub fn contains(&self, theta: &[f64]) -> Result<bool> {
        Ok(self.quadratic_form(theta)? < self.chi)
    }

    fn map_unit(&self, dir: &[f64], radius: f64) -> Vec<f64> {
        let n = self.dim();
        let scale = self.chi.sqrt() * radius;
        let mut out = self.theta_hat.clone();
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += self.chol[i * n + k] * dir[k];
            }
            out[i] += scale * acc;
        }
        out
    }

    /// Deterministic sampling given a seed. Interior samples are uniform in
    /// the ellipsoid volume (radius u^{1/n}); boundary samples sit on the
    /// level set within round-off.
    pub fn sample(&self, seed: u64, mode: SampleMode, count: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm < 1e-12 {
                dir = vec![0.0; n];
                dir[0] = 1.0;
            } else {
                for d in dir.iter_mut() {
                    *d /= nrm;
                }
            }
            let radius = match mode {
                SampleMode::Boundary => 1.0,
                SampleMode::Interior => {
                    let u: f64 = rng.random::<f64>();
                    u.powf(1.0 / n as f64)
                }
            };
            out.push(self.map_unit(&dir, radius));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Interior,
    Boundary,
}

// ---------------------------------------------------------------------------
// Chi-squared quantile via the regularized incomplete gamma function.
// ---------------------------------------------------------------------------

/// ln Gamma(x) by the Lanczos approximation (g = 7, 9 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a+1,
/// Lentz continued fraction otherwise.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lg = ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..600 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() + a * x.ln() - x - lg).exp()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..600 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (a * x.ln() - x - lg).exp() * h;
        1.0 - q
    }
}

/// Chi-squared CDF with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: u32) -> f64 {
    reg_lower_gamma(dof as f64 / 2.0, x / 2.0)
}

/// Chi-squared quantile, inverted by bisection so that the CDF of the result
/// matches the probability to 1e-9.
pub fn chi2_quantile(probability: f64, dof: u32) -> Result<f64> {
    if !(probability > 0.0 && probability < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability must lie strictly in (0,1), got {probability}"
        )));
    }
    if dof == 0 {
        return Err(Error::InvalidArgument("dof must be positive".into()));
    }
    let mut hi = dof as f64;
    let mut expansions = 0;
    while chi2_cdf(hi, dof) < probability {
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::Solver("chi2 quantile bracket failed".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = chi2_cdf(mid, dof);
        if (c - probability).abs() <= 1e-12 {
            return Ok(mid);
        }
        if c < probability {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Affine rational plant and the closed-loop factorization.
// ---------------------------------------------------------------------------

/// Plant with affine parameter dependence:
/// num(s, theta) = n0(s) + sum_j theta_j nj(s),
/// den(s, theta) = d0(s) + sum_j theta_j dj(s).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineRationalPlant {
    pub base_num: Polynomial,
    pub base_den: Polynomial,
    pub num_inc: Vec<Polynomial>,
    pub den_inc: Vec<Polynomial>,
    pub domain: Domain,
}

impl AffineRationalPlant {
    pub fn new(
        base_num: Polynomial,
        base_den: Polynomial,
        num_inc: Vec<Polynomial>,
        den_inc: Vec<Polynomial>,
        domain: Domain,
    ) -> Result<Self> {
        if num_inc.len() != den_inc.len() {
            return Err(Error::Dimension(
                "numerator and denominator increments must have equal parameter counts".into(),
            ));
        }
        Ok(AffineRationalPlant {
            base_num,
            base_den,
            num_inc,
            den_inc,
            domain,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.num_inc.len()
    }

    /// Materialize the transfer function at a fixed parameter vector.
    pub fn at(&self, theta: &[f64]) -> Result<RationalTransfer> {
        if theta.len() != self.n_theta() {
            return Err(Error::Dimension(format!(
                "theta has {} entries, plant has {} parameters",
                theta.len(),
                self.n_theta()
            )));
        }
        let mut num = self.base_num.clone();
        let mut den = self.base_den.clone();
        for (j, &t) in theta.iter().enumerate() {
            num = num.add(&self.num_inc[j].scale(t));
            den = den.add(&self.den_inc[j].scale(t));
        }
        RationalTransfer::new(num, den, self.domain)
    }
}

/// Frequency-pointwise data (e, Z_N, Z_D) with
/// T(varpi, theta) = (e + Z_N theta) / (1 + Z_D theta).
#[derive(Debug, Clone)]
pub struct FactorizationData {
    pub frequency: FrequencyPoint,
    pub e: Complex64,
    pub z_n: Vec<Complex64>,
    pub z_d: Vec<Complex64>,
}

impl FactorizationData {
    pub fn n_theta(&self) -> usize {
        self.z_n.len()
    }
}

/// Factorize the closed loop K G(theta) / (1 + K G(theta)) at one frequency.
///
/// Division by the theta-free closed-loop denominator
/// D(varpi) = d0 DK + n0 NK normalizes the denominator constant term to 1;
/// frequencies where D vanishes are reported as factorization failures.
pub fn factorize_closed_loop(
    plant: &AffineRationalPlant,
    k: &RationalTransfer,
    p: &FrequencyPoint,
) -> Result<FactorizationData> {
    if plant.domain != k.domain {
        return Err(Error::InvalidArgument(
            "plant and controller live in different domains".into(),
        ));
    }
    if plant.domain != p.domain {
        return Err(Error::InvalidArgument(
            "frequency point domain differs from plant domain".into(),
        ));
    }
    let w = p.varpi();
    let nk = k.num.eval(w);
    let dk = k.den.eval(w);
    let n0 = plant.base_num.eval(w);
    let d0 = plant.base_den.eval(w);
    let normalizer = d0 * dk + n0 * nk;
    let nt = plant.n_theta();
    let mut z_n = Vec::with_capacity(nt);
    let mut z_d = Vec::with_capacity(nt);
    // Relative scale for the vanishing-normalizer test: the largest term
    // magnitude entering the theta-free or theta-linear denominator parts.
    let mut scale = (d0 * dk).norm().max((n0 * nk).norm());
    let mut raw = Vec::with_capacity(nt);
    for j in 0..nt {
        let njv = plant.num_inc[j].eval(w);
        let djv = plant.den_inc[j].eval(w);
        scale = scale.max((djv * dk).norm()).max((njv * nk).norm());
        raw.push((njv, djv));
    }
    if normalizer.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Factorization {
            omega_rad_s: p.omega,
            detail: format!(
                "theta-free closed-loop denominator magnitude {:.3e} below 1e-12 of term scale {:.3e}",
                normalizer.norm(),
                scale
            ),
        });
    }
    for (njv, djv) in raw {
        z_n.push(nk * njv / normalizer);
        z_d.push((djv * dk + njv * nk) / normalizer);
    }
    let e = nk * n0 / normalizer;
    Ok(FactorizationData {
        frequency: *p,
        e,
        z_n,
        z_d,
    })
}

/// Evaluate the factorized response at a parameter vector.
pub fn eval_factorized(f: &FactorizationData, theta: &[f64]) -> Result<Complex64> {
    if theta.len() != f.n_theta() {
        return Err(Error::Dimension(format!(
            "theta has {} entries, factorization has {}",
            theta.len(),
            f.n_theta()
        )));
    }
    let mut num = f.e;
    let mut den = Complex64::new(1.0, 0.0);
    for (j, &t) in theta.iter().enumerate() {
        num += f.z_n[j] * t;
        den += f.z_d[j] * t;
    }
    if den.norm() <= 1e-12 {
        return Err(Error::Singular(format!(
            "factorized denominator magnitude {:.3e} underflows",
            den.norm()
        )));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{closed_loop, freq_response};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_ellipsoid_2d() -> Ellipsoid {
        Ellipsoid::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn chi2_quantile_95_dof2_closed_form() {
        // dof = 2 closed form: -2 ln(1 - p).
        let q = chi2_quantile(0.95, 2).unwrap();
        assert_abs_diff_eq!(q, -2.0 * 0.05f64.ln(), epsilon = 1e-8);
        assert_abs_diff_eq!(q, 5.991464547107982, epsilon = 1e-7);
    }

    #[test]
    fn chi2_quantile_median_dof2() {
        let q = chi2_quantile(0.5, 2).unwrap();
        assert_abs_diff_eq!(q, 2.0 * 2.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn chi2_quantile_small_probability() {
        // Quantile decreases toward 0 in the probability -> 0 limit. Below
        // p ~ 1e-9 the quantile sits inside the absolute CDF tolerance, so
        // only nonincrease and smallness are meaningful there.
        for dof in [1u32, 2, 5, 11] {
            let mut prev = f64::INFINITY;
            for p in [1e-2, 1e-4, 1e-6, 1e-9] {
                let q = chi2_quantile(p, dof).unwrap();
                assert!(q >= 0.0 && q <= prev, "dof {dof}, p {p} gave {q}");
                prev = q;
            }
            assert!(prev < 0.2, "dof {dof}: quantile at 1e-9 still {prev}");
        }
    }

    #[test]
    fn chi2_quantile_rejects_bad_probability() {
        assert!(chi2_quantile(0.0, 2).is_err());
        assert!(chi2_quantile(1.0, 2).is_err());
        assert!(chi2_quantile(-0.5, 2).is_err());
    }

    #[test]
    fn chi2_cdf_matches_quadrature_oracle() {
        // Independent oracle: Simpson quadrature of the chi2 density after
        // the substitution x = u^2, which removes the dof = 1 endpoint
        // singularity (integrand becomes 2u * pdf(u^2), smooth at 0).
        let pdf = |x: f64, k: f64| {
            if x <= 0.0 {
                0.0
            } else {
                ((k / 2.0 - 1.0) * x.ln() - x / 2.0 - (k / 2.0) * 2.0f64.ln() - ln_gamma(k / 2.0))
                    .exp()
            }
        };
        // The u = 0 endpoint carries a finite limit for dof = 1; evaluating
        // at a tiny positive u reproduces it for every dof.
        let integrand = |u: f64, k: f64| {
            let u = u.max(1e-120);
            2.0 * u * pdf(u * u, k)
        };
        for dof in [1u32, 2, 3, 7] {
            for q in [0.5f64, 1.5, 4.0, 9.0] {
                let umax = q.sqrt();
                let n = 20000;
                let h = umax / n as f64;
                let mut acc = 0.0;
                for i in 0..n {
                    let a = i as f64 * h;
                    acc += h / 6.0
                        * (integrand(a, dof as f64)
                            + 4.0 * integrand(a + h / 2.0, dof as f64)
                            + integrand(a + h, dof as f64));
                }
                let c = chi2_cdf(q, dof);
                assert!(
                    (acc - c).abs() < 1e-9,
                    "dof {dof} q {q}: quadrature {acc} vs cdf {c}"
                );
            }
        }
    }

    #[test]
    fn chi2_quantile_monotone_in_probability() {
        for dof in [1u32, 2, 6] {
            let mut prev = 0.0;
            for i in 1..20 {
                let p = i as f64 / 20.0;
                let q = chi2_quantile(p, dof).unwrap();
                assert!(q > prev, "quantile not increasing at p = {p}, dof {dof}");
                prev = q;
            }
        }
    }

    #[test]
    fn contains_center_and_boundary() {
        let e = unit_ellipsoid_2d();
        assert!(e.contains(&[0.0, 0.0]).unwrap());
        // Boundary point: form value exactly chi -> strict inequality fails.
        assert!(!e.contains(&[1.0, 0.0]).unwrap());
    }

    #[test]
    fn quadratic_form_matches_direct_evaluation() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let p = vec![0.02, 0.01, 0.01, 0.03];
        let e = Ellipsoid::new(vec![0.5, 1.5], p.clone(), 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Direct route: explicit 2x2 inverse.
        let det = p[0] * p[3] - p[1] * p[2];
        let pinv = [p[3] / det, -p[1] / det, -p[2] / det, p[0] / det];
        for _ in 0..200 {
            let th = [
                0.5 + rng.random_range(-0.5..0.5),
                1.5 + rng.random_range(-0.5..0.5),
            ];
            let d = [th[0] - 0.5, th[1] - 1.5];
            let direct = d[0] * (pinv[0] * d[0] + pinv[1] * d[1])
                + d[1] * (pinv[2] * d[0] + pinv[3] * d[1]);
            let form = e.quadratic_form(&th).unwrap();
            assert_abs_diff_eq!(form, direct, epsilon = 1e-10 * (1.0 + direct));
            assert_eq!(e.contains(&th).unwrap(), direct < 3.0);
        }
    }

    #[test]
    fn sampling_empty_and_interior() {
        let e = unit_ellipsoid_2d();
        assert!(e.sample(1, SampleMode::Interior, 0).is_empty());
        for s in e.sample(2, SampleMode::Interior, 1000) {
            assert!(e.contains(&s).unwrap());
        }
    }

    #[test]
    fn sampling_boundary_on_level_set() {
        let e = Ellipsoid::new(vec![0.1, -0.4], vec![0.5, 0.2, 0.2, 0.9], 5.99).unwrap();
        for s in e.sample(3, SampleMode::Boundary, 500) {
            let f = e.quadratic_form(&s).unwrap();
            assert_abs_diff_eq!(f, 5.99, epsilon = 1e-9 * (1.0 + 5.99));
        }
    }

    #[test]
    fn sampling_deterministic() {
        let e = unit_ellipsoid_2d();
        let a = e.sample(9, SampleMode::Interior, 16);
        let b = e.sample(9, SampleMode::Interior, 16);
        assert_eq!(a, b);
    }

    #[test]
    fn ellipsoid_rejects_bad_covariance() {
        assert!(Ellipsoid::new(vec![0.0], vec![-1.0], 1.0).is_err());
        assert!(Ellipsoid::new(vec![0.0, 0.0], vec![1.0, 0.5, 0.4, 1.0], 1.0).is_err());
        assert!(Ellipsoid::new(vec![0.0], vec![1.0], 0.0).is_err());
    }

    fn platoon_plant(domain: Domain) -> AffineRationalPlant {
        // G(s, theta) = k / (s^2 (tau s + 1)), theta = (tau, k):
        // num: n0 = 0, n_tau = 0, n_k = 1; den: d0 = s^2, d_tau = s^3, d_k = 0.
        AffineRationalPlant::new(
            Polynomial::zero(),
            Polynomial::new(&[0.0, 0.0, 1.0]),
            vec![Polynomial::zero(), Polynomial::constant(1.0)],
            vec![Polynomial::new(&[0.0, 0.0, 0.0, 1.0]), Polynomial::zero()],
            domain,
        )
        .unwrap()
    }

    fn initial_controller() -> RationalTransfer {
        RationalTransfer::new(
            Polynomial::new(&[1.0, 2.0]),
            Polynomial::new(&[1.0, 0.05]),
            Domain::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn factorization_no_theta_dependence() {
        let plant = AffineRationalPlant::new(
            Polynomial::constant(0.95),
            Polynomial::new(&[1.0, 0.105]),
            vec![Polynomial::zero()],
            vec![Polynomial::zero()],
            Domain::Continuous,
        )
        .unwrap();
        let k = initial_controller();
        let p = FrequencyPoint::continuous(0.7);
        let f = factorize_closed_loop(&plant, &k, &p).unwrap();
        assert_eq!(f.z_n[0], Complex64::new(0.0, 0.0));
        assert_eq!(f.z_d[0], Complex64::new(0.0, 0.0));
        let g = plant.at(&[0.0]).unwrap();
        let t = closed_loop(&g, &k).unwrap();
        let direct = freq_response(&t, &p).unwrap();
        assert!((f.e - direct).norm() <= 1e-12 * direct.norm());
    }

    #[test]
    fn factorization_platoon_structure() {
        // For the platoon plant the tau channel enters only the denominator:
        // Z_N,tau = 0 and Z_D,tau = d_tau DK / (d0 DK) = s evaluated at varpi.
        let plant = platoon_plant(Domain::Continuous);
        let k = initial_controller();
        let p = FrequencyPoint::continuous(2.0 * std::f64::consts::PI * 0.15);
        let f = factorize_closed_loop(&plant, &k, &p).unwrap();
        assert_eq!(f.e, Complex64::new(0.0, 0.0));
        assert_eq!(f.z_n[0], Complex64::new(0.0, 0.0));
        let w = p.varpi();
        let expect_zd_tau = w;
        assert!((f.z_d[0] - expect_zd_tau).norm() <= 1e-12 * w.norm());
    }

    #[test]
    fn factorization_identity_random_points() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let plant = platoon_plant(Domain::Continuous);
        let k = initial_controller();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let omega = rng.random_range(0.05..30.0);
            let p = FrequencyPoint::continuous(omega);
            let f = factorize_closed_loop(&plant, &k, &p).unwrap();
            let theta = [rng.random_range(0.05..0.2), rng.random_range(0.5..1.5)];
            let fast = eval_factorized(&f, &theta).unwrap();
            let g = plant.at(&theta).unwrap();
            let t = closed_loop(&g, &k).unwrap();
            let direct = freq_response(&t, &p).unwrap();
            assert!(
                (fast - direct).norm() <= 1e-9 * direct.norm().max(1e-6),
                "identity failed at omega {omega}, theta {theta:?}"
            );
        }
    }

    #[test]
    fn eval_factorized_affine_cases() {
        let f = FactorizationData {
            frequency: FrequencyPoint::continuous(1.0),
            e: Complex64::new(0.5, -0.25),
            z_n: vec![Complex64::new(1.0, 1.0)],
            z_d: vec![Complex64::new(0.0, 0.0)],
        };
        // theta = 0 -> e.
        assert_eq!(eval_factorized(&f, &[0.0]).unwrap(), f.e);
        // Z_D = 0 -> affine in theta.
        let v = eval_factorized(&f, &[2.0]).unwrap();
        assert!((v - (f.e + Complex64::new(2.0, 2.0))).norm() < 1e-15);
    }

    #[test]
    fn eval_factorized_denominator_underflow() {
        let f = FactorizationData {
            frequency: FrequencyPoint::continuous(1.0),
            e: Complex64::new(1.0, 0.0),
            z_n: vec![Complex64::new(0.0, 0.0)],
            z_d: vec![Complex64::new(-1.0, 0.0)],
        };
        assert!(eval_factorized(&f, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn interior_samples_always_contained(seed in 0u64..256) {
            let e = Ellipsoid::new(
                vec![0.105, 0.95],
                vec![2.756e-5, 0.0, 0.0, 0.0022563],
                5.99,
            ).unwrap();
            for s in e.sample(seed, SampleMode::Interior, 64) {
                prop_assert!(e.contains(&s).unwrap());
            }
        }
    }
}
