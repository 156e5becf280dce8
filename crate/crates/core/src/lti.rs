//! Transfer-function arithmetic, frequency responses, the star-product
//! interconnection, and construction of the performance interconnection
//! matrix from the network topology.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{max_singular_value, singular_values, ComplexMatrix};

/// Real polynomial, coefficients ascending in powers of the frequency
/// variable. The trailing coefficient is nonzero unless this is the zero
/// polynomial (stored as a single 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: &[f64]) -> Self {
        let mut c = coeffs.to_vec();
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Polynomial { coeffs: c }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(v: f64) -> Self {
        Polynomial::new(&[v])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn add(&self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in rhs.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::new(&out)
    }

    pub fn mul(&self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(&out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(&self.coeffs.iter().map(|&c| c * s).collect::<Vec<_>>())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// All complex roots by the Durand–Kerner iteration. Only meaningful for
    /// the desk-scale degrees used here (<= ~10).
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = self.degree();
        if self.is_zero() {
            return Err(Error::InvalidArgument(
                "zero polynomial has no root set".into(),
            ));
        }
        if deg == 0 {
            return Ok(Vec::new());
        }
        // Normalize to monic.
        let lead = *self.coeffs.last().unwrap();
        let monic: Vec<f64> = self.coeffs.iter().map(|&c| c / lead).collect();
        let eval_monic = |x: Complex64| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &c in monic.iter().rev() {
                acc = acc * x + c;
            }
            acc
        };
        // Cauchy-style radius bound keeps the initial ring around the roots.
        let radius = 1.0
            + monic[..deg]
                .iter()
                .map(|c| c.abs())
                .fold(0.0f64, f64::max);
        let mut z: Vec<Complex64> = (0..deg)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * (k as f64) / (deg as f64) + 0.4;
                Complex64::from_polar(radius * 0.8, angle)
            })
            .collect();
        let tol = 1e-13 * radius.max(1.0);
        for _ in 0..500 {
            let mut max_step = 0.0f64;
            for i in 0..deg {
                let mut denom = Complex64::new(1.0, 0.0);
                for j in 0..deg {
                    if i != j {
                        denom *= z[i] - z[j];
                    }
                }
                if denom.norm() < 1e-300 {
                    denom = Complex64::new(1e-300, 0.0);
                }
                let step = eval_monic(z[i]) / denom;
                z[i] -= step;
                max_step = max_step.max(step.norm());
            }
            if max_step < tol {
                return Ok(z);
            }
        }
        Err(Error::Solver(
            "polynomial root iteration failed to converge".into(),
        ))
    }
}

/// Frequency-variable domain of a transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Continuous,
    /// Discrete time with the sampling period in seconds.
    Discrete { ts: f64 },
}

/// Ratio of real polynomials in the frequency variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTransfer {
    pub num: Polynomial,
    pub den: Polynomial,
    pub domain: Domain,
}

impl RationalTransfer {
    pub fn new(num: Polynomial, den: Polynomial, domain: Domain) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidArgument(
                "transfer-function denominator is the zero polynomial".into(),
            ));
        }
        Ok(RationalTransfer { num, den, domain })
    }

    pub fn constant(v: f64, domain: Domain) -> Self {
        RationalTransfer {
            num: Polynomial::constant(v),
            den: Polynomial::constant(1.0),
            domain,
        }
    }
}

/// A point of the frequency grid: omega in rad/s plus the domain used to map
/// it to the evaluation variable (j*omega or e^{j*omega*Ts}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub omega: f64,
    pub domain: Domain,
}

impl FrequencyPoint {
    pub fn new(omega: f64, domain: Domain) -> Result<Self> {
        if !(omega >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frequency must be nonnegative, got {omega}"
            )));
        }
        Ok(FrequencyPoint { omega, domain })
    }

    pub fn continuous(omega: f64) -> Self {
        FrequencyPoint {
            omega,
            domain: Domain::Continuous,
        }
    }

    pub fn from_hz(f_hz: f64, domain: Domain) -> Result<Self> {
        Self::new(2.0 * std::f64::consts::PI * f_hz, domain)
    }

    /// The complex evaluation variable at this frequency.
    pub fn varpi(&self) -> Complex64 {
        match self.domain {
            Domain::Continuous => Complex64::new(0.0, self.omega),
            Domain::Discrete { ts } => Complex64::from_polar(1.0, self.omega * ts),
        }
    }
}

/// Frequency response num(varpi)/den(varpi).
pub fn freq_response(tf: &RationalTransfer, p: &FrequencyPoint) -> Result<Complex64> {
    let w = p.varpi();
    let den = tf.den.eval(w);
    if den.norm() <= 1e-12 * tf.den.norm() {
        return Err(Error::PoleAtFrequency(format!(
            "denominator magnitude {:.3e} at omega = {} rad/s",
            den.norm(),
            p.omega
        )));
    }
    Ok(tf.num.eval(w) / den)
}

/// Closed loop K G / (1 + K G) at the polynomial level. Only exact zero
/// leading coefficients common to numerator and denominator are cancelled.
pub fn closed_loop(g: &RationalTransfer, k: &RationalTransfer) -> Result<RationalTransfer> {
    if g.domain != k.domain {
        return Err(Error::InvalidArgument(
            "plant and controller live in different domains".into(),
        ));
    }
    let num = k.num.mul(&g.num);
    let den = k.den.mul(&g.den).add(&num);
    if den.is_zero() {
        return Err(Error::Singular(
            "closed loop 1 + K G is identically zero".into(),
        ));
    }
    // Cancel an exact common power of the frequency variable.
    let lead_zeros = |p: &Polynomial| p.coeffs().iter().take_while(|&&c| c == 0.0).count();
    let common = lead_zeros(&num).min(lead_zeros(&den)).min(den.degree());
    let (num, den) = if common > 0 && !num.is_zero() {
        (
            Polynomial::new(&num.coeffs()[common..]),
            Polynomial::new(&den.coeffs()[common..]),
        )
    } else {
        (num, den)
    };
    RationalTransfer::new(num, den, g.domain)
}

/// Interconnection matrix mapping stacked (y_bar, w_bar) to (r_bar, z_bar).
#[derive(Debug, Clone)]
pub struct InterconnectionMatrix {
    m: ComplexMatrix,
    n_mod: usize,
    n_w: usize,
    n_z: usize,
}

impl InterconnectionMatrix {
    pub fn new(m: ComplexMatrix, n_mod: usize, n_w: usize, n_z: usize) -> Result<Self> {
        if m.rows() != n_mod + n_z || m.cols() != n_mod + n_w {
            return Err(Error::Dimension(format!(
                "interconnection must be {}x{}, got {}x{}",
                n_mod + n_z,
                n_mod + n_w,
                m.rows(),
                m.cols()
            )));
        }
        Ok(InterconnectionMatrix { m, n_mod, n_w, n_z })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn n_mod(&self) -> usize {
        self.n_mod
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    /// y_bar -> r_bar block.
    pub fn m11(&self) -> ComplexMatrix {
        self.m.block(0, 0, self.n_mod, self.n_mod)
    }

    /// w_bar -> r_bar block.
    pub fn m12(&self) -> ComplexMatrix {
        self.m.block(0, self.n_mod, self.n_mod, self.n_w)
    }

    /// y_bar -> z_bar block.
    pub fn m21(&self) -> ComplexMatrix {
        self.m.block(self.n_mod, 0, self.n_z, self.n_mod)
    }

    /// w_bar -> z_bar block.
    pub fn m22(&self) -> ComplexMatrix {
        self.m.block(self.n_mod, self.n_mod, self.n_z, self.n_w)
    }
}

/// Tracking-error performance interconnection [[A, B],[A - I, B]] built from
/// the information-flow matrices: w_bar is the external reference, z_bar the
/// local tracking errors r_bar - y_bar.
pub fn build_interconnection(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<InterconnectionMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension("adjacency matrix must be square".into()));
    }
    if b.rows() != n {
        return Err(Error::Dimension(
            "input matrix row count must match adjacency dimension".into(),
        ));
    }
    let n_w = b.cols();
    let mut m = ComplexMatrix::zeros(2 * n, n + n_w);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, a.get(i, j));
            let mut low = a.get(i, j);
            if i == j {
                low -= Complex64::new(1.0, 0.0);
            }
            m.set(n + i, j, low);
        }
        for j in 0..n_w {
            m.set(i, n + j, b.get(i, j));
            m.set(n + i, n + j, b.get(i, j));
        }
    }
    InterconnectionMatrix::new(m, n, n_w, n)
}

/// Condition-number ceiling for the loop matrix `I - M11 diag(delta)`.
pub const INTERCONNECTION_COND_LIMIT: f64 = 1e12;

/// Worst-gain evaluation of the star product:
/// sigma_max(M22 + M21 D (I - M11 D)^{-1} M12) with D = diag(deltas).
pub fn global_gain(deltas: &[Complex64], m: &InterconnectionMatrix) -> Result<f64> {
    if deltas.len() != m.n_mod() {
        return Err(Error::Dimension(format!(
            "{} module responses supplied for an interconnection of {} modules",
            deltas.len(),
            m.n_mod()
        )));
    }
    let n = m.n_mod();
    let m11 = m.m11();
    // I - M11 D, with D applied on the right (scales columns).
    let mut loop_matrix = ComplexMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            let v = loop_matrix.get(i, j) - m11.get(i, j) * deltas[j];
            loop_matrix.set(i, j, v);
        }
    }
    let sv = singular_values(&loop_matrix);
    let smax = sv[0];
    let smin = *sv.last().unwrap();
    if !(smin > 0.0) || smax / smin > INTERCONNECTION_COND_LIMIT {
        return Err(Error::Singular(format!(
            "I - M11 diag(delta) has condition estimate above {INTERCONNECTION_COND_LIMIT:.1e}"
        )));
    }
    let x = loop_matrix.solve(&m.m12())?;
    // M21 D X
    let m21 = m.m21();
    let mut m21d = m21.clone();
    for i in 0..m21d.rows() {
        for j in 0..n {
            let v = m21d.get(i, j) * deltas[j];
            m21d.set(i, j, v);
        }
    }
    let t = m.m22().add(&m21d.mul(&x));
    Ok(max_singular_value(&t))
}
