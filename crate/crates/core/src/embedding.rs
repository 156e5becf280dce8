//! Local hierarchical step: S-procedure LMI assembly for dissipativity of an
//! uncertain closed loop over a parameter ellipsoid, plus the minimum-radius
//! disc embedding and the tightest band embedding of its frequency-response
//! image.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::FrequencyPoint;
use crate::numerics::{ComplexMatrix, HermitianMatrix};
use crate::sdp::{self, LmiBlock, LmiProblem, SdpStatus, SolverOptions};
use crate::uncertainty::{eval_factorized, Ellipsoid, FactorizationData, SampleMode};

/// Quadratic-constraint coefficients (x, y, z): a response H satisfies the
/// property when x|H|^2 + 2 Re(y* H) + z <= 0. Convexity requires x >= 0;
/// for x > 0 the set is nonempty only if |y|^2 >= x z (not enforced here,
/// solver outputs guarantee it).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DissipativityTriplet {
    pub x: f64,
    pub y: Complex64,
    pub z: f64,
    pub frequency: FrequencyPoint,
}

impl DissipativityTriplet {
    pub fn new(x: f64, y: Complex64, z: f64, frequency: FrequencyPoint) -> Result<Self> {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "triplet x must be nonnegative for a convex set, got {x}"
            )));
        }
        Ok(DissipativityTriplet { x, y, z, frequency })
    }

    /// Value of the quadratic constraint at a response; nonpositive means the
    /// property holds at this point.
    pub fn evaluate(&self, h: Complex64) -> f64 {
        self.x * h.norm_sqr() + 2.0 * (self.y.conj() * h).re + self.z
    }
}

/// Multiplier certificate of the S-procedure: xi >= 0 and a real
/// antisymmetric matrix (stored row-major, dimension n_theta + 1).
///
/// Certificates live in whitened parameter coordinates (unit-ball
/// uncertainty), where the membership matrix is diag(I, -1) regardless of
/// the ellipsoid's shape or level; this keeps the LMI conditioning
/// independent of chi.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SProcedureCertificate {
    pub xi: f64,
    pub skew: Vec<f64>,
    pub dim: usize,
}

impl SProcedureCertificate {
    fn from_vars(vars: &[f64], dim: usize) -> Self {
        let xi = vars[0];
        let mut skew = vec![0.0; dim * dim];
        let mut k = 1;
        for p in 0..dim {
            for q in (p + 1)..dim {
                skew[p * dim + q] = vars[k];
                skew[q * dim + p] = -vars[k];
                k += 1;
            }
        }
        SProcedureCertificate {
            xi,
            skew,
            dim,
        }
    }
}

/// Number of independent entries of an antisymmetric matrix of dimension n.
fn skew_var_count(n: usize) -> usize {
    n * (n - 1) / 2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscEmbedding {
    pub frequency: FrequencyPoint,
    pub center: Complex64,
    pub radius: f64,
    pub certificate: SProcedureCertificate,
    pub solve_time_s: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandEmbedding {
    pub frequency: FrequencyPoint,
    /// Unit-modulus orientation of the band normal.
    pub orientation: Complex64,
    /// Upper and lower signed offsets, a1 >= a2; the width is a1 - a2.
    pub a1: f64,
    pub a2: f64,
    pub upper_certificate: SProcedureCertificate,
    pub lower_certificate: SProcedureCertificate,
    pub solve_time_s: f64,
    pub iterations: usize,
}

impl BandEmbedding {
    pub fn width(&self) -> f64 {
        self.a1 - self.a2
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Embedding {
    Disc(DiscEmbedding),
    Band(BandEmbedding),
}

/// Triplets induced by an embedding: one for a disc, two for a band.
pub fn triplets_of(embedding: &Embedding) -> Vec<DissipativityTriplet> {
    match embedding {
        Embedding::Disc(d) => vec![DissipativityTriplet {
            x: 1.0,
            y: -d.center,
            z: d.center.norm_sqr() - d.radius * d.radius,
            frequency: d.frequency,
        }],
        Embedding::Band(b) => vec![
            DissipativityTriplet {
                x: 0.0,
                y: b.orientation,
                z: -2.0 * b.a1,
                frequency: b.frequency,
            },
            DissipativityTriplet {
                x: 0.0,
                y: -b.orientation,
                z: 2.0 * b.a2,
                frequency: b.frequency,
            },
        ],
    }
}

/// Ellipsoid membership matrix B of the S-procedure:
/// [theta; 1]' B [theta; 1] < 0 iff theta lies inside the ellipsoid.
pub fn build_b(e: &Ellipsoid) -> HermitianMatrix {
    let n = e.dim();
    let pinv = e.precision();
    let theta_hat = e.theta_hat();
    let mut m = ComplexMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, Complex64::new(pinv[i * n + j], 0.0));
        }
    }
    // -P^{-1} theta_hat column / row.
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += pinv[i * n + j] * theta_hat[j];
        }
        m.set(i, n, Complex64::new(-acc, 0.0));
        m.set(n, i, Complex64::new(-acc, 0.0));
    }
    let mut corner = -e.chi();
    for i in 0..n {
        for j in 0..n {
            corner += theta_hat[i] * pinv[i * n + j] * theta_hat[j];
        }
    }
    m.set(n, n, Complex64::new(corner, 0.0));
    HermitianMatrix::new(m).expect("B is real symmetric by construction")
}

/// Re-express the factorization in whitened parameter coordinates
/// phi = (sqrt(chi) L)^{-1} (theta - theta_hat), so the uncertainty set
/// becomes the open unit ball. The response map is unchanged:
/// T = (e' + Z'_N phi)/(1 + Z'_D phi) with e' = T(theta_hat).
///
/// Without this normalization the S-procedure multiplier must scale like
/// 1/chi, and for tiny ellipsoids the xi*B term drowns the embedding
/// geometry below floating-point resolution inside the solver.
fn whiten(f: &FactorizationData, e: &Ellipsoid) -> Result<(FactorizationData, Ellipsoid)> {
    let n = f.n_theta();
    if n != e.dim() {
        return Err(Error::Dimension(format!(
            "factorization has {} parameters, ellipsoid {}",
            n,
            e.dim()
        )));
    }
    let theta_hat = e.theta_hat();
    let mut zd_hat = Complex64::new(0.0, 0.0);
    let mut zn_hat = Complex64::new(0.0, 0.0);
    for j in 0..n {
        zd_hat += f.z_d[j] * theta_hat[j];
        zn_hat += f.z_n[j] * theta_hat[j];
    }
    let denom = Complex64::new(1.0, 0.0) + zd_hat;
    if denom.norm() <= 1e-12 * (1.0 + zd_hat.norm()) {
        return Err(Error::Factorization {
            omega_rad_s: f.frequency.omega,
            detail: "closed-loop denominator vanishes at the ellipsoid center".into(),
        });
    }
    let chol = e.cholesky_factor();
    let scale = e.chi().sqrt();
    // Row-vector times the lower Cholesky factor: (Z L)_j = sum_k Z_k L_kj.
    let mut z_n = Vec::with_capacity(n);
    let mut z_d = Vec::with_capacity(n);
    for j in 0..n {
        let mut zn = Complex64::new(0.0, 0.0);
        let mut zd = Complex64::new(0.0, 0.0);
        for k in j..n {
            zn += f.z_n[k] * chol[k * n + j];
            zd += f.z_d[k] * chol[k * n + j];
        }
        z_n.push(zn * scale / denom);
        z_d.push(zd * scale / denom);
    }
    let e_new = (f.e + zn_hat) / denom;
    let whitened = FactorizationData {
        frequency: f.frequency,
        e: e_new,
        z_n,
        z_d,
    };
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let unit_ball = Ellipsoid::new(vec![0.0; n], eye, 1.0)?;
    Ok((whitened, unit_ball))
}

/// [Z_D | 1]* [Z_D | 1]: the Hermitian Gram matrix of the denominator row.
fn a1_matrix(f: &FactorizationData) -> HermitianMatrix {
    let n = f.n_theta();
    let mut v = ComplexMatrix::zeros(1, n + 1);
    for j in 0..n {
        v.set(0, j, f.z_d[j]);
    }
    v.set(0, n, Complex64::new(1.0, 0.0));
    HermitianMatrix::symmetrize(v.adjoint().mul(&v)).expect("rank-one Gram matrix")
}

/// [Z_D | 1]* [Z_N | e]: the (non-Hermitian) cross matrix.
fn a2_matrix(f: &FactorizationData) -> ComplexMatrix {
    let n = f.n_theta();
    let mut d = ComplexMatrix::zeros(1, n + 1);
    let mut nn = ComplexMatrix::zeros(1, n + 1);
    for j in 0..n {
        d.set(0, j, f.z_d[j]);
        nn.set(0, j, f.z_n[j]);
    }
    d.set(0, n, Complex64::new(1.0, 0.0));
    nn.set(0, n, f.e);
    d.adjoint().mul(&nn)
}

/// Hermitian coefficient of one skew entry: j(E_pq - E_qp), optionally framed
/// as the lower-right block of a larger matrix with `offset` leading rows.
fn skew_coeff(dim_inner: usize, p: usize, q: usize, offset: usize) -> HermitianMatrix {
    let dim = dim_inner + offset;
    let mut m = ComplexMatrix::zeros(dim, dim);
    m.set(offset + p, offset + q, Complex64::new(0.0, 1.0));
    m.set(offset + q, offset + p, Complex64::new(0.0, -1.0));
    HermitianMatrix::new(m).expect("skew coefficient is Hermitian")
}

/// Embed a Hermitian matrix as the lower-right block, negated if requested.
fn framed(h: &HermitianMatrix, offset: usize, negate: bool) -> HermitianMatrix {
    let n = h.dim();
    let dim = n + offset;
    let mut m = ComplexMatrix::zeros(dim, dim);
    let s = if negate { -1.0 } else { 1.0 };
    for i in 0..n {
        for j in 0..n {
            m.set(offset + i, offset + j, h.get(i, j) * s);
        }
    }
    HermitianMatrix::new(m).expect("framed Hermitian block")
}

/// y A2* + y* A2 + z A1 as a Hermitian matrix (case x = 0 left-hand side).
fn case2_constant(
    a1: &HermitianMatrix,
    a2: &ComplexMatrix,
    y: Complex64,
    z: f64,
) -> HermitianMatrix {
    let term = a2.adjoint().scale(y).add(&a2.scale(y.conj()));
    let total = term.add(&a1.matrix().scale(Complex64::new(z, 0.0)));
    HermitianMatrix::symmetrize(total).expect("case-2 matrix is Hermitian")
}

/// Assemble the S-procedure feasibility LMI for a fixed triplet: decision
/// variables are xi (bounded below at 0) and the strictly-upper-triangle
/// entries of the antisymmetric certificate matrix.
///
/// x > 0 selects the bordered block form (requires a nonempty disc,
/// alpha = |y|^2/x^2 - z/x >= 0); x = 0 selects the flat form.
pub fn assemble_lemma1(
    f: &FactorizationData,
    e: &Ellipsoid,
    t: &DissipativityTriplet,
) -> Result<LmiProblem> {
    if !(t.x >= 0.0) {
        return Err(Error::InvalidArgument("triplet x must be >= 0".into()));
    }
    let (f, e) = whiten(f, e)?;
    let (f, e) = (&f, &e);
    let np = f.n_theta() + 1;
    let n_skew = skew_var_count(np);
    let num_vars = 1 + n_skew;
    let mut problem = LmiProblem::new(num_vars);
    problem.lower_bounds[0] = Some(0.0);

    let a1 = a1_matrix(f);
    let b = build_b(e);

    if t.x > 0.0 {
        let alpha = t.y.norm_sqr() / (t.x * t.x) - t.z / t.x;
        if alpha < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "triplet with x > 0 encodes an empty disc (alpha = {alpha:.3e})"
            )));
        }
        // lambda = [Z_N + (y/x) Z_D | e + y/x]
        let yox = t.y / t.x;
        let dim = np + 1;
        let mut f0m = ComplexMatrix::zeros(dim, dim);
        f0m.set(0, 0, Complex64::new(-alpha, 0.0));
        for j in 0..f.n_theta() {
            let lam = f.z_n[j] + yox * f.z_d[j];
            f0m.set(0, 1 + j, lam);
            f0m.set(1 + j, 0, lam.conj());
        }
        let lam_last = f.e + yox;
        f0m.set(0, np, lam_last);
        f0m.set(np, 0, lam_last.conj());
        for i in 0..np {
            for j in 0..np {
                f0m.set(1 + i, 1 + j, -a1.get(i, j));
            }
        }
        let f0 = HermitianMatrix::new(f0m)?;
        let mut coeffs = Vec::with_capacity(num_vars);
        coeffs.push(framed(&b, 1, true));
        for p in 0..np {
            for q in (p + 1)..np {
                coeffs.push(skew_coeff(np, p, q, 1));
            }
        }
        problem.add_block(LmiBlock { f0, coeffs })?;
    } else {
        let a2 = a2_matrix(f);
        let f0 = case2_constant(&a1, &a2, t.y, t.z);
        let mut coeffs = Vec::with_capacity(num_vars);
        coeffs.push(framed(&b, 0, true));
        for p in 0..np {
            for q in (p + 1)..np {
                coeffs.push(skew_coeff(np, p, q, 0));
            }
        }
        problem.add_block(LmiBlock { f0, coeffs })?;
    }
    Ok(problem)
}

/// Outcome of a dissipativity check.
#[derive(Debug, Clone)]
pub enum DissipativityCheck {
    Holds(SProcedureCertificate),
    /// A sampled parameter inside the ellipsoid violating the constraint.
    Counterexample { theta: Vec<f64>, violation: f64 },
    /// LMI infeasible but no sampled violator found.
    IndeterminateBySampling { best_sampled_value: f64 },
}

const COUNTEREXAMPLE_SAMPLES: usize = 4096;

/// Decide whether the uncertain response satisfies the triplet over the whole
/// ellipsoid: feasibility of the S-procedure LMI, with a sampled
/// counterexample search on infeasibility.
pub fn check_dissipative(
    f: &FactorizationData,
    e: &Ellipsoid,
    t: &DissipativityTriplet,
    opts: &SolverOptions,
) -> Result<DissipativityCheck> {
    let problem = assemble_lemma1(f, e, t)?;
    let sol = sdp::solve(&problem, opts)?;
    if sol.status == SdpStatus::Optimal {
        return Ok(DissipativityCheck::Holds(SProcedureCertificate::from_vars(
            &sol.x,
            f.n_theta() + 1,
        )));
    }
    // Counterexample search: boundary first, then interior.
    let seed = 0x9E37_79B9_7F4A_7C15u64 ^ t.frequency.omega.to_bits();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (mode, mode_seed) in [
        (SampleMode::Boundary, seed),
        (SampleMode::Interior, seed.wrapping_add(1)),
    ] {
        for theta in e.sample(mode_seed, mode, COUNTEREXAMPLE_SAMPLES) {
            let Ok(h) = eval_factorized(f, &theta) else {
                continue;
            };
            let v = t.evaluate(h);
            if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
                best = Some((theta, v));
            }
        }
    }
    match best {
        Some((theta, violation)) if violation > 0.0 => {
            Ok(DissipativityCheck::Counterexample { theta, violation })
        }
        Some((_, v)) => Ok(DissipativityCheck::IndeterminateBySampling {
            best_sampled_value: v,
        }),
        None => Ok(DissipativityCheck::IndeterminateBySampling {
            best_sampled_value: f64::NEG_INFINITY,
        }),
    }
}

/// Minimum-radius disc embedding of the uncertain frequency response: an LMI
/// in (rho^2, Re c, Im c, xi, skew entries).
pub fn disc_embedding(
    f: &FactorizationData,
    e: &Ellipsoid,
    opts: &SolverOptions,
) -> Result<DiscEmbedding> {
    let (f, e) = whiten(f, e)?;
    let (f, e) = (&f, &e);
    let nt = f.n_theta();
    let np = nt + 1;
    let n_skew = skew_var_count(np);
    // Variables: [rho2, c_re, c_im, xi, skew...]
    let num_vars = 4 + n_skew;
    let mut problem = LmiProblem::new(num_vars);
    problem.objective[0] = 1.0;
    problem.lower_bounds[0] = Some(0.0);
    problem.lower_bounds[3] = Some(0.0);

    let a1 = a1_matrix(f);
    let b = build_b(e);
    let dim = np + 1;

    // F0: lambda row at c = 0 is [Z_N | e]; alpha term carried by rho2.
    let mut f0m = ComplexMatrix::zeros(dim, dim);
    for j in 0..nt {
        f0m.set(0, 1 + j, f.z_n[j]);
        f0m.set(1 + j, 0, f.z_n[j].conj());
    }
    f0m.set(0, np, f.e);
    f0m.set(np, 0, f.e.conj());
    for i in 0..np {
        for j in 0..np {
            f0m.set(1 + i, 1 + j, -a1.get(i, j));
        }
    }
    let f0 = HermitianMatrix::new(f0m)?;

    // rho2 coefficient: -1 in the top-left corner.
    let mut rho_m = ComplexMatrix::zeros(dim, dim);
    rho_m.set(0, 0, Complex64::new(-1.0, 0.0));
    let f_rho = HermitianMatrix::new(rho_m)?;

    // c coefficients enter the lambda row as -c [Z_D | 1].
    let mut dvec: Vec<Complex64> = (0..nt).map(|j| f.z_d[j]).collect();
    dvec.push(Complex64::new(1.0, 0.0));
    let mut cre_m = ComplexMatrix::zeros(dim, dim);
    let mut cim_m = ComplexMatrix::zeros(dim, dim);
    for (j, &v) in dvec.iter().enumerate() {
        let re_coeff = -v;
        cre_m.set(0, 1 + j, re_coeff);
        cre_m.set(1 + j, 0, re_coeff.conj());
        let im_coeff = -Complex64::new(0.0, 1.0) * v;
        cim_m.set(0, 1 + j, im_coeff);
        cim_m.set(1 + j, 0, im_coeff.conj());
    }
    let f_cre = HermitianMatrix::new(cre_m)?;
    let f_cim = HermitianMatrix::new(cim_m)?;

    let mut coeffs = vec![f_rho, f_cre, f_cim, framed(&b, 1, true)];
    for p in 0..np {
        for q in (p + 1)..np {
            coeffs.push(skew_coeff(np, p, q, 1));
        }
    }
    problem.add_block(LmiBlock { f0, coeffs })?;

    let sol = sdp::solve(&problem, opts)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!(
            "disc embedding solve ended with {:?}",
            sol.status
        )));
    }
    let rho2 = sol.x[0].max(0.0);
    let center = Complex64::new(sol.x[1], sol.x[2]);
    let mut cert_vars = vec![sol.x[3]];
    cert_vars.extend_from_slice(&sol.x[4..]);
    Ok(DiscEmbedding {
        frequency: f.frequency,
        center,
        radius: rho2.sqrt(),
        certificate: SProcedureCertificate::from_vars(&cert_vars, np),
        solve_time_s: sol.wall_time_s,
        iterations: sol.iterations,
    })
}

/// Tightest band with a fixed unit orientation: minimize a1 - a2 subject to
/// two flat-case LMIs sharing nothing but the objective.
pub fn band_embedding_fixed(
    f: &FactorizationData,
    e: &Ellipsoid,
    orientation: Complex64,
    opts: &SolverOptions,
) -> Result<BandEmbedding> {
    if (orientation.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "band orientation must be unit modulus, |n| = {}",
            orientation.norm()
        )));
    }
    let (f, e) = whiten(f, e)?;
    let (f, e) = (&f, &e);
    let nt = f.n_theta();
    let np = nt + 1;
    let n_skew = skew_var_count(np);
    // Variables: [a1, a2, xi1, skew1..., xi2, skew2...]
    let per_cert = 1 + n_skew;
    let num_vars = 2 + 2 * per_cert;
    let mut problem = LmiProblem::new(num_vars);
    problem.objective[0] = 1.0;
    problem.objective[1] = -1.0;
    problem.lower_bounds[2] = Some(0.0);
    problem.lower_bounds[2 + per_cert] = Some(0.0);

    let a1m = a1_matrix(f);
    let a2m = a2_matrix(f);
    let b = build_b(e);
    let zero = HermitianMatrix::zeros(np);

    // Upper plane: y = n, z = -2 a1.
    {
        let f0 = case2_constant(&a1m, &a2m, orientation, 0.0);
        let mut coeffs = Vec::with_capacity(num_vars);
        coeffs.push(a1m.scale(-2.0)); // a1
        coeffs.push(zero.clone()); // a2
        coeffs.push(framed(&b, 0, true)); // xi1
        for p in 0..np {
            for q in (p + 1)..np {
                coeffs.push(skew_coeff(np, p, q, 0));
            }
        }
        for _ in 0..per_cert {
            coeffs.push(zero.clone());
        }
        problem.add_block(LmiBlock { f0, coeffs })?;
    }
    // Lower plane: y = -n, z = 2 a2.
    {
        let f0 = case2_constant(&a1m, &a2m, -orientation, 0.0);
        let mut coeffs = Vec::with_capacity(num_vars);
        coeffs.push(zero.clone()); // a1
        coeffs.push(a1m.scale(2.0)); // a2
        coeffs.push(zero.clone()); // xi1 slot
        for _ in 0..n_skew {
            coeffs.push(zero.clone());
        }
        coeffs.push(framed(&b, 0, true)); // xi2
        for p in 0..np {
            for q in (p + 1)..np {
                coeffs.push(skew_coeff(np, p, q, 0));
            }
        }
        problem.add_block(LmiBlock { f0, coeffs })?;
    }

    let sol = sdp::solve(&problem, opts)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Solver(format!(
            "band embedding solve ended with {:?}",
            sol.status
        )));
    }
    let a1 = sol.x[0];
    let a2 = sol.x[1];
    let upper = SProcedureCertificate::from_vars(&sol.x[2..2 + per_cert], np);
    let lower = SProcedureCertificate::from_vars(&sol.x[2 + per_cert..], np);
    Ok(BandEmbedding {
        frequency: f.frequency,
        orientation,
        a1,
        a2,
        upper_certificate: upper,
        lower_certificate: lower,
        solve_time_s: sol.wall_time_s,
        iterations: sol.iterations,
    })
}

/// Best band over a uniform half-circle grid of orientations
/// n_k = exp(j pi k / num_angles); orientations and their negations define
/// the same band, so the half circle covers all of them.
pub fn band_embedding_best(
    f: &FactorizationData,
    e: &Ellipsoid,
    num_angles: usize,
    opts: &SolverOptions,
) -> Result<BandEmbedding> {
    if num_angles < 2 {
        return Err(Error::InvalidArgument(
            "band orientation search needs at least 2 angles".into(),
        ));
    }
    let mut best: Option<BandEmbedding> = None;
    let mut iterations = 0usize;
    let mut time = 0.0f64;
    for k in 0..num_angles {
        let angle = std::f64::consts::PI * (k as f64) / (num_angles as f64);
        let n = Complex64::from_polar(1.0, angle);
        let band = band_embedding_fixed(f, e, n, opts)?;
        iterations += band.iterations;
        time += band.solve_time_s;
        if best.as_ref().map_or(true, |b| band.width() < b.width()) {
            best = Some(band);
        }
    }
    let mut out = best.expect("at least one angle solved");
    out.iterations = iterations;
    out.solve_time_s = time;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{Domain, Polynomial, RationalTransfer};
    use crate::sdp::check_feasibility;
    use crate::uncertainty::{chi2_quantile, factorize_closed_loop, AffineRationalPlant};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn platoon_plant() -> AffineRationalPlant {
        AffineRationalPlant::new(
            Polynomial::zero(),
            Polynomial::new(&[0.0, 0.0, 1.0]),
            vec![Polynomial::zero(), Polynomial::constant(1.0)],
            vec![Polynomial::new(&[0.0, 0.0, 0.0, 1.0]), Polynomial::zero()],
            Domain::Continuous,
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

    fn test_ellipsoid(chi: f64) -> Ellipsoid {
        // Synthetic 5% relative-std covariance around the nominal platoon
        // parameters.
        let (tau, k) = (0.105, 0.95);
        let p = vec![(0.05 * tau) * (0.05 * tau), 0.0, 0.0, (0.05 * k) * (0.05 * k)];
        Ellipsoid::new(vec![tau, k], p, chi).unwrap()
    }

    fn platoon_factorization(f_hz: f64) -> FactorizationData {
        let plant = platoon_plant();
        let k = initial_controller();
        let p = FrequencyPoint::from_hz(f_hz, Domain::Continuous).unwrap();
        factorize_closed_loop(&plant, &k, &p).unwrap()
    }

    /// Dense polar grid over a 2-D ellipsoid; returns sampled responses.
    fn grid_responses(f: &FactorizationData, e: &Ellipsoid, res: usize) -> Vec<Complex64> {
        let chol = e.cholesky_factor();
        let n = e.dim();
        assert_eq!(n, 2);
        let mut out = Vec::with_capacity(res * res);
        for ir in 0..res {
            let r = (ir as f64 + 1.0) / res as f64;
            for ia in 0..res {
                let ang = 2.0 * std::f64::consts::PI * ia as f64 / res as f64;
                let d = [ang.cos(), ang.sin()];
                let scale = e.chi().sqrt() * r;
                let theta = [
                    e.theta_hat()[0] + scale * chol[0] * d[0],
                    e.theta_hat()[1] + scale * (chol[2] * d[0] + chol[3] * d[1]),
                ];
                if let Ok(h) = eval_factorized(f, &theta) {
                    out.push(h);
                }
            }
        }
        out
    }

    #[test]
    fn build_b_identity_case() {
        let e = Ellipsoid::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let b = build_b(&e);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(b.get(i, j).re, expect, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(b.get(i, 2).re, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(b.get(2, 2).re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn build_b_sign_matches_contains() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let b = build_b(&e);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let th = [
                0.105 * (1.0 + rng.random_range(-0.3..0.3)),
                0.95 * (1.0 + rng.random_range(-0.3..0.3)),
            ];
            let v = [th[0], th[1], 1.0];
            let mut form = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    form += v[i] * b.get(i, j).re * v[j];
                }
            }
            assert_eq!(form < 0.0, e.contains(&th).unwrap(), "theta {th:?}");
        }
    }

    #[test]
    fn build_b_chi_doubling_moves_boundary_inside() {
        // Identity covariance, chi = 4, and an exactly representable center
        // keep the boundary form value exact in floating point.
        let e = Ellipsoid::new(vec![0.25, -0.75], vec![1.0, 0.0, 0.0, 1.0], 4.0).unwrap();
        let doubled = e.with_chi(8.0).unwrap();
        for th in [[2.25, -0.75], [0.25, 1.25], [-1.75, -0.75], [0.25, -2.75]] {
            assert!(!e.contains(&th).unwrap(), "exact boundary must be outside");
            assert!(doubled.contains(&th).unwrap());
        }
        // Sampled near-boundary points of e are strictly inside the doubled
        // ellipsoid as well.
        for th in e.sample(4, SampleMode::Boundary, 64) {
            assert!(doubled.contains(&th).unwrap());
        }
    }

    #[test]
    fn lemma1_point_ellipsoid_small_disc_feasible() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(1e-12);
        let center = eval_factorized(&f, e.theta_hat()).unwrap();
        let t = DissipativityTriplet::new(
            1.0,
            -center,
            center.norm_sqr() - 1e-3 * 1e-3,
            f.frequency,
        )
        .unwrap();
        let problem = assemble_lemma1(&f, &e, &t).unwrap();
        let sol = sdp::solve(&problem, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
    }

    #[test]
    fn lemma1_disc_below_grid_worst_infeasible() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let center = eval_factorized(&f, e.theta_hat()).unwrap();
        let worst = grid_responses(&f, &e, 60)
            .iter()
            .map(|h| (h - center).norm())
            .fold(0.0, f64::max);
        let tight = DissipativityTriplet::new(
            1.0,
            -center,
            center.norm_sqr() - (worst * 0.9) * (worst * 0.9),
            f.frequency,
        )
        .unwrap();
        let sol = sdp::solve(
            &assemble_lemma1(&f, &e, &tight).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        let loose = DissipativityTriplet::new(
            1.0,
            -center,
            center.norm_sqr() - (worst * 1.1) * (worst * 1.1),
            f.frequency,
        )
        .unwrap();
        let sol = sdp::solve(
            &assemble_lemma1(&f, &e, &loose).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
    }

    #[test]
    fn lemma1_band_brackets_grid_extremum() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let n = c(1.0, 0.0);
        let grid_max = grid_responses(&f, &e, 60)
            .iter()
            .map(|h| (n.conj() * h).re)
            .fold(f64::NEG_INFINITY, f64::max);
        let opts = SolverOptions::default();
        // Feasible: upper plane 0.01 beyond the grid max.
        let t = DissipativityTriplet::new(0.0, n, -2.0 * (grid_max + 0.01), f.frequency).unwrap();
        let sol = sdp::solve(&assemble_lemma1(&f, &e, &t).unwrap(), &opts).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        // Infeasible: plane 0.01 inside the image.
        let t = DissipativityTriplet::new(0.0, n, -2.0 * (grid_max - 0.01), f.frequency).unwrap();
        let sol = sdp::solve(&assemble_lemma1(&f, &e, &t).unwrap(), &opts).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn check_dissipative_magnitude_bound() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let g_max = grid_responses(&f, &e, 60)
            .iter()
            .map(|h| h.norm())
            .fold(0.0, f64::max);
        let opts = SolverOptions::default();
        let hold = DissipativityTriplet::new(
            1.0,
            c(0.0, 0.0),
            -(g_max + 1.0) * (g_max + 1.0),
            f.frequency,
        )
        .unwrap();
        match check_dissipative(&f, &e, &hold, &opts).unwrap() {
            DissipativityCheck::Holds(cert) => {
                assert!(cert.xi >= 0.0);
            }
            other => panic!("expected holds, got {other:?}"),
        }
        let fail = DissipativityTriplet::new(
            1.0,
            c(0.0, 0.0),
            -(g_max * 0.98) * (g_max * 0.98),
            f.frequency,
        )
        .unwrap();
        match check_dissipative(&f, &e, &fail, &opts).unwrap() {
            DissipativityCheck::Counterexample { theta, violation } => {
                assert!(violation > 0.0);
                assert!(e.contains(&theta).unwrap() || e.quadratic_form(&theta).unwrap() <= e.chi() * (1.0 + 1e-9));
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn check_dissipative_point_ellipsoid_holds() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(1e-12);
        let center = eval_factorized(&f, e.theta_hat()).unwrap();
        let t = DissipativityTriplet::new(
            1.0,
            -center,
            center.norm_sqr() - 0.01,
            f.frequency,
        )
        .unwrap();
        assert!(matches!(
            check_dissipative(&f, &e, &t, &SolverOptions::default()).unwrap(),
            DissipativityCheck::Holds(_)
        ));
    }

    #[test]
    fn disc_point_ellipsoid_collapses() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(1e-12);
        let d = disc_embedding(&f, &e, &SolverOptions::default()).unwrap();
        let center = eval_factorized(&f, e.theta_hat()).unwrap();
        assert!(d.radius <= 1e-4, "radius {}", d.radius);
        assert!((d.center - center).norm() <= 1e-4);
    }

    #[test]
    fn disc_no_uncertainty_channels() {
        // Z_N = Z_D = 0: response is constant e regardless of theta.
        let f = FactorizationData {
            frequency: FrequencyPoint::continuous(1.0),
            e: c(0.4, -0.3),
            z_n: vec![c(0.0, 0.0), c(0.0, 0.0)],
            z_d: vec![c(0.0, 0.0), c(0.0, 0.0)],
        };
        let e = test_ellipsoid(5.99);
        let d = disc_embedding(&f, &e, &SolverOptions::default()).unwrap();
        assert!(d.radius <= 1e-4, "radius {}", d.radius);
        assert!((d.center - f.e).norm() <= 1e-4);
    }

    #[test]
    fn disc_tightness_against_grid() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let d = disc_embedding(&f, &e, &SolverOptions::default()).unwrap();
        let grid_max = grid_responses(&f, &e, 120)
            .iter()
            .map(|h| (h - d.center).norm())
            .fold(0.0, f64::max);
        assert!(
            d.radius >= grid_max - 1e-9,
            "radius {} below grid max {}",
            d.radius,
            grid_max
        );
        assert!(
            d.radius <= grid_max * 1.02,
            "radius {} more than 2% above grid max {}",
            d.radius,
            grid_max
        );
    }

    #[test]
    fn disc_containment_sampled() {
        let f = platoon_factorization(0.13);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let d = disc_embedding(&f, &e, &SolverOptions::default()).unwrap();
        for mode in [SampleMode::Boundary, SampleMode::Interior] {
            for theta in e.sample(17, mode, 2000) {
                let h = eval_factorized(&f, &theta).unwrap();
                assert!(
                    (h - d.center).norm() <= d.radius + 1e-8,
                    "sample escapes the disc"
                );
            }
        }
    }

    #[test]
    fn disc_monotone_in_chi() {
        let f = platoon_factorization(0.15);
        let chi = chi2_quantile(0.95, 2).unwrap();
        let d1 = disc_embedding(&f, &test_ellipsoid(chi), &SolverOptions::default()).unwrap();
        let d2 =
            disc_embedding(&f, &test_ellipsoid(2.0 * chi), &SolverOptions::default()).unwrap();
        assert!(d2.radius >= d1.radius - 1e-8);
    }

    #[test]
    fn disc_certificate_audits() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let opts = SolverOptions::default();
        let d = disc_embedding(&f, &e, &opts).unwrap();
        // Rebuild the fixed-triplet LMI at the returned disc and audit the
        // certificate against it.
        let t = &triplets_of(&Embedding::Disc(d.clone()))[0];
        let problem = assemble_lemma1(&f, &e, t).unwrap();
        let mut vars = vec![d.certificate.xi];
        let np = e.dim() + 1;
        for p in 0..np {
            for q in (p + 1)..np {
                vars.push(d.certificate.skew[p * np + q]);
            }
        }
        let rep = check_feasibility(&problem, &vars, &opts).unwrap();
        assert!(
            rep.feasible,
            "certificate fails audit, residuals {:?}",
            rep.block_residuals
        );
    }

    #[test]
    fn band_point_ellipsoid_collapses() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(1e-12);
        let n = c(0.6, 0.8);
        let band = band_embedding_fixed(&f, &e, n, &SolverOptions::default()).unwrap();
        let expect = (n.conj() * eval_factorized(&f, e.theta_hat()).unwrap()).re;
        assert_abs_diff_eq!(band.a1, expect, epsilon = 1e-4);
        assert_abs_diff_eq!(band.a2, expect, epsilon = 1e-4);
    }

    #[test]
    fn band_real_image_zero_imaginary_spread() {
        // All of e, Z_N, Z_D real: the response image over real theta is
        // real, so the band along n = j has vanishing width.
        let f = FactorizationData {
            frequency: FrequencyPoint::continuous(1.0),
            e: c(0.5, 0.0),
            z_n: vec![c(0.2, 0.0), c(0.1, 0.0)],
            z_d: vec![c(0.05, 0.0), c(0.0, 0.0)],
        };
        let e = test_ellipsoid(1.0);
        let band =
            band_embedding_fixed(&f, &e, c(0.0, 1.0), &SolverOptions::default()).unwrap();
        assert!(band.width() <= 1e-6, "width {}", band.width());
    }

    #[test]
    fn band_tightness_against_grid() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let n = c(1.0, 0.0);
        let band = band_embedding_fixed(&f, &e, n, &SolverOptions::default()).unwrap();
        let projections: Vec<f64> = grid_responses(&f, &e, 120)
            .iter()
            .map(|h| (n.conj() * h).re)
            .collect();
        let gmax = projections.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gmin = projections.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(band.a1 >= gmax - 1e-9 && band.a2 <= gmin + 1e-9);
        assert!(
            band.width() <= (gmax - gmin) * 1.02 + 1e-9,
            "width {} vs grid spread {}",
            band.width(),
            gmax - gmin
        );
    }

    #[test]
    fn band_best_nonincreasing_in_angles() {
        let f = platoon_factorization(0.15);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let opts = SolverOptions::default();
        let w2 = band_embedding_best(&f, &e, 2, &opts).unwrap().width();
        let w8 = band_embedding_best(&f, &e, 8, &opts).unwrap().width();
        assert!(w8 <= w2 + 1e-9);
    }

    #[test]
    fn band_best_prefers_thin_direction_of_segment_image() {
        // Rank-one Z_N with Z_D = 0: the image is a segment along z_n.
        let f = FactorizationData {
            frequency: FrequencyPoint::continuous(1.0),
            e: c(0.0, 0.0),
            z_n: vec![c(1.0, 0.0), c(0.0, 0.0)],
            z_d: vec![c(0.0, 0.0), c(0.0, 0.0)],
        };
        let e = Ellipsoid::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let opts = SolverOptions::default();
        let best = band_embedding_best(&f, &e, 16, &opts).unwrap();
        // Best band should be nearly perpendicular to the segment: width ~ 0,
        // while the worst fixed orientation (along the segment) has width 2.
        let worst = band_embedding_fixed(&f, &e, c(1.0, 0.0), &opts).unwrap();
        assert!(best.width() < 0.3 * worst.width());
    }

    #[test]
    fn triplets_of_disc_and_band() {
        let f = FrequencyPoint::continuous(1.0);
        let d = Embedding::Disc(DiscEmbedding {
            frequency: f,
            center: c(0.0, 0.0),
            radius: 2.0,
            certificate: SProcedureCertificate {
                xi: 0.0,
                skew: vec![0.0; 9],
                dim: 3,
            },
            solve_time_s: 0.0,
            iterations: 0,
        });
        let t = triplets_of(&d);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].x, 1.0);
        assert_eq!(t[0].y, c(0.0, 0.0));
        assert_abs_diff_eq!(t[0].z, -4.0, epsilon = 1e-15);

        let b = Embedding::Band(BandEmbedding {
            frequency: f,
            orientation: c(1.0, 0.0),
            a1: 1.0,
            a2: -1.0,
            upper_certificate: SProcedureCertificate {
                xi: 0.0,
                skew: vec![0.0; 9],
                dim: 3,
            },
            lower_certificate: SProcedureCertificate {
                xi: 0.0,
                skew: vec![0.0; 9],
                dim: 3,
            },
            solve_time_s: 0.0,
            iterations: 0,
        });
        let t = triplets_of(&b);
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].x, t[0].z), (0.0, -2.0));
        assert_eq!((t[1].x, t[1].z), (0.0, -2.0));
        assert_eq!(t[1].y, c(-1.0, 0.0));
    }

    #[test]
    fn produced_triplets_pass_dissipativity_on_samples() {
        let f = platoon_factorization(0.17);
        let e = test_ellipsoid(chi2_quantile(0.95, 2).unwrap());
        let opts = SolverOptions::default();
        let disc = Embedding::Disc(disc_embedding(&f, &e, &opts).unwrap());
        let band = Embedding::Band(band_embedding_best(&f, &e, 8, &opts).unwrap());
        for emb in [disc, band] {
            for t in triplets_of(&emb) {
                for theta in e.sample(33, SampleMode::Boundary, 512) {
                    let h = eval_factorized(&f, &theta).unwrap();
                    assert!(
                        t.evaluate(h) <= 1e-8,
                        "triplet violated on sample: {}",
                        t.evaluate(h)
                    );
                }
            }
        }
    }
}
