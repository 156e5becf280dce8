//! Global hierarchical step: assemble the multiplier LMI from propagated
//! dissipativity triplets, minimize the squared gain bound, and sweep a
//! frequency grid with a parallelizable local step.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    band_embedding_best, disc_embedding, triplets_of, DissipativityTriplet, Embedding,
};
use crate::error::{Error, Result};
use crate::lti::{FrequencyPoint, InterconnectionMatrix, RationalTransfer};
use crate::numerics::{ComplexMatrix, HermitianMatrix};
use crate::sdp::{self, LmiBlock, LmiProblem, SdpStatus, SolverOptions};
use crate::uncertainty::{factorize_closed_loop, AffineRationalPlant, Ellipsoid};

/// Per-subsystem, per-property triplets at one frequency. Every subsystem
/// carries the same property count.
#[derive(Debug, Clone)]
pub struct TripletBundle {
    pub frequency: FrequencyPoint,
    /// Outer index: subsystem; inner: property (1..=n_d).
    pub per_subsystem: Vec<Vec<DissipativityTriplet>>,
}

impl TripletBundle {
    pub fn new(
        frequency: FrequencyPoint,
        per_subsystem: Vec<Vec<DissipativityTriplet>>,
    ) -> Result<Self> {
        if per_subsystem.is_empty() {
            return Err(Error::InvalidArgument("bundle has no subsystems".into()));
        }
        let n_d = per_subsystem[0].len();
        if n_d == 0 {
            return Err(Error::InvalidArgument("bundle has no properties".into()));
        }
        for (i, props) in per_subsystem.iter().enumerate() {
            if props.len() != n_d {
                return Err(Error::Dimension(format!(
                    "subsystem {i} carries {} properties, expected {n_d}",
                    props.len()
                )));
            }
            for t in props {
                if !(t.x >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "subsystem {i} has a triplet with x = {} < 0",
                        t.x
                    )));
                }
            }
        }
        Ok(TripletBundle {
            frequency,
            per_subsystem,
        })
    }

    pub fn n_mod(&self) -> usize {
        self.per_subsystem.len()
    }

    pub fn n_d(&self) -> usize {
        self.per_subsystem[0].len()
    }
}

/// Lower bound on every multiplier entry (strict positivity margin).
pub const MULTIPLIER_FLOOR: f64 = 1e-9;

/// Certified upper bound with its multipliers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalCertificate {
    pub gamma_ub: f64,
    pub gamma_ub_db: f64,
    /// Multiplier diagonals, outer index property k, inner subsystem i.
    pub multipliers: Vec<Vec<f64>>,
    pub solver_status: SdpStatus,
    pub solver_iterations: usize,
    pub solve_time_s: f64,
}

pub fn to_db(gain: f64) -> f64 {
    20.0 * gain.max(1e-300).log10()
}

/// Build the multiplier LMI: variables are gamma^2 followed by the
/// N_mod * N_d multiplier entries (property-major). The congruence
/// (M; I)* N (M; I) >= eps I is flipped into the solver's `<= 0` form.
pub fn assemble_theorem3(
    m: &InterconnectionMatrix,
    bundle: &TripletBundle,
) -> Result<LmiProblem> {
    let n = m.n_mod();
    if bundle.n_mod() != n {
        return Err(Error::Dimension(format!(
            "bundle has {} subsystems, interconnection {}",
            bundle.n_mod(),
            n
        )));
    }
    let n_w = m.n_w();
    let n_d = bundle.n_d();
    let dim = n + n_w;
    let num_vars = 1 + n * n_d;
    let mut problem = LmiProblem::new(num_vars);
    problem.objective[0] = 1.0;
    problem.lower_bounds[0] = Some(0.0);
    for v in problem.lower_bounds.iter_mut().skip(1) {
        *v = Some(MULTIPLIER_FLOOR);
    }

    // Row i of M (the reference row of subsystem i) as a 1 x (N + n_w) slice.
    let mm = m.matrix();
    let row = |i: usize| -> ComplexMatrix {
        let mut r = ComplexMatrix::zeros(1, dim);
        for j in 0..dim {
            r.set(0, j, mm.get(i, j));
        }
        r
    };

    // Constant part: the performance rows enter as -M_z* M_z; flipping the
    // constraint turns it into +M_z* M_z.
    let n_z = m.n_z();
    let mut mz = ComplexMatrix::zeros(n_z, dim);
    for i in 0..n_z {
        for j in 0..dim {
            mz.set(i, j, mm.get(n + i, j));
        }
    }
    let f0 = HermitianMatrix::symmetrize(mz.adjoint().mul(&mz))?;

    // gamma^2 coefficient: -diag(0_N, I_{n_w}).
    let mut gm = ComplexMatrix::zeros(dim, dim);
    for j in 0..n_w {
        gm.set(n + j, n + j, Complex64::new(-1.0, 0.0));
    }
    let f_gamma = HermitianMatrix::new(gm)?;

    let mut coeffs = vec![f_gamma];
    for k in 0..n_d {
        for i in 0..n {
            let t = &bundle.per_subsystem[i][k];
            let mi = row(i);
            let mut ui = ComplexMatrix::zeros(1, dim);
            ui.set(0, i, Complex64::new(1.0, 0.0));
            // z m_i* m_i + y u_i* m_i + y* m_i* u_i + x u_i* u_i
            let mut a = mi.adjoint().mul(&mi).scale(Complex64::new(t.z, 0.0));
            a = a.add(&ui.adjoint().mul(&mi).scale(t.y));
            a = a.add(&mi.adjoint().mul(&ui).scale(t.y.conj()));
            a = a.add(&ui.adjoint().mul(&ui).scale(Complex64::new(t.x, 0.0)));
            // Constraint flip: contribute -A_ik.
            let coeff = HermitianMatrix::symmetrize(a.scale(Complex64::new(-1.0, 0.0)))?;
            coeffs.push(coeff);
        }
    }
    problem.add_block(LmiBlock { f0, coeffs })?;
    Ok(problem)
}

/// Minimize the certified squared gain directly; the bisection route in the
/// sdp module serves as a cross-validation path.
pub fn gamma_upper_bound(
    m: &InterconnectionMatrix,
    bundle: &TripletBundle,
    opts: &SolverOptions,
) -> Result<GlobalCertificate> {
    let problem = assemble_theorem3(m, bundle)?;
    let sol = sdp::solve(&problem, opts)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible | SdpStatus::Unbounded => {
            return Err(Error::CertificateUnbounded(format!(
                "no finite gain bound certified with these triplets (solver: {:?})",
                sol.status
            )));
        }
        SdpStatus::MaxIterations => {
            return Err(Error::Solver(
                "multiplier LMI did not converge within the iteration budget".into(),
            ));
        }
    }
    let gamma_sq = sol.x[0].max(0.0);
    let n = m.n_mod();
    let n_d = bundle.n_d();
    let mut multipliers = Vec::with_capacity(n_d);
    for k in 0..n_d {
        let mut tk = Vec::with_capacity(n);
        for i in 0..n {
            tk.push(sol.x[1 + k * n + i]);
        }
        multipliers.push(tk);
    }
    let gamma = gamma_sq.sqrt();
    Ok(GlobalCertificate {
        gamma_ub: gamma,
        gamma_ub_db: to_db(gamma),
        multipliers,
        solver_status: sol.status,
        solver_iterations: sol.iterations,
        solve_time_s: sol.wall_time_s,
    })
}

/// Cross-validation path: bisection on feasibility of the multiplier LMI in
/// gamma^2 over [0, hi].
pub fn gamma_upper_bound_bisection(
    m: &InterconnectionMatrix,
    bundle: &TripletBundle,
    hi: f64,
    tol: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let template = assemble_theorem3(m, bundle)?;
    let feasible_at = |gamma_sq: f64| -> bool {
        // Freeze gamma^2: fold its coefficient into F0 and drop the variable.
        let mut frozen = LmiProblem::new(template.num_vars - 1);
        frozen.objective = vec![0.0; template.num_vars - 1];
        frozen.lower_bounds = template.lower_bounds[1..].to_vec();
        for b in &template.blocks {
            let f0 = HermitianMatrix::symmetrize(
                b.f0.matrix()
                    .add(&b.coeffs[0].matrix().scale(Complex64::new(gamma_sq, 0.0))),
            )
            .expect("affine Hermitian combination");
            let coeffs = b.coeffs[1..].to_vec();
            frozen.add_block(LmiBlock { f0, coeffs }).expect("same dims");
        }
        matches!(
            sdp::solve(&frozen, opts).map(|s| s.status),
            Ok(SdpStatus::Optimal)
        )
    };
    let g2 = sdp::minimize_scalar_by_bisection(feasible_at, 0.0, hi * hi, tol)?;
    Ok(g2.sqrt())
}

/// Which embeddings the local step computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Disc,
    DiscAndBand,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kind: EmbeddingKind,
    pub band_angles: usize,
    pub solver: SolverOptions,
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kind: EmbeddingKind::DiscAndBand,
            band_angles: 32,
            solver: SolverOptions::default(),
            parallel: false,
        }
    }
}

/// The uncertain network: per-subsystem plants and controllers plus the
/// performance interconnection. An optional per-frequency table overrides
/// the constant interconnection at matching grid points.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub plants: Vec<AffineRationalPlant>,
    pub controllers: Vec<RationalTransfer>,
    pub interconnection: InterconnectionMatrix,
    /// (omega rad/s, matrix) pairs; matched within 1e-12 relative.
    pub interconnection_overrides: Vec<(f64, InterconnectionMatrix)>,
}

impl NetworkSpec {
    pub fn n_mod(&self) -> usize {
        self.plants.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.plants.len() != self.controllers.len() {
            return Err(Error::Dimension(format!(
                "{} plants vs {} controllers",
                self.plants.len(),
                self.controllers.len()
            )));
        }
        if self.interconnection.n_mod() != self.plants.len() {
            return Err(Error::Dimension(format!(
                "interconnection built for {} modules, network has {}",
                self.interconnection.n_mod(),
                self.plants.len()
            )));
        }
        Ok(())
    }

    pub fn interconnection_at(&self, omega: f64) -> &InterconnectionMatrix {
        for (w, m) in &self.interconnection_overrides {
            if (w - omega).abs() <= 1e-12 * (1.0 + omega.abs()) {
                return m;
            }
        }
        &self.interconnection
    }
}

/// Everything computed for one grid frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyRecord {
    pub omega_rad_s: f64,
    pub freq_hz: f64,
    /// None when the analysis failed at this frequency (see `error`).
    pub gamma_ub: Option<f64>,
    pub gamma_ub_db: Option<f64>,
    pub gamma_lb: Option<f64>,
    pub gamma_lb_db: Option<f64>,
    pub embeddings: Vec<Vec<Embedding>>,
    pub multipliers: Vec<Vec<f64>>,
    pub error: Option<String>,
    pub solve_time_s: f64,
}

/// Wall times of the sweep phases.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepTiming {
    pub local_s: f64,
    pub global_s: f64,
    pub total_s: f64,
    pub parallel: bool,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<FrequencyRecord>,
    pub timing: SweepTiming,
}

fn embed_one(
    network: &NetworkSpec,
    ellipsoids: &[Ellipsoid],
    module: usize,
    p: &FrequencyPoint,
    cfg: &SweepConfig,
) -> Result<Vec<Embedding>> {
    let f = factorize_closed_loop(&network.plants[module], &network.controllers[module], p)?;
    let mut out = Vec::new();
    out.push(Embedding::Disc(disc_embedding(
        &f,
        &ellipsoids[module],
        &cfg.solver,
    )?));
    if cfg.kind == EmbeddingKind::DiscAndBand {
        out.push(Embedding::Band(band_embedding_best(
            &f,
            &ellipsoids[module],
            cfg.band_angles,
            &cfg.solver,
        )?));
    }
    Ok(out)
}

/// Sweep the frequency grid: embed every (subsystem, frequency) pair in the
/// local step, then solve the multiplier LMI per frequency. Serial and
/// parallel execution produce identical records; per-frequency failures are
/// recorded and the sweep continues.
pub fn frequency_sweep(
    network: &NetworkSpec,
    ellipsoids: &[Ellipsoid],
    grid: &[FrequencyPoint],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    network.validate()?;
    if ellipsoids.len() != network.n_mod() {
        return Err(Error::Dimension(format!(
            "{} ellipsoids for {} modules",
            ellipsoids.len(),
            network.n_mod()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("frequency grid is empty".into()));
    }
    for w in grid.windows(2) {
        if w[1].omega <= w[0].omega {
            return Err(Error::InvalidArgument(
                "frequency grid must be strictly ascending".into(),
            ));
        }
    }
    let n = network.n_mod();
    let total = Instant::now();

    // Local step: a map over (subsystem x frequency) tasks into indexed
    // slots, so the schedule cannot affect the results.
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|j| (0..n).map(move |i| (j, i)))
        .collect();
    let local_start = Instant::now();
    let local: Vec<Result<Vec<Embedding>>> = if cfg.parallel {
        tasks
            .par_iter()
            .map(|&(j, i)| embed_one(network, ellipsoids, i, &grid[j], cfg))
            .collect()
    } else {
        tasks
            .iter()
            .map(|&(j, i)| embed_one(network, ellipsoids, i, &grid[j], cfg))
            .collect()
    };
    let local_s = local_start.elapsed().as_secs_f64();

    // Global step: one multiplier LMI per frequency.
    let global_start = Instant::now();
    let global: Vec<FrequencyRecord> = {
        let run_one = |j: usize| -> FrequencyRecord {
            let p = &grid[j];
            let freq_start = Instant::now();
            let mut embeddings: Vec<Vec<Embedding>> = Vec::with_capacity(n);
            let mut first_error: Option<String> = None;
            for i in 0..n {
                match &local[j * n + i] {
                    Ok(e) => embeddings.push(e.clone()),
                    Err(err) => {
                        if first_error.is_none() {
                            first_error = Some(format!("module {i}: {err}"));
                        }
                        embeddings.push(Vec::new());
                    }
                }
            }
            let mut record = FrequencyRecord {
                omega_rad_s: p.omega,
                freq_hz: p.omega / (2.0 * std::f64::consts::PI),
                gamma_ub: None,
                gamma_ub_db: None,
                gamma_lb: None,
                gamma_lb_db: None,
                embeddings,
                multipliers: Vec::new(),
                error: first_error,
                solve_time_s: 0.0,
            };
            if record.error.is_none() {
                let per_subsystem: Vec<Vec<DissipativityTriplet>> = record
                    .embeddings
                    .iter()
                    .map(|embs| embs.iter().flat_map(triplets_of).collect())
                    .collect();
                let outcome = TripletBundle::new(*p, per_subsystem).and_then(|bundle| {
                    gamma_upper_bound(network.interconnection_at(p.omega), &bundle, &cfg.solver)
                });
                match outcome {
                    Ok(cert) => {
                        record.gamma_ub = Some(cert.gamma_ub);
                        record.gamma_ub_db = Some(cert.gamma_ub_db);
                        record.multipliers = cert.multipliers;
                    }
                    Err(err) => record.error = Some(err.to_string()),
                }
            }
            record.solve_time_s = freq_start.elapsed().as_secs_f64();
            record
        };
        if cfg.parallel {
            (0..grid.len()).into_par_iter().map(run_one).collect()
        } else {
            (0..grid.len()).map(run_one).collect()
        }
    };
    let global_s = global_start.elapsed().as_secs_f64();

    Ok(SweepResult {
        records: global,
        timing: SweepTiming {
            local_s,
            global_s,
            total_s: total.elapsed().as_secs_f64(),
            parallel: cfg.parallel,
            workers: rayon::current_num_threads(),
        },
    })
}
