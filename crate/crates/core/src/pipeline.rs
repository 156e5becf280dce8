//! End-to-end orchestration: scenario build, ellipsoid acquisition,
//! frequency sweep, sampled lower bounds, performance-bound comparison, and
//! report assembly.

use std::time::Instant;

use crate::config::{
    AnalysisConfig, EllipsoidSource, ScenarioConfig, WBoundConfig,
};
use crate::error::{Error, Result};
use crate::global::{frequency_sweep, EmbeddingKind, NetworkSpec, SweepConfig};
use crate::lti::{build_interconnection, Domain, FrequencyPoint};
use crate::numerics::ComplexMatrix;
use crate::oracle::{complexity_estimate, worst_case_gain_sampled, ComplexityMode};
use crate::report::{emit_report, finish_record, timing_block, AnalysisReport};
use crate::scenario::{build_platoon, synthetic_identification, simulate_and_identify, WBound};
use crate::uncertainty::Ellipsoid;

pub use crate::report::ReportRecord;

/// Exit status of a pipeline run: 0 when every frequency passes the bound,
/// 2 when any certified bound exceeds it, 1 on execution errors (partial
/// reports included).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineExit {
    AllPassed,
    BoundViolated,
    ExecutionError,
}

impl PipelineExit {
    pub fn code(self) -> i32 {
        match self {
            PipelineExit::AllPassed => 0,
            PipelineExit::BoundViolated => 2,
            PipelineExit::ExecutionError => 1,
        }
    }
}

pub struct PipelineOutcome {
    pub report: AnalysisReport,
    pub exit: PipelineExit,
}

struct BuiltScenario {
    network: NetworkSpec,
    theta_true: Option<Vec<Vec<f64>>>,
    controller_for_ident: Option<crate::scenario::PlatoonScenario>,
}

fn build_scenario(config: &AnalysisConfig) -> Result<BuiltScenario> {
    match &config.scenario {
        ScenarioConfig::Platoon {
            n_mod,
            seed,
            dispersion,
            controller,
        } => {
            let scenario = build_platoon(*n_mod, *seed, *dispersion, controller.to_choice())?;
            let network = scenario.network()?;
            let theta_true = Some(scenario.theta_true.iter().map(|t| t.to_vec()).collect());
            Ok(BuiltScenario {
                network,
                theta_true,
                controller_for_ident: Some(scenario),
            })
        }
        ScenarioConfig::Explicit {
            plants,
            controllers,
            adjacency,
            input_map,
            theta_true,
        } => {
            let a = ComplexMatrix::from_real(adjacency.rows, adjacency.cols, &adjacency.entries)?;
            let b = ComplexMatrix::from_real(input_map.rows, input_map.cols, &input_map.entries)?;
            let m = build_interconnection(&a, &b)?;
            let network = NetworkSpec {
                plants: plants.clone(),
                controllers: controllers.clone(),
                interconnection: m,
                interconnection_overrides: Vec::new(),
            };
            network.validate()?;
            Ok(BuiltScenario {
                network,
                theta_true: theta_true.clone(),
                controller_for_ident: None,
            })
        }
    }
}

fn acquire_ellipsoids(
    config: &AnalysisConfig,
    built: &BuiltScenario,
) -> Result<Vec<Ellipsoid>> {
    match &config.ellipsoids {
        EllipsoidSource::Explicit { ellipsoids } => {
            if ellipsoids.len() != built.network.n_mod() {
                return Err(Error::Config {
                    field: "ellipsoids.explicit.ellipsoids".into(),
                    detail: format!(
                        "{} ellipsoids for {} modules",
                        ellipsoids.len(),
                        built.network.n_mod()
                    ),
                });
            }
            Ok(ellipsoids.clone())
        }
        EllipsoidSource::Synthetic {
            relative_std,
            seed,
            center_on_truth,
        } => {
            let Some(scenario) = &built.controller_for_ident else {
                // Explicit scenarios need theta_true to synthesize around.
                let Some(tt) = &built.theta_true else {
                    return Err(Error::Config {
                        field: "scenario.explicit.theta_true".into(),
                        detail: "synthetic ellipsoids need true parameters".into(),
                    });
                };
                let scenario = crate::scenario::PlatoonScenario {
                    n_mod: tt.len(),
                    theta_true: tt
                        .iter()
                        .map(|t| {
                            if t.len() != 2 {
                                Err(Error::Config {
                                    field: "scenario.explicit.theta_true".into(),
                                    detail: "synthetic source expects 2 parameters per module"
                                        .into(),
                                })
                            } else {
                                Ok([t[0], t[1]])
                            }
                        })
                        .collect::<Result<_>>()?,
                    controller: crate::scenario::ControllerChoice::Initial,
                };
                let mut ells =
                    synthetic_identification(&scenario, *relative_std, config.probability, *seed)?;
                if *center_on_truth {
                    for (e, t) in ells.iter_mut().zip(&scenario.theta_true) {
                        *e = e.with_center(t.to_vec())?;
                    }
                }
                return Ok(ells);
            };
            let mut ells =
                synthetic_identification(scenario, *relative_std, config.probability, *seed)?;
            if *center_on_truth {
                for (e, t) in ells.iter_mut().zip(&scenario.theta_true) {
                    *e = e.with_center(t.to_vec())?;
                }
            }
            Ok(ells)
        }
        EllipsoidSource::Identify {
            n_id,
            ts,
            excitation_variance,
            noise_variance,
            seed,
        } => {
            let Some(scenario) = &built.controller_for_ident else {
                return Err(Error::Config {
                    field: "ellipsoids.identify".into(),
                    detail: "identification requires the built-in platoon scenario".into(),
                });
            };
            let runs = simulate_and_identify(
                scenario,
                *n_id,
                *ts,
                *excitation_variance,
                *noise_variance,
                config.probability,
                *seed,
            )?;
            Ok(runs.into_iter().map(|r| r.ellipsoid).collect())
        }
    }
}

fn w_bound_of(config: &AnalysisConfig) -> Result<WBound> {
    match &config.w_bound {
        WBoundConfig::Table { knots } => WBound::new(knots.clone()),
        WBoundConfig::Default {
            crossover_rad_s,
            cap_db,
        } => Ok(WBound::default_tracking(*crossover_rad_s, *cap_db)),
    }
}

/// Run the full analysis described by the configuration.
pub fn run_pipeline(config: &AnalysisConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let built = build_scenario(config)?;
    let ellipsoids = acquire_ellipsoids(config, &built)?;
    let w = w_bound_of(config)?;

    let domain = built.network.plants[0].domain;
    let grid: Vec<FrequencyPoint> = config
        .frequencies
        .to_hz()?
        .into_iter()
        .map(|hz| FrequencyPoint::from_hz(hz, domain))
        .collect::<Result<_>>()?;

    let sweep_cfg = SweepConfig {
        kind: config.embeddings,
        band_angles: config.band_angles,
        solver: config.solver.to_options(),
        parallel: config.parallel,
    };
    let sweep = frequency_sweep(&built.network, &ellipsoids, &grid, &sweep_cfg)?;

    // Oracle pass: sampled lower bound per frequency.
    let oracle_start = Instant::now();
    let mut records = Vec::with_capacity(sweep.records.len());
    for (j, rec) in sweep.records.into_iter().enumerate() {
        let (lb, skipped) = if config.mc_samples > 0 && rec.error.is_none() {
            let seed = config
                .seed
                .wrapping_mul(0x2545_F491_4F6C_DD1D)
                .wrapping_add(j as u64);
            match worst_case_gain_sampled(
                &built.network,
                &ellipsoids,
                &grid[j],
                config.mc_samples,
                seed,
            ) {
                Ok(s) => (Some(s.gamma_lb), s.skipped_samples),
                Err(_) => (None, config.mc_samples),
            }
        } else {
            (None, 0)
        };
        let w_db = w.eval_db(rec.omega_rad_s);
        records.push(finish_record(rec, lb, skipped, w_db));
    }
    let oracle_s = oracle_start.elapsed().as_secs_f64();

    let n_mod = built.network.n_mod();
    let n_theta_bar = built
        .network
        .plants
        .iter()
        .map(|p| p.n_theta())
        .max()
        .unwrap_or(0);
    let n_d = match config.embeddings {
        EmbeddingKind::Disc => 1,
        EmbeddingKind::DiscAndBand => 3,
    };
    let complexity = vec![
        complexity_estimate(n_mod, n_theta_bar, n_d, ComplexityMode::Direct)?,
        complexity_estimate(n_mod, n_theta_bar, n_d, ComplexityMode::HierarchicalSerial)?,
        complexity_estimate(n_mod, n_theta_bar, n_d, ComplexityMode::HierarchicalParallel)?,
    ];

    let report = AnalysisReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        records,
        timing: timing_block(&sweep.timing, oracle_s),
        complexity,
    };

    let exit = if report.any_error() {
        PipelineExit::ExecutionError
    } else if report.all_passed() {
        PipelineExit::AllPassed
    } else {
        PipelineExit::BoundViolated
    };
    Ok(PipelineOutcome { report, exit })
}

/// Convenience wrapper: run and emit.
pub fn run_and_emit(
    config: &AnalysisConfig,
    emit_dir: Option<&std::path::Path>,
    include_timings: bool,
) -> Result<PipelineOutcome> {
    let outcome = run_pipeline(config)?;
    if let Some(dir) = emit_dir {
        emit_report(&outcome.report, dir, include_timings)?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(hz: &str, extra: &str) -> AnalysisConfig {
        let text = format!(
            r#"{{
            "scenario": {{"platoon": {{"n_mod": 2, "seed": 1, "dispersion": 0.1,
                         "controller": "improved"}}}},
            "ellipsoids": {{"synthetic": {{"relative_std": 0.05, "seed": 7}}}},
            "frequencies": {{"list": {{"hz": {hz}}}}},
            "band_angles": 4,
            "mc_samples": 50
            {extra}
        }}"#
        );
        AnalysisConfig::from_json(&text).unwrap()
    }

    #[test]
    fn pipeline_runs_and_reports() {
        let cfg = tiny_config("[0.15]", "");
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.report.records.len(), 1);
        let rec = &out.report.records[0];
        assert!(rec.error.is_none(), "{:?}", rec.error);
        let ub = rec.gamma_ub.unwrap();
        let lb = rec.gamma_lb.unwrap();
        assert!(ub >= lb, "ub {ub} < lb {lb}");
        assert_eq!(out.report.complexity.len(), 3);
    }

    #[test]
    fn exit_code_contract_pass_and_fail() {
        // Generous bound: pass.
        let cfg = tiny_config(
            "[0.15]",
            r#", "w_bound": {"table": {"knots": [[0.001, 40.0], [100.0, 40.0]]}}"#,
        );
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.exit, PipelineExit::AllPassed);
        // Impossible bound: fail with exit 2.
        let cfg = tiny_config(
            "[0.15]",
            r#", "w_bound": {"table": {"knots": [[0.001, -200.0], [100.0, -200.0]]}}"#,
        );
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.exit, PipelineExit::BoundViolated);
        assert_eq!(out.exit.code(), 2);
    }

    #[test]
    fn reports_byte_identical_across_runs() {
        let cfg = tiny_config("[0.13, 0.15]", "");
        let a = run_pipeline(&cfg).unwrap().report.to_json(false).unwrap();
        let b = run_pipeline(&cfg).unwrap().report.to_json(false).unwrap();
        assert_eq!(a, b);
    }
}
