use netrobust::global::*;
use netrobust::lti::{FrequencyPoint, Domain, global_gain};
use netrobust::scenario::*;
use netrobust::sdp::SolverOptions;
use netrobust::uncertainty::*;

fn main() {
    let scenario = build_platoon(5, 1, 0.10, ControllerChoice::Improved).unwrap();
    let network = scenario.network().unwrap();
    let ells = synthetic_identification(&scenario, 0.05, 0.95, 22).unwrap();
    let grid: Vec<FrequencyPoint> = [0.13, 0.15, 0.17]
        .iter()
        .map(|&hz| FrequencyPoint::from_hz(hz, Domain::Continuous).unwrap())
        .collect();
    let tight = SolverOptions { gap_tol: 1e-12, margin: 1e-13, ..SolverOptions::default() };
    let point_ells: Vec<Ellipsoid> = ells.iter().map(|e| e.with_chi(1e-12).unwrap()).collect();
    let cfg7 = SweepConfig { kind: EmbeddingKind::DiscAndBand, band_angles: 8, solver: tight, parallel: false };
    let sweep7 = frequency_sweep(&network, &point_ells, &grid, &cfg7).unwrap();
    for (j, r) in sweep7.records.iter().enumerate() {
        let deltas: Vec<_> = (0..5).map(|i| {
            let f = factorize_closed_loop(&network.plants[i], &network.controllers[i], &grid[j]).unwrap();
            eval_factorized(&f, point_ells[i].theta_hat()).unwrap()
        }).collect();
        let nominal = global_gain(&deltas, &network.interconnection).unwrap();
        let ub = r.gamma_ub.unwrap();
        println!("chi->0 at {:.3}: ub {:.8} nominal {:.8} rel {:.3e}", r.freq_hz, ub, nominal, (ub-nominal).abs()/nominal);
    }
    // Also with default tolerances for comparison.
    let cfg7d = SweepConfig { kind: EmbeddingKind::DiscAndBand, band_angles: 8, solver: SolverOptions::default(), parallel: false };
    let sweep7d = frequency_sweep(&network, &point_ells, &grid, &cfg7d).unwrap();
    for (j, r) in sweep7d.records.iter().enumerate() {
        let deltas: Vec<_> = (0..5).map(|i| {
            let f = factorize_closed_loop(&network.plants[i], &network.controllers[i], &grid[j]).unwrap();
            eval_factorized(&f, point_ells[i].theta_hat()).unwrap()
        }).collect();
        let nominal = global_gain(&deltas, &network.interconnection).unwrap();
        let ub = r.gamma_ub.unwrap();
        println!("default chi->0 at {:.3}: rel {:.3e}", r.freq_hz, (ub-nominal).abs()/nominal);
    }
}
