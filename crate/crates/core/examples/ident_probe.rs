use netrobust::scenario::*;

fn main() {
    let mut covered = 0;
    let mut total = 0;
    for seed in 0..50u64 {
        let s = build_platoon(1, 1000 + seed, 0.10, ControllerChoice::Initial).unwrap();
        let runs = simulate_and_identify(&s, 1000, 0.01, 10.0, 4.0, 0.95, seed).unwrap();
        for (r, truth) in runs.iter().zip(&s.theta_true) {
            total += 1;
            if r.ellipsoid.contains(truth).unwrap() { covered += 1; }
        }
    }
    println!("acceptance-config coverage: {}/{}", covered, total);
}
