use homotopy_moo::driver::{march_biobjective, run_homotopy, ws_scan, HomotopyRun, RunMode, RunOptions};
use homotopy_moo::mesh::lattice_size;
use homotopy_moo::nlp::SolverOptions;
use homotopy_moo::problem::builtin_problem;
use proptest::prelude::*;

fn settle(problem: &str, m: usize) -> HomotopyRun {
    let options = RunOptions {
        resolution: m,
        max_sweeps: 600,
        move_tol: 1e-6,
        ..RunOptions::default()
    };
    let mut run = HomotopyRun::new(builtin_problem(problem).unwrap(), options, SolverOptions::default()).unwrap();
    run.run_to_end().unwrap();
    run
}

#[test]
fn sweeps_settle_monotonically_at_the_end() {
    for (problem, m) in [("motta1", 8), ("motta2", 5)] {
        let run = settle(problem, m);
        assert!(run.settled(), "{problem} did not settle");
        let h = run.history();
        let n = h.len();
        assert!(n >= 3);
        assert!(h[n - 1].max_move <= h[n - 2].max_move, "{problem}: {:?}", &h[n - 3..]);
        assert!(h[n - 2].max_move <= h[n - 3].max_move, "{problem}: {:?}", &h[n - 3..]);
        // FE accounting only grows.
        assert!(h.windows(2).all(|w| w[1].fe_total >= w[0].fe_total));
    }
}

#[test]
fn row_counts_follow_the_mode() {
    let problem = builtin_problem("motta1").unwrap();
    let solver = SolverOptions::default();
    let homotopy = RunOptions {
        resolution: 4,
        max_sweeps: 2,
        ..RunOptions::default()
    };
    assert_eq!(run_homotopy(&problem, &homotopy, &solver).unwrap().len(), lattice_size(3, 4));
    let ws = RunOptions {
        mode: RunMode::WsScan,
        points: Some(lattice_size(3, 4)),
        ..RunOptions::default()
    };
    assert_eq!(ws_scan(&problem, &ws, &solver).unwrap().len(), 15);
    let march = RunOptions {
        mode: RunMode::SerialMarch,
        gamma: Some(0.2),
        points: Some(5),
        ..RunOptions::default()
    };
    let biobj = builtin_problem("biobj-convex").unwrap();
    assert_eq!(march_biobjective(&biobj, &march, &solver).unwrap().len(), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Settled biobjective fronts lie on the analytic curve with equal
    /// chords between neighbors.
    #[test]
    fn biobjective_fronts_are_equispaced(m in 2usize..=9) {
        let run = settle("biobj-convex", m);
        let front = run.front();
        prop_assert_eq!(front.converged_count(), m + 1);
        let mut samples = front.samples.clone();
        samples.sort_by(|a, b| a.f[0].total_cmp(&b.f[0]));
        for s in &samples {
            let x = s.x[0];
            prop_assert!((-1e-6..=2.0 + 1e-6).contains(&x));
            prop_assert!((s.f[1] - (x - 2.0).powi(2)).abs() < 1e-12);
        }
        let chord = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let chords: Vec<f64> = samples.windows(2).map(|w| chord(&w[0].fnorm, &w[1].fnorm)).collect();
        let mean = chords.iter().sum::<f64>() / chords.len() as f64;
        for c in &chords {
            prop_assert!((c - mean).abs() < 1e-4 * mean, "{:?}", chords);
        }
    }
}
