use boolrc::config::RunConfig;
use boolrc::experiments::Simulation;
use boolrc::learner::{run_minimizer, InitialWeights, MinimizerConfig, SelectionMode};
use boolrc::Real;

fn small_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.reservoir.grid_side = 8;
    c.task.test_len = 400;
    c
}

fn simulation<T: Real>(c: &RunConfig) -> Simulation<T> {
    Simulation::build(&c.task, c.series_seed(), c.resolved_reservoir()).unwrap()
}

#[test]
fn noise_free_descent_never_increases_the_error() {
    let c = small_config();
    let sim = simulation::<f64>(&c);
    let n = sim.nodes();
    let system = sim.train_system(0.0).unwrap();
    for mode in [SelectionMode::Greedy, SelectionMode::Markovian] {
        let mc = MinimizerConfig { mode, ..MinimizerConfig::new(n, 7, 8, InitialWeights::Random { seed: 9 }) };
        let trace = run_minimizer(&system, &mc, None).unwrap();
        let acc = trace.accepted_errors();
        assert!(acc.windows(2).all(|w| w[1] <= w[0]), "{mode:?}");
        assert!(acc[acc.len() - 1] < acc[0]);

        let final_clean = system.clean_error(&trace.final_weights).unwrap();
        assert!((final_clean - acc[acc.len() - 1]).abs() < 1e-12);
        assert_eq!(trace.weights_at(mc.epochs as u64), trace.final_weights);
    }
}

#[test]
fn rejected_proposals_leave_the_weights_unchanged() {
    let c = small_config();
    let sim = simulation::<f64>(&c);
    let n = sim.nodes();
    let system = sim.train_system(0.0).unwrap();
    let mc = MinimizerConfig::new(n, 1, 2, InitialWeights::Random { seed: 3 });
    let trace = run_minimizer(&system, &mc, None).unwrap();
    let mut prev = trace.weights_at(0);
    for rec in &trace.records {
        let w = trace.weights_at(rec.k);
        let moved = w.differing(&prev).unwrap();
        if rec.r {
            assert_eq!(moved, vec![rec.l]);
            assert!(rec.eps < system.clean_error(&prev).unwrap());
        } else {
            assert!(moved.is_empty());
        }
        prev = w;
    }
}

#[test]
fn single_precision_follows_double_precision() {
    let c = small_config();
    let (s64, s32) = (simulation::<f64>(&c), simulation::<f32>(&c));
    let n = s64.nodes();
    let mc = MinimizerConfig { epochs: n, ..MinimizerConfig::new(n, 4, 5, InitialWeights::Random { seed: 6 }) };
    let a = run_minimizer(&s64.train_system(0.0).unwrap(), &mc, None).unwrap();
    let b = run_minimizer(&s32.train_system(0.0).unwrap(), &mc, None).unwrap();
    // rounding accumulates over the simulated window, so only agreement to 1%
    assert!((a.eps0 - b.eps0 as f64).abs() < 1e-2 * a.eps0, "{} vs {}", a.eps0, b.eps0);
    // the two descents may part ways at near-ties, but both must make progress
    assert!(b.eps_min < b.eps0 && a.eps_min < a.eps0);
}
