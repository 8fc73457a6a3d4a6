use statrs::distribution::{ChiSquared, ContinuousCDF};

use boolrc::learner::{SelectionMode, SelectorState};
use boolrc::reservoir::{add_noise, NoiseKey, NoiseParams};

fn return_gaps(mode: SelectionMode, n: usize, draws: usize, seed: u64) -> Vec<f64> {
    let mut sel = SelectorState::<f64>::new(mode, n, seed);
    let mut last = vec![None; n];
    let mut gaps = Vec::new();
    for k in 0..draws {
        let l = sel.select().unwrap();
        sel.update_bias(l);
        if let Some(prev) = last[l] {
            gaps.push((k - prev) as f64);
        }
        last[l] = Some(k);
    }
    gaps
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

#[test]
fn markovian_selection_is_uniform() {
    let (n, draws) = (25, 50_000);
    let mut sel = SelectorState::<f64>::new(SelectionMode::Markovian, n, 3);
    let mut counts = vec![0usize; n];
    for _ in 0..draws {
        counts[sel.select().unwrap()] += 1;
    }
    let expected = draws as f64 / n as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((n - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat:.1} >= {critical:.1}");
}

#[test]
fn greedy_selection_revisits_more_regularly() {
    let n = 40;
    let (gm, gs) = mean_std(&return_gaps(SelectionMode::Greedy, n, 200 * n, 5));
    let (mm, ms) = mean_std(&return_gaps(SelectionMode::Markovian, n, 200 * n, 5));
    // each draw picks one of n mirrors, so either way the mean return time is n
    for m in [gm, mm] {
        assert!((m / n as f64 - 1.0).abs() < 0.05, "mean gap {m}");
    }
    // geometric return times have std close to n
    assert!((ms / n as f64 - 1.0).abs() < 0.1, "markovian gap std {ms}");
    assert!(gs < 0.5 * ms, "greedy gap std {gs} vs markovian {ms}");
}

#[test]
fn output_noise_is_gaussian_with_the_requested_std() {
    let len = 20_000;
    for sigma in [0.1, 1.0, 7.5] {
        let noise = NoiseParams { sigma_out: sigma, noise_seed: 11 };
        let mut y = vec![0.0f64; len];
        add_noise(&mut y, &noise, NoiseKey::new(4, 0));
        let (m, s) = mean_std(&y);
        assert!(m.abs() < 4.0 * sigma / (len as f64).sqrt(), "mean {m}");
        // std of the sample std is about sigma / sqrt(2 len)
        assert!((s - sigma).abs() < 4.0 * sigma / (2.0 * len as f64).sqrt(), "std {s} for sigma {sigma}");
    }
}

#[test]
fn noise_scales_linearly_and_streams_are_independent() {
    let len = 10_000;
    let draw = |sigma: f64, key: NoiseKey| {
        let mut y = vec![0.0f64; len];
        add_noise(&mut y, &NoiseParams { sigma_out: sigma, noise_seed: 2 }, key);
        y
    };
    let a = draw(1.0, NoiseKey::new(0, 0));
    let b = draw(3.0, NoiseKey::new(0, 0));
    assert!(a.iter().zip(&b).all(|(x, y)| (3.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0)));

    for other in [NoiseKey::new(1, 0), NoiseKey::new(0, 1)] {
        let c = draw(1.0, other);
        let r = a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() / len as f64;
        assert!(r.abs() < 4.0 / (len as f64).sqrt(), "correlation {r} with {other:?}");
    }
    assert!(draw(0.0, NoiseKey::new(0, 0)).iter().all(|&v| v == 0.0));
}
