use proptest::prelude::*;
use return_thermo::instances::{self, RandomSpec};
use return_thermo::prelude::*;

fn small_spec() -> RandomSpec {
    RandomSpec { max_symbols: 3, max_depth: 2, ..RandomSpec::default() }
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

/// An admissible word of length `len`, walking the graph with choices from `picks`.
fn walk(sys: &SymbolicSystem, start: usize, picks: &[usize]) -> Vec<usize> {
    let mut w = vec![start % sys.n_symbols()];
    for &p in picks {
        let cur = *w.last().unwrap();
        let next: Vec<usize> = (0..sys.n_symbols()).filter(|&j| sys.allowed(cur, j)).collect();
        w.push(next[p % next.len()]);
    }
    w
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn recoding_preserves_hits_and_birkhoff_sums(seed in 0u64..10_000, start in 0usize..8, picks in prop::collection::vec(0usize..8, 4..30)) {
        let sys = instances::random_instance(RandomSpec::default(), seed);
        let rec = shift::recode_higher_block(&sys);
        let word = walk(&sys, start, &picks);
        let blocks = rec.encode_word(&word).expect("admissible word encodes");
        let k = sys.potential().depth();
        prop_assert_eq!(blocks.len(), word.len() - rec.block_length() + 1);
        for (i, &b) in blocks.iter().enumerate() {
            prop_assert_eq!(rec.is_target(b), sys.target().contains(word[i]));
        }
        let direct: f64 = (0..blocks.len() - 1).map(|i| sys.potential().value(&word[i..i + k]).unwrap()).sum();
        let recoded: f64 = blocks.windows(2).map(|w| rec.potential2()[(w[0], w[1])]).sum();
        prop_assert!((direct - recoded).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn pressure_shifts_and_is_monotone(seed in 0u64..10_000, c in -3.0f64..3.0, bump in 0.0f64..2.0, which in 0usize..1000) {
        let sys = instances::random_instance(RandomSpec::default(), seed);
        let p = thermo::pressure(&shift::recode_higher_block(&sys)).unwrap();
        let shifted = thermo::pressure(&shift::recode_higher_block(&sys.with_shifted_potential(c))).unwrap();
        prop_assert!((shifted - p - c).abs() <= 1e-11 * (1.0 + p.abs()));

        let mut values = sys.potential().values().clone();
        let key = values.keys().nth(which % values.len()).unwrap().clone();
        *values.get_mut(&key).unwrap() += bump;
        let pot = DepthKPotential::new(sys.potential().depth(), values).unwrap();
        let raised = SymbolicSystem::new(sys.transitions().to_vec(), pot, sys.target().clone()).unwrap();
        let p2 = thermo::pressure(&shift::recode_higher_block(&raised)).unwrap();
        prop_assert!(p2 >= p - 1e-12);
    }

    #[test]
    fn first_return_series_matches_path_enumeration(seed in 0u64..10_000) {
        let sys = instances::random_instance(small_spec(), seed);
        let an = Analysis::new(&sys).unwrap();
        let rec = &an.recoded;
        let law = oracle::first_return_law(&an.chain, rec.target_blocks(), 1e-14).unwrap();
        let s = an.pressure() + 4.0;
        let r = an.operator.eval(s).unwrap().r;
        let m = rec.weighted_matrix();
        let p = &an.chain.transition_probs;
        let targets = rec.target_blocks();
        let k = targets.len();
        const LEN: usize = 10;
        let mut prob = vec![vec![vec![0.0; LEN + 1]; k]; k];
        let mut weight = vec![vec![0.0; k]; k];
        // Depth-first enumeration of every first-return path up to LEN steps.
        for (ia, &a) in targets.iter().enumerate() {
            let mut stack = vec![(a, 0usize, 1.0f64, 1.0f64)];
            while let Some((x, len, pr, w)) = stack.pop() {
                for y in 0..rec.n_states() {
                    if m[(x, y)] == 0.0 {
                        continue;
                    }
                    let (pr2, w2) = (pr * p[(x, y)], w * m[(x, y)] * (-s).exp());
                    if let Ok(ib) = targets.binary_search(&y) {
                        prob[ia][ib][len + 1] += pr2;
                        weight[ia][ib] += w2;
                    } else if len + 1 < LEN {
                        stack.push((y, len + 1, pr2, w2));
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                for d in 1..=LEN.min(law.t_max) {
                    prop_assert!((law.prob(a, b, d) - prob[a][b][d]).abs() <= 1e-13, "q({a},{b},{d})");
                }
                prop_assert!((r[(a, b)] - weight[a][b]).abs() <= 1e-10 * r[(a, b)].max(1e-300), "R({a},{b})");
            }
        }
    }

    #[test]
    fn lambda_decreasing_and_log_convex(seed in 0u64..10_000) {
        let sys = instances::random_instance(RandomSpec::default(), seed);
        let op = InducedOperator::new(&shift::recode_higher_block(&sys)).unwrap();
        let base = if op.s_c().is_finite() { op.s_c() } else { op.pressure() - 5.0 };
        let ss: Vec<f64> = (1..=30).map(|i| base + 0.1 * i as f64).collect();
        let ll: Vec<f64> = ss.iter().map(|&s| op.eval(s).unwrap().lambda.ln()).collect();
        for w in ll.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
        for w in ll.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-10);
        }
        for (&s, &l) in ss.iter().zip(&ll) {
            let ev = op.eval(s).unwrap();
            let fd = (op.eval(s + 1e-6).unwrap().lambda.ln() - op.eval(s - 1e-6).unwrap().lambda.ln()) / 2e-6;
            prop_assert!((ev.lambda_prime() / ev.lambda - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "S = {s}, log lambda = {l}");
        }
    }

    #[test]
    fn kac_and_slope_agree_with_differences(seed in 0u64..10_000, t in 0.0f64..1.0) {
        let sys = instances::random_instance(RandomSpec::default(), seed);
        let an = Analysis::new(&sys).unwrap();
        let (_, slope0) = an.operator.scgf_with_slope(0.0).unwrap();
        prop_assert!((slope0 * an.mu_a - 1.0).abs() <= 1e-8);

        let hi = if an.alpha0().is_finite() { an.alpha0() - 0.05 } else { 2.0 };
        let alpha = -3.0 + t * (hi + 3.0);
        let (_, slope) = an.operator.scgf_with_slope(alpha).unwrap();
        let h = 1e-5;
        let fd = (an.operator.scgf(alpha + h).unwrap() - an.operator.scgf(alpha - h).unwrap()) / (2.0 * h);
        prop_assert!((slope - fd).abs() <= 1e-6 * (1.0 + slope.abs()));
    }

    #[test]
    fn slope_falls_to_minimal_cycle_mean(seed in 0u64..10_000) {
        let sys = instances::random_instance(RandomSpec::default(), seed);
        let op = InducedOperator::new(&shift::recode_higher_block(&sys)).unwrap();
        let gamma = op.min_mean_return();
        let slopes: Vec<f64> = [-5.0, -20.0, -60.0].iter().map(|&a| op.scgf_with_slope(a).unwrap().1).collect();
        prop_assert!(slopes[0] >= slopes[1] && slopes[1] >= slopes[2]);
        prop_assert!(slopes[2] >= gamma - 1e-9);
        prop_assert!(slopes[2] - gamma <= 1e-3, "Psi'(-60) = {}, gamma = {gamma}", slopes[2]);
    }

    #[test]
    fn monte_carlo_histogram_matches_exact_law(seed in 0u64..10_000, n in 1usize..=3) {
        let sys = instances::random_instance(small_spec(), seed);
        let an = Analysis::new(&sys).unwrap();
        let target = an.recoded.target_blocks();
        let law = oracle::first_return_law(&an.chain, target, 1e-14).unwrap();
        let exact = oracle::exact_return_distribution(&law, n).unwrap();
        let samples = 20_000;
        let cfg = SimConfig { seed, n_returns: n, n_samples: samples, ..SimConfig::default() };
        let stats = montecarlo::sample_return_times(&an.chain, target, &cfg).unwrap();
        let freq = stats.frequencies();
        let mut tv = 0.0;
        for (d, &p) in exact.distribution.iter().enumerate() {
            tv += (freq.get(&(d as u64)).copied().unwrap_or(0.0) - p).abs();
        }
        tv += freq.iter().filter(|(&d, _)| d as usize >= exact.distribution.len()).map(|(_, f)| f).sum::<f64>();
        prop_assert!(0.5 * tv <= 5.0 / (samples as f64).sqrt(), "TV = {}", 0.5 * tv);
        prop_assert!(stats.samples.iter().all(|&r| r >= n as u64));
    }
}

#[test]
fn legendre_transform_is_an_involution() {
    for sys in [instances::full_shift(2, &[0]).unwrap(), instances::golden_mean(&[1]).unwrap()] {
        let an = Analysis::new(&sys).unwrap();
        let op = &an.operator;
        let gamma = op.min_mean_return();
        let u: Vec<f64> = (0..2000).map(|i| gamma + 0.005 * i as f64).collect();
        let rate = deviations::rate_function_curve(op, &u).unwrap();
        for alpha in [-1.0, -0.3, 0.0, 0.2] {
            let psi = op.scgf(alpha).unwrap();
            let back = u.iter().zip(&rate.rate).map(|(u, i)| u * alpha - i).fold(f64::NEG_INFINITY, f64::max);
            // The grid supremum sits below Ψ by at most the curvature of I times the spacing squared.
            assert!(back <= psi + 1e-9 && back >= psi - 1e-4, "alpha {alpha}: {back} vs {psi}");
            let (_, slope) = op.scgf_with_slope(alpha).unwrap();
            let p = deviations::rate_function(op, slope).unwrap();
            assert!((p.rate + psi - alpha * slope).abs() <= 1e-9);
            assert!((p.alpha_star - alpha).abs() <= 1e-7);
        }
    }
}

#[test]
fn simulation_is_independent_of_worker_count() {
    let an = Analysis::new(&instances::random_instance(RandomSpec::default(), 3)).unwrap();
    let target = an.recoded.target_blocks();
    let cfg = SimConfig { seed: 5, n_returns: 4, n_samples: 3_000, horizon: 50, workers: 1 };
    let one = montecarlo::sample_return_times(&an.chain, target, &cfg).unwrap();
    let four = montecarlo::sample_return_times(&an.chain, target, &SimConfig { workers: 4, ..cfg }).unwrap();
    assert_eq!(one.samples, four.samples);
    let v1 = montecarlo::visit_counts(&an.chain, target, &cfg).unwrap();
    let v4 = montecarlo::visit_counts(&an.chain, target, &SimConfig { workers: 4, ..cfg }).unwrap();
    assert_eq!(v1.samples, v4.samples);
}
