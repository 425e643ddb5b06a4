use nalgebra::DMatrix;
use opebench_core::direct::{fqe, ih_estimate, ih_fit, q_reg, DirectConfig};
use opebench_core::env::graph::{build_graph, GraphSpec};
use opebench_core::env::graph_mc::{build_graph_mc, GraphMcSpec};
use opebench_core::env::{build_gridworld, eps_greedy, GridworldSpec};
use opebench_core::hybrid::{dr, project_to_simplex, solve_simplex_qp, wdr};
use opebench_core::ips::naive;
use opebench_core::{
    cumulative_rho, generate_dataset, ips_estimate, EvalContext, IpsVariant, QTable, TabularMdp, TabularPolicy,
};
use proptest::prelude::*;

fn graph_spec() -> impl Strategy<Value = GraphSpec> {
    (2usize..7, any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(h, env, rew, sparse)| GraphSpec {
        horizon: h,
        stochastic_env: env,
        stochastic_rewards: rew,
        sparse_rewards: sparse,
    })
}

fn q_table(ns: usize, seed: u64) -> QTable {
    let values = (0..ns * 2).map(|k| ((k as u64 * 2654435761 + seed) % 1000) as f64 / 250.0 - 2.0).collect();
    QTable::new(ns, 2, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_mdps_build_and_pad(spec in graph_spec(), p in 0.05f64..0.95, n in 1usize..20, seed in any::<u64>()) {
        let mdp = build_graph(&spec, 0.95).unwrap();
        let pi = TabularPolicy::static_binary(mdp.n_states(), p).unwrap();
        let ds = generate_dataset(&mdp, &pi, n, seed).unwrap();
        for t in ds.trajectories() {
            prop_assert_eq!(t.states.len(), spec.horizon + 1);
            prop_assert_eq!(t.actions.len(), spec.horizon);
        }
    }

    #[test]
    fn graph_mc_pads_with_absorbing_zero_reward(p in 0.05f64..0.95, seed in any::<u64>()) {
        let mdp = build_graph_mc(&GraphMcSpec { horizon: 60 }, 0.99).unwrap();
        let abs = mdp.absorbing_state();
        let pi = TabularPolicy::static_binary(mdp.n_states(), p).unwrap();
        let ds = generate_dataset(&mdp, &pi, 10, seed).unwrap();
        for t in ds.trajectories() {
            if let Some(first) = t.states.iter().position(|s| *s == abs) {
                prop_assert!(t.states[first..].iter().all(|s| *s == abs));
                prop_assert!(t.rewards[first..].iter().all(|r| *r == 0.0));
            }
        }
    }

    #[test]
    fn dataset_is_a_function_of_its_seed(spec in graph_spec(), seed in any::<u64>()) {
        let mdp = build_graph(&spec, 1.0).unwrap();
        let pi = TabularPolicy::static_binary(mdp.n_states(), 0.3).unwrap();
        let bytes = |s| {
            let mut out = Vec::new();
            generate_dataset(&mdp, &pi, 7, s).unwrap().write_jsonl(&mut out).unwrap();
            out
        };
        prop_assert_eq!(bytes(seed), bytes(seed));
        // trajectory i only depends on stream i
        let small = generate_dataset(&mdp, &pi, 3, seed).unwrap();
        let large = generate_dataset(&mdp, &pi, 7, seed).unwrap();
        prop_assert_eq!(small.trajectories(), &large.trajectories()[..3]);
    }

    #[test]
    fn rho_recursion_is_exact(spec in graph_spec(), pb in 0.1f64..0.9, pe in 0.0f64..1.0, seed in any::<u64>()) {
        let mdp = build_graph(&spec, 1.0).unwrap();
        let pi_b = TabularPolicy::static_binary(mdp.n_states(), pb).unwrap();
        let pi_e = TabularPolicy::static_binary(mdp.n_states(), pe).unwrap();
        let ds = generate_dataset(&mdp, &pi_b, 12, seed).unwrap();
        let rho = cumulative_rho(&ds, &pi_e, &pi_b).unwrap();
        for (i, traj) in ds.trajectories().iter().enumerate() {
            for t in 0..traj.len() {
                let (s, a) = (traj.states[t], traj.actions[t]);
                prop_assert_eq!(rho.step(i, t), pi_e.prob(s, a) / pi_b.prob(s, a));
                prop_assert_eq!(rho.cum(i, t), rho.cum_before(i, t) * rho.step(i, t));
            }
        }
    }

    #[test]
    fn self_normalized_estimators_ignore_weight_scale(
        spec in graph_spec(),
        pb in 0.2f64..0.8,
        pe in 0.1f64..0.9,
        k in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mdp = build_graph(&spec, 0.9).unwrap();
        let ns = mdp.n_states();
        let pi_b = TabularPolicy::static_binary(ns, pb).unwrap();
        let pi_e = TabularPolicy::static_binary(ns, pe).unwrap();
        let ds = generate_dataset(&mdp, &pi_b, 15, seed).unwrap();
        let ctx = EvalContext::new(&ds, &pi_e, &pi_b, 0.9).unwrap();
        let scaled = ctx.with_rho(ctx.rho.scaled(k));
        let q = q_table(ns, seed);
        for v in [IpsVariant::Wis, IpsVariant::Pdwis] {
            let (a, b) = (ips_estimate(v, &ctx).unwrap(), ips_estimate(v, &scaled).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} {} vs {}", v, a, b);
        }
        let (a, b) = (wdr(&ctx, &q).unwrap(), wdr(&scaled, &q).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn hybrids_with_zero_q_reduce_to_per_decision_ips(spec in graph_spec(), pe in 0.1f64..0.9, seed in any::<u64>()) {
        let mdp = build_graph(&spec, 0.95).unwrap();
        let ns = mdp.n_states();
        let pi_b = TabularPolicy::static_binary(ns, 0.5).unwrap();
        let pi_e = TabularPolicy::static_binary(ns, pe).unwrap();
        let ds = generate_dataset(&mdp, &pi_b, 9, seed).unwrap();
        let ctx = EvalContext::new(&ds, &pi_e, &pi_b, 0.95).unwrap();
        let zero = QTable::zeros(ns, 2);
        let pdis = ips_estimate(IpsVariant::Pdis, &ctx).unwrap();
        let pdwis = ips_estimate(IpsVariant::Pdwis, &ctx).unwrap();
        prop_assert!((dr(&ctx, &zero).unwrap() - pdis).abs() <= 1e-12 * pdis.abs().max(1.0));
        prop_assert!((wdr(&ctx, &zero).unwrap() - pdwis).abs() <= 1e-12 * pdwis.abs().max(1.0));
    }

    #[test]
    fn pdis_equals_is_with_terminal_rewards_only(horizon in 2usize..7, pe in 0.1f64..0.9, seed in any::<u64>()) {
        let spec = GraphSpec { sparse_rewards: true, ..GraphSpec::new(horizon) };
        let mdp = build_graph(&spec, 0.9).unwrap();
        let pi_b = TabularPolicy::static_binary(mdp.n_states(), 0.4).unwrap();
        let pi_e = TabularPolicy::static_binary(mdp.n_states(), pe).unwrap();
        let ds = generate_dataset(&mdp, &pi_b, 11, seed).unwrap();
        let ctx = EvalContext::new(&ds, &pi_e, &pi_b, 0.9).unwrap();
        let (is, pdis) = (ips_estimate(IpsVariant::Is, &ctx).unwrap(), ips_estimate(IpsVariant::Pdis, &ctx).unwrap());
        prop_assert!((is - pdis).abs() <= 1e-12 * is.abs().max(1.0));
    }

    #[test]
    fn enumeration_matches_dynamic_programming(horizon in 1usize..6, env in any::<bool>(), sparse in any::<bool>(), p in 0.0f64..1.0) {
        let spec = GraphSpec { stochastic_env: env, sparse_rewards: sparse, ..GraphSpec::new(horizon) };
        let gamma = 0.9;
        let mdp = build_graph(&spec, gamma).unwrap();
        let pi = TabularPolicy::static_binary(mdp.n_states(), p).unwrap();
        let total: f64 = mdp
            .enumerate_trajectories(&pi, 1 << 14)
            .unwrap()
            .iter()
            .map(|(t, prob)| prob * t.rewards.iter().enumerate().map(|(k, r)| gamma.powi(k as i32) * r).sum::<f64>())
            .sum();
        let exact = mdp.exact_policy_value(&pi).unwrap();
        prop_assert!((total - exact).abs() <= 1e-10);
    }

    #[test]
    fn dense_and_sparse_returns_on_a_deterministic_graph(horizon in 1usize..8, p in 0.05f64..0.95, seed in any::<u64>()) {
        let dense = build_graph(&GraphSpec::new(horizon), 1.0).unwrap();
        let sparse = build_graph(&GraphSpec { sparse_rewards: true, ..GraphSpec::new(horizon) }, 1.0).unwrap();
        let pi = TabularPolicy::static_binary(dense.n_states(), p).unwrap();
        let d = generate_dataset(&dense, &pi, 5, seed).unwrap();
        let s = generate_dataset(&sparse, &pi, 5, seed).unwrap();
        let parity = |x: usize| if x % 2 == 1 { 1.0 } else { -1.0 };
        for (td, ts) in d.trajectories().iter().zip(s.trajectories()) {
            prop_assert_eq!(&td.states, &ts.states);
            let expected_dense: f64 = td.states[1..].iter().map(|x| parity(*x)).sum();
            prop_assert_eq!(td.rewards.iter().sum::<f64>(), expected_dense);
            prop_assert_eq!(ts.rewards.iter().sum::<f64>(), parity(ts.states[horizon - 1]));
        }
    }

    #[test]
    fn naive_ignores_the_evaluation_policy(spec in graph_spec(), seed in any::<u64>()) {
        let mdp = build_graph(&spec, 0.9).unwrap();
        let pi_b = TabularPolicy::static_binary(mdp.n_states(), 0.5).unwrap();
        let ds = generate_dataset(&mdp, &pi_b, 6, seed).unwrap();
        let a = TabularPolicy::static_binary(mdp.n_states(), 0.1).unwrap();
        let b = TabularPolicy::static_binary(mdp.n_states(), 0.9).unwrap();
        let via = |pi: &TabularPolicy| ips_estimate(IpsVariant::Naive, &EvalContext::new(&ds, pi, &pi_b, 0.9).unwrap()).unwrap();
        prop_assert_eq!(via(&a), via(&b));
        prop_assert_eq!(via(&a), naive(&ds, 0.9));
    }

    #[test]
    fn ih_estimate_ignores_omega_scale(pe in 0.1f64..0.9, k in 1e-4f64..1e4, seed in any::<u64>()) {
        let mdp = build_graph(&GraphSpec { stochastic_env: true, ..GraphSpec::new(4) }, 0.9).unwrap();
        let pi_b = TabularPolicy::static_binary(mdp.n_states(), 0.5).unwrap();
        let pi_e = TabularPolicy::static_binary(mdp.n_states(), pe).unwrap();
        let ds = generate_dataset(&mdp, &pi_b, 40, seed).unwrap();
        let ctx = EvalContext::new(&ds, &pi_e, &pi_b, 0.9).unwrap();
        if let Ok(omega) = ih_fit(&ctx, &DirectConfig::default()) {
            if let Ok(v) = ih_estimate(&ctx, &omega) {
                let w = ih_estimate(&ctx, &omega.scaled(k)).unwrap();
                prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent(v in prop::collection::vec(-50.0f64..50.0, 1..30)) {
        let x = project_to_simplex(&v);
        prop_assert!(x.iter().all(|p| *p >= 0.0));
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let again = project_to_simplex(&x);
        for (a, b) in x.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn simplex_qp_is_feasible_and_monotone(d in 1usize..27, seed in any::<u64>()) {
        let entry = |i: usize, j: usize| (((i * 31 + j * 17) as u64 ^ seed) % 997) as f64 / 997.0 - 0.5;
        let a = DMatrix::from_fn(d, d, entry);
        let m = &a * a.transpose();
        let res = solve_simplex_qp(&m, 5000, 1e-12);
        prop_assert!(res.x.iter().all(|p| *p >= 0.0));
        prop_assert!((res.x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for w in res.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }
}

#[test]
fn qreg_on_policy_is_the_empirical_mean_return() {
    let mdp = build_graph(&GraphSpec::new(4), 1.0).unwrap();
    let pi = TabularPolicy::static_binary(mdp.n_states(), 0.3).unwrap();
    let ds = generate_dataset(&mdp, &pi, 60, 17).unwrap();
    let ctx = EvalContext::new(&ds, &pi, &pi, 1.0).unwrap();
    let cfg = DirectConfig { reg_omega: 0.0, ..DirectConfig::default() };
    let fit = q_reg(&ctx, &cfg).unwrap();
    let mut sums = std::collections::HashMap::<(usize, usize), (f64, f64)>::new();
    for t in ds.trajectories() {
        for k in 0..t.len() {
            let e = sums.entry((t.states[k], t.actions[k])).or_default();
            e.0 += t.rewards[k..].iter().sum::<f64>();
            e.1 += 1.0;
        }
    }
    for ((s, a), (total, count)) in sums {
        assert!((fit.q.get(s, a) - total / count).abs() < 1e-12);
    }
}

#[test]
fn fqe_error_shrinks_geometrically_with_full_coverage() {
    let gamma = 0.8;
    let mdp = build_graph_mc(&GraphMcSpec { horizon: 400 }, gamma).unwrap();
    let pi_b = TabularPolicy::static_binary(mdp.n_states(), 0.5).unwrap();
    let pi_e = TabularPolicy::static_binary(mdp.n_states(), 0.7).unwrap();
    let ds = generate_dataset(&mdp, &pi_b, 300, 2).unwrap();
    let fixed = fqe(&ds, &pi_e, gamma, &DirectConfig { fqe_eps: 1e-13, max_iter: 5000, ..DirectConfig::default() })
        .unwrap()
        .q;
    let errors: Vec<f64> = (1..40)
        .map(|k| {
            let cfg = DirectConfig { fqe_eps: 0.0, max_iter: k, ..DirectConfig::default() };
            fqe(&ds, &pi_e, gamma, &cfg).unwrap().q.max_abs_diff(&fixed)
        })
        .collect();
    for w in errors.windows(2).skip(2) {
        assert!(w[1] <= w[0] + 1e-12, "{errors:?}");
    }
    assert!(errors[38] < errors[0] * 0.01);
}

fn assert_mc_agrees(mdp: &TabularMdp, pi: &TabularPolicy) {
    let exact = mdp.exact_policy_value(pi).unwrap();
    let mc = mdp.monte_carlo_value(pi, 100_000, 99).unwrap();
    assert!((exact - mc.mean).abs() <= 3.0 * mc.std_error.max(1e-12), "exact {exact} vs MC {} ± {}", mc.mean, mc.std_error);
}

#[test]
fn dynamic_programming_agrees_with_monte_carlo() {
    for (env, rew) in [(true, false), (false, true), (true, true)] {
        let spec = GraphSpec { stochastic_env: env, stochastic_rewards: rew, ..GraphSpec::new(6) };
        let mdp = build_graph(&spec, 0.95).unwrap();
        assert_mc_agrees(&mdp, &TabularPolicy::static_binary(mdp.n_states(), 0.35).unwrap());
    }
    let mc = build_graph_mc(&GraphMcSpec::default(), 0.99).unwrap();
    assert_mc_agrees(&mc, &TabularPolicy::static_binary(mc.n_states(), 0.6).unwrap());
    let grid = build_gridworld(&GridworldSpec::default_layout(), 0.98).unwrap();
    let greedy = eps_greedy(&grid.optimal_q_values(), 0.3).unwrap();
    assert_mc_agrees(&grid, &greedy);
}

#[test]
fn eps_greedy_rows_follow_the_mixture_formula() {
    let grid = build_gridworld(&GridworldSpec::default_layout(), 0.98).unwrap();
    let q = grid.optimal_q_values();
    let eps = 0.2;
    let pi = eps_greedy(&q, eps).unwrap();
    for s in 0..grid.n_states() {
        let row = q.row(s);
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = row.iter().position(|v| *v == best).unwrap();
        for a in 0..grid.n_actions() {
            let expected = eps / grid.n_actions() as f64 + if a == first { 1.0 - eps } else { 0.0 };
            assert!((pi.prob(s, a) - expected).abs() < 1e-15);
        }
    }
}
