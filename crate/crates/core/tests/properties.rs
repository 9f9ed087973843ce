use mdma_core::allocator::{rate_lower_bound, subgradient_step, ScaConstants};
use mdma_core::coalition::total_conflict;
use mdma_core::harness::empirical_cdf;
use mdma_core::hungarian::assign_subchannels;
use mdma_core::topology::{stream_rng, STREAM_MATCHING};
use mdma_core::{generate_drop, greedy_init, rotation_refine, ConflictModel, DualState, QosTargets, SystemParams};
use proptest::prelude::*;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn square(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), n))
}

fn default_qos(params: &SystemParams) -> QosTargets {
    let bw = params.subchannel_bandwidth();
    QosTargets { rate_min: 1.15 * bw, rate_max: 3.3 * bw }
}

proptest! {
    #[test]
    fn surrogate_never_exceeds_shannon(gamma_th in 0.01f64..100.0, log_gamma in -10.0f64..10.0) {
        let sca = ScaConstants::from_sinr(gamma_th, 1e6);
        let gamma = log_gamma.exp();
        let lb = rate_lower_bound(gamma, &sca, 1.0).unwrap();
        prop_assert!(lb <= (1.0 + gamma).log2() + 1e-12);
        let at = rate_lower_bound(gamma_th, &sca, 1.0).unwrap();
        prop_assert!((at - (1.0 + gamma_th).log2()).abs() < 1e-12);
    }

    #[test]
    fn hungarian_matches_enumeration(w in square(5)) {
        let perm = assign_subchannels(&w).unwrap();
        let total = |p: &[usize]| p.iter().enumerate().map(|(r, &c)| w[r][c]).sum::<f64>();
        let best = permutations(w.len()).iter().map(|p| total(p)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((total(&perm) - best).abs() < 1e-9);
        let mut seen = perm.clone();
        seen.sort();
        prop_assert_eq!(seen, (0..w.len()).collect::<Vec<_>>());
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let cdf = empirical_cdf(&v).unwrap();
        for pair in cdf.windows(2) {
            prop_assert!(pair[0].0 < pair[1].0);
            prop_assert!(pair[0].1 < pair[1].1);
        }
        prop_assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subgradient_keeps_multipliers_nonnegative(
        rates in prop::collection::vec(0.0f64..10.0, 1..8),
        eta0 in 0.0f64..1.0,
        step in 0.0f64..5.0,
    ) {
        let n = rates.len();
        let mut dual = DualState::zeros(n);
        dual.eta = vec![eta0; n];
        let next = subgradient_step(&dual, &rates, &vec![2.0; n], &vec![6.0; n], step);
        for k in 0..n {
            prop_assert!(next.eta[k] >= 0.0 && next.mu[k] >= 0.0);
            if rates[k] >= 2.0 {
                prop_assert!(next.eta[k] <= eta0);
            }
        }
    }

    #[test]
    fn conflict_ignores_member_order(seed in 0u64..500, rot in 0usize..4) {
        let params = SystemParams { num_ues: 15, ..SystemParams::default() };
        let profiles = generate_drop(&params, &default_qos(&params), seed).unwrap();
        let model = ConflictModel::new(&profiles, &params).unwrap();
        let members = vec![0usize, 3, 7, 11];
        let mut rotated = members.clone();
        rotated.rotate_left(rot);
        for &k in &members {
            let (a, b) = (model.conflict(k, &members), model.conflict(k, &rotated));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn refinement_never_raises_conflict(seed in 0u64..200) {
        let params = SystemParams { num_ues: 20, ..SystemParams::default() };
        let profiles = generate_drop(&params, &default_qos(&params), seed).unwrap();
        let model = ConflictModel::new(&profiles, &params).unwrap();
        let mut rng = stream_rng(seed, STREAM_MATCHING);
        if let Ok(init) = greedy_init(&model, params.num_subchannels, &mut rng) {
            let out = rotation_refine(&init, &model, 3, 10_000);
            prop_assert!(total_conflict(&out.structure, &model) <= total_conflict(&init, &model) + 1e-12);
            prop_assert!(out.structure.validate(&model).is_ok());
            for pair in out.trace.windows(2) {
                prop_assert!(pair[1] < pair[0]);
            }
        }
    }
}
