use dpo_bcd::bcd::{extract_subproblem, BcdConfig, InitPolicy};
use dpo_bcd::harness::{
    check_feasibility, net_mean_return, planted_instance, run_matrix, Instance, MatrixConfig,
    PlantedParams, StrategyVariant,
};
use dpo_bcd::model_io::{read_model, write_qubo, write_quantized, StoredModel};
use dpo_bcd::precision::{quantize_int8, quantization_loss_report};
use dpo_bcd::{
    bcd_solve, decode, fixture_series, objective_terms, Assignment, DpoConfig, Exhaustive,
    PortfolioAllocation, ProblemSize,
};
use ndarray::Array2;
use proptest::prelude::*;

fn reduced_config() -> DpoConfig {
    DpoConfig {
        n_t: 2,
        n_a: 6,
        n_r: 2,
        budget: 6,
        ..DpoConfig::default()
    }
}

#[test]
fn golden_sharpe_on_fixture() {
    let inst = Instance::from_series("fixture", reduced_config(), &fixture_series()).unwrap();
    assert_eq!(inst.qubo.n(), 24);
    let report = run_matrix(
        &inst,
        &["exhaustive".into()],
        &[StrategyVariant::GLOBAL_FP, StrategyVariant::BLOCK_FP],
        &MatrixConfig::default(),
    )
    .unwrap();
    let global = report
        .cell(StrategyVariant::GLOBAL_FP, "exhaustive")
        .unwrap()
        .selected_run()
        .unwrap();
    assert_eq!(global.assignment.to_string(), "001110000100001110000100");
    let perf = global.evaluation.performance.as_ref().unwrap();
    assert!((perf.sharpe.value.unwrap() - 12.406790556878088).abs() < 1e-9);
    assert!((perf.total_net_return - 0.8000694749078836).abs() < 1e-12);

    let block = report
        .cell(StrategyVariant::BLOCK_FP, "exhaustive")
        .unwrap()
        .selected_run()
        .unwrap();
    assert!((block.energy - global.energy).abs() < 1e-9);
}

#[test]
fn fixture_builds_every_size() {
    let series = fixture_series();
    for (size, n) in [(ProblemSize::S, 48), (ProblemSize::M, 144), (ProblemSize::L, 528)] {
        let inst = Instance::from_series("fixture", DpoConfig::size(size), &series).unwrap();
        assert_eq!(inst.qubo.n(), n);
        assert_eq!(inst.qubo.partition().unwrap().len(), DpoConfig::size(size).n_t);
        let structure = inst.qubo.block_structure().unwrap();
        assert!(structure.tridiagonal);
        assert!(inst.qubo.scale_separation().unwrap().ratio < 1.0);
    }
}

#[test]
fn model_file_round_trip_preserves_solutions() {
    let inst = Instance::from_series("fixture", reduced_config(), &fixture_series()).unwrap();
    let mut buf = Vec::new();
    write_qubo(&inst.qubo, &mut buf).unwrap();
    let back = read_model(buf.as_slice()).unwrap().into_qubo().unwrap();
    assert_eq!(back, inst.qubo);
    let cfg = BcdConfig::default();
    let a = bcd_solve(&inst.qubo, &Exhaustive::default(), &cfg).unwrap();
    let b = bcd_solve(&back, &Exhaustive::default(), &cfg).unwrap();
    assert_eq!(a.assignment, b.assignment);
}

#[test]
fn quantized_model_file_is_bit_exact() {
    let inst = Instance::from_series("fixture", reduced_config(), &fixture_series()).unwrap();
    let ising = inst.qubo.to_ising();
    let q = quantize_int8(&ising).unwrap();
    let partition = inst.qubo.partition().cloned();
    let mut buf = Vec::new();
    write_quantized(&q, partition.as_ref(), &mut buf).unwrap();
    match read_model(buf.as_slice()).unwrap() {
        StoredModel::Quantized { model, partition: p } => {
            assert_eq!(model, q);
            assert_eq!(p, partition);
        }
        other => panic!("unexpected model kind: {other:?}"),
    }
}

#[test]
fn planted_global_quantization_drops_links_but_subproblem_keeps_context() {
    let inst = planted_instance(&PlantedParams::new(3)).unwrap();
    let ising = inst.qubo.to_ising();
    let q = quantize_int8(&ising).unwrap();
    let loss = quantization_loss_report(&ising, &q, inst.qubo.partition()).unwrap();
    assert!(loss.nonzero_inter > 0);
    assert_eq!(loss.zeroed_inter, loss.nonzero_inter);

    // a feasible time-0 holding makes the folded field of block 1 nonzero
    let mut x = Assignment::zeros(inst.qubo.n());
    for k in 0..inst.config.block_size() {
        x.set(k, true);
    }
    let sub = extract_subproblem(&inst.qubo, &x, 1).unwrap();
    assert!(sub.h.iter().all(|&v| v != 0.0));
    let sub_ising = sub.to_qubo().unwrap().to_ising();
    let sq = quantize_int8(&sub_ising).unwrap();
    let folded_nonzero = sq.linear.iter().filter(|&&v| v != 0).count();
    assert_eq!(folded_nonzero, sub.n());
}

#[test]
fn random_init_is_reproducible() {
    let inst = Instance::from_series("fixture", reduced_config(), &fixture_series()).unwrap();
    let cfg = BcdConfig {
        init: InitPolicy::Random { seed: 11 },
        ..BcdConfig::default()
    };
    let sa = dpo_bcd::SimulatedAnnealing::default();
    let a = bcd_solve(&inst.qubo, &sa, &cfg).unwrap();
    let b = bcd_solve(&inst.qubo, &sa, &cfg).unwrap();
    assert_eq!(a.assignment, b.assignment);
    assert_eq!(a.trace.len(), 6);
}

fn config_strategy() -> impl Strategy<Value = (DpoConfig, Vec<u64>)> {
    (1usize..4, 1usize..4, 1usize..4, 0.0f64..0.1).prop_flat_map(|(n_t, n_a, n_r, nu)| {
        let max = (1u64 << n_r) - 1;
        let cfg = DpoConfig {
            n_t,
            n_a,
            n_r,
            budget: 0,
            nu,
            dt: 3,
            ..DpoConfig::default()
        };
        (Just(cfg), proptest::collection::vec(0..=max, n_t * n_a))
    })
}

proptest! {
    #[test]
    fn net_returns_aggregate_to_objective((cfg, weights) in config_strategy(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let daily = Array2::from_shape_fn((cfg.n_t * cfg.dt, cfg.n_a), |_| rng.random_range(-0.02..0.02));
        let ids = (0..cfg.n_a).map(|a| a.to_string()).collect();
        let panel = dpo_bcd::ReturnPanel::from_daily(ids, daily, cfg.dt).unwrap();
        let risks = dpo_bcd::risk_matrices(&panel, cfg.risk).unwrap();
        let alloc = PortfolioAllocation {
            weights: Array2::from_shape_vec((cfg.n_t, cfg.n_a), weights).unwrap(),
        };
        let net = net_mean_return(&alloc, &panel, &cfg).unwrap();
        prop_assert_eq!(net.len(), cfg.n_t);
        let terms = objective_terms(&cfg, &panel, &risks, &alloc).unwrap();
        let total: f64 = net.iter().sum();
        prop_assert!((total - (terms.expected_return - terms.transaction)).abs() <= 1e-10);
        let x = dpo_bcd::dpo::encode_allocation(&alloc, &cfg).unwrap();
        prop_assert_eq!(decode(&x, &cfg).unwrap(), alloc.clone());
        let f = check_feasibility(&alloc, cfg.budget);
        prop_assert_eq!(f.feasible, alloc.step_totals().iter().all(|&s| s == cfg.budget));
    }
}
