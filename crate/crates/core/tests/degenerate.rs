use lob_tactics::dp::*;
use lob_tactics::impact::solve_impact;
use lob_tactics::model::*;

// No waiting cost and no price moves: posting at the bid can only help, and
// nothing beats joining it and waiting.
#[test]
fn join_bid_is_optimal_without_cost_or_drift() {
    let model = IntensityModel::constant(5, 0.2, 0.3, 0.5).unwrap();
    let regen = RegenerationLaw::point(5, 3, 2, 0).unwrap();
    let cfg = ModelConfig { wait_cost: 0.0, horizon: 4.0, decision_dt: 0.5, ..ModelConfig::default() };
    let window = default_price_window(&model, &regen, cfg.horizon);
    let gen = build_controlled_generator(&model, &regen, &cfg, window).unwrap();
    let imp = solve_impact(&model, &regen).unwrap();
    assert!(imp.values.iter().all(|d| d.abs() < 1e-12));
    let g = PayoffModel::new(&imp, &cfg).over(&gen);
    let prob = ExecutionProblem::new(&gen, &g, &cfg).unwrap();
    for regime in [Regime::FixedFrequency, Regime::AnyTime(StepKernel::Exponential)] {
        let opt = prob.solve(regime, true).unwrap().0;
        let join = prob.evaluate(regime, PolicyRule::JoinBid).unwrap();
        let gap = opt.initial().iter().zip(join.initial()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{regime:?}: {gap}");
    }
}
