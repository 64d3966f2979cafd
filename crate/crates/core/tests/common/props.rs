//! Property checks shared by the property suite and the acceptance run.

use lob_tactics::dp::*;
use lob_tactics::impact::solve_impact;
use lob_tactics::model::*;
use lob_tactics::simulate::*;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

#[derive(Debug, Clone)]
pub struct Case {
    pub model: IntensityModel,
    pub regen: RegenerationLaw,
    pub cfg: ModelConfig,
}

fn model_strategy() -> impl Strategy<Value = IntensityModel> {
    let constant = (2u32..=4, 0.05f64..1.0, 0.1f64..1.5, 0.0f64..=1.0)
        .prop_map(|(q, l, c, f)| IntensityModel::constant(q, l, c, f).unwrap());
    let reactive = (2u32..=4, 0.1f64..2.0, 0.2f64..2.0, -2.0f64..2.0, 0.0f64..=1.0).prop_map(|(q, t, r, s, f)| {
        ImbalanceRatioRates { total_rate: t, ratio_at_balance: r, imbalance_slope: s, market_fraction: f }.build(q).unwrap()
    });
    prop_oneof![constant, reactive]
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    (model_strategy(), any::<(u8, u8)>(), -1i32..=1, 0.0f64..2e-3, 2u32..=4, prop::bool::ANY).prop_map(
        |(model, (a, b), dp, c, steps, front)| {
            let q = model.qmax();
            let placement = if front { Placement::Front } else { Placement::Natural };
            let regen =
                RegenerationLaw::point(q, 1 + a as u32 % q, 1 + b as u32 % q, dp).unwrap().with_placement(placement);
            let cfg = ModelConfig {
                wait_cost: c,
                // small enough for the explicit finite-difference kernel
                horizon: steps as f64 * 0.2,
                decision_dt: 0.2,
                price_window: Some(2),
                ..ModelConfig::default()
            };
            Case { model, regen, cfg }
        },
    )
}

/// An agent state with unit inventory, folded into `[1, qmax]^2`.
pub fn agent_state(qmax: u32, raw: (u8, u8, bool, u8, i32)) -> AgentState {
    let (a, b, posted, bef, p) = raw;
    let (q1, q2) = (1 + a as u32 % qmax, 1 + b as u32 % qmax);
    if posted {
        let others = q1 - 1;
        let bef = bef as u32 % (others + 1);
        AgentState::posted(bef, 1, others - bef, q2, p, 0)
    } else {
        AgentState::unposted(q1, q2, 1, p, 0)
    }
}

struct Solved {
    gen: ControlledGenerator,
    payoff: Vec<f64>,
}

fn solved(c: &Case) -> Solved {
    let window = PriceWindow::new(c.cfg.price_window.unwrap());
    let gen = build_controlled_generator(&c.model, &c.regen, &c.cfg, window).unwrap();
    let imp = solve_impact(&c.model, &c.regen).unwrap();
    let payoff = PayoffModel::new(&imp, &c.cfg).over(&gen);
    Solved { gen, payoff }
}

const REGIMES: [Regime; 3] =
    [Regime::FixedFrequency, Regime::AnyTime(StepKernel::Exponential), Regime::AnyTime(StepKernel::FiniteDifference)];


pub fn generator_rows_sum_to_zero(c: &Case) -> Result<(), TestCaseError> {
    let s = solved(c);
    prop_assert!(s.gen.matrix.max_row_sum_defect() < 1e-12);
    for i in 0..s.gen.len() {
        prop_assert!(s.gen.matrix.diag(i) <= 0.0);
        for (_, v) in s.gen.matrix.row(i) {
            prop_assert!(v > 0.0);
        }
        let cancel: f64 = s.gen.cancel[i].iter().map(|x| x.1).sum();
        prop_assert!(s.gen.cancel[i].is_empty() || (cancel - 1.0).abs() < 1e-12);
        let market: f64 = s.gen.market[i].iter().map(|x| x.1).sum();
        prop_assert!(s.gen.market[i].is_empty() || (market - 1.0).abs() < 1e-12);
    }
    let mg = build_market_generator(&c.model, &c.regen, PriceWindow::new(2)).unwrap();
    prop_assert!(mg.matrix.max_row_sum_defect() < 1e-12);
    Ok(())
}

pub fn mirroring_is_an_involution(c: &Case, q1: u32, q2: u32, p: i32) -> Result<(), TestCaseError> {
    let b = BookState::new(q1, q2, p);
    prop_assert_eq!(b.mirrored().mirrored(), b);
    prop_assert_eq!(b.mirrored().imbalance(), -b.imbalance());
    let q = c.model.qmax();
    let (q1, q2) = (1 + (q1 - 1) % q, 1 + (q2 - 1) % q);
    prop_assert_eq!(c.model.rates(Side::Bid, q1, q2, 1), c.model.rates(Side::Ask, q2, q1, 1));
    let bid: Vec<_> = c.regen.outcomes(Side::Bid, q1, q2).iter().map(|o| o.mirrored()).collect();
    prop_assert_eq!(bid.as_slice(), c.regen.outcomes(Side::Ask, q2, q1));
    let imp = solve_impact(&c.model, &c.regen).unwrap();
    prop_assert_eq!(imp.get(q1, q2), -imp.get(q2, q1));
    Ok(())
}

pub fn fills_conserve_volume_and_cash(c: &Case, raw: (u8, u8, bool, u8, i32)) -> Result<(), TestCaseError> {
    let q = c.model.qmax();
    let window = PriceWindow::new(2);
    let dyns = Dynamics::new(&c.model, &c.regen, &c.cfg, window).unwrap();
    let u = agent_state(q, raw);
    let mut events = Vec::new();
    let mut outs = Vec::new();
    dyns.events(u.q1(), u.q2, &mut events);
    for ev in &events {
        dyns.agent_outcomes(&u, ev, &mut outs);
        let total: f64 = outs.iter().map(|o| o.prob).sum();
        prop_assert!(outs.is_empty() || (total - 1.0).abs() < 1e-12);
        for o in &outs {
            let v = o.state;
            prop_assert!(v.check(q).is_ok() || v.is_executed());
            prop_assert!(v.inv <= u.inv);
            let fill = (u.inv - v.inv) as i64;
            // each unit fills at the bid: 2p - spread in half-ticks
            prop_assert_eq!(v.p_exec - u.p_exec, fill * (2 * u.p as i64 - dyns.spread_halfticks()));
            if fill > 0 {
                prop_assert!(ev.side == Side::Bid && ev.kind == EventKind::Market);
            }
            let depleted = ev.kind != EventKind::Limit && ev.size >= if ev.side == Side::Bid { u.q1() } else { u.q2 };
            if !depleted {
                let (d1, d2) = (v.q1() as i64 - u.q1() as i64, v.q2 as i64 - u.q2 as i64);
                let n = ev.size as i64;
                let want = match ev.kind { EventKind::Limit => n, _ => -n };
                let moved = if ev.side == Side::Bid { (d1, d2) } else { (d2, d1) };
                if !(ev.kind == EventKind::Cancel && ev.side == Side::Bid && u.is_posted()) {
                    prop_assert_eq!(moved, (want, 0));
                }
                prop_assert_eq!(v.p, u.p);
            }
        }
    }
    Ok(())
}

pub fn optimum_dominates_fixed_rules(c: &Case) -> Result<(), TestCaseError> {
    let s = solved(c);
    let prob = ExecutionProblem::new(&s.gen, &s.payoff, &c.cfg).unwrap();
    for regime in REGIMES {
        let (opt, _) = prob.solve(regime, true).unwrap();
        let join = prob.evaluate(regime, PolicyRule::JoinBid).unwrap();
        let market = prob.evaluate(regime, PolicyRule::AlwaysMarket).unwrap();
        for k in 0..opt.values.len() {
            for i in 0..s.gen.len() {
                prop_assert!(opt.values[k][i] >= join.values[k][i] - 1e-12);
                prop_assert!(opt.values[k][i] >= market.values[k][i] - 1e-12);
            }
        }
    }
    Ok(())
}

pub fn terminal_and_execution_boundaries(c: &Case) -> Result<(), TestCaseError> {
    let s = solved(c);
    let prob = ExecutionProblem::new(&s.gen, &s.payoff, &c.cfg).unwrap();
    for regime in REGIMES {
        let (opt, policy) = prob.solve(regime, true).unwrap();
        let last = opt.values.last().unwrap();
        prop_assert_eq!(opt.values.len(), policy.decisions.len() + 1);
        for i in 0..s.gen.len() {
            prop_assert_eq!(last[i], s.payoff[i]);
            if !s.gen.is_active(i) {
                for k in 0..opt.values.len() {
                    prop_assert_eq!(opt.values[k][i], s.payoff[i]);
                }
                prop_assert!(policy.decisions.iter().all(|d| d[i].is_none()));
            } else {
                // selling at market right away is always available
                let m: f64 = s.gen.market[i].iter().map(|&(j, p)| p * s.payoff[j]).sum();
                prop_assert!(opt.values[0][i] >= m - 1e-12);
            }
        }
    }
    Ok(())
}

pub fn simulation_is_a_function_of_the_seed(c: &Case, seed: u64) -> Result<(), TestCaseError> {
    let window = PriceWindow::new(2);
    let imp = solve_impact(&c.model, &c.regen).unwrap();
    let dyns = Dynamics::new(&c.model, &c.regen, &c.cfg, window).unwrap();
    let sim = Simulator { dyns: &dyns, payoff: PayoffModel::new(&imp, &c.cfg), cfg: &c.cfg, regime: Regime::FixedFrequency };
    let sc = SimConfig { n_paths: 64, seed, record_events: true, ..SimConfig::default() };
    let q = c.model.qmax();
    let u = AgentState::unposted(q, q, 1, 0, 0);
    let look = PolicyLookup { rule: PolicyRule::JoinBid, gen: None };
    let (a, pa) = sim.run(look, u, &sc).unwrap();
    let (b, pb) = sim.run(look, u, &sc).unwrap();
    prop_assert_eq!(a, b);
    for (x, y) in pa.iter().zip(&pb) {
        prop_assert_eq!(x.gain.to_bits(), y.gain.to_bits());
        prop_assert_eq!(x.events, y.events);
    }
    Ok(())
}

pub fn raw_agent() -> impl Strategy<Value = (u8, u8, bool, u8, i32)> {
    (any::<u8>(), any::<u8>(), prop::bool::ANY, any::<u8>(), -2i32..=2)
}

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// Runs every property with `cases` cases each; `(name, outcome)` per property.
#[allow(dead_code)] // only the acceptance run calls this
pub fn run_suite(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    use proptest::test_runner::TestRunner;
    let mut out = Vec::new();
    let mut go = |name: &'static str, r: Result<(), String>| out.push((name, r));
    let err = |e: proptest::test_runner::TestError<_>| e.to_string();
    go("generator row sums", TestRunner::new(config(cases)).run(&case_strategy(), |c| generator_rows_sum_to_zero(&c)).map_err(err));
    go(
        "symmetry involution",
        TestRunner::new(config(cases))
            .run(&(case_strategy(), 1u32..=4, 1u32..=4, -5i32..=5), |(c, a, b, p)| mirroring_is_an_involution(&c, a, b, p))
            .map_err(|e| e.to_string()),
    );
    go(
        "fill conservation",
        TestRunner::new(config(cases))
            .run(&(case_strategy(), raw_agent()), |(c, raw)| fills_conserve_volume_and_cash(&c, raw))
            .map_err(|e| e.to_string()),
    );
    go("policy dominance", TestRunner::new(config(cases)).run(&case_strategy(), |c| optimum_dominates_fixed_rules(&c)).map_err(err));
    go(
        "terminal and execution boundaries",
        TestRunner::new(config(cases)).run(&case_strategy(), |c| terminal_and_execution_boundaries(&c)).map_err(|e| e.to_string()),
    );
    go(
        "seed determinism",
        TestRunner::new(config(cases))
            .run(&(case_strategy(), any::<u64>()), |(c, s)| simulation_is_a_function_of_the_seed(&c, s))
            .map_err(|e| e.to_string()),
    );
    out
}
