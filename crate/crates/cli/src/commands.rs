use crate::manifest::OutDir;
use crate::{config_failure, CmdResult, Failure, RegimeArgs, EXIT_CONFIG};
use clap::{Args, ValueEnum};
use lob_tactics::calibrate::{
    estimate_intensities, estimate_regeneration, generate_synthetic_events, imbalance_stats, read_events,
    write_events, CalibrationOptions,
};
use lob_tactics::config::{
    intensity_rows, load_setup, regen_rows, BookSection, ExecutionSection, Format, IntensitySpec, ModelFile, RegenSpec,
    Scenario, Setup, SCHEMA,
};
use lob_tactics::dp::{write_policy_csv, write_value_csv, Decision, Policy, PolicyRule, Regime, TimeGrid};
use lob_tactics::ergodicity::{
    check_assumptions, convergence_diagnostics, lyapunov_drift, total_variation, QueueChain,
};
use lob_tactics::figures::{run_surface, run_sweep, write_surface_csv, write_sweep_csv, Pipeline};
use lob_tactics::impact::{build_depletion_race, hitting_probabilities};
use lob_tactics::model::{BookState, EventKind, ModelConfig, PriceWindow, Side};
use lob_tactics::simulate::{simulate_market_only, DecisionTiming, PolicyLookup, SimConfig, Simulator};
use lob_tactics::dp::PayoffModel;
use lob_tactics::Error;
use serde::Serialize;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

const FIG5_CONFIG: &str = include_str!("../../../configs/fig5.toml");

struct Loaded {
    file: ModelFile,
    setup: Setup,
}

fn load(path: &Path, regime: Option<&RegimeArgs>) -> CmdResult<Loaded> {
    let (file, mut setup) = load_setup(path)?;
    if let Some(r) = regime {
        if let Some(dt) = r.dt {
            setup.cfg.decision_dt = dt;
        }
        if let Some(h) = r.horizon {
            setup.cfg.horizon = h;
        }
        let issues = setup.cfg.validate();
        if !issues.is_empty() {
            let msg = issues.iter().map(|(k, m)| format!("{k}: {m}")).collect::<Vec<_>>().join("; ");
            return Err(config_failure(format!("invalid overrides: {msg}")));
        }
    }
    Ok(Loaded { file, setup })
}

fn open_out(dir: &Path, command: &str, config: Option<(&Path, &ModelFile)>) -> CmdResult<OutDir> {
    let mut out = OutDir::create(dir, command)?;
    if let Some((path, file)) = config {
        out.input(path)?;
        out.config_hash(file.hash());
    }
    Ok(out)
}

pub fn validate_config(path: &Path) -> CmdResult {
    let checked = ModelFile::load(path).and_then(|f| f.build().map(|_| f));
    match checked {
        Ok(f) => {
            let _ = writeln!(std::io::stdout(), "{}", f.normalized_json());
            Ok(())
        }
        Err(Error::Config(issues)) => {
            for i in &issues {
                eprintln!("{}: {i}", path.display());
            }
            Err(config_failure(format!("{} problem(s) in {}", issues.len(), path.display())))
        }
        Err(e) => Err(Failure { code: EXIT_CONFIG, error: e.into() }),
    }
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Event CSV with the pre-event book on every line.
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 11)]
    qmax: u32,
    /// Smallest depletion count for a cell-specific regeneration law.
    #[arg(long, default_value_t = 30)]
    min_count: u64,
    #[arg(long, default_value_t = 0.0)]
    start_time: f64,
    /// Pool bid and ask statistics in their own frames.
    #[arg(long)]
    symmetrize: bool,
    /// Buckets with fewer events borrow rates from the nearest bucket that
    /// has enough, in the emitted model file only.
    #[arg(long, default_value_t = 1)]
    min_bucket_events: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Comma-separated horizons in seconds for the price-move statistics.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 10.0, 60.0])]
    horizons: Vec<f64>,
}

#[derive(Serialize)]
struct CalibrationSummary {
    events: usize,
    counted: u64,
    out_of_range: u64,
    cap_violations: u64,
    empty_buckets: usize,
    bid_depletions: u64,
    ask_depletions: u64,
    skipped_depletions: u64,
    symmetrized: bool,
    sizes: Vec<(u32, u64)>,
}

pub fn calibrate(a: &CalibrateArgs) -> CmdResult {
    if a.qmax == 0 {
        return Err(config_failure("--qmax must be at least 1"));
    }
    let events = read_events(File::open(&a.events)?)?;
    let opts = CalibrationOptions { qmax: a.qmax, start_time: a.start_time, min_count: a.min_count };
    let mut est = estimate_intensities(&events, &opts)?;
    let mut regen = estimate_regeneration(&events, &opts)?;
    // pooled tables hold each event once per side
    let (counted, bid_depletions, ask_depletions) =
        (est.total_events(), regen.depletions(Side::Bid), regen.depletions(Side::Ask));
    if a.symmetrize {
        est = est.symmetrize();
        regen = regen.symmetrize();
    }
    let mut out = open_out(&a.out, "calibrate", None)?;
    out.input(&a.events)?;

    let mut w = csv::Writer::from_writer(out.file("intensity.csv")?);
    w.write_record([
        "side", "own", "opp", "occupation", "n_limit", "n_cancel", "n_market", "limit", "cancel", "market",
    ])
    .map_err(Error::from)?;
    for side in [Side::Bid, Side::Ask] {
        for own in 1..=a.qmax {
            for opp in 1..=a.qmax {
                let rates = est.rates(side, own, opp);
                let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    side.to_string(),
                    own.to_string(),
                    opp.to_string(),
                    est.occupation(side, own, opp).to_string(),
                    est.count(side, own, opp, EventKind::Limit).to_string(),
                    est.count(side, own, opp, EventKind::Cancel).to_string(),
                    est.count(side, own, opp, EventKind::Market).to_string(),
                    f(rates.map(|r| r.limit)),
                    f(rates.map(|r| r.cancel)),
                    f(rates.map(|r| r.market)),
                ])
                .map_err(Error::from)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(out.file("regeneration_counts.csv")?);
    w.write_record(["side", "q1", "q2", "new_q1", "new_q2", "price_move", "count"]).map_err(Error::from)?;
    for side in [Side::Bid, Side::Ask] {
        for q1 in 1..=a.qmax {
            for q2 in 1..=a.qmax {
                for (&(n1, n2, dp), &c) in regen.cell_counts(side, q1, q2) {
                    let rec = [side.to_string(), q1.to_string(), q2.to_string(), n1.to_string(), n2.to_string(), dp.to_string(), c.to_string()];
                    w.write_record(rec).map_err(Error::from)?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(out.file("ratio_surface.csv")?);
    w.write_record(["q1", "q2", "mean_q1_over_q2"]).map_err(Error::from)?;
    for (q1, q2, r) in regen.ratio_surface() {
        w.write_record([q1.to_string(), q2.to_string(), r.map(|v| v.to_string()).unwrap_or_default()])
            .map_err(Error::from)?;
    }
    w.flush()?;

    out.json("imbalance.json", &imbalance_stats(&events, &a.horizons, a.bins))?;
    out.json(
        "summary.json",
        &CalibrationSummary {
            events: events.len(),
            counted,
            out_of_range: est.out_of_range,
            cap_violations: est.cap_violations,
            empty_buckets: est.empty_buckets().len(),
            bid_depletions,
            ask_depletions,
            skipped_depletions: regen.skipped,
            symmetrized: a.symmetrize,
            sizes: est.sizes.iter().map(|(&k, &v)| (k, v)).collect(),
        },
    )?;

    // A model file usable by the other subcommands.
    let model = est.to_model(a.min_bucket_events)?;
    let law = regen.to_law(a.min_count)?;
    let d = ModelConfig::default();
    let file = ModelFile {
        schema: SCHEMA.to_string(),
        book: BookSection { qmax: a.qmax, n_max: model.n_max() },
        intensity: IntensitySpec::Table { market_fraction: 0.5, rows: intensity_rows(&model) },
        regeneration: RegenSpec::Table { placement: law.placement(), rows: regen_rows(&law) },
        execution: ExecutionSection {
            tick: d.tick,
            spread: d.spread,
            impact_alpha: d.impact_alpha,
            wait_cost: d.wait_cost,
            order_size: d.order_size,
            horizon: d.horizon,
            decision_dt: d.decision_dt,
            payoff: d.payoff,
            price_window: d.price_window,
        },
        scenario: Scenario::default(),
    };
    let mut w = out.file("model.json")?;
    writeln!(w, "{}", file.normalized_json())?;
    w.flush()?;
    out.finish()
}

#[derive(Args, Debug)]
pub struct GenSyntheticArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial bid size; defaults to half the cap.
    #[arg(long)]
    q1: Option<u32>,
    #[arg(long)]
    q2: Option<u32>,
}

pub fn gen_synthetic(a: &GenSyntheticArgs) -> CmdResult {
    let l = load(&a.config, None)?;
    let q = l.setup.model.qmax();
    let init = BookState::new(a.q1.unwrap_or(q.div_ceil(2)), a.q2.unwrap_or(q.div_ceil(2)), 0);
    if !(1..=q).contains(&init.q1) || !(1..=q).contains(&init.q2) {
        return Err(config_failure(format!("initial book ({}, {}) outside [1, {q}]", init.q1, init.q2)));
    }
    let spread = l.setup.cfg.spread_ticks() as u32;
    let (events, truth) = generate_synthetic_events(&l.setup.model, &l.setup.regen, init, spread, a.events, a.seed)?;
    let mut out = open_out(&a.out, "gen-synthetic", Some((&a.config, &l.file)))?;
    out.seed(a.seed);
    let mut w = out.file("events.csv")?;
    write_events(&mut w, &events)?;
    w.flush()?;
    out.json("truth.json", &truth)?;
    out.finish()
}

#[derive(Args, Debug)]
pub struct ImpactArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ImpactSummary {
    qmax: u32,
    residual: f64,
    condition: f64,
    max_antisymmetry_defect: f64,
    hitting_row_sum_defect: f64,
    symmetric_model: bool,
}

pub fn impact(a: &ImpactArgs) -> CmdResult {
    let l = load(&a.config, None)?;
    let (model, regen) = (&l.setup.model, &l.setup.regen);
    let sol = lob_tactics::impact::solve_impact(model, regen)?;
    let hit = hitting_probabilities(&build_depletion_race(model)?)?;
    let q = model.qmax();
    let mut out = open_out(&a.out, "impact", Some((&a.config, &l.file)))?;
    let mut w = csv::Writer::from_writer(out.file("impact.csv")?);
    w.write_record(["q1", "q2", "impact_ticks", "first_move_ticks"]).map_err(Error::from)?;
    let mut anti: f64 = 0.0;
    for q1 in 1..=q {
        for q2 in 1..=q {
            let i = ((q1 - 1) * q + (q2 - 1)) as usize;
            anti = anti.max((sol.get(q1, q2) + sol.get(q2, q1)).abs());
            w.write_record([q1.to_string(), q2.to_string(), sol.values[i].to_string(), sol.first_move[i].to_string()])
                .map_err(Error::from)?;
        }
    }
    w.flush()?;
    out.json(
        "summary.json",
        &ImpactSummary {
            qmax: q,
            residual: sol.residual,
            condition: sol.condition,
            max_antisymmetry_defect: anti,
            hitting_row_sum_defect: hit.max_row_sum_defect(),
            symmetric_model: model.is_symmetric() && regen.is_symmetric(),
        },
    )?;
    out.finish()
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    regime: RegimeArgs,
    /// Report resting as `stay` instead of folding it into `l` or `c`.
    #[arg(long)]
    explicit_stay: bool,
}

#[derive(Serialize)]
struct InitialRow {
    q1: u32,
    q2: u32,
    q_bef: u32,
    value: f64,
    value_ticks: f64,
    decision: Decision,
}

#[derive(Serialize)]
struct SolveSummary {
    regime: Regime,
    steps: usize,
    states: usize,
    active_states: usize,
    clamped_transitions: usize,
    initial: Vec<InitialRow>,
}

pub fn solve(a: &SolveArgs) -> CmdResult {
    let l = load(&a.config, Some(&a.regime))?;
    let regime = a.regime.regime();
    let p = Pipeline::new(l.setup)?;
    let (surface, policy) = p.problem()?.solve(regime, a.explicit_stay)?;
    let mut out = open_out(&a.out, "solve", Some((&a.config, &l.file)))?;
    let mut w = out.file("policy.csv")?;
    write_policy_csv(&mut w, &p.gen, &surface, &policy)?;
    w.flush()?;
    let mut w = out.file("value.csv")?;
    write_value_csv(&mut w, &p.gen, &surface)?;
    w.flush()?;
    let q = p.setup.model.qmax();
    let mut initial = Vec::new();
    for q1 in 1..=q {
        for q2 in 1..=q {
            let Some(u) = p.initial_state(q1, q2) else { continue };
            let i = p.index(&u)?;
            let value = surface.initial()[i];
            let decision = policy.decisions[0][i].ok_or_else(|| Failure::from(Error::Numeric("no initial decision".into())))?;
            initial.push(InitialRow { q1, q2, q_bef: u.q_bef, value, value_ticks: value / p.setup.cfg.tick, decision });
        }
    }
    out.json(
        "summary.json",
        &SolveSummary {
            regime,
            steps: surface.grid.steps(),
            states: p.gen.len(),
            active_states: p.gen.active_count(),
            clamped_transitions: p.gen.clamped_transitions,
            initial,
        },
    )?;
    out.finish()
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    regime: RegimeArgs,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// A policy CSV from `solve`, `baseline:join-bid` or `baseline:market`.
    #[arg(long, default_value = "baseline:join-bid")]
    policy: String,
    #[arg(long)]
    q1: u32,
    #[arg(long)]
    q2: u32,
    /// Re-decide after every market event, not only on the grid.
    #[arg(long)]
    event_epochs: bool,
    #[arg(long, default_value_t = 1_000_000)]
    max_events: usize,
}

#[derive(Serialize)]
struct SimulateSummary {
    policy: String,
    regime: Regime,
    seed: u64,
    initial: lob_tactics::model::AgentState,
    stats: lob_tactics::simulate::GainStats,
    /// Backward-recursion value of the same policy.
    dp_value: f64,
    /// `(mc - dp) / se`.
    z_score: f64,
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let l = load(&a.config, Some(&a.regime))?;
    let regime = a.regime.regime();
    let p = Pipeline::new(l.setup)?;
    let u = p
        .initial_state(a.q1, a.q2)
        .ok_or_else(|| config_failure(format!("the scenario has no initial state for book ({}, {})", a.q1, a.q2)))?;
    let table: Option<Policy> = match a.policy.as_str() {
        "baseline:join-bid" | "baseline:market" => None,
        path if path.starts_with("baseline:") => return Err(config_failure(format!("unknown baseline {path:?}"))),
        path => {
            let rows = lob_tactics::dp::read_policy_csv(File::open(path)?)?;
            let grid = TimeGrid::new(p.setup.cfg.decision_dt, p.setup.cfg.horizon)?;
            Some(Policy::from_rows(&rows, &p.gen, grid)?)
        }
    };
    let rule = match (&table, a.policy.as_str()) {
        (Some(t), _) => PolicyRule::Table(t),
        (None, "baseline:market") => PolicyRule::AlwaysMarket,
        _ => PolicyRule::JoinBid,
    };
    let prob = p.problem()?;
    let dp_value = prob.evaluate(regime, rule)?.initial()[p.index(&u)?];
    let dyns = p.dynamics()?;
    let sim = Simulator { dyns: &dyns, payoff: PayoffModel::new(&p.impact, &p.setup.cfg), cfg: &p.setup.cfg, regime };
    let sc = SimConfig {
        n_paths: a.paths,
        seed: a.seed,
        max_events: a.max_events,
        timing: if a.event_epochs { DecisionTiming::EventEpochs } else { DecisionTiming::Grid },
        record_events: false,
    };
    let (stats, paths) = sim.run(PolicyLookup { rule, gen: Some(&p.gen) }, u, &sc)?;

    let mut out = open_out(&a.out, "simulate", Some((&a.config, &l.file)))?;
    out.seed(a.seed);
    if table.is_some() {
        out.input(Path::new(&a.policy))?;
    }
    let mut w = csv::Writer::from_writer(out.file("gains.csv")?);
    w.write_record(["path", "gain", "payoff", "cost", "exec_time", "events", "first_decision", "budget_exceeded"])
        .map_err(Error::from)?;
    for r in &paths {
        w.write_record([
            r.path.to_string(),
            r.gain.to_string(),
            r.payoff.to_string(),
            r.cost.to_string(),
            r.exec_time.to_string(),
            r.events.to_string(),
            r.first_decision.map(|d| d.label()).unwrap_or("").to_string(),
            r.budget_exceeded.to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    let z_score = if stats.std_err > 0.0 { (stats.mean - dp_value) / stats.std_err } else { 0.0 };
    out.json(
        "summary.json",
        &SimulateSummary { policy: a.policy.clone(), regime, seed: a.seed, initial: u, stats, dp_value, z_score },
    )?;
    out.finish()
}

#[derive(Args, Debug)]
pub struct ErgodicityArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Points of the witness search grid in (1, z-hi].
    #[arg(long, default_value_t = 50)]
    grid: usize,
    #[arg(long, default_value_t = 3.0)]
    z_hi: f64,
    /// Base of the Lyapunov function.
    #[arg(long, default_value_t = 1.2)]
    z: f64,
    #[arg(long, default_value_t = 1)]
    c_prime: u32,
    /// Comma-separated times for the convergence curves.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 10.0, 30.0, 100.0, 300.0, 1000.0])]
    times: Vec<f64>,
    /// Monte Carlo paths for the empirical event-count law; 0 skips it.
    #[arg(long, default_value_t = 0)]
    paths: usize,
    #[arg(long, default_value_t = 20)]
    events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct EmpiricalCheck {
    initial: (u32, u32),
    events: usize,
    paths: usize,
    seed: u64,
    tv: f64,
}

#[derive(Serialize)]
struct ErgodicityReport {
    assumptions: lob_tactics::ergodicity::AssumptionReport,
    lyapunov: LyapunovSummary,
    convergence: Vec<lob_tactics::ergodicity::ConvergenceCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<EmpiricalCheck>,
    pass: bool,
}

#[derive(Serialize)]
struct LyapunovSummary {
    z: f64,
    c_prime: u32,
    core_level: Option<f64>,
    c: f64,
    d: f64,
    holds: bool,
    degenerate: bool,
    first_violation: Option<(u32, u32)>,
}

pub fn check_ergodicity(a: &ErgodicityArgs) -> CmdResult {
    let l = load(&a.config, None)?;
    let (model, regen) = (&l.setup.model, &l.setup.regen);
    let assumptions = check_assumptions(model, regen, a.grid, a.z_hi);
    let chain = QueueChain::build(model, regen)?;
    let ly = lyapunov_drift(&chain, a.z, a.c_prime);
    let q = model.qmax();
    let corners = [(1, 1), (q, q), (1, q), (q, 1)];
    let mut initials: Vec<(u32, u32)> = Vec::new();
    for c in corners {
        if !initials.contains(&c) {
            initials.push(c);
        }
    }
    let convergence = convergence_diagnostics(&chain, &initials, &a.times)?;
    let empirical = if a.paths > 0 {
        let init = (q.div_ceil(2), q.div_ceil(2));
        let dyns = lob_tactics::model::Dynamics::market_only(model, regen, PriceWindow::new(1 << 20))?;
        let emp = simulate_market_only(&dyns, BookState::new(init.0, init.1, 0), &[a.events], a.paths, a.seed);
        let exact = chain.after_events(&chain.point_mass(init.0, init.1), a.events);
        Some(EmpiricalCheck { initial: init, events: a.events, paths: a.paths, seed: a.seed, tv: total_variation(&emp[0], &exact) })
    } else {
        None
    };
    let mut out = open_out(&a.out, "check-ergodicity", Some((&a.config, &l.file)))?;
    if a.paths > 0 {
        out.seed(a.seed);
    }
    let mut w = csv::Writer::from_writer(out.file("margins.csv")?);
    w.write_record(["q1", "q2", "v", "qv", "margin"]).map_err(Error::from)?;
    for r in &ly.margins {
        let rec = [r.q1.to_string(), r.q2.to_string(), r.v.to_string(), r.qv.to_string(), r.margin.to_string()];
        w.write_record(rec).map_err(Error::from)?;
    }
    w.flush()?;
    let pass = assumptions.pass && ly.holds;
    let lyapunov = LyapunovSummary {
        z: ly.z,
        c_prime: ly.c_prime,
        core_level: ly.core_level,
        c: ly.c,
        d: ly.d,
        holds: ly.holds,
        degenerate: ly.degenerate,
        first_violation: ly.first_violation,
    };
    out.json("report.json", &ErgodicityReport { assumptions, lyapunov, convergence, empirical, pass })?;
    out.finish()
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FigureName {
    Fig5,
    #[value(name = "fig4-shape")]
    Fig4Shape,
}

#[derive(Args, Debug)]
pub struct FigureArgs {
    #[arg(value_enum)]
    name: FigureName,
    #[arg(long)]
    out: PathBuf,
    /// Model file; fig5 has a built-in default, fig4-shape needs one.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn reproduce_figure(a: &FigureArgs) -> CmdResult {
    let (file, setup) = match (&a.config, a.name) {
        (Some(path), _) => {
            let l = load(path, None)?;
            (l.file, l.setup)
        }
        (None, FigureName::Fig5) => {
            let f = ModelFile::parse(FIG5_CONFIG, Format::Toml, None)?;
            let s = f.build()?;
            (f, s)
        }
        (None, FigureName::Fig4Shape) => {
            return Err(config_failure("fig4-shape needs --config with a model file"));
        }
    };
    let tick = setup.cfg.tick;
    let p = Pipeline::new(setup)?;
    let mut out = OutDir::create(&a.out, "reproduce-figure")?;
    if let Some(path) = &a.config {
        out.input(path)?;
    }
    out.config_hash(file.hash());
    match a.name {
        FigureName::Fig5 => {
            let r = run_sweep(&p, Regime::AnyTime(lob_tactics::dp::StepKernel::Exponential), true)?;
            let mut w = out.file("fig5.csv")?;
            write_sweep_csv(&mut w, &r, tick)?;
            w.flush()?;
            out.json("report.json", &r)?;
        }
        FigureName::Fig4Shape => {
            let r = run_surface(&p, Regime::FixedFrequency)?;
            let mut w = out.file("fig4_shape.csv")?;
            write_surface_csv(&mut w, &r)?;
            w.flush()?;
            #[derive(Serialize)]
            struct Shape {
                min_gain_ticks: f64,
                max_gain_ticks: f64,
                argmax: (u32, u32),
                nonnegative: bool,
                books: usize,
            }
            let s = Shape {
                min_gain_ticks: r.min_gain_ticks,
                max_gain_ticks: r.max_gain_ticks,
                argmax: r.argmax,
                nonnegative: r.nonnegative,
                books: r.rows.len(),
            };
            out.json("report.json", &s)?;
        }
    }
    out.finish()
}
