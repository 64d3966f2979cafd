//! Model files in the `lob-tactics/model-v1` schema, JSON or TOML.
//!
//! Parsing walks the raw document by hand so that every problem is
//! reported at once, with the dotted path of the offending key.

use crate::error::{ConfigIssue, Error, Result};
use crate::model::{
    AgentState, ImbalanceRatioRates, IntensityModel, ModelConfig, Payoff, Placement, RateTable, RegenOutcome,
    RegenerationLaw, Side, SideRates,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA: &str = "lob-tactics/model-v1";

/// One intensity row; `side` absent means the row is bid-frame and the
/// ask side follows by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    pub own: u32,
    pub opp: u32,
    #[serde(default = "one")]
    pub size: u32,
    pub limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cancel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumption: Option<f64>,
}

fn one() -> u32 {
    1
}

/// One regeneration outcome. Absent `q1`/`q2` make the row apply to every
/// pre-depletion cell not listed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<u32>,
    pub new_q1: u32,
    pub new_q2: u32,
    pub price_move: i32,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IntensitySpec {
    Constant { limit: f64, consumption: f64, market_fraction: f64 },
    Table { market_fraction: f64, rows: Vec<IntensityRow> },
    QueueReactiveRatio { total_rate: f64, ratio_at_balance: f64, imbalance_slope: f64, market_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegenSpec {
    Point { q1: u32, q2: u32, price_move: i32, placement: Placement },
    Table { placement: Placement, rows: Vec<RegenRow> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BookSection {
    pub qmax: u32,
    pub n_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionSection {
    pub tick: f64,
    pub spread: f64,
    pub impact_alpha: f64,
    pub wait_cost: f64,
    pub order_size: u32,
    pub horizon: f64,
    pub decision_dt: f64,
    pub payoff: Payoff,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_window: Option<u32>,
}

/// Where the agent's resting order starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    /// Volume ahead of the agent; absent means the back of the queue.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_bef: Option<u32>,
    /// Whether a quoted bid size already counts the agent's order.
    pub agent_in_q1: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario { q_bef: None, agent_in_q1: true }
    }
}

impl Scenario {
    /// Initial posted state for a quoted book, or `None` when the agent's
    /// order does not fit.
    pub fn initial_state(&self, q1: u32, q2: u32, order_size: u32, qmax: u32) -> Option<AgentState> {
        let others = if self.agent_in_q1 { q1.checked_sub(order_size)? } else { q1 };
        if others + order_size > qmax || others + order_size == 0 || q2 == 0 || q2 > qmax {
            return None;
        }
        let bef = self.q_bef.unwrap_or(others).min(others);
        Some(AgentState::posted(bef, order_size, others - bef, q2, 0, 0))
    }
}

/// A validated model file with every default filled in and table files
/// inlined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFile {
    pub schema: String,
    pub book: BookSection,
    pub intensity: IntensitySpec,
    pub regeneration: RegenSpec,
    pub execution: ExecutionSection,
    pub scenario: Scenario,
}

/// Everything a solver needs, built from a [`ModelFile`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: IntensityModel,
    pub regen: RegenerationLaw,
    pub cfg: ModelConfig,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Toml,
}

impl Format {
    pub fn from_path(p: &Path) -> Format {
        match p.extension().and_then(|e| e.to_str()) {
            Some("toml") => Format::Toml,
            _ => Format::Json,
        }
    }
}

pub fn parse_document(text: &str, format: Format) -> Result<Value> {
    match format {
        Format::Json => serde_json::from_str(text).map_err(|e| Error::config("", format!("not valid JSON: {e}"))),
        Format::Toml => {
            let v: toml::Value = toml::from_str(text).map_err(|e| Error::config("", format!("not valid TOML: {e}")))?;
            serde_json::to_value(v).map_err(|e| Error::config("", e.to_string()))
        }
    }
}

impl ModelFile {
    /// Loads a file; relative table paths resolve against its directory.
    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, Format::from_path(path), Some(&base))
    }

    /// Parses a document. Without `base`, table files are not allowed.
    pub fn parse(text: &str, format: Format, base: Option<&Path>) -> Result<ModelFile> {
        let doc = parse_document(text, format)?;
        let mut w = Walker { issues: Vec::new(), base: base.map(Path::to_path_buf) };
        let file = w.model_file(&doc);
        match file {
            Some(f) if w.issues.is_empty() => Ok(f),
            _ => Err(Error::Config(w.issues)),
        }
    }

    /// Canonical JSON of the normalized file.
    pub fn normalized_json(&self) -> String {
        // serde_json maps are sorted, so a round trip through Value fixes
        // the key order
        let v = serde_json::to_value(self).expect("model file serializes");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.normalized_json().as_bytes()))
    }

    pub fn build(&self) -> Result<Setup> {
        let q = self.book.qmax;
        let model = match &self.intensity {
            IntensitySpec::Constant { limit, consumption, market_fraction } => {
                IntensityModel::constant(q, *limit, *consumption, *market_fraction)?
            }
            IntensitySpec::QueueReactiveRatio { total_rate, ratio_at_balance, imbalance_slope, market_fraction } => {
                ImbalanceRatioRates {
                    total_rate: *total_rate,
                    ratio_at_balance: *ratio_at_balance,
                    imbalance_slope: *imbalance_slope,
                    market_fraction: *market_fraction,
                }
                .build(q)?
            }
            IntensitySpec::Table { market_fraction, rows } => intensity_from_rows(q, self.book.n_max, *market_fraction, rows)?,
        };
        let regen = match &self.regeneration {
            RegenSpec::Point { q1, q2, price_move, placement } => {
                RegenerationLaw::point(q, *q1, *q2, *price_move)?.with_placement(*placement)
            }
            RegenSpec::Table { placement, rows } => regen_from_rows(q, rows)?.with_placement(*placement),
        };
        let e = &self.execution;
        let cfg = ModelConfig {
            tick: e.tick,
            spread: e.spread,
            impact_alpha: e.impact_alpha,
            wait_cost: e.wait_cost,
            order_size: e.order_size,
            horizon: e.horizon,
            decision_dt: e.decision_dt,
            payoff: e.payoff,
            price_window: e.price_window,
        };
        Ok(Setup { model, regen, cfg, scenario: self.scenario.clone() })
    }
}

fn row_rates(r: &IntensityRow, market_fraction: f64) -> Result<SideRates> {
    let (cancel, market) = match (r.cancel, r.market, r.consumption) {
        (Some(c), Some(m), None) => (c, m),
        (None, None, Some(t)) => crate::model::split_consumption(t, market_fraction),
        _ => {
            return Err(Error::Model(format!(
                "row ({}, {}): give either cancel and market or consumption alone",
                r.own, r.opp
            )))
        }
    };
    Ok(SideRates { limit: r.limit, cancel, market })
}

/// Builds an intensity model from table rows. Rows without a side are
/// mirrored onto the ask; unlisted cells have zero rates.
pub fn intensity_from_rows(qmax: u32, n_max: u32, market_fraction: f64, rows: &[IntensityRow]) -> Result<IntensityModel> {
    let mut tables = [RateTable::zeros(qmax, n_max), RateTable::zeros(qmax, n_max)];
    for (k, r) in rows.iter().enumerate() {
        if !(1..=qmax).contains(&r.own) || !(1..=qmax).contains(&r.opp) || !(1..=n_max).contains(&r.size) {
            return Err(Error::Model(format!("row {}: cell ({}, {}, size {}) out of range", k + 1, r.own, r.opp, r.size)));
        }
        if r.limit > 0.0 && r.own + r.size > qmax {
            return Err(Error::Model(format!(
                "row {}: insertions at own queue {} would exceed qmax {qmax}",
                k + 1,
                r.own
            )));
        }
        let rates = row_rates(r, market_fraction)?;
        match r.side {
            Some(Side::Bid) => tables[0].set(r.own, r.opp, r.size, rates),
            Some(Side::Ask) => tables[1].set(r.own, r.opp, r.size, rates),
            None => {
                tables[0].set(r.own, r.opp, r.size, rates);
                tables[1].set(r.own, r.opp, r.size, rates);
            }
        }
    }
    let [bid, ask] = tables;
    IntensityModel::from_tables(bid, ask)
}

/// Builds a regeneration law from rows. Rows without a side describe bid
/// depletions and are mirrored for the ask.
pub fn regen_from_rows(qmax: u32, rows: &[RegenRow]) -> Result<RegenerationLaw> {
    let n = (qmax * qmax) as usize;
    let mut explicit: [Vec<Vec<RegenOutcome>>; 2] = [vec![Vec::new(); n], vec![Vec::new(); n]];
    let mut default: [Vec<RegenOutcome>; 2] = [Vec::new(), Vec::new()];
    let cell = |a: u32, b: u32| ((a - 1) * qmax + (b - 1)) as usize;
    for (k, r) in rows.iter().enumerate() {
        let o = RegenOutcome { q1: r.new_q1, q2: r.new_q2, dp: r.price_move, prob: r.prob };
        let sides: &[(usize, bool)] = match r.side {
            Some(Side::Bid) => &[(0, false)],
            Some(Side::Ask) => &[(1, false)],
            None => &[(0, false), (1, true)],
        };
        for &(s, mirror) in sides {
            let out = if mirror { o.mirrored() } else { o };
            match (r.q1, r.q2) {
                (Some(a), Some(b)) => {
                    if !(1..=qmax).contains(&a) || !(1..=qmax).contains(&b) {
                        return Err(Error::Model(format!("row {}: pre-depletion cell ({a}, {b}) out of range", k + 1)));
                    }
                    let c = if mirror { cell(b, a) } else { cell(a, b) };
                    explicit[s][c].push(out);
                }
                (None, None) => default[s].push(out),
                _ => return Err(Error::Model(format!("row {}: give both q1 and q2 or neither", k + 1))),
            }
        }
    }
    let mut tables: [Vec<Vec<RegenOutcome>>; 2] = [Vec::new(), Vec::new()];
    for s in 0..2 {
        tables[s] = explicit[s]
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if v.is_empty() {
                    if default[s].is_empty() {
                        Err(Error::Model(format!(
                            "no {} regeneration outcome for cell ({}, {})",
                            if s == 0 { "bid" } else { "ask" },
                            c as u32 / qmax + 1,
                            c as u32 % qmax + 1
                        )))
                    } else {
                        Ok(default[s].clone())
                    }
                } else {
                    Ok(v.clone())
                }
            })
            .collect::<Result<_>>()?;
    }
    let [bid, ask] = tables;
    RegenerationLaw::from_tables(qmax, bid, ask)
}

pub fn read_intensity_csv<R: std::io::Read>(r: R) -> Result<Vec<IntensityRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        let row: IntensityRow = row?;
        for x in [Some(row.limit), row.cancel, row.market, row.consumption].into_iter().flatten() {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Data(format!("line {}: rates must be finite and non-negative", rows.len() + 2)));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_intensity_csv<W: std::io::Write>(w: W, rows: &[IntensityRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["side", "own", "opp", "size", "limit", "cancel", "market"])?;
    for r in rows {
        let side = r.side.map(|s| s.to_string()).unwrap_or_default();
        let (c, m) = row_rates(r, 0.5)
            .map(|x| (x.cancel, x.market))
            .unwrap_or((r.cancel.unwrap_or(0.0), r.market.unwrap_or(0.0)));
        wtr.write_record([
            side,
            r.own.to_string(),
            r.opp.to_string(),
            r.size.to_string(),
            r.limit.to_string(),
            c.to_string(),
            m.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_regen_csv<R: std::io::Read>(r: R) -> Result<Vec<RegenRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        let row: RegenRow = row?;
        if !(row.prob >= 0.0 && row.prob <= 1.0) {
            return Err(Error::Data(format!("line {}: probability outside [0, 1]", rows.len() + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rows reproducing a model exactly, with explicit sides.
pub fn intensity_rows(model: &IntensityModel) -> Vec<IntensityRow> {
    let mut rows = Vec::new();
    for side in [Side::Bid, Side::Ask] {
        let t = model.table(side);
        for own in 1..=model.qmax() {
            for opp in 1..=model.qmax() {
                for n in 1..=model.n_max() {
                    let r = t.get(own, opp, n);
                    rows.push(IntensityRow {
                        side: Some(side),
                        own,
                        opp,
                        size: n,
                        limit: r.limit,
                        cancel: Some(r.cancel),
                        market: Some(r.market),
                        consumption: None,
                    });
                }
            }
        }
    }
    rows
}

/// Rows reproducing a regeneration law exactly, with explicit cells.
pub fn regen_rows(law: &RegenerationLaw) -> Vec<RegenRow> {
    let mut rows = Vec::new();
    for side in [Side::Bid, Side::Ask] {
        for q1 in 1..=law.qmax() {
            for q2 in 1..=law.qmax() {
                for o in law.outcomes(side, q1, q2) {
                    rows.push(RegenRow {
                        side: Some(side),
                        q1: Some(q1),
                        q2: Some(q2),
                        new_q1: o.q1,
                        new_q2: o.q2,
                        price_move: o.dp,
                        prob: o.prob,
                    });
                }
            }
        }
    }
    rows
}

/// The closest allowed key, if it is close enough to be a likely typo.
pub fn suggest<'a>(key: &str, allowed: &[&'a str]) -> Option<&'a str> {
    allowed
        .iter()
        .map(|a| (strsim::levenshtein(key, a), *a))
        .filter(|&(d, a)| d <= 2.max(a.len() / 3))
        .min()
        .map(|(_, a)| a)
}

struct Walker {
    issues: Vec<ConfigIssue>,
    base: Option<PathBuf>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Walker {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue { path: path.into(), message: message.into() });
    }

    fn keys(&mut self, path: &str, obj: &Map<String, Value>, allowed: &[&str]) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                let msg = match suggest(k, allowed) {
                    Some(s) => format!("unknown key; did you mean `{s}`?"),
                    None => format!("unknown key; expected one of {}", allowed.join(", ")),
                };
                self.issue(join(path, k), msg);
            }
        }
    }

    fn object<'v>(&mut self, path: &str, v: Option<&'v Value>) -> Option<&'v Map<String, Value>> {
        match v {
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                self.issue(path, "expected a table/object");
                None
            }
            None => {
                self.issue(path, "missing section");
                None
            }
        }
    }

    fn num(&mut self, path: &str, obj: &Map<String, Value>, key: &str, default: Option<f64>) -> Option<f64> {
        match obj.get(key) {
            None => {
                if default.is_none() {
                    self.issue(join(path, key), "missing required number");
                }
                default
            }
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.issue(join(path, key), "expected a finite number");
                    None
                }
            },
        }
    }

    fn int(&mut self, path: &str, obj: &Map<String, Value>, key: &str, default: Option<i64>) -> Option<i64> {
        match obj.get(key) {
            None => {
                if default.is_none() {
                    self.issue(join(path, key), "missing required integer");
                }
                default
            }
            Some(v) => match v.as_i64() {
                Some(x) => Some(x),
                None => {
                    self.issue(join(path, key), "expected an integer");
                    None
                }
            },
        }
    }

    fn uint(&mut self, path: &str, obj: &Map<String, Value>, key: &str, default: Option<u32>, min: u32) -> Option<u32> {
        let x = self.int(path, obj, key, default.map(i64::from))?;
        if x < min as i64 || x > u32::MAX as i64 {
            self.issue(join(path, key), format!("must be an integer of at least {min}"));
            return None;
        }
        Some(x as u32)
    }

    fn boolean(&mut self, path: &str, obj: &Map<String, Value>, key: &str, default: bool) -> bool {
        match obj.get(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                self.issue(join(path, key), "expected true or false");
                default
            }
        }
    }

    fn string<'v>(&mut self, path: &str, obj: &'v Map<String, Value>, key: &str) -> Option<&'v str> {
        match obj.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.issue(join(path, key), "expected a string");
                None
            }
            None => None,
        }
    }

    fn model_file(&mut self, doc: &Value) -> Option<ModelFile> {
        let Some(top) = doc.as_object() else {
            self.issue("", "top level must be a table/object");
            return None;
        };
        self.keys("", top, &["schema", "book", "intensity", "regeneration", "execution", "scenario"]);
        match self.string("", top, "schema") {
            Some(SCHEMA) => {}
            Some(other) => self.issue("schema", format!("unsupported schema `{other}`, expected `{SCHEMA}`")),
            None => self.issue("schema", format!("missing; expected `{SCHEMA}`")),
        }
        let book = self.book(top.get("book"));
        let qmax = book.as_ref().map(|b| b.qmax);
        let intensity = self.intensity(top.get("intensity"));
        let regeneration = self.regeneration(top.get("regeneration"), qmax);
        let execution = self.execution(top.get("execution"));
        let scenario = match top.get("scenario") {
            None => Some(Scenario::default()),
            v => self.scenario(v),
        };
        Some(ModelFile {
            schema: SCHEMA.to_string(),
            book: book?,
            intensity: intensity?,
            regeneration: regeneration?,
            execution: execution?,
            scenario: scenario?,
        })
    }

    fn book(&mut self, v: Option<&Value>) -> Option<BookSection> {
        let o = self.object("book", v)?;
        self.keys("book", o, &["qmax", "n_max"]);
        let qmax = self.uint("book", o, "qmax", None, 1);
        let n_max = self.uint("book", o, "n_max", Some(1), 1);
        if let Some(q) = qmax {
            if q > 200 {
                self.issue("book.qmax", "at most 200 is supported");
            }
        }
        Some(BookSection { qmax: qmax?, n_max: n_max? })
    }

    fn fraction(&mut self, path: &str, o: &Map<String, Value>) -> Option<f64> {
        let f = self.num(path, o, "market_fraction", Some(0.5))?;
        if !(0.0..=1.0).contains(&f) {
            self.issue(join(path, "market_fraction"), "must lie in [0, 1]");
            return None;
        }
        Some(f)
    }

    fn rate(&mut self, path: &str, o: &Map<String, Value>, key: &str) -> Option<f64> {
        let x = self.num(path, o, key, None)?;
        if x < 0.0 {
            self.issue(join(path, key), "must be non-negative");
            return None;
        }
        Some(x)
    }

    fn rows<T: serde::de::DeserializeOwned>(
        &mut self,
        path: &str,
        o: &Map<String, Value>,
        read_csv: fn(std::fs::File) -> Result<Vec<T>>,
    ) -> Option<Vec<T>> {
        match (o.get("rows"), self.string(path, o, "path")) {
            (Some(_), Some(_)) => {
                self.issue(path, "give either `rows` or `path`, not both");
                None
            }
            (Some(Value::Array(items)), None) => {
                let mut out = Vec::with_capacity(items.len());
                for (k, it) in items.iter().enumerate() {
                    match serde_json::from_value::<T>(it.clone()) {
                        Ok(r) => out.push(r),
                        Err(e) => self.issue(format!("{path}.rows[{k}]"), e.to_string()),
                    }
                }
                Some(out)
            }
            (Some(_), None) => {
                self.issue(join(path, "rows"), "expected an array");
                None
            }
            (None, Some(p)) => {
                let Some(base) = self.base.clone() else {
                    self.issue(join(path, "path"), "table files are not allowed here");
                    return None;
                };
                let full = base.join(p);
                match std::fs::File::open(&full).map_err(Error::from).and_then(read_csv) {
                    Ok(rows) => Some(rows),
                    Err(e) => {
                        self.issue(join(path, "path"), format!("{}: {e}", full.display()));
                        None
                    }
                }
            }
            (None, None) => {
                self.issue(path, "a table needs `rows` or `path`");
                None
            }
        }
    }

    fn intensity(&mut self, v: Option<&Value>) -> Option<IntensitySpec> {
        let p = "intensity";
        let o = self.object(p, v)?;
        match self.string(p, o, "kind") {
            Some("constant") => {
                self.keys(p, o, &["kind", "limit", "consumption", "market_fraction"]);
                let limit = self.rate(p, o, "limit");
                let consumption = self.rate(p, o, "consumption");
                let market_fraction = self.fraction(p, o);
                Some(IntensitySpec::Constant { limit: limit?, consumption: consumption?, market_fraction: market_fraction? })
            }
            Some("table") => {
                self.keys(p, o, &["kind", "path", "rows", "market_fraction"]);
                let market_fraction = self.fraction(p, o);
                let rows = self.rows(p, o, read_intensity_csv);
                Some(IntensitySpec::Table { market_fraction: market_fraction?, rows: rows? })
            }
            Some("queue-reactive-ratio") => {
                self.keys(p, o, &["kind", "total_rate", "ratio_at_balance", "imbalance_slope", "market_fraction"]);
                let total_rate = self.rate(p, o, "total_rate");
                let ratio_at_balance = self.rate(p, o, "ratio_at_balance");
                let imbalance_slope = self.num(p, o, "imbalance_slope", Some(0.0));
                let market_fraction = self.fraction(p, o);
                Some(IntensitySpec::QueueReactiveRatio {
                    total_rate: total_rate?,
                    ratio_at_balance: ratio_at_balance?,
                    imbalance_slope: imbalance_slope?,
                    market_fraction: market_fraction?,
                })
            }
            Some(other) => {
                let kinds = ["constant", "table", "queue-reactive-ratio"];
                let hint = suggest(other, &kinds).map(|s| format!("; did you mean `{s}`?")).unwrap_or_default();
                self.issue(join(p, "kind"), format!("unknown intensity kind `{other}`{hint}"));
                None
            }
            None => {
                self.issue(join(p, "kind"), "missing; one of constant, table, queue-reactive-ratio");
                None
            }
        }
    }

    fn placement(&mut self, path: &str, o: &Map<String, Value>) -> Option<Placement> {
        match self.string(path, o, "placement") {
            None => Some(Placement::Natural),
            Some("natural") => Some(Placement::Natural),
            Some("front") => Some(Placement::Front),
            Some("uniform") => Some(Placement::Uniform),
            Some(other) => {
                self.issue(join(path, "placement"), format!("unknown placement `{other}`; one of natural, front, uniform"));
                None
            }
        }
    }

    fn regeneration(&mut self, v: Option<&Value>, qmax: Option<u32>) -> Option<RegenSpec> {
        let p = "regeneration";
        let o = self.object(p, v)?;
        match self.string(p, o, "kind") {
            Some("point") => {
                self.keys(p, o, &["kind", "q1", "q2", "price_move", "placement"]);
                let q1 = self.uint(p, o, "q1", None, 1);
                let q2 = self.uint(p, o, "q2", None, 1);
                let price_move = self.int(p, o, "price_move", Some(-1));
                let placement = self.placement(p, o);
                if let Some(q) = qmax {
                    for (k, x) in [("q1", q1), ("q2", q2)] {
                        if x.is_some_and(|x| x > q) {
                            self.issue(join(p, k), format!("exceeds book.qmax = {q}"));
                        }
                    }
                }
                Some(RegenSpec::Point { q1: q1?, q2: q2?, price_move: price_move? as i32, placement: placement? })
            }
            Some("table") => {
                self.keys(p, o, &["kind", "path", "rows", "placement"]);
                let placement = self.placement(p, o);
                let rows = self.rows(p, o, read_regen_csv);
                Some(RegenSpec::Table { placement: placement?, rows: rows? })
            }
            Some(other) => {
                self.issue(join(p, "kind"), format!("unknown regeneration kind `{other}`; one of point, table"));
                None
            }
            None => {
                self.issue(join(p, "kind"), "missing; one of point, table");
                None
            }
        }
    }

    fn payoff(&mut self, v: Option<&Value>) -> Option<Payoff> {
        let p = "execution.payoff";
        let Some(v) = v else { return Some(Payoff::Identity) };
        let o = self.object(p, Some(v))?;
        match self.string(p, o, "kind") {
            Some("identity") => {
                self.keys(p, o, &["kind"]);
                Some(Payoff::Identity)
            }
            Some("clipped") => {
                self.keys(p, o, &["kind", "lower", "upper"]);
                let lower = self.num(p, o, "lower", None);
                let upper = self.num(p, o, "upper", None);
                Some(Payoff::Clipped { lower: lower?, upper: upper? })
            }
            _ => {
                self.issue(join(p, "kind"), "expected identity or clipped");
                None
            }
        }
    }

    fn execution(&mut self, v: Option<&Value>) -> Option<ExecutionSection> {
        let p = "execution";
        let o = self.object(p, v)?;
        self.keys(
            p,
            o,
            &[
                "tick",
                "spread",
                "impact_alpha",
                "wait_cost",
                "order_size",
                "horizon",
                "decision_dt",
                "payoff",
                "price_window",
            ],
        );
        let tick = self.num(p, o, "tick", None);
        let spread = self.num(p, o, "spread", None);
        let impact_alpha = self.num(p, o, "impact_alpha", Some(0.0));
        let wait_cost = self.num(p, o, "wait_cost", Some(0.0));
        let order_size = self.uint(p, o, "order_size", Some(1), 1);
        let horizon = self.num(p, o, "horizon", None);
        let decision_dt = self.num(p, o, "decision_dt", None);
        let payoff = self.payoff(o.get("payoff"));
        let price_window = match o.get("price_window") {
            None => Some(None),
            Some(_) => self.uint(p, o, "price_window", None, 0).map(Some),
        };
        let sec = ExecutionSection {
            tick: tick?,
            spread: spread?,
            impact_alpha: impact_alpha?,
            wait_cost: wait_cost?,
            order_size: order_size?,
            horizon: horizon?,
            decision_dt: decision_dt?,
            payoff: payoff?,
            price_window: price_window?,
        };
        let cfg = ModelConfig {
            tick: sec.tick,
            spread: sec.spread,
            impact_alpha: sec.impact_alpha,
            wait_cost: sec.wait_cost,
            order_size: sec.order_size,
            horizon: sec.horizon,
            decision_dt: sec.decision_dt,
            payoff: sec.payoff,
            price_window: sec.price_window,
        };
        let problems = cfg.validate();
        let ok = problems.is_empty();
        for (k, m) in problems {
            self.issue(join(p, &k), m);
        }
        ok.then_some(sec)
    }

    fn scenario(&mut self, v: Option<&Value>) -> Option<Scenario> {
        let p = "scenario";
        let o = self.object(p, v)?;
        self.keys(p, o, &["q_bef", "agent_in_q1"]);
        let q_bef = match o.get("q_bef") {
            None => Some(None),
            Some(_) => self.uint(p, o, "q_bef", None, 0).map(Some),
        };
        let agent_in_q1 = self.boolean(p, o, "agent_in_q1", true);
        Some(Scenario { q_bef: q_bef?, agent_in_q1 })
    }
}

/// Loads and builds in one step, also checking the built objects.
pub fn load_setup(path: &Path) -> Result<(ModelFile, Setup)> {
    let file = ModelFile::load(path)?;
    let setup = file.build().map_err(|e| match e {
        Error::Model(m) => Error::config("", m),
        other => other,
    })?;
    Ok((file, setup))
}
