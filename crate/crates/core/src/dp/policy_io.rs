use super::{Decision, Policy, TimeGrid, ValueSurface};
use crate::error::{Error, Result};
use crate::model::{AgentState, ControlledGenerator};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

/// One line of a policy or value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub time_index: usize,
    pub q_bef: u32,
    pub q_a: u32,
    pub q_aft: u32,
    pub q2: u32,
    pub inv: u32,
    pub p_ticks: i32,
    pub p_exec_halfticks: i64,
    pub value: f64,
    pub decision: String,
}

impl PolicyRow {
    pub fn state(&self) -> AgentState {
        AgentState {
            q_bef: self.q_bef,
            q_a: self.q_a,
            q_aft: self.q_aft,
            q2: self.q2,
            inv: self.inv,
            p: self.p_ticks,
            p_exec: self.p_exec_halfticks,
        }
    }
}

fn rows<'a>(
    gen: &'a ControlledGenerator,
    surface: &'a ValueSurface,
    policy: Option<&'a Policy>,
) -> impl Iterator<Item = PolicyRow> + 'a {
    (0..surface.grid.steps()).flat_map(move |k| {
        (0..gen.len()).filter(|&i| gen.is_active(i)).map(move |i| {
            let u = gen.states[i];
            PolicyRow {
                time_index: k,
                q_bef: u.q_bef,
                q_a: u.q_a,
                q_aft: u.q_aft,
                q2: u.q2,
                inv: u.inv,
                p_ticks: u.p,
                p_exec_halfticks: u.p_exec,
                value: surface.values[k][i],
                decision: policy.and_then(|p| p.decisions[k][i]).map_or(String::new(), |d| d.label().to_string()),
            }
        })
    })
}

pub fn write_policy_csv<W: Write>(w: W, gen: &ControlledGenerator, surface: &ValueSurface, policy: &Policy) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows(gen, surface, Some(policy)) {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_value_csv<W: Write>(w: W, gen: &ControlledGenerator, surface: &ValueSurface) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows(gen, surface, None) {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_policy_csv<R: Read>(r: R) -> Result<Vec<PolicyRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (line, rec) in rdr.deserialize::<PolicyRow>().enumerate() {
        let row = rec.map_err(|e| Error::Data(format!("policy row {}: {e}", line + 2)))?;
        if Decision::parse(&row.decision).is_none() {
            return Err(Error::Data(format!("policy row {}: unknown decision {:?}", line + 2, row.decision)));
        }
        out.push(row);
    }
    Ok(out)
}

impl Policy {
    /// Aligns table rows with a generator's states; every active state
    /// needs a decision at every step.
    pub fn from_rows(rows: &[PolicyRow], gen: &ControlledGenerator, grid: TimeGrid) -> Result<Policy> {
        let mut table: HashMap<(usize, AgentState), Decision> = HashMap::new();
        for r in rows {
            let d = Decision::parse(&r.decision)
                .ok_or_else(|| Error::Data(format!("unknown decision {:?}", r.decision)))?;
            table.insert((r.time_index, r.state().canonical()), d);
        }
        let mut decisions = Vec::with_capacity(grid.steps());
        for k in 0..grid.steps() {
            let mut dk = vec![None; gen.len()];
            for (i, slot) in dk.iter_mut().enumerate() {
                if gen.is_active(i) {
                    let d = table.get(&(k, gen.states[i])).ok_or_else(|| {
                        Error::Data(format!("policy has no decision at step {k} for {}", gen.states[i]))
                    })?;
                    *slot = Some(*d);
                }
            }
            decisions.push(dk);
        }
        let explicit_stay = rows.iter().any(|r| r.decision == "stay");
        Ok(Policy { grid, decisions, explicit_stay })
    }
}
