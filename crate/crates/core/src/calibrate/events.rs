use crate::error::{Error, Result};
use crate::model::{EventKind, Side};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// One row of the event CSV format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Seconds since session start.
    pub timestamp: f64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub side: Side,
    pub size: u32,
    pub q1_before: u32,
    pub q2_before: u32,
    /// Mid price in ticks.
    pub mid_before: f64,
    pub spread_before: u32,
}

impl EventRecord {
    /// +1 for buy orders (bid-side limits and cancels, ask-side market
    /// orders), -1 otherwise.
    pub fn sign(&self) -> f64 {
        match (self.kind, self.side) {
            (EventKind::Market, Side::Ask) | (EventKind::Limit | EventKind::Cancel, Side::Bid) => 1.0,
            _ => -1.0,
        }
    }

    pub fn own_queue(&self) -> u32 {
        match self.side {
            Side::Bid => self.q1_before,
            Side::Ask => self.q2_before,
        }
    }

    /// Consumption that empties the queue it hits.
    pub fn is_depletion(&self) -> bool {
        self.kind != EventKind::Limit && self.size >= self.own_queue()
    }
}

pub fn read_events<R: Read>(r: R) -> Result<Vec<EventRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let mut out: Vec<EventRecord> = Vec::new();
    for row in rdr.deserialize() {
        let rec: EventRecord = row?;
        let line = out.len() + 2;
        if !rec.timestamp.is_finite() || !rec.mid_before.is_finite() {
            return Err(Error::Data(format!("line {line}: non-finite number")));
        }
        if rec.size == 0 {
            return Err(Error::Data(format!("line {line}: event size must be at least 1")));
        }
        if let Some(prev) = out.last() {
            if rec.timestamp < prev.timestamp {
                return Err(Error::Data(format!(
                    "line {line}: timestamp {} precedes {}",
                    rec.timestamp, prev.timestamp
                )));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_events<W: Write>(w: W, events: &[EventRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for e in events {
        wtr.serialize(e)?;
    }
    wtr.flush()?;
    Ok(())
}
