use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::HeightConfig;
use crate::error::{Result, SandpileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A grain added at a critical site.
    Avalanche,
    /// A grain added at a site of height 1.
    Birth,
    /// A joint transition of a coupled pair.
    CoupledPair,
}

/// Sites whose heights changed, with their new heights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Delta {
    Single(Vec<(i64, u8)>),
    Pair { upper: Vec<(i64, u8)>, lower: Vec<(i64, u8)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub site: i64,
    pub kind: EventKind,
    pub delta: Delta,
}

/// Time-stamped jump record of a single or coupled chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: HeightConfig,
    /// Lower initial configuration for coupled runs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub initial_lower: Option<HeightConfig>,
    pub events: Vec<Event>,
    pub horizon: f64,
}

#[derive(Serialize)]
struct Header<'a> {
    initial: &'a HeightConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_lower: &'a Option<HeightConfig>,
    horizon: f64,
    events: usize,
}

fn replay(config: &mut HeightConfig, changes: &[(i64, u8)]) -> Result<()> {
    for &(x, h) in changes {
        config.set(x, h)?;
    }
    Ok(())
}

impl Trajectory {
    pub fn is_coupled(&self) -> bool {
        self.initial_lower.is_some()
    }

    /// State (and lower state, for coupled runs) just after all events
    /// with time `<= t`.
    pub fn state_at(&self, t: f64) -> Result<(HeightConfig, Option<HeightConfig>)> {
        let mut upper = self.initial.clone();
        let mut lower = self.initial_lower.clone();
        for ev in self.events.iter().take_while(|e| e.t <= t) {
            match (&ev.delta, lower.as_mut()) {
                (Delta::Single(ch), None) => replay(&mut upper, ch)?,
                (Delta::Pair { upper: u, lower: l }, Some(low)) => {
                    replay(&mut upper, u)?;
                    replay(low, l)?;
                }
                _ => return Err(SandpileError::Parse("event delta does not match the trajectory kind".into())),
            }
        }
        Ok((upper, lower))
    }

    pub fn final_state(&self) -> Result<(HeightConfig, Option<HeightConfig>)> {
        self.state_at(f64::INFINITY)
    }

    /// Event times are strictly increasing and within the horizon.
    pub fn times_are_valid(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t < w[1].t) && self.events.iter().all(|e| e.t >= 0.0 && e.t <= self.horizon)
    }

    /// JSON lines: a header record, then one `{t, site, kind, delta}` per event.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = Header {
            initial: &self.initial,
            initial_lower: &self.initial_lower,
            horizon: self.horizon,
            events: self.events.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}
