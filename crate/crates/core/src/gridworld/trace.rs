//! Line-delimited episode traces for replay checks.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::EnvConfig;
use super::types::{Achievement, Action};
use super::world::GridWorld;
use super::GridError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u32,
    pub action: Action,
    pub reward: f64,
    pub unlocked: Vec<Achievement>,
}

/// Runs `actions` from `reset(seed)` and records each step. Stops at episode end.
pub fn record_episode(
    config: &EnvConfig,
    seed: u64,
    actions: &[Action],
) -> Result<Vec<TraceRecord>, GridError> {
    let mut env = GridWorld::new(config.clone(), seed)?;
    let mut out = Vec::with_capacity(actions.len());
    for &action in actions {
        let t = env.step(action)?;
        out.push(TraceRecord {
            tick: env.tick(),
            action,
            reward: t.reward,
            unlocked: t.unlocked,
        });
        if t.done {
            break;
        }
    }
    Ok(out)
}

pub fn write_trace<W: Write>(mut w: W, records: &[TraceRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> std::io::Result<Vec<TraceRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            serde_json::from_str(&l?)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_replay() {
        let cfg = EnvConfig::default();
        let actions: Vec<Action> = (0..300).map(|i| Action::ALL[(i * 7 + i / 3) % 15]).collect();
        let a = record_episode(&cfg, 11, &actions).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &a).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        assert_eq!(record_episode(&cfg, 11, &actions).unwrap(), back);
    }
}
