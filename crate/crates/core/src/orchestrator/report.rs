use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{EpisodeRecord, RunSummary};
use super::{score, OrchestratorError, RunConfig};
use crate::gridworld::Achievement;

/// Score over the training episodes that ended inside one step window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub index: usize,
    pub start_step: u64,
    pub end_step: u64,
    pub episodes: usize,
    pub score: Option<f64>,
    /// Percent of the window's episodes unlocking each achievement.
    pub rates: BTreeMap<String, f64>,
}

fn rates(episodes: &[&EpisodeRecord], achievements: &[Achievement]) -> Vec<f64> {
    let sets: Vec<_> = episodes.iter().map(|e| e.unlocked()).collect();
    achievements
        .iter()
        .map(|&a| 100.0 * sets.iter().filter(|s| s.contains(a)).count() as f64 / sets.len() as f64)
        .collect()
}

/// Score of a batch of episodes, or `None` if there is nothing to score.
pub(crate) fn episode_score(episodes: &[EpisodeRecord], achievements: &[Achievement]) -> Option<f64> {
    if episodes.is_empty() {
        return None;
    }
    let refs: Vec<_> = episodes.iter().collect();
    score(&rates(&refs, achievements)).ok()
}

/// Splits `[0, total_steps)` into `windows` equal ranges and scores the
/// episodes by the window their last step falls in.
pub fn windowed_scores(
    episodes: &[EpisodeRecord],
    total_steps: u64,
    windows: usize,
    achievements: &[Achievement],
) -> Vec<WindowScore> {
    let n = windows.max(1) as u64;
    let total = total_steps.max(1);
    let mut buckets: Vec<Vec<&EpisodeRecord>> = vec![Vec::new(); n as usize];
    for e in episodes.iter().filter(|e| e.end_step >= 1 && e.end_step <= total) {
        let w = ((e.end_step - 1) as u128 * n as u128 / total as u128) as usize;
        buckets[w].push(e);
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, eps)| {
            let r = if eps.is_empty() {
                Vec::new()
            } else {
                rates(&eps, achievements)
            };
            WindowScore {
                index: i,
                start_step: (i as u128 * total as u128 / n as u128) as u64,
                end_step: ((i as u128 + 1) * total as u128 / n as u128) as u64,
                episodes: eps.len(),
                score: (!eps.is_empty()).then(|| score(&r).ok()).flatten(),
                rates: achievements
                    .iter()
                    .zip(&r)
                    .map(|(a, &v)| (a.name().to_string(), v))
                    .collect(),
            }
        })
        .collect()
}

/// Logs of one finished run directory.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub summary: RunSummary,
    pub episodes: Vec<EpisodeRecord>,
}

impl RunLog {
    pub fn label(&self) -> String {
        format!("{}/seed{}", self.config.name, self.config.seed)
    }
}

pub fn read_run(dir: &Path) -> Result<RunLog, OrchestratorError> {
    let need = |name: &str| {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(OrchestratorError::MissingLogs(p.display().to_string()))
        }
    };
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| OrchestratorError::io(p, e));
    let config_path = need("config.json")?;
    let summary_path = need("summary.json")?;
    let episodes_path = need("episodes.csv")?;
    let bad = |p: &Path, e: &dyn std::fmt::Display| OrchestratorError::MissingLogs(format!("{}: {e}", p.display()));
    let config: RunConfig = serde_json::from_str(&read(&config_path)?).map_err(|e| bad(&config_path, &e))?;
    let summary: RunSummary = serde_json::from_str(&read(&summary_path)?).map_err(|e| bad(&summary_path, &e))?;
    let mut rdr = csv::Reader::from_path(&episodes_path).map_err(|e| bad(&episodes_path, &e))?;
    let episodes = rdr
        .deserialize()
        .collect::<Result<Vec<EpisodeRecord>, _>>()
        .map_err(|e| bad(&episodes_path, &e))?;
    Ok(RunLog {
        dir: dir.to_path_buf(),
        config,
        summary,
        episodes,
    })
}

/// Paths written by [`report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub success_rates: PathBuf,
    pub unlock_times: PathBuf,
    pub windowed_scores: PathBuf,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.2}"))
}

#[derive(Serialize)]
struct RateRow<'a> {
    run: String,
    name: &'a str,
    seed: u64,
    achievement: &'a str,
    final_window_rate: Option<f64>,
    eval_rate: Option<f64>,
}

#[derive(Serialize)]
struct UnlockRow<'a> {
    run: String,
    name: &'a str,
    seed: u64,
    achievement: &'a str,
    first_unlock_step: Option<u64>,
}

#[derive(Serialize)]
struct WindowRow<'a> {
    name: &'a str,
    window: usize,
    start_step: u64,
    end_step: u64,
    runs: usize,
    median_score: Option<f64>,
    gap: Option<f64>,
}

/// Comparison tables across runs. Runs sharing a name are seeds of one
/// configuration and are summarized by their median. With a baseline name,
/// each window also gets `gap = median(name) - median(baseline)`.
pub fn report(runs: &[PathBuf], baseline: Option<&str>, out: &Path) -> Result<ReportFiles, OrchestratorError> {
    if runs.is_empty() {
        return Err(OrchestratorError::MissingLogs("no run directories given".into()));
    }
    let logs = runs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
    let mut groups: BTreeMap<&str, Vec<&RunLog>> = BTreeMap::new();
    for l in &logs {
        groups.entry(l.config.name.as_str()).or_default().push(l);
    }
    if let Some(b) = baseline {
        if !groups.contains_key(b) {
            return Err(OrchestratorError::MissingLogs(format!("no run named `{b}`")));
        }
    }
    let show_gap = baseline.is_some() && groups.len() > 1;
    std::fs::create_dir_all(out).map_err(|e| OrchestratorError::io(out, e))?;
    let files = ReportFiles {
        report: out.join("report.md"),
        success_rates: out.join("success_rates.csv"),
        unlock_times: out.join("unlock_times.csv"),
        windowed_scores: out.join("windowed_scores.csv"),
    };
    let csv_err = |p: &Path, e: csv::Error| OrchestratorError::io(p, e);

    let achievements: Vec<Achievement> = logs[0].config.env.achievements.clone();
    let mut w = csv::Writer::from_path(&files.success_rates).map_err(|e| csv_err(&files.success_rates, e))?;
    for l in &logs {
        let last = l.summary.windows.last();
        for a in &achievements {
            w.serialize(RateRow {
                run: l.label(),
                name: &l.config.name,
                seed: l.config.seed,
                achievement: a.name(),
                final_window_rate: last.and_then(|x| x.rates.get(a.name()).copied()),
                eval_rate: l.summary.evaluation.as_ref().and_then(|s| s.rate(*a)),
            })
            .map_err(|e| csv_err(&files.success_rates, e))?;
        }
    }
    w.flush().map_err(|e| OrchestratorError::io(&files.success_rates, e))?;

    let mut w = csv::Writer::from_path(&files.unlock_times).map_err(|e| csv_err(&files.unlock_times, e))?;
    for l in &logs {
        for a in &achievements {
            w.serialize(UnlockRow {
                run: l.label(),
                name: &l.config.name,
                seed: l.config.seed,
                achievement: a.name(),
                first_unlock_step: l.summary.unlock_times.get(a.name()).copied(),
            })
            .map_err(|e| csv_err(&files.unlock_times, e))?;
        }
    }
    w.flush().map_err(|e| OrchestratorError::io(&files.unlock_times, e))?;

    // Per-group median score per window.
    let n_windows = logs.iter().map(|l| l.summary.windows.len()).max().unwrap_or(0);
    let window_medians: BTreeMap<&str, Vec<Option<f64>>> = groups
        .iter()
        .map(|(name, runs)| {
            let meds = (0..n_windows)
                .map(|i| median(runs.iter().filter_map(|r| r.summary.windows.get(i)?.score).collect()))
                .collect();
            (*name, meds)
        })
        .collect();
    let gap = |name: &str, i: usize| -> Option<f64> {
        let b = baseline.filter(|_| show_gap)?;
        if b == name {
            return None;
        }
        Some(window_medians[name][i]? - window_medians[b][i]?)
    };
    let mut w = csv::Writer::from_path(&files.windowed_scores).map_err(|e| csv_err(&files.windowed_scores, e))?;
    for (name, runs) in &groups {
        for (i, &median_score) in window_medians[name].iter().enumerate() {
            let bounds = runs[0].summary.windows.get(i);
            w.serialize(WindowRow {
                name,
                window: i,
                start_step: bounds.map_or(0, |b| b.start_step),
                end_step: bounds.map_or(0, |b| b.end_step),
                runs: runs.len(),
                median_score,
                gap: gap(name, i),
            })
            .map_err(|e| csv_err(&files.windowed_scores, e))?;
        }
    }
    w.flush().map_err(|e| OrchestratorError::io(&files.windowed_scores, e))?;

    let mut md = String::from("# Run comparison\n\n## Final-window success rates (%)\n\n| achievement |");
    for name in groups.keys() {
        let _ = write!(md, " {name} |");
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(groups.len()));
    md.push('\n');
    for a in &achievements {
        let _ = write!(md, "| {} |", a.name());
        for runs in groups.values() {
            let v = median(
                runs.iter()
                    .filter_map(|r| r.summary.windows.last()?.rates.get(a.name()).copied())
                    .collect(),
            );
            let _ = write!(md, " {} |", fmt_opt(v));
        }
        md.push('\n');
    }
    md.push_str("\n## First unlock step (median over seeds)\n\n| achievement |");
    for name in groups.keys() {
        let _ = write!(md, " {name} |");
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(groups.len()));
    md.push('\n');
    for a in &achievements {
        let _ = write!(md, "| {} |", a.name());
        for runs in groups.values() {
            let v = median_unlock(runs, *a);
            let _ = write!(md, " {} |", v.map_or_else(|| "never".into(), |s| s.to_string()));
        }
        md.push('\n');
    }
    md.push_str("\n## Windowed score (median over seeds)\n\n| run |");
    for i in 0..n_windows {
        let b = logs[0].summary.windows.get(i);
        let _ = write!(md, " {}-{} |", b.map_or(0, |b| b.start_step), b.map_or(0, |b| b.end_step));
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(n_windows));
    md.push('\n');
    for (name, meds) in &window_medians {
        let _ = write!(md, "| {name} |");
        for m in meds {
            let _ = write!(md, " {} |", fmt_opt(*m));
        }
        md.push('\n');
    }
    if show_gap {
        for name in groups.keys().filter(|n| Some(**n) != baseline) {
            let _ = write!(md, "| gap {name} - {} |", baseline.unwrap_or_default());
            for i in 0..n_windows {
                let _ = write!(md, " {} |", gap(name, i).map_or_else(|| "-".into(), |g| format!("{g:+.2}")));
            }
            md.push('\n');
        }
    }
    std::fs::write(&files.report, md).map_err(|e| OrchestratorError::io(&files.report, e))?;
    Ok(files)
}

/// Median first-unlock step over seeds; `None` if locked in at least half of them.
pub(crate) fn median_unlock(runs: &[&RunLog], a: Achievement) -> Option<u64> {
    let mut steps: Vec<u64> = runs
        .iter()
        .map(|r| r.summary.unlock_times.get(a.name()).copied().unwrap_or(u64::MAX))
        .collect();
    steps.sort_unstable();
    let m = steps[(steps.len() - 1) / 2];
    (m != u64::MAX).then_some(m)
}
