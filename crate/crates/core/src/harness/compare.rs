//! Cross-run comparison: per-arm steps-to-threshold and final-score
//! statistics over seed groups.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::curve::CurvePoint;
use crate::harness::{read_run, Arm};

/// First checkpoint at which a curve's champion score reaches `threshold`.
pub fn steps_to_threshold(curve: &[CurvePoint], threshold: f64) -> Option<u64> {
    curve
        .iter()
        .find(|p| p.champion_score >= threshold)
        .map(|p| p.cumulative_steps)
}

/// Lower median with unreached runs sorting above every reached one.
fn median_steps(mut xs: Vec<Option<u64>>) -> Option<u64> {
    xs.sort_by_key(|x| x.unwrap_or(u64::MAX));
    xs[(xs.len() - 1) / 2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub arm: Arm,
    pub runs: usize,
    /// Median cumulative steps to reach the threshold; `None` when the
    /// median run never reaches it.
    pub median_steps_to_threshold: Option<u64>,
    pub final_score_mean: f64,
    pub final_score_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub env: String,
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, arm: Arm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.arm == arm)
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "env: {} | solve threshold: {}",
            self.env, self.threshold
        )?;
        writeln!(
            f,
            "{:<8} {:>5} {:>22} {:>14} {:>12}",
            "arm", "runs", "steps-to-threshold", "final mean", "final std"
        )?;
        for r in &self.rows {
            let steps = match r.median_steps_to_threshold {
                Some(s) => s.to_string(),
                None => "unreached".to_string(),
            };
            writeln!(
                f,
                "{:<8} {:>5} {:>22} {:>14.2} {:>12.2}",
                r.arm.to_string(),
                r.runs,
                steps,
                r.final_score_mean,
                r.final_score_std
            )?;
        }
        Ok(())
    }
}

/// Reads the given run directories, groups them by arm, and summarizes
/// steps-to-threshold (median across seeds) and final champion scores.
/// All runs must share one environment.
pub fn compare_runs(run_dirs: &[impl AsRef<Path>], threshold: f64) -> Result<ComparisonTable> {
    if run_dirs.is_empty() {
        return Err(Error::input("compare_runs: no run directories"));
    }
    let mut env: Option<String> = None;
    let mut by_arm: BTreeMap<String, (Arm, Vec<Vec<CurvePoint>>)> = BTreeMap::new();
    for dir in run_dirs {
        let (manifest, curve) = read_run(dir.as_ref())?;
        match &env {
            None => env = Some(manifest.config.env.clone()),
            Some(e) if *e != manifest.config.env => {
                return Err(Error::input(format!(
                    "compare_runs: mixed environments `{e}` and `{}`",
                    manifest.config.env
                )));
            }
            _ => {}
        }
        by_arm
            .entry(manifest.arm.to_string())
            .or_insert_with(|| (manifest.arm, Vec::new()))
            .1
            .push(curve);
    }

    let rows = by_arm
        .into_values()
        .map(|(arm, curves)| {
            let reach: Vec<Option<u64>> = curves
                .iter()
                .map(|c| steps_to_threshold(c, threshold))
                .collect();
            let finals: Vec<f64> = curves
                .iter()
                .map(|c| c.last().map(|p| p.champion_score).unwrap_or(f64::NAN))
                .collect();
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let var = finals.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            ComparisonRow {
                arm,
                runs: curves.len(),
                median_steps_to_threshold: median_steps(reach),
                final_score_mean: mean,
                final_score_std: var.sqrt(),
            }
        })
        .collect();

    Ok(ComparisonTable {
        env: env.expect("at least one run"),
        threshold,
        rows,
    })
}
