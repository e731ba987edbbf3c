//! Experiment execution: algorithm arms, run manifests, output files, and
//! cross-run comparison.

mod compare;
mod curve;

pub use compare::{compare_runs, steps_to_threshold, ComparisonRow, ComparisonTable};
pub use curve::{aggregate_curves, read_curve, AggregatePoint, CurvePoint, CurveWriter, CURVE_HEADER};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ErlConfig;
use crate::erl::{ArmToggles, ErlState};
use crate::error::{Error, Result};
use crate::evolution::SelectionMode;
use crate::neural::Parameters;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CURVE_FILE: &str = "curve.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const SELECTION_RATES_FILE: &str = "selection_rates.txt";

/// The four runnable algorithm arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// Full hybrid loop.
    Erl,
    /// Gradient learner only: no population, no synchronization.
    Ddpg,
    /// Population only: no rollouts, no gradient updates, no sync.
    Ea,
    /// Hybrid loop with fitness-based selection ablated.
    ErlNs,
}

impl Arm {
    pub fn toggles(self) -> ArmToggles {
        match self {
            Arm::Erl | Arm::ErlNs => ArmToggles::full(),
            Arm::Ddpg => ArmToggles::learner_only(),
            Arm::Ea => ArmToggles::population_only(),
        }
    }

    /// Arms that synchronize emit a selection-rate summary.
    pub fn writes_selection_rates(self) -> bool {
        self.toggles().sync
    }

    pub const ALL: [Arm; 4] = [Arm::Erl, Arm::Ddpg, Arm::Ea, Arm::ErlNs];
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Arm::Erl => "erl",
            Arm::Ddpg => "ddpg",
            Arm::Ea => "ea",
            Arm::ErlNs => "erl-ns",
        };
        f.write_str(s)
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erl" => Ok(Arm::Erl),
            "ddpg" => Ok(Arm::Ddpg),
            "ea" => Ok(Arm::Ea),
            "erl-ns" => Ok(Arm::ErlNs),
            other => Err(Error::input(format!(
                "unknown algorithm arm `{other}` (expected erl, ddpg, ea or erl-ns)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed(String),
}

/// Everything needed to reproduce a run bit for bit, plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub arm: Arm,
    pub seed: u64,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub status: RunStatus,
    pub config: ErlConfig,
}

impl RunManifest {
    /// Builds a manifest; the seed is stamped into the config snapshot, and
    /// the `erl-ns` arm forces the ablated selection mode.
    pub fn new(mut config: ErlConfig, arm: Arm, seed: u64) -> Self {
        config.seed = seed;
        if arm == Arm::ErlNs {
            config.selection_mode = SelectionMode::RandomNs;
        }
        Self {
            arm,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: 0,
            finished_unix: None,
            status: RunStatus::Running,
            config,
        }
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Parse(format!("manifest serialize: {e}")))?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }
}

/// Final network parameters written at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub champion: Option<Parameters>,
    pub rl_actor: Parameters,
}

impl Snapshot {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(SNAPSHOT_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("snapshot: {e}")))
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Executes one run into `out_dir`: trains the manifest's arm until the
/// config's step budget, streaming curve rows as generations finish, then
/// writes the parameter snapshot and (for synchronizing arms) the
/// selection-rate summary. On failure the error is recorded in the manifest
/// and partial outputs are kept.
pub fn run_experiment(mut manifest: RunManifest, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = out_dir.as_ref().to_path_buf();
    std::fs::create_dir_all(&dir)?;
    manifest.started_unix = unix_now();
    manifest.status = RunStatus::Running;
    manifest.save(&dir)?;

    match run_experiment_inner(&manifest, &dir) {
        Ok(()) => {
            manifest.finished_unix = Some(unix_now());
            manifest.status = RunStatus::Complete;
            manifest.save(&dir)?;
            Ok(dir)
        }
        Err(e) => {
            manifest.finished_unix = Some(unix_now());
            manifest.status = RunStatus::Failed(e.to_string());
            manifest.save(&dir)?;
            Err(e)
        }
    }
}

fn run_experiment_inner(manifest: &RunManifest, dir: &Path) -> Result<()> {
    let mut state = ErlState::new(manifest.config.clone(), manifest.arm.toggles())?;
    let mut curve = CurveWriter::create(&dir.join(CURVE_FILE))?;
    while state.cumulative_steps() < manifest.config.step_budget {
        let report = state.run_generation()?;
        curve.write(&CurvePoint::from(&report))?;
    }
    curve.finish()?;

    let snapshot = Snapshot {
        champion: state.last_champion().cloned(),
        rl_actor: state.learner().actor().clone(),
    };
    let text = serde_json::to_string(&snapshot)
        .map_err(|e| Error::Parse(format!("snapshot serialize: {e}")))?;
    std::fs::write(dir.join(SNAPSHOT_FILE), text)?;

    if manifest.arm.writes_selection_rates() {
        let counts = state.sync_counts();
        let (elite, selected, discarded) = counts.percentages();
        let body = format!(
            "classifications = {}\nelite_count = {}\nselected_count = {}\ndiscarded_count = {}\nelite = {}\nselected = {}\ndiscarded = {}\n",
            counts.total(),
            counts.elite,
            counts.selected,
            counts.discarded,
            elite,
            selected,
            discarded
        );
        std::fs::write(dir.join(SELECTION_RATES_FILE), body)?;
    }
    Ok(())
}

/// Loads a run directory's manifest and curve.
pub fn read_run(dir: &Path) -> Result<(RunManifest, Vec<CurvePoint>)> {
    let manifest = RunManifest::load(dir)?;
    let curve = read_curve(&dir.join(CURVE_FILE))?;
    Ok((manifest, curve))
}

/// Parsed selection-rate summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRates {
    pub classifications: u64,
    pub elite: f64,
    pub selected: f64,
    pub discarded: f64,
}

pub fn read_selection_rates(dir: &Path) -> Result<SelectionRates> {
    let text = std::fs::read_to_string(dir.join(SELECTION_RATES_FILE))?;
    let mut rates = SelectionRates {
        classifications: 0,
        elite: f64::NAN,
        selected: f64::NAN,
        discarded: f64::NAN,
    };
    fn parse_field<T: FromStr>(value: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        value
            .parse()
            .map_err(|e| Error::Parse(format!("selection rates: {e}")))
    }
    for line in text.lines() {
        let Some((key, value)) = line.split_once(" = ") else {
            continue;
        };
        match key {
            "classifications" => rates.classifications = parse_field(value)?,
            "elite" => rates.elite = parse_field(value)?,
            "selected" => rates.selected = parse_field(value)?,
            "discarded" => rates.discarded = parse_field(value)?,
            _ => {}
        }
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ErlConfig {
        let mut config = ErlConfig::default();
        config.k = 3;
        config.psi = 0.34;
        config.omega = 1;
        config.batch_size = 8;
        config.update_ratio = 0.005;
        config.network.actor_hidden = vec![6];
        config.network.critic_sub_units = 3;
        config.network.critic_tail = vec![6];
        config.step_budget = 2_000;
        config
    }

    #[test]
    fn arm_round_trip_names() {
        for arm in Arm::ALL {
            assert_eq!(arm.to_string().parse::<Arm>().unwrap(), arm);
        }
        assert!("ppo".parse::<Arm>().is_err());
    }

    #[test]
    fn identical_manifests_give_identical_curves() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(tiny_config(), Arm::Erl, 11);
        let a = run_experiment(manifest.clone(), dir.path().join("a")).unwrap();
        let b = run_experiment(manifest, dir.path().join("b")).unwrap();
        let bytes_a = std::fs::read(a.join(CURVE_FILE)).unwrap();
        let bytes_b = std::fs::read(b.join(CURVE_FILE)).unwrap();
        assert!(!bytes_a.is_empty());
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn ea_arm_omits_selection_rates() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(tiny_config(), Arm::Ea, 1);
        let out = run_experiment(manifest, dir.path().join("ea")).unwrap();
        assert!(out.join(CURVE_FILE).exists());
        assert!(!out.join(SELECTION_RATES_FILE).exists());
        let (m, curve) = read_run(&out).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert!(!curve.is_empty());
        // Output completeness: strictly increasing steps, one point per
        // generation.
        for (i, pair) in curve.windows(2).enumerate() {
            assert!(pair[1].cumulative_steps > pair[0].cumulative_steps);
            assert_eq!(pair[1].generation, curve[i].generation + 1);
        }
    }

    #[test]
    fn erl_arm_writes_valid_selection_rates() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(tiny_config(), Arm::Erl, 2);
        let out = run_experiment(manifest, dir.path().join("erl")).unwrap();
        let rates = read_selection_rates(&out).unwrap();
        assert!(rates.classifications > 0);
        assert!((rates.elite + rates.selected + rates.discarded - 100.0).abs() < 1e-9);
        let snapshot = Snapshot::load(&out).unwrap();
        assert!(snapshot.champion.is_some());
    }

    #[test]
    fn compare_identical_runs_shows_zero_spread() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(tiny_config(), Arm::Ea, 5);
        let a = run_experiment(manifest.clone(), dir.path().join("a")).unwrap();
        let b = run_experiment(manifest, dir.path().join("b")).unwrap();
        let table = compare_runs(&[a, b], -200.0).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].runs, 2);
        assert_eq!(table.rows[0].final_score_std, 0.0);
    }

    #[test]
    fn compare_rejects_mixed_envs() {
        let dir = tempfile::tempdir().unwrap();
        let dense = RunManifest::new(tiny_config(), Arm::Ea, 1);
        let mut sparse_config = tiny_config();
        sparse_config.env = "sparse-pendulum".into();
        let sparse = RunManifest::new(sparse_config, Arm::Ea, 1);
        let a = run_experiment(dense, dir.path().join("a")).unwrap();
        let b = run_experiment(sparse, dir.path().join("b")).unwrap();
        assert!(compare_runs(&[a, b], -200.0).is_err());
    }

    #[test]
    fn compare_table_row_count_matches_arms() {
        let dir = tempfile::tempdir().unwrap();
        let mut dirs = Vec::new();
        for (i, arm) in [Arm::Ea, Arm::Erl].iter().enumerate() {
            let manifest = RunManifest::new(tiny_config(), *arm, i as u64);
            dirs.push(run_experiment(manifest, dir.path().join(format!("r{i}"))).unwrap());
        }
        let table = compare_runs(&dirs, -200.0).unwrap();
        assert_eq!(table.rows.len(), 2);
        let rendered = table.to_string();
        assert!(rendered.contains("unreached") || rendered.contains("steps"));
    }
}
