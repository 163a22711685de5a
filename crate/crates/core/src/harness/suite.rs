use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AllocatorKind, ControlConfig};
use crate::harness::episode::{run_episode, EpisodeResult};
use crate::harness::scenario::Scenario;
use crate::harness::stats::{iqr, mean, median};
use crate::harness::HarnessError;

fn default_episodes() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Scenario path, relative to the manifest.
    pub scenario: PathBuf,
    /// Defaults to the scenario's own allocator.
    #[serde(default)]
    pub allocators: Vec<AllocatorKind>,
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    /// First seed; episode `i` uses `seed + i` for every allocator.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Option<ControlConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(default)]
    pub trace: bool,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|source| HarnessError::Json { path: path.display().to_string(), source })?;
        if manifest.entries.is_empty() {
            return Err(HarnessError::Config("manifest has no entries".into()));
        }
        if manifest.entries.iter().any(|e| e.episodes == 0) {
            return Err(HarnessError::Config("episodes must be at least 1".into()));
        }
        Ok(manifest)
    }
}

/// Aggregate over one (scenario, allocator) group. AS and TS statistics are
/// taken over successful episodes only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub allocator: AllocatorKind,
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
    pub mean_as: Option<f64>,
    pub median_as: Option<f64>,
    pub mean_ts: Option<f64>,
    pub median_ts: Option<f64>,
    pub iqr_ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteSummary {
    pub results: Vec<EpisodeResult>,
    pub rows: Vec<SummaryRow>,
}

/// Group results by (scenario, allocator), in order of first appearance.
pub fn summarize(results: &[EpisodeResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, AllocatorKind)> = Vec::new();
    for r in results {
        let key = (r.scenario.clone(), r.allocator);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scenario, allocator)| {
            let group: Vec<&EpisodeResult> =
                results.iter().filter(|r| r.scenario == scenario && r.allocator == allocator).collect();
            let wins: Vec<&&EpisodeResult> = group.iter().filter(|r| r.success).collect();
            let as_values: Vec<f64> = wins.iter().filter_map(|r| r.agent_steps).map(|v| v as f64).collect();
            let ts_values: Vec<f64> = wins.iter().map(|r| r.total_steps as f64).collect();
            SummaryRow {
                scenario,
                allocator,
                episodes: group.len(),
                successes: wins.len(),
                sr: wins.len() as f64 / group.len() as f64,
                mean_as: mean(&as_values),
                median_as: median(&as_values),
                mean_ts: mean(&ts_values),
                median_ts: median(&ts_values),
                iqr_ts: iqr(&ts_values),
            }
        })
        .collect()
}

/// Run `episodes` paired seeds starting at `first_seed`. Traces go to
/// `trace_dir/<scenario>_<allocator>_<seed>.jsonl` when a directory is given.
pub fn run_batch(
    scenario: &Scenario,
    allocator: AllocatorKind,
    first_seed: u64,
    episodes: u64,
    trace_dir: Option<&Path>,
) -> Result<Vec<EpisodeResult>, HarnessError> {
    (first_seed..first_seed + episodes)
        .map(|seed| match trace_dir {
            None => run_episode(scenario, allocator, seed, None),
            Some(dir) => {
                let path = dir.join(format!("{}_{}_{}.jsonl", scenario.spec.name, allocator, seed));
                let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
                let mut out = BufWriter::new(file);
                let result = run_episode(scenario, allocator, seed, Some(&mut out))?;
                out.flush().map_err(|e| HarnessError::io(&path, e))?;
                Ok(result)
            }
        })
        .collect()
}

/// Write `results.jsonl` and `summary.csv` into `out`.
pub fn write_outputs(out: &Path, results: Vec<EpisodeResult>) -> Result<SuiteSummary, HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let jsonl = out.join("results.jsonl");
    let mut w = BufWriter::new(File::create(&jsonl).map_err(|e| HarnessError::io(&jsonl, e))?);
    for r in &results {
        let line = serde_json::to_string(r).expect("results serialize");
        writeln!(w, "{line}").map_err(|e| HarnessError::io(&jsonl, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&jsonl, e))?;

    let rows = summarize(&results);
    let csv_path = out.join("summary.csv");
    let mut csv = csv::Writer::from_path(&csv_path)
        .map_err(|e| HarnessError::io(&csv_path, std::io::Error::other(e)))?;
    for row in &rows {
        csv.serialize(row).map_err(|e| HarnessError::io(&csv_path, std::io::Error::other(e)))?;
    }
    csv.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
    Ok(SuiteSummary { results, rows })
}

fn trace_dir(out: &Path, enabled: bool) -> Result<Option<PathBuf>, HarnessError> {
    if !enabled {
        return Ok(None);
    }
    let dir = out.join("trace");
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(Some(dir))
}

/// Run every manifest entry and write the combined outputs to `out`.
pub fn run_suite(manifest: &Manifest, base_dir: &Path, out: &Path) -> Result<SuiteSummary, HarnessError> {
    let mut scenarios = Vec::new();
    for entry in &manifest.entries {
        let mut scenario = Scenario::load(base_dir.join(&entry.scenario))?;
        if let Some(config) = &entry.config {
            scenario = scenario.with_config(config.clone())?;
        }
        scenarios.push(scenario);
    }
    let traces = trace_dir(out, manifest.trace)?;
    let mut results = Vec::new();
    for (entry, scenario) in manifest.entries.iter().zip(&scenarios) {
        let allocators = if entry.allocators.is_empty() {
            vec![scenario.spec.allocator]
        } else {
            entry.allocators.clone()
        };
        let seed = entry.seed.unwrap_or(scenario.spec.seed);
        for allocator in allocators {
            results.extend(run_batch(scenario, allocator, seed, entry.episodes, traces.as_deref())?);
        }
    }
    write_outputs(out, results)
}

/// `drama run`: one scenario, one allocator, `episodes` seeds.
pub fn run_single(
    scenario: &Scenario,
    allocator: AllocatorKind,
    seed: u64,
    episodes: u64,
    out: &Path,
    trace: bool,
) -> Result<SuiteSummary, HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let traces = trace_dir(out, trace)?;
    let results = run_batch(scenario, allocator, seed, episodes, traces.as_deref())?;
    write_outputs(out, results)
}
