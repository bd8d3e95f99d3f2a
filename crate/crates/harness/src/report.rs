//! Writes an experiment's result files.
//!
//! Layout of the output directory:
//! `<label>.seed<n>.csv` per seed, `<label>.aggregate.csv`,
//! `eval_return.svg`, `cumulative_regret.svg` (when regret is tracked),
//! `metadata.json` and `config.toml`.

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::metadata;
use crate::output::{aggregate, write_aggregate, write_rows, AggregateRow};
use crate::plot::{render, PlotMetric, Series};
use crate::runner::RunResult;

pub fn seed_csv(dir: &Path, label: &str, seed: u64) -> PathBuf {
    dir.join(format!("{label}.seed{seed}.csv"))
}

pub fn aggregate_csv(dir: &Path, label: &str) -> PathBuf {
    dir.join(format!("{label}.aggregate.csv"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Plot of one metric over several aggregates; `None` when no series has
/// data for it.
pub fn plot_metric(metric: PlotMetric, title: &str, aggregates: &[(String, Vec<AggregateRow>)]) -> Option<String> {
    let series: Vec<Series> = aggregates.iter().map(|(label, rows)| metric.series(label, rows)).collect();
    if series.iter().all(|s| s.points.is_empty()) {
        return None;
    }
    Some(render(title, "episode", metric.axis_label(), &series))
}

/// Writes every output file, then reports seed failures. Runs whose seeds
/// all failed get no CSVs. Returns the first error when every seed of every
/// run failed and [`HarnessError::PartialFailure`] when only some did.
pub fn write_results(config: &ExperimentConfig, results: &[RunResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut aggregates = Vec::new();
    for r in results {
        let label = &r.prepared.run.label;
        let mut outputs: Vec<_> = r.successes().collect();
        if outputs.is_empty() {
            continue;
        }
        outputs.sort_by_key(|o| o.seed);
        let mut all_rows = Vec::new();
        for o in outputs {
            write_rows(&seed_csv(dir, label, o.seed), &o.rows)?;
            all_rows.extend_from_slice(&o.rows);
        }
        let agg = aggregate(&all_rows);
        write_aggregate(&aggregate_csv(dir, label), &agg)?;
        aggregates.push((label.clone(), agg));
    }
    let name = &config.experiment.name;
    if let Some(svg) = plot_metric(PlotMetric::EvalReturn, name, &aggregates) {
        write_text(&dir.join("eval_return.svg"), &svg)?;
    }
    if let Some(svg) = plot_metric(PlotMetric::CumulativeRegret, name, &aggregates) {
        write_text(&dir.join("cumulative_regret.svg"), &svg)?;
    }
    let meta = metadata::build(config, results);
    let meta = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    write_text(&dir.join("metadata.json"), &meta)?;
    write_text(&dir.join("config.toml"), &config.canonical_toml())?;

    let total: usize = results.iter().map(|r| r.seeds.len()).sum();
    let failed: usize = results.iter().map(|r| r.failures().count()).sum();
    if failed == 0 {
        return Ok(());
    }
    if failed == total {
        let first = results
            .iter()
            .flat_map(|r| r.seeds.iter())
            .find_map(|(_, out)| out.as_ref().err())
            .expect("some seed failed");
        return Err(HarnessError::AllSeedsFailed {
            message: first.to_string(),
            code: first.exit_code(),
        });
    }
    Err(HarnessError::PartialFailure { failed, total })
}
