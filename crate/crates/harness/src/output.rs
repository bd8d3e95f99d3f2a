//! Per-episode CSV files and their seed aggregates.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::format::{num, opt};
use crate::runner::{mean_std, Row};

pub const CSV_HEADER: [&str; 8] = [
    "seed",
    "episode",
    "v_hat",
    "eval_return_mean",
    "eval_return_std",
    "robust_value",
    "instant_regret",
    "cumulative_regret",
];

pub const AGGREGATE_HEADER: [&str; 8] = [
    "episode",
    "seeds",
    "eval_return_mean",
    "eval_return_std",
    "v_hat_mean",
    "robust_value_mean",
    "cumulative_regret_mean",
    "cumulative_regret_std",
];

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::parse(path, e.to_string())
}

/// Writes `rows` (already in seed, episode order) under the fixed header.
pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.episode.to_string(),
            num(r.v_hat),
            num(r.eval_return_mean),
            num(r.eval_return_std),
            opt(r.robust_value),
            opt(r.instant_regret),
            opt(r.cumulative_regret),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a file written by [`write_rows`]; the header must match exactly.
pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::parse(
            path,
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |field: &str| HarnessError::parse(path, format!("row {}: bad {field}", line + 2));
        let float = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(CSV_HEADER[i])) };
        let optional = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        rows.push(Row {
            seed: rec[0].parse().map_err(|_| bad("seed"))?,
            episode: rec[1].parse().map_err(|_| bad("episode"))?,
            v_hat: float(2)?,
            eval_return_mean: float(3)?,
            eval_return_std: float(4)?,
            robust_value: optional(5)?,
            instant_regret: optional(6)?,
            cumulative_regret: optional(7)?,
        });
    }
    Ok(rows)
}

/// Across-seed statistics at one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    pub seeds: usize,
    pub eval_return_mean: f64,
    /// Standard deviation over seeds of the per-seed mean return.
    pub eval_return_std: f64,
    pub v_hat_mean: f64,
    pub robust_value_mean: Option<f64>,
    pub cumulative_regret_mean: Option<f64>,
    pub cumulative_regret_std: Option<f64>,
}

pub fn aggregate(rows: &[Row]) -> Vec<AggregateRow> {
    let mut by_episode: BTreeMap<usize, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        by_episode.entry(r.episode).or_default().push(r);
    }
    by_episode
        .into_iter()
        .map(|(episode, rs)| {
            let col = |f: &dyn Fn(&Row) -> f64| -> Vec<f64> { rs.iter().map(|r| f(r)).collect() };
            let optional = |f: &dyn Fn(&Row) -> Option<f64>| -> Option<Vec<f64>> { rs.iter().map(|r| f(r)).collect() };
            let (eval_mean, eval_std) = mean_std(&col(&|r| r.eval_return_mean));
            let regret = optional(&|r| r.cumulative_regret).map(|v| mean_std(&v));
            AggregateRow {
                episode,
                seeds: rs.len(),
                eval_return_mean: eval_mean,
                eval_return_std: eval_std,
                v_hat_mean: mean_std(&col(&|r| r.v_hat)).0,
                robust_value_mean: optional(&|r| r.robust_value).map(|v| mean_std(&v).0),
                cumulative_regret_mean: regret.map(|r| r.0),
                cumulative_regret_std: regret.map(|r| r.1),
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.seeds.to_string(),
            num(r.eval_return_mean),
            num(r.eval_return_std),
            num(r.v_hat_mean),
            opt(r.robust_value_mean),
            opt(r.cumulative_regret_mean),
            opt(r.cumulative_regret_std),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a file written by [`write_aggregate`]. An empty table is an error.
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(AGGREGATE_HEADER) {
        return Err(HarnessError::parse(
            path,
            format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |field: &str| HarnessError::parse(path, format!("row {}: bad {field}", line + 2));
        let float = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(AGGREGATE_HEADER[i])) };
        let optional = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        rows.push(AggregateRow {
            episode: rec[0].parse().map_err(|_| bad("episode"))?,
            seeds: rec[1].parse().map_err(|_| bad("seeds"))?,
            eval_return_mean: float(2)?,
            eval_return_std: float(3)?,
            v_hat_mean: float(4)?,
            robust_value_mean: optional(5)?,
            cumulative_regret_mean: optional(6)?,
            cumulative_regret_std: optional(7)?,
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::parse(path, "no data rows"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, episode: usize, ret: f64, regret: Option<f64>) -> Row {
        Row {
            seed,
            episode,
            v_hat: 1.0 / 3.0,
            eval_return_mean: ret,
            eval_return_std: 0.5,
            robust_value: regret.map(|r| 2.0 - r),
            instant_regret: regret,
            cumulative_regret: regret,
        }
    }

    #[test]
    fn round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![row(0, 1, 1.5, Some(0.25)), row(0, 10, 2.0, None)];
        write_rows(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "seed,episode,v_hat,eval_return_mean,eval_return_std,robust_value,instant_regret,cumulative_regret\n"
        ));
        assert!(text.contains("0,10,0.333333333333333,2,0.5,,,\n"));
        let back = read_rows(&path).unwrap();
        assert_eq!(back[1].robust_value, None);
        assert_eq!(back[0].cumulative_regret, Some(0.25));

        std::fs::write(&path, "seed,episode\n0,1\n").unwrap();
        assert!(read_rows(&path).is_err());
    }

    #[test]
    fn aggregates_over_seeds() {
        let rows = vec![row(0, 1, 1.0, Some(1.0)), row(1, 1, 3.0, Some(3.0)), row(0, 2, 2.0, None)];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].seeds, 2);
        assert_eq!(agg[0].eval_return_mean, 2.0);
        assert!((agg[0].eval_return_std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(agg[0].cumulative_regret_mean, Some(2.0));
        assert_eq!(agg[1].cumulative_regret_mean, None);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_aggregate(&path, &agg).unwrap();
        let back = read_aggregate(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].eval_return_std - agg[0].eval_return_std).abs() < 1e-14);
        assert_eq!(back[1].cumulative_regret_mean, None);
        assert!((back[1].v_hat_mean - agg[1].v_hat_mean).abs() < 1e-14);
        write_aggregate(&path, &[]).unwrap();
        assert!(read_aggregate(&path).is_err());
    }
}
