//! CSV and JSON-lines formats for level statistics, per-trial records,
//! operator trajectories and merged plot tables.

use std::collections::BTreeSet;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FrogError, Result};
use crate::estimate::LevelStats;
use crate::sfm::IterPoint;
use crate::tree_sim::LevelPoint;

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub model: String,
    pub d: u32,
    pub p: String,
    pub ell: u32,
    pub trials: u64,
    pub mean_A: f64,
    pub stderr_A: f64,
    pub s_ell: f64,
    pub censored_count: u64,
}

impl LevelRow {
    pub fn new(model: &str, d: u32, p: &str, s: &LevelStats) -> LevelRow {
        LevelRow {
            model: model.into(),
            d,
            p: p.into(),
            ell: s.ell,
            trials: s.trials,
            mean_A: s.mean_A,
            stderr_A: s.stderr_A,
            s_ell: s.s_ell,
            censored_count: s.censored,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub d: u32,
    pub p: String,
    pub ell: u32,
    pub trials: u64,
    pub mean_A: f64,
    pub stderr: f64,
    pub s_ell: f64,
}

/// One trial at one fence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub model: String,
    pub d: u32,
    pub p: String,
    pub stream_id: u64,
    pub ell: u32,
    pub frozen: u64,
    pub root_visits: u64,
    pub moves: u64,
    pub censored: bool,
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().map(|x| x.map_err(FrogError::from)).collect()
}

pub fn write_level_csv<W: Write>(w: W, rows: &[LevelRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_level_csv<R: Read>(r: R) -> Result<Vec<LevelRow>> {
    read_rows(r)
}

pub fn write_figure_csv<W: Write>(w: W, rows: &[LevelRow]) -> Result<()> {
    let fig: Vec<FigureRow> = rows
        .iter()
        .map(|r| FigureRow {
            d: r.d,
            p: r.p.clone(),
            ell: r.ell,
            trials: r.trials,
            mean_A: r.mean_A,
            stderr: r.stderr_A,
            s_ell: r.s_ell,
        })
        .collect();
    write_rows(w, &fig)
}

pub fn write_trajectory_csv<W: Write>(w: W, points: &[IterPoint]) -> Result<()> {
    write_rows(w, points)
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<IterPoint>> {
    read_rows(r)
}

/// Flattens per-trial fence sequences into records, stream-major.
pub fn trial_records(model: &str, d: u32, p: &str, runs: &[Vec<LevelPoint>]) -> Vec<TrialRecord> {
    runs.iter()
        .enumerate()
        .flat_map(|(i, run)| {
            run.iter().map(move |pt| TrialRecord {
                model: model.into(),
                d,
                p: p.into(),
                stream_id: i as u64,
                ell: pt.ell,
                frozen: pt.frozen,
                root_visits: pt.root_visits,
                moves: pt.moves,
                censored: pt.censored,
            })
        })
        .collect()
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub const MAX_SERIES: usize = 3;

/// Level series side by side: one row per level, one column group
/// `(mean_A, stderr, s_ell)` per series, `None` where a series lacks the level.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub labels: Vec<String>,
    pub rows: Vec<(u32, Vec<Option<[f64; 3]>>)>,
}

/// Merges up to three level series, labelled by their `p`.
pub fn merge_series(series: &[Vec<LevelRow>]) -> Result<PlotTable> {
    if series.is_empty() || series.len() > MAX_SERIES {
        return Err(FrogError::Domain(format!("need 1 to {MAX_SERIES} series, got {}", series.len())));
    }
    let mut labels = Vec::new();
    for s in series {
        let first = s.first().ok_or_else(|| FrogError::Domain("empty series".into()))?;
        if s.iter().any(|r| r.p != first.p || r.d != first.d || r.model != first.model) {
            return Err(FrogError::Domain("a series mixes parameters".into()));
        }
        labels.push(format!("{}_d{}_p{}", first.model, first.d, first.p));
    }
    let levels: BTreeSet<u32> = series.iter().flatten().map(|r| r.ell).collect();
    let rows = levels
        .into_iter()
        .map(|ell| {
            let cells = series
                .iter()
                .map(|s| s.iter().find(|r| r.ell == ell).map(|r| [r.mean_A, r.stderr_A, r.s_ell]))
                .collect();
            (ell, cells)
        })
        .collect();
    Ok(PlotTable { labels, rows })
}

const CELL_FIELDS: [&str; 3] = ["mean_A", "stderr", "s_ell"];

pub fn write_plot_table<W: Write>(w: W, t: &PlotTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["ell".to_string()];
    for l in &t.labels {
        header.extend(CELL_FIELDS.iter().map(|f| format!("{l}:{f}")));
    }
    out.write_record(&header)?;
    for (ell, cells) in &t.rows {
        let mut rec = vec![ell.to_string()];
        for c in cells {
            match c {
                Some(v) => rec.extend(v.iter().map(|x| x.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_plot_table<R: Read>(r: R) -> Result<PlotTable> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.is_empty() || (header.len() - 1) % 3 != 0 {
        return Err(FrogError::Domain("plot table header has the wrong width".into()));
    }
    let labels: Vec<String> = (0..(header.len() - 1) / 3)
        .map(|i| header[1 + 3 * i].rsplit_once(':').map(|x| x.0).unwrap_or("").to_string())
        .collect();
    let bad = |e: std::num::ParseFloatError| FrogError::Domain(format!("bad number in plot table: {e}"));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let ell = rec[0].parse::<u32>().map_err(|e| FrogError::Domain(format!("bad level: {e}")))?;
        let mut cells = Vec::new();
        for i in 0..labels.len() {
            let f = &rec.iter().skip(1 + 3 * i).take(3).collect::<Vec<_>>();
            if f.iter().all(|x| x.is_empty()) {
                cells.push(None);
            } else {
                cells.push(Some([f[0].parse().map_err(bad)?, f[1].parse().map_err(bad)?, f[2].parse().map_err(bad)?]));
            }
        }
        rows.push((ell, cells));
    }
    Ok(PlotTable { labels, rows })
}
