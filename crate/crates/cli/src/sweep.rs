//! Parallel `(T, seed)` sweeps with CSV and gnuplot output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use sysid_core::io::format_float;

use crate::{CellResult, Experiment};

pub const CSV_NAME: &str = "sweep.csv";
pub const PLOT_NAME: &str = "sweep.gp";

pub const HEADER: [&str; 9] = [
    "T",
    "seed",
    "d_hat",
    "k",
    "hankel_err",
    "hinf_err",
    "param_err",
    "runtime_ms",
    "error",
];

/// One cell of a sweep, or a failure recorded in its place.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: usize,
    pub seed_index: u64,
    pub outcome: std::result::Result<CellResult, String>,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        let mut rec = vec![self.t.to_string(), self.seed_index.to_string()];
        match &self.outcome {
            Ok(c) => rec.extend([
                c.d_hat.to_string(),
                c.k.to_string(),
                opt(c.hankel_err),
                opt(c.hinf_err),
                opt(c.param_err),
                c.runtime_ms.to_string(),
                String::new(),
            ]),
            Err(e) => {
                rec.extend(std::iter::repeat(String::new()).take(6));
                rec.push(e.clone());
            }
        }
        rec
    }
}

/// Median ignoring NaN, if anything is left.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn median_record(t: usize, rows: &[&SweepRow]) -> Vec<String> {
    let ok: Vec<&CellResult> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let col = |f: &dyn Fn(&CellResult) -> Option<f64>| {
        median(ok.iter().filter_map(|c| f(c)))
            .map(format_float)
            .unwrap_or_default()
    };
    let failed = rows.len() - ok.len();
    vec![
        t.to_string(),
        "median".into(),
        col(&|c| Some(c.d_hat as f64)),
        col(&|c| Some(c.k as f64)),
        col(&|c| c.hankel_err),
        col(&|c| c.hinf_err),
        col(&|c| c.param_err),
        col(&|c| Some(c.runtime_ms as f64)),
        if failed > 0 {
            format!("{failed} of {} cells failed", rows.len())
        } else {
            String::new()
        },
    ]
}

/// Runs every cell on a pool of `workers` threads (all cores when `None`).
/// Rows come back in config order whatever the scheduling.
pub fn run_cells(exp: &Experiment, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    let cells: Vec<(usize, u64)> = exp
        .config
        .t_values
        .iter()
        .flat_map(|&t| exp.config.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .context("starting the worker pool")?;
    info!("running {} cells", cells.len());
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(t, s)| {
                let outcome = exp.run_cell(t, s).map_err(|e| {
                    warn!("cell T={t} seed={s} failed: {e:#}");
                    format!("{e:#}")
                });
                SweepRow {
                    t,
                    seed_index: s,
                    outcome,
                }
            })
            .collect()
    });
    Ok(rows)
}

/// Writes the cell rows followed by one median row per `T`.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    let mut ts: Vec<usize> = rows.iter().map(|r| r.t).collect();
    ts.dedup();
    for t in ts {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.t == t).collect();
        w.write_record(median_record(t, &group))?;
    }
    w.flush()?;
    Ok(())
}

/// Gnuplot script plotting the median `d̂`, `k` and errors against `T`.
pub fn plot_script(csv_name: &str) -> String {
    let sel = |col: usize| format!("(strcol(2) eq \"median\" ? column({col}) : 1/0)");
    format!(
        "set datafile separator ','\n\
         set logscale x\n\
         set xlabel 'T'\n\
         set terminal pngcairo size 1500,450\n\
         set output 'sweep.png'\n\
         set multiplot layout 1,3\n\
         set title 'window'\n\
         plot '{csv_name}' using 1:{d} with linespoints title 'median d_hat'\n\
         set title 'order'\n\
         plot '{csv_name}' using 1:{k} with linespoints title 'median k'\n\
         set title 'error'\n\
         set logscale y\n\
         plot '{csv_name}' using 1:{h} with linespoints title 'hankel', \\\n     \
         '{csv_name}' using 1:{i} with linespoints title 'hinf', \\\n     \
         '{csv_name}' using 1:{p} with linespoints title 'param'\n\
         unset multiplot\n",
        d = sel(3),
        k = sel(4),
        h = sel(5),
        i = sel(6),
        p = sel(7),
    )
}

/// Runs the sweep and writes the CSV and plot script into `dir`.
pub fn run_sweep(exp: &Experiment, dir: &Path, workers: Option<usize>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let rows = run_cells(exp, workers)?;
    let csv_path = dir.join(CSV_NAME);
    let file = std::fs::File::create(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(&rows, file)?;
    std::fs::write(dir.join(PLOT_NAME), plot_script(CSV_NAME))?;
    Ok(csv_path)
}
