//! Experiment grids: every `(method, T, k)` cell is run for `R`
//! repetitions, each scored against one exact neighbor table per `k`.
//!
//! Repetition `r` of cell `c` builds its forest from child stream
//! `(c, r)` of the master seed, so the grid is reproducible cell by cell
//! regardless of execution order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::forest::{build_forest, NeighborList};
use crate::metrics::{time_run, EvalReport, PhaseTimes, RunMetadata};
use crate::oracle::all_true_neighbors;
use crate::primitives::Dataset;
use crate::rng::SeedStream;
use crate::stats::{two_sample_ttest, TTestResult};
use crate::strategy::{Method, StrategyConfig, DEFAULT_NOISE_SIGMAS, DEFAULT_N_TRY};
use crate::tree::{TreeConfig, DEFAULT_DEGENERATE_RETRIES, DEFAULT_LEAF_CAPACITY};

pub const DEFAULT_FOREST_SIZES: [usize; 11] = [1, 2, 3, 4, 5, 10, 20, 40, 60, 80, 100];
pub const DEFAULT_K: usize = 5;
/// Datasets up to this size default to 100 repetitions, larger ones to 10.
pub const SMALL_DATASET_LIMIT: usize = 2000;
pub const DEFAULT_TTEST_THRESHOLD: usize = 20;

pub const RESULTS_HEADER: &str = "method,T,k,n0,repetition,missing_rate,distance_error,build_ms,query_ms,seed";
pub const SIGNIFICANCE_HEADER: &str = "T,k,method_a,method_b,statistic,p_value";
/// Written in place of the statistic and p-value when two samples have the
/// same mean.
pub const IDENTICAL_MARKER: &str = "(-)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetSpec>,
    /// Method numbers, 1 through 4.
    pub methods: Vec<u8>,
    pub forest_sizes: Vec<usize>,
    pub k_values: Vec<usize>,
    pub leaf_capacity: usize,
    pub n_try: usize,
    pub noise_sigmas: Vec<f64>,
    /// `None` picks 100 for datasets of at most 2000 points, else 10.
    pub repetitions: Option<usize>,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    /// When false, timing columns are written as 0 so that the output
    /// depends on the seed alone.
    pub record_timing: bool,
    /// Emit a significance report for forest sizes above this value.
    pub ttest_threshold: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            methods: vec![1, 2, 3, 4],
            forest_sizes: DEFAULT_FOREST_SIZES.to_vec(),
            k_values: vec![DEFAULT_K],
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            n_try: DEFAULT_N_TRY,
            noise_sigmas: DEFAULT_NOISE_SIGMAS.to_vec(),
            repetitions: None,
            master_seed: 0,
            output_path: None,
            record_timing: true,
            ttest_threshold: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks everything that can be checked without loading the dataset.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.dataset.is_none() {
            return fail("no dataset given".into());
        }
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        for &m in &self.methods {
            Method::from_number(m).map_err(|e| Error::Validation(e.to_string()))?;
        }
        if has_duplicates(&self.methods) {
            return fail("methods listed twice".into());
        }
        if self.forest_sizes.is_empty() || self.forest_sizes.contains(&0) {
            return fail("forest sizes must be non-empty and at least 1".into());
        }
        if has_duplicates(&self.forest_sizes) {
            return fail("forest sizes listed twice".into());
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return fail("k values must be non-empty and at least 1".into());
        }
        if has_duplicates(&self.k_values) {
            return fail("k values listed twice".into());
        }
        let max_k = *self.k_values.iter().max().expect("non-empty");
        if max_k >= self.leaf_capacity {
            return fail(format!(
                "largest k ({max_k}) must be below the leaf capacity ({})",
                self.leaf_capacity
            ));
        }
        if self.repetitions == Some(0) {
            return fail("repetitions must be at least 1".into());
        }
        self.tree_config(Method::RandomDirection).validate()
    }

    pub fn tree_config(&self, method: Method) -> TreeConfig {
        TreeConfig {
            leaf_capacity: self.leaf_capacity,
            strategy: StrategyConfig {
                method,
                n_try: self.n_try,
                noise_sigmas: self.noise_sigmas.clone(),
            },
            max_degenerate_retries: DEFAULT_DEGENERATE_RETRIES,
        }
    }

    pub fn repetitions_for(&self, n: usize) -> usize {
        self.repetitions
            .unwrap_or(if n <= SMALL_DATASET_LIMIT { 100 } else { 10 })
    }

    /// Grid cells in output order: method, then forest size, then k.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &m in &self.methods {
            let method = Method::from_number(m).expect("validated");
            for &trees in &self.forest_sizes {
                for &k in &self.k_values {
                    cells.push(Cell { method, trees, k });
                }
            }
        }
        cells
    }
}

fn has_duplicates<T: Ord + Copy>(v: &[T]) -> bool {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.windows(2).any(|w| w[0] == w[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub trees: usize,
    pub k: usize,
}

/// One line of the results file.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub trees: usize,
    pub k: usize,
    pub leaf_capacity: usize,
    pub repetition: usize,
    pub missing_rate: f64,
    pub distance_error: f64,
    pub build_ms: f64,
    pub query_ms: f64,
    /// Master seed of the forest built for this run.
    pub seed: u64,
}

impl ResultRow {
    fn from_report(report: &EvalReport, repetition: usize, record_timing: bool) -> Self {
        let ms = |d: std::time::Duration| if record_timing { d.as_secs_f64() * 1e3 } else { 0.0 };
        let meta = report.metadata;
        Self {
            method: meta.method,
            trees: meta.trees,
            k: meta.k,
            leaf_capacity: meta.leaf_capacity,
            repetition,
            missing_rate: report.missing_rate,
            distance_error: report.distance_error,
            build_ms: ms(report.times.build),
            query_ms: ms(report.times.query),
            seed: meta.seed,
        }
    }
}

/// Loads the configured dataset and runs the grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let data = cfg.dataset.as_ref().expect("validated").load()?;
    run_experiment_grid(cfg, &data)
}

/// Runs every `(cell, repetition)` of `cfg` over `data`. Rows come back in
/// grid order, then repetition order.
pub fn run_experiment_grid(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<ResultRow>> {
    cfg.validate_grid()?;
    let max_k = *cfg.k_values.iter().max().expect("validated");
    if max_k >= data.len() {
        return Err(Error::Validation(format!(
            "k = {max_k} needs more than {} points",
            data.len()
        )));
    }
    let reps = cfg.repetitions_for(data.len());

    let mut truth: BTreeMap<usize, Vec<NeighborList>> = BTreeMap::new();
    for &k in &cfg.k_values {
        truth.insert(k, all_true_neighbors(data, k)?);
    }

    let cells = cfg.cells();
    let root = SeedStream::new(cfg.master_seed);
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();

    let run = |&(c, r): &(usize, usize)| -> Result<ResultRow> {
        let cell = cells[c];
        let seed = root.child(c as u64).child(r as u64).seed();
        let tree_cfg = cfg.tree_config(cell.method);
        let (forest, found, times) = time_run(
            || build_forest(data, &tree_cfg, cell.trees, seed),
            |forest| forest.as_ref().ok().map(|f| f.query_all(data, cell.k)),
        );
        forest?;
        let found = found.expect("forest built")?;
        let report = EvalReport::evaluate(
            &truth[&cell.k],
            &found,
            times,
            RunMetadata {
                method: cell.method,
                trees: cell.trees,
                k: cell.k,
                leaf_capacity: cfg.leaf_capacity,
                seed,
            },
        )?;
        Ok(ResultRow::from_report(&report, r, cfg.record_timing))
    };

    // Concurrent runs would distort each other's timings.
    #[cfg(feature = "parallel")]
    if !cfg.record_timing {
        return jobs.par_iter().map(run).collect();
    }
    jobs.iter().map(run).collect()
}

impl ExperimentConfig {
    fn validate_grid(&self) -> Result<()> {
        if self.dataset.is_some() {
            return self.validate();
        }
        // Grids run on an in-memory dataset need no dataset spec.
        let mut with_placeholder = self.clone();
        with_placeholder.dataset = Some(DatasetSpec::csv("-"));
        with_placeholder.validate()
    }
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_fraction(&format!("{v:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.trees,
            r.k,
            r.leaf_capacity,
            r.repetition,
            format_sig6(r.missing_rate),
            format_sig6(r.distance_error),
            format_sig6(r.build_ms),
            format_sig6(r.query_ms),
            r.seed
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_results_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("no results to write"));
    }
    let path = path.as_ref();
    std::fs::write(path, results_to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results_csv(&text)
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(Error::Format(format!("expected header {RESULTS_HEADER:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let row = i + 2;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 10 {
                return Err(Error::Format(format!(
                    "line {row} has {} columns, expected 10",
                    cells.len()
                )));
            }
            fn cell<T: std::str::FromStr>(cells: &[&str], row: usize, col: usize) -> Result<T> {
                cells[col].parse().map_err(|_| Error::Parse {
                    row,
                    column: col + 1,
                    message: format!("unexpected value {:?}", cells[col]),
                })
            }
            Ok(ResultRow {
                method: Method::from_number(cell(&cells, row, 0)?)?,
                trees: cell(&cells, row, 1)?,
                k: cell(&cells, row, 2)?,
                leaf_capacity: cell(&cells, row, 3)?,
                repetition: cell(&cells, row, 4)?,
                missing_rate: cell(&cells, row, 5)?,
                distance_error: cell(&cells, row, 6)?,
                build_ms: cell(&cells, row, 7)?,
                query_ms: cell(&cells, row, 8)?,
                seed: cell(&cells, row, 9)?,
            })
        })
        .collect()
}

/// Method 1 against one other method at one `(T, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceRow {
    pub trees: usize,
    pub k: usize,
    pub baseline: Method,
    pub method: Method,
    pub result: TTestResult,
}

/// For every forest size above `threshold`, tests Method 1's missing-rate
/// samples against each of methods 2-4 present in `rows`.
pub fn run_ttest_report(rows: &[ResultRow], threshold: usize) -> Result<Vec<SignificanceRow>> {
    let mut samples: BTreeMap<(usize, usize, Method), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.trees > threshold) {
        samples
            .entry((r.trees, r.k, r.method))
            .or_default()
            .push(r.missing_rate);
    }
    if samples.is_empty() {
        return Err(Error::Validation(format!(
            "no runs with more than {threshold} trees"
        )));
    }
    let mut report = Vec::new();
    let keys: Vec<(usize, usize)> = {
        let mut k: Vec<_> = samples.keys().map(|&(t, k, _)| (t, k)).collect();
        k.dedup();
        k
    };
    for (trees, k) in keys {
        let Some(base) = samples.get(&(trees, k, Method::RandomDirection)) else {
            return Err(Error::Validation(format!(
                "no method 1 runs at T={trees}, k={k}"
            )));
        };
        for method in &Method::ALL[1..] {
            let Some(other) = samples.get(&(trees, k, *method)) else {
                continue;
            };
            if base.len() < 2 || other.len() < 2 {
                return Err(Error::Validation(format!(
                    "T={trees}, k={k}: need at least 2 repetitions per method"
                )));
            }
            report.push(SignificanceRow {
                trees,
                k,
                baseline: Method::RandomDirection,
                method: *method,
                result: two_sample_ttest(base, other)?,
            });
        }
    }
    Ok(report)
}

pub fn significance_to_csv(rows: &[SignificanceRow]) -> String {
    let mut out = String::new();
    out.push_str(SIGNIFICANCE_HEADER);
    out.push('\n');
    for r in rows {
        let (stat, p) = match r.result {
            TTestResult::IdenticalMeans => (IDENTICAL_MARKER.to_string(), IDENTICAL_MARKER.to_string()),
            TTestResult::Computed {
                statistic, p_value, ..
            } => (format_sig6(statistic), format_sig6(p_value)),
        };
        writeln!(out, "{},{},{},{},{stat},{p}", r.trees, r.k, r.baseline, r.method).expect("writing to a String");
    }
    out
}

/// Plain-text table: one line per `(T, k)`, one column per compared
/// method, each cell the p-value or the identical-means marker.
pub fn significance_table(rows: &[SignificanceRow]) -> String {
    let methods: Vec<Method> = {
        let mut m: Vec<_> = rows.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    };
    let mut out = format!("{:>5} {:>4}", "T", "k");
    for m in &methods {
        write!(out, " {:>12}", format!("1 vs {m}")).expect("writing to a String");
    }
    out.push('\n');
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.trees, r.k)).collect();
    keys.dedup();
    for (trees, k) in keys {
        write!(out, "{trees:>5} {k:>4}").expect("writing to a String");
        for m in &methods {
            let cell = rows
                .iter()
                .find(|r| r.trees == trees && r.k == k && r.method == *m)
                .map_or_else(String::new, |r| match r.result.p_value() {
                    None => IDENTICAL_MARKER.to_string(),
                    Some(p) => format!("p={}", format_sig6(p)),
                });
            write!(out, " {cell:>12}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Mean timings per method, for a quick console summary.
pub fn mean_times(rows: &[ResultRow]) -> BTreeMap<Method, PhaseTimes> {
    let mut acc: BTreeMap<Method, (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(r.method).or_default();
        e.0 += r.build_ms;
        e.1 += r.query_ms;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(m, (b, q, n))| {
            let ms = |v: f64| std::time::Duration::from_secs_f64(v / n as f64 / 1e3);
            (m, PhaseTimes { build: ms(b), query: ms(q) })
        })
        .collect()
}
