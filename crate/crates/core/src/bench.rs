//! Operation-count suites over the synthetic scaling families, with CSV
//! output and log-log slope fits.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::BenchError;
use crate::metering::{count_ops, Algorithm, OpCountReport};
use crate::model::generators::{gen_chain_all_constrained, gen_chain_md, gen_stem_branches, DEFAULT_BRANCH_LEN};
use crate::model::{ConstraintSet, IndexSets, KinematicTree};

/// Slope fits use this many trailing points unless told otherwise.
pub const DEFAULT_TAIL: usize = 4;

pub const CSV_HEADER: [&str; 12] =
    ["family", "param", "algorithm", "n_b", "n", "m", "d", "mul", "add_sub", "div", "sqrt", "total"];

/// One user-supplied mechanism of a custom suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomPoint {
    pub param: usize,
    pub tree: KinematicTree,
    pub cons: ConstraintSet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Floating stem with welded 7-link branches; the parameter is the stem length.
    StemBranches { branches_per_side: usize, stem_lengths: Vec<usize> },
    /// `k²`-link chain welded at every `k`-th link.
    ChainMd { k: Vec<usize> },
    /// `n`-link chain welded at every link.
    ChainAllConstrained { n: Vec<usize> },
    Custom { name: String, points: Vec<CustomPoint> },
}

impl Family {
    pub fn name(&self) -> &str {
        match self {
            Family::StemBranches { .. } => "stem_branches",
            Family::ChainMd { .. } => "chain_md",
            Family::ChainAllConstrained { .. } => "chain_all_constrained",
            Family::Custom { name, .. } => name,
        }
    }

    pub fn params(&self) -> Vec<usize> {
        match self {
            Family::StemBranches { stem_lengths, .. } => stem_lengths.clone(),
            Family::ChainMd { k } => k.clone(),
            Family::ChainAllConstrained { n } => n.clone(),
            Family::Custom { points, .. } => points.iter().map(|p| p.param).collect(),
        }
    }

    fn build(&self, index: usize) -> Result<(KinematicTree, ConstraintSet), BenchError> {
        let p = self.params()[index];
        Ok(match self {
            Family::StemBranches { branches_per_side, .. } => gen_stem_branches(p, *branches_per_side, DEFAULT_BRANCH_LEN)?,
            Family::ChainMd { .. } => gen_chain_md(p)?,
            Family::ChainAllConstrained { .. } => gen_chain_all_constrained(p)?,
            Family::Custom { points, .. } => (points[index].tree.clone(), points[index].cons.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub family: Family,
    pub algorithms: Vec<Algorithm>,
    /// CSV destination for [`SuiteSpec::execute`]; `None` writes nothing.
    pub output: Option<PathBuf>,
}

impl SuiteSpec {
    pub fn new(family: Family, algorithms: Vec<Algorithm>) -> Self {
        Self { family, algorithms, output: None }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let params = self.family.params();
        if params.is_empty() || params.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::BadParameters);
        }
        if self.algorithms.is_empty() {
            return Err(BenchError::EmptyAlgorithms);
        }
        Ok(())
    }

    /// Runs the suite and writes the CSV to `output` when set.
    pub fn execute(&self) -> Result<Vec<SuiteRow>, BenchError> {
        let rows = run_suite(self)?;
        if let Some(path) = &self.output {
            let file = std::fs::File::create(path).map_err(|e| BenchError::Csv(e.to_string()))?;
            write_csv(&rows, file)?;
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub family: String,
    pub param: usize,
    pub report: OpCountReport,
}

/// One row per (parameter, algorithm), parameters outermost, algorithms
/// in the order given. Points are evaluated in parallel.
pub fn run_suite(spec: &SuiteSpec) -> Result<Vec<SuiteRow>, BenchError> {
    spec.validate()?;
    let params = spec.family.params();
    let per_point: Vec<Vec<SuiteRow>> = (0..params.len())
        .into_par_iter()
        .map(|idx| {
            let (tree, cons) = spec.family.build(idx)?;
            let sets = IndexSets::new(&tree, &cons);
            let q = tree.neutral_configuration();
            spec.algorithms
                .par_iter()
                .map(|&a| {
                    let report = count_ops(a, &tree, &cons, &sets, &q)?;
                    Ok(SuiteRow { family: spec.family.name().to_string(), param: params[idx], report })
                })
                .collect::<Result<Vec<_>, BenchError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(rows: &[SuiteRow], out: W) -> Result<(), BenchError> {
    let err = |e: csv::Error| BenchError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(err)?;
    for row in rows {
        let r = &row.report;
        let s = &r.model;
        w.write_record([
            row.family.clone(),
            row.param.to_string(),
            r.algorithm.name().to_string(),
            s.n_b.to_string(),
            s.n.to_string(),
            s.m.to_string(),
            s.d.to_string(),
            r.mul.to_string(),
            r.add_sub.to_string(),
            r.div.to_string(),
            r.sqrt.to_string(),
            r.total.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.to_string()))
}

pub fn csv_string(rows: &[SuiteRow]) -> Result<String, BenchError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| BenchError::Csv(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
}

/// Least-squares line through `(ln x, ln y)` of the last `tail` points.
pub fn fit_slope(points: &[(f64, f64)], tail: usize) -> Result<SlopeFit, BenchError> {
    let used = &points[points.len().saturating_sub(tail)..];
    if used.len() < 2 {
        return Err(BenchError::InsufficientPoints(used.len()));
    }
    if let Some(&(x, y)) = used.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(BenchError::NonPositiveValue(x, y));
    }
    let logs: Vec<(f64, f64)> = used.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(BenchError::InsufficientPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(SlopeFit { slope, intercept, r2, points_used: used.len() })
}

/// Slope of total operations against the suite parameter, per algorithm.
pub fn slopes(rows: &[SuiteRow], tail: usize) -> Result<Vec<(Algorithm, SlopeFit)>, BenchError> {
    let mut algos: Vec<Algorithm> = Vec::new();
    for r in rows {
        if !algos.contains(&r.report.algorithm) {
            algos.push(r.report.algorithm);
        }
    }
    algos
        .into_iter()
        .map(|a| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.report.algorithm == a)
                .map(|r| (r.param as f64, r.report.total as f64))
                .collect();
            fit_slope(&pts, tail).map(|f| (a, f))
        })
        .collect()
}
