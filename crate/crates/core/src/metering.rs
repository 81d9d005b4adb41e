//! Scalar-operation counts of whole algorithm invocations.
//!
//! A count covers everything from the joint transforms through the final
//! Delassus assembly. Model validation and index-set construction happen
//! before the counter starts. Sine and cosine evaluations inside joint
//! transforms are not counted; every other floating-point multiply, add,
//! subtract, divide and square root is.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{ltl_delassus, naive_delassus};
use crate::delassus::DelassusMatrix;
use crate::error::DynamicsError;
use crate::model::{ConstraintSet, IndexSets, KinematicTree};
use crate::osim::{efpa, pv_osim, pv_osimr};
use crate::spatial::{Arith, OpTally};
use crate::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Naive,
    Ltl,
    PvOsim,
    Efpa,
    PvOsimr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::Naive, Algorithm::Ltl, Algorithm::PvOsim, Algorithm::Efpa, Algorithm::PvOsimr];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Naive => "naive",
            Algorithm::Ltl => "ltl",
            Algorithm::PvOsim => "pv_osim",
            Algorithm::Efpa => "efpa",
            Algorithm::PvOsimr => "pv_osimr",
        }
    }

    /// Runs the algorithm with the given arithmetic context.
    pub fn run(
        &self,
        ar: &Arith,
        tree: &KinematicTree,
        cons: &ConstraintSet,
        sets: &IndexSets,
        q: &Configuration,
    ) -> Result<DelassusMatrix, DynamicsError> {
        match self {
            Algorithm::Naive => naive_delassus(ar, tree, cons, q),
            Algorithm::Ltl => ltl_delassus(ar, tree, cons, q),
            Algorithm::PvOsim => pv_osim(ar, tree, cons, sets, q),
            Algorithm::Efpa => efpa(ar, tree, cons, sets, q),
            Algorithm::PvOsimr => pv_osimr(ar, tree, cons, sets, q),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    /// Accepts `pv_osim`, `pv-osim`, `PV-OSIM` and the like.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected one of naive, ltl, pv-osim, efpa, pv-osimr)"))
    }
}

/// Model size summary attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub n_b: usize,
    /// Velocity DoFs.
    pub n: usize,
    /// Constraint dimension.
    pub m: usize,
    /// Tree depth.
    pub d: usize,
}

impl ModelSummary {
    pub fn of(tree: &KinematicTree, cons: &ConstraintSet) -> Self {
        Self { n_b: tree.n_bodies(), n: tree.nv(), m: cons.m(), d: tree.depth() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCountReport {
    pub algorithm: Algorithm,
    pub model: ModelSummary,
    pub mul: u64,
    pub add_sub: u64,
    pub div: u64,
    pub sqrt: u64,
    pub total: u64,
}

impl OpCountReport {
    pub fn new(algorithm: Algorithm, model: ModelSummary, tally: OpTally) -> Self {
        Self {
            algorithm,
            model,
            mul: tally.mul,
            add_sub: tally.add_sub,
            div: tally.div,
            sqrt: tally.sqrt,
            total: tally.total(),
        }
    }

    pub const CSV_HEADER: &'static str = "algorithm,n_b,n,m,d,mul,add_sub,div,sqrt,total";

    pub fn csv_row(&self) -> String {
        let s = &self.model;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.algorithm, s.n_b, s.n, s.m, s.d, self.mul, self.add_sub, self.div, self.sqrt, self.total
        )
    }

    pub fn table(reports: &[OpCountReport]) -> String {
        let mut out = format!(
            "{:<10} {:>5} {:>5} {:>5} {:>4} {:>12} {:>12} {:>8} {:>6} {:>12}\n",
            "algorithm", "n_b", "n", "m", "d", "mul", "add_sub", "div", "sqrt", "total"
        );
        for r in reports {
            let s = &r.model;
            out.push_str(&format!(
                "{:<10} {:>5} {:>5} {:>5} {:>4} {:>12} {:>12} {:>8} {:>6} {:>12}\n",
                r.algorithm.name(), s.n_b, s.n, s.m, s.d, r.mul, r.add_sub, r.div, r.sqrt, r.total
            ));
        }
        out
    }
}

/// Runs `algorithm` once with a fresh counting context.
pub fn count_ops(
    algorithm: Algorithm,
    tree: &KinematicTree,
    cons: &ConstraintSet,
    sets: &IndexSets,
    q: &Configuration,
) -> Result<OpCountReport, DynamicsError> {
    let ar = Arith::counting();
    algorithm.run(&ar, tree, cons, sets, q)?;
    Ok(OpCountReport::new(algorithm, ModelSummary::of(tree, cons), ar.tally()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generators;
    use crate::model::random::random_configuration;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_do_not_depend_on_configuration() {
        let (t, c) = generators::fig1();
        let sets = IndexSets::new(&t, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for a in Algorithm::ALL {
            let q1 = random_configuration(&mut rng, &t);
            let q2 = random_configuration(&mut rng, &t);
            let r1 = count_ops(a, &t, &c, &sets, &q1).unwrap();
            let r2 = count_ops(a, &t, &c, &sets, &q2).unwrap();
            assert_eq!(r1, r2);
            assert_eq!(r1.total, r1.mul + r1.add_sub + r1.div + r1.sqrt);
            assert!(r1.total > 0);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("pv-osimr".parse::<Algorithm>(), Ok(Algorithm::PvOsimr));
        assert_eq!("PV_OSIM".parse::<Algorithm>(), Ok(Algorithm::PvOsim));
        assert!("kjr".parse::<Algorithm>().is_err());
    }

    #[test]
    fn csv_row_format() {
        let (t, c) = generators::fig1();
        let sets = IndexSets::new(&t, &c);
        let r = count_ops(Algorithm::Efpa, &t, &c, &sets, &t.neutral_configuration()).unwrap();
        let row = r.csv_row();
        assert!(row.starts_with("efpa,6,21,18,5,"), "{row}");
        assert_eq!(row.split(',').count(), OpCountReport::CSV_HEADER.split(',').count());
    }
}
