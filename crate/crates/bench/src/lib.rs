//! Fixture models shared by the benchmarks.

use delassus_core::model::generators::{fig1, gen_chain_md, gen_stem_branches, humanoid, DEFAULT_BRANCH_LEN};
use delassus_core::{ConstraintSet, IndexSets, KinematicTree};

pub struct Fixture {
    pub name: String,
    pub tree: KinematicTree,
    pub cons: ConstraintSet,
    pub sets: IndexSets,
}

impl Fixture {
    pub fn new(name: impl Into<String>, (tree, cons): (KinematicTree, ConstraintSet)) -> Self {
        let sets = IndexSets::new(&tree, &cons);
        Self { name: name.into(), tree, cons, sets }
    }
}

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture::new("fig1", fig1()),
        Fixture::new("humanoid", humanoid()),
        Fixture::new("chain_md_8", gen_chain_md(8).expect("valid generator")),
        Fixture::new("stem_40_4", gen_stem_branches(40, 4, DEFAULT_BRANCH_LEN).expect("valid generator")),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        let f = super::fixtures();
        assert_eq!(f.len(), 4);
        assert!(f.iter().all(|x| x.cons.m() > 0));
    }
}
