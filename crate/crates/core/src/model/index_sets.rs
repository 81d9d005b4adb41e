use super::{ConstraintSet, KinematicTree};

/// Precomputed topology tables over links `0..=n_b` and end-effectors
/// `n_b+1..=n_b+m_b`.
///
/// A link is branching when it is the root, an end-effector, or has at least
/// two children that support end-effectors (an attached end-effector counts
/// as a child supporting itself). Unconstrained leaves are not branching.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSets {
    n_bodies: usize,
    n_ee: usize,
    parent: Vec<usize>,
    depth: Vec<usize>,
    es: Vec<Vec<usize>>,
    cca: Vec<Vec<usize>>,
    branching: Vec<usize>,
    is_branching: Vec<bool>,
    anc_branch: Vec<Option<usize>>,
    desc_branch: Vec<Option<usize>>,
}

impl IndexSets {
    pub fn new(tree: &KinematicTree, cons: &ConstraintSet) -> Self {
        let nb = tree.n_bodies();
        let me = cons.len();
        let total = nb + me + 1;

        let mut parent = vec![0; total];
        let mut depth = vec![0; total];
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); total];
        for i in 1..total {
            parent[i] = if i <= nb { tree.parent(i) } else { cons.ee(i - nb - 1).parent };
            depth[i] = depth[parent[i]] + 1;
            kids[parent[i]].push(i);
        }

        let mut es: Vec<Vec<usize>> = vec![Vec::new(); total];
        for e in nb + 1..total {
            es[e].push(e);
        }
        for i in (1..total).rev() {
            let mine = std::mem::take(&mut es[i]);
            es[parent[i]].extend_from_slice(&mine);
            es[i] = mine;
        }
        for s in &mut es {
            s.sort_unstable();
        }

        let mut is_branching = vec![false; total];
        is_branching[0] = true;
        for i in 1..total {
            let supporting = kids[i].iter().filter(|&&c| !es[c].is_empty()).count();
            is_branching[i] = i > nb || supporting >= 2;
        }
        let branching: Vec<usize> = (0..total).filter(|&i| is_branching[i]).collect();

        let mut anc_branch = vec![None; total];
        for i in 1..total {
            let p = parent[i];
            anc_branch[i] = Some(if is_branching[p] { p } else { anc_branch[p].unwrap_or(0) });
        }

        let mut desc_branch = vec![None; total];
        for i in (0..total).rev() {
            if is_branching[i] {
                desc_branch[i] = Some(i);
            } else if !es[i].is_empty() {
                let c = kids[i].iter().copied().find(|&c| !es[c].is_empty());
                desc_branch[i] = c.and_then(|c| desc_branch[c]);
            }
        }

        let mut cca = vec![vec![0; me]; me];
        for a in 0..me {
            for b in a..me {
                let c = closest_common(&parent, &depth, nb + 1 + a, nb + 1 + b);
                cca[a][b] = c;
                cca[b][a] = c;
            }
        }

        Self { n_bodies: nb, n_ee: me, parent, depth, es, cca, branching, is_branching, anc_branch, desc_branch }
    }

    pub fn n_bodies(&self) -> usize {
        self.n_bodies
    }

    pub fn n_end_effectors(&self) -> usize {
        self.n_ee
    }

    /// Parent of any node, end-effectors included.
    pub fn parent(&self, i: usize) -> usize {
        self.parent[i]
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    /// Sorted end-effector support set `ES(i)`.
    pub fn es(&self, i: usize) -> &[usize] {
        &self.es[i]
    }

    /// Closest common ancestor of two end-effectors, by global index.
    pub fn cca(&self, e: usize, f: usize) -> usize {
        let o = self.n_bodies + 1;
        self.cca[e - o][f - o]
    }

    /// Closest common ancestor of any two nodes.
    pub fn common_ancestor(&self, i: usize, j: usize) -> usize {
        closest_common(&self.parent, &self.depth, i, j)
    }

    /// Branching links `𝒩` in increasing order.
    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn is_branching(&self, i: usize) -> bool {
        self.is_branching[i]
    }

    /// `𝒜(i)`: closest proper ancestor in `𝒩` (`None` for the root).
    pub fn anc_branch(&self, i: usize) -> Option<usize> {
        self.anc_branch[i]
    }

    /// `𝒟(i)`: closest descendant-or-self in `𝒩` (`None` when `ES(i)` is empty).
    pub fn desc_branch(&self, i: usize) -> Option<usize> {
        self.desc_branch[i]
    }

    /// `path(j, i)`: nodes strictly below `j` down to and including `i`, leaf first.
    pub fn path(&self, j: usize, i: usize) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = i;
        while cur != j {
            if cur == 0 {
                return None;
            }
            out.push(cur);
            cur = self.parent[cur];
        }
        Some(out)
    }
}

fn closest_common(parent: &[usize], depth: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        if depth[a] >= depth[b] {
            a = parent[a];
        } else {
            b = parent[b];
        }
    }
    a
}
