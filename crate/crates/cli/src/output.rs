use clap::ValueEnum;
use delassus_core::metering::OpCountReport;
use delassus_core::{ConstraintSet, DelassusMatrix, IndexSets, KinematicTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Table,
    /// Row-major, space-separated, 17 significant digits.
    MatrixText,
}

fn rows_joined(l: &DelassusMatrix, sep: &str, cell: impl Fn(f64) -> String) -> String {
    let m = &l.matrix;
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| cell(m[(r, c)])).collect::<Vec<_>>().join(sep) + "\n")
        .collect()
}

pub fn matrix(l: &DelassusMatrix, format: Format) -> String {
    match format {
        Format::MatrixText => rows_joined(l, " ", |v| format!("{v:.16e}")),
        Format::Csv => rows_joined(l, ",", |v| format!("{v:.16e}")),
        Format::Table => rows_joined(l, " ", |v| format!("{v:>13.5e}")),
    }
}

pub fn reports(reports: &[OpCountReport], format: Format) -> String {
    match format {
        Format::Table => OpCountReport::table(reports),
        _ => std::iter::once(OpCountReport::CSV_HEADER.to_string())
            .chain(reports.iter().map(OpCountReport::csv_row))
            .map(|l| l + "\n")
            .collect(),
    }
}

pub fn info(tree: &KinematicTree, cons: &ConstraintSet) -> String {
    let sets = IndexSets::new(tree, cons);
    let mut out = format!(
        "links: {}\nnq: {}\nnv: {}\ndepth: {}\nfloating base: {}\nconstraint rows: {}\nbranching links: {:?}\n",
        tree.n_bodies(),
        tree.nq(),
        tree.nv(),
        tree.depth(),
        tree.has_floating_base(),
        cons.m(),
        sets.branching()
    );
    for (k, ee) in cons.end_effectors().iter().enumerate() {
        let link = ee.parent;
        out.push_str(&format!(
            "end-effector {}: {} on link {link} ({}), {} rows\n",
            tree.n_bodies() + 1 + k,
            ee.kind.tag(),
            tree.link(link).name,
            ee.rows()
        ));
    }
    out
}
