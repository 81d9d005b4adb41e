//! Model sources: generator specs, JSON/URDF files and inline constraints.

use std::path::Path;

use delassus_core::model::format::ModelFile;
use delassus_core::model::generators::{
    fig1, gen_chain, gen_chain_all_constrained, gen_chain_md, gen_stem_branches, humanoid, Base, DEFAULT_BRANCH_LEN,
};
use delassus_core::urdf::{parse_urdf, to_tree};
use delassus_core::{ConstraintKind, ConstraintSet, Error, JointModel, KinematicTree};
use nalgebra::Vector3;

use crate::CliError;

pub const GEN_HELP: &str = "\
Generator specs:
  chain:N:JOINT[:floating]  N-link serial chain; JOINT is revolute, prismatic
                            (optionally suffixed -x, -y or -z, default z) or spherical
  stem:S:B                  floating stem of S links with B welded 7-link branches per side
  chain-md:K                K*K-link chain welded at every K-th link
  chain-all:N               N-link chain welded at every link
  fig1                      9-link example tree with three welded end-effectors
  humanoid                  floating-base humanoid with four contact points per foot

Constraint specs (--constrain, repeatable):
  LINK:weld | LINK:connect | LINK:connect@X,Y,Z
  LINK is `tip` (the last link), a 1-based link index or a link name.
  @FILE reads one spec per line (blank lines and # comments ignored).";

pub struct Loaded {
    pub tree: KinematicTree,
    pub cons: ConstraintSet,
    pub warnings: Vec<String>,
}

fn spec_err(msg: impl Into<String>) -> CliError {
    CliError::Spec(msg.into())
}

fn parse_count(field: &str, what: &str) -> Result<usize, CliError> {
    field.parse().map_err(|_| spec_err(format!("{what} must be a non-negative integer, got `{field}`")))
}

fn parse_joint(name: &str) -> Result<JointModel, CliError> {
    let (kind, axis) = name.split_once('-').unwrap_or((name, "z"));
    let axis = match axis {
        "x" => Vector3::x(),
        "y" => Vector3::y(),
        "z" => Vector3::z(),
        _ => return Err(spec_err(format!("unknown joint axis in `{name}`"))),
    };
    match kind {
        "revolute" => Ok(JointModel::revolute(axis)),
        "prismatic" => Ok(JointModel::prismatic(axis)),
        "spherical" if name == "spherical" => Ok(JointModel::Spherical),
        _ => Err(spec_err(format!("unknown joint type `{name}`"))),
    }
}

pub fn generate(spec: &str) -> Result<(KinematicTree, ConstraintSet), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let model = |e: delassus_core::ModelError| CliError::Model(e.into());
    match parts.as_slice() {
        ["fig1"] => Ok(fig1()),
        ["humanoid"] => Ok(humanoid()),
        ["chain", n, joint, rest @ ..] => {
            let base = match rest {
                [] => Base::Fixed,
                ["floating"] => Base::Floating,
                _ => return Err(spec_err(format!("bad chain spec `{spec}`"))),
            };
            let tree = gen_chain(parse_count(n, "chain length")?, parse_joint(joint)?, base).map_err(model)?;
            let cons = ConstraintSet::new(tree.n_bodies());
            Ok((tree, cons))
        }
        ["stem", s, b] => gen_stem_branches(parse_count(s, "stem length")?, parse_count(b, "branch count")?, DEFAULT_BRANCH_LEN)
            .map_err(model),
        ["chain-md", k] => gen_chain_md(parse_count(k, "k")?).map_err(model),
        ["chain-all", n] => gen_chain_all_constrained(parse_count(n, "chain length")?).map_err(model),
        _ => Err(spec_err(format!("unknown generator spec `{spec}` (see --help)"))),
    }
}

pub fn load_file(path: &Path, base: Base) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| spec_err(format!("cannot read {}: {e}", path.display())))?;
    let is_urdf = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("urdf") || e.eq_ignore_ascii_case("xml"));
    if is_urdf {
        let doc = parse_urdf(&text).map_err(Error::from)?;
        let tree = to_tree(&doc, base)?;
        let cons = ConstraintSet::new(tree.n_bodies());
        Ok(Loaded { tree, cons, warnings: doc.warnings })
    } else {
        let file = ModelFile::from_json(&text).map_err(Error::from)?;
        let (tree, cons) = file.to_model().map_err(Error::from)?;
        Ok(Loaded { tree, cons, warnings: Vec::new() })
    }
}

fn resolve_link(tree: &KinematicTree, name: &str) -> Result<usize, CliError> {
    if name == "tip" {
        return Ok(tree.n_bodies());
    }
    if let Ok(i) = name.parse::<usize>() {
        return Ok(i);
    }
    tree.links()
        .iter()
        .position(|l| l.name == name)
        .map(|p| p + 1)
        .ok_or_else(|| spec_err(format!("no link named `{name}`")))
}

fn parse_kind(kind: &str) -> Result<ConstraintKind, CliError> {
    match kind {
        "weld" => Ok(ConstraintKind::Weld),
        "connect" => Ok(ConstraintKind::connect_at_origin()),
        _ => {
            let coords = kind
                .strip_prefix("connect@")
                .ok_or_else(|| spec_err(format!("unknown constraint kind `{kind}`")))?;
            let v: Vec<f64> = coords
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| spec_err(format!("bad connect point `{coords}`")))?;
            match v.as_slice() {
                [x, y, z] => Ok(ConstraintKind::Connect { point: Vector3::new(*x, *y, *z) }),
                _ => Err(spec_err(format!("connect point needs three coordinates, got `{coords}`"))),
            }
        }
    }
}

fn expand_specs(specs: &[String]) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for s in specs {
        if let Some(path) = s.strip_prefix('@') {
            let text = std::fs::read_to_string(path).map_err(|e| spec_err(format!("cannot read {path}: {e}")))?;
            out.extend(
                text.lines()
                    .map(|l| l.split('#').next().unwrap_or("").trim())
                    .filter(|l| !l.is_empty())
                    .map(str::to_string),
            );
        } else {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// Appends the constraints described by `specs` to `cons`.
pub fn add_constraints(tree: &KinematicTree, cons: &mut ConstraintSet, specs: &[String]) -> Result<(), CliError> {
    for spec in expand_specs(specs)? {
        let (link, kind) = spec.split_once(':').ok_or_else(|| spec_err(format!("constraint spec `{spec}` needs LINK:KIND")))?;
        let link = resolve_link(tree, link)?;
        cons.push(link, parse_kind(kind)?).map_err(|e| CliError::Model(e.into()))?;
    }
    Ok(())
}
