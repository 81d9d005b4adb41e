//! Reader for the kinematic and inertial subset of URDF.
//!
//! Read elements: `<link>` with its `<inertial>` (`origin`, `mass`,
//! `inertia`), and `<joint>` with `type`, `<parent>`, `<child>`, `<origin>`
//! and `<axis>`. Joint types `revolute`, `continuous`, `prismatic`, `fixed`
//! and `floating` are accepted; `continuous` becomes revolute. Every other
//! element (visuals, collisions, limits, transmissions, plugins) is skipped
//! and recorded in [`UrdfDocument::warnings`].

use std::collections::{BTreeSet, HashMap};

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, ModelError, UrdfError};
use crate::model::generators::Base;
use crate::model::{JointModel, KinematicTree, Link};
use crate::spatial::{Abi, Arith, PluckerTransform, SpatialInertia};

/// `<origin xyz rpy>`: a child frame placed in its parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub xyz: Vector3<f64>,
    pub rpy: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { xyz: Vector3::zeros(), rpy: Vector3::zeros() }
    }

    /// Axes of the child frame as columns in parent coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        Rotation3::from_euler_angles(self.rpy.x, self.rpy.y, self.rpy.z).into_inner()
    }

    /// Parent frame to child frame.
    pub fn transform(&self) -> PluckerTransform {
        PluckerTransform::from_frame(self.rotation(), self.xyz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfInertial {
    pub origin: Pose,
    pub mass: f64,
    /// Rotational inertia about the centre of mass, in the `origin` frame.
    pub inertia: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfLink {
    pub name: String,
    pub inertial: Option<UrdfInertial>,
}

impl UrdfLink {
    /// Spatial inertia in the link frame (zero when no `<inertial>` is given).
    pub fn spatial_inertia(&self) -> SpatialInertia {
        match &self.inertial {
            None => SpatialInertia::zero(),
            Some(i) => {
                let r = i.origin.rotation();
                SpatialInertia::new(i.mass, i.origin.xyz, r * i.inertia * r.transpose())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UrdfJointKind {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
    Floating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfJoint {
    pub name: String,
    pub kind: UrdfJointKind,
    pub parent: String,
    pub child: String,
    pub origin: Pose,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfDocument {
    pub name: String,
    pub links: Vec<UrdfLink>,
    pub joints: Vec<UrdfJoint>,
    /// Skipped elements, one entry per distinct element path.
    pub warnings: Vec<String>,
    root: usize,
}

impl UrdfDocument {
    pub fn root_link(&self) -> &UrdfLink {
        &self.links[self.root]
    }

    /// Joints that [`to_tree`] merges away.
    pub fn fixed_joints(&self) -> impl Iterator<Item = &UrdfJoint> {
        self.joints.iter().filter(|j| j.kind == UrdfJointKind::Fixed)
    }
}

fn attr_vec3(node: roxmltree::Node, name: &str, default: Vector3<f64>) -> Result<Vector3<f64>, UrdfError> {
    let Some(text) = node.attribute(name) else { return Ok(default) };
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| UrdfError::InvalidAttribute(format!("`{name}=\"{text}\"` is not a list of numbers")))?;
    if vals.len() != 3 {
        return Err(UrdfError::InvalidAttribute(format!("`{name}=\"{text}\"` needs three values")));
    }
    Ok(Vector3::new(vals[0], vals[1], vals[2]))
}

fn attr_f64(node: roxmltree::Node, name: &str) -> Result<f64, UrdfError> {
    let text = node
        .attribute(name)
        .ok_or_else(|| UrdfError::InvalidAttribute(format!("<{}> lacks `{name}`", node.tag_name().name())))?;
    text.trim()
        .parse()
        .map_err(|_| UrdfError::InvalidAttribute(format!("`{name}=\"{text}\"` is not a number")))
}

fn attr_str(node: roxmltree::Node, name: &str) -> Result<String, UrdfError> {
    node.attribute(name)
        .map(str::to_owned)
        .ok_or_else(|| UrdfError::InvalidAttribute(format!("<{}> lacks `{name}`", node.tag_name().name())))
}

fn parse_pose(node: Option<roxmltree::Node>) -> Result<Pose, UrdfError> {
    match node {
        None => Ok(Pose::identity()),
        Some(n) => Ok(Pose { xyz: attr_vec3(n, "xyz", Vector3::zeros())?, rpy: attr_vec3(n, "rpy", Vector3::zeros())? }),
    }
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, tag: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn parse_inertial(node: roxmltree::Node) -> Result<UrdfInertial, UrdfError> {
    let mass = match child(node, "mass") {
        Some(m) => attr_f64(m, "value")?,
        None => 0.0,
    };
    let inertia = match child(node, "inertia") {
        None => Matrix3::zeros(),
        Some(i) => {
            let g = |k| attr_f64(i, k);
            let (xx, xy, xz, yy, yz, zz) = (g("ixx")?, g("ixy")?, g("ixz")?, g("iyy")?, g("iyz")?, g("izz")?);
            Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
        }
    };
    Ok(UrdfInertial { origin: parse_pose(child(node, "origin"))?, mass, inertia })
}

/// Parses a URDF document.
pub fn parse_urdf(text: &str) -> Result<UrdfDocument, UrdfError> {
    let xml = roxmltree::Document::parse(text).map_err(|e| UrdfError::MalformedXml(e.to_string()))?;
    let robot = xml.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(UrdfError::MalformedXml(format!("root element is <{}>, expected <robot>", robot.tag_name().name())));
    }
    let mut warnings = BTreeSet::new();
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for node in robot.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => {
                let name = attr_str(node, "name")?;
                let mut inertial = None;
                for c in node.children().filter(|n| n.is_element()) {
                    if c.tag_name().name() == "inertial" {
                        inertial = Some(parse_inertial(c)?);
                    } else {
                        warnings.insert(format!("link/{}", c.tag_name().name()));
                    }
                }
                links.push(UrdfLink { name, inertial });
            }
            "joint" => {
                let name = attr_str(node, "name")?;
                let ty = attr_str(node, "type")?;
                let kind = match ty.as_str() {
                    "revolute" => UrdfJointKind::Revolute,
                    "continuous" => UrdfJointKind::Continuous,
                    "prismatic" => UrdfJointKind::Prismatic,
                    "fixed" => UrdfJointKind::Fixed,
                    "floating" => UrdfJointKind::Floating,
                    _ => return Err(UrdfError::UnsupportedJointType { joint: name, kind: ty }),
                };
                let link_ref = |tag: &str| -> Result<String, UrdfError> {
                    let n = child(node, tag)
                        .ok_or_else(|| UrdfError::InvalidAttribute(format!("joint `{name}` has no <{tag}>")))?;
                    attr_str(n, "link")
                };
                let (parent, child_name) = (link_ref("parent")?, link_ref("child")?);
                let axis = match child(node, "axis") {
                    Some(a) => attr_vec3(a, "xyz", Vector3::x())?,
                    None => Vector3::x(),
                };
                let norm = axis.norm();
                if !(norm > 1e-12) {
                    return Err(UrdfError::InvalidAttribute(format!("joint `{name}` has a zero axis")));
                }
                for c in node.children().filter(|n| n.is_element()) {
                    if !matches!(c.tag_name().name(), "parent" | "child" | "origin" | "axis") {
                        warnings.insert(format!("joint/{}", c.tag_name().name()));
                    }
                }
                joints.push(UrdfJoint {
                    name,
                    kind,
                    parent,
                    child: child_name,
                    origin: parse_pose(child(node, "origin"))?,
                    axis: axis / norm,
                });
            }
            other => {
                warnings.insert(other.to_string());
            }
        }
    }

    let mut index = HashMap::new();
    for (k, l) in links.iter().enumerate() {
        if index.insert(l.name.clone(), k).is_some() {
            return Err(UrdfError::InvalidAttribute(format!("duplicate link `{}`", l.name)));
        }
    }
    let mut parent_of: Vec<Option<usize>> = vec![None; links.len()];
    for j in &joints {
        let lookup = |l: &str| {
            index.get(l).copied().ok_or_else(|| UrdfError::UnknownLink { joint: j.name.clone(), link: l.to_string() })
        };
        let (p, c) = (lookup(&j.parent)?, lookup(&j.child)?);
        if parent_of[c].is_some() || p == c {
            return Err(UrdfError::CyclicJointGraph);
        }
        parent_of[c] = Some(p);
    }
    let roots: Vec<usize> = (0..links.len()).filter(|&k| parent_of[k].is_none()).collect();
    let root = match roots.as_slice() {
        [] => return Err(UrdfError::CyclicJointGraph),
        [r] => *r,
        _ => return Err(UrdfError::MultipleRoots(roots.iter().map(|&k| links[k].name.clone()).collect())),
    };
    // with a single parentless link, any link not reaching it sits on a cycle
    for start in 0..links.len() {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = parent_of[cur] {
            cur = p;
            steps += 1;
            if steps > links.len() {
                return Err(UrdfError::CyclicJointGraph);
            }
        }
    }
    let name = robot.attribute("name").unwrap_or("").to_string();
    Ok(UrdfDocument { name, links, joints, warnings: warnings.into_iter().collect(), root })
}

struct Body {
    name: String,
    parent: usize,
    joint: JointModel,
    placement: PluckerTransform,
    inertia: Abi,
}

/// Builds a kinematic tree, merging fixed joints into their parent bodies.
///
/// Bodies are numbered depth first from the root, children in document
/// order. With a fixed base the root link is the world and its inertia is
/// dropped; with a floating base it becomes body 1 on a free-flyer joint.
pub fn to_tree(doc: &UrdfDocument, base: Base) -> Result<KinematicTree, Error> {
    let ar = Arith::silent();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); doc.links.len()];
    let index: HashMap<&str, usize> = doc.links.iter().enumerate().map(|(k, l)| (l.name.as_str(), k)).collect();
    for (k, j) in doc.joints.iter().enumerate() {
        kids[index[j.parent.as_str()]].push(k);
    }

    let mut bodies: Vec<Body> = Vec::new();
    let root_owner = match base {
        Base::Fixed => 0,
        Base::Floating => {
            bodies.push(Body {
                name: doc.root_link().name.clone(),
                parent: 0,
                joint: JointModel::FreeFlyer,
                placement: PluckerTransform::identity(),
                inertia: Abi::zeros(),
            });
            1
        }
    };
    // (link, owning body, owner frame → link frame, body still to be created)
    type Pending = Option<(usize, JointModel, PluckerTransform)>;
    let mut stack: Vec<(usize, usize, PluckerTransform, Pending)> =
        vec![(doc.root, root_owner, PluckerTransform::identity(), None)];
    while let Some((l, mut owner, mut x, pending)) = stack.pop() {
        if let Some((parent, joint, placement)) = pending {
            bodies.push(Body { name: doc.links[l].name.clone(), parent, joint, placement, inertia: Abi::zeros() });
            owner = bodies.len();
            x = PluckerTransform::identity();
        }
        if owner != 0 {
            let h = doc.links[l].spatial_inertia().to_matrix();
            bodies[owner - 1].inertia += x.inverse(&ar).inertia(&ar, &h);
        }
        for &jk in kids[l].iter().rev() {
            let j = &doc.joints[jk];
            let c = index[j.child.as_str()];
            let placement = j.origin.transform().compose(&ar, &x);
            let joint = match j.kind {
                UrdfJointKind::Fixed => {
                    stack.push((c, owner, placement, None));
                    continue;
                }
                UrdfJointKind::Revolute | UrdfJointKind::Continuous => JointModel::revolute(j.axis),
                UrdfJointKind::Prismatic => JointModel::prismatic(j.axis),
                UrdfJointKind::Floating => JointModel::FreeFlyer,
            };
            stack.push((c, usize::MAX, placement, Some((owner, joint, placement))));
        }
    }

    if bodies.is_empty() {
        return Err(ModelError::EmptyTree.into());
    }
    let mut links = Vec::with_capacity(bodies.len());
    for b in bodies {
        let inertia = SpatialInertia::from_matrix(&b.inertia);
        if !(inertia.mass > 0.0) {
            return Err(UrdfError::NonPositiveMass(b.name).into());
        }
        links.push(Link { name: b.name, parent: b.parent, joint: b.joint, placement: b.placement, inertia });
    }
    let tree = KinematicTree::new(links);
    tree.validate()?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inertial(mass: f64, xyz: &str) -> String {
        format!(
            r#"<inertial><origin xyz="{xyz}" rpy="0.1 0.2 0.3"/><mass value="{mass}"/>
               <inertia ixx="0.02" ixy="0.001" ixz="0" iyy="0.03" iyz="0.002" izz="0.04"/></inertial>"#
        )
    }

    fn three_link(middle: &str) -> String {
        format!(
            r#"<robot name="arm">
              <link name="a">{}<visual/></link>
              <link name="b">{}</link>
              <link name="c">{}</link>
              <joint name="j1" type="revolute"><parent link="a"/><child link="b"/>
                <origin xyz="0 0 0.5" rpy="0 0 0.7"/><axis xyz="0 0 2"/><limit effort="1"/></joint>
              <joint name="j2" type="{middle}"><parent link="b"/><child link="c"/>
                <origin xyz="0.3 0.1 0" rpy="0.4 0 0"/><axis xyz="0 1 0"/></joint>
              <material name="grey"/>
            </robot>"#,
            inertial(2.0, "0 0 0.1"),
            inertial(1.5, "0.2 0 0"),
            inertial(0.5, "0 0.1 0.1")
        )
    }

    #[test]
    fn two_link_document() {
        let text = r#"<robot name="r"><link name="base"/><link name="arm">
            <inertial><mass value="1"/><inertia ixx="1" ixy="0" ixz="0" iyy="1" iyz="0" izz="1"/></inertial></link>
            <joint name="j" type="continuous"><parent link="base"/><child link="arm"/></joint></robot>"#;
        let doc = parse_urdf(text).unwrap();
        assert_eq!(doc.links.len(), 2);
        assert_eq!(doc.joints.len(), 1);
        assert_eq!(doc.root_link().name, "base");
        let tree = to_tree(&doc, Base::Fixed).unwrap();
        assert_eq!(tree.n_bodies(), 1);
        assert_eq!(*tree.joint(1), JointModel::revolute(Vector3::x()));
    }

    #[test]
    fn warnings_and_normalized_axis() {
        let doc = parse_urdf(&three_link("revolute")).unwrap();
        assert_eq!(doc.warnings, vec!["joint/limit", "link/visual", "material"]);
        assert_relative_eq!(doc.joints[0].axis, Vector3::z());
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_urdf("<robot><link name='a'>"), Err(UrdfError::MalformedXml(_))));
        let cyc = r#"<robot><link name="a"/><link name="b"/><link name="c"/>
            <joint name="x" type="fixed"><parent link="a"/><child link="b"/></joint>
            <joint name="y" type="fixed"><parent link="c"/><child link="b"/></joint></robot>"#;
        assert_eq!(parse_urdf(cyc), Err(UrdfError::CyclicJointGraph));
        let ring = r#"<robot><link name="a"/><link name="b"/><link name="c"/>
            <joint name="x" type="fixed"><parent link="b"/><child link="c"/></joint>
            <joint name="y" type="fixed"><parent link="c"/><child link="b"/></joint></robot>"#;
        assert_eq!(parse_urdf(ring), Err(UrdfError::CyclicJointGraph));
        let two = r#"<robot><link name="a"/><link name="b"/></robot>"#;
        assert_eq!(parse_urdf(two), Err(UrdfError::MultipleRoots(vec!["a".into(), "b".into()])));
        let planar = three_link("planar");
        assert!(matches!(parse_urdf(&planar), Err(UrdfError::UnsupportedJointType { kind, .. }) if kind == "planar"));
        let unknown = r#"<robot><link name="a"/>
            <joint name="x" type="fixed"><parent link="a"/><child link="zz"/></joint></robot>"#;
        assert!(matches!(parse_urdf(unknown), Err(UrdfError::UnknownLink { .. })));
    }

    #[test]
    fn fixed_joint_merges_into_parent() {
        let doc = parse_urdf(&three_link("fixed")).unwrap();
        assert_eq!(doc.fixed_joints().count(), 1);
        let tree = to_tree(&doc, Base::Fixed).unwrap();
        assert_eq!(tree.n_bodies(), 1);

        // oracle: explicit 6x6 congruence of c's inertia into b's frame
        let hb = doc.links[1].spatial_inertia().to_matrix();
        let hc = doc.links[2].spatial_inertia().to_matrix();
        let x = doc.joints[1].origin.transform().to_motion_matrix();
        let expected = hb + x.transpose() * hc * x;
        assert!((tree.inertia_matrix(1) - expected).amax() < 1e-12 * expected.amax());
        assert_relative_eq!(tree.link(1).inertia.mass, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn revolute_chain_keeps_placements() {
        let doc = parse_urdf(&three_link("prismatic")).unwrap();
        let tree = to_tree(&doc, Base::Fixed).unwrap();
        assert_eq!(tree.parents(), vec![0, 1]);
        assert_eq!(*tree.joint(2), JointModel::prismatic(Vector3::y()));
        let p = doc.joints[1].origin.transform();
        assert_relative_eq!(tree.link(2).placement.rotation, p.rotation, epsilon = 1e-15);
        assert_relative_eq!(tree.link(2).placement.translation, Vector3::new(0.3, 0.1, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn floating_base_and_mass_conservation() {
        let doc = parse_urdf(&three_link("fixed")).unwrap();
        let tree = to_tree(&doc, Base::Floating).unwrap();
        assert_eq!(tree.n_bodies(), 2);
        assert_eq!(*tree.joint(1), JointModel::FreeFlyer);
        let total: f64 = tree.links().iter().map(|l| l.inertia.mass).sum();
        assert_relative_eq!(total, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn all_fixed_document_is_one_body() {
        let text = three_link("fixed").replace(r#"type="revolute""#, r#"type="fixed""#);
        let doc = parse_urdf(&text).unwrap();
        let tree = to_tree(&doc, Base::Floating).unwrap();
        assert_eq!(tree.n_bodies(), 1);
        assert_relative_eq!(tree.link(1).inertia.mass, 4.0, max_relative = 1e-12);
        assert_eq!(to_tree(&doc, Base::Fixed), Err(ModelError::EmptyTree.into()));
    }

    #[test]
    fn massless_moving_body_is_rejected() {
        let text = r#"<robot><link name="a"/><link name="b"/>
            <joint name="x" type="revolute"><parent link="a"/><child link="b"/></joint></robot>"#;
        let doc = parse_urdf(text).unwrap();
        assert_eq!(to_tree(&doc, Base::Fixed), Err(UrdfError::NonPositiveMass("b".into()).into()));
    }

    #[test]
    fn deep_tree_numbering_is_topological() {
        let mut text = String::from(r#"<robot><link name="l0">"#);
        text.push_str(&inertial(1.0, "0 0 0"));
        text.push_str("</link>");
        let parents = [0, 0, 1, 1, 2, 4, 4];
        for (k, p) in parents.iter().enumerate() {
            let c = k + 1;
            text.push_str(&format!(r#"<link name="l{c}">{}</link>"#, inertial(1.0, "0 0 0")));
            let ty = if c % 3 == 0 { "fixed" } else { "revolute" };
            text.push_str(&format!(
                r#"<joint name="j{c}" type="{ty}"><parent link="l{p}"/><child link="l{c}"/><origin xyz="0 0 1"/></joint>"#
            ));
        }
        text.push_str("</robot>");
        let tree = to_tree(&parse_urdf(&text).unwrap(), Base::Floating).unwrap();
        assert_eq!(tree.n_bodies(), 1 + 5);
        let total: f64 = tree.links().iter().map(|l| l.inertia.mass).sum();
        assert_relative_eq!(total, 8.0, max_relative = 1e-12);
        let names: Vec<&str> = tree.links().iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names, vec!["l0", "l1", "l4", "l7", "l2", "l5"]);
    }
}
