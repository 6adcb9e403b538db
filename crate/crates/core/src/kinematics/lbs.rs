//! Linear blend skinning over a joint hierarchy.
//!
//! Parameters are a root rigid pose followed by one angle per hinge joint.
//! Joint `j` has global transform `G_j = G_parent * L_j * Rot(axis_j, a_j)`
//! and skins vertices with `G_j * B_j^-1`, where `B_j` is `G_j` at zero
//! angles, so zero parameters reproduce the rest mesh. The root rigid
//! transform is applied last.

use std::path::Path;

use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use super::{KinematicsError, PoseJacobians, PoseModel, PosedMesh};
use crate::mesh::ControlMesh;
use crate::rotation::{rotation_matrix, skew, RotationWithJacobian};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// General 3D affine map `x -> linear * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Affine {
    pub fn identity() -> Self {
        Self {
            linear: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Self {
            linear: Matrix3::identity(),
            translation: t,
        }
    }

    /// From a row-major 3x4 matrix `[R | t]`.
    pub fn from_row_major(m: &[f64; 12]) -> Self {
        Self {
            linear: Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]),
            translation: Vector3::new(m[3], m[7], m[11]),
        }
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let l = &self.linear;
        let t = &self.translation;
        [
            l[(0, 0)], l[(0, 1)], l[(0, 2)], t.x,
            l[(1, 0)], l[(1, 1)], l[(1, 2)], t.y,
            l[(2, 0)], l[(2, 1)], l[(2, 2)], t.z,
        ]
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine {
            linear: self.linear * other.linear,
            translation: self.linear * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Option<Affine> {
        let inv = self.linear.try_inverse()?;
        Some(Affine {
            linear: inv,
            translation: -(inv * self.translation),
        })
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.linear * p + self.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Transform relative to the parent joint (or world for roots).
    pub rest: Affine,
    /// Hinge axis in the joint's local frame; `None` for a fixed joint.
    pub axis: Option<Vector3<f64>>,
}

/// How posed vertex normals are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalMode {
    /// Rest normals pushed through the blended linear parts, then renormalized.
    #[default]
    Blended,
    /// Area-weighted normals of the posed geometry.
    Recomputed,
}

#[derive(Debug, Clone)]
pub struct SkinnedModel {
    mesh: ControlMesh,
    joints: Vec<Joint>,
    /// Parents before children.
    order: Vec<usize>,
    /// Parameter index of each hinge joint.
    parameter_of: Vec<Option<usize>>,
    /// Hinge joints on the path from the root to each joint, inclusive.
    hinge_ancestors: Vec<Vec<usize>>,
    inverse_bind: Vec<Affine>,
    weights: Vec<Vec<(usize, f64)>>,
    normal_mode: NormalMode,
    parameter_count: usize,
}

impl SkinnedModel {
    /// `weights` holds `(vertex, joint, weight)` triples. `layout` lists the
    /// hinge joints in parameter order; `None` uses joint order.
    pub fn new(
        mesh: ControlMesh,
        joints: Vec<Joint>,
        weights: &[(usize, usize, f64)],
        layout: Option<&[String]>,
    ) -> Result<Self, KinematicsError> {
        let order = topological_order(&joints)?;

        let hinges: Vec<usize> = (0..joints.len()).filter(|&j| joints[j].axis.is_some()).collect();
        let mut parameter_of = vec![None; joints.len()];
        match layout {
            None => {
                for (k, &j) in hinges.iter().enumerate() {
                    parameter_of[j] = Some(6 + k);
                }
            }
            Some(names) => {
                if names.len() != hinges.len() {
                    return Err(KinematicsError::Layout(format!(
                        "{} joint parameters listed, model has {} hinge joints",
                        names.len(),
                        hinges.len()
                    )));
                }
                for (k, name) in names.iter().enumerate() {
                    let j = joints
                        .iter()
                        .position(|x| &x.name == name)
                        .ok_or_else(|| KinematicsError::UnknownJoint(name.clone()))?;
                    if joints[j].axis.is_none() {
                        return Err(KinematicsError::Layout(format!("joint `{name}` has no axis")));
                    }
                    if parameter_of[j].is_some() {
                        return Err(KinematicsError::Layout(format!("joint `{name}` listed twice")));
                    }
                    parameter_of[j] = Some(6 + k);
                }
            }
        }

        let mut hinge_ancestors = vec![Vec::new(); joints.len()];
        let mut bind = vec![Affine::identity(); joints.len()];
        for &j in &order {
            let joint = &joints[j];
            let (mut anc, parent_bind) = match joint.parent {
                Some(p) => (hinge_ancestors[p].clone(), bind[p]),
                None => (Vec::new(), Affine::identity()),
            };
            if joint.axis.is_some() {
                anc.push(j);
            }
            hinge_ancestors[j] = anc;
            bind[j] = parent_bind.compose(&joint.rest);
        }
        let inverse_bind = bind
            .iter()
            .zip(&joints)
            .map(|(b, j)| b.inverse().ok_or_else(|| KinematicsError::SingularRest(j.name.clone())))
            .collect::<Result<Vec<_>, _>>()?;

        let mut per_vertex = vec![Vec::new(); mesh.vertex_count()];
        for &(vertex, joint, weight) in weights {
            if vertex >= mesh.vertex_count() {
                return Err(KinematicsError::VertexOutOfRange {
                    vertex,
                    count: mesh.vertex_count(),
                });
            }
            if joint >= joints.len() {
                return Err(KinematicsError::JointOutOfRange {
                    joint,
                    count: joints.len(),
                });
            }
            if weight < 0.0 {
                return Err(KinematicsError::NegativeWeight { vertex, joint, weight });
            }
            if weight > 0.0 {
                per_vertex[vertex].push((joint, weight));
            }
        }
        for (vertex, w) in per_vertex.iter().enumerate() {
            let sum: f64 = w.iter().map(|x| x.1).sum();
            if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(KinematicsError::WeightSum { vertex, sum });
            }
        }

        let parameter_count = 6 + hinges.len();
        Ok(Self {
            mesh,
            joints,
            order,
            parameter_of,
            hinge_ancestors,
            inverse_bind,
            weights: per_vertex,
            normal_mode: NormalMode::Blended,
            parameter_count,
        })
    }

    pub fn with_normal_mode(mut self, mode: NormalMode) -> Self {
        self.normal_mode = mode;
        self
    }

    pub fn normal_mode(&self) -> NormalMode {
        self.normal_mode
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    /// Names of the hinge joints in parameter order.
    pub fn joint_parameter_names(&self) -> Vec<String> {
        let mut named: Vec<(usize, &str)> = self
            .parameter_of
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|p| (p, self.joints[j].name.as_str())))
            .collect();
        named.sort_unstable();
        named.into_iter().map(|(_, n)| n.to_string()).collect()
    }

    /// Global joint transforms before the root rigid pose.
    fn joint_transforms(&self, theta: &DVector<f64>) -> Vec<Affine> {
        let mut global = vec![Affine::identity(); self.joints.len()];
        for &j in &self.order {
            let joint = &self.joints[j];
            let mut local = joint.rest;
            if let (Some(axis), Some(p)) = (joint.axis, self.parameter_of[j]) {
                let rot = rotation_matrix(&(axis.normalize() * theta[p]));
                local.linear *= rot;
            }
            global[j] = match joint.parent {
                Some(parent) => global[parent].compose(&local),
                None => local,
            };
        }
        global
    }

    fn pose_impl(&self, theta: &DVector<f64>, with_jacobians: bool) -> Result<PosedMesh<'_>, KinematicsError> {
        self.check_dimension(theta)?;
        let p_count = self.parameter_count;
        let global = self.joint_transforms(theta);
        let skin: Vec<Affine> = global
            .iter()
            .zip(&self.inverse_bind)
            .map(|(g, b)| g.compose(b))
            .collect();

        // Per hinge joint: d/da of a point already in posed space is
        // D (y - o) with D = A [axis]x A^-1.
        let hinge_frames: Vec<Option<(Matrix3<f64>, Vector3<f64>)>> = self
            .joints
            .iter()
            .enumerate()
            .map(|(j, joint)| {
                let axis = joint.axis?;
                let a = global[j].linear;
                let inv = a.try_inverse()?;
                Some((a * skew(&axis.normalize()) * inv, global[j].translation))
            })
            .collect();

        let root = RotationWithJacobian::new(&Vector3::new(theta[3], theta[4], theta[5]));
        let t = Vector3::new(theta[0], theta[1], theta[2]);

        let n = self.mesh.vertex_count();
        let mut positions = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut d_pos = Vec::new();
        let mut d_nrm = Vec::new();

        for i in 0..n {
            let x = self.mesh.positions()[i];
            let rest_n = self.mesh.normals()[i];
            let mut y = Vector3::zeros();
            let mut m = Vector3::zeros();
            for &(j, w) in &self.weights[i] {
                y += skin[j].apply(&x) * w;
                m += skin[j].linear * rest_n * w;
            }
            let m_len = m.norm();
            if self.normal_mode == NormalMode::Blended && !(m_len > 0.0) {
                return Err(KinematicsError::DegenerateNormal(i));
            }
            let m_hat = m / m_len;
            positions.push(root.rotation * y + t);
            normals.push(root.rotation * m_hat);

            if with_jacobians {
                let mut jp = Matrix3xX::zeros(p_count);
                let mut jn = Matrix3xX::zeros(p_count);
                jp.fixed_columns_mut::<3>(0).fill_with_identity();
                jp.fixed_columns_mut::<3>(3).copy_from(&root.d_rotate(&y));
                jn.fixed_columns_mut::<3>(3).copy_from(&root.d_rotate(&m_hat));
                let project = (Matrix3::identity() - m_hat * m_hat.transpose()) / m_len;
                for &(j, w) in &self.weights[i] {
                    let yj = skin[j].apply(&x);
                    let mj = skin[j].linear * rest_n;
                    for &k in &self.hinge_ancestors[j] {
                        let (d, o) = hinge_frames[k].expect("hinge joint has a frame");
                        let col = self.parameter_of[k].expect("hinge joint has a parameter");
                        let dy = root.rotation * (d * (yj - o)) * w;
                        let dm = root.rotation * (project * (d * mj)) * w;
                        let mut c = jp.column_mut(col);
                        c += dy;
                        let mut c = jn.column_mut(col);
                        c += dm;
                    }
                }
                d_pos.push(jp);
                d_nrm.push(jn);
            }
        }

        let mut jacobians = with_jacobians.then_some(PoseJacobians {
            positions: d_pos,
            normals: d_nrm,
        });

        if self.normal_mode == NormalMode::Recomputed {
            let (rn, rj) = recompute_normals(
                &positions,
                jacobians.as_ref().map(|j| j.positions.as_slice()),
                self.mesh.triangles(),
                p_count,
            );
            normals = rn;
            if let (Some(j), Some(rj)) = (jacobians.as_mut(), rj) {
                j.normals = rj;
            }
        }

        Ok(PosedMesh {
            mesh: &self.mesh,
            positions,
            normals,
            jacobians,
            parameter_count: p_count,
        })
    }

    pub fn to_document(&self) -> SkinnedModelDocument {
        let mut weights = Vec::new();
        for (v, w) in self.weights.iter().enumerate() {
            for &(j, x) in w {
                weights.push((v, j, x));
            }
        }
        SkinnedModelDocument {
            mesh: MeshDocument {
                positions: self.mesh.positions().iter().map(|p| [p.x, p.y, p.z]).collect(),
                normals: self.mesh.normals().iter().map(|p| [p.x, p.y, p.z]).collect(),
                triangles: self.mesh.triangles().to_vec(),
            },
            joints: self
                .joints
                .iter()
                .map(|j| JointDocument {
                    name: j.name.clone(),
                    parent: j.parent.map(|p| self.joints[p].name.clone()),
                    rest: j.rest.to_row_major(),
                    axis: j.axis.map(|a| [a.x, a.y, a.z]),
                })
                .collect(),
            weights,
            layout: Some(LayoutDocument {
                root: "rigid6".into(),
                joints: self.joint_parameter_names(),
            }),
            normal_mode: self.normal_mode,
        }
    }

    pub fn from_document(doc: &SkinnedModelDocument) -> Result<Self, KinematicsError> {
        let mesh = ControlMesh::new(
            doc.mesh.positions.iter().map(|p| Vector3::from(*p)).collect(),
            doc.mesh.normals.iter().map(|p| Vector3::from(*p)).collect(),
            doc.mesh.triangles.clone(),
        )?;
        let names: Vec<&str> = doc.joints.iter().map(|j| j.name.as_str()).collect();
        let joints = doc
            .joints
            .iter()
            .map(|j| {
                let parent = match &j.parent {
                    None => None,
                    Some(p) => Some(
                        names
                            .iter()
                            .position(|n| n == p)
                            .ok_or_else(|| KinematicsError::UnknownJoint(p.clone()))?,
                    ),
                };
                Ok(Joint {
                    name: j.name.clone(),
                    parent,
                    rest: Affine::from_row_major(&j.rest),
                    axis: j.axis.map(Vector3::from),
                })
            })
            .collect::<Result<Vec<_>, KinematicsError>>()?;
        if let Some(layout) = &doc.layout {
            if layout.root != "rigid6" {
                return Err(KinematicsError::Layout(format!(
                    "unsupported root parameterization `{}`",
                    layout.root
                )));
            }
        }
        let model = Self::new(
            mesh,
            joints,
            &doc.weights,
            doc.layout.as_ref().map(|l| l.joints.as_slice()),
        )?;
        Ok(model.with_normal_mode(doc.normal_mode))
    }

    pub fn from_json_str(text: &str) -> Result<Self, KinematicsError> {
        Self::from_document(&serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KinematicsError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }
}

impl PoseModel for SkinnedModel {
    fn mesh(&self) -> &ControlMesh {
        &self.mesh
    }

    fn parameter_count(&self) -> usize {
        self.parameter_count
    }

    fn pose(&self, theta: &DVector<f64>, with_jacobians: bool) -> Result<PosedMesh<'_>, KinematicsError> {
        self.pose_impl(theta, with_jacobians)
    }
}

fn topological_order(joints: &[Joint]) -> Result<Vec<usize>, KinematicsError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; joints.len()];
    let mut order = Vec::with_capacity(joints.len());
    for start in 0..joints.len() {
        // Walk up to the first visited ancestor, then emit top-down.
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(j) = cur {
            if j >= joints.len() {
                return Err(KinematicsError::JointOutOfRange {
                    joint: j,
                    count: joints.len(),
                });
            }
            match marks[j] {
                Mark::Done => break,
                Mark::Active => return Err(KinematicsError::Cycle(joints[j].name.clone())),
                Mark::New => {
                    marks[j] = Mark::Active;
                    path.push(j);
                    cur = joints[j].parent;
                }
            }
        }
        for &j in path.iter().rev() {
            marks[j] = Mark::Done;
            order.push(j);
        }
    }
    Ok(order)
}

/// Area-weighted vertex normals of posed geometry, with optional Jacobians
/// propagated from the position Jacobians.
pub fn recompute_normals(
    positions: &[Vector3<f64>],
    d_positions: Option<&[Matrix3xX<f64>]>,
    triangles: &[[usize; 3]],
    parameter_count: usize,
) -> (Vec<Vector3<f64>>, Option<Vec<Matrix3xX<f64>>>) {
    let n = positions.len();
    let mut acc = vec![Vector3::zeros(); n];
    let mut d_acc = d_positions.map(|_| vec![Matrix3xX::<f64>::zeros(parameter_count); n]);
    for &[a, b, c] in triangles {
        let e1 = positions[b] - positions[a];
        let e2 = positions[c] - positions[a];
        let f = e1.cross(&e2);
        acc[a] += f;
        acc[b] += f;
        acc[c] += f;
        if let (Some(dp), Some(d_acc)) = (d_positions, d_acc.as_mut()) {
            let de1 = &dp[b] - &dp[a];
            let de2 = &dp[c] - &dp[a];
            let df = skew(&e1) * de2 - skew(&e2) * de1;
            d_acc[a] += &df;
            d_acc[b] += &df;
            d_acc[c] += &df;
        }
    }
    let normals: Vec<_> = acc.iter().map(|v| v.normalize()).collect();
    let jac = d_acc.map(|d| {
        d.into_iter()
            .zip(&acc)
            .map(|(dv, v)| {
                let len = v.norm();
                let h = v / len;
                (Matrix3::identity() - h * h.transpose()) / len * dv
            })
            .collect()
    });
    (normals, jac)
}

/// Angular gap between blended and recomputed posed normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalDivergence {
    pub max_radians: f64,
    pub mean_radians: f64,
}

pub fn normal_divergence(model: &SkinnedModel, theta: &DVector<f64>) -> Result<NormalDivergence, KinematicsError> {
    let blended_model = model.clone().with_normal_mode(NormalMode::Blended);
    let blended = blended_model.pose_impl(theta, false)?;
    let (recomputed, _) = recompute_normals(&blended.positions, None, model.mesh.triangles(), 0);
    let angles: Vec<f64> = blended
        .normals
        .iter()
        .zip(&recomputed)
        .map(|(a, b)| a.dot(b).clamp(-1.0, 1.0).acos())
        .collect();
    let max_radians = angles.iter().copied().fold(0.0, f64::max);
    let mean_radians = angles.iter().sum::<f64>() / angles.len().max(1) as f64;
    Ok(NormalDivergence {
        max_radians,
        mean_radians,
    })
}

/// JSON form of a skinned model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkinnedModelDocument {
    pub mesh: MeshDocument,
    pub joints: Vec<JointDocument>,
    /// `(vertex, joint, weight)` triples; indices are 0-based.
    pub weights: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub layout: Option<LayoutDocument>,
    #[serde(default)]
    pub normal_mode: NormalMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDocument {
    pub positions: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDocument {
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
    /// Row-major 3x4 `[R | t]` relative to the parent.
    pub rest: [f64; 12],
    #[serde(default)]
    pub axis: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutDocument {
    /// Root parameterization; only `rigid6` is supported.
    pub root: String,
    /// Hinge joints in parameter order, after the six root parameters.
    pub joints: Vec<String>,
}
