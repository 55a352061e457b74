//! Declarative description of a vehicle-manipulator system and its file
//! format.
//!
//! A model is a moving base (floating, planar, or fixed) carrying a serial
//! chain of links connected by 1-DoF joints. Models load from a strict JSON
//! document: unknown keys are errors, inertias must be symmetric positive
//! semi-definite with an isotropic mass block, and rotations must be
//! orthonormal (row-major 3×3) or given as axis-angle vectors. All quantities
//! are SI: kilograms, meters, seconds, radians.

use crate::joints::{JointConfig, JointKind};
use crate::liegroup::{exp_so3, hat3, rotation_defect, Pose};
use nalgebra::{DVector, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("model invariant violated at {field}: {message}")]
    Invariant { field: String, message: String },
}

fn invariant(field: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invariant {
        field: field.into(),
        message: message.into(),
    }
}

/// Whether the model carries a potential-energy term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Potential {
    None,
    UniformGravity,
}

/// One link of the chain: its joint (relative to the parent), the pose of the
/// joint frame in the parent frame at zero configuration, and the link's 6×6
/// spatial inertia expressed in the link frame.
#[derive(Clone, Debug)]
pub struct Link {
    pub name: String,
    pub joint: JointKind,
    pub zero_pose: Pose,
    pub inertia: Matrix6<f64>,
}

/// A vehicle-manipulator system: base kind and inertia, serial chain, end
/// effector frame, and the spatial gravity vector.
#[derive(Clone, Debug)]
pub struct VmsModel {
    pub base_kind: JointKind,
    /// Spatial inertia of the base body in the base frame.
    pub base_inertia: Matrix6<f64>,
    pub links: Vec<Link>,
    /// Pose of the end-effector frame relative to the last link (or to the
    /// base when the chain is empty).
    pub ee_zero_pose: Pose,
    /// Gravitational acceleration in the spatial frame (m/s²).
    pub gravity: Vector3<f64>,
}

impl VmsModel {
    /// Number of chain joints.
    pub fn n(&self) -> usize {
        self.links.len()
    }

    /// Base degrees of freedom (6 floating, 3 planar, 0 fixed).
    pub fn base_dof(&self) -> usize {
        self.base_kind.dof()
    }

    pub fn base_s_matrix(&self) -> nalgebra::DMatrix<f64> {
        self.base_kind.s_matrix()
    }

    pub fn potential(&self) -> Potential {
        if self.gravity.norm() > 0.0 {
            Potential::UniformGravity
        } else {
            Potential::None
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<VmsModel, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        VmsModel::from_json(&text, &path.display().to_string())
    }

    /// Parse and validate a model from JSON text; `origin` names the source
    /// in error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<VmsModel, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|source| ModelError::Parse {
            path: origin.to_string(),
            source,
        })?;
        file.into_model()
    }

    /// Serialize the model to its canonical JSON form (inertias as full 6×6
    /// matrices, rotations as row-major 3×3). Numbers round-trip exactly, so
    /// `from_json(to_json_string(m))` reproduces `m` bit for bit.
    pub fn to_json_string(&self) -> String {
        let file = ModelFile::from_model(self);
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }
}

/// Dynamic state of a VMS: base configuration `h`, joint positions `q`, and
/// the conjugate momenta — base momentum `p` (dimension b) and joint momentum
/// `π` (dimension n).
///
/// The same container holds the inertially-decoupled image `(p̂, q, π̂)`;
/// which interpretation applies is determined by the formulation a function
/// implements, and the two are related by `p̂ = p`, `π̂ = π − Aᵀp`.
#[derive(Clone, Debug)]
pub struct State {
    pub h: JointConfig,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub pi: DVector<f64>,
}

impl State {
    /// The rest state at zero configuration.
    pub fn zero(model: &VmsModel) -> State {
        State {
            h: JointConfig::zero(&model.base_kind),
            q: DVector::zeros(model.n()),
            p: DVector::zeros(model.base_dof()),
            pi: DVector::zeros(model.n()),
        }
    }
}

/// Mass and center of mass encoded in a 6×6 spatial inertia: the mass block
/// is `m·I₃` and the coupling block is `m·ĉ`. The center of mass is read
/// from the skew part of the coupling block.
pub fn mass_and_com(inertia: &Matrix6<f64>) -> (f64, Vector3<f64>) {
    let mass_block: Matrix3<f64> = inertia.fixed_view::<3, 3>(3, 3).into();
    let m = mass_block.trace() / 3.0;
    if m <= 0.0 {
        return (m.max(0.0), Vector3::zeros());
    }
    let coupling: Matrix3<f64> = inertia.fixed_view::<3, 3>(0, 3).into();
    let skew = 0.5 * (coupling - coupling.transpose());
    let mc = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
    (m, mc / m)
}

/// Assemble a 6×6 spatial inertia from mass, center of mass (in the link
/// frame), and the rotational inertia about the center of mass, using the
/// parallel-axis theorem:
///
/// `ℐ = [[I_c + m(‖c‖²I − ccᵀ), m·ĉ], [m·ĉᵀ, m·I]]`.
pub fn spatial_inertia_from_primitives(
    mass: f64,
    com: &Vector3<f64>,
    rot_inertia_at_com: &Matrix3<f64>,
) -> Result<Matrix6<f64>, ModelError> {
    if mass < 0.0 || mass.is_nan() {
        return Err(invariant("primitives.mass", "mass must be non-negative"));
    }
    let asym = (rot_inertia_at_com - rot_inertia_at_com.transpose()).abs().max();
    if asym > 1e-9 * rot_inertia_at_com.abs().max().max(1.0) {
        return Err(invariant(
            "primitives.rot_inertia",
            format!("must be symmetric (asymmetry {asym:.2e})"),
        ));
    }
    let c_hat = hat3(com);
    let c2 = com.norm_squared();
    let rot = rot_inertia_at_com + mass * (c2 * Matrix3::identity() - com * com.transpose());
    let mut m6 = Matrix6::zeros();
    m6.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    m6.fixed_view_mut::<3, 3>(0, 3).copy_from(&(mass * c_hat));
    m6.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(mass * c_hat.transpose()));
    m6.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(mass * Matrix3::identity()));
    Ok(m6)
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    base: BaseFile,
    links: Vec<LinkFile>,
    end_effector: EndEffectorFile,
    gravity: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaseFile {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    inertia: Option<[[f64; 6]; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    primitives: Option<PrimitivesFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitivesFile {
    mass: f64,
    com: [f64; 3],
    rot_inertia: [[f64; 3]; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    name: String,
    joint: JointFile,
    zero_pose: PoseFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    inertia: Option<[[f64; 6]; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    primitives: Option<PrimitivesFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    rotation: RotationFile,
    translation: [f64; 3],
}

/// A rotation is either a row-major 3×3 matrix or an axis-angle vector whose
/// norm is the rotation angle.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RotationFile {
    Matrix([[f64; 3]; 3]),
    AxisAngle(AxisAngleFile),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisAngleFile {
    axis_angle: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndEffectorFile {
    zero_pose: PoseFile,
}

impl ModelFile {
    fn into_model(self) -> Result<VmsModel, ModelError> {
        let base_kind = match self.base.kind.as_str() {
            "floating" => JointKind::Floating,
            "planar" => JointKind::Planar,
            "fixed" => JointKind::Fixed,
            other => {
                return Err(invariant(
                    "base.kind",
                    format!("must be one of floating, planar, fixed; got {other:?}"),
                ));
            }
        };
        let base_inertia = match (&self.base.inertia, &self.base.primitives, &base_kind) {
            (None, None, JointKind::Fixed) => Matrix6::zeros(),
            (inertia, primitives, _) => {
                resolve_inertia(inertia, primitives, "base")?
            }
        };

        let mut links = Vec::with_capacity(self.links.len());
        for (index, link) in self.links.iter().enumerate() {
            let field = format!("links[{index}] ({:?})", link.name);
            let joint = link.joint.to_kind(&field)?;
            if !matches!(
                joint,
                JointKind::Revolute { .. } | JointKind::Prismatic { .. }
            ) {
                return Err(invariant(
                    format!("{field}.joint.kind"),
                    "chain joints must be 1-DoF (revolute or prismatic)",
                ));
            }
            let zero_pose = link.zero_pose.to_pose(&format!("{field}.zero_pose"))?;
            let inertia = resolve_inertia(&link.inertia, &link.primitives, &field)?;
            links.push(Link {
                name: link.name.clone(),
                joint,
                zero_pose,
                inertia,
            });
        }

        let ee_zero_pose = self
            .end_effector
            .zero_pose
            .to_pose("end_effector.zero_pose")?;
        let gravity = Vector3::from_column_slice(&self.gravity);
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(invariant("gravity", "must be finite"));
        }

        Ok(VmsModel {
            base_kind,
            base_inertia,
            links,
            ee_zero_pose,
            gravity,
        })
    }

    fn from_model(model: &VmsModel) -> ModelFile {
        let matrix6 = |m: &Matrix6<f64>| {
            let mut rows = [[0.0; 6]; 6];
            for (i, row) in rows.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = m[(i, j)];
                }
            }
            rows
        };
        let pose_file = |p: &Pose| {
            let mut rows = [[0.0; 3]; 3];
            for (i, row) in rows.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = p.rotation[(i, j)];
                }
            }
            PoseFile {
                rotation: RotationFile::Matrix(rows),
                translation: [p.translation.x, p.translation.y, p.translation.z],
            }
        };
        ModelFile {
            base: BaseFile {
                kind: model.base_kind.name().to_string(),
                inertia: Some(matrix6(&model.base_inertia)),
                primitives: None,
            },
            links: model
                .links
                .iter()
                .map(|link| {
                    let (axis, point) = match &link.joint {
                        JointKind::Revolute { axis, point } => {
                            (Some([axis.x, axis.y, axis.z]), Some([point.x, point.y, point.z]))
                        }
                        JointKind::Prismatic { axis } => {
                            (Some([axis.x, axis.y, axis.z]), None)
                        }
                        _ => (None, None),
                    };
                    LinkFile {
                        name: link.name.clone(),
                        joint: JointFile {
                            kind: link.joint.name().to_string(),
                            axis,
                            point,
                        },
                        zero_pose: pose_file(&link.zero_pose),
                        inertia: Some(matrix6(&link.inertia)),
                        primitives: None,
                    }
                })
                .collect(),
            end_effector: EndEffectorFile {
                zero_pose: pose_file(&model.ee_zero_pose),
            },
            gravity: [model.gravity.x, model.gravity.y, model.gravity.z],
        }
    }
}

impl JointFile {
    fn to_kind(&self, field: &str) -> Result<JointKind, ModelError> {
        let unit_axis = |axis: &Option<[f64; 3]>| -> Result<Vector3<f64>, ModelError> {
            let raw = axis.ok_or_else(|| {
                invariant(format!("{field}.joint.axis"), "axis is required")
            })?;
            let v = Vector3::from_column_slice(&raw);
            let norm = v.norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(invariant(
                    format!("{field}.joint.axis"),
                    format!("must be a unit vector (norm {norm})"),
                ));
            }
            Ok(v / norm)
        };
        match self.kind.as_str() {
            "revolute" => Ok(JointKind::Revolute {
                axis: unit_axis(&self.axis)?,
                point: self
                    .point
                    .map(|p| Vector3::from_column_slice(&p))
                    .unwrap_or_else(Vector3::zeros),
            }),
            "prismatic" => {
                if self.point.is_some() {
                    return Err(invariant(
                        format!("{field}.joint.point"),
                        "prismatic joints do not take a point",
                    ));
                }
                Ok(JointKind::Prismatic {
                    axis: unit_axis(&self.axis)?,
                })
            }
            "planar" => Ok(JointKind::Planar),
            "floating" => Ok(JointKind::Floating),
            "fixed" => Ok(JointKind::Fixed),
            other => Err(invariant(
                format!("{field}.joint.kind"),
                format!("unknown joint kind {other:?}"),
            )),
        }
    }
}

impl PoseFile {
    fn to_pose(&self, field: &str) -> Result<Pose, ModelError> {
        let rotation = match &self.rotation {
            RotationFile::Matrix(rows) => {
                let r = Matrix3::from_fn(|i, j| rows[i][j]);
                let defect = rotation_defect(&r);
                if defect > 1e-6 {
                    return Err(invariant(
                        format!("{field}.rotation"),
                        format!("matrix is not orthonormal (defect {defect:.2e})"),
                    ));
                }
                // Snap to the nearest rotation so downstream invariants hold
                // to machine precision regardless of input rounding.
                polar_rotation(&r)
            }
            RotationFile::AxisAngle(aa) => {
                exp_so3(&Vector3::from_column_slice(&aa.axis_angle))
            }
        };
        let translation = Vector3::from_column_slice(&self.translation);
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(invariant(
                format!("{field}.translation"),
                "must be finite",
            ));
        }
        Ok(Pose::new(rotation, translation))
    }
}

/// Nearest rotation matrix in the Frobenius sense, via SVD.
fn polar_rotation(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

fn resolve_inertia(
    inertia: &Option<[[f64; 6]; 6]>,
    primitives: &Option<PrimitivesFile>,
    field: &str,
) -> Result<Matrix6<f64>, ModelError> {
    let raw = match (inertia, primitives) {
        (Some(rows), None) => Matrix6::from_fn(|i, j| rows[i][j]),
        (None, Some(p)) => spatial_inertia_from_primitives(
            p.mass,
            &Vector3::from_column_slice(&p.com),
            &Matrix3::from_fn(|i, j| p.rot_inertia[i][j]),
        )
        .map_err(|e| match e {
            ModelError::Invariant {
                field: subfield,
                message,
            } => invariant(format!("{field}.{subfield}"), message),
            other => other,
        })?,
        (Some(_), Some(_)) => {
            return Err(invariant(
                format!("{field}.inertia"),
                "give either inertia or primitives, not both",
            ));
        }
        (None, None) => {
            return Err(invariant(
                format!("{field}.inertia"),
                "one of inertia or primitives is required",
            ));
        }
    };
    validate_inertia(&raw, field)
}

/// Validate a spatial inertia: finite, symmetric (then symmetrized), positive
/// semi-definite, with an isotropic mass block `m·I₃`, `m ≥ 0`.
fn validate_inertia(raw: &Matrix6<f64>, field: &str) -> Result<Matrix6<f64>, ModelError> {
    if !raw.iter().all(|x| x.is_finite()) {
        return Err(invariant(format!("{field}.inertia"), "must be finite"));
    }
    let scale = raw.abs().max().max(1.0);
    let asym = (raw - raw.transpose()).abs().max();
    if asym > 1e-9 * scale {
        return Err(invariant(
            format!("{field}.inertia"),
            format!("must be symmetric (asymmetry {asym:.2e})"),
        ));
    }
    let m6 = 0.5 * (raw + raw.transpose());
    let mass_block: Matrix3<f64> = m6.fixed_view::<3, 3>(3, 3).into();
    let m = mass_block.trace() / 3.0;
    if m < 0.0 {
        return Err(invariant(
            format!("{field}.inertia"),
            format!("mass must be non-negative (got {m})"),
        ));
    }
    let iso = (mass_block - m * Matrix3::identity()).abs().max();
    if iso > 1e-9 * m.max(1.0) {
        return Err(invariant(
            format!("{field}.inertia"),
            format!("mass block must be m·I₃ (deviation {iso:.2e})"),
        ));
    }
    let eigenvalues = m6.symmetric_eigen().eigenvalues;
    let min_eig = eigenvalues.min();
    if min_eig < -1e-9 * scale {
        return Err(invariant(
            format!("{field}.inertia"),
            format!("must be positive semi-definite (min eigenvalue {min_eig:.2e})"),
        ));
    }
    Ok(m6)
}
