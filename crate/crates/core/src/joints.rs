//! Joint models: each joint constrains the relative motion of two frames to a
//! Lie subgroup of SE(3).
//!
//! A joint is described by three maps: the configuration-to-pose map
//! ([`joint_pose`]), the velocity-to-configuration-rate map ([`chi`]), and the
//! constant matrix `S` whose columns span the allowed twist subspace
//! ([`JointKind::s_matrix`]). Base joints (planar, floating, fixed) also
//! expose the structure constants of their Lie algebra
//! ([`structure_constants`]).

use crate::liegroup::{ad_op, exp_se3, Pose, Twist};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JointError {
    #[error("joint configuration {config} does not match joint kind {kind}")]
    ConfigMismatch {
        kind: &'static str,
        config: &'static str,
    },
    #[error("velocity dimension {got} does not match joint dof {expected}")]
    VelocityDimension { expected: usize, got: usize },
    #[error("structure constants are only defined for base joint kinds (planar, floating), not {kind}")]
    NotABaseKind { kind: &'static str },
}

/// The supported joint subgroups.
///
/// Revolute and prismatic joints are 1-DoF chain joints; planar (3-DoF) and
/// floating (6-DoF) joints model moving bases. The fixed "joint" (0 DoF)
/// makes a rigidly anchored base a degenerate case of the same machinery, so
/// fixed-base manipulator dynamics fall out of the general formulation.
#[derive(Clone, Debug, PartialEq)]
pub enum JointKind {
    /// Rotation about `axis` through `point`, both in the parent joint frame.
    Revolute {
        axis: Vector3<f64>,
        point: Vector3<f64>,
    },
    /// Translation along `axis`.
    Prismatic { axis: Vector3<f64> },
    /// Rigid motion in the x-y plane of the joint frame (rotation about ẑ,
    /// translation in x and y).
    Planar,
    /// Unconstrained rigid motion (all of SE(3)).
    Floating,
    /// No relative motion.
    Fixed,
}

impl JointKind {
    pub fn name(&self) -> &'static str {
        match self {
            JointKind::Revolute { .. } => "revolute",
            JointKind::Prismatic { .. } => "prismatic",
            JointKind::Planar => "planar",
            JointKind::Floating => "floating",
            JointKind::Fixed => "fixed",
        }
    }

    /// Degrees of freedom of the joint.
    pub fn dof(&self) -> usize {
        match self {
            JointKind::Revolute { .. } | JointKind::Prismatic { .. } => 1,
            JointKind::Planar => 3,
            JointKind::Floating => 6,
            JointKind::Fixed => 0,
        }
    }

    /// The constant 6×dof matrix whose columns span the twist subspace the
    /// joint allows: the joint body twist is `S·vel` for a velocity vector
    /// `vel` of length dof.
    pub fn s_matrix(&self) -> DMatrix<f64> {
        match self {
            JointKind::Revolute { axis, point } => {
                let lin = point.cross(axis);
                DMatrix::from_column_slice(
                    6,
                    1,
                    &[axis.x, axis.y, axis.z, lin.x, lin.y, lin.z],
                )
            }
            JointKind::Prismatic { axis } => {
                DMatrix::from_column_slice(6, 1, &[0.0, 0.0, 0.0, axis.x, axis.y, axis.z])
            }
            JointKind::Planar => {
                // Columns select (ω_z, v_x, v_y).
                let mut s = DMatrix::zeros(6, 3);
                s[(2, 0)] = 1.0;
                s[(3, 1)] = 1.0;
                s[(4, 2)] = 1.0;
                s
            }
            JointKind::Floating => DMatrix::identity(6, 6),
            JointKind::Fixed => DMatrix::zeros(6, 0),
        }
    }
}

/// Joint configuration, tagged by joint kind.
///
/// The planar angle is kept unwrapped during integration; wrapping to
/// (−π, π] is a presentation concern only.
#[derive(Clone, Debug, PartialEq)]
pub enum JointConfig {
    /// Revolute angle (rad) or prismatic displacement (m).
    Scalar(f64),
    /// Planar chart (θ, ξx, ξy): rotation about ẑ and in-plane translation.
    Planar { theta: f64, x: f64, y: f64 },
    /// Floating configuration stored as a pose, never as local coordinates,
    /// so integration can update it multiplicatively without chart
    /// singularities.
    Pose(Pose),
    /// Fixed joints carry no configuration.
    Empty,
}

impl JointConfig {
    pub fn name(&self) -> &'static str {
        match self {
            JointConfig::Scalar(_) => "scalar",
            JointConfig::Planar { .. } => "planar",
            JointConfig::Pose(_) => "pose",
            JointConfig::Empty => "empty",
        }
    }

    /// The zero (identity) configuration for a joint kind.
    pub fn zero(kind: &JointKind) -> JointConfig {
        match kind {
            JointKind::Revolute { .. } | JointKind::Prismatic { .. } => JointConfig::Scalar(0.0),
            JointKind::Planar => JointConfig::Planar {
                theta: 0.0,
                x: 0.0,
                y: 0.0,
            },
            JointKind::Floating => JointConfig::Pose(Pose::identity()),
            JointKind::Fixed => JointConfig::Empty,
        }
    }
}

/// Rate of change of a joint configuration, in the representation the
/// configuration itself uses.
#[derive(Clone, Debug)]
pub enum ConfigRate {
    /// Chart-coordinate rates (scalar, planar, or empty charts).
    Coords(DVector<f64>),
    /// Floating configurations evolve by `Ḣ = H·(S·vel)~`, so their rate is
    /// the body twist itself.
    BodyTwist(Vector6<f64>),
}

/// Relative pose produced by a joint at configuration `q`, composed with the
/// joint's zero pose: `H(q) = Z·H_joint(q)`.
///
/// Revolute and prismatic joints follow the exponential of their screw axis;
/// the planar joint is parameterized directly by its chart (θ, ξx, ξy); the
/// floating joint configuration is already a pose.
pub fn joint_pose(kind: &JointKind, zero_pose: &Pose, q: &JointConfig) -> Result<Pose, JointError> {
    let mismatch = || JointError::ConfigMismatch {
        kind: kind.name(),
        config: q.name(),
    };
    match (kind, q) {
        (JointKind::Revolute { .. } | JointKind::Prismatic { .. }, JointConfig::Scalar(x)) => {
            let s = kind.s_matrix();
            let twist = Twist::from_column_slice(s.column(0).as_slice());
            Ok(*zero_pose * exp_se3(&twist, *x))
        }
        (JointKind::Planar, JointConfig::Planar { theta, x, y }) => {
            let (s, c) = theta.sin_cos();
            let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
            Ok(*zero_pose * Pose::new(rot, Vector3::new(*x, *y, 0.0)))
        }
        (JointKind::Floating, JointConfig::Pose(h)) => Ok(*zero_pose * *h),
        (JointKind::Fixed, JointConfig::Empty) => Ok(*zero_pose),
        _ => Err(mismatch()),
    }
}

/// The planar chart-rate matrix: `(θ̇, ξ̇x, ξ̇y) = χ(θ)·(ω_z, v_x, v_y)`.
///
/// The in-plane translation rates couple to the body-frame linear velocity
/// through the current rotation angle.
pub fn planar_chi_matrix(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Configuration rate produced by a joint velocity: `q̇ = χ_q(vel)`.
///
/// Scalar joints use the identity map; the planar joint couples its
/// translation rates through the current angle; floating configurations
/// evolve directly by their body twist.
pub fn chi(kind: &JointKind, q: &JointConfig, vel: &DVector<f64>) -> Result<ConfigRate, JointError> {
    if vel.len() != kind.dof() {
        return Err(JointError::VelocityDimension {
            expected: kind.dof(),
            got: vel.len(),
        });
    }
    match (kind, q) {
        (JointKind::Revolute { .. } | JointKind::Prismatic { .. }, JointConfig::Scalar(_)) => {
            Ok(ConfigRate::Coords(vel.clone()))
        }
        (JointKind::Planar, JointConfig::Planar { theta, .. }) => {
            let rate = planar_chi_matrix(*theta) * Vector3::new(vel[0], vel[1], vel[2]);
            Ok(ConfigRate::Coords(DVector::from_column_slice(
                rate.as_slice(),
            )))
        }
        (JointKind::Floating, JointConfig::Pose(_)) => {
            Ok(ConfigRate::BodyTwist(Vector6::from_column_slice(
                vel.as_slice(),
            )))
        }
        (JointKind::Fixed, JointConfig::Empty) => Ok(ConfigRate::Coords(DVector::zeros(0))),
        _ => Err(JointError::ConfigMismatch {
            kind: kind.name(),
            config: q.name(),
        }),
    }
}

/// Advance a joint configuration by its velocity for a time `dt`, staying on
/// the configuration manifold: charts advance linearly through `χ`, floating
/// poses advance multiplicatively through the exponential map.
///
/// This is the building block the integrator uses for finite-difference
/// oracles and for chart-based base kinds; the floating base inside the RK4
/// step uses its own higher-order multiplicative update.
pub fn advance_config(
    kind: &JointKind,
    q: &JointConfig,
    vel: &DVector<f64>,
    dt: f64,
) -> Result<JointConfig, JointError> {
    match (chi(kind, q, vel)?, q) {
        (ConfigRate::Coords(rate), JointConfig::Scalar(x)) => {
            Ok(JointConfig::Scalar(x + dt * rate[0]))
        }
        (ConfigRate::Coords(rate), JointConfig::Planar { theta, x, y }) => Ok(JointConfig::Planar {
            theta: theta + dt * rate[0],
            x: x + dt * rate[1],
            y: y + dt * rate[2],
        }),
        (ConfigRate::BodyTwist(twist), JointConfig::Pose(h)) => {
            Ok(JointConfig::Pose(*h * exp_se3(&twist, dt)))
        }
        (ConfigRate::Coords(_), JointConfig::Empty) => Ok(JointConfig::Empty),
        _ => unreachable!("chi already validated the kind/config pairing"),
    }
}

/// Structure constants `c_IJ^K` of a base Lie algebra in the basis given by
/// the columns of the joint's `S` matrix: `[e_I, e_J] = c_IJ^K e_K`.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    b: usize,
    /// One b×b matrix per upper index K, holding `c_IJ^K` at row I, column J.
    c_by_upper: Vec<DMatrix<f64>>,
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.b
    }

    /// `c_IJ^K` with all indices zero-based.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c_by_upper[k][(i, j)]
    }

    /// The b×b matrix of `c_IJ^K` over (I, J) for a fixed upper index K.
    pub fn upper(&self, k: usize) -> &DMatrix<f64> {
        &self.c_by_upper[k]
    }

    /// Momentum-indexed skew operator built from the structure constants:
    /// `[ad_p^∼]_IJ = −c_IJ^K p_K`.
    pub fn ad_dual_tilde(&self, p: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(p.len(), self.b, "momentum dimension mismatch");
        let mut m = DMatrix::zeros(self.b, self.b);
        for k in 0..self.b {
            m -= &self.c_by_upper[k] * p[k];
        }
        m
    }
}

/// Compute the structure constants of a base joint's Lie algebra numerically
/// by bracketing the basis columns of `S` and projecting the result back
/// through the pseudo-inverse of `S`.
///
/// Keeping the `ad` operator as the single source of truth avoids hand-coded
/// tables; tests cross-check the output against the known se(2) and se(3)
/// brackets. The fixed base has the trivial (empty) algebra.
pub fn structure_constants(kind: &JointKind) -> Result<StructureConstants, JointError> {
    match kind {
        JointKind::Planar | JointKind::Floating | JointKind::Fixed => {}
        other => {
            return Err(JointError::NotABaseKind { kind: other.name() });
        }
    }
    let s = kind.s_matrix();
    let b = s.ncols();
    // Pseudo-inverse projection: coefficients = (SᵀS)⁻¹Sᵀ · bracket.
    let gram = s.transpose() * &s;
    let chol = gram.cholesky();
    let mut c_by_upper = vec![DMatrix::zeros(b, b); b];
    for i in 0..b {
        let ei = Twist::from_column_slice(s.column(i).as_slice());
        let ad_ei = ad_op(&ei);
        for j in 0..b {
            let ej = Twist::from_column_slice(s.column(j).as_slice());
            let bracket = ad_ei * ej;
            let projected = s.transpose() * bracket;
            let coeffs = chol
                .as_ref()
                .expect("basis has full column rank")
                .solve(&projected);
            // The subalgebra must be closed under its own bracket; if the
            // projection left a residual the basis was not a subalgebra.
            let residual = (&s * &coeffs
                - DVector::from_column_slice(bracket.as_slice()))
            .norm();
            debug_assert!(residual < 1e-12, "basis not closed under bracket");
            for k in 0..b {
                c_by_upper[k][(i, j)] = coeffs[k];
            }
        }
    }
    Ok(StructureConstants { b, c_by_upper })
}
