//! Forward kinematics and geometric Jacobians of the serial chain.
//!
//! Poses of the chain are accumulated recursively, `H_i^b = H_{i−1}^b ·
//! H_i^{i−1}`, and cached in base-frame coordinates; the base pose `H_b^s`
//! closes the chain to the spatial frame. Jacobians are built column by
//! column from the adjoint-chain formula rather than by differentiating
//! poses — finite differences appear only as test oracles.

use crate::joints::{joint_pose, JointConfig};
use crate::liegroup::{adjoint, Pose, Twist};
use crate::model::VmsModel;
use nalgebra::{DMatrix, DVector, Vector6};

/// Poses of every frame of the mechanism at one configuration.
#[derive(Clone, Debug)]
pub struct FkCache {
    /// Base pose in the spatial frame, `H_b^s = φ_b(h)`.
    pub base_pose: Pose,
    /// Link poses in the base frame, `H_i^b` for `i = 0..n`.
    pub link_poses: Vec<Pose>,
    /// End-effector pose in the base frame, `H_e^b`.
    pub ee_pose: Pose,
}

impl FkCache {
    /// Spatial pose of link `i`: `H_i^s = H_b^s · H_i^b`.
    pub fn link_pose_spatial(&self, i: usize) -> Pose {
        self.base_pose * self.link_poses[i]
    }

    /// Spatial pose of the end effector.
    pub fn ee_pose_spatial(&self) -> Pose {
        self.base_pose * self.ee_pose
    }
}

/// Compute all frame poses at base configuration `h` and joint positions `q`.
///
/// # Panics
/// Panics if `q` does not have one entry per link or if `h` does not match
/// the model's base kind (states are constructed against the same model, so a
/// mismatch is a programming error, not an input error).
pub fn forward_kinematics(model: &VmsModel, h: &JointConfig, q: &DVector<f64>) -> FkCache {
    assert_eq!(q.len(), model.n(), "q must have one entry per link");
    let base_pose = joint_pose(&model.base_kind, &Pose::identity(), h)
        .expect("base configuration must match the model's base kind");
    let mut link_poses = Vec::with_capacity(model.n());
    let mut pose = Pose::identity();
    for (i, link) in model.links.iter().enumerate() {
        let relative = joint_pose(&link.joint, &link.zero_pose, &JointConfig::Scalar(q[i]))
            .expect("chain joints take scalar configurations");
        pose = pose * relative;
        link_poses.push(pose);
    }
    let ee_pose = link_poses.last().copied().unwrap_or_else(Pose::identity) * model.ee_zero_pose;
    FkCache {
        base_pose,
        link_poses,
        ee_pose,
    }
}

/// Shared column builder: Jacobian of a frame with pose `frame_in_base`,
/// moved by joints `0..moving`, with zero columns beyond.
fn chain_jacobian(
    model: &VmsModel,
    cache: &FkCache,
    frame_in_base: &Pose,
    moving: usize,
) -> DMatrix<f64> {
    let n = model.n();
    let mut jac = DMatrix::zeros(6, n);
    let frame_inv = frame_in_base.inverse();
    for j in 0..moving {
        // Column j carries the twist of joint j expressed in the target
        // frame: Ad_{H_j^f} S_j.
        let h_j_f = frame_inv * cache.link_poses[j];
        let s_j = Twist::from_column_slice(model.links[j].joint.s_matrix().as_slice());
        jac.set_column(j, &(adjoint(&h_j_f) * s_j));
    }
    jac
}

/// Geometric Jacobian of link `i` with respect to the base: the body twist of
/// link `i` relative to the base, expressed in the link frame, is `J·q̇`.
/// Columns beyond `i` are structurally zero; column `i` is `S_i`.
///
/// # Panics
/// Panics if `i` is out of range.
pub fn link_jacobian_base(model: &VmsModel, cache: &FkCache, i: usize) -> DMatrix<f64> {
    assert!(i < model.n(), "link index {i} out of range");
    chain_jacobian(model, cache, &cache.link_poses[i], i + 1)
}

/// Full geometric Jacobian of link `i`: the spatial body twist of link `i`
/// expressed in the link frame is `[Ad_{H_b^i}·S_b | J_i]·(v; q̇)`, where `v`
/// is the base velocity in the base subalgebra basis.
///
/// # Panics
/// Panics if `i` is out of range.
pub fn link_jacobian_spatial(model: &VmsModel, cache: &FkCache, i: usize) -> DMatrix<f64> {
    assert!(i < model.n(), "link index {i} out of range");
    let manip = link_jacobian_base(model, cache, i);
    spatial_from_base(model, &cache.link_poses[i], &manip)
}

/// Manipulator Jacobian of the end effector (base locked): `𝒯_e = J_e·q̇` in
/// the end-effector frame. Every chain joint contributes a column.
pub fn end_effector_jacobian(model: &VmsModel, cache: &FkCache) -> DMatrix<f64> {
    chain_jacobian(model, cache, &cache.ee_pose, model.n())
}

/// Full end-effector Jacobian including the base block, like
/// [`link_jacobian_spatial`] but for the end-effector frame.
pub fn end_effector_jacobian_spatial(model: &VmsModel, cache: &FkCache) -> DMatrix<f64> {
    let manip = end_effector_jacobian(model, cache);
    spatial_from_base(model, &cache.ee_pose, &manip)
}

/// Prepend the base block `Ad_{H_b^f}·S_b` to a base-locked Jacobian.
fn spatial_from_base(model: &VmsModel, frame_in_base: &Pose, manip: &DMatrix<f64>) -> DMatrix<f64> {
    let b = model.base_dof();
    let n = model.n();
    let mut jac = DMatrix::zeros(6, b + n);
    let ad_b_f = adjoint(&frame_in_base.inverse());
    let s_b = model.base_s_matrix();
    for c in 0..b {
        let col = Vector6::from_fn(|r, _| s_b[(r, c)]);
        jac.set_column(c, &(ad_b_f * col));
    }
    jac.view_mut((0, b), (6, n)).copy_from(manip);
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_link;
    use crate::joints::{advance_config, JointKind};
    use crate::liegroup::{exp_se3, log_se3};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};
    use std::f64::consts::PI;

    fn floating_h() -> JointConfig {
        JointConfig::Pose(exp_se3(&Twist::new(0.3, -0.5, 0.4, 0.7, -0.2, 0.9), 1.0))
    }

    #[test]
    fn zero_configuration_composes_zero_poses() {
        let model = two_link(JointKind::Floating);
        let cache = forward_kinematics(
            &model,
            &JointConfig::zero(&JointKind::Floating),
            &DVector::zeros(2),
        );
        assert_eq!(cache.base_pose, Pose::identity());
        assert_eq!(cache.link_poses[0], model.links[0].zero_pose);
        assert_eq!(
            cache.link_poses[1],
            model.links[0].zero_pose * model.links[1].zero_pose
        );
        assert_eq!(
            cache.ee_pose,
            model.links[0].zero_pose * model.links[1].zero_pose * model.ee_zero_pose
        );
    }

    #[test]
    fn fixed_base_pose_is_identity() {
        let model = two_link(JointKind::Fixed);
        let cache = forward_kinematics(&model, &JointConfig::Empty, &DVector::zeros(2));
        assert_eq!(cache.base_pose, Pose::identity());
    }

    #[test]
    fn floating_base_pose_is_the_configuration() {
        let model = two_link(JointKind::Floating);
        let h = floating_h();
        let cache = forward_kinematics(&model, &h, &DVector::zeros(2));
        match h {
            JointConfig::Pose(p) => assert_eq!(cache.base_pose, p),
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_link_half_turn_rotates_relative_to_zero_pose() {
        let model = two_link(JointKind::Fixed);
        let cache = forward_kinematics(
            &model,
            &JointConfig::Empty,
            &DVector::from_vec(vec![PI, 0.0]),
        );
        // A half turn about ẑ flips x̂ and ŷ of the first link frame.
        let relative = model.links[0].zero_pose.inverse() * cache.link_poses[0];
        let expected = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(relative.rotation, expected, epsilon = 1e-14);
        assert_relative_eq!(relative.translation, Vector3::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn jacobian_column_pattern() {
        let model = two_link(JointKind::Floating);
        let q = DVector::from_vec(vec![0.6, -0.9]);
        let cache = forward_kinematics(&model, &floating_h(), &q);
        let j0 = link_jacobian_base(&model, &cache, 0);
        // Column beyond the link index is structurally zero.
        assert_eq!(j0.column(1).norm(), 0.0);
        // The link's own column is its S matrix.
        let s0 = model.links[0].joint.s_matrix();
        for r in 0..6 {
            assert_relative_eq!(j0[(r, 0)], s0[(r, 0)], epsilon = 1e-14);
        }
        let j1 = link_jacobian_base(&model, &cache, 1);
        let s1 = model.links[1].joint.s_matrix();
        for r in 0..6 {
            assert_relative_eq!(j1[(r, 1)], s1[(r, 0)], epsilon = 1e-14);
        }
    }

    /// Central finite difference of link poses with the base locked must
    /// reproduce `J·q̇`.
    #[test]
    fn base_locked_jacobian_matches_finite_difference_twist() {
        let model = two_link(JointKind::Floating);
        let h = floating_h();
        let q = DVector::from_vec(vec![0.45, -1.2]);
        let dq = DVector::from_vec(vec![0.8, 0.6]);
        let cache = forward_kinematics(&model, &h, &q);
        let eps = 1e-6;
        for i in 0..model.n() {
            let plus = forward_kinematics(&model, &h, &(&q + eps * &dq));
            let minus = forward_kinematics(&model, &h, &(&q - eps * &dq));
            // log maps the relative pose to a twist; central difference over
            // [−ε, +ε] needs the minus→plus direction.
            let fd = log_se3(&(minus.link_poses[i].inverse() * plus.link_poses[i])) / (2.0 * eps);
            let expected = link_jacobian_base(&model, &cache, i) * &dq;
            for r in 0..6 {
                assert_relative_eq!(
                    fd[r],
                    expected[r],
                    epsilon = 1e-5 * (1.0 + expected.norm())
                );
            }
        }
    }

    #[test]
    fn spatial_jacobian_matches_finite_difference_with_base_motion() {
        for base_kind in [JointKind::Floating, JointKind::Planar] {
            let model = two_link(base_kind.clone());
            let b = model.base_dof();
            let h = match base_kind {
                JointKind::Floating => floating_h(),
                JointKind::Planar => JointConfig::Planar {
                    theta: 0.8,
                    x: -0.3,
                    y: 1.1,
                },
                _ => unreachable!(),
            };
            let q = DVector::from_vec(vec![0.45, -1.2]);
            let vel_b = DVector::from_fn(b, |r, _| 0.3 + 0.2 * r as f64);
            let dq = DVector::from_vec(vec![-0.7, 0.5]);
            let cache = forward_kinematics(&model, &h, &q);
            let eps = 1e-6;
            let poses_at = |s: f64| {
                let h_s = advance_config(&model.base_kind, &h, &vel_b, s).unwrap();
                forward_kinematics(&model, &h_s, &(&q + s * &dq))
            };
            let plus = poses_at(eps);
            let minus = poses_at(-eps);
            let mut vel = DVector::zeros(b + model.n());
            vel.rows_mut(0, b).copy_from(&vel_b);
            vel.rows_mut(b, model.n()).copy_from(&dq);
            for i in 0..model.n() {
                let fd = log_se3(
                    &(minus.link_pose_spatial(i).inverse() * plus.link_pose_spatial(i)),
                ) / (2.0 * eps);
                let expected = link_jacobian_spatial(&model, &cache, i) * &vel;
                for r in 0..6 {
                    assert_relative_eq!(
                        fd[r],
                        expected[r],
                        epsilon = 1e-5 * (1.0 + expected.norm())
                    );
                }
            }
            // Same identity at the end-effector frame.
            let fd = log_se3(&(minus.ee_pose_spatial().inverse() * plus.ee_pose_spatial()))
                / (2.0 * eps);
            let expected = end_effector_jacobian_spatial(&model, &cache) * &vel;
            for r in 0..6 {
                assert_relative_eq!(fd[r], expected[r], epsilon = 1e-5 * (1.0 + expected.norm()));
            }
        }
    }

    #[test]
    fn fixed_base_spatial_jacobian_equals_base_locked_jacobian() {
        let model = two_link(JointKind::Fixed);
        let q = DVector::from_vec(vec![0.3, 0.9]);
        let cache = forward_kinematics(&model, &JointConfig::Empty, &q);
        let spatial = link_jacobian_spatial(&model, &cache, 1);
        let locked = link_jacobian_base(&model, &cache, 1);
        assert_eq!(spatial.ncols(), 2);
        assert_relative_eq!(spatial, locked, epsilon = 1e-15);
    }

    #[test]
    fn floating_base_block_is_identity_at_the_base_frame() {
        // A link frame coincident with the base frame sees the base twist
        // unchanged: Ad of the identity.
        let mut model = two_link(JointKind::Floating);
        model.links[0].zero_pose = Pose::identity();
        let cache = forward_kinematics(&model, &floating_h(), &DVector::zeros(2));
        let jac = link_jacobian_spatial(&model, &cache, 0);
        for r in 0..6 {
            for c in 0..6 {
                let expected = if r == c { 1.0 } else { 0.0 };
                assert_relative_eq!(jac[(r, c)], expected, epsilon = 1e-14);
            }
        }
    }
}
