//! Matrix Lie group primitives for SO(3) and SE(3).
//!
//! Twists and wrenches are stacked 6-vectors with the angular part first: a
//! twist is `(ω; v)` in rad/s and m/s, a wrench is `(τ; f)` in N·m and N. The
//! pairing `⟨wrench, twist⟩ = τ·ω + f·v` is mechanical power in watts. All
//! operators below follow this ordering.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Matrix6, Vector3, Vector6};

/// Body twist `(ω; v)`, angular part first.
pub type Twist = Vector6<f64>;
/// Wrench `(τ; f)`, angular part first.
pub type Wrench = Vector6<f64>;

/// Rotation angles below this threshold use truncated series for the
/// Rodrigues coefficients instead of the closed forms, which divide by the
/// angle.
const SMALL_ANGLE: f64 = 1e-8;

/// Rigid transformation stored as rotation matrix plus translation vector.
///
/// A `Pose` plays the role of a homogeneous transformation `H_a^b` mapping
/// coordinates of frame `a` into frame `b`; the 4×4 form is available through
/// [`Pose::to_homogeneous`] for serialization and debugging only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Composition `self ∘ other`: if `self` maps frame b to frame c and
    /// `other` maps frame a to frame b, the result maps frame a to frame c.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Apply the transformation to a point.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }

    /// Largest violation of `R·Rᵀ = I` and `det R = 1`, used by model
    /// validation to reject non-orthonormal rotation input.
    pub fn rotation_defect(&self) -> f64 {
        rotation_defect(&self.rotation)
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// Largest violation of `R·Rᵀ = I` and `det R = 1`.
pub fn rotation_defect(r: &Matrix3<f64>) -> f64 {
    let ortho = (r * r.transpose() - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

/// Skew-symmetric matrix of a 3-vector: `hat3(w)·x = w × x`.
pub fn hat3(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat3`] on (numerically) skew-symmetric matrices.
pub fn unhat3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Exponential map of so(3) by Rodrigues' formula, with a truncated series
/// for small angles.
pub fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let wh = hat3(w);
    // R = I + a·ŵ + b·ŵ² with a = sin θ / θ and b = (1 − cos θ)/θ².
    let (a, b) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / (theta * theta),
        )
    };
    Matrix3::identity() + a * wh + b * (wh * wh)
}

/// Logarithm of a rotation matrix; the returned vector has norm ≤ π.
///
/// Near the angle-π branch the axis is recovered from the symmetric part of
/// `R`, which stays well conditioned where `R − Rᵀ` loses rank.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = (0.5 * (r.trace() - 1.0)).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < SMALL_ANGLE {
        // log R ≈ (R − Rᵀ)/2 to leading order.
        return unhat3(&(0.5 * (r - r.transpose())));
    }
    if theta < std::f64::consts::PI - 1e-4 {
        let scale = theta / (2.0 * theta.sin());
        return scale * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );
    }
    // Near π: R ≈ I + 2ŵ̂² with ŵ the unit axis, so (R + I)/2 ≈ I + ŵ̂²
    // has diagonal 1 − (1 − aᵢ²)(1 − cos θ) ... recover |axis| from the
    // diagonal and fix signs from the off-diagonal symmetric entries.
    let one_minus_cos = 1.0 - cos_theta;
    let axis_sq = Vector3::new(
        ((r[(0, 0)] - cos_theta) / one_minus_cos).max(0.0),
        ((r[(1, 1)] - cos_theta) / one_minus_cos).max(0.0),
        ((r[(2, 2)] - cos_theta) / one_minus_cos).max(0.0),
    );
    let mut axis = axis_sq.map(f64::sqrt);
    // Pick the dominant component positive and fix the remaining signs from
    // the symmetric off-diagonal products axis_i·axis_j.
    let k = axis.imax();
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    let sym = |a: usize, b: usize| 0.5 * (r[(a, b)] + r[(b, a)]) / one_minus_cos;
    if axis[i] > 0.0 && sym(k, i) < 0.0 {
        axis[i] = -axis[i];
    }
    if axis[j] > 0.0 && sym(k, j) < 0.0 {
        axis[j] = -axis[j];
    }
    // The antisymmetric part still carries sin θ ≥ 0; use it to orient the
    // axis so that log is continuous across the branch.
    let anti = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if anti.dot(&axis) < 0.0 {
        axis = -axis;
    }
    // acos is ill-conditioned this close to π (derivative 1/sin θ); recover
    // the angle instead from ‖R − Rᵀ‖, which encodes 2·sin θ directly.
    let sin_theta = (0.5 * anti.norm()).clamp(0.0, 1.0);
    let theta = std::f64::consts::PI - sin_theta.asin();
    theta * axis.normalize()
}

/// Exponential map of se(3): the pose reached by following the constant body
/// twist `v` for `dt` seconds.
pub fn exp_se3(v: &Twist, dt: f64) -> Pose {
    let w = dt * Vector3::new(v[0], v[1], v[2]);
    let u = dt * Vector3::new(v[3], v[4], v[5]);
    let theta = w.norm();
    let wh = hat3(&w);
    // Translation part uses ξ = G·u with G = I + b·ŵ + c·ŵ²,
    // b = (1 − cos θ)/θ², c = (θ − sin θ)/θ³.
    let (b, c) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        (
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    };
    let g = Matrix3::identity() + b * wh + c * (wh * wh);
    Pose {
        rotation: exp_so3(&w),
        translation: g * u,
    }
}

/// Logarithm of a pose: the constant body twist that reaches `h` in unit
/// time. Used for pose-error metrics and finite-difference oracles.
pub fn log_se3(h: &Pose) -> Twist {
    let w = log_so3(&h.rotation);
    let theta = w.norm();
    let wh = hat3(&w);
    // Inverse of the translation map G from exp_se3.
    let ginv = if theta < SMALL_ANGLE {
        Matrix3::identity() - 0.5 * wh + (wh * wh) / 12.0
    } else {
        let half = 0.5 * theta;
        let cot_coeff = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
        Matrix3::identity() - 0.5 * wh + cot_coeff * (wh * wh)
    };
    let u = ginv * h.translation;
    Twist::new(w.x, w.y, w.z, u.x, u.y, u.z)
}

/// Adjoint matrix of a pose, mapping body twists between frames:
/// `Ad_H = [[R, 0], [ξ̂·R, R]]`. Wrenches transform by `Ad_H⁻ᵀ`.
pub fn adjoint(h: &Pose) -> Matrix6<f64> {
    let mut ad = Matrix6::zeros();
    let xi_r = hat3(&h.translation) * h.rotation;
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&h.rotation);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&xi_r);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&h.rotation);
    ad
}

/// Lie-algebra adjoint (bracket) operator of a twist:
/// `ad_V = [[ω̂, 0], [v̂, ω̂]]`, so `ad_{V1}·V2 = [V1, V2]`.
pub fn ad_op(v: &Twist) -> Matrix6<f64> {
    let wh = hat3(&Vector3::new(v[0], v[1], v[2]));
    let vh = hat3(&Vector3::new(v[3], v[4], v[5]));
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&wh);
    ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&vh);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&wh);
    ad
}

/// Lie bracket `[a, b] = ad_a·b` of two twists.
pub fn bracket(a: &Twist, b: &Twist) -> Twist {
    ad_op(a) * b
}

/// Momentum-indexed skew operator on se(3)*: `ad_p^∼·V = ad_Vᵀ·p`.
///
/// In block form `ad_p^∼ = [[τ̂, f̂], [f̂, 0]]` for `p = (τ; f)`, which is
/// skew-symmetric because each block is.
pub fn ad_dual_tilde6(p: &Vector6<f64>) -> Matrix6<f64> {
    let th = hat3(&Vector3::new(p[0], p[1], p[2]));
    let fh = hat3(&Vector3::new(p[3], p[4], p[5]));
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&th);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&fh);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&fh);
    m
}

/// Copy a static 6×6 operator into a dynamically sized matrix so it can be
/// multiplied against joint-space blocks whose dimensions depend on the model.
pub fn to_dynamic(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| m[(i, j)])
}

/// Momentum-indexed skew operator restricted to a subalgebra of se(3).
///
/// `s` is a 6×b matrix whose columns form a basis of the subalgebra and `p`
/// is a momentum b-covector expressed in that basis. The result is the b×b
/// matrix satisfying `result·v̄ = Sᵀ·ad_{S·v̄}ᵀ·P̄` for every b-vector `v̄`,
/// where `P̄ = S(SᵀS)⁻¹p` is the representative 6-covector of `p`. The choice
/// of representative does not matter because the subalgebra is closed under
/// its own bracket.
///
/// # Panics
/// Panics if `p` and `s` have mismatched dimensions.
pub fn ad_dual_tilde(p: &DVector<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let b = s.ncols();
    assert_eq!(s.nrows(), 6, "subalgebra basis must be 6×b");
    assert_eq!(p.len(), b, "momentum dimension must match basis columns");
    let gram = s.transpose() * s;
    let p_bar = s * gram
        .clone()
        .cholesky()
        .expect("subalgebra basis must have full column rank")
        .solve(p);
    let mut result = DMatrix::zeros(b, b);
    for j in 0..b {
        let col_twist = Twist::from_column_slice(s.column(j).as_slice());
        let contrib = ad_op(&col_twist).transpose() * &p_bar;
        for i in 0..b {
            result[(i, j)] = s.column(i).dot(&contrib);
        }
    }
    result
}
