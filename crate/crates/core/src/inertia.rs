//! Mass-matrix assembly and its configuration derivatives.
//!
//! The kinetic energy of the system is `½(v; q̇)ᵀ𝓜(q)(v; q̇)` with block
//! structure `𝓜 = [[M_b, M_bm], [M_bmᵀ, M_m]]`: the locked inertia `M_b`
//! (total inertia seen at the base with the joints frozen), the base–arm
//! coupling `M_bm`, and the manipulator inertia `M_m`. From these follow the
//! mechanical connection `A = M_b⁻¹M_bm` and the Schur complement
//! `M̂_m = M_m − AᵀM_bm`, which diagonalize the kinetic energy in the locked
//! velocity `v̂ = v + Aq̇`.
//!
//! Configuration partials of every block are computed by central finite
//! differences with a per-coordinate step; an analytic recursion is a
//! documented future optimization. The partials of the inverses are
//! differenced independently so the identity `∂M⁻¹ = −M⁻¹(∂M)M⁻¹` remains a
//! meaningful cross-check rather than a tautology.

use crate::joints::JointConfig;
use crate::kinematics::{forward_kinematics, link_jacobian_base};
use crate::liegroup::{adjoint, to_dynamic};
use crate::model::VmsModel;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InertiaError {
    #[error("{matrix} is singular at the evaluated configuration; the model is degenerate (e.g. zero mass)")]
    SingularMassMatrix { matrix: &'static str },
}

/// All mass-matrix blocks at one joint configuration.
#[derive(Clone, Debug)]
pub struct MassBlocks {
    /// Locked inertia, b×b, symmetric positive definite.
    pub m_b: DMatrix<f64>,
    /// Base–manipulator coupling, b×n.
    pub m_bm: DMatrix<f64>,
    /// Manipulator inertia, n×n, symmetric.
    pub m_m: DMatrix<f64>,
    /// Mechanical connection `A = M_b⁻¹M_bm`, b×n.
    pub a: DMatrix<f64>,
    /// Schur complement `M̂_m = M_m − AᵀM_bm`, n×n, symmetric positive
    /// definite for non-degenerate models.
    pub m_m_hat: DMatrix<f64>,
    /// Inverse of `M_b` (via Cholesky).
    pub m_b_inv: DMatrix<f64>,
    /// Inverse of `M̂_m` (via Cholesky).
    pub m_m_hat_inv: DMatrix<f64>,
}

impl MassBlocks {
    pub fn base_dof(&self) -> usize {
        self.m_b.nrows()
    }

    pub fn n(&self) -> usize {
        self.m_m.nrows()
    }

    /// The full mass matrix `𝓜 = [[M_b, M_bm], [M_bmᵀ, M_m]]`.
    pub fn full(&self) -> DMatrix<f64> {
        let (b, n) = (self.base_dof(), self.n());
        let mut m = DMatrix::zeros(b + n, b + n);
        m.view_mut((0, 0), (b, b)).copy_from(&self.m_b);
        m.view_mut((0, b), (b, n)).copy_from(&self.m_bm);
        m.view_mut((b, 0), (n, b)).copy_from(&self.m_bm.transpose());
        m.view_mut((b, b), (n, n)).copy_from(&self.m_m);
        m
    }
}

fn invert_spd(m: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>, InertiaError> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(InertiaError::SingularMassMatrix { matrix: name })
}

/// Assemble all mass blocks at joint configuration `q` by pulling every link
/// inertia back to the base frame:
///
/// * `M_b = S_bᵀ(ℐ_b + Σᵢ Ad_{H_b^i}ᵀ ℐᵢ Ad_{H_b^i})S_b`
/// * `M_bm = Σᵢ S_bᵀ Ad_{H_b^i}ᵀ ℐᵢ Jᵢ`
/// * `M_m = Σᵢ Jᵢᵀ ℐᵢ Jᵢ`
///
/// The blocks depend on `q` only; the base configuration drops out because
/// every factor is a relative pose within the mechanism.
pub fn mass_blocks(model: &VmsModel, q: &DVector<f64>) -> Result<MassBlocks, InertiaError> {
    let cache = forward_kinematics(model, &JointConfig::zero(&model.base_kind), q);
    let b = model.base_dof();
    let n = model.n();
    let s_b = model.base_s_matrix();

    let mut locked = model.base_inertia;
    let mut m_bm = DMatrix::zeros(b, n);
    let mut m_m = DMatrix::zeros(n, n);
    for i in 0..n {
        let ad = adjoint(&cache.link_poses[i].inverse());
        let inertia = &model.links[i].inertia;
        locked += ad.transpose() * inertia * ad;
        let jac = link_jacobian_base(model, &cache, i);
        let inertia_jac = to_dynamic(inertia) * &jac;
        m_bm += s_b.transpose() * (to_dynamic(&ad.transpose()) * &inertia_jac);
        m_m += jac.transpose() * inertia_jac;
    }
    let mut m_b = s_b.transpose() * to_dynamic(&locked) * &s_b;
    m_b = 0.5 * (&m_b + m_b.transpose());
    m_m = 0.5 * (&m_m + m_m.transpose());

    let m_b_inv = invert_spd(&m_b, "locked inertia M_b")?;
    let a = &m_b_inv * &m_bm;
    let mut m_m_hat = &m_m - a.transpose() * &m_bm;
    m_m_hat = 0.5 * (&m_m_hat + m_m_hat.transpose());
    let m_m_hat_inv = invert_spd(&m_m_hat, "decoupled manipulator inertia M_m_hat")?;

    Ok(MassBlocks {
        m_b,
        m_bm,
        m_m,
        a,
        m_m_hat,
        m_b_inv,
        m_m_hat_inv,
    })
}

/// Central-difference partial derivatives of every mass block with respect to
/// each joint coordinate.
#[derive(Clone, Debug)]
pub struct MassPartials {
    /// `∂M_b/∂q_k`, one b×b matrix per k.
    pub d_m_b: Vec<DMatrix<f64>>,
    /// `∂M_bm/∂q_k`, b×n.
    pub d_m_bm: Vec<DMatrix<f64>>,
    /// `∂M_m/∂q_k`, n×n.
    pub d_m_m: Vec<DMatrix<f64>>,
    /// `∂M̂_m/∂q_k`, n×n.
    pub d_m_m_hat: Vec<DMatrix<f64>>,
    /// `∂A/∂q_k`, b×n.
    pub d_a: Vec<DMatrix<f64>>,
    /// `∂M_b⁻¹/∂q_k`, b×b, differenced from the inverse itself.
    pub d_m_b_inv: Vec<DMatrix<f64>>,
    /// `∂M̂_m⁻¹/∂q_k`, n×n, differenced from the inverse itself.
    pub d_m_m_hat_inv: Vec<DMatrix<f64>>,
}

/// Differentiate the mass blocks by central differences with per-coordinate
/// step `h_k = 1e-6·max(1, |q_k|)`.
pub fn mass_partials(model: &VmsModel, q: &DVector<f64>) -> Result<MassPartials, InertiaError> {
    let n = model.n();
    let mut partials = MassPartials {
        d_m_b: Vec::with_capacity(n),
        d_m_bm: Vec::with_capacity(n),
        d_m_m: Vec::with_capacity(n),
        d_m_m_hat: Vec::with_capacity(n),
        d_a: Vec::with_capacity(n),
        d_m_b_inv: Vec::with_capacity(n),
        d_m_m_hat_inv: Vec::with_capacity(n),
    };
    for k in 0..n {
        let h_k = 1e-6 * q[k].abs().max(1.0);
        let mut q_plus = q.clone();
        q_plus[k] += h_k;
        let mut q_minus = q.clone();
        q_minus[k] -= h_k;
        let plus = mass_blocks(model, &q_plus)?;
        let minus = mass_blocks(model, &q_minus)?;
        let diff = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).unscale(2.0 * h_k);
        partials.d_m_b.push(diff(&plus.m_b, &minus.m_b));
        partials.d_m_bm.push(diff(&plus.m_bm, &minus.m_bm));
        partials.d_m_m.push(diff(&plus.m_m, &minus.m_m));
        partials.d_m_m_hat.push(diff(&plus.m_m_hat, &minus.m_m_hat));
        partials.d_a.push(diff(&plus.a, &minus.a));
        partials.d_m_b_inv.push(diff(&plus.m_b_inv, &minus.m_b_inv));
        partials
            .d_m_m_hat_inv
            .push(diff(&plus.m_m_hat_inv, &minus.m_m_hat_inv));
    }
    Ok(partials)
}

/// Legendre transform: momenta conjugate to `(v, q̇)`,
/// `p = M_b v + M_bm q̇`, `π = M_bmᵀ v + M_m q̇`.
pub fn momenta_from_velocities(
    blocks: &MassBlocks,
    v: &DVector<f64>,
    q_dot: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let p = &blocks.m_b * v + &blocks.m_bm * q_dot;
    let pi = blocks.m_bm.transpose() * v + &blocks.m_m * q_dot;
    (p, pi)
}

/// Inverse Legendre transform via the block factorization: the Schur
/// complement solves `q̇` first, then the base velocity follows without
/// factoring the full mass matrix:
/// `q̇ = M̂_m⁻¹(π − Aᵀp)`, `v = M_b⁻¹p − Aq̇`.
pub fn velocities_from_momenta(
    blocks: &MassBlocks,
    p: &DVector<f64>,
    pi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let q_dot = &blocks.m_m_hat_inv * (pi - blocks.a.transpose() * p);
    let v = &blocks.m_b_inv * p - &blocks.a * &q_dot;
    (v, q_dot)
}

/// Locked velocity `v̂ = v + A(q)q̇`: the base twist that would carry the
/// whole frozen system with the momentum the moving system actually has.
pub fn locked_velocity(
    blocks: &MassBlocks,
    v: &DVector<f64>,
    q_dot: &DVector<f64>,
) -> DVector<f64> {
    v + &blocks.a * q_dot
}

/// Kinetic energy `½(vᵀM_b v + 2vᵀM_bm q̇ + q̇ᵀM_m q̇)`.
pub fn kinetic_energy(blocks: &MassBlocks, v: &DVector<f64>, q_dot: &DVector<f64>) -> f64 {
    0.5 * (v.dot(&(&blocks.m_b * v))
        + 2.0 * v.dot(&(&blocks.m_bm * q_dot))
        + q_dot.dot(&(&blocks.m_m * q_dot)))
}

/// Kinetic Hamiltonian `½(p; π)ᵀ𝓜⁻¹(p; π)`, evaluated as `½(pᵀv + πᵀq̇)`.
pub fn hamiltonian_kinetic(blocks: &MassBlocks, p: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    let (v, q_dot) = velocities_from_momenta(blocks, p, pi);
    0.5 * (p.dot(&v) + pi.dot(&q_dot))
}
