//! The equivalent dynamic formulations of a vehicle-manipulator system.
//!
//! Three views of the same mechanics are provided, all driven by the same
//! inputs (base wrench, joint forces, end-effector wrench, gravity):
//!
//! * [`ph_standard_field`] — the port-Hamiltonian vector field in the
//!   original momentum variables `(p, q, π)`, where `p` pairs with the base
//!   velocity `v` and the base momentum equation is the Lie-Poisson transport
//!   `ṗ = ad_p^∼ v + w`.
//! * [`ph_decoupled_field`] — the port-Hamiltonian vector field in the locked
//!   variables `(p̂, q, π̂)` obtained through the mechanical connection
//!   `A = M_b⁻¹M_bm`. The Hamiltonian splits as
//!   `Ĥ = ½p̂ᵀM_b⁻¹p̂ + ½π̂ᵀM̂_m⁻¹π̂` with no cross term, at the price of
//!   curvature-like correction terms ([`b_map`]) in the arm equation.
//! * [`reduced_el_accelerations`] — the reduced Euler-Lagrange equations in
//!   the locked velocity variables `(v̂, q, q̇)`, written as
//!   `M̂ (v̂̇; q̈) + (Ĉ₁ + Ĉ₂)(v̂; q̇) = (ŵ; τ̂)` with
//!   `M̂ = blkdiag(M_b, M̂_m)`.
//!
//! [`boltzmann_hamel_residual`] evaluates the Boltzmann-Hamel equations in
//! the moving frame `{base algebra basis, shape coordinates}` directly from
//! the Hamel coefficients ([`hamel_coefficients`]); it vanishes exactly on
//! trajectories of the other formulations and is the independent certificate
//! used by the validation suite.
//!
//! All auxiliary maps from the derivation (`E_b`, `P_b`, `Ĉ_m`, `L`, `B`,
//! `N_b`, `N̂_m`, `Φ`) are public so tests can probe the identities relating
//! them rather than only end-to-end behaviour.

use crate::inertia::{
    mass_blocks, mass_partials, velocities_from_momenta, InertiaError, MassBlocks, MassPartials,
};
use crate::joints::{structure_constants, JointConfig, JointKind, StructureConstants};
use crate::kinematics::{end_effector_jacobian, forward_kinematics, link_jacobian_base, FkCache};
use crate::liegroup::Wrench;
use crate::model::{mass_and_com, Potential, State, VmsModel};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::sync::OnceLock;

/// Structure constants of a base subgroup, computed once per kind and shared
/// thereafter: field evaluations inside integrators are far too frequent to
/// re-derive them numerically every call.
pub fn base_constants(kind: &JointKind) -> &'static StructureConstants {
    static FIXED: OnceLock<StructureConstants> = OnceLock::new();
    static PLANAR: OnceLock<StructureConstants> = OnceLock::new();
    static FLOATING: OnceLock<StructureConstants> = OnceLock::new();
    let cell = match kind {
        JointKind::Fixed => &FIXED,
        JointKind::Planar => &PLANAR,
        JointKind::Floating => &FLOATING,
        other => panic!("{} is not a base joint kind", other.name()),
    };
    cell.get_or_init(|| {
        structure_constants(kind).expect("base subgroups have structure constants")
    })
}

/// External inputs acting on the system at one instant.
#[derive(Clone, Debug)]
pub struct Inputs {
    /// Actuation wrench on the base, in base coordinates (already projected
    /// onto the base subalgebra basis, so it has `base_dof` components).
    pub w_act: DVector<f64>,
    /// Actuation forces of the manipulator joints.
    pub tau_act: DVector<f64>,
    /// Interaction wrench applied to the end-effector, in the end-effector
    /// frame. It enters the joint equation through the transpose of the
    /// end-effector Jacobian.
    pub ee_wrench: Wrench,
    /// Whether the model's gravity field contributes to the totals.
    pub gravity_enabled: bool,
}

impl Inputs {
    /// No actuation, no contact, gravity enabled.
    pub fn zero(model: &VmsModel) -> Inputs {
        Inputs {
            w_act: DVector::zeros(model.base_dof()),
            tau_act: DVector::zeros(model.n()),
            ee_wrench: Wrench::zeros(),
            gravity_enabled: true,
        }
    }
}

/// One evaluation of a port-Hamiltonian vector field, together with the
/// velocity outputs conjugate to the inputs.
#[derive(Clone, Debug)]
pub struct PhVectorField {
    /// Base momentum rate (`ṗ` or `ṗ̂` depending on the formulation).
    pub p_dot: DVector<f64>,
    /// Shape velocity `q̇`.
    pub q_dot: DVector<f64>,
    /// Shape momentum rate (`π̇` or `π̂̇`).
    pub pi_dot: DVector<f64>,
    /// Base velocity `v`. In both formulations this is the output conjugate
    /// to the wrench input `w`, so `Ḣ = wᵀv + τᵀq̇` pointwise.
    pub v: DVector<f64>,
    /// Locked base velocity `v̂ = v + A q̇` (equals `v` when the chain is
    /// empty or the coupling vanishes).
    pub v_hat: DVector<f64>,
    /// Partial derivative of the formulation's kinetic Hamiltonian with
    /// respect to `q` at fixed momenta.
    pub dh_dq: DVector<f64>,
}

/// Weight wrench of one body in its own frame: `f = m·Rᵀg` and `τ = c × f`,
/// where `R` is the body-to-spatial rotation and `c` the body-frame center of
/// mass.
fn weight_wrench(
    inertia: &nalgebra::Matrix6<f64>,
    rotation_to_spatial: &Matrix3<f64>,
    gravity: &Vector3<f64>,
) -> Wrench {
    let (m, c) = mass_and_com(inertia);
    let f = m * (rotation_to_spatial.transpose() * gravity);
    let tau = c.cross(&f);
    Wrench::new(tau.x, tau.y, tau.z, f.x, f.y, f.z)
}

/// Gravitational potential energy at a configuration, `Σ mᵢ·⟨−g, xᵢ⟩` over
/// the base and all links with `xᵢ` the spatial center-of-mass positions.
pub fn potential_energy(model: &VmsModel, h: &JointConfig, q: &DVector<f64>) -> f64 {
    if model.potential() == Potential::None {
        return 0.0;
    }
    potential_energy_cached(model, &forward_kinematics(model, h, q))
}

/// [`potential_energy`] reusing an existing forward-kinematics pass.
pub fn potential_energy_cached(model: &VmsModel, cache: &FkCache) -> f64 {
    if model.potential() == Potential::None {
        return 0.0;
    }
    let up = -model.gravity;
    let (mass_b, com_b) = mass_and_com(&model.base_inertia);
    let mut energy = mass_b * up.dot(&cache.base_pose.transform_point(&com_b));
    for (i, link) in model.links.iter().enumerate() {
        let (mass, com) = mass_and_com(&link.inertia);
        energy += mass * up.dot(&cache.link_pose_spatial(i).transform_point(&com));
    }
    energy
}

/// Gravity gradient in the shape coordinates, `g(q) = ∂H_pot/∂q`, assembled
/// as `−Σ Jᵢᵀ Wᵢ` from the per-link weight wrenches.
pub fn gravity_joint_force(model: &VmsModel, cache: &FkCache) -> DVector<f64> {
    let mut g = DVector::zeros(model.n());
    if model.potential() == Potential::None {
        return g;
    }
    for (i, link) in model.links.iter().enumerate() {
        let rotation = cache.link_pose_spatial(i).rotation;
        let w = weight_wrench(&link.inertia, &rotation, &model.gravity);
        g -= link_jacobian_base(model, cache, i).transpose() * w;
    }
    g
}

/// Generalized gravity force on the base coordinates: the total weight wrench
/// of base and links, pulled back to the base frame and projected onto the
/// base subalgebra basis. Equals `−∂H_pot/∂h` along base directions, so it is
/// added (not subtracted) to the base wrench total.
pub fn gravity_base_wrench(model: &VmsModel, cache: &FkCache) -> DVector<f64> {
    let b = model.base_dof();
    if model.potential() == Potential::None || b == 0 {
        return DVector::zeros(b);
    }
    let mut total = weight_wrench(
        &model.base_inertia,
        &cache.base_pose.rotation,
        &model.gravity,
    );
    for (i, link) in model.links.iter().enumerate() {
        let rotation = cache.link_pose_spatial(i).rotation;
        let w = weight_wrench(&link.inertia, &rotation, &model.gravity);
        total += crate::liegroup::adjoint(&cache.link_poses[i].inverse()).transpose() * w;
    }
    model.base_s_matrix().transpose() * total
}

/// Total generalized force on the manipulator joints:
/// `τ = τ_act + J_eᵀ𝒲 − g(q)`.
pub fn total_joint_force(model: &VmsModel, cache: &FkCache, inputs: &Inputs) -> DVector<f64> {
    let mut tau = inputs.tau_act.clone();
    tau += end_effector_jacobian(model, cache).transpose() * inputs.ee_wrench;
    if inputs.gravity_enabled {
        tau -= gravity_joint_force(model, cache);
    }
    tau
}

/// Total generalized wrench on the base coordinates: actuation plus the
/// gravity pullback. The end-effector wrench does not appear here; its
/// reaction reaches the base only through the dynamics coupling.
pub fn total_base_wrench(model: &VmsModel, cache: &FkCache, inputs: &Inputs) -> DVector<f64> {
    let mut w = inputs.w_act.clone();
    if inputs.gravity_enabled {
        w += gravity_base_wrench(model, cache);
    }
    w
}

/// `∂H/∂q` of the standard kinetic Hamiltonian at fixed `(p, π)`, evaluated
/// in velocity variables: component `k` is
/// `−½(vᵀ∂ₖM_b v + 2vᵀ∂ₖM_bm q̇ + q̇ᵀ∂ₖM_m q̇)`.
pub fn standard_kinetic_gradient(
    partials: &MassPartials,
    v: &DVector<f64>,
    q_dot: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(partials.d_m_b.len(), |k, _| {
        -0.5 * (v.dot(&(&partials.d_m_b[k] * v))
            + 2.0 * v.dot(&(&partials.d_m_bm[k] * q_dot))
            + q_dot.dot(&(&partials.d_m_m[k] * q_dot)))
    })
}

/// `N_b(p̂)`: column `k` is `½ ∂ₖ(M_b⁻¹) p̂`, so `∂Ĥ/∂q` of the locked base
/// term is `N_bᵀ p̂`.
pub fn n_b_map(blocks: &MassBlocks, partials: &MassPartials, p_hat: &DVector<f64>) -> DMatrix<f64> {
    let mut n_b = DMatrix::zeros(blocks.base_dof(), blocks.n());
    for k in 0..blocks.n() {
        n_b.set_column(k, &(0.5 * (&partials.d_m_b_inv[k] * p_hat)));
    }
    n_b
}

/// `N̂_m(π̂)`: column `k` is `½ ∂ₖ(M̂_m⁻¹) π̂`.
pub fn n_m_hat_map(
    blocks: &MassBlocks,
    partials: &MassPartials,
    pi_hat: &DVector<f64>,
) -> DMatrix<f64> {
    let mut n_m = DMatrix::zeros(blocks.n(), blocks.n());
    for k in 0..blocks.n() {
        n_m.set_column(k, &(0.5 * (&partials.d_m_m_hat_inv[k] * pi_hat)));
    }
    n_m
}

/// `∂Ĥ/∂q` of the decoupled kinetic Hamiltonian at fixed `(p̂, π̂)`:
/// `N_bᵀp̂ + N̂_mᵀπ̂`.
pub fn decoupled_kinetic_gradient(
    blocks: &MassBlocks,
    partials: &MassPartials,
    p_hat: &DVector<f64>,
    pi_hat: &DVector<f64>,
) -> DVector<f64> {
    n_b_map(blocks, partials, p_hat).transpose() * p_hat
        + n_m_hat_map(blocks, partials, pi_hat).transpose() * pi_hat
}

/// `E_b(v̂)`: column `k` is `½ ∂ₖM_b v̂`.
pub fn e_b_map(blocks: &MassBlocks, partials: &MassPartials, v_hat: &DVector<f64>) -> DMatrix<f64> {
    let mut e_b = DMatrix::zeros(blocks.base_dof(), blocks.n());
    for k in 0..blocks.n() {
        e_b.set_column(k, &(0.5 * (&partials.d_m_b[k] * v_hat)));
    }
    e_b
}

/// `P_b(q̇) = ½ Σₖ ∂ₖM_b q̇ₖ`, half the time derivative of the locked
/// inertia along the shape motion.
pub fn p_b_map(blocks: &MassBlocks, partials: &MassPartials, q_dot: &DVector<f64>) -> DMatrix<f64> {
    let b = blocks.base_dof();
    let mut p_b = DMatrix::zeros(b, b);
    for k in 0..blocks.n() {
        p_b += &partials.d_m_b[k] * (0.5 * q_dot[k]);
    }
    p_b
}

/// Coriolis matrix of the reduced shape inertia, from Christoffel symbols of
/// the first kind: `Ĉ_m[i,j] = ½ Σₖ (∂ₖM̂ᵢⱼ + ∂ⱼM̂ᵢₖ − ∂ᵢM̂ⱼₖ) q̇ₖ`.
pub fn c_m_hat_map(
    blocks: &MassBlocks,
    partials: &MassPartials,
    q_dot: &DVector<f64>,
) -> DMatrix<f64> {
    let n = blocks.n();
    DMatrix::from_fn(n, n, |i, j| {
        let mut sum = 0.0;
        for k in 0..n {
            sum += (partials.d_m_m_hat[k][(i, j)] + partials.d_m_m_hat[j][(i, k)]
                - partials.d_m_m_hat[i][(j, k)])
                * q_dot[k];
        }
        0.5 * sum
    })
}

/// `L(p̂)`: column `k` is `(∂ₖA)ᵀ p̂`, the shape-gradient of the connection
/// paired with the locked momentum.
pub fn l_map(blocks: &MassBlocks, partials: &MassPartials, p_hat: &DVector<f64>) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(blocks.n(), blocks.n());
    for k in 0..blocks.n() {
        l.set_column(k, &(partials.d_a[k].transpose() * p_hat));
    }
    l
}

/// Momentum-dependent skew map in the decoupled arm equation:
/// `B(p̂) = −Aᵀ ad_p̂^∼ A + L(p̂) − L(p̂)ᵀ`.
pub fn b_map(
    blocks: &MassBlocks,
    partials: &MassPartials,
    sc: &StructureConstants,
    p_hat: &DVector<f64>,
) -> DMatrix<f64> {
    let l = l_map(blocks, partials, p_hat);
    -(blocks.a.transpose() * sc.ad_dual_tilde(p_hat) * &blocks.a) + &l - l.transpose()
}

/// Linear map `Φ` taking standard state rates `(ṗ; q̇; π̇)` to decoupled
/// rates `(ṗ̂; q̇; π̂̇)` at a fixed state; its lower block row differentiates
/// `π̂ = π − A(q)ᵀp` through the product rule.
pub fn phi_map(blocks: &MassBlocks, partials: &MassPartials, p: &DVector<f64>) -> DMatrix<f64> {
    let b = blocks.base_dof();
    let n = blocks.n();
    let mut phi = DMatrix::identity(b + 2 * n, b + 2 * n);
    phi.view_mut((b + n, 0), (n, b))
        .copy_from(&(-blocks.a.transpose()));
    phi.view_mut((b + n, b), (n, n))
        .copy_from(&(-l_map(blocks, partials, p)));
    phi
}

fn assemble_blocks(
    b: usize,
    n: usize,
    tl: &DMatrix<f64>,
    tr: &DMatrix<f64>,
    bl: &DMatrix<f64>,
    br: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(b + n, b + n);
    m.view_mut((0, 0), (b, b)).copy_from(tl);
    m.view_mut((0, b), (b, n)).copy_from(tr);
    m.view_mut((b, 0), (n, b)).copy_from(bl);
    m.view_mut((b, b), (n, n)).copy_from(br);
    m
}

/// Velocity-gradient part of the reduced Coriolis matrix:
/// `Ĉ₁ = [[P_b, E_b], [−E_bᵀ, Ĉ_m]]`.
pub fn c1_hat(
    blocks: &MassBlocks,
    partials: &MassPartials,
    v_hat: &DVector<f64>,
    q_dot: &DVector<f64>,
) -> DMatrix<f64> {
    let e_b = e_b_map(blocks, partials, v_hat);
    assemble_blocks(
        blocks.base_dof(),
        blocks.n(),
        &p_b_map(blocks, partials, q_dot),
        &e_b,
        &(-e_b.transpose()),
        &c_m_hat_map(blocks, partials, q_dot),
    )
}

/// Momentum-transport part of the reduced Coriolis matrix, built around
/// `ad_{M_b v̂}^∼`:
/// `Ĉ₂ = [[−ad^∼, ad^∼A], [Aᵀad^∼, B(M_b v̂)]]`.
pub fn c2_hat(
    blocks: &MassBlocks,
    partials: &MassPartials,
    sc: &StructureConstants,
    v_hat: &DVector<f64>,
) -> DMatrix<f64> {
    let p_locked = &blocks.m_b * v_hat;
    let ad = sc.ad_dual_tilde(&p_locked);
    assemble_blocks(
        blocks.base_dof(),
        blocks.n(),
        &(-&ad),
        &(&ad * &blocks.a),
        &(blocks.a.transpose() * &ad),
        &b_map(blocks, partials, sc, &p_locked),
    )
}

/// Port-Hamiltonian vector field in the standard momentum variables. The
/// state is read as `(h, q, p, π)` and the returned rates are
/// `ṗ = ad_p^∼ v + w`, `q̇ = ∂H/∂π`, `π̇ = −∂H/∂q + τ`.
pub fn ph_standard_field(
    model: &VmsModel,
    state: &State,
    inputs: &Inputs,
) -> Result<PhVectorField, InertiaError> {
    let cache = forward_kinematics(model, &state.h, &state.q);
    let blocks = mass_blocks(model, &state.q)?;
    let partials = mass_partials(model, &state.q)?;
    let (v, q_dot) = velocities_from_momenta(&blocks, &state.p, &state.pi);
    let v_hat = &v + &blocks.a * &q_dot;
    let dh_dq = standard_kinetic_gradient(&partials, &v, &q_dot);
    let w = total_base_wrench(model, &cache, inputs);
    let tau = total_joint_force(model, &cache, inputs);
    let sc = base_constants(&model.base_kind);
    let p_dot = sc.ad_dual_tilde(&state.p) * &v + w;
    let pi_dot = tau - &dh_dq;
    Ok(PhVectorField {
        p_dot,
        q_dot,
        pi_dot,
        v,
        v_hat,
        dh_dq,
    })
}

/// Port-Hamiltonian vector field in the inertially decoupled variables. The
/// state is read as `(h, q, p̂, π̂)`; the rates are
///
/// ```text
/// ṗ̂ = ad_p̂^∼ (v̂ − A q̇) + w
/// π̂̇ = −Aᵀ ad_p̂^∼ v̂ − ∂Ĥ/∂q − B(p̂) q̇ − Aᵀ w + τ
/// ```
///
/// with `v̂ = M_b⁻¹p̂` and `q̇ = M̂_m⁻¹π̂`. The reported output `v = v̂ − Aq̇`
/// keeps the supplied power identical to the standard form: `Ḣ̂ = wᵀv + τᵀq̇`.
pub fn ph_decoupled_field(
    model: &VmsModel,
    state: &State,
    inputs: &Inputs,
) -> Result<PhVectorField, InertiaError> {
    let cache = forward_kinematics(model, &state.h, &state.q);
    let blocks = mass_blocks(model, &state.q)?;
    let partials = mass_partials(model, &state.q)?;
    let p_hat = &state.p;
    let pi_hat = &state.pi;
    let v_hat = &blocks.m_b_inv * p_hat;
    let q_dot = &blocks.m_m_hat_inv * pi_hat;
    let v = &v_hat - &blocks.a * &q_dot;
    let dh_dq = decoupled_kinetic_gradient(&blocks, &partials, p_hat, pi_hat);
    let w = total_base_wrench(model, &cache, inputs);
    let tau = total_joint_force(model, &cache, inputs);
    let sc = base_constants(&model.base_kind);
    let ad_tilde = sc.ad_dual_tilde(p_hat);
    let transport = &ad_tilde * &v_hat;
    let p_dot = &transport - &ad_tilde * (&blocks.a * &q_dot) + &w;
    let pi_dot = tau
        - blocks.a.transpose() * (&transport + &w)
        - &dh_dq
        - b_map(&blocks, &partials, sc, p_hat) * &q_dot;
    Ok(PhVectorField {
        p_dot,
        q_dot,
        pi_dot,
        v,
        v_hat,
        dh_dq,
    })
}

/// Reduced Euler-Lagrange accelerations `(v̂̇, q̈)` in the locked velocity
/// variables, solving
/// `blkdiag(M_b, M̂_m)(v̂̇; q̈) = (w; τ − Aᵀw) − (Ĉ₁ + Ĉ₂)(v̂; q̇)`.
pub fn reduced_el_accelerations(
    model: &VmsModel,
    h: &JointConfig,
    q: &DVector<f64>,
    v_hat: &DVector<f64>,
    q_dot: &DVector<f64>,
    inputs: &Inputs,
) -> Result<(DVector<f64>, DVector<f64>), InertiaError> {
    let cache = forward_kinematics(model, h, q);
    let blocks = mass_blocks(model, q)?;
    let partials = mass_partials(model, q)?;
    let sc = base_constants(&model.base_kind);
    let b = blocks.base_dof();
    let n = blocks.n();
    let w = total_base_wrench(model, &cache, inputs);
    let tau_hat = total_joint_force(model, &cache, inputs) - blocks.a.transpose() * &w;

    let mut vel = DVector::zeros(b + n);
    vel.rows_mut(0, b).copy_from(v_hat);
    vel.rows_mut(b, n).copy_from(q_dot);
    let mut rhs = DVector::zeros(b + n);
    rhs.rows_mut(0, b).copy_from(&w);
    rhs.rows_mut(b, n).copy_from(&tau_hat);
    rhs -= (c1_hat(&blocks, &partials, v_hat, q_dot) + c2_hat(&blocks, &partials, sc, v_hat)) * vel;

    let v_hat_dot = &blocks.m_b_inv * rhs.rows(0, b);
    let q_ddot = &blocks.m_m_hat_inv * rhs.rows(b, n);
    Ok((v_hat_dot, q_ddot))
}

/// Hamel coefficients `γ_αβ^K` of the moving frame
/// `{u_I = e_I, u_i = ∂_i − A_i^I e_I}` whose dual pairs the locked momentum
/// with the base directions. Only the components with an upper base index are
/// nonzero; they are stored per upper index `K` as
///
/// * `bb[K][(I, J)] = γ_IJ^K = c_IJ^K`,
/// * `bn[K][(I, j)] = γ_Ij^K = −c_IJ^K A_j^J` (and `γ_jI^K = −γ_Ij^K`),
/// * `nn[K][(i, j)] = γ_ij^K = c_IJ^K A_i^I A_j^J + ∂ⱼA_i^K − ∂ᵢA_j^K`.
#[derive(Clone, Debug)]
pub struct HamelCoefficients {
    pub bb: Vec<DMatrix<f64>>,
    pub bn: Vec<DMatrix<f64>>,
    pub nn: Vec<DMatrix<f64>>,
}

/// Compute the Hamel coefficients of the locked-velocity moving frame from
/// the structure constants and the connection's value and shape gradient.
pub fn hamel_coefficients(
    blocks: &MassBlocks,
    partials: &MassPartials,
    sc: &StructureConstants,
) -> HamelCoefficients {
    let b = blocks.base_dof();
    let n = blocks.n();
    let a = &blocks.a;
    let mut bb = Vec::with_capacity(b);
    let mut bn = Vec::with_capacity(b);
    let mut nn = Vec::with_capacity(b);
    for k_up in 0..b {
        let c_k = sc.upper(k_up);
        bb.push(c_k.clone());
        bn.push(-(c_k * a));
        let mut curv = a.transpose() * c_k * a;
        for i in 0..n {
            for j in 0..n {
                curv[(i, j)] += partials.d_a[j][(k_up, i)] - partials.d_a[i][(k_up, j)];
            }
        }
        nn.push(curv);
    }
    HamelCoefficients { bb, bn, nn }
}

/// A point of a trajectory in locked velocity variables together with its
/// accelerations, as consumed by [`boltzmann_hamel_residual`].
#[derive(Clone, Debug)]
pub struct AccelSample {
    pub v_hat: DVector<f64>,
    pub q_dot: DVector<f64>,
    pub v_hat_dot: DVector<f64>,
    pub q_ddot: DVector<f64>,
}

/// Residual of the Boltzmann-Hamel equations at one instant; it is zero
/// exactly when the supplied accelerations solve the dynamics.
///
/// With `p̄ = M_b v̂` the locked momentum and `l̂` the reduced kinetic
/// Lagrangian, the rows are
///
/// ```text
/// base I:  d/dt p̄_I + (γ_IJ^K v̂^J + γ_Ij^K q̇^j) p̄_K − ŵ_I
/// shape i: d/dt (M̂_m q̇)_i − ∂l̂/∂q_i + (γ_iJ^K v̂^J + γ_ij^K q̇^j) p̄_K − τ̂_i
/// ```
///
/// where `ŵ = w` and `τ̂ = τ − Aᵀw` are the forces dual to the moving frame.
pub fn boltzmann_hamel_residual(
    model: &VmsModel,
    h: &JointConfig,
    q: &DVector<f64>,
    sample: &AccelSample,
    inputs: &Inputs,
) -> Result<DVector<f64>, InertiaError> {
    let cache = forward_kinematics(model, h, q);
    let blocks = mass_blocks(model, q)?;
    let partials = mass_partials(model, q)?;
    let sc = base_constants(&model.base_kind);
    let gamma = hamel_coefficients(&blocks, &partials, sc);
    let b = blocks.base_dof();
    let n = blocks.n();
    let w = total_base_wrench(model, &cache, inputs);
    let tau_hat = total_joint_force(model, &cache, inputs) - blocks.a.transpose() * &w;

    let p_locked = &blocks.m_b * &sample.v_hat;
    let mut p_locked_dot = &blocks.m_b * &sample.v_hat_dot;
    let mut pi_hat_dot = &blocks.m_m_hat * &sample.q_ddot;
    for k in 0..n {
        p_locked_dot += &partials.d_m_b[k] * &sample.v_hat * sample.q_dot[k];
        pi_hat_dot += &partials.d_m_m_hat[k] * &sample.q_dot * sample.q_dot[k];
    }

    let mut residual = DVector::zeros(b + n);
    for row in 0..b {
        let mut acc = p_locked_dot[row] - w[row];
        for k in 0..b {
            let momentum = p_locked[k];
            for j in 0..b {
                acc += gamma.bb[k][(row, j)] * sample.v_hat[j] * momentum;
            }
            for j in 0..n {
                acc += gamma.bn[k][(row, j)] * sample.q_dot[j] * momentum;
            }
        }
        residual[row] = acc;
    }
    for row in 0..n {
        let dl_dq = 0.5
            * (sample.v_hat.dot(&(&partials.d_m_b[row] * &sample.v_hat))
                + sample.q_dot.dot(&(&partials.d_m_m_hat[row] * &sample.q_dot)));
        let mut acc = pi_hat_dot[row] - dl_dq - tau_hat[row];
        for k in 0..b {
            let momentum = p_locked[k];
            for j_up in 0..b {
                acc -= gamma.bn[k][(j_up, row)] * sample.v_hat[j_up] * momentum;
            }
            for j in 0..n {
                acc += gamma.nn[k][(row, j)] * sample.q_dot[j] * momentum;
            }
        }
        residual[b + row] = acc;
    }
    Ok(residual)
}

/// Map standard momenta to locked momenta: `p̂ = p`, `π̂ = π − Aᵀp`.
pub fn decoupled_from_standard_momenta(
    blocks: &MassBlocks,
    p: &DVector<f64>,
    pi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    (p.clone(), pi - blocks.a.transpose() * p)
}

/// Inverse of [`decoupled_from_standard_momenta`]: `π = π̂ + Aᵀp̂`.
pub fn standard_from_decoupled_momenta(
    blocks: &MassBlocks,
    p_hat: &DVector<f64>,
    pi_hat: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    (p_hat.clone(), pi_hat + blocks.a.transpose() * p_hat)
}

/// Recover `(v̇, q̈)` from standard momentum rates by removing the mass
/// matrix's own time derivative and solving the block system.
pub fn accelerations_from_standard_rates(
    blocks: &MassBlocks,
    partials: &MassPartials,
    v: &DVector<f64>,
    q_dot: &DVector<f64>,
    p_dot: &DVector<f64>,
    pi_dot: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let mut rhs_p = p_dot.clone();
    let mut rhs_pi = pi_dot.clone();
    for k in 0..blocks.n() {
        let rate = q_dot[k];
        rhs_p -= (&partials.d_m_b[k] * v + &partials.d_m_bm[k] * q_dot) * rate;
        rhs_pi -= (partials.d_m_bm[k].transpose() * v + &partials.d_m_m[k] * q_dot) * rate;
    }
    let q_ddot = &blocks.m_m_hat_inv * (&rhs_pi - blocks.a.transpose() * &rhs_p);
    let v_dot = &blocks.m_b_inv * &rhs_p - &blocks.a * &q_ddot;
    (v_dot, q_ddot)
}

/// Recover `(v̂̇, q̈)` from decoupled momentum rates; the two equations are
/// independent because the decoupled mass matrix is block diagonal.
pub fn accelerations_from_decoupled_rates(
    blocks: &MassBlocks,
    partials: &MassPartials,
    v_hat: &DVector<f64>,
    q_dot: &DVector<f64>,
    p_hat_dot: &DVector<f64>,
    pi_hat_dot: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let mut rhs_p = p_hat_dot.clone();
    let mut rhs_pi = pi_hat_dot.clone();
    for k in 0..blocks.n() {
        rhs_p -= &partials.d_m_b[k] * v_hat * q_dot[k];
        rhs_pi -= &partials.d_m_m_hat[k] * q_dot * q_dot[k];
    }
    (&blocks.m_b_inv * rhs_p, &blocks.m_m_hat_inv * rhs_pi)
}

/// Convert a base acceleration between the two velocity splits:
/// `v̂̇ = v̇ + Ȧq̇ + Aq̈`.
pub fn locked_acceleration(
    blocks: &MassBlocks,
    partials: &MassPartials,
    q_dot: &DVector<f64>,
    v_dot: &DVector<f64>,
    q_ddot: &DVector<f64>,
) -> DVector<f64> {
    let mut out = v_dot + &blocks.a * q_ddot;
    for k in 0..blocks.n() {
        out += &partials.d_a[k] * q_dot * q_dot[k];
    }
    out
}
