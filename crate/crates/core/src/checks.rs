//! Randomized validation suite: every structural identity the formulations
//! are supposed to satisfy, evaluated at sampled states and reported as one
//! worst-case residual per check.
//!
//! Each check normalizes its residual by a scale natural to the quantity
//! (power, momentum norms, …) so a single threshold works across models and
//! sample magnitudes. The sampler is seeded explicitly; a reported failure is
//! reproducible by rerunning with the same seed.

use crate::dynamics::{
    accelerations_from_decoupled_rates, accelerations_from_standard_rates, b_map,
    base_constants, boltzmann_hamel_residual, c1_hat, c_m_hat_map, decoupled_from_standard_momenta,
    decoupled_kinetic_gradient, e_b_map, hamel_coefficients, l_map, locked_acceleration, n_b_map,
    n_m_hat_map, p_b_map, ph_decoupled_field, ph_standard_field, phi_map,
    reduced_el_accelerations, total_base_wrench, total_joint_force, AccelSample, Inputs,
};
use crate::inertia::{
    hamiltonian_kinetic, mass_blocks, mass_partials, velocities_from_momenta, InertiaError,
};
use crate::joints::JointConfig;
use crate::joints::JointKind;
use crate::kinematics::{forward_kinematics, link_jacobian_spatial};
use crate::liegroup::{exp_se3, Twist, Wrench};
use crate::model::{State, VmsModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Worst-case normalized residual of one identity over all samples.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_residual: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.threshold
    }
}

struct Acc {
    name: &'static str,
    threshold: f64,
    worst: f64,
}

fn observe(accs: &mut [Acc], name: &str, residual: f64) {
    let acc = accs
        .iter_mut()
        .find(|a| a.name == name)
        .expect("check name is registered");
    if residual > acc.worst {
        acc.worst = residual;
    }
}

/// Draw a state with shape coordinates uniform in [−1, 1], a base
/// configuration uniform in the same chart range (exponential of a uniform
/// twist for floating bases), and momenta scaled like `N(0,1)·√(diag 𝓜)` so
/// the sampled energies stay comparable across models.
pub fn random_state(model: &VmsModel, rng: &mut ChaCha8Rng) -> Result<State, InertiaError> {
    let q = DVector::from_fn(model.n(), |_, _| rng.random_range(-1.0..1.0));
    let h = match model.base_kind {
        JointKind::Floating => {
            let xi = Twist::from_fn(|_, _| rng.random_range(-1.0..1.0));
            JointConfig::Pose(exp_se3(&xi, 1.0))
        }
        JointKind::Planar => JointConfig::Planar {
            theta: rng.random_range(-1.0..1.0),
            x: rng.random_range(-1.0..1.0),
            y: rng.random_range(-1.0..1.0),
        },
        _ => JointConfig::Empty,
    };
    let blocks = mass_blocks(model, &q)?;
    let full = blocks.full();
    let b = model.base_dof();
    let p = DVector::from_fn(b, |i, _| {
        rng.sample::<f64, _>(StandardNormal) * full[(i, i)].sqrt()
    });
    let pi = DVector::from_fn(model.n(), |i, _| {
        rng.sample::<f64, _>(StandardNormal) * full[(b + i, b + i)].sqrt()
    });
    Ok(State { h, q, p, pi })
}

/// Draw standard-normal actuation on every port, gravity enabled.
pub fn random_inputs(model: &VmsModel, rng: &mut ChaCha8Rng) -> Inputs {
    Inputs {
        w_act: DVector::from_fn(model.base_dof(), |_, _| rng.sample::<f64, _>(StandardNormal)),
        tau_act: DVector::from_fn(model.n(), |_, _| rng.sample::<f64, _>(StandardNormal)),
        ee_wrench: Wrench::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
        gravity_enabled: true,
    }
}

/// Run every check against `samples` random states drawn from the given
/// seed and return one result per check, in a stable order.
pub fn run_all_checks(
    model: &VmsModel,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckResult>, InertiaError> {
    let mut accs = [
        ("power_balance_standard", 1e-10),
        ("power_balance_decoupled", 1e-10),
        ("power_expressions_agree", 1e-10),
        ("skew_j_standard", 1e-12),
        ("skew_j_decoupled", 1e-12),
        ("skew_b_map", 1e-12),
        ("c1_block_structure", 1e-12),
        ("lemma1_legendre", 1e-10),
        ("lemma3_locked_inertia", 1e-8),
        ("lemma3_manipulator", 1e-8),
        ("lemma4_locked", 1e-8),
        ("lemma4_manipulator", 1e-8),
        ("gradient_standard_fd", 1e-6),
        ("gradient_decoupled_fd", 1e-6),
        ("accel_equivalence", 1e-6),
        ("boltzmann_hamel", 1e-7),
        ("hamel_antisymmetry", 1e-12),
        ("phi_transport", 1e-7),
        ("mass_spd", 0.0),
        ("kinetic_identity", 1e-10),
        ("minv_partials", 1e-8),
    ]
    .map(|(name, threshold)| Acc {
        name,
        threshold,
        worst: 0.0,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = base_constants(&model.base_kind);
    for _ in 0..samples {
        let state = random_state(model, &mut rng)?;
        let inputs = random_inputs(model, &mut rng);
        let cache = forward_kinematics(model, &state.h, &state.q);
        let blocks = mass_blocks(model, &state.q)?;
        let partials = mass_partials(model, &state.q)?;
        let b = blocks.base_dof();
        let n = blocks.n();
        let w = total_base_wrench(model, &cache, &inputs);
        let tau = total_joint_force(model, &cache, &inputs);
        let (v, q_dot) = velocities_from_momenta(&blocks, &state.p, &state.pi);
        let v_hat = &v + &blocks.a * &q_dot;
        let (p_hat, pi_hat) = decoupled_from_standard_momenta(&blocks, &state.p, &state.pi);
        let tau_hat = &tau - blocks.a.transpose() * &w;

        // The full mass matrix must stay symmetric positive definite.
        let full = blocks.full();
        let min_eig = full
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .fold(f64::INFINITY, f64::min);
        observe(&mut accs, "mass_spd", (-min_eig).max(0.0));

        // Block-assembled kinetic energy against the per-body twist sum.
        let h_kin = hamiltonian_kinetic(&blocks, &state.p, &state.pi);
        let mut stacked = DVector::zeros(b + n);
        stacked.rows_mut(0, b).copy_from(&v);
        stacked.rows_mut(b, n).copy_from(&q_dot);
        let base_twist = model.base_s_matrix() * &v;
        let mut energy = 0.5
            * base_twist.dot(&(crate::liegroup::to_dynamic(&model.base_inertia) * &base_twist));
        for (i, link) in model.links.iter().enumerate() {
            let twist = link_jacobian_spatial(model, &cache, i) * &stacked;
            energy += 0.5 * twist.dot(&(crate::liegroup::to_dynamic(&link.inertia) * &twist));
        }
        observe(
            &mut accs,
            "kinetic_identity",
            (h_kin - energy).abs() / (1.0 + energy.abs()),
        );

        // Both port-Hamiltonian fields and their power balances.
        let std_field = ph_standard_field(model, &state, &inputs)?;
        let hat_state = State {
            h: state.h.clone(),
            q: state.q.clone(),
            p: p_hat.clone(),
            pi: pi_hat.clone(),
        };
        let dec_field = ph_decoupled_field(model, &hat_state, &inputs)?;

        let supplied = w.dot(&std_field.v) + tau.dot(&std_field.q_dot);
        let h_dot_std = std_field.v.dot(&std_field.p_dot)
            + std_field.q_dot.dot(&std_field.pi_dot)
            + std_field.dh_dq.dot(&std_field.q_dot);
        observe(
            &mut accs,
            "power_balance_standard",
            (h_dot_std - supplied).abs() / (1.0 + supplied.abs()),
        );

        let h_dot_dec = dec_field.v_hat.dot(&dec_field.p_dot)
            + dec_field.q_dot.dot(&dec_field.pi_dot)
            + dec_field.dh_dq.dot(&dec_field.q_dot);
        let supplied_dec = w.dot(&dec_field.v) + tau.dot(&dec_field.q_dot);
        observe(
            &mut accs,
            "power_balance_decoupled",
            (h_dot_dec - supplied_dec).abs() / (1.0 + supplied_dec.abs()),
        );
        let supplied_hat = w.dot(&dec_field.v_hat) + tau_hat.dot(&dec_field.q_dot);
        observe(
            &mut accs,
            "power_expressions_agree",
            (supplied_dec - supplied_hat).abs() / (1.0 + supplied_dec.abs()),
        );

        // Interconnection matrices of both forms are skew-symmetric.
        let dim = b + 2 * n;
        let ad = sc.ad_dual_tilde(&state.p);
        let mut j_std = DMatrix::zeros(dim, dim);
        j_std.view_mut((0, 0), (b, b)).copy_from(&ad);
        for i in 0..n {
            j_std[(b + i, b + n + i)] = 1.0;
            j_std[(b + n + i, b + i)] = -1.0;
        }
        observe(
            &mut accs,
            "skew_j_standard",
            (&j_std + j_std.transpose()).norm(),
        );

        let ad_hat = sc.ad_dual_tilde(&p_hat);
        let b_mat = b_map(&blocks, &partials, sc, &p_hat);
        let mut j_dec = DMatrix::zeros(dim, dim);
        j_dec.view_mut((0, 0), (b, b)).copy_from(&ad_hat);
        j_dec
            .view_mut((0, b + n), (b, n))
            .copy_from(&(-(&ad_hat * &blocks.a)));
        j_dec
            .view_mut((b + n, 0), (n, b))
            .copy_from(&(-(blocks.a.transpose() * &ad_hat)));
        j_dec.view_mut((b + n, b + n), (n, n)).copy_from(&(-&b_mat));
        for i in 0..n {
            j_dec[(b + i, b + n + i)] = 1.0;
            j_dec[(b + n + i, b + i)] = -1.0;
        }
        observe(
            &mut accs,
            "skew_j_decoupled",
            (&j_dec + j_dec.transpose()).norm(),
        );
        observe(
            &mut accs,
            "skew_b_map",
            (&b_mat + b_mat.transpose()).norm(),
        );

        // The assembled Ĉ₁ must tile exactly from its defining maps.
        let e_b = e_b_map(&blocks, &partials, &v_hat);
        let p_b = p_b_map(&blocks, &partials, &q_dot);
        let c_m = c_m_hat_map(&blocks, &partials, &q_dot);
        let c1 = c1_hat(&blocks, &partials, &v_hat, &q_dot);
        let c1_residual = (c1.view((0, 0), (b, b)) - &p_b).norm()
            + (c1.view((0, b), (b, n)) - &e_b).norm()
            + (c1.view((b, 0), (n, b)) + e_b.transpose()).norm()
            + (c1.view((b, b), (n, n)) - &c_m).norm();
        observe(&mut accs, "c1_block_structure", c1_residual);

        // Momentum map against the Legendre transform of the locked split.
        let p_hat_legendre = &blocks.m_b * &v_hat;
        let pi_hat_legendre = &blocks.m_m_hat * &q_dot;
        let momentum_scale = 1.0 + p_hat.norm() + pi_hat.norm();
        observe(
            &mut accs,
            "lemma1_legendre",
            ((&p_hat_legendre - &p_hat).norm() + (&pi_hat_legendre - &pi_hat).norm())
                / momentum_scale,
        );

        // Velocity maps against an independent directional derivative of the
        // mass blocks (different step size than the stored partials).
        let eps = 1e-5;
        let blocks_plus = mass_blocks(model, &(&state.q + &(eps * &q_dot)))?;
        let blocks_minus = mass_blocks(model, &(&state.q - &(eps * &q_dot)))?;
        let m_b_rate = (&blocks_plus.m_b - &blocks_minus.m_b) / (2.0 * eps);
        let m_hat_rate = (&blocks_plus.m_m_hat - &blocks_minus.m_m_hat) / (2.0 * eps);
        let velocity_scale = (1.0 + v_hat.norm()) * (1.0 + q_dot.norm());
        observe(
            &mut accs,
            "lemma3_locked_inertia",
            (&m_b_rate * &v_hat - (&e_b * &q_dot + &p_b * &v_hat)).norm() / velocity_scale,
        );
        observe(
            &mut accs,
            "lemma3_manipulator",
            (&m_hat_rate * &q_dot - (&c_m + c_m.transpose()) * &q_dot).norm() / velocity_scale,
        );

        // Momentum-gradient maps mirror the velocity maps.
        let momentum_pair_scale = 1.0 + p_hat.norm() * v_hat.norm() + pi_hat.norm() * q_dot.norm();
        let lemma4_locked = (n_b_map(&blocks, &partials, &p_hat).transpose() * &p_hat
            + e_b.transpose() * &v_hat)
            .norm();
        observe(
            &mut accs,
            "lemma4_locked",
            lemma4_locked / momentum_pair_scale,
        );
        let lemma4_manipulator = (n_m_hat_map(&blocks, &partials, &pi_hat).transpose() * &pi_hat
            + c_m.transpose() * &q_dot)
            .norm();
        observe(
            &mut accs,
            "lemma4_manipulator",
            lemma4_manipulator / momentum_pair_scale,
        );

        // Shape gradients of both Hamiltonians against central differences.
        let grad_dec = decoupled_kinetic_gradient(&blocks, &partials, &p_hat, &pi_hat);
        for k in 0..n {
            let mut q_plus = state.q.clone();
            let mut q_minus = state.q.clone();
            q_plus[k] += eps;
            q_minus[k] -= eps;
            let bp = mass_blocks(model, &q_plus)?;
            let bm = mass_blocks(model, &q_minus)?;
            let fd_std = (hamiltonian_kinetic(&bp, &state.p, &state.pi)
                - hamiltonian_kinetic(&bm, &state.p, &state.pi))
                / (2.0 * eps);
            observe(
                &mut accs,
                "gradient_standard_fd",
                (std_field.dh_dq[k] - fd_std).abs() / (1.0 + fd_std.abs()),
            );
            let hat_energy = |blocks: &crate::inertia::MassBlocks| {
                0.5 * (p_hat.dot(&(&blocks.m_b_inv * &p_hat))
                    + pi_hat.dot(&(&blocks.m_m_hat_inv * &pi_hat)))
            };
            let fd_dec = (hat_energy(&bp) - hat_energy(&bm)) / (2.0 * eps);
            observe(
                &mut accs,
                "gradient_decoupled_fd",
                (grad_dec[k] - fd_dec).abs() / (1.0 + fd_dec.abs()),
            );
        }

        // All three formulations produce the same accelerations.
        let (v_dot, q_ddot_std) = accelerations_from_standard_rates(
            &blocks,
            &partials,
            &std_field.v,
            &std_field.q_dot,
            &std_field.p_dot,
            &std_field.pi_dot,
        );
        let v_hat_dot_std =
            locked_acceleration(&blocks, &partials, &std_field.q_dot, &v_dot, &q_ddot_std);
        let (v_hat_dot_dec, q_ddot_dec) = accelerations_from_decoupled_rates(
            &blocks,
            &partials,
            &dec_field.v_hat,
            &dec_field.q_dot,
            &dec_field.p_dot,
            &dec_field.pi_dot,
        );
        let (v_hat_dot_el, q_ddot_el) =
            reduced_el_accelerations(model, &state.h, &state.q, &v_hat, &q_dot, &inputs)?;
        let accel_scale = 1.0 + v_hat_dot_el.norm() + q_ddot_el.norm();
        let accel_residual = [
            (&v_hat_dot_std - &v_hat_dot_dec).norm(),
            (&q_ddot_std - &q_ddot_dec).norm(),
            (&v_hat_dot_el - &v_hat_dot_dec).norm(),
            (&q_ddot_el - &q_ddot_dec).norm(),
        ]
        .into_iter()
        .fold(0.0_f64, f64::max);
        observe(&mut accs, "accel_equivalence", accel_residual / accel_scale);

        // The Boltzmann-Hamel residual certifies those accelerations.
        let sample = AccelSample {
            v_hat: v_hat.clone(),
            q_dot: q_dot.clone(),
            v_hat_dot: v_hat_dot_el,
            q_ddot: q_ddot_el,
        };
        let bh = boltzmann_hamel_residual(model, &state.h, &state.q, &sample, &inputs)?;
        let force_scale = 1.0 + (w.norm_squared() + tau_hat.norm_squared()).sqrt();
        observe(&mut accs, "boltzmann_hamel", bh.norm() / force_scale);

        // Hamel coefficients are antisymmetric in their lower index pair.
        let gamma = hamel_coefficients(&blocks, &partials, sc);
        let mut hamel_residual = 0.0_f64;
        for k in 0..b {
            hamel_residual = hamel_residual
                .max((&gamma.bb[k] + gamma.bb[k].transpose()).norm())
                .max((&gamma.nn[k] + gamma.nn[k].transpose()).norm());
        }
        observe(&mut accs, "hamel_antisymmetry", hamel_residual);

        // The two field evaluations agree through the momentum map Φ.
        let mut std_rates = DVector::zeros(dim);
        std_rates.rows_mut(0, b).copy_from(&std_field.p_dot);
        std_rates.rows_mut(b, n).copy_from(&std_field.q_dot);
        std_rates.rows_mut(b + n, n).copy_from(&std_field.pi_dot);
        let mut dec_rates = DVector::zeros(dim);
        dec_rates.rows_mut(0, b).copy_from(&dec_field.p_dot);
        dec_rates.rows_mut(b, n).copy_from(&dec_field.q_dot);
        dec_rates.rows_mut(b + n, n).copy_from(&dec_field.pi_dot);
        let transported = phi_map(&blocks, &partials, &state.p) * &std_rates;
        observe(
            &mut accs,
            "phi_transport",
            (&transported - &dec_rates).norm() / (1.0 + dec_rates.norm()),
        );

        // Differenced inverses satisfy ∂(M⁻¹) = −M⁻¹ ∂M M⁻¹.
        for k in 0..n {
            let locked = (&partials.d_m_b_inv[k]
                + &blocks.m_b_inv * &partials.d_m_b[k] * &blocks.m_b_inv)
                .norm()
                / (1.0 + partials.d_m_b_inv[k].norm());
            let shape = (&partials.d_m_m_hat_inv[k]
                + &blocks.m_m_hat_inv * &partials.d_m_m_hat[k] * &blocks.m_m_hat_inv)
                .norm()
                / (1.0 + partials.d_m_m_hat_inv[k].norm());
            observe(&mut accs, "minv_partials", locked.max(shape));
        }
        // Keep the connection-gradient map exercised even when it is zero.
        let _ = l_map(&blocks, &partials, &p_hat);
    }

    Ok(accs
        .into_iter()
        .map(|acc| CheckResult {
            name: acc.name,
            max_residual: acc.worst,
            threshold: acc.threshold,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{floating_two_link, free_body, point_mass_pendulum, two_link};
    use rand::SeedableRng;

    #[test]
    fn every_check_passes_on_the_fixture_models() {
        for (model, label) in [
            (floating_two_link(), "floating"),
            (two_link(JointKind::Planar), "planar"),
            (two_link(JointKind::Fixed), "fixed"),
            (free_body(), "free body"),
            (point_mass_pendulum(), "pendulum"),
        ] {
            for check in run_all_checks(&model, 50, 1).unwrap() {
                assert!(
                    check.passed(),
                    "{label}: {} residual {} over threshold {}",
                    check.name,
                    check.max_residual,
                    check.threshold
                );
            }
        }
    }

    #[test]
    fn results_are_deterministic_for_a_seed() {
        let model = floating_two_link();
        let first = run_all_checks(&model, 10, 42).unwrap();
        let second = run_all_checks(&model, 10, 42).unwrap();
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.max_residual.to_bits(), b.max_residual.to_bits());
        }
        let other_seed = run_all_checks(&model, 10, 43).unwrap();
        assert!(
            first
                .iter()
                .zip(&other_seed)
                .any(|(a, b)| a.max_residual != b.max_residual),
            "different seeds should explore different states"
        );
    }

    #[test]
    fn sampler_respects_the_base_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let floating = random_state(&floating_two_link(), &mut rng).unwrap();
        assert!(matches!(floating.h, JointConfig::Pose(_)));
        assert_eq!(floating.p.len(), 6);
        let planar = random_state(&two_link(JointKind::Planar), &mut rng).unwrap();
        assert!(matches!(planar.h, JointConfig::Planar { .. }));
        assert_eq!(planar.p.len(), 3);
        let fixed = random_state(&point_mass_pendulum(), &mut rng).unwrap();
        assert!(matches!(fixed.h, JointConfig::Empty));
        assert_eq!(fixed.p.len(), 0);
        assert_eq!(fixed.pi.len(), 1);
    }
}
