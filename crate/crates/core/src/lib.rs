//! Geometric rigid-body dynamics for vehicle-manipulator systems (VMS): a
//! serial manipulator mounted on a moving base whose configuration space is a
//! Lie subgroup of SE(3) (floating, planar, or fixed).
//!
//! The library provides three numerically equivalent formulations of the same
//! mechanical system:
//!
//! * a port-Hamiltonian system in the original momentum variables `(p, q, π)`,
//! * an inertially-decoupled port-Hamiltonian system in the locked momentum
//!   variables `(p̂, q, π̂)` obtained through the mechanical connection
//!   `A(q) = M_b⁻¹ M_bm`, and
//! * the reduced Euler-Lagrange equations in the locked velocity `(v̂, q, q̇)`,
//!   together with the Boltzmann-Hamel residual built from Hamel coefficients.
//!
//! Modules are layered bottom-up: [`liegroup`] (SO(3)/SE(3) primitives),
//! [`joints`] (joint subgroups and structure constants), [`model`] (the
//! declarative system description and file format), [`kinematics`] (forward
//! kinematics and geometric Jacobians), [`inertia`] (mass-matrix blocks, the
//! mechanical connection, and their partial derivatives), [`dynamics`] (the
//! formulations and their auxiliary maps), [`integrate`] (fixed-step RK4 with
//! Lie-group-consistent configuration updates), and [`checks`] (the random
//! sampling validation suite used by the CLI and the acceptance tests).

pub mod checks;
pub mod dynamics;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod inertia;
pub mod integrate;
pub mod joints;
pub mod kinematics;
pub mod liegroup;
pub mod model;
