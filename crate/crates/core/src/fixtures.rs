//! Hand-built models shared by the unit tests of several modules.

use crate::joints::JointKind;
use crate::liegroup::Pose;
use crate::model::{spatial_inertia_from_primitives, Link, VmsModel};
use nalgebra::{Matrix3, Matrix6, Vector3};

/// Slender-rod style inertia: mass with the center of mass at `com_x` on the
/// link x̂ axis and a rotational inertia consistent with a thin rod.
pub(crate) fn rod_inertia(mass: f64, com_x: f64) -> Matrix6<f64> {
    spatial_inertia_from_primitives(
        mass,
        &Vector3::new(com_x, 0.0, 0.0),
        &Matrix3::from_diagonal(&Vector3::new(
            1e-3,
            mass * com_x * com_x / 3.0,
            mass * com_x * com_x / 3.0,
        )),
    )
    .unwrap()
}

/// Two-link arm (revolute ẑ shoulder, revolute ŷ elbow, offset links) on a
/// base of the given kind, with gravity along −ẑ.
pub(crate) fn two_link(base_kind: JointKind) -> VmsModel {
    VmsModel {
        base_kind,
        base_inertia: spatial_inertia_from_primitives(
            8.0,
            &Vector3::new(0.02, -0.01, 0.03),
            &Matrix3::from_diagonal(&Vector3::new(0.5, 0.6, 0.7)),
        )
        .unwrap(),
        links: vec![
            Link {
                name: "shoulder".into(),
                joint: JointKind::Revolute {
                    axis: Vector3::z(),
                    point: Vector3::zeros(),
                },
                zero_pose: Pose::new(Matrix3::identity(), Vector3::new(0.4, 0.0, 0.1)),
                inertia: rod_inertia(1.5, 0.25),
            },
            Link {
                name: "elbow".into(),
                joint: JointKind::Revolute {
                    axis: Vector3::y(),
                    point: Vector3::zeros(),
                },
                zero_pose: Pose::new(Matrix3::identity(), Vector3::new(0.5, 0.0, 0.0)),
                inertia: rod_inertia(1.0, 0.2),
            },
        ],
        ee_zero_pose: Pose::new(Matrix3::identity(), Vector3::new(0.4, 0.0, 0.0)),
        gravity: Vector3::new(0.0, 0.0, -9.81),
    }
}

pub(crate) fn floating_two_link() -> VmsModel {
    two_link(JointKind::Floating)
}

/// Point mass m = 1.2 kg at r = 0.5 m on the link x̂ axis, revolute about ŷ,
/// fixed base, gravity along −ẑ: the classic pendulum with M_m = m·r².
pub(crate) fn point_mass_pendulum() -> VmsModel {
    VmsModel {
        base_kind: JointKind::Fixed,
        base_inertia: Matrix6::zeros(),
        links: vec![Link {
            name: "bob".into(),
            joint: JointKind::Revolute {
                axis: Vector3::y(),
                point: Vector3::zeros(),
            },
            zero_pose: Pose::identity(),
            inertia: spatial_inertia_from_primitives(
                1.2,
                &Vector3::new(0.5, 0.0, 0.0),
                &Matrix3::zeros(),
            )
            .unwrap(),
        }],
        ee_zero_pose: Pose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)),
        gravity: Vector3::new(0.0, 0.0, -9.81),
    }
}

/// Free rigid body: floating base with an offset center of mass, empty chain,
/// no gravity.
pub(crate) fn free_body() -> VmsModel {
    VmsModel {
        base_kind: JointKind::Floating,
        base_inertia: spatial_inertia_from_primitives(
            3.0,
            &Vector3::new(0.05, -0.04, 0.03),
            &Matrix3::from_diagonal(&Vector3::new(0.04, 0.07, 0.1)),
        )
        .unwrap(),
        links: vec![],
        ee_zero_pose: Pose::identity(),
        gravity: Vector3::zeros(),
    }
}

/// Floating base carrying a point mass on a prismatic joint along x̂. The
/// coupling `M_bm` is constant and the connection `A` is configuration
/// independent, with the closed forms `A = (0; x̂·m/(m_b+m))` and
/// `M̂_m = m·m_b/(m_b+m)` (the reduced mass).
pub(crate) fn reduced_mass_slider() -> VmsModel {
    VmsModel {
        base_kind: JointKind::Floating,
        base_inertia: spatial_inertia_from_primitives(
            5.0,
            &Vector3::zeros(),
            &Matrix3::from_diagonal(&Vector3::new(0.5, 0.6, 0.7)),
        )
        .unwrap(),
        links: vec![Link {
            name: "slider".into(),
            joint: JointKind::Prismatic { axis: Vector3::x() },
            zero_pose: Pose::identity(),
            inertia: spatial_inertia_from_primitives(2.0, &Vector3::zeros(), &Matrix3::zeros())
                .unwrap(),
        }],
        ee_zero_pose: Pose::identity(),
        gravity: Vector3::zeros(),
    }
}
