//! Shared fixtures for the criterion benches.

use charflow_core::mesh::{build_triangulated_torus_2d, build_uniform_1d};
use charflow_core::{FieldMoments, Mesh, VelocityField};

/// Periodic unit interval with `n` cells and the sine velocity `1 + 0.5 sin(2 pi x)`.
pub fn interval_fixture(n: usize) -> (Mesh, VelocityField, FieldMoments) {
    let mesh = build_uniform_1d(n, 1.0, true).expect("valid interval mesh");
    let field = VelocityField::Sine1d { base: 1.0, amp: 0.5, freq: 1.0 };
    let moments = FieldMoments::compute(&mesh, &field);
    (mesh, field, moments)
}

/// Triangulated torus with `n x n` squares and the cellular stream field.
pub fn torus_fixture(n: usize) -> (Mesh, VelocityField, FieldMoments) {
    let mesh = build_triangulated_torus_2d(n).expect("valid torus mesh");
    let field = VelocityField::Stream2d { amp: 1.0, freq: 1.0 };
    let moments = FieldMoments::compute(&mesh, &field);
    (mesh, field, moments)
}
