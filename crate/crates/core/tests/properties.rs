use charflow_core::chain::{decompose, mc_expectation, sample_path, trace_points};
use charflow_core::field::{FieldMoments, VelocityField};
use charflow_core::kernel::{
    build_co, build_forward, invariance_residual, reversal_identity_residual, row_sum_residual, EnteringBarycenters,
};
use charflow_core::mesh::{build_nonuniform_1d, build_triangulated_torus_2d, mesh_from_json, mesh_hash, mesh_to_json};
use charflow_core::rng::derive_seed;
use charflow_core::solver::{run, CellField};
use proptest::prelude::*;

fn widths() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.5, 2..9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mesh_json_roundtrip_keeps_hash(w in widths(), periodic in any::<bool>()) {
        let m = build_nonuniform_1d(&w, periodic).unwrap();
        let back = mesh_from_json(&mesh_to_json(&m), "roundtrip").unwrap();
        prop_assert_eq!(mesh_hash(&m), mesh_hash(&back));
        prop_assert_eq!(back.len(), m.len());
    }

    #[test]
    fn kernels_are_stochastic_and_reversible(w in widths(), amp in 0.0f64..0.9, lambda in 0.05f64..1.0) {
        let mesh = build_nonuniform_1d(&w, true).unwrap();
        let f = VelocityField::Sine1d { base: 1.0, amp, freq: 1.0 / mesh.total_volume() };
        let mo = FieldMoments::compute(&mesh, &f);
        let dt = lambda * charflow_core::kernel::cfl_dt_max(&mesh, &mo);
        let p = build_forward(&mesh, &mo, dt).unwrap();
        let q = build_co(&mesh, &mo, dt).unwrap();
        prop_assert!(row_sum_residual(&p) < 1e-12);
        prop_assert!(reversal_identity_residual(&p, &q, &mesh) < 1e-12);
        for k in 0..p.len() {
            prop_assert!(p.self_weight(k) >= 0.0);
            prop_assert!(p.row(k).iter().all(|e| e.weight > 0.0));
        }
    }

    #[test]
    fn stream_field_preserves_lebesgue(n in 2usize..7, amp in 0.1f64..2.0, lambda in 0.05f64..1.0) {
        let mesh = build_triangulated_torus_2d(n).unwrap();
        let mo = FieldMoments::compute(&mesh, &VelocityField::Stream2d { amp, freq: 1.0 });
        let dt = lambda * charflow_core::kernel::cfl_dt_max(&mesh, &mo);
        let p = build_forward(&mesh, &mo, dt).unwrap();
        let worst = invariance_residual(&p, &mesh).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        prop_assert!(worst < 1e-12, "{}", worst);
    }

    #[test]
    fn decomposition_telescopes(seed in any::<u64>(), n in 1usize..24) {
        // S_N + R_N = X_N - X_0 + dt sum a(X_i), pathwise
        let mesh = build_triangulated_torus_2d(4).unwrap();
        let f = VelocityField::Compressible2d { base: [1.0, 0.5], amp: 0.3, freq: 1.0 };
        let mo = FieldMoments::compute(&mesh, &f);
        let p = build_forward(&mesh, &mo, 0.5 * charflow_core::kernel::cfl_dt_max(&mesh, &mo)).unwrap();
        let eb = EnteringBarycenters::compute(&mesh, &f, &mo);
        let tr = trace_points(&sample_path(&p, (seed % 32) as usize, n, seed), &mesh, &eb);
        let d = decompose(&tr, &mesh, &f, &p);
        let drift = tr.points[..n].iter().fold(charflow_core::Point::zeros(), |a, x| a + f.eval(x) * p.dt);
        let lhs = d.s[n] + d.r[n];
        let rhs = tr.points[n] - tr.points[0] + drift;
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn scheme_respects_bounds(w in widths(), vals in prop::collection::vec(-5.0f64..5.0, 8), steps in 0usize..20) {
        let mesh = build_nonuniform_1d(&w, true).unwrap();
        let f = VelocityField::Sine1d { base: 0.2, amp: 1.0, freq: 1.0 / mesh.total_volume() };
        let mo = FieldMoments::compute(&mesh, &f);
        let p = build_forward(&mesh, &mo, 0.7 * charflow_core::kernel::cfl_dt_max(&mesh, &mo)).unwrap();
        let u0 = CellField::new(vals[..mesh.len()].to_vec());
        let u = run(&p, &u0, steps);
        prop_assert!(u.min() >= u0.min() - 1e-12 && u.max() <= u0.max() + 1e-12);
    }
}

#[test]
fn monte_carlo_is_thread_independent() {
    let mesh = build_triangulated_torus_2d(4).unwrap();
    let f = VelocityField::Stream2d { amp: 1.0, freq: 1.0 };
    let mo = FieldMoments::compute(&mesh, &f);
    let p = build_forward(&mesh, &mo, 0.5 * charflow_core::kernel::cfl_dt_max(&mesh, &mo)).unwrap();
    let u0: Vec<f64> = (0..mesh.len()).map(|k| (k as f64).sin()).collect();
    let seed = derive_seed(20261014, 7);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| mc_expectation(&p, &u0, 3, 8, 4000, seed));
    let b = four.install(|| mc_expectation(&p, &u0, 3, 8, 4000, seed));
    assert_eq!(a, b);
}
