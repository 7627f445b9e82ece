//! Randomised invariants of the discrete operators, the PB solve and one AP step.

use proptest::prelude::*;

use qnepb::apscheme::{ApScheme, SchemeConfig};
use qnepb::diagnostics::{total_energy, total_mass};
use qnepb::discops::{divergence, duality_residual, gradient, log_mean};
use qnepb::pbsolver::{solve_pb, EllipticProblem, PbOptions};
use qnepb::{Bc, BoundarySpec, FaceField, FieldRole, MacMesh, PrimalField, State};

/// Strictly increasing faces on [0, 1] from positive width weights.
fn mesh_from_weights(w: &[f64]) -> MacMesh {
    let total: f64 = w.iter().sum();
    let mut x = vec![0.0];
    let mut acc = 0.0;
    for wi in w {
        acc += wi;
        x.push(acc / total);
    }
    *x.last_mut().unwrap() = 1.0;
    MacMesh::from_face_coords(x, None).unwrap()
}

fn closed_state(mesh: &MacMesh, rho: Vec<f64>, u_inner: &[f64]) -> State {
    let mut u = FaceField::zeros(&mesh.face_counts());
    for (f, v) in u_inner.iter().enumerate() {
        u.axes[0][f + 1] = *v;
    }
    let phi = rho.iter().map(|r| r.ln()).collect();
    State {
        t: 0.0,
        rho: PrimalField::new(FieldRole::Density, rho),
        u,
        phi: PrimalField::new(FieldRole::Potential, phi),
    }
}

fn cells() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (4usize..24).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..2.0, n),
            prop::collection::vec(0.2f64..5.0, n),
            prop::collection::vec(-1.0f64..1.0, n - 1),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_mean_lies_between_geometric_and_arithmetic(a in 1e-8f64..1e4, b in 1e-8f64..1e4) {
        let m = log_mean(a, b);
        let g = (a * b).sqrt();
        let ar = 0.5 * (a + b);
        prop_assert!(m >= g * (1.0 - 1e-12) && m <= ar * (1.0 + 1e-12));
        prop_assert!((m - log_mean(b, a)).abs() <= 1e-14 * m);
    }

    #[test]
    fn gradient_and_divergence_are_dual((w, q, v) in cells()) {
        let mesh = mesh_from_weights(&w);
        let mut flux = FaceField::zeros(&mesh.face_counts());
        for (f, x) in v.iter().enumerate() {
            flux.axes[0][f + 1] = *x;
        }
        prop_assert!(duality_residual(&mesh, &q, &flux).unwrap() < 1e-12);

        // a zero-flux field leaves no net divergence
        let g = gradient(&mesh, &q, &[Bc::NeumannZero; 4]).unwrap();
        let div = divergence(&mesh, &g).unwrap();
        let net: f64 = div.iter().zip(mesh.cell_volumes()).map(|(d, vol)| d * vol).sum();
        prop_assert!(net.abs() < 1e-10);
    }

    #[test]
    fn pb_solution_respects_data_bounds((w, r, _) in cells(), c in 1e-4f64..1.0) {
        let mesh = mesh_from_weights(&w);
        let coeff = FaceField::constant(&mesh.face_counts(), c);
        let p = EllipticProblem::new(&mesh, coeff, r.clone(), [Bc::NeumannZero; 4], PbOptions::default()).unwrap();
        let s = solve_pb(&p, None).unwrap();
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min).ln();
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ln();
        for phi in &s.phi {
            prop_assert!(*phi >= lo - 1e-9 && *phi <= hi + 1e-9);
        }
    }

    #[test]
    fn one_step_keeps_mass_and_positivity((w, rho, u) in cells(), eps in 1e-3f64..1.0) {
        let mesh = mesh_from_weights(&w);
        let state = closed_state(&mesh, rho, &u);
        let scheme = ApScheme::new(&mesh, SchemeConfig::new(eps, BoundarySpec::closed())).unwrap();
        let (next, info) = scheme.step(&state, 1.0).unwrap();
        prop_assert!(info.dt > 0.0);
        prop_assert!(next.rho.values.iter().all(|r| *r > 0.0));
        let m0 = total_mass(&mesh, &state.rho.values);
        let m1 = total_mass(&mesh, &next.rho.values);
        prop_assert!((m1 - m0).abs() <= 1e-13 * m0);
    }

    #[test]
    fn one_step_does_not_raise_energy((w, rho, u) in cells(), eps in 1e-3f64..1.0) {
        let mesh = mesh_from_weights(&w);
        let bc = [Bc::NeumannZero; 4];
        let scheme = ApScheme::new(&mesh, SchemeConfig::new(eps, BoundarySpec::closed())).unwrap();
        // start from a potential consistent with the density so the field energy is well defined
        let mut state = closed_state(&mesh, rho, &u);
        let (first, _) = scheme.step(&state, 1e-12).unwrap();
        state.phi = first.phi;
        let e0 = total_energy(&mesh, &state, eps, &bc).unwrap().total;
        let (next, _) = scheme.step(&state, 1.0).unwrap();
        let e1 = total_energy(&mesh, &next, eps, &bc).unwrap().total;
        prop_assert!(e1 <= e0 + 1e-10 * e0.abs().max(1.0), "{e0} -> {e1}");
    }
}
