//! Discrete gradient, divergence and Laplacian on the MAC grid, and the
//! logarithmic-mean interface density.
//!
//! Face values are stored along `+e^(i)`; the outward sign of a face with
//! respect to a cell is applied where the value is used.

use crate::boundary::{Bc, Side};
use crate::error::{Error, Result};
use crate::field::{first_non_positive, FaceField};
use crate::mesh::{check_len, MacMesh};

/// Relative gap below which the logarithmic mean switches to its series expansion.
pub const LOG_MEAN_SWITCH: f64 = 1e-8;

/// Logarithmic mean `(a − b) / (ln a − ln b)` of two positive numbers.
///
/// Close arguments use `s (1 − t²/3)` with `s = (a+b)/2`, `t = (a−b)/(a+b)`,
/// whose truncation error is `O(t⁴)`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() <= LOG_MEAN_SWITCH * a.max(b) {
        let s = 0.5 * (a + b);
        let t = d / (a + b);
        s * (1.0 - t * t / 3.0)
    } else {
        d / (a.ln() - b.ln())
    }
}

/// `ρ_σ = ρ_{KL}` on interior faces; external faces carry the adjacent cell value.
pub fn interface_density(mesh: &MacMesh, rho: &[f64]) -> Result<FaceField> {
    check_len(mesh, rho)?;
    if let Some((cell, value)) = first_non_positive(rho) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    Ok(FaceField {
        axes: (0..mesh.dim())
            .map(|a| {
                mesh.faces(a)
                    .iter()
                    .map(|g| match (g.minus, g.plus) {
                        (Some(k), Some(l)) => log_mean(rho[k], rho[l]),
                        _ => rho[g.boundary_cell()],
                    })
                    .collect()
            })
            .collect(),
    })
}

/// Donor-cell face density: the value upstream of `u_σ`, the lower cell when `u_σ = 0`.
pub fn upwind_density(mesh: &MacMesh, rho: &[f64], u: &FaceField) -> Result<FaceField> {
    check_len(mesh, rho)?;
    if let Some((cell, value)) = first_non_positive(rho) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    Ok(FaceField {
        axes: (0..mesh.dim())
            .map(|a| {
                mesh.faces(a)
                    .iter()
                    .enumerate()
                    .map(|(f, g)| match (g.minus, g.plus) {
                        (Some(k), Some(l)) => {
                            if u.axes[a][f] >= 0.0 {
                                rho[k]
                            } else {
                                rho[l]
                            }
                        }
                        _ => rho[g.boundary_cell()],
                    })
                    .collect()
            })
            .collect(),
    })
}

/// Gradient value on an external face under boundary condition `bc`.
fn boundary_gradient(mesh: &MacMesh, q: &[f64], axis: usize, f: usize, side: Side, bc: Bc) -> f64 {
    let g = mesh.face(axis, f);
    let k = g.boundary_cell();
    match bc {
        Bc::Dirichlet(value) => {
            // Linear reflection ghost `2 q_b − q_K` at distance h_K.
            let coef = g.area / g.dual_volume;
            if side.outward_sign() > 0.0 {
                coef * (value - q[k])
            } else {
                coef * (q[k] - value)
            }
        }
        Bc::Periodic => {
            let coef = g.area / mesh.periodic_dual_volume(axis, f);
            let p = mesh.periodic_partner(axis, f);
            let other = mesh.face(axis, p).boundary_cell();
            if side.outward_sign() > 0.0 {
                coef * (q[other] - q[k])
            } else {
                coef * (q[k] - q[other])
            }
        }
        Bc::NeumannZero | Bc::ExtrapolateZeroOrder | Bc::NoSlip => 0.0,
    }
}

/// Discrete gradient `(∂q)_σ = (|σ|/|D_σ|)(q_L − q_K)` with external faces set by `bc`.
pub fn gradient(mesh: &MacMesh, q: &[f64], bc: &[Bc; 4]) -> Result<FaceField> {
    check_len(mesh, q)?;
    Ok(FaceField {
        axes: (0..mesh.dim())
            .map(|a| {
                mesh.faces(a)
                    .iter()
                    .enumerate()
                    .map(|(f, g)| match (g.minus, g.plus, g.side) {
                        (Some(k), Some(l), _) => g.grad_coef() * (q[l] - q[k]),
                        (_, _, Some(side)) => boundary_gradient(mesh, q, a, f, side, bc[side.index()]),
                        _ => unreachable!("face without cells"),
                    })
                    .collect()
            })
            .collect(),
    })
}

/// Gradient restricted to interior faces; external faces are zero.
pub fn gradient_interior(mesh: &MacMesh, q: &[f64]) -> FaceField {
    FaceField {
        axes: (0..mesh.dim())
            .map(|a| {
                mesh.faces(a)
                    .iter()
                    .map(|g| match (g.minus, g.plus) {
                        (Some(k), Some(l)) => g.grad_coef() * (q[l] - q[k]),
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect(),
    }
}

fn check_faces(mesh: &MacMesh, v: &FaceField) -> Result<()> {
    if v.dim() != mesh.dim() {
        return Err(Error::Shape {
            expected: mesh.dim(),
            got: v.dim(),
        });
    }
    for a in 0..mesh.dim() {
        if v.axes[a].len() != mesh.face_count(a) {
            return Err(Error::Shape {
                expected: mesh.face_count(a),
                got: v.axes[a].len(),
            });
        }
    }
    Ok(())
}

/// Sum over the faces of each cell of `±|σ| v_σ` (outward orientation), without the `1/|K|`.
pub(crate) fn outward_face_sum(mesh: &MacMesh, v: &FaceField) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for a in 0..mesh.dim() {
        for (g, &val) in mesh.faces(a).iter().zip(&v.axes[a]) {
            let flux = g.area * val;
            if let Some(k) = g.minus {
                out[k] += flux;
            }
            if let Some(l) = g.plus {
                out[l] -= flux;
            }
        }
    }
    out
}

/// Discrete divergence `(div v)_K = (1/|K|) Σ_σ |σ| v_{σ,K}`.
pub fn divergence(mesh: &MacMesh, v: &FaceField) -> Result<Vec<f64>> {
    check_faces(mesh, v)?;
    let mut out = outward_face_sum(mesh, v);
    for (k, o) in out.iter_mut().enumerate() {
        *o /= mesh.cell_volume(k);
    }
    Ok(out)
}

/// Checks a face coefficient: strictly positive on interior faces, non-negative outside.
pub(crate) fn check_coefficient(mesh: &MacMesh, c: &FaceField) -> Result<()> {
    check_faces(mesh, c)?;
    for a in 0..mesh.dim() {
        for (f, (g, &v)) in mesh.faces(a).iter().zip(&c.axes[a]).enumerate() {
            let ok = if g.is_interior() { v > 0.0 } else { v >= 0.0 };
            if !ok || !v.is_finite() {
                return Err(Error::NonPositiveCoefficient {
                    axis: a,
                    face: f,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Discrete Laplacian `div(c ∇q)`; `coeff = None` means `c ≡ 1`.
pub fn laplacian(mesh: &MacMesh, q: &[f64], bc: &[Bc; 4], coeff: Option<&FaceField>) -> Result<Vec<f64>> {
    let mut grad = gradient(mesh, q, bc)?;
    if let Some(c) = coeff {
        check_coefficient(mesh, c)?;
        for a in 0..mesh.dim() {
            for (gv, cv) in grad.axes[a].iter_mut().zip(&c.axes[a]) {
                *gv *= cv;
            }
        }
    }
    divergence(mesh, &grad)
}

/// Defect of the div–grad duality: `Σ_K |K| q_K (div v)_K + Σ_σ |D_σ| (∂q)_σ v_σ`
/// over interior faces. Vanishes for `v` zero on external faces.
pub fn duality_residual(mesh: &MacMesh, q: &[f64], v: &FaceField) -> Result<f64> {
    check_len(mesh, q)?;
    check_faces(mesh, v)?;
    // |K| (div v)_K without the division, so constant q gives an exact zero
    let flux_sum = outward_face_sum(mesh, v);
    let mut sum_div = 0.0;
    for k in 0..mesh.n_cells() {
        sum_div += q[k] * flux_sum[k];
    }
    let mut sum_grad = 0.0;
    for a in 0..mesh.dim() {
        for (g, &val) in mesh.faces(a).iter().zip(&v.axes[a]) {
            if let (Some(k), Some(l)) = (g.minus, g.plus) {
                sum_grad += g.dual_volume * g.grad_coef() * (q[l] - q[k]) * val;
            }
        }
    }
    Ok(sum_div + sum_grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Grading};

    const NEU: [Bc; 4] = [Bc::NeumannZero; 4];

    fn m1(n: usize) -> MacMesh {
        build_mesh(&[(0.0, 1.0)], &[n], &[Grading::Uniform]).unwrap()
    }

    #[test]
    fn log_mean_values() {
        assert_eq!(log_mean(2.0, 2.0), 2.0);
        let e = std::f64::consts::E;
        assert!((log_mean(1.0, e) - (e - 1.0)).abs() < 1e-15);
        assert!((log_mean(1.0, e) - 1.718281828).abs() < 1e-9);
        let near = log_mean(1.0, 1.0 + 1e-14);
        assert!((near - (1.0 + 0.5e-14)).abs() < 1e-15);
    }

    #[test]
    fn log_mean_defining_identity_across_switch() {
        for &gap in &[1e-9, 5e-9, 1e-8, 2e-8, 1e-6, 1e-3, 0.5] {
            let a = 3.0;
            let b = a * (1.0 + gap);
            let m = log_mean(a, b);
            let lhs = a - b;
            let rhs = m * (a.ln() - b.ln());
            assert!((lhs - rhs).abs() <= 1e-14 * a + 1e-9 * lhs.abs(), "gap {gap}");
            assert!(m >= a && m <= b);
        }
    }

    #[test]
    fn gradient_examples() {
        let m = m1(10);
        let g = gradient(&m, &[4.0; 10], &NEU).unwrap();
        assert!(g.axis(0).iter().all(|&v| v == 0.0));

        let x: Vec<f64> = (0..10).map(|k| m.cell_center(k)[0]).collect();
        let g = gradient(&m, &x, &NEU).unwrap();
        for &v in &g.axis(0)[1..10] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(g.axis(0)[0], 0.0);
    }

    #[test]
    fn periodic_sine_gradient_antisymmetric() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let n = 40;
        let m = build_mesh(&[(0.0, two_pi)], &[n], &[]).unwrap();
        let h = two_pi / n as f64;
        let q: Vec<f64> = (0..n).map(|k| m.cell_center(k)[0].sin()).collect();
        let per = [Bc::Periodic, Bc::Periodic, Bc::NeumannZero, Bc::NeumannZero];
        let g = gradient(&m, &q, &per).unwrap();
        let gx = g.axis(0);
        for f in 1..n {
            assert!((gx[f] - (q[f] - q[f - 1]) / h).abs() < 1e-12);
        }
        let seam = (q[0] - q[n - 1]) / h;
        assert!((gx[0] - seam).abs() < 1e-12 && (gx[n] - seam).abs() < 1e-12);
        // faces i and n - i mirror about the midpoint of the domain (cos is even there)
        for f in 0..=n {
            assert!((gx[f] - gx[n - f]).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_gradient_uses_reflection_ghost() {
        let m = m1(4);
        let bc = [Bc::NeumannZero, Bc::Dirichlet(2.0), Bc::NeumannZero, Bc::NeumannZero];
        let g = gradient(&m, &[1.0; 4], &bc).unwrap();
        // ghost = 2*2 - 1 = 3 at distance h = 0.25
        assert!((g.axis(0)[4] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_examples() {
        let m = m1(5);
        let v = FaceField { axes: vec![vec![0.0, 2.0, 2.0, 2.0, 2.0, 0.0]] };
        let d = divergence(&m, &v).unwrap();
        assert!((d[0] - 2.0 / 0.2).abs() < 1e-12);
        assert!((d[4] + 2.0 / 0.2).abs() < 1e-12);
        for &x in &d[1..4] {
            assert!(x.abs() < 1e-12);
        }
        let total: f64 = (0..5).map(|k| m.cell_volume(k) * d[k]).sum();
        assert!(total.abs() < 1e-14);

        let xs: Vec<f64> = m.faces(0).iter().map(|g| g.center[0]).collect();
        let d = divergence(&m, &FaceField { axes: vec![xs] }).unwrap();
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn laplacian_stencil_row() {
        let m = m1(6);
        let h = 1.0 / 6.0;
        let q = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let l = laplacian(&m, &q, &NEU, None).unwrap();
        assert!((l[1] - 1.0 / (h * h)).abs() < 1e-9);
        assert!((l[2] + 2.0 / (h * h)).abs() < 1e-9);
        assert!((l[3] - 1.0 / (h * h)).abs() < 1e-9);
        let c = FaceField::constant(&m.face_counts(), 2.5);
        let lc = laplacian(&m, &q, &NEU, Some(&c)).unwrap();
        for k in 0..6 {
            assert!((lc[k] - 2.5 * l[k]).abs() < 1e-9);
        }
        assert!(laplacian(&m, &[3.0; 6], &NEU, None).unwrap().iter().all(|v| v.abs() < 1e-12));
        let bad = FaceField::constant(&m.face_counts(), -1.0);
        assert!(laplacian(&m, &q, &NEU, Some(&bad)).is_err());
    }

    #[test]
    fn duality_constant_q_exact() {
        let m = build_mesh(&[(0.0, 1.0), (0.0, 2.0)], &[4, 3], &[]).unwrap();
        let mut v = FaceField::constant(&m.face_counts(), 0.7);
        for a in 0..2 {
            for (f, g) in m.faces(a).iter().enumerate() {
                if !g.is_interior() {
                    v.axes[a][f] = 0.0;
                }
            }
        }
        assert_eq!(duality_residual(&m, &[1.5; 12], &v).unwrap(), 0.0);
    }

    #[test]
    fn interface_density_rejects_non_positive() {
        let m = m1(3);
        assert!(matches!(
            interface_density(&m, &[1.0, 0.0, 1.0]),
            Err(Error::NonPositiveDensity { cell: 1, .. })
        ));
    }
}
