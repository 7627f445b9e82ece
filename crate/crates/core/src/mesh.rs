//! Cartesian MAC grids in one and two dimensions.
//!
//! Scalars live on primal cells `K`; the velocity component along `e^(i)` lives
//! on the faces orthogonal to `e^(i)`. Each face `σ` owns a dual cell `D_σ` made
//! of the halves of its adjacent primal cells. One-dimensional meshes are stored
//! as a single row of cells of unit transverse width, so `|σ| = 1`.
//!
//! Cells are numbered `k = i + nx * j`. Faces of axis 0 are numbered
//! `i + (nx + 1) * j` with `i ∈ 0..=nx`; faces of axis 1 are numbered
//! `i + nx * j` with `j ∈ 0..=ny`.

use serde::{Deserialize, Serialize};

use crate::boundary::{Bc, BoundarySpec, Side};
use crate::error::{Error, Result};
use crate::field::{FaceField, FieldRole, PrimalField};
use crate::pbsolver::{self, EllipticProblem, PbOptions};

/// Spacing law for the face coordinates of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "ratio")]
pub enum Grading {
    Uniform,
    /// Successive cell widths grow by the given ratio.
    Geometric(f64),
}

/// Geometry and topology of one face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeom {
    /// Cell on the lower side along the face axis.
    pub minus: Option<usize>,
    /// Cell on the upper side along the face axis.
    pub plus: Option<usize>,
    /// `|σ|`.
    pub area: f64,
    /// `|D_{σ,K}|` for the lower cell (zero if absent).
    pub dual_minus: f64,
    /// `|D_{σ,L}|` for the upper cell (zero if absent).
    pub dual_plus: f64,
    /// `|D_σ|`.
    pub dual_volume: f64,
    /// Side of the domain for external faces.
    pub side: Option<Side>,
    pub center: [f64; 2],
}

impl FaceGeom {
    pub fn is_interior(&self) -> bool {
        self.side.is_none()
    }

    /// The single adjacent cell of an external face.
    pub fn boundary_cell(&self) -> usize {
        self.minus.or(self.plus).expect("face without cells")
    }

    /// `|σ| / |D_σ|`, the gradient coefficient.
    pub fn grad_coef(&self) -> f64 {
        self.area / self.dual_volume
    }
}

/// Bounds on the mesh-regularity ratios `diam(K)²/|K|` and `|D_σ|/|K|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshRegularity {
    pub max_diam2_over_volume: f64,
    pub max_dual_over_cell: f64,
}

/// Staggered Cartesian grid. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MacMesh {
    dim: usize,
    nx: usize,
    ny: usize,
    xf: Vec<f64>,
    yf: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    faces: Vec<Vec<FaceGeom>>,
    boundary: [Vec<usize>; 4],
}

/// Builds a mesh over `bounds` with `cells` cells per axis (one or two axes).
pub fn build_mesh(bounds: &[(f64, f64)], cells: &[usize], grading: &[Grading]) -> Result<MacMesh> {
    if bounds.is_empty() || bounds.len() > 2 || bounds.len() != cells.len() {
        return Err(Error::InvalidMesh(format!(
            "need one or two axes with matching cell counts, got {} bounds and {} counts",
            bounds.len(),
            cells.len()
        )));
    }
    let mut coords = Vec::with_capacity(bounds.len());
    for (axis, (&(lo, hi), &n)) in bounds.iter().zip(cells).enumerate() {
        if n < 2 {
            return Err(Error::InvalidMesh(format!(
                "axis {axis}: need at least 2 cells, got {n}"
            )));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidMesh(format!(
                "axis {axis}: bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        let g = grading.get(axis).copied().unwrap_or(Grading::Uniform);
        coords.push(axis_coords(lo, hi, n, g)?);
    }
    let y = coords.get(1).cloned();
    MacMesh::from_face_coords(coords.swap_remove(0), y)
}

fn axis_coords(lo: f64, hi: f64, n: usize, grading: Grading) -> Result<Vec<f64>> {
    let len = hi - lo;
    let mut c = Vec::with_capacity(n + 1);
    match grading {
        Grading::Uniform => {
            for i in 0..=n {
                c.push(lo + len * i as f64 / n as f64);
            }
        }
        Grading::Geometric(r) => {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidMesh(format!("geometric ratio must be positive, got {r}")));
            }
            let widths: Vec<f64> = (0..n).map(|i| r.powi(i as i32)).collect();
            let total: f64 = widths.iter().sum();
            let mut acc = 0.0;
            c.push(lo);
            for w in &widths[..n - 1] {
                acc += w;
                c.push(lo + len * acc / total);
            }
            c.push(hi);
        }
    }
    c[n] = hi;
    Ok(c)
}

impl MacMesh {
    /// Builds a mesh from explicit, strictly increasing face coordinates.
    /// `y = None` gives a one-dimensional mesh.
    pub fn from_face_coords(x: Vec<f64>, y: Option<Vec<f64>>) -> Result<MacMesh> {
        let dim = if y.is_some() { 2 } else { 1 };
        let yf = y.unwrap_or_else(|| vec![0.0, 1.0]);
        for (axis, c) in [&x, &yf].into_iter().enumerate().take(dim) {
            if c.len() < 3 {
                return Err(Error::InvalidMesh(format!("axis {axis}: need at least 2 cells")));
            }
            if c.windows(2).any(|w| !(w[1] > w[0])) || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMesh(format!(
                    "axis {axis}: face coordinates must be finite and strictly increasing"
                )));
            }
        }
        let nx = x.len() - 1;
        let ny = yf.len() - 1;
        let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let dy: Vec<f64> = yf.windows(2).map(|w| w[1] - w[0]).collect();
        let xc: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let yc: Vec<f64> = yf.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

        let mut boundary: [Vec<usize>; 4] = Default::default();
        let mut xfaces = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            for i in 0..=nx {
                let minus = (i > 0).then(|| (i - 1) + nx * j);
                let plus = (i < nx).then(|| i + nx * j);
                let dual_minus = if i > 0 { 0.5 * dx[i - 1] * dy[j] } else { 0.0 };
                let dual_plus = if i < nx { 0.5 * dx[i] * dy[j] } else { 0.0 };
                let side = if i == 0 {
                    Some(Side::XMin)
                } else if i == nx {
                    Some(Side::XMax)
                } else {
                    None
                };
                if let Some(s) = side {
                    boundary[s.index()].push(xfaces.len());
                }
                xfaces.push(FaceGeom {
                    minus,
                    plus,
                    area: dy[j],
                    dual_minus,
                    dual_plus,
                    dual_volume: dual_minus + dual_plus,
                    side,
                    center: [x[i], yc[j]],
                });
            }
        }
        let mut faces = vec![xfaces];
        if dim == 2 {
            let mut yfaces = Vec::with_capacity(nx * (ny + 1));
            for j in 0..=ny {
                for i in 0..nx {
                    let minus = (j > 0).then(|| i + nx * (j - 1));
                    let plus = (j < ny).then(|| i + nx * j);
                    let dual_minus = if j > 0 { 0.5 * dx[i] * dy[j - 1] } else { 0.0 };
                    let dual_plus = if j < ny { 0.5 * dx[i] * dy[j] } else { 0.0 };
                    let side = if j == 0 {
                        Some(Side::YMin)
                    } else if j == ny {
                        Some(Side::YMax)
                    } else {
                        None
                    };
                    if let Some(s) = side {
                        boundary[s.index()].push(yfaces.len());
                    }
                    yfaces.push(FaceGeom {
                        minus,
                        plus,
                        area: dx[i],
                        dual_minus,
                        dual_plus,
                        dual_volume: dual_minus + dual_plus,
                        side,
                        center: [xc[i], yf[j]],
                    });
                }
            }
            faces.push(yfaces);
        }
        Ok(MacMesh {
            dim,
            nx,
            ny,
            xf: x,
            yf,
            dx,
            dy,
            faces,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis; `ny = 1` in one dimension.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn face_coords(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &self.xf
        } else {
            &self.yf
        }
    }

    pub fn widths(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &self.dx
        } else {
            &self.dy
        }
    }

    pub fn cell_ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        let (i, j) = self.cell_ij(k);
        self.dx[i] * self.dy[j]
    }

    pub fn cell_volumes(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|k| self.cell_volume(k)).collect()
    }

    pub fn cell_center(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(k);
        [
            0.5 * (self.xf[i] + self.xf[i + 1]),
            0.5 * (self.yf[j] + self.yf[j + 1]),
        ]
    }

    /// `|∂K|`: total measure of the faces of `K` over the active axes.
    pub fn perimeter(&self, k: usize) -> f64 {
        let (i, j) = self.cell_ij(k);
        if self.dim == 1 {
            2.0 * self.dy[j]
        } else {
            2.0 * (self.dx[i] + self.dy[j])
        }
    }

    pub fn face_count(&self, axis: usize) -> usize {
        self.faces[axis].len()
    }

    pub fn face_counts(&self) -> Vec<usize> {
        self.faces.iter().map(Vec::len).collect()
    }

    pub fn faces(&self, axis: usize) -> &[FaceGeom] {
        &self.faces[axis]
    }

    pub fn face(&self, axis: usize, f: usize) -> &FaceGeom {
        &self.faces[axis][f]
    }

    /// Face of cell `k` orthogonal to `axis`, on its upper (`upper = true`) or lower side.
    pub fn cell_face(&self, k: usize, axis: usize, upper: bool) -> usize {
        let (i, j) = self.cell_ij(k);
        let u = usize::from(upper);
        if axis == 0 {
            (i + u) + (self.nx + 1) * j
        } else {
            i + self.nx * (j + u)
        }
    }

    /// The face of the same family shifted by one cell along axis `b`, if it exists.
    pub fn face_shift(&self, axis: usize, f: usize, b: usize, upper: bool) -> Option<usize> {
        let (stride_i, n_i, n_j) = if axis == 0 {
            (self.nx + 1, self.nx + 1, self.ny)
        } else {
            (self.nx, self.nx, self.ny + 1)
        };
        let i = f % stride_i;
        let j = f / stride_i;
        let (ni, nj) = match (b, upper) {
            (0, true) => (i + 1, j),
            (0, false) => (i.checked_sub(1)?, j),
            (_, true) => (i, j + 1),
            (_, false) => (i, j.checked_sub(1)?),
        };
        (ni < n_i && nj < n_j).then_some(ni + stride_i * nj)
    }

    /// External faces on one side (of the family orthogonal to the side).
    pub fn boundary_faces(&self, side: Side) -> &[usize] {
        &self.boundary[side.index()]
    }

    /// Sides that bound the domain for this dimension.
    pub fn sides(&self) -> &'static [Side] {
        if self.dim == 1 {
            &Side::ALL[..2]
        } else {
            &Side::ALL[..]
        }
    }

    pub fn domain_measure(&self) -> f64 {
        (self.xf[self.nx] - self.xf[0]) * (self.yf[self.ny] - self.yf[0])
    }

    /// Face across the periodic seam from an external face.
    pub fn periodic_partner(&self, axis: usize, f: usize) -> usize {
        let g = &self.faces[axis][f];
        match g.side {
            Some(Side::XMin) => f + self.nx,
            Some(Side::XMax) => f - self.nx,
            Some(Side::YMin) => f + self.nx * self.ny,
            Some(Side::YMax) => f - self.nx * self.ny,
            None => f,
        }
    }

    /// Dual volume of the periodic seam face: the two half cells that meet across it.
    pub fn periodic_dual_volume(&self, axis: usize, f: usize) -> f64 {
        let p = self.periodic_partner(axis, f);
        let a = &self.faces[axis][f];
        let b = &self.faces[axis][p];
        a.dual_volume + b.dual_volume
    }

    pub fn regularity(&self) -> MeshRegularity {
        let mut max_d2 = 0.0_f64;
        let mut max_ratio = 0.0_f64;
        for k in 0..self.n_cells() {
            let (i, j) = self.cell_ij(k);
            let vol = self.cell_volume(k);
            let diam2 = if self.dim == 1 {
                self.dx[i] * self.dx[i]
            } else {
                self.dx[i] * self.dx[i] + self.dy[j] * self.dy[j]
            };
            max_d2 = max_d2.max(diam2 / vol);
            for axis in 0..self.dim {
                for upper in [false, true] {
                    let f = self.cell_face(k, axis, upper);
                    let dv = if self.faces[axis][f].is_interior() {
                        self.faces[axis][f].dual_volume
                    } else {
                        0.5 * vol
                    };
                    max_ratio = max_ratio.max(dv / vol);
                }
            }
        }
        MeshRegularity {
            max_diam2_over_volume: max_d2,
            max_dual_over_cell: max_ratio,
        }
    }
}

/// Dual average `|D_σ| q_{D_σ} = |D_{σ,K}| q_K + |D_{σ,L}| q_L`; external faces take the adjacent value.
pub fn dual_average(mesh: &MacMesh, q: &[f64]) -> Result<FaceField> {
    check_len(mesh, q)?;
    let axes = (0..mesh.dim())
        .map(|a| {
            mesh.faces(a)
                .iter()
                .map(|g| match (g.minus, g.plus) {
                    (Some(k), Some(l)) => (g.dual_minus * q[k] + g.dual_plus * q[l]) / g.dual_volume,
                    _ => q[g.boundary_cell()],
                })
                .collect()
        })
        .collect();
    Ok(FaceField { axes })
}

pub(crate) fn check_len(mesh: &MacMesh, q: &[f64]) -> Result<()> {
    if q.len() != mesh.n_cells() {
        return Err(Error::Shape {
            expected: mesh.n_cells(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Closed-form initial data evaluated at points of the domain.
pub trait InitialData {
    fn density(&self, p: [f64; 2]) -> f64;
    /// Velocity component along `axis`.
    fn velocity(&self, p: [f64; 2], axis: usize) -> f64;
    /// Analytic initial potential, when the data supplies one.
    fn potential(&self, _p: [f64; 2]) -> Option<f64> {
        None
    }
}

/// Time level of the staggered scheme: cell densities and potentials, face velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub rho: PrimalField,
    pub u: FaceField,
    pub phi: PrimalField,
}

/// Sets the boundary-face velocities from the velocity boundary conditions.
pub fn apply_velocity_bc(mesh: &MacMesh, bcs: &BoundarySpec, u: &mut FaceField) {
    for &side in mesh.sides() {
        let axis = side.axis();
        let bc = bcs.velocity_at(side);
        for &f in mesh.boundary_faces(side) {
            let value = match bc {
                Bc::NoSlip | Bc::NeumannZero | Bc::Periodic => 0.0,
                Bc::Dirichlet(v) => v,
                Bc::ExtrapolateZeroOrder => {
                    let inner = if side.outward_sign() > 0.0 {
                        mesh.face_shift(axis, f, axis, false)
                    } else {
                        mesh.face_shift(axis, f, axis, true)
                    };
                    inner.map_or(0.0, |g| u.axes[axis][g])
                }
            };
            u.axes[axis][f] = value;
        }
    }
}

/// Midpoint projection of initial data onto the MAC unknowns.
///
/// `ρ⁰` and `u⁰` are cell- and face-centre samples. `φ⁰` is the analytic average
/// when the data provides one, otherwise the solution of the discrete
/// Poisson–Boltzmann equation with right side `ρ⁰` and coefficient `eps²`.
pub fn project_initial(
    data: &dyn InitialData,
    mesh: &MacMesh,
    bcs: &BoundarySpec,
    eps: f64,
    pb: &PbOptions,
) -> Result<State> {
    bcs.validate(mesh.dim())?;
    let rho: Vec<f64> = (0..mesh.n_cells())
        .map(|k| data.density(mesh.cell_center(k)))
        .collect();
    if let Some((cell, value)) = crate::field::first_non_positive(&rho) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    let mut u = FaceField {
        axes: (0..mesh.dim())
            .map(|a| {
                mesh.faces(a)
                    .iter()
                    .map(|g| data.velocity(g.center, a))
                    .collect()
            })
            .collect(),
    };
    apply_velocity_bc(mesh, bcs, &mut u);

    let analytic_phi: Option<Vec<f64>> = (0..mesh.n_cells())
        .map(|k| data.potential(mesh.cell_center(k)))
        .collect();
    let phi = match analytic_phi {
        Some(p) => p,
        None => {
            let coeff = FaceField::constant(&mesh.face_counts(), eps * eps);
            let problem = EllipticProblem::new(mesh, coeff, rho.clone(), bcs.potential, pb.clone())?;
            pbsolver::solve_pb(&problem, None)?.phi
        }
    };
    Ok(State {
        t: 0.0,
        rho: PrimalField::new(FieldRole::Density, rho),
        u,
        phi: PrimalField::new(FieldRole::Potential, phi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_1d(lo: f64, hi: f64, n: usize) -> MacMesh {
        build_mesh(&[(lo, hi)], &[n], &[Grading::Uniform]).unwrap()
    }

    #[test]
    fn four_cell_unit_interval() {
        let m = uniform_1d(0.0, 1.0, 4);
        for k in 0..4 {
            assert!((m.cell_volume(k) - 0.25).abs() < 1e-15);
        }
        let f = m.faces(0);
        assert_eq!(f.len(), 5);
        assert!((f[0].dual_volume - 0.125).abs() < 1e-15);
        assert!((f[4].dual_volume - 0.125).abs() < 1e-15);
        for g in &f[1..4] {
            assert!((g.dual_volume - 0.25).abs() < 1e-15);
            assert!((g.area - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn total_volume_two_pi() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let m = uniform_1d(0.0, two_pi, 100);
        let total: f64 = m.cell_volumes().iter().sum();
        assert!((total - two_pi).abs() <= 1e-14 * two_pi);
    }

    #[test]
    fn square_200_face_count() {
        let m = build_mesh(&[(-1.0, 1.0), (-1.0, 1.0)], &[200, 200], &[]).unwrap();
        assert_eq!(m.face_count(0) + m.face_count(1), 2 * 200 * 201);
        assert!(m.faces(0).iter().all(|g| (g.area - 0.01).abs() < 1e-15));
        assert!(m.faces(1).iter().all(|g| (g.area - 0.01).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_mesh(&[(0.0, 1.0)], &[1], &[]).is_err());
        assert!(build_mesh(&[(1.0, 0.0)], &[4], &[]).is_err());
        assert!(build_mesh(&[(0.0, 1.0)], &[0], &[]).is_err());
    }

    #[test]
    fn graded_mesh_half_cell_split() {
        let m = build_mesh(
            &[(0.0, 1.0), (0.0, 2.0)],
            &[7, 5],
            &[Grading::Geometric(1.3), Grading::Geometric(0.8)],
        )
        .unwrap();
        let total: f64 = m.cell_volumes().iter().sum();
        assert!((total - 2.0).abs() < 1e-14 * 2.0);
        for a in 0..2 {
            for g in m.faces(a) {
                if let (Some(k), Some(l)) = (g.minus, g.plus) {
                    assert!((g.dual_minus / m.cell_volume(k) - 0.5).abs() < 1e-15);
                    assert!((g.dual_plus / m.cell_volume(l) - 0.5).abs() < 1e-15);
                    assert!((g.dual_volume - g.dual_minus - g.dual_plus).abs() < 1e-15);
                }
                assert!(g.area > 0.0);
            }
        }
        let r = m.regularity();
        assert!(r.max_diam2_over_volume.is_finite() && r.max_dual_over_cell <= 1.15 + 1e-12);
    }

    #[test]
    fn face_shift_and_cell_faces() {
        let m = build_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[3, 2], &[]).unwrap();
        let k = m.cell_index(1, 1);
        let fx = m.cell_face(k, 0, false);
        assert_eq!(m.face(0, fx).plus, Some(k));
        assert_eq!(m.face(0, m.cell_face(k, 0, true)).minus, Some(k));
        assert_eq!(m.face(1, m.cell_face(k, 1, false)).plus, Some(k));
        assert_eq!(m.face(1, m.cell_face(k, 1, true)).minus, Some(k));
        assert_eq!(m.face(1, m.cell_face(k, 1, true)).side, Some(Side::YMax));
        assert_eq!(m.face_shift(0, fx, 1, true), None);
        assert_eq!(m.face_shift(0, fx, 1, false), Some(fx - 4));
        assert_eq!(m.boundary_faces(Side::XMax).len(), 2);
        assert_eq!(m.boundary_faces(Side::YMin).len(), 3);
    }

    #[test]
    fn dual_average_cases() {
        let m = uniform_1d(0.0, 1.0, 4);
        let c = dual_average(&m, &[3.0; 4]).unwrap();
        assert!(c.axis(0).iter().all(|&v| (v - 3.0).abs() < 1e-15));
        let d = dual_average(&m, &[1.0, 3.0, 1.0, 3.0]).unwrap();
        assert!((d.axis(0)[1] - 2.0).abs() < 1e-15);
        assert_eq!(d.axis(0)[0], 1.0);
        assert_eq!(d.axis(0)[4], 3.0);
        assert!(dual_average(&m, &[1.0; 3]).is_err());
    }

    struct Bump;
    impl InitialData for Bump {
        fn density(&self, p: [f64; 2]) -> f64 {
            1.0 + p[0]
        }
        fn velocity(&self, p: [f64; 2], _axis: usize) -> f64 {
            p[0]
        }
    }

    #[test]
    fn projection_samples_midpoints() {
        let m = uniform_1d(0.0, 1.0, 4);
        let s = project_initial(&Bump, &m, &BoundarySpec::closed(), 1.0, &PbOptions::default()).unwrap();
        assert!((s.rho[0] - 1.125).abs() < 1e-15);
        assert!((s.u.axis(0)[2] - 0.5).abs() < 1e-15);
        assert_eq!(s.u.axis(0)[0], 0.0);
        assert_eq!(s.u.axis(0)[4], 0.0);
    }
}
