//! Snapshot writers: cell CSV, legacy ASCII VTK for 2D runs, and axis cuts.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FaceField;
use crate::mesh::MacMesh;

/// Cell-centred view of a time level, whatever the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub rho: Vec<f64>,
    /// Velocity components at cell centres.
    pub vel: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
}

/// Face velocities averaged to cell centres, one vector per axis.
pub fn face_to_cell(mesh: &MacMesh, u: &FaceField) -> Vec<Vec<f64>> {
    (0..mesh.dim())
        .map(|a| {
            (0..mesh.n_cells())
                .map(|k| 0.5 * (u.axes[a][mesh.cell_face(k, a, false)] + u.axes[a][mesh.cell_face(k, a, true)]))
                .collect()
        })
        .collect()
}

/// Writes one row per cell, `x,rho,u,phi` in 1D and `x,y,rho,u,v,phi` in 2D,
/// plus any extra columns, with 17 significant digits.
pub fn write_csv(mesh: &MacMesh, frame: &Frame, extra: &[(String, Vec<f64>)], mut w: impl Write) -> Result<()> {
    let n = mesh.n_cells();
    for (name, col) in extra {
        if col.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: col.len(),
            });
        }
        if name.contains(',') {
            return Err(Error::Config(format!("column name '{name}' contains a comma")));
        }
    }
    let mut header = String::from(if mesh.dim() == 1 { "x,rho,u,phi" } else { "x,y,rho,u,v,phi" });
    for (name, _) in extra {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}")?;
    for k in 0..n {
        let c = mesh.cell_center(k);
        let mut row: Vec<f64> = c[..mesh.dim()].to_vec();
        row.push(frame.rho[k]);
        row.extend(frame.vel.iter().map(|v| v[k]));
        row.push(frame.phi[k]);
        row.extend(extra.iter().map(|(_, col)| col[k]));
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a CSV written by this module: the header names and the columns.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Io("empty CSV".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (row, line) in lines.enumerate() {
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != header.len() {
            return Err(Error::Io(format!("row {} has {} fields, expected {}", row + 1, vals.len(), header.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            cols[c].push(v.parse().map_err(|e| Error::Io(format!("row {}: {e}", row + 1)))?);
        }
    }
    Ok((header, cols))
}

/// Velocity at mesh nodes: the average of the cell velocities around each node.
fn node_velocity(mesh: &MacMesh, vel: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let (nx, ny) = mesh.shape();
    let mut out = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let mut sum = [0.0; 2];
            let mut count = 0.0;
            for jj in [j.checked_sub(1), (j < ny).then_some(j)].into_iter().flatten() {
                for ii in [i.checked_sub(1), (i < nx).then_some(i)].into_iter().flatten() {
                    let k = mesh.cell_index(ii, jj);
                    sum[0] += vel[0][k];
                    sum[1] += vel[1][k];
                    count += 1.0;
                }
            }
            out.push([sum[0] / count, sum[1] / count]);
        }
    }
    out
}

/// Legacy ASCII VTK rectilinear grid with cell `rho`, `phi` and point velocities.
pub fn write_vtk(mesh: &MacMesh, frame: &Frame, mut w: impl Write) -> Result<()> {
    if mesh.dim() != 2 {
        return Err(Error::Config("VTK snapshots are written for 2D meshes only".into()));
    }
    let (nx, ny) = mesh.shape();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "qnepb t={:.16e}", frame.t)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET RECTILINEAR_GRID")?;
    writeln!(w, "DIMENSIONS {} {} 1", nx + 1, ny + 1)?;
    for (name, axis) in [("X_COORDINATES", 0), ("Y_COORDINATES", 1)] {
        let c = mesh.face_coords(axis);
        writeln!(w, "{name} {} double", c.len())?;
        let line: Vec<String> = c.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    writeln!(w, "Z_COORDINATES 1 double")?;
    writeln!(w, "0")?;
    writeln!(w, "CELL_DATA {}", nx * ny)?;
    for (name, values) in [("rho", &frame.rho), ("phi", &frame.phi)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values.iter() {
            writeln!(w, "{v:.16e}")?;
        }
    }
    writeln!(w, "POINT_DATA {}", (nx + 1) * (ny + 1))?;
    writeln!(w, "VECTORS velocity double")?;
    for [a, b] in node_velocity(mesh, &frame.vel) {
        writeln!(w, "{a:.16e} {b:.16e} 0")?;
    }
    Ok(())
}

/// Values of `q` along the line of cells through the domain centre, parallel to `axis`.
///
/// With an even number of cells across, the two middle lines are averaged.
/// Returns the coordinates along the axis and the values.
pub fn centre_cut(mesh: &MacMesh, q: &[f64], axis: usize) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = mesh.shape();
    let (n_along, n_across) = if axis == 0 { (nx, ny) } else { (ny, nx) };
    let lines: Vec<usize> = if n_across % 2 == 0 {
        vec![n_across / 2 - 1, n_across / 2]
    } else {
        vec![n_across / 2]
    };
    let idx = |s: usize, c: usize| if axis == 0 { mesh.cell_index(s, c) } else { mesh.cell_index(c, s) };
    let coords = (0..n_along).map(|s| mesh.cell_center(idx(s, lines[0]))[axis]).collect();
    let vals = (0..n_along)
        .map(|s| lines.iter().map(|&c| q[idx(s, c)]).sum::<f64>() / lines.len() as f64)
        .collect();
    (coords, vals)
}

/// `s,rho_x,u_x,rho_y,v_y`: density and axial velocity along both centre lines,
/// `s` measured from the domain centre along the first axis.
pub fn write_axis_cuts(mesh: &MacMesh, frame: &Frame, mut w: impl Write) -> Result<()> {
    if mesh.dim() != 2 {
        return Err(Error::Config("axis cuts need a 2D mesh".into()));
    }
    let (nx, ny) = mesh.shape();
    if nx != ny {
        return Err(Error::Config(format!("axis cuts need a square cell layout, got {nx}x{ny}")));
    }
    let (x, rho_x) = centre_cut(mesh, &frame.rho, 0);
    let (_, u_x) = centre_cut(mesh, &frame.vel[0], 0);
    let (_, rho_y) = centre_cut(mesh, &frame.rho, 1);
    let (_, v_y) = centre_cut(mesh, &frame.vel[1], 1);
    let c = mesh.face_coords(0);
    let mid = 0.5 * (c[0] + c[c.len() - 1]);
    writeln!(w, "s,rho_x,u_x,rho_y,v_y")?;
    for k in 0..x.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            x[k] - mid,
            rho_x[k],
            u_x[k],
            rho_y[k],
            v_y[k]
        )?;
    }
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn frame(n: usize, dim: usize) -> Frame {
        Frame {
            t: 0.5,
            rho: (0..n).map(|k| 1.0 + k as f64 / 7.0).collect(),
            vel: (0..dim).map(|a| (0..n).map(|k| (k * (a + 1)) as f64 * 0.1 - 0.3).collect()).collect(),
            phi: (0..n).map(|k| -(k as f64).sqrt() / 3.0).collect(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = build_mesh(&[(0.0, 1.0)], &[9], &[]).unwrap();
        let f = frame(9, 1);
        let mut buf = Vec::new();
        let exact = vec![("rho_exact".to_string(), vec![0.1; 9])];
        write_csv(&m, &f, &exact, &mut buf).unwrap();
        let (h, cols) = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(h, ["x", "rho", "u", "phi", "rho_exact"]);
        for k in 0..9 {
            assert!((cols[1][k] - f.rho[k]).abs() <= 1e-15 * f.rho[k].abs());
            assert!((cols[2][k] - f.vel[0][k]).abs() <= 1e-15 * f.vel[0][k].abs());
            assert!((cols[3][k] - f.phi[k]).abs() <= 1e-15 * f.phi[k].abs());
        }
    }

    #[test]
    fn uniform_state_gives_constant_columns() {
        let m = build_mesh(&[(0.0, 2.0)], &[4], &[]).unwrap();
        let u = FaceField::constant(&m.face_counts(), 0.25);
        let f = Frame {
            t: 0.0,
            rho: vec![2.0; 4],
            vel: face_to_cell(&m, &u),
            phi: vec![2f64.ln(); 4],
        };
        let mut buf = Vec::new();
        write_csv(&m, &f, &[], &mut buf).unwrap();
        let (_, cols) = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert!(cols[1].iter().all(|v| *v == 2.0));
        assert!(cols[2].iter().all(|v| *v == 0.25));
    }

    #[test]
    fn vtk_layout() {
        let m = build_mesh(&[(0.0, 1.0), (0.0, 1.0)], &[3, 2], &[]).unwrap();
        let mut f = frame(6, 2);
        f.vel = vec![vec![1.0; 6]; 2];
        let mut buf = Vec::new();
        write_vtk(&m, &f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("DATASET RECTILINEAR_GRID"));
        assert!(text.contains("DIMENSIONS 4 3 1"));
        assert!(text.contains("CELL_DATA 6"));
        assert!(text.contains("POINT_DATA 12"));
        let vectors: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("VECTORS")).skip(1).collect();
        assert_eq!(vectors.len(), 12);
        assert!(vectors.iter().all(|l| l.starts_with("1.0000000000000000e0 1.0000000000000000e0")));
    }

    #[test]
    fn cuts_of_symmetric_field_agree() {
        let m = build_mesh(&[(-1.0, 1.0), (-1.0, 1.0)], &[6, 6], &[]).unwrap();
        let q: Vec<f64> = (0..36)
            .map(|k| {
                let [x, y] = m.cell_center(k);
                (-(x * x + y * y)).exp()
            })
            .collect();
        let (sx, a) = centre_cut(&m, &q, 0);
        let (sy, b) = centre_cut(&m, &q, 1);
        assert_eq!(sx, sy);
        for k in 0..6 {
            assert!((a[k] - b[k]).abs() < 1e-15);
        }
    }
}
