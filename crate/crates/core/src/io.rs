//! CSV and legacy VTK export of fields, trajectories and tables.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField, VectorField, MAX_DIM};
use crate::synthesis::Trajectory;

fn coordinate_header(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x_{i}")).collect()
}

/// Header `x_1..x_d, value`, one row per node in lexicographic order.
pub fn write_scalar_csv<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let grid = field.grid();
    let d = grid.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = coordinate_header(d);
    header.push("value".into());
    w.write_record(&header)?;
    for node in grid.nodes() {
        let x = grid.coords(node);
        let mut row: Vec<String> = x[..d].iter().map(f64::to_string).collect();
        row.push(field[node].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Header `x_1..x_d, u_1..u_m`.
pub fn write_vector_csv<W: Write>(field: &VectorField, out: W) -> Result<()> {
    let grid = field.grid();
    let (d, m) = (grid.dim(), field.m());
    let mut w = csv::Writer::from_writer(out);
    let mut header = coordinate_header(d);
    header.extend((1..=m).map(|j| format!("u_{j}")));
    w.write_record(&header)?;
    for node in grid.nodes() {
        let x = grid.coords(node);
        let mut row: Vec<String> = x[..d].iter().map(f64::to_string).collect();
        row.extend(field[node][..m].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read>(input: R, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != columns {
            return Err(Error::DimensionMismatch {
                expected: columns,
                got: rec.len(),
            });
        }
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Config(format!("bad number in csv: {e}")))?);
    }
    Ok(rows)
}

/// Reads a file written by [`write_scalar_csv`] on `grid`.
pub fn read_scalar_csv<R: Read>(grid: &Grid, input: R) -> Result<ScalarField> {
    let d = grid.dim();
    let rows = read_rows(input, d + 1)?;
    ScalarField::new(grid.clone(), rows.iter().map(|r| r[d]).collect())
}

pub fn read_vector_csv<R: Read>(grid: &Grid, m: usize, input: R) -> Result<VectorField> {
    let d = grid.dim();
    let rows = read_rows(input, d + m)?;
    let values = rows
        .iter()
        .map(|r| {
            let mut p = [0.0; MAX_DIM];
            p[..m].copy_from_slice(&r[d..]);
            p
        })
        .collect();
    VectorField::new(grid.clone(), m, values)
}

fn vtk_header<W: Write>(w: &mut W, grid: &Grid, title: &str) -> Result<()> {
    let d = grid.dim();
    let mut dims = [1usize; 3];
    let mut origin = [0.0; 3];
    let mut spacing = [grid.k(); 3];
    dims[..d].copy_from_slice(grid.counts());
    origin[..d].copy_from_slice(grid.lo());
    for s in spacing.iter_mut().skip(d) {
        *s = 1.0;
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "ORIGIN {} {} {}", origin[0], origin[1], origin[2])?;
    writeln!(w, "SPACING {} {} {}", spacing[0], spacing[1], spacing[2])?;
    writeln!(w, "POINT_DATA {}", grid.len())?;
    Ok(())
}

/// The grid's lexicographic order has the last axis fastest; VTK wants the
/// first axis fastest.
fn vtk_order(grid: &Grid) -> Vec<usize> {
    let d = grid.dim();
    let counts = grid.counts();
    let mut order = Vec::with_capacity(grid.len());
    let mut idx = [0usize; MAX_DIM];
    for _ in 0..grid.len() {
        order.push(grid.linear(&idx));
        for i in 0..d {
            idx[i] += 1;
            if idx[i] < counts[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    order
}

pub fn write_scalar_vtk<W: Write>(field: &ScalarField, name: &str, mut out: W) -> Result<()> {
    let grid = field.grid();
    vtk_header(&mut out, grid, name)?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for node in vtk_order(grid) {
        writeln!(out, "{}", field[node])?;
    }
    Ok(())
}

/// Vectors are padded with zeros to three components.
pub fn write_vector_vtk<W: Write>(field: &VectorField, name: &str, mut out: W) -> Result<()> {
    let grid = field.grid();
    vtk_header(&mut out, grid, name)?;
    writeln!(out, "VECTORS {name} double")?;
    let m = field.m();
    for node in vtk_order(grid) {
        let u = field[node];
        let c = |j: usize| if j < m { u[j] } else { 0.0 };
        writeln!(out, "{} {} {}", c(0), c(1), c(2))?;
    }
    Ok(())
}

/// Columns `t, x_1..x_d, u_1..u_m, cost`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(coordinate_header(traj.dim));
    header.extend((1..=traj.m).map(|j| format!("u_{j}")));
    header.push("cost".into());
    w.write_record(&header)?;
    for n in 0..traj.len() {
        let mut row = vec![traj.times[n].to_string()];
        row.extend(traj.states[n][..traj.dim].iter().map(f64::to_string));
        row.extend(traj.controls[n][..traj.m].iter().map(f64::to_string));
        row.push(traj.costs[n].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: f64,
    pub method: String,
    pub l1_value: f64,
    pub l1_control: f64,
    pub l1_mean_value: f64,
    pub l1_mean_control: f64,
    pub sweeps: usize,
    pub wall_time: f64,
}

pub fn write_table<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Point with the first `d` entries taken from `x`.
pub fn point(x: &[f64]) -> Result<Point> {
    if x.is_empty() || x.len() > MAX_DIM {
        return Err(Error::DimensionMismatch {
            expected: MAX_DIM,
            got: x.len(),
        });
    }
    let mut p = [0.0; MAX_DIM];
    p[..x.len()].copy_from_slice(x);
    Ok(p)
}
