//! Gaussian-cube style volumetric text files.
//!
//! Layout: two comment lines; `natoms ox oy oz`; three lines `n_i v_i` giving
//! the grid count and voxel vector (Bohr) per axis; one `Z charge x y z` line
//! per atom (Bohr); then the values with the third axis fastest, six per line.

use std::fmt::Write as _;

use crate::elements;
use crate::error::{Error, Result};
use crate::structure::Cell;

/// Parsed contents of a cube file.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeData {
    pub comments: [String; 2],
    pub origin: [f64; 3],
    pub dims: [usize; 3],
    pub voxel: [[f64; 3]; 3],
    pub atoms: Vec<(u32, [f64; 3])>,
    pub values: Vec<f64>,
}

/// Renders `values` (third index fastest) on `dims` as cube text.
pub fn write_cube(cell: &Cell, dims: [usize; 3], values: &[f64], comments: [&str; 2]) -> String {
    assert_eq!(values.len(), dims[0] * dims[1] * dims[2]);
    let lat = cell.lattice_bohr();
    let mut s = String::new();
    writeln!(s, "{}", comments[0]).unwrap();
    writeln!(s, "{}", comments[1]).unwrap();
    writeln!(
        s,
        "{:5} {:12.6} {:12.6} {:12.6}",
        cell.n_atoms(),
        0.0,
        0.0,
        0.0
    )
    .unwrap();
    for i in 0..3 {
        let v = lat[i].map(|x| x / dims[i] as f64);
        writeln!(s, "{:5} {:12.6} {:12.6} {:12.6}", dims[i], v[0], v[1], v[2]).unwrap();
    }
    for (sym, p) in cell.species().iter().zip(cell.positions_bohr()) {
        let z = elements::atomic_number(sym).unwrap_or(0);
        writeln!(
            s,
            "{:5} {:12.6} {:12.6} {:12.6} {:12.6}",
            z, z as f64, p[0], p[1], p[2]
        )
        .unwrap();
    }
    for line in values.chunks(dims[2]) {
        for (j, v) in line.iter().enumerate() {
            write!(s, " {v:13.5E}").unwrap();
            if j % 6 == 5 || j + 1 == line.len() {
                s.push('\n');
            }
        }
    }
    s
}

/// Parses cube text produced by [`write_cube`] or any conforming writer that
/// uses Bohr units (positive grid counts).
pub fn read_cube(text: &str) -> Result<CubeData> {
    let err = |line: usize, m: &str| Error::parse("<cube>", line, m);
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| err(0, &format!("unexpected end of file reading {what}")))
    };
    let c1 = next("comment")?.1.to_string();
    let c2 = next("comment")?.1.to_string();
    let nums = |(n, l): (usize, &str)| -> Result<Vec<f64>> {
        l.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err(n, &format!("bad number {t:?}")))
            })
            .collect()
    };
    let head = nums(next("header")?)?;
    if head.len() < 4 {
        return Err(err(3, "header needs natoms and origin"));
    }
    let natoms = head[0] as usize;
    let mut dims = [0usize; 3];
    let mut voxel = [[0.0; 3]; 3];
    for i in 0..3 {
        let row = nums(next("axis")?)?;
        if row.len() < 4 || row[0] <= 0.0 {
            return Err(err(4 + i, "axis line needs a positive count and a vector"));
        }
        dims[i] = row[0] as usize;
        voxel[i] = [row[1], row[2], row[3]];
    }
    let mut atoms = Vec::with_capacity(natoms);
    for _ in 0..natoms {
        let (n, l) = next("atom")?;
        let row = nums((n, l))?;
        if row.len() < 5 {
            return Err(err(n, "atom line needs Z, charge and position"));
        }
        atoms.push((row[0] as u32, [row[2], row[3], row[4]]));
    }
    let mut values = Vec::with_capacity(dims.iter().product());
    for (n, l) in lines {
        values.extend(nums((n + 1, l))?);
    }
    if values.len() != dims.iter().product::<usize>() {
        return Err(err(
            0,
            &format!(
                "expected {} values, found {}",
                dims.iter().product::<usize>(),
                values.len()
            ),
        ));
    }
    Ok(CubeData {
        comments: [c1, c2],
        origin: [head[1], head[2], head[3]],
        dims,
        voxel,
        atoms,
        values,
    })
}
