use crate::pwbasis::{write_cube, DensityGrid};
use crate::{Error, Result};

/// Suggested isosurface level (e/Å³) for charge-density differences.
pub const DEFAULT_ISOVALUE: f64 = 0.004;

/// `ρ_bilayer - ρ_top - ρ_bottom` on a shared grid.
pub fn charge_density_difference(
    bilayer: &DensityGrid,
    top: &DensityGrid,
    bottom: &DensityGrid,
) -> Result<DensityGrid> {
    for other in [top, bottom] {
        if !bilayer.same_grid(other) {
            return Err(Error::InvalidParameter(format!(
                "density grids differ: {:?} vs {:?}",
                bilayer.dims, other.dims
            )));
        }
    }
    let values = bilayer
        .values
        .iter()
        .zip(&top.values)
        .zip(&bottom.values)
        .map(|((b, t), s)| b - t - s)
        .collect();
    Ok(DensityGrid {
        dims: bilayer.dims,
        values,
        cell: bilayer.cell.clone(),
    })
}

/// Cube text of a difference density (e/Bohr³) with the isovalue recorded
/// in the second comment line.
pub fn cdd_cube(diff: &DensityGrid, isovalue: f64) -> String {
    let note = format!("isovalue {isovalue} e/A^3");
    write_cube(
        &diff.cell,
        diff.dims,
        &diff.values,
        ["charge density difference (e/bohr^3)", &note],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwbasis::read_cube;
    use crate::structure::Cell;

    fn grid(values: [f64; 8]) -> DensityGrid {
        DensityGrid {
            dims: [2, 2, 2],
            values: values.to_vec(),
            cell: Cell::cubic(2.0).unwrap(),
        }
    }

    #[test]
    fn pointwise_subtraction() {
        let b = grid([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let t = grid([0.5, 0.5, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let s = grid([0.25, 1.0, 1.0, 2.0, 2.0, 4.0, 4.0, 4.5]);
        let d = charge_density_difference(&b, &t, &s).unwrap();
        assert_eq!(d.values, vec![0.25, 0.5, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn additive_densities_cancel() {
        let t = grid([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let s = grid([0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]);
        let b = grid([0.9; 8]);
        let d = charge_density_difference(&b, &t, &s).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-15));
        assert!(d.integrate().abs() < 1e-8);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let b = grid([0.0; 8]);
        let other = DensityGrid::zeros(&Cell::cubic(2.0).unwrap(), [2, 2, 1]);
        assert!(charge_density_difference(&b, &other, &b).is_err());
    }

    #[test]
    fn cube_records_isovalue() {
        let d = grid([0.0, 1e-3, -2e-3, 0.0, 0.0, 0.0, 0.0, 5e-4]);
        let text = cdd_cube(&d, DEFAULT_ISOVALUE);
        let c = read_cube(&text).unwrap();
        assert!(c.comments[1].contains("0.004"));
        assert_eq!(c.dims, [2, 2, 2]);
        for (a, b) in c.values.iter().zip(&d.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
