//! Sweeps over interlayer distance and biaxial strain.
//!
//! Every row owns its whole calculation: a fresh system is built from the
//! displaced cell and solved from the superposition guess, so a row computed
//! alone equals the same row inside a sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kgrid::{hexagonal_path_nodes, kpath, KNode};
use crate::postproc::{analyze_gap, band_structure, GapKind, GapReport};
use crate::scf::{default_bands, scf_loop, ScfOptions, ScfResult, System};
use crate::structure::{apply_biaxial_strain, layer_split, reciprocal_lattice, Cell, LayerTag};
use crate::units::HARTREE_MEV;
use crate::{Error, Result};

/// Builds the system solved for a given geometry.
pub type SystemBuilder<'a> = dyn Fn(&Cell) -> Result<System> + Sync + 'a;

pub const DEFAULT_D_RANGE: (f64, f64, f64) = (2.5, 4.5, 0.2);
pub const DEFAULT_STRAIN_RANGE: (f64, f64, f64) = (-0.05, 0.05, 0.01);
/// Path points per segment for the gap tables.
pub const DEFAULT_PATH_DENSITY: usize = 20;
/// Strains must lie strictly inside `(-MAX_STRAIN, MAX_STRAIN)`.
pub const MAX_STRAIN: f64 = 0.1;

pub const BINDING_TABLE_HEADER: &str =
    "Configuration\tE_b/Ge atom (meV)\tE_g (meV) with LDA*\tE_g (meV) with HSE*\td (\u{c5})";
pub const GAP_TABLE_HEADER: &str =
    "Interlayer distance, d(\u{c5})\tBand Gap (meV)\tPosition of Band Gap (1 st BZ)\tType of Band Gap";
pub const BINDING_CURVE_HEADER: &str =
    "d(A)\tE_total(Ha)\tE_b_per_atom(meV)\tE_b_per_area(meV/A^2)\tconverged";
pub const STRAIN_TABLE_HEADER: &str = "strain\tBand Gap (meV)\tE_total(Ha)\tconverged";

/// Rounds to 1e-6 so that sweep values print without binary noise.
pub fn tidy(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `min, min + step, …` up to `max` inclusive.
pub fn sweep_values(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs step > 0 and max >= min (got {min}, {max}, {step})"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| tidy(min + i as f64 * step)).collect())
}

/// Numerical settings shared by every row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub scf: ScfOptions,
    /// Bands for the gap calculation; defaults from the electron count.
    pub n_bands: Option<usize>,
    pub path_nodes: Vec<KNode>,
    pub points_per_segment: usize,
}

impl ScanSettings {
    pub fn new(scf: ScfOptions) -> Self {
        ScanSettings {
            scf,
            n_bands: None,
            path_nodes: hexagonal_path_nodes(),
            points_per_segment: DEFAULT_PATH_DENSITY,
        }
    }
}

/// SCF of one geometry. Divergence counts as an unconverged result rather
/// than an error so a sweep can carry on.
fn solve(
    build: &SystemBuilder<'_>,
    cell: &Cell,
    options: &ScfOptions,
) -> Result<Option<(System, ScfResult)>> {
    let system = build(cell)?;
    match scf_loop(&system, options) {
        Ok(r) => Ok(Some((system, r))),
        Err(Error::ScfDiverging(n)) => {
            log::warn!("SCF diverged after {n} iterations");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Gap along the configured path from a finished SCF. Unconverged densities
/// are used anyway; callers flag the row.
pub fn gap_of(system: &System, scf: &ScfResult, settings: &ScanSettings) -> Result<GapReport> {
    let recip = reciprocal_lattice(&system.cell)?;
    let path = kpath(&settings.path_nodes, settings.points_per_segment, &recip)?;
    let n_bands = settings
        .n_bands
        .or(settings.scf.n_bands)
        .unwrap_or_else(|| default_bands(system.n_electrons));
    let bands = band_structure(
        system,
        scf,
        settings.scf.ecut_wfc,
        &path,
        n_bands,
        true,
        &settings.scf.diag,
    )?;
    analyze_gap(&bands)
}

/// Cell with the top layer moved so the interlayer distance is `d` Å.
pub fn at_distance(bilayer: &Cell, d: f64) -> Result<Cell> {
    let d0 = bilayer.interlayer_distance().ok_or_else(|| {
        Error::InvalidGeometry("bilayer needs atoms tagged top and bottom".into())
    })?;
    bilayer.shift_layer(LayerTag::Top, d - d0)
}

/// Energies of the two isolated layers in the bilayer's cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerReferences {
    /// Hartree.
    pub top: f64,
    /// Hartree.
    pub bottom: f64,
    pub n_top: usize,
    /// Å².
    pub area: f64,
}

impl LayerReferences {
    pub fn compute(
        bilayer: &Cell,
        build: &SystemBuilder<'_>,
        options: &ScfOptions,
    ) -> Result<Self> {
        let (top, bottom) = layer_split(bilayer)?;
        let energy = |cell: &Cell| -> Result<f64> {
            match solve(build, cell, options)? {
                Some((_, r)) if r.converged => Ok(r.total_energy),
                Some((_, r)) => Err(Error::NotConverged(r.iterations)),
                None => Err(Error::NotConverged(options.max_iter)),
            }
        };
        let (e_top, e_bottom) = rayon::join(|| energy(&top), || energy(&bottom));
        Ok(LayerReferences {
            top: e_top?,
            bottom: e_bottom?,
            n_top: top.n_atoms(),
            area: bilayer.area(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingRow {
    /// Å.
    pub d: f64,
    /// Hartree; NaN when the SCF diverged.
    pub total_energy: f64,
    /// Hartree.
    pub binding: f64,
    /// meV per top-layer atom.
    pub per_atom: f64,
    /// meV/Å².
    pub per_area: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gap: Option<GapReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BindingMinimum {
    /// Å.
    pub d: f64,
    /// meV per top-layer atom.
    pub per_atom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingCurve {
    pub references: LayerReferences,
    /// Sorted by `d`.
    pub rows: Vec<BindingRow>,
    pub minimum: Option<BindingMinimum>,
}

/// One row of a binding curve: SCF of the bilayer at distance `d`, plus the
/// gap when `with_gap` is set.
pub fn binding_row(
    bilayer: &Cell,
    build: &SystemBuilder<'_>,
    settings: &ScanSettings,
    refs: &LayerReferences,
    d: f64,
    with_gap: bool,
) -> Result<BindingRow> {
    let d = tidy(d);
    let cell = at_distance(bilayer, d)?;
    let solved = solve(build, &cell, &settings.scf)?;
    let Some((system, scf)) = solved else {
        return Ok(BindingRow {
            d,
            total_energy: f64::NAN,
            binding: f64::NAN,
            per_atom: f64::NAN,
            per_area: f64::NAN,
            converged: false,
            iterations: settings.scf.max_iter,
            gap: None,
        });
    };
    let binding = scf.total_energy - refs.top - refs.bottom;
    let gap = if with_gap {
        Some(gap_of(&system, &scf, settings)?)
    } else {
        None
    };
    Ok(BindingRow {
        d,
        total_energy: scf.total_energy,
        binding,
        per_atom: binding * HARTREE_MEV / refs.n_top as f64,
        per_area: binding * HARTREE_MEV / refs.area,
        converged: scf.converged,
        iterations: scf.iterations,
        gap,
    })
}

/// Binding energy over interlayer distance. Rows run in parallel and are
/// returned sorted by `d`; the minimum is refined by a parabola through the
/// lowest converged row and its converged neighbours.
pub fn binding_curve(
    bilayer: &Cell,
    build: &SystemBuilder<'_>,
    settings: &ScanSettings,
    d_list: &[f64],
    with_gaps: bool,
) -> Result<BindingCurve> {
    if d_list.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a binding curve needs at least 3 distances, got {}",
            d_list.len()
        )));
    }
    if let Some(d) = d_list.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "interlayer distance must be > 0, got {d}"
        )));
    }
    let refs = LayerReferences::compute(bilayer, build, &settings.scf)?;
    let mut rows: Vec<BindingRow> = d_list
        .par_iter()
        .map(|&d| binding_row(bilayer, build, settings, &refs, d, with_gaps))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.d.total_cmp(&b.d));
    for r in rows.iter().filter(|r| !r.converged) {
        log::warn!(
            "row d = {} did not converge and is left out of the minimum fit",
            r.d
        );
    }
    let minimum = parabolic_minimum(&rows);
    Ok(BindingCurve {
        references: refs,
        rows,
        minimum,
    })
}

/// Vertex of the parabola through the lowest converged row and its
/// neighbours; the lowest row itself when the fit is not convex.
pub fn parabolic_minimum(rows: &[BindingRow]) -> Option<BindingMinimum> {
    let good: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.d, r.per_atom))
        .collect();
    let (lo, &(dl, el)) = good
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let lowest = BindingMinimum {
        d: dl,
        per_atom: el,
    };
    if good.len() < 3 {
        return Some(lowest);
    }
    let c = lo.clamp(1, good.len() - 2);
    let [(x0, y0), (x1, y1), (x2, y2)] = [good[c - 1], good[c], good[c + 1]];
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    let c0 =
        (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom;
    if !(a > 0.0) {
        return Some(lowest);
    }
    let xv = -b / (2.0 * a);
    if !(x0..=x2).contains(&xv) {
        return Some(lowest);
    }
    Some(BindingMinimum {
        d: xv,
        per_atom: a * xv * xv + b * xv + c0,
    })
}

impl BindingCurve {
    /// Per-distance energies, one row each.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(BINDING_CURVE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{:.10}\t{:.6}\t{:.6}\t{}",
                r.d,
                r.total_energy,
                r.per_atom,
                r.per_area,
                if r.converged { "yes" } else { "no" }
            );
        }
        s
    }

    /// Distance-gap table, one row per distance.
    pub fn gap_table(&self) -> String {
        let rows: Vec<GapRow> = self
            .rows
            .iter()
            .filter_map(|r| {
                r.gap.as_ref().map(|g| GapRow {
                    d: r.d,
                    gap: g.clone(),
                    converged: r.converged,
                })
            })
            .collect();
        gap_table(&rows)
    }
}

/// The optimised-distance summary with its column header.
pub fn binding_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from(BINDING_TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let gap = r
            .gap
            .map_or_else(|| "n/a".to_string(), |g| format!("{g:.1}"));
        let _ = writeln!(
            s,
            "{}\t{:.4}\t{}\tn/a\t{:.2}",
            r.label, r.per_atom, gap, r.d
        );
    }
    s
}

/// One configuration in the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    /// meV per top-layer atom.
    pub per_atom: f64,
    /// meV at the optimised distance.
    pub gap: Option<f64>,
    /// Å.
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub d: f64,
    pub gap: GapReport,
    pub converged: bool,
}

/// Gap, its location and its type at each distance.
pub fn gap_vs_distance(
    bilayer: &Cell,
    build: &SystemBuilder<'_>,
    settings: &ScanSettings,
    d_list: &[f64],
) -> Result<Vec<GapRow>> {
    let mut rows: Vec<GapRow> = d_list
        .par_iter()
        .map(|&d| gap_row(bilayer, build, settings, d))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.d.total_cmp(&b.d));
    Ok(rows)
}

/// A single distance of the gap table.
pub fn gap_row(
    bilayer: &Cell,
    build: &SystemBuilder<'_>,
    settings: &ScanSettings,
    d: f64,
) -> Result<GapRow> {
    let d = tidy(d);
    let cell = at_distance(bilayer, d)?;
    let (system, scf) =
        solve(build, &cell, &settings.scf)?.ok_or(Error::ScfDiverging(settings.scf.max_iter))?;
    Ok(GapRow {
        d,
        gap: gap_of(&system, &scf, settings)?,
        converged: scf.converged,
    })
}

fn kind_text(kind: GapKind, converged: bool) -> String {
    if converged {
        kind.to_string()
    } else {
        format!("{kind} (unconverged)")
    }
}

/// Renders gap rows under the four-column header.
pub fn gap_table(rows: &[GapRow]) -> String {
    let mut s = String::from(GAP_TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{:.1}\t{}\t{}",
            r.d,
            r.gap.gap,
            r.gap.location(),
            kind_text(r.gap.kind(), r.converged)
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainRow {
    pub strain: f64,
    /// meV.
    pub gap: f64,
    pub kind: GapKind,
    /// Hartree.
    pub total_energy: f64,
    pub converged: bool,
}

/// A single strain point: strained cell, SCF and gap.
pub fn strain_row(
    cell: &Cell,
    build: &SystemBuilder<'_>,
    settings: &ScanSettings,
    strain: f64,
) -> Result<StrainRow> {
    if !(strain.abs() < MAX_STRAIN) {
        return Err(Error::InvalidParameter(format!(
            "strain must lie in (-{MAX_STRAIN}, {MAX_STRAIN}), got {strain}"
        )));
    }
    let strain = tidy(strain);
    let strained = apply_biaxial_strain(cell, strain)?;
    let (system, scf) = solve(build, &strained, &settings.scf)?
        .ok_or(Error::ScfDiverging(settings.scf.max_iter))?;
    let gap = gap_of(&system, &scf, settings)?;
    Ok(StrainRow {
        strain,
        gap: gap.gap,
        kind: gap.kind(),
        total_energy: scf.total_energy,
        converged: scf.converged,
    })
}

/// Gap and total energy over biaxial strain, sorted by strain.
pub fn strain_sweep(
    cell: &Cell,
    build: &SystemBuilder<'_>,
    settings: &ScanSettings,
    strains: &[f64],
) -> Result<Vec<StrainRow>> {
    if let Some(e) = strains.iter().find(|e| !(e.abs() < MAX_STRAIN)) {
        return Err(Error::InvalidParameter(format!(
            "strain must lie in (-{MAX_STRAIN}, {MAX_STRAIN}), got {e}"
        )));
    }
    let mut rows: Vec<StrainRow> = strains
        .par_iter()
        .map(|&e| strain_row(cell, build, settings, e))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.strain.total_cmp(&b.strain));
    Ok(rows)
}

pub fn strain_table(rows: &[StrainRow]) -> String {
    let mut s = String::from(STRAIN_TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{:.1}\t{:.10}\t{}",
            r.strain,
            r.gap,
            r.total_energy,
            if r.converged { "yes" } else { "no" }
        );
    }
    s
}
