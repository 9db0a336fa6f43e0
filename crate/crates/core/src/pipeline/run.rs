//! Deck execution: builds the system, runs the requested workflow and
//! writes results plus a manifest under `workdir/prefix/`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::deck::{CalculationKind, Deck, KPointsCard, PositionUnit};
use super::scan::{
    binding_curve, binding_row, binding_summary, strain_sweep, strain_table, sweep_values,
    ScanSettings, SummaryRow, DEFAULT_D_RANGE, DEFAULT_STRAIN_RANGE,
};
use crate::elements;
use crate::kgrid::{kpath, monkhorst_pack_shifted, KMesh, KNode, DOS_MESH};
use crate::postproc::{
    bands_at_density, cdd_cube, charge_density_difference, dos_of_solution, energy_grid, pdos,
    DEFAULT_DOS_SIGMA, DEFAULT_ISOVALUE, DEFAULT_PROJECTOR_WIDTH,
};
use crate::pseudo::{parse_upf_name, Pseudopotential};
use crate::pwbasis::{fft_grid, DensityGrid};
use crate::scf::{
    default_bands, non_self_consistent, scf_loop, EnergyComponents, KPointSolution, KsSolution,
    ScfOptions, ScfResult, System,
};
use crate::structure::{build_hexagonal_cell, layer_split, Cell, LayerTag, StackingPattern};
use crate::units::{BOHR_ANGSTROM, HARTREE_EV};
use crate::xc::Functional;
use crate::{Error, Result};

/// Colon-separated directories searched for pseudopotential tables.
pub const PSEUDO_PATH_ENV: &str = "PWDFT_PSEUDO_PATH";
/// Extension of radial-table pseudopotential files.
pub const PSEUDO_EXTENSION: &str = "rtab";
/// Gaussian width (Bohr) of the model pseudopotential used when no table is found.
pub const FALLBACK_PSEUDO_WIDTH: f64 = 1.0;
/// DOS energy window (eV, relative to the Fermi level) and spacing.
pub const DOS_WINDOW: (f64, f64, f64) = (-10.0, 10.0, 0.01);

pub const CHECKPOINT_FILE: &str = "scf.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// How a deck is run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub workdir: PathBuf,
    /// Directory relative paths in the deck are resolved against.
    pub deck_dir: PathBuf,
    /// Extra pseudopotential directories, searched after `pseudo_dir`.
    pub pseudo_path: Vec<PathBuf>,
    /// Accept an unconverged stored density.
    pub force: bool,
    /// Overrides the deck's calculation kind.
    pub calculation: Option<CalculationKind>,
}

impl RunOptions {
    pub fn new(workdir: impl Into<PathBuf>) -> Self {
        RunOptions {
            workdir: workdir.into(),
            deck_dir: PathBuf::from("."),
            pseudo_path: Vec::new(),
            force: false,
            calculation: None,
        }
    }

    /// Directories listed in the search-path environment variable.
    pub fn pseudo_path_from_env() -> Vec<PathBuf> {
        std::env::var_os(PSEUDO_PATH_ENV)
            .map(|v| {
                std::env::split_paths(&v)
                    .filter(|p| !p.as_os_str().is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

/// Record of one run. Timestamps live here only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub calculation: CalculationKind,
    pub prefix: String,
    pub input_hash: String,
    pub settings: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub warnings: Vec<String>,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub converged: Option<bool>,
}

/// Stored result of an SCF run, read back by later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub converged: bool,
    pub iterations: usize,
    /// Hartree.
    pub total_energy: f64,
    /// Hartree.
    pub fermi_level: f64,
    pub n_electrons: f64,
    pub components: EnergyComponents,
    pub density: DensityGrid,
    pub input_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and parses a deck file.
pub fn load_deck(path: impl AsRef<Path>) -> Result<(Deck, String)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let deck = Deck::parse(&text, &path.display().to_string())?;
    Ok((deck, text))
}

/// The cell described by the deck, with layers tagged by the largest
/// vertical gap when there is more than one atom.
pub fn deck_cell(deck: &Deck) -> Result<Cell> {
    let s = &deck.system;
    let mut cell = match s.ibrav {
        1 => Cell::cubic(s.a)?,
        4 => build_hexagonal_cell(s.a, s.c.unwrap_or(s.a))?,
        other => return Err(Error::Unsupported(format!("ibrav = {other}"))),
    };
    for (sym, p) in &deck.positions {
        let valence = elements::default_valence(sym).unwrap_or(0.0);
        match deck.position_unit {
            PositionUnit::Angstrom => cell.push_atom_with(sym, *p, valence, None)?,
            PositionUnit::Bohr => {
                cell.push_atom_with(sym, p.map(|x| x * BOHR_ANGSTROM), valence, None)?
            }
            PositionUnit::Crystal => cell.push_atom_frac(sym, *p, valence, None)?,
        }
    }
    if cell.n_atoms() >= 2 {
        cell.tag_layers_by_z_gap()?;
    }
    Ok(cell)
}

/// Stacking of a tagged bilayer from the in-plane offset between the first
/// top and first bottom atom.
pub fn detect_stacking(cell: &Cell) -> Option<StackingPattern> {
    let first = |tag| cell.layer_tags().iter().position(|t| *t == Some(tag));
    let (t, b) = (first(LayerTag::Top)?, first(LayerTag::Bottom)?);
    let ft = cell.to_fractional(&cell.positions()[t]);
    let fb = cell.to_fractional(&cell.positions()[b]);
    let off = [ft[0] - fb[0], ft[1] - fb[1]];
    StackingPattern::ALL.into_iter().find(|p| {
        let s = p.shift();
        (0..2).all(|i| {
            let d = off[i] - s[i];
            (d - d.round()).abs() < 1e-3
        })
    })
}

/// Where a species' pseudopotential came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSource {
    pub species: String,
    pub requested: String,
    /// File loaded, or `None` for the built-in model.
    pub path: Option<PathBuf>,
    pub z_valence: f64,
}

/// Everything a deck resolves to before any calculation.
pub struct Prepared {
    pub deck: Deck,
    pub cell: Cell,
    pub pseudos: BTreeMap<String, Pseudopotential>,
    pub sources: Vec<PseudoSource>,
    pub functional: Functional,
    pub dispersion: bool,
    pub options: ScfOptions,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn system_for(&self, cell: &Cell) -> Result<System> {
        let mut pseudos = self.pseudos.clone();
        pseudos.retain(|s, _| cell.species().contains(s));
        System::new(cell.clone(), pseudos, self.functional, self.dispersion)
    }

    pub fn system(&self) -> Result<System> {
        self.system_for(&self.cell)
    }

    pub fn n_bands(&self, system: &System) -> usize {
        self.deck
            .system
            .nbnd
            .unwrap_or_else(|| default_bands(system.n_electrons))
    }
}

fn candidates(dir: &Path, requested: &str) -> Vec<PathBuf> {
    let p = Path::new(requested);
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut v = Vec::new();
    if p.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case(PSEUDO_EXTENSION))
    {
        v.push(dir.join(requested));
    }
    v.push(dir.join(format!("{stem}.{PSEUDO_EXTENSION}")));
    v
}

/// Resolves the deck into a ready-to-run problem.
pub fn prepare(deck: &Deck, opts: &RunOptions) -> Result<Prepared> {
    let mut warnings = deck.warnings.clone();
    let mut dirs = Vec::new();
    if let Some(d) = &deck.control.pseudo_dir {
        dirs.push(opts.deck_dir.join(d));
    }
    dirs.extend(opts.pseudo_path.iter().cloned());

    let mut pseudos = BTreeMap::new();
    let mut sources = Vec::new();
    let mut upf_functional = None;
    for sp in &deck.species {
        match parse_upf_name(&sp.pseudo) {
            Ok(meta) => {
                if let Ok(f) = meta.xc_tag.parse::<Functional>() {
                    upf_functional.get_or_insert(f);
                    if deck.system.input_dft.is_some_and(|d| d != f) {
                        warnings.push(format!(
                            "{}: pseudopotential functional {} differs from input_dft",
                            sp.pseudo, meta.xc_tag
                        ));
                    }
                }
            }
            Err(_) => log::debug!("{} is not a UPF-style name", sp.pseudo),
        }
        let found = dirs
            .iter()
            .flat_map(|d| candidates(d, &sp.pseudo))
            .find(|p| p.is_file());
        let (ps, path) = match found {
            Some(path) => (Pseudopotential::load(&path)?, Some(path)),
            None => {
                let z = elements::default_valence(&sp.symbol).ok_or_else(|| Error::Pseudo {
                    element: sp.symbol.clone(),
                    message: format!("no table found for {} and no default valence", sp.pseudo),
                })?;
                let w = format!(
                    "no pseudopotential table for {}; using the Gaussian-screened model (Z = {z}, width {FALLBACK_PSEUDO_WIDTH} bohr)",
                    sp.pseudo
                );
                log::warn!("{w}");
                warnings.push(w);
                (
                    Pseudopotential::erf_screened(&sp.symbol, z, FALLBACK_PSEUDO_WIDTH)?,
                    None,
                )
            }
        };
        if ps.element != sp.symbol {
            warnings.push(format!(
                "{} describes {} but is used for {}",
                sp.pseudo, ps.element, sp.symbol
            ));
        }
        sources.push(PseudoSource {
            species: sp.symbol.clone(),
            requested: sp.pseudo.clone(),
            path,
            z_valence: ps.z_valence,
        });
        pseudos.insert(sp.symbol.clone(), ps);
    }
    let functional = deck
        .system
        .input_dft
        .or(upf_functional)
        .unwrap_or(Functional::Pz);
    let cell = deck_cell(deck)?;
    let options = scf_options(deck, &mut warnings)?;
    Ok(Prepared {
        deck: deck.clone(),
        cell,
        pseudos,
        sources,
        functional,
        dispersion: deck.system.dispersion(),
        options,
        warnings,
    })
}

/// SCF settings from the deck; anything unset keeps the library default.
pub fn scf_options(deck: &Deck, warnings: &mut Vec<String>) -> Result<ScfOptions> {
    let d = ScfOptions::default();
    let s = &deck.system;
    let kmesh = match &deck.kpoints {
        KPointsCard::Gamma => KMesh::gamma(),
        KPointsCard::Automatic { mesh, shift } => {
            monkhorst_pack_shifted(*mesh, shift.map(|x| x == 1))?
        }
        KPointsCard::CrystalB(_) => KMesh::gamma(),
    };
    if let Some(o) = &s.occupations {
        if !o.eq_ignore_ascii_case("smearing") {
            warnings.push(format!("occupations = {o:?} is treated as smearing"));
        }
    }
    let options = ScfOptions {
        ecut_wfc: s.ecutwfc,
        ecut_rho: Some(s.ecutrho.unwrap_or(4.0 * s.ecutwfc)),
        kmesh,
        smearing: s.smearing.unwrap_or(d.smearing),
        degauss: s.degauss.unwrap_or(d.degauss),
        mixing_beta: deck.electrons.mixing_beta.unwrap_or(d.mixing_beta),
        conv_thr: deck.electrons.conv_thr.unwrap_or(d.conv_thr),
        max_iter: deck.electrons.electron_maxstep.unwrap_or(d.max_iter),
        n_bands: s.nbnd,
        ..d
    };
    options.validate()?;
    Ok(options)
}

/// The deck's band path: crystal_b nodes with equal segment counts.
pub fn deck_path(deck: &Deck) -> Result<(Vec<KNode>, usize)> {
    let KPointsCard::CrystalB(nodes) = &deck.kpoints else {
        return Err(Error::Config(
            "band runs need a K_POINTS {crystal_b} card".into(),
        ));
    };
    let count = nodes[0].count;
    if nodes[..nodes.len() - 1].iter().any(|n| n.count != count) {
        return Err(Error::Unsupported(
            "crystal_b paths with different counts per segment".into(),
        ));
    }
    let knodes = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let label = n
                .label
                .as_deref()
                .map_or_else(|| format!("P{}", i + 1), str::to_uppercase);
            KNode::new(&label, n.k)
        })
        .collect();
    Ok((knodes, count))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }
}

fn energies_tsv(scf: &ScfResult) -> String {
    let c = &scf.components;
    let mut s = String::from("term\tHa\teV\n");
    for (name, v) in [
        ("kinetic", c.kinetic),
        ("local", c.local),
        ("hartree", c.hartree),
        ("xc", c.xc),
        ("nonlocal", c.nonlocal),
        ("ewald", c.ewald),
        ("dispersion", c.dispersion),
        ("total", scf.total_energy),
        ("fermi", scf.solution.fermi_level),
    ] {
        let _ = writeln!(s, "{name}\t{v:.12}\t{:.10}", v * HARTREE_EV);
    }
    s
}

fn read_checkpoint(dir: &Path, prefix: &str) -> Result<Checkpoint> {
    let path = dir.join(CHECKPOINT_FILE);
    if !path.is_file() {
        return Err(Error::Dependency {
            prefix: prefix.to_string(),
            path,
        });
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn usable(cp: &Checkpoint, system: &System, options: &ScfOptions, force: bool) -> Result<()> {
    if !cp.converged {
        if !force {
            return Err(Error::NotConverged(cp.iterations));
        }
        log::warn!("using an unconverged stored density");
    }
    let dims = fft_grid(&system.cell, options.ecut_rho());
    if cp.density.dims != dims || (cp.n_electrons - system.n_electrons).abs() > 1e-8 {
        return Err(Error::Config(format!(
            "stored density ({:?}, {} electrons) does not match this deck ({dims:?}, {} electrons)",
            cp.density.dims, cp.n_electrons, system.n_electrons
        )));
    }
    Ok(())
}

fn run_scf(system: &System, options: &ScfOptions) -> Result<ScfResult> {
    scf_loop(system, options)
}

/// Runs a deck and returns the manifest written next to the results.
/// An SCF that does not converge still writes its files before the
/// non-convergence error is returned.
pub fn run_deck(deck: &Deck, deck_text: &str, opts: &RunOptions) -> Result<Manifest> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let kind = opts.calculation.unwrap_or(deck.control.calculation);
    let prefix = deck.control.prefix.clone();
    let dir = opts.workdir.join(&prefix);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let input_hash = sha256_hex(deck_text.as_bytes());

    let p = prepare(deck, opts)?;
    let mut late_warnings = Vec::new();
    let mut out = Outputs {
        dir: dir.clone(),
        files: Vec::new(),
    };
    let mut settings = json!({
        "cell_angstrom": p.cell.lattice(),
        "functional": p.functional.to_string(),
        "dispersion": p.dispersion,
        "pseudopotentials": p.sources,
        "scf": p.options,
        "ecut_rho": p.options.ecut_rho(),
    });
    let mut converged = None;
    let mut failure = None;

    match kind {
        CalculationKind::Scf => {
            if matches!(deck.kpoints, KPointsCard::CrystalB(_)) {
                return Err(Error::Config(
                    "an scf run needs automatic or gamma k-points".into(),
                ));
            }
            let system = p.system()?;
            settings["d2_cutoff"] = json!(system.d2_cutoff);
            settings["n_electrons"] = json!(system.n_electrons);
            settings["n_bands"] = json!(p
                .options
                .n_bands
                .unwrap_or_else(|| default_bands(system.n_electrons)));
            let scf = run_scf(&system, &p.options)?;
            out.write("scf_log.tsv", &scf.log_tsv())?;
            out.write("energies.tsv", &energies_tsv(&scf))?;
            let cp = Checkpoint {
                converged: scf.converged,
                iterations: scf.iterations,
                total_energy: scf.total_energy,
                fermi_level: scf.solution.fermi_level,
                n_electrons: system.n_electrons,
                components: scf.components,
                density: scf.final_density.clone(),
                input_hash: input_hash.clone(),
            };
            out.write(CHECKPOINT_FILE, &serde_json::to_string(&cp)?)?;
            converged = Some(scf.converged);
            if !scf.converged {
                failure = Some(Error::NotConverged(scf.iterations));
            }
        }
        CalculationKind::Bands => {
            let system = p.system()?;
            let cp = read_checkpoint(&dir, &prefix)?;
            usable(&cp, &system, &p.options, opts.force)?;
            let (nodes, count) = deck_path(deck)?;
            let path = kpath(
                &nodes,
                count,
                &crate::structure::reciprocal_lattice(&system.cell)?,
            )?;
            let n_bands = p.n_bands(&system);
            settings["n_bands"] = json!(n_bands);
            settings["path"] = json!({ "nodes": nodes, "points_per_segment": count });
            let bands = bands_at_density(
                &system,
                &cp.density,
                cp.fermi_level,
                p.options.ecut_wfc,
                &path,
                n_bands,
                &p.options.diag,
            )?;
            out.write("bands.tsv", &bands.to_tsv())?;
            out.write("bands.labels", &bands.labels_text())?;
            let gap = crate::postproc::analyze_gap(&bands)?;
            let mut table =
                String::from("Band Gap (meV)\tPosition of Band Gap (1 st BZ)\tType of Band Gap\n");
            let _ = writeln!(table, "{:.1}\t{}\t{}", gap.gap, gap.location(), gap.kind());
            out.write("gap.tsv", &table)?;
        }
        CalculationKind::Dos => {
            let system = p.system()?;
            let cp = read_checkpoint(&dir, &prefix)?;
            usable(&cp, &system, &p.options, opts.force)?;
            let mesh = match &deck.kpoints {
                KPointsCard::Automatic { mesh, shift } => {
                    monkhorst_pack_shifted(*mesh, shift.map(|x| x == 1))?
                }
                _ => monkhorst_pack_shifted(DOS_MESH, [false; 3])?,
            };
            let n_bands = p.n_bands(&system);
            let solved = non_self_consistent(
                &system,
                &cp.density,
                p.options.ecut_wfc,
                &mesh.points,
                n_bands,
                &p.options.diag,
            )?;
            let solution = KsSolution {
                kpoints: solved
                    .into_iter()
                    .zip(mesh.points.iter().zip(&mesh.weights))
                    .map(|((basis, e), (k, w))| KPointSolution {
                        k: *k,
                        weight: *w,
                        basis,
                        occupations: vec![0.0; e.values.len()],
                        eigenvalues: e.values,
                        vectors: e.vectors,
                    })
                    .collect(),
                fermi_level: cp.fermi_level,
            };
            let energies = energy_grid(DOS_WINDOW.0, DOS_WINDOW.1, DOS_WINDOW.2)?;
            settings["n_bands"] = json!(n_bands);
            settings["dos"] = json!({
                "mesh_points": mesh.points.len(),
                "sigma_ev": DEFAULT_DOS_SIGMA,
                "window_ev": [DOS_WINDOW.0, DOS_WINDOW.1],
                "step_ev": DOS_WINDOW.2,
                "projector_width_bohr": DEFAULT_PROJECTOR_WIDTH,
            });
            let total = dos_of_solution(&solution, DEFAULT_DOS_SIGMA, &energies)?;
            let mut s = String::from("# E(eV)\tDOS(states/eV)\n");
            for (e, v) in energies.iter().zip(&total) {
                let _ = writeln!(s, "{e:.4}\t{v:.10}");
            }
            out.write("dos.tsv", &s)?;
            let projected = pdos(
                &system.cell,
                &solution,
                DEFAULT_PROJECTOR_WIDTH,
                DEFAULT_DOS_SIGMA,
                &energies,
            )?;
            out.write("pdos.tsv", &projected.to_tsv())?;
        }
        CalculationKind::Cdd => {
            let system = p.system()?;
            let cp = read_checkpoint(&dir, &prefix)?;
            usable(&cp, &system, &p.options, opts.force)?;
            let (top, bottom) = layer_split(&p.cell)?;
            let (rt, rb) = rayon::join(
                || p.system_for(&top).and_then(|s| run_scf(&s, &p.options)),
                || p.system_for(&bottom).and_then(|s| run_scf(&s, &p.options)),
            );
            let (rt, rb) = (rt?, rb?);
            for r in [&rt, &rb] {
                if !r.converged && !opts.force {
                    return Err(Error::NotConverged(r.iterations));
                }
            }
            let diff =
                charge_density_difference(&cp.density, &rt.final_density, &rb.final_density)?;
            settings["isovalue"] = json!(DEFAULT_ISOVALUE);
            settings["cdd_integral"] = json!(diff.integrate());
            out.write("cdd.cube", &cdd_cube(&diff, DEFAULT_ISOVALUE))?;
        }
        CalculationKind::BindScan => {
            let scan = deck.scan.clone().unwrap_or_default();
            let d_list = sweep_values(
                scan.d_min.unwrap_or(DEFAULT_D_RANGE.0),
                scan.d_max.unwrap_or(DEFAULT_D_RANGE.1),
                scan.d_step.unwrap_or(DEFAULT_D_RANGE.2),
            )?;
            let gaps = scan.gaps.unwrap_or(false);
            let stacking = deck
                .stacking
                .as_ref()
                .and_then(|s| s.pattern)
                .or_else(|| detect_stacking(&p.cell));
            let label = match stacking {
                Some(s) => s.structure_label(),
                None => {
                    late_warnings
                        .push("stacking pattern not recognised; labelled by prefix".into());
                    prefix.clone()
                }
            };
            let st = scan_settings(&p, deck)?;
            settings["scan"] = json!({
                "d_list": d_list,
                "gaps": gaps,
                "stacking": label,
                "path": st.path_nodes,
                "points_per_segment": st.points_per_segment,
                "n_bands": st.n_bands,
            });
            let build = |c: &Cell| p.system_for(c);
            let curve = binding_curve(&p.cell, &build, &st, &d_list, gaps)?;
            out.write("binding.tsv", &curve.to_tsv())?;
            if gaps {
                out.write("gap_vs_d.tsv", &curve.gap_table())?;
            }
            let summary = match curve.minimum {
                Some(m) => {
                    let d_star = (m.d * 100.0).round() / 100.0;
                    let row = binding_row(&p.cell, &build, &st, &curve.references, d_star, true)?;
                    vec![SummaryRow {
                        label,
                        per_atom: m.per_atom,
                        gap: row.gap.map(|g| g.gap),
                        d: m.d,
                    }]
                }
                None => {
                    late_warnings.push("no converged row; summary left empty".into());
                    Vec::new()
                }
            };
            out.write("summary.tsv", &binding_summary(&summary))?;
            converged = Some(curve.rows.iter().all(|r| r.converged));
        }
        CalculationKind::StrainScan => {
            let scan = deck.scan.clone().unwrap_or_default();
            let strains = sweep_values(
                scan.strain_min.unwrap_or(DEFAULT_STRAIN_RANGE.0),
                scan.strain_max.unwrap_or(DEFAULT_STRAIN_RANGE.1),
                scan.strain_step.unwrap_or(DEFAULT_STRAIN_RANGE.2),
            )?;
            let st = scan_settings(&p, deck)?;
            settings["scan"] = json!({
                "strains": strains,
                "path": st.path_nodes,
                "points_per_segment": st.points_per_segment,
                "n_bands": st.n_bands,
            });
            let build = |c: &Cell| p.system_for(c);
            let rows = strain_sweep(&p.cell, &build, &st, &strains)?;
            out.write("strain.tsv", &strain_table(&rows))?;
            converged = Some(rows.iter().all(|r| r.converged));
        }
    }

    let manifest = Manifest {
        program: "pwdft".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        calculation: kind,
        prefix,
        input_hash,
        settings,
        outputs: out.files,
        warnings: p.warnings.iter().cloned().chain(late_warnings).collect(),
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        converged,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&path, e))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Sweep settings: the deck's path when it has one, else the hexagonal path.
fn scan_settings(p: &Prepared, deck: &Deck) -> Result<ScanSettings> {
    let mut st = ScanSettings::new(p.options.clone());
    if let KPointsCard::CrystalB(_) = deck.kpoints {
        let (nodes, count) = deck_path(deck)?;
        st.path_nodes = nodes;
        st.points_per_segment = count;
    }
    let system = p.system()?;
    st.n_bands = Some(p.n_bands(&system));
    Ok(st)
}
