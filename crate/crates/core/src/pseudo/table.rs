use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use libm::erf;
use serde::{Deserialize, Serialize};

use crate::special::{log_mesh, sinc, spherical_bessel, trapezoid, trapezoid_to};
use crate::structure::Cell;
use crate::{Error, Result};

/// Relative tolerance of the Coulomb tail beyond `r_c`.
const TAIL_TOLERANCE: f64 = 1e-6;
/// Projector magnitude regarded as zero beyond `r_c`.
const PROJECTOR_ZERO: f64 = 1e-10;
/// Highest supported angular momentum.
const MAX_L: u32 = 2;

pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-3;

/// One separable channel: radial projector `β_l(r)` (Bohr^-3/2) and its
/// coupling `D_l` (Hartree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub l: u32,
    pub beta: Vec<f64>,
    pub coupling: f64,
}

/// A norm-conserving pseudopotential on a radial mesh (Bohr, Hartree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudopotential {
    pub element: String,
    pub z_valence: f64,
    pub r_grid: Vec<f64>,
    pub v_local: Vec<f64>,
    pub projectors: Vec<Projector>,
    pub r_c: f64,
    /// Charge of each channel inside `r_c`, keyed by `l`.
    pub reference_norms: BTreeMap<u32, f64>,
}

enum Violation {
    At(usize, String),
    General(String),
}

impl Pseudopotential {
    /// Bare Coulomb ion `v = -z/r` with no projectors.
    pub fn coulomb(element: &str, z_valence: f64) -> Self {
        let r_grid = log_mesh(1e-5, 60.0, 4001);
        let v_local = r_grid.iter().map(|&r| -z_valence / r).collect();
        Pseudopotential {
            element: element.to_string(),
            z_valence,
            r_grid,
            v_local,
            projectors: Vec::new(),
            r_c: 0.0,
            reference_norms: BTreeMap::new(),
        }
    }

    /// Error-function screened ion `v = -z erf(r/σ)/r`. The core radius is
    /// set to 4σ, where `erfc` has dropped below 2e-8.
    pub fn erf_screened(element: &str, z_valence: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "screening width must be > 0, got {sigma}"
            )));
        }
        let r_grid = log_mesh(1e-6, 60.0, 8001);
        let v_local = r_grid
            .iter()
            .map(|&r| -z_valence * erf(r / sigma) / r)
            .collect();
        Ok(Pseudopotential {
            element: element.to_string(),
            z_valence,
            r_grid,
            v_local,
            projectors: Vec::new(),
            r_c: 4.0 * sigma,
            reference_norms: BTreeMap::new(),
        })
    }

    /// Adds a Gaussian projector `β(r) = r^l exp(-r²/2w²)`, truncated at `r_c`.
    pub fn with_gaussian_projector(mut self, l: u32, width: f64, coupling: f64) -> Result<Self> {
        let edge = self.r_c.powi(l as i32) * (-self.r_c * self.r_c / (2.0 * width * width)).exp();
        if !(width > 0.0) || edge >= PROJECTOR_ZERO {
            return Err(Error::Pseudo {
                element: self.element.clone(),
                message: format!(
                    "projector width {width} does not decay inside r_c = {}",
                    self.r_c
                ),
            });
        }
        let beta = self
            .r_grid
            .iter()
            .map(|&r| {
                if r > self.r_c {
                    0.0
                } else {
                    r.powi(l as i32) * (-r * r / (2.0 * width * width)).exp()
                }
            })
            .collect();
        self.projectors.push(Projector { l, beta, coupling });
        self.validate()?;
        Ok(self)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        self.violation().map_or(Ok(()), |v| {
            let message = match v {
                Violation::At(i, m) => format!("radial point {i}: {m}"),
                Violation::General(m) => m,
            };
            Err(Error::Pseudo {
                element: self.element.clone(),
                message,
            })
        })
    }

    fn violation(&self) -> Option<Violation> {
        let n = self.r_grid.len();
        if n < 2 {
            return Some(Violation::General(
                "radial mesh needs at least two points".into(),
            ));
        }
        if self.v_local.len() != n {
            return Some(Violation::General(
                "v_local length differs from the mesh".into(),
            ));
        }
        if !(self.r_grid[0] > 0.0) {
            return Some(Violation::At(
                0,
                "radial mesh must start above r = 0".into(),
            ));
        }
        for i in 1..n {
            if !(self.r_grid[i] > self.r_grid[i - 1]) {
                return Some(Violation::At(
                    i,
                    "radial mesh is not strictly increasing".into(),
                ));
            }
        }
        if !(self.z_valence >= 0.0) || !(self.r_c >= 0.0) {
            return Some(Violation::General(
                "z_valence and r_c must be non-negative".into(),
            ));
        }
        let mut seen = Vec::new();
        for p in &self.projectors {
            if p.l > MAX_L {
                return Some(Violation::General(format!(
                    "channel l = {} not supported (maximum {MAX_L})",
                    p.l
                )));
            }
            if seen.contains(&p.l) {
                return Some(Violation::General(format!(
                    "more than one projector in channel l = {}; only one projector per channel is supported",
                    p.l
                )));
            }
            seen.push(p.l);
            if p.beta.len() != n {
                return Some(Violation::General(format!(
                    "projector l = {} has wrong length",
                    p.l
                )));
            }
        }
        for i in 0..n {
            let r = self.r_grid[i];
            if r <= self.r_c {
                continue;
            }
            let coulomb = -self.z_valence / r;
            let dev = (self.v_local[i] - coulomb).abs();
            if dev > TAIL_TOLERANCE * coulomb.abs().max(1e-300) && dev > 1e-14 {
                return Some(Violation::At(
                    i,
                    format!(
                        "v_local = {} at r = {r} deviates from the Coulomb tail {coulomb}",
                        self.v_local[i]
                    ),
                ));
            }
            for p in &self.projectors {
                if p.beta[i].abs() >= PROJECTOR_ZERO {
                    return Some(Violation::At(
                        i,
                        format!("projector l = {} does not vanish beyond r_c (r = {r})", p.l),
                    ));
                }
            }
        }
        None
    }

    /// Reads the radial-table text format (see `save`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the radial-table format from text; `origin` names the source in
    /// error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::parse(origin, line, msg);
        let mut element = None;
        let mut z_valence = None;
        let mut r_c = None;
        let mut channels = None;
        let mut reference_norms = BTreeMap::new();
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut couplings: Vec<(u32, f64)> = Vec::new();
        #[derive(PartialEq)]
        enum Section {
            Header,
            Table,
            Couplings,
        }
        let mut section = Section::Header;
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            last_line = lineno;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lower = line.to_ascii_lowercase();
            if lower == "table" {
                section = Section::Table;
                continue;
            }
            if lower == "couplings" {
                section = Section::Couplings;
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| err(lineno, format!("expected a number, found {s:?}")))
            };
            match section {
                Section::Header => {
                    let key = fields[0].to_ascii_lowercase();
                    match (key.as_str(), fields.len()) {
                        ("element", 2) => element = Some(fields[1].to_string()),
                        ("z_valence", 2) => z_valence = Some(num(fields[1])?),
                        ("r_c", 2) => r_c = Some(num(fields[1])?),
                        ("channels", 2) => {
                            channels = Some(fields[1].parse::<usize>().map_err(|_| {
                                err(
                                    lineno,
                                    format!(
                                        "channel count must be an integer, found {:?}",
                                        fields[1]
                                    ),
                                )
                            })?)
                        }
                        ("reference_norm", 3) => {
                            let l = fields[1].parse::<u32>().map_err(|_| {
                                err(
                                    lineno,
                                    format!(
                                        "angular momentum must be an integer, found {:?}",
                                        fields[1]
                                    ),
                                )
                            })?;
                            reference_norms.insert(l, num(fields[2])?);
                        }
                        _ => return Err(err(lineno, format!("malformed header line {line:?}"))),
                    }
                }
                Section::Table => {
                    let values = fields
                        .iter()
                        .map(|s| num(s))
                        .collect::<Result<Vec<f64>>>()?;
                    rows.push((lineno, values));
                }
                Section::Couplings => {
                    if fields.len() != 2 {
                        return Err(err(lineno, "coupling lines are `l D`".into()));
                    }
                    let l = fields[0].parse::<u32>().map_err(|_| {
                        err(
                            lineno,
                            format!("angular momentum must be an integer, found {:?}", fields[0]),
                        )
                    })?;
                    couplings.push((l, num(fields[1])?));
                }
            }
        }
        let missing = |what: &str| err(last_line.max(1), format!("header is missing `{what}`"));
        let element = element.ok_or_else(|| missing("element"))?;
        let z_valence = z_valence.ok_or_else(|| missing("z_valence"))?;
        let r_c = r_c.ok_or_else(|| missing("r_c"))?;
        let channels = channels.ok_or_else(|| missing("channels"))?;
        if couplings.len() != channels {
            return Err(err(
                last_line.max(1),
                format!(
                    "header declares {channels} channels but {} couplings are given",
                    couplings.len()
                ),
            ));
        }
        if rows.is_empty() {
            return Err(err(last_line.max(1), "empty radial table".into()));
        }
        let width = 2 + channels;
        let mut r_grid = Vec::with_capacity(rows.len());
        let mut v_local = Vec::with_capacity(rows.len());
        let mut betas = vec![Vec::with_capacity(rows.len()); channels];
        for (lineno, row) in &rows {
            if row.len() != width {
                return Err(err(
                    *lineno,
                    format!("expected {width} columns, found {}", row.len()),
                ));
            }
            r_grid.push(row[0]);
            v_local.push(row[1]);
            for c in 0..channels {
                betas[c].push(row[2 + c]);
            }
        }
        let projectors = couplings
            .into_iter()
            .zip(betas)
            .map(|((l, coupling), beta)| Projector { l, beta, coupling })
            .collect();
        let ps = Pseudopotential {
            element,
            z_valence,
            r_grid,
            v_local,
            projectors,
            r_c,
            reference_norms,
        };
        match ps.violation() {
            None => Ok(ps),
            Some(Violation::At(i, m)) => Err(err(rows[i].0, m)),
            Some(Violation::General(m)) => Err(err(last_line.max(1), m)),
        }
    }

    /// Serialises to the radial-table format. Values use the shortest
    /// representation that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# radial-table pseudopotential, Hartree atomic units");
        let _ = writeln!(s, "element {}", self.element);
        let _ = writeln!(s, "z_valence {:e}", self.z_valence);
        let _ = writeln!(s, "r_c {:e}", self.r_c);
        let _ = writeln!(s, "channels {}", self.projectors.len());
        for (l, n) in &self.reference_norms {
            let _ = writeln!(s, "reference_norm {l} {n:e}");
        }
        let mut head = String::from("# r v_local");
        for p in &self.projectors {
            let _ = write!(head, " beta_l{}", p.l);
        }
        let _ = writeln!(s, "table");
        let _ = writeln!(s, "{head}");
        for i in 0..self.r_grid.len() {
            let _ = write!(s, "{:e} {:e}", self.r_grid[i], self.v_local[i]);
            for p in &self.projectors {
                let _ = write!(s, " {:e}", p.beta[i]);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "couplings");
        for p in &self.projectors {
            let _ = writeln!(s, "{} {:e}", p.l, p.coupling);
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Relative size of the short-range integrand `(v+z/r) r²` at the end of
    /// the mesh compared with its maximum.
    pub fn truncation_ratio(&self) -> f64 {
        let vals: Vec<f64> = self
            .r_grid
            .iter()
            .zip(&self.v_local)
            .map(|(&r, &v)| ((v + self.z_valence / r) * r * r).abs())
            .collect();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            0.0
        } else {
            vals[vals.len() - 1] / max
        }
    }

    /// Volume-free local form factor `Ω·v_loc(G)`.
    pub fn local_form_factor(&self, g: f64) -> f64 {
        let short = self.short_range_form_factor(g);
        if g == 0.0 {
            short
        } else {
            short - 4.0 * PI * self.z_valence / (g * g)
        }
    }

    /// Transform of `v_loc + z/r`, the smooth part of [`Self::local_form_factor`].
    pub fn short_range_form_factor(&self, g: f64) -> f64 {
        let z = self.z_valence;
        let f: Vec<f64> = self
            .r_grid
            .iter()
            .zip(&self.v_local)
            .map(|(&r, &v)| (v + z / r) * r * r * sinc(g * r))
            .collect();
        4.0 * PI * trapezoid(&self.r_grid, &f)
    }

    /// Radial transform `f_l(q) = ∫ β_l(r) j_l(qr) r² dr` of projector `index`.
    pub fn projector_form_factor(&self, index: usize, q: f64) -> f64 {
        let p = &self.projectors[index];
        let f: Vec<f64> = self
            .r_grid
            .iter()
            .zip(&p.beta)
            .map(|(&r, &b)| b * spherical_bessel(p.l, q * r) * r * r)
            .collect();
        trapezoid(&self.r_grid, &f)
    }
}

/// Local pseudopotential in reciprocal space (Hartree). At `G = 0` this is
/// the finite α-term; the divergent Coulomb part is dropped consistently
/// with the Hartree and Ewald conventions.
pub fn vloc_reciprocal(ps: &Pseudopotential, cell: &Cell, g: f64) -> f64 {
    let ratio = ps.truncation_ratio();
    if ratio > 1e-6 {
        log::warn!(
            "{}: short-range local integrand not decayed at mesh end (ratio {ratio:.2e})",
            ps.element
        );
    }
    ps.local_form_factor(g.abs()) / cell.volume_bohr3()
}

/// Per-channel norm-conservation result.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm {
    pub l: u32,
    /// `None` when the pseudopotential carries no reference for the channel.
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub channels: Vec<ChannelNorm>,
    pub tolerance: f64,
}

impl NormReport {
    /// True when every checked channel is within tolerance.
    pub fn passed(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.deviation.is_none_or(|d| d < self.tolerance))
    }

    pub fn unchecked(&self) -> Vec<u32> {
        self.channels
            .iter()
            .filter(|c| c.deviation.is_none())
            .map(|c| c.l)
            .collect()
    }
}

/// Compares `4π∫₀^rc |ψ_l|² r² dr` with the stored reference charges.
pub fn check_norm_conservation(
    ps: &Pseudopotential,
    wavefunctions: &[(u32, Vec<f64>)],
    tolerance: f64,
) -> Result<NormReport> {
    let mut channels = Vec::new();
    for (l, psi) in wavefunctions {
        if psi.len() != ps.r_grid.len() {
            return Err(Error::DimensionMismatch {
                expected: ps.r_grid.len(),
                found: psi.len(),
            });
        }
        let deviation = ps.reference_norms.get(l).map(|&reference| {
            let f: Vec<f64> = ps
                .r_grid
                .iter()
                .zip(psi)
                .map(|(&r, &p)| p * p * r * r)
                .collect();
            (4.0 * PI * trapezoid_to(&ps.r_grid, &f, ps.r_c) - reference).abs()
        });
        channels.push(ChannelNorm { l: *l, deviation });
    }
    Ok(NormReport {
        channels,
        tolerance,
    })
}

/// `(dψ/dr)/ψ` at mesh point `r` by a three-point centred difference that is
/// exact for quadratics on a non-uniform mesh.
pub fn log_derivative(r_grid: &[f64], psi: &[f64], r: f64) -> Result<f64> {
    if r_grid.len() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: r_grid.len(),
            found: psi.len(),
        });
    }
    let i = r_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - r).abs().total_cmp(&(b.1 - r).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidParameter("empty radial mesh".into()))?;
    let tol = 1e-9 * r.abs().max(1.0);
    if (r_grid[i] - r).abs() > tol || i == 0 || i + 1 >= r_grid.len() {
        return Err(Error::InvalidParameter(format!(
            "r = {r} is not an interior mesh point"
        )));
    }
    if psi[i].abs() < 1e-12 {
        return Err(Error::SingularPoint(format!(
            "wavefunction has a node at r = {r}"
        )));
    }
    let hm = r_grid[i] - r_grid[i - 1];
    let hp = r_grid[i + 1] - r_grid[i];
    let d = (hm * hm * psi[i + 1] - hp * hp * psi[i - 1] + (hp * hp - hm * hm) * psi[i])
        / (hm * hp * (hm + hp));
    Ok(d / psi[i])
}
