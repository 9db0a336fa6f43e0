//! Namelist-and-card input decks.
//!
//! A deck is a sequence of namelists (`&NAME`, `key = value` lines, closed by
//! `/`) followed by cards (`ATOMIC_SPECIES`, `ATOMIC_POSITIONS (unit)`,
//! `K_POINTS {kind}`). Keys are case-insensitive, `!` starts a comment, and
//! several assignments may share a line when separated by commas. Two
//! extension namelists are understood: `&SCAN` (distance and strain sweeps)
//! and `&STACKING` (registry label).

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::Vec3;
use crate::scf::SmearingKind;
use crate::structure::StackingPattern;
use crate::xc::Functional;
use crate::{Error, Result};

/// What a deck asks the pipeline to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalculationKind {
    Scf,
    Bands,
    Dos,
    BindScan,
    StrainScan,
    Cdd,
}

impl CalculationKind {
    pub const ALL: [CalculationKind; 6] = [
        CalculationKind::Scf,
        CalculationKind::Bands,
        CalculationKind::Dos,
        CalculationKind::BindScan,
        CalculationKind::StrainScan,
        CalculationKind::Cdd,
    ];

    /// Whether the run reads a stored SCF density.
    pub fn needs_scf(self) -> bool {
        matches!(
            self,
            CalculationKind::Bands | CalculationKind::Dos | CalculationKind::Cdd
        )
    }
}

impl fmt::Display for CalculationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalculationKind::Scf => "scf",
            CalculationKind::Bands => "bands",
            CalculationKind::Dos => "dos",
            CalculationKind::BindScan => "bind-scan",
            CalculationKind::StrainScan => "strain-scan",
            CalculationKind::Cdd => "cdd",
        })
    }
}

impl FromStr for CalculationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        CalculationKind::ALL
            .into_iter()
            .find(|k| k.to_string() == t)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown calculation {s:?} (expected scf, bands, dos, bind-scan, strain-scan or cdd)"
                ))
            })
    }
}

/// `key = raw value` pairs kept verbatim.
pub type Extras = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub calculation: CalculationKind,
    pub outdir: String,
    pub prefix: String,
    pub pseudo_dir: Option<String>,
    pub extra: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSection {
    pub ibrav: i32,
    /// Å.
    pub a: f64,
    /// Å; required for the hexagonal lattice.
    pub c: Option<f64>,
    pub nat: usize,
    pub ntyp: usize,
    /// Ry.
    pub ecutwfc: f64,
    /// Ry.
    pub ecutrho: Option<f64>,
    pub occupations: Option<String>,
    pub smearing: Option<SmearingKind>,
    /// Ry.
    pub degauss: Option<f64>,
    pub input_dft: Option<Functional>,
    pub vdw_corr: Option<String>,
    pub nbnd: Option<usize>,
    pub extra: Extras,
}

impl SystemSection {
    /// Whether the dispersion correction is requested.
    pub fn dispersion(&self) -> bool {
        self.vdw_corr
            .as_deref()
            .is_some_and(|v| vdw_enabled(v).unwrap_or(false))
    }
}

fn vdw_enabled(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "grimme-d2" | "dft-d" | "d2" => Some(true),
        "none" | "" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ElectronsSection {
    /// Ry.
    pub conv_thr: Option<f64>,
    pub mixing_beta: Option<f64>,
    pub electron_maxstep: Option<usize>,
    pub extra: Extras,
}

/// Sweep ranges for the scan workflows (Å and fractional strain).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanSection {
    pub d_min: Option<f64>,
    pub d_max: Option<f64>,
    pub d_step: Option<f64>,
    pub strain_min: Option<f64>,
    pub strain_max: Option<f64>,
    pub strain_step: Option<f64>,
    /// Also tabulate the gap at every distance.
    pub gaps: Option<bool>,
    pub extra: Extras,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StackingSection {
    pub pattern: Option<StackingPattern>,
    pub extra: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesEntry {
    pub symbol: String,
    pub mass: f64,
    pub pseudo: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionUnit {
    Angstrom,
    Bohr,
    Crystal,
}

impl fmt::Display for PositionUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PositionUnit::Angstrom => "angstrom",
            PositionUnit::Bohr => "bohr",
            PositionUnit::Crystal => "crystal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathNode {
    /// Fractional coordinates.
    pub k: Vec3,
    /// Points from this node to the next.
    pub count: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KPointsCard {
    Gamma,
    Automatic { mesh: [usize; 3], shift: [usize; 3] },
    CrystalB(Vec<PathNode>),
}

/// A parsed input deck. Unrecognised keys are kept in the `extra` lists
/// so the deck can be written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deck {
    pub control: Control,
    pub system: SystemSection,
    pub electrons: ElectronsSection,
    pub scan: Option<ScanSection>,
    pub stacking: Option<StackingSection>,
    /// Other namelists, verbatim.
    pub other: Vec<(String, Extras)>,
    pub species: Vec<SpeciesEntry>,
    pub position_unit: PositionUnit,
    pub positions: Vec<(String, Vec3)>,
    pub kpoints: KPointsCard,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Keys read by other programs of the workflow and ignored here.
const PASSIVE_KEYS: [&str; 6] = [
    "restart_mode",
    "verbosity",
    "tprnfor",
    "tstress",
    "lsym",
    "filband",
];

/// Cuts a `!` comment outside quotes, returning the content and the comment.
fn split_comment(line: &str) -> (&str, Option<&str>) {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '!') => return (&line[..i], Some(&line[i + 1..])),
            _ => {}
        }
    }
    (line, None)
}

/// Splits on commas outside quotes.
fn split_assignments(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut quote = None;
    let mut start = 0;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, ',') => {
                out.push(&line[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&line[start..]);
    out
}

fn unquote(raw: &str) -> &str {
    let t = raw.trim();
    for q in ['\'', '"'] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            return &t[1..t.len() - 1];
        }
    }
    t
}

fn parse_number(raw: &str) -> Option<f64> {
    unquote(raw).replace(['d', 'D'], "e").parse().ok()
}

fn parse_logical(raw: &str) -> Option<bool> {
    match unquote(raw).to_ascii_lowercase().trim_matches('.') {
        "true" | "t" => Some(true),
        "false" | "f" => Some(false),
        _ => None,
    }
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

/// A raw namelist with line numbers for error messages.
struct RawNamelist {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

struct Cursor<'a> {
    origin: &'a str,
}

impl Cursor<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, line, msg)
    }

    fn number(&self, key: &str, raw: &str, line: usize) -> Result<f64> {
        parse_number(raw)
            .ok_or_else(|| self.err(line, format!("{key}: expected a number, found {raw:?}")))
    }

    fn integer(&self, key: &str, raw: &str, line: usize) -> Result<i64> {
        unquote(raw)
            .parse()
            .map_err(|_| self.err(line, format!("{key}: expected an integer, found {raw:?}")))
    }

    fn count(&self, key: &str, raw: &str, line: usize) -> Result<usize> {
        let v = self.integer(key, raw, line)?;
        usize::try_from(v).map_err(|_| self.err(line, format!("{key}: must be >= 0, found {v}")))
    }
}

impl Deck {
    /// Parses deck text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Deck> {
        let cur = Cursor { origin };
        let lines: Vec<&str> = text.lines().collect();
        let mut namelists: Vec<RawNamelist> = Vec::new();
        let mut open: Option<RawNamelist> = None;
        let mut i = 0;
        let mut cards: Vec<(String, String, usize, Vec<(usize, &str, Option<&str>)>)> = Vec::new();
        while i < lines.len() {
            let lineno = i + 1;
            let (content, _) = split_comment(lines[i]);
            let t = content.trim();
            i += 1;
            if t.is_empty() {
                continue;
            }
            if let Some(nl) = open.as_mut() {
                if t == "/" || t.eq_ignore_ascii_case("&end") {
                    namelists.push(open.take().unwrap());
                    continue;
                }
                if t.starts_with('&') || card_header(t).is_some() {
                    return Err(cur.err(
                        lineno,
                        format!(
                            "unterminated namelist &{} opened at line {}",
                            nl.name, nl.line
                        ),
                    ));
                }
                for piece in split_assignments(t) {
                    let piece = piece.trim();
                    if piece.is_empty() {
                        continue;
                    }
                    let (k, v) = piece.split_once('=').ok_or_else(|| {
                        cur.err(lineno, format!("expected `key = value`, found {piece:?}"))
                    })?;
                    let key = k.trim().to_ascii_lowercase();
                    if key.is_empty() {
                        return Err(cur.err(lineno, "missing key before `=`"));
                    }
                    nl.entries.push((key, v.trim().to_string(), lineno));
                }
                continue;
            }
            if let Some(name) = t.strip_prefix('&') {
                let name = name.trim().to_ascii_uppercase();
                if name.is_empty() {
                    return Err(cur.err(lineno, "namelist name missing after `&`"));
                }
                if !cards.is_empty() {
                    return Err(cur.err(lineno, format!("namelist &{name} after the cards")));
                }
                if namelists.iter().any(|n| n.name == name) {
                    return Err(cur.err(lineno, format!("namelist &{name} appears twice")));
                }
                open = Some(RawNamelist {
                    name,
                    line: lineno,
                    entries: Vec::new(),
                });
                continue;
            }
            if let Some((name, option)) = card_header(t) {
                cards.push((name, option, lineno, Vec::new()));
                continue;
            }
            match cards.last_mut() {
                Some(card) => {
                    let (body, comment) = split_comment(lines[i - 1]);
                    card.3.push((lineno, body.trim(), comment.map(str::trim)));
                }
                None => {
                    return Err(cur.err(
                        lineno,
                        format!("unexpected line outside any section: {t:?}"),
                    ))
                }
            }
        }
        if let Some(nl) = open {
            return Err(cur.err(
                lines.len().max(1),
                format!(
                    "unterminated namelist &{} opened at line {}",
                    nl.name, nl.line
                ),
            ));
        }

        let mut warnings = Vec::new();
        let take = |name: &str, namelists: &mut Vec<RawNamelist>| {
            namelists
                .iter()
                .position(|n| n.name == name)
                .map(|p| namelists.remove(p))
        };
        let control_nl = take("CONTROL", &mut namelists)
            .ok_or_else(|| Error::Config("missing &CONTROL namelist".into()))?;
        let system_nl = take("SYSTEM", &mut namelists)
            .ok_or_else(|| Error::Config("missing &SYSTEM namelist".into()))?;
        let electrons_nl = take("ELECTRONS", &mut namelists);
        let scan_nl = take("SCAN", &mut namelists);
        let stacking_nl = take("STACKING", &mut namelists);

        let control = parse_control(&cur, control_nl, &mut warnings)?;
        let system = parse_system(&cur, system_nl, &mut warnings)?;
        let electrons = match electrons_nl {
            Some(nl) => parse_electrons(&cur, nl, &mut warnings)?,
            None => ElectronsSection::default(),
        };
        let scan = scan_nl
            .map(|nl| parse_scan(&cur, nl, &mut warnings))
            .transpose()?;
        let stacking = stacking_nl
            .map(|nl| parse_stacking(&cur, nl, &mut warnings))
            .transpose()?;
        let other: Vec<(String, Extras)> = namelists
            .into_iter()
            .map(|nl| {
                let w = format!("namelist &{} is not used", nl.name);
                log::warn!("{origin}:{}: {w}", nl.line);
                warnings.push(w);
                (
                    nl.name,
                    nl.entries.into_iter().map(|(k, v, _)| (k, v)).collect(),
                )
            })
            .collect();

        let mut species = None;
        let mut positions = None;
        let mut kpoints = None;
        for (name, option, line, body) in cards {
            match name.as_str() {
                "ATOMIC_SPECIES" => species = Some(parse_species(&cur, &body)?),
                "ATOMIC_POSITIONS" => {
                    let unit = match option.to_ascii_lowercase().as_str() {
                        "" | "angstrom" => PositionUnit::Angstrom,
                        "bohr" => PositionUnit::Bohr,
                        "crystal" => PositionUnit::Crystal,
                        o => return Err(cur.err(line, format!("unsupported position unit {o:?}"))),
                    };
                    positions = Some((unit, parse_positions(&cur, &body)?));
                }
                "K_POINTS" => kpoints = Some(parse_kpoints(&cur, &option, line, &body)?),
                other => return Err(cur.err(line, format!("unsupported card {other}"))),
            }
        }
        let species = species.ok_or_else(|| Error::Config("missing ATOMIC_SPECIES card".into()))?;
        let (position_unit, positions) =
            positions.ok_or_else(|| Error::Config("missing ATOMIC_POSITIONS card".into()))?;
        let kpoints = kpoints.ok_or_else(|| Error::Config("missing K_POINTS card".into()))?;

        let deck = Deck {
            control,
            system,
            electrons,
            scan,
            stacking,
            other,
            species,
            position_unit,
            positions,
            kpoints,
            warnings,
        };
        deck.validate()?;
        Ok(deck)
    }

    /// Cross-checks counts, species and settings.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.nat != self.positions.len() {
            return Err(Error::Config(format!(
                "nat = {} but ATOMIC_POSITIONS lists {} atoms",
                s.nat,
                self.positions.len()
            )));
        }
        if s.ntyp != self.species.len() {
            return Err(Error::Config(format!(
                "ntyp = {} but ATOMIC_SPECIES lists {} species",
                s.ntyp,
                self.species.len()
            )));
        }
        for (sym, _) in &self.positions {
            if !self.species.iter().any(|e| &e.symbol == sym) {
                return Err(Error::Config(format!(
                    "species {sym} is used in ATOMIC_POSITIONS but not declared"
                )));
            }
        }
        match s.ibrav {
            1 => {}
            4 if s.c.is_some() => {}
            4 => return Err(Error::Config("ibrav = 4 needs c".into())),
            other => {
                return Err(Error::Unsupported(format!(
                    "ibrav = {other} (supported: 1, 4)"
                )))
            }
        }
        if !(s.a > 0.0) || s.c.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("lattice constants must be > 0".into()));
        }
        if !(s.ecutwfc > 0.0) {
            return Err(Error::Config("ecutwfc must be > 0".into()));
        }
        if let Some(v) = &s.vdw_corr {
            if vdw_enabled(v).is_none() {
                return Err(Error::Unsupported(format!(
                    "vdw_corr = {v:?} (supported: Grimme-D2, none)"
                )));
            }
        }
        if let KPointsCard::CrystalB(nodes) = &self.kpoints {
            if nodes.len() < 2 {
                return Err(Error::Config(
                    "a crystal_b path needs at least two nodes".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical deck text; parsing it gives back an equal deck.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "  {k} = {v}");
        };
        let extras = |s: &mut String, e: &Extras| {
            for (k, v) in e {
                let _ = writeln!(s, "  {k} = {v}");
            }
        };
        let c = &self.control;
        s.push_str("&CONTROL\n");
        kv(&mut s, "calculation", quote(&c.calculation.to_string()));
        kv(&mut s, "outdir", quote(&c.outdir));
        kv(&mut s, "prefix", quote(&c.prefix));
        if let Some(p) = &c.pseudo_dir {
            kv(&mut s, "pseudo_dir", quote(p));
        }
        extras(&mut s, &c.extra);
        s.push_str("/\n&SYSTEM\n");
        let y = &self.system;
        kv(&mut s, "ibrav", y.ibrav.to_string());
        kv(&mut s, "a", y.a.to_string());
        if let Some(c) = y.c {
            kv(&mut s, "c", c.to_string());
        }
        kv(&mut s, "nat", y.nat.to_string());
        kv(&mut s, "ntyp", y.ntyp.to_string());
        kv(&mut s, "ecutwfc", y.ecutwfc.to_string());
        if let Some(v) = y.ecutrho {
            kv(&mut s, "ecutrho", v.to_string());
        }
        if let Some(v) = &y.occupations {
            kv(&mut s, "occupations", quote(v));
        }
        if let Some(v) = y.smearing {
            kv(&mut s, "smearing", quote(&v.to_string()));
        }
        if let Some(v) = y.degauss {
            kv(&mut s, "degauss", v.to_string());
        }
        if let Some(v) = y.input_dft {
            kv(&mut s, "input_dft", quote(&v.to_string()));
        }
        if let Some(v) = &y.vdw_corr {
            kv(&mut s, "vdw_corr", quote(v));
        }
        if let Some(v) = y.nbnd {
            kv(&mut s, "nbnd", v.to_string());
        }
        extras(&mut s, &y.extra);
        s.push_str("/\n&ELECTRONS\n");
        let e = &self.electrons;
        if let Some(v) = e.conv_thr {
            kv(&mut s, "conv_thr", v.to_string());
        }
        if let Some(v) = e.mixing_beta {
            kv(&mut s, "mixing_beta", v.to_string());
        }
        if let Some(v) = e.electron_maxstep {
            kv(&mut s, "electron_maxstep", v.to_string());
        }
        extras(&mut s, &e.extra);
        s.push_str("/\n");
        if let Some(sc) = &self.scan {
            s.push_str("&SCAN\n");
            for (k, v) in [
                ("d_min", sc.d_min),
                ("d_max", sc.d_max),
                ("d_step", sc.d_step),
                ("strain_min", sc.strain_min),
                ("strain_max", sc.strain_max),
                ("strain_step", sc.strain_step),
            ] {
                if let Some(v) = v {
                    kv(&mut s, k, v.to_string());
                }
            }
            if let Some(g) = sc.gaps {
                kv(
                    &mut s,
                    "gaps",
                    if g { ".true." } else { ".false." }.to_string(),
                );
            }
            extras(&mut s, &sc.extra);
            s.push_str("/\n");
        }
        if let Some(st) = &self.stacking {
            s.push_str("&STACKING\n");
            if let Some(p) = st.pattern {
                kv(&mut s, "pattern", quote(&p.to_string()));
            }
            extras(&mut s, &st.extra);
            s.push_str("/\n");
        }
        for (name, e) in &self.other {
            let _ = writeln!(s, "&{name}");
            extras(&mut s, e);
            s.push_str("/\n");
        }
        s.push_str("ATOMIC_SPECIES\n");
        for sp in &self.species {
            let _ = writeln!(s, "{} {} {}", sp.symbol, sp.mass, sp.pseudo);
        }
        let _ = writeln!(s, "ATOMIC_POSITIONS ({})", self.position_unit);
        for (sym, p) in &self.positions {
            let _ = writeln!(s, "{} {} {} {}", sym, p[0], p[1], p[2]);
        }
        match &self.kpoints {
            KPointsCard::Gamma => s.push_str("K_POINTS {gamma}\n"),
            KPointsCard::Automatic { mesh, shift } => {
                s.push_str("K_POINTS {automatic}\n");
                let _ = writeln!(
                    s,
                    "{} {} {} {} {} {}",
                    mesh[0], mesh[1], mesh[2], shift[0], shift[1], shift[2]
                );
            }
            KPointsCard::CrystalB(nodes) => {
                s.push_str("K_POINTS {crystal_b}\n");
                let _ = writeln!(s, "{}", nodes.len());
                for n in nodes {
                    let _ = write!(s, "{} {} {} {}", n.k[0], n.k[1], n.k[2], n.count);
                    if let Some(l) = &n.label {
                        let _ = write!(s, " !{l}");
                    }
                    s.push('\n');
                }
            }
        }
        s
    }
}

/// Recognises a card header, returning its name and option text.
fn card_header(line: &str) -> Option<(String, String)> {
    let name_end = line
        .find(|c: char| c.is_whitespace() || c == '(' || c == '{')
        .unwrap_or(line.len());
    let name = line[..name_end].to_ascii_uppercase();
    if ![
        "ATOMIC_SPECIES",
        "ATOMIC_POSITIONS",
        "K_POINTS",
        "CELL_PARAMETERS",
    ]
    .contains(&name.as_str())
    {
        return None;
    }
    let option = line[name_end..]
        .trim()
        .trim_matches(|c| matches!(c, '(' | ')' | '{' | '}'))
        .trim()
        .to_string();
    Some((name, option))
}

fn unknown_key(warnings: &mut Vec<String>, section: &str, key: &str, line: usize) {
    if PASSIVE_KEYS.contains(&key) {
        return;
    }
    let w = format!("line {line}: unknown key {key:?} in &{section}");
    log::warn!("{w}");
    warnings.push(w);
}

fn parse_control(cur: &Cursor, nl: RawNamelist, warnings: &mut Vec<String>) -> Result<Control> {
    let mut calculation = CalculationKind::Scf;
    let mut outdir = "./".to_string();
    let mut prefix = "pwscf".to_string();
    let mut pseudo_dir = None;
    let mut extra = Vec::new();
    for (k, v, line) in nl.entries {
        match k.as_str() {
            "calculation" => {
                calculation = unquote(&v)
                    .parse()
                    .map_err(|e: Error| cur.err(line, e.to_string()))?
            }
            "outdir" => outdir = unquote(&v).to_string(),
            "prefix" => prefix = unquote(&v).to_string(),
            "pseudo_dir" => pseudo_dir = Some(unquote(&v).to_string()),
            _ => {
                unknown_key(warnings, "CONTROL", &k, line);
                extra.push((k, v));
            }
        }
    }
    Ok(Control {
        calculation,
        outdir,
        prefix,
        pseudo_dir,
        extra,
    })
}

fn parse_system(
    cur: &Cursor,
    nl: RawNamelist,
    warnings: &mut Vec<String>,
) -> Result<SystemSection> {
    let (mut ibrav, mut a, mut c, mut nat, mut ntyp, mut ecutwfc) =
        (None, None, None, None, None, None);
    let mut s = SystemSection {
        ibrav: 0,
        a: 0.0,
        c: None,
        nat: 0,
        ntyp: 0,
        ecutwfc: 0.0,
        ecutrho: None,
        occupations: None,
        smearing: None,
        degauss: None,
        input_dft: None,
        vdw_corr: None,
        nbnd: None,
        extra: Vec::new(),
    };
    for (k, v, line) in nl.entries {
        match k.as_str() {
            "ibrav" => ibrav = Some(cur.integer(&k, &v, line)? as i32),
            "a" => a = Some(cur.number(&k, &v, line)?),
            "c" => c = Some(cur.number(&k, &v, line)?),
            "nat" => nat = Some(cur.count(&k, &v, line)?),
            "ntyp" => ntyp = Some(cur.count(&k, &v, line)?),
            "ecutwfc" => ecutwfc = Some(cur.number(&k, &v, line)?),
            "ecutrho" => s.ecutrho = Some(cur.number(&k, &v, line)?),
            "occupations" => s.occupations = Some(unquote(&v).to_string()),
            "smearing" => {
                s.smearing = Some(
                    unquote(&v)
                        .parse()
                        .map_err(|e: Error| cur.err(line, e.to_string()))?,
                )
            }
            "degauss" => s.degauss = Some(cur.number(&k, &v, line)?),
            "input_dft" => {
                s.input_dft = Some(
                    unquote(&v)
                        .parse()
                        .map_err(|e: Error| cur.err(line, e.to_string()))?,
                )
            }
            "vdw_corr" => s.vdw_corr = Some(unquote(&v).to_string()),
            "nbnd" => s.nbnd = Some(cur.count(&k, &v, line)?),
            _ => {
                unknown_key(warnings, "SYSTEM", &k, line);
                s.extra.push((k, v));
            }
        }
    }
    let missing = |key: &str| Error::Config(format!("&SYSTEM: mandatory key {key} missing"));
    s.ibrav = ibrav.ok_or_else(|| missing("ibrav"))?;
    s.a = a.ok_or_else(|| missing("a"))?;
    s.c = c;
    s.nat = nat.ok_or_else(|| missing("nat"))?;
    s.ntyp = ntyp.ok_or_else(|| missing("ntyp"))?;
    s.ecutwfc = ecutwfc.ok_or_else(|| missing("ecutwfc"))?;
    Ok(s)
}

fn parse_electrons(
    cur: &Cursor,
    nl: RawNamelist,
    warnings: &mut Vec<String>,
) -> Result<ElectronsSection> {
    let mut e = ElectronsSection::default();
    for (k, v, line) in nl.entries {
        match k.as_str() {
            "conv_thr" => e.conv_thr = Some(cur.number(&k, &v, line)?),
            "mixing_beta" => e.mixing_beta = Some(cur.number(&k, &v, line)?),
            "electron_maxstep" => e.electron_maxstep = Some(cur.count(&k, &v, line)?),
            _ => {
                unknown_key(warnings, "ELECTRONS", &k, line);
                e.extra.push((k, v));
            }
        }
    }
    Ok(e)
}

fn parse_scan(cur: &Cursor, nl: RawNamelist, warnings: &mut Vec<String>) -> Result<ScanSection> {
    let mut s = ScanSection::default();
    for (k, v, line) in nl.entries {
        let slot = match k.as_str() {
            "d_min" => &mut s.d_min,
            "d_max" => &mut s.d_max,
            "d_step" => &mut s.d_step,
            "strain_min" => &mut s.strain_min,
            "strain_max" => &mut s.strain_max,
            "strain_step" => &mut s.strain_step,
            "gaps" => {
                s.gaps = Some(parse_logical(&v).ok_or_else(|| {
                    cur.err(line, format!("gaps: expected a logical, found {v:?}"))
                })?);
                continue;
            }
            _ => {
                unknown_key(warnings, "SCAN", &k, line);
                s.extra.push((k, v));
                continue;
            }
        };
        *slot = Some(cur.number(&k, &v, line)?);
    }
    Ok(s)
}

fn parse_stacking(
    cur: &Cursor,
    nl: RawNamelist,
    warnings: &mut Vec<String>,
) -> Result<StackingSection> {
    let mut s = StackingSection::default();
    for (k, v, line) in nl.entries {
        match k.as_str() {
            "pattern" => {
                s.pattern = Some(
                    unquote(&v)
                        .parse()
                        .map_err(|e: Error| cur.err(line, e.to_string()))?,
                )
            }
            _ => {
                unknown_key(warnings, "STACKING", &k, line);
                s.extra.push((k, v));
            }
        }
    }
    Ok(s)
}

type CardLine<'a> = (usize, &'a str, Option<&'a str>);

fn parse_species(cur: &Cursor, body: &[CardLine]) -> Result<Vec<SpeciesEntry>> {
    body.iter()
        .map(|&(line, text, _)| {
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 3 {
                return Err(cur.err(
                    line,
                    format!("expected `symbol mass pseudo`, found {text:?}"),
                ));
            }
            Ok(SpeciesEntry {
                symbol: f[0].to_string(),
                mass: cur.number("mass", f[1], line)?,
                pseudo: f[2].to_string(),
            })
        })
        .collect()
}

fn parse_positions(cur: &Cursor, body: &[CardLine]) -> Result<Vec<(String, Vec3)>> {
    body.iter()
        .map(|&(line, text, _)| {
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 4 {
                return Err(cur.err(line, format!("expected `symbol x y z`, found {text:?}")));
            }
            let x = |i: usize| cur.number("position", f[i], line);
            Ok((f[0].to_string(), [x(1)?, x(2)?, x(3)?]))
        })
        .collect()
}

fn parse_kpoints(
    cur: &Cursor,
    option: &str,
    header: usize,
    body: &[CardLine],
) -> Result<KPointsCard> {
    match option.to_ascii_lowercase().as_str() {
        "gamma" => Ok(KPointsCard::Gamma),
        "automatic" => {
            let &(line, text, _) = body
                .first()
                .ok_or_else(|| cur.err(header, "K_POINTS automatic needs a mesh line"))?;
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 6 || body.len() != 1 {
                return Err(cur.err(line, "expected one line `n1 n2 n3 s1 s2 s3`"));
            }
            let v: Vec<usize> = f
                .iter()
                .map(|x| cur.count("k mesh", x, line))
                .collect::<Result<_>>()?;
            if v[3..].iter().any(|&s| s > 1) {
                return Err(cur.err(line, "mesh shifts must be 0 or 1"));
            }
            Ok(KPointsCard::Automatic {
                mesh: [v[0], v[1], v[2]],
                shift: [v[3], v[4], v[5]],
            })
        }
        "crystal_b" => {
            let &(line, text, _) = body
                .first()
                .ok_or_else(|| cur.err(header, "K_POINTS crystal_b needs a node count"))?;
            let n = cur.count("node count", text, line)?;
            if body.len() != n + 1 {
                return Err(cur.err(
                    line,
                    format!("{n} nodes announced but {} given", body.len() - 1),
                ));
            }
            body[1..]
                .iter()
                .map(|&(line, text, comment)| {
                    let f: Vec<&str> = text.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(
                            cur.err(line, format!("expected `k1 k2 k3 count`, found {text:?}"))
                        );
                    }
                    let label = comment.filter(|c| !c.is_empty()).map(str::to_string);
                    Ok(PathNode {
                        k: [
                            cur.number("k", f[0], line)?,
                            cur.number("k", f[1], line)?,
                            cur.number("k", f[2], line)?,
                        ],
                        count: cur.count("count", f[3], line)?,
                        label,
                    })
                })
                .collect::<Result<_>>()
                .map(KPointsCard::CrystalB)
        }
        other => Err(cur.err(header, format!("unsupported K_POINTS kind {other:?}"))),
    }
}
