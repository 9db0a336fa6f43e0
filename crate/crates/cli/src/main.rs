use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use pwdft::kgrid::monkhorst_pack_shifted;
use pwdft::pipeline::{load_deck, run_deck, KPointsCard, Manifest, RunOptions, PSEUDO_PATH_ENV};
use pwdft::pseudo::{check_norm_conservation, parse_upf_name};
use pwdft::{CalculationKind, Error, Pseudopotential};

#[derive(Parser)]
#[command(
    name = "pwdft",
    version,
    about = "Plane-wave DFT for 2D heterobilayers"
)]
struct Cli {
    /// Input deck.
    #[arg(long, global = true)]
    deck: Option<PathBuf>,
    /// Results go to WORKDIR/<prefix>/.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Use an unconverged stored density.
    #[arg(long, global = true)]
    force: bool,
    /// Extra pseudopotential directories, separated like PATH.
    #[arg(long, env = PSEUDO_PATH_ENV, hide_env_values = true)]
    pseudo_path: Option<std::ffi::OsString>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Self-consistent ground state.
    Scf,
    /// Band structure along the deck's crystal_b path.
    Bands,
    /// Total and projected density of states.
    Dos,
    /// Same run as `dos`; prints the projected table.
    Pdos,
    /// Binding energy against interlayer distance.
    BindScan,
    /// Gap and energy against biaxial strain.
    StrainScan,
    /// Charge density difference cube.
    Cdd,
    /// Print a Monkhorst-Pack mesh, from the arguments or the deck.
    MpGrid {
        #[arg(num_args = 3)]
        mesh: Option<Vec<usize>>,
        /// Half-step shifts, each 0 or 1.
        #[arg(long, num_args = 3, default_values_t = [0, 0, 0])]
        shift: Vec<usize>,
    },
    /// Check a radial table against its reference norms.
    ValidatePseudo {
        table: PathBuf,
        /// Columns `r` then one wavefunction per channel; the header names
        /// each channel's l.
        wavefunctions: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Decode a UPF file name.
    ParseName { name: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 input error, 3 non-convergence, 4 missing prerequisite, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::MandatoryField { .. }
            | Error::Unsupported(_)
            | Error::Pseudo { .. },
        ) => 2,
        Some(Error::NotConverged(_) | Error::ScfDiverging(_)) => 3,
        Some(Error::Dependency { .. }) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let kind = match &cli.command {
        Command::Scf => CalculationKind::Scf,
        Command::Bands => CalculationKind::Bands,
        Command::Dos | Command::Pdos => CalculationKind::Dos,
        Command::BindScan => CalculationKind::BindScan,
        Command::StrainScan => CalculationKind::StrainScan,
        Command::Cdd => CalculationKind::Cdd,
        Command::MpGrid { mesh, shift } => return mp_grid(&cli, mesh.as_deref(), shift),
        Command::ValidatePseudo {
            table,
            wavefunctions,
            tolerance,
        } => return validate_pseudo(table, wavefunctions, *tolerance, cli.format),
        Command::ParseName { name } => {
            let meta = parse_upf_name(name)?;
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&meta)?),
                Format::Tsv => {
                    println!("element\t{}", meta.element);
                    println!("relativistic\t{}", meta.relativistic);
                    println!("xc\t{}", meta.xc_tag);
                    println!("states\t{}", meta.state_tags.iter().collect::<String>());
                    println!("origin\t{}", meta.origin_tags.join("_"));
                }
            }
            for w in &meta.warnings {
                log::warn!("{w}");
            }
            return Ok(ExitCode::SUCCESS);
        }
    };

    let deck_path = cli
        .deck
        .as_deref()
        .context("--deck is required for this command")?;
    let (deck, text) = load_deck(deck_path)?;
    let mut opts = RunOptions::new(&cli.workdir);
    opts.deck_dir = deck_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    opts.pseudo_path = cli
        .pseudo_path
        .as_ref()
        .map(|p| std::env::split_paths(p).collect())
        .unwrap_or_default();
    opts.force = cli.force;
    opts.calculation = Some(kind);
    // run_deck logs its own warnings; they also stay in the manifest
    let manifest = run_deck(&deck, &text, &opts)?;
    let dir = cli.workdir.join(&manifest.prefix);
    if matches!(cli.command, Command::Pdos) && cli.format == Format::Tsv {
        print!("{}", std::fs::read_to_string(dir.join("pdos.tsv"))?);
    } else {
        report(&manifest, &dir, cli.format)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn report(m: &Manifest, dir: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(m)?),
        Format::Tsv => {
            println!("file\tsha256");
            for o in &m.outputs {
                println!("{}\t{}", dir.join(&o.name).display(), o.sha256);
            }
        }
    }
    Ok(())
}

fn mp_grid(cli: &Cli, mesh: Option<&[usize]>, shift: &[usize]) -> Result<ExitCode> {
    let (q, s) = match (mesh, &cli.deck) {
        (Some(m), _) => ([m[0], m[1], m[2]], [shift[0], shift[1], shift[2]]),
        (None, Some(path)) => match load_deck(path)?.0.kpoints {
            KPointsCard::Automatic { mesh, shift } => (mesh, shift),
            _ => bail!(Error::Config(
                "the deck has no automatic k-point mesh".into()
            )),
        },
        (None, None) => bail!(Error::Config("give a mesh or --deck".into())),
    };
    if s.iter().any(|&x| x > 1) {
        bail!(Error::InvalidParameter("shifts are 0 or 1".into()));
    }
    let grid = monkhorst_pack_shifted(q, s.map(|x| x == 1))?;
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&grid)?),
        Format::Tsv => {
            println!("k1\tk2\tk3\tweight");
            for (k, w) in grid.points.iter().zip(&grid.weights) {
                println!("{}\t{}\t{}\t{}", k[0], k[1], k[2], w);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads `r l0 l1 ...` columns; the first uncommented line holds the l values.
fn read_wavefunctions(path: &Path) -> Result<(Vec<f64>, Vec<(u32, Vec<f64>)>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let origin = path.display().to_string();
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&origin, 1, "empty file"))?;
    let ls = header
        .split_whitespace()
        .skip(1)
        .map(|t| {
            t.trim_start_matches(['l', 'L', '='])
                .parse::<u32>()
                .map_err(|_| Error::parse(&origin, hline, format!("bad channel label {t:?}")))
        })
        .collect::<pwdft::Result<Vec<u32>>>()?;
    let mut r = Vec::new();
    let mut psi = vec![Vec::new(); ls.len()];
    for (n, line) in lines {
        let v = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::parse(&origin, n, format!("expected a number, found {t:?}"))
                })
            })
            .collect::<pwdft::Result<Vec<f64>>>()?;
        if v.len() != ls.len() + 1 {
            bail!(Error::parse(
                &origin,
                n,
                format!("expected {} columns, found {}", ls.len() + 1, v.len())
            ));
        }
        r.push(v[0]);
        for (c, x) in psi.iter_mut().zip(&v[1..]) {
            c.push(*x);
        }
    }
    Ok((r, ls.into_iter().zip(psi).collect()))
}

fn validate_pseudo(
    table: &Path,
    wavefunctions: &Path,
    tolerance: f64,
    format: Format,
) -> Result<ExitCode> {
    let ps = Pseudopotential::load(table)?;
    let (r, psi) = read_wavefunctions(wavefunctions)?;
    let same_mesh = r.len() == ps.r_grid.len()
        && r.iter()
            .zip(&ps.r_grid)
            .all(|(a, b)| (a - b).abs() <= 1e-10 * b.abs().max(1.0));
    if !same_mesh {
        bail!(Error::Config(format!(
            "{} is not on the radial mesh of {}",
            wavefunctions.display(),
            table.display()
        )));
    }
    let report = check_norm_conservation(&ps, &psi, tolerance)?;
    let status = |d: Option<f64>| match d {
        None => "unchecked",
        Some(d) if d < tolerance => "pass",
        Some(_) => "FAIL",
    };
    match format {
        Format::Json => {
            let channels: Vec<_> = report
                .channels
                .iter()
                .map(|c| json!({ "l": c.l, "deviation": c.deviation, "status": status(c.deviation) }))
                .collect();
            let out = json!({ "element": ps.element, "tolerance": tolerance, "passed": report.passed(), "channels": channels });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Format::Tsv => {
            println!("l\tdeviation\tstatus");
            for c in &report.channels {
                let d = c.deviation.map_or("n/a".to_string(), |d| format!("{d:e}"));
                println!("{}\t{d}\t{}", c.l, status(c.deviation));
            }
        }
    }
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("norm conservation violated beyond {tolerance:e}");
        Ok(ExitCode::FAILURE)
    }
}
