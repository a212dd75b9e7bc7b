//! Command-line surface: argument parsing, config-file merging, dispatch,
//! output emission (JSON / CSV / table / SVG) and the exit-code contract.
//!
//! Exit codes: 0 success (and, for `verify`/`butterfly`/`track`, the
//! verification succeeded), 1 verification failure or instability, 2 invalid
//! input, 3 numerical failure. Argument-syntax errors from the parser also
//! exit 2.
//!
//! A config file (`--config FILE`, simple `key = value` lines, `#` comments)
//! can supply any value flag under its long name (dashes and underscores are
//! interchangeable); explicit command-line flags take precedence.

pub mod cache;
pub mod formats;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numtheory::{bezout_alpha_beta, farey, tknn_solve, HarperModel, MAX_DENOMINATOR};
use crate::rep::Rep;
use crate::spectral::{band_structure, gap_chart, GapStatus, KGrid, DEFAULT_GAP_TOL};
use crate::tknn::{track_irrational, verify_chart, verify_with_bands};
use crate::topology::{canonical_extended_chern, hall_chern, reference_chern};

use formats::*;
use svg::GapColor;

/// Largest flux denominator the dense numerical pipelines accept. Exact
/// integer arithmetic works up to [`MAX_DENOMINATOR`], but every command here
/// diagonalizes N x N fibers over a grid and refines Chern grids to at least
/// 2N points per axis, so larger N could only fail later and slower.
pub const MAX_PIPELINE_N: i64 = 256;

#[derive(Debug, Parser)]
#[command(
    name = "harper",
    version,
    about = "Spectra, gap charts, Chern numbers and gap-equation verification \
             for generalized Harper operators at rational magnetic flux",
    propagate_version = true
)]
struct Cli {
    /// Read defaults from a `key = value` file; explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Emit JSON instead of a human-readable table.
    #[arg(long, global = true)]
    json: bool,

    /// Emit CSV instead of a table (spectrum and verify only).
    #[arg(long, global = true)]
    csv: bool,

    /// Write the main output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Flux and hopping parameters of one model.
#[derive(Debug, Args)]
struct ModelArgs {
    /// Hopping exponent q >= 1 [default: 1].
    #[arg(long)]
    q: Option<i64>,

    /// Hopping exponent r, |r| < q and coprime to q [default: 0].
    #[arg(long)]
    r: Option<i64>,

    /// Flux numerator M (0 < M < N, coprime to N).
    #[arg(long = "M", value_name = "M")]
    m: Option<i64>,

    /// Flux denominator N (also the fiber dimension), coprime to q.
    #[arg(long = "N", value_name = "N")]
    n: Option<i64>,
}

/// Numerical parameters shared by every command.
#[derive(Debug, Args)]
struct CommonArgs {
    /// Momentum grid, e.g. 32x32 [default: 32x32].
    #[arg(long, value_name = "N1xN2")]
    grid: Option<String>,

    /// Minimum band separation certifying a gap open [default: 1e-6].
    #[arg(long, value_name = "TOL")]
    gap_tol: Option<f64>,
}

/// Which integer colors the gap regions of the butterfly SVG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ColorArg {
    /// Transport integer t.
    T,
    /// Dual-bundle integer s.
    S,
    /// Bands only, no gap shading.
    None,
}

impl From<ColorArg> for GapColor {
    fn from(c: ColorArg) -> Self {
        match c {
            ColorArg::T => GapColor::T,
            ColorArg::S => GapColor::S,
            ColorArg::None => GapColor::None,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Band intervals and the gap chart at one rational flux.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check every gap's Chern integers against the gap equation
    /// N*t + M0*s = q*d; exits 1 on any open-gap mismatch.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Both bundle Chern numbers and the transport pair of a single gap.
    Chern {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Gap selector: the number of bands d below the gap (0..=N).
        #[arg(long, value_name = "D")]
        gap: Option<i64>,
    },
    /// Sweep all admissible fluxes with denominator up to nmax; emits the
    /// dataset and optionally an SVG; exits 1 if any row fails to verify.
    Butterfly {
        /// Hopping exponent q >= 1 [default: 1].
        #[arg(long)]
        q: Option<i64>,
        /// Hopping exponent r, |r| < q and coprime to q [default: 0].
        #[arg(long)]
        r: Option<i64>,
        /// Largest flux denominator to include (>= 2).
        #[arg(long, value_name = "N")]
        nmax: Option<i64>,
        /// Also render the sweep to this SVG file.
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
        /// Integer coloring the gap regions of the SVG [default: t].
        #[arg(long, value_enum, value_name = "WHICH")]
        color: Option<ColorArg>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Follow one gap along the continued-fraction convergents of a flux
    /// and test that its integer labels stay constant; exits 1 if unstable.
    Track {
        /// Hopping exponent q >= 1 [default: 1].
        #[arg(long)]
        q: Option<i64>,
        /// Hopping exponent r, |r| < q and coprime to q [default: 0].
        #[arg(long)]
        r: Option<i64>,
        /// Flux to approximate, strictly between 0 and 1.
        #[arg(long, value_name = "THETA")]
        theta: Option<f64>,
        /// Number of continued-fraction convergents to visit [default: 5].
        #[arg(long, value_name = "K")]
        depth: Option<usize>,
        /// Integrated density of states locating the gap, in [0, 1].
        #[arg(long, value_name = "IDS")]
        ids: Option<f64>,
        /// Density matching window per convergent [default: 1e-2]; widened
        /// to half the level spacing 1/(2N) at coarse convergents.
        #[arg(long, value_name = "W")]
        window: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Run the CLI against the process arguments; returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn invalid(details: impl Into<String>) -> Error {
    Error::InvalidInput { details: details.into() }
}

/// Parsed config file: normalized keys to raw values.
#[derive(Debug, Default)]
struct Config(BTreeMap<String, String>);

/// All value flags a config file may supply (long names, normalized).
const KNOWN_KEYS: &[&str] = &[
    "q", "r", "M", "N", "grid", "gap_tol", "gap", "nmax", "svg", "color", "theta", "depth", "ids",
    "window", "json", "csv", "out",
];

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(invalid(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    idx + 1
                )));
            };
            let key = normalize_key(k);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(invalid(format!(
                    "{}:{}: unknown config key `{}`",
                    path.display(),
                    idx + 1,
                    k.trim()
                )));
            }
            map.insert(key, v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(&normalize_key(key)).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                invalid(format!("config key `{key}`: cannot parse `{raw}`: {e}"))
            }),
        }
    }

    fn get_bool(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(raw) => Err(invalid(format!(
                "config key `{key}`: expected true/false, got `{raw}`"
            ))),
        }
    }
}

/// Command-line value if present, else the config value, else None.
fn opt<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| {
        invalid(format!(
            "missing required parameter --{flag} (not on the command line nor in the config file)"
        ))
    })
}

fn parse_grid(s: &str) -> Result<KGrid> {
    let err = || invalid(format!("grid must look like `32x32` with 1..=4096 per axis, got `{s}`"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let parse_axis = |t: &str| -> Result<usize> {
        t.trim()
            .parse::<usize>()
            .ok()
            .filter(|v| (1..=4096).contains(v))
            .ok_or_else(err)
    };
    Ok(KGrid::new(parse_axis(a)?, parse_axis(b)?))
}

/// Output format selector (JSON and CSV are mutually exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputKind {
    Human,
    Json,
    Csv,
}

struct Ctx {
    cfg: Config,
    kind: OutputKind,
    out: Option<PathBuf>,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let cfg = Config::load(cli.config.as_deref())?;
        let json = cli.json || cfg.get_bool("json")?;
        let csv = cli.csv || cfg.get_bool("csv")?;
        let kind = match (json, csv) {
            (true, true) => return Err(invalid("--json and --csv are mutually exclusive")),
            (true, false) => OutputKind::Json,
            (false, true) => OutputKind::Csv,
            (false, false) => OutputKind::Human,
        };
        let out = match &cli.out {
            Some(p) => Some(p.clone()),
            None => cfg.get::<PathBuf>("out")?,
        };
        Ok(Ctx { cfg, kind, out })
    }

    fn resolve_model(&self, args: &ModelArgs) -> Result<HarperModel> {
        let q = opt(args.q, &self.cfg, "q")?.unwrap_or(1);
        let r = opt(args.r, &self.cfg, "r")?.unwrap_or(0);
        let m = need(opt(args.m, &self.cfg, "M")?, "M")?;
        let n = need(opt(args.n, &self.cfg, "N")?, "N")?;
        let model = HarperModel::new(q, r, m, n)?;
        check_pipeline_n(model.n)?;
        Ok(model)
    }

    fn resolve_common(&self, args: &CommonArgs) -> Result<(KGrid, f64)> {
        let grid_s =
            opt(args.grid.clone(), &self.cfg, "grid")?.unwrap_or_else(|| "32x32".to_string());
        let grid = parse_grid(&grid_s)?;
        let gap_tol = opt(args.gap_tol, &self.cfg, "gap_tol")?.unwrap_or(DEFAULT_GAP_TOL);
        if !(gap_tol > 0.0 && gap_tol < 1.0) {
            return Err(invalid(format!(
                "gap_tol must lie strictly between 0 and 1, got {gap_tol}"
            )));
        }
        Ok((grid, gap_tol))
    }

    /// Emit the main document to stdout or the --out file.
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn no_csv(&self, command: &str) -> Result<()> {
        if self.kind == OutputKind::Csv {
            return Err(invalid(format!(
                "--csv is not available for `{command}` (use --json or the default table)"
            )));
        }
        Ok(())
    }
}

fn check_pipeline_n(n: i64) -> Result<()> {
    if n > MAX_PIPELINE_N {
        return Err(invalid(format!(
            "N = {n} exceeds the numerical pipeline cap {MAX_PIPELINE_N} \
             (dense N x N eigensolves over a refined grid)"
        )));
    }
    Ok(())
}

fn check_hopping(q: i64, r: i64) -> Result<()> {
    if !(1..=MAX_DENOMINATOR).contains(&q) {
        return Err(Error::RangeError {
            what: "q",
            details: format!("must satisfy 1 <= q <= {MAX_DENOMINATOR}, got {q}"),
        });
    }
    if r.abs() >= q {
        return Err(Error::RangeError {
            what: "r",
            details: format!("must satisfy |r| < q, got r = {r}, q = {q}"),
        });
    }
    bezout_alpha_beta(q, r).map(|_| ())
}

fn execute(cli: Cli) -> Result<i32> {
    let ctx = Ctx::new(&cli)?;
    match &cli.command {
        Command::Spectrum { model, common } => cmd_spectrum(&ctx, model, common),
        Command::Verify { model, common } => cmd_verify(&ctx, model, common),
        Command::Chern { model, common, gap } => cmd_chern(&ctx, model, common, *gap),
        Command::Butterfly {
            q,
            r,
            nmax,
            svg,
            color,
            common,
        } => cmd_butterfly(&ctx, *q, *r, *nmax, svg.clone(), *color, common),
        Command::Track {
            q,
            r,
            theta,
            depth,
            ids,
            window,
            common,
        } => cmd_track(&ctx, *q, *r, *theta, *depth, *ids, *window, common),
    }
}

fn cmd_spectrum(ctx: &Ctx, model_args: &ModelArgs, common: &CommonArgs) -> Result<i32> {
    let model = ctx.resolve_model(model_args)?;
    let (grid, gap_tol) = ctx.resolve_common(common)?;
    let bands = band_structure(&model, grid, Rep::Reference)?;
    let chart = gap_chart(&bands, gap_tol);
    let doc = spectrum_output(&model, grid, gap_tol, &bands, &chart);
    let text = match ctx.kind {
        OutputKind::Json => to_json(&doc),
        OutputKind::Csv => spectrum_csv(&doc),
        OutputKind::Human => spectrum_human(&doc),
    };
    ctx.emit(&text)?;
    Ok(0)
}

fn cmd_verify(ctx: &Ctx, model_args: &ModelArgs, common: &CommonArgs) -> Result<i32> {
    let model = ctx.resolve_model(model_args)?;
    let (grid, gap_tol) = ctx.resolve_common(common)?;
    let (_, records) = verify_chart(&model, grid, gap_tol)?;
    let doc = verify_output(&model, grid, gap_tol, records);
    let text = match ctx.kind {
        OutputKind::Json => to_json(&doc),
        OutputKind::Csv => verify_csv(&doc),
        OutputKind::Human => verify_human(&doc),
    };
    ctx.emit(&text)?;
    Ok(if doc.all_match { 0 } else { 1 })
}

fn cmd_chern(
    ctx: &Ctx,
    model_args: &ModelArgs,
    common: &CommonArgs,
    gap: Option<i64>,
) -> Result<i32> {
    ctx.no_csv("chern")?;
    let model = ctx.resolve_model(model_args)?;
    let (grid, gap_tol) = ctx.resolve_common(common)?;
    let d = need(opt(gap, &ctx.cfg, "gap")?, "gap")?;
    let reference = reference_chern(&model, d, grid, gap_tol)?;
    let extended = canonical_extended_chern(&model, d, grid, gap_tol)?;
    let t = hall_chern(&model, d, reference.c)?;
    let s = -reference.c;
    let dio = tknn_solve(&model, d)?;
    let duality_ok = extended.c == model.m0 * reference.c;
    let diophantine_ok = dio.t == t && dio.s == s;
    let doc = ChernOutput {
        model: (&model).into(),
        d,
        t,
        s,
        reference: (&reference).into(),
        extended: (&extended).into(),
        duality_ok,
        diophantine_ok,
    };
    let text = match ctx.kind {
        OutputKind::Json => to_json(&doc),
        _ => chern_human(&doc),
    };
    ctx.emit(&text)?;
    Ok(if duality_ok && diophantine_ok { 0 } else { 1 })
}

fn cmd_butterfly(
    ctx: &Ctx,
    q: Option<i64>,
    r: Option<i64>,
    nmax: Option<i64>,
    svg_path: Option<PathBuf>,
    color: Option<ColorArg>,
    common: &CommonArgs,
) -> Result<i32> {
    ctx.no_csv("butterfly")?;
    let q = opt(q, &ctx.cfg, "q")?.unwrap_or(1);
    let r = opt(r, &ctx.cfg, "r")?.unwrap_or(0);
    let nmax = need(opt(nmax, &ctx.cfg, "nmax")?, "nmax")?;
    check_hopping(q, r)?;
    if !(2..=MAX_PIPELINE_N).contains(&nmax) {
        return Err(invalid(format!(
            "nmax must lie in 2..={MAX_PIPELINE_N}, got {nmax}"
        )));
    }
    let (grid, gap_tol) = ctx.resolve_common(common)?;
    let svg_path = match svg_path {
        Some(p) => Some(p),
        None => ctx.cfg.get::<PathBuf>("svg")?,
    };
    let color = match color {
        Some(c) => c,
        None => match ctx.cfg.raw("color") {
            Some(raw) => <ColorArg as ValueEnum>::from_str(raw, true)
                .map_err(|e| invalid(format!("config key `color`: {e}")))?,
            None => ColorArg::T,
        },
    };

    let cache_dir = cache::cache_dir();
    // Assembly stays in ascending flux order: par_iter preserves indices.
    let rows: Vec<FluxRow> = farey(nmax, q)
        .into_par_iter()
        .map(|(m, n)| flux_row(q, r, m, n, grid, gap_tol, &cache_dir))
        .collect();
    let all_ok = rows.iter().all(|row| {
        row.error.is_none()
            && row
                .gaps
                .iter()
                .filter(|g| g.status == GapStatus::Open)
                .all(|g| g.matches)
    });
    let doc = ButterflyOutput {
        q,
        r,
        nmax,
        grid: format!("{}x{}", grid.n1, grid.n2),
        gap_tol,
        rows,
    };
    if let Some(path) = &svg_path {
        let rendered = svg::butterfly_svg(&doc, color.into());
        fs::write(path, rendered).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    let text = match ctx.kind {
        OutputKind::Json => to_json(&doc),
        _ => butterfly_human(&doc),
    };
    ctx.emit(&text)?;
    Ok(if all_ok { 0 } else { 1 })
}

/// One butterfly row, served from the cache when possible. Verification
/// failures are recorded in the row rather than aborting the sweep; rows
/// that errored are not cached (they are cheap to retry and may be
/// grid-dependent).
fn flux_row(
    q: i64,
    r: i64,
    m: i64,
    n: i64,
    grid: KGrid,
    gap_tol: f64,
    cache_dir: &Path,
) -> FluxRow {
    let key = cache::row_key(q, r, m, n, grid, gap_tol);
    if let Some(row) = cache::load_row(cache_dir, &key) {
        return row;
    }
    let theta = m as f64 / n as f64;
    let row = match compute_row(q, r, m, n, grid, gap_tol) {
        Ok(row) => row,
        Err(e) => FluxRow {
            m,
            n,
            theta,
            bands: vec![],
            gaps: vec![],
            error: Some(e.to_string()),
        },
    };
    if row.error.is_none() {
        let _ = cache::store_row(cache_dir, &key, &row);
    }
    row
}

fn compute_row(q: i64, r: i64, m: i64, n: i64, grid: KGrid, gap_tol: f64) -> Result<FluxRow> {
    let model = HarperModel::new(q, r, m, n)?;
    let (bands, _, records) = verify_with_bands(&model, grid, gap_tol)?;
    Ok(FluxRow {
        m,
        n,
        theta: model.theta(),
        bands: band_rows(&bands),
        gaps: records,
        error: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_track(
    ctx: &Ctx,
    q: Option<i64>,
    r: Option<i64>,
    theta: Option<f64>,
    depth: Option<usize>,
    ids: Option<f64>,
    window: Option<f64>,
    common: &CommonArgs,
) -> Result<i32> {
    ctx.no_csv("track")?;
    let q = opt(q, &ctx.cfg, "q")?.unwrap_or(1);
    let r = opt(r, &ctx.cfg, "r")?.unwrap_or(0);
    let theta = need(opt(theta, &ctx.cfg, "theta")?, "theta")?;
    let depth = opt(depth, &ctx.cfg, "depth")?.unwrap_or(5);
    let ids = need(opt(ids, &ctx.cfg, "ids")?, "ids")?;
    let window = opt(window, &ctx.cfg, "window")?.unwrap_or(1e-2);
    let (grid, gap_tol) = ctx.resolve_common(common)?;
    let trace = track_irrational(q, r, theta, depth, ids, window, grid, gap_tol)?;
    let stable = trace.stable;
    let doc = TrackOutput {
        trace,
        grid: format!("{}x{}", grid.n1, grid.n2),
        gap_tol,
    };
    let text = match ctx.kind {
        OutputKind::Json => to_json(&doc),
        _ => track_human(&doc),
    };
    ctx.emit(&text)?;
    Ok(if stable { 0 } else { 1 })
}
