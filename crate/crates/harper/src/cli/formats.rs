//! Serializable output documents for every command, plus their
//! human-readable table and CSV renderings. All renderings are deterministic:
//! fixed field order, default shortest-roundtrip float formatting, no
//! timestamps or absolute paths.

use serde::{Deserialize, Serialize};

use crate::numtheory::HarperModel;
use crate::spectral::{BandStructure, Gap, GapChart, GapStatus, KGrid};
use crate::tknn::{GapTrace, TknnRecord, TraceStatus};
use crate::topology::ChernResult;

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn status_str(s: GapStatus) -> &'static str {
    match s {
        GapStatus::Open => "open",
        GapStatus::Closed => "closed",
        GapStatus::Indeterminate => "indeterminate",
    }
}

/// Model header shared by all JSON documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelHeader {
    pub q: i64,
    pub r: i64,
    #[serde(rename = "M")]
    pub m: i64,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "M0")]
    pub m0: i64,
}

impl From<&HarperModel> for ModelHeader {
    fn from(m: &HarperModel) -> Self {
        ModelHeader {
            q: m.q,
            r: m.r,
            m: m.m,
            n: m.n,
            m0: m.m0,
        }
    }
}

/// Energy range of one band over the grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandRow {
    pub band: usize,
    pub e_min: f64,
    pub e_max: f64,
}

pub fn band_rows(bands: &BandStructure) -> Vec<BandRow> {
    (0..bands.n_bands())
        .map(|b| {
            let (e_min, e_max) = bands.band_range(b);
            BandRow { band: b, e_min, e_max }
        })
        .collect()
}

/// `spectrum` output: band intervals and the gap chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumOutput {
    #[serde(flatten)]
    pub model: ModelHeader,
    pub grid: String,
    pub gap_tol: f64,
    pub bands: Vec<BandRow>,
    pub gaps: Vec<Gap>,
}

pub fn spectrum_output(
    model: &HarperModel,
    grid: KGrid,
    gap_tol: f64,
    bands: &BandStructure,
    chart: &GapChart,
) -> SpectrumOutput {
    SpectrumOutput {
        model: model.into(),
        grid: format!("{}x{}", grid.n1, grid.n2),
        gap_tol,
        bands: band_rows(bands),
        gaps: chart.gaps.clone(),
    }
}

pub fn spectrum_human(out: &SpectrumOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "flux M/N = {}/{}  hopping (q, r) = ({}, {})  M0 = {}  grid {}\n\n",
        out.model.m, out.model.n, out.model.q, out.model.r, out.model.m0, out.grid
    ));
    s.push_str("band      e_min          e_max\n");
    for b in &out.bands {
        s.push_str(&format!("{:<4} {:>14.9} {:>14.9}\n", b.band, b.e_min, b.e_max));
    }
    s.push_str("\ngap   d  status            e_lo           e_hi\n");
    for g in &out.gaps {
        s.push_str(&format!(
            "{:<4} {:>2}  {:<13} {:>14} {:>14}\n",
            fmt_opt(&g.g),
            g.d,
            status_str(g.status),
            fmt_opt(&g.e_lo.map(|v| format!("{v:.9}"))),
            fmt_opt(&g.e_hi.map(|v| format!("{v:.9}"))),
        ));
    }
    s
}

pub fn spectrum_csv(out: &SpectrumOutput) -> String {
    let mut s = String::from("kind,index,d,status,e_lo,e_hi\n");
    for b in &out.bands {
        s.push_str(&format!("band,{},,,{},{}\n", b.band, b.e_min, b.e_max));
    }
    for g in &out.gaps {
        s.push_str(&format!(
            "gap,{},{},{},{},{}\n",
            fmt_opt(&g.g),
            g.d,
            status_str(g.status),
            fmt_opt(&g.e_lo),
            fmt_opt(&g.e_hi),
        ));
    }
    s
}

/// `verify` output: one row per candidate gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutput {
    #[serde(flatten)]
    pub model: ModelHeader,
    pub grid: String,
    pub gap_tol: f64,
    pub gaps: Vec<TknnRecord>,
    /// True when every open gap's integer pair matches its window solution.
    pub all_match: bool,
}

pub fn verify_output(
    model: &HarperModel,
    grid: KGrid,
    gap_tol: f64,
    records: Vec<TknnRecord>,
) -> VerifyOutput {
    let all_match = records
        .iter()
        .filter(|r| r.status == GapStatus::Open)
        .all(|r| r.matches);
    VerifyOutput {
        model: model.into(),
        grid: format!("{}x{}", grid.n1, grid.n2),
        gap_tol,
        gaps: records,
        all_match,
    }
}

pub fn verify_human(out: &VerifyOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "flux M/N = {}/{}  hopping (q, r) = ({}, {})  M0 = {}  grid {}\n",
        out.model.m, out.model.n, out.model.q, out.model.r, out.model.m0, out.grid
    ));
    s.push_str(&format!(
        "gap equation: {}*t + ({})*s = {}*d,  window 2|s| < {}\n\n",
        out.model.n, out.model.m0, out.model.q, out.model.n
    ));
    s.push_str("g    d   status         ids       t_num  s_num  t_dio  s_dio  match\n");
    for r in &out.gaps {
        s.push_str(&format!(
            "{:<4} {:<3} {:<13} {:<9} {:>5} {:>6} {:>6} {:>6}  {}\n",
            fmt_opt(&r.g),
            r.d,
            status_str(r.status),
            fmt_opt(&r.ids.map(|v| format!("{v:.4}"))),
            fmt_opt(&r.t_num),
            fmt_opt(&r.s_num),
            fmt_opt(&r.t_dio),
            fmt_opt(&r.s_dio),
            r.matches,
        ));
    }
    let open = out.gaps.iter().filter(|r| r.status == GapStatus::Open).count();
    let ok = out
        .gaps
        .iter()
        .filter(|r| r.status == GapStatus::Open && r.matches)
        .count();
    s.push_str(&format!("\n{ok}/{open} open gaps match the gap equation\n"));
    s
}

pub fn verify_csv(out: &VerifyOutput) -> String {
    let mut s = String::from("g,d,status,e_lo,e_hi,ids,t_num,s_num,t_dio,s_dio,match\n");
    for r in &out.gaps {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_opt(&r.g),
            r.d,
            status_str(r.status),
            fmt_opt(&r.e_lo),
            fmt_opt(&r.e_hi),
            fmt_opt(&r.ids),
            fmt_opt(&r.t_num),
            fmt_opt(&r.s_num),
            fmt_opt(&r.t_dio),
            fmt_opt(&r.s_dio),
            r.matches,
        ));
    }
    s
}

/// Admissibility diagnostics of one Chern computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChernDiag {
    pub c: i64,
    pub max_plaquette: f64,
    pub grid: String,
}

impl From<&ChernResult> for ChernDiag {
    fn from(r: &ChernResult) -> Self {
        ChernDiag {
            c: r.c,
            max_plaquette: r.max_plaquette,
            grid: format!("{}x{} (k2 span {})", r.grid.n1, r.grid.n2, r.grid.span2),
        }
    }
}

/// `chern` output: both bundle computations for one gap plus the transfer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChernOutput {
    #[serde(flatten)]
    pub model: ModelHeader,
    pub d: i64,
    pub t: i64,
    pub s: i64,
    pub reference: ChernDiag,
    pub extended: ChernDiag,
    /// extended.c == M0 * reference.c, the exact picture-change identity.
    pub duality_ok: bool,
    /// Window solution agrees with the numeric pair.
    pub diophantine_ok: bool,
}

pub fn chern_human(out: &ChernOutput) -> String {
    format!(
        "gap d = {} of flux {}/{} (q = {}, r = {}, M0 = {})\n\
         transport integers: t = {}, s = {}\n\
         reference picture:  c_ref = {}  (max plaquette {:.4} rad on {})\n\
         extended canonical: c_ext = {}  (max plaquette {:.4} rad on {})\n\
         c_ext == M0 * c_ref: {}\n\
         matches window solution: {}\n",
        out.d,
        out.model.m,
        out.model.n,
        out.model.q,
        out.model.r,
        out.model.m0,
        out.t,
        out.s,
        out.reference.c,
        out.reference.max_plaquette,
        out.reference.grid,
        out.extended.c,
        out.extended.max_plaquette,
        out.extended.grid,
        out.duality_ok,
        out.diophantine_ok,
    )
}

/// One flux row of a butterfly dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxRow {
    #[serde(rename = "M")]
    pub m: i64,
    #[serde(rename = "N")]
    pub n: i64,
    pub theta: f64,
    pub bands: Vec<BandRow>,
    pub gaps: Vec<TknnRecord>,
    /// Set when this flux could not be verified; the sweep continues.
    pub error: Option<String>,
}

/// `butterfly` output: per-flux spectra with verified gap integers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ButterflyOutput {
    pub q: i64,
    pub r: i64,
    pub nmax: i64,
    pub grid: String,
    pub gap_tol: f64,
    pub rows: Vec<FluxRow>,
}

pub fn butterfly_human(out: &ButterflyOutput) -> String {
    let mut s = format!(
        "butterfly sweep: q = {}, r = {}, denominators up to {}, grid {}\n\n",
        out.q, out.r, out.nmax, out.grid
    );
    for row in &out.rows {
        s.push_str(&format!("{:>5}/{:<3}", row.m, row.n));
        if let Some(err) = &row.error {
            s.push_str(&format!("  error: {err}\n"));
            continue;
        }
        let open: Vec<String> = row
            .gaps
            .iter()
            .filter(|g| g.status == GapStatus::Open)
            .map(|g| {
                format!(
                    "d={} (t={}, s={}{})",
                    g.d,
                    fmt_opt(&g.t_num),
                    fmt_opt(&g.s_num),
                    if g.matches { "" } else { ", MISMATCH" }
                )
            })
            .collect();
        s.push_str(&format!("  {}\n", open.join("  ")));
    }
    s
}

/// `track` output: the trace plus the run parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackOutput {
    #[serde(flatten)]
    pub trace: GapTrace,
    pub grid: String,
    pub gap_tol: f64,
}

pub fn track_human(out: &TrackOutput) -> String {
    let t = &out.trace;
    let mut s = format!(
        "tracking gap at ids ~ {} for flux {} (q = {}, r = {}), depth {}, window {}\n\n",
        t.target_ids, t.theta, t.q, t.r, t.depth, t.window
    );
    s.push_str("convergent   status     d    ids       t      s      match\n");
    for e in &t.entries {
        let status = match e.status {
            TraceStatus::Tracked => "tracked",
            TraceStatus::Skipped => "skipped",
            TraceStatus::NotFound => "not-found",
            TraceStatus::Failed => "failed",
        };
        match &e.record {
            Some(r) => s.push_str(&format!(
                "{:>6}/{:<5} {:<10} {:<4} {:<9} {:>4} {:>6}   {}\n",
                e.m,
                e.n,
                status,
                r.d,
                fmt_opt(&r.ids.map(|v| format!("{v:.4}"))),
                fmt_opt(&r.t_num),
                fmt_opt(&r.s_num),
                r.matches,
            )),
            None => s.push_str(&format!(
                "{:>6}/{:<5} {:<10} {}\n",
                e.m,
                e.n,
                status,
                e.note.as_deref().unwrap_or(""),
            )),
        }
    }
    s.push_str(&format!("\nstable: {}\n", t.stable));
    s
}

/// Pretty JSON with a trailing newline (deterministic for fixed input).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}
