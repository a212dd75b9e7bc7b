//! Gap-by-gap verification that numerically computed Chern integers satisfy
//! the exact Diophantine equation, and tracking of a fixed gap along the
//! continued-fraction convergents of an irrational flux.
//!
//! For each open gap with d bands below it, two independent routes produce a
//! pair of integers:
//! - numeric: `c_ref` from the lattice Chern number of the gap projection in
//!   the reference picture, giving `s_num = -c_ref` and
//!   `t_num = (q*d + M0*c_ref)/N`;
//! - arithmetic: the unique window solution of `N*t + M0*s = q*d`.
//!
//! A record matches when the routes agree. Closed gaps carry no numeric side;
//! their arithmetic shadow is that the window congruence has no solution
//! either, which is what `matches` reports for them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::{convergents, tknn_solve, HarperModel};
use crate::rep::Rep;
use crate::spectral::{band_structure, gap_chart, BandStructure, Gap, GapChart, GapStatus, KGrid};
use crate::topology::{hall_chern, reference_chern};

/// Verification record for one candidate gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TknnRecord {
    /// Ordinal among open gaps (None when the gap is not open).
    pub g: Option<i64>,
    /// Bands below the gap.
    pub d: i64,
    pub status: GapStatus,
    pub e_lo: Option<f64>,
    pub e_hi: Option<f64>,
    /// Integrated density of states inside the gap; d/N exactly when open.
    pub ids: Option<f64>,
    /// Transport integer from the Chern pipeline.
    pub t_num: Option<i64>,
    /// Dual-bundle integer from the Chern pipeline (s = -c_ref).
    pub s_num: Option<i64>,
    /// Arithmetic solution of the gap equation, if one exists in the window.
    pub t_dio: Option<i64>,
    pub s_dio: Option<i64>,
    /// Open: both routes produced the same integers. Closed: the window
    /// congruence is also unsolvable. Indeterminate: false.
    #[serde(rename = "match")]
    pub matches: bool,
}

fn record_for_gap(
    model: &HarperModel,
    bands: &BandStructure,
    gap: &Gap,
    grid: KGrid,
    gap_tol: f64,
) -> Result<TknnRecord> {
    let (t_dio, s_dio) = match tknn_solve(model, gap.d) {
        Ok(sol) => (Some(sol.t), Some(sol.s)),
        Err(Error::NoSolutionInWindow { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    let (ids, t_num, s_num, matches) = match gap.status {
        GapStatus::Open => {
            let c_ref = reference_chern(model, gap.d, grid, gap_tol)?.c;
            let t = hall_chern(model, gap.d, c_ref)?;
            let s = -c_ref;
            let ids = bands.ids(gap.probe_energy());
            let ok = t_dio == Some(t) && s_dio == Some(s);
            (Some(ids), Some(t), Some(s), ok)
        }
        GapStatus::Closed => (None, None, None, t_dio.is_none()),
        GapStatus::Indeterminate => (None, None, None, false),
    };
    Ok(TknnRecord {
        g: gap.g,
        d: gap.d,
        status: gap.status,
        e_lo: gap.e_lo,
        e_hi: gap.e_hi,
        ids,
        t_num,
        s_num,
        t_dio,
        s_dio,
        matches,
    })
}

/// Verify every candidate gap (open, closed and indeterminate) and return
/// the chart together with one record per candidate, in increasing d.
pub fn verify_chart(
    model: &HarperModel,
    grid: KGrid,
    gap_tol: f64,
) -> Result<(GapChart, Vec<TknnRecord>)> {
    let (_, chart, records) = verify_with_bands(model, grid, gap_tol)?;
    Ok((chart, records))
}

/// Like [`verify_chart`], also returning the band structure the chart was
/// built from, for callers that report band intervals alongside the records.
pub fn verify_with_bands(
    model: &HarperModel,
    grid: KGrid,
    gap_tol: f64,
) -> Result<(BandStructure, GapChart, Vec<TknnRecord>)> {
    let bands = band_structure(model, KGrid::new(grid.n1, grid.n2), Rep::Reference)?;
    let chart = gap_chart(&bands, gap_tol);
    let records = chart
        .gaps
        .iter()
        .map(|gap| record_for_gap(model, &bands, gap, grid, gap_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok((bands, chart, records))
}

/// Verification records for the open gaps only, ordered by ordinal.
pub fn verify_all(model: &HarperModel, grid: KGrid, gap_tol: f64) -> Result<Vec<TknnRecord>> {
    let (_, records) = verify_chart(model, grid, gap_tol)?;
    Ok(records
        .into_iter()
        .filter(|r| r.status == GapStatus::Open)
        .collect())
}

/// Verify the single open gap with ordinal `g` (0 = below the spectrum).
pub fn verify_gap(model: &HarperModel, g: i64, grid: KGrid, gap_tol: f64) -> Result<TknnRecord> {
    let bands = band_structure(model, KGrid::new(grid.n1, grid.n2), Rep::Reference)?;
    let chart = gap_chart(&bands, gap_tol);
    let gap = chart.by_ordinal(g).ok_or_else(|| Error::RangeError {
        what: "g",
        details: format!(
            "no open gap with ordinal {g} (found {} open gaps)",
            chart.open_gaps().count()
        ),
    })?;
    record_for_gap(model, &bands, gap, grid, gap_tol)
}

/// Label a gap of the flux-theta system by the pair (m, c1) with
/// `tau = m - theta*c1`, searching |c1| <= c_max in order of increasing |c1|.
///
/// At exact rational flux several pairs can represent the same tau; the
/// representative with the smallest |c1| is returned. The label is rejected
/// as [`Error::Ambiguous`] when no candidate comes within `tol`, or when a
/// candidate with a genuinely different tau value also lands within 2*tol
/// (flux too close to a low-denominator rational for this tolerance).
pub fn gap_label(tau: f64, theta: f64, c_max: i64, tol: f64) -> Result<(i64, i64)> {
    if c_max < 0 {
        return Err(Error::RangeError {
            what: "c_max",
            details: format!("must be >= 0, got {c_max}"),
        });
    }
    // 0, 1, -1, 2, -2, ...: earlier = preferred representative.
    let candidates = (0..=c_max).flat_map(|a| if a == 0 { vec![0] } else { vec![a, -a] });
    let mut best: Option<(i64, i64, f64, f64)> = None; // (m, c, value, err)
    let mut runner_up_err = f64::INFINITY;
    for c in candidates {
        let m = (tau + theta * c as f64).round();
        let value = m - theta * c as f64;
        let err = (tau - value).abs();
        match best {
            None => best = Some((m as i64, c, value, err)),
            Some((_, _, bv, be)) => {
                if err < be && (value - bv).abs() > 1e-12 {
                    runner_up_err = runner_up_err.min(be);
                    best = Some((m as i64, c, value, err));
                } else if (value - bv).abs() > 1e-12 {
                    runner_up_err = runner_up_err.min(err);
                }
                // Same tau value as the current best: same label family,
                // keep the earlier (smaller |c1|) representative.
            }
        }
    }
    let (m, c, _, err) = best.expect("candidate list is never empty");
    if err < tol && runner_up_err > 2.0 * tol {
        Ok((m, c))
    } else {
        Err(Error::Ambiguous { tol })
    }
}

/// Outcome of one convergent in a flux-tracking run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    /// Gap found and verified at this convergent.
    Tracked,
    /// Convergent inadmissible for this hopping modulus (gcd(N, q) > 1).
    Skipped,
    /// No open gap inside the matching window.
    NotFound,
    /// Numerical failure while verifying the gap.
    Failed,
}

/// Per-convergent result of a tracking run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergentEntry {
    /// Convergent flux M_k/N_k.
    pub m: i64,
    pub n: i64,
    pub theta_k: f64,
    pub status: TraceStatus,
    /// Human-readable reason for Skipped/NotFound/Failed.
    pub note: Option<String>,
    pub record: Option<TknnRecord>,
}

/// Stability report for one spectral gap followed along convergents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapTrace {
    pub q: i64,
    pub r: i64,
    pub theta: f64,
    pub depth: usize,
    pub target_ids: f64,
    pub window: f64,
    pub entries: Vec<ConvergentEntry>,
    /// True when at least one convergent tracked the gap, every tracked
    /// record matched its Diophantine solution with one common s, and no
    /// convergent failed numerically.
    pub stable: bool,
}

/// Follow the gap with integrated density of states near `target_ids` along
/// the continued-fraction convergents M_k/N_k of `theta`, verifying the gap
/// equation at each admissible convergent.
///
/// The matching window per convergent is `max(window, 1/(2*N_k))`: half the
/// spacing of the possible d/N_k values, so a gap whose density is the
/// nearest representable value at that convergent is always eligible.
#[allow(clippy::too_many_arguments)]
pub fn track_irrational(
    q: i64,
    r: i64,
    theta: f64,
    depth: usize,
    target_ids: f64,
    window: f64,
    grid: KGrid,
    gap_tol: f64,
) -> Result<GapTrace> {
    if !(0.0..=1.0).contains(&target_ids) {
        return Err(Error::RangeError {
            what: "target_ids",
            details: format!("must lie in [0, 1], got {target_ids}"),
        });
    }
    if window.is_nan() || window <= 0.0 {
        return Err(Error::RangeError {
            what: "window",
            details: format!("must be positive, got {window}"),
        });
    }
    let fluxes = convergents(theta, depth)?;
    if fluxes.is_empty() {
        return Err(Error::Degenerate {
            details: format!("no proper-fraction convergents for flux {theta} at depth {depth}"),
        });
    }

    let mut entries = Vec::with_capacity(fluxes.len());
    for (mk, nk) in fluxes {
        let theta_k = mk as f64 / nk as f64;
        let mut entry = ConvergentEntry {
            m: mk,
            n: nk,
            theta_k,
            status: TraceStatus::Skipped,
            note: None,
            record: None,
        };
        let model = match HarperModel::new(q, r, mk, nk) {
            Ok(m) => m,
            Err(e) => {
                entry.note = Some(format!("inadmissible convergent: {e}"));
                entries.push(entry);
                continue;
            }
        };
        let eff_window = window.max(0.5 / nk as f64);
        match track_one(&model, target_ids, eff_window, grid, gap_tol) {
            Ok(record) => {
                entry.status = TraceStatus::Tracked;
                entry.record = Some(record);
            }
            Err(e @ Error::GapNotFound { .. }) => {
                entry.status = TraceStatus::NotFound;
                entry.note = Some(e.to_string());
            }
            Err(e) => {
                entry.status = TraceStatus::Failed;
                entry.note = Some(e.to_string());
            }
        }
        entries.push(entry);
    }

    let tracked: Vec<&TknnRecord> = entries.iter().filter_map(|e| e.record.as_ref()).collect();
    let any_failed = entries.iter().any(|e| e.status == TraceStatus::Failed);
    let stable = !tracked.is_empty()
        && !any_failed
        && tracked.iter().all(|r| r.matches)
        && tracked.windows(2).all(|w| w[0].s_num == w[1].s_num);

    Ok(GapTrace {
        q,
        r,
        theta,
        depth,
        target_ids,
        window,
        entries,
        stable,
    })
}

fn track_one(
    model: &HarperModel,
    target_ids: f64,
    window: f64,
    grid: KGrid,
    gap_tol: f64,
) -> Result<TknnRecord> {
    let bands = band_structure(model, KGrid::new(grid.n1, grid.n2), Rep::Reference)?;
    let chart = gap_chart(&bands, gap_tol);
    let gap = chart
        .open_gaps()
        .map(|gap| {
            let dist = (gap.d as f64 / model.n as f64 - target_ids).abs();
            (gap, dist)
        })
        .filter(|(_, dist)| *dist <= window)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(gap, _)| *gap)
        .ok_or(Error::GapNotFound {
            target: target_ids,
            window,
        })?;
    let record = record_for_gap(model, &bands, &gap, grid, gap_tol)?;
    // The verified pair must satisfy the rational gap equation exactly.
    if let (Some(t), Some(s)) = (record.t_num, record.s_num) {
        debug_assert_eq!(model.n * t + model.m0 * s, model.q * gap.d);
    }
    Ok(record)
}
