//! Band structure and gap analysis of the fiber matrices.
//!
//! The fiber at each momentum point is a Hermitian N x N matrix; its sorted
//! eigenvalues over a uniform grid give N bands. Candidate gaps are indexed
//! by the number of bands below them, d = 0..N: d = 0 (below everything) and
//! d = N (above everything) are always open, interior gaps are classified
//! open / closed / indeterminate against a width tolerance.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::HarperModel;
use crate::rep::{harper_fiber, hermitian_defect, CMatrix, KPoint, Rep};

/// Minimum certified width for an open gap.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Width below which bands are treated as numerically connected (touching or
/// overlapping); this is the accuracy scale of the eigensolver, far below any
/// physical gap width.
pub const TOUCH_TOL: f64 = 1e-9;

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Hermitian eigendecomposition with ascending eigenvalue order.
///
/// The input is checked for Hermiticity (relative to its largest entry),
/// symmetrized to kill roundoff skew, and decomposed by a deterministic
/// QR-type iteration.
pub fn eigh(h: &CMatrix) -> Result<EigenSystem> {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "eigh requires a square matrix");
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let defect = hermitian_defect(h);
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian { max_skew: defect });
    }
    let sym = (h + h.adjoint()) * num_complex::Complex::new(0.5, 0.0);
    let decomp = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or(Error::NoConvergence { iters: usize::MAX })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| decomp.eigenvectors[(r, order[c])]);
    Ok(EigenSystem { values, vectors })
}

/// Uniform grid on the momentum torus: n1 x n2 points, k1 = i/n1 and
/// k2 = span2 * j/n2. `span2` is 1 for the period-1 torus and N for the
/// extended zone of the canonical picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGrid {
    pub n1: usize,
    pub n2: usize,
    pub span2: i64,
}

impl KGrid {
    /// Period-1 torus grid.
    pub fn new(n1: usize, n2: usize) -> Self {
        KGrid { n1, n2, span2: 1 }
    }

    /// Grid whose k2 axis covers [0, span2).
    pub fn with_span2(n1: usize, n2: usize, span2: i64) -> Self {
        KGrid { n1, n2, span2 }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, j: usize) -> KPoint {
        KPoint::new(
            i as f64 / self.n1 as f64,
            self.span2 as f64 * j as f64 / self.n2 as f64,
        )
    }
}

impl std::fmt::Display for KGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.n1, self.n2)?;
        if self.span2 != 1 {
            write!(f, " (k2 span {})", self.span2)?;
        }
        Ok(())
    }
}

/// Sorted fiber eigenvalues at every grid point.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub model: HarperModel,
    pub rep: Rep,
    pub grid: KGrid,
    /// Row-major by (i, j): energies[(i + n1*j) * n_bands + b].
    energies: Vec<f64>,
}

impl BandStructure {
    pub fn n_bands(&self) -> usize {
        self.model.n as usize
    }

    /// Sorted eigenvalues at grid point (i, j).
    pub fn bands(&self, i: usize, j: usize) -> &[f64] {
        let nb = self.n_bands();
        let base = (i + self.grid.n1 * j) * nb;
        &self.energies[base..base + nb]
    }

    /// Smallest and largest value of band b over the grid.
    pub fn band_range(&self, b: usize) -> (f64, f64) {
        let nb = self.n_bands();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for chunk in self.energies.chunks_exact(nb) {
            lo = lo.min(chunk[b]);
            hi = hi.max(chunk[b]);
        }
        (lo, hi)
    }

    /// Smallest and largest eigenvalue over the whole grid.
    pub fn global_range(&self) -> (f64, f64) {
        let lo = self.band_range(0).0;
        let hi = self.band_range(self.n_bands() - 1).1;
        (lo, hi)
    }

    /// Number of (point, band) samples with energy strictly below `energy`,
    /// normalized per matrix dimension: inside an open gap with d bands below
    /// this equals d/N exactly.
    pub fn ids(&self, energy: f64) -> f64 {
        let below = self.energies.iter().filter(|&&e| e < energy).count();
        below as f64 / self.energies.len() as f64
    }
}

/// Diagonalize the Harper fiber on every grid point (in parallel).
///
/// `grid.span2` must be 1, or N for the canonical extended zone.
pub fn band_structure(model: &HarperModel, grid: KGrid, rep: Rep) -> Result<BandStructure> {
    if grid.n1 == 0 || grid.n2 == 0 {
        return Err(Error::RangeError {
            what: "grid",
            details: "grid must have at least one point per axis".into(),
        });
    }
    if grid.span2 != 1 && grid.span2 != model.n {
        return Err(Error::RangeError {
            what: "grid.span2",
            details: format!("k2 span must be 1 or N = {}, got {}", model.n, grid.span2),
        });
    }
    let nb = model.n as usize;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % grid.n1, idx / grid.n1);
            let h = harper_fiber(model, grid.point(i, j), rep);
            eigh(&h).map(|es| es.values)
        })
        .collect::<Result<_>>()?;
    let mut energies = Vec::with_capacity(grid.len() * nb);
    for row in rows {
        energies.extend(row);
    }
    Ok(BandStructure {
        model: *model,
        rep,
        grid,
        energies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapStatus {
    Open,
    Closed,
    Indeterminate,
}

/// One candidate gap: d bands lie below it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Gap {
    /// Band count below the gap, 0 <= d <= N.
    pub d: i64,
    /// Ordinal among open gaps (0 = below the spectrum), None if not open.
    pub g: Option<i64>,
    pub status: GapStatus,
    /// Lower edge (max of band d-1); None for d = 0 (unbounded below).
    pub e_lo: Option<f64>,
    /// Upper edge (min of band d); None for d = N (unbounded above).
    pub e_hi: Option<f64>,
}

impl Gap {
    /// A finite energy inside the gap (midpoint for interior gaps, one unit
    /// outside the spectrum for the unbounded ones).
    pub fn probe_energy(&self) -> f64 {
        match (self.e_lo, self.e_hi) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            (None, Some(hi)) => hi - 1.0,
            (Some(lo), None) => lo + 1.0,
            (None, None) => 0.0,
        }
    }
}

/// Classification of all N+1 candidate gaps of a band structure.
#[derive(Debug, Clone, Serialize)]
pub struct GapChart {
    pub gaps: Vec<Gap>,
    pub gap_tol: f64,
}

impl GapChart {
    /// Open gaps in increasing d order.
    pub fn open_gaps(&self) -> impl Iterator<Item = &Gap> {
        self.gaps.iter().filter(|g| g.status == GapStatus::Open)
    }

    /// Candidate gap with the given band count below it.
    pub fn by_d(&self, d: i64) -> Option<&Gap> {
        self.gaps.iter().find(|g| g.d == d)
    }

    /// Open gap with ordinal g.
    pub fn by_ordinal(&self, g: i64) -> Option<&Gap> {
        self.gaps.iter().find(|gap| gap.g == Some(g))
    }
}

/// Classify every candidate gap of a period-1 band structure.
///
/// A gap is open when its width exceeds `gap_tol`, closed when the bands
/// overlap or touch at the eigensolver's accuracy ([`TOUCH_TOL`]), and
/// indeterminate in between (reported, never silently resolved). The
/// unbounded gaps below and above the spectrum are always open.
pub fn gap_chart(bands: &BandStructure, gap_tol: f64) -> GapChart {
    assert_eq!(
        bands.grid.span2, 1,
        "gap charts are defined on the period-1 torus"
    );
    let nb = bands.n_bands();
    let ranges: Vec<(f64, f64)> = (0..nb).map(|b| bands.band_range(b)).collect();
    let mut gaps = Vec::with_capacity(nb + 1);
    let mut next_ordinal = 0i64;
    let mut push = |d: i64, status: GapStatus, e_lo: Option<f64>, e_hi: Option<f64>| {
        let g = (status == GapStatus::Open).then(|| {
            let g = next_ordinal;
            next_ordinal += 1;
            g
        });
        gaps.push(Gap {
            d,
            g,
            status,
            e_lo,
            e_hi,
        });
    };

    push(0, GapStatus::Open, None, Some(ranges[0].0));
    for d in 1..nb {
        let lo = ranges[d - 1].1; // top of the band below
        let hi = ranges[d].0; // bottom of the band above
        let width = hi - lo;
        let status = if width > gap_tol.max(TOUCH_TOL) {
            GapStatus::Open
        } else if width < TOUCH_TOL {
            GapStatus::Closed
        } else {
            GapStatus::Indeterminate
        };
        push(d as i64, status, Some(lo), Some(hi));
    }
    push(nb as i64, GapStatus::Open, Some(ranges[nb - 1].1), None);

    GapChart { gaps, gap_tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::gcd;
    use crate::rep::max_abs_diff;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(q: i64, r: i64, m: i64, n: i64) -> HarperModel {
        HarperModel::new(q, r, m, n).unwrap()
    }

    #[test]
    fn eigh_two_by_two_exact() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(2.0, 0.0),
                Complex::new(2.0, 0.0),
                Complex::new(2.0, 0.0),
                Complex::new(-2.0, 0.0),
            ],
        );
        let es = eigh(&h).unwrap();
        let lambda = 8.0_f64.sqrt();
        assert!((es.values[0] + lambda).abs() < 1e-12);
        assert!((es.values[1] - lambda).abs() < 1e-12);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(1.0, 0.5),
                Complex::new(1.0, 0.5), // should be the conjugate
                Complex::new(1.0, 0.0),
            ],
        );
        assert!(matches!(eigh(&h), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigh_random_hermitian_residual_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        for n in [2usize, 5, 8, 13] {
            let raw = CMatrix::from_fn(n, n, |_, _| {
                Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let h = (&raw + raw.adjoint()) * Complex::new(0.5, 0.0);
            let es = eigh(&h).unwrap();
            let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);

            // Ascending order.
            for w in es.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
            // Residual H v = lambda v.
            let lambda = CMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    Complex::new(es.values[r], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                }
            });
            let residual = max_abs_diff(&(&h * &es.vectors), &(&es.vectors * lambda));
            assert!(residual < 1e-10 * scale.max(1.0), "residual {residual:e}");
            // Orthonormal eigenvector frame.
            let gram = es.vectors.adjoint() * &es.vectors;
            assert!(max_abs_diff(&gram, &CMatrix::identity(n, n)) < 1e-10);
        }
    }

    #[test]
    fn eigh_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw = CMatrix::from_fn(6, 6, |_, _| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = (&raw + raw.adjoint()) * Complex::new(0.5, 0.0);
        let a = eigh(&h).unwrap();
        let b = eigh(&h).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn band_structure_flux_third_shape_and_bounds() {
        let bands = band_structure(&model(1, 0, 1, 3), KGrid::new(32, 32), Rep::Reference).unwrap();
        assert_eq!(bands.n_bands(), 3);
        let (lo, hi) = bands.global_range();
        // Four hopping unitaries bound the spectrum by 4.
        assert!(lo >= -4.0 - 1e-9 && hi <= 4.0 + 1e-9);
        // Bipartite symmetry: spectrum even under E -> -E.
        let (b0_lo, b0_hi) = bands.band_range(0);
        let (b2_lo, b2_hi) = bands.band_range(2);
        assert!((b0_lo + b2_hi).abs() < 1e-9);
        assert!((b0_hi + b2_lo).abs() < 1e-9);
    }

    #[test]
    fn gap_chart_flux_third_all_open() {
        let bands = band_structure(&model(1, 0, 1, 3), KGrid::new(32, 32), Rep::Reference).unwrap();
        let chart = gap_chart(&bands, DEFAULT_GAP_TOL);
        assert_eq!(chart.gaps.len(), 4);
        let open: Vec<i64> = chart.open_gaps().map(|g| g.d).collect();
        assert_eq!(open, vec![0, 1, 2, 3]);
        // Ordinals count open gaps from below.
        for (g, gap) in chart.open_gaps().enumerate() {
            assert_eq!(gap.g, Some(g as i64));
        }
    }

    #[test]
    fn gap_chart_flux_half_central_gap_closed() {
        let bands = band_structure(&model(1, 0, 1, 2), KGrid::new(32, 32), Rep::Reference).unwrap();
        let chart = gap_chart(&bands, DEFAULT_GAP_TOL);
        let open: Vec<i64> = chart.open_gaps().map(|g| g.d).collect();
        assert_eq!(open, vec![0, 2]);
        assert_eq!(chart.by_d(1).unwrap().status, GapStatus::Closed);
    }

    #[test]
    fn gap_chart_flux_quarter_central_gap_closed() {
        let bands = band_structure(&model(1, 0, 1, 4), KGrid::new(32, 32), Rep::Reference).unwrap();
        let chart = gap_chart(&bands, DEFAULT_GAP_TOL);
        let open: Vec<i64> = chart.open_gaps().map(|g| g.d).collect();
        assert_eq!(open, vec![0, 1, 3, 4]);
        assert_eq!(chart.by_d(2).unwrap().status, GapStatus::Closed);
    }

    #[test]
    fn ids_is_grid_exact_in_open_gaps() {
        let bands = band_structure(&model(1, 0, 1, 3), KGrid::new(32, 32), Rep::Reference).unwrap();
        let chart = gap_chart(&bands, DEFAULT_GAP_TOL);
        for gap in chart.open_gaps() {
            let ids = bands.ids(gap.probe_energy());
            assert_eq!(ids, gap.d as f64 / 3.0, "gap d = {}", gap.d);
        }
    }

    #[test]
    fn ids_exactness_sweep_small_denominators() {
        for n in 2..=7i64 {
            for m in 1..n {
                if gcd(m, n) != 1 {
                    continue;
                }
                let model = model(1, 0, m, n);
                let bands = band_structure(&model, KGrid::new(12, 12), Rep::Reference).unwrap();
                let chart = gap_chart(&bands, DEFAULT_GAP_TOL);
                for gap in chart.open_gaps() {
                    let ids = bands.ids(gap.probe_energy());
                    assert_eq!(ids, gap.d as f64 / n as f64, "M={m} N={n} d={}", gap.d);
                }
            }
        }
    }

    #[test]
    fn band_structure_rejects_bad_span() {
        let m = model(1, 0, 1, 3);
        assert!(band_structure(&m, KGrid::with_span2(8, 8, 2), Rep::Canonical).is_err());
        assert!(band_structure(&m, KGrid::with_span2(8, 8, 3), Rep::Canonical).is_ok());
    }

    #[test]
    fn spectra_agree_between_pictures_as_sets() {
        // Pointwise the two pictures differ, but over the full torus the band
        // ranges must coincide (same operator, reparameterized momentum).
        let m = model(2, 1, 1, 5);
        let refp = band_structure(&m, KGrid::new(40, 40), Rep::Reference).unwrap();
        let can = band_structure(&m, KGrid::with_span2(40, 40, 5), Rep::Canonical).unwrap();
        for b in 0..refp.n_bands() {
            let (rlo, rhi) = refp.band_range(b);
            let (clo, chi) = can.band_range(b);
            assert!((rlo - clo).abs() < 1e-2 && (rhi - chi).abs() < 1e-2);
        }
    }
}
