//! Finite-dimensional fiber representations of the generalized Harper
//! operator at rational flux.
//!
//! At flux theta = M/N the operator algebra is generated by two N x N
//! unitaries built from the clock matrix (diagonal of N-th roots of unity)
//! and a k-twisted cyclic shift. Two equivalent bundle pictures are used:
//!
//! - `Canonical`: momentum phases enter as e^{i 2 pi (M0/N) k2}; the fiber is
//!   periodic in k2 with period N (extended zone).
//! - `Reference`: the k2 phase is e^{i 2 pi k2}; the fiber is periodic in
//!   both k1 and k2 with period 1.
//!
//! The two are related by the exact substitution
//! `H_can(k1, N k2) = H_ref(k1, M0 k2 mod 1)`, which is what makes Chern
//! numbers computed in one picture transferable to the other.
//!
//! Phases are always reduced modulo one full turn *before* being multiplied
//! by 2 pi, so matrix entries stay accurate to ~1e-15 regardless of how many
//! windings a power has accumulated.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use crate::numtheory::HarperModel;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Which bundle picture the fiber matrices are built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rep {
    /// e^{i 2 pi (M0/N) k2} phases; k2-period N.
    Canonical,
    /// e^{i 2 pi k2} phases; k2-period 1.
    Reference,
}

/// Point of the momentum torus. Components are in "turns": k1, k2 live on
/// [0, 1) for period-1 directions (values outside are wrapped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub k1: f64,
    pub k2: f64,
}

impl KPoint {
    pub fn new(k1: f64, k2: f64) -> Self {
        KPoint { k1, k2 }
    }
}

/// e^{i 2 pi turns}, with the argument reduced mod 1 before scaling by 2 pi.
pub fn unit_phase(turns: f64) -> C64 {
    let t = turns.rem_euclid(1.0);
    let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
    Complex::new(c, s)
}

/// Clock matrix: diag(1, w, w^2, ..., w^{N-1}) with w = e^{i 2 pi / N}.
pub fn clock_matrix(n: i64) -> CMatrix {
    clock_pow(n, 1)
}

/// Integer power of the clock matrix, with the exponent of every diagonal
/// entry reduced mod N exactly.
pub fn clock_pow(n: i64, p: i64) -> CMatrix {
    assert!(n >= 1, "dimension must be positive");
    let nn = n as usize;
    let mut m = CMatrix::zeros(nn, nn);
    for j in 0..nn {
        let e = (j as i128 * p as i128).rem_euclid(n as i128) as i64;
        m[(j, j)] = unit_phase(e as f64 / n as f64);
    }
    m
}

/// Cyclic shift: maps basis vector e_j to e_{j+1 mod N}.
pub fn shift_matrix(n: i64) -> CMatrix {
    twisted_shift(n, 0, 0.0)
}

/// k1-twisted cyclic shift: e_j -> e_{j+1} for j < N-1 and
/// e_{N-1} -> e^{i 2 pi q k1} e_0. Satisfies
/// clock * twisted = e^{i 2 pi / N} * twisted * clock for every k1.
pub fn twisted_shift(n: i64, q: i64, k1: f64) -> CMatrix {
    twisted_shift_pow(n, q, k1, 1)
}

/// Integer power of the twisted shift in closed form: column j maps to row
/// (j + p) mod N with phase e^{i 2 pi q k1 * wraps}, where wraps counts how
/// many times the shift passed the wrap-around edge. Negative powers are the
/// adjoint of the corresponding positive power.
pub fn twisted_shift_pow(n: i64, q: i64, k1: f64, p: i64) -> CMatrix {
    assert!(n >= 1, "dimension must be positive");
    if p < 0 {
        return twisted_shift_pow(n, q, k1, -p).adjoint();
    }
    let nn = n as usize;
    let k1r = k1.rem_euclid(1.0);
    let mut m = CMatrix::zeros(nn, nn);
    for j in 0..nn {
        let shifted = j as i128 + p as i128;
        let row = shifted.rem_euclid(n as i128) as usize;
        let wraps = shifted.div_euclid(n as i128);
        let turns = (q as i128 * wraps) as f64 * k1r;
        m[(row, j)] = unit_phase(turns);
    }
    m
}

/// Integer power of the momentum generator U in the given picture:
/// a k2-dependent phase times clock^{q M e}.
pub fn u_pow(model: &HarperModel, k: KPoint, rep: Rep, e: i64) -> CMatrix {
    let n = model.n;
    let turns = match rep {
        Rep::Canonical => {
            let k2r = k.k2.rem_euclid(n as f64);
            (model.m0 as i128 * e as i128) as f64 * k2r / n as f64
        }
        Rep::Reference => e as f64 * k.k2.rem_euclid(1.0),
    };
    let p = (model.q as i128 * model.m as i128 * e as i128).rem_euclid(n as i128) as i64;
    let mut m = clock_pow(n, p);
    m *= unit_phase(turns);
    m
}

/// Integer power of the position generator V (identical in both pictures):
/// e^{i 2 pi n_r e k1} times the d_r * e power of the twisted shift.
pub fn v_pow(model: &HarperModel, k: KPoint, _rep: Rep, e: i64) -> CMatrix {
    let turns = (model.nr as i128 * e as i128) as f64 * k.k1.rem_euclid(1.0);
    // |dr| <= N/2 and practical term powers are small, so dr*e fits i64.
    let p = model
        .dr
        .checked_mul(e)
        .expect("shift power overflow: term power too large");
    let mut m = twisted_shift_pow(model.n, model.q, k.k1, p);
    m *= unit_phase(turns);
    m
}

/// The U generator itself (power one).
pub fn generator_u(model: &HarperModel, k: KPoint, rep: Rep) -> CMatrix {
    u_pow(model, k, rep, 1)
}

/// The V generator itself (power one).
pub fn generator_v(model: &HarperModel, k: KPoint, rep: Rep) -> CMatrix {
    v_pow(model, k, rep, 1)
}

/// Finite linear combination of monomials U^n V^m with complex coefficients.
/// Terms are kept sorted by (n, m) with duplicate monomials merged.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    terms: Vec<(i64, i64, C64)>,
}

impl AlgebraElement {
    /// Build from raw (n, m, coefficient) triples; merges duplicates.
    /// Merged coefficients are kept even when they cancel to zero.
    pub fn new(terms: impl IntoIterator<Item = (i64, i64, C64)>) -> Self {
        let mut terms: Vec<(i64, i64, C64)> = terms.into_iter().collect();
        terms.sort_by_key(|&(n, m, _)| (n, m));
        let mut merged: Vec<(i64, i64, C64)> = Vec::with_capacity(terms.len());
        for (n, m, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == n && last.1 == m => last.2 += a,
                _ => merged.push((n, m, a)),
            }
        }
        AlgebraElement { terms: merged }
    }

    /// The Harper element U + U* + V + V*.
    pub fn harper() -> Self {
        let one = Complex::new(1.0, 0.0);
        AlgebraElement::new([(1, 0, one), (-1, 0, one), (0, 1, one), (0, -1, one)])
    }

    pub fn terms(&self) -> &[(i64, i64, C64)] {
        &self.terms
    }

    /// element + element*, using the exact reordering phase: the adjoint of
    /// a * U^n V^m is conj(a) * e^{-i 2 pi theta n m} * U^{-n} V^{-m}.
    pub fn hermitize(&self, model: &HarperModel) -> Self {
        let mut terms = self.terms.clone();
        for &(n, m, a) in &self.terms {
            let e = (-(model.m as i128) * n as i128 * m as i128).rem_euclid(model.n as i128);
            let phase = unit_phase(e as f64 / model.n as f64);
            terms.push((-n, -m, a.conj() * phase));
        }
        AlgebraElement::new(terms)
    }
}

/// Fiber matrix of an algebra element at momentum k in the given picture.
pub fn fiber(model: &HarperModel, element: &AlgebraElement, k: KPoint, rep: Rep) -> CMatrix {
    let nn = model.n as usize;
    let mut h = CMatrix::zeros(nn, nn);
    for &(n, m, a) in element.terms() {
        if a == Complex::new(0.0, 0.0) {
            continue;
        }
        let term = u_pow(model, k, rep, n) * v_pow(model, k, rep, m);
        h += term * a;
    }
    h
}

/// Fiber matrix of the Harper element U + U* + V + V*.
pub fn harper_fiber(model: &HarperModel, k: KPoint, rep: Rep) -> CMatrix {
    fiber(model, &AlgebraElement::harper(), k, rep)
}

/// Largest entry-wise absolute difference between two equally sized matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest entry of |H - H*|; zero for an exactly Hermitian matrix.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    max_abs_diff(h, &h.adjoint())
}

/// Largest entry of |A*A - I|; zero for an exactly unitary matrix.
pub fn unitary_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    max_abs_diff(&(a.adjoint() * a), &CMatrix::identity(n, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::HarperModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn test_models() -> Vec<HarperModel> {
        [
            (1, 0, 1, 2),
            (1, 0, 1, 3),
            (1, 0, 1, 4),
            (2, 1, 1, 3),
            (2, 1, 1, 5),
            (3, 1, 1, 5),
            (5, 3, 3, 7),
        ]
        .into_iter()
        .map(|(q, r, m, n)| HarperModel::new(q, r, m, n).unwrap())
        .collect()
    }

    fn approx_entry(m: &CMatrix, i: usize, j: usize, re: f64, im: f64) {
        let z = m[(i, j)];
        assert!(
            (z.re - re).abs() < TOL && (z.im - im).abs() < TOL,
            "entry ({i},{j}) = {z}, expected {re}+{im}i"
        );
    }

    #[test]
    fn clock_matrix_small_cases() {
        let c1 = clock_matrix(1);
        approx_entry(&c1, 0, 0, 1.0, 0.0);

        let c2 = clock_matrix(2);
        approx_entry(&c2, 0, 0, 1.0, 0.0);
        approx_entry(&c2, 1, 1, -1.0, 0.0);
        approx_entry(&c2, 0, 1, 0.0, 0.0);

        let c4 = clock_matrix(4);
        approx_entry(&c4, 1, 1, 0.0, 1.0);
        approx_entry(&c4, 2, 2, -1.0, 0.0);
        approx_entry(&c4, 3, 3, 0.0, -1.0);
    }

    #[test]
    fn shift_matrix_cycles_basis() {
        let s = shift_matrix(3);
        approx_entry(&s, 1, 0, 1.0, 0.0);
        approx_entry(&s, 2, 1, 1.0, 0.0);
        approx_entry(&s, 0, 2, 1.0, 0.0);
        approx_entry(&s, 0, 0, 0.0, 0.0);
    }

    #[test]
    fn twisted_shift_wrap_phase() {
        let v = twisted_shift(2, 1, 0.0);
        approx_entry(&v, 1, 0, 1.0, 0.0);
        approx_entry(&v, 0, 1, 1.0, 0.0);

        // Half-turn twist: wrap entry picks up e^{i pi} = -1.
        let v = twisted_shift(2, 1, 0.5);
        approx_entry(&v, 0, 1, -1.0, 0.0);

        // V^N = e^{i 2 pi q k1} * I.
        let v = twisted_shift(3, 2, 0.5);
        let v3 = &v * &v * &v;
        let expected = CMatrix::identity(3, 3) * unit_phase(2.0 * 0.5);
        assert!(max_abs_diff(&v3, &expected) < TOL);
    }

    #[test]
    fn clock_and_twisted_shift_commutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=6i64 {
            for q in [0i64, 1, 2, 5] {
                let k1: f64 = rng.random_range(-2.0..2.0);
                let u = clock_matrix(n);
                let v = twisted_shift(n, q, k1);
                let lhs = &u * &v;
                let rhs = (&v * &u) * unit_phase(1.0 / n as f64);
                assert!(max_abs_diff(&lhs, &rhs) < TOL, "n={n} q={q}");
            }
        }
    }

    #[test]
    fn closed_form_powers_match_repeated_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5i64 {
            let k1: f64 = rng.random_range(-1.0..1.0);
            let q = 3;
            let v = twisted_shift(n, q, k1);
            let c = clock_matrix(n);
            let mut vp = CMatrix::identity(n as usize, n as usize);
            let mut cp = vp.clone();
            for p in 0..=(2 * n + 1) {
                assert!(max_abs_diff(&twisted_shift_pow(n, q, k1, p), &vp) < TOL, "v^{p}, n={n}");
                assert!(max_abs_diff(&clock_pow(n, p), &cp) < TOL, "c^{p}, n={n}");
                assert!(
                    max_abs_diff(&twisted_shift_pow(n, q, k1, -p), &vp.adjoint()) < TOL,
                    "v^-{p}, n={n}"
                );
                vp = &vp * &v;
                cp = &cp * &c;
            }
        }
    }

    #[test]
    fn generators_flux_half_at_origin() {
        let model = HarperModel::new(1, 0, 1, 2).unwrap();
        let k = KPoint::new(0.0, 0.0);
        let u = generator_u(&model, k, Rep::Canonical);
        approx_entry(&u, 0, 0, 1.0, 0.0);
        approx_entry(&u, 1, 1, -1.0, 0.0);
        let v = generator_v(&model, k, Rep::Canonical);
        approx_entry(&v, 1, 0, 1.0, 0.0);
        approx_entry(&v, 0, 1, 1.0, 0.0);
    }

    #[test]
    fn generators_are_unitary_and_satisfy_flux_commutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for model in test_models() {
            for _ in 0..50 {
                let k = KPoint::new(rng.random_range(-1.0..2.0), rng.random_range(-3.0..3.0));
                for rep in [Rep::Canonical, Rep::Reference] {
                    let u = generator_u(&model, k, rep);
                    let v = generator_v(&model, k, rep);
                    assert!(unitary_defect(&u) < TOL);
                    assert!(unitary_defect(&v) < TOL);
                    // U V = e^{i 2 pi M/N} V U: the defining flux relation.
                    let lhs = &u * &v;
                    let rhs = (&v * &u) * unit_phase(model.m as f64 / model.n as f64);
                    assert!(
                        max_abs_diff(&lhs, &rhs) < TOL,
                        "commutation failed: model {model:?}, rep {rep:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn fiber_periodicity_in_both_pictures() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for model in test_models() {
            let k = KPoint::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let n = model.n as f64;

            let h = harper_fiber(&model, k, Rep::Canonical);
            let h_k1 = harper_fiber(&model, KPoint::new(k.k1 + 1.0, k.k2), Rep::Canonical);
            let h_k2 = harper_fiber(&model, KPoint::new(k.k1, k.k2 + n), Rep::Canonical);
            assert!(max_abs_diff(&h, &h_k1) < TOL);
            assert!(max_abs_diff(&h, &h_k2) < TOL);

            let h = harper_fiber(&model, k, Rep::Reference);
            let h_k1 = harper_fiber(&model, KPoint::new(k.k1 + 1.0, k.k2), Rep::Reference);
            let h_k2 = harper_fiber(&model, KPoint::new(k.k1, k.k2 + 1.0), Rep::Reference);
            assert!(max_abs_diff(&h, &h_k1) < TOL);
            assert!(max_abs_diff(&h, &h_k2) < TOL);
        }
    }

    #[test]
    fn harper_fiber_flux_half_at_origin() {
        let model = HarperModel::new(1, 0, 1, 2).unwrap();
        let h = harper_fiber(&model, KPoint::new(0.0, 0.0), Rep::Canonical);
        approx_entry(&h, 0, 0, 2.0, 0.0);
        approx_entry(&h, 0, 1, 2.0, 0.0);
        approx_entry(&h, 1, 0, 2.0, 0.0);
        approx_entry(&h, 1, 1, -2.0, 0.0);
    }

    #[test]
    fn harper_fiber_hermitian_and_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for model in test_models() {
            for rep in [Rep::Canonical, Rep::Reference] {
                let k = KPoint::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                let h = harper_fiber(&model, k, rep);
                assert!(hermitian_defect(&h) < TOL);
                let tr: C64 = h.diagonal().iter().sum();
                if model.n >= 2 {
                    assert!(tr.norm() < TOL, "trace {tr} for {model:?}");
                }
            }
        }
    }

    #[test]
    fn reparameterization_links_the_two_pictures() {
        // H_can(k1, N k2) = H_ref(k1, M0 k2 mod 1), exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for model in test_models() {
            for _ in 0..100 {
                let k1 = rng.random_range(0.0..1.0);
                let k2 = rng.random_range(0.0..1.0);
                let can = harper_fiber(
                    &model,
                    KPoint::new(k1, model.n as f64 * k2),
                    Rep::Canonical,
                );
                let refp = harper_fiber(
                    &model,
                    KPoint::new(k1, (model.m0 as f64 * k2).rem_euclid(1.0)),
                    Rep::Reference,
                );
                assert!(
                    max_abs_diff(&can, &refp) < TOL,
                    "pictures disagree for {model:?} at k=({k1}, {k2})"
                );
            }
        }
    }

    #[test]
    fn hermitize_adds_adjoint_terms() {
        let model = HarperModel::new(1, 0, 1, 3).unwrap();
        let one = Complex::new(1.0, 0.0);

        let e = AlgebraElement::new([(1, 0, one)]).hermitize(&model);
        assert_eq!(e.terms().len(), 2);
        assert_eq!(e.terms()[0].0, -1);
        assert!((e.terms()[0].2 - one).norm() < TOL);

        // Purely imaginary constant cancels to a single zero term.
        let e = AlgebraElement::new([(0, 0, Complex::new(0.0, 1.0))]).hermitize(&model);
        assert_eq!(e.terms().len(), 1);
        assert!(e.terms()[0].2.norm() < TOL);

        // Mixed monomial picks up the reordering phase e^{-i 2 pi theta}.
        let e = AlgebraElement::new([(1, 1, one)]).hermitize(&model);
        let adj = e
            .terms()
            .iter()
            .find(|&&(n, m, _)| n == -1 && m == -1)
            .unwrap();
        assert!((adj.2 - unit_phase(-1.0 / 3.0)).norm() < TOL);
    }

    #[test]
    fn hermitized_fibers_are_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for model in test_models() {
            let raw = AlgebraElement::new([
                (2, 1, Complex::new(0.3, -0.7)),
                (-1, 2, Complex::new(1.1, 0.2)),
                (0, 0, Complex::new(0.0, 0.9)),
            ]);
            let herm = raw.hermitize(&model);
            for rep in [Rep::Canonical, Rep::Reference] {
                let k = KPoint::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                let h = fiber(&model, &herm, k, rep);
                assert!(
                    hermitian_defect(&h) < TOL,
                    "hermitized fiber not Hermitian for {model:?} {rep:?}"
                );
            }
        }
    }
}
