//! The height-ordered family of short Weierstrass curves, their global
//! invariants and per-prime reduction data.

use alloc::vec::Vec;

use crate::arith::{factor, gcd_i128, valuation_opt};
use crate::tate::{tate, Kodaira, Model};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("height parameter must satisfy X >= 1, got {0}")]
    HeightTooSmall(f64),
    #[error("({0}, {1}) is singular")]
    Singular(i64, i64),
    #[error("({0}, {1}) is not minimal: p^4 | A and p^6 | B for p = {2}")]
    NotMinimal(i64, i64, u64),
}

/// Coefficient box `|A| <= a_max`, `|B| <= b_max` of the family at height `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeightBox {
    pub a_max: i64,
    pub b_max: i64,
}

impl HeightBox {
    pub fn new(x: f64) -> Result<Self, CurveError> {
        if x.is_nan() || x < 1.0 || !x.is_finite() {
            return Err(CurveError::HeightTooSmall(x));
        }
        Ok(HeightBox { a_max: floor_power(x, 2), b_max: floor_power(x, 3) })
    }

    pub fn contains(&self, a: i64, b: i64) -> bool {
        a.abs() <= self.a_max && b.abs() <= self.b_max
    }
}

// floor(x^k), corrected for rounding when x^k is (nearly) an integer.
fn floor_power(x: f64, k: i32) -> i64 {
    let approx = libm::floor(libm::pow(x, k as f64)) as i64;
    let check = |n: i64| libm::pow(n as f64, 1.0 / k as f64) <= x * (1.0 + 4.0 * f64::EPSILON);
    let mut n = approx.max(0);
    while check(n + 1) {
        n += 1;
    }
    while n > 0 && !check(n) {
        n -= 1;
    }
    n
}

/// The prime `p` witnessing non-minimality of `(A, B)`, if any.
pub fn minimality_obstruction(a: i64, b: i64) -> Option<u64> {
    let g = gcd_i128(a as i128, b as i128);
    if g == 0 {
        return Some(2);
    }
    let (a, b) = (a as i128, b as i128);
    for (p, _) in factor(g as i128) {
        let (p4, p6) = ((p as i128).pow(4), (p as i128).pow(6));
        if a % p4 == 0 && b % p6 == 0 {
            return Some(p);
        }
    }
    None
}

pub fn is_minimal_pair(a: i64, b: i64) -> bool {
    minimality_obstruction(a, b).is_none()
}

pub fn discriminant(a: i64, b: i64) -> i128 {
    let (a, b) = (a as i128, b as i128);
    -16 * (4 * a * a * a + 27 * b * b)
}

/// A curve `y^2 = x^3 + Ax + B` in the family, with cached invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurveRecord {
    a: i64,
    b: i64,
    delta: i128,
    height: i128,
    c4: i128,
}

impl CurveRecord {
    /// Builds the record, rejecting singular and non-minimal pairs.
    pub fn new(a: i64, b: i64) -> Result<Self, CurveError> {
        let delta = discriminant(a, b);
        if delta == 0 {
            return Err(CurveError::Singular(a, b));
        }
        if let Some(p) = minimality_obstruction(a, b) {
            return Err(CurveError::NotMinimal(a, b, p));
        }
        Ok(Self::from_parts(a, b, delta))
    }

    fn from_parts(a: i64, b: i64, delta: i128) -> Self {
        let (a128, b128) = (a as i128, b as i128);
        let height = (a128.abs().pow(3)).max(b128 * b128);
        CurveRecord { a, b, delta, height, c4: -48 * a128 }
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn key(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    /// `-16(4A^3 + 27B^2)`.
    pub fn discriminant(&self) -> i128 {
        self.delta
    }

    /// Naive height `max(|A|^3, B^2)`.
    pub fn height(&self) -> i128 {
        self.height
    }

    pub fn c4(&self) -> i128 {
        self.c4
    }

    pub fn model(&self) -> Model {
        Model::short(self.a, self.b)
    }

    /// Whether the curve lies in the family at height parameter `X`.
    pub fn within(&self, bounds: &HeightBox) -> bool {
        bounds.contains(self.a, self.b)
    }

    /// Primes dividing the discriminant, ascending.
    pub fn bad_primes(&self) -> Vec<u64> {
        factor(self.delta).into_iter().map(|(p, _)| p).collect()
    }

    /// Reduction data at `p`.
    ///
    /// For `p >= 5` the short model is minimal and additive reduction is
    /// exactly `p | gcd(A, B)`. At 2 and 3 the type and conductor exponent
    /// come from Tate's algorithm.
    pub fn local_data(&self, p: u64) -> LocalData {
        let v_delta = valuation_opt(self.delta, p).unwrap_or(0);
        let v_j = valuation_opt(self.c4, p).map(|v| 3 * v as i64 - v_delta as i64);
        if p == 2 || p == 3 {
            let out = tate(self.model(), p);
            let reduction = match out.kodaira {
                Kodaira::I0 => Reduction::Good,
                Kodaira::In(_) => Reduction::Multiplicative,
                _ => Reduction::Additive,
            };
            return LocalData {
                p,
                v_delta,
                v_j,
                reduction,
                cond_exp_bound: out.conductor_exponent,
            };
        }
        let pp = p as i128;
        let reduction = if v_delta == 0 {
            Reduction::Good
        } else if gcd_i128(self.a as i128, self.b as i128) % pp as u128 == 0 {
            Reduction::Additive
        } else {
            Reduction::Multiplicative
        };
        let cond_exp_bound = match reduction {
            Reduction::Good => 0,
            Reduction::Multiplicative => 1,
            Reduction::Additive => 2,
        };
        LocalData { p, v_delta, v_j, reduction, cond_exp_bound }
    }

    /// Local data at every prime dividing the discriminant.
    pub fn bad_local_data(&self) -> Vec<LocalData> {
        self.bad_primes().into_iter().map(|p| self.local_data(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reduction {
    Good,
    Multiplicative,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalData {
    pub p: u64,
    /// `v_p` of the model discriminant `-16(4A^3 + 27B^2)`.
    pub v_delta: u32,
    /// `v_p(j) = 3 v_p(c4) - v_p(disc)`; `None` when `j = 0`.
    pub v_j: Option<i64>,
    pub reduction: Reduction,
    /// Upper bound for the conductor exponent at `p` (exact where computed
    /// by Tate's algorithm).
    pub cond_exp_bound: u32,
}

impl LocalData {
    /// Whether `ell | v_p(j)`, with `v_p(0)` counted as divisible.
    pub fn ell_divides_v_j(&self, ell: u64) -> bool {
        match self.v_j {
            None => true,
            Some(v) => v.rem_euclid(ell as i64) == 0,
        }
    }
}

/// Curves in a closed range of `A` values, lexicographic in `(A, B)`.
pub struct CurveIter {
    bounds: HeightBox,
    a: i64,
    a_end: i64,
    b: i64,
}

impl Iterator for CurveIter {
    type Item = CurveRecord;

    fn next(&mut self) -> Option<CurveRecord> {
        while self.a <= self.a_end {
            while self.b <= self.bounds.b_max {
                let (a, b) = (self.a, self.b);
                self.b += 1;
                let delta = discriminant(a, b);
                if delta != 0 && is_minimal_pair(a, b) {
                    return Some(CurveRecord::from_parts(a, b, delta));
                }
            }
            self.a += 1;
            self.b = -self.bounds.b_max;
        }
        None
    }
}

/// Enumerates the family at height `X` in lexicographic `(A, B)` order.
pub fn enumerate_curves(x: f64) -> Result<CurveIter, CurveError> {
    let bounds = HeightBox::new(x)?;
    Ok(enumerate_range(bounds, -bounds.a_max, bounds.a_max))
}

/// The slice of the family with `a_lo <= A <= a_hi`, for splitting the box
/// between workers.
pub fn enumerate_range(bounds: HeightBox, a_lo: i64, a_hi: i64) -> CurveIter {
    CurveIter {
        bounds,
        a: a_lo.max(-bounds.a_max),
        a_end: a_hi.min(bounds.a_max),
        b: -bounds.b_max,
    }
}

// Number of multiples of m in [-n, n].
fn multiples_in(n: i64, m: i64) -> i64 {
    2 * (n / m) + 1
}

/// `#C(X)` without materializing records.
///
/// For each `A`, the `B` values failing minimality are multiples of `p^6`
/// for some prime with `p^4 | A`; they are removed by inclusion-exclusion.
/// The singular pairs `(-3k^2, 2k^3)` are subtracted separately.
pub fn count_curves(x: f64) -> Result<u64, CurveError> {
    let bounds = HeightBox::new(x)?;
    let b_max = bounds.b_max;
    let mut small_primes = Vec::new();
    let mut p = 2i64;
    while p.pow(4) <= bounds.a_max.max(1) || p.saturating_pow(6) <= b_max {
        if crate::arith::is_prime(p as u64) {
            small_primes.push(p);
        }
        p += 1;
    }

    let mut total: i64 = 0;
    let mut obstructing = Vec::new();
    for a in -bounds.a_max..=bounds.a_max {
        obstructing.clear();
        for &p in &small_primes {
            if a % p.pow(4) == 0 && p.saturating_pow(6) <= b_max {
                obstructing.push(p.pow(6));
            }
        }
        // B = 0 is divisible by every p^6; handle it apart from the sieve.
        let zero_ok = !small_primes.iter().any(|&p| a % p.pow(4) == 0);
        let mut nonzero_ok = 2 * b_max;
        for mask in 1u32..(1 << obstructing.len()) {
            let mut m: i64 = 1;
            let mut overflow = false;
            for (i, &q) in obstructing.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    m = match m.checked_mul(q) {
                        Some(v) if v <= b_max => v,
                        _ => {
                            overflow = true;
                            break;
                        }
                    };
                }
            }
            if overflow {
                continue;
            }
            let count = multiples_in(b_max, m) - 1;
            if mask.count_ones() % 2 == 1 {
                nonzero_ok -= count;
            } else {
                nonzero_ok += count;
            }
        }
        total += nonzero_ok + i64::from(zero_ok && a != 0);
    }

    // Singular pairs (A, B) = (-3k^2, 2k^3), k != 0, that passed the sieve.
    let mut k = 1i64;
    while 3 * k * k <= bounds.a_max {
        for kk in [k, -k] {
            let (a, b) = (-3 * kk * kk, 2 * kk * kk * kk);
            if b.abs() <= b_max && is_minimal_pair(a, b) {
                total -= 1;
            }
        }
        k += 1;
    }
    Ok(total as u64)
}

/// Semistable at every prime `p >= 5`: no such prime divides `gcd(A, B)`.
pub fn is_semistable_away_23(curve: &CurveRecord) -> bool {
    semistable_away_23(curve.a, curve.b)
}

pub fn semistable_away_23(a: i64, b: i64) -> bool {
    let mut g = gcd_i128(a as i128, b as i128);
    for p in [2u128, 3] {
        while g > 0 && g % p == 0 {
            g /= p;
        }
    }
    g == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn brute_force_count(a_max: i64, b_max: i64) -> u64 {
        let mut n = 0;
        for a in -a_max..=a_max {
            for b in -b_max..=b_max {
                if 4 * a.pow(3) + 27 * b * b == 0 {
                    continue;
                }
                let minimal = (2..=64i64).all(|p| !(a % p.pow(4) == 0 && b % p.pow(6) == 0));
                if minimal {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn height_one_family() {
        let curves: Vec<_> = enumerate_curves(1.0).unwrap().map(|c| c.key()).collect();
        assert_eq!(
            curves,
            vec![(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
        );
        let e = CurveRecord::new(0, 1).unwrap();
        assert_eq!(e.discriminant(), -432);
        assert_eq!(e.height(), 1);
        assert_eq!(count_curves(1.0), Ok(8));
    }

    #[test]
    fn non_minimal_pairs_rejected() {
        assert_eq!(CurveRecord::new(16, 64), Err(CurveError::NotMinimal(16, 64, 2)));
        assert!(!is_minimal_pair(0, 64));
        assert!(is_minimal_pair(0, 32));
        assert!(!is_minimal_pair(81, 0));
        assert_eq!(CurveRecord::new(-3, 2), Err(CurveError::Singular(-3, 2)));
        assert!(enumerate_curves(4.0).unwrap().all(|c| c.key() != (16, 64)));
    }

    #[test]
    fn height_box_rejects_small_x() {
        assert_eq!(HeightBox::new(0.5), Err(CurveError::HeightTooSmall(0.5)));
        assert!(enumerate_curves(0.99).is_err());
        assert_eq!(HeightBox::new(1.5).unwrap(), HeightBox { a_max: 2, b_max: 3 });
        assert_eq!(HeightBox::new(10.0).unwrap(), HeightBox { a_max: 100, b_max: 1000 });
    }

    #[test]
    fn count_matches_brute_force() {
        for x in [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0] {
            let bx = HeightBox::new(x).unwrap();
            let expected = brute_force_count(bx.a_max, bx.b_max);
            assert_eq!(count_curves(x).unwrap(), expected, "X = {x}");
            assert_eq!(enumerate_curves(x).unwrap().count() as u64, expected, "X = {x}");
        }
    }

    #[test]
    fn discriminant_bound_and_height() {
        for x in [1.0f64, 2.0, 3.0] {
            let x6 = libm::pow(x, 6.0) as i128;
            for c in enumerate_curves(x).unwrap() {
                assert!(c.height() <= x6);
                assert!(c.discriminant().abs() <= 496 * x6);
                assert!(c.discriminant().abs() <= 496 * c.height());
            }
        }
    }

    #[test]
    fn local_data_examples() {
        let e = CurveRecord::new(1, 1).unwrap();
        let at31 = e.local_data(31);
        assert_eq!(at31.v_delta, 1);
        assert_eq!(at31.reduction, Reduction::Multiplicative);
        assert_eq!(at31.cond_exp_bound, 1);
        assert_eq!(at31.v_j, Some(-1));
        let at7 = e.local_data(7);
        assert_eq!(at7.reduction, Reduction::Good);
        assert_eq!(at7.cond_exp_bound, 0);
        let f = CurveRecord::new(5, 5).unwrap();
        assert_eq!(f.discriminant(), -18800);
        assert_eq!(f.local_data(5).reduction, Reduction::Additive);
        assert_eq!(f.local_data(5).cond_exp_bound, 2);
        // j = 0 curves have no finite v_p(j).
        assert_eq!(CurveRecord::new(0, 1).unwrap().local_data(3).v_j, None);
        assert!(CurveRecord::new(0, 1).unwrap().local_data(7).ell_divides_v_j(5));
    }

    #[test]
    fn semistability_filter() {
        let ss = |a, b| is_semistable_away_23(&CurveRecord::new(a, b).unwrap());
        assert!(ss(1, 1));
        assert!(!ss(5, 5));
        assert!(ss(0, 1));
        assert!(ss(0, 24));
        assert!(!ss(0, 10));
        assert!(ss(-12, 0));
        assert!(!ss(7, 0));
    }

    #[test]
    fn semistable_filter_agrees_with_local_data() {
        for c in enumerate_curves(3.0).unwrap() {
            let additive_away = c
                .bad_local_data()
                .iter()
                .any(|l| l.p >= 5 && l.reduction == Reduction::Additive);
            assert_eq!(is_semistable_away_23(&c), !additive_away, "{:?}", c.key());
        }
    }

    #[test]
    fn local_partition_and_tate_regime() {
        for c in enumerate_curves(4.0).unwrap() {
            for l in c.bad_local_data() {
                if l.p >= 5 {
                    assert_eq!(l.reduction == Reduction::Good, l.v_delta == 0);
                    if l.reduction == Reduction::Multiplicative {
                        assert!(l.v_j.unwrap() < 0, "{:?} at {}", c.key(), l.p);
                    }
                }
                match l.reduction {
                    Reduction::Good => assert_eq!(l.cond_exp_bound, 0),
                    Reduction::Multiplicative => assert_eq!(l.cond_exp_bound, 1),
                    Reduction::Additive => {
                        let cap = match l.p {
                            2 => 8,
                            3 => 5,
                            _ => 2,
                        };
                        assert!(l.cond_exp_bound >= 2 && l.cond_exp_bound <= cap);
                    }
                }
            }
        }
    }

    #[test]
    fn enumerate_range_splits_cover_the_box() {
        let bx = HeightBox::new(3.0).unwrap();
        let whole: Vec<_> = enumerate_curves(3.0).unwrap().collect();
        let mut pieces = Vec::new();
        for lo in (-bx.a_max..=bx.a_max).step_by(4) {
            pieces.extend(enumerate_range(bx, lo, lo + 3));
        }
        assert_eq!(whole, pieces);
    }

    #[test]
    fn count_is_monotone() {
        let mut last = 0;
        for i in 2..=24 {
            let n = count_curves(i as f64 / 2.0).unwrap();
            assert!(n >= last);
            last = n;
        }
    }
}
