//! Serre levels, division-field discriminant bounds and the height
//! thresholds that admit a curve's division field into the counts.
//!
//! Quantities such as `6^3264 * ell^C * prod p^384` are far beyond machine
//! integers, so they are carried as [`ExponentLedger`]s and compared exactly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::One;

use crate::arith::{factor, is_prime, ln_biguint};
use crate::curves::{is_semistable_away_23, CurveRecord, Reduction};
use crate::galois::SurjectivityVerdict;

/// Exponent bound at an additive prime 2 or 3: `#GL2(F_3) * 68`.
pub const ADDITIVE_23_EXPONENT: u64 = 3264;

/// Multiplier of `log 496` in the level threshold.
const LEVEL_CONSTANT: u64 = 496;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LevelError {
    #[error("curve ({0}, {1}) has additive reduction at a prime >= 5")]
    NotSemistable(i64, i64),
    #[error("curve ({0}, {1}) is not certified surjective")]
    NotCertified(i64, i64),
    #[error("additive reduction at p = {p} >= 5 has no semistable discriminant exponent")]
    AdditiveAwayFrom23 { p: u64 },
    #[error("ell must be a prime >= 5, got {0}")]
    BadEll(u64),
    #[error("malformed ledger {0:?}")]
    Parse(String),
}

/// A positive integer stored as its factorization `prod p^e`.
///
/// Equality is structural, which coincides with equality of values because
/// keys are primes and zero exponents are never stored. Ordering compares
/// the represented integers exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ExponentLedger {
    factors: BTreeMap<u64, u64>,
}

impl ExponentLedger {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn from_factors<I: IntoIterator<Item = (u64, u64)>>(factors: I) -> Self {
        let mut ledger = Self::one();
        for (p, e) in factors {
            ledger.multiply(p, e);
        }
        ledger
    }

    /// Multiplies by `p^e`.
    pub fn multiply(&mut self, p: u64, e: u64) {
        if e > 0 {
            *self.factors.entry(p).or_insert(0) += e;
        }
    }

    pub fn exponent(&self, p: u64) -> u64 {
        self.factors.get(&p).copied().unwrap_or(0)
    }

    pub fn factors(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.factors.iter().map(|(&p, &e)| (p, e))
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn value(&self) -> BigUint {
        self.factors
            .iter()
            .fold(BigUint::one(), |acc, (&p, &e)| acc * BigUint::from(p).pow(e as u32))
    }

    pub fn log2(&self) -> f64 {
        self.factors.iter().map(|(&p, &e)| e as f64 * libm::log2(p as f64)).sum()
    }

    /// Exact comparison with an integer; the big-integer product is only
    /// formed when the logarithms are within one bit of each other.
    pub fn cmp_value(&self, x: &BigUint) -> Ordering {
        let lhs = self.log2();
        let rhs = ln_biguint(x) / core::f64::consts::LN_2;
        if lhs + 1.0 < rhs {
            Ordering::Less
        } else if lhs > rhs + 1.0 {
            Ordering::Greater
        } else {
            self.value().cmp(x)
        }
    }

    pub fn le_value(&self, x: &BigUint) -> bool {
        self.cmp_value(x) != Ordering::Greater
    }

    /// Whether `self` divides `other`.
    pub fn divides(&self, other: &ExponentLedger) -> bool {
        self.factors.iter().all(|(&p, &e)| other.exponent(p) >= e)
    }
}

impl Ord for ExponentLedger {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let (l, r) = (self.log2(), other.log2());
        if l + 1.0 < r {
            Ordering::Less
        } else if l > r + 1.0 {
            Ordering::Greater
        } else {
            self.value().cmp(&other.value())
        }
    }
}

impl PartialOrd for ExponentLedger {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `p^e` factors joined by `;`, ascending in `p`; the empty product is `1`.
impl fmt::Display for ExponentLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, (p, e)) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{p}^{e}")?;
        }
        Ok(())
    }
}

impl FromStr for ExponentLedger {
    type Err = LevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LevelError::Parse(String::from(s));
        if s == "1" {
            return Ok(Self::one());
        }
        let mut ledger = Self::one();
        let mut last = 0u64;
        for part in s.split(';') {
            let (p, e) = part.split_once('^').ok_or_else(bad)?;
            let p: u64 = p.parse().map_err(|_| bad())?;
            let e: u64 = e.parse().map_err(|_| bad())?;
            if p <= last || e == 0 || !is_prime(p) {
                return Err(bad());
            }
            last = p;
            ledger.multiply(p, e);
        }
        Ok(ledger)
    }
}

/// `#GL2(F_ell) = (ell^2 - 1)(ell^2 - ell)`.
pub fn gl2_order(ell: u64) -> u64 {
    (ell * ell - 1) * (ell * ell - ell)
}

/// `(ell - 1)/ell * #GL2(F_ell)`: the discriminant exponent at a
/// multiplicative prime where the division field ramifies.
pub fn tame_exponent(ell: u64) -> u64 {
    gl2_order(ell) / ell * (ell - 1)
}

/// The exponent of `p` in the discriminant of the `ell`-division field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MExponent {
    Exact(u64),
    /// Only an upper bound is known.
    BoundOnly(u64),
}

impl MExponent {
    pub fn bound(&self) -> u64 {
        match *self {
            MExponent::Exact(v) | MExponent::BoundOnly(v) => v,
        }
    }
}

fn check_ell(ell: u64) -> Result<(), LevelError> {
    if ell < 5 || !is_prime(ell) {
        return Err(LevelError::BadEll(ell));
    }
    Ok(())
}

/// Discriminant exponent of the `ell`-division field at `p`, assuming the
/// mod-`ell` image is all of `GL2(F_ell)`.
///
/// At a multiplicative prime the exponent is `d (ell - 1)/ell` with
/// `d = #GL2(F_ell)` when `ell` does not divide `v_p(j)`, and zero
/// otherwise.
pub fn m_exponent(curve: &CurveRecord, ell: u64, p: u64, c_ell_exponent: u64) -> Result<MExponent, LevelError> {
    check_ell(ell)?;
    if p == ell {
        return Ok(MExponent::BoundOnly(c_ell_exponent));
    }
    let local = curve.local_data(p);
    match local.reduction {
        Reduction::Good => Ok(MExponent::Exact(0)),
        Reduction::Multiplicative => {
            if local.ell_divides_v_j(ell) {
                Ok(MExponent::Exact(0))
            } else {
                Ok(MExponent::Exact(tame_exponent(ell)))
            }
        }
        Reduction::Additive if p == 2 || p == 3 => Ok(MExponent::BoundOnly(ADDITIVE_23_EXPONENT)),
        Reduction::Additive => Err(LevelError::AdditiveAwayFrom23 { p }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelData {
    pub ell: u64,
    /// Upper bound for the Serre level (prime-to-`ell` Artin conductor).
    pub serre_level_upper: ExponentLedger,
    /// No additive reduction at 2 or 3, so the level is exact.
    pub serre_level_exact_away_23: bool,
    /// Upper bound for the absolute discriminant of the division field.
    pub disc_bound: ExponentLedger,
    pub c_ell_exponent: u64,
}

fn check_family(curve: &CurveRecord, verdict: &SurjectivityVerdict) -> Result<(), LevelError> {
    if !is_semistable_away_23(curve) {
        return Err(LevelError::NotSemistable(curve.a(), curve.b()));
    }
    if !verdict.is_certified() {
        return Err(LevelError::NotCertified(curve.a(), curve.b()));
    }
    Ok(())
}

/// Serre level bound and exactness flag.
///
/// Multiplicative `p >= 5` contributes `p` unless `ell | v_p(disc)`; at 2
/// and 3 the conductor exponent of the curve is used; `ell` itself is
/// excluded.
pub fn serre_level(
    curve: &CurveRecord,
    ell: u64,
    verdict: &SurjectivityVerdict,
) -> Result<(ExponentLedger, bool), LevelError> {
    check_ell(ell)?;
    check_family(curve, verdict)?;
    let mut ledger = ExponentLedger::one();
    let mut exact = true;
    for local in curve.bad_local_data() {
        let p = local.p;
        if p == ell {
            continue;
        }
        let e = if p == 2 || p == 3 {
            if local.reduction == Reduction::Additive {
                exact = false;
            }
            local.cond_exp_bound
        } else {
            match local.reduction {
                Reduction::Multiplicative if local.v_delta as u64 % ell != 0 => 1,
                _ => 0,
            }
        };
        ledger.multiply(p, e as u64);
    }
    Ok((ledger, exact))
}

/// Discriminant bound of the division field, assembled prime by prime.
pub fn disc_bound(
    curve: &CurveRecord,
    ell: u64,
    verdict: &SurjectivityVerdict,
    c_ell_exponent: u64,
) -> Result<ExponentLedger, LevelError> {
    check_ell(ell)?;
    check_family(curve, verdict)?;
    let mut ledger = ExponentLedger::one();
    ledger.multiply(ell, c_ell_exponent);
    for p in curve.bad_primes() {
        if p == ell {
            continue;
        }
        ledger.multiply(p, m_exponent(curve, ell, p, c_ell_exponent)?.bound());
    }
    Ok(ledger)
}

pub fn level_data(
    curve: &CurveRecord,
    ell: u64,
    verdict: &SurjectivityVerdict,
    c_ell_exponent: u64,
) -> Result<LevelData, LevelError> {
    let (serre_level_upper, serre_level_exact_away_23) = serre_level(curve, ell, verdict)?;
    let disc_bound = disc_bound(curve, ell, verdict, c_ell_exponent)?;
    Ok(LevelData { ell, serre_level_upper, serre_level_exact_away_23, disc_bound, c_ell_exponent })
}

/// `6^3264 * ell^C * |disc|^((ell-1)/ell * #GL2)`: the uniform bound every
/// assembled [`disc_bound`] must respect.
pub fn blanket_disc_bound(curve: &CurveRecord, ell: u64, c_ell_exponent: u64) -> ExponentLedger {
    let k = tame_exponent(ell);
    let mut ledger = ExponentLedger::from_factors([
        (2, ADDITIVE_23_EXPONENT),
        (3, ADDITIVE_23_EXPONENT),
        (ell, c_ell_exponent),
    ]);
    for (p, v) in factor(curve.discriminant()) {
        ledger.multiply(p, v as u64 * k);
    }
    ledger
}

/// `|disc|` as a ledger.
pub fn discriminant_ledger(curve: &CurveRecord) -> ExponentLedger {
    ExponentLedger::from_factors(factor(curve.discriminant()).into_iter().map(|(p, v)| (p, v as u64)))
}

/// `Y1(X) = (X/496)^(1/6)`.
pub fn threshold_y1(x: &BigUint) -> f64 {
    libm::exp((ln_biguint(x) - libm::log(LEVEL_CONSTANT as f64)) / 6.0)
}

/// The exponent `ell / (6 (ell - 1) #GL2(F_ell))` in lowest terms.
pub fn y2_exponent(ell: u64) -> Ratio<u64> {
    Ratio::new(ell, 6 * (ell - 1) * gl2_order(ell))
}

/// `Y2(X) = (X / (6^3264 ell^C))^(ell / (6 (ell-1) #GL2))`, evaluated in
/// log space.
pub fn threshold_y2(x: &BigUint, ell: u64, c_ell_exponent: u64) -> f64 {
    let base = ADDITIVE_23_EXPONENT as f64 * libm::log(6.0) + c_ell_exponent as f64 * libm::log(ell as f64);
    let e = y2_exponent(ell);
    libm::exp((ln_biguint(x) - base) * *e.numer() as f64 / *e.denom() as f64)
}

/// Smallest integer height covering `Y` (with a little slack for rounding).
pub fn required_height(y: f64) -> u64 {
    let c = libm::ceil(y - 1e-9);
    if c < 1.0 {
        1
    } else {
        c as u64
    }
}

/// Ledger-minimum of a nonempty collection.
pub fn ledger_min<'a, I: IntoIterator<Item = &'a ExponentLedger>>(items: I) -> Option<ExponentLedger> {
    items.into_iter().min().cloned()
}

/// Parses products like `496`, `2^2304*6^3264*5^960` into an integer.
pub fn parse_product(s: &str) -> Option<BigUint> {
    let mut acc = BigUint::one();
    for term in s.trim().split('*') {
        let term = term.trim();
        let (base, exp) = match term.split_once('^') {
            Some((b, e)) => (b.trim(), e.trim().parse::<u32>().ok()?),
            None => (term, 1),
        };
        let base = BigUint::parse_bytes(base.as_bytes(), 10)?;
        acc *= base.pow(exp);
    }
    (acc.bits() > 0).then_some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::enumerate_curves;
    use crate::galois::TraceEngine;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn certified(a: i64, b: i64) -> (CurveRecord, SurjectivityVerdict) {
        let c = CurveRecord::new(a, b).unwrap();
        let v = TraceEngine::new(1000).certify(&c, 5, 1000).unwrap();
        (c, v)
    }

    #[test]
    fn group_orders() {
        assert_eq!(gl2_order(5), 480);
        assert_eq!(gl2_order(7), 2016);
        assert_eq!(gl2_order(3), 48);
        assert_eq!(gl2_order(3) * 68, ADDITIVE_23_EXPONENT);
        assert_eq!(tame_exponent(5), 384);
    }

    #[test]
    fn m_exponent_examples() {
        let e = CurveRecord::new(1, 1).unwrap();
        assert_eq!(m_exponent(&e, 5, 31, 960), Ok(MExponent::Exact(384)));
        assert_eq!(m_exponent(&e, 5, 7, 960), Ok(MExponent::Exact(0)));
        assert_eq!(m_exponent(&e, 5, 5, 960), Ok(MExponent::BoundOnly(960)));
        assert_eq!(m_exponent(&e, 5, 2, 960), Ok(MExponent::BoundOnly(3264)));
        let f = CurveRecord::new(5, 5).unwrap();
        assert_eq!(m_exponent(&f, 7, 5, 0), Err(LevelError::AdditiveAwayFrom23 { p: 5 }));
    }

    #[test]
    fn multiplicative_prime_with_ell_dividing_vj() {
        // Search the small family for a multiplicative p >= 7 with
        // 5 | v_p(disc); there the division field is unramified.
        let mut found = false;
        for c in enumerate_curves(30.0).unwrap().filter(|c| c.a() % 7 != 0) {
            let d = c.discriminant();
            if d % 16807 == 0 && d % 117649 != 0 {
                let l = c.local_data(7);
                assert_eq!(l.reduction, Reduction::Multiplicative);
                assert_eq!(m_exponent(&c, 5, 7, 960), Ok(MExponent::Exact(0)));
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn serre_level_of_496_curve() {
        let (e, v) = certified(1, 1);
        assert!(v.is_certified());
        let (ledger, exact) = serre_level(&e, 5, &v).unwrap();
        assert_eq!(ledger.exponent(31), 1);
        assert_eq!(ledger.exponent(5), 0);
        // Additive at 2 with conductor exponent 4: level 2^4 * 31 = 496.
        assert_eq!(ledger.to_string(), "2^4;31^1");
        assert!(!exact);
        let disc = disc_bound(&e, 5, &v, 960).unwrap();
        assert_eq!(disc.to_string(), "2^3264;5^960;31^384");
    }

    #[test]
    fn level_preconditions() {
        let (cm, v) = certified(0, 1);
        assert_eq!(serre_level(&cm, 5, &v), Err(LevelError::NotCertified(0, 1)));
        let (f, v) = certified(5, 5);
        assert_eq!(serre_level(&f, 5, &v), Err(LevelError::NotSemistable(5, 5)));
    }

    #[test]
    fn ledger_text_roundtrip_and_errors() {
        let l = ExponentLedger::from_factors([(31, 384), (2, 3264), (5, 960)]);
        assert_eq!(l.to_string(), "2^3264;5^960;31^384");
        assert_eq!("2^3264;5^960;31^384".parse::<ExponentLedger>().unwrap(), l);
        assert_eq!("1".parse::<ExponentLedger>().unwrap(), ExponentLedger::one());
        assert!("4^2".parse::<ExponentLedger>().is_err());
        assert!("3^1;2^1".parse::<ExponentLedger>().is_err());
        assert!("2^0".parse::<ExponentLedger>().is_err());
        assert!("".parse::<ExponentLedger>().is_err());
    }

    #[test]
    fn ledger_comparisons_are_exact() {
        let x = ExponentLedger::from_factors([(2, 4), (31, 1)]);
        assert_eq!(x.cmp_value(&BigUint::from(496u32)), Ordering::Equal);
        assert_eq!(x.cmp_value(&BigUint::from(495u32)), Ordering::Greater);
        assert_eq!(x.cmp_value(&BigUint::from(497u32)), Ordering::Less);
        // 3^3264 vs 3^3264 - 1 and + 1: within one bit, decided exactly.
        let big = ExponentLedger::from_factors([(3, 3264)]);
        let v = big.value();
        assert!(big.le_value(&v));
        assert!(!big.le_value(&(&v - 1u32)));
        assert!(big.le_value(&(&v + 1u32)));
        let a = ExponentLedger::from_factors([(2, 5)]);
        let b = ExponentLedger::from_factors([(31, 1)]);
        assert!(a > b);
        assert_eq!(ledger_min([&a, &b]), Some(b));
    }

    #[test]
    fn thresholds() {
        assert!((threshold_y1(&BigUint::from(496u32)) - 1.0).abs() < 1e-12);
        assert!((threshold_y1(&BigUint::from(496u32 * 64)) - 2.0).abs() < 1e-12);
        assert!((threshold_y1(&BigUint::from(496_000_000u64)) - 10.0).abs() < 1e-11);
        assert_eq!(y2_exponent(5), Ratio::new(1, 2304));
        let base = parse_product("6^3264*5^960").unwrap();
        assert!((threshold_y2(&base, 5, 960) - 1.0).abs() < 1e-9);
        let x = parse_product("2^2304*6^3264*5^960").unwrap();
        assert!((threshold_y2(&x, 5, 960) - 2.0).abs() < 1e-9);
        assert_eq!(required_height(1.0000000000001), 1);
        assert_eq!(required_height(1.2), 2);
    }

    #[test]
    fn product_parser() {
        assert_eq!(parse_product("496"), Some(BigUint::from(496u32)));
        assert_eq!(parse_product("2^4*31"), Some(BigUint::from(496u32)));
        assert_eq!(parse_product(" 496 * 2^6 "), Some(BigUint::from(31744u32)));
        assert_eq!(parse_product("0"), None);
        assert_eq!(parse_product("x"), None);
    }

    #[test]
    fn disc_bound_below_blanket_on_small_family() {
        let engine = TraceEngine::new(1000);
        for c in enumerate_curves(3.0).unwrap() {
            let v = engine.certify(&c, 5, 1000).unwrap();
            if !v.is_certified() || !is_semistable_away_23(&c) {
                continue;
            }
            let data = level_data(&c, 5, &v, 960).unwrap();
            assert!(data.disc_bound <= blanket_disc_bound(&c, 5, 960));
            assert!(data.serre_level_upper.divides(&discriminant_ledger(&c)));
            for (p, e) in data.disc_bound.factors() {
                if p >= 7 {
                    assert!(e == 0 || e == tame_exponent(5));
                    assert_eq!(e % 4, 0);
                }
            }
            for local in c.bad_local_data() {
                assert!(data.serre_level_upper.exponent(local.p) <= local.cond_exp_bound as u64);
            }
        }
    }

    proptest! {
        #[test]
        fn thresholds_increase(a in 1u64..1_000_000, b in 1u64..1_000_000) {
            prop_assume!(a < b);
            let (x, y) = (BigUint::from(a), BigUint::from(b));
            prop_assert!(threshold_y1(&x) < threshold_y1(&y));
            let scale = parse_product("6^3264*5^960").unwrap();
            prop_assert!(threshold_y2(&(&x * &scale), 5, 960) < threshold_y2(&(&y * &scale), 5, 960));
        }

        #[test]
        fn ledger_order_matches_values(xs in proptest::collection::vec((0usize..6, 0u64..40), 0..6),
                                       ys in proptest::collection::vec((0usize..6, 0u64..40), 0..6)) {
            let primes = [2u64, 3, 5, 7, 11, 13];
            let a = ExponentLedger::from_factors(xs.iter().map(|&(i, e)| (primes[i], e)));
            let b = ExponentLedger::from_factors(ys.iter().map(|&(i, e)| (primes[i], e)));
            prop_assert_eq!(a.cmp(&b), a.value().cmp(&b.value()));
            prop_assert_eq!(a.to_string().parse::<ExponentLedger>().unwrap(), a);
        }
    }
}
