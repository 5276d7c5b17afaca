//! Integer and modular primitives: prime tables, valuations, quadratic
//! residue symbols, small-integer factorization and the zeta constants
//! behind the curve-count densities.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("prime bound must be at least 2, got {0}")]
    BoundTooSmall(u64),
    #[error("valuation of zero is infinite")]
    ZeroValuation,
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("zeta precision must be between 1 and 30 digits, got {0}")]
    DigitsOutOfRange(u32),
}

/// All primes up to `bound`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    bound: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }

    /// Primes in the closed interval `[lo, hi]`.
    pub fn range(&self, lo: u64, hi: u64) -> &[u64] {
        let start = self.primes.partition_point(|&p| p < lo);
        let end = self.primes.partition_point(|&p| p <= hi);
        if start >= end {
            &[]
        } else {
            &self.primes[start..end]
        }
    }
}

/// Sieve of Eratosthenes.
pub fn sieve_primes(bound: u64) -> Result<PrimeTable, ArithError> {
    if bound < 2 {
        return Err(ArithError::BoundTooSmall(bound));
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    Ok(PrimeTable { bound, primes })
}

/// Trial-division primality test; only used on small inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 || n % 3 == 0 {
        return false;
    }
    let mut d = 5u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 || n % (d + 2) == 0 {
            return false;
        }
        d += 6;
    }
    true
}

/// `v_p(n)`: the exponent of `p` in `n`.
pub fn valuation(n: i128, p: u64) -> Result<u32, ArithError> {
    if n == 0 {
        return Err(ArithError::ZeroValuation);
    }
    if p < 2 {
        return Err(ArithError::NotPrime(p));
    }
    let p = p as u128;
    let mut m = n.unsigned_abs();
    let mut k = 0;
    while m % p == 0 {
        m /= p;
        k += 1;
    }
    Ok(k)
}

/// Valuation that treats zero as having no finite exponent.
pub(crate) fn valuation_opt(n: i128, p: u64) -> Option<u32> {
    valuation(n, p).ok()
}

pub(crate) fn gcd_i128(a: i128, b: i128) -> u128 {
    a.unsigned_abs().gcd(&b.unsigned_abs())
}

/// Legendre symbol `(a/p)` for an odd prime `p`, as -1, 0 or +1.
///
/// Computed with the binary reciprocity algorithm; agrees with Euler's
/// criterion `a^((p-1)/2) mod p`.
pub fn legendre(a: i64, p: u64) -> i8 {
    debug_assert!(p % 2 == 1, "legendre symbol needs an odd modulus");
    let mut a = a.rem_euclid(p as i64) as u64;
    let mut n = p;
    let mut sign = 1i8;
    while a != 0 {
        let tz = a.trailing_zeros();
        a >>= tz;
        if tz % 2 == 1 && (n % 8 == 3 || n % 8 == 5) {
            sign = -sign;
        }
        if a % 4 == 3 && n % 4 == 3 {
            sign = -sign;
        }
        core::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        sign
    } else {
        0
    }
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    let m128 = m as u128;
    let mut acc = 1u128 % m128;
    let mut b = (base % m) as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as u64
}

/// Multiplicative inverse modulo a prime.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a % p, p - 2, p)
}

/// Prime factorization of `|n|` by trial division, ascending primes.
///
/// Adequate for the discriminants met at desk-scale heights
/// (`|n| <= 496 X^6`).
pub fn factor(n: i128) -> Vec<(u64, u32)> {
    let mut m = n.unsigned_abs();
    let mut out = Vec::new();
    if m < 2 {
        return out;
    }
    for p in [2u128, 3] {
        let mut k = 0;
        while m % p == 0 {
            m /= p;
            k += 1;
        }
        if k > 0 {
            out.push((p as u64, k));
        }
    }
    let mut d = 5u128;
    while d * d <= m {
        for q in [d, d + 2] {
            let mut k = 0;
            while m % q == 0 {
                m /= q;
                k += 1;
            }
            if k > 0 {
                out.push((q as u64, k));
            }
        }
        d += 6;
    }
    if m > 1 {
        out.push((m as u64, 1));
    }
    out
}

/// The two zeta values behind the curve densities, with derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaConstants {
    pub digits: u32,
    pub zeta10: f64,
    pub zeta2: f64,
    /// `4 / zeta(10)`: leading coefficient of the curve count in `X^5`.
    pub c_density: f64,
    /// `zeta(10) / zeta(2)`.
    pub c_semistable: f64,
    /// `zeta(10)` rounded to `digits` decimals.
    pub zeta10_decimal: String,
    /// `zeta(2)` rounded to `digits` decimals.
    pub zeta2_decimal: String,
}

const ZETA_GUARD_DIGITS: u32 = 15;
const ZETA_DIRECT_TERMS: u64 = 1000;

// Even-index Bernoulli numbers B_2 .. B_14 as (numerator, denominator).
const BERNOULLI_EVEN: [(i64, u64); 7] = [
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
];

/// `zeta(s) * 10^(digits + guard)` as a fixed-point integer, together with
/// a rigorous bound on the absolute error in the same units.
///
/// The first `N - 1` terms are summed directly; the tail `sum_{n >= N}`
/// uses Euler-Maclaurin, whose remainder for `n^-s` is bounded by the
/// first omitted correction term.
pub(crate) fn zeta_fixed(s: u32, digits: u32) -> (BigInt, BigUint) {
    assert!(s >= 2);
    let prec = digits + ZETA_GUARD_DIGITS;
    let scale = BigUint::from(10u32).pow(prec);
    let n_big = BigUint::from(ZETA_DIRECT_TERMS);

    let mut sum = BigUint::zero();
    for n in 1..ZETA_DIRECT_TERMS {
        sum += &scale / BigUint::from(n).pow(s);
    }
    let mut total = BigInt::from(sum);
    // Each floored term loses less than one unit.
    let mut error_units = BigUint::from(ZETA_DIRECT_TERMS);

    // Integral term N^(1-s)/(s-1) and the half-term N^-s/2.
    total += BigInt::from(&scale / (BigUint::from(s - 1) * n_big.pow(s - 1)));
    total += BigInt::from(&scale / (BigUint::from(2u32) * n_big.pow(s)));
    error_units += 2u32;

    // Corrections B_2k/(2k)! * s(s+1)...(s+2k-2) * N^(1-s-2k).
    let mut factorial = BigUint::one();
    let mut rising = BigUint::one();
    let mut rising_len = 0u32;
    let last = BERNOULLI_EVEN.len() - 1;
    for (k, &(num, den)) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2 * (k as u32 + 1);
        factorial *= BigUint::from(two_k - 1) * BigUint::from(two_k);
        while rising_len < two_k - 1 {
            rising *= BigUint::from(s + rising_len);
            rising_len += 1;
        }
        let denom = BigUint::from(den) * &factorial * n_big.pow(s + two_k - 1);
        let magnitude = &scale * BigUint::from(num.unsigned_abs()) * &rising / denom;
        if k == last {
            // First omitted term: bounds the remainder.
            error_units += magnitude + 1u32;
        } else {
            let signed = BigInt::from(magnitude);
            if num < 0 {
                total -= signed;
            } else {
                total += signed;
            }
            error_units += 1u32;
        }
    }
    (total, error_units)
}

/// Rounds a fixed-point value with `prec` fractional digits to `digits`
/// fractional digits and renders it as a decimal string.
fn fixed_to_decimal(value: &BigInt, prec: u32, digits: u32) -> String {
    let drop = BigInt::from(10u32).pow(prec - digits);
    let half = &drop / 2;
    let shifted: BigInt = value + half;
    let rounded = shifted.div_floor(&drop);
    let unit = BigInt::from(10u32).pow(digits);
    let (int_part, frac_part) = rounded.div_mod_floor(&unit);
    let mut out = String::new();
    let frac = frac_part.abs().to_str_radix(10);
    let _ = write!(out, "{}.", int_part);
    for _ in frac.len()..digits as usize {
        out.push('0');
    }
    out.push_str(&frac);
    out
}

fn fixed_to_f64(value: &BigInt, prec: u32) -> f64 {
    let s = fixed_to_decimal(value, prec, prec);
    s.parse::<f64>().unwrap_or(f64::NAN)
}

/// `zeta(10)` and `zeta(2)` by series summation, correct to `digits`
/// decimal places (`1 <= digits <= 30`).
pub fn zeta_constants(digits: u32) -> Result<ZetaConstants, ArithError> {
    if digits == 0 || digits > 30 {
        return Err(ArithError::DigitsOutOfRange(digits));
    }
    let prec = digits + ZETA_GUARD_DIGITS;
    let (z10, err10) = zeta_fixed(10, digits);
    let (z2, err2) = zeta_fixed(2, digits);
    let tolerance = BigUint::from(10u32).pow(ZETA_GUARD_DIGITS - 2);
    assert!(err10 < tolerance && err2 < tolerance, "zeta tail bound too loose");

    let zeta10 = fixed_to_f64(&z10, prec);
    let zeta2 = fixed_to_f64(&z2, prec);
    Ok(ZetaConstants {
        digits,
        zeta10,
        zeta2,
        c_density: 4.0 / zeta10,
        c_semistable: zeta10 / zeta2,
        zeta10_decimal: fixed_to_decimal(&z10, prec, digits),
        zeta2_decimal: fixed_to_decimal(&z2, prec, digits),
    })
}

/// Natural logarithm of a positive big integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return libm::log(x.to_f64().unwrap_or(f64::INFINITY));
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(0.0);
    libm::log(top) + shift as f64 * core::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_division_primes(bound: u64) -> Vec<u64> {
        (2..=bound)
            .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect()
    }

    #[test]
    fn small_sieves() {
        assert_eq!(sieve_primes(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(sieve_primes(2).unwrap().primes(), &[2]);
        assert_eq!(sieve_primes(100).unwrap().len(), 25);
        assert_eq!(sieve_primes(1), Err(ArithError::BoundTooSmall(1)));
        assert_eq!(sieve_primes(0), Err(ArithError::BoundTooSmall(0)));
    }

    #[test]
    fn sieve_matches_trial_division() {
        let table = sieve_primes(100_000).unwrap();
        assert_eq!(table.primes(), trial_division_primes(100_000).as_slice());
    }

    #[test]
    fn prime_range_slices() {
        let table = sieve_primes(200).unwrap();
        assert_eq!(table.range(5, 13), &[5, 7, 11, 13]);
        assert_eq!(table.range(14, 16), &[] as &[u64]);
        assert_eq!(table.range(190, 500), &[191, 193, 197, 199]);
    }

    #[test]
    fn valuations() {
        assert_eq!(valuation(-432, 3), Ok(3));
        assert_eq!(valuation(496, 2), Ok(4));
        assert_eq!(valuation(7, 5), Ok(0));
        assert_eq!(valuation(0, 5), Err(ArithError::ZeroValuation));
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(4, 5), 1);
        assert_eq!(legendre(2, 5), -1);
        assert_eq!(legendre(10, 5), 0);
        assert_eq!(legendre(-1, 7), -1);
        assert_eq!(legendre(-1, 13), 1);
    }

    #[test]
    fn legendre_agrees_with_euler_criterion() {
        for &p in sieve_primes(400).unwrap().primes().iter().skip(1) {
            for a in 0..p {
                let e = pow_mod(a, (p - 1) / 2, p);
                let expected = match e {
                    0 => 0,
                    1 => 1,
                    _ => -1,
                };
                assert_eq!(legendre(a as i64, p), expected, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn factorization() {
        assert_eq!(factor(-496), vec![(2, 4), (31, 1)]);
        assert_eq!(factor(18800), vec![(2, 4), (5, 2), (47, 1)]);
        assert_eq!(factor(1), vec![]);
        assert_eq!(factor(999_999_937), vec![(999_999_937, 1)]);
    }

    #[test]
    fn zeta_values() {
        let z = zeta_constants(12).unwrap();
        assert!(z.zeta10 > 1.0009 && z.zeta10 < 1.0011);
        assert!(z.zeta2 > 1.6449 && z.zeta2 < 1.6450);
        assert_eq!(z.zeta10_decimal, "1.000994575128");
        assert!((z.c_semistable - 0.608_531_731).abs() < 1e-9);
        assert!((z.c_density - 3.996_025_652).abs() < 1e-9);
        assert_eq!(zeta_constants(0), Err(ArithError::DigitsOutOfRange(0)));
        assert_eq!(zeta_constants(31), Err(ArithError::DigitsOutOfRange(31)));
    }

    // pi to 50 decimals, for the closed forms zeta(2) = pi^2/6 and
    // zeta(10) = pi^10/93555.
    const PI_50: &str = "314159265358979323846264338327950288419716939937510";

    fn closed_form(power: u32, denom: u32, digits: u32) -> String {
        let pi = BigInt::parse_bytes(PI_50.as_bytes(), 10).unwrap();
        let pi_scale = BigInt::from(10u32).pow(50);
        let prec = 45;
        let num = pi.pow(power) * BigInt::from(10u32).pow(prec);
        let den = pi_scale.pow(power) * BigInt::from(denom);
        fixed_to_decimal(&(num / den), prec, digits)
    }

    #[test]
    fn zeta_matches_closed_forms_to_30_digits() {
        let z = zeta_constants(30).unwrap();
        assert_eq!(z.zeta10_decimal, closed_form(10, 93555, 30));
        assert_eq!(z.zeta2_decimal, closed_form(2, 6, 30));
        for digits in [5, 12, 20] {
            let z = zeta_constants(digits).unwrap();
            assert_eq!(z.zeta10_decimal, closed_form(10, 93555, digits));
            assert_eq!(z.zeta2_decimal, closed_form(2, 6, digits));
        }
    }

    #[test]
    fn ln_of_big_integers() {
        let x = BigUint::from(2u32).pow(5000);
        assert!((ln_biguint(&x) - 5000.0 * core::f64::consts::LN_2).abs() < 1e-9);
        assert!((ln_biguint(&BigUint::from(496u32)) - libm::log(496.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn valuation_ignores_other_primes(n in -1_000_000i64..1_000_000, pi in 0usize..10, qi in 0usize..10) {
            prop_assume!(n != 0 && pi != qi);
            let primes = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29];
            let (p, q) = (primes[pi], primes[qi]);
            prop_assert_eq!(valuation(n as i128 * q as i128, p), valuation(n as i128, p));
        }

        #[test]
        fn legendre_is_multiplicative(a in 1i64..10_000, b in 1i64..10_000, pi in 1usize..40) {
            let p = sieve_primes(200).unwrap().primes()[pi];
            prop_assume!(a % p as i64 != 0 && b % p as i64 != 0);
            prop_assert_eq!(legendre(a * b, p), legendre(a, p) * legendre(b, p));
        }

        #[test]
        fn sieve_prefix_property(b1 in 2u64..3000, extra in 0u64..3000) {
            let small = sieve_primes(b1).unwrap();
            let large = sieve_primes(b1 + extra).unwrap();
            prop_assert_eq!(small.primes(), &large.primes()[..small.len()]);
        }
    }
}
