//! Joint Frobenius statistics for pairs of curves and the mean-square
//! deviation from a product-Chebotarev model.

use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::arith::{is_prime, sieve_primes};
use crate::curves::{enumerate_curves, CurveRecord};
use crate::galois::{GaloisError, TraceCountTable, TraceEngine};

/// Default cap on ordered pairs for [`mean_square_statistic`].
pub const PAIR_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SieveError {
    #[error("d must be a nonzero residue mod {ell}")]
    ZeroResidue { ell: u64 },
    #[error("ell must be a prime >= 5, got {0}")]
    BadEll(u64),
    #[error("residue {value} is out of range mod {ell}")]
    ResidueRange { value: u64, ell: u64 },
    #[error("{pairs} ordered pairs exceed the budget of {budget}")]
    PairBudget { pairs: u64, budget: u64 },
    #[error("curve height must be at least 1, got {0}")]
    Height(f64),
    #[error(transparent)]
    Galois(#[from] GaloisError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStatConfig {
    pub ell: u64,
    pub t1: u64,
    pub t2: u64,
    /// Nonzero residue mod `ell`.
    pub d: u64,
    pub prime_bound: u64,
    /// Height of the box `C(height)` supplying the pairs.
    pub curve_height: f64,
}

impl PairStatConfig {
    pub fn validate(&self) -> Result<(), SieveError> {
        if self.ell < 5 || !is_prime(self.ell) {
            return Err(SieveError::BadEll(self.ell));
        }
        if self.d % self.ell == 0 {
            return Err(SieveError::ZeroResidue { ell: self.ell });
        }
        for value in [self.t1, self.t2, self.d] {
            if value >= self.ell {
                return Err(SieveError::ResidueRange { value, ell: self.ell });
            }
        }
        if self.curve_height.is_nan() || self.curve_height < 1.0 {
            return Err(SieveError::Height(self.curve_height));
        }
        Ok(())
    }
}

/// Number of primes `p <= x` with `p = d (mod ell)`.
pub fn dirichlet_pi(x: u64, d: u64, ell: u64) -> Result<u64, SieveError> {
    if ell == 0 || d % ell == 0 {
        return Err(SieveError::ZeroResidue { ell });
    }
    if x < 2 {
        return Ok(0);
    }
    let table = sieve_primes(x).expect("x >= 2");
    Ok(table.primes().iter().filter(|&&p| p % ell == d % ell).count() as u64)
}

/// Primes counted by the pair statistic: `p <= X`, `p = d (mod ell)`, `p`
/// odd and of good reduction for both curves, with `a_p(E_i) = t_i`.
///
/// Bad primes are read off the discriminants rather than the conductors,
/// which can only drop primes.
pub fn pair_pi_with(
    engine: &TraceEngine,
    e1: &CurveRecord,
    e2: &CurveRecord,
    cfg: &PairStatConfig,
) -> Result<u64, SieveError> {
    cfg.validate()?;
    let ell = cfg.ell;
    let mut count = 0;
    for &p in engine.primes().iter().take_while(|&&p| p <= cfg.prime_bound) {
        if p % ell != cfg.d || e1.discriminant() % p as i128 == 0 || e2.discriminant() % p as i128 == 0 {
            continue;
        }
        let t1 = engine.trace(e1.a(), e1.b(), p)?.rem_euclid(ell as i64) as u64;
        let t2 = engine.trace(e2.a(), e2.b(), p)?.rem_euclid(ell as i64) as u64;
        count += (t1 == cfg.t1 && t2 == cfg.t2) as u64;
    }
    Ok(count)
}

pub fn pair_pi(e1: &CurveRecord, e2: &CurveRecord, cfg: &PairStatConfig) -> Result<u64, SieveError> {
    pair_pi_with(&TraceEngine::new(cfg.prime_bound), e1, e2, cfg)
}

/// `N(t1, d) N(t2, d) / (ell^3 - ell)^2`: the chance that two independent
/// uniform elements of the `det = d` coset of `GL2(F_ell)` have traces
/// `t1` and `t2`.
pub fn delta_model(ell: u64, t1: u64, t2: u64, d: u64) -> Result<Ratio<u64>, SieveError> {
    if d % ell == 0 {
        return Err(SieveError::ZeroResidue { ell });
    }
    let table = TraceCountTable::new(ell)?;
    let coset = ell * ell * ell - ell;
    Ok(Ratio::new(table.count(t1, d)? * table.count(t2, d)?, coset * coset))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistic {
    pub statistic: f64,
    /// `statistic / X`.
    pub normalized: f64,
    pub n_pairs: u64,
    pub delta: Ratio<u64>,
    pub dirichlet: u64,
}

/// Mean over ordered pairs of `C(height)^2` of
/// `(pi_{E1,E2}(X) - delta pi(X, d, ell))^2`.
///
/// Each curve gets two bitsets over the primes `p = d (mod ell)`, marking
/// good primes with `a_p = t1` and `a_p = t2`; a pair count is then one
/// popcount. The sum is accumulated exactly over the common denominator of
/// `delta`.
pub fn mean_square_statistic(cfg: &PairStatConfig, budget: u64) -> Result<PairStatistic, SieveError> {
    cfg.validate()?;
    let curves: Vec<CurveRecord> = enumerate_curves(cfg.curve_height)
        .map_err(|_| SieveError::Height(cfg.curve_height))?
        .collect();
    let n = curves.len() as u64;
    let pairs = n * n;
    if pairs > budget {
        return Err(SieveError::PairBudget { pairs, budget });
    }
    let ell = cfg.ell;
    let delta = delta_model(ell, cfg.t1, cfg.t2, cfg.d)?;
    let dirichlet = dirichlet_pi(cfg.prime_bound, cfg.d, ell)?;
    let engine = TraceEngine::new(cfg.prime_bound);
    let primes: Vec<u64> = engine
        .primes()
        .iter()
        .copied()
        .take_while(|&p| p <= cfg.prime_bound)
        .filter(|&p| p % ell == cfg.d)
        .collect();
    let words = primes.len().div_ceil(64).max(1);
    let mut first = vec![0u64; words * curves.len()];
    let mut second = vec![0u64; words * curves.len()];
    for (c, e) in curves.iter().enumerate() {
        for (i, &p) in primes.iter().enumerate() {
            if e.discriminant() % p as i128 == 0 {
                continue;
            }
            let t = engine.trace(e.a(), e.b(), p)?.rem_euclid(ell as i64) as u64;
            let bit = 1u64 << (i % 64);
            if t == cfg.t1 {
                first[c * words + i / 64] |= bit;
            }
            if t == cfg.t2 {
                second[c * words + i / 64] |= bit;
            }
        }
    }
    let (num, den) = (*delta.numer() as i128, *delta.denom() as i128);
    let target = num * dirichlet as i128;
    let mut sum: u128 = 0;
    for x in 0..curves.len() {
        let fx = &first[x * words..(x + 1) * words];
        for y in 0..curves.len() {
            let sy = &second[y * words..(y + 1) * words];
            let pi: u32 = fx.iter().zip(sy).map(|(a, b)| (a & b).count_ones()).sum();
            let dev = den * pi as i128 - target;
            sum += (dev * dev) as u128;
        }
    }
    let statistic = if pairs == 0 { 0.0 } else { sum as f64 / (den * den) as f64 / pairs as f64 };
    Ok(PairStatistic {
        statistic,
        normalized: statistic / cfg.prime_bound as f64,
        n_pairs: pairs,
        delta,
        dirichlet,
    })
}
