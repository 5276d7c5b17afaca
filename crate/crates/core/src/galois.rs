//! Frobenius traces, mod-`ell` trace fingerprints and a sound certificate
//! that the mod-`ell` representation of a curve is surjective.

use alloc::vec;
use alloc::vec::Vec;

use crate::arith::{is_prime, legendre, sieve_primes};
use crate::curves::CurveRecord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GaloisError {
    #[error("p = {p} divides the discriminant (bad reduction)")]
    BadReduction { p: u64 },
    #[error("point counting needs a prime p >= 5, got {0}")]
    PrimeTooSmall(u64),
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("ell must be a prime >= 5, got {0}")]
    EllTooSmall(u64),
    #[error("brute-force trace oracle supports ell <= 13, got {0}")]
    EllTooLarge(u64),
    #[error("residue {0} is not a unit mod ell")]
    ZeroDeterminant(u64),
    #[error("fingerprint window bound must be at least 30, got {0}")]
    WindowTooSmall(u64),
    #[error("prime {p} exceeds the trace engine bound {bound}")]
    OutsideEngine { p: u64, bound: u64 },
}

/// Frobenius data at a good prime `p != ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrobeniusSample {
    pub p: u64,
    /// `p + 1 - #E(F_p)`.
    pub ap: i64,
    /// `a_p mod ell`.
    pub t: u64,
    /// `p mod ell`.
    pub d: u64,
}

impl FrobeniusSample {
    pub fn new(p: u64, ap: i64, ell: u64) -> Self {
        assert!(
            (ap as i128).pow(2) <= 4 * p as i128,
            "Hasse bound violated: a_{p} = {ap}"
        );
        FrobeniusSample { p, ap, t: ap.rem_euclid(ell as i64) as u64, d: p % ell }
    }
}

/// Quadratic-character tables for every odd prime up to a bound, so that
/// `a_p` costs one pass over `F_p`.
#[derive(Debug, Clone)]
pub struct TraceEngine {
    bound: u64,
    primes: Vec<u64>,
    chi: Vec<Vec<i8>>,
}

impl TraceEngine {
    pub fn new(bound: u64) -> Self {
        let bound = bound.max(3);
        let primes: Vec<u64> = sieve_primes(bound).expect("bound >= 3").primes()[1..].to_vec();
        let chi = primes
            .iter()
            .map(|&p| {
                let mut t = vec![-1i8; p as usize];
                t[0] = 0;
                for x in 1..p {
                    t[(x * x % p) as usize] = 1;
                }
                t
            })
            .collect();
        TraceEngine { bound, primes, chi }
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// Odd primes covered by the engine.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// `a_p = -sum_x chi(x^3 + Ax + B)` for an odd prime `p` of good
    /// reduction. The cubic is stepped by finite differences.
    pub fn trace(&self, a: i64, b: i64, p: u64) -> Result<i64, GaloisError> {
        let idx = self
            .primes
            .binary_search(&p)
            .map_err(|_| GaloisError::OutsideEngine { p, bound: self.bound })?;
        let chi = &self.chi[idx];
        let m = p as i64;
        let step = |x: u64, y: u64| {
            let s = x + y;
            if s >= p {
                s - p
            } else {
                s
            }
        };
        let six = 6 % p;
        let mut f = b.rem_euclid(m) as u64;
        let mut d1 = (1 + a).rem_euclid(m) as u64;
        let mut d2 = six;
        let mut sum = 0i64;
        for _ in 0..p {
            sum += chi[f as usize] as i64;
            f = step(f, d1);
            d1 = step(d1, d2);
            d2 = step(d2, six);
        }
        Ok(-sum)
    }

    pub fn sample(&self, curve: &CurveRecord, p: u64, ell: u64) -> Result<FrobeniusSample, GaloisError> {
        if curve.discriminant() % p as i128 == 0 {
            return Err(GaloisError::BadReduction { p });
        }
        let ap = self.trace(curve.a(), curve.b(), p)?;
        Ok(FrobeniusSample::new(p, ap, ell))
    }

    pub fn fingerprint(&self, curve: &CurveRecord, ell: u64, window_bound: u64) -> Result<Fingerprint, GaloisError> {
        check_ell(ell)?;
        if window_bound < 30 {
            return Err(GaloisError::WindowTooSmall(window_bound));
        }
        if window_bound > self.bound {
            return Err(GaloisError::OutsideEngine { p: window_bound, bound: self.bound });
        }
        let mut values = Vec::new();
        for p in fingerprint_window(ell, window_bound) {
            values.push(match self.sample(curve, p, ell) {
                Ok(s) => Some(s.t as u8),
                Err(GaloisError::BadReduction { .. }) => None,
                Err(e) => return Err(e),
            });
        }
        Ok(Fingerprint { ell, window_bound, values })
    }

    /// Scans good primes `5 <= p <= probe_bound`, `p != ell`, for the three
    /// witnesses of a surjective image.
    pub fn certify(&self, curve: &CurveRecord, ell: u64, probe_bound: u64) -> Result<SurjectivityVerdict, GaloisError> {
        check_ell(ell)?;
        let mut search = WitnessSearch::new(ell);
        for &p in self.primes.iter().filter(|&&p| p >= 5 && p <= probe_bound && p != ell) {
            if curve.discriminant() % p as i128 == 0 {
                continue;
            }
            let ap = self.trace(curve.a(), curve.b(), p)?;
            search.push(FrobeniusSample::new(p, ap, ell));
            if search.complete() {
                break;
            }
        }
        Ok(search.finish())
    }

    /// `certify` at `probe_bound`, retried once at `escalation_bound` when
    /// no certificate was found.
    pub fn certify_escalating(
        &self,
        curve: &CurveRecord,
        ell: u64,
        probe_bound: u64,
        escalation_bound: u64,
    ) -> Result<SurjectivityVerdict, GaloisError> {
        let first = self.certify(curve, ell, probe_bound)?;
        if first.is_certified() || escalation_bound <= probe_bound {
            return Ok(first);
        }
        self.certify(curve, ell, escalation_bound)
    }
}

fn check_ell(ell: u64) -> Result<(), GaloisError> {
    if ell < 5 {
        return Err(GaloisError::EllTooSmall(ell));
    }
    if !is_prime(ell) {
        return Err(GaloisError::NotPrime(ell));
    }
    Ok(())
}

/// Frobenius sample at a single prime `p >= 5` of good reduction, by the
/// Legendre-symbol sum `#E(F_p) = 1 + sum_x (1 + (f(x)/p))`.
pub fn point_count(a: i64, b: i64, p: u64, ell: u64) -> Result<FrobeniusSample, GaloisError> {
    if p < 5 {
        return Err(GaloisError::PrimeTooSmall(p));
    }
    if !is_prime(p) {
        return Err(GaloisError::NotPrime(p));
    }
    if crate::curves::discriminant(a, b) % p as i128 == 0 {
        return Err(GaloisError::BadReduction { p });
    }
    let (a, b, m) = (a as i128, b as i128, p as i128);
    let mut count = 1i64;
    for x in 0..m {
        let f = (x * x % m * x + a * x + b).rem_euclid(m);
        count += 1 + legendre(f as i64, p) as i64;
    }
    Ok(FrobeniusSample::new(p, p as i64 + 1 - count, ell))
}

/// Probe primes of a fingerprint: primes in `[5, window_bound]` except `ell`.
pub fn fingerprint_window(ell: u64, window_bound: u64) -> Vec<u64> {
    if window_bound < 5 {
        return Vec::new();
    }
    sieve_primes(window_bound)
        .expect("bound >= 5")
        .range(5, window_bound)
        .iter()
        .copied()
        .filter(|&p| p != ell)
        .collect()
}

/// `a_p mod ell` over the probe window; `None` marks primes of bad reduction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    pub ell: u64,
    pub window_bound: u64,
    pub values: Vec<Option<u8>>,
}

impl Fingerprint {
    pub fn window(&self) -> Vec<u64> {
        fingerprint_window(self.ell, self.window_bound)
    }

    pub fn bad_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Number of positions good for both fingerprints, or `None` when they
    /// disagree at one of them.
    pub fn agreement(&self, other: &Fingerprint) -> Option<usize> {
        agreement(&self.values, &other.values)
    }
}

pub(crate) fn agreement(x: &[Option<u8>], y: &[Option<u8>]) -> Option<usize> {
    let mut shared = 0;
    for (a, b) in x.iter().zip(y) {
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                return None;
            }
            shared += 1;
        }
    }
    Some(shared)
}

/// Fingerprint of a curve with a freshly built trace engine.
pub fn fingerprint(curve: &CurveRecord, ell: u64, window_bound: u64) -> Result<Fingerprint, GaloisError> {
    TraceEngine::new(window_bound).fingerprint(curve, ell, window_bound)
}

/// Surjectivity certificate with a freshly built trace engine.
pub fn certify_surjective(curve: &CurveRecord, ell: u64, probe_bound: u64) -> Result<SurjectivityVerdict, GaloisError> {
    TraceEngine::new(probe_bound).certify(curve, ell, probe_bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    CertifiedSurjective,
    NotCertified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NotCertifiedReason {
    /// Some witness type never occurred below the probe bound.
    WitnessMissing,
    /// `a_p = 0` at a large share of primes, as for CM curves.
    CmLike,
}

impl NotCertifiedReason {
    pub fn describe(&self) -> &'static str {
        match self {
            NotCertifiedReason::WitnessMissing => "witness missing after probe bound",
            NotCertifiedReason::CmLike => "CM-like trace pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SurjectivityVerdict {
    pub status: Verdict,
    /// Split, nonsplit and non-exceptional witnesses, in that order.
    pub witnesses: Option<[FrobeniusSample; 3]>,
    pub reason: Option<NotCertifiedReason>,
}

impl SurjectivityVerdict {
    pub fn certified(witnesses: [FrobeniusSample; 3]) -> Self {
        SurjectivityVerdict {
            status: Verdict::CertifiedSurjective,
            witnesses: Some(witnesses),
            reason: None,
        }
    }

    pub fn not_certified(reason: NotCertifiedReason) -> Self {
        SurjectivityVerdict { status: Verdict::NotCertified, witnesses: None, reason: Some(reason) }
    }

    pub fn is_certified(&self) -> bool {
        self.status == Verdict::CertifiedSurjective
    }

    /// Re-evaluates the witness conditions from the stored samples.
    pub fn recheck(&self, ell: u64) -> bool {
        match (&self.status, &self.witnesses) {
            (Verdict::CertifiedSurjective, Some([split, nonsplit, exc])) => {
                let resample = |s: &FrobeniusSample| FrobeniusSample::new(s.p, s.ap, ell);
                let (split, nonsplit, exc) = (resample(split), resample(nonsplit), resample(exc));
                let kinds = WitnessKinds::of(&split, ell);
                let kinds2 = WitnessKinds::of(&nonsplit, ell);
                let kinds3 = WitnessKinds::of(&exc, ell);
                kinds.split && kinds2.nonsplit && kinds3.non_exceptional
            }
            (Verdict::NotCertified, None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct WitnessKinds {
    pub split: bool,
    pub nonsplit: bool,
    pub non_exceptional: bool,
}

impl WitnessKinds {
    /// Which witness conditions a Frobenius sample meets.
    pub fn of(s: &FrobeniusSample, ell: u64) -> Self {
        let (t, d) = (s.t, s.d);
        if d == 0 {
            return WitnessKinds::default();
        }
        let disc = (t * t + 4 * (ell - d)) % ell;
        let chi = legendre(disc as i64, ell);
        let u = t * t % ell * crate::arith::inv_mod(d, ell) % ell;
        let golden = (u * u + 3 * (ell - u) + 1) % ell;
        WitnessKinds {
            split: t != 0 && chi == 1,
            nonsplit: t != 0 && chi == -1,
            non_exceptional: !matches!(u, 0 | 1 | 2 | 4) && golden != 0,
        }
    }
}

struct WitnessSearch {
    ell: u64,
    split: Option<FrobeniusSample>,
    nonsplit: Option<FrobeniusSample>,
    non_exceptional: Option<FrobeniusSample>,
    generators: Vec<u64>,
    subgroup: Vec<bool>,
    subgroup_size: usize,
    samples: usize,
    zero_traces: usize,
}

impl WitnessSearch {
    fn new(ell: u64) -> Self {
        let mut subgroup = vec![false; ell as usize];
        subgroup[1] = true;
        WitnessSearch {
            ell,
            split: None,
            nonsplit: None,
            non_exceptional: None,
            generators: Vec::new(),
            subgroup,
            subgroup_size: 1,
            samples: 0,
            zero_traces: 0,
        }
    }

    fn push(&mut self, s: FrobeniusSample) {
        self.samples += 1;
        if s.ap == 0 {
            self.zero_traces += 1;
        }
        let kinds = WitnessKinds::of(&s, self.ell);
        if kinds.split && self.split.is_none() {
            self.split = Some(s);
        }
        if kinds.nonsplit && self.nonsplit.is_none() {
            self.nonsplit = Some(s);
        }
        if kinds.non_exceptional && self.non_exceptional.is_none() {
            self.non_exceptional = Some(s);
        }
        if !self.subgroup[s.d as usize] {
            self.extend_subgroup(s.d);
        }
    }

    // Subgroup of (Z/ell)^* generated by the residues seen so far.
    fn extend_subgroup(&mut self, g: u64) {
        self.generators.push(g);
        let ell = self.ell;
        self.subgroup.iter_mut().for_each(|b| *b = false);
        self.subgroup[1] = true;
        let mut frontier = vec![1u64];
        while let Some(x) = frontier.pop() {
            for &h in &self.generators {
                let y = x * h % ell;
                if !self.subgroup[y as usize] {
                    self.subgroup[y as usize] = true;
                    frontier.push(y);
                }
            }
        }
        self.subgroup_size = self.subgroup.iter().filter(|&&b| b).count();
    }

    fn complete(&self) -> bool {
        self.split.is_some()
            && self.nonsplit.is_some()
            && self.non_exceptional.is_some()
            && self.subgroup_size as u64 == self.ell - 1
    }

    fn finish(self) -> SurjectivityVerdict {
        if self.complete() {
            return SurjectivityVerdict::certified([
                self.split.unwrap(),
                self.nonsplit.unwrap(),
                self.non_exceptional.unwrap(),
            ]);
        }
        // Non-CM curves have a_p = 0 at a density-zero set of primes.
        if self.samples >= 20 && 4 * self.zero_traces >= self.samples {
            SurjectivityVerdict::not_certified(NotCertifiedReason::CmLike)
        } else {
            SurjectivityVerdict::not_certified(NotCertifiedReason::WitnessMissing)
        }
    }
}

/// `#{g in GL2(F_ell) : tr g = t, det g = d}` tabulated by enumerating all
/// invertible 2x2 matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceCountTable {
    ell: u64,
    counts: Vec<u64>,
}

impl TraceCountTable {
    pub fn new(ell: u64) -> Result<Self, GaloisError> {
        if ell > 13 {
            return Err(GaloisError::EllTooLarge(ell));
        }
        if !is_prime(ell) {
            return Err(GaloisError::NotPrime(ell));
        }
        let mut counts = vec![0u64; (ell * ell) as usize];
        for a in 0..ell {
            for b in 0..ell {
                for c in 0..ell {
                    for d in 0..ell {
                        let det = (a * d + ell * ell - b * c) % ell;
                        if det != 0 {
                            let tr = (a + d) % ell;
                            counts[(tr * ell + det) as usize] += 1;
                        }
                    }
                }
            }
        }
        Ok(TraceCountTable { ell, counts })
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn count(&self, t: u64, d: u64) -> Result<u64, GaloisError> {
        let d = d % self.ell;
        if d == 0 {
            return Err(GaloisError::ZeroDeterminant(d));
        }
        Ok(self.counts[((t % self.ell) * self.ell + d) as usize])
    }
}

/// `N(t, d)` by brute force; `ell <= 13`.
pub fn trace_count_oracle(ell: u64, t: u64, d: u64) -> Result<u64, GaloisError> {
    TraceCountTable::new(ell)?.count(t, d)
}
