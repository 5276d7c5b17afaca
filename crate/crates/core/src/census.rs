//! Buckets of curves with indistinguishable mod-`ell` traces, their
//! det-power twist quotient, and the census counts built on them.
//!
//! Two fingerprints are *compatible* when they agree at every position good
//! for both and share at least [`MIN_SHARED`] such positions. Buckets are the
//! connected components of compatibility, coarsened until no two bucket keys
//! are compatible, so distinct buckets always differ at a mutually good prime.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;

use crate::arith::{ln_biguint, pow_mod};
use crate::classify::ClassifiedCurve;
use crate::curves::HeightBox;
use crate::galois::{agreement, Fingerprint};
use crate::levels::{gl2_order, required_height, threshold_y1, threshold_y2, ExponentLedger};

/// Mutually good positions needed before two curves may share a bucket.
pub const MIN_SHARED: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CensusError {
    #[error("curve ({0}, {1}) lacks level data (not semistable and certified)")]
    MissingClassification(i64, i64),
    #[error("curve ({a}, {b}) was classified for ell = {found}, expected {expected}")]
    EllMismatch { a: i64, b: i64, expected: u64, found: u64 },
    #[error("curve ({0}, {1}) has a fingerprint window different from the rest")]
    WindowMismatch(i64, i64),
    #[error("curve ({0}, {1}) occurs twice")]
    Duplicate(i64, i64),
    #[error("curve ({a}, {b}) was classified with C = {found}, expected {expected}")]
    CExponentMismatch { a: i64, b: i64, expected: u64, found: u64 },
    #[error("store covers heights up to {have}; cutoff #{index} needs heights ({have}, {needed}]")]
    Underpopulated { index: usize, needed: u64, have: u64 },
    #[error("grid cutoffs must be strictly increasing")]
    GridNotAscending,
    #[error("grid cutoffs must be at least 2")]
    CutoffTooSmall,
}

/// A residual-representation class: curves whose fingerprints cannot be
/// told apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepClassBucket {
    /// Union-normalized fingerprint: at each position, the value of the
    /// first member (in key order) that is good there.
    pub key: Fingerprint,
    /// Sorted `(A, B)` keys.
    pub members: Vec<(i64, i64)>,
    pub min_serre_level: ExponentLedger,
    pub min_disc_bound: ExponentLedger,
    /// Every member has an exact level away from 2 and 3.
    pub exact_flag: bool,
}

/// Buckets identified under det-power twists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedBucket {
    /// Indices into the bucket list, ascending.
    pub buckets: Vec<usize>,
    pub min_serre_level: ExponentLedger,
    pub min_disc_bound: ExponentLedger,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucketing {
    pub buckets: Vec<RepClassBucket>,
    /// Curves with too many bad probe primes to be compared soundly.
    pub dropped: Vec<(i64, i64)>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two classes under the smaller root; true if they were apart.
    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
        self.parent[hi] = lo;
        true
    }

    /// Classes as ascending index lists, ordered by smallest element.
    fn classes(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(i);
        }
        out
    }
}

fn compatible(x: &[Option<u8>], y: &[Option<u8>]) -> bool {
    matches!(agreement(x, y), Some(s) if s >= MIN_SHARED)
}

fn bad_count(v: &[Option<u8>]) -> usize {
    v.iter().filter(|x| x.is_none()).count()
}

/// Unions every compatible pair. Returns whether anything was joined.
///
/// With at most `m` bad positions per vector, splitting the positions into
/// `2m + 1` chunks leaves one chunk good for both members of any pair, and
/// compatible pairs agree there. So only vectors sharing a fully good chunk
/// need comparing.
fn link_compatible(vectors: &[Vec<Option<u8>>], uf: &mut UnionFind) -> bool {
    let Some(first) = vectors.first() else {
        return false;
    };
    let n = first.len();
    let max_bad = vectors.iter().map(|v| bad_count(v)).max().unwrap_or(0);
    let chunks = 2 * max_bad + 1;
    let mut joined = false;
    if chunks > n {
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                if uf.find(i) != uf.find(j) && compatible(&vectors[i], &vectors[j]) {
                    joined |= uf.union(i, j);
                }
            }
        }
        return joined;
    }
    for c in 0..chunks {
        let (lo, hi) = (c * n / chunks, (c + 1) * n / chunks);
        let mut rows: Vec<(Vec<u8>, usize)> = vectors
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v[lo..hi].iter().copied().collect::<Option<Vec<u8>>>().map(|k| (k, i)))
            .collect();
        rows.sort_unstable();
        let mut start = 0;
        while start < rows.len() {
            let mut end = start + 1;
            while end < rows.len() && rows[end].0 == rows[start].0 {
                end += 1;
            }
            for x in start..end {
                for y in x + 1..end {
                    let (i, j) = (rows[x].1, rows[y].1);
                    if uf.find(i) != uf.find(j) && compatible(&vectors[i], &vectors[j]) {
                        joined |= uf.union(i, j);
                    }
                }
            }
            start = end;
        }
    }
    joined
}

fn link_pairwise(vectors: &[Vec<Option<u8>>], uf: &mut UnionFind) -> bool {
    let mut joined = false;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            if compatible(&vectors[i], &vectors[j]) {
                joined |= uf.union(i, j);
            }
        }
    }
    joined
}

fn normalized_key(members: &[&Vec<Option<u8>>]) -> Vec<Option<u8>> {
    let n = members.first().map_or(0, |m| m.len());
    (0..n).map(|i| members.iter().find_map(|m| m[i])).collect()
}

type Prepared<'a> = (Vec<&'a ClassifiedCurve>, Vec<(i64, i64)>);

/// Validated, sorted input split into kept and dropped curves.
fn prepare(curves: &[ClassifiedCurve], ell: u64) -> Result<Prepared<'_>, CensusError> {
    let mut sorted: Vec<&ClassifiedCurve> = curves.iter().collect();
    sorted.sort_by_key(|c| c.key());
    let window = sorted.first().map(|c| c.fingerprint.window_bound);
    for (i, c) in sorted.iter().enumerate() {
        if c.levels.is_none() || !c.in_family() {
            return Err(CensusError::MissingClassification(c.a, c.b));
        }
        if c.fingerprint.ell != ell {
            return Err(CensusError::EllMismatch { a: c.a, b: c.b, expected: ell, found: c.fingerprint.ell });
        }
        if Some(c.fingerprint.window_bound) != window {
            return Err(CensusError::WindowMismatch(c.a, c.b));
        }
        if i > 0 && sorted[i - 1].key() == c.key() {
            return Err(CensusError::Duplicate(c.a, c.b));
        }
    }
    let n = sorted.first().map_or(0, |c| c.fingerprint.values.len());
    let allowed = n.saturating_sub(MIN_SHARED) / 2;
    let enough = n >= MIN_SHARED;
    let (kept, dropped): (Vec<_>, Vec<_>) =
        sorted.into_iter().partition(|c| enough && c.fingerprint.bad_count() <= allowed);
    Ok((kept, dropped.into_iter().map(|c| c.key()).collect()))
}

fn run_bucketing(
    curves: &[ClassifiedCurve],
    ell: u64,
    link: fn(&[Vec<Option<u8>>], &mut UnionFind) -> bool,
) -> Result<Bucketing, CensusError> {
    let (kept, dropped) = prepare(curves, ell)?;
    let vectors: Vec<Vec<Option<u8>>> = kept.iter().map(|c| c.fingerprint.values.clone()).collect();
    let mut uf = UnionFind::new(kept.len());
    link(&vectors, &mut uf);
    let classes = loop {
        let classes = uf.classes();
        let keys: Vec<Vec<Option<u8>>> = classes
            .iter()
            .map(|cls| normalized_key(&cls.iter().map(|&i| &vectors[i]).collect::<Vec<_>>()))
            .collect();
        let mut key_uf = UnionFind::new(keys.len());
        if !link(&keys, &mut key_uf) {
            break classes;
        }
        for group in key_uf.classes() {
            for w in group.windows(2) {
                uf.union(classes[w[0]][0], classes[w[1]][0]);
            }
        }
    };
    let buckets = classes
        .into_iter()
        .map(|cls| {
            let members: Vec<&ClassifiedCurve> = cls.iter().map(|&i| kept[i]).collect();
            let values = normalized_key(&cls.iter().map(|&i| &vectors[i]).collect::<Vec<_>>());
            let levels = || members.iter().map(|c| c.levels.as_ref().expect("validated"));
            RepClassBucket {
                key: Fingerprint { ell, window_bound: members[0].fingerprint.window_bound, values },
                members: members.iter().map(|c| c.key()).collect(),
                min_serre_level: levels().map(|l| &l.serre_level_upper).min().cloned().expect("nonempty"),
                min_disc_bound: levels().map(|l| &l.disc_bound).min().cloned().expect("nonempty"),
                exact_flag: levels().all(|l| l.serre_level_exact_away_23),
            }
        })
        .collect();
    Ok(Bucketing { buckets, dropped })
}

/// Partitions census-family curves into residual-representation buckets.
pub fn bucket(curves: &[ClassifiedCurve], ell: u64) -> Result<Bucketing, CensusError> {
    run_bucketing(curves, ell, link_compatible)
}

/// Reference partition comparing every pair of fingerprints directly.
pub fn bucket_pairwise(curves: &[ClassifiedCurve], ell: u64) -> Result<Bucketing, CensusError> {
    run_bucketing(curves, ell, link_pairwise)
}

/// A pair of buckets with compatible keys, if any. Sound bucketings have
/// none.
pub fn compatible_bucket_pair(buckets: &[RepClassBucket]) -> Option<(usize, usize)> {
    let keys: Vec<Vec<Option<u8>>> = buckets.iter().map(|b| b.key.values.clone()).collect();
    let mut uf = UnionFind::new(keys.len());
    if !link_compatible(&keys, &mut uf) {
        return None;
    }
    for i in 0..keys.len() {
        for j in i + 1..keys.len() {
            if compatible(&keys[i], &keys[j]) {
                return Some((i, j));
            }
        }
    }
    unreachable!("index reported a compatible pair")
}

/// `p -> (p mod ell)^k f(p)`: the trace fingerprint of a twist by the
/// `k`-th power of the mod-`ell` cyclotomic character.
pub fn twist_fingerprint(f: &Fingerprint, k: u64) -> Fingerprint {
    let ell = f.ell;
    let values = f
        .window()
        .into_iter()
        .zip(&f.values)
        .map(|(p, v)| v.map(|t| ((t as u64 * pow_mod(p % ell, k, ell)) % ell) as u8))
        .collect();
    Fingerprint { ell, window_bound: f.window_bound, values }
}

/// Identifies buckets whose keys are related by a det-power twist,
/// `k in 1..=ell-2`. Twisted copies of each key join the pool, so the
/// result is closed under composing twists.
pub fn merge_under_twists(buckets: &[RepClassBucket], ell: u64) -> Vec<MergedBucket> {
    let copies = (ell - 1) as usize;
    let mut pool = Vec::with_capacity(buckets.len() * copies);
    for b in buckets {
        for k in 0..copies {
            pool.push(twist_fingerprint(&b.key, k as u64).values);
        }
    }
    let mut uf = UnionFind::new(pool.len());
    for i in 0..buckets.len() {
        for k in 1..copies {
            uf.union(i * copies, i * copies + k);
        }
    }
    link_compatible(&pool, &mut uf);
    let mut owners = UnionFind::new(buckets.len());
    for i in 0..buckets.len() {
        owners.union(i, uf.find(i * copies) / copies);
    }
    owners
        .classes()
        .into_iter()
        .map(|idx| MergedBucket {
            min_serre_level: idx.iter().map(|&i| &buckets[i].min_serre_level).min().cloned().expect("nonempty"),
            min_disc_bound: idx.iter().map(|&i| &buckets[i].min_disc_bound).min().cloned().expect("nonempty"),
            buckets: idx,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusConfig {
    pub ell: u64,
    /// Strictly increasing cutoffs, each at least 2.
    pub grid: Vec<BigUint>,
    pub c_ell_exponent: u64,
    /// The store holds every curve of height at most this.
    pub height_completed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub cutoff: BigUint,
    pub m_hat: u64,
    pub f_hat: u64,
    /// `ln(X^(1/12) / ln X)`.
    pub ln_theory_m: f64,
    /// `ln(X^(ell / (12 (ell-1) #GL2)) / ln X)`.
    pub ln_theory_f: f64,
}

fn ln_ratio(count: u64, ln_theory: f64) -> Option<f64> {
    (count > 0).then(|| libm::log(count as f64) - ln_theory)
}

impl CensusRow {
    pub fn theory_m(&self) -> f64 {
        libm::exp(self.ln_theory_m)
    }

    pub fn theory_f(&self) -> f64 {
        libm::exp(self.ln_theory_f)
    }

    /// `ln(M_hat / theory_M)`, or `None` when `M_hat = 0`.
    pub fn ln_ratio_m(&self) -> Option<f64> {
        ln_ratio(self.m_hat, self.ln_theory_m)
    }

    pub fn ln_ratio_f(&self) -> Option<f64> {
        ln_ratio(self.f_hat, self.ln_theory_f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub height: u64,
    pub n_c: u64,
    pub n_d: u64,
    pub n_e: u64,
    pub n_s: u64,
    pub d_ratio: f64,
    pub s_ratio: f64,
}

impl fmt::Display for DensityRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{:.6},{:.6}",
            self.height, self.n_c, self.n_d, self.n_e, self.n_s, self.d_ratio, self.s_ratio
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport {
    pub ell: u64,
    pub rows: Vec<CensusRow>,
    pub n_family: usize,
    pub n_dropped: usize,
    pub n_buckets: usize,
    pub n_merged: usize,
    pub density: Vec<DensityRow>,
}

/// Counts of the nested families `S <= D, E <= C` at each height.
pub fn density_table(curves: &[ClassifiedCurve], heights: &[u64]) -> Vec<DensityRow> {
    heights
        .iter()
        .map(|&h| {
            let bounds = HeightBox::new(h as f64).expect("height >= 1");
            let mut row = DensityRow { height: h, n_c: 0, n_d: 0, n_e: 0, n_s: 0, d_ratio: 0.0, s_ratio: 0.0 };
            for c in curves.iter().filter(|c| bounds.contains(c.a, c.b)) {
                row.n_c += 1;
                row.n_d += c.semistable_away_23 as u64;
                row.n_e += c.verdict.is_certified() as u64;
                row.n_s += c.in_family() as u64;
            }
            if row.n_c > 0 {
                row.d_ratio = row.n_d as f64 / row.n_c as f64;
                row.s_ratio = row.n_s as f64 / row.n_c as f64;
            }
            row
        })
        .collect()
}

/// Height the store must reach before cutoff `x` can be reported.
pub fn required_height_for(x: &BigUint, ell: u64, c_ell_exponent: u64) -> u64 {
    required_height(threshold_y1(x).max(threshold_y2(x, ell, c_ell_exponent)))
}

/// Buckets the census family of a classified store and counts buckets
/// admitted at each cutoff: `M_hat` by Serre level, `F_hat` by twist-merged
/// discriminant bound.
pub fn census(curves: &[ClassifiedCurve], cfg: &CensusConfig) -> Result<CensusReport, CensusError> {
    let ell = cfg.ell;
    for (i, x) in cfg.grid.iter().enumerate() {
        if *x < BigUint::from(2u32) {
            return Err(CensusError::CutoffTooSmall);
        }
        if i > 0 && cfg.grid[i - 1] >= *x {
            return Err(CensusError::GridNotAscending);
        }
        let needed = required_height_for(x, ell, cfg.c_ell_exponent);
        if needed > cfg.height_completed {
            return Err(CensusError::Underpopulated { index: i, needed, have: cfg.height_completed });
        }
    }
    let family: Vec<ClassifiedCurve> = curves.iter().filter(|c| c.in_family()).cloned().collect();
    for c in &family {
        let found = c.levels.as_ref().expect("family member").c_ell_exponent;
        if found != cfg.c_ell_exponent {
            return Err(CensusError::CExponentMismatch { a: c.a, b: c.b, expected: cfg.c_ell_exponent, found });
        }
    }
    let Bucketing { buckets, dropped } = bucket(&family, ell)?;
    assert!(
        compatible_bucket_pair(&buckets).is_none(),
        "two buckets agree at every mutually good probe prime"
    );
    let merged = merge_under_twists(&buckets, ell);
    let f_exponent = ell as f64 / (12.0 * (ell - 1) as f64 * gl2_order(ell) as f64);
    let rows: Vec<CensusRow> = cfg
        .grid
        .iter()
        .map(|x| {
            let ln_x = ln_biguint(x);
            let ln_ln = libm::log(ln_x);
            CensusRow {
                cutoff: x.clone(),
                m_hat: buckets.iter().filter(|b| b.min_serre_level.le_value(x)).count() as u64,
                f_hat: merged.iter().filter(|m| m.min_disc_bound.le_value(x)).count() as u64,
                ln_theory_m: ln_x / 12.0 - ln_ln,
                ln_theory_f: ln_x * f_exponent - ln_ln,
            }
        })
        .collect();
    for (i, r) in rows.iter().enumerate() {
        assert!(r.f_hat <= r.m_hat, "F_hat exceeds M_hat at cutoff #{i}");
        if i > 0 {
            assert!(rows[i - 1].m_hat <= r.m_hat && rows[i - 1].f_hat <= r.f_hat);
        }
    }
    let heights: Vec<u64> = (1..=cfg.height_completed).collect();
    Ok(CensusReport {
        ell,
        rows,
        n_family: family.len(),
        n_dropped: dropped.len(),
        n_buckets: buckets.len(),
        n_merged: merged.len(),
        density: density_table(curves, &heights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Classifier, ClassifyConfig};
    use crate::curves::{enumerate_curves, CurveRecord};
    use crate::galois::TraceEngine;
    use crate::levels::parse_product;

    fn classified(height: f64) -> Vec<ClassifiedCurve> {
        let c = Classifier::new(ClassifyConfig::default()).unwrap();
        enumerate_curves(height).unwrap().map(|e| c.classify(&e).unwrap()).collect()
    }

    fn family(height: f64) -> Vec<ClassifiedCurve> {
        classified(height).into_iter().filter(|c| c.in_family()).collect()
    }

    fn partition(b: &Bucketing) -> Vec<Vec<(i64, i64)>> {
        let mut p: Vec<_> = b.buckets.iter().map(|x| x.members.clone()).collect();
        p.sort();
        p
    }

    #[test]
    fn minus_one_twist_changes_traces() {
        let engine = TraceEngine::new(200);
        let e = CurveRecord::new(0, 1).unwrap();
        let f = CurveRecord::new(0, -1).unwrap();
        let (fe, ff) = (engine.fingerprint(&e, 5, 200).unwrap(), engine.fingerprint(&f, 5, 200).unwrap());
        for (p, (x, y)) in fe.window().into_iter().zip(fe.values.iter().zip(&ff.values)) {
            if let (Some(x), Some(y)) = (x, y) {
                let chi = if p % 4 == 1 { 1 } else { 4 };
                assert_eq!(*y as u64, (*x as u64 * chi) % 5, "p = {p}");
            }
        }
        // (0, 1) has a_p = 0 at p = 2 mod 3 and is not fixed by the twist.
        assert!(!compatible(&fe.values, &ff.values));
    }

    #[test]
    fn single_curve_is_one_bucket() {
        let fam = family(1.0);
        let one = vec![fam[0].clone()];
        let b = bucket(&one, 5).unwrap();
        assert_eq!(b.buckets.len(), 1);
        assert_eq!(b.buckets[0].key, fam[0].fingerprint);
    }

    #[test]
    fn rejects_unclassified_members() {
        let all = classified(1.0);
        let cm = all.iter().find(|c| !c.in_family()).unwrap().clone();
        assert_eq!(bucket(core::slice::from_ref(&cm), 5), Err(CensusError::MissingClassification(cm.a, cm.b)));
        let fam = family(1.0);
        assert!(matches!(bucket(&fam, 7), Err(CensusError::EllMismatch { .. })));
        let dup = vec![fam[0].clone(), fam[0].clone()];
        assert!(matches!(bucket(&dup, 5), Err(CensusError::Duplicate(..))));
    }

    #[test]
    fn indexed_bucketing_matches_pairwise_oracle() {
        let fam = family(2.0);
        let fast = bucket(&fam, 5).unwrap();
        let slow = bucket_pairwise(&fam, 5).unwrap();
        assert_eq!(partition(&fast), partition(&slow));
        assert_eq!(fast.dropped, slow.dropped);
        assert!(compatible_bucket_pair(&fast.buckets).is_none());
        for (i, x) in fast.buckets.iter().enumerate() {
            for y in &fast.buckets[i + 1..] {
                assert!(!compatible(&x.key.values, &y.key.values));
            }
        }
    }

    #[test]
    fn synthetic_chunks_find_all_pairs() {
        // Random-looking vectors with scattered BADs, duplicated with noise
        // only at BAD positions, so the answer is known.
        let mut vectors = Vec::new();
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u8
        };
        for _ in 0..60 {
            let base: Vec<Option<u8>> = (0..40).map(|_| Some(next() % 5)).collect();
            for _ in 0..3 {
                let mut v = base.clone();
                for _ in 0..(next() % 5) {
                    v[(next() % 40) as usize] = None;
                }
                vectors.push(v);
            }
        }
        let mut a = UnionFind::new(vectors.len());
        let mut b = UnionFind::new(vectors.len());
        link_compatible(&vectors, &mut a);
        link_pairwise(&vectors, &mut b);
        assert_eq!(a.classes(), b.classes());
    }

    #[test]
    fn reordering_does_not_change_buckets() {
        let fam = family(2.0);
        let mut rev = fam.clone();
        rev.reverse();
        assert_eq!(bucket(&fam, 5).unwrap(), bucket(&rev, 5).unwrap());
    }

    #[test]
    fn members_agree_on_commonly_good_primes() {
        let fam = family(2.0);
        let by_key: alloc::collections::BTreeMap<_, _> = fam.iter().map(|c| (c.key(), c)).collect();
        for b in bucket(&fam, 5).unwrap().buckets {
            let fps: Vec<_> = b.members.iter().map(|k| &by_key[k].fingerprint.values).collect();
            for i in 0..b.key.values.len() {
                if fps.iter().all(|f| f[i].is_some()) {
                    assert!(fps.iter().all(|f| f[i] == fps[0][i]));
                }
            }
        }
    }

    #[test]
    fn larger_window_never_merges() {
        let small_cfg = ClassifyConfig { window_bound: 100, ..ClassifyConfig::default() };
        let small = Classifier::new(small_cfg).unwrap();
        let large = Classifier::new(ClassifyConfig::default()).unwrap();
        let curves: Vec<CurveRecord> = enumerate_curves(2.0).unwrap().collect();
        let fs: Vec<_> = curves.iter().map(|e| small.classify(e).unwrap()).filter(|c| c.in_family()).collect();
        let fl: Vec<_> = curves.iter().map(|e| large.classify(e).unwrap()).filter(|c| c.in_family()).collect();
        let (bs, bl) = (bucket(&fs, 5).unwrap(), bucket(&fl, 5).unwrap());
        for b in &bl.buckets {
            let owners: alloc::collections::BTreeSet<usize> = b
                .members
                .iter()
                .filter_map(|m| bs.buckets.iter().position(|x| x.members.contains(m)))
                .collect();
            assert!(owners.len() <= 1);
        }
    }

    #[test]
    fn twist_merge_examples() {
        let fam = family(2.0);
        let b = bucket(&fam, 5).unwrap().buckets;
        let merged = merge_under_twists(&b, 5);
        assert!(merged.len() <= b.len());
        let total: usize = merged.iter().map(|m| m.buckets.len()).sum();
        assert_eq!(total, b.len());
        for m in &merged {
            assert!(m.buckets.len() <= 4);
        }
        // k = 0 is the identity.
        assert_eq!(twist_fingerprint(&b[0].key, 0), b[0].key);
        // A synthetic k = 1 twist lands in the same merged bucket.
        let mut twisted = b[0].clone();
        twisted.key = twist_fingerprint(&b[0].key, 1);
        twisted.members = vec![(i64::MAX, 0)];
        let pair = vec![b[0].clone(), twisted];
        assert_eq!(merge_under_twists(&pair, 5).len(), 1);
    }

    #[test]
    fn m_hat_steps_at_496() {
        let c = Classifier::new(ClassifyConfig::default()).unwrap();
        let e = c.classify(&CurveRecord::new(1, 1).unwrap()).unwrap();
        let grid = vec![BigUint::from(495u32), BigUint::from(496u32), BigUint::from(10_000u32)];
        let cfg = CensusConfig { ell: 5, grid, c_ell_exponent: 960, height_completed: 2 };
        let report = census(&[e], &cfg).unwrap();
        let m: Vec<u64> = report.rows.iter().map(|r| r.m_hat).collect();
        assert_eq!(m, vec![0, 1, 1]);
        assert!(report.rows.iter().all(|r| r.f_hat == 0));
    }

    #[test]
    fn census_on_height_two() {
        let all = classified(2.0);
        let grid: Vec<BigUint> = [496u64, 2_000, 10_000, 31_744].iter().map(|&x| BigUint::from(x)).collect();
        let cfg = CensusConfig { ell: 5, grid, c_ell_exponent: 960, height_completed: 2 };
        let report = census(&all, &cfg).unwrap();
        let empty = census(&[], &cfg).unwrap();
        assert!(empty.rows.iter().all(|r| r.m_hat == 0 && r.f_hat == 0));
        for w in report.rows.windows(2) {
            assert!(w[0].m_hat <= w[1].m_hat);
        }
        assert!(report.n_merged <= report.n_buckets);
        assert_eq!(report.density.len(), 2);
        assert!((report.rows[0].ln_theory_m - (libm::log(496.0) / 12.0 - libm::log(libm::log(496.0)))).abs() < 1e-12);
    }

    #[test]
    fn census_requires_population() {
        let cfg = CensusConfig {
            ell: 5,
            grid: vec![BigUint::from(496u32 * 64 + 1)],
            c_ell_exponent: 960,
            height_completed: 2,
        };
        assert_eq!(census(&[], &cfg), Err(CensusError::Underpopulated { index: 0, needed: 3, have: 2 }));
        let big = parse_product("2^2304*6^3264*5^960").unwrap();
        assert!(required_height_for(&big, 5, 960) > 1_000_000);
        let cfg = CensusConfig { ell: 5, grid: vec![BigUint::from(5u32), BigUint::from(4u32)], c_ell_exponent: 960, height_completed: 2 };
        assert_eq!(census(&[], &cfg), Err(CensusError::GridNotAscending));
    }

    #[test]
    fn density_height_one() {
        let rows = density_table(&classified(1.0), &[1]);
        let r = &rows[0];
        assert_eq!(r.n_c, 8);
        assert_eq!(r.n_d, 8);
        assert!(r.n_s <= r.n_d && r.n_s <= r.n_e && r.n_d <= r.n_c);
        assert!((0.0..=1.0).contains(&r.d_ratio) && (0.0..=1.0).contains(&r.s_ratio));
    }
}
