//! Arithmetic core for counting `GL2(F_ell)`-extensions of the rationals
//! through the division fields of elliptic curves.
//!
//! The pipeline enumerates short Weierstrass curves `y^2 = x^3 + Ax + B`
//! ordered by naive height, certifies surjectivity of the mod-`ell`
//! representation from Frobenius traces, buckets curves whose residual
//! representations cannot be told apart, and bounds the Serre level and the
//! discriminant of the `ell`-division field with exact factored integers.
//!
//! Everything here is pure computation over `alloc`; file formats, the
//! command-line surface and thread pools live in the `gl2census` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod arith;
pub mod census;
pub mod classify;
pub mod curves;
pub mod galois;
pub mod levels;
pub mod sieve;
pub mod tate;

pub use arith::{legendre, sieve_primes, valuation, zeta_constants, PrimeTable, ZetaConstants};
pub use census::{
    bucket, census, density_table, merge_under_twists, CensusConfig, CensusReport, CensusRow,
    DensityRow, MergedBucket, RepClassBucket,
};
pub use classify::{ClassifiedCurve, Classifier, ClassifyConfig};
pub use curves::{
    count_curves, enumerate_curves, is_semistable_away_23, CurveRecord, HeightBox, LocalData,
    Reduction,
};
pub use galois::{
    certify_surjective, fingerprint, point_count, trace_count_oracle, Fingerprint,
    FrobeniusSample, SurjectivityVerdict, TraceEngine, Verdict,
};
pub use levels::{
    disc_bound, gl2_order, m_exponent, serre_level, threshold_y1, threshold_y2, ExponentLedger,
    LevelData, MExponent,
};
pub use sieve::{delta_model, dirichlet_pi, mean_square_statistic, pair_pi, PairStatConfig};

/// Version string written into store headers and report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
