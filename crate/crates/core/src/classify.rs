//! Per-curve classification: semistability away from 2 and 3, a
//! surjectivity certificate, the trace fingerprint, and (for members of the
//! census family) the level and discriminant ledgers.

use crate::curves::{is_semistable_away_23, CurveRecord};
use crate::galois::{Fingerprint, GaloisError, SurjectivityVerdict, TraceEngine};
use crate::levels::{gl2_order, level_data, LevelData, LevelError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error("escalation bound {escalation} is below the probe bound {probe}")]
    Escalation { probe: u64, escalation: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassifyConfig {
    pub ell: u64,
    pub window_bound: u64,
    pub probe_bound: u64,
    pub escalation_bound: u64,
    /// Exponent `C` of `ell` in the discriminant bound.
    pub c_ell_exponent: u64,
}

impl ClassifyConfig {
    /// Defaults for `ell`, with `C = 2 #GL2(F_ell)`.
    pub fn for_ell(ell: u64) -> Self {
        ClassifyConfig {
            ell,
            window_bound: 200,
            probe_bound: 1000,
            escalation_bound: 10_000,
            c_ell_exponent: 2 * gl2_order(ell),
        }
    }
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self::for_ell(5)
    }
}

/// One classified curve. `levels` is present exactly for curves that are
/// semistable away from 2 and 3 and certified surjective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedCurve {
    pub a: i64,
    pub b: i64,
    pub semistable_away_23: bool,
    pub verdict: SurjectivityVerdict,
    pub fingerprint: Fingerprint,
    pub levels: Option<LevelData>,
}

impl ClassifiedCurve {
    pub fn key(&self) -> (i64, i64) {
        (self.a, self.b)
    }

    /// Member of the census family `S_ell`.
    pub fn in_family(&self) -> bool {
        self.semistable_away_23 && self.verdict.is_certified()
    }
}

#[derive(Debug, Clone)]
pub struct Classifier {
    config: ClassifyConfig,
    engine: TraceEngine,
}

impl Classifier {
    pub fn new(config: ClassifyConfig) -> Result<Self, ClassifyError> {
        if config.escalation_bound < config.probe_bound {
            return Err(ClassifyError::Escalation {
                probe: config.probe_bound,
                escalation: config.escalation_bound,
            });
        }
        let bound = config.window_bound.max(config.escalation_bound);
        let engine = TraceEngine::new(bound);
        // Validates ell and the window once, up front.
        let probe = CurveRecord::new(1, 1).expect("nonsingular");
        engine.fingerprint(&probe, config.ell, config.window_bound)?;
        Ok(Classifier { config, engine })
    }

    pub fn config(&self) -> &ClassifyConfig {
        &self.config
    }

    pub fn engine(&self) -> &TraceEngine {
        &self.engine
    }

    pub fn classify(&self, curve: &CurveRecord) -> Result<ClassifiedCurve, ClassifyError> {
        let cfg = &self.config;
        let semistable = is_semistable_away_23(curve);
        let verdict =
            self.engine.certify_escalating(curve, cfg.ell, cfg.probe_bound, cfg.escalation_bound)?;
        let fingerprint = self.engine.fingerprint(curve, cfg.ell, cfg.window_bound)?;
        let levels = if semistable && verdict.is_certified() {
            Some(level_data(curve, cfg.ell, &verdict, cfg.c_ell_exponent)?)
        } else {
            None
        };
        Ok(ClassifiedCurve {
            a: curve.a(),
            b: curve.b(),
            semistable_away_23: semistable,
            verdict,
            fingerprint,
            levels,
        })
    }
}
