use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use rayon::prelude::*;

use gl2census_core::arith::{is_prime, zeta_constants};
use gl2census_core::census::{census, density_table, CensusConfig, CensusError};
use gl2census_core::classify::{Classifier, ClassifyConfig};
use gl2census_core::levels::{gl2_order, parse_product};
use gl2census_core::sieve::{mean_square_statistic, PairStatConfig, PAIR_BUDGET};
use gl2census_core::{enumerate_curves, CurveRecord, HeightBox};

use crate::args::{Cli, Command, CommonArgs, SieveArgs};
use crate::report::{census_csv, density_csv, sieve_csv, Preamble, SieveRow};
use crate::store::{read_store, StoreContents, StoreError, StoreHeader, StoreRecord, StoreWriter, FORMAT_VERSION};

/// Escalation bound for curves not certified at the probe bound.
pub const ESCALATION_BOUND: u64 = 10_000;
const PROGRESS_EVERY: u64 = 1_000_000;
const CLASSIFY_CHUNK: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("store error: {0}")]
    Store(#[from] StoreError),
    #[error("output error: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Store(_) | CliError::Output(_) => 3,
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ell: u64,
    pub height_bound: Option<f64>,
    pub window_bound: u64,
    pub probe_bound: u64,
    pub escalation_bound: u64,
    pub c_ell_exponent: u64,
    /// Cutoffs as written and as integers.
    pub grid: Vec<(String, BigUint)>,
    pub store: PathBuf,
    pub workers: usize,
    pub seed: u64,
    pub force: bool,
}

impl RunConfig {
    pub fn from_args(args: &CommonArgs) -> Result<Self, CliError> {
        if args.ell < 5 || !is_prime(args.ell) {
            return Err(config(format!("--ell must be a prime >= 5, got {}", args.ell)));
        }
        let mut grid = Vec::new();
        if let Some(text) = args.grid.as_deref().filter(|t| !t.trim().is_empty()) {
            for item in text.split(',') {
                let value = parse_product(item).ok_or_else(|| config(format!("bad grid cutoff {item:?}")))?;
                grid.push((item.trim().to_owned(), value));
            }
        }
        if grid.windows(2).any(|w| w[0].1 >= w[1].1) {
            return Err(config("--grid must be strictly increasing"));
        }
        let workers = match args.workers {
            Some(0) => return Err(config("--workers must be positive")),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(RunConfig {
            ell: args.ell,
            height_bound: args.height_bound,
            window_bound: args.window_bound,
            probe_bound: args.probe_bound,
            escalation_bound: args.probe_bound.max(ESCALATION_BOUND),
            c_ell_exponent: args.cexp.unwrap_or(2 * gl2_order(args.ell)),
            grid,
            store: args.store.clone(),
            workers,
            seed: args.seed,
            force: args.force,
        })
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            ell: self.ell,
            window_bound: self.window_bound,
            probe_bound: self.probe_bound,
            escalation_bound: self.escalation_bound,
            c_ell_exponent: self.c_ell_exponent,
        }
    }

    fn header(&self, height: f64) -> StoreHeader {
        StoreHeader {
            format_version: FORMAT_VERSION,
            ell: self.ell,
            window_bound: self.window_bound,
            probe_bound: self.probe_bound,
            c_ell_exponent: self.c_ell_exponent,
            height_completed: height,
        }
    }

    fn settings(&self, height: f64) -> String {
        format!(
            "ell={} window={} probe={} escalation={} cexp={} height={} seed={}",
            self.ell, self.window_bound, self.probe_bound, self.escalation_bound, self.c_ell_exponent, height, self.seed
        )
    }

    fn integer_grid(&self) -> Result<Vec<u64>, CliError> {
        self.grid
            .iter()
            .map(|(label, v)| u64::try_from(v).map_err(|_| config(format!("grid entry {label} is too large"))))
            .collect()
    }
}

fn partial_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".partial");
    PathBuf::from(name)
}

fn rename(from: &Path, to: &Path) -> Result<(), CliError> {
    std::fs::rename(from, to).map_err(|e| StoreError::io(to, e).into())
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Enumerate(args) => enumerate(&RunConfig::from_args(args)?, err),
        Command::Classify(args) => classify(&RunConfig::from_args(args)?, err),
        Command::Census(args) => census_cmd(&RunConfig::from_args(args)?, out),
        Command::Density(args) => density(&RunConfig::from_args(args)?, out),
        Command::Sieve(args) => sieve(args, out),
    }
}

fn height_box(height: Option<f64>) -> Result<(f64, HeightBox), CliError> {
    let x = height.ok_or_else(|| config("--height-bound is required"))?;
    let bounds = HeightBox::new(x).map_err(|_| config(format!("height bound must satisfy X >= 1, got {x}")))?;
    Ok((x, bounds))
}

pub fn enumerate(cfg: &RunConfig, err: &mut dyn Write) -> Result<(), CliError> {
    let (x, _) = height_box(cfg.height_bound)?;
    if cfg.store.exists() && !cfg.force {
        return Err(StoreError::Exists(cfg.store.display().to_string()).into());
    }
    let partial = partial_path(&cfg.store);
    let mut writer = StoreWriter::create(&partial, cfg.header(x))?;
    let mut n = 0u64;
    for curve in enumerate_curves(x).map_err(|e| config(e.to_string()))? {
        writer.append(&StoreRecord::Bare(curve.a(), curve.b()))?;
        n += 1;
        if n % PROGRESS_EVERY == 0 {
            writeln!(err, "enumerated {n} curves")?;
        }
    }
    writer.into_inner()?;
    rename(&partial, &cfg.store)?;
    writeln!(err, "wrote {n} curves of height <= {x} to {}", cfg.store.display())?;
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<StoreContents, CliError> {
    let contents = read_store(&cfg.store)?;
    if contents.truncated {
        return Err(StoreError::Corrupt { line: contents.records.len() + 2, reason: "torn final line".into() }.into());
    }
    contents.header.check_compatible(&cfg.header(contents.header.height_completed))?;
    Ok(contents)
}

pub fn classify(cfg: &RunConfig, err: &mut dyn Write) -> Result<(), CliError> {
    let classifier = Classifier::new(cfg.classify_config()).map_err(|e| config(e.to_string()))?;
    let contents = load(cfg)?;
    if contents.is_classified() {
        writeln!(err, "{} is already classified", cfg.store.display())?;
        return Ok(());
    }
    let header = contents.header.clone();
    let partial = partial_path(&cfg.store);
    let (mut writer, done) = if partial.exists() && !cfg.force {
        let (writer, prior) = StoreWriter::resume(&partial, &header)?;
        if prior.header.height_completed != header.height_completed || prior.classified().is_none() {
            return Err(StoreError::HeaderMismatch(format!("{} does not continue this store", partial.display())).into());
        }
        writeln!(err, "resuming after {} classified rows", prior.records.len())?;
        (writer, prior.records.last().map(StoreRecord::key))
    } else {
        (StoreWriter::create(&partial, header)?, None)
    };
    let pending: Vec<(i64, i64)> = contents
        .records
        .iter()
        .map(StoreRecord::key)
        .filter(|k| !done.is_some_and(|d| *k <= d))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| config(e.to_string()))?;
    let mut n = 0usize;
    for chunk in pending.chunks(CLASSIFY_CHUNK) {
        let rows = pool.install(|| {
            chunk
                .par_iter()
                .map(|&(a, b)| {
                    let curve = CurveRecord::new(a, b).expect("store rows are valid curves");
                    classifier.classify(&curve)
                })
                .collect::<Result<Vec<_>, _>>()
        });
        for row in rows.map_err(|e| config(e.to_string()))? {
            writer.append(&StoreRecord::Classified(row))?;
        }
        writer.flush()?;
        n += chunk.len();
        writeln!(err, "classified {n}/{}", pending.len())?;
    }
    writer.into_inner()?;
    rename(&partial, &cfg.store)?;
    Ok(())
}

fn load_classified(cfg: &RunConfig) -> Result<(StoreHeader, Vec<gl2census_core::ClassifiedCurve>), CliError> {
    let contents = load(cfg)?;
    let curves = contents
        .classified()
        .ok_or_else(|| StoreError::NotClassified(cfg.store.display().to_string()))?;
    Ok((contents.header, curves))
}

pub fn census_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let (header, curves) = load_classified(cfg)?;
    let mut preamble = Preamble {
        kind: "census",
        settings: cfg.settings(header.height_completed),
        notes: vec![
            "M_hat counts conjugacy classes of surjections; each is at least one pair (L, rho)".into(),
            format!("F_hat identifies det-power twists k = 1..{}; over-merging only lowers the count", cfg.ell - 2),
        ],
    };
    let labels: Vec<String> = cfg.grid.iter().map(|(l, _)| l.clone()).collect();
    if cfg.grid.is_empty() {
        out.write_all(census_csv(&preamble, &labels, None).as_bytes())?;
        return Ok(());
    }
    let census_cfg = CensusConfig {
        ell: cfg.ell,
        grid: cfg.grid.iter().map(|(_, v)| v.clone()).collect(),
        c_ell_exponent: cfg.c_ell_exponent,
        height_completed: header.height_completed.floor() as u64,
    };
    let report = census(&curves, &census_cfg).map_err(|e| match e {
        CensusError::Underpopulated { index, needed, have } => CliError::Store(StoreError::Underpopulated(format!(
            "cutoff {} needs a store of height {needed}; {} covers height {have} (missing ({have}, {needed}])",
            labels[index],
            cfg.store.display()
        ))),
        other => config(other.to_string()),
    })?;
    preamble.notes.push(format!(
        "family={} dropped={} buckets={} merged={}",
        report.n_family, report.n_dropped, report.n_buckets, report.n_merged
    ));
    out.write_all(census_csv(&preamble, &labels, Some(&report)).as_bytes())?;
    Ok(())
}

pub fn density(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let (header, curves) = load_classified(cfg)?;
    let have = header.height_completed.floor() as u64;
    let heights = if cfg.grid.is_empty() { (1..=have).collect() } else { cfg.integer_grid()? };
    if let Some(&h) = heights.iter().find(|&&h| h == 0) {
        return Err(config(format!("density heights must be >= 1, got {h}")));
    }
    if let Some(&h) = heights.iter().find(|&&h| h > have) {
        return Err(StoreError::Underpopulated(format!("height {h} exceeds the store height {have}")).into());
    }
    let z = zeta_constants(12).expect("12 digits is in range");
    let preamble = Preamble {
        kind: "density",
        settings: cfg.settings(header.height_completed),
        notes: vec![format!("zeta(10)/zeta(2)={:.12} 4/zeta(10)={:.12}", z.c_semistable, z.c_density)],
    };
    out.write_all(density_csv(&preamble, &density_table(&curves, &heights)).as_bytes())?;
    Ok(())
}

pub fn sieve(args: &SieveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::from_args(&args.common)?;
    let height = cfg.height_bound.unwrap_or(1.0);
    height_box(Some(height))?;
    let bounds = if cfg.grid.is_empty() { vec![100, 1000, 10_000] } else { cfg.integer_grid()? };
    let mut rows = Vec::new();
    for &x in &bounds {
        let pcfg = PairStatConfig { ell: cfg.ell, t1: args.t1, t2: args.t2, d: args.d, prime_bound: x, curve_height: height };
        let stat = mean_square_statistic(&pcfg, PAIR_BUDGET).map_err(|e| config(e.to_string()))?;
        rows.push(SieveRow { prime_bound: x, d: args.d, t1: args.t1, t2: args.t2, stat });
    }
    let preamble = Preamble {
        kind: "sieve",
        settings: cfg.settings(height),
        notes: vec![
            "delta_model = N(t1,d) N(t2,d) / (ell^3 - ell)^2 (independent Frobenius in the det = d coset)".into(),
            "primes dividing either discriminant are excluded".into(),
        ],
    };
    out.write_all(sieve_csv(&preamble, &rows).as_bytes())?;
    Ok(())
}
