//! CSV rendering. Values that may exceed `f64` are formatted from their
//! natural logarithms.

use std::fmt::Write;

use gl2census_core::census::{CensusReport, DensityRow};
use gl2census_core::sieve::PairStatistic;

/// Scientific notation for `exp(ln)`, valid for any finite `ln`.
pub fn sci_from_ln(ln: f64) -> String {
    let log10 = ln / std::f64::consts::LN_10;
    let mut exponent = log10.floor();
    let mut mantissa = 10f64.powf(log10 - exponent);
    if format!("{mantissa:.6}").starts_with("10") {
        mantissa /= 10.0;
        exponent += 1.0;
    }
    format!("{mantissa:.6}e{exponent:+}")
}

fn ratio(ln: Option<f64>) -> String {
    ln.map_or_else(|| "0".to_owned(), sci_from_ln)
}

pub struct Preamble<'a> {
    pub kind: &'a str,
    pub settings: String,
    pub notes: Vec<String>,
}

fn preamble(p: &Preamble<'_>) -> String {
    let mut s = format!("# gl2census {} {}\n# {}\n", gl2census_core::VERSION, p.kind, p.settings);
    for n in &p.notes {
        writeln!(s, "# {n}").expect("string write");
    }
    s
}

pub fn census_csv(p: &Preamble<'_>, labels: &[String], report: Option<&CensusReport>) -> String {
    let mut s = preamble(p);
    s.push_str("cutoff_X,M_hat,F_hat,theory_M,theory_F,ratio_M,ratio_F\n");
    if let Some(report) = report {
        for (label, row) in labels.iter().zip(&report.rows) {
            writeln!(
                s,
                "{label},{},{},{},{},{},{}",
                row.m_hat,
                row.f_hat,
                sci_from_ln(row.ln_theory_m),
                sci_from_ln(row.ln_theory_f),
                ratio(row.ln_ratio_m()),
                ratio(row.ln_ratio_f()),
            )
            .expect("string write");
        }
    }
    s
}

pub fn density_csv(p: &Preamble<'_>, rows: &[DensityRow]) -> String {
    let mut s = preamble(p);
    s.push_str("height_X,n_C,n_D,n_E,n_S,d_ratio,s_ratio\n");
    for r in rows {
        writeln!(s, "{r}").expect("string write");
    }
    s
}

pub struct SieveRow {
    pub prime_bound: u64,
    pub d: u64,
    pub t1: u64,
    pub t2: u64,
    pub stat: PairStatistic,
}

pub fn sieve_csv(p: &Preamble<'_>, rows: &[SieveRow]) -> String {
    let mut s = preamble(p);
    s.push_str("X,d,t1,t2,delta_model,statistic,normalized,n_pairs\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{:.9},{:.9},{}",
            r.prime_bound, r.d, r.t1, r.t2, r.stat.delta, r.stat.statistic, r.stat.normalized, r.stat.n_pairs
        )
        .expect("string write");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_from_logs() {
        assert_eq!(sci_from_ln(0.0), "1.000000e+0");
        assert_eq!(sci_from_ln(1000f64.ln()), "1.000000e+3");
        assert_eq!(sci_from_ln(0.5f64.ln()), "5.000000e-1");
        // Far beyond f64 range.
        let s = sci_from_ln(5000.0 * std::f64::consts::LN_10);
        assert!(s.ends_with("e+5000"), "{s}");
        assert_eq!(s.parse::<f64>().unwrap(), f64::INFINITY);
    }
}
