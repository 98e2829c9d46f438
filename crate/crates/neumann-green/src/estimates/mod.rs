//! Quantitative verifiers: mixed norms, the measurable forms of the three
//! structural conditions, pointwise/Hölder/L^p growth of the kernel near the
//! pole, the Gaussian envelope, and the exponential-weight machinery.

mod bounds;
mod conditions;
mod davies;
mod norms;

pub use bounds::*;
pub use conditions::*;
pub use davies::*;
pub use norms::*;

use std::fmt::Write as _;

/// One verified quantity: value against threshold, with the refinement-stability
/// figure when the verifier ran a sweep (NaN otherwise).
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub quantity: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub stability: f64,
    pub seed: u64,
}

impl ReportRow {
    pub fn new(quantity: &str, value: f64, threshold: f64, pass: bool, stability: f64, seed: u64) -> ReportRow {
        ReportRow { quantity: quantity.to_string(), value, threshold, pass, stability, seed }
    }
}

/// Collected rows of one experiment run.
#[derive(Debug, Clone, Default)]
pub struct EstimateReport {
    pub rows: Vec<ReportRow>,
}

impl EstimateReport {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,value,threshold,verdict,stability,seed\n");
        for r in &self.rows {
            let verdict = if r.pass { "pass" } else { "fail" };
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{},{},{}",
                r.quantity,
                r.value,
                r.threshold,
                verdict,
                if r.stability.is_nan() { "-".to_string() } else { format!("{:.6e}", r.stability) },
                r.seed
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let verdict = if r.pass { "PASS" } else { "FAIL" };
            let stab = if r.stability.is_nan() { String::new() } else { format!("  (stability {:.3})", r.stability) };
            let _ = writeln!(
                s,
                "[{verdict}] {:<42} value {:>13.6e}  threshold {:>13.6e}{stab}",
                r.quantity, r.value, r.threshold
            );
        }
        s
    }
}

/// Ordinary least squares y = a + b x. Returns (intercept, slope, max residual).
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut resid = 0.0f64;
    for (x, y) in xs.iter().zip(ys) {
        resid = resid.max((y - (intercept + slope * x)).abs());
    }
    Some((intercept, slope, resid))
}

/// Frobenius magnitude of the N x N kernel matrix at one evaluation.
pub fn matrix_abs(entries: &[f64]) -> f64 {
    entries.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative spread max/min - 1 of a set of fitted constants; the stability
/// figure every sweep-based verdict reports.
pub fn relative_spread(values: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    hi / lo - 1.0
}
