//! Confidence intervals and the rows of a bound table.

use serde::Serialize;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

/// Wilson score interval at 99% for `hits` successes in `n` trials, as
/// `(center, half_width)`.
pub fn wilson(hits: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let p = hits / nf;
    let z2 = Z99 * Z99;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z99 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).max(0.0).sqrt();
    (center, half)
}

/// Mean and standard error of a sample.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `measured ≤ bound + slack`.
    AtMost,
    /// `measured ≥ bound − slack`.
    AtLeast,
    /// Two-sided: `|measured − bound| ≤ slack`.
    Near,
    /// Reported without a verdict.
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Reported,
    /// No item of this kind exists in the instance.
    Vacuous,
}

/// One statistical invariant on one instance: the item with the smallest
/// margin, and how many items were checked.
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub invariant: String,
    pub direction: Direction,
    pub scope: String,
    pub bound: f64,
    pub measured: f64,
    /// Half-width of the interval the tolerance is built from.
    pub ci: f64,
    /// Allowed deviation: a multiple of `ci`.
    pub tolerance: f64,
    pub items: usize,
    pub failures: usize,
    pub verdict: Verdict,
}

impl BoundRow {
    pub fn margin(direction: Direction, bound: f64, measured: f64, tolerance: f64) -> f64 {
        match direction {
            Direction::AtMost => bound + tolerance - measured,
            Direction::AtLeast => measured - (bound - tolerance),
            Direction::Near => tolerance - (measured - bound).abs(),
            Direction::Report => f64::INFINITY,
        }
    }
}

/// Accumulates items for one invariant and keeps the tightest.
pub struct RowBuilder {
    row: BoundRow,
    best_margin: f64,
}

impl RowBuilder {
    pub fn new(invariant: &str, direction: Direction) -> RowBuilder {
        RowBuilder {
            row: BoundRow {
                invariant: invariant.to_string(),
                direction,
                scope: String::new(),
                bound: f64::NAN,
                measured: f64::NAN,
                ci: f64::NAN,
                tolerance: f64::NAN,
                items: 0,
                failures: 0,
                verdict: Verdict::Vacuous,
            },
            best_margin: f64::INFINITY,
        }
    }

    /// Adds one item; `ci` is a half-width and the tolerance is `k·ci`.
    pub fn add(&mut self, scope: impl FnOnce() -> String, bound: f64, measured: f64, ci: f64, k: f64) {
        let tol = k * ci;
        let margin = BoundRow::margin(self.row.direction, bound, measured, tol);
        self.row.items += 1;
        if margin < 0.0 {
            self.row.failures += 1;
        }
        let first = self.row.items == 1;
        let tighter = match self.row.direction {
            Direction::Report => measured > self.row.measured || first,
            _ => margin < self.best_margin || first,
        };
        if tighter {
            self.best_margin = margin;
            self.row.scope = scope();
            self.row.bound = bound;
            self.row.measured = measured;
            self.row.ci = ci;
            self.row.tolerance = tol;
        }
    }

    pub fn finish(mut self) -> BoundRow {
        self.row.verdict = if self.row.items == 0 {
            Verdict::Vacuous
        } else if self.row.direction == Direction::Report {
            Verdict::Reported
        } else if self.row.failures == 0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self.row
    }
}
