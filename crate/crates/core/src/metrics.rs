//! Recalculation of reported metrics: periodic NPV/IRR and ratios.
//!
//! IRR follows the usual spreadsheet convention: flows are one period apart,
//! period 0 is undiscounted, and the default starting guess is 10%.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Cell, CellKind};
use crate::numeric::exact_sum;

pub const DEFAULT_IRR_GUESS: f64 = 0.10;
/// Two-decimal percentages ("83.93%").
pub const RATE_TOLERANCE: f64 = 0.00005;
/// Integer percentages ("89%").
pub const RATIO_TOLERANCE: f64 = 0.005;

const MIN_RATE: f64 = -0.999_999;
const MAX_RATE: f64 = 1e6;
const SCAN_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Irr,
    Ratio,
}

impl MetricKind {
    pub fn default_tolerance(self) -> f64 {
        match self {
            MetricKind::Irr => RATE_TOLERANCE,
            MetricKind::Ratio => RATIO_TOLERANCE,
        }
    }

    /// Percentage digits shown when the reported figure doesn't say.
    pub fn default_decimals(self) -> u8 {
        match self {
            MetricKind::Irr => 2,
            MetricKind::Ratio => 0,
        }
    }
}

/// A figure as the model reported it. `decimals` is the displayed precision,
/// which fixes how close a recalculation has to come.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reported {
    pub value: f64,
    pub decimals: Option<u8>,
    /// Written as a percentage.
    pub percent: bool,
}

impl Reported {
    pub fn exact(value: f64) -> Reported {
        Reported {
            value,
            decimals: None,
            percent: false,
        }
    }

    pub fn from_cell(cell: Cell) -> Reported {
        Reported {
            value: cell.value,
            decimals: Some(cell.decimals),
            percent: cell.kind == CellKind::Rate,
        }
    }

    /// Half a unit in the last displayed digit, or the metric default.
    pub fn tolerance(&self, kind: MetricKind) -> f64 {
        match self.decimals {
            Some(d) => {
                let exp = d as i32 + if self.percent { 2 } else { 0 };
                0.5 * 10f64.powi(-exp)
            }
            None => kind.default_tolerance(),
        }
    }

    pub fn display_decimals(&self, kind: MetricKind) -> u8 {
        match (self.decimals, self.percent) {
            (Some(d), true) => d,
            _ => kind.default_decimals(),
        }
    }
}

/// Net present value of periodic flows; `flows[0]` is undiscounted.
pub fn npv(rate: f64, flows: &[f64]) -> Result<f64> {
    if rate.is_nan() || rate <= -1.0 {
        return Err(Error::RateOutOfDomain(rate));
    }
    let base = 1.0 + rate;
    Ok(flows.iter().enumerate().map(|(k, f)| f / base.powi(k as i32)).sum())
}

/// NPV and its derivative in the discount factor `d = 1/(1+r)`, Horner form.
fn npv_in_discount(d: f64, flows: &[f64]) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &f in flows.iter().rev() {
        slope = slope * d + value;
        value = value * d + f;
    }
    (value, slope)
}

/// NPV scaled by a positive factor so it stays finite for discount factors
/// above one. Only its sign is meaningful.
fn npv_sign_value(d: f64, flows: &[f64]) -> f64 {
    if d <= 1.0 {
        npv_in_discount(d, flows).0
    } else {
        let inv = 1.0 / d;
        flows.iter().fold(0.0, |acc, &f| acc * inv + f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrrSolution {
    pub rate: f64,
    /// More than one sign change in the flows, or several roots found.
    pub possibly_non_unique: bool,
    pub roots_found: usize,
}

/// Internal rate of return: the root of [`npv`] nearest `guess`.
///
/// The whole rate domain is scanned for sign changes and each bracket is
/// refined with bisection-safeguarded Newton steps.
pub fn irr(flows: &[f64], guess: f64) -> Result<IrrSolution> {
    let has_pos = flows.iter().any(|&f| f > 0.0);
    let has_neg = flows.iter().any(|&f| f < 0.0);
    if flows.len() < 2 || !has_pos || !has_neg {
        return Err(Error::UndefinedIrr);
    }
    let sign_changes = flows
        .iter()
        .filter(|&&f| f != 0.0)
        .map(|&f| f > 0.0)
        .collect::<Vec<_>>()
        .windows(2)
        .filter(|w| w[0] != w[1])
        .count();

    // Scan in log(1 + r), which spreads the domain evenly.
    let lo = (1.0 + MIN_RATE).ln();
    let hi = (1.0 + MAX_RATE).ln();
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let rate_at = |i: usize| (lo + step * i as f64).exp() - 1.0;
    let sign_at = |r: f64| npv_sign_value(1.0 / (1.0 + r), flows);

    let mut roots = Vec::new();
    let mut prev_r = rate_at(0);
    let mut prev_v = sign_at(prev_r);
    if prev_v == 0.0 {
        roots.push(prev_r);
    }
    for i in 1..SCAN_POINTS {
        let r = rate_at(i);
        let v = sign_at(r);
        if v == 0.0 {
            roots.push(r);
        } else if prev_v != 0.0 && (v > 0.0) != (prev_v > 0.0) {
            roots.push(refine(flows, prev_r, r));
        }
        prev_r = r;
        prev_v = v;
    }
    if roots.is_empty() {
        return Err(Error::IrrNoConvergence);
    }
    // Flows summing to exactly zero have a root at exactly 0.
    if exact_sum(flows.iter().copied()) == 0.0 {
        for r in roots.iter_mut().filter(|r| r.abs() < 1e-9) {
            *r = 0.0;
        }
    }
    let rate = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - guess).abs().total_cmp(&(b - guess).abs()))
        .expect("non-empty");

    let scale = flows.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    let residual = npv(rate, flows)?;
    if residual.is_nan() || residual.abs() > 1e-9 * scale {
        return Err(Error::IrrNoConvergence);
    }
    Ok(IrrSolution {
        rate,
        possibly_non_unique: sign_changes > 1 || roots.len() > 1,
        roots_found: roots.len(),
    })
}

/// Safeguarded Newton iteration inside a bracketing interval of rates.
fn refine(flows: &[f64], mut a: f64, mut b: f64) -> f64 {
    let f = |r: f64| {
        let d = 1.0 / (1.0 + r);
        let (v, dv_dd) = npv_in_discount(d, flows);
        // dNPV/dr = dNPV/dd * dd/dr with dd/dr = -d^2.
        (v, -dv_dd * d * d)
    };
    let fa_pos = sign_positive(flows, a);
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if (v > 0.0) == fa_pos {
            a = x;
        } else {
            b = x;
        }
        let newton = x - v / dv;
        let next = if dv.is_finite() && dv != 0.0 && newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || next == a || next == b {
            return next;
        }
        x = next;
    }
    x
}

fn sign_positive(flows: &[f64], r: f64) -> bool {
    npv_sign_value(1.0 / (1.0 + r), flows) > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RatioFormula {
    /// A / (A + B): debt over debt plus equity.
    #[default]
    TopOverTotal,
    /// A / B: cover-ratio shape, e.g. cash available over debt service.
    TopOverBottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioComponents {
    pub top: f64,
    pub bottom_extra: f64,
    #[serde(default)]
    pub formula: RatioFormula,
}

pub fn ratio_value(c: &RatioComponents) -> Result<f64> {
    let denominator = match c.formula {
        RatioFormula::TopOverTotal => c.top + c.bottom_extra,
        RatioFormula::TopOverBottom => c.bottom_extra,
    };
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(c.top / denominator)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVerification {
    pub kind: MetricKind,
    pub recalculated: f64,
    pub reported: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Percentage digits used when rendering.
    pub decimals: u8,
}

/// Compares a recalculated figure with the reported one.
pub fn verify_metric(recalculated: f64, reported: f64, tol: f64) -> MetricVerification {
    let discrepancy = recalculated - reported;
    MetricVerification {
        kind: MetricKind::Irr,
        recalculated,
        reported,
        discrepancy,
        tolerance: tol,
        pass: discrepancy.abs() <= tol,
        decimals: 2,
    }
}

/// [`verify_metric`] with tolerance and display precision taken from how the
/// figure was reported.
pub fn verify_reported(kind: MetricKind, recalculated: f64, reported: &Reported) -> MetricVerification {
    MetricVerification {
        kind,
        decimals: reported.display_decimals(kind),
        ..verify_metric(recalculated, reported.value, reported.tolerance(kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_cell;
    use proptest::prelude::*;

    const PROJECT: [f64; 5] = [-60.0, 60.0, 60.0, 60.0, 0.0];
    const SHAREHOLDERS: [f64; 5] = [60.0, -30.0, -30.0, -30.0, 0.0];

    #[test]
    fn npv_examples() {
        assert_eq!(npv(0.0, &PROJECT).unwrap(), 120.0);
        assert!(npv(0.8393, &PROJECT).unwrap().abs() < 0.01);
        assert!(npv(0.10, &[-100.0, 110.0]).unwrap().abs() < 1e-12);
        assert!(matches!(npv(-1.0, &PROJECT), Err(Error::RateOutOfDomain(_))));
    }

    #[test]
    fn irr_reproduces_reported_returns() {
        let p = irr(&PROJECT, DEFAULT_IRR_GUESS).unwrap();
        assert!((p.rate - 0.8393).abs() <= 0.00005, "{}", p.rate);
        assert!(!p.possibly_non_unique);
        let s = irr(&SHAREHOLDERS, DEFAULT_IRR_GUESS).unwrap();
        assert!((s.rate - 0.2338).abs() <= 0.00005, "{}", s.rate);
        let simple = irr(&[-100.0, 110.0], DEFAULT_IRR_GUESS).unwrap();
        assert!((simple.rate - 0.1).abs() < 1e-12);
        assert_eq!(irr(&[-60.0, 60.0], DEFAULT_IRR_GUESS).unwrap().rate, 0.0);
    }

    #[test]
    fn irr_errors() {
        assert!(matches!(irr(&[10.0, 20.0], 0.1), Err(Error::UndefinedIrr)));
        assert!(matches!(irr(&[0.0, 0.0], 0.1), Err(Error::UndefinedIrr)));
        assert!(matches!(irr(&[-5.0], 0.1), Err(Error::UndefinedIrr)));
    }

    #[test]
    fn multiple_roots_flagged_and_nearest_guess_chosen() {
        // (1+r)^2 - 2.3(1+r) + 1.32 = 0 has roots r = 0.1 and r = 0.2.
        let flows = [-1.0, 2.3, -1.32];
        let low = irr(&flows, 0.05).unwrap();
        let high = irr(&flows, 0.25).unwrap();
        assert!(low.possibly_non_unique && high.possibly_non_unique);
        assert!((low.rate - 0.1).abs() < 1e-9, "{}", low.rate);
        assert!((high.rate - 0.2).abs() < 1e-9, "{}", high.rate);
    }

    #[test]
    fn ratios() {
        let de = RatioComponents {
            top: 79.0,
            bottom_extra: 10.0,
            formula: RatioFormula::TopOverTotal,
        };
        assert!((ratio_value(&de).unwrap() - 0.887_640_449).abs() < 1e-9);
        let zero = RatioComponents {
            top: 0.0,
            bottom_extra: 5.0,
            formula: RatioFormula::TopOverTotal,
        };
        assert_eq!(ratio_value(&zero).unwrap(), 0.0);
        let half = RatioComponents {
            top: 50.0,
            bottom_extra: 50.0,
            formula: RatioFormula::TopOverTotal,
        };
        assert_eq!(ratio_value(&half).unwrap(), 0.5);
        let bad = RatioComponents {
            top: 5.0,
            bottom_extra: -5.0,
            formula: RatioFormula::TopOverTotal,
        };
        assert!(matches!(ratio_value(&bad), Err(Error::ZeroDenominator)));
        let cover = RatioComponents {
            top: 65.0,
            bottom_extra: 35.0,
            formula: RatioFormula::TopOverBottom,
        };
        assert!((ratio_value(&cover).unwrap() - 65.0 / 35.0).abs() < 1e-15);
    }

    #[test]
    fn verification_examples() {
        let v = verify_metric(0.8393, 0.8393, RATE_TOLERANCE);
        assert!(v.pass && v.discrepancy == 0.0);
        let reported = Reported::from_cell(parse_cell("89%").unwrap());
        assert_eq!(reported.tolerance(MetricKind::Ratio), 0.005);
        assert!(verify_reported(MetricKind::Ratio, 0.88764, &reported).pass);
        let wrong = verify_metric(0.8393, 0.2338, RATE_TOLERANCE);
        assert!(!wrong.pass);
        assert!((wrong.discrepancy - 0.6055).abs() < 1e-12);
    }

    #[test]
    fn reported_precision_sets_tolerance() {
        let two = Reported::from_cell(parse_cell("83.93%").unwrap());
        assert!((two.tolerance(MetricKind::Irr) - 0.00005).abs() < 1e-18);
        assert_eq!(two.display_decimals(MetricKind::Irr), 2);
        assert_eq!(Reported::exact(0.8393).tolerance(MetricKind::Irr), RATE_TOLERANCE);
    }

    fn bisection_oracle(flows: &[f64]) -> f64 {
        // NPV decreases in the rate for an outflow followed by inflows.
        let (mut lo, mut hi) = (-0.999_999_f64, 1e6_f64);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            let v: f64 = flows
                .iter()
                .enumerate()
                .map(|(k, f)| f / (1.0 + mid).powi(k as i32))
                .sum();
            if v > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    proptest! {
        #[test]
        fn npv_vanishes_at_irr(flows in proptest::collection::vec(-1000.0f64..1000.0, 2..12)) {
            if let Ok(sol) = irr(&flows, DEFAULT_IRR_GUESS) {
                let scale = flows.iter().fold(0.0f64, |m, f| m.max(f.abs()));
                prop_assert!(npv(sol.rate, &flows).unwrap().abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn scale_invariant(flows in proptest::collection::vec(-1000i32..1000, 2..10), k in 0.01f64..1000.0) {
            let flows: Vec<f64> = flows.into_iter().map(f64::from).collect();
            if let Ok(a) = irr(&flows, DEFAULT_IRR_GUESS) {
                if !a.possibly_non_unique {
                    let scaled: Vec<f64> = flows.iter().map(|f| f * k).collect();
                    let b = irr(&scaled, DEFAULT_IRR_GUESS).unwrap();
                    prop_assert!((a.rate - b.rate).abs() <= 1e-9 * (1.0 + a.rate.abs()));
                }
            }
        }

        #[test]
        fn conventional_flows_match_bisection(
            outlay in 1.0f64..1000.0,
            inflows in proptest::collection::vec(0.0f64..500.0, 1..10),
        ) {
            prop_assume!(inflows.iter().any(|&f| f > 0.0));
            let mut flows = vec![-outlay];
            flows.extend(inflows);
            let sol = irr(&flows, DEFAULT_IRR_GUESS).unwrap();
            prop_assert!(!sol.possibly_non_unique);
            let oracle = bisection_oracle(&flows);
            prop_assert!((sol.rate - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), "{} vs {}", sol.rate, oracle);
        }
    }
}
