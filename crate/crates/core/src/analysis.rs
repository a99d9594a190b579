//! Batch statistics and asymptotic reference curves.

use serde::{Deserialize, Serialize};

use crate::engine::TrialResult;
use crate::protocol::log_in_base;
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A proportion with its Wilson score interval.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Rate {
    /// Wilson score interval at 95%. `trials` must be positive.
    pub fn wilson(hits: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::EmptyBatch);
        }
        let n = trials as f64;
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Ok(Rate {
            hits,
            trials,
            rate: p,
            lo: (center - half).clamp(0.0, 1.0).min(p),
            hi: (center + half).clamp(0.0, 1.0).max(p),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: u64,
    pub mean_phases: f64,
    pub median_phases: f64,
    /// Nearest-rank 95th percentile.
    pub p95_phases: u32,
    pub max_phases: u32,
    pub agreement: Rate,
    pub termination: Rate,
    /// Over trials with unanimous honest inputs; `None` if there were none.
    pub validity: Option<Rate>,
    pub mean_q: f64,
    /// Trials with at least one recorded violation.
    pub trials_with_violations: u64,
}

/// Order-independent statistics over a batch.
pub fn summarize(results: &[TrialResult]) -> Result<BatchSummary> {
    if results.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let trials = results.len() as u64;
    let mut phases: Vec<u32> = results.iter().map(|r| r.phases_used).collect();
    phases.sort_unstable();
    let count = |pred: &dyn Fn(&TrialResult) -> bool| results.iter().filter(|r| pred(r)).count() as u64;

    let unanimous = count(&|r| r.inputs_unanimous);
    let validity = if unanimous == 0 {
        None
    } else {
        Some(Rate::wilson(count(&|r| r.inputs_unanimous && r.validity_ok), unanimous)?)
    };
    Ok(BatchSummary {
        trials,
        mean_phases: phases.iter().map(|&p| p as u64).sum::<u64>() as f64 / trials as f64,
        median_phases: median(&phases),
        p95_phases: percentile(&phases, 0.95),
        max_phases: *phases.last().unwrap(),
        agreement: Rate::wilson(count(&|r| r.agreement), trials)?,
        termination: Rate::wilson(count(&|r| r.terminated), trials)?,
        validity,
        mean_q: results.iter().map(|r| r.q as u64).sum::<u64>() as f64 / trials as f64,
        trials_with_violations: count(&|r| !r.violations.is_empty()),
    })
}

/// Median of sorted values; the mean of the middle pair for even lengths.
pub fn median(sorted: &[u32]) -> f64 {
    let len = sorted.len();
    if len % 2 == 1 {
        sorted[len / 2] as f64
    } else {
        (sorted[len / 2 - 1] as f64 + sorted[len / 2] as f64) / 2.0
    }
}

/// Nearest-rank percentile of non-empty sorted values.
pub fn percentile(sorted: &[u32], p: f64) -> u32 {
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Unscaled asymptotic round counts at `n` nodes and `x` faults.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurves {
    pub x: f64,
    /// `min(x² log n / n, x / log n)`: the committee protocol.
    pub upper_new: f64,
    /// `x / log n`: the earlier committee-coin upper bound.
    pub upper_cc: f64,
    /// `x / √(n log n)`: the adaptive-adversary lower bound.
    pub lower_bb: f64,
}

pub fn reference_curves(n: u32, x: f64, log_base: f64) -> Result<ReferenceCurves> {
    if n < 2 {
        return Err(Error::InvalidParam {
            name: "n",
            reason: "reference curves need n >= 2".into(),
        });
    }
    if !(log_base > 1.0) {
        return Err(Error::InvalidParam {
            name: "log_base",
            reason: format!("{log_base} <= 1"),
        });
    }
    if !(x >= 0.0) || 3.0 * x >= n as f64 {
        return Err(Error::OutOfRegime { n, x });
    }
    let nf = n as f64;
    let log_n = log_in_base(nf, log_base);
    let upper_cc = x / log_n;
    Ok(ReferenceCurves {
        x,
        upper_new: (x * x * log_n / nf).min(upper_cc),
        upper_cc,
        lower_bb: x / (nf * log_n).sqrt(),
    })
}

/// `points` evenly spaced values of `x` in `[0, x_max]`, each clamped below
/// `n/3`, with their reference curves.
pub fn reference_series(n: u32, x_max: f64, points: u32, log_base: f64) -> Result<Vec<ReferenceCurves>> {
    if points < 2 {
        return Err(Error::InvalidParam {
            name: "points",
            reason: "need at least two points".into(),
        });
    }
    let top = x_max.min((n as f64 - 1.0) / 3.0);
    (0..points)
        .map(|i| reference_curves(n, top * i as f64 / (points - 1) as f64, log_base))
        .collect()
}

/// Smallest `x` at which the quadratic term stops being the smaller one,
/// i.e. `x · log² n >= n`.
pub fn crossover(n: u32, log_base: f64) -> f64 {
    let log_n = log_in_base(n as f64, log_base);
    n as f64 / (log_n * log_n)
}

/// Least-squares scale `k` for `observed ≈ k · reference` in log space, over
/// pairs where both values are positive.
pub fn fit_scale(observed: &[f64], reference: &[f64]) -> Option<f64> {
    let logs: Vec<f64> = observed
        .iter()
        .zip(reference)
        .filter(|(o, r)| **o > 0.0 && **r > 0.0)
        .map(|(o, r)| o.ln() - r.ln())
        .collect();
    if logs.is_empty() {
        return None;
    }
    Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// Slope of `ln y` against `ln x` by ordinary least squares.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TrialResult;
    use proptest::prelude::*;

    fn result(phases: u32, agreement: bool, unanimous: bool, valid: bool, q: u32) -> TrialResult {
        TrialResult {
            trial: 0,
            seed: 0,
            n: 4,
            t: 1,
            c: 1,
            adversary: "null".into(),
            outputs: vec![],
            agreement,
            validity_ok: valid,
            inputs_unanimous: unanimous,
            terminated: true,
            phases_used: phases,
            rounds_used: 2 * phases,
            q,
            messages_sent: 0,
            max_payload_bits: 0,
            violations: vec![],
            conflicts: 0,
            spoiled_phases: 0,
            first_finish: None,
            audits: vec![],
            trace: None,
        }
    }

    #[test]
    fn all_agree_gives_unit_upper_bound() {
        let rs: Vec<_> = (0..100).map(|_| result(2, true, false, true, 0)).collect();
        let s = summarize(&rs).unwrap();
        assert_eq!(s.agreement.rate, 1.0);
        assert_eq!(s.agreement.hi, 1.0);
        assert!(s.agreement.lo > 0.96 && s.agreement.lo < 0.97);
        assert_eq!(s.validity, None);
    }

    #[test]
    fn median_and_mean() {
        let rs: Vec<_> = [2, 2, 4].iter().map(|&p| result(p, true, true, true, 1)).collect();
        let s = summarize(&rs).unwrap();
        assert_eq!(s.median_phases, 2.0);
        assert!((s.mean_phases - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.p95_phases, 4);
        assert_eq!(s.mean_q, 1.0);
        assert_eq!(s.validity.unwrap().rate, 1.0);
        assert_eq!(median(&[1, 2, 3, 10]), 2.5);
    }

    #[test]
    fn single_and_empty() {
        let s = summarize(&[result(3, false, false, true, 0)]).unwrap();
        assert_eq!(s.agreement.rate, 0.0);
        assert_eq!(s.agreement.lo, 0.0);
        assert!(s.agreement.hi > 0.7 && s.agreement.hi < 0.8);
        assert_eq!(summarize(&[]), Err(Error::EmptyBatch));
    }

    #[test]
    fn wilson_reference_value() {
        // 8 of 10: textbook interval (0.4902, 0.9433).
        let r = Rate::wilson(8, 10).unwrap();
        assert!((r.lo - 0.4902).abs() < 1e-4, "{}", r.lo);
        assert!((r.hi - 0.9433).abs() < 1e-4, "{}", r.hi);
    }

    #[test]
    fn curve_examples() {
        let c = reference_curves(1024, 32.0, 2.0).unwrap();
        assert!((c.upper_new - 3.2).abs() < 1e-12);
        assert!((c.upper_cc - 3.2).abs() < 1e-12);
        assert!((c.lower_bb - 32.0 / (10240f64).sqrt()).abs() < 1e-12);

        let n = 1u32 << 20;
        let c = reference_curves(n, 32768.0, 2.0).unwrap();
        assert!((c.upper_new - 1638.4).abs() < 1e-9);

        let c = reference_curves(n, 1024.0, 2.0).unwrap();
        assert!((c.upper_new - 1024.0 * 1024.0 * 20.0 / n as f64).abs() < 1e-9);
        assert!(c.upper_new < c.upper_cc);

        assert!(matches!(reference_curves(30, 10.0, 2.0), Err(Error::OutOfRegime { .. })));
        assert!(reference_curves(1, 0.0, 2.0).is_err());
    }

    #[test]
    fn crossover_is_where_terms_meet() {
        let n = 1u32 << 16;
        let x = crossover(n, 2.0);
        assert_eq!(x, 256.0);
        let c = reference_curves(n, x, 2.0).unwrap();
        assert!((c.upper_new - c.upper_cc).abs() < 1e-9);
    }

    #[test]
    fn fits() {
        let r = [1.0, 2.0, 4.0];
        let o = [3.0, 6.0, 12.0];
        assert!((fit_scale(&o, &r).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(fit_scale(&[0.0], &[1.0]), None);
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, (i * i) as f64 * 5.0)).collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn series_stays_in_regime() {
        let s = reference_series(64, 100.0, 5, 2.0).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0].x, 0.0);
        assert!(3.0 * s[4].x < 64.0);
    }

    proptest! {
        #[test]
        fn wilson_contains_estimate(trials in 1u64..5000, frac in 0.0f64..=1.0) {
            let hits = (trials as f64 * frac).round() as u64;
            let r = Rate::wilson(hits, trials).unwrap();
            prop_assert!(0.0 <= r.lo && r.lo <= r.rate && r.rate <= r.hi && r.hi <= 1.0);
        }

        #[test]
        fn summary_is_order_independent(
            (v, shuffled) in prop::collection::vec((1u32..50, any::<bool>(), any::<bool>(), 0u32..9), 1..60)
                .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
        ) {
            let build = |v: &[(u32, bool, bool, u32)]| -> Vec<TrialResult> {
                v.iter().map(|&(p, a, u, q)| result(p, a, u, a || !u, q)).collect()
            };
            let s1 = summarize(&build(&v)).unwrap();
            let s2 = summarize(&build(&shuffled)).unwrap();
            prop_assert_eq!(s1.median_phases, s2.median_phases);
            prop_assert_eq!(s1.p95_phases, s2.p95_phases);
            prop_assert_eq!(s1.agreement, s2.agreement);
            prop_assert_eq!(s1.validity, s2.validity);
            prop_assert!((s1.mean_phases - s2.mean_phases).abs() < 1e-9);
        }

        #[test]
        fn new_bound_never_exceeds_old(n in 2u32..100_000, frac in 0.0f64..0.333) {
            let x = (n as f64 * frac).floor();
            prop_assume!(3.0 * x < n as f64);
            let c = reference_curves(n, x, 2.0).unwrap();
            prop_assert!(c.upper_new <= c.upper_cc);
            prop_assert!(c.lower_bb <= c.upper_cc + 1e-12);
        }
    }
}
