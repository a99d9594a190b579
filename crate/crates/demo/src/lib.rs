//! Browser bindings. Each export returns a JSON string; the `*_json`
//! functions hold the logic so they can be tested natively. Seeds are
//! `u32` at the boundary to keep JavaScript callers away from BigInt.

use committee_ba::adversary::AdversarySpec;
use committee_ba::analysis::{crossover, reference_series, ReferenceCurves};
use committee_ba::coin::{
    guarantee_from_histogram, pz_bound, AdversaryShift, CoinTrialSetup, SumHistogram,
    ONE_SIDED_FLOOR,
};
use committee_ba::engine::{run_trial, InputPattern, TrialConfig, TrialResult};
use committee_ba::protocol::{committee_count, ProtocolParams, DEFAULT_LOG_BASE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct CoinReport {
    pub n: u32,
    pub f: u32,
    pub g: u32,
    pub trials: u64,
    /// `(honest sum, count)` in increasing sum order.
    pub histogram: Vec<(i64, u64)>,
    pub above: f64,
    pub below: f64,
    pub agreement: f64,
    pub pz_bound: f64,
    pub floor: f64,
}

#[derive(Serialize)]
pub struct SimulationReport {
    pub c: u32,
    pub s: u32,
    pub result: TrialResult,
}

#[derive(Serialize)]
pub struct CurveReport {
    pub crossover: f64,
    pub points: Vec<ReferenceCurves>,
}

pub fn coin_distribution_json(n: u32, f: u32, trials: u32, seed: u64) -> Result<String, String> {
    let setup = CoinTrialSetup::with_faulty(n, f).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hist = SumHistogram::sample(setup.g, trials as u64, &mut rng).map_err(|e| e.to_string())?;
    let est = guarantee_from_histogram(&hist, &setup, AdversaryShift::WorstCase);
    let report = CoinReport {
        n,
        f,
        g: setup.g,
        trials: trials as u64,
        histogram: hist.iter().collect(),
        above: est.above.p(),
        below: est.below.p(),
        agreement: est.empirical_delta,
        pz_bound: pz_bound(&setup).map_err(|e| e.to_string())?,
        floor: ONE_SIDED_FLOOR,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_json(
    n: u32,
    t: u32,
    alpha: f64,
    adversary: &str,
    inputs: &str,
    seed: u64,
    las_vegas: bool,
) -> Result<String, String> {
    let params = ProtocolParams::new(n, t)
        .with_alpha(alpha)
        .with_las_vegas(las_vegas);
    let layout = committee_count(&params).map_err(|e| e.to_string())?;
    let adversary: AdversarySpec = adversary.parse().map_err(|e: committee_ba::Error| e.to_string())?;
    let inputs: InputPattern = inputs.parse().map_err(|e: committee_ba::Error| e.to_string())?;
    let cfg = TrialConfig::new(params, adversary, seed).with_inputs(inputs);
    let result = run_trial(&cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&SimulationReport {
        c: layout.c,
        s: layout.s,
        result,
    })
    .map_err(|e| e.to_string())
}

pub fn curves_json(n: u32, x_max: f64, points: u32) -> Result<String, String> {
    let points = reference_series(n, x_max, points, DEFAULT_LOG_BASE).map_err(|e| e.to_string())?;
    serde_json::to_string(&CurveReport {
        crossover: crossover(n, DEFAULT_LOG_BASE),
        points,
    })
    .map_err(|e| e.to_string())
}

/// Honest-sum histogram and one-sided escape rates for a committee of `n`
/// with `f` adversarial members.
#[wasm_bindgen]
pub fn coin_distribution(n: u32, f: u32, trials: u32, seed: u32) -> Result<String, JsError> {
    coin_distribution_json(n, f, trials, seed as u64).map_err(|e| JsError::new(&e))
}

/// One trial with per-phase audits.
#[wasm_bindgen]
pub fn simulate(
    n: u32,
    t: u32,
    alpha: f64,
    adversary: &str,
    inputs: &str,
    seed: u32,
    las_vegas: bool,
) -> Result<String, JsError> {
    simulate_json(n, t, alpha, adversary, inputs, seed as u64, las_vegas).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn curves(n: u32, x_max: f64, points: u32) -> Result<String, JsError> {
    curves_json(n, x_max, points).map_err(|e| JsError::new(&e))
}
