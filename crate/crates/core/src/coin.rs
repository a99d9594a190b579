//! One-round common coin from ±1 contributions.
//!
//! Every contributing node flips a fair ±1 and broadcasts it; every observer
//! sums what it received and outputs `1` iff the sum is non-negative. With at
//! most `√k / 2` adversarial contributors among `k`, the honest sum alone
//! escapes the adversary's reach often enough that all observers agree on a
//! bit with constant probability, and each bit wins with constant
//! probability. The analytic side of that argument (exact moments of the
//! honest sum and the Paley-Zygmund lower bound) lives here as well, next to
//! a Monte Carlo estimator that measures the same quantities.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::RangeInclusive;

use num_rational::Ratio;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::{Error, NodeId, Result};

/// Floor on each one-sided escape probability guaranteed by the analysis.
pub const ONE_SIDED_FLOOR: f64 = 1.0 / 12.0;

/// Largest contributor count accepted by [`exact_moment`].
pub const MAX_ENUMERATED_CONTRIBUTORS: u32 = 20;

/// A signed unit contribution.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    /// `true` maps to `+1`, `false` to `-1`.
    #[inline]
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    #[inline]
    pub fn value(self) -> i64 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    /// The coin bit this sign votes for.
    #[inline]
    pub fn as_bit(self) -> bool {
        self == Sign::Plus
    }

    #[inline]
    pub fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoinContribution {
    pub sender: NodeId,
    pub value: Sign,
}

/// Draws one fair contribution from the low bit of the next 32-bit word.
pub fn sample_contribution<R: RngCore + ?Sized>(rng: &mut R) -> Sign {
    Sign::from_bit(rng.next_u32() & 1 == 1)
}

/// Maps an observed sum to the coin output. Ties go to `1`.
#[inline]
pub fn coin_bit(sum: i64) -> bool {
    sum >= 0
}

/// Membership test for the set of nodes allowed to contribute.
pub trait Designated {
    fn is_designated(&self, id: NodeId) -> bool;
}

impl Designated for RangeInclusive<NodeId> {
    fn is_designated(&self, id: NodeId) -> bool {
        self.contains(&id)
    }
}

impl Designated for BTreeSet<NodeId> {
    fn is_designated(&self, id: NodeId) -> bool {
        self.contains(&id)
    }
}

impl Designated for HashSet<NodeId> {
    fn is_designated(&self, id: NodeId) -> bool {
        self.contains(&id)
    }
}

impl Designated for [NodeId] {
    fn is_designated(&self, id: NodeId) -> bool {
        self.contains(&id)
    }
}

/// Every node is designated (the plain, undesignated coin).
#[derive(Copy, Clone, Debug, Default)]
pub struct Everyone;

impl Designated for Everyone {
    fn is_designated(&self, _: NodeId) -> bool {
        true
    }
}

/// Result of [`aggregate_coin`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinTally {
    pub bit: bool,
    pub sum: i64,
    /// Designated senders that appeared more than once. They contribute 0.
    pub equivocators: Vec<NodeId>,
}

/// Sums the contributions of designated senders and maps the sum to a bit.
///
/// Non-designated senders are discarded. A designated sender that is absent
/// contributes 0, and so does one that appears more than once (it is reported
/// in [`CoinTally::equivocators`]).
pub fn aggregate_coin<D>(contributions: &[CoinContribution], designated: &D) -> CoinTally
where
    D: Designated + ?Sized,
{
    let mut seen: BTreeMap<NodeId, (Sign, u32)> = BTreeMap::new();
    for c in contributions.iter().filter(|c| designated.is_designated(c.sender)) {
        seen.entry(c.sender)
            .and_modify(|(_, count)| *count += 1)
            .or_insert((c.value, 1));
    }
    let mut sum = 0;
    let mut equivocators = Vec::new();
    for (sender, (value, count)) in seen {
        if count == 1 {
            sum += value.value();
        } else {
            equivocators.push(sender);
        }
    }
    CoinTally {
        bit: coin_bit(sum),
        sum,
        equivocators,
    }
}

// ---------------------------------------------------------------------------
// Analysis of the honest sum
// ---------------------------------------------------------------------------

/// `n` contributors of which `g` are honest and `f = n - g` are controlled by
/// the adversary.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinTrialSetup {
    pub n: u32,
    pub g: u32,
    pub f: u32,
}

impl CoinTrialSetup {
    /// Setup with `f` adversarial contributors out of `n`.
    pub fn with_faulty(n: u32, f: u32) -> Result<Self> {
        if f > n {
            return Err(Error::InvalidParam {
                name: "f",
                reason: format!("f = {f} exceeds n = {n}"),
            });
        }
        let setup = CoinTrialSetup { n, g: n - f, f };
        setup.validate()?;
        Ok(setup)
    }

    /// The largest adversary the coin is designed for: `f = ⌊√n / 2⌋`.
    pub fn sqrt_faulty(n: u32) -> Result<Self> {
        Self::with_faulty(n, sqrt_budget(n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.g == 0 {
            return Err(Error::NoHonestContributors);
        }
        if self.g + self.f != self.n {
            return Err(Error::InvalidParam {
                name: "g + f",
                reason: format!("{} + {} != n = {}", self.g, self.f, self.n),
            });
        }
        Ok(())
    }
}

/// `⌊√k / 2⌋`, the adversarial share a committee of `k` tolerates.
pub fn sqrt_budget(k: u32) -> u32 {
    // Integer search avoids float rounding at perfect squares.
    let mut b = ((k as f64).sqrt() / 2.0) as u32 + 1;
    while 4 * b * b > k {
        b -= 1;
    }
    b
}

/// Paley-Zygmund: for `Y >= 0` with finite variance and `0 <= θ <= 1`,
/// `Pr(Y > θ E[Y]) >= (1 - θ)² E[Y]² / E[Y²]`.
pub fn paley_zygmund(theta: f64, mean: f64, second_moment: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParam {
            name: "theta",
            reason: format!("{theta} not in [0, 1]"),
        });
    }
    if !(second_moment > 0.0) || mean < 0.0 {
        return Err(Error::InvalidParam {
            name: "moments",
            reason: format!("need E[Y] >= 0 and E[Y^2] > 0, got {mean}, {second_moment}"),
        });
    }
    Ok((1.0 - theta).powi(2) * mean * mean / second_moment)
}

/// `(1 - θ)² g² / (3g² - 2g)` with `θ = n / (4g)`, or 0 when `θ >= 1`.
///
/// This is [`paley_zygmund`] applied to `Y = X²` for the honest sum `X` of
/// `g` fair ±1, using `E[X²] = g` and `E[X⁴] = 3g² - 2g`. Strictly it bounds
/// the two-sided tail `Pr(|X| > √n / 2)`; it is used as the estimate for the
/// one-sided tail `Pr(X > √n / 2)`, which it undercuts for every
/// configuration the coin is run at, but not for very small `g` (at
/// `n = g = 1` it is 0.5625 against a true 0.5). [`pz_bound_one_sided`] is
/// the rigorous one-sided version.
pub fn pz_bound(setup: &CoinTrialSetup) -> Result<f64> {
    if setup.g == 0 {
        return Err(Error::NoHonestContributors);
    }
    let g = setup.g as f64;
    let theta = setup.n as f64 / (4.0 * g);
    if theta >= 1.0 {
        return Ok(0.0);
    }
    paley_zygmund(theta, g, 3.0 * g * g - 2.0 * g)
}

/// Half of [`pz_bound`]: by symmetry of `X` this is a valid lower bound on
/// `Pr(X > √n / 2)` for every `g >= 1`.
pub fn pz_bound_one_sided(setup: &CoinTrialSetup) -> Result<f64> {
    Ok(pz_bound(setup)? / 2.0)
}

/// Closed forms `E[X²] = g` and `E[X⁴] = 3g² - 2g`.
pub fn closed_form_moment(g: u32, power: u32) -> Result<u64> {
    let g = g as u64;
    match power {
        2 => Ok(g),
        4 => Ok(3 * g * g - 2 * g),
        _ => Err(Error::MomentOutOfRange { g: g as u32, power }),
    }
}

/// `E[X^power]` for the sum of `g` fair ±1 by enumerating all `2^g` sign
/// vectors.
pub fn exact_moment(g: u32, power: u32) -> Result<Ratio<u64>> {
    if g == 0 || g > MAX_ENUMERATED_CONTRIBUTORS || !(power == 2 || power == 4) {
        return Err(Error::MomentOutOfRange { g, power });
    }
    let total: u64 = (0u64..1 << g)
        .map(|mask| {
            let x = 2 * mask.count_ones() as i64 - g as i64;
            x.unsigned_abs().pow(power)
        })
        .sum();
    Ok(Ratio::new(total, 1 << g))
}

/// Sum of `g` fair ±1 draws, 64 at a time from the bits of `next_u64`.
pub fn honest_sum<R: RngCore + ?Sized>(g: u32, rng: &mut R) -> i64 {
    let mut ones = 0u32;
    let mut left = g;
    while left >= 64 {
        ones += rng.next_u64().count_ones();
        left -= 64;
    }
    if left > 0 {
        ones += (rng.next_u64() & ((1u64 << left) - 1)).count_ones();
    }
    2 * ones as i64 - g as i64
}

/// Empirical distribution of the honest sum: `counts[k]` is the number of
/// trials in which exactly `k` of the `g` honest draws were `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumHistogram {
    pub g: u32,
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl SumHistogram {
    pub fn sample<R: RngCore + ?Sized>(g: u32, trials: u64, rng: &mut R) -> Result<Self> {
        if g == 0 {
            return Err(Error::NoHonestContributors);
        }
        if trials == 0 {
            return Err(Error::NoTrials);
        }
        let mut counts = vec![0u64; g as usize + 1];
        for _ in 0..trials {
            let x = honest_sum(g, rng);
            counts[((x + g as i64) / 2) as usize] += 1;
        }
        Ok(SumHistogram { g, counts, trials })
    }

    /// `(sum, count)` pairs in increasing order of the sum.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        let g = self.g as i64;
        self.counts
            .iter()
            .enumerate()
            .map(move |(k, &c)| (2 * k as i64 - g, c))
    }

    /// Number of trials whose sum satisfies `pred`.
    pub fn count_where(&self, pred: impl Fn(i64) -> bool) -> u64 {
        self.iter().filter(|&(x, _)| pred(x)).map(|(_, c)| c).sum()
    }

    pub fn tail_above(&self, threshold: f64) -> Proportion {
        Proportion::new(self.count_where(|x| x as f64 > threshold), self.trials)
    }

    pub fn tail_below(&self, threshold: f64) -> Proportion {
        Proportion::new(self.count_where(|x| (x as f64) < threshold), self.trials)
    }
}

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(hits: u64, trials: u64) -> Self {
        Proportion { hits, trials }
    }

    pub fn p(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// How the adversary's `f` contributions are combined with the honest sum.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryShift {
    /// After seeing `X`, add `-sign(X) * f`.
    WorstCase,
    /// Always add the given amount (`|shift| <= f`).
    Fixed(i64),
}

/// Common-coin contract `(δ, ε)` and what was measured against it.
///
/// `delta` and `epsilon` are the analytic floors (both sides escaping with
/// probability at least 1/12 gives `δ = 1/6` and `ε = 1/12`). The empirical
/// fields are Monte Carlo estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinGuarantee {
    pub delta: f64,
    pub epsilon: f64,
    /// Estimated `Pr(Comm)`: no placement of the `f` adversarial values can
    /// make two observers disagree (`X >= f` or `X < -f`).
    pub empirical_delta: f64,
    /// Estimated `Pr(outcome = 0 | Comm)`.
    pub empirical_eps0: f64,
    /// `Pr(X > f)`.
    pub above: Proportion,
    /// `Pr(X < -f)`.
    pub below: Proportion,
    pub trials: u64,
}

impl CoinGuarantee {
    /// Whether both one-sided estimates clear `1/12 - sigmas·σ`.
    pub fn meets_floor(&self, sigmas: f64) -> bool {
        [self.above, self.below]
            .iter()
            .all(|p| p.p() >= ONE_SIDED_FLOOR - sigmas * p.sigma())
    }

    /// Empirical `δ · Pr(1 | Comm)` and `δ · Pr(0 | Comm)`.
    pub fn per_side(&self) -> (f64, f64) {
        (
            self.empirical_delta * (1.0 - self.empirical_eps0),
            self.empirical_delta * self.empirical_eps0,
        )
    }
}

/// Monte Carlo estimate of the coin contract for `setup`.
///
/// Every observer's sum lies in `[X - f, X + f]`, so the scalar model decides
/// agreement from the honest sum alone: observers agree exactly when that
/// interval does not straddle the tie point, i.e. `X >= f` or `X < -f`.
pub fn estimate_coin_guarantee<R: RngCore + ?Sized>(
    setup: &CoinTrialSetup,
    shift: AdversaryShift,
    trials: u64,
    rng: &mut R,
) -> Result<CoinGuarantee> {
    setup.validate()?;
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let f = setup.f as i64;
    if let AdversaryShift::Fixed(s) = shift {
        if s.abs() > f {
            return Err(Error::InvalidParam {
                name: "adversary_shift",
                reason: format!("|{s}| exceeds f = {f}"),
            });
        }
    }
    let hist = SumHistogram::sample(setup.g, trials, rng)?;
    Ok(guarantee_from_histogram(&hist, setup, shift))
}

/// Evaluates the coin contract on an already sampled honest-sum histogram.
pub fn guarantee_from_histogram(
    hist: &SumHistogram,
    setup: &CoinTrialSetup,
    shift: AdversaryShift,
) -> CoinGuarantee {
    let f = setup.f as i64;
    let mut agree = 0u64;
    let mut agree_zero = 0u64;
    for (x, count) in hist.iter() {
        if !(x >= f || x < -f) {
            continue;
        }
        agree += count;
        let delivered = match shift {
            AdversaryShift::WorstCase => x - x.signum() * f,
            AdversaryShift::Fixed(s) => x + s,
        };
        if !coin_bit(delivered) {
            agree_zero += count;
        }
    }
    CoinGuarantee {
        delta: 2.0 * ONE_SIDED_FLOOR,
        epsilon: ONE_SIDED_FLOOR,
        empirical_delta: agree as f64 / hist.trials as f64,
        empirical_eps0: if agree == 0 {
            0.0
        } else {
            agree_zero as f64 / agree as f64
        },
        above: hist.tail_above(f as f64),
        below: hist.tail_below(-(f as f64)),
        trials: hist.trials,
    }
}
