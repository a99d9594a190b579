//! Per-node state machine for committee-coin Byzantine agreement.
//!
//! Each phase is two broadcast rounds. In round 1 a node adopts `b` and marks
//! itself decided if at least `n - t` nodes reported `b`. In round 2:
//!
//! 1. at least `n - t` decided reports of `b`: adopt `b` and finish;
//! 2. else at least `t + 1` decided reports of `b`: adopt `b`, stay decided;
//! 3. else adopt the phase committee's common coin and clear `decided`.
//!
//! A finishing node broadcasts its value through both rounds of the next
//! phase and then terminates. The committee of phase `i` is the contiguous
//! ID block `i`; in Las Vegas mode the schedule wraps around the committees
//! until every node has finished.

use std::ops::RangeInclusive;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::coin::{self, CoinContribution, Sign};
use crate::{Error, NodeId, Result};

pub const DEFAULT_ALPHA: f64 = 18.0;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_LOG_BASE: f64 = 2.0;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: u32,
    pub t: u32,
    /// Committee-count constant, at least 1.
    pub alpha: f64,
    /// Target failure exponent; `alpha - 4 √alpha >= gamma` backs the
    /// high-probability claim.
    pub gamma: f64,
    pub log_base: f64,
    pub las_vegas: bool,
}

impl ProtocolParams {
    pub fn new(n: u32, t: u32) -> Self {
        ProtocolParams {
            n,
            t,
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            log_base: DEFAULT_LOG_BASE,
            las_vegas: false,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_las_vegas(mut self, las_vegas: bool) -> Self {
        self.las_vegas = las_vegas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam {
                name: "n",
                reason: "need at least one node".into(),
            });
        }
        if 3 * self.t as u64 + 1 > self.n as u64 {
            return Err(Error::Resilience { n: self.n, t: self.t });
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::InvalidParam {
                name: "alpha",
                reason: format!("{} < 1", self.alpha),
            });
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::InvalidParam {
                name: "gamma",
                reason: format!("{} < 1", self.gamma),
            });
        }
        if !(self.log_base > 1.0) {
            return Err(Error::InvalidParam {
                name: "log_base",
                reason: format!("{} <= 1", self.log_base),
            });
        }
        Ok(())
    }

    pub fn log_n(&self) -> f64 {
        log_in_base(self.n as f64, self.log_base)
    }

    /// Whether `alpha` is large enough for the high-probability guarantee at
    /// the configured `gamma`.
    pub fn claims_whp(&self) -> bool {
        self.alpha - 4.0 * self.alpha.sqrt() >= self.gamma
    }

    /// Round-1 threshold `n - t`.
    pub fn quorum(&self) -> u32 {
        self.n - self.t
    }

    /// Round-2 adoption threshold `t + 1`.
    pub fn echo(&self) -> u32 {
        self.t + 1
    }
}

pub(crate) fn log_in_base(x: f64, base: f64) -> f64 {
    if base == 2.0 {
        x.log2()
    } else {
        x.ln() / base.ln()
    }
}

/// Smallest real `alpha` with `alpha - 4 √alpha >= gamma`: `(2 + √(4 + γ))²`.
pub fn min_alpha(gamma: f64) -> f64 {
    let root = 2.0 + (4.0 + gamma).sqrt();
    root * root
}

/// Which of the two committee-count terms was smaller.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `alpha ⌈t²/n⌉ log n`: few faults, committee count grows with `t²`.
    Quadratic,
    /// `3 alpha t / log n`: many faults, committee count linear in `t`.
    Linear,
}

/// Contiguous-ID committee schedule.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitteeLayout {
    pub n: u32,
    /// Number of committees, and phases per pass.
    pub c: u32,
    /// Committee size. The last committee absorbs the remainder and is
    /// never smaller than `s`.
    pub s: u32,
    pub regime: Regime,
    /// The two unrounded committee-count terms.
    pub terms: (f64, f64),
}

impl CommitteeLayout {
    /// Committee of node `id`: `min(⌈id / s⌉, c)`.
    pub fn committee_of(&self, id: NodeId) -> u32 {
        id.0.div_ceil(self.s).min(self.c)
    }

    /// Members of committee `slot` (1-based).
    pub fn members(&self, slot: u32) -> RangeInclusive<NodeId> {
        let first = (slot - 1) * self.s + 1;
        let last = if slot >= self.c { self.n } else { slot * self.s };
        NodeId(first)..=NodeId(last)
    }

    /// Committee serving absolute phase `phase`, wrapping after `c`.
    pub fn slot_for_phase(&self, phase: u32) -> u32 {
        (phase - 1) % self.c + 1
    }

    /// Bits needed to name a committee slot on the wire.
    pub fn phase_bits(&self) -> u32 {
        if self.c <= 1 {
            0
        } else {
            u32::BITS - (self.c - 1).leading_zeros()
        }
    }

    /// Per-edge payload ceiling: two state bits, the phase field and up to
    /// two bits of round tag plus coin.
    pub fn congest_bound(&self) -> u32 {
        2 + self.phase_bits() + 2
    }
}

/// Computes the committee count `c = min(alpha ⌈t²/n⌉ log n, 3 alpha t / log n)`
/// rounded up and clamped to `[1, n]`, and the size `s = ⌊n / c⌋`.
pub fn committee_count(params: &ProtocolParams) -> Result<CommitteeLayout> {
    params.validate()?;
    let n = params.n;
    let (c, regime, terms) = if params.t == 0 {
        (1, Regime::Quadratic, (0.0, 0.0))
    } else {
        let log_n = params.log_n();
        let t = params.t as u64;
        let ceil_sq = (t * t).div_ceil(n as u64) as f64;
        let quadratic = params.alpha * ceil_sq * log_n;
        let linear = 3.0 * params.alpha * params.t as f64 / log_n;
        let (m, regime) = if quadratic <= linear {
            (quadratic, Regime::Quadratic)
        } else {
            (linear, Regime::Linear)
        };
        // Absorb float noise so exact integers do not round up.
        let c = ((m - 1e-9).ceil().max(1.0) as u64).min(n as u64) as u32;
        (c, regime, (quadratic, linear))
    };
    Ok(CommitteeLayout {
        n,
        c,
        s: n / c,
        regime,
        terms,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Round {
    One,
    Two,
}

impl Round {
    pub fn number(self) -> u8 {
        match self {
            Round::One => 1,
            Round::Two => 2,
        }
    }
}

/// `(phase, round, val, decided)`, with an optional coin contribution that
/// committee members piggyback on their round-2 message.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseMessage {
    pub phase: u32,
    pub round: Round,
    pub val: bool,
    pub decided: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coin: Option<Sign>,
}

impl PhaseMessage {
    pub fn new(phase: u32, round: Round, val: bool, decided: bool) -> Self {
        PhaseMessage {
            phase,
            round,
            val,
            decided,
            coin: None,
        }
    }

    pub fn with_coin(mut self, coin: Sign) -> Self {
        self.coin = Some(coin);
        self
    }

    /// Encoded size: committee slot, round tag, `val`, `decided`, and one
    /// coin bit when present. Whether a coin is present is implied by the
    /// round and the sender's committee, which receivers know.
    pub fn wire_bits(&self, layout: &CommitteeLayout) -> u32 {
        layout.phase_bits() + 3 + self.coin.is_some() as u32
    }
}

/// One honest node's protocol variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub input: bool,
    pub val: bool,
    pub decided: bool,
    pub finish: bool,
    /// Phase in which `finish` was set.
    pub finished_in: Option<u32>,
    /// Absolute phase (1-based; keeps counting past `c` in Las Vegas mode).
    pub phase: u32,
    /// Set exactly when the node has terminated.
    pub output: Option<bool>,
}

impl NodeState {
    pub fn new(id: NodeId, input: bool) -> Self {
        NodeState {
            id,
            input,
            val: input,
            decided: false,
            finish: false,
            finished_in: None,
            phase: 1,
            output: None,
        }
    }

    pub fn is_terminated(&self) -> bool {
        self.output.is_some()
    }

    /// Finished in an earlier phase and is now doing its last broadcasts.
    pub fn is_lame_duck(&self) -> bool {
        self.finished_in.is_some_and(|p| p < self.phase)
    }
}

/// Valid `(val, decided)` reports received in one round.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct VoteTally {
    /// `val[b]`: messages carrying `b`.
    pub val: [u32; 2],
    /// `decided[b]`: messages carrying `b` with `decided = true`.
    pub decided: [u32; 2],
}

impl VoteTally {
    #[inline]
    pub fn add(&mut self, msg: &PhaseMessage) {
        let b = msg.val as usize;
        self.val[b] += 1;
        if msg.decided {
            self.decided[b] += 1;
        }
    }

    /// Tallies the messages for `(phase, round)`; anything else is ignored.
    pub fn collect<'a>(
        phase: u32,
        round: Round,
        msgs: impl IntoIterator<Item = &'a PhaseMessage>,
    ) -> Self {
        let mut tally = VoteTally::default();
        for msg in msgs {
            if msg.phase == phase && msg.round == round {
                tally.add(msg);
            }
        }
        tally
    }

    pub fn merged(mut self, other: &VoteTally) -> Self {
        for b in 0..2 {
            self.val[b] += other.val[b];
            self.decided[b] += other.decided[b];
        }
        self
    }
}

/// Which branch of the round-2 rule fired.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Round2Case {
    Finish(bool),
    Adopt(bool),
    Coin(bool),
}

impl Round2Case {
    pub fn value(self) -> bool {
        match self {
            Round2Case::Finish(b) | Round2Case::Adopt(b) | Round2Case::Coin(b) => b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round2Outcome {
    pub state: NodeState,
    pub case: Round2Case,
    /// Both bits reached `t + 1` decided reports, which honest senders alone
    /// cannot produce. Resolved toward the larger count, ties to 1.
    pub conflict: bool,
}

/// Result of [`Protocol::advance_phase`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Advance {
    Continue(NodeState),
    Terminated(NodeState),
}

impl Advance {
    pub fn into_state(self) -> NodeState {
        match self {
            Advance::Continue(s) | Advance::Terminated(s) => s,
        }
    }
}

/// Parameters plus the committee schedule derived from them.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub params: ProtocolParams,
    pub layout: CommitteeLayout,
}

impl Protocol {
    pub fn new(params: ProtocolParams) -> Result<Self> {
        let layout = committee_count(&params)?;
        Ok(Protocol { params, layout })
    }

    /// Committee tossing the coin in the node's current phase.
    pub fn committee(&self, phase: u32) -> RangeInclusive<NodeId> {
        self.layout.members(self.layout.slot_for_phase(phase))
    }

    pub fn round1_send(&self, state: &NodeState) -> Option<PhaseMessage> {
        if state.is_terminated() {
            return None;
        }
        Some(PhaseMessage::new(state.phase, Round::One, state.val, state.decided))
    }

    pub fn round1_receive(&self, state: &NodeState, msgs: &[(NodeId, PhaseMessage)]) -> NodeState {
        let tally = VoteTally::collect(state.phase, Round::One, msgs.iter().map(|(_, m)| m));
        self.round1_apply(state, &tally)
    }

    pub fn round1_apply(&self, state: &NodeState, tally: &VoteTally) -> NodeState {
        let mut next = state.clone();
        if state.is_terminated() || state.is_lame_duck() {
            return next;
        }
        let quorum = self.params.quorum();
        // Two distinct bits cannot both reach n - t > n/2.
        if let Some(b) = [false, true].into_iter().find(|&b| tally.val[b as usize] >= quorum) {
            next.val = b;
            next.decided = true;
        } else {
            next.decided = false;
        }
        next
    }

    /// This node's coin contribution for the current phase, if it sits on
    /// the phase committee.
    pub fn coin_round_send<R: RngCore + ?Sized>(
        &self,
        state: &NodeState,
        rng: &mut R,
    ) -> Option<CoinContribution> {
        if state.is_terminated() {
            return None;
        }
        let slot = self.layout.slot_for_phase(state.phase);
        (self.layout.committee_of(state.id) == slot).then(|| CoinContribution {
            sender: state.id,
            value: coin::sample_contribution(rng),
        })
    }

    pub fn round2_send(&self, state: &NodeState, coin: Option<Sign>) -> Option<PhaseMessage> {
        if state.is_terminated() {
            return None;
        }
        let mut msg = PhaseMessage::new(state.phase, Round::Two, state.val, state.decided);
        msg.coin = coin;
        Some(msg)
    }

    pub fn round2_receive(
        &self,
        state: &NodeState,
        msgs: &[(NodeId, PhaseMessage)],
        coin_msgs: &[CoinContribution],
    ) -> NodeState {
        let tally = VoteTally::collect(state.phase, Round::Two, msgs.iter().map(|(_, m)| m));
        let committee = self.committee(state.phase);
        let coin_sum = coin::aggregate_coin(coin_msgs, &committee).sum;
        self.round2_apply(state, &tally, coin_sum).state
    }

    /// The round-2 rule on a pre-computed tally and committee coin sum.
    pub fn round2_apply(&self, state: &NodeState, tally: &VoteTally, coin_sum: i64) -> Round2Outcome {
        let mut next = state.clone();
        if state.is_terminated() || state.is_lame_duck() {
            return Round2Outcome {
                case: Round2Case::Finish(state.val),
                state: next,
                conflict: false,
            };
        }
        let quorum = self.params.quorum();
        let echo = self.params.echo();
        let [zeros, ones] = tally.decided;
        let mut conflict = false;
        let case = if let Some(b) = [false, true]
            .into_iter()
            .find(|&b| tally.decided[b as usize] >= quorum)
        {
            Round2Case::Finish(b)
        } else if zeros >= echo || ones >= echo {
            conflict = zeros >= echo && ones >= echo;
            Round2Case::Adopt(ones >= zeros)
        } else {
            Round2Case::Coin(coin::coin_bit(coin_sum))
        };
        match case {
            Round2Case::Finish(b) => {
                next.val = b;
                next.decided = true;
                next.finish = true;
                next.finished_in = Some(state.phase);
            }
            Round2Case::Adopt(b) => {
                next.val = b;
                next.decided = true;
            }
            Round2Case::Coin(b) => {
                next.val = b;
                next.decided = false;
            }
        }
        Round2Outcome {
            state: next,
            case,
            conflict,
        }
    }

    /// Moves to the next phase after round 2, or terminates.
    pub fn advance_phase(&self, state: &NodeState) -> Advance {
        let mut next = state.clone();
        if state.is_terminated() {
            return Advance::Terminated(next);
        }
        let out_of_phases = !self.params.las_vegas && state.phase >= self.layout.c;
        if state.is_lame_duck() || out_of_phases {
            next.output = Some(state.val);
            return Advance::Terminated(next);
        }
        next.phase += 1;
        Advance::Continue(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn protocol(n: u32, t: u32) -> Protocol {
        Protocol::new(ProtocolParams::new(n, t)).unwrap()
    }

    fn msgs(phase: u32, round: Round, vals: &[(bool, bool)]) -> Vec<(NodeId, PhaseMessage)> {
        vals.iter()
            .enumerate()
            .map(|(i, &(v, d))| (NodeId::from_index(i), PhaseMessage::new(phase, round, v, d)))
            .collect()
    }

    #[test]
    fn committee_examples() {
        let p = ProtocolParams::new(1024, 32);
        let l = committee_count(&p).unwrap();
        assert!((l.terms.0 - 180.0).abs() < 1e-9);
        assert!((l.terms.1 - 172.8).abs() < 1e-9);
        assert_eq!((l.c, l.s, l.regime), (173, 5, Regime::Linear));

        let l = committee_count(&ProtocolParams::new(50, 0)).unwrap();
        assert_eq!((l.c, l.s), (1, 50));

        let l = committee_count(&ProtocolParams::new(64, 21).with_alpha(1.0)).unwrap();
        assert!((l.terms.0 - 42.0).abs() < 1e-9);
        assert!((l.terms.1 - 10.5).abs() < 1e-9);
        assert_eq!((l.c, l.s), (11, 5));
    }

    #[test]
    fn committee_rejects_low_resilience() {
        assert_eq!(
            committee_count(&ProtocolParams::new(6, 2)),
            Err(Error::Resilience { n: 6, t: 2 })
        );
        assert!(committee_count(&ProtocolParams::new(7, 2)).is_ok());
    }

    #[test]
    fn default_alpha_is_smallest_integer() {
        let a = min_alpha(DEFAULT_GAMMA);
        assert_eq!(a.ceil(), DEFAULT_ALPHA);
        assert!(ProtocolParams::new(100, 10).claims_whp());
        assert!(!ProtocolParams::new(100, 10).with_alpha(17.0).claims_whp());
    }

    #[test]
    fn assignment_arithmetic() {
        let l = committee_count(&ProtocolParams::new(1024, 32)).unwrap();
        assert_eq!(l.committee_of(NodeId(3)), 1);
        assert_eq!(l.committee_of(NodeId(7)), 2);
        assert_eq!(l.committee_of(NodeId(1024)), 173);
        assert_eq!(l.members(1), NodeId(1)..=NodeId(5));
        assert_eq!(l.members(173), NodeId(861)..=NodeId(1024));
    }

    #[test]
    fn round1_send_copies_fields() {
        let p = protocol(16, 5);
        let mut s = NodeState::new(NodeId(1), true);
        s.decided = true;
        s.phase = 3;
        assert_eq!(
            p.round1_send(&s),
            Some(PhaseMessage::new(3, Round::One, true, true))
        );
        s.output = Some(true);
        assert_eq!(p.round1_send(&s), None);
    }

    #[test]
    fn finished_node_broadcasts_once_more_then_stops() {
        let p = protocol(4, 1);
        let s = NodeState::new(NodeId(1), true);
        let s = p.round1_receive(&s, &msgs(1, Round::One, &[(true, false); 4]));
        let s = p.round2_receive(&s, &msgs(1, Round::Two, &[(true, true); 3]), &[]);
        assert!(s.finish);
        assert_eq!(s.output, None);
        let s = p.advance_phase(&s).into_state();
        assert_eq!(s.phase, 2);
        assert!(s.is_lame_duck());
        // Still speaks in both rounds of the next phase, with its final value.
        assert_eq!(p.round1_send(&s), Some(PhaseMessage::new(2, Round::One, true, true)));
        let s2 = p.round1_receive(&s, &msgs(2, Round::One, &[(false, false); 4]));
        assert_eq!(s2, s);
        assert!(p.round2_send(&s, None).is_some());
        match p.advance_phase(&s) {
            Advance::Terminated(done) => assert_eq!(done.output, Some(true)),
            other => panic!("expected termination, got {other:?}"),
        }
    }

    #[test]
    fn round1_examples() {
        let p = protocol(4, 1);
        let s = NodeState::new(NodeId(1), false);
        let r = p.round1_receive(&s, &msgs(1, Round::One, &[(true, false); 4]));
        assert!(r.val && r.decided);

        let r = p.round1_receive(
            &s,
            &msgs(1, Round::One, &[(true, false), (true, true), (false, true), (false, false)]),
        );
        assert!(!r.decided);
        assert!(!r.val);

        let p = protocol(7, 2);
        let s = NodeState::new(NodeId(1), true);
        let r = p.round1_receive(&s, &msgs(1, Round::One, &[(false, false); 5]));
        assert!(!r.val && r.decided);
    }

    #[test]
    fn round1_ignores_other_phases() {
        let p = protocol(4, 1);
        let s = NodeState::new(NodeId(1), false);
        let mut m = msgs(1, Round::One, &[(true, false); 4]);
        m[0].1.phase = 2;
        m[1].1.round = Round::Two;
        let r = p.round1_receive(&s, &m);
        assert!(!r.decided);
    }

    #[test]
    fn round2_examples() {
        let p = protocol(4, 1);
        let s = NodeState::new(NodeId(1), false);
        let r = p.round2_receive(&s, &msgs(1, Round::Two, &[(true, true); 3]), &[]);
        assert!(r.finish && r.val && r.decided);

        let p = protocol(7, 2);
        let mut vals = vec![(false, true); 3];
        vals.extend([(true, false); 4]);
        let r = p.round2_receive(&s, &msgs(1, Round::Two, &vals), &[]);
        assert!(!r.val && r.decided && !r.finish);

        // The default layout at n = 4 is four singleton committees; use a
        // single committee so three contributions count.
        let p = Protocol {
            params: ProtocolParams::new(4, 1),
            layout: CommitteeLayout {
                n: 4,
                c: 1,
                s: 4,
                regime: Regime::Quadratic,
                terms: (0.0, 0.0),
            },
        };
        let coins = [(1, Sign::Plus), (2, Sign::Minus), (3, Sign::Plus)]
            .map(|(id, value)| CoinContribution { sender: NodeId(id), value });
        let r = p.round2_receive(&s, &msgs(1, Round::Two, &[(false, false); 4]), &coins);
        assert!(r.val && !r.decided && !r.finish);
    }

    #[test]
    fn round2_conflict_prefers_larger_count_then_one() {
        let p = protocol(7, 2);
        let s = NodeState::new(NodeId(1), false);
        let tally = VoteTally {
            val: [3, 4],
            decided: [3, 4],
        };
        let out = p.round2_apply(&s, &tally, -5);
        assert!(out.conflict);
        assert_eq!(out.case, Round2Case::Adopt(true));
        let tally = VoteTally {
            val: [4, 3],
            decided: [4, 3],
        };
        assert_eq!(p.round2_apply(&s, &tally, 0).case, Round2Case::Adopt(false));
        let tally = VoteTally {
            val: [3, 3],
            decided: [3, 3],
        };
        assert_eq!(p.round2_apply(&s, &tally, -1).case, Round2Case::Adopt(true));
    }

    #[test]
    fn coin_designation() {
        let p = protocol(1024, 32);
        let mut rng = rand::rngs::mock::StepRng::new(1, 0);
        let mut s = NodeState::new(NodeId(3), false);
        assert!(p.coin_round_send(&s, &mut rng).is_some());
        s.id = NodeId(7);
        assert!(p.coin_round_send(&s, &mut rng).is_none());
        s.phase = 2;
        let c = p.coin_round_send(&s, &mut rng).unwrap();
        assert_eq!(c.sender, NodeId(7));
        assert_eq!(c.value, Sign::Plus);
    }

    #[test]
    fn advance_examples() {
        let p = protocol(64, 21);
        let c = p.layout.c;
        let mut s = NodeState::new(NodeId(1), true);
        s.phase = c;
        match p.advance_phase(&s) {
            Advance::Terminated(done) => assert_eq!(done.output, Some(true)),
            other => panic!("{other:?}"),
        }
        let lv = Protocol::new(p.params.with_las_vegas(true)).unwrap();
        match lv.advance_phase(&s) {
            Advance::Continue(next) => {
                assert_eq!(next.phase, c + 1);
                assert_eq!(lv.layout.slot_for_phase(next.phase), 1);
                assert!(next.output.is_none());
            }
            other => panic!("{other:?}"),
        }
        s.phase = 2;
        assert_eq!(p.advance_phase(&s), Advance::Continue(NodeState { phase: 3, ..s }));
    }

    #[test]
    fn wire_size_within_congest_bound() {
        let p = protocol(1024, 32);
        let m = PhaseMessage::new(173, Round::Two, true, true).with_coin(Sign::Minus);
        assert_eq!(p.layout.phase_bits(), 8);
        assert!(m.wire_bits(&p.layout) <= p.layout.congest_bound());
    }

    proptest! {
        #[test]
        fn layout_covers_every_node(n in 1u32..3000, tf in 0.0f64..0.333, alpha in 1.0f64..30.0) {
            let t = ((n as f64 * tf) as u32).min((n - 1) / 3);
            let l = committee_count(&ProtocolParams::new(n, t).with_alpha(alpha)).unwrap();
            prop_assert!(l.c >= 1 && l.c <= n && l.s >= 1);
            let mut covered = 0;
            for slot in 1..=l.c {
                let m = l.members(slot);
                let size = m.end().0 - m.start().0 + 1;
                prop_assert!(size >= l.s);
                for id in m.start().0..=m.end().0 {
                    prop_assert_eq!(l.committee_of(NodeId(id)), slot);
                }
                covered += size;
            }
            prop_assert_eq!(covered, n);
        }
    }
}
