//! Adaptive, full-information, rushing adversary.
//!
//! Once per communication round the engine freezes every honest node's
//! committed outgoing message (including this round's coin flips) into a
//! [`RoundSnapshot`] and hands it to the strategy. The strategy answers with
//! an [`AdversaryAction`]: nodes to corrupt now, and what each corrupted node
//! delivers to each recipient. A node corrupted in the current round has its
//! committed message withdrawn and replaced by the strategy's. Corruption is
//! permanent and the total never exceeds `t`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::coin::Sign;
use crate::protocol::{CommitteeLayout, NodeState, PhaseMessage, ProtocolParams, Round};
use crate::{Error, NodeId, Result};

/// Everything the adversary sees before acting in a round.
#[derive(Clone, Copy, Debug)]
pub struct RoundSnapshot<'a> {
    pub phase: u32,
    pub round: Round,
    /// Committee slot of this phase.
    pub slot: u32,
    pub params: &'a ProtocolParams,
    pub layout: &'a CommitteeLayout,
    /// Every node's state, indexed by `NodeId::index`. Corrupted nodes keep
    /// the state they had when taken over.
    pub states: &'a [NodeState],
    /// Honest nodes' committed messages for this round; `None` for
    /// terminated or corrupted nodes.
    pub pending: &'a [Option<PhaseMessage>],
    pub corrupted: &'a [bool],
    pub budget_remaining: u32,
}

impl RoundSnapshot<'_> {
    pub fn n(&self) -> u32 {
        self.params.n
    }

    pub fn is_corrupted(&self, id: NodeId) -> bool {
        self.corrupted[id.index()]
    }

    pub fn pending(&self, id: NodeId) -> Option<&PhaseMessage> {
        self.pending[id.index()].as_ref()
    }

    pub fn all_ids(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.params.n).map(NodeId)
    }

    /// Honest nodes that are still sending.
    pub fn live_honest(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.all_ids().filter(|&id| self.pending(id).is_some())
    }

    pub fn corrupted_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.all_ids().filter(|&id| self.is_corrupted(id))
    }

    pub fn committee(&self) -> impl Iterator<Item = NodeId> {
        let r = self.layout.members(self.slot);
        (r.start().0..=r.end().0).map(NodeId)
    }

    /// Honest committee members with their committed coin.
    pub fn honest_coins(&self) -> Vec<(NodeId, Sign)> {
        self.committee()
            .filter_map(|id| self.pending(id).and_then(|m| m.coin).map(|c| (id, c)))
            .collect()
    }

    /// Majority value among honest `decided = true` reports and how many
    /// honest nodes made them. Honest round-2 reports are unanimous.
    pub fn honest_decided(&self) -> Option<(bool, u32)> {
        let mut counts = [0u32; 2];
        for id in self.live_honest() {
            let m = self.pending(id).unwrap();
            if m.decided {
                counts[m.val as usize] += 1;
            }
        }
        match counts {
            [0, 0] => None,
            [z, o] if o >= z => Some((true, o)),
            [z, _] => Some((false, z)),
        }
    }

    /// Majority value among honest committed messages (ties to 1).
    pub fn honest_majority(&self) -> bool {
        let ones = self
            .live_honest()
            .filter(|&id| self.pending(id).unwrap().val)
            .count();
        let total = self.live_honest().count();
        2 * ones >= total
    }
}

/// What a corrupted node delivers this round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outgoing {
    Silent,
    Broadcast(PhaseMessage),
    /// One optional message per recipient, indexed by `NodeId::index`.
    PerRecipient(Vec<Option<PhaseMessage>>),
}

impl Outgoing {
    pub fn split(n: u32, mut to: impl FnMut(NodeId) -> Option<PhaseMessage>) -> Self {
        Outgoing::PerRecipient((1..=n).map(|i| to(NodeId(i))).collect())
    }

    #[inline]
    pub fn to(&self, recipient: NodeId) -> Option<&PhaseMessage> {
        match self {
            Outgoing::Silent => None,
            Outgoing::Broadcast(m) => Some(m),
            Outgoing::PerRecipient(v) => v.get(recipient.index()).and_then(Option::as_ref),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdversaryAction {
    pub new_corruptions: Vec<NodeId>,
    /// Corrupted senders not listed here stay silent.
    pub messages: BTreeMap<NodeId, Outgoing>,
}

impl AdversaryAction {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.new_corruptions.is_empty() && self.messages.is_empty()
    }
}

pub trait Adversary: Send {
    fn name(&self) -> String;

    fn act(&mut self, snapshot: &RoundSnapshot<'_>, rng: &mut dyn RngCore) -> AdversaryAction;
}

// ---------------------------------------------------------------------------
// Strategy selection
// ---------------------------------------------------------------------------

/// A built-in strategy and its parameters, as written on the command line:
/// `name[:key=value,...]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AdversarySpec {
    Null,
    /// Silence up to `per_phase` honest nodes per phase from `start` on.
    Crash {
        per_phase: u32,
        start: u32,
        budget: Option<u32>,
    },
    /// Corrupt the lowest IDs up front and equivocate every field.
    SplitWorld { budget: Option<u32> },
    /// Buy committee members to split the coin between recipients.
    CoinKiller {
        budget: Option<u32>,
        spend: Option<u32>,
    },
    /// Lift half the recipients to the assigned value and steer the coin of
    /// the other half away from it.
    AntiAssigned {
        budget: Option<u32>,
        spend: Option<u32>,
    },
}

impl AdversarySpec {
    /// Every built-in strategy with default parameters.
    pub fn builtins() -> Vec<AdversarySpec> {
        vec![
            AdversarySpec::Null,
            AdversarySpec::Crash {
                per_phase: 1,
                start: 1,
                budget: None,
            },
            AdversarySpec::SplitWorld { budget: None },
            AdversarySpec::CoinKiller {
                budget: None,
                spend: None,
            },
            AdversarySpec::AntiAssigned {
                budget: None,
                spend: None,
            },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::Null => "null",
            AdversarySpec::Crash { .. } => "crash",
            AdversarySpec::SplitWorld { .. } => "splitworld",
            AdversarySpec::CoinKiller { .. } => "coinkiller",
            AdversarySpec::AntiAssigned { .. } => "antiassigned",
        }
    }

    pub fn build(&self, params: &ProtocolParams) -> Box<dyn Adversary> {
        let cap = |b: &Option<u32>| b.map_or(params.t, |b| b.min(params.t));
        let label = self.to_string();
        match self {
            AdversarySpec::Null => Box::new(NullAdversary),
            AdversarySpec::Crash {
                per_phase,
                start,
                budget,
            } => Box::new(CrashAdversary {
                label,
                per_phase: *per_phase,
                start: *start,
                budget: cap(budget),
                last_phase: 0,
            }),
            AdversarySpec::SplitWorld { budget } => Box::new(SplitWorld {
                label,
                budget: cap(budget),
            }),
            AdversarySpec::CoinKiller { budget, spend } => Box::new(CoinKiller {
                label,
                budget: cap(budget),
                spend: spend.unwrap_or(u32::MAX),
            }),
            AdversarySpec::AntiAssigned { budget, spend } => Box::new(AntiAssigned {
                label,
                budget: cap(budget),
                spend: spend.unwrap_or(u32::MAX),
            }),
        }
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut params: Vec<String> = Vec::new();
        let mut opt = |k: &str, v: &Option<u32>| {
            if let Some(v) = v {
                params.push(format!("{k}={v}"));
            }
        };
        match self {
            AdversarySpec::Null => {}
            AdversarySpec::Crash {
                per_phase,
                start,
                budget,
            } => {
                opt("per_phase", &Some(*per_phase));
                opt("start", &Some(*start));
                opt("budget", budget);
            }
            AdversarySpec::SplitWorld { budget } => opt("budget", budget),
            AdversarySpec::CoinKiller { budget, spend }
            | AdversarySpec::AntiAssigned { budget, spend } => {
                opt("budget", budget);
                opt("spend", spend);
            }
        }
        if params.is_empty() {
            write!(f, "{}", self.name())
        } else {
            write!(f, "{}:{}", self.name(), params.join(","))
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: String| Error::Parse {
            spec: s.to_string(),
            reason,
        };
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = BTreeMap::new();
        for item in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got `{item}`")))?;
            let v: u32 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{v}` is not a non-negative integer")))?;
            kv.insert(k.trim().to_ascii_lowercase(), v);
        }
        let mut take = |key: &str| kv.remove(key);
        let spec = match name.trim().to_ascii_lowercase().as_str() {
            "null" | "none" => AdversarySpec::Null,
            "crash" => AdversarySpec::Crash {
                per_phase: take("per_phase").unwrap_or(1),
                start: take("start").unwrap_or(1).max(1),
                budget: take("budget"),
            },
            "splitworld" | "split" => AdversarySpec::SplitWorld {
                budget: take("budget"),
            },
            "coinkiller" => AdversarySpec::CoinKiller {
                budget: take("budget"),
                spend: take("spend"),
            },
            "antiassigned" => AdversarySpec::AntiAssigned {
                budget: take("budget"),
                spend: take("spend"),
            },
            other => return Err(Error::UnknownAdversary(other.to_string())),
        };
        if let Some(k) = kv.keys().next() {
            return Err(parse_err(format!("unknown parameter `{k}` for {}", spec.name())));
        }
        Ok(spec)
    }
}

impl TryFrom<String> for AdversarySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AdversarySpec> for String {
    fn from(spec: AdversarySpec) -> String {
        spec.to_string()
    }
}

// ---------------------------------------------------------------------------
// Built-in strategies
// ---------------------------------------------------------------------------

pub struct NullAdversary;

impl Adversary for NullAdversary {
    fn name(&self) -> String {
        "null".into()
    }

    fn act(&mut self, _: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
        AdversaryAction::none()
    }
}

/// Crash faults: corrupted nodes simply go silent. Victims are drawn at
/// random among live honest nodes holding the current honest majority value,
/// which starves the quorum of its largest bloc.
pub struct CrashAdversary {
    label: String,
    per_phase: u32,
    start: u32,
    budget: u32,
    last_phase: u32,
}

impl Adversary for CrashAdversary {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&mut self, snap: &RoundSnapshot<'_>, rng: &mut dyn RngCore) -> AdversaryAction {
        if snap.round != Round::One || snap.phase < self.start || snap.phase == self.last_phase {
            return AdversaryAction::none();
        }
        self.last_phase = snap.phase;
        let spent = snap.corrupted_ids().count() as u32;
        let room = self.budget.saturating_sub(spent).min(snap.budget_remaining);
        let count = self.per_phase.min(room) as usize;
        if count == 0 {
            return AdversaryAction::none();
        }
        let majority = snap.honest_majority();
        let mut victims: Vec<NodeId> = snap
            .live_honest()
            .filter(|&id| snap.pending(id).unwrap().val == majority)
            .collect();
        victims.shuffle(&mut RngAdapter(rng));
        victims.truncate(count);
        victims.sort();
        AdversaryAction {
            new_corruptions: victims,
            messages: BTreeMap::new(),
        }
    }
}

/// Corrupts the lowest IDs in the first round and from then on sends 1 to
/// recipients in the lower half of the ID space and 0 to the upper half, in
/// every field: round-1 values, round-2 decided values and coin contributions.
pub struct SplitWorld {
    label: String,
    budget: u32,
}

impl Adversary for SplitWorld {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&mut self, snap: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
        let mut action = AdversaryAction::none();
        let already = snap.corrupted_ids().count() as u32;
        let want = self.budget.saturating_sub(already).min(snap.budget_remaining);
        action.new_corruptions = snap
            .all_ids()
            .filter(|&id| !snap.is_corrupted(id))
            .take(want as usize)
            .collect();

        let half = snap.n() / 2;
        let byz: Vec<NodeId> = snap
            .corrupted_ids()
            .chain(action.new_corruptions.iter().copied())
            .collect();
        for sender in byz {
            let in_committee = snap.layout.members(snap.slot).contains(&sender);
            let out = Outgoing::split(snap.n(), |r| {
                let b = r.0 <= half;
                let msg = match snap.round {
                    Round::One => PhaseMessage::new(snap.phase, Round::One, b, false),
                    Round::Two => {
                        let m = PhaseMessage::new(snap.phase, Round::Two, b, true);
                        if in_committee {
                            m.with_coin(Sign::from_bit(b))
                        } else {
                            m
                        }
                    }
                };
                Some(msg)
            });
            action.messages.insert(sender, out);
        }
        action
    }
}

/// Corrupted committee members already in place, plus honest members to buy
/// so that the committee's delivered sum lands on the wanted side.
struct CoinPlan {
    buy: Vec<NodeId>,
    members: Vec<NodeId>,
}

/// Honest members to buy, out of the sign opposing `target`, so that `m + k`
/// corrupted members all voting for `target` land the committee sum on that
/// side, given honest sum `x`.
fn buys_for_target(x: i64, m: i64, target: bool) -> i64 {
    if target {
        // Need x + m + 2k >= 0.
        if x + m >= 0 {
            0
        } else {
            (-(x + m) + 1) / 2
        }
    } else if x - m < 0 {
        // Need x - m - 2k < 0.
        0
    } else {
        (x - m) / 2 + 1
    }
}

fn plan_coin(
    snap: &RoundSnapshot<'_>,
    target: impl Fn(i64, i64) -> (Sign, i64),
    room: u32,
    spend: u32,
) -> Option<CoinPlan> {
    let coins = snap.honest_coins();
    let existing: Vec<NodeId> = snap.committee().filter(|&id| snap.is_corrupted(id)).collect();
    let x: i64 = coins.iter().map(|(_, c)| c.value()).sum();
    let m = existing.len() as i64;
    let (against, k) = target(x, m);
    let allowed = (spend as i64 - m).max(0).min(room as i64);
    if k > allowed {
        return None;
    }
    let buy: Vec<NodeId> = coins
        .iter()
        .filter(|(_, c)| *c == against)
        .map(|&(id, _)| id)
        .take(k as usize)
        .collect();
    if (buy.len() as i64) < k {
        return None;
    }
    let mut members = existing;
    members.extend(buy.iter().copied());
    Some(CoinPlan { buy, members })
}

fn room(snap: &RoundSnapshot<'_>, budget: u32) -> u32 {
    let spent = snap.corrupted_ids().count() as u32;
    budget.saturating_sub(spent).min(snap.budget_remaining)
}

/// Spends budget only on the coin committee of each phase. When the honest
/// decided reports cannot push anyone past `t + 1`, every honest node falls
/// to the coin; it then buys just enough committee members, out of the
/// honest majority sign, to deliver a non-negative sum to the lower half of
/// the ID space and a negative one to the upper half.
pub struct CoinKiller {
    label: String,
    budget: u32,
    spend: u32,
}

impl Adversary for CoinKiller {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&mut self, snap: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
        if snap.round != Round::Two {
            return AdversaryAction::none();
        }
        if snap
            .honest_decided()
            .is_some_and(|(_, d)| d >= snap.params.echo())
        {
            return AdversaryAction::none();
        }
        let split = |x: i64, m: i64| {
            // Lower half must see >= 0, upper half < 0.
            if x >= 0 {
                (Sign::Plus, buys_for_target(x, m, false))
            } else {
                (Sign::Minus, buys_for_target(x, m, true))
            }
        };
        let plan = plan_coin(snap, split, room(snap, self.budget), self.spend).unwrap_or_else(|| {
            // Not affordable: still play the members already held.
            CoinPlan {
                buy: Vec::new(),
                members: snap.committee().filter(|&id| snap.is_corrupted(id)).collect(),
            }
        });
        let half = snap.n() / 2;
        let mut action = AdversaryAction {
            new_corruptions: plan.buy,
            messages: BTreeMap::new(),
        };
        for sender in plan.members {
            let out = Outgoing::split(snap.n(), |r| {
                let b = r.0 <= half;
                Some(PhaseMessage::new(snap.phase, Round::Two, b, false).with_coin(Sign::from_bit(b)))
            });
            action.messages.insert(sender, out);
        }
        action
    }
}

/// Attacks the phases where some honest nodes decided on an assigned value
/// `b` but too few to carry everyone. Corrupted nodes echo `(b, decided)` to
/// the lower half of the ID space, lifting it over `t + 1`, while the upper
/// half falls to the coin, which the adversary steers toward `1 - b` by
/// buying committee members where affordable.
pub struct AntiAssigned {
    label: String,
    budget: u32,
    spend: u32,
}

impl Adversary for AntiAssigned {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&mut self, snap: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
        if snap.round != Round::Two {
            return AdversaryAction::none();
        }
        let echo = snap.params.echo();
        let Some((assigned, decided)) = snap.honest_decided() else {
            return AdversaryAction::none();
        };
        if decided >= echo {
            return AdversaryAction::none();
        }
        let mut room = room(snap, self.budget);
        let steer = |x: i64, m: i64| (Sign::from_bit(assigned), buys_for_target(x, m, !assigned));
        let plan = plan_coin(snap, steer, room, self.spend);
        let mut new_corruptions = plan.as_ref().map(|p| p.buy.clone()).unwrap_or_default();
        room -= new_corruptions.len() as u32;

        // Enough corrupted senders to lift the lower half to t + 1.
        let need = (echo - decided) as usize;
        let mut lifters: Vec<NodeId> = snap
            .corrupted_ids()
            .chain(new_corruptions.iter().copied())
            .collect();
        if lifters.len() < need {
            let extra: Vec<NodeId> = snap
                .live_honest()
                .filter(|id| !new_corruptions.contains(id))
                .filter(|&id| !snap.pending(id).unwrap().decided)
                .take((need - lifters.len()).min(room as usize))
                .collect();
            lifters.extend(extra.iter().copied());
            new_corruptions.extend(extra);
        }
        if lifters.len() < need {
            return AdversaryAction::none();
        }
        let committee = snap.layout.members(snap.slot);
        let half = snap.n() / 2;
        let mut action = AdversaryAction {
            new_corruptions,
            messages: BTreeMap::new(),
        };
        for sender in lifters {
            let coin = committee
                .contains(&sender)
                .then(|| Sign::from_bit(!assigned));
            let out = Outgoing::split(snap.n(), |r| {
                let mut m = if r.0 <= half {
                    PhaseMessage::new(snap.phase, Round::Two, assigned, true)
                } else {
                    PhaseMessage::new(snap.phase, Round::Two, !assigned, false)
                };
                m.coin = coin;
                Some(m)
            });
            action.messages.insert(sender, out);
        }
        action
    }
}

/// `SliceRandom` wants a sized `Rng`.
struct RngAdapter<'a>(&'a mut dyn RngCore);

impl RngCore for RngAdapter<'_> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Protocol;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct World {
        proto: Protocol,
        states: Vec<NodeState>,
        pending: Vec<Option<PhaseMessage>>,
        corrupted: Vec<bool>,
    }

    impl World {
        fn new(n: u32, t: u32, alpha: f64) -> Self {
            let proto = Protocol::new(ProtocolParams::new(n, t).with_alpha(alpha)).unwrap();
            let states = (0..n as usize)
                .map(|i| NodeState::new(NodeId::from_index(i), false))
                .collect();
            World {
                proto,
                states,
                pending: vec![None; n as usize],
                corrupted: vec![false; n as usize],
            }
        }

        fn snapshot(&self, phase: u32, round: Round) -> RoundSnapshot<'_> {
            let spent = self.corrupted.iter().filter(|&&c| c).count() as u32;
            RoundSnapshot {
                phase,
                round,
                slot: self.proto.layout.slot_for_phase(phase),
                params: &self.proto.params,
                layout: &self.proto.layout,
                states: &self.states,
                pending: &self.pending,
                corrupted: &self.corrupted,
                budget_remaining: self.proto.params.t - spent,
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        for s in ["null", "crash:per_phase=2,start=3", "splitworld:budget=4", "coinkiller:budget=16,spend=2", "antiassigned"] {
            let spec: AdversarySpec = s.parse().unwrap();
            let again: AdversarySpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again);
        }
        assert!(matches!("bogus".parse::<AdversarySpec>(), Err(Error::UnknownAdversary(_))));
        assert!("coinkiller:spend".parse::<AdversarySpec>().is_err());
        assert!("coinkiller:speed=2".parse::<AdversarySpec>().is_err());
        assert_eq!(
            "coinkiller:spend=2".parse::<AdversarySpec>().unwrap(),
            AdversarySpec::CoinKiller {
                budget: None,
                spend: Some(2)
            }
        );
    }

    #[test]
    fn null_does_nothing() {
        let mut w = World::new(16, 5, 18.0);
        for i in 0..16 {
            w.pending[i] = Some(PhaseMessage::new(1, Round::One, true, false));
        }
        let mut adv = AdversarySpec::Null.build(&w.proto.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(adv.act(&w.snapshot(1, Round::One), &mut rng).is_empty());
    }

    #[test]
    fn splitworld_round1_halves() {
        let mut w = World::new(16, 5, 18.0);
        for i in 0..16 {
            w.pending[i] = Some(PhaseMessage::new(1, Round::One, true, false));
        }
        let mut adv = AdversarySpec::SplitWorld { budget: None }.build(&w.proto.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let action = adv.act(&w.snapshot(1, Round::One), &mut rng);
        assert_eq!(action.new_corruptions, (1..=5).map(NodeId).collect::<Vec<_>>());
        let out = &action.messages[&NodeId(1)];
        assert_eq!(out.to(NodeId(8)), Some(&PhaseMessage::new(1, Round::One, true, false)));
        assert_eq!(out.to(NodeId(9)), Some(&PhaseMessage::new(1, Round::One, false, false)));
    }

    #[test]
    fn coinkiller_buys_just_enough_to_split() {
        // n = 256, t = 16, alpha = 1: c = 6, s = 42. Committee 1 is 1..=42.
        let mut w = World::new(256, 16, 1.0);
        assert_eq!(w.proto.layout.s, 42);
        for i in 0..256usize {
            let mut m = PhaseMessage::new(1, Round::Two, i % 2 == 0, false);
            if i < 42 {
                // 26 plus, 16 minus: X = 10.
                m = m.with_coin(Sign::from_bit(i < 26));
            }
            w.pending[i] = Some(m);
        }
        let mut adv = AdversarySpec::CoinKiller {
            budget: None,
            spend: None,
        }
        .build(&w.proto.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let action = adv.act(&w.snapshot(1, Round::Two), &mut rng);
        // X - 2k < 0 needs k = 6 plus-voters.
        assert_eq!(action.new_corruptions.len(), 6);
        let honest: i64 = 10 - 6;
        let byz_low: i64 = action
            .messages
            .values()
            .map(|o| o.to(NodeId(1)).unwrap().coin.unwrap().value())
            .sum();
        let byz_high: i64 = action
            .messages
            .values()
            .map(|o| o.to(NodeId(256)).unwrap().coin.unwrap().value())
            .sum();
        assert!(honest + byz_low >= 0);
        assert!(honest + byz_high < 0);

        // A per-committee cap of 2 cannot afford it.
        let mut capped = AdversarySpec::CoinKiller {
            budget: None,
            spend: Some(2),
        }
        .build(&w.proto.params);
        assert!(capped.act(&w.snapshot(1, Round::Two), &mut rng).new_corruptions.is_empty());
    }

    #[test]
    fn coinkiller_stands_down_when_echo_reached() {
        let mut w = World::new(16, 5, 18.0);
        for i in 0..16usize {
            w.pending[i] = Some(PhaseMessage::new(1, Round::Two, true, i < 6).with_coin(Sign::Plus));
        }
        let mut adv = AdversarySpec::CoinKiller {
            budget: None,
            spend: None,
        }
        .build(&w.proto.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(adv.act(&w.snapshot(1, Round::Two), &mut rng).is_empty());
    }

    #[test]
    fn buys_for_target_arithmetic() {
        // Force negative: x - m - 2k < 0.
        assert_eq!(buys_for_target(10, 0, false), 6);
        assert_eq!(buys_for_target(10, 3, false), 4);
        assert_eq!(buys_for_target(-1, 0, false), 0);
        // Force non-negative: x + m + 2k >= 0.
        assert_eq!(buys_for_target(-5, 0, true), 3);
        assert_eq!(buys_for_target(-4, 0, true), 2);
        assert_eq!(buys_for_target(0, 0, true), 0);
        for x in -20i64..=20 {
            for m in 0..5 {
                let k = buys_for_target(x, m, false);
                assert!(x - k - (m + k) < 0);
                let k = buys_for_target(x, m, true);
                assert!(x + k + (m + k) >= 0);
            }
        }
    }

    #[test]
    fn crash_respects_budget() {
        let mut w = World::new(16, 5, 18.0);
        for i in 0..16 {
            w.pending[i] = Some(PhaseMessage::new(1, Round::One, i < 10, false));
        }
        let mut adv = AdversarySpec::Crash {
            per_phase: 9,
            start: 1,
            budget: Some(3),
        }
        .build(&w.proto.params);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let action = adv.act(&w.snapshot(1, Round::One), &mut rng);
        assert_eq!(action.new_corruptions.len(), 3);
        // Victims hold the majority value 1.
        assert!(action.new_corruptions.iter().all(|id| id.0 <= 10));
        assert!(action.messages.is_empty());
    }
}
