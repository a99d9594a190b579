//! Synchronous full-mesh round executor.
//!
//! Every communication round runs the same pipeline: live honest nodes
//! commit their outgoing message (drawing coin randomness first), the
//! adversary inspects everything and corrupts or overrides, messages are
//! delivered with sender identity, and honest nodes transition. After each
//! phase the engine checks the safety invariants of the protocol and records
//! any breach in the result rather than aborting.
//!
//! Three independent ChaCha8 streams, all derived from the trial seed, drive
//! honest coin flips, the adversary and input generation, so a trial can be
//! replayed in isolation from its seed.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AdversaryAction, AdversarySpec, Outgoing, RoundSnapshot};
use crate::coin::Sign;
use crate::protocol::{
    Advance, CommitteeLayout, NodeState, PhaseMessage, Protocol, ProtocolParams, Round, Round2Case,
    VoteTally,
};
use crate::{Error, NodeId, Result};

/// Counter-based seed derivation (one splitmix64 step of `base + (k+1)·φ`).
/// Trial `k` of a batch runs on `split_seed(batch_seed, k)`; inside a trial,
/// streams 0, 1, 2 feed honest nodes, the adversary and inputs.
pub fn split_seed(base: u64, k: u64) -> u64 {
    let mut z = base.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_NODES: u64 = 0;
const STREAM_ADVERSARY: u64 = 1;
const STREAM_INPUTS: u64 = 2;

/// How initial inputs are assigned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InputPattern {
    Unanimous(bool),
    /// Odd IDs get 1, even IDs 0.
    Alternating,
    /// Fair independent bits from the trial's input stream.
    Random,
    /// IDs up to `n/2` get 1, the rest 0.
    HalfSplit,
    Explicit(Vec<bool>),
}

impl InputPattern {
    pub fn generate<R: RngCore + ?Sized>(&self, n: u32, rng: &mut R) -> Result<Vec<bool>> {
        let ids = 1..=n;
        Ok(match self {
            InputPattern::Unanimous(b) => vec![*b; n as usize],
            InputPattern::Alternating => ids.map(|i| i % 2 == 1).collect(),
            InputPattern::Random => ids.map(|_| rng.gen::<bool>()).collect(),
            InputPattern::HalfSplit => ids.map(|i| i <= n / 2).collect(),
            InputPattern::Explicit(bits) => {
                if bits.len() != n as usize {
                    return Err(Error::InvalidParam {
                        name: "inputs",
                        reason: format!("{} bits given for {n} nodes", bits.len()),
                    });
                }
                bits.clone()
            }
        })
    }
}

impl fmt::Display for InputPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputPattern::Unanimous(true) => f.write_str("ones"),
            InputPattern::Unanimous(false) => f.write_str("zeros"),
            InputPattern::Alternating => f.write_str("alternating"),
            InputPattern::Random => f.write_str("random"),
            InputPattern::HalfSplit => f.write_str("half"),
            InputPattern::Explicit(bits) => {
                f.write_str("bits:")?;
                bits.iter().try_for_each(|&b| f.write_str(if b { "1" } else { "0" }))
            }
        }
    }
}

impl FromStr for InputPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ones" | "1" => InputPattern::Unanimous(true),
            "zeros" | "0" => InputPattern::Unanimous(false),
            "alternating" => InputPattern::Alternating,
            "random" => InputPattern::Random,
            "half" => InputPattern::HalfSplit,
            other => {
                let bits = other.strip_prefix("bits:").ok_or_else(|| Error::Parse {
                    spec: s.into(),
                    reason: "expected ones, zeros, alternating, random, half or bits:<01...>".into(),
                })?;
                let parsed = bits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(Error::Parse {
                            spec: s.into(),
                            reason: format!("`{c}` is not a bit"),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                InputPattern::Explicit(parsed)
            }
        })
    }
}

impl TryFrom<String> for InputPattern {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InputPattern> for String {
    fn from(p: InputPattern) -> String {
        p.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub params: ProtocolParams,
    pub adversary: AdversarySpec,
    pub inputs: InputPattern,
    /// Seed of this trial. [`run_batch`] derives one per trial.
    pub seed: u64,
    /// Phase cap. Defaults to `4c` in Las Vegas mode and `c` otherwise.
    pub max_phases: Option<u32>,
    pub record_trace: bool,
    /// Index within a batch; only labels the result and trace.
    pub trial: u32,
}

impl TrialConfig {
    pub fn new(params: ProtocolParams, adversary: AdversarySpec, seed: u64) -> Self {
        TrialConfig {
            params,
            adversary,
            inputs: InputPattern::Random,
            seed,
            max_phases: None,
            record_trace: false,
            trial: 0,
        }
    }

    pub fn with_inputs(mut self, inputs: InputPattern) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_max_phases(mut self, max_phases: u32) -> Self {
        self.max_phases = Some(max_phases);
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    /// The effective cap for this layout.
    pub fn phase_cap(&self, layout: &CommitteeLayout) -> Result<u32> {
        let default = if self.params.las_vegas {
            4 * layout.c
        } else {
            layout.c
        };
        match self.max_phases {
            None => Ok(default),
            Some(m) if m < layout.c => Err(Error::InvalidParam {
                name: "max_phases",
                reason: format!("{m} is below the committee count {}", layout.c),
            }),
            Some(m) => Ok(m),
        }
    }
}

/// A failed runtime invariant check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Honest round-1 deciders disagree on the value.
    AssignedValueSplit { phase: u32 },
    /// At least `n - t` honest round-1 messages carried `value`, yet some
    /// honest node left round 2 holding the other bit.
    QuorumNotPersisted { phase: u32, value: bool },
    /// An honest node was still running two phases after the first finish.
    LateTermination { first_finish: u32, node: NodeId },
    /// Honest outputs differ after some node finished.
    SplitAfterFinish { first_finish: u32 },
    /// Unanimous honest input not reflected in every output.
    ValidityBroken { input: bool },
    /// A delivered message exceeded the per-edge payload bound.
    PayloadTooLarge { phase: u32, bits: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AssignedValueSplit { phase } => write!(f, "assigned_value_split@{phase}"),
            Violation::QuorumNotPersisted { phase, .. } => write!(f, "quorum_not_persisted@{phase}"),
            Violation::LateTermination { first_finish, node } => {
                write!(f, "late_termination@{first_finish}:{node}")
            }
            Violation::SplitAfterFinish { first_finish } => {
                write!(f, "split_after_finish@{first_finish}")
            }
            Violation::ValidityBroken { .. } => f.write_str("validity_broken"),
            Violation::PayloadTooLarge { phase, bits } => write!(f, "payload_too_large@{phase}:{bits}"),
        }
    }
}

/// Per-phase bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseAudit {
    pub phase: u32,
    pub slot: u32,
    /// Common value of the honest round-1 deciders, if any.
    pub assigned_value: Option<bool>,
    pub decided_round1: Vec<NodeId>,
    /// The bit every honest coin-taker obtained, when they agree.
    pub coin_output: Option<bool>,
    /// Honest nodes that fell to the coin and got 0 and 1, respectively.
    pub coin_takers: [u32; 2],
    pub finished: u32,
    pub adopted: u32,
    /// Honest live nodes holding 1 after round 2.
    pub honest_ones: u32,
    pub honest_live: u32,
    pub corrupted: u32,
    /// The phase committee contained a corrupted member during round 2.
    pub spoiled: bool,
}

/// One delivered message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trial: u32,
    pub phase: u32,
    pub round: u8,
    pub sender: NodeId,
    pub recipient: NodeId,
    pub corrupted: bool,
    pub payload: PhaseMessage,
}

/// Writes trace records as line-delimited JSON.
pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u32,
    pub seed: u64,
    pub n: u32,
    pub t: u32,
    pub c: u32,
    pub adversary: String,
    /// `(id, output)` for every node honest at the end; `None` if it never
    /// terminated.
    pub outputs: Vec<(NodeId, Option<bool>)>,
    /// Every honest node terminated and all outputs are equal.
    pub agreement: bool,
    /// False only when honest inputs were unanimous and some output differs.
    pub validity_ok: bool,
    pub inputs_unanimous: bool,
    pub terminated: bool,
    pub phases_used: u32,
    pub rounds_used: u32,
    /// Corruptions actually spent.
    pub q: u32,
    pub messages_sent: u64,
    pub max_payload_bits: u32,
    pub violations: Vec<Violation>,
    /// Honest round-2 steps that saw `t + 1` decided reports for both bits.
    pub conflicts: u32,
    pub spoiled_phases: u32,
    pub first_finish: Option<u32>,
    pub audits: Vec<PhaseAudit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}

impl TrialResult {
    /// Common output when agreement holds.
    pub fn decision(&self) -> Option<bool> {
        if self.agreement {
            self.outputs.first().and_then(|(_, o)| *o)
        } else {
            None
        }
    }

    pub fn violations_label(&self) -> String {
        self.violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Runs one trial with the configured built-in adversary.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    let mut adversary = config.adversary.build(&config.params);
    run_trial_with(config, adversary.as_mut())
}

/// Runs one trial against a caller-supplied strategy. `config.adversary`
/// only labels the result.
pub fn run_trial_with(config: &TrialConfig, adversary: &mut dyn Adversary) -> Result<TrialResult> {
    Trial::new(config)?.run(adversary)
}

/// Runs `trials` trials, trial `k` on seed `split_seed(template.seed, k)`.
/// The result order is the trial order whether or not `parallel` is set.
pub fn run_batch(template: &TrialConfig, trials: u32, parallel: bool) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let one = |k: u32| {
        let mut cfg = template.clone();
        cfg.trial = k;
        cfg.seed = split_seed(template.seed, k as u64);
        run_trial(&cfg)
    };
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..trials).into_par_iter().map(one).collect();
    }
    let _ = parallel;
    (0..trials).map(one).collect()
}

struct Trial<'a> {
    config: &'a TrialConfig,
    proto: Protocol,
    cap: u32,
    n: usize,
    states: Vec<NodeState>,
    corrupted: Vec<bool>,
    spent: u32,
    terminated_in: Vec<Option<u32>>,
    node_rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    messages_sent: u64,
    max_payload_bits: u32,
    violations: Vec<Violation>,
    conflicts: u32,
    first_finish: Option<u32>,
    audits: Vec<PhaseAudit>,
    trace: Option<Vec<TraceRecord>>,
}

impl<'a> Trial<'a> {
    fn new(config: &'a TrialConfig) -> Result<Self> {
        let proto = Protocol::new(config.params)?;
        let cap = config.phase_cap(&proto.layout)?;
        let n = config.params.n as usize;
        let mut input_rng = ChaCha8Rng::seed_from_u64(split_seed(config.seed, STREAM_INPUTS));
        let inputs = config.inputs.generate(config.params.n, &mut input_rng)?;
        let states = inputs
            .iter()
            .enumerate()
            .map(|(i, &b)| NodeState::new(NodeId::from_index(i), b))
            .collect();
        Ok(Trial {
            config,
            proto,
            cap,
            n,
            states,
            corrupted: vec![false; n],
            spent: 0,
            terminated_in: vec![None; n],
            node_rng: ChaCha8Rng::seed_from_u64(split_seed(config.seed, STREAM_NODES)),
            adv_rng: ChaCha8Rng::seed_from_u64(split_seed(config.seed, STREAM_ADVERSARY)),
            messages_sent: 0,
            max_payload_bits: 0,
            violations: Vec::new(),
            conflicts: 0,
            first_finish: None,
            audits: Vec::new(),
            trace: config.record_trace.then(Vec::new),
        })
    }

    fn is_live(&self, i: usize) -> bool {
        !self.corrupted[i] && !self.states[i].is_terminated()
    }

    fn any_live(&self) -> bool {
        (0..self.n).any(|i| self.is_live(i))
    }

    fn run(mut self, adversary: &mut dyn Adversary) -> Result<TrialResult> {
        let mut phase = 0;
        while phase < self.cap && self.any_live() {
            phase += 1;
            self.run_phase(phase, adversary)?;
        }
        Ok(self.finish(phase))
    }

    fn run_phase(&mut self, phase: u32, adversary: &mut dyn Adversary) -> Result<()> {
        let layout = self.proto.layout;
        let slot = layout.slot_for_phase(phase);

        // Round 1.
        let pending: Vec<Option<PhaseMessage>> = (0..self.n)
            .map(|i| {
                if self.corrupted[i] {
                    None
                } else {
                    self.proto.round1_send(&self.states[i])
                }
            })
            .collect();
        let (pending, byz) = self.adversary_round(phase, Round::One, pending, adversary)?;
        self.account(phase, Round::One, &pending, &byz);
        let base = VoteTally::collect(phase, Round::One, pending.iter().flatten());
        for i in 0..self.n {
            if !self.is_live(i) {
                continue;
            }
            let tally = with_byzantine(base, &byz, NodeId::from_index(i), phase, Round::One);
            self.states[i] = self.proto.round1_apply(&self.states[i], &tally);
        }
        let round1_vals: Vec<Option<bool>> = pending.iter().map(|m| m.map(|m| m.val)).collect();

        let mut audit = PhaseAudit {
            phase,
            slot,
            assigned_value: None,
            decided_round1: Vec::new(),
            coin_output: None,
            coin_takers: [0; 2],
            finished: 0,
            adopted: 0,
            honest_ones: 0,
            honest_live: 0,
            corrupted: 0,
            spoiled: false,
        };
        let mut decided_vals = [false; 2];
        for i in 0..self.n {
            let s = &self.states[i];
            if self.is_live(i) && !s.is_lame_duck() && s.decided {
                audit.decided_round1.push(s.id);
                decided_vals[s.val as usize] = true;
            }
        }
        match decided_vals {
            [true, true] => self.violations.push(Violation::AssignedValueSplit { phase }),
            [false, true] => audit.assigned_value = Some(true),
            [true, false] => audit.assigned_value = Some(false),
            [false, false] => {}
        }

        // Round 2, coin contributions piggybacked.
        let mut pending: Vec<Option<PhaseMessage>> = vec![None; self.n];
        for i in 0..self.n {
            if !self.is_live(i) {
                continue;
            }
            let coin = self
                .proto
                .coin_round_send(&self.states[i], &mut self.node_rng)
                .map(|c| c.value);
            pending[i] = self.proto.round2_send(&self.states[i], coin);
        }
        let (pending, byz) = self.adversary_round(phase, Round::Two, pending, adversary)?;
        self.account(phase, Round::Two, &pending, &byz);
        let committee = layout.members(slot);
        let base = VoteTally::collect(phase, Round::Two, pending.iter().flatten());
        let base_coin: i64 = pending
            .iter()
            .enumerate()
            .filter(|(i, _)| committee.contains(&NodeId::from_index(*i)))
            .filter_map(|(_, m)| m.and_then(|m| m.coin))
            .map(Sign::value)
            .sum();
        let mut coin_bits = [false; 2];
        for i in 0..self.n {
            if !self.is_live(i) || self.states[i].is_lame_duck() {
                continue;
            }
            let id = NodeId::from_index(i);
            let tally = with_byzantine(base, &byz, id, phase, Round::Two);
            let coin_sum = base_coin
                + byz
                    .iter()
                    .filter(|(s, _)| committee.contains(s))
                    .filter_map(|(_, out)| out.to(id))
                    .filter(|m| m.phase == phase && m.round == Round::Two)
                    .filter_map(|m| m.coin)
                    .map(Sign::value)
                    .sum::<i64>();
            let outcome = self.proto.round2_apply(&self.states[i], &tally, coin_sum);
            if outcome.conflict {
                self.conflicts += 1;
            }
            match outcome.case {
                Round2Case::Finish(_) => {
                    audit.finished += 1;
                    self.first_finish.get_or_insert(phase);
                }
                Round2Case::Adopt(_) => audit.adopted += 1,
                Round2Case::Coin(b) => {
                    audit.coin_takers[b as usize] += 1;
                    coin_bits[b as usize] = true;
                }
            }
            self.states[i] = outcome.state;
        }
        audit.coin_output = match coin_bits {
            [false, true] => Some(true),
            [true, false] => Some(false),
            _ => None,
        };

        // Quorum persistence, counting only senders still honest now.
        let params = self.proto.params;
        for b in [false, true] {
            let holders = (0..self.n)
                .filter(|&i| !self.corrupted[i] && round1_vals[i] == Some(b))
                .count() as u32;
            if holders >= params.quorum()
                && (0..self.n).any(|i| self.is_live(i) && self.states[i].val != b)
            {
                self.violations.push(Violation::QuorumNotPersisted { phase, value: b });
            }
        }

        for i in 0..self.n {
            if self.is_live(i) {
                audit.honest_live += 1;
                audit.honest_ones += self.states[i].val as u32;
            }
        }
        audit.corrupted = self.spent;
        audit.spoiled = (committee.start().0..=committee.end().0)
            .any(|id| self.corrupted[NodeId(id).index()]);
        self.audits.push(audit);

        for i in 0..self.n {
            if !self.is_live(i) {
                continue;
            }
            match self.proto.advance_phase(&self.states[i]) {
                Advance::Continue(s) => self.states[i] = s,
                Advance::Terminated(s) => {
                    self.states[i] = s;
                    self.terminated_in[i] = Some(phase);
                }
            }
        }
        Ok(())
    }

    /// Lets the adversary act on the committed messages and enforces its
    /// contract. Returns the honest messages that will actually be delivered
    /// and the Byzantine senders' outgoing messages.
    fn adversary_round(
        &mut self,
        phase: u32,
        round: Round,
        mut pending: Vec<Option<PhaseMessage>>,
        adversary: &mut dyn Adversary,
    ) -> Result<(Vec<Option<PhaseMessage>>, Vec<(NodeId, Outgoing)>)> {
        let layout = self.proto.layout;
        let snapshot = RoundSnapshot {
            phase,
            round,
            slot: layout.slot_for_phase(phase),
            params: &self.proto.params,
            layout: &layout,
            states: &self.states,
            pending: &pending,
            corrupted: &self.corrupted,
            budget_remaining: self.proto.params.t - self.spent,
        };
        let AdversaryAction {
            new_corruptions,
            messages,
        } = adversary.act(&snapshot, &mut self.adv_rng);

        let n = self.proto.params.n;
        for id in new_corruptions {
            if id.0 == 0 || id.0 > n {
                return Err(Error::UnknownNode(id));
            }
            if self.corrupted[id.index()] {
                continue;
            }
            if self.spent + 1 > self.proto.params.t {
                return Err(Error::BudgetExceeded {
                    requested: self.spent + 1,
                    t: self.proto.params.t,
                });
            }
            self.corrupted[id.index()] = true;
            self.spent += 1;
            // Rushing: the committed message is withdrawn.
            pending[id.index()] = None;
        }
        let mut byz = Vec::with_capacity(messages.len());
        for (sender, out) in messages {
            if sender.0 == 0 || sender.0 > n {
                return Err(Error::UnknownNode(sender));
            }
            if !self.corrupted[sender.index()] {
                return Err(Error::ForgedSender(sender));
            }
            if let Outgoing::PerRecipient(v) = &out {
                if v.len() != n as usize {
                    return Err(Error::RecipientCount {
                        sender,
                        got: v.len(),
                        expected: n as usize,
                    });
                }
            }
            if out != Outgoing::Silent {
                byz.push((sender, out));
            }
        }
        Ok((pending, byz))
    }

    /// Message counting, payload sizes and the optional trace.
    fn account(
        &mut self,
        phase: u32,
        round: Round,
        pending: &[Option<PhaseMessage>],
        byz: &[(NodeId, Outgoing)],
    ) {
        let layout = self.proto.layout;
        let bound = layout.congest_bound();
        let mut widest = 0;
        for m in pending.iter().flatten() {
            self.messages_sent += self.n as u64;
            widest = widest.max(m.wire_bits(&layout));
        }
        for (_, out) in byz {
            for r in 0..self.n {
                if let Some(m) = out.to(NodeId::from_index(r)) {
                    self.messages_sent += 1;
                    widest = widest.max(m.wire_bits(&layout));
                }
            }
        }
        self.max_payload_bits = self.max_payload_bits.max(widest);
        if widest > bound {
            self.violations.push(Violation::PayloadTooLarge { phase, bits: widest });
        }
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        let trial = self.config.trial;
        for r in 0..self.n {
            let recipient = NodeId::from_index(r);
            let honest = pending
                .iter()
                .enumerate()
                .filter_map(|(s, m)| m.map(|m| (NodeId::from_index(s), m, false)));
            let corrupt = byz
                .iter()
                .filter_map(|(s, out)| out.to(recipient).map(|m| (*s, *m, true)));
            let mut msgs: Vec<_> = honest.chain(corrupt).collect();
            msgs.sort_by_key(|(s, _, _)| *s);
            trace.extend(msgs.into_iter().map(|(sender, payload, corrupted)| TraceRecord {
                trial,
                phase,
                round: round.number(),
                sender,
                recipient,
                corrupted,
                payload,
            }));
        }
    }

    fn finish(self, phases_used: u32) -> TrialResult {
        let honest: Vec<usize> = (0..self.n).filter(|&i| !self.corrupted[i]).collect();
        let outputs: Vec<(NodeId, Option<bool>)> = honest
            .iter()
            .map(|&i| (NodeId::from_index(i), self.states[i].output))
            .collect();
        let terminated = outputs.iter().all(|(_, o)| o.is_some());
        let agreement = terminated && outputs.windows(2).all(|w| w[0].1 == w[1].1);

        let mut violations = self.violations;
        let first_input = honest.first().map(|&i| self.states[i].input);
        let inputs_unanimous = honest.iter().all(|&i| Some(self.states[i].input) == first_input);
        let mut validity_ok = true;
        if let (true, Some(b)) = (inputs_unanimous, first_input) {
            validity_ok = outputs.iter().all(|(_, o)| *o == Some(b));
            if !validity_ok {
                violations.push(Violation::ValidityBroken { input: b });
            }
        }

        if let Some(p) = self.first_finish {
            // Only judge the spread if the cap left room for it.
            let deadline = p + 2;
            for &i in &honest {
                match self.terminated_in[i] {
                    Some(at) if at <= deadline => {}
                    None if phases_used < deadline => {}
                    _ => {
                        violations.push(Violation::LateTermination {
                            first_finish: p,
                            node: NodeId::from_index(i),
                        });
                        break;
                    }
                }
            }
            let mut outs = outputs.iter().filter_map(|(_, o)| *o);
            if let Some(first) = outs.next() {
                if outs.any(|o| o != first) {
                    violations.push(Violation::SplitAfterFinish { first_finish: p });
                }
            }
        }

        let spoiled_phases = self.audits.iter().filter(|a| a.spoiled).count() as u32;
        let config = self.config;
        TrialResult {
            trial: config.trial,
            seed: config.seed,
            n: config.params.n,
            t: config.params.t,
            c: self.proto.layout.c,
            adversary: config.adversary.to_string(),
            outputs,
            agreement,
            validity_ok,
            inputs_unanimous,
            terminated,
            phases_used,
            rounds_used: 2 * phases_used,
            q: self.spent,
            messages_sent: self.messages_sent,
            max_payload_bits: self.max_payload_bits,
            violations,
            conflicts: self.conflicts,
            spoiled_phases,
            first_finish: self.first_finish,
            audits: self.audits,
            trace: self.trace,
        }
    }
}

#[inline]
fn with_byzantine(
    base: VoteTally,
    byz: &[(NodeId, Outgoing)],
    recipient: NodeId,
    phase: u32,
    round: Round,
) -> VoteTally {
    let mut tally = base;
    for (_, out) in byz {
        if let Some(m) = out.to(recipient) {
            if m.phase == phase && m.round == round {
                tally.add(m);
            }
        }
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn config(n: u32, t: u32, adversary: AdversarySpec, inputs: InputPattern) -> TrialConfig {
        TrialConfig::new(ProtocolParams::new(n, t), adversary, 7).with_inputs(inputs)
    }

    #[test]
    fn unanimous_null_takes_two_phases() {
        for (n, t) in [(4, 1), (16, 5), (100, 33)] {
            let r = run_trial(&config(n, t, AdversarySpec::Null, InputPattern::Unanimous(true))).unwrap();
            assert!(r.outputs.iter().all(|(_, o)| *o == Some(true)));
            assert_eq!(r.phases_used, 2);
            assert_eq!(r.rounds_used, 4);
            assert!(r.agreement && r.validity_ok && r.violations.is_empty());
            assert_eq!(r.first_finish, Some(1));
            assert_eq!(r.messages_sent, 4 * (n as u64) * (n as u64));
        }
    }

    /// Corrupts node 4 in the first round and keeps it silent.
    struct SilenceFour;

    impl Adversary for SilenceFour {
        fn name(&self) -> String {
            "silence4".into()
        }

        fn act(&mut self, snap: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
            let mut a = AdversaryAction::none();
            if !snap.is_corrupted(NodeId(4)) {
                a.new_corruptions.push(NodeId(4));
            }
            a
        }
    }

    #[test]
    fn silent_fourth_node_cannot_block() {
        let cfg = config(4, 1, AdversarySpec::Null, "bits:1110".parse().unwrap()).with_trace(true);
        let r = run_trial_with(&cfg, &mut SilenceFour).unwrap();
        assert_eq!(r.q, 1);
        assert_eq!(r.outputs.len(), 3);
        assert!(r.outputs.iter().all(|(_, o)| *o == Some(true)));
        assert!(r.validity_ok && r.inputs_unanimous && r.violations.is_empty());
        assert_eq!(r.phases_used, 2);
        // Hand trace: phase 1 round 1 every recipient gets (1,false) from
        // nodes 1..3 and nothing from 4; round 2 gets (1,true) from 1..3.
        let trace = r.trace.unwrap();
        let p1r1: Vec<_> = trace.iter().filter(|x| x.phase == 1 && x.round == 1).collect();
        assert_eq!(p1r1.len(), 3 * 4);
        assert!(p1r1.iter().all(|x| x.sender.0 <= 3 && x.payload.val && !x.payload.decided));
        let p1r2: Vec<_> = trace.iter().filter(|x| x.phase == 1 && x.round == 2).collect();
        assert!(p1r2.iter().all(|x| x.payload.val && x.payload.decided));
        assert!(trace.iter().all(|x| !x.corrupted));
    }

    struct Forger;

    impl Adversary for Forger {
        fn name(&self) -> String {
            "forger".into()
        }

        fn act(&mut self, snap: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
            let mut messages = BTreeMap::new();
            messages.insert(
                NodeId(1),
                Outgoing::Broadcast(PhaseMessage::new(snap.phase, snap.round, false, true)),
            );
            AdversaryAction {
                new_corruptions: vec![],
                messages,
            }
        }
    }

    struct Greedy;

    impl Adversary for Greedy {
        fn name(&self) -> String {
            "greedy".into()
        }

        fn act(&mut self, snap: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
            AdversaryAction {
                new_corruptions: snap.all_ids().take(snap.params.t as usize + 1).collect(),
                messages: BTreeMap::new(),
            }
        }
    }

    struct ShortVector;

    impl Adversary for ShortVector {
        fn name(&self) -> String {
            "short".into()
        }

        fn act(&mut self, _: &RoundSnapshot<'_>, _: &mut dyn RngCore) -> AdversaryAction {
            let mut messages = BTreeMap::new();
            messages.insert(NodeId(1), Outgoing::PerRecipient(vec![None; 2]));
            AdversaryAction {
                new_corruptions: vec![NodeId(1)],
                messages,
            }
        }
    }

    #[test]
    fn contract_breaches_are_hard_errors() {
        let cfg = config(16, 5, AdversarySpec::Null, InputPattern::Random);
        assert_eq!(run_trial_with(&cfg, &mut Forger), Err(Error::ForgedSender(NodeId(1))));
        assert_eq!(
            run_trial_with(&cfg, &mut Greedy),
            Err(Error::BudgetExceeded { requested: 6, t: 5 })
        );
        assert!(matches!(
            run_trial_with(&cfg, &mut ShortVector),
            Err(Error::RecipientCount { got: 2, expected: 16, .. })
        ));
    }

    #[test]
    fn deterministic_including_trace() {
        let cfg = config(
            16,
            5,
            AdversarySpec::CoinKiller {
                budget: None,
                spend: None,
            },
            InputPattern::Random,
        )
        .with_trace(true);
        let a = run_trial(&cfg).unwrap();
        let b = run_trial(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.as_ref().is_some_and(|t| !t.is_empty()));
    }

    #[test]
    fn batch_rejects_zero_and_keeps_order() {
        let cfg = config(16, 5, AdversarySpec::Null, InputPattern::Random);
        assert_eq!(run_batch(&cfg, 0, false), Err(Error::NoTrials));
        let serial = run_batch(&cfg, 40, false).unwrap();
        let parallel = run_batch(&cfg, 40, true).unwrap();
        assert_eq!(serial, parallel);
        for (k, r) in serial.iter().enumerate() {
            assert_eq!(r.trial, k as u32);
            assert_eq!(r.seed, split_seed(7, k as u64));
        }
    }

    #[test]
    fn max_phases_below_c_rejected() {
        let cfg = config(64, 21, AdversarySpec::Null, InputPattern::Random).with_max_phases(1);
        assert!(matches!(
            run_trial(&cfg),
            Err(Error::InvalidParam { name: "max_phases", .. })
        ));
    }

    #[test]
    fn split_seed_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|k| split_seed(42, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(0, 0), split_seed(1, 0));
    }

    #[test]
    fn input_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(InputPattern::Alternating.generate(4, &mut rng).unwrap(), [true, false, true, false]);
        assert_eq!(InputPattern::HalfSplit.generate(5, &mut rng).unwrap(), [true, true, false, false, false]);
        assert!(InputPattern::Explicit(vec![true]).generate(2, &mut rng).is_err());
        for s in ["ones", "zeros", "alternating", "random", "half", "bits:0110"] {
            let p: InputPattern = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("bits:012".parse::<InputPattern>().is_err());
        assert!("most".parse::<InputPattern>().is_err());
    }

    #[test]
    fn trace_lines_are_json() {
        let cfg = config(4, 1, AdversarySpec::Null, InputPattern::Unanimous(false)).with_trace(true);
        let r = run_trial(&cfg).unwrap();
        let trace = r.trace.unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), trace.len());
        for (line, rec) in lines.iter().zip(&trace) {
            let back: TraceRecord = serde_json::from_str(line).unwrap();
            assert_eq!(&back, rec);
        }
    }
}
