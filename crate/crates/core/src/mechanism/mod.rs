//! Recommendation mechanisms behind one stepwise contract.
//!
//! Each round the caller:
//! 1. resolves any pending chance move ([`Mechanism::pending_chance`] /
//!    [`Mechanism::resolve_chance`]),
//! 2. asks for the round's portfolio with [`Mechanism::recommend`] (pure),
//! 3. samples an arm from it and reports the reward with [`Mechanism::observe`].
//!
//! Keeping every coin explicit lets the simulator replay episodes from a seed and lets the
//! IC checker branch on each coin with its exact probability.

mod fee;
mod interleave;
mod simple;

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::gmdp::{self, Policy, Portfolio};
use crate::instance::{exploration_margin, validate, Instance, MarginPair};
use crate::rational::{int, Rat};

pub use fee::Fee;
pub use interleave::{Interleaved, Variant};
pub use simple::{FullX, Greedy, Mepir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismKind {
    Fee,
    IcFee,
    Mepir,
    IcEpFee,
    Greedy,
    FullX,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 6] = [
        MechanismKind::Fee,
        MechanismKind::IcFee,
        MechanismKind::Mepir,
        MechanismKind::IcEpFee,
        MechanismKind::Greedy,
        MechanismKind::FullX,
    ];

    pub fn needs_policy(self) -> bool {
        matches!(self, MechanismKind::Fee | MechanismKind::IcFee)
    }

    pub fn needs_margin(self) -> bool {
        matches!(self, MechanismKind::IcFee | MechanismKind::IcEpFee)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Fee => "fee",
            MechanismKind::IcFee => "icfee",
            MechanismKind::Mepir => "mepir",
            MechanismKind::IcEpFee => "icepfee",
            MechanismKind::Greedy => "greedy",
            MechanismKind::FullX => "fullx",
        })
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::BadInput(format!("unknown mechanism {s:?}")))
    }
}

/// Tag attached to each round of a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// Following the planned exploration policy (or M_EPIR / FullX exploration).
    Primary,
    /// Exploring the leftover arms against a discovered superior arm.
    Secondary,
    /// Recommending the best observed arm forever.
    Exploit,
    /// A round filled by the Greedy / default-arm rule of an interleaved mechanism.
    Delegate,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Primary => "primary",
            Phase::Secondary => "secondary",
            Phase::Exploit => "exploit",
            Phase::Delegate => "delegate",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" => Ok(Phase::Primary),
            "secondary" => Ok(Phase::Secondary),
            "exploit" => Ok(Phase::Exploit),
            "delegate" => Ok(Phase::Delegate),
            _ => Err(Error::BadInput(format!("unknown phase {s:?}"))),
        }
    }
}

/// What has been observed so far. Rewards are deterministic, so each arm contributes at most
/// one piece of information; repeated pulls only advance the round counter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct History {
    rewards: Vec<Option<u32>>,
    fresh: Vec<(usize, u32)>,
    rounds: usize,
}

impl History {
    pub fn new(k: usize) -> Self {
        Self { rewards: vec![None; k], fresh: Vec::new(), rounds: 0 }
    }

    /// Builds from `(arm, reward)` pulls in order.
    pub fn from_pulls(k: usize, pulls: &[(usize, u32)]) -> Result<Self> {
        let mut h = Self::new(k);
        for &(a, c) in pulls {
            h.push(a, c)?;
        }
        Ok(h)
    }

    /// Records a pull; returns whether it revealed a new arm.
    pub fn push(&mut self, arm: usize, reward: u32) -> Result<bool> {
        let slot = self
            .rewards
            .get_mut(arm)
            .ok_or_else(|| Error::Mechanism(format!("arm index {arm} out of range")))?;
        self.rounds += 1;
        match *slot {
            Some(r) if r == reward => Ok(false),
            Some(r) => Err(Error::Mechanism(format!(
                "arm {} already revealed reward {r}, got {reward}",
                arm + 1
            ))),
            None => {
                *slot = Some(reward);
                self.fresh.push((arm, reward));
                Ok(true)
            }
        }
    }

    pub fn observed(&self, arm: usize) -> Option<u32> {
        self.rewards[arm]
    }

    pub fn r1(&self) -> Option<u32> {
        self.rewards[0]
    }

    /// Fresh observations in the order they happened.
    pub fn revealed(&self) -> &[(usize, u32)] {
        &self.fresh
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn k(&self) -> usize {
        self.rewards.len()
    }

    /// Observed arm with the highest reward, lowest index on ties.
    pub fn best_observed(&self) -> Option<(usize, u32)> {
        let mut best: Option<(usize, u32)> = None;
        for (a, r) in self.rewards.iter().enumerate() {
            if let Some(r) = *r {
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((a, r));
                }
            }
        }
        best
    }

    /// `E(X_arm | h)`: the revealed reward, or the prior mean.
    pub fn posterior_mean(&self, inst: &Instance, arm: usize) -> Rat {
        match self.rewards[arm] {
            Some(r) => int(i64::from(r)),
            None => inst.mu(arm).clone(),
        }
    }
}

/// Arm with the highest posterior mean, lowest index on ties.
pub fn greedy_arm(inst: &Instance, h: &History) -> usize {
    let mut best = 0;
    let mut best_v = h.posterior_mean(inst, 0);
    for a in 1..inst.k() {
        let v = h.posterior_mean(inst, a);
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    best
}

fn check_reward(inst: &Instance, arm: usize, reward: u32) -> Result<()> {
    if arm >= inst.k() {
        return Err(Error::Mechanism(format!("arm index {arm} out of range")));
    }
    if reward > inst.h() || inst.pmf(arm).prob(reward).is_zero() {
        return Err(Error::Mechanism(format!(
            "reward {reward} is outside the support of arm {}",
            arm + 1
        )));
    }
    Ok(())
}

/// One running mechanism for one episode of `n` rounds.
#[derive(Clone, Debug)]
pub enum Mechanism<'a> {
    Fee(Fee<'a>),
    Interleaved(Interleaved<'a>),
    Mepir(Mepir<'a>),
    Greedy(Greedy<'a>),
    FullX(FullX<'a>),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $e:expr) => {
        match $self {
            Mechanism::Fee($m) => $e,
            Mechanism::Interleaved($m) => $e,
            Mechanism::Mepir($m) => $e,
            Mechanism::Greedy($m) => $e,
            Mechanism::FullX($m) => $e,
        }
    };
}

impl<'a> Mechanism<'a> {
    pub fn kind(&self) -> MechanismKind {
        match self {
            Mechanism::Fee(_) => MechanismKind::Fee,
            Mechanism::Interleaved(m) => match m.variant() {
                Variant::IcFee => MechanismKind::IcFee,
                Variant::IcEpFee => MechanismKind::IcEpFee,
            },
            Mechanism::Mepir(_) => MechanismKind::Mepir,
            Mechanism::Greedy(_) => MechanismKind::Greedy,
            Mechanism::FullX(_) => MechanismKind::FullX,
        }
    }

    pub fn history(&self) -> &History {
        dispatch!(self, m => m.history())
    }

    /// Rounds already played.
    pub fn round(&self) -> usize {
        self.history().rounds()
    }

    pub fn horizon(&self) -> usize {
        dispatch!(self, m => m.horizon())
    }

    /// A coin that must be resolved before this round's recommendation: `Some(m)` means `m`
    /// equally likely outcomes.
    pub fn pending_chance(&self) -> Option<u64> {
        match self {
            Mechanism::Interleaved(m) => m.pending_chance(),
            _ => None,
        }
    }

    pub fn resolve_chance(&mut self, outcome: u64) -> Result<()> {
        match self {
            Mechanism::Interleaved(m) => m.resolve_chance(outcome),
            _ => Err(Error::Mechanism("no chance move pending".into())),
        }
    }

    /// The current round's portfolio. Does not change the mechanism.
    pub fn recommend(&self) -> Result<Portfolio> {
        if self.round() >= self.horizon() {
            return Err(Error::Mechanism(format!(
                "horizon of {} rounds exhausted",
                self.horizon()
            )));
        }
        if self.pending_chance().is_some() {
            return Err(Error::Mechanism("resolve the pending chance move first".into()));
        }
        Ok(dispatch!(self, m => m.recommend()))
    }

    /// Phase tag of the current round.
    pub fn phase(&self) -> Phase {
        dispatch!(self, m => m.phase())
    }

    /// Reports the reward of the arm sampled from this round's portfolio.
    pub fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        let p = self.recommend()?;
        if p.prob(arm).is_zero() {
            return Err(Error::Mechanism(format!(
                "arm {} is not in the recommended portfolio {p}",
                arm + 1
            )));
        }
        dispatch!(self, m => m.observe(arm, reward))
    }

    /// `Some(arm)` once the mechanism recommends `arm` with certainty in every remaining
    /// round without further state changes.
    pub fn settled(&self) -> Option<usize> {
        dispatch!(self, m => m.settled())
    }
}

/// Builds fresh mechanisms of one kind for one instance, sharing the planned policy and the
/// IC phase length between episodes.
#[derive(Clone, Debug)]
pub struct MechanismFactory<'a> {
    inst: &'a Instance,
    kind: MechanismKind,
    policy: Option<Policy>,
    margin: Option<MarginPair>,
    phase_length: Option<u64>,
}

impl<'a> MechanismFactory<'a> {
    pub fn new(inst: &'a Instance, kind: MechanismKind) -> Result<Self> {
        Self::with_policy(inst, kind, None)
    }

    /// Reuses an already planned policy when given; it must belong to `inst`.
    pub fn with_policy(inst: &'a Instance, kind: MechanismKind, policy: Option<Policy>) -> Result<Self> {
        let policy = if kind.needs_policy() {
            match policy {
                Some(p) if p.matches(inst) => Some(p),
                Some(_) => return Err(Error::BadInput("policy was planned for another instance".into())),
                None => Some(gmdp::plan(inst)?),
            }
        } else {
            None
        };
        let (margin, phase_length) = if kind.needs_margin() {
            let report = validate(inst);
            if !report.ic_assumption_holds {
                return Err(Error::Assumption(format!(
                    "Pr(X_i < mu_j) = 0 for pairs {:?}",
                    report
                        .violating_pairs
                        .iter()
                        .map(|(i, j)| (i + 1, j + 1))
                        .collect::<Vec<_>>()
                )));
            }
            let m = exploration_margin(inst)?;
            let b = m.phase_length;
            (Some(m), Some(b))
        } else {
            (None, None)
        };
        Ok(Self { inst, kind, policy, margin, phase_length })
    }

    /// Overrides the IC phase length (for sensitivity experiments and checker sanity runs).
    pub fn phase_length_override(mut self, b: u64) -> Result<Self> {
        if !self.kind.needs_margin() {
            return Err(Error::BadInput(format!("{} has no phase length", self.kind)));
        }
        if b == 0 {
            return Err(Error::BadInput("phase length must be positive".into()));
        }
        self.phase_length = Some(b);
        Ok(self)
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn policy(&self) -> Option<&Policy> {
        self.policy.as_ref()
    }

    pub fn margin(&self) -> Option<&MarginPair> {
        self.margin.as_ref()
    }

    pub fn phase_length(&self) -> Option<u64> {
        self.phase_length
    }

    pub fn build(&self, n: usize) -> Mechanism<'_> {
        let inst = self.inst;
        match self.kind {
            MechanismKind::Fee => Mechanism::Fee(Fee::new(inst, self.policy.as_ref().unwrap(), n)),
            MechanismKind::IcFee => Mechanism::Interleaved(Interleaved::ic_fee(
                inst,
                self.policy.as_ref().unwrap(),
                self.phase_length.unwrap(),
                n,
            )),
            MechanismKind::IcEpFee => Mechanism::Interleaved(Interleaved::ic_ep_fee(
                inst,
                self.phase_length.unwrap(),
                n,
            )),
            MechanismKind::Mepir => Mechanism::Mepir(Mepir::new(inst, n)),
            MechanismKind::Greedy => Mechanism::Greedy(Greedy::new(inst, n)),
            MechanismKind::FullX => Mechanism::FullX(FullX::new(inst, n)),
        }
    }
}

#[cfg(test)]
mod tests;
