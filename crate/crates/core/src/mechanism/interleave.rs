use crate::error::{Error, Result};
use crate::gmdp::{Policy, Portfolio};
use crate::instance::Instance;
use crate::rational::int;

use super::{check_reward, greedy_arm, Fee, History, Mepir, Phase};

/// Which explorer is hidden inside the phases, and which filler rule surrounds it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// FEE explorer; filler is Greedy once some arm beat the default, else the default arm.
    IcFee,
    /// M_EPIR explorer; filler is always Greedy.
    IcEpFee,
}

#[derive(Clone, Debug)]
enum Explorer<'a> {
    Fee(Fee<'a>),
    Mepir(Mepir<'a>),
}

impl Explorer<'_> {
    fn recommend(&self) -> Portfolio {
        match self {
            Explorer::Fee(m) => m.recommend(),
            Explorer::Mepir(m) => m.recommend(),
        }
    }

    fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        match self {
            Explorer::Fee(m) => m.observe(arm, reward),
            Explorer::Mepir(m) => m.observe(arm, reward),
        }
    }

    fn exploits(&self) -> bool {
        match self {
            Explorer::Fee(m) => m.exploits(),
            Explorer::Mepir(m) => m.exploits(),
        }
    }

    fn phase(&self) -> Phase {
        match self {
            Explorer::Fee(m) => m.phase(),
            Explorer::Mepir(m) => m.phase(),
        }
    }

    fn settled(&self) -> Option<usize> {
        match self {
            Explorer::Fee(m) => m.settled(),
            Explorer::Mepir(m) => m.settled(),
        }
    }
}

/// Incentive-compatible wrappers that hide one explorer round uniformly inside each phase of
/// `B` rounds, so an agent told to explore cannot tell it apart from an exploiting round.
///
/// Rounds `1..=K` form a prelude. Phases then start at round `K + 1`. At each phase start the
/// mechanism either switches to following the explorer for good (the explorer has started
/// exploiting) or draws the explorer's slot uniformly over the phase's actual length; the
/// last phase may be shorter than `B`.
#[derive(Clone, Debug)]
pub struct Interleaved<'a> {
    inst: &'a Instance,
    variant: Variant,
    n: usize,
    b: u64,
    history: History,
    explorer: Explorer<'a>,
    following: bool,
    // length of the phase whose explorer slot still has to be drawn
    chance: Option<u64>,
    slot: Option<usize>,
}

impl<'a> Interleaved<'a> {
    pub fn ic_fee(inst: &'a Instance, policy: &'a Policy, b: u64, n: usize) -> Self {
        Self::new(inst, Variant::IcFee, Explorer::Fee(Fee::new(inst, policy, n)), b, n)
    }

    pub fn ic_ep_fee(inst: &'a Instance, b: u64, n: usize) -> Self {
        Self::new(inst, Variant::IcEpFee, Explorer::Mepir(Mepir::new(inst, n)), b, n)
    }

    fn new(inst: &'a Instance, variant: Variant, explorer: Explorer<'a>, b: u64, n: usize) -> Self {
        assert!(b > 0, "phase length must be positive");
        let mut m = Self {
            inst,
            variant,
            n,
            b,
            history: History::new(inst.k()),
            explorer,
            following: false,
            chance: None,
            slot: None,
        };
        m.enter_round();
        m
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn phase_length(&self) -> u64 {
        self.b
    }

    pub fn following(&self) -> bool {
        self.following
    }

    /// Absolute round index (zero-based) of the current phase's explorer.
    pub fn explorer_slot(&self) -> Option<usize> {
        self.slot
    }

    pub fn pending_chance(&self) -> Option<u64> {
        self.chance
    }

    pub fn resolve_chance(&mut self, outcome: u64) -> Result<()> {
        let len = self.chance.ok_or_else(|| Error::Mechanism("no chance move pending".into()))?;
        if outcome >= len {
            return Err(Error::Mechanism(format!("chance outcome {outcome} out of 0..{len}")));
        }
        self.slot = Some(self.history.rounds() + outcome as usize);
        self.chance = None;
        Ok(())
    }

    fn in_prelude(&self) -> bool {
        self.history.rounds() < self.inst.k()
    }

    fn explorer_turn(&self) -> bool {
        self.following
            || self.slot == Some(self.history.rounds())
            || (self.variant == Variant::IcFee && self.history.rounds() == 0)
    }

    pub fn recommend(&self) -> Portfolio {
        if self.explorer_turn() {
            return self.explorer.recommend();
        }
        let t = self.history.rounds();
        let greedy = || Portfolio::point(greedy_arm(self.inst, &self.history));
        match self.variant {
            Variant::IcEpFee => greedy(),
            Variant::IcFee => {
                let r1 = self.history.r1().expect("default arm observed in round one");
                let beaten = if t < self.inst.k() {
                    int(i64::from(r1)) < *self.inst.mu(self.inst.k() - 1)
                } else {
                    self.history.revealed().iter().any(|&(_, r)| r > r1)
                };
                if beaten { greedy() } else { Portfolio::point(0) }
            }
        }
    }

    pub fn phase(&self) -> Phase {
        if self.explorer_turn() { self.explorer.phase() } else { Phase::Delegate }
    }

    pub fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        check_reward(self.inst, arm, reward)?;
        self.history.push(arm, reward)?;
        self.explorer.observe(arm, reward)?;
        self.enter_round();
        Ok(())
    }

    pub fn settled(&self) -> Option<usize> {
        if self.following { self.explorer.settled() } else { None }
    }

    fn enter_round(&mut self) {
        let t = self.history.rounds();
        let k = self.inst.k();
        if self.following || t >= self.n || self.in_prelude() {
            return;
        }
        if ((t - k) as u64).is_multiple_of(self.b) {
            if self.explorer.exploits() {
                self.following = true;
            } else {
                self.chance = Some(self.b.min((self.n - t) as u64));
            }
        }
    }
}
