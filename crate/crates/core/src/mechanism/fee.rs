use crate::error::{Error, Result};
use crate::gmdp::{is_terminal, GmdpState, Policy, Portfolio};
use crate::instance::Instance;
use crate::rational::{int, Rat};

use super::{check_reward, History, Phase};

/// Fiduciary Explore & Exploit.
///
/// Primary exploration walks the planned policy over reduced states. When the walk stops
/// with a discovered arm beating the default, secondary exploration visits the remaining
/// arms one at a time (lowest index first), mixing each with the best observed arm so the
/// portfolio never falls below the default arm's value. Everything after that exploits.
#[derive(Clone, Debug)]
pub struct Fee<'a> {
    inst: &'a Instance,
    policy: &'a Policy,
    n: usize,
    history: History,
    phase: Phase,
    state: GmdpState,
    // arms still to visit in secondary exploration
    leftover: u64,
}

impl<'a> Fee<'a> {
    pub fn new(inst: &'a Instance, policy: &'a Policy, n: usize) -> Self {
        Self {
            inst,
            policy,
            n,
            history: History::new(inst.k()),
            phase: Phase::Primary,
            state: GmdpState::initial(inst.k()),
            leftover: 0,
        }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn exploits(&self) -> bool {
        self.phase == Phase::Exploit
    }

    /// Reduced planning state (frozen once primary exploration ends).
    pub fn gmdp_state(&self) -> GmdpState {
        self.state
    }

    /// Arms not yet visited or discarded by secondary exploration.
    pub fn leftover(&self) -> u64 {
        self.leftover
    }

    pub fn recommend(&self) -> Portfolio {
        match self.phase {
            Phase::Primary => self
                .policy
                .decision(&self.state)
                .expect("primary exploration stays on planned states")
                .portfolio
                .clone(),
            Phase::Secondary => {
                let i = self.leftover.trailing_zeros() as usize;
                let (best, rb) = self.history.best_observed().expect("secondary has observations");
                let r1 = int(i64::from(self.history.r1().expect("default arm observed")));
                let mu = self.inst.mu(i);
                if *mu >= r1 {
                    return Portfolio::point(i);
                }
                let rb = int(i64::from(rb));
                let explore: Rat = (&rb - &r1) / (&rb - mu);
                let stay = Rat::from_integer(1.into()) - &explore;
                Portfolio::new([(i, explore), (best, stay)]).expect("valid mixture")
            }
            Phase::Exploit | Phase::Delegate => {
                Portfolio::point(self.history.best_observed().map_or(0, |(a, _)| a))
            }
        }
    }

    pub fn settled(&self) -> Option<usize> {
        self.exploits().then(|| self.history.best_observed().map_or(0, |(a, _)| a))
    }

    /// Records a pull. Pulls need not come from this mechanism's own recommendation: the
    /// interleaved IC mechanisms feed every round through here.
    pub fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        check_reward(self.inst, arm, reward)?;
        if !self.history.push(arm, reward)? {
            return Ok(());
        }
        match self.phase {
            Phase::Primary => {
                if self.state.is_initial() && arm != 0 {
                    return Err(Error::Mechanism("the default arm must be observed first".into()));
                }
                self.state = self.state.after(arm, reward);
            }
            Phase::Secondary => self.leftover &= !(1u64 << arm),
            _ => {}
        }
        self.settle()
    }

    fn settle(&mut self) -> Result<()> {
        if self.phase == Phase::Primary {
            if self.policy.decision(&self.state).is_some() {
                return Ok(());
            }
            if self.policy.terminal_value(&self.state).is_none() && !is_terminal(&self.state, self.inst) {
                return Err(Error::InvalidState(format!(
                    "state {:?} is not in the planned table",
                    self.state
                )));
            }
            let (a, b) = (self.state.alpha.unwrap(), self.state.beta.unwrap());
            if b > a {
                self.phase = Phase::Secondary;
                self.leftover = self.state.unobserved;
            } else {
                self.phase = Phase::Exploit;
            }
        }
        if self.phase == Phase::Secondary {
            // drop arms that cannot beat the best observed reward
            let (_, rb) = self.history.best_observed().expect("observed");
            while self.leftover != 0 {
                let i = self.leftover.trailing_zeros() as usize;
                if self.inst.pmf(i).max_support() > rb {
                    return Ok(());
                }
                self.leftover &= !(1u64 << i);
            }
            self.phase = Phase::Exploit;
        }
        Ok(())
    }
}
