use crate::error::Result;
use crate::gmdp::Portfolio;
use crate::instance::Instance;
use crate::rational::int;

use super::{check_reward, greedy_arm, History, Phase};

fn best_or_default(h: &History) -> usize {
    h.best_observed().map_or(0, |(a, _)| a)
}

/// Always recommends the posterior-argmax arm.
#[derive(Clone, Debug)]
pub struct Greedy<'a> {
    inst: &'a Instance,
    n: usize,
    history: History,
}

impl<'a> Greedy<'a> {
    pub fn new(inst: &'a Instance, n: usize) -> Self {
        Self { inst, n, history: History::new(inst.k()) }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        Phase::Exploit
    }

    pub fn recommend(&self) -> Portfolio {
        Portfolio::point(greedy_arm(self.inst, &self.history))
    }

    pub fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        check_reward(self.inst, arm, reward)?;
        self.history.push(arm, reward).map(|_| ())
    }

    /// Once the argmax arm is revealed, pulling it again teaches nothing.
    pub fn settled(&self) -> Option<usize> {
        let a = greedy_arm(self.inst, &self.history);
        self.history.observed(a).map(|_| a)
    }
}

/// Pulls every arm once in index order, then exploits.
#[derive(Clone, Debug)]
pub struct FullX<'a> {
    inst: &'a Instance,
    n: usize,
    history: History,
}

impl<'a> FullX<'a> {
    pub fn new(inst: &'a Instance, n: usize) -> Self {
        Self { inst, n, history: History::new(inst.k()) }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    fn next_unexplored(&self) -> Option<usize> {
        (0..self.inst.k()).find(|&a| self.history.observed(a).is_none())
    }

    pub fn phase(&self) -> Phase {
        if self.next_unexplored().is_some() { Phase::Primary } else { Phase::Exploit }
    }

    pub fn recommend(&self) -> Portfolio {
        Portfolio::point(self.next_unexplored().unwrap_or_else(|| best_or_default(&self.history)))
    }

    pub fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        check_reward(self.inst, arm, reward)?;
        self.history.push(arm, reward).map(|_| ())
    }

    pub fn settled(&self) -> Option<usize> {
        (self.phase() == Phase::Exploit).then(|| best_or_default(&self.history))
    }
}

/// The ex-post individually rational benchmark: observe the default arm, then pull every
/// arm whose prior mean is at least the default's reward, then exploit.
#[derive(Clone, Debug)]
pub struct Mepir<'a> {
    inst: &'a Instance,
    n: usize,
    history: History,
}

impl<'a> Mepir<'a> {
    pub fn new(inst: &'a Instance, n: usize) -> Self {
        Self { inst, n, history: History::new(inst.k()) }
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    fn next_candidate(&self) -> Option<usize> {
        let Some(r1) = self.history.r1() else {
            return Some(0);
        };
        let r1 = int(i64::from(r1));
        (1..self.inst.k()).find(|&a| self.history.observed(a).is_none() && *self.inst.mu(a) >= r1)
    }

    pub fn exploits(&self) -> bool {
        self.next_candidate().is_none()
    }

    pub fn phase(&self) -> Phase {
        if self.exploits() { Phase::Exploit } else { Phase::Primary }
    }

    pub fn recommend(&self) -> Portfolio {
        Portfolio::point(self.next_candidate().unwrap_or_else(|| best_or_default(&self.history)))
    }

    pub fn observe(&mut self, arm: usize, reward: u32) -> Result<()> {
        check_reward(self.inst, arm, reward)?;
        self.history.push(arm, reward).map(|_| ())
    }

    pub fn settled(&self) -> Option<usize> {
        self.exploits().then(|| best_or_default(&self.history))
    }
}
