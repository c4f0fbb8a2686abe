use std::sync::atomic::{AtomicU64, Ordering};

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mechanism::{Mechanism, MechanismFactory};
use crate::rational::{int, Rat};

use super::{AuditReport, Constraint};

/// Default cap on visited (round, branch) nodes.
pub const DEFAULT_IC_BUDGET: u64 = 20_000_000;

#[derive(Clone, Copy, Debug)]
pub struct IcConfig {
    pub n: usize,
    pub budget: u64,
}

/// Per round: `Pr(rec = r)` and `sum Pr * (x_r - x_j)`.
#[derive(Clone, Debug)]
struct Acc {
    k: usize,
    prob: Vec<Rat>,
    diff: Vec<Rat>,
}

impl Acc {
    fn new(n: usize, k: usize) -> Self {
        Self { k, prob: vec![Rat::zero(); n * k], diff: vec![Rat::zero(); n * k * k] }
    }

    fn add(&mut self, t: usize, r: usize, w: &Rat, x: &[u32]) {
        let k = self.k;
        self.prob[t * k + r] += w;
        for j in 0..k {
            if j != r {
                let d = int(i64::from(x[r]) - i64::from(x[j]));
                self.diff[(t * k + r) * k + j] += w * d;
            }
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        for (a, b) in self.prob.iter_mut().zip(other.prob) {
            *a += b;
        }
        for (a, b) in self.diff.iter_mut().zip(other.diff) {
            *a += b;
        }
        self
    }
}

/// Exact incentive-compatibility check for agents who know their arrival position.
///
/// For every round `l`, recommended arm `r` and alternative `j`, computes
/// `E(X_r - X_j | M(h) = a_r)` by summing over every joint reward realization, every chance
/// move of the mechanism and every branch of every recommended portfolio.
pub fn check_ic_exact(factory: &MechanismFactory<'_>, n: usize) -> Result<AuditReport> {
    check_ic_exact_with(factory, &IcConfig { n, budget: DEFAULT_IC_BUDGET })
}

pub fn check_ic_exact_with(factory: &MechanismFactory<'_>, cfg: &IcConfig) -> Result<AuditReport> {
    let inst = factory.instance();
    let k = inst.k();
    let n = cfg.n;

    let mut realizations: Vec<(Vec<u32>, Rat)> = vec![(Vec::new(), Rat::from_integer(1.into()))];
    for a in 0..k {
        let mut next = Vec::new();
        for (x, p) in &realizations {
            for (c, q) in inst.pmf(a).support() {
                let mut y = x.clone();
                y.push(c);
                next.push((y, p * q));
            }
        }
        realizations = next;
        if realizations.len() as u64 > cfg.budget {
            return Err(Error::Budget {
                what: "ic realizations",
                needed: realizations.len() as u128,
                cap: u128::from(cfg.budget),
            });
        }
    }

    let nodes = AtomicU64::new(0);
    let acc = realizations
        .par_iter()
        .map(|(x, p)| {
            let mut acc = Acc::new(n, k);
            walk(factory.build(n), x, p.clone(), &mut acc, &nodes, cfg.budget)?;
            Ok::<Acc, Error>(acc)
        })
        .try_reduce(|| Acc::new(n, k), |a, b| Ok(a.merge(b)))?;

    let mut report = AuditReport::new();
    for t in 0..n {
        for r in 0..k {
            let pr = &acc.prob[t * k + r];
            if pr.is_zero() {
                continue;
            }
            for j in (0..k).filter(|&j| j != r) {
                let margin = &acc.diff[(t * k + r) * k + j] / pr;
                report.record(t + 1, Constraint::Ic { r, j }, margin);
            }
        }
    }
    Ok(report)
}

fn walk(
    mut m: Mechanism<'_>,
    x: &[u32],
    w: Rat,
    acc: &mut Acc,
    nodes: &AtomicU64,
    budget: u64,
) -> Result<()> {
    let n = m.horizon();
    while m.round() < n {
        let t = m.round();
        if nodes.fetch_add(1, Ordering::Relaxed) >= budget {
            return Err(Error::Budget { what: "ic enumeration nodes", needed: u128::from(budget) + 1, cap: u128::from(budget) });
        }
        if let Some(a) = m.settled() {
            for s in t..n {
                acc.add(s, a, &w, x);
            }
            return Ok(());
        }
        if let Some(outcomes) = m.pending_chance() {
            let share = &w / int(outcomes as i64);
            for o in 0..outcomes {
                let mut branch = m.clone();
                branch.resolve_chance(o)?;
                walk(branch, x, share.clone(), acc, nodes, budget)?;
            }
            return Ok(());
        }
        let p = m.recommend()?;
        if let Some(a) = p.is_point() {
            acc.add(t, a, &w, x);
            m.observe(a, x[a])?;
            continue;
        }
        for (a, q) in p.entries() {
            let wa = &w * q;
            acc.add(t, *a, &wa, x);
            let mut branch = m.clone();
            branch.observe(*a, x[*a])?;
            walk(branch, x, wa, acc, nodes, budget)?;
        }
        return Ok(());
    }
    Ok(())
}
