//! Brute-force optimum over exploration policies, written independently of the planner:
//! it walks full observation histories, enumerates joint reward grids for terminal values
//! and builds portfolios from scratch.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rational::{int, ratio, Rat};

pub const DEFAULT_ORACLE_BUDGET: u64 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    /// Every assignment of a feasible two-point pair portfolio to every reachable reduced
    /// state, each evaluated over full histories.
    SimplePolicies,
    /// Every feasible portfolio on the `1/steps` simplex grid over the unobserved arms, chosen
    /// separately at every history.
    Grid { steps: u32 },
}

/// Feasible portfolios per reduced state key.
type StateActions = BTreeMap<(u64, u32, u32), Vec<Vec<(usize, Rat)>>>;

/// Observed rewards per arm (`None` = unobserved).
type Hist = Vec<Option<u32>>;

fn key(h: &Hist) -> (u64, u32, u32) {
    let mut mask = 0u64;
    let mut beta = 0;
    for (a, r) in h.iter().enumerate() {
        match r {
            None => mask |= 1 << a,
            Some(c) => beta = beta.max(*c),
        }
    }
    (mask, h[0].expect("default observed"), beta)
}

/// `E[max(beta, max over unobserved X)]` by walking the joint outcome grid.
fn grid_max(inst: &Instance, h: &Hist, beta: u32) -> Rat {
    fn go(inst: &Instance, arms: &[usize], best: u32) -> Rat {
        match arms.split_first() {
            None => int(i64::from(best)),
            Some((&a, rest)) => inst
                .pmf(a)
                .support()
                .map(|(c, q)| q * go(inst, rest, best.max(c)))
                .sum(),
        }
    }
    let arms: Vec<usize> = (0..h.len()).filter(|&a| h[a].is_none()).collect();
    go(inst, &arms, beta)
}

fn pair(inst: &Instance, alpha: &Rat, i: usize, r: usize) -> Vec<(usize, Rat)> {
    if i == r {
        return vec![(i, int(1))];
    }
    let di = (inst.mu(i) - alpha).abs();
    let dr = (inst.mu(r) - alpha).abs();
    if (&di + &dr).is_zero() {
        return vec![(i, int(1))];
    }
    let s = &di + &dr;
    vec![(i, &dr / &s), (r, &di / &s)]
}

fn feasible(inst: &Instance, alpha: &Rat, p: &[(usize, Rat)]) -> bool {
    p.iter().map(|(a, q)| q * inst.mu(*a)).sum::<Rat>() >= *alpha
}

fn unobserved(h: &Hist) -> Vec<usize> {
    (1..h.len()).filter(|&a| h[a].is_none()).collect()
}

fn simple_actions(inst: &Instance, h: &Hist) -> Vec<Vec<(usize, Rat)>> {
    let alpha = int(i64::from(h[0].unwrap()));
    let u = unobserved(h);
    let mut out = Vec::new();
    for &i in &u {
        for &r in &u {
            let p = pair(inst, &alpha, i, r);
            if feasible(inst, &alpha, &p) {
                out.push(p);
            }
        }
    }
    out
}

fn grid_actions(inst: &Instance, h: &Hist, steps: u32) -> Vec<Vec<(usize, Rat)>> {
    fn compositions(parts: usize, total: u32) -> Vec<Vec<u32>> {
        if parts == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(parts - 1, total - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    let alpha = int(i64::from(h[0].unwrap()));
    let u = unobserved(h);
    if u.is_empty() {
        return Vec::new();
    }
    compositions(u.len(), steps)
        .into_iter()
        .map(|w| {
            u.iter()
                .zip(w)
                .filter(|(_, w)| *w > 0)
                .map(|(&a, w)| (a, ratio(i64::from(w), i64::from(steps))))
                .collect::<Vec<_>>()
        })
        .filter(|p| feasible(inst, &alpha, p))
        .collect()
}

/// Best value over exploration policies; the planner must match it in simple mode and
/// dominate it in grid mode.
pub fn brute_force_opt_eair(inst: &Instance, mode: OracleMode) -> Result<Rat> {
    brute_force_opt_eair_with(inst, mode, DEFAULT_ORACLE_BUDGET)
}

pub fn brute_force_opt_eair_with(inst: &Instance, mode: OracleMode, budget: u64) -> Result<Rat> {
    if inst.k() > 3 || inst.h() > 3 {
        return Err(Error::BadInput("the oracle is limited to K <= 3 and H <= 3".into()));
    }
    let root: Hist = vec![None; inst.k()];
    match mode {
        OracleMode::SimplePolicies => {
            // reduced states reachable under some feasible pair, with their options
            let mut states: StateActions = BTreeMap::new();
            fn collect(
                inst: &Instance,
                h: &Hist,
                states: &mut StateActions,
            ) {
                let (_, a, b) = key(h);
                if a < b || states.contains_key(&key(h)) {
                    return;
                }
                let acts = simple_actions(inst, h);
                if acts.is_empty() {
                    return;
                }
                let arms: Vec<usize> = {
                    let mut v: Vec<usize> = acts.iter().flatten().map(|(x, _)| *x).collect();
                    v.sort();
                    v.dedup();
                    v
                };
                states.insert(key(h), acts);
                for arm in arms {
                    for (c, _) in inst.pmf(arm).support() {
                        let mut g = h.clone();
                        g[arm] = Some(c);
                        collect(inst, &g, states);
                    }
                }
            }
            for (c, _) in inst.pmf(0).support() {
                let mut g = root.clone();
                g[0] = Some(c);
                collect(inst, &g, &mut states);
            }
            let keys: Vec<_> = states.keys().copied().collect();
            let radices: Vec<u64> = states.values().map(|v| v.len() as u64).collect();
            let total = radices.iter().try_fold(1u64, |acc, r| acc.checked_mul(*r)).unwrap_or(u64::MAX);
            if total > budget {
                return Err(Error::Budget {
                    what: "oracle policy assignments",
                    needed: u128::from(total),
                    cap: u128::from(budget),
                });
            }
            let best = (0..total)
                .into_par_iter()
                .map(|idx| {
                    let mut rest = idx;
                    let choice: BTreeMap<(u64, u32, u32), usize> = keys
                        .iter()
                        .zip(&radices)
                        .map(|(k, r)| {
                            let c = (rest % r) as usize;
                            rest /= r;
                            (*k, c)
                        })
                        .collect();
                    fn eval(
                        inst: &Instance,
                        h: &Hist,
                        states: &StateActions,
                        choice: &BTreeMap<(u64, u32, u32), usize>,
                    ) -> Rat {
                        let k = key(h);
                        if k.1 < k.2 {
                            return grid_max(inst, h, k.2);
                        }
                        let Some(acts) = states.get(&k) else {
                            return int(i64::from(k.1));
                        };
                        let p = &acts[choice[&k]];
                        let mut v = Rat::zero();
                        for (arm, w) in p {
                            for (c, q) in inst.pmf(*arm).support() {
                                let mut g = h.clone();
                                g[*arm] = Some(c);
                                v += w * q * eval(inst, &g, states, choice);
                            }
                        }
                        v
                    }
                    inst.pmf(0)
                        .support()
                        .map(|(c, q)| {
                            let mut g = root.clone();
                            g[0] = Some(c);
                            q * eval(inst, &g, &states, &choice)
                        })
                        .sum::<Rat>()
                })
                .max()
                .expect("at least one assignment");
            Ok(best)
        }
        OracleMode::Grid { steps } => {
            if steps == 0 {
                return Err(Error::BadInput("grid needs a positive step count".into()));
            }
            let mut nodes = 0u64;
            fn best(inst: &Instance, h: &Hist, steps: u32, nodes: &mut u64, budget: u64) -> Result<Rat> {
                *nodes += 1;
                if *nodes > budget {
                    return Err(Error::Budget {
                        what: "oracle grid nodes",
                        needed: u128::from(*nodes),
                        cap: u128::from(budget),
                    });
                }
                let (_, a, b) = key(h);
                if a < b {
                    return Ok(grid_max(inst, h, b));
                }
                let acts = grid_actions(inst, h, steps);
                if acts.is_empty() {
                    return Ok(int(i64::from(a)));
                }
                // the value of a portfolio is linear in it, so evaluate each arm once
                let mut arm_value: BTreeMap<usize, Rat> = BTreeMap::new();
                for &arm in &unobserved(h) {
                    let mut v = Rat::zero();
                    for (c, q) in inst.pmf(arm).support() {
                        let mut g = h.clone();
                        g[arm] = Some(c);
                        v += q * best(inst, &g, steps, nodes, budget)?;
                    }
                    arm_value.insert(arm, v);
                }
                Ok(acts
                    .iter()
                    .map(|p| p.iter().map(|(arm, w)| w * &arm_value[arm]).sum::<Rat>())
                    .max()
                    .expect("non-empty"))
            }
            let mut v = Rat::zero();
            for (c, q) in inst.pmf(0).support() {
                let mut g = root.clone();
                g[0] = Some(c);
                v += q * best(inst, &g, steps, &mut nodes, budget)?;
            }
            Ok(v)
        }
    }
}
