//! Exact constraint checks, welfare benchmarks and brute-force oracles.

mod ic;
mod oracle;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::gmdp::{self, Policy, Portfolio};
use crate::instance::{superiority_gap, Instance};
use crate::mechanism::History;
use crate::rational::{int, to_f64, Rat};

pub use ic::{check_ic_exact, check_ic_exact_with, IcConfig, DEFAULT_IC_BUDGET};
pub use oracle::{brute_force_opt_eair, brute_force_opt_eair_with, OracleMode, DEFAULT_ORACLE_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Eair,
    Epir,
    /// Following a recommended `r` beats switching to `j`.
    Ic { r: usize, j: usize },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Eair => f.write_str("eair"),
            Constraint::Epir => f.write_str("epir"),
            Constraint::Ic { r, j } => write!(f, "ic_a{}_vs_a{}", r + 1, j + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    /// One-based round.
    pub round: usize,
    pub constraint: Constraint,
    pub margin: Rat,
    pub pass: bool,
}

/// Worst margin per (round, constraint) over everything recorded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    worst: BTreeMap<(usize, Constraint), Rat>,
    evaluated: u64,
    violations: u64,
}

impl AuditReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, round: usize, constraint: Constraint, margin: Rat) {
        self.evaluated += 1;
        if margin < Rat::zero() {
            self.violations += 1;
        }
        match self.worst.get_mut(&(round, constraint)) {
            Some(m) if *m <= margin => {}
            Some(m) => *m = margin,
            None => {
                self.worst.insert((round, constraint), margin);
            }
        }
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.evaluated += other.evaluated;
        self.violations += other.violations;
        for (key, m) in other.worst {
            match self.worst.get_mut(&key) {
                Some(w) if *w <= m => {}
                Some(w) => *w = m,
                None => {
                    self.worst.insert(key, m);
                }
            }
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        self.worst
            .iter()
            .map(|(&(round, constraint), m)| Check {
                round,
                constraint,
                margin: m.clone(),
                pass: *m >= Rat::zero(),
            })
            .collect()
    }

    pub fn worst_margin(&self) -> Option<&Rat> {
        self.worst.values().min()
    }

    /// Number of individual constraint evaluations recorded.
    pub fn evaluated(&self) -> u64 {
        self.evaluated
    }

    pub fn violations(&self) -> u64 {
        self.violations
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// `round,constraint,margin_num,margin_den,pass`, one row per (round, constraint).
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "round,constraint,margin_num,margin_den,pass")?;
        for c in self.checks() {
            writeln!(
                out,
                "{},{},{},{},{}",
                c.round,
                c.constraint,
                c.margin.numer(),
                c.margin.denom(),
                c.pass
            )?;
        }
        Ok(())
    }
}

/// `E(X_arm | h)`.
pub fn posterior_mean(inst: &Instance, h: &History, arm: usize) -> Rat {
    h.posterior_mean(inst, arm)
}

/// Ex-ante individual rationality: `sum_r p(r) E(X_r | h) - E(X_1 | h) >= 0`.
pub fn check_eair(inst: &Instance, h: &History, p: &Portfolio) -> (bool, Rat) {
    let margin = p.expectation(|a| h.posterior_mean(inst, a)) - h.posterior_mean(inst, 0);
    (margin >= Rat::zero(), margin)
}

/// Ex-post individual rationality: every supported arm is individually at least as good as
/// the default arm; the margin is the worst one.
pub fn check_epir(inst: &Instance, h: &History, p: &Portfolio) -> (bool, Rat) {
    let base = h.posterior_mean(inst, 0);
    let margin = p
        .support()
        .map(|a| h.posterior_mean(inst, a) - &base)
        .min()
        .expect("portfolios are non-empty");
    (margin >= Rat::zero(), margin)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WelfareBenchmarks {
    /// `E[max_i X_i]`.
    pub opt: Rat,
    /// Best asymptotic welfare of an ex-ante individually rational mechanism.
    pub opt_eair: Rat,
    /// Best asymptotic welfare of an ex-post individually rational mechanism.
    pub opt_epir: Rat,
    /// Asymptotic welfare of Greedy.
    pub opt_del: Rat,
}

impl WelfareBenchmarks {
    /// `opt >= opt_eair >= opt_epir >= opt_del >= mu_1`.
    pub fn chain_holds(&self, inst: &Instance) -> bool {
        self.opt >= self.opt_eair
            && self.opt_eair >= self.opt_epir
            && self.opt_epir >= self.opt_del
            && self.opt_del >= *inst.mu(0)
    }
}

pub fn welfare_benchmarks(inst: &Instance) -> Result<WelfareBenchmarks> {
    let policy = gmdp::plan(inst)?;
    Ok(welfare_benchmarks_with(inst, &policy))
}

/// Same as [`welfare_benchmarks`] with an already planned policy.
pub fn welfare_benchmarks_with(inst: &Instance, policy: &Policy) -> WelfareBenchmarks {
    WelfareBenchmarks {
        opt: inst.expected_max(inst.all_arms_mask(), 0),
        opt_eair: policy.initial_value().clone(),
        opt_epir: opt_epir(inst),
        opt_del: opt_del(inst),
    }
}

fn opt_epir(inst: &Instance) -> Rat {
    inst.pmf(0)
        .support()
        .map(|(c, q)| {
            let r1 = int(i64::from(c));
            let mask = (1..inst.k())
                .filter(|&a| *inst.mu(a) >= r1)
                .fold(0u64, |m, a| m | 1 << a);
            q * inst.expected_max(mask, c)
        })
        .sum()
}

/// Greedy explores the posterior argmax until that arm is already revealed, so its
/// asymptotic value is the expected best reward once the cascade stops.
fn opt_del(inst: &Instance) -> Rat {
    fn go(
        inst: &Instance,
        revealed: u64,
        best: u32,
        best_arm: usize,
        memo: &mut HashMap<(u64, u32, usize), Rat>,
    ) -> Rat {
        if let Some(v) = memo.get(&(revealed, best, best_arm)) {
            return v.clone();
        }
        // lowest-index argmax over posterior means
        let mut pick = best_arm;
        let mut pick_v = int(i64::from(best));
        for a in 0..inst.k() {
            if revealed >> a & 1 == 1 {
                continue;
            }
            let mu = inst.mu(a);
            if *mu > pick_v || (*mu == pick_v && a < pick) {
                pick = a;
                pick_v = mu.clone();
            }
        }
        let v = if revealed >> pick & 1 == 1 {
            int(i64::from(best))
        } else {
            inst.pmf(pick)
                .support()
                .map(|(c, q)| {
                    let (b, ba) = if c > best || (c == best && pick < best_arm) {
                        (c, pick)
                    } else {
                        (best, best_arm)
                    };
                    q * go(inst, revealed | 1 << pick, b, ba, memo)
                })
                .sum()
        };
        memo.insert((revealed, best, best_arm), v.clone());
        v
    }
    let mut memo = HashMap::new();
    inst.pmf(0)
        .support()
        .map(|(c, q)| q * go(inst, 1, c, 0, &mut memo))
        .sum()
}

/// Smallest `n` with `n >= (24 H^2 / delta) * max{K, H ln(4H / delta)}`, beyond which FEE is
/// incentive compatible under uniformly random arrival. The logarithm is bounded from above,
/// so the result never undershoots the exact threshold.
pub fn ic_threshold_uniform(inst: &Instance) -> Result<u64> {
    let delta = superiority_gap(inst);
    if delta.is_zero() {
        return Err(Error::Assumption(
            "some arm is never strictly best, so the uniform-arrival threshold is undefined".into(),
        ));
    }
    let h = int(i64::from(inst.h()));
    let scale = Rat::from_integer(24.into()) * &h * &h / &delta;
    let k_term = &scale * int(inst.k() as i64);
    let x = Rat::from_integer(4.into()) * &h / &delta;
    let ln_up = ln_upper(&x);
    let ln_term = &scale * &h * ln_up;
    let bound = if k_term > ln_term { k_term } else { ln_term };
    crate::rational::ceil_to_u64(&bound)
        .ok_or_else(|| Error::BadInput("threshold does not fit in 64 bits".into()))
}

/// Upper bound on `ln(x)` for `x >= 1` as an exact rational.
fn ln_upper(x: &Rat) -> Rat {
    // nudge the float input up, then pad the result by a few ulps for libm error
    let xf = to_f64(x).next_up();
    let mut l = xf.ln();
    for _ in 0..4 {
        l = l.next_up();
    }
    Rat::from_float(l).unwrap_or_else(Rat::one)
}
