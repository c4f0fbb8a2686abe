//! Seeded Monte Carlo episodes.
//!
//! Every episode owns a ChaCha8 stream: the master seed picks the key and the episode index
//! picks the stream, so episodes can run on any thread in any order. Within an episode the
//! draws are consumed in a fixed order: one `u64` per arm for the realization (ascending arm
//! index), then per round one draw for a pending chance move and one `u64` for sampling a
//! non-degenerate portfolio. Aggregates are exact integer sums, so estimates do not depend on
//! the thread count.

use std::io::Write;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audit::{check_eair, check_epir, AuditReport, Constraint};
use crate::error::{Error, Result};
use crate::gmdp::{self, Portfolio};
use crate::instance::Instance;
use crate::mechanism::{History, MechanismFactory, MechanismKind, Phase};
use crate::rational::{to_f64, Rat};

/// Rewards realized once per episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub rewards: Vec<u32>,
}

pub fn sample_realization(inst: &Instance, rng: &mut impl RngCore) -> Realization {
    Realization { rewards: (0..inst.k()).map(|a| inst.pmf(a).sample(rng.next_u64())).collect() }
}

/// Stream for episode `index` under `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// How agents are matched to rounds. Only incentive semantics depend on it; welfare is an
/// average over rounds and is the same either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ArrivalScheme {
    #[default]
    KnownPosition,
    /// Agent order is a uniformly random permutation drawn from its own stream.
    UniformPermutation,
}

/// Agent served in each round.
pub fn agent_order(scheme: ArrivalScheme, seed: u64, index: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if scheme == ArrivalScheme::UniformPermutation {
        // stream ids with the top bit set never collide with episode streams
        let mut rng = episode_rng(seed, index | 1 << 63);
        order.shuffle(&mut rng);
    }
    order
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub portfolio: Portfolio,
    pub arm: usize,
    pub reward: u32,
    pub phase: Phase,
}

/// Rounds after the mechanism settled: `count` identical point-mass pulls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tail {
    pub arm: usize,
    pub reward: u32,
    pub phase: Phase,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub kind: MechanismKind,
    pub n: usize,
    pub realization: Realization,
    /// Rounds before the mechanism settled.
    pub rounds: Vec<RoundRecord>,
    pub tail: Option<Tail>,
    /// Agent served in each round under the arrival scheme.
    pub agents: Vec<usize>,
    pub n1: usize,
    pub n2: usize,
    pub total_reward: u64,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rounds.len() + self.tail.as_ref().map_or(0, |t| t.count)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Average reward per agent.
    pub fn welfare(&self) -> Rat {
        Rat::new(BigInt::from(self.total_reward), BigInt::from(self.n))
    }

    /// Every round, with the settled tail expanded.
    pub fn iter_rounds(&self) -> impl Iterator<Item = RoundRecord> + '_ {
        let tail = self.tail.iter().flat_map(|t| {
            std::iter::repeat_n(
                RoundRecord {
                    portfolio: Portfolio::point(t.arm),
                    arm: t.arm,
                    reward: t.reward,
                    phase: t.phase,
                },
                t.count,
            )
        });
        self.rounds.iter().cloned().chain(tail)
    }

    /// `round,agent,arm,reward,phase,portfolio` with one-based rounds and arms.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "round,agent,arm,reward,phase,portfolio")?;
        for (t, r) in self.iter_rounds().enumerate() {
            let p: Vec<String> = r
                .portfolio
                .entries()
                .iter()
                .map(|(a, q)| format!("a{}:{}", a + 1, crate::rational::fmt_rat(q)))
                .collect();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t + 1,
                self.agents[t] + 1,
                r.arm + 1,
                r.reward,
                r.phase,
                p.join(" ")
            )?;
        }
        Ok(())
    }
}

struct Summary {
    total: u64,
    n1: u64,
    n2: u64,
}

/// Plays one episode. `visit` sees every pre-settlement round with the history before it; the
/// settled tail is reported once as `(history, arm, count)`.
fn play(
    factory: &MechanismFactory<'_>,
    n: usize,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(&History, &Portfolio, usize, u32, Phase) -> Result<()>,
    mut visit_tail: impl FnMut(&History, usize, Phase, usize) -> Result<()>,
) -> Result<(Realization, Summary)> {
    let inst = factory.instance();
    let x = sample_realization(inst, rng);
    let mut m = factory.build(n);
    let mut s = Summary { total: 0, n1: 0, n2: 0 };
    while m.round() < n {
        if let Some(a) = m.settled() {
            let left = n - m.round();
            s.total += left as u64 * u64::from(x.rewards[a]);
            match m.phase() {
                Phase::Primary => s.n1 += left as u64,
                Phase::Secondary => s.n2 += left as u64,
                _ => {}
            }
            visit_tail(m.history(), a, m.phase(), left)?;
            break;
        }
        if let Some(outcomes) = m.pending_chance() {
            let o = rng.random_range(0..outcomes);
            m.resolve_chance(o)?;
        }
        let p = m.recommend()?;
        let arm = match p.is_point() {
            Some(a) => a,
            None => p.sample(rng.next_u64()),
        };
        let reward = x.rewards[arm];
        let phase = m.phase();
        match phase {
            Phase::Primary => s.n1 += 1,
            Phase::Secondary => s.n2 += 1,
            _ => {}
        }
        visit(m.history(), &p, arm, reward, phase)?;
        s.total += u64::from(reward);
        m.observe(arm, reward)?;
    }
    Ok((x, s))
}

/// One fully recorded episode (episode index 0 of `seed`).
pub fn run_episode(factory: &MechanismFactory<'_>, n: usize, seed: u64) -> Result<EpisodeTrace> {
    run_episode_with(factory, n, seed, 0, ArrivalScheme::KnownPosition)
}

pub fn run_episode_with(
    factory: &MechanismFactory<'_>,
    n: usize,
    seed: u64,
    index: u64,
    arrival: ArrivalScheme,
) -> Result<EpisodeTrace> {
    if n == 0 {
        return Err(Error::BadInput("horizon must be at least 1".into()));
    }
    let mut rng = episode_rng(seed, index);
    let mut rounds = Vec::new();
    let mut settled = None;
    let (realization, s) = play(
        factory,
        n,
        &mut rng,
        |_, p, arm, reward, phase| {
            rounds.push(RoundRecord { portfolio: p.clone(), arm, reward, phase });
            Ok(())
        },
        |_, arm, phase, count| {
            settled = Some((arm, phase, count));
            Ok(())
        },
    )?;
    let tail = settled.map(|(arm, phase, count)| Tail {
        arm,
        reward: realization.rewards[arm],
        phase,
        count,
    });
    Ok(EpisodeTrace {
        kind: factory.kind(),
        n,
        realization,
        rounds,
        tail,
        agents: agent_order(arrival, seed, index, n),
        n1: s.n1 as usize,
        n2: s.n2 as usize,
        total_reward: s.total,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WelfareEstimate {
    pub kind: MechanismKind,
    pub n: usize,
    pub runs: u64,
    pub seed: u64,
    /// Mean over episodes of the per-agent average reward.
    pub mean: f64,
    /// Standard error of `mean`; 0 when `runs == 1`.
    pub std_error: f64,
    pub mean_n1: f64,
    pub mean_n2: f64,
    /// Exact `sum of episode totals / (n * runs)`.
    pub exact_mean: Rat,
}

/// Monte Carlo estimate of the average welfare over `runs` independent episodes.
pub fn estimate_welfare(
    factory: &MechanismFactory<'_>,
    n: usize,
    runs: u64,
    seed: u64,
) -> Result<WelfareEstimate> {
    if runs == 0 || n == 0 {
        return Err(Error::BadInput("runs and horizon must be at least 1".into()));
    }
    let zero = || (0u128, 0u128, 0u128, 0u128);
    let (sum, sum_sq, n1, n2) = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(seed, i);
            let (_, s) = play(factory, n, &mut rng, |_, _, _, _, _| Ok(()), |_, _, _, _| Ok(()))?;
            let t = u128::from(s.total);
            Ok::<_, Error>((t, t * t, u128::from(s.n1), u128::from(s.n2)))
        })
        .try_reduce(zero, |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3)))?;

    let big = |v: u128| BigInt::from(v);
    let nr = big(n as u128) * big(u128::from(runs));
    let exact_mean = Rat::new(big(sum), nr);
    let std_error = if runs > 1 {
        // sample variance of per-episode averages T_i / n
        let r = big(u128::from(runs));
        let num = big(sum_sq) * &r - big(sum) * big(sum);
        let den = &r * &r * (&r - 1) * big(n as u128) * big(n as u128);
        let var = to_f64(&Rat::new(num, den));
        var.max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(WelfareEstimate {
        kind: factory.kind(),
        n,
        runs,
        seed,
        mean: to_f64(&exact_mean),
        std_error,
        mean_n1: n1 as f64 / runs as f64,
        mean_n2: n2 as f64 / runs as f64,
        exact_mean,
    })
}

/// Mean primary and secondary exploration lengths over FEE traces.
pub fn phase_stats(traces: &[EpisodeTrace]) -> Result<(f64, f64)> {
    if traces.is_empty() {
        return Err(Error::BadInput("no traces".into()));
    }
    if let Some(t) = traces.iter().find(|t| t.kind != MechanismKind::Fee) {
        return Err(Error::BadInput(format!("phase statistics need FEE traces, got {}", t.kind)));
    }
    let len = traces.len() as f64;
    let n1: usize = traces.iter().map(|t| t.n1).sum();
    let n2: usize = traces.iter().map(|t| t.n2).sum();
    Ok((n1 as f64 / len, n2 as f64 / len))
}

/// `n * (opt_eair - mean)`.
pub fn welfare_gap(inst: &Instance, est: &WelfareEstimate) -> Result<f64> {
    let w = gmdp::plan(inst)?.initial_value().clone();
    Ok(welfare_gap_against(&w, est))
}

pub fn welfare_gap_against(opt_eair: &Rat, est: &WelfareEstimate) -> f64 {
    let diff = opt_eair - &est.exact_mean;
    est.n as f64 * to_f64(&diff)
}

/// Runs `episodes` seeded episodes and checks the given individual-rationality constraints
/// on every recommendation.
pub fn audit_episodes(
    factory: &MechanismFactory<'_>,
    n: usize,
    episodes: u64,
    seed: u64,
    constraints: &[Constraint],
) -> Result<AuditReport> {
    let inst = factory.instance();
    let check = |report: &mut AuditReport, round: usize, h: &History, p: &Portfolio| {
        for c in constraints {
            let margin = match c {
                Constraint::Eair => check_eair(inst, h, p).1,
                Constraint::Epir => check_epir(inst, h, p).1,
                Constraint::Ic { .. } => continue,
            };
            report.record(round, *c, margin);
        }
    };
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(seed, i);
            let mut report = AuditReport::new();
            let mut round = 0usize;
            let mut tail: Option<(History, usize, usize)> = None;
            play(
                factory,
                n,
                &mut rng,
                |h, p, _, _, _| {
                    round += 1;
                    check(&mut report, round, h, p);
                    Ok(())
                },
                |h, a, _, count| {
                    tail = Some((h.clone(), a, count));
                    Ok(())
                },
            )?;
            if let Some((h, a, count)) = tail {
                let p = Portfolio::point(a);
                for t in round + 1..=round + count {
                    check(&mut report, t, &h, &p);
                }
            }
            Ok::<_, Error>(report)
        })
        .try_reduce(AuditReport::new, |mut a, b| {
            a.merge(b);
            Ok(a)
        })
}
