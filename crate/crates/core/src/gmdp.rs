//! The exploration planning problem as a goal MDP over reduced states `(U, alpha, beta)`,
//! and the backward dynamic program that computes the optimal pair policy.
//!
//! A state only remembers the set of unobserved arms, the default arm's observed reward
//! `alpha` and the best reward observed so far `beta`. Non-terminal states always have
//! `alpha == beta`; a state with `alpha < beta` hands over to secondary exploration and is
//! valued at `E[max(beta, max_{i in U} X_i)]`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rational::{fmt_rat, int, unit_threshold, Rat};

/// Default cap on materialized canonical states.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GmdpState {
    /// Bit `i` set when arm `i` (canonical, zero-based) is unobserved.
    pub unobserved: u64,
    /// Observed default-arm reward; `None` only at the initial state.
    pub alpha: Option<u32>,
    /// Best observed reward; `None` only at the initial state.
    pub beta: Option<u32>,
}

impl GmdpState {
    pub fn initial(k: usize) -> Self {
        Self { unobserved: (1u64 << k) - 1, alpha: None, beta: None }
    }

    pub fn new(unobserved: u64, alpha: u32, beta: u32) -> Self {
        Self { unobserved, alpha: Some(alpha), beta: Some(beta) }
    }

    pub fn is_initial(&self) -> bool {
        self.alpha.is_none()
    }

    pub fn contains(&self, arm: usize) -> bool {
        self.unobserved >> arm & 1 == 1
    }

    pub fn unobserved_arms(&self) -> impl Iterator<Item = usize> {
        let u = self.unobserved;
        (0..64).filter(move |i| u >> i & 1 == 1)
    }

    pub fn len_unobserved(&self) -> u32 {
        self.unobserved.count_ones()
    }

    /// State after observing `reward` on `arm`.
    pub fn after(&self, arm: usize, reward: u32) -> Self {
        let unobserved = self.unobserved & !(1u64 << arm);
        match (self.alpha, self.beta) {
            (Some(a), Some(b)) => Self::new(unobserved, a, b.max(reward)),
            _ => Self::new(unobserved, reward, reward),
        }
    }

    /// `U` as a bit string over arms `1..=k`, e.g. `0111`.
    pub fn bits(&self, k: usize) -> String {
        (0..k).map(|i| if self.contains(i) { '1' } else { '0' }).collect()
    }
}

/// An exact distribution over arms, stored sparsely in ascending arm order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Portfolio {
    probs: Vec<(usize, Rat)>,
}

impl Portfolio {
    pub fn point(arm: usize) -> Self {
        Self { probs: vec![(arm, Rat::one())] }
    }

    /// Builds from `(arm, prob)` entries; zero entries are dropped, arms must be distinct
    /// and the probabilities must sum to one.
    pub fn new(entries: impl IntoIterator<Item = (usize, Rat)>) -> Result<Self> {
        let mut probs: Vec<(usize, Rat)> =
            entries.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        probs.sort_by_key(|(a, _)| *a);
        if probs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidState("duplicate arm in portfolio".into()));
        }
        if probs.iter().any(|(_, p)| p.is_negative()) {
            return Err(Error::InvalidState("negative portfolio probability".into()));
        }
        let total: Rat = probs.iter().map(|(_, p)| p).sum();
        if !total.is_one() {
            return Err(Error::InvalidState(format!(
                "portfolio sums to {}",
                fmt_rat(&total)
            )));
        }
        Ok(Self { probs })
    }

    pub fn entries(&self) -> &[(usize, Rat)] {
        &self.probs
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().map(|(a, _)| *a)
    }

    pub fn prob(&self, arm: usize) -> Rat {
        self.probs
            .iter()
            .find(|(a, _)| *a == arm)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rat::zero)
    }

    pub fn is_point(&self) -> Option<usize> {
        (self.probs.len() == 1).then(|| self.probs[0].0)
    }

    /// `sum_a p(a) * values[a]`.
    pub fn expectation(&self, values: impl Fn(usize) -> Rat) -> Rat {
        self.probs.iter().map(|(a, p)| p * values(*a)).sum()
    }

    /// Inverse-CDF draw over ascending arm index: the first arm whose cumulative
    /// probability exceeds `u / 2^64`.
    pub fn sample(&self, u: u64) -> usize {
        let u = u128::from(u);
        let mut acc = Rat::zero();
        for (a, p) in &self.probs {
            acc += p;
            if u < unit_threshold(&acc) {
                return *a;
            }
        }
        self.probs.last().expect("non-empty").0
    }
}

impl fmt::Display for Portfolio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.probs.iter().map(|(a, p)| format!("a{}:{}", a + 1, fmt_rat(p))).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

/// An ordered pair `(i, r)` naming the two-point portfolio `p_{ir}`; `i == r` is a point mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionPair {
    pub i: usize,
    pub r: usize,
}

impl fmt::Display for ActionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p_{{{},{}}}", self.i + 1, self.r + 1)
    }
}

/// `p_{ir}`: mixes arms `i` and `r` with weights inversely proportional to the distance of
/// their means from `alpha`. Both means equal to `alpha` collapses to a point mass on `i`.
pub fn pair_portfolio(i: usize, r: usize, alpha: u32, inst: &Instance) -> Portfolio {
    if i == r {
        return Portfolio::point(i);
    }
    let a = int(i64::from(alpha));
    let di = (inst.mu(i) - &a).abs();
    let dr = (inst.mu(r) - &a).abs();
    let total = &di + &dr;
    if total.is_zero() {
        return Portfolio::point(i);
    }
    Portfolio::new([(i, &dr / &total), (r, &di / &total)]).expect("weights sum to one")
}

fn mean_of(p: &Portfolio, inst: &Instance) -> Rat {
    p.expectation(|a| inst.mu(a).clone())
}

/// Pairs `(i, r)` over `U x U` whose portfolio keeps expected prior reward at least `alpha`,
/// in lexicographic order. The initial state only offers `p_{11}`; states with
/// `alpha < beta` offer nothing.
pub fn feasible_actions(state: &GmdpState, inst: &Instance) -> Vec<ActionPair> {
    let (alpha, beta) = match (state.alpha, state.beta) {
        (None, _) | (_, None) => return vec![ActionPair { i: 0, r: 0 }],
        (Some(a), Some(b)) => (a, b),
    };
    if alpha < beta {
        return Vec::new();
    }
    let a = int(i64::from(alpha));
    let arms: Vec<usize> = state.unobserved_arms().collect();
    let mut out = Vec::new();
    for &i in &arms {
        for &r in &arms {
            let p = pair_portfolio(i, r, alpha, inst);
            if mean_of(&p, inst) >= a {
                out.push(ActionPair { i, r });
            }
        }
    }
    out
}

pub fn is_terminal(state: &GmdpState, inst: &Instance) -> bool {
    match (state.alpha, state.beta) {
        (Some(a), Some(b)) if a < b => true,
        (Some(_), Some(_)) => feasible_actions(state, inst).is_empty(),
        _ => false,
    }
}

/// Successor distribution `P(s' | s, p) = p(a_i) Pr(X_i = c)`.
pub fn transitions(state: &GmdpState, portfolio: &Portfolio, inst: &Instance) -> Vec<(GmdpState, Rat)> {
    let mut out = Vec::new();
    for (arm, p) in portfolio.entries() {
        for (c, q) in inst.pmf(*arm).support() {
            out.push((state.after(*arm, c), p * q));
        }
    }
    out
}

/// Terminal value: `alpha` when nothing beat the default arm, otherwise
/// `E[max(beta, max_{i in U} X_i)]`.
pub fn terminal_reward(state: &GmdpState, inst: &Instance) -> Result<Rat> {
    if !is_terminal(state, inst) {
        return Err(Error::InvalidState("terminal_reward on a non-terminal state".into()));
    }
    let (alpha, beta) = (state.alpha.unwrap(), state.beta.unwrap());
    if alpha == beta {
        Ok(int(i64::from(alpha)))
    } else {
        Ok(inst.expected_max(state.unobserved, beta))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub pair: ActionPair,
    pub portfolio: Portfolio,
    pub value: Rat,
}

/// The optimal pair policy with its exact value table.
#[derive(Clone, Debug)]
pub struct Policy {
    k: usize,
    means: Vec<Rat>,
    decisions: HashMap<GmdpState, Decision>,
    terminals: HashMap<GmdpState, Rat>,
}

impl Policy {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn initial_value(&self) -> &Rat {
        &self.decisions[&GmdpState::initial(self.k)].value
    }

    pub fn decision(&self, s: &GmdpState) -> Option<&Decision> {
        self.decisions.get(s)
    }

    pub fn action(&self, s: &GmdpState) -> Option<ActionPair> {
        self.decisions.get(s).map(|d| d.pair)
    }

    pub fn terminal_value(&self, s: &GmdpState) -> Option<&Rat> {
        self.terminals.get(s)
    }

    /// Non-terminal states in the table, sorted.
    pub fn states(&self) -> Vec<GmdpState> {
        let mut v: Vec<_> = self.decisions.keys().copied().collect();
        v.sort();
        v
    }

    pub fn terminal_states(&self) -> Vec<GmdpState> {
        let mut v: Vec<_> = self.terminals.keys().copied().collect();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.decisions.len() + self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Whether this table was planned for an instance with these arm means.
    pub fn matches(&self, inst: &Instance) -> bool {
        self.k == inst.k() && self.means == inst.means()
    }
}

/// Exact `W(policy, state)`.
pub fn value(policy: &Policy, state: &GmdpState) -> Result<Rat> {
    if let Some(d) = policy.decisions.get(state) {
        return Ok(d.value.clone());
    }
    policy
        .terminals
        .get(state)
        .cloned()
        .ok_or_else(|| Error::InvalidState(format!("state {state:?} is not in the policy table")))
}

#[derive(Clone, Copy, Debug)]
pub struct PlanConfig {
    pub max_states: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { max_states: DEFAULT_STATE_CAP }
    }
}

pub fn plan(inst: &Instance) -> Result<Policy> {
    plan_with(inst, &PlanConfig::default())
}

/// Arms that appear with positive probability in some feasible pair portfolio.
fn explorable(state: &GmdpState, inst: &Instance) -> u64 {
    let mut mask = 0u64;
    for pair in feasible_actions(state, inst) {
        for a in pair_portfolio(pair.i, pair.r, state.alpha.unwrap_or(0), inst).support() {
            mask |= 1 << a;
        }
    }
    mask
}

/// Backward dynamic program over reachable states, grouped by `|U|` ascending.
pub fn plan_with(inst: &Instance, cfg: &PlanConfig) -> Result<Policy> {
    let k = inst.k();
    let s0 = GmdpState::initial(k);

    // forward pass: materialize every state reachable under some feasible action
    let mut open: HashSet<GmdpState> = HashSet::new();
    let mut terminals: HashSet<GmdpState> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut explore_mask: HashMap<GmdpState, u64> = HashMap::new();
    open.insert(s0);
    explore_mask.insert(s0, 1);
    queue.push_back(s0);
    while let Some(s) = queue.pop_front() {
        let mask = explore_mask[&s];
        for arm in (0..k).filter(|a| mask >> a & 1 == 1) {
            for (c, _) in inst.pmf(arm).support() {
                let t = s.after(arm, c);
                if open.contains(&t) || terminals.contains(&t) {
                    continue;
                }
                let m = if t.alpha < t.beta { 0 } else { explorable(&t, inst) };
                if m == 0 {
                    terminals.insert(t);
                } else {
                    open.insert(t);
                    explore_mask.insert(t, m);
                    queue.push_back(t);
                }
                let n = open.len() + terminals.len();
                if n > cfg.max_states {
                    return Err(Error::Budget {
                        what: "planner states",
                        needed: n as u128,
                        cap: cfg.max_states as u128,
                    });
                }
            }
        }
    }

    // terminal values; E[max] depends only on (U, beta)
    let mut exp_max: HashMap<(u64, u32), Rat> = HashMap::new();
    let mut term_values: HashMap<GmdpState, Rat> = HashMap::with_capacity(terminals.len());
    for t in &terminals {
        let (a, b) = (t.alpha.unwrap(), t.beta.unwrap());
        let v = if a == b {
            int(i64::from(a))
        } else {
            exp_max
                .entry((t.unobserved, b))
                .or_insert_with(|| inst.expected_max(t.unobserved, b))
                .clone()
        };
        term_values.insert(*t, v);
    }

    // backward pass by |U|; states within a level are independent
    let mut levels: Vec<Vec<GmdpState>> = vec![Vec::new(); k + 1];
    for s in &open {
        if !s.is_initial() {
            levels[s.len_unobserved() as usize].push(*s);
        }
    }
    let mut decisions: HashMap<GmdpState, Decision> = HashMap::with_capacity(open.len());
    for level in levels.iter_mut() {
        level.sort();
        let done: Vec<(GmdpState, Decision)> = level
            .par_iter()
            .map(|s| (*s, best_decision(s, inst, &decisions, &term_values)))
            .collect();
        decisions.extend(done);
    }
    let v0 = arm_backup(&s0, 0, inst, &decisions, &term_values);
    decisions.insert(
        s0,
        Decision { pair: ActionPair { i: 0, r: 0 }, portfolio: Portfolio::point(0), value: v0 },
    );

    Ok(Policy { k, means: inst.means().to_vec(), decisions, terminals: term_values })
}

/// `sum_c Pr(X_arm = c) W(s after (arm, c))`.
fn arm_backup(
    s: &GmdpState,
    arm: usize,
    inst: &Instance,
    decisions: &HashMap<GmdpState, Decision>,
    terms: &HashMap<GmdpState, Rat>,
) -> Rat {
    inst.pmf(arm)
        .support()
        .map(|(c, q)| {
            let t = s.after(arm, c);
            let w = decisions
                .get(&t)
                .map(|d| &d.value)
                .or_else(|| terms.get(&t))
                .expect("successor materialized in the forward pass");
            q * w
        })
        .sum()
}

fn best_decision(
    s: &GmdpState,
    inst: &Instance,
    decisions: &HashMap<GmdpState, Decision>,
    terms: &HashMap<GmdpState, Rat>,
) -> Decision {
    let alpha = s.alpha.expect("non-initial");
    let mut arm_values: HashMap<usize, Rat> = HashMap::new();
    let mut best: Option<Decision> = None;
    for pair in feasible_actions(s, inst) {
        let portfolio = pair_portfolio(pair.i, pair.r, alpha, inst);
        let mut v = Rat::zero();
        for (a, p) in portfolio.entries() {
            let va = arm_values
                .entry(*a)
                .or_insert_with(|| arm_backup(s, *a, inst, decisions, terms));
            v += p * &*va;
        }
        // pairs arrive in lexicographic order; keep the first maximizer
        if best.as_ref().is_none_or(|b| v > b.value) {
            best = Some(Decision { pair, portfolio, value: v });
        }
    }
    best.expect("open states have a feasible action")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Family, GenParams, RewardPmf, generate};
    use crate::rational::ratio;

    fn toy() -> Instance {
        Instance::from_pmfs(
            1,
            vec![
                RewardPmf::from_u64_weights(&[2, 3]).unwrap(),
                RewardPmf::from_u64_weights(&[1, 1]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn three_uniform() -> Instance {
        generate(Family::Uniform, &GenParams { k: 3, h: 30, eps: None }).unwrap()
    }

    fn four_uniform() -> Instance {
        generate(Family::Uniform, &GenParams { k: 4, h: 40, eps: None }).unwrap()
    }

    #[test]
    fn pair_portfolios() {
        let p = pair_portfolio(1, 2, 8, &three_uniform());
        assert_eq!(p.prob(1), ratio(3, 5));
        assert_eq!(p.prob(2), ratio(2, 5));
        assert_eq!(mean_of(&p, &three_uniform()), int(8));
        let q = pair_portfolio(2, 3, 6, &four_uniform());
        assert_eq!(q.prob(2), ratio(1, 5));
        assert_eq!(q.prob(3), ratio(4, 5));
        assert_eq!(pair_portfolio(1, 1, 3, &three_uniform()), Portfolio::point(1));
    }

    #[test]
    fn degenerate_pair_is_point_mass() {
        let inst = Instance::from_pmfs(
            2,
            vec![RewardPmf::point(2, 2), RewardPmf::point(2, 1), RewardPmf::uniform(2, 2)],
        )
        .unwrap();
        assert_eq!(pair_portfolio(1, 2, 1, &inst), Portfolio::point(1));
    }

    #[test]
    fn feasible_sets_on_three_uniform() {
        let inst = three_uniform();
        let s = |alpha| GmdpState::new(0b110, alpha, alpha);
        let pairs = |alpha| -> Vec<(usize, usize)> {
            feasible_actions(&s(alpha), &inst).iter().map(|p| (p.i + 1, p.r + 1)).collect()
        };
        assert_eq!(pairs(8), vec![(2, 2), (2, 3), (3, 2)]);
        assert!(pairs(12).is_empty());
        assert!(is_terminal(&s(12), &inst));
        assert_eq!(pairs(4), vec![(2, 2), (2, 3), (3, 2), (3, 3)]);
    }

    #[test]
    fn transition_masses() {
        let inst = three_uniform();
        let t = transitions(&GmdpState::initial(3), &Portfolio::point(0), &inst);
        assert_eq!(t.len(), 31);
        assert!(t.iter().all(|(s, p)| *p == ratio(1, 31) && s.alpha == s.beta));

        let inst = four_uniform();
        let s = GmdpState::new(0b1100, 6, 6);
        let t = transitions(&s, &pair_portfolio(2, 3, 6, &inst), &inst);
        let on3: Rat = t.iter().filter(|(x, _)| !x.contains(2)).map(|(_, p)| p).sum();
        let on4: Rat = t.iter().filter(|(x, _)| !x.contains(3)).map(|(_, p)| p).sum();
        assert_eq!(on3, ratio(1, 5));
        assert_eq!(on4, ratio(4, 5));

        let pts = Instance::from_pmfs(3, vec![RewardPmf::point(3, 2), RewardPmf::point(3, 1)])
            .unwrap();
        let t = transitions(&GmdpState::initial(2), &Portfolio::point(0), &pts);
        assert_eq!(t, vec![(GmdpState::new(0b10, 2, 2), int(1))]);
    }

    #[test]
    fn terminal_rewards() {
        let inst = four_uniform();
        let stuck = GmdpState::new(0, 6, 6);
        assert_eq!(terminal_reward(&stuck, &inst).unwrap(), int(6));
        let s = GmdpState::new(0b1000, 6, 7);
        assert_eq!(terminal_reward(&s, &inst).unwrap(), ratio(83, 11));
        assert_eq!(terminal_reward(&GmdpState::new(0, 3, 9), &inst).unwrap(), int(9));
        assert!(terminal_reward(&GmdpState::new(0b1110, 6, 6), &inst).is_err());
    }

    #[test]
    fn toy_plans() {
        let p = plan(&toy()).unwrap();
        assert_eq!(p.initial_value(), &ratio(4, 5));
        let inst = Instance::from_pmfs(
            2,
            vec![
                RewardPmf::uniform(2, 2),
                RewardPmf::from_u64_weights(&[3, 0, 2]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(plan(&inst).unwrap().initial_value(), &ratio(19, 15));
    }

    #[test]
    fn four_uniform_branch_actions() {
        let inst = four_uniform();
        let p = plan(&inst).unwrap();
        assert_eq!(p.action(&GmdpState::initial(4)), Some(ActionPair { i: 0, r: 0 }));
        let act = |u, a| p.action(&GmdpState::new(u, a, a)).map(|x| (x.i + 1, x.r + 1));
        assert_eq!(act(0b1110, 6), Some((2, 4)));
        assert_eq!(act(0b1100, 6), Some((3, 4)));
        assert_eq!(act(0b0100, 6), Some((3, 3)));
    }

    #[test]
    fn value_lookup() {
        let inst = toy();
        let p = plan(&inst).unwrap();
        assert_eq!(value(&p, &GmdpState::initial(2)).unwrap(), ratio(4, 5));
        // R_1 = 1 leaves nothing feasible
        assert_eq!(value(&p, &GmdpState::new(0b10, 1, 1)).unwrap(), int(1));
        assert!(value(&p, &GmdpState::new(0b10, 0, 1)).is_err());
    }

    #[test]
    fn state_cap() {
        let err = plan_with(&four_uniform(), &PlanConfig { max_states: 10 }).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn portfolio_sampling_and_validation() {
        let p = Portfolio::new([(3, ratio(1, 2)), (1, ratio(1, 2))]).unwrap();
        assert_eq!(p.entries()[0].0, 1);
        assert_eq!(p.sample(0), 1);
        assert_eq!(p.sample(1u64 << 63), 3);
        assert!(Portfolio::new([(0, ratio(1, 2))]).is_err());
        assert!(Portfolio::new([(0, ratio(1, 2)), (0, ratio(1, 2))]).is_err());
    }

    fn small_instance() -> impl proptest::strategy::Strategy<Value = Instance> {
        use proptest::prelude::*;
        (1u32..4, 2usize..4).prop_flat_map(|(h, k)| {
            prop::collection::vec(prop::collection::vec(0u64..5, h as usize + 1), k).prop_map(
                move |rows| {
                    let pmfs = rows
                        .into_iter()
                        .map(|mut w| {
                            if w.iter().all(|x| *x == 0) {
                                w[0] = 1;
                            }
                            RewardPmf::from_u64_weights(&w).unwrap()
                        })
                        .collect();
                    Instance::from_pmfs(h, pmfs).unwrap()
                },
            )
        })
    }

    proptest::proptest! {
        #[test]
        fn planned_actions_feasible_and_masses_sum_to_one(inst in small_instance()) {
            let p = plan(&inst).unwrap();
            for s in p.states() {
                let d = p.decision(&s).unwrap();
                let mass: Rat = transitions(&s, &d.portfolio, &inst).into_iter().map(|(_, q)| q).sum();
                proptest::prop_assert!(mass.is_one());
                if let Some(a) = s.alpha {
                    proptest::prop_assert!(mean_of(&d.portfolio, &inst) >= int(i64::from(a)));
                    proptest::prop_assert!(d.portfolio.support().all(|x| s.contains(x)));
                }
            }
            let v = p.initial_value();
            proptest::prop_assert!(v >= inst.mu(0));
            proptest::prop_assert!(*v <= inst.expected_max(inst.all_arms_mask(), 0));
            if inst.h() == 1 {
                proptest::prop_assert_eq!(v, &inst.expected_max(inst.all_arms_mask(), 0));
            }
        }
    }
}
