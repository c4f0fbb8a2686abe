//! Problem instances: arms with exact reward distributions on `{0, ..., H}`.
//!
//! Arms are kept in canonical order (non-increasing prior mean, stable on ties), so
//! index 0 is always the default arm. Everything here is exact; see [`crate::rational`].

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{fmt_rat, floor_to_i64, int, unit_threshold, Rat};

/// Probability mass function of one arm's reward, supported on `{0, ..., H}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardPmf {
    weights: Vec<BigUint>,
    probs: Vec<Rat>,
    cdf: Vec<Rat>,
    mean: Rat,
    /// `ceil(cdf[c] * 2^64)`, used for exact inverse-CDF sampling.
    thresholds: Vec<u128>,
}

impl RewardPmf {
    /// Builds a pmf from integer weights indexed by reward value; `weights.len() == H + 1`.
    pub fn from_weights(weights: Vec<BigUint>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadInput("empty weight vector".into()));
        }
        let total: BigUint = weights.iter().sum();
        if total.is_zero() {
            return Err(Error::BadInput("weights sum to zero".into()));
        }
        let total = Rat::from_integer(total.into());
        let probs: Vec<Rat> = weights
            .iter()
            .map(|w| Rat::from_integer(w.clone().into()) / &total)
            .collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = Rat::zero();
        for p in &probs {
            acc += p;
            cdf.push(acc.clone());
        }
        let mean = probs
            .iter()
            .enumerate()
            .fold(Rat::zero(), |m, (c, p)| m + p * int(c as i64));
        let thresholds = cdf.iter().map(unit_threshold).collect();
        Ok(Self { weights, probs, cdf, mean, thresholds })
    }

    pub fn from_u64_weights(weights: &[u64]) -> Result<Self> {
        Self::from_weights(weights.iter().map(|&w| BigUint::from(w)).collect())
    }

    /// Builds a pmf from exact probabilities that must sum to one.
    pub fn from_probs(probs: &[Rat]) -> Result<Self> {
        if probs.iter().any(|p| p < &Rat::zero()) {
            return Err(Error::BadInput("negative probability".into()));
        }
        let sum: Rat = probs.iter().sum();
        if !sum.is_one() {
            return Err(Error::BadInput(format!("probabilities sum to {}", fmt_rat(&sum))));
        }
        let lcm = probs
            .iter()
            .fold(BigUint::one(), |l, p| num_integer::lcm(l, p.denom().magnitude().clone()));
        let lcm = Rat::from_integer(lcm.into());
        let weights = probs
            .iter()
            .map(|p| (p * &lcm).to_integer().to_biguint().expect("non-negative"))
            .collect();
        Self::from_weights(weights)
    }

    /// Uniform on `{0, ..., upto}` within a support of size `h + 1`.
    pub fn uniform(h: u32, upto: u32) -> Self {
        let w = (0..=h).map(|c| if c <= upto { 1 } else { 0 }).collect::<Vec<u64>>();
        Self::from_u64_weights(&w).expect("upto <= h")
    }

    pub fn point(h: u32, at: u32) -> Self {
        let w = (0..=h).map(|c| u64::from(c == at)).collect::<Vec<u64>>();
        Self::from_u64_weights(&w).expect("at <= h")
    }

    pub fn h(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    pub fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    pub fn probs(&self) -> &[Rat] {
        &self.probs
    }

    pub fn prob(&self, c: u32) -> &Rat {
        &self.probs[c as usize]
    }

    pub fn mean(&self) -> &Rat {
        &self.mean
    }

    /// Reward values with positive probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = (u32, &Rat)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(c, p)| (c as u32, p))
    }

    pub fn min_support(&self) -> u32 {
        self.support().next().map(|(c, _)| c).expect("non-empty support")
    }

    pub fn max_support(&self) -> u32 {
        self.support().last().map(|(c, _)| c).expect("non-empty support")
    }

    /// `Pr(X <= c)` for `0 <= c <= H`.
    pub fn cdf(&self, c: i64) -> Result<&Rat> {
        if c < 0 || c > i64::from(self.h()) {
            return Err(Error::BadInput(format!("cdf argument {c} outside [0, {}]", self.h())));
        }
        Ok(&self.cdf[c as usize])
    }

    /// `Pr(X <= c)` clamped: zero below the support range, one above it.
    pub fn cdf_clamped(&self, c: i64) -> Rat {
        if c < 0 {
            Rat::zero()
        } else if c >= i64::from(self.h()) {
            Rat::one()
        } else {
            self.cdf[c as usize].clone()
        }
    }

    /// `Pr(X <= t)` for a rational threshold.
    pub fn at_most(&self, t: &Rat) -> Rat {
        match floor_to_i64(t) {
            Some(c) => self.cdf_clamped(c),
            None if t < &Rat::zero() => Rat::zero(),
            None => Rat::one(),
        }
    }

    /// `Pr(X < t)` for a rational threshold.
    pub fn below(&self, t: &Rat) -> Rat {
        let c = t.ceil().to_integer().to_i64();
        match c {
            Some(c) => self.cdf_clamped(c - 1),
            None if t < &Rat::zero() => Rat::zero(),
            None => Rat::one(),
        }
    }

    /// Inverse-CDF draw from a uniform 64-bit word: the least `c` with `u < cdf(c) * 2^64`.
    pub fn sample(&self, u: u64) -> u32 {
        let u = u128::from(u);
        self.thresholds
            .iter()
            .position(|&t| u < t)
            .expect("last threshold is 2^64") as u32
    }
}

/// Exact mean `sum c * p(c)`.
pub fn mean(pmf: &RewardPmf) -> Rat {
    pmf.mean().clone()
}

/// Exact `Pr(X <= c)`; errors when `c` is outside `[0, H]`.
pub fn cdf(pmf: &RewardPmf, c: i64) -> Result<Rat> {
    pmf.cdf(c).cloned()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub name: String,
    pub pmf: RewardPmf,
}

/// A bandit instance in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    h: u32,
    arms: Vec<Arm>,
    means: Vec<Rat>,
    /// `input_index[canonical] = position in the user-supplied list`.
    input_index: Vec<usize>,
}

impl Instance {
    /// Sorts arms by non-increasing mean (stable) and records the permutation.
    pub fn new(h: u32, arms: Vec<Arm>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::BadInput(format!("need at least 2 arms, got {}", arms.len())));
        }
        if arms.len() > 63 {
            return Err(Error::BadInput("at most 63 arms are supported".into()));
        }
        if h == 0 {
            return Err(Error::BadInput("H must be at least 1".into()));
        }
        for a in &arms {
            if a.pmf.h() != h {
                return Err(Error::BadInput(format!(
                    "arm {:?} has {} weights, expected H + 1 = {}",
                    a.name,
                    a.pmf.h() + 1,
                    h + 1
                )));
            }
        }
        let mut order: Vec<usize> = (0..arms.len()).collect();
        order.sort_by(|&x, &y| arms[y].pmf.mean().cmp(arms[x].pmf.mean()));
        let mut slots: Vec<Option<Arm>> = arms.into_iter().map(Some).collect();
        let arms: Vec<Arm> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
        let means = arms.iter().map(|a| a.pmf.mean().clone()).collect();
        Ok(Self { h, arms, means, input_index: order })
    }

    pub fn from_pmfs(h: u32, pmfs: Vec<RewardPmf>) -> Result<Self> {
        let arms = pmfs
            .into_iter()
            .enumerate()
            .map(|(i, pmf)| Arm { name: format!("a{}", i + 1), pmf })
            .collect();
        Self::new(h, arms)
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn pmf(&self, arm: usize) -> &RewardPmf {
        &self.arms[arm].pmf
    }

    pub fn means(&self) -> &[Rat] {
        &self.means
    }

    pub fn mu(&self, arm: usize) -> &Rat {
        &self.means[arm]
    }

    pub fn input_index(&self) -> &[usize] {
        &self.input_index
    }

    /// `E[max_i X_i]` over the arms in `mask` (bit `i` = arm `i`), floored at `floor`.
    pub fn expected_max(&self, mask: u64, floor: u32) -> Rat {
        let mut total = Rat::zero();
        let mut prev = Rat::zero();
        for c in floor..=self.h {
            let g = (0..self.k())
                .filter(|i| mask >> i & 1 == 1)
                .fold(Rat::one(), |g, i| g * self.pmf(i).cdf_clamped(i64::from(c)));
            if c == floor {
                total += &g * int(i64::from(c));
            } else {
                total += (&g - &prev) * int(i64::from(c));
            }
            prev = g;
        }
        total
    }

    pub fn all_arms_mask(&self) -> u64 {
        (1u64 << self.k()) - 1
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc {
            version: 1,
            h: self.h,
            arms: self
                .arms
                .iter()
                .map(|a| ArmDoc {
                    name: a.name.clone(),
                    weights: a.pmf.weights().iter().map(Weight::from_big).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

/// Parses the JSON instance document into a canonically ordered [`Instance`].
pub fn parse_instance(document: &str) -> Result<Instance> {
    Instance::parse_json(document)
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    version: u32,
    #[serde(rename = "H")]
    h: u32,
    arms: Vec<ArmDoc>,
}

#[derive(Serialize, Deserialize)]
struct ArmDoc {
    name: String,
    weights: Vec<Weight>,
}

/// Weights are JSON integers; values beyond `u64` may be written as decimal strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Weight {
    Int(serde_json::Number),
    Big(String),
}

impl Weight {
    fn from_big(w: &BigUint) -> Self {
        match w.to_u64() {
            Some(v) => Weight::Int(v.into()),
            None => Weight::Big(w.to_string()),
        }
    }

    fn to_big(&self) -> Result<BigUint> {
        match self {
            Weight::Int(n) => match n.as_u64() {
                Some(v) => Ok(BigUint::from(v)),
                None if n.as_i64().is_some() => {
                    Err(Error::BadInput(format!("negative weight {n}")))
                }
                None if n.is_f64() && n.as_f64().is_some_and(|f| f.fract() == 0.0 && f > 0.0) => {
                    Err(Error::BadInput(format!("weight overflow: {n} does not fit in u64; write it as a string")))
                }
                None => Err(Error::BadInput(format!("weight {n} is not a non-negative integer"))),
            },
            Weight::Big(s) => s
                .parse::<BigUint>()
                .map_err(|_| Error::BadInput(format!("weight {s:?} is not a non-negative integer"))),
        }
    }
}

impl InstanceDoc {
    fn into_instance(self) -> Result<Instance> {
        if self.version != 1 {
            return Err(Error::BadInput(format!("unsupported version {}", self.version)));
        }
        let mut arms = Vec::with_capacity(self.arms.len());
        for a in self.arms {
            if a.weights.len() != self.h as usize + 1 {
                return Err(Error::BadInput(format!(
                    "arm {:?}: weights length {} != H + 1 = {}",
                    a.name,
                    a.weights.len(),
                    self.h + 1
                )));
            }
            let w = a.weights.iter().map(Weight::to_big).collect::<Result<Vec<_>>>()?;
            let pmf = RewardPmf::from_weights(w)
                .map_err(|e| Error::BadInput(format!("arm {:?}: {e}", a.name)))?;
            arms.push(Arm { name: a.name, pmf });
        }
        Instance::new(self.h, arms)
    }
}

/// Outcome of checking the incentive-compatibility assumption.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssumptionReport {
    pub ic_assumption_holds: bool,
    /// `(i, j)` with `i < j` (canonical, zero-based) and `Pr(X_i < mu_j) = 0`.
    pub violating_pairs: Vec<(usize, usize)>,
    pub strict_mean_gap_holds: bool,
}

/// Checks `Pr(X_i < mu_j) > 0` for every `i < j`, and `mu_1 > mu_2`.
pub fn validate(inst: &Instance) -> AssumptionReport {
    let mut violating_pairs = Vec::new();
    for i in 0..inst.k() {
        for j in i + 1..inst.k() {
            if inst.pmf(i).below(inst.mu(j)).is_zero() {
                violating_pairs.push((i, j));
            }
        }
    }
    AssumptionReport {
        ic_assumption_holds: violating_pairs.is_empty(),
        violating_pairs,
        strict_mean_gap_holds: inst.mu(0) > inst.mu(1),
    }
}

/// Margin constants driving the phase length of the incentive-compatible mechanisms.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginPair {
    pub xi: Rat,
    pub gamma: Rat,
    pub phase_length: u64,
}

impl MarginPair {
    /// `ceil(H / (xi * gamma)) + 1`.
    pub fn phase_length_for(h: u32, xi: &Rat, gamma: &Rat) -> u64 {
        let q = int(i64::from(h)) / (xi * gamma);
        q.ceil().to_integer().to_u64().expect("phase length fits in u64") + 1
    }
}

/// `min_i Pr(for all i' != i: X_i' <= mu_i - xi)`.
pub fn margin_gamma(inst: &Instance, xi: &Rat) -> Rat {
    (0..inst.k())
        .map(|i| {
            let t = inst.mu(i) - xi;
            (0..inst.k())
                .filter(|&o| o != i)
                .fold(Rat::one(), |acc, o| acc * inst.pmf(o).at_most(&t))
        })
        .min()
        .expect("k >= 2")
}

/// Picks `(xi, gamma)` maximizing `xi * gamma` over the breakpoints `xi = mu_i - c`.
pub fn exploration_margin(inst: &Instance) -> Result<MarginPair> {
    let mut cands: Vec<Rat> = Vec::new();
    for i in 0..inst.k() {
        for c in 0..=inst.h() {
            let xi = inst.mu(i) - int(i64::from(c));
            if xi > Rat::zero() {
                cands.push(xi);
            }
        }
    }
    cands.sort();
    cands.dedup();
    let mut best: Option<(Rat, Rat, Rat)> = None;
    for xi in cands {
        let gamma = margin_gamma(inst, &xi);
        if gamma.is_zero() {
            continue;
        }
        let prod = &xi * &gamma;
        // candidates ascend in xi, so `>=` keeps the larger xi on ties
        if best.as_ref().is_none_or(|(_, _, p)| prod >= *p) {
            best = Some((xi, gamma, prod));
        }
    }
    let (xi, gamma, _) = best.ok_or_else(|| {
        Error::Assumption("no margin candidate has positive probability".into())
    })?;
    let phase_length = MarginPair::phase_length_for(inst.h(), &xi, &gamma);
    Ok(MarginPair { xi, gamma, phase_length })
}

/// `min_i Pr(X_i > X_i' for all i' != i)`.
pub fn superiority_gap(inst: &Instance) -> Rat {
    (0..inst.k())
        .map(|i| {
            inst.pmf(i).support().fold(Rat::zero(), |acc, (c, p)| {
                let others = (0..inst.k())
                    .filter(|&o| o != i)
                    .fold(Rat::one(), |g, o| g * inst.pmf(o).cdf_clamped(i64::from(c) - 1));
                acc + p * others
            })
        })
        .min()
        .expect("k >= 2")
}

/// Named instance constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `X_1 = 1`; other arms `H` w.p. `1/H - eps`, else 0.
    Prop5,
    /// `X_1` in `{1, H}`, `X_2 = 2`, the rest as in `Prop5`.
    Prop6,
    /// `X_1` in `{0, 2}`, `X_2 = 1`, the rest as in `Prop5`.
    Prop7,
    /// Uniform arms; `X_1` gets an extra `eps` mass on `H`.
    Prop9Uniform,
    /// `X_i` uniform on `{0, ..., floor(H (K - i + 1) / K)}`.
    Uniform,
    /// Random integer weights in `0..=5`.
    Random(u64),
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "prop5" => Family::Prop5,
            "prop6" => Family::Prop6,
            "prop7" => Family::Prop7,
            "prop9_uniform" => Family::Prop9Uniform,
            "uniform" => Family::Uniform,
            "random" => Family::Random(0),
            _ => {
                let seed = s
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::BadInput(format!("unknown family {s:?}")))?;
                Family::Random(seed)
            }
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Prop5 => f.write_str("prop5"),
            Family::Prop6 => f.write_str("prop6"),
            Family::Prop7 => f.write_str("prop7"),
            Family::Prop9Uniform => f.write_str("prop9_uniform"),
            Family::Uniform => f.write_str("uniform"),
            Family::Random(s) => write!(f, "random({s})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub k: usize,
    pub h: u32,
    pub eps: Option<Rat>,
}

fn need_eps(family: Family, params: &GenParams) -> Result<Rat> {
    let eps = params
        .eps
        .clone()
        .ok_or_else(|| Error::BadInput(format!("{family} needs eps")))?;
    if eps <= Rat::zero() || eps >= Rat::one() {
        return Err(Error::BadInput(format!("eps must lie in (0, 1), got {}", fmt_rat(&eps))));
    }
    Ok(eps)
}

/// Two-point arm: `hi` w.p. `p_hi`, `lo` otherwise.
fn two_point(h: u32, lo: u32, hi: u32, p_hi: &Rat) -> Result<RewardPmf> {
    let mut probs = vec![Rat::zero(); h as usize + 1];
    probs[hi as usize] += p_hi;
    probs[lo as usize] += Rat::one() - p_hi;
    RewardPmf::from_probs(&probs)
}

/// The rare-jackpot arm shared by several constructions.
fn jackpot(h: u32, eps: &Rat) -> Result<RewardPmf> {
    let p = Rat::new(1.into(), h.into()) - eps;
    if p <= Rat::zero() {
        return Err(Error::BadInput(format!("1/H - eps must be positive (H = {h})")));
    }
    two_point(h, 0, h, &p)
}

/// Builds the named construction with `eps` folded into exact weights.
pub fn generate(family: Family, params: &GenParams) -> Result<Instance> {
    let GenParams { k, h, .. } = *params;
    if k < 2 {
        return Err(Error::BadInput("K must be at least 2".into()));
    }
    if h == 0 {
        return Err(Error::BadInput("H must be at least 1".into()));
    }
    let mut pmfs = Vec::with_capacity(k);
    match family {
        Family::Prop5 => {
            let eps = need_eps(family, params)?;
            pmfs.push(RewardPmf::point(h, 1));
            for _ in 1..k {
                pmfs.push(jackpot(h, &eps)?);
            }
        }
        Family::Prop6 => {
            let eps = need_eps(family, params)?;
            if h < 3 {
                return Err(Error::BadInput("prop6 needs H >= 3".into()));
            }
            let p_hi = Rat::new(1.into(), (h - 1).into()) + &eps;
            if p_hi >= Rat::one() {
                return Err(Error::BadInput("prop6 needs 1/(H-1) + eps < 1".into()));
            }
            pmfs.push(two_point(h, 1, h, &p_hi)?);
            pmfs.push(RewardPmf::point(h, 2));
            for _ in 2..k {
                pmfs.push(jackpot(h, &eps)?);
            }
        }
        Family::Prop7 => {
            let eps = need_eps(family, params)?;
            if h < 2 {
                return Err(Error::BadInput("prop7 needs H >= 2".into()));
            }
            let p_hi = Rat::new(1.into(), 2.into()) + &eps;
            if p_hi >= Rat::one() {
                return Err(Error::BadInput("prop7 needs eps < 1/2".into()));
            }
            pmfs.push(two_point(h, 0, 2, &p_hi)?);
            pmfs.push(RewardPmf::point(h, 1));
            for _ in 2..k {
                pmfs.push(jackpot(h, &eps)?);
            }
        }
        Family::Prop9Uniform => {
            let eps = need_eps(family, params)?;
            let each = (Rat::one() - &eps) / int(i64::from(h) + 1);
            let mut probs = vec![each; h as usize + 1];
            probs[h as usize] += &eps;
            pmfs.push(RewardPmf::from_probs(&probs)?);
            for _ in 1..k {
                pmfs.push(RewardPmf::uniform(h, h));
            }
        }
        Family::Uniform => {
            for i in 0..k {
                let upto = (u64::from(h) * (k - i) as u64 / k as u64) as u32;
                pmfs.push(RewardPmf::uniform(h, upto));
            }
        }
        Family::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..k {
                loop {
                    let w: Vec<u64> = (0..=h).map(|_| rng.random_range(0..=5)).collect();
                    if w.iter().any(|&x| x > 0) {
                        pmfs.push(RewardPmf::from_u64_weights(&w)?);
                        break;
                    }
                }
            }
        }
    }
    Instance::from_pmfs(h, pmfs)
}

#[cfg(test)]
mod tests {
    use super::*;
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

    #[test]
    fn three_uniform_means() {
        let inst = three_uniform();
        assert_eq!(inst.means(), &[int(15), int(10), int(5)]);
    }

    #[test]
    fn json_round_trip_and_canonical_order() {
        let doc = r#"{"version":1,"H":2,"arms":[
            {"name":"low","weights":[1,0,0]},
            {"name":"mid","weights":[1,1,0]},
            {"name":"high","weights":[0,0,1]}]}"#;
        let inst = parse_instance(doc).unwrap();
        let names: Vec<_> = inst.arms().iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["high", "mid", "low"]);
        assert_eq!(inst.input_index(), &[2, 1, 0]);
        let back = parse_instance(&inst.to_json()).unwrap();
        assert_eq!(back.means(), inst.means());
    }

    #[test]
    fn parse_errors() {
        let zero = r#"{"version":1,"H":1,"arms":[{"name":"a","weights":[0,0]},{"name":"b","weights":[1,1]}]}"#;
        assert!(matches!(parse_instance(zero), Err(Error::BadInput(_))));
        let one = r#"{"version":1,"H":1,"arms":[{"name":"a","weights":[1,1]}]}"#;
        assert!(parse_instance(one).is_err());
        let short = r#"{"version":1,"H":2,"arms":[{"name":"a","weights":[1,1]},{"name":"b","weights":[1,1,1]}]}"#;
        assert!(parse_instance(short).is_err());
        let neg = r#"{"version":1,"H":1,"arms":[{"name":"a","weights":[-1,1]},{"name":"b","weights":[1,1]}]}"#;
        assert!(parse_instance(neg).is_err());
        let huge = r#"{"version":1,"H":1,"arms":[{"name":"a","weights":[1e30,1]},{"name":"b","weights":[1,1]}]}"#;
        let err = parse_instance(huge).unwrap_err().to_string();
        assert!(err.contains("overflow"), "{err}");
        assert!(parse_instance("{").is_err());
    }

    #[test]
    fn big_weights_as_strings() {
        let doc = r#"{"version":1,"H":1,"arms":[{"name":"a","weights":["100000000000000000000000",1]},{"name":"b","weights":[1,1]}]}"#;
        let inst = parse_instance(doc).unwrap();
        assert_eq!(inst.k(), 2);
    }

    #[test]
    fn means_and_cdfs() {
        assert_eq!(mean(&RewardPmf::uniform(30, 30)), int(15));
        assert_eq!(mean(&RewardPmf::point(7, 7)), int(7));
        assert_eq!(mean(&RewardPmf::from_u64_weights(&[2, 3]).unwrap()), ratio(3, 5));
        let u = RewardPmf::uniform(10, 10);
        assert_eq!(cdf(&u, 10).unwrap(), int(1));
        assert_eq!(cdf(&u, 6).unwrap(), ratio(7, 11));
        assert_eq!(cdf(&RewardPmf::point(10, 5), 4).unwrap(), int(0));
        assert!(cdf(&u, 11).is_err());
        assert!(cdf(&u, -1).is_err());
    }

    #[test]
    fn assumption_report() {
        assert!(validate(&three_uniform()).ic_assumption_holds);
        let rigid = Instance::from_pmfs(
            3,
            vec![RewardPmf::point(3, 3), RewardPmf::uniform(3, 3)],
        )
        .unwrap();
        let r = validate(&rigid);
        assert_eq!(r.violating_pairs, vec![(0, 1)]);
        assert!(!r.ic_assumption_holds);
        let tied = Instance::from_pmfs(2, vec![RewardPmf::uniform(2, 2), RewardPmf::point(2, 1)])
            .unwrap();
        assert!(!validate(&tied).strict_mean_gap_holds);
    }

    #[test]
    fn toy_margin() {
        let m = exploration_margin(&toy()).unwrap();
        assert_eq!(m.xi, ratio(1, 2));
        assert_eq!(m.gamma, ratio(2, 5));
        assert_eq!(m.phase_length, 6);
    }

    #[test]
    fn margin_fails_without_positive_gamma() {
        // mu_2 = 1 never exceeds X_1's minimum support point 1
        let inst = Instance::from_pmfs(3, vec![RewardPmf::uniform(3, 3).clone(), RewardPmf::point(3, 1)])
            .unwrap();
        let inst2 = Instance::from_pmfs(
            3,
            vec![
                RewardPmf::from_u64_weights(&[0, 1, 0, 1]).unwrap(),
                RewardPmf::point(3, 1),
            ],
        )
        .unwrap();
        assert!(exploration_margin(&inst).is_ok());
        assert!(matches!(exploration_margin(&inst2), Err(Error::Assumption(_))));
    }

    #[test]
    fn four_uniform_margin_positive() {
        let inst = generate(Family::Uniform, &GenParams { k: 4, h: 40, eps: None }).unwrap();
        let m = exploration_margin(&inst).unwrap();
        assert!(m.gamma > Rat::zero());
        // arm 4 (mean 5) beats the others by 2 when all three are <= 3
        let g4 = [0usize, 1, 2]
            .iter()
            .fold(Rat::one(), |acc, &o| acc * inst.pmf(o).at_most(&int(3)));
        assert_eq!(g4, ratio(4, 41) * ratio(4, 31) * ratio(4, 21));
        assert!(m.xi.clone() * m.gamma.clone() >= int(2) * margin_gamma(&inst, &int(2)));
    }

    #[test]
    fn superiority_gap_cases() {
        assert_eq!(superiority_gap(&toy()), ratio(1, 5));
        let same = Instance::from_pmfs(2, vec![RewardPmf::point(2, 1), RewardPmf::point(2, 1)])
            .unwrap();
        assert_eq!(superiority_gap(&same), int(0));
        let apart = Instance::from_pmfs(2, vec![RewardPmf::point(2, 2), RewardPmf::point(2, 0)])
            .unwrap();
        assert_eq!(superiority_gap(&apart), int(0));
    }

    #[test]
    fn constructions() {
        let eps = ratio(1, 1_000_000);
        let p5 = generate(Family::Prop5, &GenParams { k: 10, h: 10, eps: Some(eps.clone()) }).unwrap();
        assert_eq!(p5.mu(0), &int(1));
        assert_eq!(p5.pmf(3).prob(10), &(ratio(1, 10) - &eps));
        assert!(p5.means()[1..].iter().all(|m| m < &int(1)));

        let p7 = generate(Family::Prop7, &GenParams { k: 10, h: 10, eps: Some(eps.clone()) }).unwrap();
        assert_eq!(p7.pmf(0).prob(2), &(ratio(1, 2) + &eps));
        assert_eq!(p7.mu(1), &int(1));

        let p9 = generate(
            Family::Prop9Uniform,
            &GenParams { k: 5, h: 10, eps: Some(ratio(1, 100)) },
        )
        .unwrap();
        assert_eq!(p9.pmf(0).prob(10), &(ratio(99, 1100) + ratio(1, 100)));
        assert_eq!(p9.mu(1), &int(5));

        assert!(generate(Family::Prop5, &GenParams { k: 3, h: 10, eps: Some(ratio(1, 10)) }).is_err());
        assert!(generate(Family::Prop5, &GenParams { k: 3, h: 10, eps: None }).is_err());
        assert_eq!("random(9)".parse::<Family>().unwrap(), Family::Random(9));
        assert!("prop8".parse::<Family>().is_err());
    }

    #[test]
    fn sampling_follows_cdf() {
        let pmf = RewardPmf::from_u64_weights(&[1, 0, 1]).unwrap();
        assert_eq!(pmf.sample(0), 0);
        assert_eq!(pmf.sample((1u64 << 63) - 1), 0);
        assert_eq!(pmf.sample(1u64 << 63), 2);
        assert_eq!(pmf.sample(u64::MAX), 2);
    }
}
