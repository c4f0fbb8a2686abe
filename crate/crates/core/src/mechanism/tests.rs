use super::*;
use crate::instance::{generate, Family, GenParams, RewardPmf};
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

fn uniforms(k: usize, h: u32) -> Instance {
    generate(Family::Uniform, &GenParams { k, h, eps: None }).unwrap()
}

/// Plays `m` against `x`, always taking the `pick`-th support arm of each portfolio (clamped)
/// and the first chance outcome; returns the pulled arms (1-based).
fn drive(m: &mut Mechanism<'_>, x: &[u32], picks: &[usize], rounds: usize) -> Vec<usize> {
    let mut arms = Vec::new();
    for t in 0..rounds {
        if m.pending_chance().is_some() {
            m.resolve_chance(0).unwrap();
        }
        let p = m.recommend().unwrap();
        let support: Vec<usize> = p.support().collect();
        let pick = picks.get(t).copied().unwrap_or(0).min(support.len() - 1);
        let a = support[pick];
        m.observe(a, x[a]).unwrap();
        arms.push(a + 1);
    }
    arms
}

#[test]
fn kinds_round_trip_through_text() {
    for k in MechanismKind::ALL {
        assert_eq!(k.to_string().parse::<MechanismKind>().unwrap(), k);
    }
    assert!("nope".parse::<MechanismKind>().is_err());
}

#[test]
fn fee_starts_on_default_arm() {
    let inst = uniforms(4, 40);
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let m = f.build(5);
    assert_eq!(m.recommend().unwrap(), Portfolio::point(0));
    assert_eq!(m.phase(), Phase::Primary);
}

#[test]
fn fee_walkthrough_on_four_uniform_arms() {
    let inst = uniforms(4, 40);
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let mut m = f.build(20);
    let x = [6, 3, 7, 2];
    // a1, then a2 out of p_{2,4}, then a3 out of p_{3,4}
    assert_eq!(drive(&mut m, &x, &[0, 0, 0], 3), vec![1, 2, 3]);
    let Mechanism::Fee(fee) = &m else { unreachable!() };
    assert_eq!(fee.phase(), Phase::Secondary);
    assert_eq!(fee.leftover(), 0b1000);
    let p = m.recommend().unwrap();
    assert_eq!(p.prob(3), ratio(1, 2));
    assert_eq!(p.prob(2), ratio(1, 2));
    // declining once re-uses a3, then a4 is explored and a3 exploited
    assert_eq!(drive(&mut m, &x, &[0, 1, 0], 3), vec![3, 4, 3]);
    assert_eq!(m.phase(), Phase::Exploit);
    assert_eq!(m.settled(), Some(2));
}

#[test]
fn fee_primary_state_after_default_observation() {
    let inst = uniforms(4, 40);
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let mut m = f.build(5);
    m.observe(0, 6).unwrap();
    let Mechanism::Fee(fee) = &m else { unreachable!() };
    assert_eq!(fee.gmdp_state(), crate::gmdp::GmdpState::new(0b1110, 6, 6));
    assert_eq!(fee.phase(), Phase::Primary);
}

#[test]
fn fee_discards_dominated_arms() {
    let inst = uniforms(4, 40);
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let mut m = f.build(10);
    // a3 = 10 already matches a4's largest possible reward
    drive(&mut m, &[6, 3, 10, 2], &[0, 0, 0], 3);
    assert_eq!(m.phase(), Phase::Exploit);
    assert_eq!(m.recommend().unwrap(), Portfolio::point(2));
}

#[test]
fn fee_exploits_default_when_nothing_is_feasible() {
    let inst = Instance::from_pmfs(
        4,
        vec![RewardPmf::from_u64_weights(&[0, 0, 1, 1, 1]).unwrap(), RewardPmf::uniform(4, 2)],
    )
    .unwrap();
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let mut m = f.build(4);
    assert_eq!(drive(&mut m, &[2, 0], &[], 4), vec![1, 1, 1, 1]);
    assert_eq!(m.phase(), Phase::Exploit);
}

#[test]
fn fee_toy_trace() {
    let inst = toy();
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let mut m = f.build(5);
    assert_eq!(drive(&mut m, &[0, 1], &[], 5), vec![1, 2, 2, 2, 2]);
    assert!(m.recommend().is_err());
}

#[test]
fn observe_rejects_bad_pulls() {
    let inst = toy();
    let f = MechanismFactory::new(&inst, MechanismKind::Fee).unwrap();
    let mut m = f.build(3);
    assert!(m.observe(1, 0).is_err());
    let inst2 = uniforms(2, 4);
    let f2 = MechanismFactory::new(&inst2, MechanismKind::Greedy).unwrap();
    let mut g = f2.build(3);
    assert!(g.observe(0, 9).is_err());
    // a2 of the uniform family lives on {0..2}
    assert!(MechanismFactory::new(&inst2, MechanismKind::FullX).unwrap().build(3).observe(0, 4).is_ok());
}

#[test]
fn icfee_toy_rules() {
    let inst = toy();
    let f = MechanismFactory::new(&inst, MechanismKind::IcFee).unwrap();
    assert_eq!(f.phase_length(), Some(6));
    // R1 = 1 = H: nothing can beat it, every round is a1
    let mut m = f.build(20);
    assert_eq!(drive(&mut m, &[1, 0], &[], 20), vec![1; 20]);
    // R1 = 0 < mu_2: the prelude round is greedy
    let mut m = f.build(3);
    assert_eq!(drive(&mut m, &[0, 1], &[], 2), vec![1, 2]);
}

#[test]
fn icfee_explorer_slot_is_a_chance_move() {
    let inst = toy();
    let f = MechanismFactory::new(&inst, MechanismKind::IcFee).unwrap().phase_length_override(4).unwrap();
    let mut m = f.build(9);
    m.observe(0, 1).unwrap();
    assert_eq!(m.pending_chance(), None);
    m.observe(0, 1).unwrap();
    // R1 = 1 makes FEE exploit immediately, so the IC mechanism follows it
    assert_eq!(m.pending_chance(), None);
    assert_eq!(m.settled(), Some(0));

    let inst = uniforms(3, 6);
    let f = MechanismFactory::new(&inst, MechanismKind::IcFee).unwrap().phase_length_override(4).unwrap();
    let mut m = f.build(9);
    // R1 = 2 ties mu_3, prelude stays on a1 and FEE still has exploring to do
    m.observe(0, 2).unwrap();
    m.observe(0, 2).unwrap();
    m.observe(0, 2).unwrap();
    assert_eq!(m.pending_chance(), Some(4));
    assert!(m.recommend().is_err());
    m.resolve_chance(2).unwrap();
    assert_eq!(m.phase(), Phase::Delegate);
    assert_eq!(m.recommend().unwrap(), Portfolio::point(0));
    m.observe(0, 2).unwrap();
    m.observe(0, 2).unwrap();
    assert_ne!(m.phase(), Phase::Delegate);
    m.observe(0, 2).unwrap_err();
    let p = m.recommend().unwrap();
    let a = p.support().next().unwrap();
    assert_eq!(a, 1);
    m.observe(a, 1).unwrap();
    // FEE now exploits but the phase still runs on the filler rule
    assert_eq!(m.phase(), Phase::Delegate);
    m.observe(0, 2).unwrap();
    assert_eq!(m.pending_chance(), None);
    assert_eq!(m.settled(), Some(0));

    // a trailing partial phase draws over its actual length
    let mut m = f.build(5);
    for _ in 0..3 {
        m.observe(0, 2).unwrap();
    }
    assert_eq!(m.pending_chance(), Some(2));
}

#[test]
fn mepir_filters_by_default_reward() {
    let inst = uniforms(3, 30);
    let f = MechanismFactory::new(&inst, MechanismKind::Mepir).unwrap();
    let mut m = f.build(5);
    assert_eq!(drive(&mut m, &[8, 12, 1], &[], 5), vec![1, 2, 2, 2, 2]);
    let mut m = f.build(4);
    assert_eq!(drive(&mut m, &[0, 3, 1], &[], 4), vec![1, 2, 3, 2]);
    let mut m = f.build(3);
    assert_eq!(drive(&mut m, &[11, 3, 1], &[], 3), vec![1, 1, 1]);
}

#[test]
fn icepfee_rounds() {
    let inst = uniforms(3, 30);
    let f = MechanismFactory::new(&inst, MechanismKind::IcEpFee).unwrap();
    let m = f.build(50);
    assert_eq!(m.recommend().unwrap(), Portfolio::point(0));
    let mut m = f.build(50);
    // R1 = 8: greedy moves to a2 (mean 10); M_EPIR wants a2 as well
    let arms = drive(&mut m, &[8, 3, 1], &[], 3);
    assert_eq!(arms, vec![1, 2, 1]);
}

#[test]
fn greedy_on_prop7() {
    let inst =
        generate(Family::Prop7, &GenParams { k: 10, h: 10, eps: Some(ratio(1, 1_000_000)) }).unwrap();
    let f = MechanismFactory::new(&inst, MechanismKind::Greedy).unwrap();
    let mut m = f.build(3);
    let mut x = vec![0; 10];
    x[1] = 1;
    assert_eq!(drive(&mut m, &x, &[], 3), vec![1, 2, 2]);
    x[0] = 2;
    let mut m = f.build(3);
    assert_eq!(drive(&mut m, &x, &[], 3), vec![1, 1, 1]);
    assert_eq!(m.settled(), Some(0));
}

#[test]
fn fullx_order() {
    let inst = uniforms(3, 30);
    let f = MechanismFactory::new(&inst, MechanismKind::FullX).unwrap();
    let mut m = f.build(5);
    assert_eq!(drive(&mut m, &[6, 3, 7], &[], 5), vec![1, 2, 3, 3, 3]);
    let mut m = f.build(2);
    assert_eq!(drive(&mut m, &[6, 3, 7], &[], 2), vec![1, 2]);
}

#[test]
fn ic_mechanisms_need_the_assumption() {
    let inst = Instance::from_pmfs(1, vec![RewardPmf::point(1, 1), RewardPmf::uniform(1, 1)]).unwrap();
    assert!(matches!(
        MechanismFactory::new(&inst, MechanismKind::IcFee),
        Err(Error::Assumption(_))
    ));
}

#[test]
fn history_rejects_conflicting_rewards() {
    let mut h = History::new(2);
    assert!(h.push(1, 3).unwrap());
    assert!(!h.push(1, 3).unwrap());
    assert!(h.push(1, 2).is_err());
    assert_eq!(h.rounds(), 3);
}
