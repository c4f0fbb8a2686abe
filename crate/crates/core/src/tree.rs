//! Text export of the planned policy as an indented tree, and a parser that re-evaluates
//! an exported tree from its leaves.
//!
//! One line per node:
//!
//! ```text
//! [a1=6 1/41] U=0111 alpha=6 beta=6 action=p_{2,4}(1/10) W=...
//!   [a2<=6 7/310] U=0011 alpha=6 beta=6 action=p_{3,4}(1/5) W=...
//! ```
//!
//! The bracket names the observation leading to the node and its probability from the
//! parent. Observations that land in the same state (every reward at or below the default
//! arm's) are merged into one `a<i><=<c>` edge. `action` shows the pair and the probability of
//! its first arm, or `terminal`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::gmdp::{transitions, value, GmdpState, Policy};
use crate::instance::Instance;
use crate::rational::{fmt_rat, parse_rat, Rat};

/// Exports the reachable part of `policy`, optionally only below `R1 = branch`.
pub fn export_policy_tree(inst: &Instance, policy: &Policy, branch: Option<u32>) -> Result<String> {
    if !policy.matches(inst) {
        return Err(Error::BadInput("policy was planned for another instance".into()));
    }
    let k = inst.k();
    let s0 = GmdpState::initial(k);
    let mut out = String::new();
    match branch {
        None => write_node(inst, policy, &s0, "root", 0, &mut out)?,
        Some(c) => {
            let q = inst.pmf(0).probs().get(c as usize).filter(|q| !q.is_zero()).ok_or_else(|| {
                Error::BadInput(format!("R1 = {c} is outside the default arm's support"))
            })?;
            let label = format!("a1={c} {}", fmt_rat(q));
            write_node(inst, policy, &s0.after(0, c), &label, 0, &mut out)?;
        }
    }
    Ok(out)
}

fn write_node(
    inst: &Instance,
    policy: &Policy,
    s: &GmdpState,
    label: &str,
    depth: usize,
    out: &mut String,
) -> Result<()> {
    let k = inst.k();
    let w = value(policy, s)?;
    let (alpha, beta) = match (s.alpha, s.beta) {
        (Some(a), Some(b)) => (a.to_string(), b.to_string()),
        _ => ("-".into(), "-".into()),
    };
    let indent = "  ".repeat(depth);
    let Some(d) = policy.decision(s) else {
        writeln!(
            out,
            "{indent}[{label}] U={} alpha={alpha} beta={beta} action=terminal W={}",
            s.bits(k),
            fmt_rat(&w)
        )
        .unwrap();
        return Ok(());
    };
    writeln!(
        out,
        "{indent}[{label}] U={} alpha={alpha} beta={beta} action=p_{{{},{}}}({}) W={}",
        s.bits(k),
        d.pair.i + 1,
        d.pair.r + 1,
        fmt_rat(&d.portfolio.prob(d.pair.i)),
        fmt_rat(&w)
    )
    .unwrap();

    // merge observations that lead to the same state, keeping arm then reward order
    let mut children: Vec<(GmdpState, usize, Vec<u32>, Rat)> = Vec::new();
    let mut index: BTreeMap<GmdpState, usize> = BTreeMap::new();
    for (arm, _) in d.portfolio.entries() {
        let single = crate::gmdp::Portfolio::point(*arm);
        let p_arm = d.portfolio.prob(*arm);
        for ((t, q), (c, _)) in transitions(s, &single, inst).into_iter().zip(inst.pmf(*arm).support()) {
            let q = q * &p_arm;
            match index.get(&t) {
                Some(&i) => {
                    children[i].2.push(c);
                    children[i].3 += q;
                }
                None => {
                    index.insert(t, children.len());
                    children.push((t, *arm, vec![c], q));
                }
            }
        }
    }
    for (t, arm, cs, q) in children {
        let obs = if cs.len() == 1 {
            format!("a{}={}", arm + 1, cs[0])
        } else {
            format!("a{}<={}", arm + 1, cs.iter().max().unwrap())
        };
        write_node(inst, policy, &t, &format!("{obs} {}", fmt_rat(&q)), depth + 1, out)?;
    }
    Ok(())
}

/// A parsed tree line.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub depth: usize,
    /// Probability of reaching this node from its parent (1 for the top node).
    pub prob: Rat,
    pub state: GmdpState,
    pub terminal: bool,
    pub value: Rat,
    pub children: Vec<usize>,
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| Error::BadInput(format!("tree line lacks {key}: {line:?}")))
}

/// Parses an exported tree into nodes (index 0 is the top node).
pub fn parse_policy_tree(text: &str) -> Result<Vec<TreeNode>> {
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let spaces = line.len() - line.trim_start().len();
        if spaces % 2 != 0 {
            return Err(Error::BadInput(format!("odd indentation: {line:?}")));
        }
        let depth = spaces / 2;
        let body = line.trim_start();
        let close = body.find(']').ok_or_else(|| Error::BadInput(format!("no edge label: {line:?}")))?;
        let label = &body[1..close];
        let prob = match label.split_whitespace().nth(1) {
            Some(p) if depth > 0 => parse_rat(p)?,
            _ => Rat::one(),
        };
        let rest = &body[close + 1..];
        let bits = field(rest, "U")?;
        let unobserved = bits
            .chars()
            .enumerate()
            .try_fold(0u64, |m, (i, ch)| match ch {
                '1' => Ok(m | 1 << i),
                '0' => Ok(m),
                _ => Err(Error::BadInput(format!("bad U bits {bits:?}"))),
            })?;
        let num = |v: &str| -> Result<Option<u32>> {
            if v == "-" {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| Error::BadInput(format!("bad number {v:?}")))
            }
        };
        let state = GmdpState { unobserved, alpha: num(field(rest, "alpha")?)?, beta: num(field(rest, "beta")?)? };
        let terminal = field(rest, "action")? == "terminal";
        let value = parse_rat(field(rest, "W")?)?;
        stack.truncate(depth);
        if depth != stack.len() {
            return Err(Error::BadInput(format!("indentation jumps: {line:?}")));
        }
        let id = nodes.len();
        if let Some(&parent) = stack.last() {
            nodes[parent].children.push(id);
        } else if id != 0 {
            return Err(Error::BadInput("more than one top-level node".into()));
        }
        nodes.push(TreeNode { depth, prob, state, terminal, value, children: Vec::new() });
        stack.push(id);
    }
    if nodes.is_empty() {
        return Err(Error::BadInput("empty tree".into()));
    }
    Ok(nodes)
}

/// Recomputes every inner node's value from its children and the leaf values; returns the
/// recomputed values by node index.
pub fn reevaluate(nodes: &[TreeNode]) -> Result<Vec<Rat>> {
    let mut vals: Vec<Option<Rat>> = vec![None; nodes.len()];
    for id in (0..nodes.len()).rev() {
        let n = &nodes[id];
        if n.children.is_empty() {
            if !n.terminal {
                return Err(Error::BadInput(format!("non-terminal leaf at node {id}")));
            }
            vals[id] = Some(n.value.clone());
            continue;
        }
        let mass: Rat = n.children.iter().map(|&c| &nodes[c].prob).sum();
        if !mass.is_one() {
            return Err(Error::BadInput(format!("children of node {id} carry mass {}", fmt_rat(&mass))));
        }
        let v = n
            .children
            .iter()
            .map(|&c| &nodes[c].prob * vals[c].as_ref().expect("children follow parents"))
            .sum();
        vals[id] = Some(v);
    }
    Ok(vals.into_iter().map(Option::unwrap).collect())
}

/// Checks that an exported tree reproduces the policy's values at every node.
pub fn verify_tree(text: &str, policy: &Policy) -> Result<()> {
    let nodes = parse_policy_tree(text)?;
    let vals = reevaluate(&nodes)?;
    for (n, v) in nodes.iter().zip(vals) {
        let expected = value(policy, &n.state)?;
        if v != expected || n.value != expected {
            return Err(Error::InvalidState(format!(
                "tree value {} differs from planned {} at {:?}",
                fmt_rat(&v),
                fmt_rat(&expected),
                n.state
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmdp::plan;
    use crate::instance::{generate, Family, GenParams, RewardPmf};

    fn four_uniform() -> Instance {
        generate(Family::Uniform, &GenParams { k: 4, h: 40, eps: None }).unwrap()
    }

    #[test]
    fn four_uniform_branch_lists_planned_actions() {
        let inst = four_uniform();
        let p = plan(&inst).unwrap();
        let t = export_policy_tree(&inst, &p, Some(6)).unwrap();
        let first = t.lines().next().unwrap();
        assert!(first.starts_with("[a1=6 1/41] U=0111 alpha=6 beta=6 action=p_{2,4}(1/10)"), "{first}");
        assert!(t.contains("U=0011 alpha=6 beta=6 action=p_{3,4}(1/5)"));
        assert!(t.contains("U=0010 alpha=6 beta=6 action=p_{3,3}(1)"));
        verify_tree(&t, &p).unwrap();
    }

    #[test]
    fn toy_branch_is_a_leaf() {
        let inst = Instance::from_pmfs(
            1,
            vec![
                RewardPmf::from_u64_weights(&[2, 3]).unwrap(),
                RewardPmf::from_u64_weights(&[1, 1]).unwrap(),
            ],
        )
        .unwrap();
        let p = plan(&inst).unwrap();
        let t = export_policy_tree(&inst, &p, Some(1)).unwrap();
        assert_eq!(t, "[a1=1 3/5] U=01 alpha=1 beta=1 action=terminal W=1\n");
        assert!(export_policy_tree(&inst, &p, Some(2)).is_err());
        let whole = export_policy_tree(&inst, &p, None).unwrap();
        verify_tree(&whole, &p).unwrap();
        assert_eq!(reevaluate(&parse_policy_tree(&whole).unwrap()).unwrap()[0], *p.initial_value());
    }

    #[test]
    fn tampered_tree_is_rejected() {
        let inst = four_uniform();
        let p = plan(&inst).unwrap();
        let t = export_policy_tree(&inst, &p, Some(6)).unwrap();
        let bad = t.replacen("W=6\n", "W=7\n", 1);
        assert_ne!(bad, t);
        assert!(verify_tree(&bad, &p).is_err());
    }

    #[test]
    fn full_tree_round_trips() {
        let inst = generate(Family::Uniform, &GenParams { k: 3, h: 9, eps: None }).unwrap();
        let p = plan(&inst).unwrap();
        let t = export_policy_tree(&inst, &p, None).unwrap();
        verify_tree(&t, &p).unwrap();
    }
}
