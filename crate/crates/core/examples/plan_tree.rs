//! Plans the optimal individually rational exploration policy on the four-arm uniform
//! instance and prints the branch where the default arm pays 6.
//!
//! cargo run --release --example plan_tree

use fiduciary::instance::{generate, Family, GenParams};
use fiduciary::rational::{fmt_decimal, fmt_rat};
use fiduciary::tree::{export_policy_tree, verify_tree};

fn main() -> fiduciary::Result<()> {
    let inst = generate(Family::Uniform, &GenParams { k: 4, h: 40, eps: None })?;
    let policy = fiduciary::plan(&inst)?;
    let w = policy.initial_value();
    println!("W(s0) = {} = {} over {} states", fmt_rat(w), fmt_decimal(w, 6), policy.len());

    let tree = export_policy_tree(&inst, &policy, Some(6))?;
    for line in tree.lines().take(12) {
        println!("{line}");
    }
    println!("... {} lines", tree.lines().count());
    verify_tree(&tree, &policy)?;
    println!("tree re-evaluates to the planned values");
    Ok(())
}
