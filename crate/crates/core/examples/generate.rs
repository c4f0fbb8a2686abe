//! Builds the named instance constructions and prints their assumption report.
//!
//! cargo run --example generate

use fiduciary::instance::{generate, validate, Family, GenParams};
use fiduciary::rational::{fmt_rat, ratio};

fn main() -> fiduciary::Result<()> {
    let eps = Some(ratio(1, 1_000_000));
    for family in [Family::Prop5, Family::Prop6, Family::Prop7] {
        let inst = generate(family, &GenParams { k: 10, h: 10, eps: eps.clone() })?;
        let means: Vec<String> = inst.means().iter().map(fmt_rat).collect();
        println!("{family}: means {}", means.join(" "));
    }

    let four_uniform = generate(Family::Uniform, &GenParams { k: 4, h: 40, eps: None })?;
    let report = validate(&four_uniform);
    println!(
        "uniform k=4 h=40: ic assumption {}, strict mean gap {}",
        report.ic_assumption_holds, report.strict_mean_gap_holds
    );

    // round trip through the JSON schema
    let json = four_uniform.to_json();
    let back = fiduciary::instance::parse_instance(&json)?;
    assert_eq!(back.means(), four_uniform.means());
    println!("{} bytes of JSON", json.len());
    Ok(())
}
