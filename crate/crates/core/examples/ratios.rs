//! Exact welfare benchmarks and their ratios on the lower-bound constructions, through the
//! same experiment runner the `ratios` command uses.
//!
//! cargo run --release --example ratios

use fiduciary::cli::{run, ExperimentConfig, InstanceSource};
use fiduciary::instance::{Family, GenParams};
use fiduciary::rational::{fmt_decimal, ratio};

fn main() -> fiduciary::Result<()> {
    let mut instances: Vec<InstanceSource> = [Family::Prop5, Family::Prop6, Family::Prop7]
        .into_iter()
        .map(|family| InstanceSource::Generated {
            family,
            params: GenParams { k: 10, h: 10, eps: Some(ratio(1, 1_000_000)) },
        })
        .collect();
    for k in 2..=8 {
        instances.push(InstanceSource::Generated {
            family: Family::Prop9Uniform,
            params: GenParams { k, h: 10, eps: Some(ratio(1, 100)) },
        });
    }
    let table = run(&ExperimentConfig { instances, ..Default::default() })?;
    println!("{:<36} {:>12} {:>12} {:>12}", "instance", "opt/eair", "eair/epir", "epir/del");
    for row in &table.rows {
        let r = row.ratios().map(|r| r.map(|r| fmt_decimal(&r, 4)).unwrap_or_default());
        println!("{:<36} {:>12} {:>12} {:>12}", row.instance, r[0], r[1], r[2]);
    }
    Ok(())
}
