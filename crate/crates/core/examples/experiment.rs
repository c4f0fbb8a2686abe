//! A full batch experiment: plan, simulate and audit two mechanisms over several horizons,
//! then write the results table as CSV.
//!
//! cargo run --release --example experiment -- results.csv

use fiduciary::cli::{run, CheckKind, ExperimentConfig, InstanceSource};
use fiduciary::instance::{Family, GenParams};
use fiduciary::mechanism::MechanismKind;

fn main() -> fiduciary::Result<()> {
    let out = std::env::args().nth(1).map(Into::into);
    let config = ExperimentConfig {
        instances: vec![InstanceSource::Generated {
            family: Family::Random(11),
            params: GenParams { k: 3, h: 4, eps: None },
        }],
        mechanisms: vec![MechanismKind::Fee, MechanismKind::Greedy],
        horizons: vec![10, 100, 1000],
        runs: 5000,
        seed: 1,
        checks: vec![CheckKind::Eair],
        audit_episodes: 200,
        out,
        ..Default::default()
    };
    let table = run(&config)?;
    table.write_csv(std::io::stdout())?;
    if !table.audits_passed() {
        std::process::exit(2);
    }
    Ok(())
}
