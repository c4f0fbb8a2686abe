//! Full-enumeration incentive check of IC-FEE on the two-arm toy, and a three-arm instance
//! where a too-short phase lets agents profit from deviating.
//!
//! cargo run --release --example ic_check

use fiduciary::audit::check_ic_exact;
use fiduciary::instance::parse_instance;
use fiduciary::mechanism::{MechanismFactory, MechanismKind};
use fiduciary::rational::fmt_rat;
use fiduciary::{Instance, RewardPmf};

fn main() -> fiduciary::Result<()> {
    let toy = Instance::from_pmfs(
        1,
        vec![RewardPmf::from_u64_weights(&[2, 3])?, RewardPmf::from_u64_weights(&[1, 1])?],
    )?;
    let f = MechanismFactory::new(&toy, MechanismKind::IcFee)?;
    println!("toy phase length B = {}", f.phase_length().unwrap());
    let report = check_ic_exact(&f, 20)?;
    report.write_csv(std::io::stdout())?;

    let three = parse_instance(
        r#"{"version":1,"H":2,"arms":[
            {"name":"a1","weights":[2,0,1]},
            {"name":"a2","weights":[1,4,4]},
            {"name":"a3","weights":[1,4,3]}]}"#,
    )?;
    let full = MechanismFactory::new(&three, MechanismKind::IcFee)?;
    let b = full.phase_length().unwrap();
    for (label, factory, n) in [
        ("computed B", full.clone(), 3 + b as usize),
        ("B = 1", full.clone().phase_length_override(1)?, 12),
    ] {
        let r = check_ic_exact(&factory, n)?;
        let worst = r.worst_margin().map(fmt_rat).unwrap_or_default();
        println!("{label}, n = {n}: {} violations, worst margin {worst}", r.violations());
    }
    Ok(())
}
