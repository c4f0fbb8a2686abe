//! Monte Carlo welfare of every mechanism on the two-arm toy, plus one recorded FEE episode.
//!
//! cargo run --release --example simulate

use fiduciary::mechanism::{MechanismFactory, MechanismKind};
use fiduciary::sim::{estimate_welfare, run_episode, welfare_gap_against};
use fiduciary::{Instance, RewardPmf};

fn main() -> fiduciary::Result<()> {
    let inst = Instance::from_pmfs(
        1,
        vec![RewardPmf::from_u64_weights(&[2, 3])?, RewardPmf::from_u64_weights(&[1, 1])?],
    )?;
    let w = fiduciary::plan(&inst)?.initial_value().clone();

    for kind in MechanismKind::ALL {
        let factory = MechanismFactory::new(&inst, kind)?;
        let e = estimate_welfare(&factory, 1000, 20_000, 42)?;
        println!(
            "{kind:>8}: mean {:.4} +- {:.4}, gap n(W - mean) = {:.2}",
            e.mean,
            e.std_error,
            welfare_gap_against(&w, &e)
        );
    }

    let fee = MechanismFactory::new(&inst, MechanismKind::Fee)?;
    let trace = run_episode(&fee, 6, 3)?;
    trace.write_csv(std::io::stdout())?;
    Ok(())
}
