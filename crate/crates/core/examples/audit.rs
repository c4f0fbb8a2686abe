//! Exact individual-rationality audit of seeded episodes: FEE keeps ex-ante rationality,
//! M_EPIR keeps ex-post rationality, and full exploration breaks it.
//!
//! cargo run --release --example audit

use fiduciary::audit::Constraint;
use fiduciary::instance::{generate, Family, GenParams};
use fiduciary::mechanism::{MechanismFactory, MechanismKind};
use fiduciary::rational::fmt_rat;
use fiduciary::sim::audit_episodes;

fn main() -> fiduciary::Result<()> {
    let inst = generate(Family::Uniform, &GenParams { k: 3, h: 30, eps: None })?;
    let runs = [
        (MechanismKind::Fee, Constraint::Eair),
        (MechanismKind::Mepir, Constraint::Epir),
        (MechanismKind::FullX, Constraint::Epir),
    ];
    for (kind, c) in runs {
        let factory = MechanismFactory::new(&inst, kind)?;
        let report = audit_episodes(&factory, 50, 500, 7, &[c])?;
        let worst = report.worst_margin().map(fmt_rat).unwrap_or_default();
        println!(
            "{kind} / {c}: {} checks, {} violations, worst margin {worst}",
            report.evaluated(),
            report.violations()
        );
    }
    Ok(())
}
