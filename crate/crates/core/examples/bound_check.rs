//! Perturb exact edge values and discounts of random cyclic plans and compare
//! the hop-product estimate of the composite value with its exact value.

use tapkit::experiments::{bound_check, BoundConfig};

fn main() -> tapkit::Result<()> {
    for (label, cfg) in [
        ("random signs", BoundConfig::default()),
        ("aligned errors", BoundConfig { aligned: true, ..BoundConfig::default() }),
        ("no error", BoundConfig { eps_v: 0.0, eps_gamma: 0.0, ..BoundConfig::default() }),
    ] {
        let report = bound_check(&cfg)?;
        println!("{label:<15} {}", report.summary());
    }

    // ε must be small relative to the effective horizon.
    match bound_check(&BoundConfig { eps_gamma: 0.01, ..BoundConfig::default() }) {
        Err(e) => println!("eps_gamma = 0.01 at gamma = 0.9 is refused: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
