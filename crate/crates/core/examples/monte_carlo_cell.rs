//! Runs one small Monte Carlo cell and prints the per-spec summary.
//! Worker count follows `METAREG_THREADS`.

use metareg::datagen::SimulationConfig;
use metareg::estimators::SpecKind;
use metareg::harness::{run_cell, RunSettings};
use metareg::report::summary_lines;

fn main() -> metareg::Result<()> {
    let config = SimulationConfig::reference(1, 50, 1)?.with_seed(42).with_iterations(200);
    let cell = run_cell(&config, &SpecKind::ALL, &RunSettings::default(), 0)?;
    for line in summary_lines(&cell) {
        println!("{line}");
    }
    let trend = cell.metrics(SpecKind::FeLTrend).and_then(|m| m.trend.as_ref());
    if let Some(t) = trend {
        println!("FE_lTrend trend: truth {} mean {:.4}", t.truth, t.mean_estimate);
    }
    println!("elapsed {:.2?}", cell.wall_time);
    Ok(())
}
