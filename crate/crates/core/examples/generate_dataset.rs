//! Draws one balanced dataset for case 2 and prints the first rows as CSV.

use metareg::datagen::{sample_dataset, SimulationConfig};
use metareg::numerics::RngStream;

fn main() -> metareg::Result<()> {
    let config = SimulationConfig::reference(2, 50, 3)?.with_seed(7);
    let data = sample_dataset(&config, RngStream::child(config.seed, 0, 0))?;
    println!(
        "{} rows, {} studies, {} locations, {} periods",
        data.len(),
        data.n_studies,
        data.n_locations,
        data.n_times
    );
    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    for line in String::from_utf8_lossy(&csv).lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
