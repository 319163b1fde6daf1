//! Treats a simulated dataset as observed data: extracts its moments, runs
//! the heterogeneity diagnostics and re-simulates from the calibration.

use metareg::datagen::{sample_dataset, SimulationConfig};
use metareg::extract::{calibrate, extract_parameters, heterogeneity_diagnostics, read_dataset};
use metareg::numerics::RngStream;

fn main() -> metareg::Result<()> {
    let source = SimulationConfig::reference(2, 50, 1)?;
    let mut csv = Vec::new();
    sample_dataset(&source, RngStream::child(3, 0, 0))?.write_csv(&mut csv)?;
    let observed = read_dataset(csv.as_slice())?;

    let params = extract_parameters(&observed)?;
    println!("{}", serde_json::to_string_pretty(&params).expect("serializable"));
    print!("{}", heterogeneity_diagnostics(&observed)?.to_text());

    let cal = calibrate(&observed)?;
    println!(
        "\ncalibrated: {} locations, increment {:.4}, n = {}",
        cal.case.location_means.len(),
        cal.case.time_increment,
        cal.n
    );
    let again = extract_parameters(&sample_dataset(&cal.config(1, 9), RngStream::child(9, 0, 0))?)?;
    println!("cov(y, x1): observed {:.4}, re-simulated {:.4}", params.covariance[0][1], again.covariance[0][1]);
    Ok(())
}
