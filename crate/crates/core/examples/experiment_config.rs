//! Builds an experiment from an inline TOML document and writes the result
//! files into a temporary directory.

use metareg::config::RunConfigFile;
use metareg::harness::run_experiment;

const PLAN: &str = r#"
[experiment]
cases = [1, 7]
n = [50]
k = [1]
iterations = 50
seed = 2024
specs = ["FE_s", "FE_l", "FE_lTrend"]
"#;

fn main() -> metareg::Result<()> {
    let mut plan = RunConfigFile::from_toml(PLAN)?.plan()?;
    let dir = std::env::temp_dir().join("metareg-example");
    plan.output = Some(dir.clone());
    let out = run_experiment(&plan)?;
    println!("{} cells written to {}", out.cells.len(), dir.display());
    let csv = std::fs::read_to_string(dir.join("cell_results.csv"))?;
    print!("{csv}");
    Ok(())
}
