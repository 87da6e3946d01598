use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::eval::{write_kpi_csv, KpiReport};
use crate::sim::output::write_outputs;
use crate::sim::{run, SimError, SimOutput};

use super::scenario::Scenario;

/// Name of the resolved-config echo written next to each scenario's outputs.
pub const CONFIG_ECHO: &str = "scenario.cfg";

pub fn scenario_dir(scenario: &Scenario, out_root: &Path) -> PathBuf {
    scenario.output.as_deref().unwrap_or(out_root).join(&scenario.name)
}

/// Runs one scenario and writes its output directory.
pub fn run_scenario(scenario: &Scenario, out_root: &Path) -> Result<SimOutput, SimError> {
    let (input, warnings) = scenario.build_input()?;
    for w in warnings {
        eprintln!("{}: {w}", scenario.name);
    }
    let out = run(input)?;
    let dir = scenario_dir(scenario, out_root);
    write_outputs(&dir, &scenario.name, &out)?;
    std::fs::write(dir.join(CONFIG_ECHO), scenario.to_config())
        .map_err(|e| SimError::Output(format!("{}: {e}", dir.display())))?;
    Ok(out)
}

#[derive(Debug)]
pub struct BatchReport {
    /// In input order.
    pub results: Vec<(String, Result<KpiReport, String>)>,
}

impl BatchReport {
    pub fn success(&self) -> bool {
        self.results.iter().all(|(_, r)| r.is_ok())
    }

    /// 0 when every scenario succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }
}

/// Runs scenarios on up to `parallel` threads; a failing scenario does not
/// affect the others. Writes `<out_root>/kpi.csv` with one row per
/// successful scenario.
pub fn run_batch(scenarios: &[Scenario], parallel: usize, out_root: &Path) -> Result<BatchReport, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let results: Vec<(String, Result<KpiReport, String>)> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| {
                let r = run_scenario(s, out_root).map(|o| o.kpis).map_err(|e| e.to_string());
                (s.name.clone(), r)
            })
            .collect()
    });
    std::fs::create_dir_all(out_root).map_err(|e| SimError::Output(format!("{}: {e}", out_root.display())))?;
    let rows: Vec<(String, KpiReport)> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().ok().map(|k| (n.clone(), k.clone())))
        .collect();
    let path = out_root.join("kpi.csv");
    let file = File::create(&path).map_err(|e| SimError::Output(format!("{}: {e}", path.display())))?;
    write_kpi_csv(BufWriter::new(file), &rows).map_err(|e| SimError::Output(e.to_string()))?;
    Ok(BatchReport { results })
}
