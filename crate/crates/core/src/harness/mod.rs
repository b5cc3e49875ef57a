//! Random user drops, parameter sweeps and result files.
//!
//! A sweep runs every `(axis value, scheme, seed)` job and writes one CSV row
//! per job, plus a JSON sidecar with the sweep spec, per-job wall times and
//! objective traces. Rows are emitted in job order, so the CSV is identical
//! whatever the number of worker threads.

mod output;
mod scenario;
mod sweep;

pub use output::{read_results, write_results, ResultRecord, CSV_HEADER};
pub use scenario::{generate_scenario, scenario_from_file};
pub use sweep::{mean_sum_rates, run_job, run_sweep, sidecar_path, JobMeta, Sidecar, SweepAxis, SweepJob, SweepOutcome, SweepSpec};
