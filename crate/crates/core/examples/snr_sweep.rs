//! Runs the harness programmatically: a small SNR sweep written as CSV.

use subaoa::harness::{cmd_sweep, CommonArgs};

fn main() {
    let dir = std::env::temp_dir().join("subaoa_sweep");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let config = dir.join("sweep.json");
    std::fs::write(
        &config,
        r#"{
  "variable": "snr_db",
  "values": [20, 10, 0],
  "trials_per_value": 3,
  "algorithms": ["subaoa", "music"],
  "base_scenario": {
    "paths": [{"aoa_deg": 30, "delay_s": 0.003, "gain": 1.0},
              {"aoa_deg": 150, "delay_s": 0.0085, "gain": 0.7}],
    "source": "white", "duration_s": 1.0, "rate_hz": 16000, "seed": 1
  }
}"#,
    )
    .expect("write config");
    let args = CommonArgs {
        config,
        out: dir.clone(),
        ..CommonArgs::default()
    };
    match cmd_sweep(&args) {
        Ok(rows) => {
            for r in rows.iter().filter(|r| r.trial == 0) {
                println!("snr {:>4} {:<7} k={} error {:.0}", r.variable_value, r.algorithm, r.k, r.error_deg);
            }
            println!("wrote {}", dir.join("sweep.csv").display());
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
