//! Drive the batch layer from code instead of the CLI: load a config,
//! override a field, run a command and read back its checks.
//!
//! cargo run --example run_experiment -- [command]

use hardy_lab::experiments::{exit_code, run, Command, ExperimentConfig};

fn main() -> hardy_lab::Result<()> {
    let command: Command = std::env::args().nth(1).as_deref().unwrap_or("equivalence").parse()?;
    let mut config = ExperimentConfig::from_json_str(
        r#"{
            "grid": {"sizes": [64]},
            "coefficients": {"kind": "random", "lambda": 0.5, "Lambda": 2.0, "seed": 1},
            "corpus": {"count": 8, "kind": "mixed"}
        }"#,
        "inline",
    )?;
    config.output = std::env::temp_dir().join("hardy-lab-example");

    let result = run(command, &config);
    if let Ok(outcome) = &result {
        for check in &outcome.checks {
            println!("{}", check.line());
        }
        println!("wrote {:?} to {}", outcome.files, outcome.output_dir.display());
    }
    println!("exit code would be {}", exit_code(&result));
    result.map(|_| ())
}
