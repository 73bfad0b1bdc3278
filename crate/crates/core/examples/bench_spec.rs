//! Run a small experiment from a JSON spec and write CSV and JSON reports,
//! the same path the `bench` subcommand takes.

use sparsepca::bench::{emit_report, parse_specs, run_suite, ReportFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs = parse_specs(
        r#"{
            "label": "sing-small",
            "p": 256, "n": 200,
            "spikes": [20.0],
            "eigvec_sources": ["sing"],
            "replicates": 8,
            "methods": ["dtspca", {"itspca": {"threshold": "hard"}}, {"itspca": {"stop": "theoretical"}}],
            "base_seed": 7,
            "m_values": [1, "auto"]
        }"#,
    )?;
    let reports = run_suite(&specs)?;
    let dir = std::env::temp_dir().join("sparsepca-bench-example");
    std::fs::create_dir_all(&dir)?;
    emit_report(&reports, ReportFormat::Csv, &dir.join("report.csv"))?;
    emit_report(&reports, ReportFormat::Json, &dir.join("report.json"))?;
    print!("{}", std::fs::read_to_string(dir.join("report.csv"))?);
    println!("reports written to {}", dir.display());
    Ok(())
}
