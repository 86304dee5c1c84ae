//! Run the nested full-model optimizer and the progressive optimizer on the
//! same problem through a JSON configuration, then print the report table.
//!
//! Pass an output directory as the first argument to keep the artifacts.

use progrom::cli::{report, run, RunConfig};

fn main() -> progrom::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("progrom-compare").display().to_string());
    let config = RunConfig::from_json(&format!(
        r#"{{
            "model": {{"kind": "burgers", "n": 256, "n_params": 4}},
            "mode": "compare",
            "seed": 7,
            "output_dir": {out:?},
            "progressive": {{"tau": 0.1, "delta": 1e-4}}
        }}"#
    ))?;
    let summary = run(&config)?;
    print!("{}", report(&[config.output_dir.clone()])?);
    if let Some(ratio) = summary.hdm_evaluation_ratio {
        println!("full-model solve ratio (progressive / nested): {ratio:.3}");
    }
    Ok(())
}
