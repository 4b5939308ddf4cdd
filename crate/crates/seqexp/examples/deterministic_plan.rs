//! Runs a small fixed experiment plan and prints its CSV report.
//!
//! The bytes printed here are identical for any worker count and for the
//! sequential (`--no-default-features`) build:
//!
//! ```text
//! cargo run --example deterministic_plan
//! cargo run --example deterministic_plan --no-default-features
//! ```

use seqexp::harness::{plan_report_csv, run_plan, ExperimentPlan};

fn main() {
    let plan: ExperimentPlan = serde_json::from_str(
        r#"{
            "pair": {"kind": "exponential", "gamma0": 1.0, "gamma1": 2.0},
            "seed": 20200913,
            "trials": 30000,
            "points": [
                {"id": "b3", "thresholds": {"alpha": 3.0, "beta": 3.0}, "tail_at": 40},
                {"id": "b5", "thresholds": {"alpha": 5.0, "beta": 5.0}},
                {"id": "n150", "probabilistic": {"n": 150, "eps": 0.25, "eta": 0.05}}
            ]
        }"#,
    )
    .expect("plan parses");
    let report = run_plan(&plan).expect("plan runs");
    print!("{}", plan_report_csv(&report));
}
