//! Experiment plans: a serializable schedule of SPRT points executed with
//! per-point substreams, producing a report whose bytes depend only on
//! `(plan, seed)` — never on worker count.

use serde::{Deserialize, Serialize};

use crate::mc::{run_trials, with_workers, MonteCarloEstimate, StreamKey};
use crate::models::{DistributionPair, Hypothesis, PairSpec};
use crate::sprt::{run_sprt, thresholds_probabilistic, Decision, SprtConfig};
use crate::{Error, Result};

/// Version tag written as the first comment line of every CSV file.
pub const SCHEMA: &str = "seqexp-v1";

/// Points whose truncation fraction exceeds this are flagged invalid.
const MAX_TRUNCATED_FRAC: f64 = 1e-4;

fn default_trials() -> u64 {
    100_000
}

fn default_seed() -> u64 {
    crate::DEFAULT_SEED
}

/// A reproducible simulation schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub pair: PairSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Default trials per point; points may override.
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Worker-count hint; results are identical for any value.
    #[serde(default)]
    pub workers: Option<usize>,
    pub points: Vec<PlanPoint>,
}

/// Raw SPRT boundaries; `max_steps` defaults to 50x the slower crossing
/// scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThresholds {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
}

/// Probabilistic-constraint threshold construction `(n, eps, eta)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilisticPoint {
    pub n: u64,
    pub eps: f64,
    #[serde(default)]
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisSelect {
    H0,
    H1,
    Both,
}

/// One experiment point: exactly one of `thresholds` or `probabilistic`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanPoint {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<RawThresholds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilistic: Option<ProbabilisticPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Which hypotheses to simulate; default both.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisSelect>,
    /// Report `P(T > tail_at)`; probabilistic points default to their n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_at: Option<u64>,
}

/// One output row: one point under one hypothesis. Only the error column
/// matching the simulated hypothesis is populated.
#[derive(Debug, Clone, Serialize)]
pub struct PointRow {
    pub point_id: String,
    pub boundary_or_n: f64,
    pub hypothesis: Hypothesis,
    pub p10_hat: Option<f64>,
    pub p10_stderr: Option<f64>,
    pub p01_hat: Option<f64>,
    pub p01_stderr: Option<f64>,
    pub et_hat: f64,
    pub et_stderr: f64,
    pub tail_hat: Option<f64>,
    pub truncated_frac: f64,
    pub invalid: bool,
}

/// Full plan output.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub schema: &'static str,
    pub seed: u64,
    pub pair: PairSpec,
    pub rows: Vec<PointRow>,
    pub warnings: Vec<String>,
    pub invalid_points: Vec<String>,
}

impl PlanReport {
    pub fn has_invalid_points(&self) -> bool {
        !self.invalid_points.is_empty()
    }
}

#[derive(Clone)]
struct RowAcc {
    wrong: u64,
    truncated: u64,
    sum_t: u64,
    sum_t2: u128,
    tail_count: u64,
}

/// Execute a plan. Per-point substreams are derived from
/// `(seed, point index, trial index)`, so output is identical for any
/// worker count.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanReport> {
    let pair = DistributionPair::new(plan.pair.clone())?;
    let ms = pair.moments();
    if plan.points.len() > 16_000 {
        return Err(Error::InvalidPlan("too many points (max 16000)".into()));
    }
    // resolve configs up front so config errors surface before simulation
    let mut resolved: Vec<(SprtConfig, f64, Option<u64>)> = Vec::new();
    for point in &plan.points {
        let (cfg, boundary_or_n, default_tail) = match (&point.thresholds, &point.probabilistic)
        {
            (Some(raw), None) => {
                let max_steps = raw.max_steps.unwrap_or_else(|| {
                    ((raw.beta / ms.d0).max(raw.alpha / ms.d1) * 50.0).ceil().max(1000.0) as u64
                });
                (
                    SprtConfig::new(raw.alpha, raw.beta, max_steps)?,
                    raw.beta,
                    None,
                )
            }
            (None, Some(p)) => (
                thresholds_probabilistic(&ms, p.n, p.eps, p.eta)?,
                p.n as f64,
                Some(p.n),
            ),
            _ => {
                return Err(Error::InvalidPlan(format!(
                    "point '{}' must set exactly one of `thresholds` or `probabilistic`",
                    point.id
                )))
            }
        };
        let tail = point.tail_at.or(default_tail);
        resolved.push((cfg, boundary_or_n, tail));
    }

    let rows = with_workers(plan.workers, || {
        let mut rows = Vec::new();
        for (idx, point) in plan.points.iter().enumerate() {
            let (cfg, boundary_or_n, tail) = resolved[idx];
            let trials = point.trials.unwrap_or(plan.trials);
            let selected: &[Hypothesis] = match point.hypotheses.unwrap_or(HypothesisSelect::Both)
            {
                HypothesisSelect::H0 => &[Hypothesis::H0],
                HypothesisSelect::H1 => &[Hypothesis::H1],
                HypothesisSelect::Both => &[Hypothesis::H0, Hypothesis::H1],
            };
            for &hyp in selected {
                let lane = match hyp {
                    Hypothesis::H0 => 0,
                    Hypothesis::H1 => 1,
                };
                let key = StreamKey::new(plan.seed, idx as u64).lane(lane);
                let acc = run_trials(
                    key,
                    trials,
                    || RowAcc {
                        wrong: 0,
                        truncated: 0,
                        sum_t: 0,
                        sum_t2: 0,
                        tail_count: 0,
                    },
                    |acc, _t, rng| {
                        let out = run_sprt(&pair, hyp, &cfg, rng);
                        acc.sum_t += out.stop_time;
                        acc.sum_t2 += u128::from(out.stop_time) * u128::from(out.stop_time);
                        if let Some(n) = tail {
                            if out.stop_time > n {
                                acc.tail_count += 1;
                            }
                        }
                        match (out.decision, hyp) {
                            (Decision::Truncated, _) => acc.truncated += 1,
                            (Decision::H1, Hypothesis::H0)
                            | (Decision::H0, Hypothesis::H1) => acc.wrong += 1,
                            _ => {}
                        }
                    },
                    |mut a, b| {
                        a.wrong += b.wrong;
                        a.truncated += b.truncated;
                        a.sum_t += b.sum_t;
                        a.sum_t2 += b.sum_t2;
                        a.tail_count += b.tail_count;
                        a
                    },
                );
                let decided = trials - acc.truncated;
                let err = MonteCarloEstimate::binomial(acc.wrong, decided.max(1));
                let et = MonteCarloEstimate::from_sums(acc.sum_t as f64, acc.sum_t2 as f64, trials);
                let truncated_frac = acc.truncated as f64 / trials as f64;
                let (p10, p01) = match hyp {
                    Hypothesis::H0 => (Some(err), None),
                    Hypothesis::H1 => (None, Some(err)),
                };
                rows.push(PointRow {
                    point_id: point.id.clone(),
                    boundary_or_n,
                    hypothesis: hyp,
                    p10_hat: p10.map(|e| e.mean),
                    p10_stderr: p10.map(|e| e.stderr),
                    p01_hat: p01.map(|e| e.mean),
                    p01_stderr: p01.map(|e| e.stderr),
                    et_hat: et.mean,
                    et_stderr: et.stderr,
                    tail_hat: tail.map(|_| acc.tail_count as f64 / trials as f64),
                    truncated_frac,
                    invalid: truncated_frac > MAX_TRUNCATED_FRAC,
                });
            }
        }
        rows
    });

    let mut warnings = Vec::new();
    let mut invalid_points = Vec::new();
    for row in &rows {
        if row.invalid {
            warnings.push(format!(
                "point '{}' under {}: truncation fraction {:.2e} exceeds {MAX_TRUNCATED_FRAC:e}",
                row.point_id, row.hypothesis, row.truncated_frac
            ));
            if !invalid_points.contains(&row.point_id) {
                invalid_points.push(row.point_id.clone());
            }
        }
    }
    Ok(PlanReport {
        schema: SCHEMA,
        seed: plan.seed,
        pair: plan.pair.clone(),
        rows,
        warnings,
        invalid_points,
    })
}

fn push_opt(line: &mut String, v: Option<f64>) {
    line.push(',');
    if let Some(v) = v {
        line.push_str(&format!("{v}"));
    }
}

/// Render a report in the fixed CSV schema (schema comment, header, one
/// line per row). Floats use shortest round-trip formatting, so the bytes
/// are a pure function of the values.
pub fn plan_report_csv(report: &PlanReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("#schema={SCHEMA}\n"));
    out.push_str(
        "point_id,boundary_or_n,hypothesis,p10_hat,p10_stderr,p01_hat,p01_stderr,et_hat,et_stderr,tail_hat,truncated_frac\n",
    );
    for row in &report.rows {
        let mut line = format!(
            "{},{},{}",
            row.point_id, row.boundary_or_n, row.hypothesis
        );
        push_opt(&mut line, row.p10_hat);
        push_opt(&mut line, row.p10_stderr);
        push_opt(&mut line, row.p01_hat);
        push_opt(&mut line, row.p01_stderr);
        line.push_str(&format!(",{},{}", row.et_hat, row.et_stderr));
        push_opt(&mut line, row.tail_hat);
        line.push_str(&format!(",{}", row.truncated_frac));
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(workers: Option<usize>) -> ExperimentPlan {
        ExperimentPlan {
            pair: PairSpec::Gaussian {
                theta0: 0.0,
                theta1: 1.0,
            },
            seed: 99,
            trials: 20_000,
            workers,
            points: vec![
                PlanPoint {
                    id: "b2".into(),
                    thresholds: Some(RawThresholds {
                        alpha: 2.0,
                        beta: 2.0,
                        max_steps: None,
                    }),
                    probabilistic: None,
                    trials: None,
                    hypotheses: None,
                    tail_at: Some(20),
                },
                PlanPoint {
                    id: "n100".into(),
                    thresholds: None,
                    probabilistic: Some(ProbabilisticPoint {
                        n: 100,
                        eps: 0.2,
                        eta: 0.05,
                    }),
                    trials: Some(10_000),
                    hypotheses: Some(HypothesisSelect::H0),
                    tail_at: None,
                },
            ],
        }
    }

    #[test]
    fn report_is_identical_across_worker_counts() {
        let a = run_plan(&small_plan(Some(1))).unwrap();
        let b = run_plan(&small_plan(Some(2))).unwrap();
        let c = run_plan(&small_plan(None)).unwrap();
        assert_eq!(plan_report_csv(&a), plan_report_csv(&b));
        assert_eq!(plan_report_csv(&a), plan_report_csv(&c));
    }

    #[test]
    fn rows_follow_the_point_layout() {
        let report = run_plan(&small_plan(None)).unwrap();
        // point 1 runs both hypotheses, point 2 only H0
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].hypothesis, Hypothesis::H0);
        assert!(report.rows[0].p10_hat.is_some() && report.rows[0].p01_hat.is_none());
        assert_eq!(report.rows[1].hypothesis, Hypothesis::H1);
        assert!(report.rows[1].p01_hat.is_some() && report.rows[1].p10_hat.is_none());
        // probabilistic point reports its n and a tail at n
        assert_eq!(report.rows[2].boundary_or_n, 100.0);
        assert!(report.rows[2].tail_hat.is_some());
        // loose boundaries at these trial counts never truncate
        assert!(report.invalid_points.is_empty());
    }

    #[test]
    fn empty_schedule_yields_header_only_csv() {
        let plan = ExperimentPlan {
            pair: PairSpec::Gaussian {
                theta0: 0.0,
                theta1: 1.0,
            },
            seed: 1,
            trials: 100,
            workers: None,
            points: vec![],
        };
        let report = run_plan(&plan).unwrap();
        assert!(report.rows.is_empty());
        let csv = plan_report_csv(&report);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("#schema=seqexp-v1\n"));
    }

    #[test]
    fn truncating_points_are_flagged() {
        let plan = ExperimentPlan {
            pair: PairSpec::Gaussian {
                theta0: 0.0,
                theta1: 1.0,
            },
            seed: 5,
            trials: 5_000,
            workers: None,
            points: vec![PlanPoint {
                id: "starved".into(),
                // cap of 4 steps cannot cross a boundary 6 nats out
                thresholds: Some(RawThresholds {
                    alpha: 6.0,
                    beta: 6.0,
                    max_steps: Some(4),
                }),
                probabilistic: None,
                trials: None,
                hypotheses: Some(HypothesisSelect::H0),
                tail_at: None,
            }],
        };
        let report = run_plan(&plan).unwrap();
        assert!(report.has_invalid_points());
        assert_eq!(report.invalid_points, vec!["starved".to_string()]);
        assert!(report.rows[0].invalid);
    }

    #[test]
    fn malformed_points_are_rejected() {
        let mut plan = small_plan(None);
        plan.points[0].probabilistic = Some(ProbabilisticPoint {
            n: 10,
            eps: 0.1,
            eta: 0.0,
        });
        assert!(matches!(run_plan(&plan), Err(Error::InvalidPlan(_))));
        let mut plan = small_plan(None);
        plan.points[0].thresholds = None;
        assert!(matches!(run_plan(&plan), Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn plan_json_rejects_unknown_fields() {
        let good = r#"{
            "pair": {"kind": "gaussian", "theta0": 0, "theta1": 1},
            "points": [{"id": "p", "thresholds": {"alpha": 2, "beta": 2}}]
        }"#;
        let plan: ExperimentPlan = serde_json::from_str(good).unwrap();
        assert_eq!(plan.seed, crate::DEFAULT_SEED);
        assert_eq!(plan.trials, 100_000);

        let bad = r#"{
            "pair": {"kind": "gaussian", "theta0": 0, "theta1": 1},
            "points": [],
            "surprise": true
        }"#;
        assert!(serde_json::from_str::<ExperimentPlan>(bad).is_err());
    }
}
