//! Recomputing stored records from their parameter echo.

use crate::experiments::{fixed_target, run_experiment};
use crate::record::ResultRecord;
use crate::LabRunError;

const SIGMAS: f64 = thickening::stats::POLICY_SIGMAS;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayCheck {
    pub index: usize,
    pub experiment: String,
    pub metric: String,
    pub stored: f64,
    pub recomputed: f64,
    /// Allowed `|stored - recomputed|`; `Some(0.0)` demands identical bits
    /// and `None` means only the pass flags were compared.
    pub tolerance: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub checks: Vec<ReplayCheck>,
    /// Recomputed counterpart of every stored record, in input order.
    pub recomputed: Vec<ResultRecord>,
}

impl ReplayReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

fn canonical(r: &ResultRecord) -> String {
    let mut r = r.clone();
    r.wall_time_ms = None;
    r.to_line()
}

/// Reruns every distinct parameter set once and checks each stored record
/// against its recomputed counterpart.
///
/// With the stored seed the whole record (timing aside) must be identical.
/// With `seed` overriding it, estimates carrying a standard error must agree
/// within 4 joint standard errors when their target does not depend on the
/// seed, and otherwise the pass flags must agree.
pub fn replay(records: &[ResultRecord], seed: Option<u64>) -> Result<ReplayReport, LabRunError> {
    let mut runs: Vec<(String, Vec<ResultRecord>)> = Vec::new();
    let mut checks = Vec::with_capacity(records.len());
    let mut recomputed = Vec::with_capacity(records.len());
    for stored in records {
        let mut params = stored.params.clone();
        if stored.seed != params.root_seed || stored.experiment != params.experiment {
            return Err(LabRunError::Schema(format!(
                "record {} disagrees with its own parameter echo",
                stored.index
            )));
        }
        if let Some(s) = seed {
            params.root_seed = s;
        }
        let key = serde_json::to_string(&params).expect("config serializes");
        let pos = match runs.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                runs.push((key, run_experiment(&params)?));
                runs.len() - 1
            }
        };
        let fresh = runs[pos].1.get(stored.index).cloned().ok_or_else(|| {
            LabRunError::Schema(format!("record index {} beyond the experiment's output", stored.index))
        })?;
        let same_shape = fresh.experiment == stored.experiment
            && fresh.metric == stored.metric
            && fresh.family == stored.family
            && fresh.label == stored.label;
        let (tolerance, ok) = if seed.is_none() || seed == Some(stored.seed) {
            (Some(0.0), canonical(&fresh) == canonical(stored))
        } else {
            match (stored.stderr, fresh.stderr) {
                (Some(a), Some(b)) if fixed_target(stored) => {
                    let tol = SIGMAS * a.hypot(b);
                    (Some(tol), (fresh.estimate - stored.estimate).abs() <= tol)
                }
                _ => (None, fresh.pass == stored.pass),
            }
        };
        checks.push(ReplayCheck {
            index: stored.index,
            experiment: stored.experiment.clone(),
            metric: stored.metric.clone(),
            stored: stored.estimate,
            recomputed: fresh.estimate,
            tolerance,
            ok: ok && same_shape,
        });
        recomputed.push(fresh);
    }
    Ok(ReplayReport { checks, recomputed })
}
