use rayon::prelude::*;

use super::driver::{run_simulation, RunConfig, RunOutcome, SimulationRun};
use super::QuenchlabError;
use crate::linalg::two_norm;
use crate::stepping::StepControls;

/// Steps kept between the automatic evaluation time and the earliest quench.
const AUTO_MARGIN_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalTime {
    /// `AUTO_MARGIN_STEPS` steps before the earliest quench of the three runs.
    Auto,
    At(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOrders {
    /// Estimated order for `v`.
    pub f: f64,
    /// Estimated order for `v_t`.
    pub g: f64,
    pub t_eval: f64,
    pub step: usize,
    pub tau: f64,
    pub intervals: [usize; 3],
    /// Quench times of the unconstrained runs (`Auto` only).
    pub quench_times: Vec<Option<f64>>,
    /// `(||v_h - v_h/2||, ||v_h/2 - v_h/4||)`.
    pub v_diffs: (f64, f64),
    pub vt_diffs: (f64, f64),
}

/// Interior values of a grid refined by `factor`, sampled at the interior
/// nodes of the coarse grid.
pub fn restrict_to_coarse(fine: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1 && (fine.len() + 1) % factor == 0, "grids are not nested");
    let coarse = (fine.len() + 1) / factor - 1;
    (1..=coarse).map(|k| fine[factor * k - 1]).collect()
}

/// `log2(||c - m|| / ||m - f||)` for three solutions already sampled on the
/// same nodes.
pub fn milne_order(coarse: &[f64], mid: &[f64], fine: &[f64]) -> f64 {
    let (num, den) = milne_diffs(coarse, mid, fine);
    (num / den).log2()
}

fn milne_diffs(coarse: &[f64], mid: &[f64], fine: &[f64]) -> (f64, f64) {
    let d1: Vec<f64> = coarse.iter().zip(mid).map(|(c, m)| c - m).collect();
    let d2: Vec<f64> = mid.iter().zip(fine).map(|(m, f)| m - f).collect();
    (two_norm(&d1), two_norm(&d2))
}

fn run_all(configs: &[RunConfig]) -> Result<Vec<SimulationRun>, QuenchlabError> {
    configs
        .par_iter()
        .map(|c| {
            let run = run_simulation(c)?;
            if let RunOutcome::NumericalFailure(message) = &run.outcome {
                return Err(QuenchlabError::NumericalFailure {
                    context: format!("L = {}", c.intervals),
                    message: message.clone(),
                });
            }
            Ok(run)
        })
        .collect()
}

/// Spatial orders from grids `h0`, `h0/2`, `h0/4` with the template's τ0 held
/// fixed (no adaptivity, no caps), all compared at the same step index.
pub fn convergence_order(
    template: &RunConfig,
    h0: f64,
    eval: EvalTime,
) -> Result<ConvergenceOrders, QuenchlabError> {
    let a = template.spec.a;
    let ratio = a / h0;
    let l0 = ratio.round();
    if !(h0 > 0.0) || l0 < 2.0 || (ratio - l0).abs() > 1e-8 * ratio {
        return Err(QuenchlabError::InvalidArgument(format!(
            "h0 = {h0} must divide a = {a} into at least two intervals"
        )));
    }
    let l0 = l0 as usize;
    let tau = template.controls.tau0;
    let configs: Vec<RunConfig> = [l0, 2 * l0, 4 * l0]
        .iter()
        .map(|&l| {
            let mut c = template.clone();
            c.intervals = l;
            c.controls = StepControls::fixed(tau);
            c.snapshot_policy = super::SnapshotPolicy::None;
            c
        })
        .collect();

    let (step, quench_times) = match eval {
        EvalTime::At(t) => {
            let m = (t / tau).round();
            if !(m >= 1.0) || !m.is_finite() {
                return Err(QuenchlabError::InvalidArgument(format!(
                    "evaluation time {t} is shorter than one step"
                )));
            }
            (m as usize, Vec::new())
        }
        EvalTime::Auto => {
            let runs = run_all(&configs)?;
            let steps: Vec<Option<usize>> =
                runs.iter().map(|r| r.outcome.quench().map(|q| q.step)).collect();
            let times: Vec<Option<f64>> =
                runs.iter().map(|r| r.outcome.quench().map(|q| q.t_quench)).collect();
            let Some(first) = steps.iter().copied().collect::<Option<Vec<_>>>() else {
                return Err(QuenchlabError::InvalidArgument(
                    "automatic evaluation time needs all three runs to quench".into(),
                ));
            };
            let min = first.into_iter().min().unwrap_or(0);
            if min <= AUTO_MARGIN_STEPS + 1 {
                return Err(QuenchlabError::EvaluationTime {
                    t_eval: 0.0,
                    quench_times: times,
                });
            }
            (min - AUTO_MARGIN_STEPS, times)
        }
    };

    let capped: Vec<RunConfig> = configs
        .into_iter()
        .map(|mut c| {
            c.max_steps = Some(step);
            c.t_max = c.t_max.max(2.0 * step as f64 * tau);
            c
        })
        .collect();
    let runs = run_all(&capped)?;
    let t_eval = runs[0].final_state.t;
    if runs.iter().any(|r| r.final_state.n != step) {
        return Err(QuenchlabError::EvaluationTime {
            t_eval: step as f64 * tau,
            quench_times: runs
                .iter()
                .map(|r| r.outcome.quench().map(|q| q.t_quench))
                .collect(),
        });
    }

    let v: Vec<Vec<f64>> = runs
        .iter()
        .zip([1, 2, 4])
        .map(|(r, f)| restrict_to_coarse(&r.final_state.v, f))
        .collect();
    let vt: Vec<Vec<f64>> = runs
        .iter()
        .zip([1, 2, 4])
        .map(|(r, f)| {
            let rate = r.final_state.rate().expect("at least one step");
            restrict_to_coarse(&rate, f)
        })
        .collect();
    let v_diffs = milne_diffs(&v[0], &v[1], &v[2]);
    let vt_diffs = milne_diffs(&vt[0], &vt[1], &vt[2]);

    Ok(ConvergenceOrders {
        f: (v_diffs.0 / v_diffs.1).log2(),
        g: (vt_diffs.0 / vt_diffs.1).log2(),
        t_eval,
        step,
        tau,
        intervals: [l0, 2 * l0, 4 * l0],
        quench_times,
        v_diffs,
        vt_diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::ProblemSpec;

    #[test]
    fn restriction_indices() {
        // Coarse L = 4 has interior nodes 1..3; the L = 8 grid has 7 unknowns.
        let mid: Vec<f64> = (1..=7).map(|k| k as f64).collect();
        assert_eq!(restrict_to_coarse(&mid, 2), vec![2.0, 4.0, 6.0]);
        let fine: Vec<f64> = (1..=15).map(|k| k as f64).collect();
        assert_eq!(restrict_to_coarse(&fine, 4), vec![4.0, 8.0, 12.0]);
        assert_eq!(restrict_to_coarse(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }

    #[test]
    fn milne_of_geometric_errors() {
        let exact = [1.0, 2.0, 3.0];
        let with = |e: f64| exact.iter().map(|x| x + e).collect::<Vec<_>>();
        let p = milne_order(&with(0.08), &with(0.02), &with(0.005));
        assert!((p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_dividing_h0() {
        let c = RunConfig::new(ProblemSpec::kawarada(2.0, 1.0, 1.0, 0.0));
        assert!(convergence_order(&c, 0.3, EvalTime::Auto).is_err());
    }

    #[test]
    fn evaluation_after_quench_is_an_error() {
        let mut c = RunConfig::new(ProblemSpec::kawarada(2.0, 1.0, std::f64::consts::PI, 0.0));
        c.controls.tau0 = 1e-3;
        let err = convergence_order(&c, std::f64::consts::PI / 10.0, EvalTime::At(5.0)).unwrap_err();
        let QuenchlabError::EvaluationTime { quench_times, .. } = err else {
            panic!("expected evaluation-time error, got {err}");
        };
        assert_eq!(quench_times.len(), 3);
        assert!(quench_times.iter().all(|t| t.is_some()));
    }
}
