use log::debug;

use super::driver::{run_simulation, RunConfig, RunOutcome};
use super::QuenchlabError;

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionTrial {
    pub a: f64,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalLength {
    /// Midpoint of the final bracket.
    pub a_star: f64,
    /// Largest length seen not to quench.
    pub lo: f64,
    /// Smallest length seen to quench.
    pub hi: f64,
    pub trials: Vec<BisectionTrial>,
}

fn trial(template: &RunConfig, a: f64) -> Result<RunOutcome, QuenchlabError> {
    let run = run_simulation(&template.with_length(a))?;
    if let RunOutcome::NumericalFailure(message) = &run.outcome {
        return Err(QuenchlabError::NumericalFailure {
            context: format!("a = {a}"),
            message: message.clone(),
        });
    }
    Ok(run.outcome)
}

/// Bisects on `a` with the template's interval count `L` held fixed (so `h`
/// scales with `a`). A run that reaches the horizon without quenching counts as
/// non-quenching.
pub fn critical_length_search(
    template: &RunConfig,
    a_lo: f64,
    a_hi: f64,
    tol: f64,
) -> Result<CriticalLength, QuenchlabError> {
    if !(a_lo > 0.0 && a_lo < a_hi && a_hi.is_finite()) {
        return Err(QuenchlabError::InvalidArgument(format!(
            "need 0 < a_lo < a_hi, got a_lo = {a_lo}, a_hi = {a_hi}"
        )));
    }
    if !(tol > 0.0) {
        return Err(QuenchlabError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }

    let (lo_out, hi_out) = rayon::join(|| trial(template, a_lo), || trial(template, a_hi));
    let (lo_out, hi_out) = (lo_out?, hi_out?);
    if lo_out.is_quenched() || !hi_out.is_quenched() {
        return Err(QuenchlabError::InvalidBracket {
            a_lo,
            lo: lo_out,
            a_hi,
            hi: hi_out,
        });
    }

    let mut trials = vec![
        BisectionTrial {
            a: a_lo,
            outcome: lo_out,
        },
        BisectionTrial {
            a: a_hi,
            outcome: hi_out,
        },
    ];
    let (mut lo, mut hi) = (a_lo, a_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let outcome = trial(template, mid)?;
        debug!("critical length: a = {mid:.8} -> {}", outcome.label());
        if outcome.is_quenched() {
            hi = mid;
        } else {
            lo = mid;
        }
        trials.push(BisectionTrial { a: mid, outcome });
    }

    Ok(CriticalLength {
        a_star: 0.5 * (lo + hi),
        lo,
        hi,
        trials,
    })
}
