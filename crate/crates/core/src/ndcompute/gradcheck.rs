//! Central finite-difference validation of tape gradients.

use serde::Serialize;

use super::{Fault, NodeId, ParamSet, Tape};
use crate::error::Result;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors, so that entries whose true gradient
/// is near zero are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic parameter gradients of the scalar built by `build`
/// against central differences with step [`FD_STEP`].
pub fn grad_check<F>(params: &ParamSet, build: F, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamSet) -> Result<NodeId>,
{
    grad_check_with_fault(params, build, tolerance, Fault::None)
}

/// Same as [`grad_check`], but the analytic pass runs on a tape with the
/// given backward fault injected.
pub fn grad_check_with_fault<F>(
    params: &ParamSet,
    build: F,
    tolerance: f64,
    fault: Fault,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamSet) -> Result<NodeId>,
{
    let mut tape = Tape::with_fault(fault);
    let loss = build(&mut tape, params)?;
    let analytic = tape.backward(loss)?.for_params(&tape, params);

    let eval = |p: &ParamSet| -> Result<f64> {
        let mut t = Tape::new();
        let l = build(&mut t, p)?;
        Ok(t.value(l).item())
    };

    let mut probe = params.clone();
    let mut checks = Vec::with_capacity(params.len());
    for id in params.ids() {
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        let n = params.get(id).len();
        for k in 0..n {
            let orig = params.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + FD_STEP;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig - FD_STEP;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[id.index()].data()[k];
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max((a - numeric).abs());
        }
        checks.push(ParamCheck {
            name: params.name(id).to_string(),
            entries: n,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        tolerance,
        params: checks,
        max_rel_error,
    })
}
