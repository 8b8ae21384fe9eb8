//! Central finite-difference verification of analytic gradients.

use crate::neural::params::{Gradients, ParamId, ParamStore};

/// Outcome of a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance
    }
}

/// Relative error with a floor on the denominator, so that coordinates whose
/// true gradient is zero are judged on absolute error.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / scale
}

/// Compare `analytic` against `(f(p + eps) - f(p - eps)) / 2 eps` for every
/// coordinate of the listed tensors (all non-frozen tensors when `only` is
/// empty).
pub fn check_gradients<F>(
    params: &ParamStore,
    analytic: &Gradients,
    only: &[ParamId],
    eps: f64,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut work = params.clone();
    let ids: Vec<ParamId> = if only.is_empty() {
        params.ids().filter(|&id| !params.is_frozen(id)).collect()
    } else {
        only.to_vec()
    };
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for id in ids {
        for k in 0..params.get(id).len() {
            let original = work.get(id).data[k];
            work.get_mut(id).data[k] = original + eps;
            let plus = loss(&work);
            work.get_mut(id).data[k] = original - eps;
            let minus = loss(&work);
            work.get_mut(id).data[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic.get(id).data[k], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((params.name(id).to_owned(), k));
                }
            }
        }
    }
    report
}
