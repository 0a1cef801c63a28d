use serde::Serialize;

use super::encode::EncodedBatch;
use super::network::{Model, PassKind};
use crate::error::Result;
use crate::reward::RewardWeights;

/// Tensors with a gradient norm below this are judged on absolute error
/// (`1e-4 * floor`), since central differences carry ~1e-10 of roundoff.
const NORM_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    /// Largest per-tensor `|analytic - numeric| / max(|analytic|, |numeric|, 1e-4)`
    /// (Euclidean norms over the tensor). The floor keeps tensors whose true
    /// gradient is zero, such as attention key biases, from dividing noise by
    /// noise.
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub per_tensor: Vec<(String, f64)>,
    pub parameters_checked: usize,
}

/// Compares analytic gradients against central differences with the given
/// step, perturbing every parameter.
pub fn gradient_check(
    model: &Model,
    batch: &EncodedBatch,
    kind: PassKind,
    alpha: f64,
    weights: &RewardWeights,
    step: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_gradients(batch, kind, alpha, weights)?;
    let analytic = analytic.tensors();
    let mut probe = model.clone();
    let mut per_tensor = Vec::with_capacity(analytic.len());
    let mut checked = 0;
    for (ti, (name, grad)) in analytic.iter().enumerate() {
        let mut diff_sq = 0.0;
        let mut a_sq = 0.0;
        let mut n_sq = 0.0;
        for (i, &a) in grad.iter().enumerate() {
            let original = probe.params.tensors_mut()[ti][i];
            probe.params.tensors_mut()[ti][i] = original + step;
            let up = probe.loss(batch, kind, alpha, weights)?.total;
            probe.params.tensors_mut()[ti][i] = original - step;
            let down = probe.loss(batch, kind, alpha, weights)?.total;
            probe.params.tensors_mut()[ti][i] = original;
            let numeric = (up - down) / (2.0 * step);
            diff_sq += (a - numeric).powi(2);
            a_sq += a * a;
            n_sq += numeric * numeric;
            checked += 1;
        }
        let scale = a_sq.sqrt().max(n_sq.sqrt()).max(NORM_FLOOR);
        let rel = diff_sq.sqrt() / scale;
        per_tensor.push((name.clone(), rel));
    }
    let (worst_tensor, max_rel_error) =
        per_tensor.iter().cloned().fold(
            (String::new(), 0.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    Ok(GradCheckReport {
        max_rel_error,
        worst_tensor,
        per_tensor,
        parameters_checked: checked,
    })
}
