//! Central finite-difference verification of [`loss_gradients`].

use super::loss::{contrastive_loss, hinge_arguments, loss_gradients, ModelGrad, Pairing, Sample};
use crate::divergences::DistanceKind;
use crate::encoders::ModelParams;
use crate::error::Result;

/// Hinges closer than this to zero make an element unreliable to check.
pub const KINK_GUARD: f64 = 1e-3;

/// Denominator floor of the relative error. Central differences of an O(1)
/// loss with step 1e-5 carry rounding noise near 1e-10, so smaller
/// gradients are compared on an absolute scale instead.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

/// Summary of one comparison run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter index where the maximum occurred.
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub skipped: usize,
}

fn perturbed(params: &ModelParams, flat_index: usize, delta: f64) -> ModelParams {
    let mut p = params.clone();
    let mut offset = flat_index;
    for arr in p.arrays_mut() {
        if offset < arr.len() {
            arr[offset] += delta;
            break;
        }
        offset -= arr.len();
    }
    p
}

/// Compares `analytic` against central differences of the batch loss.
///
/// Relative error is `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`. An element is skipped
/// when a hinge it moves sits within [`KINK_GUARD`] of zero.
pub fn compare_gradients(
    params: &ModelParams,
    batch: &[Sample<'_>],
    pairing: &Pairing,
    kind: DistanceKind,
    margin: f64,
    step: f64,
    analytic: &ModelGrad,
) -> Result<GradCheckReport> {
    let base_hinges = hinge_arguments(params, batch, pairing, kind, margin)?;
    let analytic = analytic.flat();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped: 0,
    };
    for (idx, &a) in analytic.iter().enumerate() {
        let plus = perturbed(params, idx, step);
        let minus = perturbed(params, idx, -step);
        let h_plus = hinge_arguments(&plus, batch, pairing, kind, margin)?;
        let h_minus = hinge_arguments(&minus, batch, pairing, kind, margin)?;
        let near_kink = base_hinges
            .iter()
            .zip(h_plus.iter().zip(&h_minus))
            .any(|(h0, (hp, hm))| (hp != h0 || hm != h0) && h0.abs() < KINK_GUARD);
        if near_kink {
            report.skipped += 1;
            continue;
        }
        let numeric = (contrastive_loss(&plus, batch, pairing, kind, margin)?
            - contrastive_loss(&minus, batch, pairing, kind, margin)?)
            / (2.0 * step);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = err;
            report.worst_index = Some(idx);
        }
    }
    Ok(report)
}

/// Maximum relative error between the analytic gradient and central
/// differences with the given step.
pub fn gradient_check(
    params: &ModelParams,
    batch: &[Sample<'_>],
    pairing: &Pairing,
    kind: DistanceKind,
    margin: f64,
    step: f64,
) -> Result<f64> {
    let analytic = loss_gradients(params, batch, pairing, kind, margin)?;
    Ok(compare_gradients(params, batch, pairing, kind, margin, step, &analytic)?.max_rel_error)
}
