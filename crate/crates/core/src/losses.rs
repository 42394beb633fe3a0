//! The five training loss terms and their weighted total.
//!
//! All losses take probabilities (already squashed) except the range loss,
//! which takes per-row two-class logits. Log arguments are clamped at
//! `EPS = 1e-7`; gradients use the clamped denominators so saturated cells
//! keep a bounded, nonzero training signal. BCE-family terms reduce by mean
//! over cells; the focal term sums over cells and divides by the lane count,
//! as its defining expression is written.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Clamp floor for log arguments.
pub const EPS: f64 = 1e-7;

/// Loss weights and focal exponents.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_multi: f64,
    pub lambda_hough: f64,
    pub lambda_line: f64,
    pub lambda_loc: f64,
    pub lambda_range: f64,
    /// Focal down-weighting exponent on the prediction.
    pub alpha: f64,
    /// Penalty-reduction exponent on the soft target.
    pub beta: f64,
    /// Positive-class weight of the location loss.
    pub positive_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_multi: 100.0,
            lambda_hough: 1000.0,
            lambda_line: 100.0,
            lambda_loc: 100.0,
            lambda_range: 10.0,
            alpha: 2.0,
            beta: 4.0,
            positive_weight: 10.0,
        }
    }
}

/// The five scalar terms entering the total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub multi: f64,
    pub hough: f64,
    pub line: f64,
    pub loc: f64,
    pub range: f64,
}

impl LossTerms {
    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("multi", self.multi),
            ("hough", self.hough),
            ("line", self.line),
            ("loc", self.loc),
            ("range", self.range),
        ]
    }
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

fn check_same_shape(pred: &Grid, target: &Grid) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    Ok(())
}

/// Mean binary cross-entropy between a probability grid and a binary target.
pub fn multiscale_bce(pred: &Grid, target: &Grid) -> Result<f64> {
    Ok(multiscale_bce_with_grad(pred, target)?.0)
}

/// BCE value and its gradient with respect to the prediction.
pub fn multiscale_bce_with_grad(pred: &Grid, target: &Grid) -> Result<(f64, Grid)> {
    check_same_shape(pred, target)?;
    let m = pred.len() as f64;
    let mut grad = Grid::zeros(pred.height(), pred.width());
    let mut sum = 0.0;
    for (i, (&p, &y)) in pred.data().iter().zip(target.data()).enumerate() {
        let p = clamp_prob(p as f64);
        let y = y as f64;
        sum -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.data_mut()[i] = ((-y / p + (1.0 - y) / (1.0 - p)) / m) as f32;
    }
    Ok((sum / m, grad))
}

/// Binary cross-entropy constraining the RHT-decoded line map. Same contract
/// as [`multiscale_bce`], applied to the line-map prediction and the
/// rasterized target from `render_line_map`.
pub fn rht_line_loss(pred_line_map: &Grid, target_line_map: &Grid) -> Result<f64> {
    multiscale_bce(pred_line_map, target_line_map)
}

pub fn rht_line_loss_with_grad(pred: &Grid, target: &Grid) -> Result<(f64, Grid)> {
    multiscale_bce_with_grad(pred, target)
}

/// Penalty-reduced focal loss over the Hough map.
///
/// Cells where the target is exactly 1 use `(1-p)^alpha * log(p)`; all other
/// cells use `(1-t)^beta * p^alpha * log(1-p)`. The sum over cells is negated
/// and divided by the lane count `n`.
pub fn hough_focal(pred: &Grid, target: &Grid, n: usize, alpha: f64, beta: f64) -> Result<f64> {
    Ok(hough_focal_with_grad(pred, target, n, alpha, beta)?.0)
}

pub fn hough_focal_with_grad(
    pred: &Grid,
    target: &Grid,
    n: usize,
    alpha: f64,
    beta: f64,
) -> Result<(f64, Grid)> {
    check_same_shape(pred, target)?;
    if n == 0 {
        return Err(Error::InvalidConfig(
            "focal loss needs at least one lane; zero-lane images skip this term".into(),
        ));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = Grid::zeros(pred.height(), pred.width());
    let mut sum = 0.0;
    for (i, (&p_raw, &t)) in pred.data().iter().zip(target.data()).enumerate() {
        let p = clamp_prob(p_raw as f64);
        let t = t as f64;
        if t == 1.0 {
            let w = (1.0 - p).powf(alpha);
            sum += w * p.ln();
            let d = -alpha * (1.0 - p).powf(alpha - 1.0) * p.ln() + w / p;
            grad.data_mut()[i] = (-inv_n * d) as f32;
        } else {
            let tw = (1.0 - t).powf(beta);
            sum += tw * p.powf(alpha) * (1.0 - p).ln();
            let d = tw * (alpha * p.powf(alpha - 1.0) * (1.0 - p).ln() - p.powf(alpha) / (1.0 - p));
            grad.data_mut()[i] = (-inv_n * d) as f32;
        }
    }
    Ok((-inv_n * sum, grad))
}

/// Position-weighted binary cross-entropy over all per-instance location maps,
/// concatenated before reduction.
pub fn location_loss(preds: &[Grid], targets: &[Grid], positive_weight: f64) -> Result<f64> {
    Ok(location_loss_with_grad(preds, targets, positive_weight)?.0)
}

pub fn location_loss_with_grad(
    preds: &[Grid],
    targets: &[Grid],
    positive_weight: f64,
) -> Result<(f64, Vec<Grid>)> {
    if preds.len() != targets.len() {
        return Err(Error::shape(
            format!("{} instances", targets.len()),
            format!("{} instances", preds.len()),
        ));
    }
    let total_cells: usize = preds.iter().map(Grid::len).sum();
    if total_cells == 0 {
        return Ok((0.0, Vec::new()));
    }
    let m = total_cells as f64;
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (pred, target) in preds.iter().zip(targets) {
        check_same_shape(pred, target)?;
        let mut grad = Grid::zeros(pred.height(), pred.width());
        for (i, (&p, &y)) in pred.data().iter().zip(target.data()).enumerate() {
            let p = clamp_prob(p as f64);
            let y = y as f64;
            sum -= positive_weight * y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            grad.data_mut()[i] = ((-positive_weight * y / p + (1.0 - y) / (1.0 - p)) / m) as f32;
        }
        grads.push(grad);
    }
    Ok((sum / m, grads))
}

/// Mean two-class softmax cross-entropy over rows of the vertical-range head.
/// `logits[i] = [off, on]`; `targets[i]` marks rows the lane passes through.
pub fn range_loss(logits: &[[f32; 2]], targets: &[bool]) -> Result<f64> {
    Ok(range_loss_with_grad(logits, targets)?.0)
}

pub fn range_loss_with_grad(logits: &[[f32; 2]], targets: &[bool]) -> Result<(f64, Vec<[f32; 2]>)> {
    if logits.len() != targets.len() {
        return Err(Error::shape(
            format!("{} rows", targets.len()),
            format!("{} rows", logits.len()),
        ));
    }
    if logits.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let m = logits.len() as f64;
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for (l, &t) in logits.iter().zip(targets) {
        let (a, b) = (l[0] as f64, l[1] as f64);
        let hi = a.max(b);
        let lse = hi + ((a - hi).exp() + (b - hi).exp()).ln();
        let correct = if t { b } else { a };
        sum += lse - correct;
        let pa = (a - lse).exp();
        let pb = (b - lse).exp();
        let (ga, gb) = if t { (pa, pb - 1.0) } else { (pa - 1.0, pb) };
        grads.push([(ga / m) as f32, (gb / m) as f32]);
    }
    Ok((sum / m, grads))
}

/// Weighted sum of the five terms. A non-finite term poisons the total and is
/// reported by name.
pub fn total_loss(terms: &LossTerms, weights: &LossWeights) -> Result<f64> {
    for (name, v) in terms.named() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                term: name,
                value: v,
            });
        }
    }
    Ok(weights.lambda_multi * terms.multi
        + weights.lambda_hough * terms.hough
        + weights.lambda_line * terms.line
        + weights.lambda_loc * terms.loc
        + weights.lambda_range * terms.range)
}
