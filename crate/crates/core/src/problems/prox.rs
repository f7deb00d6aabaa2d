//! Closed-form one-dimensional block updates.

use crate::error::{Error, Result};

/// `sgn(z) * max(|z| - k, 0)`.
pub fn soft_threshold(z: f64, k: f64) -> f64 {
    z.signum() * (z.abs() - k).max(0.0)
}

/// Minimiser `t*` of `b t + (c/2) t^2 + lambda |d + t|`.
///
/// With `zeta = d - b/c` the solution is `sgn(zeta)(|zeta| - lambda/c)_+ - d`.
pub fn soft_threshold_update(b: f64, c: f64, d: f64, lambda: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Curvature(c));
    }
    if lambda < 0.0 {
        return Err(Error::Parameter(format!("lambda = {lambda} is negative")));
    }
    let zeta = d - b / c;
    Ok(soft_threshold(zeta, lambda / c) - d)
}

/// Step `h` for a box-constrained dual coordinate, keeping `xi + h` in `[0, 1]`.
///
/// The unconstrained minimiser is `lambda m (1 - grad_inner) / (beta ||A_i:||^2)`,
/// clipped to `[-xi, 1 - xi]`. `grad_inner` is `y_i A_i: g`.
pub fn clip_update(
    xi: f64,
    grad_inner: f64,
    row_norm_sq: f64,
    lambda_reg: f64,
    m: usize,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Curvature(beta));
    }
    if !(row_norm_sq > 0.0) {
        return Err(Error::DegenerateRow { row: usize::MAX });
    }
    let step = lambda_reg * m as f64 * (1.0 - grad_inner) / (beta * row_norm_sq);
    Ok(step.clamp(-xi, 1.0 - xi))
}
