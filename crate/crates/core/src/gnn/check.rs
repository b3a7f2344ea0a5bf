use ndarray::Array2;

use super::{loss_mse, Batch, EdgeModel};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub checked: usize,
    /// Parameters skipped because a ReLU changed sign inside `[theta - h, theta + h]`.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Checks every parameter of `model` on one batch with step `h`.
pub fn gradient_check<M: EdgeModel>(model: &M, batch: &Batch, targets: &Array2<f64>, h: f64) -> GradientCheck {
    let (_, grads) = model.loss_and_gradients(batch, targets);
    let pattern = model.relu_pattern(batch);
    let mut probe = model.clone();
    let mut out = GradientCheck {
        checked: 0,
        skipped_kinks: 0,
        max_rel_error: 0.0,
    };
    let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    for (t, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + h;
            let up = loss_mse(&probe.forward_batch(batch), targets);
            let up_pattern = probe.relu_pattern(batch);
            probe.params_mut()[t][i] = orig - h;
            let down = loss_mse(&probe.forward_batch(batch), targets);
            let down_pattern = probe.relu_pattern(batch);
            probe.params_mut()[t][i] = orig;
            if up_pattern != pattern || down_pattern != pattern {
                out.skipped_kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            out.max_rel_error = out.max_rel_error.max(relative_error(grads[t][i], numeric));
            out.checked += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
    }
}
