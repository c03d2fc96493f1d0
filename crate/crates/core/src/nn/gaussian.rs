//! Diagonal Gaussian with state-independent log standard deviations.

/// `0.5 * ln(2 pi)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of `action` under `N(mean, diag(exp(log_std))^2)` and the
/// distribution's entropy.
pub fn gaussian_logprob_entropy(mean: &[f64], log_std: &[f64], action: &[f64]) -> (f64, f64) {
    debug_assert!(mean.len() == log_std.len() && mean.len() == action.len());
    let mut logprob = 0.0;
    for ((&m, &ls), &a) in mean.iter().zip(log_std).zip(action) {
        let z = (a - m) * (-ls).exp();
        logprob += -0.5 * z * z - ls - HALF_LN_2PI;
    }
    (logprob, entropy(log_std))
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + HALF_LN_2PI + ls).sum()
}

/// Partial derivatives of the log-density with respect to `mean` and
/// `log_std`, written into the output slices.
pub fn logprob_grad(mean: &[f64], log_std: &[f64], action: &[f64], d_mean: &mut [f64], d_log_std: &mut [f64]) {
    for i in 0..mean.len() {
        let inv_std = (-log_std[i]).exp();
        let z = (action[i] - mean[i]) * inv_std;
        d_mean[i] = z * inv_std;
        d_log_std[i] = z * z - 1.0;
    }
}
