use super::{NnError, ParamSet};

/// Adam moment estimates, flattened in the parameter set's storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(num_params: usize) -> Self {
        Self::with_hyperparams(num_params, Self::DEFAULT_BETA1, Self::DEFAULT_BETA2, Self::DEFAULT_EPS)
    }

    pub fn with_hyperparams(num_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn num_params(&self) -> usize {
        self.m.len()
    }
}

/// One bias-corrected Adam update of `params` along `grads`.
pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64) -> Result<(), NnError> {
    let n = params.num_params();
    if grads.num_params() != n || state.num_params() != n {
        return Err(NnError::ShapeMismatch {
            params: n,
            grads: grads.num_params(),
            state: state.num_params(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let mut offset = 0;
    for (p, g) in params.slices_mut().zip(grads.slices()) {
        let m = &mut state.m[offset..offset + p.len()];
        let v = &mut state.v[offset..offset + p.len()];
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m).zip(v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        offset += p.len();
    }
    Ok(())
}
