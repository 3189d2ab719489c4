use serde::{Deserialize, Serialize};

use crate::conv::{ConvGrads, ConvParams};
use crate::error::{mismatch, Result};

/// Hyper-parameters and moment accumulators for Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// One flat buffer per layer: weights followed by bias.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[ConvParams], lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.num_params()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

struct Hyper {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

#[inline]
fn update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], h: &Hyper) {
    for ((t, &g), (mi, vi)) in theta.iter_mut().zip(grad).zip(m.iter_mut().zip(v.iter_mut())) {
        *mi = h.beta1 * *mi + (1.0 - h.beta1) * g;
        *vi = h.beta2 * *vi + (1.0 - h.beta2) * g * g;
        let m_hat = *mi / h.bc1;
        let v_hat = *vi / h.bc2;
        *t -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
}

/// One bias-corrected Adam step over every layer, then re-zeroes masked taps.
pub fn adam_step(params: &mut [ConvParams], grads: &[ConvGrads], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(mismatch("adam_step layers", params.len(), grads.len()));
    }
    for (p, (g, m)) in params.iter().zip(grads.iter().zip(&state.m)) {
        if p.weight.shape() != g.weight.shape() || p.bias.len() != g.bias.len() {
            return Err(mismatch("adam_step grad", p.weight.shape(), g.weight.shape()));
        }
        if m.len() != p.num_params() {
            return Err(mismatch("adam_step state", p.num_params(), m.len()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let hp = Hyper {
        lr: state.lr,
        beta1: state.beta1,
        beta2: state.beta2,
        eps: state.eps,
        bc1: 1.0 - state.beta1.powi(t),
        bc2: 1.0 - state.beta2.powi(t),
    };
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let nw = p.weight.data().len();
        let (mw, mb) = m.split_at_mut(nw);
        let (vw, vb) = v.split_at_mut(nw);
        update(p.weight.data_mut(), g.weight.data(), mw, vw, &hp);
        update(&mut p.bias, &g.bias, mb, vb, &hp);
        p.apply_mask();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{render_mask, MaskShape};

    fn scalar_layer(w: f64) -> ConvParams {
        let mut p = ConvParams::new(1, 1, 1, 1, None).unwrap();
        p.weight.data_mut()[0] = w;
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut ps = vec![scalar_layer(0.25)];
        let gs = vec![ConvGrads::zeros_like(&ps[0])];
        let mut st = AdamState::new(&ps, 1e-4);
        for _ in 0..5 {
            adam_step(&mut ps, &gs, &mut st).unwrap();
        }
        assert_eq!(ps[0].weight.data()[0], 0.25);
        assert_eq!(ps[0].bias[0], 0.0);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn first_step_matches_recurrence() {
        let mut ps = vec![scalar_layer(0.0)];
        let mut gs = vec![ConvGrads::zeros_like(&ps[0])];
        gs[0].weight.data_mut()[0] = 1.0;
        let mut st = AdamState::new(&ps, 1e-4);
        adam_step(&mut ps, &gs, &mut st).unwrap();
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1 -> delta = 1e-4 / (1 + 1e-8)
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((ps[0].weight.data()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn masked_taps_stay_zero() {
        let mask = render_mask(&MaskShape::O, 3).unwrap();
        let mut p = ConvParams::new(1, 1, 3, 1, Some(mask)).unwrap();
        p.weight.data_mut().fill(0.5);
        p.apply_mask();
        let mut g = ConvGrads::zeros_like(&p);
        g.weight.data_mut().fill(3.0);
        let mut ps = vec![p];
        let mut st = AdamState::new(&ps, 1e-2);
        adam_step(&mut ps, &[g], &mut st).unwrap();
        assert_eq!(ps[0].weight.data()[4], 0.0);
        assert!(ps[0].weight.data()[0] < 0.5);
    }

    #[test]
    fn layer_count_mismatch_rejected() {
        let mut ps = vec![scalar_layer(0.0)];
        let mut st = AdamState::new(&ps, 1e-4);
        assert!(adam_step(&mut ps, &[], &mut st).is_err());
    }
}
