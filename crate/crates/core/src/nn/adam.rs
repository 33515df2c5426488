use super::{Mlp, MlpGrads, NnError};

/// Adam optimizer state for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zeroed moments shaped like the parameters of `net`.
    pub fn for_net(net: &Mlp, alpha: f64) -> Self {
        let shapes: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        Self::with_shapes(&shapes, alpha)
    }

    pub fn with_shapes(lens: &[usize], alpha: f64) -> Self {
        Self {
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam descent step over parameter blocks.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), NnError> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(NnError::Shape(format!(
                "{} parameter blocks, {} gradient blocks, {} moment blocks",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(NnError::Shape("parameter and gradient block sizes differ".into()));
            }
        }
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(NnError::NonFinite("gradient"));
        }
        self.t += 1;
        let t = self.t as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    /// Applies `grads` to `net`.
    pub fn step_net(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<(), NnError> {
        let g = grads.slices();
        let mut p = net.param_slices_mut();
        self.step(&mut p, &g)
    }
}
