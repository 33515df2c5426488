use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{Matrix, NnError};

/// Largest f64 strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    /// Saturating heads are clamped so their outputs stay strictly inside
    /// the open interval even where the exact value rounds to the bound.
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh().clamp(-BELOW_ONE, BELOW_ONE),
            Activation::Sigmoid => {
                let y = if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                };
                y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
            }
            Activation::Linear => z,
        }
    }

    /// Derivative given pre-activation `z` and output `y`.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }

    /// Open output interval, when bounded.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            Activation::Tanh => Some((-1.0, 1.0)),
            Activation::Sigmoid => Some((0.0, 1.0)),
            Activation::Relu | Activation::Linear => None,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Linear => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            3 => Activation::Linear,
            _ => return None,
        })
    }
}

/// Activation of a layer: one kind for every unit, or one per unit (used by
/// the actor head, which squashes its two outputs differently).
#[derive(Clone, Debug, PartialEq)]
pub enum Activations {
    Uniform(Activation),
    PerUnit(Vec<Activation>),
}

impl Activations {
    pub fn get(&self, unit: usize) -> Activation {
        match self {
            Activations::Uniform(a) => *a,
            Activations::PerUnit(v) => v[unit],
        }
    }
}

impl From<Activation> for Activations {
    fn from(a: Activation) -> Self {
        Activations::Uniform(a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// out × in
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activations,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activations) -> Result<Self, NnError> {
        if bias.len() != weights.rows() {
            return Err(NnError::Shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        if let Activations::PerUnit(v) = &activation {
            if v.len() != weights.rows() {
                return Err(NnError::Shape(format!(
                    "{} per-unit activations for {} outputs",
                    v.len(),
                    weights.rows()
                )));
            }
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

/// Where an auxiliary input joins the network: its columns are appended to
/// the input of layer `layer`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Merge {
    pub layer: usize,
    pub width: usize,
}

/// Layer widths and activations, used to initialize an [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpShape {
    pub input: usize,
    pub layers: Vec<(usize, Activations)>,
    pub merge: Option<Merge>,
}

impl MlpShape {
    /// Hidden layers of `hidden_act`, then an output layer of `output_act`.
    pub fn new(
        input: usize,
        hidden: &[usize],
        hidden_act: Activation,
        output: usize,
        output_act: impl Into<Activations>,
    ) -> Self {
        let mut layers: Vec<(usize, Activations)> =
            hidden.iter().map(|&w| (w, hidden_act.into())).collect();
        layers.push((output, output_act.into()));
        Self {
            input,
            layers,
            merge: None,
        }
    }

    pub fn with_merge(mut self, layer: usize, width: usize) -> Self {
        self.merge = Some(Merge { layer, width });
        self
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.input == 0 {
            return Err(NnError::Shape("zero-width input".into()));
        }
        if self.layers.is_empty() {
            return Err(NnError::Shape("network has no layers".into()));
        }
        for (i, (w, act)) in self.layers.iter().enumerate() {
            if *w == 0 {
                return Err(NnError::Shape(format!("layer {i} has zero width")));
            }
            if let Activations::PerUnit(v) = act {
                if v.len() != *w {
                    return Err(NnError::Shape(format!(
                        "layer {i}: {} activations for width {w}",
                        v.len()
                    )));
                }
            }
        }
        if let Some(m) = self.merge {
            if m.layer >= self.layers.len() || m.width == 0 {
                return Err(NnError::Shape(format!(
                    "invalid merge at layer {} with width {}",
                    m.layer, m.width
                )));
            }
        }
        Ok(())
    }
}

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// Feed-forward network with at most one auxiliary-input merge.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<Layer>,
    merge: Option<Merge>,
    // identity + revision let `backward` reject caches from another net or
    // from before a parameter update
    id: u64,
    revision: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            merge: self.merge,
            id: next_id(),
            revision: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.merge == other.merge
    }
}

/// Per-layer values recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    net_id: u64,
    revision: u64,
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("cache has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.output().rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients in the same layout as [`Mlp::param_slices`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.scale(k);
            l.bias.iter_mut().for_each(|b| *b *= k);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Backward {
    pub grads: MlpGrads,
    pub grad_input: Matrix,
    pub grad_aux: Option<Matrix>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>, merge: Option<Merge>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Shape("network has no layers".into()));
        }
        for i in 1..layers.len() {
            let mut expected = layers[i - 1].outputs();
            if let Some(m) = merge.filter(|m| m.layer == i) {
                expected += m.width;
            }
            if layers[i].inputs() != expected {
                return Err(NnError::Shape(format!(
                    "layer {i} takes {} inputs but receives {expected}",
                    layers[i].inputs()
                )));
            }
        }
        if let Some(m) = merge {
            if m.layer >= layers.len() || m.width == 0 || layers[m.layer].inputs() <= m.width {
                return Err(NnError::Shape(format!(
                    "invalid merge at layer {} with width {}",
                    m.layer, m.width
                )));
            }
        }
        Ok(Self {
            layers,
            merge,
            id: next_id(),
            revision: 0,
        })
    }

    /// Fan-in uniform initialization for hidden layers and a small uniform
    /// range for the output layer.
    pub fn init(shape: &MlpShape, rng: &mut impl Rng) -> Result<Self, NnError> {
        shape.validate()?;
        let n = shape.layers.len();
        let mut layers = Vec::with_capacity(n);
        let mut fan_in = shape.input;
        for (i, (width, act)) in shape.layers.iter().enumerate() {
            if let Some(m) = shape.merge.filter(|m| m.layer == i) {
                fan_in += m.width;
            }
            let bound = if i + 1 == n {
                3e-3
            } else {
                1.0 / (fan_in as f64).sqrt()
            };
            let w = (0..width * fan_in)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            let b = (0..*width).map(|_| rng.random_range(-bound..=bound)).collect();
            layers.push(Layer::new(Matrix::from_vec(*width, fan_in, w)?, b, act.clone())?);
            fan_in = *width;
        }
        Self::from_layers(layers, shape.merge)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn merge(&self) -> Option<Merge> {
        self.merge
    }

    /// Width of the primary input (excluding any auxiliary input).
    pub fn input_width(&self) -> usize {
        let first = self.layers[0].inputs();
        match self.merge {
            Some(m) if m.layer == 0 => first - m.width,
            _ => first,
        }
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn aux_width(&self) -> Option<usize> {
        self.merge.map(|m| m.width)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Parameter blocks in a fixed order: weights then bias, layer by layer.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<(), NnError> {
        if values.len() != self.num_params() {
            return Err(NnError::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    /// Copies parameters from a network of identical shape.
    pub fn copy_params_from(&mut self, other: &Mlp) -> Result<(), NnError> {
        self.check_same_shape(other)?;
        for (dst, src) in self.param_slices_mut().into_iter().zip(other.param_slices()) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    /// `self ← tau·online + (1 − tau)·self`, elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<(), NnError> {
        self.check_same_shape(online)?;
        if tau == 1.0 {
            return self.copy_params_from(online);
        }
        for (dst, src) in self.param_slices_mut().into_iter().zip(online.param_slices()) {
            for (t, o) in dst.iter_mut().zip(src) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &Mlp) -> Result<(), NnError> {
        let same = self.merge == other.merge
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.shape() == b.weights.shape());
        if same {
            Ok(())
        } else {
            Err(NnError::Shape("networks have different shapes".into()))
        }
    }

    fn check_inputs(&self, input: &Matrix, aux: Option<&Matrix>) -> Result<(), NnError> {
        if input.cols() != self.input_width() {
            return Err(NnError::Shape(format!(
                "input width {} but network expects {}",
                input.cols(),
                self.input_width()
            )));
        }
        match (self.merge, aux) {
            (Some(m), Some(a)) => {
                if a.cols() != m.width || a.rows() != input.rows() {
                    return Err(NnError::Shape(format!(
                        "auxiliary input is {}x{}, expected {}x{}",
                        a.rows(),
                        a.cols(),
                        input.rows(),
                        m.width
                    )));
                }
            }
            (Some(_), None) => return Err(NnError::Shape("network requires an auxiliary input".into())),
            (None, Some(_)) => return Err(NnError::Shape("network takes no auxiliary input".into())),
            (None, None) => {}
        }
        Ok(())
    }

    fn layer_forward(layer: &Layer, x: &Matrix) -> Result<(Matrix, Matrix), NnError> {
        let mut pre = x.matmul_transposed(&layer.weights)?;
        for i in 0..pre.rows() {
            for (z, b) in pre.row_mut(i).iter_mut().zip(&layer.bias) {
                *z += b;
            }
        }
        let mut post = pre.clone();
        match &layer.activation {
            Activations::Uniform(Activation::Linear) => {}
            Activations::Uniform(a) => post.as_mut_slice().iter_mut().for_each(|z| *z = a.apply(*z)),
            Activations::PerUnit(acts) => {
                for i in 0..post.rows() {
                    for (z, a) in post.row_mut(i).iter_mut().zip(acts) {
                        *z = a.apply(*z);
                    }
                }
            }
        }
        Ok((pre, post))
    }

    /// Batched forward pass, one sample per row, keeping what `backward` needs.
    pub fn forward_batch(&self, input: &Matrix, aux: Option<&Matrix>) -> Result<(Matrix, ForwardCache), NnError> {
        self.check_inputs(input, aux)?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            net_id: self.id,
            revision: self.revision,
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
        };
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if let (Some(m), Some(a)) = (self.merge, aux) {
                if m.layer == i {
                    x = x.hcat(a)?;
                }
            }
            let (pre, post) = Self::layer_forward(layer, &x)?;
            cache.inputs.push(x);
            cache.pre.push(pre);
            x = post.clone();
            cache.post.push(post);
        }
        Ok((x, cache))
    }

    /// Batched forward pass without a cache.
    pub fn predict_batch(&self, input: &Matrix, aux: Option<&Matrix>) -> Result<Matrix, NnError> {
        self.check_inputs(input, aux)?;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if let (Some(m), Some(a)) = (self.merge, aux) {
                if m.layer == i {
                    x = x.hcat(a)?;
                }
            }
            x = Self::layer_forward(layer, &x)?.1;
        }
        Ok(x)
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64], aux: Option<&[f64]>) -> Result<(Vec<f64>, ForwardCache), NnError> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let a = aux.map(|a| Matrix::from_vec(1, a.len(), a.to_vec())).transpose()?;
        let (out, cache) = self.forward_batch(&x, a.as_ref())?;
        Ok((out.into_vec(), cache))
    }

    pub fn predict(&self, input: &[f64], aux: Option<&[f64]>) -> Result<Vec<f64>, NnError> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let a = aux.map(|a| Matrix::from_vec(1, a.len(), a.to_vec())).transpose()?;
        Ok(self.predict_batch(&x, a.as_ref())?.into_vec())
    }

    /// Exact gradients of a scalar loss whose gradient with respect to the
    /// batched output is `grad_output`. Batch reduction (e.g. a `1/N` mean)
    /// is the caller's choice and must already be folded into `grad_output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Backward, NnError> {
        if cache.net_id != self.id || cache.revision != self.revision {
            return Err(NnError::StaleCache);
        }
        if cache.post.len() != self.layers.len() {
            return Err(NnError::StaleCache);
        }
        let out = cache.output();
        if grad_output.shape() != out.shape() {
            return Err(NnError::Shape(format!(
                "output gradient is {}x{}, output is {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut grad_aux = None;
        let mut upstream = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[i];
            let post = &cache.post[i];
            let mut dz = upstream;
            for r in 0..dz.rows() {
                let (zr, yr) = (pre.row(r), post.row(r));
                for (j, g) in dz.row_mut(r).iter_mut().enumerate() {
                    *g *= layer.activation.get(j).derivative(zr[j], yr[j]);
                }
            }
            let dw = dz.transpose_matmul(&cache.inputs[i])?;
            let db = dz.column_sums();
            let dx = dz.matmul(&layer.weights)?;
            grads.push(LayerGrads { weights: dw, bias: db });
            upstream = match self.merge {
                Some(m) if m.layer == i => {
                    let (prev, aux) = dx.hsplit(dx.cols() - m.width);
                    grad_aux = Some(aux);
                    prev
                }
                _ => dx,
            };
        }
        grads.reverse();
        Ok(Backward {
            grads: MlpGrads { layers: grads },
            grad_input: upstream,
            grad_aux,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}
