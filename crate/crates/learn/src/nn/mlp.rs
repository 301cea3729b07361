use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("input has {got} columns, network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Fully connected network, tanh on hidden layers, identity output. All
/// parameters live in one flat vector: per layer the `in × out` weight
/// (row-major) followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Array2<f64>>,
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        Self {
            widths: widths.to_vec(),
            params: vec![0.0; param_count(widths)],
        }
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Self {
        assert_eq!(params.len(), param_count(widths));
        Self {
            widths: widths.to_vec(),
            params,
        }
    }

    /// Orthogonal weights with gain √2 on hidden layers and `output_gain`
    /// on the last; zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(widths: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(widths);
        let n_layers = net.num_layers();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { 2f64.sqrt() };
            let tall = fan_in.max(fan_out);
            let short = fan_in.min(fan_out);
            let g = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
            let qr = g.qr();
            // sign fix so the distribution is uniform over orthogonal matrices
            let signs = qr.r().diagonal().map(|d| if d < 0.0 { -1.0 } else { 1.0 });
            let mut q = qr.q();
            for (j, sgn) in signs.iter().enumerate() {
                q.column_mut(j).scale_mut(*sgn);
            }
            let (off, _) = net.layer_offsets(l);
            for i in 0..fan_in {
                for j in 0..fan_out {
                    let v = if fan_in >= fan_out { q[(i, j)] } else { q[(j, i)] };
                    net.params[off + i * fan_out + j] = gain * v;
                }
            }
        }
        net
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Start of layer `l`'s weight block and of its bias.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w_off = param_count(&self.widths[..=l]);
        (w_off, w_off + self.widths[l] * self.widths[l + 1])
    }

    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w, b) = self.layer_offsets(l);
        ArrayView2::from_shape((self.widths[l], self.widths[l + 1]), &self.params[w..b]).unwrap()
    }

    pub fn bias(&self, l: usize) -> ArrayView1<'_, f64> {
        let (_, b) = self.layer_offsets(l);
        ArrayView1::from(&self.params[b..b + self.widths[l + 1]])
    }

    /// Batched forward pass; rows are samples.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Tape), NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(x.to_owned());
        for l in 0..self.num_layers() {
            let mut z = acts[l].dot(&self.weight(l));
            z += &self.bias(l);
            if l + 1 < self.num_layers() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        let out = acts.pop().unwrap();
        Ok((out, Tape { acts }))
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        self.forward(x).map(|(y, _)| y)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Array1<f64>, NnError> {
        let x = ArrayView2::from_shape((1, x.len()), x).unwrap();
        Ok(self.predict(x)?.row(0).to_owned())
    }

    /// Gradient of `Σ grad_out ⊙ output` with respect to every parameter,
    /// laid out like `params`.
    pub fn backward(&self, tape: &Tape, grad_out: ArrayView2<'_, f64>) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_out.to_owned();
        for l in (0..self.num_layers()).rev() {
            let (w_off, b_off) = self.layer_offsets(l);
            let a = &tape.acts[l];
            let gw = a.t().dot(&delta);
            // logical order; the product may come back column-major
            for (g, v) in grads[w_off..b_off].iter_mut().zip(gw.iter()) {
                *g = *v;
            }
            let gb = delta.sum_axis(Axis(0));
            for (g, v) in grads[b_off..b_off + gb.len()].iter_mut().zip(gb.iter()) {
                *g = *v;
            }
            if l > 0 {
                let mut prev = delta.dot(&self.weight(l).t());
                prev.zip_mut_with(a, |d, &h| *d *= 1.0 - h * h);
                delta = prev;
            }
        }
        grads
    }
}

/// Copies rows `idx` of a row-major `n × dim` buffer into a matrix.
pub fn gather_rows(data: &[f64], dim: usize, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), dim));
    for (r, &i) in idx.iter().enumerate() {
        out.slice_mut(s![r, ..]).assign(&ArrayView1::from(&data[i * dim..(i + 1) * dim]));
    }
    out
}
