//! Fully connected network: `n_layers` affine+ReLU layers and a logistic
//! output, applied to every round independently.
//!
//! Parameter order: for each hidden layer its weights (`hidden x inputs`,
//! row-major) then biases, followed by the output weights and output bias.

use rand::Rng;

use crate::features::{EpisodeTensor, FEATURE_COUNT};

use super::{axpy, bce_with_logit, gemv_acc, network_input, sigmoid, Network, Predictor};

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub input_size: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub params: Vec<f64>,
}

impl FeedForward {
    pub fn zeros(input_size: usize, hidden_size: usize, n_layers: usize) -> Self {
        let n = Self::param_count(input_size, hidden_size, n_layers);
        Self {
            input_size,
            hidden_size,
            n_layers,
            params: vec![0.0; n],
        }
    }

    pub fn param_count(input_size: usize, hidden_size: usize, n_layers: usize) -> usize {
        (0..n_layers)
            .map(|l| {
                let fan_in = if l == 0 { input_size } else { hidden_size };
                hidden_size * fan_in + hidden_size
            })
            .sum::<usize>()
            + hidden_size
            + 1
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_size: usize,
        hidden_size: usize,
        n_layers: usize,
        rng: &mut R,
    ) -> Self {
        let mut m = Self::zeros(input_size, hidden_size, n_layers);
        let mut off = 0;
        for l in 0..=n_layers {
            let (rows, fan_in) = m.layer_shape(l);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut m.params[off..off + rows * fan_in] {
                *w = rng.random_range(-bound..bound);
            }
            off += rows * fan_in + rows;
        }
        m
    }

    /// `(outputs, inputs)` of layer `l`; layer `n_layers` is the output layer.
    fn layer_shape(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 { self.input_size } else { self.hidden_size };
        let rows = if l == self.n_layers { 1 } else { self.hidden_size };
        (rows, fan_in)
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_layers + 1);
        let mut off = 0;
        for l in 0..=self.n_layers {
            let (rows, fan_in) = self.layer_shape(l);
            out.push((off, off + rows * fan_in));
            off += rows * fan_in + rows;
        }
        out
    }

    /// Activations of every layer; the last entry holds the output logit.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.forward_layers(x).0
    }

    /// Hidden-layer values before the ReLU.
    fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.forward_layers(x).1
    }

    fn forward_layers(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let offsets = self.layer_offsets();
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.n_layers);
        for l in 0..=self.n_layers {
            let (rows, fan_in) = self.layer_shape(l);
            let (w, b) = offsets[l];
            let mut z = self.params[b..b + rows].to_vec();
            gemv_acc(&self.params[w..w + rows * fan_in], &acts[l], &mut z);
            if l < self.n_layers {
                pre.push(z.clone());
                for v in &mut z {
                    // Written so that NaN propagates rather than clamping to 0.
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(z);
        }
        (acts, pre)
    }

    /// P(Go) for each input row.
    pub fn forward(&self, inputs: &[&[f64]]) -> Vec<f64> {
        inputs
            .iter()
            .map(|x| sigmoid(self.activations(x)[self.n_layers + 1][0]))
            .collect()
    }

    /// Summed cross-entropy over the batch.
    pub fn loss(&self, inputs: &[&[f64]], labels: &[bool]) -> f64 {
        inputs
            .iter()
            .zip(labels)
            .map(|(x, &y)| bce_with_logit(self.activations(x)[self.n_layers + 1][0], y))
            .sum()
    }

    /// Adds the gradient of the summed cross-entropy over the batch to
    /// `grad` and returns the summed loss.
    pub fn backward(&self, inputs: &[&[f64]], labels: &[bool], grad: &mut [f64]) -> f64 {
        let offsets = self.layer_offsets();
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            let acts = self.activations(x);
            let logit = acts[self.n_layers + 1][0];
            loss += bce_with_logit(logit, y);
            let mut delta = vec![sigmoid(logit) - if y { 1.0 } else { 0.0 }];
            for l in (0..=self.n_layers).rev() {
                let (rows, fan_in) = self.layer_shape(l);
                let (w, b) = offsets[l];
                let input = &acts[l];
                let mut d_input = vec![0.0; fan_in];
                for r in 0..rows {
                    let d = delta[r];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b + r] += d;
                    axpy(d, input, &mut grad[w + r * fan_in..w + (r + 1) * fan_in]);
                    axpy(d, &self.params[w + r * fan_in..w + (r + 1) * fan_in], &mut d_input);
                }
                if l > 0 {
                    // ReLU: input activations of this layer are the previous
                    // layer's rectified outputs.
                    for (di, &a) in d_input.iter_mut().zip(input) {
                        if a <= 0.0 {
                            *di = 0.0;
                        }
                    }
                }
                delta = d_input;
            }
        }
        loss
    }

    fn episode_inputs(episode: &EpisodeTensor) -> Vec<[f64; FEATURE_COUNT]> {
        (0..episode.len())
            .map(|t| {
                let mut x = [0.0; FEATURE_COUNT];
                network_input(episode.row(t), &mut x);
                x
            })
            .collect()
    }
}

impl Predictor for FeedForward {
    fn predict_episode(&self, episode: &EpisodeTensor) -> Vec<f64> {
        let xs = Self::episode_inputs(episode);
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        self.forward(&refs)
    }
}

impl Network for FeedForward {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_gradient(&self, episode: &EpisodeTensor, grad: &mut [f64]) -> f64 {
        let xs = Self::episode_inputs(episode);
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        self.backward(&refs, &episode.labels, grad)
    }

    fn episode_loss(&self, episode: &EpisodeTensor) -> f64 {
        let xs = Self::episode_inputs(episode);
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        self.loss(&refs, &episode.labels)
    }

    fn kink_pattern(&self, episode: &EpisodeTensor) -> Vec<bool> {
        let mut out = Vec::new();
        for x in Self::episode_inputs(episode) {
            let acts = self.pre_activations(&x);
            out.extend(acts.iter().flatten().map(|&z| z > 0.0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use rand::SeedableRng;

    #[test]
    fn zero_model_outputs_half() {
        let m = FeedForward::zeros(5, 4, 2);
        let x = [1.0, -2.0, 3.0, 0.5, 9.0];
        assert_eq!(m.forward(&[&x]), vec![0.5]);
    }

    #[test]
    fn duplicated_example_doubles_gradient() {
        let mut rng = StreamRng::seed_from_u64(3);
        let m = FeedForward::init(6, 5, 2, &mut rng);
        let x = [0.3, 1.0, 0.0, 1.0, 0.2, 0.7];
        let mut g1 = vec![0.0; m.params.len()];
        let mut g2 = vec![0.0; m.params.len()];
        m.backward(&[&x], &[true], &mut g1);
        m.backward(&[&x, &x], &[true, true], &mut g2);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn param_count_matches_layout() {
        let m = FeedForward::zeros(53, 16, 2);
        assert_eq!(m.params.len(), 53 * 16 + 16 + 16 * 16 + 16 + 16 + 1);
        let offsets = m.layer_offsets();
        assert_eq!(offsets[2].1 + 1, m.params.len());
    }
}
