//! Stacked LSTM over a whole DM-expert episode.
//!
//! At the first round of an episode every layer starts from hidden state zero
//! and a learned initial cell; both states then flow through all rounds of
//! the episode, across game boundaries. A logistic head reads the top hidden
//! state at each round.
//!
//! Parameter order, per layer: gate weights (`4H x (inputs + H)`, row-major,
//! gate blocks input, forget, candidate, output; columns input then previous
//! hidden), gate biases (`4H`), initial cell (`H`). Then the head weights
//! (`H`) and head bias.

use rand::Rng;

use crate::features::{EpisodeTensor, FEATURE_COUNT};

use super::{axpy, bce_with_logit, dot, gemv_acc, network_input, sigmoid, Network, Predictor};

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    inputs: usize,
    w: usize,
    b: usize,
    c0: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input_size: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub params: Vec<f64>,
    layout: Vec<LayerLayout>,
    head: usize,
}

/// Per-layer activations of one episode, `T` rounds long.
struct LayerTrace {
    /// Activated gates `i, f, g, o` per round (`T x 4H`).
    gates: Vec<f64>,
    /// Cell state per round (`T x H`).
    c: Vec<f64>,
    /// `tanh(c)` per round.
    tc: Vec<f64>,
    /// Hidden state per round.
    h: Vec<f64>,
}

impl Lstm {
    pub fn zeros(input_size: usize, hidden_size: usize, n_layers: usize) -> Self {
        let h = hidden_size;
        let mut layout = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            let inputs = if l == 0 { input_size } else { h };
            let w = off;
            let b = w + 4 * h * (inputs + h);
            let c0 = b + 4 * h;
            off = c0 + h;
            layout.push(LayerLayout { inputs, w, b, c0 });
        }
        Self {
            input_size,
            hidden_size,
            n_layers,
            params: vec![0.0; off + h + 1],
            layout,
            head: off,
        }
    }

    /// Uniform `±1/sqrt(H)` gate and head weights; zero biases and cells.
    pub fn init<R: Rng + ?Sized>(
        input_size: usize,
        hidden_size: usize,
        n_layers: usize,
        rng: &mut R,
    ) -> Self {
        let mut m = Self::zeros(input_size, hidden_size, n_layers);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        for l in 0..n_layers {
            let lay = m.layout[l];
            for w in &mut m.params[lay.w..lay.b] {
                *w = rng.random_range(-bound..bound);
            }
        }
        let head = m.head;
        for w in &mut m.params[head..head + hidden_size] {
            *w = rng.random_range(-bound..bound);
        }
        m
    }

    pub fn from_params(
        input_size: usize,
        hidden_size: usize,
        n_layers: usize,
        params: Vec<f64>,
    ) -> Option<Self> {
        let mut m = Self::zeros(input_size, hidden_size, n_layers);
        if params.len() != m.params.len() {
            return None;
        }
        m.params = params;
        Some(m)
    }

    /// Index range of layer `l`'s learned initial cell within `params`.
    pub fn initial_cell_range(&self, l: usize) -> std::ops::Range<usize> {
        let c0 = self.layout[l].c0;
        c0..c0 + self.hidden_size
    }

    fn inputs(&self, episode: &EpisodeTensor) -> Vec<f64> {
        let mut xs = Vec::with_capacity(episode.len() * FEATURE_COUNT);
        let mut x = [0.0; FEATURE_COUNT];
        for t in 0..episode.len() {
            network_input(episode.row(t), &mut x);
            xs.extend_from_slice(&x);
        }
        xs
    }

    /// Runs the recurrence; returns per-layer traces and per-round logits.
    fn run(&self, xs: &[f64], steps: usize) -> (Vec<LayerTrace>, Vec<f64>) {
        let h = self.hidden_size;
        let mut traces: Vec<LayerTrace> = Vec::with_capacity(self.n_layers);
        for l in 0..self.n_layers {
            let lay = self.layout[l];
            let cols = lay.inputs + h;
            let w = &self.params[lay.w..lay.b];
            let bias = &self.params[lay.b..lay.c0];
            let c0 = &self.params[lay.c0..lay.c0 + h];
            let mut tr = LayerTrace {
                gates: vec![0.0; steps * 4 * h],
                c: vec![0.0; steps * h],
                tc: vec![0.0; steps * h],
                h: vec![0.0; steps * h],
            };
            let mut v = vec![0.0; cols];
            let mut z = vec![0.0; 4 * h];
            for t in 0..steps {
                let input = match traces.last() {
                    None => &xs[t * lay.inputs..(t + 1) * lay.inputs],
                    Some(below) => &below.h[t * h..(t + 1) * h],
                };
                v[..lay.inputs].copy_from_slice(input);
                if t == 0 {
                    v[lay.inputs..].fill(0.0);
                } else {
                    v[lay.inputs..].copy_from_slice(&tr.h[(t - 1) * h..t * h]);
                }
                z.copy_from_slice(bias);
                gemv_acc(w, &v, &mut z);
                let gates = &mut tr.gates[t * 4 * h..(t + 1) * 4 * h];
                for k in 0..h {
                    gates[k] = sigmoid(z[k]);
                    gates[h + k] = sigmoid(z[h + k]);
                    gates[2 * h + k] = z[2 * h + k].tanh();
                    gates[3 * h + k] = sigmoid(z[3 * h + k]);
                }
                for k in 0..h {
                    let c_prev = if t == 0 { c0[k] } else { tr.c[(t - 1) * h + k] };
                    let c = gates[h + k] * c_prev + gates[k] * gates[2 * h + k];
                    let tc = c.tanh();
                    tr.c[t * h + k] = c;
                    tr.tc[t * h + k] = tc;
                    tr.h[t * h + k] = gates[3 * h + k] * tc;
                }
            }
            traces.push(tr);
        }
        let head_w = &self.params[self.head..self.head + h];
        let head_b = self.params[self.head + h];
        let top = traces.last().expect("at least one layer");
        let logits = (0..steps)
            .map(|t| head_b + dot(head_w, &top.h[t * h..(t + 1) * h]))
            .collect();
        (traces, logits)
    }

    /// Summed cross-entropy of the episode.
    pub fn loss(&self, episode: &EpisodeTensor) -> f64 {
        let (_, logits) = self.run(&self.inputs(episode), episode.len());
        logits
            .iter()
            .zip(&episode.labels)
            .map(|(&z, &y)| bce_with_logit(z, y))
            .sum()
    }

    fn backprop(&self, episode: &EpisodeTensor, grad: &mut [f64]) -> f64 {
        let steps = episode.len();
        let h = self.hidden_size;
        let xs = self.inputs(episode);
        let (traces, logits) = self.run(&xs, steps);

        let mut loss = 0.0;
        // Gradient arriving at each round's hidden state from above.
        let mut ext = vec![0.0; steps * h];
        {
            let head_w = &self.params[self.head..self.head + h];
            let top = traces.last().expect("at least one layer");
            for t in 0..steps {
                let y = episode.labels[t];
                loss += bce_with_logit(logits[t], y);
                let d = sigmoid(logits[t]) - if y { 1.0 } else { 0.0 };
                grad[self.head + h] += d;
                axpy(d, &top.h[t * h..(t + 1) * h], &mut grad[self.head..self.head + h]);
                axpy(d, head_w, &mut ext[t * h..(t + 1) * h]);
            }
        }

        for l in (0..self.n_layers).rev() {
            let lay = self.layout[l];
            let cols = lay.inputs + h;
            let tr = &traces[l];
            let mut ext_below = vec![0.0; steps * lay.inputs];
            let mut dh_rec = vec![0.0; h];
            let mut dc_rec = vec![0.0; h];
            let mut dz = vec![0.0; 4 * h];
            let mut v = vec![0.0; cols];
            let mut dv = vec![0.0; cols];
            for t in (0..steps).rev() {
                let gates = &tr.gates[t * 4 * h..(t + 1) * 4 * h];
                for k in 0..h {
                    let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let tc = tr.tc[t * h + k];
                    let c_prev = if t == 0 {
                        self.params[lay.c0 + k]
                    } else {
                        tr.c[(t - 1) * h + k]
                    };
                    let dh = ext[t * h + k] + dh_rec[k];
                    let dc = dc_rec[k] + dh * o * (1.0 - tc * tc);
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[h + k] = dc * c_prev * f * (1.0 - f);
                    dz[2 * h + k] = dc * i * (1.0 - g * g);
                    dz[3 * h + k] = dh * tc * o * (1.0 - o);
                    dc_rec[k] = dc * f;
                }
                let input = if l == 0 {
                    &xs[t * lay.inputs..(t + 1) * lay.inputs]
                } else {
                    &traces[l - 1].h[t * h..(t + 1) * h]
                };
                v[..lay.inputs].copy_from_slice(input);
                if t == 0 {
                    v[lay.inputs..].fill(0.0);
                } else {
                    v[lay.inputs..].copy_from_slice(&tr.h[(t - 1) * h..t * h]);
                }
                dv.fill(0.0);
                for (r, &d) in dz.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    grad[lay.b + r] += d;
                    let row = lay.w + r * cols;
                    axpy(d, &v, &mut grad[row..row + cols]);
                    axpy(d, &self.params[row..row + cols], &mut dv);
                }
                ext_below[t * lay.inputs..(t + 1) * lay.inputs].copy_from_slice(&dv[..lay.inputs]);
                dh_rec.copy_from_slice(&dv[lay.inputs..]);
            }
            // The cell before round one is the learned parameter.
            axpy(1.0, &dc_rec, &mut grad[lay.c0..lay.c0 + h]);
            ext = ext_below;
        }
        loss
    }
}

impl Predictor for Lstm {
    fn predict_episode(&self, episode: &EpisodeTensor) -> Vec<f64> {
        let (_, logits) = self.run(&self.inputs(episode), episode.len());
        logits.into_iter().map(sigmoid).collect()
    }
}

impl Network for Lstm {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_gradient(&self, episode: &EpisodeTensor, grad: &mut [f64]) -> f64 {
        self.backprop(episode, grad)
    }

    fn episode_loss(&self, episode: &EpisodeTensor) -> f64 {
        self.loss(episode)
    }
}
