//! Softmax classifier with an optional tanh hidden layer.
//!
//! Parameter layout, hidden layer present: `W1 (h x d) | b1 (h) | W2 (c x h) | b2 (c)`.
//! Without a hidden layer: `W (c x d) | b (c)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: Option<usize>,
    pub classes: usize,
}

/// Summed (not averaged) loss and correct-prediction count over a row set.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Totals {
    pub loss: f64,
    pub correct: usize,
}

impl Mlp {
    pub fn param_len(&self) -> usize {
        match self.hidden {
            Some(h) => h * self.inputs + h + self.classes * h + self.classes,
            None => self.classes * self.inputs + self.classes,
        }
    }

    pub fn id(&self) -> String {
        match self.hidden {
            Some(h) => format!("mlp({}-{}-{})", self.inputs, h, self.classes),
            None => format!("softmax({}-{})", self.inputs, self.classes),
        }
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut theta = vec![0.0; self.param_len()];
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let scale = 1.0 / (fan_in as f64).sqrt();
            for w in slice {
                let z: f64 = rng.sample(StandardNormal);
                *w = scale * z;
            }
        };
        match self.hidden {
            Some(h) => {
                let (d, c) = (self.inputs, self.classes);
                fill(&mut theta[..h * d], d);
                let w2 = h * d + h;
                fill(&mut theta[w2..w2 + c * h], h);
            }
            None => {
                let n = self.classes * self.inputs;
                fill(&mut theta[..n], self.inputs);
            }
        }
        theta
    }

    /// Loss totals over `rows`; accumulates the summed gradient into `grad`
    /// when one is supplied.
    pub(crate) fn accumulate(&self, theta: &[f64], data: &Dataset, rows: &[usize], mut grad: Option<&mut [f64]>) -> Totals {
        let (d, c) = (self.inputs, self.classes);
        let mut totals = Totals::default();
        let mut logits = vec![0.0; c];
        let mut probs = vec![0.0; c];
        let h = self.hidden.unwrap_or(0);
        let mut act = vec![0.0; h];
        let mut dact = vec![0.0; h];
        for &r in rows {
            let x = data.row(r);
            let y = data.labels[r];
            // Forward.
            let (w_out, b_out, feats): (&[f64], &[f64], &[f64]) = match self.hidden {
                Some(h) => {
                    let (w1, rest) = theta.split_at(h * d);
                    let (b1, rest) = rest.split_at(h);
                    let (w2, b2) = rest.split_at(c * h);
                    for j in 0..h {
                        let z: f64 = b1[j] + w1[j * d..(j + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                        act[j] = z.tanh();
                    }
                    (w2, b2, &act[..])
                }
                None => {
                    let (w, b) = theta.split_at(c * d);
                    (w, b, x)
                }
            };
            let fin = feats.len();
            for k in 0..c {
                logits[k] = b_out[k] + w_out[k * fin..(k + 1) * fin].iter().zip(feats).map(|(w, v)| w * v).sum::<f64>();
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for k in 0..c {
                probs[k] = (logits[k] - max).exp();
                denom += probs[k];
            }
            for p in probs.iter_mut() {
                *p /= denom;
            }
            totals.loss += denom.ln() + max - logits[y];
            let pred = (0..c).fold(0, |best, k| if logits[k] > logits[best] { k } else { best });
            if pred == y {
                totals.correct += 1;
            }

            // Backward.
            let Some(g) = grad.as_deref_mut() else { continue };
            match self.hidden {
                Some(h) => {
                    let w2_off = h * d + h;
                    let b2_off = w2_off + c * h;
                    dact.iter_mut().for_each(|v| *v = 0.0);
                    for k in 0..c {
                        let dz = probs[k] - if k == y { 1.0 } else { 0.0 };
                        g[b2_off + k] += dz;
                        for j in 0..h {
                            g[w2_off + k * h + j] += dz * act[j];
                            dact[j] += dz * theta[w2_off + k * h + j];
                        }
                    }
                    for j in 0..h {
                        let dz = dact[j] * (1.0 - act[j] * act[j]);
                        g[h * d + j] += dz;
                        for (i, xi) in x.iter().enumerate() {
                            g[j * d + i] += dz * xi;
                        }
                    }
                }
                None => {
                    let b_off = c * d;
                    for k in 0..c {
                        let dz = probs[k] - if k == y { 1.0 } else { 0.0 };
                        g[b_off + k] += dz;
                        for (i, xi) in x.iter().enumerate() {
                            g[k * d + i] += dz * xi;
                        }
                    }
                }
            }
        }
        totals
    }

    /// Mean cross-entropy and its gradient over `rows`.
    pub fn loss_and_grad(&self, theta: &[f64], data: &Dataset, rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_len()];
        let totals = self.accumulate(theta, data, rows, Some(&mut grad));
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (totals.loss / n, grad)
    }

    /// Mean cross-entropy and top-1 accuracy over the whole dataset.
    pub fn evaluate(&self, theta: &[f64], data: &Dataset) -> (f64, f64) {
        let rows: Vec<usize> = (0..data.len()).collect();
        let totals = self.accumulate(theta, data, &rows, None);
        let n = rows.len().max(1) as f64;
        (totals.loss / n, totals.correct as f64 / n)
    }
}
