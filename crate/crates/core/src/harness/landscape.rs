//! Fixed multi-modal 2-D cost surface for optimization-path comparisons.
//!
//! ```text
//! f(x, y) = 0.5 * (a x^2 + b y^2)
//!         - depth_g * exp(-|p - c_g|^2 / (2 s_g^2))     global pit
//!         - depth_l * exp(-|p - c_l|^2 / (2 s_l^2))     local pit
//! ```
//!
//! The default coefficients are listed on [`Landscape2d::default`]. The start
//! point sits on the rim of the narrow local pit, on a flat shelf where small
//! steps crawl; larger steps clear it and descend into the wide global pit.

use crate::optim::ParamVector;

use super::task::{BatchSelector, Evaluation, Split, Task};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pit {
    pub center: [f64; 2],
    pub depth: f64,
    pub width: f64,
}

impl Pit {
    fn value_and_grad(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let s2 = self.width * self.width;
        let e = (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
        let v = -self.depth * e;
        // d/dx of -D e = D e dx / s^2
        (v, [self.depth * e * dx / s2, self.depth * e * dy / s2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape2d {
    /// Bowl curvature along x.
    pub a: f64,
    /// Bowl curvature along y.
    pub b: f64,
    pub global: Pit,
    pub local: Pit,
    pub start: [f64; 2],
}

impl Default for Landscape2d {
    /// `a = 0.2`, `b = 1.0`; global pit depth 2.0, width 1.5 at `(1.0, 0.0)`;
    /// local pit depth 0.4, width 0.3 at `(-2.0, 0.5)`; start `(-1.95, 0.65)`.
    fn default() -> Self {
        Landscape2d {
            a: 0.2,
            b: 1.0,
            global: Pit {
                center: [1.0, 0.0],
                depth: 2.0,
                width: 1.5,
            },
            local: Pit {
                center: [-2.0, 0.5],
                depth: 0.4,
                width: 0.3,
            },
            start: [-1.95, 0.65],
        }
    }
}

impl Landscape2d {
    pub fn cost_and_grad(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        let (vg, gg) = self.global.value_and_grad(p);
        let (vl, gl) = self.local.value_and_grad(p);
        let bowl = 0.5 * (self.a * p[0] * p[0] + self.b * p[1] * p[1]);
        (
            bowl + vg + vl,
            [self.a * p[0] + gg[0] + gl[0], self.b * p[1] + gg[1] + gl[1]],
        )
    }

    pub fn cost(&self, p: [f64; 2]) -> f64 {
        self.cost_and_grad(p).0
    }
}

impl Task for Landscape2d {
    fn id(&self) -> &str {
        "landscape2d"
    }

    fn model_id(&self) -> &str {
        "point2d"
    }

    fn param_len(&self) -> usize {
        2
    }

    fn init_params(&self, _seed: u64) -> ParamVector {
        ParamVector(self.start.to_vec())
    }

    fn train_size(&self) -> usize {
        0
    }

    fn batch_size(&self) -> usize {
        1
    }

    fn loss_and_grad(&self, theta: &[f64], _batch: BatchSelector<'_>) -> (f64, Vec<f64>) {
        let (c, g) = self.cost_and_grad([theta[0], theta[1]]);
        (c, g.to_vec())
    }

    fn evaluate(&self, theta: &[f64], _split: Split) -> Evaluation {
        Evaluation {
            loss: self.cost([theta[0], theta[1]]),
            top1: None,
        }
    }
}
