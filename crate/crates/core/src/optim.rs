//! SGD, Momentum and Adam update rules over a flat parameter vector.
//!
//! The free functions are pure state transitions; [`OptimizerState::step`]
//! applies the same arithmetic in place for the training loop.

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Model parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("length mismatch: parameters have {params} entries, {what} has {got}")]
    LengthMismatch { params: usize, what: &'static str, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("learning rate must be finite and positive, got {0}")]
    BadLearningRate(f64),
    #[error("expected {expected} optimizer state, got {got}")]
    WrongKind { expected: OptimizerKind, got: OptimizerKind },
    #[error("hyperparameter {name}={value} outside {range}")]
    BadHyperparameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "momentum" => Ok(OptimizerKind::Momentum),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer {other:?} (expected sgd, momentum or adam)")),
        }
    }
}

/// Optimizer choice plus hyperparameters. Unused fields are ignored by the
/// kinds that do not need them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Momentum coefficient.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerConfig {
            kind,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd() -> Self {
        Self::new(OptimizerKind::Sgd)
    }

    pub fn momentum(gamma: f64) -> Self {
        OptimizerConfig {
            momentum: gamma,
            ..Self::new(OptimizerKind::Momentum)
        }
    }

    pub fn adam() -> Self {
        Self::new(OptimizerKind::Adam)
    }

    /// Identifier used in policy database keys, e.g. `momentum(0.9)`.
    pub fn id(&self) -> String {
        match self.kind {
            OptimizerKind::Sgd => "sgd".into(),
            OptimizerKind::Momentum => format!("momentum({})", self.momentum),
            OptimizerKind::Adam => format!("adam({},{},{})", self.beta1, self.beta2, self.eps),
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::sgd()
    }
}

/// Per-run optimizer accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerState {
    Sgd,
    Momentum {
        gamma: f64,
        velocity: ParamVector,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        /// First moment.
        m: ParamVector,
        /// Second moment.
        v: ParamVector,
        step: u64,
    },
}

fn check_range(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), OptimError> {
    if ok {
        Ok(())
    } else {
        Err(OptimError::BadHyperparameter { name, value, range })
    }
}

/// Fresh zero-initialized state for `param_len` parameters.
pub fn make_optimizer(config: &OptimizerConfig, param_len: usize) -> Result<OptimizerState, OptimError> {
    match config.kind {
        OptimizerKind::Sgd => Ok(OptimizerState::Sgd),
        OptimizerKind::Momentum => {
            let g = config.momentum;
            check_range("momentum", g, (0.0..1.0).contains(&g), "[0,1)")?;
            Ok(OptimizerState::Momentum {
                gamma: g,
                velocity: ParamVector::zeros(param_len),
            })
        }
        OptimizerKind::Adam => {
            check_range("beta1", config.beta1, config.beta1 > 0.0 && config.beta1 < 1.0, "(0,1)")?;
            check_range("beta2", config.beta2, config.beta2 > 0.0 && config.beta2 < 1.0, "(0,1)")?;
            check_range("eps", config.eps, config.eps > 0.0 && config.eps.is_finite(), "(0,inf)")?;
            Ok(OptimizerState::Adam {
                beta1: config.beta1,
                beta2: config.beta2,
                eps: config.eps,
                m: ParamVector::zeros(param_len),
                v: ParamVector::zeros(param_len),
                step: 0,
            })
        }
    }
}

impl OptimizerState {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerState::Sgd => OptimizerKind::Sgd,
            OptimizerState::Momentum { .. } => OptimizerKind::Momentum,
            OptimizerState::Adam { .. } => OptimizerKind::Adam,
        }
    }

    /// Applies one update to `theta` in place. On error neither `theta` nor
    /// the state is modified.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<(), OptimError> {
        check_inputs(theta, grad, lr)?;
        match self {
            OptimizerState::Sgd => {
                let next: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| t - lr * g).collect();
                commit(theta, &next)
            }
            OptimizerState::Momentum { gamma, velocity } => {
                if velocity.len() != theta.len() {
                    return Err(OptimError::LengthMismatch {
                        params: theta.len(),
                        what: "velocity",
                        got: velocity.len(),
                    });
                }
                let v_next: Vec<f64> = velocity.iter().zip(grad).map(|(v, g)| *gamma * v - lr * g).collect();
                let next: Vec<f64> = theta.iter().zip(&v_next).map(|(t, v)| t + v).collect();
                commit(theta, &next)?;
                velocity.0 = v_next;
                Ok(())
            }
            OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                step,
            } => {
                if m.len() != theta.len() || v.len() != theta.len() {
                    return Err(OptimError::LengthMismatch {
                        params: theta.len(),
                        what: "moment estimates",
                        got: m.len().min(v.len()),
                    });
                }
                let t = *step + 1;
                let c1 = 1.0 - beta1.powf(t as f64);
                let c2 = 1.0 - beta2.powf(t as f64);
                let mut m_next = Vec::with_capacity(theta.len());
                let mut v_next = Vec::with_capacity(theta.len());
                let mut next = Vec::with_capacity(theta.len());
                for i in 0..theta.len() {
                    let g = grad[i];
                    let mi = *beta1 * m[i] + (1.0 - *beta1) * g;
                    let vi = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let m_hat = mi / c1;
                    let v_hat = vi / c2;
                    next.push(theta[i] - lr * m_hat / (v_hat.sqrt() + *eps));
                    m_next.push(mi);
                    v_next.push(vi);
                }
                commit(theta, &next)?;
                m.0 = m_next;
                v.0 = v_next;
                *step = t;
                Ok(())
            }
        }
    }
}

fn check_inputs(theta: &[f64], grad: &[f64], lr: f64) -> Result<(), OptimError> {
    if theta.len() != grad.len() {
        return Err(OptimError::LengthMismatch {
            params: theta.len(),
            what: "gradient",
            got: grad.len(),
        });
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(OptimError::BadLearningRate(lr));
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(OptimError::NonFinite("parameters"));
    }
    if !grad.iter().all(|v| v.is_finite()) {
        return Err(OptimError::NonFinite("gradient"));
    }
    Ok(())
}

fn commit(theta: &mut [f64], next: &[f64]) -> Result<(), OptimError> {
    if !next.iter().all(|v| v.is_finite()) {
        return Err(OptimError::NonFinite("updated parameters"));
    }
    theta.copy_from_slice(next);
    Ok(())
}

/// `theta - lr * grad`.
pub fn sgd_step(theta: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector, OptimError> {
    let mut out = theta.clone();
    OptimizerState::Sgd.step(&mut out, grad, lr)?;
    Ok(out)
}

fn expect_kind(state: &OptimizerState, expected: OptimizerKind) -> Result<(), OptimError> {
    if state.kind() == expected {
        Ok(())
    } else {
        Err(OptimError::WrongKind {
            expected,
            got: state.kind(),
        })
    }
}

/// `V' = gamma*V - lr*grad`, `theta' = theta + V'`.
pub fn momentum_step(
    theta: &ParamVector,
    state: &OptimizerState,
    grad: &ParamVector,
    lr: f64,
) -> Result<(ParamVector, OptimizerState), OptimError> {
    expect_kind(state, OptimizerKind::Momentum)?;
    let mut out = theta.clone();
    let mut next = state.clone();
    next.step(&mut out, grad, lr)?;
    Ok((out, next))
}

/// Bias-corrected Adam step; epsilon is added outside the square root.
pub fn adam_step(
    theta: &ParamVector,
    state: &OptimizerState,
    grad: &ParamVector,
    lr: f64,
) -> Result<(ParamVector, OptimizerState), OptimError> {
    expect_kind(state, OptimizerKind::Adam)?;
    let mut out = theta.clone();
    let mut next = state.clone();
    next.step(&mut out, grad, lr)?;
    Ok((out, next))
}
