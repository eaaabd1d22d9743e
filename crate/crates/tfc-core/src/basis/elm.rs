//! Extreme-learning-machine random features: a fixed random hidden layer whose
//! output weights are the unknowns.

use super::BasisError;
use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hidden-layer activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Sin,
    Swish,
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sin => "sin",
            Activation::Swish => "swish",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(s: &str) -> Option<Activation> {
        [
            Activation::Sin,
            Activation::Swish,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Relu,
        ]
        .into_iter()
        .find(|a| a.name() == s)
    }

    /// `d`-th derivative of the activation at `t`.
    ///
    /// The relu second and higher derivatives are taken as zero everywhere,
    /// and its first derivative at the kink as zero.
    pub fn derivative(self, t: f64, d: usize) -> f64 {
        match self {
            Activation::Sin => match d % 4 {
                0 => t.sin(),
                1 => t.cos(),
                2 => -t.sin(),
                _ => -t.cos(),
            },
            Activation::Tanh => {
                // d/dt P(tanh) = P'(tanh) (1 - tanh^2)
                let p = self_similar_poly(d, &[1.0, 0.0, -1.0]);
                horner(&p, t.tanh())
            }
            Activation::Sigmoid => {
                // d/dt P(s) = P'(s) s (1 - s)
                let p = self_similar_poly(d, &[0.0, 1.0, -1.0]);
                horner(&p, sigmoid(t))
            }
            Activation::Swish => {
                // (t s)^(d) = t s^(d) + d s^(d-1)
                let s_d = Activation::Sigmoid.derivative(t, d);
                if d == 0 {
                    t * s_d
                } else {
                    t * s_d + d as f64 * Activation::Sigmoid.derivative(t, d - 1)
                }
            }
            Activation::Relu => match d {
                0 => t.max(0.0),
                1 => {
                    if t > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            },
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// For an activation `a` with `a' = q(a)`, returns coefficients (lowest first)
/// of the polynomial `P_d` with `a^(d) = P_d(a)`.
fn self_similar_poly(d: usize, q: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..d {
        let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut next = vec![0.0; dp.len() + q.len()];
        for (i, a) in dp.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        p = next;
    }
    p
}

fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Draws hidden weights (`neurons x input_dim`) and biases i.i.d. uniform on
/// `[lo, hi)` from a ChaCha stream seeded with `seed`.
pub fn elm_init(
    seed: u64,
    neurons: usize,
    input_dim: usize,
    range: (f64, f64),
) -> Result<(DMatrix<f64>, DVector<f64>), BasisError> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(BasisError::InvalidRange { lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(lo, hi);
    let weights = DMatrix::from_fn(neurons, input_dim, |_, _| dist.sample(&mut rng));
    let biases = DVector::from_fn(neurons, |_, _| dist.sample(&mut rng));
    Ok((weights, biases))
}
