//! Adam with global gradient-norm clipping, and plateau bookkeeping.

use crate::autodiff::Matrix;
use crate::model::ParamSet;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    t: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros: Vec<Matrix> = params.values().iter().map(|p| Matrix::zeros(p.dim())).collect();
        Self {
            lr,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Rescales `grads` in place so their joint Euclidean norm is at most
    /// `clip`; returns the norm before clipping.
    pub fn clip(grads: &mut [Matrix], clip: f64) -> f64 {
        let norm = grads
            .iter()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if clip > 0.0 && norm > clip {
            let scale = clip / norm;
            grads.iter_mut().for_each(|g| *g *= scale);
        }
        norm
    }

    /// One clipped Adam update; returns the pre-clipping gradient norm.
    pub fn step(&mut self, params: &mut ParamSet, mut grads: Vec<Matrix>, clip: f64) -> f64 {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        let norm = Self::clip(&mut grads, clip);
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t);
        let bc2 = 1.0 - BETA2.powi(self.t);
        for (idx, g) in grads.iter().enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let p = &mut params.values_mut()[idx];
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + EPSILON);
                });
        }
        norm
    }
}

/// Early-stopping and learning-rate plateau counters over a score where
/// larger is better; ties are not improvements.
#[derive(Clone, Debug, Default)]
pub struct Plateau {
    best: Option<(f64, f64)>,
    /// Epochs since the last improvement.
    pub stale: usize,
    /// Epochs since the last improvement or learning-rate decay.
    pub since_decay: usize,
}

impl Plateau {
    /// Records a score `(primary, tie_break)`; returns true on improvement.
    pub fn observe(&mut self, score: (f64, f64)) -> bool {
        let better = match self.best {
            None => true,
            Some(b) => score.0 > b.0 || (score.0 == b.0 && score.1 > b.1),
        };
        if better {
            self.best = Some(score);
            self.stale = 0;
            self.since_decay = 0;
        } else {
            self.stale += 1;
            self.since_decay += 1;
        }
        better
    }

    pub fn best(&self) -> Option<(f64, f64)> {
        self.best
    }

    pub fn decayed(&mut self) {
        self.since_decay = 0;
    }
}
