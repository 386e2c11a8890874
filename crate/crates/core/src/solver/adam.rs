use crate::geometry::Point2;

use super::SolverConfig;

/// Adam moment state for a planar iterate.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Point2,
    v: Point2,
    t: i32,
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: Point2::default(),
            v: Point2::default(),
            t: 0,
        }
    }

    pub fn from_config(config: &SolverConfig) -> Self {
        Self::new(config.adam_beta1, config.adam_beta2, config.adam_eps)
    }

    /// Bias-corrected update direction for gradient `g`; multiply by the
    /// learning rate and subtract.
    pub fn direction(&mut self, g: Point2) -> Point2 {
        self.t += 1;
        self.m = self.m * self.beta1 + g * (1.0 - self.beta1);
        let sq = Point2::new(g.x * g.x, g.y * g.y);
        self.v = self.v * self.beta2 + sq * (1.0 - self.beta2);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        Point2::new(
            (self.m.x / c1) / ((self.v.x / c2).sqrt() + self.eps),
            (self.m.y / c1) / ((self.v.y / c2).sqrt() + self.eps),
        )
    }
}

/// Cosine decay from `1` to `0.01` over `total` steps.
pub(crate) fn schedule(step: usize, total: usize) -> f64 {
    let frac = step as f64 / total.max(1) as f64;
    0.01 + 0.99 * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}
