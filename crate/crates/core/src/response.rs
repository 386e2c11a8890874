//! Closed-form kernels for the death-probability objective and its first-order
//! objects, plus an independent Poisson-process simulation oracle.
//!
//! Every integral `∫₀^∞ f(t) dβ(t)` is taken over `(0, ∞)` and has total
//! β-mass `1 − β(0)`. For a discrete measure the closed-ball mass
//! `t ↦ μ(B̄(y, t))` is a step function whose jumps sit at the sorted atom
//! distances from `y`, so each integral is a finite sum over those segments.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance, Norm, Point2};
use crate::measure::DiscreteMeasure;
use crate::scenario::{DeathCurve, IncidentDistribution};

/// Demand points per parallel work item. Fixed so that reductions do not
/// depend on the thread count.
const CHUNK: usize = 128;

/// Incident draws frozen for the duration of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    points: Vec<Point2>,
    seed: u64,
}

impl SampleBatch {
    pub fn draw(eta: &IncidentDistribution, n: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        if n == 0 {
            return Err(Error::input("sample batch must be nonempty"));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n).map(|_| eta.sample(&mut rng)).collect();
        Ok(Self { points, seed })
    }

    pub fn from_points(points: Vec<Point2>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("sample batch must be nonempty"));
        }
        Ok(Self { points, seed })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A finite incident law: either a discrete η or the empirical law of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    points: Vec<Point2>,
    weights: Vec<f64>,
}

impl Demand {
    pub fn from_eta(eta: &IncidentDistribution) -> Result<Self> {
        let pts = eta
            .as_discrete()
            .ok_or_else(|| Error::precondition("exact evaluation needs a discrete incident law; use a sample batch"))?;
        Ok(Self {
            points: pts.iter().map(|d| d.location()).collect(),
            weights: pts.iter().map(|d| d.p).collect(),
        })
    }

    pub fn from_batch(batch: &SampleBatch) -> Self {
        let w = 1.0 / batch.len() as f64;
        Self {
            points: batch.points.clone(),
            weights: vec![w; batch.len()],
        }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn chunks(&self) -> impl IndexedParallelIterator<Item = (&[Point2], &[f64])> {
        self.points.par_chunks(CHUNK).zip(self.weights.par_chunks(CHUNK))
    }
}

/// Step-function view of `t ↦ μ(B̄(y, t))` for one demand point `y`.
///
/// Segment `j` is `[start[j], start[j+1])` with ball mass `W_j`;
/// `start[0] = 0` and the last segment runs to infinity.
#[derive(Debug, Clone)]
struct Segmentation {
    start: Vec<f64>,
    /// `e^{−W_j}` with `W_j` the ball mass on segment `j`
    decay: Vec<f64>,
    /// `1 − β(start[j])`
    tail: Vec<f64>,
    /// `Σ_{i ≥ j} e^{−W_i} Δβ_i`, one longer than `start`
    suffix: Vec<f64>,
    /// `∫ μ(B̄(y,t)) e^{−μ(B̄(y,t))} dβ(t)`
    weighted: f64,
}

impl Segmentation {
    fn new(mu: &DiscreteMeasure, y: Point2, curve: &DeathCurve, norm: Norm) -> Self {
        let mut d: Vec<(f64, f64)> = mu
            .atoms()
            .iter()
            .map(|a| (distance(a.location(), y, norm), a.weight))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut start = vec![0.0];
        let mut mass = vec![0.0];
        let mut cum = 0.0;
        for (r, w) in d {
            cum += w;
            if r == *start.last().unwrap() {
                *mass.last_mut().unwrap() = cum;
            } else {
                start.push(r);
                mass.push(cum);
            }
        }
        let tail: Vec<f64> = start.iter().map(|&t| curve.tail(t)).collect();
        let decay: Vec<f64> = mass.iter().map(|&w| (-w).exp()).collect();
        let m = start.len();
        let mut suffix = vec![0.0; m + 1];
        let mut weighted = 0.0;
        for j in (0..m).rev() {
            let next = if j + 1 < m { tail[j + 1] } else { 0.0 };
            let piece = decay[j] * (tail[j] - next);
            suffix[j] = suffix[j + 1] + piece;
            weighted += mass[j] * piece;
        }
        Self {
            start,
            decay,
            tail,
            suffix,
            weighted,
        }
    }

    /// `∫₀^∞ e^{−μ(B̄(y,t))} dβ(t)`
    fn survival(&self) -> f64 {
        self.suffix[0]
    }

    /// Segment containing `r`.
    fn locate(&self, r: f64) -> usize {
        self.start.partition_point(|&s| s <= r) - 1
    }

    /// `∫_r^∞ e^{−μ(B̄(y,t))} dβ(t)` and `e^{−μ(B̄(y,r))}`.
    fn upper(&self, r: f64, tail_r: f64) -> (f64, f64) {
        let j = self.locate(r);
        let next = if j + 1 < self.start.len() {
            self.tail[j + 1]
        } else {
            0.0
        };
        let d = self.decay[j];
        (d * (tail_r - next) + self.suffix[j + 1], d)
    }
}

/// `∫₀^∞ exp{−μ(B̄(y,t))} dβ(t)`.
pub fn survival_integral(mu: &DiscreteMeasure, y: Point2, curve: &DeathCurve, norm: Norm) -> f64 {
    Segmentation::new(mu, y, curve, norm).survival()
}

/// Objective against a finite demand law.
pub fn objective(mu: &DiscreteMeasure, demand: &Demand, curve: &DeathCurve, norm: Norm) -> f64 {
    let parts: Vec<f64> = demand
        .chunks()
        .map(|(pts, ws)| {
            pts.iter()
                .zip(ws)
                .map(|(&y, &w)| w * survival_integral(mu, y, curve, norm))
                .sum()
        })
        .collect();
    parts.iter().sum()
}

/// `J(μ)` for a discrete incident law.
pub fn objective_exact(
    mu: &DiscreteMeasure,
    eta: &IncidentDistribution,
    curve: &DeathCurve,
    norm: Norm,
) -> Result<f64> {
    Ok(objective(mu, &Demand::from_eta(eta)?, curve, norm))
}

/// Sample-average objective `J_n` over a frozen batch.
pub fn objective_mc(mu: &DiscreteMeasure, batch: &SampleBatch, curve: &DeathCurve, norm: Norm) -> f64 {
    objective(mu, &Demand::from_batch(batch), curve, norm)
}

/// Influence function `h_μ` prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct InfluenceField {
    segs: Vec<Segmentation>,
    points: Vec<Point2>,
    weights: Vec<f64>,
    budget: f64,
    curve: DeathCurve,
    norm: Norm,
}

impl InfluenceField {
    pub fn new(mu: &DiscreteMeasure, demand: &Demand, curve: &DeathCurve, norm: Norm) -> Self {
        let segs: Vec<Segmentation> = demand
            .points
            .par_iter()
            .map(|&y| Segmentation::new(mu, y, curve, norm))
            .collect();
        Self {
            segs,
            points: demand.points.clone(),
            weights: demand.weights.clone(),
            budget: mu.budget(),
            curve: *curve,
            norm,
        }
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// `J(μ)` as a by-product of the segmentation.
    pub fn objective(&self) -> f64 {
        self.segs.iter().zip(&self.weights).map(|(s, w)| w * s.survival()).sum()
    }

    /// `h_μ(x) = ∫η(dy) [∫ μ(B̄) e^{−μ(B̄)} dβ − b ∫_{‖x−y‖}^∞ e^{−μ(B̄)} dβ]`.
    pub fn value(&self, x: Point2) -> f64 {
        let mut h = 0.0;
        for ((s, &y), &w) in self.segs.iter().zip(&self.points).zip(&self.weights) {
            let r = distance(x, y, self.norm);
            let (upper, _) = s.upper(r, self.curve.tail(r));
            h += w * (s.weighted - self.budget * upper);
        }
        h
    }

    /// `h_μ(x)` and the lenient Euclidean gradient in one pass.
    pub fn value_and_gradient(&self, x: Point2) -> (f64, Point2) {
        let mut h = 0.0;
        let mut g = Point2::default();
        for ((s, &y), &w) in self.segs.iter().zip(&self.points).zip(&self.weights) {
            let v = x - y;
            let r = distance(x, y, self.norm);
            let (tail_r, slope) = self.curve.tail_and_slope(r);
            let (upper, d) = s.upper(r, tail_r);
            h += w * (s.weighted - self.budget * upper);
            if self.norm == Norm::L2 && r > 1e-9 {
                g = g + v * (w * d * slope / r);
            }
        }
        (h, g * self.budget)
    }

    /// `∇h_μ(x)` under the Euclidean norm. Demand points coinciding with `x`
    /// contribute nothing when `strict` is false and are an error otherwise.
    fn gradient_impl(&self, x: Point2, strict: bool) -> Result<Point2> {
        if self.norm != Norm::L2 {
            return Err(Error::precondition(
                "influence gradient is only available for the L2 norm",
            ));
        }
        let mut g = Point2::default();
        for ((s, &y), &w) in self.segs.iter().zip(&self.points).zip(&self.weights) {
            let v = x - y;
            let r = v.norm();
            if r <= 1e-9 {
                if strict && w > 0.0 {
                    return Err(Error::SingularGradient);
                }
                continue;
            }
            let d = s.decay[s.locate(r)];
            let scale = w * d * self.curve.slope(r) / r;
            g = g + v * scale;
        }
        Ok(g * self.budget)
    }

    pub fn gradient(&self, x: Point2) -> Result<Point2> {
        self.gradient_impl(x, true)
    }

    /// Gradient with coincident demand points skipped; used by the
    /// subproblem optimizer where landing on a demand point is routine.
    pub fn gradient_lenient(&self, x: Point2) -> Point2 {
        self.gradient_impl(x, false).unwrap_or_default()
    }
}

pub fn influence(mu: &DiscreteMeasure, x: Point2, demand: &Demand, curve: &DeathCurve, norm: Norm) -> f64 {
    InfluenceField::new(mu, demand, curve, norm).value(x)
}

pub fn influence_gradient(mu: &DiscreteMeasure, x: Point2, demand: &Demand, curve: &DeathCurve) -> Result<Point2> {
    InfluenceField::new(mu, demand, curve, Norm::L2).gradient(x)
}

/// von Mises derivative `J′_μ(ν − μ) = (1/b) Σ_ν wᵢ h_μ(xᵢ)`.
pub fn directional_derivative(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    demand: &Demand,
    curve: &DeathCurve,
    norm: Norm,
) -> Result<f64> {
    let b = mu.budget();
    if (b - nu.budget()).abs() > crate::measure::BUDGET_RTOL * b {
        return Err(Error::BudgetMismatch(b, nu.budget()));
    }
    let field = InfluenceField::new(mu, demand, curve, norm);
    Ok(nu
        .atoms()
        .iter()
        .map(|a| a.weight * field.value(a.location()))
        .sum::<f64>()
        / b)
}

/// Distance ordering of a fixed support seen from one demand point.
#[derive(Debug, Clone)]
struct SupportOrder {
    /// support indices sorted by distance
    order: Vec<u32>,
    /// end (exclusive, into `order`) of each equal-distance group
    group_end: Vec<u32>,
    /// `β(D_{g+1}) − β(D_g)`, with `D_{G} = ∞`
    dbeta: Vec<f64>,
    /// `β(D_0) − β(0)`: the mass-free segment before the nearest atom
    lead: f64,
}

impl SupportOrder {
    fn new(support: &[Point2], y: Point2, curve: &DeathCurve, norm: Norm) -> Self {
        let d: Vec<f64> = support.iter().map(|&x| distance(x, y, norm)).collect();
        let mut order: Vec<u32> = (0..support.len() as u32).collect();
        order.sort_by(|&a, &b| d[a as usize].total_cmp(&d[b as usize]));
        let mut group_end = Vec::new();
        let mut dists = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            let r = d[i as usize];
            if dists.last() == Some(&r) {
                *group_end.last_mut().unwrap() = k as u32 + 1;
            } else {
                dists.push(r);
                group_end.push(k as u32 + 1);
            }
        }
        let tails: Vec<f64> = dists.iter().map(|&r| curve.tail(r)).collect();
        let dbeta = (0..tails.len())
            .map(|g| tails[g] - tails.get(g + 1).copied().unwrap_or(0.0))
            .collect();
        Self {
            order,
            group_end,
            dbeta,
            lead: curve.tail(0.0) - tails[0],
        }
    }

    /// Returns `w·J_y(p)` and adds `w·∂J_y/∂p` into `grad`; `factor[i]` is
    /// `e^{−b pᵢ}`.
    fn accumulate(&self, factor: &[f64], budget: f64, w: f64, pieces: &mut Vec<f64>, grad: Option<&mut [f64]>) -> f64 {
        let groups = self.group_end.len();
        pieces.clear();
        let mut decay = 1.0;
        let mut begin = 0usize;
        for g in 0..groups {
            let end = self.group_end[g] as usize;
            for &i in &self.order[begin..end] {
                decay *= factor[i as usize];
            }
            pieces.push(decay * self.dbeta[g]);
            begin = end;
        }
        let value = self.lead + pieces.iter().sum::<f64>();
        if let Some(grad) = grad {
            let mut suffix = 0.0;
            let mut end = self.order.len();
            for g in (0..groups).rev() {
                suffix += pieces[g];
                let begin = if g == 0 { 0 } else { self.group_end[g - 1] as usize };
                for &i in &self.order[begin..end] {
                    grad[i as usize] -= w * budget * suffix;
                }
                end = begin;
            }
        }
        w * value
    }
}

/// `p ↦ J(Σ pᵢ b δ_{xᵢ})` on a fixed support, with its gradient. The distance
/// orderings are computed once, so each evaluation costs O(|demand|·|support|).
#[derive(Debug, Clone)]
pub struct WeightObjective {
    orders: Vec<SupportOrder>,
    weights: Vec<f64>,
    dim: usize,
    budget: f64,
}

impl WeightObjective {
    pub fn new(support: &[Point2], budget: f64, demand: &Demand, curve: &DeathCurve, norm: Norm) -> Self {
        let orders = demand
            .points
            .par_iter()
            .map(|&y| SupportOrder::new(support, y, curve, norm))
            .collect();
        Self {
            orders,
            weights: demand.weights.clone(),
            dim: support.len(),
            budget,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn factors(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.dim, "weight vector length");
        p.iter().map(|&v| (-self.budget * v).exp()).collect()
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let factor = self.factors(p);
        let parts: Vec<f64> = self
            .orders
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(os, ws)| {
                let mut pieces = Vec::new();
                os.iter()
                    .zip(ws)
                    .map(|(o, &w)| o.accumulate(&factor, self.budget, w, &mut pieces, None))
                    .sum()
            })
            .collect();
        parts.iter().sum()
    }

    pub fn value_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let factor = self.factors(p);
        let parts: Vec<(f64, Vec<f64>)> = self
            .orders
            .par_chunks(CHUNK)
            .zip(self.weights.par_chunks(CHUNK))
            .map(|(os, ws)| {
                let mut g = vec![0.0; self.dim];
                let mut pieces = Vec::new();
                let v = os
                    .iter()
                    .zip(ws)
                    .map(|(o, &w)| o.accumulate(&factor, self.budget, w, &mut pieces, Some(&mut g)))
                    .sum();
                (v, g)
            })
            .collect();
        let mut grad = vec![0.0; self.dim];
        let mut value = 0.0;
        for (v, g) in parts {
            value += v;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        (value, grad)
    }
}

/// Simplex feasibility tolerance for weight vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

pub(crate) fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::input("weight vector is empty"));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| !v.is_finite() || v < -SIMPLEX_TOL) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::precondition("weights are off the unit simplex"));
    }
    Ok(())
}

/// `∂J/∂pᵢ = −b ∫η(dy) ∫_{‖xᵢ−y‖}^∞ exp{−μ_p(B̄(y,t))} dβ(t)`.
pub fn correction_gradient(
    support: &[Point2],
    p: &[f64],
    budget: f64,
    demand: &Demand,
    curve: &DeathCurve,
    norm: Norm,
) -> Result<Vec<f64>> {
    if support.is_empty() || support.len() != p.len() {
        return Err(Error::input("support must be nonempty and match the weight vector"));
    }
    check_simplex(p)?;
    Ok(WeightObjective::new(support, budget, demand, curve, norm)
        .value_and_gradient(p)
        .1)
}

/// Monte-Carlo estimate of `E[β(R)] − β(0)` under the Poisson volunteer model,
/// with its standard error.
pub fn simulate_objective<R: Rng + ?Sized>(
    mu: &DiscreteMeasure,
    eta: &IncidentDistribution,
    curve: &DeathCurve,
    norm: Norm,
    reps: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::input("reps must be at least 1"));
    }
    let b = mu.budget();
    let poisson = Poisson::new(b).map_err(|e| Error::input(format!("poisson rate: {e}")))?;
    let locs = mu.locations();
    let mut cdf = Vec::with_capacity(locs.len());
    let mut acc = 0.0;
    for a in mu.atoms() {
        acc += a.weight;
        cdf.push(acc);
    }
    let base = curve.tail(0.0);
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=reps {
        let y = eta.sample(rng);
        let n = poisson.sample(rng) as u64;
        let mut r = f64::INFINITY;
        for _ in 0..n {
            let u = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u).min(locs.len() - 1);
            r = r.min(distance(locs[i], y, norm));
        }
        // β(R) − β(0), with β(∞) = 1
        let v = base - curve.tail(r);
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let se = if reps > 1 {
        (m2 / (reps - 1) as f64 / reps as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, se))
}

/// Smoothness constant `L = 2b + 1` of the objective in total variation.
pub fn smoothness_constant(b: f64) -> f64 {
    2.0 * b + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Values below come from direct high-precision evaluation of the
    // segment formulas with the default curve.
    const ONE_MINUS_BETA0: f64 = 0.336_484_528_766_78;
    const SURV_AT_Y: f64 = 0.123_785_740_405_559_12;
    const SURV_AT_1: f64 = 0.159_049_304_664_632_04;
    const TWO_POINT_J: f64 = 0.137_099_170_040_135_9;
    const THREE_POINT_H: f64 = -0.003_077_578_457_398_50;

    fn curve() -> DeathCurve {
        DeathCurve::default()
    }

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn atoms(v: &[(Point2, f64)]) -> DiscreteMeasure {
        let b = v.iter().map(|a| a.1).sum();
        DiscreteMeasure::new(v.iter().map(|&(x, w)| Atom::new(x, w)).collect(), b).unwrap()
    }

    #[test]
    fn survival_examples() {
        let c = curve();
        let y = p(0.0, 0.0);
        // vanishing budget: e^{-W} → 1
        let tiny = atoms(&[(p(0.3, 0.1), 1e-300)]);
        assert!((survival_integral(&tiny, y, &c, Norm::L2) - ONE_MINUS_BETA0).abs() < 1e-15);
        let at = atoms(&[(y, 1.0)]);
        assert!((survival_integral(&at, y, &c, Norm::L2) - SURV_AT_Y).abs() < 1e-15);
        let away = atoms(&[(p(1.0, 0.0), 1.0)]);
        assert!((survival_integral(&away, y, &c, Norm::L2) - SURV_AT_1).abs() < 1e-15);
    }

    #[test]
    fn tied_distances_form_one_segment() {
        let c = curve();
        let tied = atoms(&[(p(1.0, 0.0), 0.4), (p(0.0, 1.0), 0.6)]);
        let one = atoms(&[(p(1.0, 0.0), 1.0)]);
        let y = p(0.0, 0.0);
        assert!((survival_integral(&tied, y, &c, Norm::L2) - survival_integral(&one, y, &c, Norm::L2)).abs() < 1e-16);
    }

    #[test]
    fn objective_examples() {
        let c = curve();
        let y = p(0.2, 0.1);
        let eta = IncidentDistribution::discrete(&[(y, 1.0)]).unwrap();
        let mu = atoms(&[(y, 1.0)]);
        assert!((objective_exact(&mu, &eta, &c, Norm::L2).unwrap() - SURV_AT_Y).abs() < 1e-15);

        let eta2 = IncidentDistribution::discrete(&[(p(0.0, 0.0), 0.5), (p(1.0, 0.0), 0.5)]).unwrap();
        let opt = atoms(&[(p(0.0, 0.0), 0.5), (p(1.0, 0.0), 0.5)]);
        assert!((objective_exact(&opt, &eta2, &c, Norm::L2).unwrap() - TWO_POINT_J).abs() < 1e-15);

        let uni = IncidentDistribution::UniformRect {
            rect: crate::geometry::Rect::new(p(0.0, 0.0), p(1.0, 1.0)).unwrap(),
        };
        assert!(objective_exact(&opt, &uni, &c, Norm::L2).is_err());
    }

    #[test]
    fn mc_objective_identities() {
        let c = curve();
        let mu = atoms(&[(p(0.1, 0.2), 0.7), (p(0.8, 0.4), 1.3)]);
        let y = p(0.5, 0.5);
        let one = SampleBatch::from_points(vec![y], 0).unwrap();
        assert!((objective_mc(&mu, &one, &c, Norm::L2) - survival_integral(&mu, y, &c, Norm::L2)).abs() < 1e-16);

        // multiplicities proportional to λ = (1/4, 3/4)
        let (a, b) = (p(0.0, 0.0), p(1.0, 1.0));
        let eta = IncidentDistribution::discrete(&[(a, 0.25), (b, 0.75)]).unwrap();
        let batch = SampleBatch::from_points(vec![a, b, b, b], 0).unwrap();
        let exact = objective_exact(&mu, &eta, &c, Norm::L2).unwrap();
        assert!((objective_mc(&mu, &batch, &c, Norm::L2) - exact).abs() < 1e-15);
    }

    #[test]
    fn mc_objective_self_consistency() {
        let c = curve();
        let mu = atoms(&[(p(0.3, 0.3), 0.5), (p(0.7, 0.6), 0.5)]);
        let eta = IncidentDistribution::UniformRect {
            rect: crate::geometry::Rect::new(p(0.0, 0.0), p(1.0, 1.0)).unwrap(),
        };
        let n = 100_000;
        let b1 = SampleBatch::draw(&eta, n, 1).unwrap();
        let b2 = SampleBatch::draw(&eta, 2 * n, 2).unwrap();
        let vals = |b: &SampleBatch| -> Vec<f64> {
            b.points()
                .iter()
                .map(|&y| survival_integral(&mu, y, &c, Norm::L2))
                .collect()
        };
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var / v.len() as f64)
        };
        let (m1, v1) = stats(&vals(&b1));
        let (m2, v2) = stats(&vals(&b2));
        assert!((m1 - objective_mc(&mu, &b1, &c, Norm::L2)).abs() < 1e-12);
        assert!((m1 - m2).abs() < 3.0 * (v1 + v2).sqrt());
    }

    #[test]
    fn influence_examples() {
        let c = curve();
        let y = p(0.0, 0.0);
        let demand = Demand::from_eta(&IncidentDistribution::discrete(&[(y, 1.0)]).unwrap()).unwrap();
        let mu = atoms(&[(y, 2.0)]);
        assert!(influence(&mu, y, &demand, &c, Norm::L2).abs() < 1e-15);

        // μ = b δ_z with ‖z − y‖ = 1, x at distance 0.4
        let b = 1.5;
        let mu = atoms(&[(p(1.0, 0.0), b)]);
        let x = p(0.0, 0.4);
        let expect = -b * (c.beta(1.0).unwrap() - c.beta(0.4).unwrap());
        assert!((influence(&mu, x, &demand, &c, Norm::L2) - expect).abs() < 1e-15);
        assert!(expect < 0.0);
    }

    pub(crate) fn triangle_eta() -> IncidentDistribution {
        let third = 1.0 / 3.0;
        IncidentDistribution::discrete(&[
            (p(0.0, 0.0), third),
            (p(1.0, 0.0), third),
            (p(0.5, 3f64.sqrt() / 2.0), third),
        ])
        .unwrap()
    }

    #[test]
    fn three_point_centroid_influence() {
        let c = curve();
        let eta = triangle_eta();
        let demand = Demand::from_eta(&eta).unwrap();
        let pts: Vec<_> = demand.points().to_vec();
        let mu = atoms(&pts.iter().map(|&q| (q, 1.0 / 3.0)).collect::<Vec<_>>());
        let o = p(0.5, 0.5 / 3f64.sqrt());
        let h = influence(&mu, o, &demand, &c, Norm::L2);
        assert!((h - THREE_POINT_H).abs() < 1e-14, "{h}");
        // rounded published value (1/3) e^{-1/3} (−0.0129)
        assert!((h - (-0.0129 * (-1.0f64 / 3.0).exp() / 3.0)).abs() < 2e-4);
        let g = influence_gradient(&mu, o, &demand, &c).unwrap();
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn gradient_singular_and_radial() {
        let c = curve();
        let y = p(0.5, 0.5);
        let demand = Demand::from_eta(&IncidentDistribution::discrete(&[(y, 1.0)]).unwrap()).unwrap();
        let mu = atoms(&[(y, 1.0)]);
        assert!(matches!(
            influence_gradient(&mu, y, &demand, &c),
            Err(Error::SingularGradient)
        ));
        let x = p(0.9, 0.2);
        let g = influence_gradient(&mu, x, &demand, &c).unwrap();
        assert!(g.dot(x - y) > 0.0);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let c = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let eta = random_eta(&mut rng, 5);
            let demand = Demand::from_eta(&eta).unwrap();
            let b = 1.0 + 2.0 * rng.random::<f64>();
            let mu = random_measure(&mut rng, 4, b);
            let x = p(rng.random(), rng.random());
            let field = InfluenceField::new(&mu, &demand, &c, Norm::L2);
            let g = field.gradient(x).unwrap();
            let hstep = 1e-5;
            let fx = (field.value(x + p(hstep, 0.0)) - field.value(x - p(hstep, 0.0))) / (2.0 * hstep);
            let fy = (field.value(x + p(0.0, hstep)) - field.value(x - p(0.0, hstep))) / (2.0 * hstep);
            let fd = p(fx, fy);
            assert!((fd - g).norm() <= 1e-4 * g.norm().max(1e-8), "{g:?} vs {fd:?}");
        }
    }

    pub(crate) fn random_measure<R: Rng>(rng: &mut R, n: usize, b: f64) -> DiscreteMeasure {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = w.iter().sum();
        let a = w
            .iter()
            .map(|&wi| Atom::new(p(rng.random(), rng.random()), wi * b / s))
            .collect();
        DiscreteMeasure::new(a, b).unwrap()
    }

    pub(crate) fn random_eta<R: Rng>(rng: &mut R, n: usize) -> IncidentDistribution {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = w.iter().sum();
        let mut pts: Vec<(Point2, f64)> = w.iter().map(|&wi| (p(rng.random(), rng.random()), wi / s)).collect();
        let resid = 1.0 - pts.iter().map(|q| q.1).sum::<f64>();
        pts[0].1 += resid;
        IncidentDistribution::discrete(&pts).unwrap()
    }

    #[test]
    fn directional_derivative_examples() {
        let c = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let eta = random_eta(&mut rng, 4);
        let demand = Demand::from_eta(&eta).unwrap();
        let mu = random_measure(&mut rng, 3, 2.0);
        assert!(directional_derivative(&mu, &mu, &demand, &c, Norm::L2).unwrap().abs() < 1e-14);

        let x = p(0.4, 0.6);
        let dirac = DiscreteMeasure::dirac(x, 2.0).unwrap();
        let dd = directional_derivative(&mu, &dirac, &demand, &c, Norm::L2).unwrap();
        assert!((dd - influence(&mu, x, &demand, &c, Norm::L2)).abs() < 1e-15);

        let other = random_measure(&mut rng, 3, 1.0);
        assert!(directional_derivative(&mu, &other, &demand, &c, Norm::L2).is_err());
    }

    #[test]
    fn directional_derivative_matches_finite_difference() {
        let c = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let eta = random_eta(&mut rng, 4);
            let demand = Demand::from_eta(&eta).unwrap();
            let mu = random_measure(&mut rng, 3, 1.5);
            let nu = random_measure(&mut rng, 4, 1.5);
            let t = 1e-5;
            let j0 = objective(&mu, &demand, &c, Norm::L2);
            let j1 = objective(&mu.mix(&nu, t).unwrap(), &demand, &c, Norm::L2);
            let fd = (j1 - j0) / t;
            let dd = directional_derivative(&mu, &nu, &demand, &c, Norm::L2).unwrap();
            assert!((fd - dd).abs() <= 1e-3 * dd.abs().max(1e-6), "{fd} vs {dd}");
        }
    }

    #[test]
    fn correction_gradient_examples() {
        let c = curve();
        let (y1, y2) = (p(0.0, 0.0), p(1.0, 0.0));
        let eta = IncidentDistribution::discrete(&[(y1, 0.5), (y2, 0.5)]).unwrap();
        let demand = Demand::from_eta(&eta).unwrap();
        let g = correction_gradient(&[y1, y2], &[0.5, 0.5], 1.0, &demand, &c, Norm::L2).unwrap();
        assert!((g[0] - g[1]).abs() < 1e-16);

        // one support point at distance d from a single demand point:
        // J(p) = (β(d) − β(0)) + e^{−b p}(1 − β(d)), so dJ/dp = −b e^{−b}(1 − β(d)).
        let y = p(0.0, 0.0);
        let single = Demand::from_eta(&IncidentDistribution::discrete(&[(y, 1.0)]).unwrap()).unwrap();
        let b = 1.7;
        let x = p(0.6, 0.8);
        let g = correction_gradient(&[x], &[1.0], b, &single, &c, Norm::L2).unwrap();
        let expect = -b * (-b).exp() * (1.0 - c.beta(1.0).unwrap());
        assert!((g[0] - expect).abs() < 1e-15);

        assert!(correction_gradient(&[x], &[0.9], b, &single, &c, Norm::L2).is_err());
    }

    #[test]
    fn correction_gradient_matches_finite_difference() {
        let c = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let eta = random_eta(&mut rng, 6);
            let demand = Demand::from_eta(&eta).unwrap();
            let support: Vec<Point2> = (0..5).map(|_| p(rng.random(), rng.random())).collect();
            let mut w: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 0.1).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let b = 2.5;
            let obj = WeightObjective::new(&support, b, &demand, &c, Norm::L2);
            let (v, g) = obj.value_and_gradient(&w);
            let mu = DiscreteMeasure::from_simplex(&support, &w, b).unwrap();
            assert!((v - objective(&mu, &demand, &c, Norm::L2)).abs() < 1e-14);
            for i in 0..5 {
                let h = 1e-6;
                let mut up = w.clone();
                up[i] += h;
                let mut dn = w.clone();
                dn[i] -= h;
                let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5, "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn simulation_examples() {
        let c = curve();
        let y = p(0.5, 0.5);
        let eta = IncidentDistribution::discrete(&[(y, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mu = atoms(&[(y, 1.0)]);
        let (est, se) = simulate_objective(&mu, &eta, &c, Norm::L2, 1_000_000, &mut rng).unwrap();
        assert!((est - SURV_AT_Y).abs() < 3.0 * se, "{est} ± {se}");

        let tiny = atoms(&[(y, 1e-9)]);
        let (est, se) = simulate_objective(&tiny, &eta, &c, Norm::L2, 10_000, &mut rng).unwrap();
        assert!((est - ONE_MINUS_BETA0).abs() <= 3.0 * se + 1e-12, "{est} ± {se}");
    }

    #[test]
    fn smoothness_constants() {
        assert_eq!(smoothness_constant(1.0), 3.0);
        assert_eq!(smoothness_constant(5.0), 11.0);
        assert_eq!(smoothness_constant(0.5), 2.0);
    }

    #[test]
    fn survival_decreases_when_mass_moves_closer() {
        let c = curve();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let mu = random_measure(&mut rng, 4, 1.0);
            let y = p(rng.random(), rng.random());
            let before = survival_integral(&mu, y, &c, Norm::L2);
            let k = rng.random_range(0..mu.len());
            let s: f64 = rng.random();
            let moved: Vec<Atom> = mu
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if i == k {
                        Atom::new(a.location() + (y - a.location()) * s, a.weight)
                    } else {
                        *a
                    }
                })
                .collect();
            let moved = DiscreteMeasure::new(moved, 1.0).unwrap();
            assert!(survival_integral(&moved, y, &c, Norm::L2) <= before + 1e-15);
        }
    }
}
