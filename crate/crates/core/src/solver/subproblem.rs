use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{ConvexPolygon, Norm, Point2};
use crate::l1;
use crate::measure::DiscreteMeasure;
use crate::response::{Demand, InfluenceField};
use crate::scenario::Problem;

use super::adam::{schedule, Adam};
use super::SolverConfig;

/// Demand points used to build an approximate L1 grid from a batch.
const L1_GRID_POINTS: usize = 48;
/// Lattice points refined by Adam during certification.
const REFINE_BEST: usize = 8;

/// `(x★, h★)` for the linear subproblem `min_x h_μ(x)` over the domain.
///
/// The candidate pool always holds the atoms of `μ`, so `h★ ≤ 0`.
pub fn minimize_influence<R: Rng + ?Sized>(
    mu: &DiscreteMeasure,
    problem: &Problem,
    demand: &Demand,
    config: &SolverConfig,
    rng: &mut R,
) -> (Point2, f64) {
    let field = InfluenceField::new(mu, demand, &problem.curve, problem.norm);
    minimize_on_field(mu, &field, problem, demand, config, rng)
}

pub(crate) fn minimize_on_field<R: Rng + ?Sized>(
    mu: &DiscreteMeasure,
    field: &InfluenceField,
    problem: &Problem,
    demand: &Demand,
    config: &SolverConfig,
    rng: &mut R,
) -> (Point2, f64) {
    let base: u64 = rng.random();
    let mut fixed = mu.locations();
    if problem.eta.is_discrete() {
        fixed.extend_from_slice(demand.points());
    }
    let searched = match problem.norm {
        Norm::L2 => adam_restarts(field, &problem.domain, config, base),
        Norm::L1 => {
            let mut pts = l1_candidates(&problem.domain, demand, problem.eta.is_discrete());
            pts.extend(random_points(&problem.domain, config.inner_restarts, base));
            evaluate(field, &pts)
        }
    };
    let (x, h) = best_of(searched.into_iter().chain(evaluate(field, &fixed)));
    // the atom-weighted mean of h is exactly zero; positives are rounding
    (x, h.min(0.0))
}

fn restart_rng(base: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(stream);
    r
}

fn random_points(domain: &ConvexPolygon, n: usize, base: u64) -> Vec<Point2> {
    (0..n)
        .map(|i| domain.sample_point(&mut restart_rng(base, i as u64)))
        .collect()
}

fn evaluate(field: &InfluenceField, pts: &[Point2]) -> Vec<(Point2, f64)> {
    pts.par_iter().map(|&x| (x, field.value(x))).collect()
}

/// First minimum in order, so ties resolve the same way on every run.
fn best_of(it: impl IntoIterator<Item = (Point2, f64)>) -> (Point2, f64) {
    it.into_iter().fold(
        (Point2::default(), f64::INFINITY),
        |best, c| if c.1 < best.1 { c } else { best },
    )
}

fn adam_restarts(
    field: &InfluenceField,
    domain: &ConvexPolygon,
    config: &SolverConfig,
    base: u64,
) -> Vec<(Point2, f64)> {
    let starts = random_points(domain, config.inner_restarts, base);
    starts
        .par_iter()
        .map(|&x| adam_descent(field, domain, x, config))
        .collect()
}

/// Projected Adam from `x`, returning the best iterate seen.
fn adam_descent(field: &InfluenceField, domain: &ConvexPolygon, x0: Point2, config: &SolverConfig) -> (Point2, f64) {
    let lr = config.adam_lr * domain.diameter();
    let mut adam = Adam::from_config(config);
    let mut x = domain.project(x0);
    let mut best = (x, f64::INFINITY);
    for t in 0..config.adam_steps {
        let (h, g) = field.value_and_gradient(x);
        if h < best.1 {
            best = (x, h);
        }
        let d = adam.direction(g);
        x = domain.project(x - d * (lr * schedule(t, config.adam_steps)));
    }
    let h = field.value(x);
    if h < best.1 {
        best = (x, h);
    }
    best
}

/// Minimizer candidates of a cellwise-concave influence. With discrete demand
/// the grid is exact and the candidates contain a global minimizer over the
/// domain; for a batch the grid is built from its leading draws.
fn l1_candidates(domain: &ConvexPolygon, demand: &Demand, discrete: bool) -> Vec<Point2> {
    let pts = demand.points();
    let pts = if discrete {
        pts
    } else {
        &pts[..pts.len().min(L1_GRID_POINTS)]
    };
    match l1::build_grid(pts) {
        Ok(grid) => grid.cell_vertices_in(domain),
        Err(_) => Vec::new(),
    }
}

/// Result of an optimality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub min_h: f64,
    pub argmin: Point2,
}

impl Certificate {
    /// Approximately optimal at tolerance `tau`.
    pub fn is_optimal(&self, tau: f64) -> bool {
        self.min_h >= -tau
    }
}

/// Global search for `min_x h_μ(x)` over the domain: a lattice sweep, then
/// Adam refinement from the best lattice points, the atoms and the demand
/// points. Under L1 the exact cell-vertex candidates are added.
pub fn certify<R: Rng + ?Sized>(
    mu: &DiscreteMeasure,
    problem: &Problem,
    demand: &Demand,
    grid_resolution: usize,
    config: &SolverConfig,
    rng: &mut R,
) -> Certificate {
    let field = InfluenceField::new(mu, demand, &problem.curve, problem.norm);
    let domain = &problem.domain;
    let mut sweep = sweep_points(domain, grid_resolution.max(1));
    if problem.norm == Norm::L1 {
        sweep.extend(l1_candidates(domain, demand, problem.eta.is_discrete()));
    }
    let mut evaluated = evaluate(&field, &sweep);

    if problem.norm == Norm::L2 {
        let mut order: Vec<usize> = (0..evaluated.len()).collect();
        order.sort_by(|&a, &b| evaluated[a].1.total_cmp(&evaluated[b].1));
        let mut starts: Vec<Point2> = order.iter().take(REFINE_BEST).map(|&i| evaluated[i].0).collect();
        starts.extend(mu.locations());
        if problem.eta.is_discrete() {
            starts.extend_from_slice(demand.points());
        }
        starts.extend(random_points(domain, config.inner_restarts, rng.random()));
        let refined: Vec<(Point2, f64)> = starts
            .par_iter()
            .map(|&x| adam_descent(&field, domain, x, config))
            .collect();
        evaluated.extend(refined);
    }
    let mut fixed = mu.locations();
    fixed.extend_from_slice(domain.vertices());
    if problem.eta.is_discrete() {
        fixed.extend_from_slice(demand.points());
    }
    evaluated.extend(evaluate(&field, &fixed));
    let (argmin, min_h) = best_of(evaluated);
    Certificate { min_h, argmin }
}

/// Lattice over the domain; degenerate domains are swept along their extent.
fn sweep_points(domain: &ConvexPolygon, n: usize) -> Vec<Point2> {
    let v = domain.vertices();
    match v.len() {
        1 => vec![v[0]],
        2 => (0..n)
            .map(|i| {
                let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                v[0] + (v[1] - v[0]) * t
            })
            .collect(),
        _ => domain.lattice(n),
    }
}
