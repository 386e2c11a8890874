//! Taxicab-norm specialization. Under L1 the influence function is concave on
//! every cell cut out by the vertical and horizontal lines through the demand
//! points, so optimal atoms sit on the grid of coordinate order statistics.

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, ConvexPolygon, Norm, Point2, Rect};
use crate::measure::DiscreteMeasure;
use crate::response::{Demand, InfluenceField, WeightObjective};
use crate::scenario::Problem;
use crate::solver::{fully_corrective_on, SolveTrace, SolverConfig, TraceRecord};

/// Product grid of the distinct demand coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn distinct_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn build_grid(points: &[Point2]) -> Result<DemandGrid> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::input("grid points must be finite"));
    }
    Ok(DemandGrid {
        xs: distinct_sorted(points.iter().map(|p| p.x).collect()),
        ys: distinct_sorted(points.iter().map(|p| p.y).collect()),
    })
}

impl DemandGrid {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// All `(xⱼ, yₖ)`, x-major.
    pub fn vertices(&self) -> Vec<Point2> {
        self.xs
            .iter()
            .flat_map(|&x| self.ys.iter().map(move |&y| Point2::new(x, y)))
            .collect()
    }

    pub fn is_vertex(&self, p: Point2) -> bool {
        self.xs.binary_search_by(|v| v.total_cmp(&p.x)).is_ok()
            && self.ys.binary_search_by(|v| v.total_cmp(&p.y)).is_ok()
    }

    pub fn rectangle_count(&self) -> usize {
        self.xs.len().saturating_sub(1) * self.ys.len().saturating_sub(1)
    }

    /// Cell `[xⱼ, xⱼ₊₁] × [yₖ, yₖ₊₁]` with `index = j·(|ys| − 1) + k`.
    pub fn rectangle(&self, index: usize) -> Option<Rect> {
        if index >= self.rectangle_count() {
            return None;
        }
        let per = self.ys.len() - 1;
        let (j, k) = (index / per, index % per);
        Rect::new(
            Point2::new(self.xs[j], self.ys[k]),
            Point2::new(self.xs[j + 1], self.ys[k + 1]),
        )
        .ok()
    }

    pub fn rectangles(&self) -> Vec<Rect> {
        (0..self.rectangle_count()).filter_map(|i| self.rectangle(i)).collect()
    }

    /// Vertices of every cell intersected with a convex domain: grid vertices
    /// inside it, its own vertices, and the crossings of its edges with the
    /// grid lines.
    pub fn cell_vertices_in(&self, domain: &ConvexPolygon) -> Vec<Point2> {
        let mut out: Vec<Point2> = self.vertices().into_iter().filter(|&v| domain.contains(v)).collect();
        out.extend_from_slice(domain.vertices());
        for (p, q) in domain.edges() {
            for &x in &self.xs {
                if (p.x < x && x < q.x) || (q.x < x && x < p.x) {
                    let t = (x - p.x) / (q.x - p.x);
                    out.push(Point2::new(x, p.y + t * (q.y - p.y)));
                }
            }
            for &y in &self.ys {
                if (p.y < y && y < q.y) || (q.y < y && y < p.y) {
                    let t = (y - p.y) / (q.y - p.y);
                    out.push(Point2::new(p.x + t * (q.x - p.x), y));
                }
            }
        }
        out
    }

    /// Smallest axis-aligned region holding the grid.
    pub fn hull(&self) -> ConvexPolygon {
        let (x0, x1) = (self.xs[0], *self.xs.last().unwrap());
        let (y0, y1) = (self.ys[0], *self.ys.last().unwrap());
        convex_hull(&[
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
        .expect("grid is nonempty")
    }
}

fn require_l1_discrete(problem: &Problem) -> Result<Demand> {
    if problem.norm != Norm::L1 {
        return Err(Error::precondition("the grid solver needs the L1 norm"));
    }
    if !problem.eta.is_discrete() {
        return Err(Error::precondition("the grid solver needs a discrete incident law"));
    }
    Demand::from_eta(&problem.eta)
}

/// Solves the L1 problem over weights on the demand grid `V`.
///
/// Moving any atom coordinatewise into the grid's bounding box shortens its
/// distance to every demand point, so the problem is posed on that box, whose
/// cell vertices are exactly `V`. Each trace row is one round of
/// `correction_steps` projected-gradient steps; `h★` is the exact minimum of
/// the influence over `V`.
pub fn l1_solve_on_grid(problem: &Problem, config: &SolverConfig) -> Result<(DiscreteMeasure, SolveTrace)> {
    config.validate()?;
    let demand = require_l1_discrete(problem)?;
    let start = Instant::now();
    let b = problem.budget;
    let grid = build_grid(demand.points())?;
    let support = grid.vertices();
    let kernel = WeightObjective::new(&support, b, &demand, &problem.curve, Norm::L1);
    let mut p = vec![1.0 / support.len() as f64; support.len()];
    let mut trace = SolveTrace::default();

    for k in 0..config.max_outer_iters {
        let mu = measure_on(&support, &p, b)?;
        let field = InfluenceField::new(&mu, &demand, &problem.curve, Norm::L1);
        let (x_star, h_star) =
            support
                .iter()
                .map(|&v| (v, field.value(v)))
                .fold(
                    (support[0], f64::INFINITY),
                    |best, c| if c.1 < best.1 { c } else { best },
                );
        trace.records.push(TraceRecord {
            k,
            objective: field.objective(),
            h_star,
            x_star,
            atoms: mu.len(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if h_star.abs() < config.fw_tolerance || k + 1 == config.max_outer_iters {
            return Ok((mu, trace));
        }
        let corr = fully_corrective_on(&kernel, &p, b, config)?;
        let stalled = corr.steps == 0;
        p = corr.weights;
        if stalled {
            let mu = measure_on(&support, &p, b)?;
            return Ok((mu, trace));
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn measure_on(support: &[Point2], p: &[f64], b: f64) -> Result<DiscreteMeasure> {
    let (s, w): (Vec<Point2>, Vec<f64>) = support
        .iter()
        .zip(p)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| (x, w))
        .unzip();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    DiscreteMeasure::from_simplex(&s, &w, b)
}

fn l1_field(mu: &DiscreteMeasure, problem: &Problem) -> Result<InfluenceField> {
    let demand = require_l1_discrete(problem)?;
    Ok(InfluenceField::new(mu, &demand, &problem.curve, Norm::L1))
}

fn cell(grid: &DemandGrid, rect_index: usize) -> Result<Rect> {
    grid.rectangle(rect_index)
        .ok_or_else(|| Error::input(format!("rectangle {rect_index} is out of range")))
}

/// Midpoint concavity of the L1 influence on random interior chords of one
/// cell.
pub fn concavity_check<R: Rng + ?Sized>(
    mu: &DiscreteMeasure,
    problem: &Problem,
    grid: &DemandGrid,
    rect_index: usize,
    trials: usize,
    rng: &mut R,
) -> Result<bool> {
    let field = l1_field(mu, problem)?;
    let rect = cell(grid, rect_index)?;
    Ok((0..trials).all(|_| {
        let (x1, x2) = (rect.sample(rng), rect.sample(rng));
        let t: f64 = rng.random();
        let mid = field.value(x1 * t + x2 * (1.0 - t));
        mid >= t * field.value(x1) + (1.0 - t) * field.value(x2) - 1e-10
    }))
}

/// Interior samples of one cell never beat its best corner.
pub fn vertex_argmin_check<R: Rng + ?Sized>(
    mu: &DiscreteMeasure,
    problem: &Problem,
    grid: &DemandGrid,
    rect_index: usize,
    sample_count: usize,
    rng: &mut R,
) -> Result<bool> {
    let field = l1_field(mu, problem)?;
    let rect = match grid.rectangle(rect_index) {
        Some(r) if r.area() > 0.0 => r,
        Some(_) => return Ok(true),
        None => return Err(cell(grid, rect_index).unwrap_err()),
    };
    let corner = rect
        .corners()
        .iter()
        .map(|&c| field.value(c))
        .fold(f64::INFINITY, f64::min);
    Ok((0..sample_count).all(|_| field.value(rect.sample(rng)) >= corner - 1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::objective_exact;
    use crate::scenario::{DeathCurve, IncidentDistribution};
    use crate::solver::{certify, fcfw_solve, two_point_optimum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn l1_problem(pts: &[(Point2, f64)], b: f64) -> Problem {
        let eta = IncidentDistribution::discrete(pts).unwrap();
        Problem::new(eta, b, Norm::L1, DeathCurve::default(), None).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(&[p(0.0, 0.0), p(1.0, 0.0), p(0.5, 0.8)]).unwrap();
        assert_eq!(g.xs(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.ys(), &[0.0, 0.8]);
        assert_eq!(g.vertices().len(), 6);
        assert_eq!(g.rectangle_count(), 2);

        let sq = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let g = build_grid(&sq).unwrap();
        assert_eq!(g.vertices().len(), 4);
        assert!(sq.iter().all(|&c| g.is_vertex(c)));
        assert_eq!(g.rectangle_count(), 1);

        let line: Vec<Point2> = (0..5).map(|i| p(i as f64, 0.0)).collect();
        let g = build_grid(&line).unwrap();
        assert_eq!(g.ys(), &[0.0]);
        assert_eq!(g.vertices().len(), 5);
        assert_eq!(g.rectangle_count(), 0);

        assert!(build_grid(&[]).is_err());
    }

    #[test]
    fn rectangles_tile_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point2> = (0..6).map(|_| p(rng.random(), rng.random())).collect();
        let g = build_grid(&pts).unwrap();
        let area: f64 = g.rectangles().iter().map(|r| r.area()).sum();
        let bb = (g.xs().last().unwrap() - g.xs()[0]) * (g.ys().last().unwrap() - g.ys()[0]);
        assert!((area - bb).abs() < 1e-12);
        assert_eq!(g.vertices().len(), g.xs().len() * g.ys().len());
    }

    #[test]
    fn grid_solver_matches_two_point_optimum() {
        let (y1, y2) = (p(0.0, 0.0), p(1.5, 0.0));
        let pr = l1_problem(&[(y1, 0.35), (y2, 0.65)], 2.0);
        let config = SolverConfig::default();
        let (mu, trace) = l1_solve_on_grid(&pr, &config).unwrap();
        let opt = two_point_optimum(y1, y2, 0.35, 0.65, 2.0).unwrap();
        let j = objective_exact(&mu, &pr.eta, &pr.curve, Norm::L1).unwrap();
        let j_opt = objective_exact(&opt, &pr.eta, &pr.curve, Norm::L1).unwrap();
        assert!((j - j_opt).abs() < 1e-9, "{j} vs {j_opt}");
        assert!(trace.last().unwrap().h_star > -1e-8);
    }

    #[test]
    fn grid_solution_dominates_free_support() {
        let pts = [(p(0.0, 0.0), 0.3), (p(1.0, 0.2), 0.3), (p(0.4, 0.9), 0.4)];
        let pr = l1_problem(&pts, 1.0);
        let config = SolverConfig {
            max_outer_iters: 60,
            ..SolverConfig::default()
        };
        let (grid_mu, _) = l1_solve_on_grid(&pr, &config).unwrap();
        let grid = build_grid(&pts.iter().map(|q| q.0).collect::<Vec<_>>()).unwrap();
        assert!(grid_mu.locations().iter().all(|&x| grid.is_vertex(x)));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (free_mu, _) = fcfw_solve(&pr, &config, &mut rng).unwrap();
        let jg = objective_exact(&grid_mu, &pr.eta, &pr.curve, Norm::L1).unwrap();
        let jf = objective_exact(&free_mu, &pr.eta, &pr.curve, Norm::L1).unwrap();
        assert!(jg <= jf + 1e-6, "{jg} vs {jf}");

        let demand = Demand::from_eta(&pr.eta).unwrap();
        let cert = certify(&grid_mu, &pr, &demand, 100, &config, &mut rng);
        assert!(cert.min_h >= -1e-4, "{cert:?}");
    }

    #[test]
    fn grid_solver_preconditions() {
        let pts = [(p(0.0, 0.0), 0.5), (p(1.0, 1.0), 0.5)];
        let eta = IncidentDistribution::discrete(&pts).unwrap();
        let l2 = Problem::new(eta, 1.0, Norm::L2, DeathCurve::default(), None).unwrap();
        assert!(matches!(
            l1_solve_on_grid(&l2, &SolverConfig::default()),
            Err(Error::Precondition(_))
        ));
        let uni = IncidentDistribution::UniformRect {
            rect: Rect::new(p(0.0, 0.0), p(1.0, 1.0)).unwrap(),
        };
        let cont = Problem::new(uni, 1.0, Norm::L1, DeathCurve::default(), None).unwrap();
        assert!(matches!(
            l1_solve_on_grid(&cont, &SolverConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Problem, DiscreteMeasure, DemandGrid) {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
        let s: f64 = w.iter().sum();
        let mut pts: Vec<(Point2, f64)> = w.iter().map(|&v| (p(rng.random(), rng.random()), v / s)).collect();
        let resid = 1.0 - pts.iter().map(|q| q.1).sum::<f64>();
        pts[0].1 += resid;
        let b = 0.5 + 3.0 * rng.random::<f64>();
        let pr = l1_problem(&pts, b);
        let atoms: Vec<Point2> = (0..4).map(|_| p(rng.random(), rng.random())).collect();
        let q = vec![0.25; 4];
        let mu = DiscreteMeasure::from_simplex(&atoms, &q, b).unwrap();
        let grid = build_grid(&pts.iter().map(|q| q.0).collect::<Vec<_>>()).unwrap();
        (pr, mu, grid)
    }

    #[test]
    fn cellwise_concavity_and_vertex_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let (pr, mu, grid) = random_instance(&mut rng, 5);
            for r in 0..grid.rectangle_count() {
                assert!(concavity_check(&mu, &pr, &grid, r, 50, &mut rng).unwrap());
                assert!(vertex_argmin_check(&mu, &pr, &grid, r, 50, &mut rng).unwrap());
            }
        }
    }

    #[test]
    fn degenerate_chord_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (pr, mu, grid) = random_instance(&mut rng, 4);
        let field = l1_field(&mu, &pr).unwrap();
        let x = grid.rectangle(0).unwrap().sample(&mut rng);
        let t = 0.3;
        let lhs = field.value(x * t + x * (1.0 - t));
        assert!((lhs - (t * field.value(x) + (1.0 - t) * field.value(x))).abs() < 1e-12);
        assert!(concavity_check(&mu, &pr, &grid, 10_000, 1, &mut rng).is_err());
    }

    #[test]
    fn cell_vertices_cover_domain_crossings() {
        let tri = convex_hull(&[p(0.0, 0.0), p(2.0, 0.0), p(0.0, 2.0)]).unwrap();
        let g = build_grid(&[p(0.5, 0.5), p(1.5, 1.5)]).unwrap();
        let c = g.cell_vertices_in(&tri);
        for q in [
            p(0.5, 0.5),
            p(0.5, 1.5),
            p(1.5, 0.5),
            p(0.5, 0.0),
            p(1.5, 0.0),
            p(0.0, 1.5),
        ] {
            assert!(c.iter().any(|&v| (v - q).norm() < 1e-12), "{q:?}");
        }
        assert!(!c.iter().any(|&v| (v - p(1.5, 1.5)).norm() < 1e-12));
    }
}
