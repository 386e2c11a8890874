//! Frank-Wolfe engines over measures of fixed mass.

mod adam;
mod correction;
mod oracle;
mod subproblem;

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Norm, Point2};
use crate::measure::{DiscreteMeasure, DEFAULT_MERGE_EPS, DEFAULT_WEIGHT_TOL};
use crate::response::{smoothness_constant, Demand, InfluenceField, SampleBatch, WeightObjective};
use crate::scenario::Problem;

pub use adam::Adam;
pub use correction::{fully_corrective, fully_corrective_on, kkt_residual, simplex_project, Correction};
pub use oracle::two_point_optimum;
pub use subproblem::{certify, minimize_influence, Certificate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    pub inner_restarts: usize,
    pub adam_steps: usize,
    /// In units of the domain diameter.
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub fw_tolerance: f64,
    pub correction_steps: usize,
    /// Initial projected-gradient step, scaled by `1/b²`.
    pub correction_lr: f64,
    pub mc_batch_size: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            inner_restarts: 16,
            adam_steps: 300,
            adam_lr: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            fw_tolerance: 1e-10,
            correction_steps: 200,
            correction_lr: 1.0,
            mc_batch_size: 1000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_outer_iters", self.max_outer_iters),
            ("inner_restarts", self.inner_restarts),
            ("adam_steps", self.adam_steps),
            ("correction_steps", self.correction_steps),
            ("mc_batch_size", self.mc_batch_size),
        ];
        if let Some((name, _)) = counts.iter().find(|c| c.1 == 0) {
            return Err(Error::input(format!("{name} must be at least 1")));
        }
        let rates = [("adam_lr", self.adam_lr), ("correction_lr", self.correction_lr)];
        if let Some((name, v)) = rates.iter().find(|r| !(r.1.is_finite() && r.1 > 0.0)) {
            return Err(Error::input(format!("{name} must be positive (got {v})")));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::input("Adam moment decays must lie in [0, 1)"));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::input("adam_eps must be positive"));
        }
        if self.fw_tolerance.is_nan() || self.fw_tolerance < 0.0 {
            return Err(Error::input("fw_tolerance must be nonnegative"));
        }
        Ok(())
    }
}

/// One outer iterate `μ_k` and its subproblem solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub objective: f64,
    pub h_star: f64,
    pub x_star: Point2,
    pub atoms: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "k,J,h_star,x_star_x,x_star_y,atoms,seconds";

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn h_stars(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h_star).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{:.6}",
                r.k, r.objective, r.h_star, r.x_star.x, r.x_star.y, r.atoms, r.seconds
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(TRACE_HEADER) {
            return Err(Error::input("trace header mismatch"));
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::input(format!("trace line {}: malformed", n + 2));
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |i: usize| f[i].trim().parse::<f64>().map_err(|_| bad());
            let int = |i: usize| f[i].trim().parse::<usize>().map_err(|_| bad());
            records.push(TraceRecord {
                k: int(0)?,
                objective: num(1)?,
                h_star: num(2)?,
                x_star: Point2::new(num(3)?, num(4)?),
                atoms: int(5)?,
                seconds: num(6)?,
            });
        }
        Ok(Self { records })
    }
}

/// The finite incident law a run optimizes against: η itself when discrete,
/// otherwise a batch frozen from `config.seed`.
pub fn run_demand(problem: &Problem, config: &SolverConfig) -> Result<(Demand, Option<SampleBatch>)> {
    if problem.eta.is_discrete() {
        Ok((Demand::from_eta(&problem.eta)?, None))
    } else {
        let batch = SampleBatch::draw(&problem.eta, config.mc_batch_size, config.seed)?;
        Ok((Demand::from_batch(&batch), Some(batch)))
    }
}

/// Step of the sufficient-decrease argument, `min{−b h/(L R²), 1}` with
/// `L = 2b + 1` and `R = b`.
pub fn lemma_step(b: f64, h_star: f64) -> f64 {
    let l = smoothness_constant(b);
    (-b * h_star / (l * b * b)).clamp(0.0, 1.0)
}

/// Guaranteed one-step decrease `min{b h²/(2LR²), LR²/(2b)}`.
pub fn decrease_bound(b: f64, h_star: f64) -> f64 {
    let lr2 = smoothness_constant(b) * b * b;
    (b * h_star * h_star / (2.0 * lr2)).min(lr2 / (2.0 * b))
}

fn nearest_within(support: &[Point2], x: Point2, eps: f64) -> Option<usize> {
    support
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, distance(s, x, Norm::L2)))
        .filter(|&(_, d)| d <= eps)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// Zeroes weights below the pruning floor and renormalizes; `None` when
/// nothing would change.
fn prune_weights(p: &[f64]) -> Option<Vec<f64>> {
    if p.iter().all(|&v| v == 0.0 || v >= DEFAULT_WEIGHT_TOL) {
        return None;
    }
    let mut q: Vec<f64> = p
        .iter()
        .map(|&v| if v < DEFAULT_WEIGHT_TOL { 0.0 } else { v })
        .collect();
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= s);
    Some(q)
}

fn compact(support: &[Point2], p: &[f64]) -> (Vec<Point2>, Vec<f64>) {
    support
        .iter()
        .zip(p)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| (x, w))
        .unzip()
}

/// Fully-corrective Frank-Wolfe.
pub fn fcfw_solve<R: Rng + ?Sized>(
    problem: &Problem,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<(DiscreteMeasure, SolveTrace)> {
    let (demand, _) = run_demand(problem, config)?;
    fcfw_solve_on(problem, &demand, config, rng)
}

pub fn fcfw_solve_on<R: Rng + ?Sized>(
    problem: &Problem,
    demand: &Demand,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<(DiscreteMeasure, SolveTrace)> {
    config.validate()?;
    let start = Instant::now();
    let b = problem.budget;
    let mut support = vec![problem.domain.sample_point(rng)];
    let mut p = vec![1.0];
    let mut trace = SolveTrace::default();

    for k in 0..config.max_outer_iters {
        let mu = DiscreteMeasure::from_simplex(&support, &p, b)?;
        let field = InfluenceField::new(&mu, demand, &problem.curve, problem.norm);
        let objective = field.objective();
        let (x_star, h_star) = subproblem::minimize_on_field(&mu, &field, problem, demand, config, rng);
        trace.records.push(TraceRecord {
            k,
            objective,
            h_star,
            x_star,
            atoms: support.len(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if h_star.abs() < config.fw_tolerance || k + 1 == config.max_outer_iters {
            return Ok((mu, trace));
        }

        let idx = match nearest_within(&support, x_star, DEFAULT_MERGE_EPS) {
            Some(i) => i,
            None => {
                support.push(x_star);
                p.push(0.0);
                support.len() - 1
            }
        };
        let kernel = WeightObjective::new(&support, b, demand, &problem.curve, problem.norm);
        let t = lemma_step(b, h_star);
        let line: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(i, &v)| (1.0 - t) * v + if i == idx { t } else { 0.0 })
            .collect();
        let warm = kernel.value(&p);
        let stepped = kernel.value(&line);
        let init = if stepped <= warm { line } else { p.clone() };
        let corr = fully_corrective_on(&kernel, &init, b, config)?;
        let mut next = corr.weights;
        if let Some(q) = prune_weights(&next) {
            if kernel.value(&q) <= corr.value {
                next = q;
            }
        }
        let (s, w) = compact(&support, &next);
        support = s;
        p = w;
    }
    unreachable!("loop returns on its last iteration")
}

/// Frank-Wolfe with the averaging step `η_k = 2/(k+2)`.
pub fn dfw_solve<R: Rng + ?Sized>(
    problem: &Problem,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<(DiscreteMeasure, SolveTrace)> {
    let (demand, _) = run_demand(problem, config)?;
    dfw_solve_on(problem, &demand, config, rng)
}

pub fn dfw_solve_on<R: Rng + ?Sized>(
    problem: &Problem,
    demand: &Demand,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<(DiscreteMeasure, SolveTrace)> {
    config.validate()?;
    let start = Instant::now();
    let b = problem.budget;
    let mut support = vec![problem.domain.sample_point(rng)];
    let mut p = vec![1.0];
    let mut trace = SolveTrace::default();

    for k in 0..config.max_outer_iters {
        let mu = DiscreteMeasure::from_simplex(&support, &p, b)?;
        let field = InfluenceField::new(&mu, demand, &problem.curve, problem.norm);
        let (x_star, h_star) = subproblem::minimize_on_field(&mu, &field, problem, demand, config, rng);
        trace.records.push(TraceRecord {
            k,
            objective: field.objective(),
            h_star,
            x_star,
            atoms: support.len(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if h_star.abs() < config.fw_tolerance || k + 1 == config.max_outer_iters {
            return Ok((mu, trace));
        }
        let eta = 2.0 / (k as f64 + 2.0);
        p.iter_mut().for_each(|v| *v *= 1.0 - eta);
        match nearest_within(&support, x_star, DEFAULT_MERGE_EPS) {
            Some(i) => p[i] += eta,
            None => {
                support.push(x_star);
                p.push(eta);
            }
        }
        let next = prune_weights(&p).unwrap_or(p);
        let (s, w) = compact(&support, &next);
        support = s;
        p = w;
    }
    unreachable!("loop returns on its last iteration")
}
