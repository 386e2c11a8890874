use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::response::{check_simplex, Demand, WeightObjective};
use crate::scenario::Problem;

use super::SolverConfig;

/// Euclidean projection onto `{p ≥ 0, Σp = 1}` by sorting and thresholding.
pub fn simplex_project(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::input("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("vector has non-finite entries"));
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut p: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // absorb rounding so the sum is 1 to machine precision
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

/// Largest deviation of an active partial derivative from the active mean.
pub fn kkt_residual(p: &[f64], grad: &[f64]) -> f64 {
    let active: Vec<f64> = p.iter().zip(grad).filter(|(&w, _)| w > 1e-8).map(|(_, &g)| g).collect();
    if active.is_empty() {
        return 0.0;
    }
    let mean = active.iter().sum::<f64>() / active.len() as f64;
    active.iter().map(|g| (g - mean).abs()).fold(0.0, f64::max)
}

/// Result of a corrective step.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub weights: Vec<f64>,
    pub value: f64,
    pub kkt_residual: f64,
    pub steps: usize,
}

/// Reoptimizes the weights of a fixed support.
pub fn fully_corrective(
    support: &[Point2],
    p_init: &[f64],
    problem: &Problem,
    demand: &Demand,
    config: &SolverConfig,
) -> Result<Correction> {
    if support.len() != p_init.len() {
        return Err(Error::input("support and weights differ in length"));
    }
    let kernel = WeightObjective::new(support, problem.budget, demand, &problem.curve, problem.norm);
    fully_corrective_on(&kernel, p_init, problem.budget, config)
}

/// Projected gradient with Barzilai-Borwein steps and halving on
/// non-decrease.
pub fn fully_corrective_on(
    kernel: &WeightObjective,
    p_init: &[f64],
    budget: f64,
    config: &SolverConfig,
) -> Result<Correction> {
    if p_init.len() != kernel.dim() {
        return Err(Error::input("weight vector does not match the support"));
    }
    check_simplex(p_init)?;
    let mut p = simplex_project(p_init)?;
    let (mut f, mut g) = kernel.value_and_gradient(&p);
    if p.len() == 1 {
        return Ok(Correction {
            weights: p,
            value: f,
            kkt_residual: 0.0,
            steps: 0,
        });
    }
    let tol = 1e-12 * budget.max(1.0);
    let scale = 1.0 / (budget * budget);
    let (lo, hi) = (1e-12 * scale, 1e6 * scale);
    let mut step = config.correction_lr * scale;
    let mut steps = 0;

    while steps < config.correction_steps {
        if stationary(&p, &g, tol) {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(&x, &d)| x - step * d).collect();
            let q = simplex_project(&trial)?;
            let (fq, gq) = kernel.value_and_gradient(&q);
            if fq < f {
                accepted = Some((q, fq, gq));
                break;
            }
            step *= 0.5;
            if step < lo {
                break;
            }
        }
        let Some((q, fq, gq)) = accepted else { break };
        steps += 1;
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..p.len() {
            let s = q[i] - p[i];
            ss += s * s;
            sy += s * (gq[i] - g[i]);
        }
        step = if sy > 0.0 {
            (ss / sy).clamp(lo, hi)
        } else {
            (2.0 * step).min(hi)
        };
        p = q;
        f = fq;
        g = gq;
    }
    Ok(Correction {
        kkt_residual: kkt_residual(&p, &g),
        weights: p,
        value: f,
        steps,
    })
}

/// Active partials agree and no inactive coordinate could enter.
fn stationary(p: &[f64], g: &[f64], tol: f64) -> bool {
    let active_min = p
        .iter()
        .zip(g)
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let spread = kkt_residual(p, g);
    let entering = p.iter().zip(g).any(|(&w, &d)| w == 0.0 && d < active_min - tol);
    spread < tol && !entering
}
