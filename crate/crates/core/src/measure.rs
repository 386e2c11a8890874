//! Finite atomic measures with a fixed total mass: the decision variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, ConvexPolygon, Norm, Point2};

/// Atoms closer than this (length units) are the same location.
pub const DEFAULT_MERGE_EPS: f64 = 1e-9;
/// Relative weight threshold (times the budget) below which atoms are dropped.
pub const DEFAULT_WEIGHT_TOL: f64 = 1e-12;
/// Relative tolerance on `Σ weights = budget`.
pub const BUDGET_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "w")]
    pub weight: f64,
}

impl Atom {
    pub fn new(location: Point2, weight: f64) -> Self {
        Self {
            x: location.x,
            y: location.y,
            weight,
        }
    }

    pub fn location(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Deserialize, Serialize)]
struct RawMeasure {
    budget: f64,
    atoms: Vec<Atom>,
}

/// `μ = Σ wᵢ δ_{xᵢ}` with `wᵢ ≥ 0` and `Σ wᵢ = budget`.
///
/// Construction validates the weights, rescales away rounding drift in the
/// total, and merges atoms closer than [`DEFAULT_MERGE_EPS`]. The value is
/// immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    budget: f64,
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.budget)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            budget: m.budget,
            atoms: m.atoms,
        }
    }
}

/// Greedy clustering of points within `eps`. Returns cluster index per input.
fn cluster(points: &[Point2], eps: f64) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    let mut reps: Vec<Point2> = Vec::new();
    let mut label = vec![0; points.len()];
    for &i in &order {
        let p = points[i];
        let mut found = None;
        // reps are created in increasing x, so scan back until out of window
        for (c, r) in reps.iter().enumerate().rev() {
            if r.x < p.x - eps {
                break;
            }
            if (*r - p).norm() <= eps {
                found = Some(c);
                break;
            }
        }
        label[i] = match found {
            Some(c) => c,
            None => {
                reps.push(p);
                reps.len() - 1
            }
        };
    }
    (label, reps.len())
}

fn merge_atoms(atoms: &[Atom], eps: f64) -> Vec<Atom> {
    let points: Vec<Point2> = atoms.iter().map(Atom::location).collect();
    let (label, n) = cluster(&points, eps);
    if n == atoms.len() {
        return atoms.to_vec();
    }
    // (Σw·x, Σw·y, Σw, Σx, Σy, count, first index)
    let mut acc = vec![(0.0, 0.0, 0.0, 0.0, 0.0, 0usize, usize::MAX); n];
    for (i, a) in atoms.iter().enumerate() {
        let e = &mut acc[label[i]];
        e.0 += a.weight * a.x;
        e.1 += a.weight * a.y;
        e.2 += a.weight;
        e.3 += a.x;
        e.4 += a.y;
        e.5 += 1;
        e.6 = e.6.min(i);
    }
    // keep first-occurrence order
    acc.sort_by_key(|e| e.6);
    acc.into_iter()
        .map(|(wx, wy, w, x, y, k, _)| {
            if k == 1 {
                Atom { x, y, weight: w }
            } else if w > 0.0 {
                Atom {
                    x: wx / w,
                    y: wy / w,
                    weight: w,
                }
            } else {
                Atom {
                    x: x / k as f64,
                    y: y / k as f64,
                    weight: 0.0,
                }
            }
        })
        .collect()
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Atom>, budget: f64) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::NonPositiveBudget(budget));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for a in &atoms {
            if !a.location().is_finite() {
                return Err(Error::input("atom location must be finite"));
            }
            if !a.weight.is_finite() || a.weight < 0.0 {
                return Err(Error::input(format!("atom weight {} is invalid", a.weight)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - budget).abs() > BUDGET_RTOL * budget {
            return Err(Error::BudgetMismatch(total, budget));
        }
        let scale = budget / total;
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|a| Atom {
                weight: a.weight * scale,
                ..a
            })
            .collect();
        Ok(Self {
            budget,
            atoms: merge_atoms(&atoms, DEFAULT_MERGE_EPS),
        })
    }

    /// `b δ_x`.
    pub fn dirac(location: Point2, budget: f64) -> Result<Self> {
        Self::new(vec![Atom::new(location, budget)], budget)
    }

    /// `Σ pᵢ b δ_{xᵢ}` for simplex weights `p`.
    pub fn from_simplex(support: &[Point2], p: &[f64], budget: f64) -> Result<Self> {
        if support.len() != p.len() {
            return Err(Error::input("support and weight lengths differ"));
        }
        let sum: f64 = p.iter().sum();
        let atoms = support
            .iter()
            .zip(p)
            .map(|(&x, &w)| Atom::new(x, budget * w.max(0.0) / sum))
            .collect();
        Self::new(atoms, budget)
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn locations(&self) -> Vec<Point2> {
        self.atoms.iter().map(Atom::location).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// Mass of the closed ball `{x : ‖x − center‖ ≤ radius}`.
    pub fn ball_mass(&self, center: Point2, radius: f64, norm: Norm) -> Result<f64> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::input(format!("negative radius {radius}")));
        }
        Ok(self
            .atoms
            .iter()
            .filter(|a| distance(a.location(), center, norm) <= radius)
            .map(|a| a.weight)
            .sum())
    }

    /// `sup_A |μ₁(A) − μ₂(A)|`, which for equal budgets is half the ℓ¹
    /// difference of weights over the union of atom locations.
    pub fn tv_distance(&self, other: &DiscreteMeasure) -> Result<f64> {
        if (self.budget - other.budget).abs() > BUDGET_RTOL * self.budget.max(other.budget) {
            return Err(Error::BudgetMismatch(self.budget, other.budget));
        }
        let points: Vec<Point2> = self.atoms.iter().chain(&other.atoms).map(Atom::location).collect();
        let (label, n) = cluster(&points, DEFAULT_MERGE_EPS);
        let mut diff = vec![0.0; n];
        let k = self.atoms.len();
        for (i, a) in self.atoms.iter().chain(&other.atoms).enumerate() {
            diff[label[i]] += if i < k { a.weight } else { -a.weight };
        }
        Ok(0.5 * diff.iter().map(|d| d.abs()).sum::<f64>())
    }

    /// Replaces every atom outside `domain` by its Euclidean projection onto
    /// the domain. Weights and the budget are unchanged.
    pub fn restrict_to_domain(&self, domain: &ConvexPolygon) -> DiscreteMeasure {
        let atoms: Vec<Atom> = self
            .atoms
            .iter()
            .map(|a| Atom::new(domain.project(a.location()), a.weight))
            .collect();
        Self {
            budget: self.budget,
            atoms: merge_atoms(&atoms, DEFAULT_MERGE_EPS),
        }
    }

    /// Merges atoms within `merge_eps` at their weighted centroid, then drops
    /// atoms lighter than `weight_tol` and rescales the survivors to the
    /// budget.
    pub fn merge_and_prune(&self, merge_eps: f64, weight_tol: f64) -> Result<DiscreteMeasure> {
        if merge_eps < 0.0 || weight_tol < 0.0 {
            return Err(Error::input("tolerances must be nonnegative"));
        }
        let merged = merge_atoms(&self.atoms, merge_eps);
        let kept: Vec<Atom> = merged
            .into_iter()
            .filter(|a| a.weight >= weight_tol && a.weight > 0.0)
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let total: f64 = kept.iter().map(|a| a.weight).sum();
        let scale = self.budget / total;
        Ok(Self {
            budget: self.budget,
            atoms: kept
                .into_iter()
                .map(|a| Atom {
                    weight: a.weight * scale,
                    ..a
                })
                .collect(),
        })
    }

    /// Drops atoms below `DEFAULT_WEIGHT_TOL · budget`.
    pub fn pruned(&self) -> Result<DiscreteMeasure> {
        self.merge_and_prune(DEFAULT_MERGE_EPS, DEFAULT_WEIGHT_TOL * self.budget)
    }

    /// `(1 − s)·self + s·other`.
    pub fn mix(&self, other: &DiscreteMeasure, s: f64) -> Result<DiscreteMeasure> {
        if (self.budget - other.budget).abs() > BUDGET_RTOL * self.budget {
            return Err(Error::BudgetMismatch(self.budget, other.budget));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                weight: a.weight * (1.0 - s),
                ..*a
            })
            .chain(other.atoms.iter().map(|a| Atom {
                weight: a.weight * s,
                ..*a
            }))
            .collect();
        Self::new(atoms, self.budget)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mu(atoms: &[((f64, f64), f64)]) -> DiscreteMeasure {
        let b = atoms.iter().map(|a| a.1).sum();
        DiscreteMeasure::new(
            atoms
                .iter()
                .map(|&((x, y), w)| Atom::new(Point2::new(x, y), w))
                .collect(),
            b,
        )
        .unwrap()
    }

    #[test]
    fn ball_mass_examples() {
        let m = mu(&[((0.0, 0.0), 0.3), ((2.0, 0.0), 0.7)]);
        let o = Point2::new(0.0, 0.0);
        assert!((m.ball_mass(o, 1.0, Norm::L2).unwrap() - 0.3).abs() < 1e-15);
        assert!((m.ball_mass(o, 2.0, Norm::L2).unwrap() - 1.0).abs() < 1e-15);
        let m = mu(&[((1.0, 1.0), 0.5)]);
        assert_eq!(m.ball_mass(o, 1.9, Norm::L1).unwrap(), 0.0);
        assert_eq!(m.ball_mass(o, 2.0, Norm::L1).unwrap(), 0.5);
        assert!(m.ball_mass(o, -1.0, Norm::L2).is_err());
    }

    #[test]
    fn tv_examples() {
        let p = (0.0, 0.0);
        let q = (1.0, 0.5);
        let a = mu(&[(p, 0.6), (q, 0.4)]);
        assert_eq!(a.tv_distance(&a).unwrap(), 0.0);
        let dp = mu(&[(p, 2.0)]);
        let dq = mu(&[(q, 2.0)]);
        assert!((dp.tv_distance(&dq).unwrap() - 2.0).abs() < 1e-15);

        // brute force over the four subsets of {p, q}
        let b = mu(&[(p, 0.4), (q, 0.6)]);
        let wa = [0.6, 0.4];
        let wb = [0.4, 0.6];
        let mut brute: f64 = 0.0;
        for mask in 0..4u32 {
            let s = |w: &[f64; 2]| (0..2).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum::<f64>();
            brute = brute.max((s(&wa) - s(&wb)).abs());
        }
        assert!((a.tv_distance(&b).unwrap() - brute).abs() < 1e-15);
        assert!((brute - 0.2).abs() < 1e-15);

        assert!(matches!(a.tv_distance(&dp), Err(Error::BudgetMismatch(..))));
    }

    #[test]
    fn restrict_examples() {
        let sq = crate::geometry::Rect::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
            .unwrap()
            .to_polygon();
        let inside = mu(&[((0.2, 0.3), 0.5), ((0.9, 0.1), 0.5)]);
        assert_eq!(inside.restrict_to_domain(&sq), inside);
        let out = mu(&[((2.0, 2.0), 1.0)]);
        assert_eq!(out.restrict_to_domain(&sq), mu(&[((1.0, 1.0), 1.0)]));
    }

    #[test]
    fn merge_and_prune_examples() {
        let m = DiscreteMeasure {
            budget: 1.0,
            atoms: vec![
                Atom::new(Point2::new(0.5, 0.5), 0.3),
                Atom::new(Point2::new(0.5, 0.5), 0.7),
            ],
        };
        let r = m.merge_and_prune(1e-9, 1e-12).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.atoms()[0].weight - 1.0).abs() < 1e-15);

        let m = mu(&[((0.0, 0.0), 0.25), ((1.0, 0.0), 0.75)]);
        assert_eq!(m.merge_and_prune(1e-9, 1e-12).unwrap(), m);

        let m = mu(&[((0.0, 0.0), 1.0 - 1e-15), ((1.0, 0.0), 1e-15)]);
        let r = m.merge_and_prune(1e-9, 1e-12).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.atoms()[0].weight, 1.0);
        assert_eq!(r.atoms()[0].location(), Point2::new(0.0, 0.0));

        assert!(matches!(m.merge_and_prune(0.0, 2.0), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn merge_uses_weighted_centroid() {
        let m = mu(&[((0.0, 0.0), 1.0), ((0.1, 0.0), 3.0)]);
        let r = m.merge_and_prune(0.2, 0.0).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.atoms()[0].x - 0.075).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_weights() {
        let a = |w| Atom::new(Point2::new(0.0, 0.0), w);
        assert!(DiscreteMeasure::new(vec![a(-0.1), a(1.1)], 1.0).is_err());
        assert!(DiscreteMeasure::new(vec![a(0.5)], 1.0).is_err());
        assert!(DiscreteMeasure::new(vec![], 1.0).is_err());
        assert!(DiscreteMeasure::new(vec![a(0.0)], 0.0).is_err());
    }

    #[test]
    fn json_shape() {
        let m = mu(&[((0.0, 1.0), 0.25), ((1.0, 0.0), 0.75)]);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["budget"], 1.0);
        assert_eq!(v["atoms"][1]["x"], 1.0);
        assert_eq!(v["atoms"][1]["w"], 0.75);
        assert_eq!(DiscreteMeasure::from_json(&m.to_json()).unwrap(), m);
        assert!(DiscreteMeasure::from_json(r#"{"budget": 1, "atoms": [{"x":0,"y":0,"w":0.5}]}"#).is_err());
    }

    fn arb_measure(n: usize, budget: f64) -> impl Strategy<Value = DiscreteMeasure> {
        proptest::collection::vec(((0u8..4, 0u8..4), 0.01..1.0f64), 1..n).prop_map(move |v| {
            let total: f64 = v.iter().map(|a| a.1).sum();
            let atoms = v
                .into_iter()
                .map(|((i, j), w)| Atom::new(Point2::new(i as f64 * 0.5, j as f64 * 0.5), w * budget / total))
                .collect();
            DiscreteMeasure::new(atoms, budget).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(a in arb_measure(6, 2.0), b in arb_measure(6, 2.0), c in arb_measure(6, 2.0)) {
            let ab = a.tv_distance(&b).unwrap();
            prop_assert!((ab - b.tv_distance(&a).unwrap()).abs() < 1e-12);
            prop_assert!(a.tv_distance(&a).unwrap() < 1e-12);
            prop_assert!(ab <= a.tv_distance(&c).unwrap() + c.tv_distance(&b).unwrap() + 1e-12);
            prop_assert!(ab <= 2.0 + 1e-12);
        }

        #[test]
        fn ball_mass_monotone_and_budget_conserved(a in arb_measure(8, 3.0), r1 in 0.0..3.0f64, r2 in 0.0..3.0f64) {
            let c = Point2::new(0.7, 0.4);
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            for norm in [Norm::L2, Norm::L1] {
                prop_assert!(a.ball_mass(c, lo, norm).unwrap() <= a.ball_mass(c, hi, norm).unwrap());
                prop_assert!((a.ball_mass(c, 1e6, norm).unwrap() - 3.0).abs() < 1e-9 * 3.0);
            }
            let merged = a.merge_and_prune(0.6, 0.05).unwrap();
            let total: f64 = merged.weights().iter().sum();
            prop_assert!((total - 3.0).abs() <= 1e-9 * 3.0);
        }
    }
}
