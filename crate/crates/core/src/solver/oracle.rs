use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::measure::{Atom, DiscreteMeasure};

/// Optimal measure for two demand points: `α₁ = clamp(b/2 + ½ ln(λ₁/λ₂), 0, b)`
/// on `y₁` and the rest on `y₂`. Zero-weight atoms are dropped.
pub fn two_point_optimum(y1: Point2, y2: Point2, lambda1: f64, lambda2: f64, b: f64) -> Result<DiscreteMeasure> {
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) || ((lambda1 + lambda2) - 1.0).abs() > 1e-12 {
        return Err(Error::ProbabilitySum(lambda1 + lambda2));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::NonPositiveBudget(b));
    }
    let alpha1 = (0.5 * b + 0.5 * (lambda1 / lambda2).ln()).clamp(0.0, b);
    let atoms = [Atom::new(y1, alpha1), Atom::new(y2, b - alpha1)]
        .into_iter()
        .filter(|a| a.weight > 0.0)
        .collect();
    DiscreteMeasure::new(atoms, b)
}
