//! Problem data: the death curve, the incident law, the budget and the
//! feasible domain, plus scenario file I/O and the synthetic city factory.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, ConvexPolygon, Norm, Point2, Rect};

/// Probabilities must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// Death probability as a function of response time,
/// `β(t) = 1 − (1 + e^{a + c t})⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct DeathCurve {
    a: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    a: f64,
    c: f64,
}

impl TryFrom<RawCurve> for DeathCurve {
    type Error = Error;
    fn try_from(r: RawCurve) -> Result<Self> {
        DeathCurve::new(r.a, r.c)
    }
}

impl From<DeathCurve> for RawCurve {
    fn from(d: DeathCurve) -> Self {
        RawCurve { a: d.a, c: d.c }
    }
}

impl Default for DeathCurve {
    fn default() -> Self {
        Self { a: 0.679, c: 0.262 }
    }
}

impl DeathCurve {
    /// `a ≥ 0` is required for strict concavity on all of `[0, ∞)`.
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && c.is_finite()) {
            return Err(Error::input("death curve parameters must be finite"));
        }
        if c <= 0.0 {
            return Err(Error::input(format!("death curve slope must be positive (got {c})")));
        }
        if a < 0.0 {
            return Err(Error::input(format!(
                "death curve intercept must be nonnegative for concavity (got {a})"
            )));
        }
        Ok(Self { a, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `β(t)`; `t = +∞` gives exactly 1.
    pub fn beta(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::input(format!("time must be nonnegative (got {t})")));
        }
        Ok(1.0 - self.tail(t))
    }

    pub fn beta_prime(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::input(format!("time must be nonnegative (got {t})")));
        }
        Ok(self.slope(t))
    }

    /// `1 − β(t)` without cancellation. Unchecked: callers pass `t ≥ 0`.
    #[inline]
    pub fn tail(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 0.0;
        }
        1.0 / (1.0 + (self.a + self.c * t).exp())
    }

    /// `β′(t)`, unchecked.
    #[inline]
    pub fn slope(&self, t: f64) -> f64 {
        let z = self.a + self.c * t;
        // c σ(z) (1 − σ(z)), written to avoid overflow for large z
        let e = (-z.abs()).exp();
        self.c * e / ((1.0 + e) * (1.0 + e))
    }

    /// `(1 − β(t), β′(t))` from a single exponential; `t` finite.
    #[inline]
    pub fn tail_and_slope(&self, t: f64) -> (f64, f64) {
        let z = self.a + self.c * t;
        let e = (-z.abs()).exp();
        let s = 1.0 / (1.0 + e);
        let tail = if z >= 0.0 { e * s } else { s };
        (tail, self.c * e * s * s)
    }
}

/// A demand location with its incident probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

impl DemandPoint {
    pub fn location(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub rect: Rect,
    pub p: f64,
}

/// The incident law η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IncidentDistribution {
    Discrete { points: Vec<DemandPoint> },
    UniformRect { rect: Rect },
    Mixture { components: Vec<MixtureComponent> },
}

fn check_probabilities(ps: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for p in ps {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::input(format!("probability {p} is invalid")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::ProbabilitySum(sum));
    }
    Ok(())
}

impl IncidentDistribution {
    pub fn discrete(points: &[(Point2, f64)]) -> Result<Self> {
        let eta = IncidentDistribution::Discrete {
            points: points.iter().map(|&(q, p)| DemandPoint { x: q.x, y: q.y, p }).collect(),
        };
        eta.validate()?;
        Ok(eta)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IncidentDistribution::Discrete { points } => {
                if points.is_empty() {
                    return Err(Error::input("discrete incident law needs at least one point"));
                }
                if points.iter().any(|d| !d.location().is_finite()) {
                    return Err(Error::input("demand point must be finite"));
                }
                check_probabilities(points.iter().map(|d| d.p))?;
                let mut locs: Vec<Point2> = points.iter().map(|d| d.location()).collect();
                locs.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
                if locs.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::input("discrete demand points must be distinct"));
                }
                Ok(())
            }
            IncidentDistribution::UniformRect { rect } => {
                Rect::new(rect.min, rect.max)?;
                if rect.area() <= 0.0 {
                    return Err(Error::input("uniform rectangle must have positive area"));
                }
                Ok(())
            }
            IncidentDistribution::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::input("mixture needs at least one component"));
                }
                for c in components {
                    Rect::new(c.rect.min, c.rect.max)?;
                    if c.rect.area() <= 0.0 {
                        return Err(Error::input("mixture rectangles must have positive area"));
                    }
                }
                check_probabilities(components.iter().map(|c| c.p))
            }
        }
    }

    pub fn as_discrete(&self) -> Option<&[DemandPoint]> {
        match self {
            IncidentDistribution::Discrete { points } => Some(points),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.as_discrete().is_some()
    }

    /// Draws `y ~ η`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        match self {
            IncidentDistribution::Discrete { points } => {
                let i = pick(points.iter().map(|d| d.p), rng);
                points[i].location()
            }
            IncidentDistribution::UniformRect { rect } => rect.sample(rng),
            IncidentDistribution::Mixture { components } => {
                let i = pick(components.iter().map(|c| c.p), rng);
                components[i].rect.sample(rng)
            }
        }
    }

    /// Convex hull of the demand points or of every rectangle corner.
    pub fn support_hull(&self) -> ConvexPolygon {
        let pts: Vec<Point2> = match self {
            IncidentDistribution::Discrete { points } => points.iter().map(|d| d.location()).collect(),
            IncidentDistribution::UniformRect { rect } => rect.corners().to_vec(),
            IncidentDistribution::Mixture { components } => components.iter().flat_map(|c| c.rect.corners()).collect(),
        };
        convex_hull(&pts).expect("validated incident law has finite support")
    }
}

/// Categorical draw by inversion.
fn pick<R: Rng + ?Sized>(probs: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    let total: f64 = probs.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

/// A fully validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub eta: IncidentDistribution,
    pub budget: f64,
    pub norm: Norm,
    pub curve: DeathCurve,
    pub domain: ConvexPolygon,
}

impl Problem {
    /// `domain = None` uses the support hull of `eta`.
    pub fn new(
        eta: IncidentDistribution,
        budget: f64,
        norm: Norm,
        curve: DeathCurve,
        domain: Option<ConvexPolygon>,
    ) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::NonPositiveBudget(budget));
        }
        eta.validate()?;
        let hull = eta.support_hull();
        let domain = match domain {
            Some(d) => {
                if let Some(v) = hull.vertices().iter().find(|&&v| !d.contains(v)) {
                    return Err(Error::input(format!(
                        "domain does not contain the incident support (vertex {}, {})",
                        v.x, v.y
                    )));
                }
                d
            }
            None => hull,
        };
        Ok(Self {
            eta,
            budget,
            norm,
            curve,
            domain,
        })
    }

    pub fn with_norm(&self, norm: Norm) -> Self {
        Self { norm, ..self.clone() }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub budget: f64,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub beta: DeathCurve,
    pub eta: IncidentDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<Point2>>,
}

impl ScenarioDoc {
    pub fn from_problem(p: &Problem) -> Self {
        Self {
            budget: p.budget,
            norm: p.norm,
            beta: p.curve,
            eta: p.eta.clone(),
            domain: Some(p.domain.vertices().to_vec()),
        }
    }

    pub fn into_problem(self) -> Result<Problem> {
        let domain = match self.domain {
            Some(v) => Some(convex_hull(&v)?),
            None => None,
        };
        Problem::new(self.eta, self.budget, self.norm, self.beta, domain)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

pub fn parse_scenario(text: &str) -> Result<Problem> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    doc.into_problem()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Problem> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::input(format!("cannot read scenario {}: {e}", path.as_ref().display())))?;
    parse_scenario(&text)
}

/// Synthetic stand-in for a city partitioned into `units` area units, each a
/// 1×1 cell on a near-square grid with a heavy-tailed incident rate.
pub fn make_city(units: usize, budget: f64, seed: u64) -> Result<ScenarioDoc> {
    if units < 1 {
        return Err(Error::input("a city needs at least one unit"));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::NonPositiveBudget(budget));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pareto = Pareto::new(1.0, 1.2).expect("valid Pareto parameters");
    let raw: Vec<f64> = (0..units).map(|_| pareto.sample(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    let cols = (units as f64).sqrt().ceil() as usize;
    let rects = (0..units).map(|l| {
        let (i, j) = ((l % cols) as f64, (l / cols) as f64);
        Rect {
            min: Point2::new(i, j),
            max: Point2::new(i + 1.0, j + 1.0),
        }
    });
    let eta = if units == 1 {
        IncidentDistribution::UniformRect {
            rect: rects.clone().next().unwrap(),
        }
    } else {
        let mut components: Vec<MixtureComponent> = rects
            .zip(&raw)
            .map(|(rect, w)| MixtureComponent { rect, p: w / total })
            .collect();
        // put rounding residue on the heaviest unit so the sum is 1 to 1 ulp
        let resid = 1.0 - components.iter().map(|c| c.p).sum::<f64>();
        let heavy = (0..units)
            .max_by(|&a, &b| components[a].p.total_cmp(&components[b].p))
            .unwrap();
        components[heavy].p += resid;
        IncidentDistribution::Mixture { components }
    };
    Ok(ScenarioDoc {
        budget,
        norm: Norm::L2,
        beta: DeathCurve::default(),
        eta,
        domain: None,
    })
}
