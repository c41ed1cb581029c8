//! Model metric spaces: Euclidean coordinates and one-dimensional
//! Wasserstein space in quantile coordinates, each carrying a separable
//! potential energy whose gradient flow is computed coordinatewise.

use crate::error::{positive, Error, Result};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Euclidean,
    Quantile1D,
}

/// A point of a model space.
///
/// Quantile points hold the values of a nondecreasing quantile function on
/// the midpoint grid `s_i = (i - 1/2) / N`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpacePoint {
    Euclidean(Vec<f64>),
    Quantile(Vec<f64>),
}

impl SpacePoint {
    pub fn euclidean(coords: Vec<f64>) -> Result<Self> {
        check_finite(&coords)?;
        Ok(SpacePoint::Euclidean(coords))
    }

    pub fn quantile(quantiles: Vec<f64>) -> Result<Self> {
        check_finite(&quantiles)?;
        if let Some(i) = quantiles.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::InvalidPoint(format!(
                "quantiles decrease at index {}: {} > {}",
                i,
                quantiles[i],
                quantiles[i + 1]
            )));
        }
        Ok(SpacePoint::Quantile(quantiles))
    }

    /// One-dimensional Euclidean point. `x` must be finite.
    pub fn scalar(x: f64) -> Self {
        debug_assert!(x.is_finite());
        SpacePoint::Euclidean(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        match self {
            SpacePoint::Euclidean(c) | SpacePoint::Quantile(c) => c,
        }
    }

    pub fn len(&self) -> usize {
        self.coords().len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords().is_empty()
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            SpacePoint::Euclidean(_) => SpaceKind::Euclidean,
            SpacePoint::Quantile(_) => SpaceKind::Quantile1D,
        }
    }

    fn with_coords(&self, coords: Vec<f64>) -> SpacePoint {
        match self {
            SpacePoint::Euclidean(_) => SpacePoint::Euclidean(coords),
            SpacePoint::Quantile(_) => SpacePoint::Quantile(coords),
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidPoint(format!("coordinate {i} is not finite"))),
        None => Ok(()),
    }
}

/// Separable potential `V`, applied to every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `V(x) = kappa x^2 / 2`; the flow is `x e^{-kappa t}`.
    Quadratic { kappa: f64 },
    /// `V(x) = x^4 / 4`, convex with parameter 0.
    Quartic,
    /// `V(x) = (x^2 - 1)^2 / 4 + shift x^2 / 2`, convex with parameter `shift - 1`.
    DoubleWell { shift: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { kappa } => 0.5 * kappa * x * x,
            Potential::Quartic => 0.25 * x * x * x * x,
            Potential::DoubleWell { shift } => {
                let w = x * x - 1.0;
                0.25 * w * w + 0.5 * shift * x * x
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { kappa } => kappa * x,
            Potential::Quartic => x * x * x,
            Potential::DoubleWell { shift } => x * x * x - x + shift * x,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Potential::Quadratic { kappa } => kappa,
            Potential::Quartic => 3.0 * x * x,
            Potential::DoubleWell { shift } => 3.0 * x * x - 1.0 + shift,
        }
    }

    /// Global lower bound on `V''`.
    pub fn convexity(&self) -> f64 {
        match *self {
            Potential::Quadratic { kappa } => kappa,
            Potential::Quartic => 0.0,
            Potential::DoubleWell { shift } => shift - 1.0,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Potential::Quadratic { kappa } => kappa.is_finite(),
            Potential::Quartic => true,
            Potential::DoubleWell { shift } => shift.is_finite(),
        }
    }
}

/// Samples of a gradient-flow curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub start: SpacePoint,
    pub times: Vec<f64>,
    pub points: Vec<SpacePoint>,
    pub energies: Vec<f64>,
    pub slopes: Vec<f64>,
}

pub const DEFAULT_QUANTILE_GRID: usize = 64;
pub const DEFAULT_BOX: (f64, f64) = (-5.0, 5.0);
pub const DEFAULT_FLOW_TOLERANCE: f64 = 1e-11;

/// A geodesic metric space with an energy whose gradient flow satisfies
/// EVI with parameter `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    kind: SpaceKind,
    dim: usize,
    potential: Potential,
    bounds: (f64, f64),
    flow_tolerance: f64,
}

impl ModelSpace {
    pub fn euclidean(dim: usize, potential: Potential) -> Result<Self> {
        Self::new(SpaceKind::Euclidean, dim, potential)
    }

    pub fn quantile(n: usize, potential: Potential) -> Result<Self> {
        Self::new(SpaceKind::Quantile1D, n, potential)
    }

    pub fn new(kind: SpaceKind, dim: usize, potential: Potential) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ParameterOutOfRange { name: "dimension", value: 0.0 });
        }
        if !potential.is_finite() {
            return Err(Error::ParameterOutOfRange { name: "potential", value: f64::NAN });
        }
        Ok(ModelSpace { kind, dim, potential, bounds: DEFAULT_BOX, flow_tolerance: DEFAULT_FLOW_TOLERANCE })
    }

    /// Replace the working box used for sampling.
    pub fn with_box(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::ParameterOutOfRange { name: "box", value: hi - lo });
        }
        self.bounds = (lo, hi);
        Ok(self)
    }

    pub fn with_flow_tolerance(mut self, tol: f64) -> Result<Self> {
        self.flow_tolerance = positive("flow_tolerance", tol)?;
        Ok(self)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn potential(&self) -> Potential {
        self.potential
    }

    pub fn kappa(&self) -> f64 {
        self.potential.convexity()
    }

    pub fn kappa_hat(&self) -> f64 {
        self.kappa().min(0.0)
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn flow_tolerance(&self) -> f64 {
        self.flow_tolerance
    }

    /// Build a point of this space from raw coordinates.
    pub fn point(&self, coords: Vec<f64>) -> Result<SpacePoint> {
        let p = match self.kind {
            SpaceKind::Euclidean => SpacePoint::euclidean(coords)?,
            SpaceKind::Quantile1D => SpacePoint::quantile(coords)?,
        };
        self.check(&p)?;
        Ok(p)
    }

    /// The point with every coordinate equal to `value` (a Dirac mass in the
    /// quantile model).
    pub fn constant_point(&self, value: f64) -> Result<SpacePoint> {
        self.point(vec![value; self.dim])
    }

    /// Uniform sample from the working box; quantile samples are sorted.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> SpacePoint {
        let (lo, hi) = self.bounds;
        let mut c: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(lo..=hi)).collect();
        match self.kind {
            SpaceKind::Euclidean => SpacePoint::Euclidean(c),
            SpaceKind::Quantile1D => {
                c.sort_by(f64::total_cmp);
                SpacePoint::Quantile(c)
            }
        }
    }

    pub fn check(&self, x: &SpacePoint) -> Result<()> {
        if x.kind() != self.kind || x.len() != self.dim {
            return Err(Error::IncompatiblePoints(format!(
                "expected {:?} point of size {}, got {:?} of size {}",
                self.kind,
                self.dim,
                x.kind(),
                x.len()
            )));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => 1.0,
            SpaceKind::Quantile1D => 1.0 / self.dim as f64,
        }
    }

    pub fn sq_distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.sq_distance_unchecked(x, y))
    }

    pub(crate) fn sq_distance_unchecked(&self, x: &SpacePoint, y: &SpacePoint) -> f64 {
        let s: f64 = x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
        s * self.scale()
    }

    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        Ok(self.sq_distance(x, y)?.sqrt())
    }

    /// Constant-speed geodesic from `x` (t = 0) to `y` (t = 1).
    pub fn geodesic_point(&self, x: &SpacePoint, y: &SpacePoint, t: f64) -> Result<SpacePoint> {
        self.check(x)?;
        self.check(y)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ParameterOutOfRange { name: "t", value: t });
        }
        let mut c: Vec<f64> = x.coords().iter().zip(y.coords()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        if self.kind == SpaceKind::Quantile1D {
            monotone_repair(&mut c);
        }
        Ok(x.with_coords(c))
    }

    pub fn energy(&self, x: &SpacePoint) -> Result<f64> {
        self.check(x)?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &SpacePoint) -> f64 {
        let s: f64 = x.coords().iter().map(|&v| self.potential.value(v)).sum();
        s * self.scale()
    }

    /// Information functional, the squared local slope.
    pub fn information(&self, x: &SpacePoint) -> Result<f64> {
        self.check(x)?;
        Ok(self.information_unchecked(x))
    }

    pub(crate) fn information_unchecked(&self, x: &SpacePoint) -> f64 {
        let s: f64 = x
            .coords()
            .iter()
            .map(|&v| {
                let g = self.potential.derivative(v);
                g * g
            })
            .sum();
        s * self.scale()
    }

    /// Energy and local slope.
    pub fn energy_and_slope(&self, x: &SpacePoint) -> Result<(f64, f64)> {
        self.check(x)?;
        Ok((self.energy_unchecked(x), self.information_unchecked(x).sqrt()))
    }

    /// Gradient flow `S[x](t)`.
    pub fn flow(&self, x: &SpacePoint, t: f64) -> Result<SpacePoint> {
        self.check(x)?;
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.flow_unchecked(x, t)
    }

    pub(crate) fn flow_unchecked(&self, x: &SpacePoint, t: f64) -> Result<SpacePoint> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        let mut c = Vec::with_capacity(x.len());
        match self.potential {
            Potential::Quadratic { kappa } => {
                let f = (-kappa * t).exp();
                c.extend(x.coords().iter().map(|v| v * f));
            }
            pot => {
                for &v in x.coords() {
                    c.push(flow_scalar(pot, v, t, self.flow_tolerance)?);
                }
            }
        }
        if self.kind == SpaceKind::Quantile1D {
            monotone_repair(&mut c);
        }
        Ok(x.with_coords(c))
    }

    /// Flow evaluated at increasing times, stepping with the semigroup
    /// property.
    pub fn flow_path(&self, x: &SpacePoint, times: &[f64]) -> Result<Vec<SpacePoint>> {
        self.check(x)?;
        check_times(times)?;
        let mut out = Vec::with_capacity(times.len());
        let exact = matches!(self.potential, Potential::Quadratic { .. });
        let mut prev_t = 0.0;
        let mut prev = x.clone();
        for &t in times {
            let p = if exact { self.flow_unchecked(x, t)? } else { self.flow_unchecked(&prev, t - prev_t)? };
            prev_t = t;
            prev = p.clone();
            out.push(p);
        }
        Ok(out)
    }

    pub fn flow_trajectory(&self, x: &SpacePoint, times: &[f64]) -> Result<FlowTrajectory> {
        let points = self.flow_path(x, times)?;
        let energies = points.iter().map(|p| self.energy_unchecked(p)).collect();
        let slopes = points.iter().map(|p| self.information_unchecked(p).sqrt()).collect();
        Ok(FlowTrajectory { start: x.clone(), times: times.to_vec(), points, energies, slopes })
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedTimes);
    }
    Ok(())
}

fn monotone_repair(c: &mut [f64]) {
    for i in 1..c.len() {
        if c[i] < c[i - 1] {
            c[i] = c[i - 1];
        }
    }
}

// Dormand-Prince 5(4) tableau; the right-hand side is autonomous so the
// nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_FLOW_STEPS: usize = 1_000_000;

/// Integrate `x' = -V'(x)` from `x0` over `[0, t]` with an adaptive
/// Dormand-Prince pair (first-same-as-last).
fn flow_scalar(pot: Potential, x0: f64, t: f64, tol: f64) -> Result<f64> {
    let f = |x: f64| -pot.derivative(x);
    let mut y = x0;
    let mut s = 0.0;
    let mut k1 = f(y);
    if k1 == 0.0 {
        return Ok(y);
    }
    let stiff = pot.second_derivative(y).abs().max(1e-3);
    let mut h = (0.1 / stiff).min(t);
    let mut steps = 0;
    while s < t {
        steps += 1;
        if steps > MAX_FLOW_STEPS || !h.is_finite() || h <= 0.0 {
            return Err(Error::FlowFailed { steps, time: s });
        }
        let last = s + h >= t;
        if last {
            h = t - s;
        }
        let k2 = f(y + h * A21 * k1);
        let k3 = f(y + h * (A31 * k1 + A32 * k2));
        let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(y_new);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let sc = tol * (1.0 + y.abs().max(y_new.abs()));
        let ratio = err.abs() / sc;
        if ratio <= 1.0 {
            s = if last { t } else { s + h };
            y = y_new;
            k1 = k7;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(y)
}
