//! The Tataru distance `inf_t { t + e^{kappa_hat t} d(pi, mu(t)) }`, its
//! smoothed variant built on `psi_eps`, and the scalar search producing the
//! value together with the set of minimizing times.

use crate::error::{positive, Error, Result};
use crate::space::{ModelSpace, SpacePoint};

/// Number of uniform grid points in the coarse search.
pub const GRID_POINTS: usize = 512;
/// Number of grid minima refined by golden-section search.
pub const REFINED_MINIMA: usize = 3;
/// Value tolerance defining the minimizer set.
pub const MINIMIZER_TOLERANCE: f64 = 1e-9;

/// Smooth approximation of `r -> sqrt(2 r)` which is `C^1` (indeed `C^2`)
/// at zero: a quadratic polynomial below `eps` matched to value, slope
/// and curvature at `r = eps`.
pub fn psi_eps(eps: f64, r: f64) -> Result<f64> {
    check_psi_args(eps, r)?;
    Ok(psi(eps, r))
}

/// Derivative of [`psi_eps`] in `r`.
pub fn psi_eps_prime(eps: f64, r: f64) -> Result<f64> {
    check_psi_args(eps, r)?;
    Ok(psi_prime(eps, r))
}

fn check_psi_args(eps: f64, r: f64) -> Result<()> {
    positive("epsilon", eps)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::ParameterOutOfRange { name: "r", value: r });
    }
    Ok(())
}

pub(crate) fn psi(eps: f64, r: f64) -> f64 {
    if r >= eps {
        (2.0 * r).sqrt()
    } else {
        let s = (2.0 * eps).sqrt();
        let u = r - eps;
        s + u / s - u * u / (2.0 * s * s * s)
    }
}

pub(crate) fn psi_prime(eps: f64, r: f64) -> f64 {
    if r >= eps {
        1.0 / (2.0 * r).sqrt()
    } else {
        let s = (2.0 * eps).sqrt();
        1.0 / s - (r - eps) / (s * s * s)
    }
}

/// Smoothed distance `psi_eps(d^2 / 2)`.
pub fn d_eps(space: &ModelSpace, eps: f64, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
    positive("epsilon", eps)?;
    Ok(psi(eps, 0.5 * space.sq_distance(x, y)?))
}

/// Which inner distance the objective uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inner {
    Plain,
    Smoothed(f64),
}

impl Inner {
    pub(crate) fn eval(self, space: &ModelSpace, x: &SpacePoint, y: &SpacePoint) -> f64 {
        let d2 = space.sq_distance_unchecked(x, y);
        match self {
            Inner::Plain => d2.sqrt(),
            Inner::Smoothed(eps) => psi(eps, 0.5 * d2),
        }
    }
}

/// Coarse grid used by the search, with the objective sampled on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub t_cap: f64,
    pub times: Vec<f64>,
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TataruResult {
    pub value: f64,
    /// Times whose refined objective lies within [`MINIMIZER_TOLERANCE`] of
    /// `value`, sorted increasingly.
    pub minimizers: Vec<f64>,
    pub grid: SearchGrid,
}

/// Objective `t + e^{kappa_hat t} D(pi, mu(t))` at one time.
pub fn objective(
    space: &ModelSpace,
    inner: Inner,
    kappa_hat: f64,
    pi: &SpacePoint,
    mu: &SpacePoint,
    t: f64,
) -> Result<f64> {
    space.check(pi)?;
    let mt = space.flow(mu, t)?;
    Ok(t + (kappa_hat * t).exp() * inner.eval(space, pi, &mt))
}

/// Tataru distance from `pi` to the flow curve started at `mu`.
pub fn tataru(
    space: &ModelSpace,
    pi: &SpacePoint,
    mu: &SpacePoint,
    kappa_override: Option<f64>,
) -> Result<TataruResult> {
    let kappa = match kappa_override {
        Some(k) if !k.is_finite() => return Err(Error::ParameterOutOfRange { name: "kappa", value: k }),
        Some(k) => k,
        None => space.kappa(),
    };
    search(space, Inner::Plain, kappa.min(0.0), pi, mu)
}

/// Smoothed Tataru distance; the minimizer set is `Xi(pi)`.
pub fn tataru_eps(space: &ModelSpace, eps: f64, pi: &SpacePoint, mu: &SpacePoint) -> Result<TataruResult> {
    positive("epsilon", eps)?;
    search(space, Inner::Smoothed(eps), space.kappa_hat(), pi, mu)
}

/// Grid-plus-refinement search for `inf_t objective(t)`.
pub fn search(
    space: &ModelSpace,
    inner: Inner,
    kappa_hat: f64,
    pi: &SpacePoint,
    mu: &SpacePoint,
) -> Result<TataruResult> {
    space.check(pi)?;
    space.check(mu)?;
    let obj = |p: &SpacePoint, t: f64| t + (kappa_hat * t).exp() * inner.eval(space, pi, p);
    let t_cap = obj(mu, 0.0) + 1.0;
    let times = uniform_grid(t_cap, GRID_POINTS);
    let path = space.flow_path(mu, &times)?;
    let values: Vec<f64> = path.iter().zip(&times).map(|(p, &t)| obj(p, t)).collect();

    let mut failure = None;
    let refined = refine_minima(&times, &values, REFINED_MINIMA, |left, t| {
        match space.flow_unchecked(&path[left], t - times[left]) {
            Ok(p) => obj(&p, t),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (value, minimizers) = minimizer_set(&refined, MINIMIZER_TOLERANCE);
    Ok(TataruResult { value, minimizers, grid: SearchGrid { t_cap, times, objective: values } })
}

pub(crate) fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    let step = t_max / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { t_max } else { i as f64 * step }).collect()
}

pub(crate) fn minimizer_set(refined: &[(f64, f64)], tol: f64) -> (f64, Vec<f64>) {
    let best = refined[0].1;
    let mut ts: Vec<f64> = refined.iter().filter(|(_, v)| *v <= best + tol).map(|(t, _)| *t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-7);
    (best, ts)
}

/// Refine the `keep` lowest local minima of a sampled objective.
///
/// `eval(left, t)` evaluates the objective at `t`, where `times[left] <= t`.
/// Returns `(t, value)` pairs sorted by value; the first entry is never worse
/// than the best grid sample.
pub(crate) fn refine_minima(
    times: &[f64],
    values: &[f64],
    keep: usize,
    mut eval: impl FnMut(usize, f64) -> f64,
) -> Vec<(f64, f64)> {
    let n = values.len();
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || values[i] <= values[i - 1]) && (i + 1 == n || values[i] <= values[i + 1]))
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    minima.truncate(keep);

    let mut out: Vec<(f64, f64)> = minima
        .into_iter()
        .map(|i| {
            if n == 1 {
                return (times[0], values[0]);
            }
            let left = i.saturating_sub(1);
            let right = (i + 1).min(n - 1);
            let (t, v) = golden_section(times[left], times[right], |t| eval(left, t));
            if v < values[i] {
                (t, v)
            } else {
                (times[i], values[i])
            }
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    out
}

/// Golden-section minimization on `[lo, hi]`, also comparing the endpoints.
pub(crate) fn golden_section(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let tol = 1e-12 * (1.0 + hi.abs());
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for t in [lo, hi] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}
