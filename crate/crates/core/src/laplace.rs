//! Exponential reference measures, Laplace integrals
//! `int e^{-m h} d lambda_{m+1}` and the tilted measures they define.
//!
//! Everything is accumulated in log space: `Lambda` itself underflows for
//! moderate `m`, while `-(1/m) log Lambda` is the quantity of interest.

use crate::error::{positive, Error, Result};
use crate::quadrature::{integrate, Node};
use crate::space::{ModelSpace, SpacePoint};
use crate::tataru::{psi, refine_minima, tataru_eps, uniform_grid, GRID_POINTS};

/// Finite measure on `[0, inf)` with atoms sorted by location.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    /// Normalizes the weights; atoms must be sorted with nonnegative
    /// locations and weights, and positive total mass.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.windows(2).any(|w| w[0].0 > w[1].0) || atoms.iter().any(|a| !(a.0 >= 0.0) || !(a.1 >= 0.0)) {
            return Err(Error::InvalidPoint("atoms must be sorted with nonnegative entries".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidPoint("measure has no mass".into()));
        }
        Ok(DiscreteMeasure { atoms: atoms.into_iter().map(|(t, w)| (t, w / total)).collect() })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Mass of atoms with `|t - center| <= radius`.
    pub fn mass_within(&self, center: f64, radius: f64) -> f64 {
        self.atoms.iter().filter(|a| (a.0 - center).abs() <= radius).map(|a| a.1).sum()
    }

    pub fn mean(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(t, w)| w * f(t)).sum()
    }
}

fn check_order(name: &'static str, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::ParameterOutOfRange { name, value: 0.0 });
    }
    Ok(m as f64)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log weights of `lambda_{m,n}`: atoms `i/n`, `i = 1..n^2`, weights
/// proportional to `e^{-m i / n}`.
pub(crate) fn exp_log_weights(m: f64, n: u64) -> Vec<f64> {
    let nf = n as f64;
    let count = n * n;
    let raw = (1..=count).map(|i| -m * i as f64 / nf);
    let log_norm = log_sum_exp(raw.clone());
    raw.map(|v| v - log_norm).collect()
}

/// Riemann-sum approximation `lambda_{m,n}` of the exponential law with
/// rate `m`.
pub fn discrete_exp_measure(m: u64, n: u64) -> Result<DiscreteMeasure> {
    let mf = check_order("m", m)?;
    check_order("n", n)?;
    let nf = n as f64;
    let atoms = exp_log_weights(mf, n).into_iter().enumerate().map(|(i, lw)| ((i + 1) as f64 / nf, lw.exp())).collect();
    DiscreteMeasure::new(atoms)
}

/// Normalizing constant `c_{m,n} = 1 / sum_i e^{-m i / n}`.
pub fn exp_measure_constant(m: u64, n: u64) -> Result<f64> {
    let mf = check_order("m", m)?;
    check_order("n", n)?;
    let nf = n as f64;
    Ok((-log_sum_exp((1..=n * n).map(|i| -mf * i as f64 / nf))).exp())
}

/// A nonnegative exponent `h(t)` on `[0, inf)`.
pub trait Profile {
    fn value(&self, t: f64) -> Result<f64>;

    /// Values at increasing times.
    fn values(&self, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.value(t)).collect()
    }

    /// A time beyond which `t` alone exceeds `inf_s (s + h(s))`.
    fn horizon(&self) -> Result<f64> {
        Ok(self.value(0.0)? + 1.0)
    }

    /// Lower bound on `h`.
    fn lower_bound(&self) -> f64 {
        0.0
    }
}

/// `h(t) = e^{kappa_hat t} d_eps(pi, mu(t))` along the flow from `mu`.
#[derive(Debug, Clone)]
pub struct FlowProfile<'a> {
    pub space: &'a ModelSpace,
    pub eps: f64,
    pub pi: &'a SpacePoint,
    pub mu: &'a SpacePoint,
}

impl<'a> FlowProfile<'a> {
    pub fn new(space: &'a ModelSpace, eps: f64, pi: &'a SpacePoint, mu: &'a SpacePoint) -> Result<Self> {
        positive("epsilon", eps)?;
        space.check(pi)?;
        space.check(mu)?;
        Ok(FlowProfile { space, eps, pi, mu })
    }

    fn at(&self, t: f64, p: &SpacePoint) -> f64 {
        let r = 0.5 * self.space.sq_distance_unchecked(self.pi, p);
        (self.space.kappa_hat() * t).exp() * psi(self.eps, r)
    }
}

impl Profile for FlowProfile<'_> {
    fn value(&self, t: f64) -> Result<f64> {
        let p = self.space.flow(self.mu, t)?;
        Ok(self.at(t, &p))
    }

    fn values(&self, times: &[f64]) -> Result<Vec<f64>> {
        let path = self.space.flow_path(self.mu, times)?;
        Ok(times.iter().zip(&path).map(|(&t, p)| self.at(t, p)).collect())
    }
}

/// Constant exponent, for which every Laplace quantity is explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile(pub f64);

impl Profile for ConstantProfile {
    fn value(&self, _t: f64) -> Result<f64> {
        Ok(self.0)
    }

    fn lower_bound(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceValue {
    pub log_lambda: f64,
    /// `-(1/m) log Lambda`.
    pub neg_log: f64,
}

impl LaplaceValue {
    fn from_log(log_lambda: f64, m: f64) -> Self {
        LaplaceValue { log_lambda, neg_log: -log_lambda / m }
    }

    /// `Lambda` itself; underflows to zero long before `log_lambda` loses
    /// precision.
    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }
}

/// `Lambda_{m,n} = sum_i w_i e^{-m h(t_i)}` with `(t_i, w_i)` the atoms of
/// `lambda_{m+1,n}`.
pub fn lambda_discrete_profile(profile: &impl Profile, m: u64, n: u64) -> Result<LaplaceValue> {
    let (mf, nf) = (check_order("m", m)?, check_order("n", n)? as f64);
    let times: Vec<f64> = (1..=n * n).map(|i| i as f64 / nf).collect();
    let h = profile.values(&times)?;
    let lw = exp_log_weights(mf + 1.0, n);
    let log = log_sum_exp(lw.iter().zip(&h).map(|(w, h)| w - mf * h));
    Ok(LaplaceValue::from_log(log, mf))
}

pub fn lambda_discrete(
    space: &ModelSpace,
    eps: f64,
    m: u64,
    n: u64,
    pi: &SpacePoint,
    mu: &SpacePoint,
) -> Result<LaplaceValue> {
    lambda_discrete_profile(&FlowProfile::new(space, eps, pi, mu)?, m, n)
}

/// Relative accuracy requested from the quadrature.
pub const QUADRATURE_REL_TOL: f64 = 1e-12;
pub const QUADRATURE_MAX_PANELS: usize = 20_000;

/// Continuous Laplace integral with its quadrature diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLaplace {
    /// Quadrature on `[0, horizon]` plus the tail estimate.
    pub value: LaplaceValue,
    /// `log Lambda` bracket: quadrature alone, and quadrature plus the
    /// rigorous tail bound `e^{-m inf h - (m+1) horizon}`.
    pub log_bracket: (f64, f64),
    pub horizon: f64,
    /// Estimated quadrature error relative to the integral.
    pub rel_error: f64,
    /// Location of the peak of the integrand.
    pub peak: f64,
    /// Quadrature nodes with values of the integrand scaled by `e^{-shift}`.
    pub nodes: Vec<Node>,
    pub shift: f64,
}

/// `Lambda_m = int_0^inf e^{-m h(t)} (m+1) e^{-(m+1) t} dt`.
///
/// The integrand is shifted by its maximum before integrating. Beyond the
/// horizon `h` is frozen at its horizon value for the tail estimate, which
/// is exact for constant profiles and always inside the reported bracket.
pub fn lambda_continuous_profile(profile: &impl Profile, m: u64) -> Result<ContinuousLaplace> {
    let mf = check_order("m", m)?;
    let rate = mf + 1.0;
    let horizon = profile.horizon()? + 5.0 / rate;

    // Peak of g(t) = -m h(t) - (m+1) t + ln(m+1).
    let times = uniform_grid(horizon, GRID_POINTS);
    let h = profile.values(&times)?;
    let scaled: Vec<f64> = times.iter().zip(&h).map(|(t, h)| rate / mf * t + h).collect();
    let mut failure = None;
    let refined = refine_minima(&times, &scaled, 3, |_, t| match profile.value(t) {
        Ok(v) => rate / mf * t + v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::INFINITY
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (peak, min_scaled) = refined[0];
    let shift = -mf * min_scaled + rate.ln();

    let mut failure = None;
    let integrand = |t: f64| match profile.value(t) {
        Ok(v) => (-mf * v - rate * t + rate.ln() - shift).exp(),
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let mut breaks = vec![0.0];
    if peak > 0.0 && peak < horizon {
        breaks.push(peak);
    }
    breaks.push(horizon);
    let quad = integrate(integrand, &breaks, 8, 0.0, QUADRATURE_REL_TOL, QUADRATURE_MAX_PANELS);
    if let Some(e) = failure {
        return Err(e);
    }
    let quad = quad?;
    if !(quad.value > 0.0) {
        return Err(Error::QuadratureFailed { achieved: quad.error, requested: 0.0 });
    }
    let log_quad = quad.value.ln() + shift;
    let h_end = profile.value(horizon)?;
    let log_tail_estimate = -mf * h_end - rate * horizon;
    let log_tail_bound = -mf * profile.lower_bound() - rate * horizon;
    let log_total = log_add(log_quad, log_tail_estimate);
    Ok(ContinuousLaplace {
        value: LaplaceValue::from_log(log_total, mf),
        log_bracket: (log_quad, log_add(log_quad, log_tail_bound)),
        horizon,
        rel_error: quad.error / quad.value,
        peak,
        nodes: quad.nodes,
        shift,
    })
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn lambda_continuous(
    space: &ModelSpace,
    eps: f64,
    m: u64,
    pi: &SpacePoint,
    mu: &SpacePoint,
) -> Result<ContinuousLaplace> {
    lambda_continuous_profile(&FlowProfile::new(space, eps, pi, mu)?, m)
}

/// Probability measure with density proportional to `e^{-m h}` against
/// `lambda_{m+1}`, supported on the quadrature nodes of
/// [`lambda_continuous_profile`].
pub fn tilted_measure_profile(profile: &impl Profile, m: u64) -> Result<DiscreteMeasure> {
    let lap = lambda_continuous_profile(profile, m)?;
    tilted_from(&lap)
}

pub(crate) fn tilted_from(lap: &ContinuousLaplace) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(lap.nodes.iter().map(|n| (n.t, n.weight * n.value)).collect())
}

pub fn tilted_measure(
    space: &ModelSpace,
    eps: f64,
    m: u64,
    pi: &SpacePoint,
    mu: &SpacePoint,
) -> Result<DiscreteMeasure> {
    tilted_measure_profile(&FlowProfile::new(space, eps, pi, mu)?, m)
}

/// `int h d nu_m` for the tilted measure `nu_m`.
pub fn tilted_mean_profile(profile: &impl Profile, m: u64) -> Result<f64> {
    let nu = tilted_measure_profile(profile, m)?;
    let mut total = 0.0;
    for &(t, w) in nu.atoms() {
        total += w * profile.value(t)?;
    }
    Ok(total)
}

/// `(m, |-(1/m) log Lambda_m - d_{T,eps}(pi, mu)|)` for each `m`.
pub fn varadhan_error_curve(
    space: &ModelSpace,
    eps: f64,
    pi: &SpacePoint,
    mu: &SpacePoint,
    m_list: &[u64],
) -> Result<Vec<(u64, f64)>> {
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPoint("m_list must be strictly increasing".into()));
    }
    let target = tataru_eps(space, eps, pi, mu)?.value;
    let profile = FlowProfile::new(space, eps, pi, mu)?;
    m_list.iter().map(|&m| Ok((m, (lambda_continuous_profile(&profile, m)?.value.neg_log - target).abs()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Potential;
    use approx::assert_abs_diff_eq;

    fn ou() -> ModelSpace {
        ModelSpace::euclidean(1, Potential::Quadratic { kappa: 1.0 }).unwrap()
    }

    fn x(v: f64) -> SpacePoint {
        SpacePoint::scalar(v)
    }

    #[test]
    fn exp_measure_examples() {
        let m = discrete_exp_measure(1, 1).unwrap();
        assert_eq!(m.atoms(), &[(1.0, 1.0)]);
        assert_abs_diff_eq!(exp_measure_constant(1, 1).unwrap(), std::f64::consts::E, epsilon = 1e-15);
        let m = discrete_exp_measure(1, 2).unwrap();
        let z: f64 = (1..=4).map(|i| (-(i as f64) / 2.0).exp()).sum();
        for (i, &(t, w)) in m.atoms().iter().enumerate() {
            assert_eq!(t, (i + 1) as f64 / 2.0);
            assert_abs_diff_eq!(w, (-((i + 1) as f64) / 2.0).exp() / z, epsilon = 1e-15);
        }
        for (mm, n) in [(3, 7), (500, 20), (1, 50)] {
            assert_abs_diff_eq!(discrete_exp_measure(mm, n).unwrap().total_mass(), 1.0, epsilon = 1e-12);
        }
        assert!(discrete_exp_measure(0, 1).is_err());
    }

    #[test]
    fn constant_profiles_are_exact() {
        for m in [1, 10, 100, 10_000] {
            for c in [0.0, 0.375, 2.5] {
                let v = lambda_discrete_profile(&ConstantProfile(c), m, 10).unwrap();
                assert_abs_diff_eq!(v.neg_log, c, epsilon = 1e-10);
                let v = lambda_continuous_profile(&ConstantProfile(c), m).unwrap();
                assert_abs_diff_eq!(v.value.neg_log, c, epsilon = 1e-10);
            }
        }
        let v = lambda_discrete_profile(&ConstantProfile(0.0), 7, 5).unwrap();
        assert_abs_diff_eq!(v.lambda(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn critical_point_instance() {
        let s = ou();
        let v = lambda_discrete(&s, 0.5, 30, 4, &x(0.0), &x(0.0)).unwrap();
        assert_abs_diff_eq!(v.neg_log, 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(v.log_lambda, -30.0 * 0.375, epsilon = 1e-10);
    }

    #[test]
    fn discrete_ou_near_smoothed_tataru() {
        let s = ou();
        let target = tataru_eps(&s, 0.1, &x(0.0), &x(3.0)).unwrap().value;
        let v = lambda_discrete(&s, 0.1, 50, 40, &x(0.0), &x(3.0)).unwrap();
        assert!((v.neg_log - target).abs() < 0.15);
    }

    #[test]
    fn never_underflows() {
        let v = lambda_discrete_profile(&ConstantProfile(10.0), 100_000, 3).unwrap();
        assert!(v.log_lambda.is_finite());
        assert_eq!(v.lambda(), 0.0);
        assert_abs_diff_eq!(v.neg_log, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn continuous_against_direct_integration() {
        // Independent oracle: composite Simpson on a fine grid, log-shifted.
        let s = ou();
        let (pi, mu) = (x(0.0), x(3.0));
        let prof = FlowProfile::new(&s, 0.1, &pi, &mu).unwrap();
        for m in [1u64, 5, 40] {
            let mf = m as f64;
            let lap = lambda_continuous_profile(&prof, m).unwrap();
            let n = 400_000;
            let t_end = 40.0;
            let hstep = t_end / n as f64;
            let g = |t: f64| -mf * prof.value(t).unwrap() - (mf + 1.0) * t + (mf + 1.0).ln();
            let gmax = (0..=n).map(|i| g(i as f64 * hstep)).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                sum += w * (g(i as f64 * hstep) - gmax).exp();
            }
            let oracle = (sum * hstep / 3.0).ln() + gmax;
            assert_abs_diff_eq!(lap.value.log_lambda, oracle, epsilon = 1e-8);
            assert!(lap.log_bracket.0 <= lap.value.log_lambda && lap.value.log_lambda <= lap.log_bracket.1);
        }
    }

    #[test]
    fn riemann_refinement_approaches_integral() {
        let s = ou();
        let (pi, mu) = (x(0.0), x(3.0));
        let cont = lambda_continuous(&s, 0.1, 20, &pi, &mu).unwrap().value.log_lambda;
        let gaps: Vec<f64> = [10, 40, 160]
            .iter()
            .map(|&n| (lambda_discrete(&s, 0.1, 20, n, &pi, &mu).unwrap().log_lambda - cont).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn laplace_sandwich() {
        let s = ou();
        let (pi, mu) = (x(0.5), x(2.0));
        let eps = 0.05;
        let inf = tataru_eps(&s, eps, &pi, &mu).unwrap().value;
        for m in [5u64, 50, 500] {
            let v = lambda_continuous(&s, eps, m, &pi, &mu).unwrap().value.neg_log;
            // Lower: e^{-m h} e^{-(m+1) t} <= e^{-m (t + h)}; ln(m+1)/m from the density.
            assert!(v >= inf - (m as f64 + 1.0).ln() / m as f64 - 1e-12);
            let fixed = FlowProfile::new(&s, eps, &pi, &mu).unwrap().value(0.7).unwrap() + 0.7;
            assert!(v <= fixed + 5.0 / m as f64 + 1.0);
        }
    }

    #[test]
    fn tilted_measure_properties() {
        let nu = tilted_measure_profile(&ConstantProfile(1.3), 4).unwrap();
        assert_abs_diff_eq!(nu.total_mass(), 1.0, epsilon = 1e-12);
        // Constant tilt: the measure is lambda_5 restricted to the nodes.
        let mean_t = nu.mean(|t| t);
        assert_abs_diff_eq!(mean_t, 0.2, epsilon = 1e-6);
        let s = ou();
        let nu = tilted_measure(&s, 1e-3, 1000, &x(0.0), &x(3.0)).unwrap();
        assert!(nu.mass_within(3f64.ln(), 0.1) >= 0.95);
        assert!(nu.atoms().windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn mean_weight_converges_to_minimizer_value() {
        let s = ou();
        let (pi, mu) = (x(0.0), x(3.0));
        let prof = FlowProfile::new(&s, 1e-3, &pi, &mu).unwrap();
        let t_star = tataru_eps(&s, 1e-3, &pi, &mu).unwrap().minimizers[0];
        let target = prof.value(t_star).unwrap();
        let errs: Vec<f64> =
            [10u64, 100, 1000].iter().map(|&m| (tilted_mean_profile(&prof, m).unwrap() - target).abs()).collect();
        assert!(errs[2] < errs[0] && errs[2] < 0.02, "{errs:?}");
    }

    #[test]
    fn varadhan_curve_decreases() {
        let s = ou();
        let curve = varadhan_error_curve(&s, 0.1, &x(0.0), &x(3.0), &[10, 100, 1000]).unwrap();
        assert!(curve[2].1 < curve[0].1);
        assert!(varadhan_error_curve(&s, 0.1, &x(0.0), &x(3.0), &[10, 10]).is_err());
    }
}
