//! Test-function pairs `(f, g)` for the sub- and supersolution sides of the
//! Hamilton-Jacobi equation, from smooth cylindrical functions down to the
//! Tataru-distance pairs, and the inequalities linking consecutive families.

mod chain;
pub mod phi;

pub use chain::{chain_inequality_report, flow_bound_term, soft_min_cylinder, ChainLink, ChainReport, ChainSample};
pub use phi::{truncation, Phi};

use crate::error::{positive, Error, Result};
use crate::laplace::{exp_log_weights, lambda_continuous_profile, FlowProfile, Profile};
use crate::space::{ModelSpace, SpacePoint};
use crate::tataru::{psi, psi_prime, tataru, tataru_eps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Subsolution side; `f` bounded below.
    Dagger,
    /// Supersolution side; `f` bounded above.
    Ddagger,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Dagger => 1.0,
            Side::Ddagger => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Dagger => "dagger",
            Side::Ddagger => "ddagger",
        }
    }
}

/// Family tag of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Hdag,
    Hddag,
    H0dag,
    H0ddag,
    HtildeDag,
    HtildeDdag,
    Chain { level: u8, side: Side },
}

impl Family {
    pub fn side(self) -> Side {
        match self {
            Family::Hdag | Family::H0dag | Family::HtildeDag => Side::Dagger,
            Family::Hddag | Family::H0ddag | Family::HtildeDdag => Side::Ddagger,
            Family::Chain { side, .. } => side,
        }
    }
}

/// Leading quadratic term `a/2 d^2(., center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leading {
    pub a: f64,
    pub center: SpacePoint,
}

/// `x -> a/2 d^2(x, center) + phi(d^2(x, anchors) / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalTestFunction {
    pub anchors: Vec<SpacePoint>,
    pub phi: Phi,
    pub leading: Option<Leading>,
}

impl CylindricalTestFunction {
    pub fn new(phi: Phi, anchors: Vec<SpacePoint>, leading: Option<Leading>) -> Result<Self> {
        if phi.arity() != anchors.len() {
            return Err(Error::ParameterOutOfRange { name: "anchors", value: anchors.len() as f64 });
        }
        if let Some(l) = &leading {
            positive("a", l.a)?;
        }
        Ok(CylindricalTestFunction { anchors, phi, leading })
    }

    pub fn half_sq_distances(&self, space: &ModelSpace, x: &SpacePoint) -> Result<Vec<f64>> {
        self.anchors.iter().map(|p| Ok(0.5 * space.sq_distance(x, p)?)).collect()
    }

    pub fn value(&self, space: &ModelSpace, x: &SpacePoint) -> Result<f64> {
        let r = self.half_sq_distances(space, x)?;
        let mut v = self.phi.value(&r)?;
        if let Some(l) = &self.leading {
            v += 0.5 * l.a * space.sq_distance(x, &l.center)?;
        }
        Ok(v)
    }
}

/// Wrap the test function `a/2 d^2(., rho) + phi0(d^2(., anchors)/2)` in the
/// cut-off of level `n`, giving the bounded base
/// `(r_0, r) -> truncation_n(a r_0 + phi0(r))` with anchors `(rho, anchors)`.
pub fn truncate_cylinder(base: &CylindricalTestFunction, n: u32) -> Result<CylindricalTestFunction> {
    let lead = base.leading.as_ref().ok_or(Error::MissingParameter("a"))?;
    let phi = Phi::truncate(n as f64, Phi::leading_linear(lead.a, base.phi.clone())?)?;
    let mut anchors = Vec::with_capacity(base.anchors.len() + 1);
    anchors.push(lead.center.clone());
    anchors.extend(base.anchors.iter().cloned());
    CylindricalTestFunction::new(phi, anchors, None)
}

/// Parameters shared by the Tataru-type pairs.
///
/// Dagger side: `f(x) = a/2 d^2(x, center) + b T(x, flow_anchor) + c`.
/// Ddagger side: `f(x) = -a/2 d^2(center, x) - b T(x, flow_anchor) + c`.
/// `T` is the level's approximation of the Tataru distance, always taken
/// from the evaluation point to the flow curve of `flow_anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: Option<f64>,
    pub m: Option<u64>,
    pub n: Option<u64>,
    pub center: SpacePoint,
    pub flow_anchor: SpacePoint,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Cylinder(CylindricalTestFunction),
    Bounded(CylindricalTestFunction),
    /// Levels 5, 6 and the nonsmooth pair; `eps = None` is the plain distance.
    Tataru {
        p: ChainParams,
        eps: Option<f64>,
    },
    /// Levels 2 (`n = Some`) and 3 (`n = None`).
    Laplace {
        p: ChainParams,
        eps: f64,
        m: u64,
        n: Option<u64>,
    },
    /// Level 4.
    Argmin {
        p: ChainParams,
        eps: f64,
    },
}

/// An `(f, g)` evaluator pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPair {
    family: Family,
    space: ModelSpace,
    kind: Kind,
}

/// Tilted weight `p` at time `t` of the Laplace representation.
struct TiltAtom {
    t: f64,
    p: f64,
}

impl HamiltonianPair {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn side(&self) -> Side {
        self.family.side()
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn f(&self, x: &SpacePoint) -> Result<f64> {
        self.space.check(x)?;
        let s = self.side().sign();
        match &self.kind {
            Kind::Cylinder(cyl) | Kind::Bounded(cyl) => {
                let r = cyl.half_sq_distances(&self.space, x)?;
                let (v, grad) = cyl.phi.eval(&r)?;
                cyl.phi.check_partials(&grad)?;
                let lead = match &cyl.leading {
                    Some(l) => 0.5 * l.a * self.space.sq_distance_unchecked(x, &l.center),
                    None => 0.0,
                };
                Ok(s * (lead + v))
            }
            Kind::Tataru { p, eps } => {
                let t = match eps {
                    Some(e) => tataru_eps(&self.space, *e, x, &p.flow_anchor)?.value,
                    None => tataru(&self.space, x, &p.flow_anchor, None)?.value,
                };
                Ok(self.tataru_f(p, x, t))
            }
            Kind::Laplace { p, eps, m, n } => {
                let (neg_log, _) = self.tilt(p, *eps, *m, *n, x)?;
                Ok(self.tataru_f(p, x, neg_log))
            }
            Kind::Argmin { p, eps } => {
                let t = tataru_eps(&self.space, *eps, x, &p.flow_anchor)?.value;
                Ok(self.tataru_f(p, x, t))
            }
        }
    }

    pub fn g(&self, x: &SpacePoint) -> Result<f64> {
        self.space.check(x)?;
        match &self.kind {
            Kind::Cylinder(cyl) => self.cylinder_g(cyl, x),
            Kind::Bounded(cyl) => self.bounded_g(cyl, x),
            Kind::Tataru { p, .. } => Ok(self.common_g(p, x) + self.side().sign() * p.b),
            Kind::Laplace { p, eps, m, n } => {
                let (_, atoms) = self.tilt(p, *eps, *m, *n, x)?;
                let times: Vec<f64> = atoms.iter().map(|a| a.t).collect();
                let path = self.space.flow_path(&p.flow_anchor, &times)?;
                let kh = self.space.kappa_hat();
                let ex = self.space.energy_unchecked(x);
                let inv_m = 1.0 / *m as f64;
                let (mut drift, mut reg) = (0.0, 0.0);
                for (atom, q) in atoms.iter().zip(&path) {
                    let r = 0.5 * self.space.sq_distance_unchecked(x, q);
                    let damp = (kh * atom.t).exp();
                    drift += atom.p * psi_prime(*eps, r) * damp * (self.space.energy_unchecked(q) - ex);
                    reg += atom.p * inv_m.max(damp * psi(*eps, r));
                }
                Ok(self.common_g(p, x) + self.side().sign() * p.b * (drift - 0.5 * kh * reg))
            }
            Kind::Argmin { p, eps } => {
                let xi = tataru_eps(&self.space, *eps, x, &p.flow_anchor)?.minimizers;
                let mut sup = f64::NEG_INFINITY;
                for t in xi {
                    sup = sup.max(flow_bound_term(&self.space, *eps, x, &p.flow_anchor, t)?);
                }
                Ok(self.common_g(p, x) + self.side().sign() * p.b * sup)
            }
        }
    }

    fn tataru_f(&self, p: &ChainParams, x: &SpacePoint, t: f64) -> f64 {
        let s = self.side().sign();
        s * (0.5 * p.a * self.space.sq_distance_unchecked(x, &p.center) + p.b * t) + p.c
    }

    /// Terms of `g` shared by every Tataru-type level.
    fn common_g(&self, p: &ChainParams, x: &SpacePoint) -> f64 {
        let s = self.side().sign();
        let d2 = self.space.sq_distance_unchecked(x, &p.center);
        let d = d2.sqrt();
        let gap = self.space.energy_unchecked(&p.center) - self.space.energy_unchecked(x);
        let (a, b, k) = (p.a, p.b, self.space.kappa());
        s * a * gap - s * a * k / 2.0 * d2 + 0.5 * a * a * d2 + s * a * b * d + s * 0.5 * b * b
    }

    fn cylinder_g(&self, cyl: &CylindricalTestFunction, x: &SpacePoint) -> Result<f64> {
        let lead = cyl.leading.as_ref().ok_or(Error::MissingParameter("a"))?;
        let sp = &self.space;
        let k = sp.kappa();
        let ex = sp.energy_unchecked(x);
        let d0sq = sp.sq_distance_unchecked(x, &lead.center);
        let d0 = d0sq.sqrt();
        let ec = sp.energy_unchecked(&lead.center);
        let (sum_terms, slope) = self.anchor_terms(cyl, x)?;
        let a = lead.a;
        Ok(match self.side() {
            Side::Dagger => {
                a * (ec - ex - k / 2.0 * d0sq) + 0.5 * a * a * d0sq + sum_terms + 0.5 * slope * slope + a * d0 * slope
            }
            Side::Ddagger => {
                a * (ex - ec + k / 2.0 * d0sq) + 0.5 * a * a * d0sq + sum_terms - 0.5 * slope * slope - a * d0 * slope
            }
        })
    }

    fn bounded_g(&self, cyl: &CylindricalTestFunction, x: &SpacePoint) -> Result<f64> {
        let (sum_terms, slope) = self.anchor_terms(cyl, x)?;
        Ok(match self.side() {
            Side::Dagger => sum_terms + 0.5 * slope * slope,
            Side::Ddagger => {
                let diag = self.diag_terms(cyl, x)?;
                // Off-diagonal sum is slope^2 - diag.
                sum_terms + 0.5 * diag - 0.5 * (slope * slope - diag)
            }
        })
    }

    /// `(sum_i d_i phi [EVI bracket_i], sum_i d_i phi d_i)` with the bracket
    /// signed for the side.
    fn anchor_terms(&self, cyl: &CylindricalTestFunction, x: &SpacePoint) -> Result<(f64, f64)> {
        let sp = &self.space;
        let r = cyl.half_sq_distances(sp, x)?;
        let (_, grad) = cyl.phi.eval(&r)?;
        cyl.phi.check_partials(&grad)?;
        let ex = sp.energy_unchecked(x);
        let k = sp.kappa();
        let mut sum = 0.0;
        let mut slope = 0.0;
        for ((anchor, ri), gi) in cyl.anchors.iter().zip(&r).zip(&grad) {
            let ea = sp.energy_unchecked(anchor);
            let bracket = match self.side() {
                Side::Dagger => ea - ex - k * ri,
                Side::Ddagger => ex - ea + k * ri,
            };
            sum += gi * bracket;
            slope += gi * (2.0 * ri).sqrt();
        }
        Ok((sum, slope))
    }

    /// `sum_i (d_i phi)^2 d_i^2`.
    fn diag_terms(&self, cyl: &CylindricalTestFunction, x: &SpacePoint) -> Result<f64> {
        let r = cyl.half_sq_distances(&self.space, x)?;
        let (_, grad) = cyl.phi.eval(&r)?;
        Ok(grad.iter().zip(&r).map(|(g, ri)| g * g * 2.0 * ri).sum())
    }

    /// `-(1/m) log Lambda` at `x` and the tilted weights.
    fn tilt(&self, p: &ChainParams, eps: f64, m: u64, n: Option<u64>, x: &SpacePoint) -> Result<(f64, Vec<TiltAtom>)> {
        let profile = FlowProfile::new(&self.space, eps, x, &p.flow_anchor)?;
        let mf = m as f64;
        match n {
            Some(n) => {
                let nf = n as f64;
                let times: Vec<f64> = (1..=n * n).map(|i| i as f64 / nf).collect();
                let h = profile.values(&times)?;
                let z: Vec<f64> = exp_log_weights(mf + 1.0, n).iter().zip(&h).map(|(w, h)| w - mf * h).collect();
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let log = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
                let atoms = times.iter().zip(&z).map(|(&t, zi)| TiltAtom { t, p: (zi - log).exp() }).collect();
                Ok((-log / mf, atoms))
            }
            None => {
                let lap = lambda_continuous_profile(&profile, m)?;
                let total: f64 = lap.nodes.iter().map(|nd| nd.weight * nd.value).sum();
                let atoms = lap.nodes.iter().map(|nd| TiltAtom { t: nd.t, p: nd.weight * nd.value / total }).collect();
                Ok((lap.value.neg_log, atoms))
            }
        }
    }
}

fn check_points(space: &ModelSpace, pts: &[&SpacePoint]) -> Result<()> {
    pts.iter().try_for_each(|p| space.check(p))
}

/// Smooth cylindrical pair on the subsolution side with leading quadratic
/// `a/2 d^2(., rho)`.
pub fn build_cyl_dagger(
    space: &ModelSpace,
    a: f64,
    phi: Phi,
    rho: SpacePoint,
    anchors: Vec<SpacePoint>,
) -> Result<HamiltonianPair> {
    build_cyl(space, Side::Dagger, a, phi, rho, anchors)
}

/// Smooth cylindrical pair on the supersolution side with leading quadratic
/// `-a/2 d^2(., gamma)`.
pub fn build_cyl_ddagger(
    space: &ModelSpace,
    a: f64,
    phi: Phi,
    gamma: SpacePoint,
    anchors: Vec<SpacePoint>,
) -> Result<HamiltonianPair> {
    build_cyl(space, Side::Ddagger, a, phi, gamma, anchors)
}

fn build_cyl(
    space: &ModelSpace,
    side: Side,
    a: f64,
    phi: Phi,
    center: SpacePoint,
    anchors: Vec<SpacePoint>,
) -> Result<HamiltonianPair> {
    positive("a", a)?;
    space.check(&center)?;
    anchors.iter().try_for_each(|p| space.check(p))?;
    let cyl = CylindricalTestFunction::new(phi, anchors, Some(Leading { a, center }))?;
    let family = match side {
        Side::Dagger => Family::Hdag,
        Side::Ddagger => Family::Hddag,
    };
    Ok(HamiltonianPair { family, space: space.clone(), kind: Kind::Cylinder(cyl) })
}

/// Pair from a cylindrical test function (with its leading term).
pub fn build_cyl_from(space: &ModelSpace, side: Side, cyl: CylindricalTestFunction) -> Result<HamiltonianPair> {
    let lead = cyl.leading.clone().ok_or(Error::MissingParameter("a"))?;
    build_cyl(space, side, lead.a, cyl.phi, lead.center, cyl.anchors)
}

/// Pair built from a bounded base function, without leading quadratic.
pub fn build_h0_pair(space: &ModelSpace, side: Side, phi: Phi, anchors: Vec<SpacePoint>) -> Result<HamiltonianPair> {
    if !phi.is_bounded() {
        return Err(Error::RequiresBounded);
    }
    anchors.iter().try_for_each(|p| space.check(p))?;
    let cyl = CylindricalTestFunction::new(phi, anchors, None)?;
    let family = match side {
        Side::Dagger => Family::H0dag,
        Side::Ddagger => Family::H0ddag,
    };
    Ok(HamiltonianPair { family, space: space.clone(), kind: Kind::Bounded(cyl) })
}

/// Nonsmooth pair built on the Tataru distance.
pub fn build_tataru_pair(
    space: &ModelSpace,
    side: Side,
    a: f64,
    b: f64,
    c: f64,
    center: SpacePoint,
    flow_anchor: SpacePoint,
) -> Result<HamiltonianPair> {
    let p = ChainParams { a, b, c, eps: None, m: None, n: None, center, flow_anchor };
    validate(space, &p)?;
    let family = match side {
        Side::Dagger => Family::HtildeDag,
        Side::Ddagger => Family::HtildeDdag,
    };
    Ok(HamiltonianPair { family, space: space.clone(), kind: Kind::Tataru { p, eps: None } })
}

fn validate(space: &ModelSpace, p: &ChainParams) -> Result<()> {
    positive("a", p.a)?;
    positive("b", p.b)?;
    if !p.c.is_finite() {
        return Err(Error::ParameterOutOfRange { name: "c", value: p.c });
    }
    check_points(space, &[&p.center, &p.flow_anchor])
}

/// Pair of the approximation chain at `level` (2 to 6).
pub fn build_chain_pair(space: &ModelSpace, level: u8, side: Side, params: ChainParams) -> Result<HamiltonianPair> {
    validate(space, &params)?;
    let eps = || params.eps.ok_or(Error::MissingParameter("epsilon")).and_then(|e| positive("epsilon", e));
    let m = || match params.m {
        Some(0) => Err(Error::ParameterOutOfRange { name: "m", value: 0.0 }),
        Some(m) => Ok(m),
        None => Err(Error::MissingParameter("m")),
    };
    let kind = match level {
        2 => {
            let (eps, m) = (eps()?, m()?);
            let n = match params.n {
                Some(0) => return Err(Error::ParameterOutOfRange { name: "n", value: 0.0 }),
                Some(n) => n,
                None => return Err(Error::MissingParameter("n")),
            };
            Kind::Laplace { eps, m, n: Some(n), p: params }
        }
        3 => Kind::Laplace { eps: eps()?, m: m()?, n: None, p: params },
        4 => Kind::Argmin { eps: eps()?, p: params },
        5 => Kind::Tataru { eps: Some(eps()?), p: params },
        6 => Kind::Tataru { eps: None, p: params },
        _ => return Err(Error::ParameterOutOfRange { name: "level", value: level as f64 }),
    };
    Ok(HamiltonianPair { family: Family::Chain { level, side }, space: space.clone(), kind })
}

#[cfg(test)]
mod tests;
