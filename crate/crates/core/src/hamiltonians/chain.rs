//! Sampled checks of the inequalities linking consecutive pair families.

use rand::Rng;

use super::{
    build_chain_pair, build_cyl_from, build_h0_pair, truncate_cylinder, ChainParams, CylindricalTestFunction, Leading,
    Phi, Side,
};
use crate::error::{positive, Result};
use crate::laplace::exp_log_weights;
use crate::space::{ModelSpace, SpacePoint};
use crate::tataru::{psi, psi_prime, tataru_eps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainLink {
    /// `g1 <= g2` for the cylinder whose `f` equals the level-2 `f`.
    OneToTwo,
    /// The flow bound `<= 1` at the minimizers of the smoothed distance.
    FourToFive,
    /// Agreement of the bounded and the cylindrical `g` below the cut-off.
    ZeroToOneOverlap,
}

impl ChainLink {
    pub const ALL: [ChainLink; 3] = [ChainLink::OneToTwo, ChainLink::FourToFive, ChainLink::ZeroToOneOverlap];

    pub fn name(self) -> &'static str {
        match self {
            ChainLink::OneToTwo => "1-2",
            ChainLink::FourToFive => "4-5",
            ChainLink::ZeroToOneOverlap => "0-1-overlap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "1-2" | "1->2" | "one-two" => Some(ChainLink::OneToTwo),
            "4-5" | "4->5" | "four-five" => Some(ChainLink::FourToFive),
            "0-1" | "0->1" | "0-1-overlap" | "overlap" => Some(ChainLink::ZeroToOneOverlap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub instance: usize,
    /// Signed violation; nonpositive when the inequality holds exactly.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub link: ChainLink,
    pub max_violation: f64,
    pub samples: Vec<ChainSample>,
}

/// `e^{kh t}[E(mu(t)) - E(x)] psi'(d^2/2) - kh/2 e^{kh t} d_eps(x, mu(t))`
/// with `mu(t)` the flow of `anchor`.
pub fn flow_bound_term(space: &ModelSpace, eps: f64, x: &SpacePoint, anchor: &SpacePoint, t: f64) -> Result<f64> {
    positive("epsilon", eps)?;
    space.check(x)?;
    let q = space.flow(anchor, t)?;
    let kh = space.kappa_hat();
    let r = 0.5 * space.sq_distance_unchecked(x, &q);
    let damp = (kh * t).exp();
    let gap = space.energy_unchecked(&q) - space.energy_unchecked(x);
    Ok(damp * gap * psi_prime(eps, r) - 0.5 * kh * damp * psi(eps, r))
}

/// Cylindrical test function whose value is the level-2 `f` on the
/// subsolution side: leading `a/2 d^2(., center)` and a soft minimum over
/// the flow of `flow_anchor` sampled at `i/n`, `i = 1..n^2`.
pub fn soft_min_cylinder(space: &ModelSpace, p: &ChainParams) -> Result<CylindricalTestFunction> {
    let eps = p.eps.ok_or(crate::Error::MissingParameter("epsilon"))?;
    let m = p.m.ok_or(crate::Error::MissingParameter("m"))?;
    let n = p.n.ok_or(crate::Error::MissingParameter("n"))?;
    let nf = n as f64;
    let times: Vec<f64> = (1..=n * n).map(|i| i as f64 / nf).collect();
    let anchors = space.flow_path(&p.flow_anchor, &times)?;
    let kh = space.kappa_hat();
    let scales = times.iter().map(|t| (kh * t).exp()).collect();
    let phi = Phi::soft_min(p.b, p.c, m as f64, eps, exp_log_weights(m as f64 + 1.0, n), scales)?;
    CylindricalTestFunction::new(phi, anchors, Some(Leading { a: p.a, center: p.center.clone() }))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Sample `samples` random instances of `link` and report the signed
/// violations (for the overlap link the absolute mismatch).
pub fn chain_inequality_report<R: Rng + ?Sized>(
    space: &ModelSpace,
    link: ChainLink,
    samples: usize,
    rng: &mut R,
) -> Result<ChainReport> {
    let mut out = Vec::with_capacity(samples);
    for instance in 0..samples {
        let value = match link {
            ChainLink::OneToTwo => one_to_two(space, rng)?,
            ChainLink::FourToFive => four_to_five(space, rng)?,
            ChainLink::ZeroToOneOverlap => overlap(space, rng)?,
        };
        out.push(ChainSample { instance, value });
    }
    let max_violation = out.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(ChainReport { link, max_violation, samples: out })
}

fn one_to_two<R: Rng + ?Sized>(space: &ModelSpace, rng: &mut R) -> Result<f64> {
    let p = ChainParams {
        a: uniform(rng, 0.1, 2.0),
        b: uniform(rng, 0.1, 2.0),
        c: uniform(rng, -1.0, 1.0),
        eps: Some(10f64.powf(uniform(rng, -3.0, -0.3))),
        m: Some(rng.gen_range(1..=40)),
        n: Some(rng.gen_range(1..=6)),
        center: space.sample_point(rng),
        flow_anchor: space.sample_point(rng),
    };
    let pi = space.sample_point(rng);
    let g1 = build_cyl_from(space, Side::Dagger, soft_min_cylinder(space, &p)?)?.g(&pi)?;
    let g2 = build_chain_pair(space, 2, Side::Dagger, p)?.g(&pi)?;
    Ok(g1 - g2)
}

fn four_to_five<R: Rng + ?Sized>(space: &ModelSpace, rng: &mut R) -> Result<f64> {
    let eps = 10f64.powf(uniform(rng, -3.0, -0.3));
    let (pi, mu) = (space.sample_point(rng), space.sample_point(rng));
    let mut worst = f64::NEG_INFINITY;
    for t in tataru_eps(space, eps, &pi, &mu)?.minimizers {
        worst = worst.max(flow_bound_term(space, eps, &pi, &mu, t)? - 1.0);
    }
    Ok(worst)
}

fn overlap<R: Rng + ?Sized>(space: &ModelSpace, rng: &mut R) -> Result<f64> {
    // Redraw until the evaluation point lies below the cut-off.
    loop {
        let k = rng.gen_range(1..=3);
        let weights: Vec<f64> = (0..k).map(|_| uniform(rng, 0.05, 1.0)).collect();
        let anchors: Vec<SpacePoint> = (0..k).map(|_| space.sample_point(rng)).collect();
        let base = CylindricalTestFunction::new(
            Phi::affine(weights, uniform(rng, -1.0, 1.0))?,
            anchors,
            Some(Leading { a: uniform(rng, 0.1, 1.0), center: space.sample_point(rng) }),
        )?;
        let n = rng.gen_range(5..=40);
        let pi = space.sample_point(rng);
        if base.value(space, &pi)? > n as f64 {
            continue;
        }
        let bounded = truncate_cylinder(&base, n)?;
        let g0 = build_h0_pair(space, Side::Dagger, bounded.phi, bounded.anchors)?.g(&pi)?;
        let g1 = build_cyl_from(space, Side::Dagger, base)?.g(&pi)?;
        return Ok((g0 - g1).abs());
    }
}
