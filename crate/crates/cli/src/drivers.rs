//! One driver per subcommand. Each draws from its own ChaCha stream of the
//! configured seed, so a suite produces the same rows alone or inside `all`.

use std::f64::consts::LN_2;
use std::fs;
use std::path::Path;

use hjcheck_core::evi::{run_suite as run_evi, EviSuite};
use hjcheck_core::hamiltonians::{
    build_chain_pair, build_cyl_dagger, build_cyl_ddagger, chain_inequality_report, ChainLink, ChainParams,
    HamiltonianPair, Phi, Side,
};
use hjcheck_core::laplace::{
    exp_measure_constant, lambda_continuous, lambda_continuous_profile, lambda_discrete, lambda_discrete_profile,
    tilted_measure, varadhan_error_curve, ConstantProfile,
};
use hjcheck_core::tataru::{psi_eps, psi_eps_prime, tataru, tataru_eps};
use hjcheck_core::viscosity::{
    check_subsolution, check_supersolution, comparison_gap, Grid1D, GridFunction, ResolventSolver,
};
use hjcheck_core::{ModelSpace, Potential, SpacePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{format_number, Report, Row};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{suite}: {source}")]
    Numeric {
        suite: &'static str,
        #[source]
        source: hjcheck_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Evi,
    Tataru,
    Laplace,
    Chain,
    Resolvent,
    Comparison,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Evi, Suite::Tataru, Suite::Laplace, Suite::Chain, Suite::Resolvent, Suite::Comparison];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Evi => "evi-check",
            Suite::Tataru => "tataru",
            Suite::Laplace => "laplace-converge",
            Suite::Chain => "ham-chain",
            Suite::Resolvent => "resolvent",
            Suite::Comparison => "comparison",
            Suite::All => "all",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Suite::Evi => 1,
            Suite::Tataru => 2,
            Suite::Laplace => 3,
            Suite::Chain => 4,
            Suite::Resolvent => 5,
            Suite::Comparison => 6,
            Suite::All => 0,
        }
    }
}

/// A finished run: the report plus the value function when one was solved.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub solution: Option<GridFunction>,
}

pub fn run_experiment(config: &ExperimentConfig, suite: Suite) -> Result<Outcome, RunError> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut solution = None;
    let suites: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    for s in suites {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(s.stream());
        let numeric = |source| RunError::Numeric { suite: s.name(), source };
        match s {
            Suite::Evi => rows.extend(evi_rows(config, &mut rng).map_err(numeric)?),
            Suite::Tataru => rows.extend(tataru_rows(config, &mut rng).map_err(numeric)?),
            Suite::Laplace => rows.extend(laplace_rows(config).map_err(numeric)?),
            Suite::Chain => rows.extend(chain_rows(config, &mut rng).map_err(numeric)?),
            Suite::Resolvent => {
                let (r, u) = resolvent_rows(config).map_err(numeric)?;
                rows.extend(r);
                solution = Some(u);
            }
            Suite::Comparison => rows.extend(comparison_rows(config, &mut rng).map_err(numeric)?),
            Suite::All => unreachable!("expanded above"),
        }
    }
    Ok(Outcome { report: Report::new(suite.name(), config, rows), solution })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes `<suite>.csv` or `<suite>.json` into `dir`, plus
/// `resolvent_solution.csv` when a value function was solved.
pub fn write_outputs(outcome: &Outcome, dir: &Path, format: Format) -> Result<(), RunError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let (ext, body) = match format {
        Format::Csv => ("csv", outcome.report.to_csv()),
        Format::Json => ("json", outcome.report.to_json()),
    };
    let path = dir.join(format!("{}.{ext}", outcome.report.suite));
    fs::write(&path, body).map_err(io(&path))?;
    if let Some(u) = &outcome.solution {
        let mut text = String::from("x,u\n");
        for (i, v) in u.values().iter().enumerate() {
            text.push_str(&format!("{},{}\n", format_number(u.grid().x(i)), format_number(*v)));
        }
        let path = dir.join("resolvent_solution.csv");
        fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}

type Res<T> = hjcheck_core::Result<T>;

fn ou() -> ModelSpace {
    ModelSpace::euclidean(1, Potential::Quadratic { kappa: 1.0 }).expect("valid space")
}

fn x(v: f64) -> SpacePoint {
    SpacePoint::scalar(v)
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn evi_rows(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Res<Vec<Row>> {
    let e = &config.evi;
    let suite = EviSuite {
        instances: e.instances,
        delta: e.delta,
        time_samples: e.time_samples,
        trajectory_samples: e.trajectory_samples,
    };
    let mut rows = Vec::new();
    for sc in &config.spaces {
        let space = sc.build()?;
        let report = run_evi(&space, &suite, rng)?;
        for (name, value) in &report.table {
            let exact = sc.is_quadratic() && (name == "contraction" || name == "slope_decay");
            let bound = if exact { e.exact_tolerance } else { e.tolerance };
            rows.push(Row::at_most(format!("evi.{name}"), sc.label(), *value, bound));
        }
    }
    Ok(rows)
}

fn psi_rows(config: &ExperimentConfig) -> Res<Vec<Row>> {
    let p = &config.psi;
    let tagged = [(0.5, 0.5, 1.0), (0.5, 0.0, 0.375), (0.5, 2.0, 2.0)];
    let mut err: f64 = 0.0;
    for (eps, r, expected) in tagged {
        err = err.max((psi_eps(eps, r)? - expected).abs());
    }
    let mut rows = vec![Row::at_most("psi.tagged_values", "eps=0.5", err, 0.0)];
    for &eps in &p.epsilon {
        let n = p.grid_points;
        let grid: Vec<f64> = (0..n).map(|k| p.r_max * k as f64 / (n - 1) as f64).collect();
        let mut gap = f64::NEG_INFINITY;
        let mut min_slope = f64::INFINITY;
        let mut max_step = f64::NEG_INFINITY;
        let mut prev: Option<f64> = None;
        for &r in &grid {
            gap = gap.max(psi_eps(eps, r)? - (2.0 * r).sqrt());
            let d = psi_eps_prime(eps, r)?;
            min_slope = min_slope.min(d);
            if let Some(q) = prev {
                max_step = max_step.max(d - q);
            }
            prev = Some(d);
        }
        let inst = format!("eps={eps:e}");
        rows.push(Row::at_most("psi.sup_gap", inst.clone(), gap, (2.0 * eps).sqrt()));
        rows.push(Row::below("psi.derivative_positive", inst.clone(), -min_slope, 0.0));
        rows.push(Row::below("psi.derivative_decreasing", inst, max_step, 0.0));
    }
    Ok(rows)
}

fn tataru_rows(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Res<Vec<Row>> {
    let t = &config.tataru;
    let mut rows = psi_rows(config)?;
    let s = ou();
    let v1 = tataru(&s, &x(0.0), &x(1.0), None)?.value;
    let v3 = tataru(&s, &x(0.0), &x(3.0), None)?.value;
    rows.push(Row::at_most("tataru.ou_value", "pi=0;mu=1", (v1 - 1.0).abs(), t.tolerance));
    rows.push(Row::at_most("tataru.ou_value", "pi=0;mu=3", (v3 - 1.0 - 3f64.ln()).abs(), t.tolerance));

    for sc in &config.spaces {
        let space = sc.build()?;
        let dt = |a: &SpacePoint, b: &SpacePoint| -> Res<f64> { Ok(tataru(&space, a, b, None)?.value) };
        let (mut lip, mut flow, mut tri, mut mono) =
            (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..t.instances {
            let p: Vec<SpacePoint> = (0..4).map(|_| space.sample_point(rng)).collect();
            lip = lip.max(
                dt(&p[0], &p[1])? - dt(&p[2], &p[3])? - space.distance(&p[0], &p[2])? - space.distance(&p[1], &p[3])?,
            );
            let r = rng.gen_range(0.01..2.0);
            let moved = space.flow(&p[0], r)?;
            flow = flow.max((dt(&moved, &p[1])? - dt(&p[0], &p[1])?) / r - 1.0);
            tri = tri.max(dt(&p[0], &p[2])? - dt(&p[0], &p[1])? - dt(&p[1], &p[2])?);
            let (k1, k2): (f64, f64) = (rng.gen_range(-2.0..1.0), rng.gen_range(-2.0..1.0));
            let lo = tataru(&space, &p[2], &p[3], Some(k1.min(k2)))?.value;
            let hi = tataru(&space, &p[2], &p[3], Some(k1.max(k2)))?.value;
            mono = mono.max(lo - hi);
        }
        rows.push(Row::at_most("tataru.lipschitz", sc.label(), lip, t.tolerance));
        rows.push(Row::at_most("tataru.flow_lipschitz", sc.label(), flow, t.tolerance));
        rows.push(Row::at_most("tataru.triangle", sc.label(), tri, t.tolerance));
        rows.push(Row::at_most("tataru.kappa_monotone", sc.label(), mono, t.tolerance));

        for &eps in &t.epsilon {
            let mut gap: f64 = 0.0;
            for _ in 0..t.smoothed_pairs {
                let (a, b) = (space.sample_point(rng), space.sample_point(rng));
                gap = gap.max((tataru_eps(&space, eps, &a, &b)?.value - dt(&a, &b)?).abs());
            }
            let inst = format!("{};eps={eps:e}", sc.label());
            rows.push(Row::at_most("tataru.smoothed_gap", inst, gap, (2.0 * eps).sqrt()));
        }
    }
    Ok(rows)
}

fn laplace_rows(config: &ExperimentConfig) -> Res<Vec<Row>> {
    let l = &config.laplace;
    let s = ou();
    let (pi, mu) = (x(l.pi), x(l.mu));
    let mut rows = Vec::new();

    for &c in &l.constants {
        let mut err: f64 = 0.0;
        for &m in &l.m {
            err = err.max((lambda_continuous_profile(&ConstantProfile(c), m)?.value.neg_log - c).abs());
            err = err.max((lambda_discrete_profile(&ConstantProfile(c), m, 10)?.neg_log - c).abs());
        }
        rows.push(Row::at_most("laplace.constant", format!("c={c}"), err, l.constant_tolerance));
    }
    // Normalization of the discrete exponential law at the smallest order.
    let m0 = l.m[0];
    let c = exp_measure_constant(m0, 10)?;
    let direct: f64 = (1..=100u64).map(|i| (-(m0 as f64) * i as f64 / 10.0).exp()).sum();
    rows.push(Row::at_most("laplace.normalization", format!("m={m0};n=10"), (c * direct - 1.0).abs(), 1e-12));

    let curve = varadhan_error_curve(&s, l.epsilon, &pi, &mu, &l.m)?;
    let (m_first, e_first) = curve[0];
    let (m_last, e_last) = curve[curve.len() - 1];
    rows.push(Row::at_most("laplace.varadhan", format!("m={m_last}"), e_last, l.varadhan_tolerance));
    rows.push(Row::below("laplace.varadhan_decrease", format!("m={m_first}->{m_last}"), e_last, e_first));

    let cont = lambda_continuous(&s, l.epsilon, l.riemann_m, &pi, &mu)?.value.log_lambda;
    let mut prev: Option<(u64, f64)> = None;
    for &n in &l.riemann_n {
        let gap = (lambda_discrete(&s, l.epsilon, l.riemann_m, n, &pi, &mu)?.log_lambda - cont).abs();
        if let Some((n0, g0)) = prev {
            rows.push(Row::below("laplace.riemann", format!("m={};n={n0}->{n}", l.riemann_m), gap, g0));
        }
        prev = Some((n, gap));
    }

    let center = tataru_eps(&s, l.tilt_epsilon, &pi, &mu)?.minimizers[0];
    let nu = tilted_measure(&s, l.tilt_epsilon, l.tilt_m, &pi, &mu)?;
    let mass = nu.mass_within(center, l.tilt_radius);
    let inst = format!("m={};eps={:e};t={center:.6}", l.tilt_m, l.tilt_epsilon);
    rows.push(Row::at_least("laplace.tilt_mass", inst, mass, l.tilt_mass));
    Ok(rows)
}

fn chain_rows(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Res<Vec<Row>> {
    let c = &config.chain;
    let mut rows = Vec::new();
    for sc in &config.spaces {
        let space = sc.build()?;
        for name in &c.links {
            let link = ChainLink::parse(name).expect("validated link");
            let report = chain_inequality_report(&space, link, c.samples, rng)?;
            let bound = match link {
                ChainLink::OneToTwo => c.tolerance_one_two,
                ChainLink::FourToFive => c.tolerance_four_five,
                ChainLink::ZeroToOneOverlap => c.tolerance_overlap,
            };
            rows.push(Row::at_most(format!("chain.{}", link.name()), sc.label(), report.max_violation, bound));
        }

        let mut mismatches = 0usize;
        let mut gap: f64 = 0.0;
        for _ in 0..c.level_samples {
            let p = ChainParams {
                a: rng.gen_range(0.1..2.0),
                b: 1.0,
                c: rng.gen_range(-1.0..1.0),
                eps: Some(c.epsilon),
                m: None,
                n: None,
                center: space.sample_point(rng),
                flow_anchor: space.sample_point(rng),
            };
            let pi = space.sample_point(rng);
            for side in [Side::Dagger, Side::Ddagger] {
                let five = build_chain_pair(&space, 5, side, p.clone())?;
                let six = build_chain_pair(&space, 6, side, p.clone())?;
                if five.g(&pi)?.to_bits() != six.g(&pi)?.to_bits() {
                    mismatches += 1;
                }
                gap = gap.max((five.f(&pi)? - six.f(&pi)?).abs());
            }
        }
        rows.push(Row::at_most("chain.g5_g6_identity", sc.label(), mismatches as f64, 0.0));
        let inst = format!("{};eps={:e}", sc.label(), c.epsilon);
        rows.push(Row::at_most("chain.f5_f6_gap", inst, gap, (2.0 * c.epsilon).sqrt()));
    }
    Ok(rows)
}

struct ResolventSetup {
    space: ModelSpace,
    grid: Grid1D,
    solver: ResolventSolver,
    /// The clipped linear reward `h(x) = x`.
    h: GridFunction,
}

fn resolvent_setup(config: &ExperimentConfig) -> Res<ResolventSetup> {
    let r = &config.resolvent;
    let space = ModelSpace::euclidean(1, r.potential.to_potential())?;
    let grid = Grid1D::new(r.half_width, r.dx)?;
    let solver = ResolventSolver {
        lambda: r.lambda,
        control_bound: r.control_bound,
        controls: r.controls,
        dt: r.dt_fraction * r.lambda,
        tolerance: r.tolerance,
        ..ResolventSolver::new(r.lambda)
    };
    let hw = r.half_width;
    let h = GridFunction::from_fn(grid, |v| v.clamp(-hw, hw))?;
    Ok(ResolventSetup { space, grid, solver, h })
}

fn resolvent_rows(config: &ExperimentConfig) -> Res<(Vec<Row>, GridFunction)> {
    let r = &config.resolvent;
    let setup = resolvent_setup(config)?;
    let ResolventSetup { space, grid, solver, h } = &setup;
    let mut rows = Vec::new();

    let solved = solver.solve(space, h)?;
    rows.push(Row::at_most("resolvent.converged", "h=x", solved.increment, r.tolerance));
    let u = solved.u;
    if let Potential::Quadratic { kappa } = space.potential() {
        // u = A x + B with A (1 + lambda kappa) = 1 and B = lambda A^2 / 2.
        let a = 1.0 / (1.0 + r.lambda * kappa);
        let b = 0.5 * r.lambda * a * a;
        let inside: Vec<f64> = grid.points().filter(|v| v.abs() <= r.oracle_half_width).collect();
        let err = max_of(inside.iter().map(|&v| (u.eval(v) - (a * v + b)).abs()));
        let scale = max_of(inside.iter().map(|&v| (a * v + b).abs()));
        let inst = format!("|x|<={}", r.oracle_half_width);
        rows.push(Row::at_most("resolvent.lq_oracle", inst, err / scale, r.oracle_tolerance));
    }

    let hc = GridFunction::constant(*grid, r.constant)?;
    let uc = solver.solve(space, &hc)?.u;
    let err = max_of(uc.values().iter().map(|v| (v - r.constant).abs()));
    rows.push(Row::at_most("resolvent.constant", format!("c={}", r.constant), err, r.equivariance_tolerance));

    let us = solver.solve(space, &h.shifted(-r.shift))?.u;
    let err = us.sup_distance(&u.shifted(-r.shift))?;
    rows.push(Row::at_most(
        "resolvent.shift_equivariance",
        format!("shift={}", r.shift),
        err,
        r.equivariance_tolerance,
    ));
    Ok((rows, u))
}

fn random_cylinder<R: Rng + ?Sized>(config: &ExperimentConfig, side: Side, rng: &mut R) -> Res<HamiltonianPair> {
    let v = &config.viscosity;
    let s = ModelSpace::euclidean(1, config.resolvent.potential.to_potential())?;
    let k = rng.gen_range(1..=v.max_anchors);
    let anchors: Vec<SpacePoint> = (0..k).map(|_| x(rng.gen_range(-v.anchor_range..=v.anchor_range))).collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(v.weight_range[0]..=v.weight_range[1])).collect();
    let phi = Phi::affine(weights, rng.gen_range(-1.0..=1.0))?;
    let a = rng.gen_range(v.a_range[0]..=v.a_range[1]);
    let center = x(rng.gen_range(-v.anchor_range..=v.anchor_range));
    match side {
        Side::Dagger => build_cyl_dagger(&s, a, phi, center, anchors),
        Side::Ddagger => build_cyl_ddagger(&s, a, phi, center, anchors),
    }
}

/// Bounded smooth reward `sum_k a_k sin(w_k x + p_k)`.
fn random_reward<R: Rng + ?Sized>(rng: &mut R) -> impl Fn(f64) -> f64 {
    let terms: Vec<(f64, f64, f64)> =
        (0..3).map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(0.5..3.0), rng.gen_range(0.0..8.0 * LN_2))).collect();
    move |v| terms.iter().map(|(a, w, p)| a * (w * v + p).sin()).sum()
}

fn comparison_rows(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Res<Vec<Row>> {
    let r = &config.resolvent;
    let v = &config.viscosity;
    let setup = resolvent_setup(config)?;
    let ResolventSetup { space, grid, solver, h } = &setup;
    let tol = v.tolerance_cells * r.dx;
    let u = solver.solve(space, h)?.u;
    let mut rows = Vec::new();

    for i in 0..v.pairs {
        let pair = random_cylinder(config, Side::Dagger, rng)?;
        let rep = check_subsolution(&u, &pair, h, r.lambda, tol)?;
        rows.push(Row::at_most("viscosity.subsolution", format!("pair={i}"), rep.violation, tol));
    }
    for i in 0..v.pairs {
        let pair = random_cylinder(config, Side::Ddagger, rng)?;
        let rep = check_supersolution(&u, &pair, h, r.lambda, tol)?;
        rows.push(Row::at_most("viscosity.supersolution", format!("pair={i}"), rep.violation, tol));
    }

    // Constant candidates against a pair whose anchors sit on one grid point,
    // where g vanishes; both must be rejected outright.
    let zero = GridFunction::constant(*grid, 0.0)?;
    let p0 = x(grid.x(grid.len() / 2 + 100));
    let phi = Phi::affine(vec![0.1], 0.0)?;
    let sub = build_cyl_dagger(space, 0.1, phi.clone(), p0.clone(), vec![p0.clone()])?;
    let rep = check_subsolution(&GridFunction::constant(*grid, 1.0)?, &sub, &zero, r.lambda, tol)?;
    rows.push(Row::at_least("viscosity.designed_sub_failure", "u=1;h=0", rep.violation, 2.0 * tol));
    let sup = build_cyl_ddagger(space, 0.1, phi, p0.clone(), vec![p0])?;
    let rep = check_supersolution(&GridFunction::constant(*grid, -1.0)?, &sup, &zero, r.lambda, tol)?;
    rows.push(Row::at_least("viscosity.designed_super_failure", "v=-1;h=0", rep.violation, 2.0 * tol));

    let same = comparison_gap(&u, &u, h, h, solver.tolerance)?;
    rows.push(Row::at_most("comparison.identical", "h=x", same.lhs - same.rhs, same.slack));
    let shift = config.comparison.shift;
    let hs = h.shifted(-shift);
    let vs = solver.solve(space, &hs)?.u;
    let gap = comparison_gap(&u, &vs, h, &hs, solver.tolerance)?;
    rows.push(Row::at_most("comparison.shift", format!("delta={shift}"), (gap.lhs - gap.rhs).abs(), gap.slack));

    for i in 0..config.comparison.pairs {
        let upper = random_reward(rng);
        let (c0, c1, w, p) =
            (rng.gen_range(0.0..0.3), rng.gen_range(0.0..0.3), rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.0));
        let h_dag = GridFunction::from_fn(*grid, &upper)?;
        let h_ddag = GridFunction::from_fn(*grid, |t| upper(t) - c0 - c1 * (1.0 + (w * t + p).sin()))?;
        let ud = solver.solve(space, &h_dag)?.u;
        let vd = solver.solve(space, &h_ddag)?.u;
        let gap = comparison_gap(&ud, &vd, &h_dag, &h_ddag, solver.tolerance)?;
        rows.push(Row::at_most("comparison.random", format!("pair={i}"), gap.lhs - gap.rhs, gap.slack));
    }
    Ok(rows)
}
