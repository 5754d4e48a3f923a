use std::io::Write;
use std::path::Path;

use nilmobius::arith::{cf_expand, classify, AlphaSpec, ContinuedFraction, DenominatorClassification, MobiusTable, SieveMethod};
use nilmobius::complexity::{
    build_fk, distance_trace, empirical_sample, estimate_sn, flow_lipschitz, shadowing_horizon, verify_shadowing,
    CoveringReport, ShadowingReport,
};
use nilmobius::correlate::{control_stats, mobius_correlation, mu_exponential_sum, Weights};
use nilmobius::flows::{ConjugacySetup, Flow};
use nilmobius::fourier::{self, cobound_with_tail, FourierSeries, FunctionSpec, Resonance, TailProfile, DEFAULT_TRUNCATION};
use nilmobius::heisenberg::{ProductPoint, DEFAULT_WINDOW};
use nilmobius::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{config_hash, merge, CliError, CliResult};
use crate::output::{open, sci, Csv};
use crate::{
    ComplexityArgs, ConvergentsArgs, CorrelateArgs, DecomposeArgs, DistalityArgs, ExpsumArgs, FlowArgs, GridArgs,
    Kind, Method, OrbitArgs, ShadowArgs, SieveArgs, WeightsArg,
};

const DEFAULT_B: f64 = 3.0;
const DEFAULT_K_MAX: u64 = 64;
const DEFAULT_Q_CAP: u64 = 1_000_000_000_000_000_000;
const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

fn need<T>(v: Option<T>, name: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Validation(format!("missing parameter {name}")))
}

fn series(spec: &Option<FunctionSpec>) -> CliResult<FourierSeries> {
    Ok(match spec {
        Some(s) => s.to_series()?,
        None => FourierSeries::zero(),
    })
}

fn expand(alpha: &str, k_max: u64, q_cap: u64) -> CliResult<ContinuedFraction> {
    let spec: AlphaSpec = alpha.parse()?;
    let k_max = k_max as usize;
    match cf_expand(&spec, k_max, q_cap as u128) {
        Err(Error::PrecisionExhausted { certified }) if certified > 0 && matches!(spec, AlphaSpec::Decimal(..)) => {
            Ok(cf_expand(&spec, certified, q_cap as u128)?)
        }
        r => Ok(r?),
    }
}

fn point(coords: &Option<Vec<f64>>, rng: &mut ChaCha8Rng, name: &str) -> CliResult<ProductPoint> {
    match coords {
        Some(v) if v.len() == 4 && v.iter().all(|c| c.is_finite()) => Ok(ProductPoint::from_coords(v[0], v[1], v[2], v[3])),
        Some(_) => Err(CliError::Validation(format!("{name} needs four finite coordinates t,x,y,z"))),
        None => Ok(ProductPoint::from_coords(rng.gen(), rng.gen(), rng.gen(), rng.gen())),
    }
}

struct Built {
    flow: Flow,
    cf: ContinuedFraction,
    cls: DenominatorClassification,
    cobound_tail: f64,
}

fn build_flow(f: &FlowArgs, default_kind: Kind) -> CliResult<Built> {
    let alpha = need(f.alpha.as_deref(), "alpha")?;
    let cf = expand(alpha, f.k_max.unwrap_or(DEFAULT_K_MAX), f.q_cap.unwrap_or(DEFAULT_Q_CAP))?;
    let cls = classify(&cf, f.b.unwrap_or(DEFAULT_B))?;
    let phi = series(&f.phi)?;
    let psi = series(&f.psi)?;
    let (flow, cobound_tail) = match f.kind.unwrap_or(default_kind) {
        Kind::T => (Flow::skew(cf.alpha(), phi, psi)?, 0.0),
        Kind::S => (Flow::general(cf.alpha(), phi, series(&f.phi2)?, psi)?, 0.0),
        Kind::T1 => {
            let cutoff = f.truncation.map_or(DEFAULT_TRUNCATION, |t| t as i64);
            let setup = ConjugacySetup::new(&cf, &cls, &phi, &psi, cutoff, Resonance::Classified)?;
            (setup.t1, setup.tail_bound)
        }
    };
    Ok(Built { flow, cf, cls, cobound_tail })
}

fn mobius_table(cache: &Option<std::path::PathBuf>, n: u64) -> CliResult<MobiusTable> {
    let table = match cache {
        Some(path) => MobiusTable::load(path)?,
        None => MobiusTable::new(n.max(1))?,
    };
    table.require(n)?;
    Ok(table)
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Resource(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn sieve(args: SieveArgs) -> CliResult<()> {
    let (a, _) = merge(&args, args.common.config.as_deref())?;
    let n = need(a.n, "n")?;
    let out = need(a.common.out.as_deref(), "out")?;
    let method = if a.segmented.unwrap_or(false) { SieveMethod::segmented() } else { SieveMethod::Linear };
    let table = MobiusTable::with_method(n, method)?;
    table.save(out)?;
    Ok(())
}

pub fn convergents(args: ConvergentsArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let alpha = need(a.alpha.as_deref(), "alpha")?;
    let cf = expand(alpha, a.k.unwrap_or(20), a.q_cap.unwrap_or(DEFAULT_Q_CAP))?;
    let cls = a.b.map(|b| classify(&cf, b)).transpose()?;
    let mut header = vec!["k", "a_k", "l_k", "q_k"];
    if cls.is_some() {
        header.push("class");
    }
    let meta = [("config_hash", config_hash(&canonical)), ("terminated", cf.is_terminated().to_string())];
    let mut csv = Csv::new(a.common.out.as_deref(), &meta, &header)?;
    for (k, c) in cf.convergents().iter().enumerate() {
        let a_k = if k == 0 { 0 } else { cf.partial_quotients()[k - 1] };
        let mut row = vec![k.to_string(), a_k.to_string(), c.l.to_string(), c.q.to_string()];
        if let Some(cls) = &cls {
            let class = if k == 0 {
                "flat"
            } else if cls.is_sharp(k) {
                "sharp"
            } else if cls.unresolved == Some(k) {
                "unresolved"
            } else {
                "flat"
            };
            row.push(class.into());
        }
        csv.row(&row)?;
    }
    Ok(csv.finish()?)
}

pub fn decompose(args: DecomposeArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let f = &a.flow;
    let alpha = need(f.alpha.as_deref(), "alpha")?;
    let cf = expand(alpha, f.k_max.unwrap_or(DEFAULT_K_MAX), f.q_cap.unwrap_or(DEFAULT_Q_CAP))?;
    let b = f.b.unwrap_or(DEFAULT_B);
    let cls = classify(&cf, b)?;
    let phi = need(f.phi.as_ref(), "phi")?.to_series()?;
    let (resonant, rest) = fourier::decompose(&phi, &cls, &cf)?;
    let cutoff = f.truncation.map_or(DEFAULT_TRUNCATION, |t| t as i64);
    let cb = cobound_with_tail(&rest, &cf, &cls, &TailProfile::fit(&rest, b, cutoff), Resonance::Classified)?;
    let meta = [
        ("config_hash", config_hash(&canonical)),
        ("cobound_tail", sci(cb.tail_bound)),
        ("sharp_q", format!("{:?}", cls.q_sharp(&cf)).replace(' ', "")),
    ];
    let mut csv = Csv::new(a.common.out.as_deref(), &meta, &["m", "re", "im", "part", "g_re", "g_im"])?;
    for (m, c) in phi.iter() {
        let part = if resonant.coeff(m) != num_complex::Complex64::new(0.0, 0.0) || m == 0 { "resonant" } else { "nonresonant" };
        let g = cb.g.coeff(m);
        csv.row(&[m.to_string(), sci(c.re), sci(c.im), part.into(), sci(g.re), sci(g.im)])?;
    }
    Ok(csv.finish()?)
}

pub fn correlate(args: CorrelateArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let built = build_flow(&a.flow, Kind::T)?;
    let obs = match &a.obs {
        Some(spec) => spec.build()?,
        None => nilmobius::observables::ObservableSpec::Preset("fA".into()).build()?,
    };
    let n = need(a.n, "n")?;
    let checkpoints = a.checkpoints.clone().unwrap_or_else(|| vec![n]);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
    let start = point(&a.start, &mut rng, "start")?;
    let weights = match a.weights.unwrap_or(WeightsArg::Mobius) {
        WeightsArg::Mobius => Weights::Mobius,
        WeightsArg::Ones => Weights::Ones,
    };
    let table = match weights {
        Weights::Mobius => mobius_table(&a.sieve_cache, n)?,
        Weights::Ones => MobiusTable::new(1)?,
    };
    let points = mobius_correlation(&built.flow, |p| obs.eval(p), &start, n, &checkpoints, &table, weights)?;
    let mut meta = vec![
        ("config_hash", config_hash(&canonical)),
        ("observable_tail", sci(obs.tail_bound())),
        ("cobound_tail", sci(built.cobound_tail)),
    ];
    if weights == Weights::Mobius {
        let control = control_stats(&table, n)?;
        meta.push(("mertens_ratio", sci(control.mertens_ratio)));
        meta.push(("squarefree_density", sci(control.squarefree_density)));
    }
    let mut csv = Csv::new(a.common.out.as_deref(), &meta, &["n", "re_avg", "im_avg", "abs_avg"])?;
    for p in points {
        let v = p.value();
        csv.row(&[p.n.to_string(), sci(v.re), sci(v.im), sci(v.norm())])?;
    }
    Ok(csv.finish()?)
}

pub fn expsum(args: ExpsumArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let poly = need(a.poly.clone(), "poly")?;
    if poly.iter().any(|c| !c.is_finite()) {
        return Err(CliError::Validation("poly coefficients must be finite".into()));
    }
    let n = need(a.n, "n")?;
    let (q, r) = (a.q.unwrap_or(1), a.a.unwrap_or(0));
    let checkpoints = a.checkpoints.clone().unwrap_or_else(|| vec![n]);
    if let Some(&c) = checkpoints.iter().find(|&&c| c == 0 || c > n) {
        return Err(CliError::Validation(format!("checkpoint {c} is outside [1, {n}]")));
    }
    let table = mobius_table(&a.sieve_cache, n)?;
    let meta = [("config_hash", config_hash(&canonical))];
    let mut csv = Csv::new(a.common.out.as_deref(), &meta, &["n", "re", "im", "abs_over_n"])?;
    for c in checkpoints {
        let s = mu_exponential_sum(&poly, r, q, c, &table)?;
        csv.row(&[c.to_string(), sci(s.re), sci(s.im), sci(s.norm() / c as f64)])?;
    }
    Ok(csv.finish()?)
}

/// The sharp index, grid parameters and horizon shared by `complexity` and `shadow`.
struct GridSetup {
    k: usize,
    eps_inv: u64,
    l: u64,
    n_k: u128,
    budget: u128,
    rng: ChaCha8Rng,
}

fn grid_setup(built: &Built, g: &GridArgs) -> CliResult<GridSetup> {
    let k = match g.k {
        Some(k) => k as usize,
        None => built
            .cls
            .first_sharp()
            .ok_or_else(|| CliError::Validation("the expansion has no sharp denominator".into()))?,
    };
    let eps_inv = g.eps_inv.unwrap_or(100);
    if eps_inv == 0 {
        return Err(CliError::Validation("eps_inv must be positive".into()));
    }
    let l = match g.l {
        Some(l) => l,
        None => flow_lipschitz(&built.flow, eps_inv as f64).ceil() as u64,
    };
    let grid = build_fk(&built.cf, k, eps_inv, l)?;
    let n_k = shadowing_horizon(grid.q, built.cls.b)?;
    Ok(GridSetup {
        k,
        eps_inv,
        l,
        n_k,
        budget: g.budget.unwrap_or(DEFAULT_STEP_BUDGET) as u128,
        rng: ChaCha8Rng::seed_from_u64(g.seed.unwrap_or(0)),
    })
}

fn run_shadowing(built: &Built, gs: &mut GridSetup, trials: u64) -> CliResult<(Vec<ProductPoint>, ShadowingReport)> {
    let points: Vec<ProductPoint> = (0..trials)
        .map(|_| ProductPoint::from_coords(gs.rng.gen(), gs.rng.gen(), gs.rng.gen(), gs.rng.gen()))
        .collect();
    let report = verify_shadowing(
        &built.flow,
        &built.cf,
        &built.cls,
        gs.k,
        gs.eps_inv,
        gs.l,
        &points,
        DEFAULT_WINDOW,
        gs.budget,
    )?;
    Ok((points, report))
}

fn write_trials(path: Option<&Path>, hash: String, points: &[ProductPoint], report: &ShadowingReport) -> CliResult<()> {
    let meta = [
        ("config_hash", hash),
        ("q_k", report.q.to_string()),
        ("n_k", report.n_k.to_string()),
        ("L", report.l.to_string()),
        ("grid_cardinality", report.grid_cardinality.to_string()),
        ("max_pointwise", sci(report.max_pointwise)),
        ("success", report.success.to_string()),
    ];
    let header = ["trial", "t", "x", "y", "z", "initial", "max_pointwise", "dbar"];
    let mut csv = Csv::new(path, &meta, &header)?;
    for (i, (p, r)) in points.iter().zip(&report.trials).enumerate() {
        let rep = p.p.rep();
        csv.row(&[
            i.to_string(),
            sci(p.t),
            sci(rep.x),
            sci(rep.y),
            sci(rep.z),
            sci(r.initial),
            sci(r.max_pointwise),
            sci(r.dbar),
        ])?;
    }
    Ok(csv.finish()?)
}

#[derive(Serialize)]
struct ComplexityOutput {
    config_hash: String,
    q_k: u128,
    n_k: u128,
    epsilon: f64,
    l: u64,
    /// `ε⁻¹ L⁴ q_k⁷`.
    bound: u128,
    within_bound: bool,
    cobound_tail: f64,
    covering: CoveringReport,
}

pub fn complexity(args: ComplexityArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let hash = config_hash(&canonical);
    let built = build_flow(&a.flow, Kind::T1)?;
    let mut gs = grid_setup(&built, &a.grid)?;
    let grid = build_fk(&built.cf, gs.k, gs.eps_inv, gs.l)?;
    let bound = grid.cardinality()?;
    let n = match a.n {
        Some(n) => n,
        None => u64::try_from(gs.n_k).map_err(|_| CliError::Resource("n_k does not fit in 64 bits".into()))?,
    };
    let size = a.sample.unwrap_or(500).max(1);
    let (burn_in, stride) = (a.burn_in.unwrap_or(100), a.stride.unwrap_or(7));
    let need_steps = (size as u128) * (size as u128 + 1) * (n as u128) + (burn_in as u128) + (size as u128) * (stride as u128);
    if need_steps > gs.budget {
        return Err(Error::Budget { what: "covering steps", need: need_steps, budget: gs.budget }.into());
    }
    let epsilon = 1.0 / gs.eps_inv as f64;
    let radius = a.radius.unwrap_or(20.0 * epsilon);
    let start = ProductPoint::from_coords(gs.rng.gen(), gs.rng.gen(), gs.rng.gen(), gs.rng.gen());
    let sample = empirical_sample(&built.flow, &start, burn_in, size as usize, stride);
    let covering = estimate_sn(&built.flow, &sample, n, radius, DEFAULT_WINDOW)?;
    if let Some(path) = a.trials_csv.as_deref() {
        let (points, report) = run_shadowing(&built, &mut gs, a.trials.unwrap_or(100))?;
        write_trials(Some(path), hash.clone(), &points, &report)?;
    }
    let out = ComplexityOutput {
        config_hash: hash,
        q_k: grid.q,
        n_k: gs.n_k,
        epsilon,
        l: gs.l,
        bound,
        within_bound: covering.centers_used as u128 <= bound,
        cobound_tail: built.cobound_tail,
        covering,
    };
    write_json(a.common.out.as_deref(), &out)
}

pub fn shadow(args: ShadowArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let built = build_flow(&a.flow, Kind::T1)?;
    let mut gs = grid_setup(&built, &a.grid)?;
    let (points, report) = run_shadowing(&built, &mut gs, a.trials.unwrap_or(100))?;
    write_trials(a.common.out.as_deref(), config_hash(&canonical), &points, &report)?;
    if let Some(path) = a.report.as_deref() {
        write_json(Some(path), &report)?;
    }
    Ok(())
}

pub fn distality(args: DistalityArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let built = build_flow(&a.flow, Kind::S)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
    let p = point(&a.p, &mut rng, "p")?;
    let q = point(&a.q, &mut rng, "q")?;
    let n = a.n.unwrap_or(100_000);
    let stride = a.stride.unwrap_or(1).max(1);
    let trace = distance_trace(&built.flow, &p, &q, n, DEFAULT_WINDOW);
    let (argmin, min) = trace
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best });
    let meta = [
        ("config_hash", config_hash(&canonical)),
        ("min_dist", sci(min)),
        ("argmin", argmin.to_string()),
        ("cobound_tail", sci(built.cobound_tail)),
    ];
    let mut csv = Csv::new(a.common.out.as_deref(), &meta, &["n", "distance"])?;
    for (i, d) in trace.iter().enumerate().step_by(stride as usize) {
        csv.row(&[i.to_string(), sci(*d)])?;
    }
    Ok(csv.finish()?)
}

pub fn orbit(args: OrbitArgs) -> CliResult<()> {
    let (a, canonical) = merge(&args, args.common.config.as_deref())?;
    let built = build_flow(&a.flow, Kind::T)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
    let start = point(&a.start, &mut rng, "start")?;
    let n = a.n.unwrap_or(100);
    let stride = a.stride.unwrap_or(1).max(1);
    let method = a.method.unwrap_or(Method::Iterate);
    let meta = [("config_hash", config_hash(&canonical)), ("cobound_tail", sci(built.cobound_tail))];
    let mut csv = Csv::new(a.common.out.as_deref(), &meta, &["n", "t", "x", "y", "z"])?;
    let mut emit = |i: u64, p: &ProductPoint| -> CliResult<()> {
        let r = p.p.rep();
        Ok(csv.row(&[i.to_string(), sci(p.t), sci(r.x), sci(r.y), sci(r.z)])?)
    };
    match method {
        Method::Iterate => {
            for (i, p) in built.flow.orbit(&start).enumerate().take(n as usize + 1).step_by(stride as usize) {
                emit(i as u64, &p)?;
            }
        }
        Method::Closed | Method::Geometric => {
            for i in (0..=n).step_by(stride as usize) {
                let p = if i == 0 {
                    start
                } else if method == Method::Closed {
                    built.flow.orbit_closed_form(&start, i)?
                } else {
                    built.flow.orbit_closed_form_geometric(&start, i)?
                };
                emit(i, &p)?;
            }
        }
    }
    Ok(csv.finish()?)
}
