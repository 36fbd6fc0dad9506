use meandim_core::constructions::{free_fraction, minimality_gap_check, quarter_density_check};
use meandim_core::dimension::{
    banach_density, directional_mdim_estimate, lipschitz_endo_check, lw_inequality_check, metric_mean_dim_estimate, product_entropy_check,
    scale_entropy_table, shift_embedding, three_term_row_embedding, toral_entropy_bracket, topological_entropy_estimate, window_density,
};
use meandim_core::expansiveness::{
    boundary_gap, certify_expansive, certify_expansive_finite, coding_constant, coding_constant_finite, modulus_finite, modulus_table,
    widim_upper_via_boundary,
};
use meandim_core::frink::{
    chain_inequality_check, covering_transfer_check, dynamical_rho, frink_metrize, main_bound_evaluate, random_quasi_metric, verify_quasi_metric,
    window_contraction_check,
};
use meandim_core::systems::{build_restricted_y, build_three_term_system, count_patterns, periodic_product_points};
use meandim_core::{
    ColumnPoint, ColumnSite, EntropySource, Error, FiniteAction, LatticeVector, MetricMatrix, Norm, ProductShiftSystem, QuantizedTorus, Rect,
    RestrictedSystem, SftSystem, Site, SiteMap, System, ToralAutomorphism, TowerSite,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{parse_ratio, ColumnSpec, Command, ExperimentConfig, SystemSpec, TaskSpec};

type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub quantity: String,
    pub grid: String,
    pub lb: f64,
    pub ub: f64,
    pub verdict: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub details: Map<String, Value>,
    /// Bracket the config's `expect` block is checked against.
    pub headline: Option<(f64, f64)>,
    pub failures: Vec<String>,
}

impl Outcome {
    fn row(&mut self, quantity: &str, grid: String, lb: f64, ub: f64, verdict: &str) {
        self.rows.push(Row { quantity: quantity.into(), grid, lb, ub, verdict: verdict.into() });
    }

    fn check(&mut self, quantity: &str, grid: String, lb: f64, ub: f64, ok: bool, why: impl FnOnce() -> String) {
        self.row(quantity, grid, lb, ub, if ok { "ok" } else { "fail" });
        if !ok {
            self.failures.push(why());
        }
    }

    fn detail(&mut self, key: &str, v: impl Serialize) {
        self.details.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }
}

fn unsupported(cmd: &Command, sys: &SystemSpec) -> Error {
    let kind = serde_json::to_value(sys).ok().and_then(|v| v.get("kind").cloned()).unwrap_or(Value::Null);
    Error::InvalidInput(format!("{} does not accept system kind {kind}", cmd.as_str()))
}

fn pairs(task: &TaskSpec, default: usize) -> Result<usize> {
    let p = task.pairs.unwrap_or(default);
    if p > task.caps.pairs {
        return Err(Error::CapExceeded { what: "sampled pairs", size: p as u128, cap: task.caps.pairs as u128 });
    }
    Ok(p)
}

fn torus(r: usize, q: u32, norm: Norm) -> Result<Site> {
    Ok(Site::Torus(QuantizedTorus::new(r, q, norm)?))
}

fn product_system(symbols: Option<u32>, r: Option<usize>, q: Option<u32>, norm: Norm, matrix: &Option<Vec<Vec<i64>>>) -> Result<ProductShiftSystem> {
    match (symbols, r, q) {
        (Some(size), None, None) => {
            if matrix.is_some() {
                return Err(Error::InvalidInput("a matrix needs a torus site".into()));
            }
            Ok(ProductShiftSystem { site: Site::Alphabet { size }, h: SiteMap::Identity })
        }
        (None, Some(r), Some(q)) => {
            let h = match matrix {
                Some(m) => SiteMap::Toral(ToralAutomorphism::new(m.clone())?),
                None => SiteMap::Identity,
            };
            Ok(ProductShiftSystem { site: torus(r, q, norm)?, h })
        }
        _ => Err(Error::InvalidInput("give either symbols or both r and q".into())),
    }
}

fn restricted(column: &ColumnSpec, lambda: &meandim_core::IndexSetSpec, a: &[ColumnPoint]) -> Result<(RestrictedSystem, Option<Site>)> {
    let (base, site) = match column {
        ColumnSpec::FullShift { symbols } => (ColumnSite::FullShift { symbols: *symbols }, None),
        ColumnSpec::Torus { r, q, norm, matrix } => {
            let site = torus(*r, *q, *norm)?;
            let h = SiteMap::Toral(ToralAutomorphism::new(matrix.clone())?);
            (ColumnSite::Finite(ProductShiftSystem { site: site.clone(), h }), Some(site))
        }
    };
    Ok((build_restricted_y(base, lambda.clone(), a.to_vec())?, site))
}

/// Owned data behind an `EntropySource`.
enum Source {
    Sft(SftSystem),
    Shift(Site, usize),
    Restricted(RestrictedSystem, Option<Site>),
}

impl Source {
    fn from_spec(cmd: &Command, sys: &SystemSpec) -> Result<Self> {
        Ok(match sys {
            SystemSpec::FullShift { symbols, k } => Source::Sft(SftSystem::full_shift(*k, *symbols)),
            SystemSpec::TorusShift { r, q, norm, k } => Source::Shift(torus(*r, *q, *norm)?, *k),
            SystemSpec::GoldenMean => Source::Sft(SftSystem::golden_mean()),
            SystemSpec::ThreeTerm { q } => Source::Sft(build_three_term_system(*q)?),
            SystemSpec::Sft { system } => Source::Sft(system.clone()),
            SystemSpec::Restricted { column, lambda, a } => {
                let (y, site) = restricted(column, lambda, a)?;
                Source::Restricted(y, site)
            }
            other => return Err(unsupported(cmd, other)),
        })
    }

    fn get(&self) -> EntropySource<'_> {
        match self {
            Source::Sft(s) => EntropySource::Symbolic(s),
            Source::Shift(site, k) => EntropySource::FullShift { site, k: *k },
            Source::Restricted(y, None) => EntropySource::Restricted(y),
            Source::Restricted(y, Some(site)) => EntropySource::RestrictedShift(y, site),
        }
    }
}

fn grid_eps_n(e: f64, n: i64) -> String {
    format!("eps={e};N={n}")
}

fn default_eps(task: &TaskSpec, fallback: &[f64]) -> Vec<f64> {
    if task.eps.is_empty() {
        fallback.to_vec()
    } else {
        task.eps.clone()
    }
}

fn default_ns(task: &TaskSpec, fallback: &[i64]) -> Vec<i64> {
    if task.ns.is_empty() {
        fallback.to_vec()
    } else {
        task.ns.clone()
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = match cfg.command {
        Command::Entropy => entropy(cfg),
        Command::Mdim => mdim(cfg),
        Command::MetricMdim => metric_mdim(cfg),
        Command::Directional => directional(cfg),
        Command::Frink => frink(cfg),
        Command::Expansive => expansive(cfg),
        Command::Coding => coding(cfg),
        Command::Density => density(cfg),
        Command::Tower => tower(cfg),
    }?;
    if let Some((lb, ub)) = out.headline {
        let fails = cfg.expect.check(lb, ub);
        out.row("headline", String::new(), lb, ub, if fails.is_empty() { "ok" } else { "fail" });
        out.failures.extend(fails);
    }
    Ok(out)
}

fn entropy(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let tol = task.tol.unwrap_or(1e-9);
    let mut out = Outcome::default();
    match &cfg.system {
        SystemSpec::Restricted { column: column @ ColumnSpec::FullShift { .. }, lambda, a } => {
            let (y, _) = restricted(column, lambda, a)?;
            let ns = default_ns(task, &(1..=20).collect::<Vec<_>>());
            let r = product_entropy_check(&y, &ns, &task.pavlov_ns, &task.ms, tol)?;
            for &(n, v) in &r.direct_series {
                out.row("direct", format!("N={n}"), v, v, "-");
            }
            for p in &r.pavlov {
                let overlap = p.bracket.lo <= r.direct.hi + tol && r.direct.lo <= p.bracket.hi + tol;
                out.check("projection", format!("N={}", p.n), p.bracket.lo, p.bracket.hi, overlap, || format!("projection bracket at N = {} misses the direct bracket", p.n));
            }
            out.check("target", String::new(), r.target, r.target, r.holds, || "product entropy check failed".into());
            out.headline = Some((r.direct.lo, r.direct.hi));
            out.detail("report", &r);
        }
        SystemSpec::Toral { matrix } => {
            let m = ToralAutomorphism::new(matrix.clone())?;
            let eps = default_eps(task, &[2f64.powi(-6)]);
            let n = task.n.unwrap_or(6);
            let b = toral_entropy_bracket(&m, eps[0], n)?;
            out.row("log_lambda", String::new(), b.log_lambda, b.log_lambda, "-");
            out.row("raw", grid_eps_n(eps[0], n), b.raw.lo, b.raw.hi, "-");
            out.row("growth", grid_eps_n(eps[0], n), b.growth.lo, b.growth.hi, "-");
            out.headline = Some((b.growth.lo, b.growth.hi));
            out.detail("bracket", &b);
        }
        SystemSpec::Endo { endo } => {
            let n = task.n.unwrap_or(3);
            let r = lipschitz_endo_check(endo, n, task.times.unwrap_or((1, 3)), tol, cfg.seed)?;
            out.row("lipschitz", format!("N={n}"), r.lipschitz.lo, r.lipschitz.hi, "-");
            out.row("mdim_ub", String::new(), r.mdim_ub, r.mdim_ub, "-");
            out.check("commutes", String::new(), 0.0, 0.0, r.commutes, || "map does not commute with the shift".into());
            out.check("entropy_vs_bound", format!("N={n}"), r.h_lb, r.rhs, r.holds, || format!("entropy lower bound {} exceeds {}", r.h_lb, r.rhs));
            out.headline = Some((r.h_lb, r.h_lb));
            out.detail("report", &r);
        }
        sys => {
            let src = Source::from_spec(&cfg.command, sys)?;
            let eps = default_eps(task, &[0.5, 0.25, 0.125]);
            let ns = default_ns(task, &(1..=8).collect::<Vec<_>>());
            let t = scale_entropy_table(&src.get(), &eps, &ns)?;
            for (e, &ev) in t.eps.iter().enumerate() {
                for (j, &n) in t.ns.iter().enumerate() {
                    let v = t.normalized(e, j);
                    out.row("normalized_log_cover", grid_eps_n(ev, n), v.lo, v.hi, "-");
                }
            }
            for (e, &ev) in t.eps.iter().enumerate() {
                let b = t.s_bracket(e);
                out.row("S", format!("eps={ev}"), b.lo, b.hi, "-");
            }
            let h = topological_entropy_estimate(&t);
            out.headline = Some((h.lb, h.ub));
            out.detail("estimate", &h);
        }
    }
    Ok(out)
}

fn embedding(cfg: &ExperimentConfig, n: i64) -> Result<Option<(meandim_core::DimensionEstimate, meandim_core::EmbeddingCertificate)>> {
    let p = pairs(&cfg.task, 1000)?;
    Ok(Some(match &cfg.system {
        SystemSpec::ThreeTerm { q } => three_term_row_embedding(*q, n, p, cfg.seed)?,
        SystemSpec::FullShift { symbols, k } => shift_embedding(&Site::Alphabet { size: *symbols }, *k, n, &|_| true, 0, p, cfg.seed)?,
        SystemSpec::TorusShift { r, q, norm, k } => shift_embedding(&torus(*r, *q, *norm)?, *k, n, &|_| true, 0, p, cfg.seed)?,
        SystemSpec::Restricted { column: ColumnSpec::Torus { r, q, norm, .. }, lambda, a } => {
            let background = match a.first() {
                Some(ColumnPoint::Value(v)) => *v,
                _ => 0,
            };
            shift_embedding(&torus(*r, *q, *norm)?, 1, n, &|p| lambda.contains(p[0]), background, p, cfg.seed)?
        }
        _ => return Ok(None),
    }))
}

fn mdim(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let mut out = Outcome::default();
    if let SystemSpec::ThreeTerm { q } = &cfg.system {
        let sys = build_three_term_system(*q)?;
        for &l in &task.sides {
            let c = count_patterns(&sys, &Rect::square(l, 2), task.caps.patterns)?;
            let want = BigUint::from(*q).pow((2 * l - 1).max(0) as u32);
            let v: f64 = c.to_string().parse().unwrap_or(f64::INFINITY);
            out.check("square_patterns", format!("L={l}"), v, v, c == want, || format!("{c} patterns on a side-{l} square, expected {want}"));
        }
    }
    let n = task.n.unwrap_or(10);
    let (e, cert) = embedding(cfg, n)?.ok_or_else(|| unsupported(&cfg.command, &cfg.system))?;
    out.row("embedding_lb", format!("N={n}"), e.lb, e.ub, "-");
    out.headline = Some((e.lb, e.ub));
    out.detail("estimate", &e);
    out.detail("certificate", &cert);
    Ok(out)
}

fn metric_mdim(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let mut out = Outcome::default();
    let src = Source::from_spec(&cfg.command, &cfg.system)?;
    let eps = default_eps(task, &[0.125, 0.0625, 0.03125]);
    let ns = default_ns(task, &[4]);
    let t = scale_entropy_table(&src.get(), &eps, &ns)?;
    for (e, &ev) in t.eps.iter().enumerate() {
        let b = t.s_bracket(e);
        out.row("S", format!("eps={ev}"), b.lo, b.hi, "-");
    }
    let m = metric_mean_dim_estimate(&t)?;
    out.row("ratio", format!("eps={}", m.eps_finest), m.ratio.lo, m.ratio.hi, "-");
    out.row("slope", format!("eps={}..{}", m.eps_finest, m.eps_coarsest), m.slope.lo, m.slope.hi, "-");
    if task.compare_lower_bound {
        let n = *ns.iter().max().unwrap_or(&4);
        let (lb, _) = embedding(cfg, n)?.ok_or_else(|| unsupported(&cfg.command, &cfg.system))?;
        let r = lw_inequality_check(&lb, &m.estimate, task.tol.unwrap_or(1e-9));
        out.check("lower_vs_metric", format!("N={n}"), r.mdim_lb, r.metric_ub, r.holds, || format!("lower bound {} exceeds metric estimate {}", r.mdim_lb, r.metric_ub));
        out.detail("lower_bound", &lb);
    }
    out.headline = Some((m.estimate.lb, m.estimate.ub));
    out.detail("estimate", &m);
    Ok(out)
}

fn directional(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let sys = match &cfg.system {
        SystemSpec::ProductShift { symbols, r, q, norm, matrix } => product_system(*symbols, *r, *q, *norm, matrix)?,
        other => return Err(unsupported(&cfg.command, other)),
    };
    let dir = task.dir.ok_or_else(|| Error::InvalidInput("directional task needs dir".into()))?;
    let r = task.r.unwrap_or(1.0);
    let ns = default_ns(task, &[4, 8, 16]);
    let eps = default_eps(task, &[1.0 / 16.0, 1.0 / 32.0]);
    let rep = directional_mdim_estimate(&sys, dir, r, &ns, &eps, cfg.seed)?;
    let mut out = Outcome::default();
    for p in &rep.series {
        out.row("directional_estimate", format!("N={}", p.n), p.lb, p.ub, "-");
    }
    out.headline = Some((rep.estimate.lb, rep.estimate.ub));
    out.detail("report", &rep);
    Ok(out)
}

fn sandwich(out: &mut Outcome, label: &str, rho: &MetricMatrix, d: &MetricMatrix) {
    let n = rho.len();
    let mut bad = None;
    for i in 0..n {
        for j in 0..n {
            let (r, v) = (rho.get(i, j), d.get(i, j));
            if v < r / 4.0 - rho.tol || v > r + rho.tol {
                bad.get_or_insert((i, j, v, r));
            }
        }
    }
    let tri = d.triangle_violation();
    out.check(label, format!("points={n}"), 0.0, 0.0, bad.is_none() && tri.is_none(), || match (bad, tri) {
        (Some((i, j, v, r)), _) => format!("d({i},{j}) = {v} outside [rho/4, rho] with rho = {r}"),
        (_, Some(t)) => format!("triangle inequality fails at {t:?}"),
        _ => unreachable!(),
    });
}

fn chains(out: &mut Outcome, rho: &MetricMatrix, count: usize, rng: &mut ChaCha8Rng) {
    let n = rho.len();
    if n < 2 || count == 0 {
        return;
    }
    let mut fails = 0;
    for _ in 0..count {
        let len = rng.gen_range(3..=8usize);
        let chain: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n)).collect();
        if chain_inequality_check(rho, &chain).is_some() {
            fails += 1;
        }
    }
    out.check("chain_inequality", format!("chains={count}"), fails as f64, fails as f64, fails == 0, || format!("{fails} chains violate the weighted inequality"));
}

fn frink(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let mut out = Outcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match &cfg.system {
        SystemSpec::QuasiMetric { rows: Some(rows), random: None } => {
            let rho = MetricMatrix::from_rows(rows)?;
            if let Some((i, j, k)) = verify_quasi_metric(&rho) {
                return Err(Error::QuasiAxiomViolation(i, j, k));
            }
            let dm = frink_metrize(&rho)?;
            for i in 0..rho.len() {
                for j in (i + 1)..rho.len() {
                    out.row("metric", format!("i={i};j={j}"), dm.d.get(i, j), rho.get(i, j), "-");
                }
            }
            sandwich(&mut out, "sandwich", &rho, &dm.d);
            chains(&mut out, &rho, task.chains.unwrap_or(0), &mut rng);
            out.detail("metric", &dm.d);
        }
        SystemSpec::QuasiMetric { rows: None, random: Some(rq) } => {
            if rq.max_points < 2 {
                return Err(Error::InvalidInput("max_points must be at least 2".into()));
            }
            let mut ok = 0usize;
            for trial in 0..rq.count {
                let n = rng.gen_range(2..=rq.max_points);
                let rho = random_quasi_metric(n, &mut rng);
                if let Some(t) = verify_quasi_metric(&rho) {
                    return Err(Error::AssertionFailed(format!("generated quasi-metric {trial} violates the axiom at {t:?}")));
                }
                let dm = frink_metrize(&rho)?;
                let before = out.failures.len();
                sandwich(&mut out, "sandwich", &rho, &dm.d);
                out.rows.pop();
                if out.failures.len() == before {
                    ok += 1;
                }
            }
            out.check("metrized", format!("count={}", rq.count), ok as f64, rq.count as f64, ok == rq.count, || "some metrizations failed".into());
            let per = task.chains.unwrap_or(0) / rq.count.max(1);
            if per > 0 {
                let rho = random_quasi_metric(rq.max_points, &mut rng);
                chains(&mut out, &rho, per * rq.count, &mut rng);
            }
        }
        SystemSpec::PeriodicSample { .. } => {
            let fa = sample(cfg)?;
            let c = task.c.unwrap_or(0.2);
            let cert = certify_expansive_finite(&fa, c, task.n_max.unwrap_or(5))?;
            let (rho, p) = dynamical_rho(&fa, &cert, 8, 8)?;
            let dm = frink_metrize(&rho)?;
            out.row("alpha", format!("l={}", p.l), p.alpha, p.alpha, "-");
            sandwich(&mut out, "sandwich", &rho, &dm.d);
            for n in 1..=task.n.unwrap_or(6) {
                let rep = window_contraction_check(&dm, &fa, p.alpha, n)?;
                let ok = rep.violation.is_none();
                out.check("window_contraction", format!("n={n}"), rep.hypotheses as f64, rep.hypotheses as f64, ok, || format!("window contraction fails at n = {n}: {:?}", rep.violation));
            }
            out.detail("params", &p);
        }
        other => return Err(unsupported(&cfg.command, other)),
    }
    Ok(out)
}

fn sample(cfg: &ExperimentConfig) -> Result<FiniteAction> {
    let SystemSpec::PeriodicSample { symbols, r, q, matrix, period, metric, restrict } = &cfg.system else {
        return Err(unsupported(&cfg.command, &cfg.system));
    };
    let sys = product_system(*symbols, *r, *q, Norm::Euclidean, matrix)?;
    let (fa, _) = periodic_product_points(&sys, *period, *metric, cfg.task.caps.points)?;
    Ok(match restrict {
        Some(basis) => fa.restrict(&basis.iter().map(|v| LatticeVector(v.clone())).collect::<Vec<_>>()),
        None => fa,
    })
}

fn expansive(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let mut out = Outcome::default();
    let c = task.c.unwrap_or(0.1);
    let eps = default_eps(task, &[0.5, 0.25, 0.1, 0.05]);
    let m_max = task.m_max.unwrap_or(64);
    match &cfg.system {
        SystemSpec::ProductShift { symbols, r, q, norm, matrix } => {
            let sys = System::Product(product_system(*symbols, *r, *q, *norm, matrix)?);
            let cert = certify_expansive(&sys, c)?;
            let t = modulus_table(&sys, &cert, &eps, m_max)?;
            for &(e, m) in &t.entries {
                out.row("modulus", format!("eps={e}"), m as f64, m as f64, "-");
            }
            let mono = t.is_monotone();
            out.check("monotone", String::new(), 0.0, 0.0, mono, || "modulus is not monotone in eps".into());
            out.detail("certificate", &cert);
        }
        SystemSpec::PeriodicSample { .. } => {
            let fa = sample(cfg)?;
            let n_max = task.n_max.unwrap_or(4);
            let cert = certify_expansive_finite(&fa, c, n_max)?;
            let mut prev: Option<i64> = None;
            let mut sorted = eps.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let mut mono = true;
            for &e in &sorted {
                let m = modulus_finite(&fa, &cert, e, m_max)?;
                mono &= prev.map_or(true, |p| m >= p);
                prev = Some(m);
                out.row("modulus", format!("eps={e}"), m as f64, m as f64, "-");
            }
            out.check("monotone", String::new(), 0.0, 0.0, mono, || "modulus is not monotone in eps".into());
            let gap = boundary_gap(&fa, &cert, 0, n_max)?;
            let delta = gap.delta.unwrap_or(f64::NAN);
            out.row("boundary_gap", format!("N={}..{}", gap.n_lo, gap.n_hi), delta, delta, "-");
            for n in 0..=task.n.unwrap_or(2) {
                let w = widim_upper_via_boundary(&fa, &cert, &gap, n)?;
                let ok = w.order as u128 <= w.formula_bound && w.mesh <= 2.0 * c + 1e-12;
                out.check("cover_order", format!("N={n}"), w.order as f64, w.formula_bound as f64, ok, || format!("cover order {} exceeds {}", w.order, w.formula_bound));
            }
            out.detail("certificate", &cert);
            out.detail("gap", &gap);
        }
        other => return Err(unsupported(&cfg.command, other)),
    }
    Ok(out)
}

fn coding(cfg: &ExperimentConfig) -> Result<Outcome> {
    let task = &cfg.task;
    let mut out = Outcome::default();
    let SystemSpec::ProductShift { symbols, r, q, norm, matrix } = &cfg.system else {
        return Err(unsupported(&cfg.command, &cfg.system));
    };
    let sys = product_system(*symbols, *r, *q, *norm, matrix)?;
    let cert = certify_expansive(&System::Product(sys.clone()), task.c.unwrap_or(0.1))?;
    let cc = coding_constant(&sys, &[LatticeVector(vec![1, 0])], &cert, task.n_max.unwrap_or(5), pairs(task, 1000)?, cfg.seed)?;
    out.row("coding_constant", format!("N<={}", cc.n_max), cc.k_const as f64, cc.k_const as f64, "-");
    out.row("nonvacuous_pairs", format!("pairs={}", cc.pairs_checked), cc.nonvacuous as f64, cc.nonvacuous as f64, "-");
    out.check("violations", format!("pairs={}", cc.pairs_checked), cc.violations as f64, cc.violations as f64, cc.violations == 0, || {
        format!("{} sampled pairs violate the coding implication", cc.violations)
    });
    out.headline = Some((cc.k_const as f64, cc.k_const as f64));
    out.detail("coding", &cc);
    if let Some(t) = &task.transfer {
        let small = product_system(*symbols, *r, Some(t.q), *norm, matrix)?;
        let (fa, _) = periodic_product_points(&small, t.period, meandim_core::BaseMetric::Origin, task.caps.points)?;
        let fcert = certify_expansive_finite(&fa, t.c, t.max_n)?;
        let (rho, p) = dynamical_rho(&fa, &fcert, 8, 8)?;
        let dm = frink_metrize(&rho)?;
        let rfa = fa.restrict(&[LatticeVector(vec![1, 0])]);
        let k = coding_constant_finite(&fa, &rfa, &dm.d, 1.0 / (4.0 * p.alpha), t.max_n, 8)?;
        out.row("sample_coding_constant", format!("points={}", fa.len()), k as f64, k as f64, "-");
        for big_n in 0..=t.max_n {
            for n in 0..=t.max_n {
                let rep = covering_transfer_check(&fa, &rfa, k, &dm, p.alpha, big_n, n)?;
                out.check("transfer", format!("N={big_n};n={n}"), rep.lhs.lb as f64, rep.rhs.ub as f64, rep.holds, || format!("covering transfer fails at N = {big_n}, n = {n}"));
            }
        }
        if task.main_bound {
            let m = matrix.as_ref().ok_or_else(|| Error::InvalidInput("main bound needs a toral matrix".into()))?;
            let h = toral_entropy_bracket(&ToralAutomorphism::new(m.clone())?, 2f64.powi(-6), 6)?;
            let rr = r.ok_or_else(|| Error::InvalidInput("main bound needs a torus site".into()))?;
            let fine = Site::Torus(QuantizedTorus::new(rr, 1 << 10, Norm::Sup)?);
            let t2 = scale_entropy_table(&EntropySource::FullShift { site: &fine, k: 1 }, &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0], &[4])?;
            let lhs = metric_mean_dim_estimate(&t2)?.estimate.ub;
            let mb = main_bound_evaluate(lhs, 2, k, p.alpha, h.growth.hi, task.tol.unwrap_or(1e-9));
            out.check("main_bound", format!("K={k}"), mb.lhs_upper, mb.rhs, mb.holds, || format!("{} exceeds {}", mb.lhs_upper, mb.rhs));
            out.detail("main_bound", &mb);
        }
    }
    Ok(out)
}

fn density(cfg: &ExperimentConfig) -> Result<Outcome> {
    let SystemSpec::IndexSet { lambda } = &cfg.system else {
        return Err(unsupported(&cfg.command, &cfg.system));
    };
    lambda.validate()?;
    let mut out = Outcome::default();
    let d = banach_density(lambda);
    let v = *d.value.numer() as f64 / *d.value.denom() as f64;
    for &len in &cfg.task.lens {
        let w = window_density(lambda, len);
        let wv = *w.numer() as f64 / *w.denom() as f64;
        out.row("window_density", format!("len={len}"), wv, wv, "-");
    }
    let exact = format!("{}/{}", d.value.numer(), d.value.denom());
    match &cfg.expect.exact {
        Some(want) => {
            let (p, q) = parse_ratio(want).map_err(Error::InvalidInput)?;
            let ok = d.exact && (*d.value.numer() as i128) * q as i128 == p as i128 * (*d.value.denom() as i128);
            out.check("banach_density", String::new(), v, v, ok, || format!("density {exact} differs from {want}"));
        }
        None => out.row("banach_density", String::new(), v, v, if d.exact { "exact" } else { "approx" }),
    }
    out.headline = Some((v, v));
    out.detail("value", json!({ "rational": exact, "exact": d.exact }));
    Ok(out)
}

fn tower(cfg: &ExperimentConfig) -> Result<Outcome> {
    let SystemSpec::Tower { params } = &cfg.system else {
        return Err(unsupported(&cfg.command, &cfg.system));
    };
    params.validate()?;
    let task = &cfg.task;
    let mut out = Outcome::default();
    let stages: Vec<usize> = if task.stages.is_empty() { (0..=params.stages()).collect() } else { task.stages.clone() };
    for &n in &stages {
        let f = free_fraction(params, n)?;
        let v = *f.by_product.numer() as f64 / *f.by_product.denom() as f64;
        let agree = f.by_count == f.by_product;
        out.check("free_fraction", format!("n={n}"), v, v, agree, || format!("count and product routes disagree at stage {n}"));
    }
    if let Some(t_max) = task.t_max {
        let q = quarter_density_check(params, t_max)?;
        let (t, c) = q.worst;
        let ratio = c as f64 / t.max(1) as f64;
        out.check("quarter_density", format!("t<={t_max};stage={}", q.stage_used), 0.25, ratio, q.failing.is_none(), || format!("4|[0,t) ∩ I| <= t at t = {:?}", q.failing));
        out.headline = Some((ratio, ratio));
        out.detail("quarter_density", &q);
    }
    if let Some(m) = &task.minimality {
        let site = TowerSite::new(QuantizedTorus::new(2, m.q, Norm::Euclidean)?, ToralAutomorphism::new(m.matrix.clone())?)?;
        let mut reports = Vec::new();
        for &n in &m.stages {
            let r = minimality_gap_check(params.variant, &params.l, &site, n, m.samples, m.window, cfg.seed.wrapping_add(n as u64))?;
            out.check("minimality_gap", format!("n={n};L_next={}", r.l_next), r.max_gap, r.bound, r.holds, || format!("gap {} not below {} at n = {n}", r.max_gap, r.bound));
            reports.push(r);
        }
        out.detail("minimality", &reports);
    }
    Ok(out)
}
