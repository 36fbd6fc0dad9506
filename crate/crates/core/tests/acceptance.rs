//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use meandim_core::constructions::{free_fraction, minimality_gap_check, quarter_density_check, TowerParams, TowerSite, TowerVariant};
use meandim_core::dimension::{
    banach_density, lipschitz_endo_check, lw_inequality_check, metric_mean_dim_estimate, product_entropy_check, scale_entropy_table,
    shift_embedding, three_term_row_embedding, toral_entropy_bracket, topological_entropy_estimate, EntropySource, LocalEndo,
};
use meandim_core::expansiveness::{certify_expansive, certify_expansive_finite, coding_constant, coding_constant_finite};
use meandim_core::frink::{
    chain_inequality_check, covering_transfer_check, dynamical_rho, frink_metrize, main_bound_evaluate, random_quasi_metric,
    verify_quasi_metric, window_contraction_check,
};
use meandim_core::systems::{
    build_restricted_y, build_three_term_system, count_patterns, periodic_product_points, BaseMetric, ColumnPoint, ColumnSite, Norm,
    QuantizedTorus, ToralAutomorphism,
};
use meandim_core::{FiniteAction, IndexSetSpec, LatticeVector, MetricMatrix, ProductShiftSystem, Rect, SftSystem, Site, SiteMap, System};
use num_bigint::BigUint;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn brute_chain_min(rho: &MetricMatrix, i: usize, j: usize) -> f64 {
    fn go(rho: &MetricMatrix, cur: usize, target: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if cur == target {
            *best = acc;
            return;
        }
        for nx in 0..rho.len() {
            if !used[nx] {
                used[nx] = true;
                go(rho, nx, target, used, acc + rho.get(cur, nx), best);
                used[nx] = false;
            }
        }
    }
    let mut used = vec![false; rho.len()];
    used[i] = true;
    let mut best = f64::INFINITY;
    go(rho, i, j, &mut used, 0.0, &mut best);
    best
}

fn frink_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF41);
    let mut brute_pairs = 0;
    for trial in 0..1000 {
        let n = rng.gen_range(2..=12);
        let rho = random_quasi_metric(n, &mut rng);
        ensure!(verify_quasi_metric(&rho).is_none(), "generator produced an invalid quasi-metric at trial {trial}");
        let d = frink_metrize(&rho).map_err(|e| e.to_string())?.d;
        ensure!(d.triangle_violation().is_none(), "triangle fails at trial {trial}");
        for i in 0..n {
            for j in 0..n {
                let (r, v) = (rho.get(i, j), d.get(i, j));
                ensure!(v <= r + 1e-12 && 4.0 * v >= r - 1e-12, "sandwich fails at trial {trial} ({i},{j})");
                ensure!(v == d.get(j, i), "asymmetric at trial {trial}");
                ensure!((v == 0.0) == (i == j), "zero-iff-equal fails at trial {trial}");
                if n <= 7 && i != j {
                    ensure!(v == brute_chain_min(&rho, i, j), "chain minimum differs at trial {trial} ({i},{j})");
                    brute_pairs += 1;
                }
            }
        }
    }
    Ok(format!("1000 quasi-metrics, {brute_pairs} pairs matched brute-force chain minima"))
}

fn chain_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4A1);
    let mut rho = random_quasi_metric(8, &mut rng);
    for t in 0..10_000 {
        if t % 100 == 0 {
            let n = rng.gen_range(2..=12);
            rho = random_quasi_metric(n, &mut rng);
        }
        let len = rng.gen_range(3..=12);
        let chain: Vec<usize> = (0..len).map(|_| rng.gen_range(0..rho.len())).collect();
        if let Some((l, r)) = chain_inequality_check(&rho, &chain) {
            return Err(format!("chain {chain:?}: {l} > {r}"));
        }
    }
    Ok("10000 chains, 0 violations".into())
}

fn full_shift() -> Outcome {
    let s = SftSystem::full_shift(1, 2);
    let eps: Vec<f64> = (2..=8).map(|e| 2f64.powi(-e)).collect();
    let ns: Vec<i64> = (1..=12).collect();
    let t = scale_entropy_table(&EntropySource::Symbolic(&s), &eps, &ns).map_err(|e| e.to_string())?;
    let ln2 = 2f64.ln();
    for e in 0..eps.len() {
        let b = t.s_bracket(e);
        ensure!((b.lo - ln2).abs() <= 1e-9 && (b.hi - ln2).abs() <= 1e-9, "S bracket at eps {} is {:?}", eps[e], b);
    }
    let m = metric_mean_dim_estimate(&t).map_err(|e| e.to_string())?;
    ensure!(m.estimate.ub <= 0.05, "metric mean dimension estimate {} > 0.05", m.estimate.ub);
    Ok(format!(
        "S = log 2 on 7 scales x 12 windows; slope estimate [{:.3}, {:.3}] (ratio S/log(1/eps) at 2^-8 is {:.3})",
        m.slope.lo, m.slope.hi, m.ratio.hi
    ))
}

fn golden_mean() -> Outcome {
    let s = SftSystem::golden_mean();
    let mut fib = vec![BigUint::from(1u32), BigUint::from(1u32)];
    while fib.len() < 40 {
        let v = &fib[fib.len() - 1] + &fib[fib.len() - 2];
        fib.push(v);
    }
    for len in 1..=33i64 {
        let c = count_patterns(&s, &Rect { lo: vec![0], hi: vec![len - 1] }, 1 << 20).map_err(|e| e.to_string())?;
        // words of length n avoiding 11: F(n+2) with F(1) = F(2) = 1
        ensure!(c == fib[len as usize + 1], "length {len}: {c} vs {}", fib[len as usize + 1]);
    }
    // transfer-matrix oracle: spectral radius of [[1,1],[1,0]] by power iteration
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 0.0;
    for _ in 0..200 {
        let (na, nb) = (a + b, a);
        lambda = na / a;
        let s = na.max(nb);
        a = na / s;
        b = nb / s;
    }
    let target = lambda.ln();
    let t = scale_entropy_table(&EntropySource::Symbolic(&s), &[0.5, 0.25, 0.125], &(1..=16).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let h = topological_entropy_estimate(&t);
    let rel = (h.ub - target).abs() / target;
    ensure!(rel <= 0.03, "estimate {} vs {} ({:.2}%)", h.ub, target, rel * 100.0);
    Ok(format!("Fibonacci counts to 33 cells; inf estimate {:.4} vs {:.4} ({:.2}%)", h.ub, target, rel * 100.0))
}

/// Independent enumeration of `L×L` arrays obeying `3x_{m,n} + x_{m+1,n} + x_{m,n+1} ≡ 0 mod q`.
fn three_term_brute(q: u32, l: usize) -> u64 {
    let cells = l * l;
    let total = (q as u64).pow(cells as u32);
    let mut count = 0;
    let mut x = vec![0u32; cells];
    for code in 0..total {
        let mut c = code;
        for v in x.iter_mut() {
            *v = (c % q as u64) as u32;
            c /= q as u64;
        }
        let ok = (0..l - 1).all(|m| (0..l - 1).all(|n| (3 * x[m * l + n] + x[(m + 1) * l + n] + x[m * l + n + 1]) % q == 0));
        count += ok as u64;
    }
    count
}

fn three_term() -> Outcome {
    for q in [2u32, 3, 5] {
        let sys = build_three_term_system(q).map_err(|e| e.to_string())?;
        for l in [2i64, 3, 4] {
            let c = count_patterns(&sys, &Rect::square(l, 2), 1 << 22).map_err(|e| e.to_string())?;
            let want = BigUint::from(q).pow((2 * l - 1) as u32);
            ensure!(c == want, "q {q}, L {l}: {c} vs {want}");
            if q <= 3 && l <= 3 {
                let b = three_term_brute(q, l as usize);
                ensure!(BigUint::from(b) == want, "brute force q {q}, L {l}: {b}");
            }
        }
    }
    let mut lbs = Vec::new();
    for q in [2u32, 3, 5] {
        let (e, _) = three_term_row_embedding(q, 10, 1000, 13).map_err(|e| e.to_string())?;
        ensure!(e.lb >= 0.9, "row embedding bound {} at q {q}", e.lb);
        lbs.push(e.lb);
    }
    Ok(format!("q^(2L-1) for q in {{2,3,5}}, L in {{2,3,4}}; row embedding bounds {lbs:?} at N = 10"))
}

fn densities() -> Outcome {
    let cases = [
        (IndexSetSpec::all(), Ratio::new(1, 1)),
        (IndexSetSpec::FiniteSet(vec![0]), Ratio::new(0, 1)),
        (IndexSetSpec::ArithmeticUnion(vec![(0, 2)]), Ratio::new(1, 2)),
        (IndexSetSpec::ArithmeticUnion(vec![(0, 7), (2, 7), (5, 7)]), Ratio::new(3, 7)),
    ];
    for (s, want) in &cases {
        let d = banach_density(s);
        ensure!(d.exact && d.value == *want, "{s:?}: {} vs {want}", d.value);
    }
    Ok("1, 0, 1/2, 3/7 exact".into())
}

fn example_1_9() -> Outcome {
    let y = build_restricted_y(ColumnSite::FullShift { symbols: 2 }, IndexSetSpec::ArithmeticUnion(vec![(0, 2)]), vec![ColumnPoint::Periodic(vec![0])])
        .map_err(|e| e.to_string())?;
    let ns: Vec<i64> = (1..=20).collect();
    let r = product_entropy_check(&y, &ns, &[2, 4, 6, 8], &[4, 8, 16, 32], 1e-9).map_err(|e| e.to_string())?;
    let target = 0.5 * 2f64.ln();
    ensure!((r.target - target).abs() < 1e-12, "target {}", r.target);
    for w in r.direct_series.windows(2) {
        ensure!(w[1].1 <= w[0].1 + 1e-15, "direct estimates increase at N = {}", w[1].0);
    }
    for &(n, v) in &r.direct_series {
        ensure!(v >= target - 1e-12, "estimate {v} below D log 2 at N = {n}");
    }
    let at20 = r.direct_series.last().unwrap().1;
    let rel = (at20 - target) / target;
    ensure!(rel <= 0.06, "N = 20 estimate {at20} is {:.2}% above target", rel * 100.0);
    for p in &r.pavlov {
        ensure!(p.bracket.lo <= r.direct.hi + 1e-9 && r.direct.lo <= p.bracket.hi + 1e-9, "projection bracket {:?} misses {:?} at N = {}", p.bracket, r.direct, p.n);
    }
    ensure!(r.holds, "product entropy check failed: {r:?}");
    let site = Site::Torus(QuantizedTorus::new(2, 64, Norm::Euclidean).map_err(|e| e.to_string())?);
    let (e, _) = shift_embedding(&site, 1, 20, &|p| p[0].rem_euclid(2) == 0, 0, 1000, 19).map_err(|e| e.to_string())?;
    ensure!((e.lb - 42.0 / 41.0).abs() < 1e-12, "embedding bound {}", e.lb);
    ensure!((e.lb - 1.0).abs() <= 0.05, "embedding bound {} not within 5% of 1", e.lb);
    Ok(format!("direct {at20:.5} at N = 20 ({:.2}% above {target:.5}); projection brackets overlap; torus bound {:.4}", rel * 100.0, e.lb))
}

fn cat() -> ToralAutomorphism {
    ToralAutomorphism::new(vec![vec![2, 1], vec![1, 1]]).unwrap()
}

fn toral() -> Outcome {
    let b = toral_entropy_bracket(&cat(), 2f64.powi(-6), 6).map_err(|e| e.to_string())?;
    let target = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    ensure!(b.growth.contains(target, 0.0), "bracket {:?} misses {target}", b.growth);
    ensure!(b.growth.width() <= 0.15, "width {}", b.growth.width());
    Ok(format!("[{:.4}, {:.4}] contains {target:.5}, width {:.4}", b.growth.lo, b.growth.hi, b.growth.width()))
}

fn cat_sample() -> Result<(FiniteAction, ProductShiftSystem), String> {
    let t = QuantizedTorus::new(2, 2, Norm::Euclidean).map_err(|e| e.to_string())?;
    let sys = ProductShiftSystem { site: Site::Torus(t), h: SiteMap::Toral(cat()) };
    let (fa, _) = periodic_product_points(&sys, 4, BaseMetric::Origin, 512).map_err(|e| e.to_string())?;
    Ok((fa, sys))
}

fn coding() -> Outcome {
    let sys = ProductShiftSystem { site: Site::Torus(QuantizedTorus::new(2, 4, Norm::Euclidean).unwrap()), h: SiteMap::Toral(cat()) };
    let cert = certify_expansive(&System::Product(sys.clone()), 0.1).map_err(|e| e.to_string())?;
    let cc = coding_constant(&sys, &[LatticeVector(vec![1, 0])], &cert, 5, 10_000, 0x5EED).map_err(|e| e.to_string())?;
    ensure!(cc.violations == 0, "{} violations of the coding implication", cc.violations);
    ensure!(cc.nonvacuous > 0, "no pair satisfied the hypothesis");
    let (fa, _) = cat_sample()?;
    let fcert = certify_expansive_finite(&fa, 0.2, 4).map_err(|e| e.to_string())?;
    let (rho, p) = dynamical_rho(&fa, &fcert, 8, 8).map_err(|e| e.to_string())?;
    let dm = frink_metrize(&rho).map_err(|e| e.to_string())?;
    let r = fa.restrict(&[LatticeVector(vec![1, 0])]);
    let k = coding_constant_finite(&fa, &r, &dm.d, 1.0 / (4.0 * p.alpha), 4, 8).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for big_n in 0..=4 {
        for n in 0..=4 {
            let rep = covering_transfer_check(&fa, &r, k, &dm, p.alpha, big_n, n).map_err(|e| e.to_string())?;
            ensure!(rep.holds, "transfer fails at N = {big_n}, n = {n}: {rep:?}");
            checked += 1;
        }
    }
    Ok(format!("K = {} on 10000 pairs ({} nonvacuous), 0 violations; transfer holds on {checked} (N, n) with K = {k}", cc.k_const, cc.nonvacuous))
}

fn towers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70E5);
    let mut valid = 0;
    let mut tries = 0;
    while valid < 100 {
        tries += 1;
        ensure!(tries < 100_000, "could not draw 100 valid parameter sets");
        let variant = [TowerVariant::Single, TowerVariant::Repeated, TowerVariant::Periodic][rng.gen_range(0..3)];
        let stages = rng.gen_range(1..=3);
        let mut l = vec![1u64];
        l.extend((0..stages).map(|_| rng.gen_range(1..=50u64)));
        let b: Vec<u64> = (0..stages).map(|_| rng.gen_range(1..=4u64)).collect();
        let a: Vec<u64> = b.iter().map(|&v| v + rng.gen_range(0..=2u64)).collect();
        let params = TowerParams { variant, l, b, a };
        if params.validate().is_err() {
            continue;
        }
        for n in 0..=stages {
            let f = free_fraction(&params, n).map_err(|e| e.to_string())?;
            ensure!(f.by_count == f.by_product, "routes disagree for {params:?} at stage {n}");
        }
        valid += 1;
    }
    let bundled = TowerParams { variant: TowerVariant::Periodic, l: vec![1, 40, 40, 40], b: vec![1, 1, 1], a: vec![1, 1, 1] };
    let q = quarter_density_check(&bundled, 1_000_000).map_err(|e| e.to_string())?;
    ensure!(q.failing.is_none(), "quarter density fails at t = {:?}", q.failing);
    let site = TowerSite::new(QuantizedTorus::new(2, 8, Norm::Euclidean).unwrap(), cat()).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    for n in [1usize, 2] {
        let r = minimality_gap_check(TowerVariant::Single, &[1, 2, 2], &site, n, 8, 24, 0x31 + n as u64).map_err(|e| e.to_string())?;
        ensure!(r.holds, "gap {} not below {} at n = {n}", r.max_gap, r.bound);
        gaps.push(format!("n={n}: {:.3} < {:.3}", r.max_gap, r.bound));
    }
    let r = minimality_gap_check(TowerVariant::Periodic, &[1, 2, 2], &site, 2, 2, 24, 0x77).map_err(|e| e.to_string())?;
    ensure!(r.holds, "periodic-variant gap {} not below {}", r.max_gap, r.bound);
    gaps.push(format!("periodic n=2: {:.3}", r.max_gap));
    let (t, c) = q.worst;
    Ok(format!("100 parameter sets agree; 4|[0,t)∩I| > t for t ≤ 10^6 (worst {c}/{t}); gaps {}", gaps.join(", ")))
}

fn sentinels() -> Outcome {
    let mut count = 0;
    // embedding lower bound against metric estimate on matching windows
    let two = Site::Alphabet { size: 2 };
    let ladder = [0.125, 0.0625, 0.03125];
    let mut lw_cases: Vec<(String, f64, f64)> = Vec::new();
    for (name, site) in [
        ("full 2-shift", two.clone()),
        ("circle shift", Site::Torus(QuantizedTorus::new(1, 1024, Norm::Euclidean).unwrap())),
        ("2-torus shift", Site::Torus(QuantizedTorus::new(2, 64, Norm::Euclidean).unwrap())),
    ] {
        let (lb, _) = shift_embedding(&site, 1, 6, &|_| true, 0, 1000, 5).map_err(|e| e.to_string())?;
        let t = scale_entropy_table(&EntropySource::FullShift { site: &site, k: 1 }, &ladder, &[6]).map_err(|e| e.to_string())?;
        let m = metric_mean_dim_estimate(&t).map_err(|e| e.to_string())?;
        let r = lw_inequality_check(&lb, &m.estimate, 1e-9);
        ensure!(r.holds, "{name}: {r:?}");
        lw_cases.push((name.into(), r.mdim_lb, r.metric_ub));
        count += 1;
    }
    let y = build_restricted_y(
        ColumnSite::Finite(ProductShiftSystem { site: Site::Torus(QuantizedTorus::new(2, 64, Norm::Euclidean).unwrap()), h: SiteMap::Toral(cat()) }),
        IndexSetSpec::ArithmeticUnion(vec![(0, 2)]),
        vec![ColumnPoint::Value(0)],
    )
    .map_err(|e| e.to_string())?;
    let site = Site::Torus(QuantizedTorus::new(2, 64, Norm::Euclidean).unwrap());
    let t = scale_entropy_table(&EntropySource::RestrictedShift(&y, &site), &ladder, &[20]).map_err(|e| e.to_string())?;
    let m = metric_mean_dim_estimate(&t).map_err(|e| e.to_string())?;
    let (lb, _) = shift_embedding(&site, 1, 20, &|p| p[0].rem_euclid(2) == 0, 0, 1000, 5).map_err(|e| e.to_string())?;
    let r = lw_inequality_check(&lb, &m.estimate, 1e-9);
    ensure!(r.holds, "restricted torus system: {r:?}");
    count += 1;
    // window contraction on dynamical metrics
    let shift_fa = {
        let sys = ProductShiftSystem { site: two.clone(), h: SiteMap::Identity };
        periodic_product_points(&sys, 5, BaseMetric::Origin, 64).map_err(|e| e.to_string())?.0.restrict(&[LatticeVector(vec![1, 0])])
    };
    let (cat_fa, _) = cat_sample()?;
    let mut alphas = Vec::new();
    for (fa, c) in [(&shift_fa, 0.4), (&cat_fa, 0.2)] {
        let cert = certify_expansive_finite(fa, c, 5).map_err(|e| e.to_string())?;
        let (rho, p) = dynamical_rho(fa, &cert, 8, 8).map_err(|e| e.to_string())?;
        let dm = frink_metrize(&rho).map_err(|e| e.to_string())?;
        for n in 1..=6 {
            let rep = window_contraction_check(&dm, fa, p.alpha, n).map_err(|e| e.to_string())?;
            ensure!(rep.violation.is_none(), "window contraction fails at n = {n}: {rep:?}");
            count += 1;
        }
        alphas.push((p.alpha, cert, dm));
    }
    // main bound with K from the finite sample, h from the toral bracket, lhs from the torus-shift slope
    let (alpha, _, dm) = &alphas[1];
    let r_fa = cat_fa.restrict(&[LatticeVector(vec![1, 0])]);
    let k = coding_constant_finite(&cat_fa, &r_fa, &dm.d, 1.0 / (4.0 * alpha), 4, 8).map_err(|e| e.to_string())?;
    let h = toral_entropy_bracket(&cat(), 2f64.powi(-6), 6).map_err(|e| e.to_string())?;
    let t2 = Site::Torus(QuantizedTorus::new(2, 1 << 10, Norm::Sup).unwrap());
    let t = scale_entropy_table(&EntropySource::FullShift { site: &t2, k: 1 }, &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0], &[4]).map_err(|e| e.to_string())?;
    let lhs = metric_mean_dim_estimate(&t).map_err(|e| e.to_string())?.estimate.ub;
    let mb = main_bound_evaluate(lhs, 2, k, *alpha, h.growth.hi, 1e-9);
    ensure!(mb.holds, "main bound fails: {mb:?}");
    let mb0 = main_bound_evaluate(0.0, 2, k, *alpha, 0.0, 1e-9);
    ensure!(mb0.holds, "main bound fails on the finite sample: {mb0:?}");
    count += 2;
    // Lipschitz endomorphisms
    for endo in [LocalEndo::Identity, LocalEndo::Eca(90), LocalEndo::Eca(110), LocalEndo::Eca(30), LocalEndo::ToralCellwise { m: cat(), q: 256 }] {
        let r = lipschitz_endo_check(&endo, 3, (1, 3), 1e-9, 11).map_err(|e| e.to_string())?;
        ensure!(r.holds && r.commutes, "{endo:?}: {r:?}");
        count += 1;
    }
    Ok(format!("{count} sentinel checks, 0 violations; main bound {:.3} <= {:.1}", mb.lhs_upper, mb.rhs))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("frink metrization suite", Duration::from_secs(30), frink_suite),
        ("weighted chain inequality", Duration::from_secs(10), chain_suite),
        ("full 2-shift scale entropy", Duration::from_secs(60), full_shift),
        ("golden-mean shift", Duration::from_secs(60), golden_mean),
        ("three-term system counts and row embedding", Duration::from_secs(120), three_term),
        ("Banach density", Duration::from_secs(60), densities),
        ("restricted product system targets", Duration::from_secs(180), example_1_9),
        ("toral entropy bracket", Duration::from_secs(60), toral),
        ("coding constant and covering transfer", Duration::from_secs(120), coding),
        ("tower combinatorics", Duration::from_secs(120), towers),
        ("inequality sentinels", Duration::from_secs(300), sentinels),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let el = start.elapsed();
        let out = match out {
            Ok(msg) if el > *budget => Err(format!("{msg}; over budget {:.1}s > {}s", el.as_secs_f64(), budget.as_secs())),
            o => o,
        };
        match out {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{:.2}s]", i + 1, el.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{:.2}s]", i + 1, el.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
