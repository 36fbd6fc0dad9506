//! Quasi-metrics with the 2-max axiom, chain-infimum metrization, and the dynamical
//! quasi-metric `ρ = α^{-n(x,y)}` together with its covering checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansiveness::ExpansivityCertificate;
use crate::lattice_metric::{covering_number_bracket, window_points, CountBracket, LatticeVector, MetricMatrix, Window, DEFAULT_POINT_CAP};
use crate::systems::{window_metric, ConfigWindow, FiniteAction, System};

/// First triple breaking the quasi-metric axioms, if any.
///
/// `(i, j, k)` with `i, j, k` distinct reports `ρ(i,k) > 2·max(ρ(i,j), ρ(j,k))`;
/// `(i, j, j)` reports `ρ(i,j) = 0` for `i ≠ j`.
pub fn verify_quasi_metric(rho: &MetricMatrix) -> Option<(usize, usize, usize)> {
    let n = rho.len();
    for i in 0..n {
        for j in 0..n {
            if i != j && rho.get(i, j) <= 0.0 {
                return Some((i, j, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if rho.get(i, k) > 2.0 * rho.get(i, j).max(rho.get(j, k)) + rho.tol {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrinkMetric {
    pub d: MetricMatrix,
}

/// All-pairs minimal chain weight. Asserts `ρ/4 ≤ D ≤ ρ` on every entry.
pub fn frink_metrize(rho: &MetricMatrix) -> Result<FrinkMetric> {
    if let Some((i, j, k)) = verify_quasi_metric(rho) {
        return Err(Error::QuasiAxiomViolation(i, j, k));
    }
    let n = rho.len();
    let mut d = rho.as_flat().to_vec();
    for m in 0..n {
        for i in 0..n {
            let dim = d[i * n + m];
            for j in 0..n {
                let via = dim + d[m * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let (r, v) = (rho.get(i, j), d[i * n + j]);
            if v > r || v < r / 4.0 - rho.tol {
                return Err(Error::AssertionFailed(format!("sandwich fails at ({i},{j}): rho {r}, D {v}")));
            }
        }
    }
    Ok(FrinkMetric { d: MetricMatrix::from_flat(n, d)? })
}

/// Checks `ρ(x₀,xₙ) ≤ 2ρ(x₀,x₁) + 4Σ_{middle} + 2ρ(x_{n-1},xₙ)`; returns `(lhs, rhs)` on failure.
pub fn chain_inequality_check(rho: &MetricMatrix, chain: &[usize]) -> Option<(f64, f64)> {
    let n = chain.len().checked_sub(1)?;
    if n < 2 {
        return None;
    }
    let w = |i: usize| rho.get(chain[i], chain[i + 1]);
    let middle: f64 = (1..n - 1).map(w).sum();
    let rhs = 2.0 * w(0) + 4.0 * middle + 2.0 * w(n - 1);
    let lhs = rho.get(chain[0], chain[n]);
    if lhs > rhs + rho.tol {
        Some((lhs, rhs))
    } else {
        None
    }
}

/// Seeded random quasi-metric on `n` points: dyadic entries across several scales,
/// then closed under `ρ(i,k) ← min(ρ(i,k), 2·max(ρ(i,j), ρ(j,k)))`.
pub fn random_quasi_metric(n: usize, rng: &mut impl Rng) -> MetricMatrix {
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let e = rng.gen_range(0..8);
            let v = (1 + rng.gen_range(0..1024u32)) as f64 * 2f64.powi(-(10 + e));
            r[i * n + j] = v;
            r[j * n + i] = v;
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == k {
                        continue;
                    }
                    let cand = 2.0 * r[i * n + j].max(r[j * n + k]);
                    if j != i && j != k && cand < r[i * n + k] {
                        r[i * n + k] = cand;
                        r[k * n + i] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    MetricMatrix::from_flat(n, r).expect("symmetric with zero diagonal")
}

/// Seeded random quasi-metric, convenience wrapper.
pub fn random_quasi_metric_seeded(n: usize, seed: u64) -> MetricMatrix {
    random_quasi_metric(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `n(x,y)`: least `n ≤ n_max` with some `|u| ≤ n` and `d(Tᵘx, Tᵘy) ≥ c`; `None` when `x = y`.
pub fn separation_index(sys: &System, cert: &ExpansivityCertificate, x: &ConfigWindow, y: &ConfigWindow, n_max: i64) -> Result<Option<i64>> {
    if x == y {
        return Ok(None);
    }
    for n in 0..=n_max {
        if window_metric(sys, &Window::Box { n, k: sys.rank() }, x, y)? >= cert.c {
            return Ok(Some(n));
        }
    }
    Err(Error::Unresolved(0, 1))
}

/// `n(i,j)` for every pair of a finite subsystem, flat row-major.
pub fn separation_table(fa: &FiniteAction, c: f64, n_max: i64) -> Result<Vec<Option<i64>>> {
    let k = fa.rank();
    let pts = window_points(&Window::Box { n: n_max, k }, DEFAULT_POINT_CAP)?;
    // Distinct orbit maps, each tagged with the least norm realizing it.
    let mut maps: Vec<(i64, Vec<usize>)> = Vec::new();
    let mut sorted: Vec<&LatticeVector> = pts.iter().collect();
    sorted.sort_by_key(|u| u.norm());
    let mut seen = std::collections::HashSet::new();
    for u in sorted {
        let m: Vec<usize> = (0..fa.len()).map(|i| fa.act(u, i)).collect();
        if seen.insert(m.clone()) {
            maps.push((u.norm(), m));
        }
    }
    let n = fa.len();
    let mut out = vec![None; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = maps.iter().find(|(_, m)| fa.base.get(m[i], m[j]) >= c - fa.base.tol).map(|(nn, _)| *nn);
            match v {
                Some(v) => {
                    out[i * n + j] = Some(v);
                    out[j * n + i] = Some(v);
                }
                None => return Err(Error::Unresolved(i, j)),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicalQuasiParams {
    pub c: f64,
    pub l: i64,
    pub alpha: f64,
    pub n_max: i64,
}

/// `ρ = α^{-n(x,y)}` on a finite subsystem with `α = 2^{1/(l+1)}`, `l ≥ 1` least such that
/// every pair with base distance `≥ c/2` separates to `≥ c` within `|u| ≤ l`.
pub fn dynamical_rho(fa: &FiniteAction, cert: &ExpansivityCertificate, l_max: i64, n_max: i64) -> Result<(MetricMatrix, DynamicalQuasiParams)> {
    let c = cert.c;
    let sep = separation_table(fa, c, n_max)?;
    let n = fa.len();
    let mut l = 1;
    for i in 0..n {
        for j in (i + 1)..n {
            if fa.base.get(i, j) >= c / 2.0 - fa.base.tol {
                l = l.max(sep[i * n + j].unwrap());
            }
        }
    }
    if l > l_max {
        return Err(Error::NotFoundWithin(l_max));
    }
    let alpha = 2f64.powf(1.0 / (l + 1) as f64);
    let rho = MetricMatrix::from_fn(n, |i, j| alpha.powi(-(sep[i * n + j].unwrap() as i32)));
    if let Some((a, b, cc)) = verify_quasi_metric(&rho) {
        return Err(Error::QuasiAxiomViolation(a, b, cc));
    }
    Ok((rho, DynamicalQuasiParams { c, l, alpha, n_max }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowContractionReport {
    pub n: i64,
    pub hypotheses: usize,
    pub violation: Option<(usize, usize)>,
}

/// Pairs with `max_{|u|<n} D(Tᵘx, Tᵘy) < 1/(4α)` must have `D(x,y) < α^{-n}`.
pub fn window_contraction_check(dm: &FrinkMetric, fa: &FiniteAction, alpha: f64, n: i64) -> Result<WindowContractionReport> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let pts = window_points(&Window::Box { n: n - 1, k: fa.rank() }, DEFAULT_POINT_CAP)?;
    let w = fa.window_matrix_from(&fa.orbit_table(&pts), &dm.d);
    let thr = 1.0 / (4.0 * alpha);
    let bound = alpha.powi(-(n as i32));
    let mut hypotheses = 0;
    for i in 0..fa.len() {
        for j in 0..fa.len() {
            if w.get(i, j) < thr {
                hypotheses += 1;
                if !(dm.d.get(i, j) < bound) {
                    return Ok(WindowContractionReport { n, hypotheses, violation: Some((i, j)) });
                }
            }
        }
    }
    Ok(WindowContractionReport { n, hypotheses, violation: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub big_n: i64,
    pub n: i64,
    pub k_const: i64,
    pub lhs: CountBracket,
    pub rhs: CountBracket,
    pub holds: bool,
}

/// `#(X, D^R_{[-N,N]^{k-1}}, α^{-n}) ≤ #(X, D^T_{[-KN-n,KN+n]^k}, 1/(4α))` on the sample,
/// checked as `lb(lhs) ≤ ub(rhs)`.
pub fn covering_transfer_check(
    t: &FiniteAction,
    r: &FiniteAction,
    k_const: i64,
    dm: &FrinkMetric,
    alpha: f64,
    big_n: i64,
    n: i64,
) -> Result<TransferReport> {
    let lhs_m = if r.rank() == 0 {
        dm.d.clone()
    } else {
        let pts = window_points(&Window::Box { n: big_n, k: r.rank() }, DEFAULT_POINT_CAP)?;
        r.window_matrix_from(&r.orbit_table(&pts), &dm.d)
    };
    let pts = window_points(&Window::Box { n: k_const * big_n + n, k: t.rank() }, DEFAULT_POINT_CAP)?;
    let rhs_m = t.window_matrix_from(&t.orbit_table(&pts), &dm.d);
    let lhs = covering_number_bracket(&lhs_m, alpha.powi(-(n as i32)));
    let rhs = covering_number_bracket(&rhs_m, 1.0 / (4.0 * alpha));
    Ok(TransferReport { big_n, n, k_const, holds: lhs.lb <= rhs.ub, lhs, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainBoundReport {
    pub lhs_upper: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares an upper metric-mean-dimension estimate against `2(K+1)^k·h_top/log α`.
pub fn main_bound_evaluate(lhs_upper: f64, k: usize, k_const: i64, alpha: f64, h_top_ub: f64, tol: f64) -> MainBoundReport {
    let rhs = 2.0 * ((k_const + 1) as f64).powi(k as i32) * h_top_ub / alpha.ln();
    MainBoundReport { lhs_upper, rhs, holds: lhs_upper <= rhs + tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansiveness::{certify_expansive, certify_expansive_finite, coding_constant_finite, CertMode};
    use crate::systems::{periodic_product_points, BaseMetric, Norm, ProductShiftSystem, QuantizedTorus, SftSystem, Site, SiteMap, ToralAutomorphism};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    /// Minimum over all simple chains from `i` to `j`.
    fn brute_chain_min(rho: &MetricMatrix, i: usize, j: usize) -> f64 {
        fn go(rho: &MetricMatrix, cur: usize, target: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if cur == target {
                *best = best.min(acc);
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

    #[test]
    fn quasi_examples() {
        let m = MetricMatrix::from_rows(&[vec![0.0, 0.3, 1.0], vec![0.3, 0.0, 0.3], vec![1.0, 0.3, 0.0]]).unwrap();
        assert_eq!(verify_quasi_metric(&m), Some((0, 1, 2)));
        let two = MetricMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(verify_quasi_metric(&two), None);
        assert_eq!(frink_metrize(&two).unwrap().d, two);
        let line = MetricMatrix::from_fn(5, |i, j| (i as f64 - j as f64).abs());
        assert_eq!(verify_quasi_metric(&line), None);
        assert_eq!(frink_metrize(&line).unwrap().d, line);
        assert!(frink_metrize(&m).is_err());
    }

    #[test]
    fn four_point_chain() {
        let rows = vec![
            vec![0.0, 0.3, 0.5, 1.0],
            vec![0.3, 0.0, 0.3, 0.5],
            vec![0.5, 0.3, 0.0, 0.3],
            vec![1.0, 0.5, 0.3, 0.0],
        ];
        let rho = MetricMatrix::from_rows(&rows).unwrap();
        let d = frink_metrize(&rho).unwrap().d;
        // 0 → 1 → 3 costs 0.3 + 0.5
        assert!((d.get(0, 3) - 0.8).abs() < 1e-12);
        assert_eq!(d.get(0, 3), brute_chain_min(&rho, 0, 3));
        assert!(d.get(0, 3) >= 0.25 && d.get(0, 3) <= 1.0);
    }

    #[test]
    fn chain_inequality_examples() {
        let rho = random_quasi_metric_seeded(6, 3);
        assert_eq!(chain_inequality_check(&rho, &[2, 2, 2]), None);
        assert_eq!(chain_inequality_check(&rho, &[0, 1, 2]), None);
        assert_eq!(chain_inequality_check(&rho, &[0, 1]), None);
    }

    #[test]
    fn random_metrization_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut nontrivial = 0;
        for _ in 0..60 {
            let n = rng.gen_range(2..=7);
            let rho = random_quasi_metric(n, &mut rng);
            assert_eq!(verify_quasi_metric(&rho), None);
            let d = frink_metrize(&rho).unwrap().d;
            assert!(d.triangle_violation().is_none());
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        assert_eq!(d.get(i, j), brute_chain_min(&rho, i, j));
                        nontrivial += (d.get(i, j) < rho.get(i, j)) as usize;
                    }
                }
            }
        }
        assert!(nontrivial > 0);
    }

    #[test]
    fn separation_examples() {
        let sys = System::Sft(SftSystem::full_shift(1, 2));
        let cert = certify_expansive(&sys, 0.4).unwrap();
        let x = ConfigWindow::constant(1, 8, 0);
        let mut y = x.clone();
        y.values[8 + 3] = 1;
        assert_eq!(separation_index(&sys, &cert, &x, &x, 5).unwrap(), None);
        assert_eq!(separation_index(&sys, &cert, &x, &y, 5).unwrap(), Some(3));
        let mut z = x.clone();
        z.values[8] = 1;
        assert_eq!(separation_index(&sys, &cert, &x, &z, 5).unwrap(), Some(0));
        assert!(separation_index(&sys, &cert, &x, &y, 2).is_err());
    }

    fn shift_sample() -> FiniteAction {
        let sys = ProductShiftSystem { site: Site::Alphabet { size: 2 }, h: SiteMap::Identity };
        periodic_product_points(&sys, 5, BaseMetric::Origin, 64).unwrap().0.restrict(&[LatticeVector(vec![1, 0])])
    }

    #[test]
    fn dynamical_rho_full_shift() {
        let fa = shift_sample();
        let cert = certify_expansive_finite(&fa, 0.4, 5).unwrap();
        let (rho, p) = dynamical_rho(&fa, &cert, 8, 8).unwrap();
        assert_eq!(p.l, 1);
        assert!((p.alpha - 2f64.sqrt()).abs() < 1e-15);
        assert!(p.alpha.powi(p.l as i32) < 2.0);
        for i in 0..fa.len() {
            for j in 0..fa.len() {
                let v = rho.get(i, j);
                if i != j {
                    let e = -v.ln() / p.alpha.ln();
                    assert!((e - e.round()).abs() < 1e-9);
                }
            }
        }
        let one = FiniteAction::identity(MetricMatrix::from_rows(&[vec![0.0]]).unwrap(), 1);
        let c1 = ExpansivityCertificate { c: 0.4, mode: CertMode::Empirical, n_max: 1, pairs_checked: 0 };
        assert_eq!(dynamical_rho(&one, &c1, 4, 4).unwrap().0.len(), 1);
    }

    #[test]
    fn window_contraction_full_shift() {
        let fa = shift_sample();
        let cert = certify_expansive_finite(&fa, 0.4, 5).unwrap();
        let (rho, p) = dynamical_rho(&fa, &cert, 8, 8).unwrap();
        let dm = frink_metrize(&rho).unwrap();
        for n in 1..=6 {
            let r = window_contraction_check(&dm, &fa, p.alpha, n).unwrap();
            assert_eq!(r.violation, None, "n = {n}");
            assert!(r.hypotheses >= fa.len());
        }
    }

    #[test]
    fn transfer_on_cat_map_sample() {
        let t = QuantizedTorus::new(2, 2, Norm::Euclidean).unwrap();
        let sys = ProductShiftSystem { site: Site::Torus(t), h: SiteMap::Toral(ToralAutomorphism::new(vec![vec![2, 1], vec![1, 1]]).unwrap()) };
        let (fa, _) = periodic_product_points(&sys, 4, BaseMetric::Origin, 512).unwrap();
        let cert = certify_expansive_finite(&fa, 0.2, 4).unwrap();
        let (rho, p) = dynamical_rho(&fa, &cert, 8, 8).unwrap();
        let dm = frink_metrize(&rho).unwrap();
        let r = fa.restrict(&[LatticeVector(vec![1, 0])]);
        let thr = 1.0 / (4.0 * p.alpha);
        let k = coding_constant_finite(&fa, &r, &dm.d, thr, 4, 8).unwrap();
        for big_n in 1..=2 {
            for n in 0..=2 {
                let rep = covering_transfer_check(&fa, &r, k, &dm, p.alpha, big_n, n).unwrap();
                assert!(rep.holds, "{rep:?}");
            }
        }
        let triv = FiniteAction::new(vec![], fa.base.clone()).unwrap();
        let rep = covering_transfer_check(&fa, &triv, k, &dm, p.alpha, 1, 3).unwrap();
        assert!(rep.holds);
    }

    #[test]
    fn main_bound_examples() {
        let r = main_bound_evaluate(0.0, 2, 1, 2f64.sqrt(), 0.0, 1e-9);
        assert!(r.holds && r.rhs == 0.0);
        let r = main_bound_evaluate(0.3, 1, 2, 2f64.sqrt(), 2f64.ln(), 1e-9);
        assert!((r.rhs - 2.0 * 3.0 * 2.0).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn metrization_sandwich(seed in any::<u64>(), n in 2usize..=12) {
            let rho = random_quasi_metric_seeded(n, seed);
            let d = frink_metrize(&rho).unwrap().d;
            prop_assert!(d.triangle_violation().is_none());
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(d.get(i, j) <= rho.get(i, j));
                    prop_assert!(4.0 * d.get(i, j) >= rho.get(i, j));
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    prop_assert_eq!(d.get(i, j) == 0.0, i == j);
                }
            }
        }

        #[test]
        fn weighted_chain_inequality(seed in any::<u64>(), n in 2usize..=12, len in 3usize..=10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_quasi_metric(n, &mut rng);
            let chain: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n)).collect();
            prop_assert_eq!(chain_inequality_check(&rho, &chain), None);
        }
    }
}
