//! Expansivity constants, moduli, boundary gaps and coding constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_metric::{
    chain_component_split, cover_order, covering_witness, mesh, window_points, Cover, LatticeVector, MetricMatrix, Window,
    DEFAULT_EXACT_CAP, DEFAULT_POINT_CAP,
};
use crate::systems::{FiniteAction, ProductShiftSystem, Site, SiteMap, SitePerm, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    AnalyticSft,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityCertificate {
    pub c: f64,
    pub mode: CertMode,
    /// Search window radius for empirical certificates (0 for analytic ones).
    pub n_max: i64,
    pub pairs_checked: usize,
}

/// Analytic certificate for shift-type systems: a differing site shifted to the origin
/// realizes the minimal site gap, so any `c` with `gap > 2c` works.
pub fn certify_expansive(sys: &System, c: f64) -> Result<ExpansivityCertificate> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput("c must be positive".into()));
    }
    let gap = sys.site().min_gap();
    if sys.site().size() > 1 && gap <= 2.0 * c {
        return Err(Error::Inconclusive(format!("site gap {gap} does not exceed 2c = {}", 2.0 * c)));
    }
    Ok(ExpansivityCertificate { c, mode: CertMode::AnalyticSft, n_max: 0, pairs_checked: 0 })
}

/// Exhaustive check on a finite subsystem: every pair must reach base distance `> 2c`
/// somewhere in `[-n_max, n_max]^k`.
pub fn certify_expansive_finite(fa: &FiniteAction, c: f64, n_max: i64) -> Result<ExpansivityCertificate> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput("c must be positive".into()));
    }
    let w = fa.window_matrix_of(&Window::Box { n: n_max, k: fa.rank() })?;
    let n = fa.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if w.get(i, j) <= 2.0 * c {
                return Err(Error::CounterexampleFound(i, j));
            }
        }
    }
    Ok(ExpansivityCertificate { c, mode: CertMode::Empirical, n_max, pairs_checked: n * n.saturating_sub(1) / 2 })
}

/// Mass of `Σ_{n ∈ ℤ^k} 2^{-|n|₁}` outside `[-m, m]^k`.
pub fn weighted_tail(k: usize, m: i64) -> f64 {
    3f64.powi(k as i32) - (3.0 - 2f64.powi(1 - m as i32)).powi(k as i32)
}

/// Smallest `m ≥ 1` with `d_{[-m,m]^k}(x,y) ≤ 2c ⇒ d(x,y) < ε` under the weighted metric.
///
/// With an analytic certificate, closeness on the window forces agreement on `[-m,m]`, so
/// the worst case is a pair differing everywhere outside, at distance `tail(m)·diam`.
pub fn modulus_of_expansivity(sys: &System, cert: &ExpansivityCertificate, eps: f64, m_max: i64) -> Result<i64> {
    if cert.mode != CertMode::AnalyticSft {
        return Err(Error::InvalidInput("weighted modulus needs an analytic certificate".into()));
    }
    let k = sys.config_rank();
    let diam = sys.site().diameter();
    (1..=m_max).find(|&m| weighted_tail(k, m) * diam < eps).ok_or(Error::NotFoundWithin(m_max))
}

/// Empirical modulus on a finite subsystem: every pair with window distance `≤ 2c`
/// has base distance `< ε`.
pub fn modulus_finite(fa: &FiniteAction, cert: &ExpansivityCertificate, eps: f64, m_max: i64) -> Result<i64> {
    for m in 1..=m_max {
        let w = fa.window_matrix_of(&Window::Box { n: m, k: fa.rank() })?;
        let n = fa.len();
        let ok = (0..n).all(|i| (0..n).all(|j| w.get(i, j) > 2.0 * cert.c || fa.base.get(i, j) < eps));
        if ok {
            return Ok(m);
        }
    }
    Err(Error::NotFoundWithin(m_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub entries: Vec<(f64, i64)>,
}

pub fn modulus_table(sys: &System, cert: &ExpansivityCertificate, eps: &[f64], m_max: i64) -> Result<ModulusTable> {
    let entries = eps.iter().map(|&e| modulus_of_expansivity(sys, cert, e, m_max).map(|m| (e, m))).collect::<Result<_>>()?;
    Ok(ModulusTable { entries })
}

impl ModulusTable {
    pub fn is_monotone(&self) -> bool {
        self.entries
            .iter()
            .all(|&(e1, m1)| self.entries.iter().all(|&(e2, m2)| !(e1 < e2) || m1 >= m2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGap {
    /// `None` when no sampled pair enters the band `[c, 2c]`.
    pub delta: Option<f64>,
    pub n_lo: i64,
    pub n_hi: i64,
    pub band_pairs: usize,
}

/// Minimum boundary-window distance over pairs whose box distance lies in `[c, 2c]`.
pub fn boundary_gap(fa: &FiniteAction, cert: &ExpansivityCertificate, n_lo: i64, n_hi: i64) -> Result<BoundaryGap> {
    let c = cert.c;
    let k = fa.rank();
    let mut delta: Option<f64> = None;
    let mut band_pairs = 0;
    for n in n_lo.max(0)..=n_hi {
        let full = fa.window_matrix_of(&Window::Box { n, k })?;
        let bd = fa.window_matrix_of(&Window::Boundary { n, k })?;
        for i in 0..fa.len() {
            for j in (i + 1)..fa.len() {
                let d = full.get(i, j);
                if d >= c - full.tol && d <= 2.0 * c + full.tol {
                    band_pairs += 1;
                    let b = bd.get(i, j);
                    if b <= bd.tol {
                        return Err(Error::GapCollapse { n });
                    }
                    delta = Some(delta.map_or(b, |x: f64| x.min(b)));
                }
            }
        }
    }
    Ok(BoundaryGap { delta, n_lo, n_hi, band_pairs })
}

/// Output of the boundary-refinement construction of a small-order cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidimBound {
    pub order: usize,
    pub formula_bound: u128,
    pub mesh: f64,
    pub base_cover_size: usize,
}

fn as_partition(c: &Cover) -> Vec<usize> {
    let mut label = vec![usize::MAX; c.n_points];
    for (s, set) in c.sets.iter().enumerate() {
        for &p in set {
            if label[p] == usize::MAX {
                label[p] = s;
            }
        }
    }
    label
}

/// Builds the join of the boundary pullbacks of a base cover of mesh `< δ`, splits it
/// into `c`-chain components under the box metric, and checks mesh `≤ 2c` and the order bound.
pub fn widim_upper_via_boundary(fa: &FiniteAction, cert: &ExpansivityCertificate, gap: &BoundaryGap, n: i64) -> Result<WidimBound> {
    let k = fa.rank();
    let c = cert.c;
    if fa.is_empty() {
        return Ok(WidimBound { order: 0, formula_bound: 0, mesh: 0.0, base_cover_size: 0 });
    }
    let base = match gap.delta {
        Some(d) => covering_witness(&fa.base, d, DEFAULT_EXACT_CAP),
        None => Cover::trivial(fa.len()),
    };
    let labels = as_partition(&base);
    let bd_pts = window_points(&Window::Boundary { n, k }, DEFAULT_POINT_CAP)?;
    let orbits = fa.orbit_table(&bd_pts);
    let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..fa.len() {
        let key: Vec<usize> = orbits.iter().map(|o| labels[o[i]]).collect();
        groups.entry(key).or_default().push(i);
    }
    let joined = Cover::new(fa.len(), groups.into_values().collect())?;
    let box_metric = fa.window_matrix_of(&Window::Box { n, k })?;
    let split = chain_component_split(&joined, &box_metric, c);
    let m = mesh(&split, &box_metric);
    if m > 2.0 * c + box_metric.tol {
        return Err(Error::AssertionFailed(format!("split cover mesh {m} exceeds 2c = {}", 2.0 * c)));
    }
    let order = cover_order(&split)?;
    let formula_bound = 2u128.pow(k as u32) * (2 * n as u128 + 1).pow(k as u32 - 1) * base.len() as u128;
    if order as u128 > formula_bound {
        return Err(Error::AssertionFailed(format!("order {order} exceeds {formula_bound}")));
    }
    Ok(WidimBound { order, formula_bound, mesh: m, base_cover_size: base.len() })
}

/// Operator norm (largest singular value) of a small integer matrix.
pub fn operator_norm(m: &[Vec<i64>]) -> f64 {
    let r = m.len();
    let mut mtm = vec![vec![0.0f64; r]; r];
    for i in 0..r {
        for j in 0..r {
            mtm[i][j] = (0..r).map(|t| (m[t][i] * m[t][j]) as f64).sum();
        }
    }
    // Power iteration on MᵀM.
    let mut v = vec![1.0f64; r];
    let mut lam = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..r).map(|i| (0..r).map(|j| mtm[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = norm;
        v = w.iter().map(|x| x / norm).collect();
    }
    lam.sqrt()
}

/// Lipschitz constant of `σ^a h^b` for the weighted metric on `site^ℤ`.
pub fn weighted_lipschitz(sys: &ProductShiftSystem, u: &LatticeVector) -> f64 {
    let h_lip = match &sys.h {
        SiteMap::Identity | SiteMap::Permutation(_) => 1.0,
        SiteMap::Toral(t) => {
            let fwd = operator_norm(&t.m);
            let inv = operator_norm(&t.inverse().m);
            if u.0[1] >= 0 {
                fwd
            } else {
                inv
            }
        }
    };
    2f64.powi(u.0[0].abs() as i32) * h_lip.max(1.0).powi(u.0[1].abs() as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingConstant {
    pub k_const: i64,
    /// Continuity modulus of the R generators at output `2c`.
    pub eps: f64,
    pub lipschitz: f64,
    pub n_max: i64,
    pub pairs_checked: usize,
    /// Pairs for which the hypothesis held for at least one `N`.
    pub nonvacuous: usize,
    pub violations: usize,
    pub seed: u64,
}

/// Weighted distances `Σ_n 2^{-|n-a|} e_n` for every shift `a` of the sample, via two sweeps.
fn shifted_weighted_sums(e: &[f64]) -> Vec<f64> {
    let len = e.len();
    let mut left = vec![0.0; len];
    let mut right = vec![0.0; len];
    for a in 0..len {
        left[a] = e[a] + if a > 0 { left[a - 1] / 2.0 } else { 0.0 };
    }
    for a in (0..len).rev() {
        right[a] = if a + 1 < len { (right[a + 1] + e[a + 1]) / 2.0 } else { 0.0 };
    }
    left.iter().zip(&right).map(|(l, r)| l + r).collect()
}

/// Per `(a, b)` weighted distance of `σ^a h^b x` and `σ^a h^b y` for `|a|, |b| ≤ w`.
/// Inputs are value vectors on `[-radius, radius]`; the unseen tail is added as an upper bound.
struct OrbitProfile {
    w: i64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl OrbitProfile {
    fn new(site: &Site, perm: &SitePerm, x: &[u32], y: &[u32], radius: i64, w: i64) -> Self {
        let side = (2 * w + 1) as usize;
        let mut lo = vec![0.0; side * side];
        let mut hi = vec![0.0; side * side];
        let tail_margin = radius - w;
        let tail = 2f64.powi(1 - tail_margin as i32) * site.diameter();
        for b in -w..=w {
            let e: Vec<f64> = x.iter().zip(y).map(|(&p, &q)| site.dist(perm.pow(p, b), perm.pow(q, b))).collect();
            let sums = shifted_weighted_sums(&e);
            for a in -w..=w {
                let s = sums[(a + radius) as usize];
                let idx = (a + w) as usize * side + (b + w) as usize;
                lo[idx] = s;
                hi[idx] = s + tail;
            }
        }
        OrbitProfile { w, lo, hi }
    }

    /// Interval for the sup over the given lattice points.
    fn sup(&self, pts: impl Iterator<Item = (i64, i64)>) -> (f64, f64) {
        let side = (2 * self.w + 1) as usize;
        let mut out = (0.0f64, 0.0f64);
        for (a, b) in pts {
            let idx = (a + self.w) as usize * side + (b + self.w) as usize;
            out.0 = out.0.max(self.lo[idx]);
            out.1 = out.1.max(self.hi[idx]);
        }
        out
    }
}

/// Coding constant for `R` generated by lattice vectors of `T = (σ, h_ℤ)`, with the weighted
/// metric on `site^ℤ`; the implication is verified on seeded sampled pairs for `N ≤ n_max`.
pub fn coding_constant(
    sys: &ProductShiftSystem,
    r_basis: &[LatticeVector],
    cert: &ExpansivityCertificate,
    n_max: i64,
    pairs: usize,
    seed: u64,
) -> Result<CodingConstant> {
    let c = cert.c;
    if r_basis.iter().any(|v| v.rank() != 2) {
        return Err(Error::RankMismatch { expected: 2, got: r_basis.iter().map(|v| v.rank()).find(|&r| r != 2).unwrap_or(0) });
    }
    if r_basis.is_empty() || r_basis.iter().all(|v| v.norm() == 0) {
        return Ok(CodingConstant { k_const: 1, eps: f64::INFINITY, lipschitz: 0.0, n_max, pairs_checked: 0, nonvacuous: 0, violations: 0, seed });
    }
    let lipschitz = r_basis
        .iter()
        .flat_map(|v| [v.clone(), v.neg()])
        .map(|v| weighted_lipschitz(sys, &v))
        .fold(1.0, f64::max);
    let eps = 2.0 * c / lipschitz;
    let whole = System::Product(sys.clone());
    let k_const = modulus_of_expansivity(&whole, cert, eps, 64)?;
    let perm = SitePerm::new(&sys.site, &sys.h)?;
    let max_r = r_basis.iter().map(|v| v.norm()).max().unwrap_or(0);
    let w = (k_const * n_max).max(max_r * n_max);
    let radius = w + 64;
    let len = (2 * radius + 1) as usize;
    let s = sys.site.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_points: Vec<Vec<(i64, i64)>> = (1..=n_max)
        .map(|nn| {
            window_points(&Window::Box { n: nn, k: 1 }, DEFAULT_POINT_CAP)
                .unwrap()
                .iter()
                .map(|j| {
                    let v = r_basis[0].0.iter().map(|x| x * j.0[0]).collect::<Vec<_>>();
                    (v[0], v[1])
                })
                .collect()
        })
        .collect();
    if r_basis.len() != 1 {
        return Err(Error::RankMismatch { expected: 1, got: r_basis.len() });
    }
    let (mut nonvacuous, mut violations) = (0, 0);
    for p in 0..pairs {
        let x: Vec<u32> = (0..len).map(|_| rng.gen_range(0..s)).collect();
        let mut y = x.clone();
        // Half the pairs differ only beyond a random distance from the origin.
        let near = if p % 2 == 0 { rng.gen_range(0..=radius) } else { 0 };
        let flips = rng.gen_range(1..=4);
        for _ in 0..flips {
            let mut pos = rng.gen_range(near..=radius);
            if rng.gen_bool(0.5) {
                pos = -pos;
            }
            let idx = (pos + radius) as usize;
            y[idx] = (y[idx] + rng.gen_range(1..s.max(2))) % s.max(1);
        }
        let prof = OrbitProfile::new(&sys.site, &perm, &x, &y, radius, w);
        let mut any = false;
        for nn in 1..=n_max {
            let kn = k_const * nn;
            let t_box = (-kn..=kn).flat_map(|a| (-kn..=kn).map(move |b| (a, b)));
            let (_, t_hi) = prof.sup(t_box);
            if t_hi <= 2.0 * c {
                any = true;
                let (r_lo, _) = prof.sup(r_points[(nn - 1) as usize].iter().copied());
                if r_lo > 2.0 * c {
                    violations += 1;
                }
            }
        }
        nonvacuous += any as usize;
    }
    Ok(CodingConstant { k_const, eps, lipschitz, n_max, pairs_checked: pairs, nonvacuous, violations, seed })
}

/// Smallest `K ≤ k_max` such that on the finite subsystem, for all pairs and `N ≤ n_max`,
/// `d^T_{[-KN,KN]^k} < thr ⇒ d^R_{[-N,N]^{k'}} < thr`, with `R` given by its own generators.
pub fn coding_constant_finite(
    t: &FiniteAction,
    r: &FiniteAction,
    base: &MetricMatrix,
    thr: f64,
    n_max: i64,
    k_max: i64,
) -> Result<i64> {
    if t.len() != r.len() {
        return Err(Error::MismatchedPointSets(t.len(), r.len()));
    }
    for a in 0..t.rank() {
        for b in 0..r.rank() {
            if (0..t.len()).any(|i| t.gens[a][r.gens[b][i]] != r.gens[b][t.gens[a][i]]) {
                return Err(Error::NonCommuting);
            }
        }
    }
    if r.rank() == 0 {
        return Ok(1);
    }
    let r_mats: Vec<MetricMatrix> = (1..=n_max)
        .map(|nn| {
            let pts = window_points(&Window::Box { n: nn, k: r.rank() }, DEFAULT_POINT_CAP)?;
            Ok(r.window_matrix_from(&r.orbit_table(&pts), base))
        })
        .collect::<Result<_>>()?;
    'k: for kc in 1..=k_max {
        for nn in 1..=n_max {
            let pts = window_points(&Window::Box { n: kc * nn, k: t.rank() }, DEFAULT_POINT_CAP)?;
            let tm = t.window_matrix_from(&t.orbit_table(&pts), base);
            let rm = &r_mats[(nn - 1) as usize];
            for i in 0..t.len() {
                for j in (i + 1)..t.len() {
                    if tm.get(i, j) < thr && rm.get(i, j) >= thr {
                        continue 'k;
                    }
                }
            }
        }
        return Ok(kc);
    }
    Err(Error::NotFoundWithin(k_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_metric::MetricMatrix;
    use crate::systems::{
        build_three_term_system, periodic_product_points, periodic_sft_points, BaseMetric, Norm, QuantizedTorus, SftSystem,
        ToralAutomorphism,
    };
    use proptest::prelude::*;

    fn full2() -> System {
        System::Sft(SftSystem::full_shift(1, 2))
    }

    /// Worst pair agreeing on `[-m, m]` and differing everywhere else, summed directly.
    fn brute_tail(m: i64) -> f64 {
        (-200i64..=200).filter(|n| n.abs() > m).map(|n| 0.5f64.powi(n.abs() as i32)).sum()
    }

    #[test]
    fn analytic_certificates() {
        assert!(certify_expansive(&full2(), 0.4).is_ok());
        assert!(certify_expansive(&full2(), 0.5).is_err());
        let s13 = System::Sft(build_three_term_system(4).unwrap());
        assert!(certify_expansive(&s13, 0.1).is_ok());
        assert!(certify_expansive(&s13, 0.2).is_err());
    }

    #[test]
    fn identity_action_has_counterexample() {
        let base = MetricMatrix::from_rows(&[vec![0.0, 0.6], vec![0.6, 0.0]]).unwrap();
        let fa = FiniteAction::identity(base, 1);
        assert!(certify_expansive_finite(&fa, 0.2, 3).is_ok());
        assert_eq!(certify_expansive_finite(&fa, 0.3, 3), Err(Error::CounterexampleFound(0, 1)));
    }

    #[test]
    fn three_term_exhaustive_certificate() {
        let s = build_three_term_system(4).unwrap();
        let (fa, _) = periodic_sft_points(&s, &[6, 6], BaseMetric::Origin, 1 << 16).unwrap();
        let cert = certify_expansive_finite(&fa, 0.1, 6).unwrap();
        assert!(cert.pairs_checked > 0);
    }

    #[test]
    fn modulus_examples() {
        let cert = certify_expansive(&full2(), 0.4).unwrap();
        assert_eq!(modulus_of_expansivity(&full2(), &cert, 0.1, 64).unwrap(), 5);
        assert_eq!(modulus_of_expansivity(&full2(), &cert, 0.5, 64).unwrap(), 3);
        assert_eq!(modulus_of_expansivity(&full2(), &cert, 3.5, 64).unwrap(), 1);
        for (eps, m) in [(0.1, 5), (0.5, 3), (0.01, 8), (0.3, 3)] {
            let oracle = (1..64).find(|&m| brute_tail(m) < eps).unwrap();
            assert_eq!(oracle, m);
        }
        assert!(modulus_of_expansivity(&full2(), &cert, 1e-30, 10).is_err());
    }

    #[test]
    fn finite_modulus_matches_expectation() {
        let sys = ProductShiftSystem { site: Site::Alphabet { size: 2 }, h: SiteMap::Identity };
        let (fa, _) = periodic_product_points(&sys, 4, BaseMetric::Weighted, 64).unwrap();
        let cert = certify_expansive_finite(&fa, 0.4, 2).unwrap();
        let m = modulus_finite(&fa, &cert, 0.1, 8).unwrap();
        assert!(m >= 1 && m <= 2);
    }

    #[test]
    fn boundary_gap_examples() {
        // full 2-shift: the band is empty under the discrete metric
        let sys = ProductShiftSystem { site: Site::Alphabet { size: 2 }, h: SiteMap::Identity };
        let (fa, _) = periodic_product_points(&sys, 5, BaseMetric::Origin, 64).unwrap();
        let cert = ExpansivityCertificate { c: 0.4, mode: CertMode::AnalyticSft, n_max: 0, pairs_checked: 0 };
        let g = boundary_gap(&fa, &cert, 1, 3).unwrap();
        assert_eq!(g.delta, None);
        assert_eq!(g.band_pairs, 0);
    }

    #[test]
    fn boundary_gap_three_term_weighted() {
        let s = build_three_term_system(4).unwrap();
        let (fa, _) = periodic_sft_points(&s, &[6, 6], BaseMetric::Weighted, 1 << 16).unwrap();
        let cert = ExpansivityCertificate { c: 0.1, mode: CertMode::Empirical, n_max: 4, pairs_checked: 0 };
        let g = boundary_gap(&fa, &cert, 1, 4).unwrap();
        if let Some(d) = g.delta {
            assert!(d >= 0.25 / 4.0);
        }
    }

    #[test]
    fn widim_construction_examples() {
        let one = FiniteAction::identity(MetricMatrix::from_rows(&[vec![0.0]]).unwrap(), 1);
        let cert = ExpansivityCertificate { c: 0.4, mode: CertMode::AnalyticSft, n_max: 0, pairs_checked: 0 };
        let g = boundary_gap(&one, &cert, 1, 1).unwrap();
        assert_eq!(widim_upper_via_boundary(&one, &cert, &g, 1).unwrap().order, 0);

        let s = build_three_term_system(3).unwrap();
        let (fa, _) = periodic_sft_points(&s, &[3, 3], BaseMetric::Weighted, 1 << 16).unwrap();
        let cert = ExpansivityCertificate { c: 0.1, mode: CertMode::Empirical, n_max: 2, pairs_checked: 0 };
        let g = boundary_gap(&fa, &cert, 1, 2).unwrap();
        let w = widim_upper_via_boundary(&fa, &cert, &g, 2).unwrap();
        assert!(w.mesh <= 0.2 + 1e-12);
        assert!(w.order as u128 <= 4 * 5 * w.base_cover_size as u128);
    }

    #[test]
    fn operator_norm_cat_map() {
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((operator_norm(&[vec![2, 1], vec![1, 1]]) - phi2).abs() < 1e-9);
        assert!((operator_norm(&[vec![1, 0], vec![0, 1]]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sliding_sums_match_direct() {
        let e = [0.0, 1.0, 0.5, 0.0, 0.25, 1.0, 0.0];
        let s = shifted_weighted_sums(&e);
        for a in 0..e.len() {
            let direct: f64 = e.iter().enumerate().map(|(n, v)| v * 0.5f64.powi((n as i64 - a as i64).abs() as i32)).sum();
            assert!((s[a] - direct).abs() < 1e-12);
        }
    }

    fn cat_system(q: u32) -> ProductShiftSystem {
        ProductShiftSystem {
            site: Site::Torus(QuantizedTorus::new(2, q, Norm::Euclidean).unwrap()),
            h: SiteMap::Toral(ToralAutomorphism::new(vec![vec![2, 1], vec![1, 1]]).unwrap()),
        }
    }

    #[test]
    fn coding_constant_sigma() {
        let sys = cat_system(4);
        let cert = certify_expansive(&System::Product(sys.clone()), 0.1).unwrap();
        let cc = coding_constant(&sys, &[LatticeVector(vec![1, 0])], &cert, 3, 300, 7).unwrap();
        assert_eq!(cc.violations, 0);
        assert!(cc.k_const >= 1);
        assert!(cc.nonvacuous > 0);
        let triv = coding_constant(&sys, &[], &cert, 3, 10, 7).unwrap();
        assert_eq!(triv.k_const, 1);
    }

    #[test]
    fn finite_coding_constant_first_generator() {
        let sys = cat_system(2);
        let (fa, _) = periodic_product_points(&sys, 3, BaseMetric::Origin, 512).unwrap();
        let r = fa.restrict(&[LatticeVector(vec![1, 0])]);
        assert_eq!(coding_constant_finite(&fa, &r, &fa.base, 0.3, 3, 4).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn modulus_is_monotone(a in 1e-6f64..4.0, b in 1e-6f64..4.0) {
            let cert = certify_expansive(&full2(), 0.4).unwrap();
            let t = modulus_table(&full2(), &cert, &[a, b], 80).unwrap();
            prop_assert!(t.is_monotone());
        }
    }
}
