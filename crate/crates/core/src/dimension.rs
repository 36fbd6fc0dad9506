//! Entropy and mean-dimension estimators reported as brackets over finite grids.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansiveness::operator_norm;
use crate::lattice_metric::{covering_number_bracket, window_points, MetricMatrix, Window, DEFAULT_POINT_CAP};
use crate::systems::{
    count_patterns, ColumnSite, FiniteAction, IndexSetSpec, Interval, ProductShiftSystem, QuantizedTorus, Rect,
    RestrictedSystem, Rule, SftSystem, Site, SitePerm, ToralAutomorphism,
};

const LN_2: f64 = std::f64::consts::LN_2;

/// Natural log of an arbitrarily large integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().unwrap().ln()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().unwrap().ln() + shift as f64 * LN_2
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Bracket on `ln #(X, d_window, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBracket {
    pub lb: f64,
    pub ub: f64,
    pub exact: bool,
}

impl LogBracket {
    fn exact(v: f64) -> Self {
        LogBracket { lb: v, ub: v, exact: true }
    }
}

/// `[packing, covering]` for `q` equally spaced points on a circle of circumference 1.
///
/// Arcs of `m = ⌈εq⌉` consecutive points have diameter `< ε`; points `m` apart are `ε`-separated.
pub fn circle_cover_bracket(q: u32, eps: f64) -> (u64, u64) {
    if eps > 0.5 {
        return (1, 1);
    }
    let m = ((eps * q as f64).ceil() as u64).clamp(1, q as u64);
    let q = q as u64;
    ((q / m).max(1), q.div_ceil(m))
}

/// `[packing, covering]` bracket of a site at scale `ε`.
pub fn site_cover_bracket(site: &Site, eps: f64) -> (u64, u64) {
    match site {
        Site::Alphabet { size } => {
            if eps <= 1.0 {
                (*size as u64, *size as u64)
            } else {
                (1, 1)
            }
        }
        Site::Torus(t) => {
            let r = t.r as u32;
            match (t.norm, t.r) {
                (_, 1) | (crate::systems::Norm::Sup, _) => {
                    let (lo, hi) = circle_cover_bracket(t.q, eps);
                    (lo.pow(r), hi.pow(r))
                }
                _ => {
                    let (lo, _) = circle_cover_bracket(t.q, eps);
                    let (_, hi) = circle_cover_bracket(t.q, eps / (t.r as f64).sqrt());
                    (lo.pow(r), hi.pow(r))
                }
            }
        }
    }
}

/// Covering dimension of the continuum site modeled by `site`.
pub fn topological_dim(site: &Site) -> f64 {
    match site {
        Site::Alphabet { .. } => 0.0,
        Site::Torus(t) => t.r as f64,
    }
}

/// What a scale-entropy table is computed on.
#[derive(Debug, Clone, Copy)]
pub enum EntropySource<'a> {
    /// Finite-alphabet subshift, discrete site metric; exact pattern counts.
    Symbolic(&'a SftSystem),
    /// Full shift over any site with the sup window metric; product brackets.
    FullShift { site: &'a Site, k: usize },
    /// Finite subsystem with a tabulated base metric.
    Finite(&'a FiniteAction),
    /// Restricted system under the ℤ² action, discrete columns; exact counts.
    Restricted(&'a RestrictedSystem),
    /// Restricted system under the column shift alone, with the site metric on columns.
    RestrictedShift(&'a RestrictedSystem, &'a Site),
}

impl EntropySource<'_> {
    pub fn rank(&self) -> usize {
        match self {
            EntropySource::Symbolic(s) => s.k,
            EntropySource::FullShift { k, .. } => *k,
            EntropySource::Finite(f) => f.rank(),
            EntropySource::Restricted(_) => 2,
            EntropySource::RestrictedShift(..) => 1,
        }
    }

    fn cell(&self, eps: f64, n: i64) -> Result<LogBracket> {
        match self {
            EntropySource::Symbolic(sys) => {
                if !matches!(sys.site, Site::Alphabet { .. }) {
                    return Err(Error::InvalidInput("symbolic source needs an alphabet site".into()));
                }
                if eps > 1.0 {
                    return Ok(LogBracket::exact(0.0));
                }
                Ok(LogBracket::exact(ln_big(&count_patterns(sys, &Rect::centered(n, sys.k), 1 << 20)?)))
            }
            EntropySource::FullShift { site, k } => {
                let w = ((2 * n + 1) as f64).powi(*k as i32);
                let (lo, hi) = site_cover_bracket(site, eps);
                Ok(LogBracket { lb: w * (lo as f64).ln(), ub: w * (hi as f64).ln(), exact: lo == hi })
            }
            EntropySource::Finite(fa) => {
                let m = fa.window_matrix_of(&Window::Box { n, k: fa.rank() })?;
                let b = covering_number_bracket(&m, eps);
                Ok(LogBracket { lb: (b.lb as f64).ln(), ub: (b.ub as f64).ln(), exact: b.exact })
            }
            EntropySource::Restricted(y) => {
                let gap = match &y.base {
                    ColumnSite::Finite(p) => p.site.min_gap(),
                    ColumnSite::FullShift { .. } => 1.0,
                };
                if eps > gap {
                    return Err(Error::InvalidInput("exact restricted counts need ε at most the site gap".into()));
                }
                Ok(LogBracket::exact(ln_big(&y.count_patterns(-n, n, 2 * n + 1)?)))
            }
            EntropySource::RestrictedShift(y, site) => {
                let (sf_lo, sf_hi) = site_cover_bracket(site, eps);
                let a_pts: Vec<u32> = y
                    .a
                    .iter()
                    .map(|p| match p {
                        crate::systems::ColumnPoint::Value(v) => Ok(*v),
                        _ => Err(Error::InvalidInput("column-shift source needs value points in A".into())),
                    })
                    .collect::<Result<_>>()?;
                let (sa_lo, sa_hi) = if a_pts.is_empty() {
                    (0u64, 0u64)
                } else {
                    let m = MetricMatrix::from_fn(a_pts.len(), |i, j| site.dist(a_pts[i], a_pts[j]));
                    let b = covering_number_bracket(&m, eps);
                    (b.lb, b.ub)
                };
                let fam = y.free_column_families(-n, n);
                let w = (2 * n + 1) as f64;
                let terms = |f: u64, a: u64| -> Vec<f64> {
                    fam.iter()
                        .map(|s| {
                            let free = s.iter().filter(|&&b| b).count() as f64;
                            let fixed = w - free;
                            let la = if fixed > 0.0 { fixed * (a as f64).ln() } else { 0.0 };
                            free * (f as f64).ln() + la
                        })
                        .collect()
                };
                let lb = terms(sf_lo, sa_lo).into_iter().fold(f64::NEG_INFINITY, f64::max);
                let ub = log_sum_exp(&terms(sf_hi, sa_hi));
                Ok(LogBracket { lb, ub, exact: false })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    pub k: usize,
    pub eps: Vec<f64>,
    pub ns: Vec<i64>,
    /// `cells[e][j]` for `eps[e]` and `ns[j]`.
    pub cells: Vec<Vec<LogBracket>>,
}

impl EntropyTable {
    pub fn volume(&self, n: i64) -> f64 {
        ((2 * n + 1) as f64).powi(self.k as i32)
    }

    pub fn normalized(&self, e: usize, j: usize) -> Interval {
        let v = self.volume(self.ns[j]);
        Interval { lo: self.cells[e][j].lb / v, hi: self.cells[e][j].ub / v }
    }

    /// Running infimum of the normalized upper bounds along `ns`.
    pub fn running_inf_ub(&self, e: usize) -> Vec<f64> {
        let mut best = f64::INFINITY;
        (0..self.ns.len())
            .map(|j| {
                best = best.min(self.normalized(e, j).hi);
                best
            })
            .collect()
    }

    /// `S(ε)` bracket: running infima of the normalized lower and upper bounds.
    pub fn s_bracket(&self, e: usize) -> Interval {
        let lo = (0..self.ns.len()).map(|j| self.normalized(e, j).lo).fold(f64::INFINITY, f64::min);
        let hi = (0..self.ns.len()).map(|j| self.normalized(e, j).hi).fold(f64::INFINITY, f64::min);
        Interval { lo: lo.min(hi), hi }
    }
}

pub fn scale_entropy_table(src: &EntropySource, eps: &[f64], ns: &[i64]) -> Result<EntropyTable> {
    if eps.is_empty() || ns.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let cells = eps
        .iter()
        .map(|&e| ns.iter().map(|&n| src.cell(e, n)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyTable { k: src.rank(), eps: eps.to_vec(), ns: ns.to_vec(), cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    TopologicalEntropy,
    ScaleEntropy,
    MdimLower,
    MdimMetricUpper,
    MdimMetricLower,
    DirectionalMdim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub kind: EstimateKind,
    pub lb: f64,
    pub ub: f64,
    pub witness: String,
    pub grid: String,
}

fn grid_desc(t: &EntropyTable) -> String {
    format!("eps {:?}, N {:?}", t.eps, t.ns)
}

/// `lb = max_ε S-lb(ε)`, `ub = S-ub` at the smallest `ε`.
pub fn topological_entropy_estimate(t: &EntropyTable) -> DimensionEstimate {
    let lb = (0..t.eps.len()).map(|e| t.s_bracket(e).lo).fold(f64::NEG_INFINITY, f64::max);
    let finest = (0..t.eps.len()).min_by(|&a, &b| t.eps[a].total_cmp(&t.eps[b])).unwrap();
    let ub = t.s_bracket(finest).hi.max(lb);
    DimensionEstimate { kind: EstimateKind::TopologicalEntropy, lb, ub, witness: "pattern counts and covers per cell".into(), grid: grid_desc(t) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMdim {
    /// `S(ε)/log(1/ε)` at the finest scale.
    pub ratio: Interval,
    /// Secant slope of `S` against `log(1/ε)` over the two finest scales.
    pub slope: Interval,
    pub eps_finest: f64,
    pub eps_coarsest: f64,
    pub estimate: DimensionEstimate,
}

/// Metric mean dimension read off an entropy table with at least three scales spanning two octaves.
pub fn metric_mean_dim_estimate(t: &EntropyTable) -> Result<MetricMdim> {
    let mut order: Vec<usize> = (0..t.eps.len()).collect();
    order.sort_by(|&a, &b| t.eps[a].total_cmp(&t.eps[b]));
    let (fine, coarse) = (t.eps[order[0]], t.eps[*order.last().unwrap()]);
    if order.len() < 3 || coarse / fine < 4.0 || !(fine > 0.0) || fine >= 1.0 {
        return Err(Error::DegenerateLadder(format!("{} scales from {fine} to {coarse}", order.len())));
    }
    let (a, b) = (order[0], order[1]);
    let (sa, sb) = (t.s_bracket(a), t.s_bracket(b));
    let la = (1.0 / t.eps[a]).ln();
    let delta = (t.eps[b] / t.eps[a]).ln();
    let slope = Interval { lo: ((sa.lo - sb.hi) / delta).max(0.0), hi: ((sa.hi - sb.lo) / delta).max(0.0) };
    let ratio = Interval { lo: sa.lo / la, hi: sa.hi / la };
    let estimate = DimensionEstimate {
        kind: EstimateKind::MdimMetricUpper,
        lb: slope.lo,
        ub: slope.hi,
        witness: format!("secant slope of S between eps {} and {}", t.eps[a], t.eps[b]),
        grid: grid_desc(t),
    };
    Ok(MetricMdim { ratio, slope, eps_finest: fine, eps_coarsest: coarse, estimate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCertificate {
    pub free_count: usize,
    pub window_cells: usize,
    pub per_site_dim: f64,
    pub pairs_checked: usize,
    pub seed: u64,
    pub witness: String,
}

/// Lower bound `dim·|I|/|window|` from a witness map, checked distance-nondecreasing
/// (`ℓ∞` input distance at most the output distance) on seeded sampled pairs.
#[allow(clippy::too_many_arguments)]
pub fn embedding_lower_bound(
    site: &Site,
    window_cells: usize,
    free_count: usize,
    per_site_dim: f64,
    witness: &dyn Fn(&[u32]) -> Result<Vec<u32>>,
    out_metric: &dyn Fn(&[u32], &[u32]) -> f64,
    pairs: usize,
    seed: u64,
    description: &str,
) -> Result<(DimensionEstimate, EmbeddingCertificate)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = site.size();
    let mut checked = 0;
    if free_count > 0 {
        for p in 0..pairs {
            let v: Vec<u32> = (0..free_count).map(|_| rng.gen_range(0..s)).collect();
            let w: Vec<u32> = if p % 2 == 0 {
                (0..free_count).map(|_| rng.gen_range(0..s)).collect()
            } else {
                // near pair: one coordinate nudged
                let mut w = v.clone();
                let i = rng.gen_range(0..free_count);
                w[i] = (w[i] + 1) % s.max(1);
                w
            };
            let input = v.iter().zip(&w).map(|(&a, &b)| site.dist(a, b)).fold(0.0, f64::max);
            let output = out_metric(&witness(&v)?, &witness(&w)?);
            if input > output + 1e-12 {
                return Err(Error::WitnessViolation { input, output });
            }
            checked += 1;
        }
    }
    let lb = per_site_dim * free_count as f64 / window_cells as f64;
    let cert = EmbeddingCertificate { free_count, window_cells, per_site_dim, pairs_checked: checked, seed, witness: description.to_string() };
    let est = DimensionEstimate { kind: EstimateKind::MdimLower, lb, ub: per_site_dim.max(lb), witness: description.to_string(), grid: format!("{window_cells} cells") };
    Ok((est, cert))
}

/// Shift-type witness on `[-n, n]^k`: free cells carry the input, the rest hold `background`.
/// The output metric is the window metric with the site distance at the origin.
pub fn shift_embedding(
    site: &Site,
    k: usize,
    n: i64,
    free: &dyn Fn(&[i64]) -> bool,
    background: u32,
    pairs: usize,
    seed: u64,
) -> Result<(DimensionEstimate, EmbeddingCertificate)> {
    let pts = window_points(&Window::Box { n, k }, DEFAULT_POINT_CAP)?;
    let mask: Vec<bool> = pts.iter().map(|p| free(&p.0)).collect();
    let free_count = mask.iter().filter(|&&b| b).count();
    let witness = |v: &[u32]| -> Result<Vec<u32>> {
        let mut it = v.iter();
        Ok(mask.iter().map(|&f| if f { *it.next().unwrap() } else { background }).collect())
    };
    let metric = |x: &[u32], y: &[u32]| x.iter().zip(y).map(|(&a, &b)| site.dist(a, b)).fold(0.0, f64::max);
    embedding_lower_bound(site, pts.len(), free_count, topological_dim(site), &witness, &metric, pairs, seed, "free cells carry coordinates, background frozen")
}

/// Witness along the row `ℤ × {0}` for `3x_{m,n} + x_{m+1,n} + x_{m,n+1} = 0`: row 0 is arbitrary,
/// rows above follow the rule, rows below are solved left to right. Every witness pattern is
/// checked legal on the box `[-n-h, n+h] × [-h, h]`.
pub fn three_term_row_embedding(q: u32, n: i64, pairs: usize, seed: u64) -> Result<(DimensionEstimate, EmbeddingCertificate)> {
    let sys = crate::systems::build_three_term_system(q)?;
    let site = sys.site.clone();
    let h = 3i64;
    let (w0, w1) = (-n - 2 * h - 2, n + 2 * h + 2);
    let width = (w1 - w0 + 1) as usize;
    let qi = q as i64;
    let build = |v: &[u32]| -> Result<Vec<u32>> {
        // rows[-h..=h], each over columns w0..=w1
        let mut rows: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        let mut r0 = vec![0i64; width];
        for (i, &x) in v.iter().enumerate() {
            r0[(i as i64 - n - w0) as usize] = x as i64;
        }
        rows.insert(0, r0);
        for t in 1..=h {
            let prev = rows[&(t - 1)].clone();
            let row: Vec<i64> = (0..width).map(|m| if m + 1 < width { (-3 * prev[m] - prev[m + 1]).rem_euclid(qi) } else { 0 }).collect();
            rows.insert(t, row);
        }
        for t in (-h..0).rev() {
            let above = rows[&(t + 1)].clone();
            let mut row = vec![0i64; width];
            for m in 0..width - 1 {
                row[m + 1] = (-above[m] - 3 * row[m]).rem_euclid(qi);
            }
            rows.insert(t, row);
        }
        // legality on the part of the box where rows above were fully determined
        if let Rule::LinearModQ { coeffs, .. } = &sys.rule {
            for t in -h..h {
                for m in 0..(width - 1 - (h as usize + 1)) {
                    let vals = [rows[&t][m], rows[&t][m + 1], rows[&(t + 1)][m]];
                    let s: i64 = coeffs.iter().zip(vals).map(|(c, x)| c * x).sum();
                    if s.rem_euclid(qi) != 0 {
                        return Err(Error::AssertionFailed(format!("witness pattern illegal at ({m},{t})")));
                    }
                }
            }
        }
        Ok((-n..=n).map(|m| rows[&0][(m - w0) as usize] as u32).collect())
    };
    let metric = |x: &[u32], y: &[u32]| x.iter().zip(y).map(|(&a, &b)| site.dist(a, b)).fold(0.0, f64::max);
    let cells = (2 * n + 1) as usize;
    embedding_lower_bound(&site, cells, cells, topological_dim(&site), &build, &metric, pairs, seed, "row 0 free, other rows solved from it")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub value: Ratio<i64>,
    pub exact: bool,
}

/// Upper Banach density of an eventually periodic index set.
pub fn banach_density(lambda: &IndexSetSpec) -> DensityValue {
    let p = lambda.period();
    let base = lambda.exceptional_radius() + 1;
    let count = match lambda {
        IndexSetSpec::FiniteSet(_) => 0,
        _ => lambda.count_in(base, base + p - 1) as i64,
    };
    DensityValue { value: Ratio::new(count, p), exact: true }
}

/// Sliding-window density `sup_n |Λ ∩ [n, n+N)| / N` over offsets covering one period.
pub fn window_density(lambda: &IndexSetSpec, len: i64) -> Ratio<i64> {
    let p = lambda.period();
    let r = lambda.exceptional_radius();
    let best = (-r - len - p..=r + p).map(|n| lambda.count_in(n, n + len - 1)).max().unwrap_or(0);
    Ratio::new(best as i64, len)
}

fn column_entropy(y: &RestrictedSystem) -> f64 {
    match &y.base {
        ColumnSite::FullShift { symbols } => (*symbols as f64).ln(),
        ColumnSite::Finite(_) => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PavlovPoint {
    pub n: i64,
    /// `(1/N)·max_l |free columns|·h_col` when `A` carries zero entropy.
    pub exact: f64,
    pub bracket: Interval,
}

/// `(1/N)·h_top(π_N(Y), h_N)` for columns `1..=N`, bracketed from column-pattern counts over `ms` time windows.
pub fn pavlov_projection_entropy(y: &RestrictedSystem, ns: &[i64], ms: &[i64]) -> Result<Vec<PavlovPoint>> {
    let h_col = column_entropy(y);
    let mut out = Vec::new();
    for &n in ns {
        let fam = y.free_column_families(1, n);
        let p = fam.len().max(1) as f64;
        let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
        for &m in ms {
            let rows = 2 * m + 1;
            let (f, a) = y.column_counts(rows);
            let count = ln_big(&y.union_count(1, n, &f, &a)?);
            let la = if a.bits() == 0 { 0.0 } else { ln_big(&a) };
            lb = lb.max((count - p.ln() - n as f64 * la) / rows as f64);
            ub = ub.min(count / rows as f64);
        }
        let exact = y.max_free_columns(1, n) as f64 * h_col / n as f64;
        out.push(PavlovPoint { n, exact, bracket: Interval { lo: lb.max(0.0) / n as f64, hi: ub / n as f64 } });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEntropyReport {
    pub target: f64,
    /// Normalized `ln #Y|_{[-N,N]^2} / (2N+1)^2` per tested `N`.
    pub direct_series: Vec<(i64, f64)>,
    pub direct: Interval,
    pub pavlov: Vec<PavlovPoint>,
    pub holds: bool,
}

/// Checks that the ℤ² entropy bracket and the column-projection bracket both contain `h_col·D`.
///
/// The direct lower end `D·h_col` is the entropy of the periodic core `Y₀` under the
/// period subgroup, divided by the period.
pub fn product_entropy_check(y: &RestrictedSystem, ns: &[i64], pavlov_ns: &[i64], ms: &[i64], tol: f64) -> Result<ProductEntropyReport> {
    let d = banach_density(&y.lambda).value;
    let h_col = column_entropy(y);
    let target = h_col * d.to_f64().unwrap();
    let mut series = Vec::new();
    for &n in ns {
        let c = ln_big(&y.count_patterns(-n, n, 2 * n + 1)?);
        series.push((n, c / ((2 * n + 1) as f64).powi(2)));
    }
    let hi = series.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let direct = Interval { lo: target, hi };
    let pavlov = pavlov_projection_entropy(y, pavlov_ns, ms)?;
    let last = pavlov.last().map(|p| p.bracket).unwrap_or(Interval::point(target));
    let holds = direct.contains(target, tol) && last.contains(target, tol) && direct.lo <= direct.hi + tol;
    Ok(ProductEntropyReport { target, direct_series: series, direct, pavlov, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToralBracket {
    pub log_lambda: f64,
    /// Growth bracket `[(ln lb_N − ln ub_0)/2N, (ln ub_N − ln lb_0)/2N]`.
    pub growth: Interval,
    /// `[ln lb_N, ln ub_N] / (2N+1)`.
    pub raw: Interval,
    pub estimate: DimensionEstimate,
}

fn mat_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let r = a.len();
    (0..r).map(|i| (0..r).map(|j| (0..r).map(|t| a[i][t] * b[t][j]).sum()).collect()).collect()
}

/// Eigen-data of a hyperbolic 2×2 integer matrix: `(|λ_u|, sin of the angle between eigenlines)`.
pub fn hyperbolic_data(m: &ToralAutomorphism) -> Result<(f64, f64)> {
    if m.rank() != 2 {
        return Err(Error::InvalidInput("toral bracket is implemented for rank 2".into()));
    }
    let (t, det) = (m.trace() as f64, m.det() as f64);
    let hyperbolic = if det > 0.0 { t.abs() > 2.0 } else { t != 0.0 || det < 0.0 };
    let disc = t * t - 4.0 * det;
    if !hyperbolic || disc <= 0.0 {
        return Err(Error::NonHyperbolic);
    }
    let lu = (t + t.signum() * disc.sqrt()) / 2.0;
    let ls = det / lu;
    let (a, b, c, d) = (m.m[0][0] as f64, m.m[0][1] as f64, m.m[1][0] as f64, m.m[1][1] as f64);
    let eig = |l: f64| -> (f64, f64) {
        if b.abs() > 1e-12 || (l - a).abs() > 1e-12 {
            (b, l - a)
        } else {
            (l - d, c)
        }
    };
    let (u, s) = (eig(lu), eig(ls));
    let cross = (u.0 * s.1 - u.1 * s.0).abs();
    let sin = cross / ((u.0 * u.0 + u.1 * u.1).sqrt() * (s.0 * s.0 + s.1 * s.1).sqrt());
    Ok((lu.abs(), sin))
}

/// Entropy bracket for a hyperbolic toral automorphism on `T²` at scale `ε` and window `[-N, N]`.
///
/// Upper count: squares of side `1/K` with `√2·max_{|n|≤N}‖Mⁿ‖/K < ε`, so `K²` sets.
/// Lower count: a set of diameter `< ε` has area at most `ε²λ^{-2N}/sin θ` (its difference
/// set lies in a Bowen parallelogram), so at least `λ^{2N} sin θ / ε²` sets are needed.
pub fn toral_entropy_bracket(m: &ToralAutomorphism, eps: f64, n: i64) -> Result<ToralBracket> {
    let (lambda, sin) = hyperbolic_data(m)?;
    if n < 1 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    if eps * operator_norm(&m.m).max(operator_norm(&m.inverse().m)) >= 0.25 {
        return Err(Error::InvalidInput("ε too large for the lifted Bowen-ball argument".into()));
    }
    let inv = m.inverse();
    let mut lmax = vec![1.0f64];
    let (mut p, mut q) = (m.m.clone(), inv.m.clone());
    for _ in 1..=n {
        lmax.push(lmax.last().unwrap().max(operator_norm(&p)).max(operator_norm(&q)));
        p = mat_mul(&p, &m.m);
        q = mat_mul(&q, &inv.m);
    }
    let ln_ub = |k: usize| 2.0 * ((2f64.sqrt() * lmax[k] / eps).floor() + 1.0).ln();
    let ln_lb = |k: usize| (2.0 * k as f64 * lambda.ln() + sin.ln() - 2.0 * eps.ln()).max(0.0);
    let nn = n as usize;
    let growth = Interval { lo: (ln_lb(nn) - ln_ub(0)) / (2 * n) as f64, hi: (ln_ub(nn) - ln_lb(0)) / (2 * n) as f64 };
    let raw = Interval { lo: ln_lb(nn) / (2 * n + 1) as f64, hi: ln_ub(nn) / (2 * n + 1) as f64 };
    let estimate = DimensionEstimate {
        kind: EstimateKind::TopologicalEntropy,
        lb: growth.lo,
        ub: growth.hi,
        witness: "area bound on Bowen parallelograms; Lipschitz square cover".into(),
        grid: format!("eps {eps}, N {n}"),
    };
    Ok(ToralBracket { log_lambda: lambda.ln(), growth, raw, estimate })
}

/// Lattice points of `B_r(L) ∩ (−N, N)²` for the line `L = ℝ·(p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalWindowSpec {
    pub dir: (i64, i64),
    pub r: f64,
    pub n: i64,
}

impl DirectionalWindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dir == (0, 0) || num_integer::gcd(self.dir.0, self.dir.1) != 1 {
            return Err(Error::InvalidInput("direction must be a primitive vector".into()));
        }
        if !(self.r > std::f64::consts::FRAC_1_SQRT_2) {
            return Err(Error::InvalidInput("thickness must exceed 1/√2".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<(i64, i64)> {
        let (p, q) = self.dir;
        let norm = ((p * p + q * q) as f64).sqrt();
        let mut out = Vec::new();
        for a in (1 - self.n)..self.n {
            for b in (1 - self.n)..self.n {
                if ((a * q - b * p).abs() as f64) / norm < self.r {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Length of `L ∩ (−N, N)²`.
    pub fn length(&self) -> f64 {
        let (p, q) = self.dir;
        2.0 * self.n as f64 * ((p * p + q * q) as f64).sqrt() / p.abs().max(q.abs()) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalPoint {
    pub n: i64,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub series: Vec<DirectionalPoint>,
    pub lb_running: (f64, f64),
    pub ub_running: (f64, f64),
    pub estimate: DimensionEstimate,
}

/// Directional mean dimension of the full shift `(σ, h_ℤ)` on `site^ℤ`.
///
/// Lower end: one free coordinate per column touched by the window, placed as `h^{-b}(v)`
/// for a chosen row `b` of that column, normalized by the segment length. Upper end: secant
/// slope over the two finest scales of the per-column covering counts under `max_{b} d(h^b·, h^b·)`.
pub fn directional_mdim_estimate(sys: &ProductShiftSystem, dir: (i64, i64), r: f64, ns: &[i64], eps: &[f64], seed: u64) -> Result<DirectionalReport> {
    if eps.len() < 2 {
        return Err(Error::DegenerateLadder("need two scales".into()));
    }
    let mut e = eps.to_vec();
    e.sort_by(|a, b| a.total_cmp(b));
    let (ea, eb) = (e[0], e[1]);
    let perm = SitePerm::new(&sys.site, &sys.h)?;
    let size = sys.site.size() as usize;
    if size > 1024 {
        return Err(Error::CapExceeded { what: "site points", size: size as u128, cap: 1024 });
    }
    let dim = topological_dim(&sys.site);
    let mut cache: BTreeMap<Vec<i64>, (f64, f64, f64, f64)> = BTreeMap::new();
    let mut series = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &n in ns {
        let window = DirectionalWindowSpec { dir, r, n };
        window.validate()?;
        let mut cols: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for (a, b) in window.points() {
            cols.entry(a).or_default().push(b);
        }
        // witness check: columns carry h^{-b_a}(v_a); the window sees v_a at (a, b_a)
        for _ in 0..32 {
            for bs in cols.values() {
                let b0 = bs[0];
                let (v, w) = (rng.gen_range(0..size as u32), rng.gen_range(0..size as u32));
                let (xv, xw) = (perm.pow(v, -b0), perm.pow(w, -b0));
                let out = bs.iter().map(|&b| sys.site.dist(perm.pow(xv, b), perm.pow(xw, b))).fold(0.0, f64::max);
                if sys.site.dist(v, w) > out + 1e-12 {
                    return Err(Error::WitnessViolation { input: sys.site.dist(v, w), output: out });
                }
            }
        }
        let len = window.length();
        let lb = dim * cols.len() as f64 / len;
        let (mut s_a, mut s_b) = ((0.0, 0.0), (0.0, 0.0));
        for bs in cols.values() {
            let key: Vec<i64> = bs.iter().map(|b| b - bs[0]).collect();
            let entry = cache.entry(key.clone()).or_insert_with(|| {
                let mat = MetricMatrix::from_fn(size, |i, j| {
                    key.iter().map(|&b| sys.site.dist(perm.pow(i as u32, b), perm.pow(j as u32, b))).fold(0.0, f64::max)
                });
                let ba = covering_number_bracket(&mat, ea);
                let bb = covering_number_bracket(&mat, eb);
                ((ba.lb as f64).ln(), (ba.ub as f64).ln(), (bb.lb as f64).ln(), (bb.ub as f64).ln())
            });
            s_a.0 += entry.0;
            s_a.1 += entry.1;
            s_b.0 += entry.2;
            s_b.1 += entry.3;
        }
        let delta = (eb / ea).ln();
        let ub = ((s_a.1 - s_b.0) / len / delta).max(0.0);
        series.push(DirectionalPoint { n, lb, ub });
    }
    let run = |f: &dyn Fn(&DirectionalPoint) -> f64| {
        series.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |acc, v| (acc.0.min(v), acc.1.max(v)))
    };
    let lb_running = run(&|p| p.lb);
    let ub_running = run(&|p| p.ub);
    let last = series.last().cloned().unwrap_or(DirectionalPoint { n: 0, lb: 0.0, ub: 0.0 });
    let estimate = DimensionEstimate {
        kind: EstimateKind::DirectionalMdim,
        lb: last.lb,
        ub: last.ub.max(last.lb),
        witness: "one free coordinate per touched column".into(),
        grid: format!("dir {dir:?}, r {r}, N {ns:?}, eps {ea}/{eb}"),
    };
    Ok(DirectionalReport { series, lb_running, ub_running, estimate })
}

/// Cellwise endomorphisms commuting with the shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalEndo {
    /// Identity on the two-symbol full shift.
    Identity,
    /// Elementary (radius-1, two-symbol) cellular automaton by rule number.
    Eca(u8),
    /// `x ↦ Mx` applied at every site of the quantized torus full shift.
    ToralCellwise { m: ToralAutomorphism, q: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndoReport {
    pub commutes: bool,
    /// `[largest sampled quotient, analytic bound]` for the local Lipschitz constant.
    pub lipschitz: Interval,
    pub h_lb: f64,
    pub mdim_ub: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn eca_step(rule: u8, row: &[u8]) -> Vec<u8> {
    (1..row.len() - 1).map(|i| (rule >> (row[i - 1] << 2 | row[i] << 1 | row[i + 1])) & 1).collect()
}

/// Space-time pattern counts of an ECA on `[-N,N] × [0,t]`, enumerating the row-0 window
/// that determines them.
pub fn eca_spacetime_count(rule: u8, n: i64, t: i64) -> usize {
    let width = (2 * n + 1 + 2 * t) as usize;
    let mut seen = HashSet::new();
    for bits in 0u64..(1u64 << width) {
        let mut row: Vec<u8> = (0..width).map(|i| (bits >> i & 1) as u8).collect();
        let mut key: Vec<u8> = Vec::new();
        for s in 0..=t {
            let off = (t - s) as usize;
            key.extend_from_slice(&row[off..off + (2 * n + 1) as usize]);
            if s < t {
                row = eca_step(rule, &row);
            }
        }
        seen.insert(key);
    }
    seen.len()
}

fn weighted_dist(x: &[u8], y: &[u8], center: usize) -> f64 {
    x.iter().zip(y).enumerate().map(|(i, (a, b))| if a != b { 0.5f64.powi((i as i64 - center as i64).unsigned_abs() as i32) } else { 0.0 }).sum()
}

/// Compares a lower estimate of the space-time entropy of `(T, f)` with `log⁺L · mdim`.
///
/// The entropy estimate is the growth of space-time counts in the time direction per spatial
/// cell, less the information a radius-`r` rule can import through the window boundary.
pub fn lipschitz_endo_check(endo: &LocalEndo, n: i64, times: (i64, i64), tol: f64, seed: u64) -> Result<EndoReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps_ladder = [0.25, 0.125, 0.0625, 0.03125];
    match endo {
        LocalEndo::Identity | LocalEndo::Eca(_) => {
            let (rule, radius, l_bound) = match endo {
                LocalEndo::Eca(r) => (*r, 1i64, 5.0),
                _ => (0b1100_1100u8, 0, 1.0), // rule 204 is the identity
            };
            // commutation with the shift on random rows
            let mut commutes = true;
            for _ in 0..64 {
                let row: Vec<u8> = (0..40).map(|_| rng.gen_range(0..2)).collect();
                let f_then_s: Vec<u8> = eca_step(rule, &row)[1..].to_vec();
                let s_then_f: Vec<u8> = eca_step(rule, &row[1..]);
                commutes &= f_then_s[..s_then_f.len()] == s_then_f[..];
            }
            // difference quotients at shrinking scales, pairs agreeing near the origin
            let mut lmax: f64 = 0.0;
            let len = 81usize;
            let c = len / 2;
            for j in 2..12 {
                for _ in 0..32 {
                    let x: Vec<u8> = (0..len).map(|_| rng.gen_range(0..2)).collect();
                    let mut y = x.clone();
                    let pos = if rng.gen_bool(0.5) { c + j } else { c - j };
                    y[pos] ^= 1;
                    let (fx, fy) = (eca_step(rule, &x), eca_step(rule, &y));
                    let dx = weighted_dist(&x, &y, c);
                    let dy = weighted_dist(&fx, &fy, c - 1);
                    lmax = lmax.max(dy / dx);
                }
            }
            let (t1, t2) = times;
            let c1 = eca_spacetime_count(rule, n, t1) as f64;
            let c2 = eca_spacetime_count(rule, n, t2) as f64;
            let cells = (2 * n + 1) as f64;
            let growth = (c2.ln() - c1.ln()) / (cells * (t2 - t1) as f64);
            let h_lb = (growth - 2.0 * radius as f64 * LN_2 / cells).max(0.0);
            let site = Site::Alphabet { size: 2 };
            let table = scale_entropy_table(&EntropySource::FullShift { site: &site, k: 1 }, &eps_ladder, &[n])?;
            let mdim_ub = metric_mean_dim_estimate(&table)?.slope.hi;
            let lipschitz = Interval { lo: lmax, hi: l_bound };
            let rhs = lipschitz.hi.ln().max(0.0) * mdim_ub;
            Ok(EndoReport { commutes, lipschitz, h_lb, mdim_ub, rhs, holds: h_lb <= rhs + tol })
        }
        LocalEndo::ToralCellwise { m, q } => {
            let tor = QuantizedTorus::new(m.rank(), *q, crate::systems::Norm::Euclidean)?;
            let mut lmax: f64 = 0.0;
            for _ in 0..2000 {
                let a: Vec<u32> = (0..tor.r).map(|_| rng.gen_range(0..*q)).collect();
                let mut b = a.clone();
                let i = rng.gen_range(0..tor.r);
                b[i] = (b[i] + 1) % q;
                let (ea, eb) = (tor.encode(&a), tor.encode(&b));
                let (fa, fb) = (tor.encode(&m.apply_coords(*q, &a)), tor.encode(&m.apply_coords(*q, &b)));
                let d = tor.dist(ea, eb);
                if d > 0.0 {
                    lmax = lmax.max(tor.dist(fa, fb) / d);
                }
            }
            let norm = operator_norm(&m.m);
            let per_cell = toral_entropy_bracket(m, 1.0 / 64.0, 6)?;
            let site = Site::Torus(QuantizedTorus::new(m.rank(), 1 << 12, crate::systems::Norm::Sup)?);
            let table = scale_entropy_table(&EntropySource::FullShift { site: &site, k: 1 }, &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0], &[n])?;
            let mdim_ub = metric_mean_dim_estimate(&table)?.slope.hi;
            let lipschitz = Interval { lo: lmax, hi: norm };
            let h_lb = per_cell.growth.lo;
            let rhs = lipschitz.hi.ln().max(0.0) * mdim_ub;
            Ok(EndoReport { commutes: true, lipschitz, h_lb, mdim_ub, rhs, holds: h_lb <= rhs + tol })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwReport {
    pub mdim_lb: f64,
    pub metric_ub: f64,
    pub holds: bool,
}

/// Embedding lower bound must not exceed the metric mean dimension upper estimate.
pub fn lw_inequality_check(lb: &DimensionEstimate, metric: &DimensionEstimate, tol: f64) -> LwReport {
    LwReport { mdim_lb: lb.lb, metric_ub: metric.ub, holds: lb.lb <= metric.ub + tol }
}
