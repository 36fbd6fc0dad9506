//! Tower constructions over `M^ℤ` with `M` a quantized torus: free-index recursions,
//! invariant nets, forced-block stages and finite-stage minimality gaps.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::{Norm, QuantizedTorus, Site, SiteMap, SitePerm, ToralAutomorphism};

/// Cap on materialized index-set spans.
pub const SPAN_CAP: u128 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TowerVariant {
    /// One forced block per net member.
    #[serde(rename = "sec5")]
    Single,
    /// Each net member repeated `b_n` times.
    #[serde(rename = "sec5-remark")]
    Repeated,
    /// Each net member repeated `a_n²` times, with a primed companion cycling through `H`-powers.
    #[serde(rename = "sec6")]
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerParams {
    pub variant: TowerVariant,
    /// `L_0, …, L_s` with `L_0 = 1`.
    pub l: Vec<u64>,
    /// `b_0, …, b_{s-1}`.
    pub b: Vec<u64>,
    /// `a_0, …, a_{s-1}`; only read by the periodic variant.
    #[serde(default)]
    pub a: Vec<u64>,
}

impl TowerParams {
    pub fn stages(&self) -> usize {
        self.l.len().saturating_sub(1)
    }

    /// Number of forced `A_n³` positions in stage `n → n+1`.
    pub fn forced_positions(&self, n: usize) -> u64 {
        let b = self.b[n];
        match self.variant {
            TowerVariant::Single => b,
            TowerVariant::Repeated => b * b,
            TowerVariant::Periodic => self.a[n] * self.a[n] * b,
        }
    }

    /// `|I_{n+1}| / |I_n|`.
    pub fn multiplier(&self, n: usize) -> u64 {
        3 * self.l[n + 1] - 3 * self.forced_positions(n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.l.first() != Some(&1) {
            return bad("L_0 must be 1".into());
        }
        let s = self.stages();
        if self.l.iter().any(|&v| v == 0) {
            return bad("every L_n must be positive".into());
        }
        if self.b.len() < s || self.b[..s].iter().any(|&v| v == 0) {
            return bad(format!("need {s} positive values b_n"));
        }
        if self.variant == TowerVariant::Periodic {
            if self.a.len() < s {
                return bad(format!("need {s} values a_n"));
            }
            if let Some(n) = (0..s).find(|&n| self.a[n] < self.b[n]) {
                return bad(format!("a_{n} < b_{n}"));
            }
        }
        for n in 0..s {
            let (l, b) = (self.l[n + 1], self.b[n]);
            let ok = match self.variant {
                TowerVariant::Single | TowerVariant::Periodic => l > self.forced_positions(n),
                TowerVariant::Repeated => (l as u128) > (1u128 << (n + 1)) * (b as u128) * (b as u128),
            };
            if !ok {
                return bad(format!("stage {n}: L_{} = {l} too small for the variant", n + 1));
            }
        }
        Ok(())
    }

    /// `3ⁿ·L_0⋯L_n`.
    pub fn span(&self, n: usize) -> u128 {
        3u128.pow(n as u32) * self.l[..=n].iter().map(|&v| v as u128).product::<u128>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeIndexSet {
    pub stage: usize,
    pub span: u64,
    pub members: Vec<u64>,
}

/// `I_0 = {0}`, `I_{n+1} = ∪_{m < mult_n} (m·span_n + I_n)`.
pub fn free_index_recursion(params: &TowerParams, n: usize) -> Result<FreeIndexSet> {
    params.validate()?;
    if n > params.stages() {
        return Err(Error::InvalidParams(format!("stage {n} beyond the {} given", params.stages())));
    }
    let span = params.span(n);
    if span > SPAN_CAP {
        return Err(Error::CapExceeded { what: "index span", size: span, cap: SPAN_CAP });
    }
    let mut set = vec![0u64];
    for s in 0..n {
        let step = params.span(s) as u64;
        let mult = params.multiplier(s);
        let mut next = Vec::with_capacity(set.len() * mult as usize);
        for m in 0..mult {
            next.extend(set.iter().map(|&i| m * step + i));
        }
        let expect = set.len() as u64 * mult;
        set = next;
        if set.len() as u64 != expect {
            return Err(Error::AssertionFailed("cardinality law".into()));
        }
    }
    Ok(FreeIndexSet { stage: n, span: span as u64, members: set })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeFraction {
    pub by_count: Ratio<u128>,
    pub by_product: Ratio<u128>,
    /// Whether the count came from a materialized set.
    pub materialized: bool,
}

/// `|I_n| / span_n` from the set (or the cardinality law past the cap) and from `∏ (1 − forced/L)`.
pub fn free_fraction(params: &TowerParams, n: usize) -> Result<FreeFraction> {
    params.validate()?;
    if n > params.stages() {
        return Err(Error::InvalidParams(format!("stage {n} beyond the {} given", params.stages())));
    }
    let span = params.span(n);
    let (count, materialized) = if span <= 1 << 24 {
        (free_index_recursion(params, n)?.members.len() as u128, true)
    } else {
        ((0..n).map(|s| params.multiplier(s) as u128).product(), false)
    };
    let by_count = Ratio::new(count, span);
    let by_product = (0..n).fold(Ratio::from_integer(1u128), |acc, s| {
        let l = params.l[s + 1] as u128;
        acc * Ratio::new(l - params.forced_positions(s) as u128, l)
    });
    if by_count != by_product {
        return Err(Error::AssertionFailed(format!("free fraction routes disagree: {by_count} vs {by_product}")));
    }
    Ok(FreeFraction { by_count, by_product, materialized })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterDensityReport {
    pub t_max: u64,
    pub stage_used: usize,
    /// Values of `t` handled by each case of the scale decomposition
    /// (`t < 2·span_n`, `t ≤ mult_n·span_n`, rest); `t` past the last full stage is counted last.
    pub case_counts: [u64; 4],
    /// `(t, |[0,t) ∩ I|)` minimizing the ratio.
    pub worst: (u64, u64),
    pub failing: Option<u64>,
}

/// Exhaustive check of `4·|[0,t) ∩ I| > t` for `1 ≤ t ≤ t_max`, with `I = ∪ I_n`.
///
/// Requires `|I_n|/span_n ≥ 1/2` at every stage used; `[0,t) ∩ I = [0,t) ∩ I_s` once `span_s ≥ t`.
pub fn quarter_density_check(params: &TowerParams, t_max: u64) -> Result<QuarterDensityReport> {
    params.validate()?;
    if params.variant != TowerVariant::Periodic {
        return Err(Error::InvalidParams("quarter density is stated for the periodic variant".into()));
    }
    let s = (0..=params.stages())
        .find(|&n| params.span(n) >= t_max as u128)
        .ok_or_else(|| Error::InvalidParams(format!("stages reach span {} < t_max {t_max}", params.span(params.stages()))))?;
    for n in 0..=s {
        let f = free_fraction(params, n)?.by_count;
        if f * 2 < Ratio::from_integer(1) {
            return Err(Error::InvalidParams(format!("largeness fails at stage {n}: fraction {f}")));
        }
    }
    // prefix membership via the recursion, never materializing more than t_max cells
    let mut member = vec![false; t_max as usize];
    let mut cur: Vec<u64> = vec![0];
    for n in 0..s {
        let step = params.span(n) as u64;
        let mult = params.multiplier(n);
        let mut next = Vec::new();
        'outer: for m in 0..mult {
            for &i in &cur {
                let v = m * step + i;
                if v >= t_max {
                    break 'outer;
                }
                next.push(v);
            }
        }
        cur = next;
    }
    for &i in &cur {
        member[i as usize] = true;
    }
    let mut case_counts = [0u64; 4];
    let mut count = 0u64;
    let mut worst = (1u64, 1u64);
    let mut failing = None;
    for t in 1..=t_max {
        count += member[(t - 1) as usize] as u64;
        let n = (0..=params.stages()).rev().find(|&n| params.span(n) <= t as u128).unwrap_or(0);
        let span = params.span(n);
        let case = if n >= params.stages() {
            3
        } else if (t as u128) < 2 * span {
            0
        } else if (t as u128) <= params.multiplier(n) as u128 * span {
            1
        } else {
            2
        };
        case_counts[case] += 1;
        if (count as u128) * (worst.0 as u128) < (worst.1 as u128) * (t as u128) {
            worst = (t, count);
        }
        if 4 * count <= t && failing.is_none() {
            failing = Some(t);
        }
    }
    Ok(QuarterDensityReport { t_max, stage_used: s, case_counts, worst, failing })
}

/// Quantized torus with a toral automorphism acting on every cell.
#[derive(Debug, Clone)]
pub struct TowerSite {
    pub torus: QuantizedTorus,
    pub perm: SitePerm,
    /// Order of the site permutation.
    pub order: u64,
}

impl TowerSite {
    pub fn new(torus: QuantizedTorus, h: ToralAutomorphism) -> Result<Self> {
        let site = Site::Torus(torus.clone());
        let perm = SitePerm::new(&site, &SiteMap::Toral(h))?;
        let order = (0..site.size()).fold(1u64, |acc, v| acc.lcm(&(perm.orbit_len(v) as u64)));
        Ok(TowerSite { torus, perm, order })
    }

    pub fn dist(&self, a: u32, b: u32) -> f64 {
        self.torus.dist(a, b)
    }

    pub fn block_dist(&self, x: &[u32], y: &[u32]) -> f64 {
        x.iter().zip(y).map(|(&a, &b)| self.dist(a, b)).fold(0.0, f64::max)
    }

    pub fn apply_block(&self, x: &[u32], power: i64) -> Vec<u32> {
        x.iter().map(|&v| self.perm.pow(v, power)).collect()
    }

    pub fn block_period(&self, x: &[u32]) -> u64 {
        x.iter().fold(1u64, |acc, &v| acc.lcm(&(self.perm.orbit_len(v) as u64)))
    }

    /// Nearest point of the grid `((1/k)ℤ/ℤ)^r`.
    fn round(&self, v: u32, k: u32) -> u32 {
        let q = self.torus.q;
        let c: Vec<u32> = self
            .torus
            .decode(v)
            .iter()
            .map(|&x| {
                let g = ((x as u64 * k as u64 * 2 + q as u64) / (2 * q as u64)) as u32 % k;
                g * (q / k)
            })
            .collect();
        self.torus.encode(&c)
    }

    /// Covering radius of the `k`-grid.
    fn grid_radius(&self, k: u32) -> f64 {
        let half = 1.0 / (2.0 * k as f64);
        match self.torus.norm {
            Norm::Euclidean => half * (self.torus.r as f64).sqrt(),
            Norm::Sup => half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicNet {
    pub members: Vec<Vec<u32>>,
    pub periods: Vec<u64>,
    /// `lcm` of member periods.
    pub common_period: u64,
    pub eps: f64,
    /// Largest nearest-member distance over the targets.
    pub max_nearest: f64,
    /// Grid used for rounding, `None` when a single orbit suffices.
    pub grid: Option<u32>,
}

/// An `H`-invariant set of blocks that is `eps`-dense (strictly, `ℓ∞`) in `targets`.
///
/// Targets are rounded cellwise to the coarsest grid `((1/k)ℤ/ℤ)^r`, `k | q`, with covering radius
/// below `eps`; the grid is invariant under every integer matrix, so closing the rounded blocks
/// under `H` keeps density. When `eps` exceeds the site diameter the orbit of the zero block is used.
pub fn periodic_net(site: &TowerSite, targets: &[Vec<u32>], eps: f64) -> Result<PeriodicNet> {
    let w = targets.first().map(|t| t.len()).ok_or_else(|| Error::InvalidInput("no targets".into()))?;
    if targets.iter().any(|t| t.len() != w) {
        return Err(Error::InvalidInput("targets of unequal length".into()));
    }
    let (mut set, grid) = if eps > site.torus.diameter() {
        (BTreeSet::from([vec![0u32; w]]), None)
    } else {
        let q = site.torus.q;
        let k = (1..=q).find(|&k| q % k == 0 && site.grid_radius(k) < eps).ok_or(Error::DensityUnachievable(eps))?;
        (targets.iter().map(|t| t.iter().map(|&v| site.round(v, k)).collect::<Vec<u32>>()).collect::<BTreeSet<_>>(), Some(k))
    };
    let seeds: Vec<Vec<u32>> = set.iter().cloned().collect();
    for s in seeds {
        let mut cur = site.apply_block(&s, 1);
        while cur != s {
            set.insert(cur.clone());
            cur = site.apply_block(&cur, 1);
        }
    }
    let members: Vec<Vec<u32>> = set.into_iter().collect();
    // exact invariance
    let image: BTreeSet<Vec<u32>> = members.iter().map(|m| site.apply_block(m, 1)).collect();
    if image != members.iter().cloned().collect::<BTreeSet<_>>() {
        return Err(Error::AssertionFailed("net is not invariant".into()));
    }
    let mut max_nearest: f64 = 0.0;
    for t in targets {
        let d = members.iter().map(|m| site.block_dist(t, m)).fold(f64::INFINITY, f64::min);
        if !(d < eps) {
            return Err(Error::DensityUnachievable(eps));
        }
        max_nearest = max_nearest.max(d);
    }
    let periods: Vec<u64> = members.iter().map(|m| site.block_period(m)).collect();
    let common_period = periods.iter().fold(1u64, |acc, &p| acc.lcm(&p));
    Ok(PeriodicNet { members, periods, common_period, eps, max_nearest, grid })
}

/// Forced `A_n³` position of a stage template: holds `H^power(member)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcedCell {
    pub pos: u64,
    pub member: usize,
    pub power: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerStage {
    pub stage: usize,
    pub variant: TowerVariant,
    pub l_next: u64,
    pub span: u64,
    pub span_next: u64,
    pub net_size: usize,
    pub a: u64,
    pub forced: Vec<ForcedCell>,
    /// Companion template of the periodic variant.
    pub forced_primed: Option<Vec<ForcedCell>>,
    pub free_positions: u64,
    /// Number of distinct `H_{n+1}`-images of the forced part; bounds the union defining `A_{n+1}`.
    pub union_size: u64,
}

fn template(variant: TowerVariant, l: u64, b: u64, a: u64, primed: bool) -> Vec<ForcedCell> {
    let mut out = Vec::new();
    for i in 1..=b {
        let member = (i - 1) as usize;
        match variant {
            TowerVariant::Single => out.push(ForcedCell { pos: l - i, member, power: 0 }),
            TowerVariant::Repeated => {
                for pos in (l - i * b)..=(l - 1 - (i - 1) * b) {
                    out.push(ForcedCell { pos, member, power: 0 });
                }
            }
            TowerVariant::Periodic => {
                let start = l - i * a * a;
                for j in 0..a * a {
                    out.push(ForcedCell { pos: start + j, member, power: if primed { j / a } else { 0 } });
                }
            }
        }
    }
    out.sort_by_key(|c| c.pos);
    out
}

/// Instantiates the forced-block template of stage `n → n+1` for a net `B_n`.
///
/// `a` is the period parameter of the periodic variant; it must be a common period of the net
/// and at least its size.
pub fn build_stage(variant: TowerVariant, n: usize, span: u64, l_next: u64, site: &TowerSite, net: &PeriodicNet, a: u64) -> Result<TowerStage> {
    let b = net.members.len() as u64;
    if b == 0 {
        return Err(Error::InvalidInput("empty net".into()));
    }
    if net.members.iter().any(|m| m.len() as u64 != 3 * span) {
        return Err(Error::InvalidInput("net members must have length 3·span".into()));
    }
    let forced_count = match variant {
        TowerVariant::Single => b,
        TowerVariant::Repeated => b * b,
        TowerVariant::Periodic => {
            if a < b || net.members.iter().any(|m| site.apply_block(m, a as i64) != *m) {
                return Err(Error::InvalidParams(format!("a = {a} is not a common period at least b = {b}")));
            }
            a * a * b
        }
    };
    if l_next <= forced_count {
        return Err(Error::TemplateDoesNotFit(format!("L = {l_next} but {forced_count} forced positions")));
    }
    let forced = template(variant, l_next, b, a, false);
    let forced_primed = (variant == TowerVariant::Periodic).then(|| template(variant, l_next, b, a, true));
    let positions: BTreeSet<u64> = forced.iter().map(|c| c.pos).collect();
    if positions.len() as u64 != forced_count {
        return Err(Error::AssertionFailed("forced positions overlap".into()));
    }
    // the recursion places free indices in the first 3·(L − forced) sub-blocks of length span
    let free_positions = l_next - forced_count;
    if positions.iter().any(|&p| p < free_positions) {
        return Err(Error::AssertionFailed("forced block collides with free indices".into()));
    }
    Ok(TowerStage {
        stage: n,
        variant,
        l_next,
        span,
        span_next: 3 * span * l_next,
        net_size: b as usize,
        a,
        forced,
        forced_primed,
        free_positions,
        union_size: net.common_period,
    })
}

/// Stage data needed to sample blocks of `A_m` (and `A'_m`).
struct Level {
    span: u64,
    stage: TowerStage,
    net: PeriodicNet,
    net_primed: PeriodicNet,
}

fn sample_block(site: &TowerSite, levels: &[Level], m: usize, primed: bool, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if m == 0 {
        return vec![rng.gen_range(0..site.torus.size())];
    }
    let lv = &levels[m - 1];
    let (forced, net) = if primed {
        (lv.stage.forced_primed.as_ref().unwrap_or(&lv.stage.forced), &lv.net_primed)
    } else {
        (&lv.stage.forced, &lv.net)
    };
    let mut out = Vec::with_capacity((3 * lv.span * lv.stage.l_next) as usize);
    let mut fi = 0;
    for pos in 0..lv.stage.l_next {
        if fi < forced.len() && forced[fi].pos == pos {
            let c = forced[fi];
            out.extend(site.apply_block(&net.members[c.member], c.power as i64));
            fi += 1;
        } else {
            for _ in 0..3 {
                out.extend(sample_block(site, levels, m - 1, primed, rng));
            }
        }
    }
    let j = rng.gen_range(0..site.order.max(1)) as i64;
    site.apply_block(&out, j)
}

/// A configuration on `[lo, lo + len)` in `X(A_m)`, with block boundary at `offset`.
fn sample_config(site: &TowerSite, levels: &[Level], m: usize, primed: bool, span: u64, offset: i64, lo: i64, len: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let span = span as i64;
    let first = offset + (lo - offset).div_euclid(span) * span;
    let mut out = Vec::with_capacity(len + 2 * span as usize);
    let mut start = first;
    while start < lo + len as i64 {
        out.extend(sample_block(site, levels, m, primed, rng));
        start += span;
    }
    let skip = (lo - first) as usize;
    out[skip..skip + len].to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub n: usize,
    pub bound: f64,
    /// Largest over sampled pairs of the minimized upper distance.
    pub max_gap: f64,
    pub pairs: usize,
    pub offsets_scanned: u64,
    /// `L_{n+1}` actually used (chosen to fit the template when the sampled net sets `b_n`).
    pub l_next: u64,
    pub net_size: usize,
    pub holds: bool,
}

/// `Σ_{|m|≤T} 2^{-|m|} d(x_m, y_{m+p})` plus the tail bound `2^{1−T}·diam`, with `x` on `[-T, T]`.
fn weighted_upper(site: &TowerSite, x: &[u32], y: &[u32], y_center: usize, t: usize, power: i64, cutoff: f64) -> f64 {
    let mut s = 0.0;
    for (i, &xv) in x.iter().enumerate() {
        let m = i as i64 - t as i64;
        let yv = y[(y_center as i64 + m) as usize];
        let yv = if power == 0 { yv } else { site.perm.pow(yv, power) };
        s += 0.5f64.powi(m.unsigned_abs() as i32) * site.dist(xv, yv);
        if s > cutoff {
            return f64::INFINITY;
        }
    }
    s + 2f64.powi(1 - t as i32) * site.torus.diameter()
}

/// Finite-stage gap: for sampled `x ∈ X(A_n)` and `y ∈ X(A_{n+1})`, `min_p D(x, σ^p y)` against
/// `3/n + 2^{1 − span_n}` (for the periodic variant, pairs in `X(A_n) × X(A'_n)` and the joint offsets `(p, q)`).
///
/// Nets at levels with `1/m ≥ diam` are the zero orbit; at level `n ≥ 2` the net is built from the
/// sampled `x`-blocks, which is exactly what the proof consumes from the density of `B_n`.
#[allow(clippy::too_many_arguments)]
pub fn minimality_gap_check(variant: TowerVariant, l: &[u64], site: &TowerSite, n: usize, samples: usize, window: usize, seed: u64) -> Result<MinimalityReport> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidParams("minimality gap is checked at stages 1 and 2".into()));
    }
    if l.len() < n + 1 || l[0] != 1 {
        return Err(Error::InvalidParams(format!("need L_0 = 1 through L_{n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = site.torus.diameter();
    let mut levels: Vec<Level> = Vec::new();
    let mut span = 1u64;
    // levels 0..n-1 use nets with density 1/m ≥ diam (zero orbit)
    for m in 0..n {
        let eps = if m == 0 { f64::INFINITY } else { 1.0 / m as f64 };
        if eps <= diam {
            return Err(Error::DensityUnachievable(eps));
        }
        let zero = vec![vec![0u32; (3 * span) as usize]];
        let net = periodic_net(site, &zero, eps)?;
        let a = net.common_period.max(net.members.len() as u64);
        let stage = build_stage(variant, m, span, l[m + 1], site, &net, a)?;
        levels.push(Level { span, stage, net: net.clone(), net_primed: net });
        span = 3 * span * l[m + 1];
    }
    let span_n = span;
    let t = window.max(2 * span_n as usize + 2);
    let w = 2 * t + 1;
    let periodic = variant == TowerVariant::Periodic;
    // sampled pairs at level n: offsets l in (−2·span_n, −span_n]
    let mut xs = Vec::new();
    for _ in 0..samples {
        let mut parts = Vec::new();
        for primed in [false, true].into_iter().take(1 + periodic as usize) {
            let off = -(span_n as i64) - rng.gen_range(0..span_n as i64);
            let cfg = sample_config(site, &levels, n, primed, span_n, off, -(t as i64), w, &mut rng);
            let b0 = (off + t as i64) as usize;
            let block = cfg[b0..b0 + 3 * span_n as usize].to_vec();
            parts.push((cfg, block));
        }
        xs.push(parts);
    }
    let eps = 1.0 / n as f64;
    let targets: Vec<Vec<u32>> = xs.iter().map(|p| p[0].1.clone()).collect();
    let net = periodic_net(site, &targets, eps)?;
    let net_primed = if periodic { periodic_net(site, &xs.iter().map(|p| p[1].1.clone()).collect::<Vec<_>>(), eps)? } else { net.clone() };
    let b = net.members.len().max(net_primed.members.len()) as u64;
    let pad = |mut nt: PeriodicNet| {
        while (nt.members.len() as u64) < b {
            nt.members.push(nt.members[0].clone());
            nt.periods.push(nt.periods[0]);
        }
        nt
    };
    let (net, net_primed) = (pad(net), pad(net_primed));
    let a = {
        let p = net.common_period.lcm(&net_primed.common_period);
        b.div_ceil(p) * p
    };
    let forced = match variant {
        TowerVariant::Single => b,
        TowerVariant::Repeated => b * b,
        TowerVariant::Periodic => a * a * b,
    };
    let l_next = l.get(n + 1).copied().unwrap_or(forced + 1).max(forced + 1);
    let stage = build_stage(variant, n, span_n, l_next, site, &net, a)?;
    levels.push(Level { span: span_n, stage, net, net_primed });
    let span_next = 3 * span_n * l_next;
    let q_range: i64 = if periodic { site.order as i64 } else { 1 };
    let ylen = span_next as usize + w + q_range as usize + 1;
    let bound = 3.0 / n as f64 + 2f64.powi(1 - span_n as i32);
    let mut max_gap: f64 = 0.0;
    let mut scanned = 0u64;
    for parts in &xs {
        let ys: Vec<Vec<u32>> = (0..parts.len())
            .map(|i| sample_config(site, &levels, n + 1, i == 1, span_next, 0, 0, ylen, &mut rng))
            .collect();
        let mut best = f64::INFINITY;
        let x0 = &parts[0].0;
        for q in 0..q_range {
            for p in 0..span_next as usize {
                scanned += 1;
                let c0 = t + p;
                let d0 = weighted_upper(site, x0, &ys[0], c0, t, q, best);
                if d0 >= best {
                    continue;
                }
                let d = if periodic { d0.max(weighted_upper(site, &parts[1].0, &ys[1], c0 + q as usize, t, q, best)) } else { d0 };
                best = best.min(d);
            }
        }
        max_gap = max_gap.max(best);
    }
    Ok(MinimalityReport { n, bound, max_gap, pairs: xs.len(), offsets_scanned: scanned, l_next, net_size: b as usize, holds: max_gap < bound })
}
