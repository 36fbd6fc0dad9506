//! Exactly representable ℤᵏ systems: quantized tori, subshifts given by a local
//! rule, the product system `(σ, h_ℤ)` on `site^ℤ`, restricted systems `Y`, and
//! finite invariant subsystems on which every window metric is an exact table.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_metric::{window_points, LatticeVector, MetricMatrix, Window, DEFAULT_POINT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    Sup,
}

/// `((1/q)ℤ/ℤ)^r` with the quotient metric of the chosen norm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedTorus {
    pub r: usize,
    pub q: u32,
    pub norm: Norm,
}

impl QuantizedTorus {
    pub fn new(r: usize, q: u32, norm: Norm) -> Result<Self> {
        if r == 0 || q == 0 {
            return Err(Error::InvalidInput("torus needs r >= 1 and q >= 1".into()));
        }
        if (q as u128).pow(r as u32) > u32::MAX as u128 {
            return Err(Error::CapExceeded { what: "torus points", size: (q as u128).pow(r as u32), cap: u32::MAX as u128 });
        }
        Ok(QuantizedTorus { r, q, norm })
    }

    pub fn size(&self) -> u32 {
        self.q.pow(self.r as u32)
    }

    pub fn decode(&self, v: u32) -> Vec<u32> {
        let mut out = vec![0; self.r];
        let mut v = v;
        for c in out.iter_mut() {
            *c = v % self.q;
            v /= self.q;
        }
        out
    }

    pub fn encode(&self, coords: &[u32]) -> u32 {
        coords.iter().rev().fold(0, |acc, &c| acc * self.q + c % self.q)
    }

    pub fn dist(&self, a: u32, b: u32) -> f64 {
        let (ca, cb) = (self.decode(a), self.decode(b));
        let q = self.q as i64;
        let deltas = ca.iter().zip(&cb).map(|(&x, &y)| {
            let d = (x as i64 - y as i64).abs();
            d.min(q - d) as f64 / q as f64
        });
        match self.norm {
            Norm::Euclidean => deltas.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Sup => deltas.fold(0.0, f64::max),
        }
    }

    /// Diameter of the continuum torus: `√r/2` or `1/2`.
    pub fn diameter(&self) -> f64 {
        match self.norm {
            Norm::Euclidean => (self.r as f64).sqrt() / 2.0,
            Norm::Sup => 0.5,
        }
    }
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    // Bareiss fraction-free elimination.
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a = m.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Integer matrix with `|det| = 1`, acting on every quantized torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToralAutomorphism {
    pub m: Vec<Vec<i64>>,
}

impl ToralAutomorphism {
    pub fn new(m: Vec<Vec<i64>>) -> Result<Self> {
        let r = m.len();
        if r == 0 || m.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidInput("toral automorphism needs a square matrix".into()));
        }
        let t = ToralAutomorphism { m };
        if t.det().abs() != 1 {
            return Err(Error::InvalidInput(format!("|det| = {} != 1", t.det().abs())));
        }
        Ok(t)
    }

    pub fn rank(&self) -> usize {
        self.m.len()
    }

    pub fn det(&self) -> i64 {
        let w: Vec<Vec<i128>> = self.m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
        det_i128(&w) as i64
    }

    pub fn trace(&self) -> i64 {
        (0..self.rank()).map(|i| self.m[i][i]).sum()
    }

    /// Integer inverse via the adjugate.
    pub fn inverse(&self) -> ToralAutomorphism {
        let r = self.rank();
        let det = self.det();
        if r == 1 {
            return ToralAutomorphism { m: vec![vec![det]] };
        }
        let mut inv = vec![vec![0i64; r]; r];
        for i in 0..r {
            for j in 0..r {
                let minor: Vec<Vec<i128>> = (0..r)
                    .filter(|&a| a != j)
                    .map(|a| (0..r).filter(|&b| b != i).map(|b| self.m[a][b] as i128).collect())
                    .collect();
                let cof = if (i + j) % 2 == 0 { det_i128(&minor) } else { -det_i128(&minor) };
                inv[i][j] = (cof as i64) * det;
            }
        }
        ToralAutomorphism { m: inv }
    }

    pub fn apply_coords(&self, q: u32, c: &[u32]) -> Vec<u32> {
        let q = q as i64;
        self.m
            .iter()
            .map(|row| row.iter().zip(c).map(|(&a, &x)| a * x as i64).sum::<i64>().rem_euclid(q) as u32)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    /// Finite alphabet with the discrete metric (unit gap).
    Alphabet { size: u32 },
    Torus(QuantizedTorus),
}

impl Site {
    pub fn size(&self) -> u32 {
        match self {
            Site::Alphabet { size } => *size,
            Site::Torus(t) => t.size(),
        }
    }

    pub fn dist(&self, a: u32, b: u32) -> f64 {
        match self {
            Site::Alphabet { .. } => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            Site::Torus(t) => t.dist(a, b),
        }
    }

    /// Upper bound on pairwise distances (continuum diameter for tori).
    pub fn diameter(&self) -> f64 {
        match self {
            Site::Alphabet { size } => {
                if *size > 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Site::Torus(t) => t.diameter(),
        }
    }

    /// Smallest positive distance between site values.
    pub fn min_gap(&self) -> f64 {
        match self {
            Site::Alphabet { .. } => 1.0,
            Site::Torus(t) => 1.0 / t.q as f64,
        }
    }

    pub fn metric_matrix(&self) -> MetricMatrix {
        MetricMatrix::from_fn(self.size() as usize, |i, j| self.dist(i as u32, j as u32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteMap {
    Identity,
    Permutation(Vec<u32>),
    Toral(ToralAutomorphism),
}

/// A site map tabulated as a permutation together with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SitePerm {
    pub fwd: Vec<u32>,
    pub inv: Vec<u32>,
}

impl SitePerm {
    pub fn new(site: &Site, map: &SiteMap) -> Result<Self> {
        let n = site.size();
        let fwd: Vec<u32> = match map {
            SiteMap::Identity => (0..n).collect(),
            SiteMap::Permutation(p) => p.clone(),
            SiteMap::Toral(t) => match site {
                Site::Torus(tor) if tor.r == t.rank() => {
                    (0..n).map(|v| tor.encode(&t.apply_coords(tor.q, &tor.decode(v)))).collect()
                }
                _ => return Err(Error::InvalidInput("toral map needs a torus site of matching rank".into())),
            },
        };
        if fwd.len() != n as usize {
            return Err(Error::InvalidInput("permutation length differs from site size".into()));
        }
        let mut inv = vec![u32::MAX; n as usize];
        for (i, &v) in fwd.iter().enumerate() {
            if v >= n || inv[v as usize] != u32::MAX {
                return Err(Error::InvalidInput("site map is not a bijection".into()));
            }
            inv[v as usize] = i as u32;
        }
        Ok(SitePerm { fwd, inv })
    }

    pub fn identity(n: u32) -> Self {
        SitePerm { fwd: (0..n).collect(), inv: (0..n).collect() }
    }

    /// `h^b(v)` for any integer `b`.
    pub fn pow(&self, v: u32, b: i64) -> u32 {
        let table = if b >= 0 { &self.fwd } else { &self.inv };
        let mut v = v;
        for _ in 0..b.unsigned_abs() {
            v = table[v as usize];
        }
        v
    }

    pub fn orbit_len(&self, v: u32) -> usize {
        let mut w = self.fwd[v as usize];
        let mut n = 1;
        while w != v {
            w = self.fwd[w as usize];
            n += 1;
        }
        n
    }
}

/// Local rule of a subshift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Full,
    /// Forbidden value words on a finite shape.
    Forbidden { shape: Vec<LatticeVector>, words: Vec<Vec<u32>> },
    /// `Σ coeffs[i]·x_{shape[i]} ≡ 0` in `(1/q)ℤ/ℤ`; needs rank-1 torus sites.
    LinearModQ { shape: Vec<LatticeVector>, coeffs: Vec<i64> },
}

impl Rule {
    pub fn shape(&self) -> &[LatticeVector] {
        match self {
            Rule::Full => &[],
            Rule::Forbidden { shape, .. } | Rule::LinearModQ { shape, .. } => shape,
        }
    }

    pub fn allows(&self, site: &Site, values: &[u32]) -> bool {
        match self {
            Rule::Full => true,
            Rule::Forbidden { words, .. } => !words.iter().any(|w| w.as_slice() == values),
            Rule::LinearModQ { coeffs, .. } => {
                let q = site.size() as i64;
                coeffs.iter().zip(values).map(|(&c, &v)| c * v as i64).sum::<i64>().rem_euclid(q) == 0
            }
        }
    }
}

/// Subshift on `site^{ℤ^k}` given by a local rule; the action is by shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftSystem {
    pub k: usize,
    pub site: Site,
    pub rule: Rule,
}

impl SftSystem {
    pub fn full_shift(k: usize, symbols: u32) -> Self {
        SftSystem { k, site: Site::Alphabet { size: symbols }, rule: Rule::Full }
    }

    /// One-dimensional shift on two symbols forbidding the word `11`.
    pub fn golden_mean() -> Self {
        SftSystem {
            k: 1,
            site: Site::Alphabet { size: 2 },
            rule: Rule::Forbidden { shape: vec![vec![0].into(), vec![1].into()], words: vec![vec![1, 1]] },
        }
    }
}

/// `3x_{m,n} + x_{m+1,n} + x_{m,n+1} = 0` over `(1/q)ℤ/ℤ`.
pub fn build_three_term_system(q: u32) -> Result<SftSystem> {
    if q < 2 {
        return Err(Error::InvalidInput("q must be at least 2".into()));
    }
    Ok(SftSystem {
        k: 2,
        site: Site::Torus(QuantizedTorus::new(1, q, Norm::Euclidean)?),
        rule: Rule::LinearModQ {
            shape: vec![vec![0, 0].into(), vec![1, 0].into(), vec![0, 1].into()],
            coeffs: vec![3, 1, 1],
        },
    })
}

/// `(σ, h_ℤ)` acting on `site^ℤ`: `(a, b)` sends `x` to `σ^a h_ℤ^b x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductShiftSystem {
    pub site: Site,
    pub h: SiteMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Sft(SftSystem),
    Product(ProductShiftSystem),
}

impl System {
    /// Rank of the acting group.
    pub fn rank(&self) -> usize {
        match self {
            System::Sft(s) => s.k,
            System::Product(_) => 2,
        }
    }

    /// Rank of the lattice the configurations live on.
    pub fn config_rank(&self) -> usize {
        match self {
            System::Sft(s) => s.k,
            System::Product(_) => 1,
        }
    }

    pub fn site(&self) -> &Site {
        match self {
            System::Sft(s) => &s.site,
            System::Product(p) => &p.site,
        }
    }
}

/// Values on the centered box `[-radius, radius]^dim`, first coordinate slowest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigWindow {
    pub dim: usize,
    pub radius: i64,
    pub values: Vec<u32>,
}

impl ConfigWindow {
    pub fn new(dim: usize, radius: i64, values: Vec<u32>) -> Result<Self> {
        let side = (2 * radius + 1) as usize;
        if values.len() != side.pow(dim as u32) {
            return Err(Error::InvalidInput(format!("expected {} values", side.pow(dim as u32))));
        }
        Ok(ConfigWindow { dim, radius, values })
    }

    pub fn constant(dim: usize, radius: i64, v: u32) -> Self {
        let side = (2 * radius + 1) as usize;
        ConfigWindow { dim, radius, values: vec![v; side.pow(dim as u32)] }
    }

    pub fn margin(&self) -> i64 {
        self.radius
    }

    pub fn index(&self, v: &[i64]) -> Option<usize> {
        let side = 2 * self.radius + 1;
        let mut idx = 0i64;
        for &c in v {
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * side + (c + self.radius);
        }
        Some(idx as usize)
    }

    pub fn get(&self, v: &[i64]) -> Option<u32> {
        self.index(v).map(|i| self.values[i])
    }

    fn coords_of(&self, mut idx: usize) -> Vec<i64> {
        let side = (2 * self.radius + 1) as usize;
        let mut out = vec![0i64; self.dim];
        for c in out.iter_mut().rev() {
            *c = (idx % side) as i64 - self.radius;
            idx /= side;
        }
        out
    }
}

fn split_action(sys: &System, u: &LatticeVector) -> Result<(Vec<i64>, i64)> {
    if u.rank() != sys.rank() {
        return Err(Error::RankMismatch { expected: sys.rank(), got: u.rank() });
    }
    Ok(match sys {
        System::Sft(_) => (u.0.clone(), 0),
        System::Product(_) => (vec![u.0[0]], u.0[1]),
    })
}

/// `T^u` applied to a window; the shift part eats `|u|` of the margin.
pub fn apply(sys: &System, u: &LatticeVector, c: &ConfigWindow) -> Result<ConfigWindow> {
    let (shift, b) = split_action(sys, u)?;
    let s = shift.iter().map(|x| x.abs()).max().unwrap_or(0);
    if s > c.radius {
        return Err(Error::InsufficientMargin { needed: s, available: c.radius });
    }
    let perm = match sys {
        System::Product(p) => Some(SitePerm::new(&p.site, &p.h)?),
        System::Sft(_) => None,
    };
    let radius = c.radius - s;
    let side = (2 * radius + 1) as usize;
    let mut out = ConfigWindow { dim: c.dim, radius, values: Vec::with_capacity(side.pow(c.dim as u32)) };
    for idx in 0..side.pow(c.dim as u32) {
        let v = out.coords_of(idx);
        let src: Vec<i64> = v.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let val = c.get(&src).expect("inside margin");
        out.values.push(match &perm {
            Some(p) => p.pow(val, b),
            None => val,
        });
    }
    Ok(out)
}

/// `sup_{u ∈ Ω} d(T^u x, T^u y)` with the site distance at the origin as base metric.
pub fn window_metric(sys: &System, omega: &Window, x: &ConfigWindow, y: &ConfigWindow) -> Result<f64> {
    let pts = window_points(omega, DEFAULT_POINT_CAP)?;
    let perm = match sys {
        System::Product(p) => Some(SitePerm::new(&p.site, &p.h)?),
        System::Sft(_) => None,
    };
    let mut best: f64 = 0.0;
    for u in &pts {
        let (shift, b) = split_action(sys, u)?;
        let s = shift.iter().map(|x| x.abs()).max().unwrap_or(0);
        let avail = x.radius.min(y.radius);
        if s > avail {
            return Err(Error::InsufficientMargin { needed: s, available: avail });
        }
        let (mut a, mut c) = (x.get(&shift).unwrap(), y.get(&shift).unwrap());
        if let Some(p) = &perm {
            a = p.pow(a, b);
            c = p.pow(c, b);
        }
        best = best.max(sys.site().dist(a, c));
    }
    Ok(best)
}

/// Closed interval of reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lo - tol <= v && v <= self.hi + tol
    }
}

/// `Σ_n 2^{-|n|} d(x_n, y_n)` on `[-N, N]`, plus the unseen tail `2^{1-N}·diam`.
pub fn weighted_series_metric(site: &Site, x: &ConfigWindow, y: &ConfigWindow) -> Result<Interval> {
    if x.dim != 1 || y.dim != 1 || x.radius != y.radius {
        return Err(Error::InvalidInput("weighted series needs 1-d windows on the same domain".into()));
    }
    let n = x.radius;
    let mut s = 0.0;
    for i in -n..=n {
        let d = site.dist(x.get(&[i]).unwrap(), y.get(&[i]).unwrap());
        s += d * 0.5f64.powi(i.abs() as i32);
    }
    Ok(Interval { lo: s, hi: s + 2f64.powi(1 - n as i32) * site.diameter() })
}

/// Inclusive axis-aligned box of lattice points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Rect {
    pub fn centered(n: i64, k: usize) -> Self {
        Rect { lo: vec![-n; k], hi: vec![n; k] }
    }

    /// `[0, l-1]^k`.
    pub fn square(l: i64, k: usize) -> Self {
        Rect { lo: vec![0; k], hi: vec![l - 1; k] }
    }

    pub fn translate(&self, t: &[i64]) -> Self {
        Rect {
            lo: self.lo.iter().zip(t).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(t).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn cells(&self) -> u128 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a + 1).max(0) as u128).product()
    }

    fn sides(&self) -> Vec<i64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a + 1).collect()
    }

    fn index(&self, v: &[i64]) -> Option<usize> {
        let mut idx = 0i64;
        for ((&c, &lo), &hi) in v.iter().zip(&self.lo).zip(&self.hi) {
            if c < lo || c > hi {
                return None;
            }
            idx = idx * (hi - lo + 1) + (c - lo);
        }
        Some(idx as usize)
    }

    fn coords(&self, mut idx: usize) -> Vec<i64> {
        let sides = self.sides();
        let mut out = vec![0i64; sides.len()];
        for d in (0..sides.len()).rev() {
            out[d] = self.lo[d] + (idx % sides[d] as usize) as i64;
            idx /= sides[d] as usize;
        }
        out
    }
}

/// Rule placements fully inside the rect, as lists of cell indices.
fn placements(sys: &SftSystem, rect: &Rect) -> Vec<Vec<usize>> {
    let shape = sys.rule.shape();
    if shape.is_empty() {
        return Vec::new();
    }
    let n = rect.cells() as usize;
    let mut out = Vec::new();
    for idx in 0..n {
        let base = rect.coords(idx);
        let cells: Option<Vec<usize>> = shape.iter().map(|s| rect.index(&base.iter().zip(&s.0).map(|(a, b)| a + b).collect::<Vec<_>>())).collect();
        if let Some(c) = cells {
            out.push(c);
        }
    }
    out
}

fn check_site_for_rule(sys: &SftSystem) -> Result<()> {
    if sys.rule.shape().iter().any(|s| s.rank() != sys.k) {
        return Err(Error::RankMismatch { expected: sys.k, got: sys.rule.shape()[0].rank() });
    }
    if let Rule::LinearModQ { shape, coeffs } = &sys.rule {
        if shape.len() != coeffs.len() || !matches!(&sys.site, Site::Torus(t) if t.r == 1) {
            return Err(Error::InvalidInput("linear rule needs rank-1 torus sites and one coefficient per cell".into()));
        }
    }
    Ok(())
}

/// Locally legal patterns on `rect`, each a row-major value vector.
///
/// Backtracking over cells in order; each placement is checked when its last cell is
/// assigned, and linear rules with an invertible last coefficient force that value.
pub fn enumerate_patterns(sys: &SftSystem, rect: &Rect, cap: usize) -> Result<Vec<Vec<u32>>> {
    check_site_for_rule(sys)?;
    if rect.lo.len() != sys.k {
        return Err(Error::RankMismatch { expected: sys.k, got: rect.lo.len() });
    }
    let n = rect.cells() as usize;
    let pls = placements(sys, rect);
    backtrack(sys, n, &pls, cap)
}

fn forced(sys: &SftSystem, p: &[usize], last: usize, cur: &[u32], q: u32) -> Option<u32> {
    if let Rule::LinearModQ { coeffs, .. } = &sys.rule {
        let pos = p.iter().position(|&c| c == last)?;
        let a = coeffs[pos].rem_euclid(q as i64);
        let inv = (1..q as i64).find(|&t| (a * t).rem_euclid(q as i64) == 1)?;
        let rest: i64 = p.iter().enumerate().filter(|&(i, _)| i != pos).map(|(i, &c)| coeffs[i] * cur[c] as i64).sum();
        return Some(((-rest).rem_euclid(q as i64) * inv).rem_euclid(q as i64) as u32);
    }
    None
}

/// All assignments of `n` cells satisfying every placement.
fn backtrack(sys: &SftSystem, n: usize, pls: &[Vec<usize>], cap: usize) -> Result<Vec<Vec<u32>>> {
    let q = sys.site.size();
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (pi, p) in pls.iter().enumerate() {
        closing[*p.iter().max().unwrap()].push(pi);
    }
    struct Ctx<'a> {
        sys: &'a SftSystem,
        pls: &'a [Vec<usize>],
        closing: Vec<Vec<usize>>,
        q: u32,
        cap: usize,
    }
    fn go(i: usize, ctx: &Ctx, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) -> Result<()> {
        if i == cur.len() {
            if out.len() >= ctx.cap {
                return Err(Error::CapExceeded { what: "patterns", size: ctx.cap as u128 + 1, cap: ctx.cap as u128 });
            }
            out.push(cur.clone());
            return Ok(());
        }
        let candidates: Vec<u32> = match ctx.closing[i].iter().find_map(|&pi| forced(ctx.sys, &ctx.pls[pi], i, cur, ctx.q)) {
            Some(v) => vec![v],
            None => (0..ctx.q).collect(),
        };
        for v in candidates {
            cur[i] = v;
            let ok = ctx.closing[i].iter().all(|&pi| {
                let vals: Vec<u32> = ctx.pls[pi].iter().map(|&c| cur[c]).collect();
                ctx.sys.rule.allows(&ctx.sys.site, &vals)
            });
            if ok {
                go(i + 1, ctx, cur, out)?;
            }
        }
        Ok(())
    }
    let ctx = Ctx { sys, pls, closing, q, cap };
    let mut out = Vec::new();
    go(0, &ctx, &mut vec![0u32; n], &mut out)?;
    Ok(out)
}

/// Number of locally legal patterns on `rect`, by dynamic programming over the frontier
/// of cells still referenced by unfinished placements. `state_cap` bounds the frontier table.
pub fn count_patterns(sys: &SftSystem, rect: &Rect, state_cap: usize) -> Result<BigUint> {
    check_site_for_rule(sys)?;
    if rect.lo.len() != sys.k {
        return Err(Error::RankMismatch { expected: sys.k, got: rect.lo.len() });
    }
    let n = rect.cells() as usize;
    let q = sys.site.size();
    let pls = placements(sys, rect);
    if pls.is_empty() {
        return Ok(BigUint::from(q).pow(n as u32));
    }
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut last_use = vec![0usize; n];
    for (pi, p) in pls.iter().enumerate() {
        let mx = *p.iter().max().unwrap();
        closing[mx].push(pi);
        for &c in p {
            last_use[c] = last_use[c].max(mx);
        }
    }
    // Frontier after step i: cells j <= i with last_use[j] > i, in increasing order.
    let mut frontier: Vec<usize> = Vec::new();
    let mut table: HashMap<Vec<u32>, BigUint> = HashMap::new();
    table.insert(Vec::new(), BigUint::one());
    let mut free_factor = BigUint::one();
    for i in 0..n {
        let mut ext = frontier.clone();
        ext.push(i);
        let next_frontier: Vec<usize> = ext.iter().copied().filter(|&c| last_use[c] > i).collect();
        let keep: Vec<usize> = next_frontier.iter().map(|c| ext.iter().position(|e| e == c).unwrap()).collect();
        let involved = !closing[i].is_empty() || last_use[i] > i;
        if !involved {
            free_factor *= q;
            continue;
        }
        let mut next: HashMap<Vec<u32>, BigUint> = HashMap::new();
        for (state, cnt) in &table {
            for v in 0..q {
                let mut vals = state.clone();
                vals.push(v);
                let ok = closing[i].iter().all(|&pi| {
                    let w: Vec<u32> = pls[pi].iter().map(|&c| vals[ext.iter().position(|e| *e == c).unwrap()]).collect();
                    sys.rule.allows(&sys.site, &w)
                });
                if ok {
                    let key: Vec<u32> = keep.iter().map(|&k| vals[k]).collect();
                    *next.entry(key).or_insert_with(BigUint::zero) += cnt;
                }
            }
        }
        if next.len() > state_cap {
            return Err(Error::CapExceeded { what: "frontier states", size: next.len() as u128, cap: state_cap as u128 });
        }
        table = next;
        frontier = next_frontier;
    }
    let total: BigUint = table.values().fold(BigUint::zero(), |a, b| a + b);
    Ok(total * free_factor)
}

/// Index set `Λ ⊂ ℤ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSetSpec {
    /// Union of progressions `offset + step·ℤ`, `step ≥ 1`.
    ArithmeticUnion(Vec<(i64, i64)>),
    FiniteSet(Vec<i64>),
    /// Explicit membership on `[-radius, radius]`, periodic residues outside.
    ExplicitWindowFunction { radius: i64, inside: Vec<bool>, period: i64, residues: Vec<i64> },
}

impl IndexSetSpec {
    pub fn all() -> Self {
        IndexSetSpec::ArithmeticUnion(vec![(0, 1)])
    }

    pub fn empty() -> Self {
        IndexSetSpec::FiniteSet(Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IndexSetSpec::ArithmeticUnion(p) if p.iter().any(|&(_, s)| s < 1) => {
                Err(Error::InvalidInput("progression steps must be positive".into()))
            }
            IndexSetSpec::ExplicitWindowFunction { radius, inside, period, .. }
                if *period < 1 || inside.len() as i64 != 2 * radius + 1 =>
            {
                Err(Error::InvalidInput("explicit window needs 2r+1 flags and a positive period".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, n: i64) -> bool {
        match self {
            IndexSetSpec::ArithmeticUnion(p) => p.iter().any(|&(o, s)| (n - o).rem_euclid(s) == 0),
            IndexSetSpec::FiniteSet(v) => v.contains(&n),
            IndexSetSpec::ExplicitWindowFunction { radius, inside, period, residues } => {
                if n.abs() <= *radius {
                    inside[(n + radius) as usize]
                } else {
                    residues.iter().any(|&r| (n - r).rem_euclid(*period) == 0)
                }
            }
        }
    }

    /// Eventual period.
    pub fn period(&self) -> i64 {
        match self {
            IndexSetSpec::ArithmeticUnion(p) => p.iter().fold(1, |acc, &(_, s)| num_integer::lcm(acc, s)),
            IndexSetSpec::FiniteSet(_) => 1,
            IndexSetSpec::ExplicitWindowFunction { period, .. } => *period,
        }
    }

    /// Radius outside of which membership is periodic.
    pub fn exceptional_radius(&self) -> i64 {
        match self {
            IndexSetSpec::ArithmeticUnion(_) => 0,
            IndexSetSpec::FiniteSet(v) => v.iter().map(|x| x.abs()).max().unwrap_or(0),
            IndexSetSpec::ExplicitWindowFunction { radius, .. } => *radius,
        }
    }

    pub fn count_in(&self, lo: i64, hi: i64) -> usize {
        (lo..=hi).filter(|&n| self.contains(n)).count()
    }

    /// Union of two eventually periodic sets, as an explicit window function.
    pub fn union(&self, other: &IndexSetSpec) -> IndexSetSpec {
        let period = num_integer::lcm(self.period(), other.period());
        let radius = self.exceptional_radius().max(other.exceptional_radius());
        let inside = (-radius..=radius).map(|n| self.contains(n) || other.contains(n)).collect();
        // Residues taken from a block well outside both exceptional windows.
        let base = radius + 1;
        let residues = (base..base + period).filter(|&n| self.contains(n) || other.contains(n)).collect();
        IndexSetSpec::ExplicitWindowFunction { radius, inside, period, residues }
    }
}

/// Column structure for the systems of the `Y ⊂ (site)^ℤ` type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnSite {
    /// Finite site with a permutation `h`; a column pattern is determined by its value.
    Finite(ProductShiftSystem),
    /// Full shift on `symbols` letters playing the role of `h`.
    FullShift { symbols: u32 },
}

/// A point of `A`: a site value, or a periodic word for full-shift columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnPoint {
    Value(u32),
    Periodic(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSystem {
    pub base: ColumnSite,
    pub lambda: IndexSetSpec,
    pub a: Vec<ColumnPoint>,
}

fn periodic_at(w: &[u32], i: i64) -> u32 {
    w[i.rem_euclid(w.len() as i64) as usize]
}

fn same_periodic(u: &[u32], v: &[u32]) -> bool {
    let p = num_integer::lcm(u.len(), v.len()) as i64;
    (0..p).all(|i| periodic_at(u, i) == periodic_at(v, i))
}

/// Builds `Y`, checking that `A` is invariant under the column map.
pub fn build_restricted_y(base: ColumnSite, lambda: IndexSetSpec, a: Vec<ColumnPoint>) -> Result<RestrictedSystem> {
    lambda.validate()?;
    match &base {
        ColumnSite::Finite(p) => {
            let perm = SitePerm::new(&p.site, &p.h)?;
            let vals: Result<BTreeSet<u32>> = a
                .iter()
                .map(|x| match x {
                    ColumnPoint::Value(v) if *v < p.site.size() => Ok(*v),
                    _ => Err(Error::InvalidInput("finite column site needs value points".into())),
                })
                .collect();
            let vals = vals?;
            if vals.iter().any(|&v| !vals.contains(&perm.fwd[v as usize])) {
                return Err(Error::NotInvariant);
            }
        }
        ColumnSite::FullShift { symbols } => {
            let words: Result<Vec<&Vec<u32>>> = a
                .iter()
                .map(|x| match x {
                    ColumnPoint::Periodic(w) if !w.is_empty() && w.iter().all(|&s| s < *symbols) => Ok(w),
                    _ => Err(Error::InvalidInput("full-shift column needs nonempty periodic words".into())),
                })
                .collect();
            let words = words?;
            for w in &words {
                let shifted: Vec<u32> = (0..w.len() as i64).map(|i| periodic_at(w, i + 1)).collect();
                if !words.iter().any(|v| same_periodic(v, &shifted)) {
                    return Err(Error::NotInvariant);
                }
            }
        }
    }
    Ok(RestrictedSystem { base, lambda, a })
}

impl RestrictedSystem {
    /// Number of column patterns over `rows` consecutive rows: all of them, and those from `A`.
    pub fn column_counts(&self, rows: i64) -> (BigUint, BigUint) {
        match &self.base {
            ColumnSite::Finite(p) => {
                let distinct: BTreeSet<&ColumnPoint> = self.a.iter().collect();
                (BigUint::from(p.site.size()), BigUint::from(distinct.len()))
            }
            ColumnSite::FullShift { symbols } => {
                let windows: BTreeSet<Vec<u32>> = self
                    .a
                    .iter()
                    .map(|x| match x {
                        ColumnPoint::Periodic(w) => (0..rows).map(|i| periodic_at(w, i)).collect(),
                        ColumnPoint::Value(v) => vec![*v; rows as usize],
                    })
                    .collect();
                (BigUint::from(*symbols).pow(rows as u32), BigUint::from(windows.len()))
            }
        }
    }

    /// Maximal sets `{n ∈ [lo, hi] : n + l ∈ Λ}` over all offsets `l`, as bitmasks.
    pub fn free_column_families(&self, lo: i64, hi: i64) -> Vec<Vec<bool>> {
        let w = (hi - lo + 1) as usize;
        let p = self.lambda.period();
        let r = self.lambda.exceptional_radius();
        let span = r + hi.abs().max(lo.abs()) + p + 1;
        let mut sets: BTreeSet<Vec<bool>> = BTreeSet::new();
        for l in -span..=span {
            sets.insert((0..w).map(|i| self.lambda.contains(lo + i as i64 + l)).collect());
        }
        let all: Vec<Vec<bool>> = sets.into_iter().collect();
        all.iter()
            .filter(|s| !all.iter().any(|t| t != *s && s.iter().zip(t).all(|(a, b)| !a || *b)))
            .cloned()
            .collect()
    }

    /// Exact number of patterns of `Y` on columns `[lo, hi]` and `rows` rows, by
    /// inclusion–exclusion over the maximal free-column sets.
    pub fn count_patterns(&self, lo: i64, hi: i64, rows: i64) -> Result<BigUint> {
        let (f, a) = self.column_counts(rows);
        self.union_count(lo, hi, &f, &a)
    }

    /// `|∪_l P_l|` where `P_l` has `f` choices on free columns and `a` elsewhere.
    pub fn union_count(&self, lo: i64, hi: i64, f: &BigUint, a: &BigUint) -> Result<BigUint> {
        let fam = self.free_column_families(lo, hi);
        if fam.len() > 20 {
            return Err(Error::CapExceeded { what: "free-column families", size: fam.len() as u128, cap: 20 });
        }
        let w = (hi - lo + 1) as u32;
        let mut pos = BigUint::zero();
        let mut neg = BigUint::zero();
        for mask in 1u32..(1 << fam.len()) {
            let inter = (0..w as usize).filter(|&i| (0..fam.len()).all(|j| mask >> j & 1 == 0 || fam[j][i])).count() as u32;
            let term = f.pow(inter) * a.pow(w - inter);
            if mask.count_ones() % 2 == 1 {
                pos += term;
            } else {
                neg += term;
            }
        }
        Ok(pos - neg)
    }

    /// Largest number of free columns over all offsets.
    pub fn max_free_columns(&self, lo: i64, hi: i64) -> usize {
        self.free_column_families(lo, hi).iter().map(|s| s.iter().filter(|&&b| b).count()).max().unwrap_or(0)
    }
}

/// `|A ∩ [-N,N]^k|` for a rank-(k−1) subgroup and the ratio `N^{k−1} / count`.
pub fn subgroup_box_density(basis: &[LatticeVector], k: usize, n: i64) -> Result<(u64, Ratio<i64>)> {
    if basis.len() + 1 != k || basis.iter().any(|b| b.rank() != k) {
        return Err(Error::RankMismatch { expected: k - 1, got: basis.len() });
    }
    let cols: Vec<Vec<Ratio<i128>>> = basis.iter().map(|b| b.0.iter().map(|&x| Ratio::from_integer(x as i128)).collect()).collect();
    if rank_q(&cols) != k - 1 {
        return Err(Error::RankMismatch { expected: k - 1, got: rank_q(&cols) });
    }
    let pts = window_points(&Window::Box { n, k }, DEFAULT_POINT_CAP)?;
    let count = pts.iter().filter(|p| in_lattice(&cols, p)).count() as u64;
    Ok((count, Ratio::new(n.pow(k as u32 - 1), count as i64)))
}

fn rank_q(cols: &[Vec<Ratio<i128>>]) -> usize {
    let mut rows: Vec<Vec<Ratio<i128>>> = cols.to_vec();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    for c in 0..m {
        if let Some(p) = (rank..rows.len()).find(|&i| !rows[i][c].is_zero()) {
            rows.swap(rank, p);
            for i in 0..rows.len() {
                if i != rank && !rows[i][c].is_zero() {
                    let f = rows[i][c] / rows[rank][c];
                    let pivot = rows[rank].clone();
                    for (x, y) in rows[i].iter_mut().zip(&pivot) {
                        *x -= f * y;
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

fn in_lattice(cols: &[Vec<Ratio<i128>>], p: &LatticeVector) -> bool {
    // Solve Σ c_j b_j = p over ℚ; member iff solvable with integer c.
    let k = p.rank();
    let m = cols.len();
    let mut a: Vec<Vec<Ratio<i128>>> = (0..k)
        .map(|i| {
            let mut row: Vec<Ratio<i128>> = (0..m).map(|j| cols[j][i]).collect();
            row.push(Ratio::from_integer(p.0[i] as i128));
            row
        })
        .collect();
    let mut piv_cols = Vec::new();
    let mut r = 0;
    for c in 0..m {
        if let Some(pi) = (r..k).find(|&i| !a[i][c].is_zero()) {
            a.swap(r, pi);
            let lead = a[r][c];
            for x in a[r].iter_mut() {
                *x /= lead;
            }
            for i in 0..k {
                if i != r && !a[i][c].is_zero() {
                    let f = a[i][c];
                    let pivot = a[r].clone();
                    for (x, y) in a[i].iter_mut().zip(&pivot) {
                        *x -= f * y;
                    }
                }
            }
            piv_cols.push(c);
            r += 1;
        }
    }
    if (r..k).any(|i| !a[i][m].is_zero()) {
        return false;
    }
    (0..r).all(|i| a[i][m].is_integer())
}

/// A finite invariant subsystem: points `0..n`, generator permutations, base metric table.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteAction {
    pub gens: Vec<Vec<usize>>,
    pub inv: Vec<Vec<usize>>,
    pub base: MetricMatrix,
}

/// Base metric used when tabulating a finite subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMetric {
    /// Site distance at the origin.
    Origin,
    /// `Σ_n 2^{-|n|₁} d(x_n, y_n)`, summed exactly over periodic configurations.
    Weighted,
}

/// `Σ_{n ≡ r mod p} 2^{-|n|}` for `r ∈ [0, p)`.
fn periodic_weights(p: usize) -> Vec<f64> {
    let denom = 1.0 - 0.5f64.powi(p as i32);
    (0..p).map(|r| (0.5f64.powi(r as i32) + 0.5f64.powi((p - r) as i32)) / denom).collect()
}

impl FiniteAction {
    pub fn new(gens: Vec<Vec<usize>>, base: MetricMatrix) -> Result<Self> {
        let n = base.len();
        let mut inv = Vec::new();
        for g in &gens {
            if g.len() != n {
                return Err(Error::InvalidInput("generator length differs from point count".into()));
            }
            let mut gi = vec![usize::MAX; n];
            for (i, &j) in g.iter().enumerate() {
                if j >= n || gi[j] != usize::MAX {
                    return Err(Error::InvalidInput("generator is not a permutation".into()));
                }
                gi[j] = i;
            }
            inv.push(gi);
        }
        Ok(FiniteAction { gens, inv, base })
    }

    /// The identity action of rank `k` on a finite metric space.
    pub fn identity(base: MetricMatrix, k: usize) -> Self {
        let n = base.len();
        FiniteAction { gens: vec![(0..n).collect(); k], inv: vec![(0..n).collect(); k], base }
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn act(&self, u: &LatticeVector, mut i: usize) -> usize {
        for (g, &c) in u.0.iter().enumerate() {
            let table = if c >= 0 { &self.gens[g] } else { &self.inv[g] };
            for _ in 0..c.unsigned_abs() {
                i = table[i];
            }
        }
        i
    }

    pub fn commutes(&self) -> bool {
        let n = self.len();
        for a in 0..self.rank() {
            for b in (a + 1)..self.rank() {
                if (0..n).any(|i| self.gens[a][self.gens[b][i]] != self.gens[b][self.gens[a][i]]) {
                    return false;
                }
            }
        }
        true
    }

    /// Orbit tables `orbit[u][i] = T^u i` for the given lattice points.
    /// Distinct orbit maps `i ↦ T^u i` over the given lattice points.
    pub fn orbit_table(&self, pts: &[LatticeVector]) -> Vec<Vec<usize>> {
        let set: BTreeSet<Vec<usize>> = pts.iter().map(|u| (0..self.len()).map(|i| self.act(u, i)).collect()).collect();
        set.into_iter().collect()
    }

    /// Window metric table `max_{u ∈ pts} base(T^u i, T^u j)`.
    pub fn window_matrix(&self, pts: &[LatticeVector]) -> MetricMatrix {
        let orbits = self.orbit_table(pts);
        self.window_matrix_from(&orbits, &self.base)
    }

    /// Window metric of an arbitrary base table along precomputed orbits.
    pub fn window_matrix_from(&self, orbits: &[Vec<usize>], base: &MetricMatrix) -> MetricMatrix {
        MetricMatrix::from_fn(self.len(), |i, j| orbits.iter().map(|o| base.get(o[i], o[j])).fold(0.0, f64::max))
    }

    pub fn window_matrix_of(&self, w: &Window) -> Result<MetricMatrix> {
        Ok(self.window_matrix(&window_points(w, DEFAULT_POINT_CAP)?))
    }

    /// Restricts the action to the subgroup generated by `basis` (rows are lattice vectors).
    pub fn restrict(&self, basis: &[LatticeVector]) -> FiniteAction {
        let gens: Vec<Vec<usize>> = basis.iter().map(|u| (0..self.len()).map(|i| self.act(u, i)).collect()).collect();
        FiniteAction::new(gens, self.base.clone()).expect("restriction of a permutation action")
    }
}

/// All `period`-periodic configurations of the product system with `σ` and `h_ℤ` as generators.
pub fn periodic_product_points(sys: &ProductShiftSystem, period: usize, metric: BaseMetric, cap: usize) -> Result<(FiniteAction, Vec<Vec<u32>>)> {
    let s = sys.site.size() as u128;
    let total = s.pow(period as u32);
    if total > cap as u128 {
        return Err(Error::CapExceeded { what: "periodic points", size: total, cap: cap as u128 });
    }
    let perm = SitePerm::new(&sys.site, &sys.h)?;
    let total = total as usize;
    let decode = |mut i: usize| -> Vec<u32> {
        (0..period)
            .map(|_| {
                let v = (i % s as usize) as u32;
                i /= s as usize;
                v
            })
            .collect()
    };
    let encode = |w: &[u32]| -> usize { w.iter().rev().fold(0usize, |acc, &v| acc * s as usize + v as usize) };
    let words: Vec<Vec<u32>> = (0..total).map(decode).collect();
    let sigma: Vec<usize> = words.iter().map(|w| encode(&(0..period).map(|i| w[(i + 1) % period]).collect::<Vec<_>>())).collect();
    let h: Vec<usize> = words.iter().map(|w| encode(&w.iter().map(|&v| perm.fwd[v as usize]).collect::<Vec<_>>())).collect();
    let weights = periodic_weights(period);
    let base = MetricMatrix::from_fn(total, |i, j| match metric {
        BaseMetric::Origin => sys.site.dist(words[i][0], words[j][0]),
        BaseMetric::Weighted => (0..period).map(|r| weights[r] * sys.site.dist(words[i][r], words[j][r])).sum(),
    });
    Ok((FiniteAction::new(vec![sigma, h], base)?, words))
}

/// Legal configurations of an SFT that are periodic with the given periods (toroidal patterns).
pub fn periodic_sft_points(sys: &SftSystem, periods: &[usize], metric: BaseMetric, cap: usize) -> Result<(FiniteAction, Vec<Vec<u32>>)> {
    check_site_for_rule(sys)?;
    if periods.len() != sys.k || periods.iter().any(|&p| p == 0) {
        return Err(Error::RankMismatch { expected: sys.k, got: periods.len() });
    }
    let rect = Rect { lo: vec![0; sys.k], hi: periods.iter().map(|&p| p as i64 - 1).collect() };
    let n_cells = rect.cells() as usize;
    let wrap = |v: &[i64]| -> usize {
        let w: Vec<i64> = v.iter().zip(periods).map(|(&c, &p)| c.rem_euclid(p as i64)).collect();
        rect.index(&w).unwrap()
    };
    let shape = sys.rule.shape().to_vec();
    let mut pls: Vec<Vec<usize>> = Vec::new();
    for idx in 0..n_cells {
        let b = rect.coords(idx);
        pls.push(shape.iter().map(|s| wrap(&b.iter().zip(&s.0).map(|(a, c)| a + c).collect::<Vec<_>>())).collect());
    }
    let words = backtrack(sys, n_cells, &pls, cap)?;
    let index: HashMap<Vec<u32>, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let mut gens = Vec::new();
    for axis in 0..sys.k {
        gens.push(
            words
                .iter()
                .map(|w| {
                    let shifted: Vec<u32> = (0..n_cells)
                        .map(|idx| {
                            let mut c = rect.coords(idx);
                            c[axis] += 1;
                            w[wrap(&c)]
                        })
                        .collect();
                    index[&shifted]
                })
                .collect(),
        );
    }
    let axis_w: Vec<Vec<f64>> = periods.iter().map(|&p| periodic_weights(p)).collect();
    let origin = rect.index(&vec![0; sys.k]).unwrap();
    let base = MetricMatrix::from_fn(words.len(), |i, j| match metric {
        BaseMetric::Origin => sys.site.dist(words[i][origin], words[j][origin]),
        BaseMetric::Weighted => (0..n_cells)
            .map(|idx| {
                let c = rect.coords(idx);
                let w: f64 = c.iter().enumerate().map(|(a, &x)| axis_w[a][x as usize]).product();
                w * sys.site.dist(words[i][idx], words[j][idx])
            })
            .sum(),
    });
    Ok((FiniteAction::new(gens, base)?, words))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[i64]) -> LatticeVector {
        LatticeVector(v.to_vec())
    }

    fn brute_count(sys: &SftSystem, rect: &Rect) -> usize {
        let n = rect.cells() as usize;
        let q = sys.site.size();
        let pls = placements(sys, rect);
        let mut count = 0;
        let mut cur = vec![0u32; n];
        'outer: loop {
            if pls.iter().all(|p| sys.rule.allows(&sys.site, &p.iter().map(|&c| cur[c]).collect::<Vec<_>>())) {
                count += 1;
            }
            for c in cur.iter_mut() {
                *c += 1;
                if *c < q {
                    continue 'outer;
                }
                *c = 0;
            }
            return count;
        }
    }

    #[test]
    fn toral_example() {
        let t = QuantizedTorus::new(2, 5, Norm::Euclidean).unwrap();
        let m = ToralAutomorphism::new(vec![vec![2, 1], vec![1, 1]]).unwrap();
        assert_eq!(m.apply_coords(5, &[1, 2]), vec![4, 3]);
        let sys = System::Product(ProductShiftSystem { site: Site::Torus(t.clone()), h: SiteMap::Toral(m.clone()) });
        let c = ConfigWindow::new(1, 0, vec![t.encode(&[1, 2])]).unwrap();
        let out = apply(&sys, &lv(&[0, 1]), &c).unwrap();
        assert_eq!(t.decode(out.values[0]), vec![4, 3]);
        let back = apply(&sys, &lv(&[0, -1]), &out).unwrap();
        assert_eq!(back, c);
        assert!(ToralAutomorphism::new(vec![vec![2, 0], vec![0, 1]]).is_err());
        assert!((t.diameter() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn apply_identity_and_margin() {
        let sys = System::Sft(SftSystem::full_shift(2, 2));
        let c = ConfigWindow::new(2, 1, (0..9).map(|i| i % 2).collect()).unwrap();
        assert_eq!(apply(&sys, &lv(&[0, 0]), &c).unwrap(), c);
        assert!(matches!(apply(&sys, &lv(&[2, 0]), &c), Err(Error::InsufficientMargin { .. })));
        let p = System::Product(ProductShiftSystem { site: Site::Alphabet { size: 3 }, h: SiteMap::Identity });
        let c1 = ConfigWindow::new(1, 2, vec![0, 1, 2, 1, 0]).unwrap();
        assert_eq!(apply(&p, &lv(&[0, 5]), &c1).unwrap(), c1);
    }

    #[test]
    fn window_metric_examples() {
        let sys = System::Sft(SftSystem::full_shift(1, 2));
        let x = ConfigWindow::constant(1, 6, 0);
        let mut y = x.clone();
        y.values[(3 + 6) as usize] = 1;
        assert_eq!(window_metric(&sys, &Window::Box { n: 5, k: 1 }, &x, &x).unwrap(), 0.0);
        assert_eq!(window_metric(&sys, &Window::Box { n: 5, k: 1 }, &x, &y).unwrap(), 1.0);
        assert_eq!(window_metric(&sys, &Window::Box { n: 0, k: 1 }, &x, &y).unwrap(), 0.0);
        // max over a union of windows equals max of the parts
        let a = Window::Explicit(vec![lv(&[-2]), lv(&[1])]);
        let b = Window::Explicit(vec![lv(&[3])]);
        let u = Window::Explicit(vec![lv(&[-2]), lv(&[1]), lv(&[3])]);
        let ma = window_metric(&sys, &a, &x, &y).unwrap();
        let mb = window_metric(&sys, &b, &x, &y).unwrap();
        assert_eq!(window_metric(&sys, &u, &x, &y).unwrap(), ma.max(mb));
    }

    #[test]
    fn weighted_examples() {
        let site = Site::Alphabet { size: 2 };
        let x = ConfigWindow::constant(1, 10, 0);
        let i = weighted_series_metric(&site, &x, &x).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 2f64.powi(-9)));
        let mut y = x.clone();
        y.values[10] = 1;
        let i = weighted_series_metric(&site, &x, &y).unwrap();
        assert_eq!((i.lo, i.hi), (1.0, 1.0 + 2f64.powi(-9)));
        let x4 = ConfigWindow::constant(1, 4, 0);
        let mut y4 = x4.clone();
        y4.values[3] = 1;
        y4.values[5] = 1;
        let i = weighted_series_metric(&site, &x4, &y4).unwrap();
        assert_eq!((i.lo, i.hi), (1.0, 1.0 + 0.125));
    }

    #[test]
    fn three_term_counts() {
        let s2 = build_three_term_system(2).unwrap();
        assert_eq!(enumerate_patterns(&s2, &Rect::square(2, 2), 1000).unwrap().len(), 8);
        let s3 = build_three_term_system(3).unwrap();
        assert_eq!(brute_count(&s3, &Rect::square(2, 2)), 27);
        assert_eq!(enumerate_patterns(&s3, &Rect::square(2, 2), 1000).unwrap().len(), 27);
        for q in [2u32, 3] {
            let s = build_three_term_system(q).unwrap();
            for l in 2..=3 {
                let r = Rect::square(l, 2);
                let b = brute_count(&s, &r);
                assert_eq!(b as u64, (q as u64).pow(2 * l as u32 - 1));
                assert_eq!(count_patterns(&s, &r, 1 << 20).unwrap(), BigUint::from(b));
            }
        }
        // all-zero legal; constant 1/2 illegal at q = 2
        let rule = &s2.rule;
        assert!(rule.allows(&s2.site, &[0, 0, 0]));
        assert!(!rule.allows(&s2.site, &[1, 1, 1]));
        assert!(build_three_term_system(1).is_err());
    }

    #[test]
    fn counts_are_translation_invariant() {
        let s = build_three_term_system(3).unwrap();
        let r = Rect::square(3, 2);
        let a = count_patterns(&s, &r, 1 << 20).unwrap();
        let b = count_patterns(&s, &r.translate(&[-7, 4]), 1 << 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_shift_and_golden() {
        let fs = SftSystem::full_shift(1, 2);
        assert_eq!(enumerate_patterns(&fs, &Rect::square(5, 1), 100).unwrap().len(), 32);
        let g = SftSystem::golden_mean();
        let fib = [1u64, 1, 2, 3, 5, 8, 13, 21, 34, 55];
        for len in 1..8 {
            assert_eq!(count_patterns(&g, &Rect::square(len, 1), 100).unwrap(), BigUint::from(fib[len as usize + 1]));
        }
    }

    #[test]
    fn restricted_oracle_small() {
        // Λ = 2ℤ, two-symbol full-shift columns, A = {0^∞}; brute force over 3×3 binary arrays.
        let y = build_restricted_y(
            ColumnSite::FullShift { symbols: 2 },
            IndexSetSpec::ArithmeticUnion(vec![(0, 2)]),
            vec![ColumnPoint::Periodic(vec![0])],
        )
        .unwrap();
        for n in 1..=2i64 {
            let w = (2 * n + 1) as usize;
            let mut brute = 0u64;
            for bits in 0u64..(1 << (w * w)) {
                let col_zero = |c: usize| (0..w).all(|r| bits >> (c * w + r) & 1 == 0);
                let ok = (0..2i64).any(|l| (0..w).all(|c| y.lambda.contains(c as i64 - n + l) || col_zero(c)));
                brute += ok as u64;
            }
            assert_eq!(y.count_patterns(-n, n, 2 * n + 1).unwrap(), BigUint::from(brute));
        }
        assert!(build_restricted_y(
            ColumnSite::FullShift { symbols: 2 },
            IndexSetSpec::all(),
            vec![ColumnPoint::Periodic(vec![0, 1])],
        )
        .is_err());
    }

    #[test]
    fn restricted_degenerate_cases() {
        let site = Site::Alphabet { size: 3 };
        let base = ColumnSite::Finite(ProductShiftSystem { site, h: SiteMap::Permutation(vec![1, 2, 0]) });
        let full = build_restricted_y(base.clone(), IndexSetSpec::all(), vec![]).unwrap();
        assert_eq!(full.count_patterns(-2, 2, 5).unwrap(), BigUint::from(3u32).pow(5));
        assert!(build_restricted_y(base.clone(), IndexSetSpec::empty(), vec![ColumnPoint::Value(0)]).is_err());
        let fixed = ColumnSite::Finite(ProductShiftSystem { site: Site::Alphabet { size: 3 }, h: SiteMap::Identity });
        let single = build_restricted_y(fixed, IndexSetSpec::empty(), vec![ColumnPoint::Value(0)]).unwrap();
        assert_eq!(single.count_patterns(-3, 3, 7).unwrap(), BigUint::one());
    }

    #[test]
    fn subgroup_density_examples() {
        let (c, r) = subgroup_box_density(&[lv(&[1, 0])], 2, 10).unwrap();
        assert_eq!((c, r), (21, Ratio::new(10, 21)));
        assert_eq!(subgroup_box_density(&[lv(&[2, 0])], 2, 10).unwrap().0, 11);
        assert_eq!(subgroup_box_density(&[lv(&[1, 1])], 2, 10).unwrap().0, 21);
        assert!(subgroup_box_density(&[lv(&[1, 0]), lv(&[0, 1])], 2, 10).is_err());
        assert!(subgroup_box_density(&[lv(&[1, 1, 0]), lv(&[2, 2, 0])], 3, 2).is_err());
    }

    #[test]
    fn index_sets() {
        let s = IndexSetSpec::ArithmeticUnion(vec![(0, 7), (1, 7), (3, 7)]);
        assert_eq!(s.period(), 7);
        assert_eq!(s.count_in(0, 13), 6);
        let u = s.union(&IndexSetSpec::FiniteSet(vec![5, 40]));
        assert!(u.contains(5) && u.contains(40) && u.contains(14) && !u.contains(41));
        assert_eq!(u.period(), 7);
    }

    #[test]
    fn periodic_subsystems_commute() {
        let t = QuantizedTorus::new(2, 2, Norm::Euclidean).unwrap();
        let sys = ProductShiftSystem { site: Site::Torus(t), h: SiteMap::Toral(ToralAutomorphism::new(vec![vec![2, 1], vec![1, 1]]).unwrap()) };
        let (fa, words) = periodic_product_points(&sys, 3, BaseMetric::Weighted, 512).unwrap();
        assert_eq!(words.len(), 64);
        assert!(fa.commutes());
        assert!(fa.base.triangle_violation().is_none());
        let s13 = build_three_term_system(3).unwrap();
        let (fb, w) = periodic_sft_points(&s13, &[2, 2], BaseMetric::Weighted, 512).unwrap();
        assert!(!w.is_empty());
        assert!(fb.commutes());
    }

    #[test]
    fn periodic_weights_sum() {
        for p in 1..8 {
            let s: f64 = periodic_weights(p).iter().sum();
            assert!((s - 3.0).abs() < 1e-12);
        }
    }
}
