//! Lattice windows, finite metric tables, covers, and covering/packing counts.
//!
//! Covers are point-subset covers of a finite sample; "diameter < ε" stands in
//! for openness. Covering numbers come back as a [`CountBracket`]: a packing
//! witness below and an explicit cover above, collapsed to the exact value by
//! branch-and-bound when the sample is small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of lattice points a window may enumerate.
pub const DEFAULT_POINT_CAP: u128 = 1 << 24;

/// Samples up to this size get exact covering and packing numbers.
pub const DEFAULT_EXACT_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector(pub Vec<i64>);

impl LatticeVector {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticeVector(coords)
    }

    pub fn zero(k: usize) -> Self {
        LatticeVector(vec![0; k])
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// Max of absolute coordinates.
    pub fn norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> LatticeVector {
        LatticeVector(self.0.iter().map(|a| -a).collect())
    }
}

impl From<Vec<i64>> for LatticeVector {
    fn from(v: Vec<i64>) -> Self {
        LatticeVector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Window {
    /// The box `[-n, n]^k`.
    Box { n: i64, k: usize },
    /// Lattice points of the box with at least one coordinate equal to `±n`.
    Boundary { n: i64, k: usize },
    Explicit(Vec<LatticeVector>),
}

impl Window {
    pub fn rank(&self) -> Option<usize> {
        match self {
            Window::Box { k, .. } | Window::Boundary { k, .. } => Some(*k),
            Window::Explicit(pts) => pts.first().map(|p| p.rank()),
        }
    }

    pub fn contains(&self, u: &LatticeVector) -> bool {
        match self {
            Window::Box { n, k } => u.rank() == *k && u.norm() <= *n,
            Window::Boundary { n, k } => u.rank() == *k && u.norm() == *n,
            Window::Explicit(pts) => pts.contains(u),
        }
    }

    /// Largest norm of a point in the window.
    pub fn radius(&self) -> i64 {
        match self {
            Window::Box { n, .. } | Window::Boundary { n, .. } => *n,
            Window::Explicit(pts) => pts.iter().map(|p| p.norm()).max().unwrap_or(0),
        }
    }
}

/// Enumerates the lattice points of a window in lexicographic order.
pub fn window_points(w: &Window, cap: u128) -> Result<Vec<LatticeVector>> {
    match w {
        Window::Explicit(pts) => {
            if pts.len() as u128 > cap {
                return Err(Error::CapExceeded { what: "window points", size: pts.len() as u128, cap });
            }
            Ok(pts.clone())
        }
        Window::Box { n, k } | Window::Boundary { n, k } => {
            if *n < 0 || *k == 0 {
                return Err(Error::InvalidInput(format!("window needs n >= 0 and k >= 1, got n={n}, k={k}")));
            }
            let side = (2 * *n + 1) as u128;
            let size = side
                .checked_pow(*k as u32)
                .ok_or(Error::CapExceeded { what: "window points", size: u128::MAX, cap })?;
            if size > cap {
                return Err(Error::CapExceeded { what: "window points", size, cap });
            }
            let boundary_only = matches!(w, Window::Boundary { .. });
            let mut out = Vec::new();
            let mut cur = vec![-*n; *k];
            loop {
                if !boundary_only || cur.iter().any(|c| c.abs() == *n) {
                    out.push(LatticeVector(cur.clone()));
                }
                let mut i = *k;
                loop {
                    if i == 0 {
                        return Ok(out);
                    }
                    i -= 1;
                    if cur[i] < *n {
                        cur[i] += 1;
                        break;
                    }
                    cur[i] = -*n;
                }
            }
        }
    }
}

/// Symmetric table of pairwise distances on `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMatrix {
    n: usize,
    dist: Vec<f64>,
    /// Slack used when checking axioms.
    pub tol: f64,
}

impl MetricMatrix {
    /// Builds the table from a distance function evaluated on `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        MetricMatrix { n, dist, tol: 1e-12 }
    }

    /// Takes a flat row-major table, checking zero diagonal, symmetry and nonnegativity.
    pub fn from_flat(n: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != n * n {
            return Err(Error::InvalidInput(format!("expected {} entries, got {}", n * n, dist.len())));
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !(d >= 0.0) || d != dist[j * n + i] {
                    return Err(Error::InvalidInput(format!("entry ({i},{j}) negative or asymmetric")));
                }
            }
        }
        Ok(MetricMatrix { n, dist, tol: 1e-12 })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_flat(n, flat)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.dist
    }

    pub fn diameter_of(&self, set: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                d = d.max(self.get(i, j));
            }
        }
        d
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// First triple `(i, j, k)` with `d(i,k) > d(i,j) + d(j,k) + tol`, if any.
    pub fn triangle_violation(&self) -> Option<(usize, usize, usize)> {
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    if self.get(i, k) > self.get(i, j) + self.get(j, k) + self.tol {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    /// Restriction to a subset of the points, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> MetricMatrix {
        MetricMatrix { tol: self.tol, ..MetricMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b])) }
    }
}

/// A cover of the points `0..n_points` by index subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub n_points: usize,
    pub sets: Vec<Vec<usize>>,
}

impl Cover {
    /// Checks indices and that every point is covered.
    pub fn new(n_points: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n_points];
        for s in &sets {
            for &i in s {
                if i >= n_points {
                    return Err(Error::InvalidInput(format!("index {i} out of range {n_points}")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("point {i} is not covered")));
        }
        Ok(Cover { n_points, sets })
    }

    pub fn trivial(n_points: usize) -> Self {
        Cover { n_points, sets: vec![(0..n_points).collect()] }
    }

    pub fn singletons(n_points: usize) -> Self {
        Cover { n_points, sets: (0..n_points).map(|i| vec![i]).collect() }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.n_points];
        for s in &self.sets {
            for &i in s {
                m[i] += 1;
            }
        }
        m
    }
}

/// Max over points of the number of sets containing it, minus one.
pub fn cover_order(c: &Cover) -> Result<usize> {
    if c.sets.is_empty() {
        return Err(Error::EmptyCover);
    }
    Ok(c.multiplicities().into_iter().max().unwrap_or(1).saturating_sub(1))
}

/// Largest set diameter.
pub fn mesh(c: &Cover, m: &MetricMatrix) -> f64 {
    c.sets.iter().map(|s| m.diameter_of(s)).fold(0.0, f64::max)
}

/// All nonempty pairwise intersections of the two covers.
pub fn cover_join(u: &Cover, v: &Cover) -> Result<Cover> {
    if u.n_points != v.n_points {
        return Err(Error::MismatchedPointSets(u.n_points, v.n_points));
    }
    let n = u.n_points;
    let mut sets = Vec::new();
    let mut mark = vec![false; n];
    for a in &u.sets {
        for &i in a {
            mark[i] = true;
        }
        for b in &v.sets {
            let mut s: Vec<usize> = b.iter().copied().filter(|&i| mark[i]).collect();
            if !s.is_empty() {
                s.sort_unstable();
                s.dedup();
                sets.push(s);
            }
        }
        for &i in a {
            mark[i] = false;
        }
    }
    let out = Cover { n_points: n, sets };
    let (ou, ov, ow) = (cover_order(u)?, cover_order(v)?, cover_order(&out)?);
    if ow + 1 > (ou + 1) * (ov + 1) {
        return Err(Error::AssertionFailed(format!("join order {ow} exceeds ({ou}+1)({ov}+1)-1")));
    }
    Ok(out)
}

/// Lower and upper bounds on a covering number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBracket {
    pub lb: u64,
    pub ub: u64,
    pub exact: bool,
}

impl CountBracket {
    pub fn exact(v: u64) -> Self {
        CountBracket { lb: v, ub: v, exact: true }
    }
}

/// Greedy ε-separated set (pairwise distance ≥ ε), scanning points by index.
pub fn separated_set(m: &MetricMatrix, eps: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..m.len() {
        if chosen.iter().all(|&j| m.get(i, j) >= eps) {
            chosen.push(i);
        }
    }
    chosen
}

/// Greedy partition into sets of diameter < ε, seeded by the lowest uncovered index.
pub fn greedy_cover(m: &MetricMatrix, eps: f64) -> Cover {
    let n = m.len();
    let mut covered = vec![false; n];
    let mut sets = Vec::new();
    for i in 0..n {
        if covered[i] {
            continue;
        }
        let mut s = vec![i];
        covered[i] = true;
        for j in (i + 1)..n {
            if !covered[j] && s.iter().all(|&a| m.get(a, j) < eps) {
                s.push(j);
                covered[j] = true;
            }
        }
        sets.push(s);
    }
    Cover { n_points: n, sets }
}

fn compat_masks(m: &MetricMatrix, eps: f64) -> Vec<u64> {
    let n = m.len();
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i && m.get(i, j) < eps).fold(0u64, |acc, j| acc | (1 << j)))
        .collect()
}

/// Minimum number of sets of diameter < ε covering the sample (n ≤ 64).
fn exact_min_cover(m: &MetricMatrix, eps: f64, upper: usize, lower: usize) -> (usize, Vec<Vec<usize>>) {
    let n = m.len();
    let adj = compat_masks(m, eps);
    // Separated points first: each one opens its own set, which kills symmetric branches early.
    let sep = separated_set(m, eps);
    let mut order = sep.clone();
    order.extend((0..n).filter(|i| !sep.contains(i)));

    struct Search<'a> {
        adj: &'a [u64],
        order: &'a [usize],
        best: usize,
        best_sets: Vec<u64>,
        lower: usize,
    }
    impl Search<'_> {
        fn go(&mut self, pos: usize, cliques: &mut Vec<u64>) {
            if cliques.len() >= self.best || self.best == self.lower {
                return;
            }
            if pos == self.order.len() {
                self.best = cliques.len();
                self.best_sets = cliques.clone();
                return;
            }
            let p = self.order[pos];
            for c in 0..cliques.len() {
                if cliques[c] & !self.adj[p] == 0 {
                    cliques[c] |= 1 << p;
                    self.go(pos + 1, cliques);
                    cliques[c] &= !(1 << p);
                }
            }
            if cliques.len() + 1 < self.best {
                cliques.push(1 << p);
                self.go(pos + 1, cliques);
                cliques.pop();
            }
        }
    }
    let mut s = Search { adj: &adj, order: &order, best: upper + 1, best_sets: Vec::new(), lower };
    s.go(0, &mut Vec::new());
    let sets = s
        .best_sets
        .iter()
        .map(|&mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
        .collect();
    (s.best, sets)
}

/// Maximum ε-separated subset size (n ≤ 64).
fn exact_max_separated(m: &MetricMatrix, eps: f64) -> usize {
    let n = m.len();
    let adj = compat_masks(m, eps);
    fn go(adj: &[u64], cand: u64, size: usize, best: &mut usize) {
        if cand == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + cand.count_ones() as usize <= *best {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        go(adj, cand & !(1 << v) & !adj[v], size + 1, best);
        go(adj, cand & !(1 << v), size, best);
    }
    let mut best = 0;
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    go(&adj, all, 0, &mut best);
    best
}

/// Covering number by sets of diameter < ε, bracketed; exact when `n ≤ exact_cap`.
pub fn covering_number_bracket_with_cap(m: &MetricMatrix, eps: f64, exact_cap: usize) -> CountBracket {
    if m.is_empty() {
        return CountBracket::exact(0);
    }
    let lb = separated_set(m, eps).len();
    let ub = greedy_cover(m, eps).len();
    if lb == ub {
        return CountBracket::exact(lb as u64);
    }
    if m.len() <= exact_cap.min(64) {
        let (v, _) = exact_min_cover(m, eps, ub, lb);
        return CountBracket::exact(v as u64);
    }
    CountBracket { lb: lb as u64, ub: ub as u64, exact: false }
}

pub fn covering_number_bracket(m: &MetricMatrix, eps: f64) -> CountBracket {
    covering_number_bracket_with_cap(m, eps, DEFAULT_EXACT_CAP)
}

/// A cover realizing the bracket's upper end (minimum cover when the sample is small).
pub fn covering_witness(m: &MetricMatrix, eps: f64, exact_cap: usize) -> Cover {
    let greedy = greedy_cover(m, eps);
    if m.len() <= exact_cap.min(64) && !m.is_empty() {
        let lb = separated_set(m, eps).len();
        if lb < greedy.len() {
            let (v, sets) = exact_min_cover(m, eps, greedy.len(), lb);
            if v < greedy.len() {
                return Cover { n_points: m.len(), sets };
            }
        }
    }
    greedy
}

/// Size of an ε-separated subset: maximum for `n ≤ exact_cap`, greedy maximal otherwise.
pub fn packing_number_with_cap(m: &MetricMatrix, eps: f64, exact_cap: usize) -> usize {
    if m.len() <= exact_cap.min(64) {
        exact_max_separated(m, eps)
    } else {
        separated_set(m, eps).len()
    }
}

pub fn packing_number(m: &MetricMatrix, eps: f64) -> usize {
    packing_number_with_cap(m, eps, DEFAULT_EXACT_CAP)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Splits every set into classes of the chain relation "consecutive distance < threshold".
pub fn chain_component_split(c: &Cover, m: &MetricMatrix, threshold: f64) -> Cover {
    let mut sets = Vec::new();
    for s in &c.sets {
        let k = s.len();
        let mut parent: Vec<usize> = (0..k).collect();
        for a in 0..k {
            for b in (a + 1)..k {
                if m.get(s[a], s[b]) < threshold {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut classes: Vec<(usize, Vec<usize>)> = Vec::new();
        for a in 0..k {
            let r = find(&mut parent, a);
            match classes.iter_mut().find(|(root, _)| *root == r) {
                Some((_, v)) => v.push(s[a]),
                None => classes.push((r, vec![s[a]])),
            }
        }
        for (_, mut v) in classes {
            v.sort_unstable();
            sets.push(v);
        }
    }
    Cover { n_points: c.n_points, sets }
}
