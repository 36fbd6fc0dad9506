use meandim_core::{BaseMetric, ColumnPoint, IndexSetSpec, LocalEndo, Norm, SftSystem, TowerParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Entropy,
    Mdim,
    MetricMdim,
    Directional,
    Frink,
    Expansive,
    Coding,
    Density,
    Tower,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::Mdim => "mdim",
            Command::MetricMdim => "metric-mdim",
            Command::Directional => "directional",
            Command::Frink => "frink",
            Command::Expansive => "expansive",
            Command::Coding => "coding",
            Command::Density => "density",
            Command::Tower => "tower",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub anchor: String,
    /// Subcommand the config is meant for; checked against the one invoked.
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSpec,
    #[serde(default)]
    pub task: TaskSpec,
    #[serde(default)]
    pub expect: Expect,
}

fn default_k() -> usize {
    1
}

fn default_norm() -> Norm {
    Norm::Euclidean
}

/// Column type for restricted systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ColumnSpec {
    FullShift {
        symbols: u32,
    },
    Torus {
        r: usize,
        q: u32,
        #[serde(default = "default_norm")]
        norm: Norm,
        matrix: Vec<Vec<i64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomQuasi {
    pub count: usize,
    pub max_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    FullShift {
        symbols: u32,
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Full shift over a quantized torus site.
    TorusShift {
        r: usize,
        q: u32,
        #[serde(default = "default_norm")]
        norm: Norm,
        #[serde(default = "default_k")]
        k: usize,
    },
    GoldenMean,
    ThreeTerm {
        q: u32,
    },
    Sft {
        system: SftSystem,
    },
    /// `(σ, h_ℤ)` on `site^ℤ` for an alphabet or a quantized torus with a toral `h`.
    ProductShift {
        #[serde(default)]
        symbols: Option<u32>,
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        q: Option<u32>,
        #[serde(default = "default_norm")]
        norm: Norm,
        #[serde(default)]
        matrix: Option<Vec<Vec<i64>>>,
    },
    Restricted {
        column: ColumnSpec,
        lambda: IndexSetSpec,
        a: Vec<ColumnPoint>,
    },
    Toral {
        matrix: Vec<Vec<i64>>,
    },
    QuasiMetric {
        #[serde(default)]
        rows: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        random: Option<RandomQuasi>,
    },
    /// Periodic points of a product shift, tabulated exactly.
    PeriodicSample {
        #[serde(default)]
        symbols: Option<u32>,
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        q: Option<u32>,
        #[serde(default)]
        matrix: Option<Vec<Vec<i64>>>,
        period: usize,
        #[serde(default = "default_metric")]
        metric: BaseMetric,
        /// Generators kept when restricting to a subaction; all of `ℤ²` when absent.
        #[serde(default)]
        restrict: Option<Vec<Vec<i64>>>,
    },
    IndexSet {
        lambda: IndexSetSpec,
    },
    Tower {
        params: TowerParams,
    },
    Endo {
        endo: LocalEndo,
    },
}

fn default_metric() -> BaseMetric {
    BaseMetric::Origin
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Periodic points tabulated in a finite sample.
    #[serde(default = "Caps::default_points")]
    pub points: usize,
    /// Sampled pairs for witness and coding checks.
    #[serde(default = "Caps::default_pairs")]
    pub pairs: usize,
    /// Transfer-matrix states when counting patterns.
    #[serde(default = "Caps::default_patterns")]
    pub patterns: usize,
}

impl Caps {
    fn default_points() -> usize {
        4096
    }
    fn default_pairs() -> usize {
        100_000
    }
    fn default_patterns() -> usize {
        1 << 22
    }
}

impl Default for Caps {
    fn default() -> Self {
        Caps { points: Self::default_points(), pairs: Self::default_pairs(), patterns: Self::default_patterns() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub q: u32,
    pub period: usize,
    pub c: f64,
    pub max_n: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalitySpec {
    pub q: u32,
    pub matrix: Vec<Vec<i64>>,
    pub stages: Vec<usize>,
    pub samples: usize,
    pub window: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub ns: Vec<i64>,
    #[serde(default)]
    pub n: Option<i64>,
    #[serde(default)]
    pub ms: Vec<i64>,
    #[serde(default)]
    pub pavlov_ns: Vec<i64>,
    #[serde(default)]
    pub pairs: Option<usize>,
    #[serde(default)]
    pub chains: Option<usize>,
    /// Separation constant for expansivity certificates.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub n_max: Option<i64>,
    #[serde(default)]
    pub m_max: Option<i64>,
    #[serde(default)]
    pub dir: Option<(i64, i64)>,
    #[serde(default)]
    pub r: Option<f64>,
    /// Side lengths of square patterns to count exactly.
    #[serde(default)]
    pub sides: Vec<i64>,
    /// Lengths of centred windows for window densities.
    #[serde(default)]
    pub lens: Vec<i64>,
    #[serde(default)]
    pub stages: Vec<usize>,
    #[serde(default)]
    pub t_max: Option<u64>,
    #[serde(default)]
    pub minimality: Option<MinimalitySpec>,
    #[serde(default)]
    pub transfer: Option<TransferSpec>,
    /// Also evaluate the embedding lower bound and compare it with the metric estimate.
    #[serde(default)]
    pub compare_lower_bound: bool,
    /// Also evaluate the upper bound `2(K+1)^k h / log α` for the coding task.
    #[serde(default)]
    pub main_bound: bool,
    #[serde(default)]
    pub times: Option<(i64, i64)>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub caps: Caps,
}

/// Assertions on the headline bracket `[lb, ub]` of a task.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default)]
    pub contains: Option<f64>,
    #[serde(default)]
    pub max_width: Option<f64>,
    #[serde(default)]
    pub lb_at_least: Option<f64>,
    #[serde(default)]
    pub ub_at_most: Option<f64>,
    /// Midpoint within `rel_tol` (relative) of this value.
    #[serde(default)]
    pub near: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Exact rational value such as `"3/7"`, for density tasks.
    #[serde(default)]
    pub exact: Option<String>,
    #[serde(default)]
    pub tol: Option<f64>,
}

impl Expect {
    pub fn check(&self, lb: f64, ub: f64) -> Vec<String> {
        let tol = self.tol.unwrap_or(1e-9);
        let mut fails = Vec::new();
        if let Some(v) = self.contains {
            if !(lb - tol <= v && v <= ub + tol) {
                fails.push(format!("[{lb}, {ub}] does not contain {v}"));
            }
        }
        if let Some(w) = self.max_width {
            if ub - lb > w + tol {
                fails.push(format!("width {} exceeds {w}", ub - lb));
            }
        }
        if let Some(v) = self.lb_at_least {
            if lb < v - tol {
                fails.push(format!("lower bound {lb} below {v}"));
            }
        }
        if let Some(v) = self.ub_at_most {
            if ub > v + tol {
                fails.push(format!("upper bound {ub} above {v}"));
            }
        }
        if let Some(v) = self.near {
            let rel = self.rel_tol.unwrap_or(0.05);
            let mid = 0.5 * (lb + ub);
            if (mid - v).abs() > rel * v.abs() + tol {
                fails.push(format!("midpoint {mid} not within {rel} of {v}"));
            }
        }
        fails
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), String> {
    if cfg.name.is_empty() || !cfg.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(format!("name {:?} must be non-empty and use [A-Za-z0-9_-]", cfg.name));
    }
    let t = &cfg.task;
    if t.eps.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err("eps values must be positive and finite".into());
    }
    if t.ns.iter().chain(&t.ms).chain(&t.pavlov_ns).chain(&t.sides).chain(&t.lens).any(|&n| n < 0) {
        return Err("window sizes must be nonnegative".into());
    }
    if let Some(c) = t.c {
        if !(c.is_finite() && c > 0.0) {
            return Err("c must be positive".into());
        }
    }
    if let Some(ex) = &cfg.expect.exact {
        parse_ratio(ex)?;
    }
    Ok(())
}

pub fn parse_ratio(s: &str) -> Result<(i64, i64), String> {
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s.trim(), "1"),
    };
    let p: i64 = p.parse().map_err(|_| format!("bad rational {s:?}"))?;
    let q: i64 = q.parse().map_err(|_| format!("bad rational {s:?}"))?;
    if q <= 0 {
        return Err(format!("bad rational {s:?}"));
    }
    Ok((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expect_checks_each_assertion() {
        let e = Expect { contains: Some(1.0), max_width: Some(0.5), ..Default::default() };
        assert!(e.check(0.8, 1.2).is_empty());
        assert_eq!(e.check(1.1, 1.2).len(), 1);
        assert_eq!(e.check(0.0, 0.9).len(), 2);
        let near = Expect { near: Some(2.0), rel_tol: Some(0.1), ..Default::default() };
        assert!(near.check(2.1, 2.1).is_empty());
        assert!(!near.check(2.5, 2.5).is_empty());
    }

    #[test]
    fn ratios_parse() {
        assert_eq!(parse_ratio("3/7"), Ok((3, 7)));
        assert_eq!(parse_ratio("0"), Ok((0, 1)));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let ok = r#"{"name":"a","command":"density","system":{"kind":"index_set","lambda":{"finite_set":[0]}}}"#;
        assert!(parse(ok).is_ok());
        let bad = r#"{"name":"a","command":"density","system":{"kind":"index_set","lambda":{"finite_set":[0]}},"extra":1}"#;
        assert!(parse(bad).is_err());
        let bad_name = r#"{"name":"a b","command":"density","system":{"kind":"index_set","lambda":{"finite_set":[0]}}}"#;
        assert!(parse(bad_name).is_err());
    }

    #[test]
    fn bundled_configs_parse() {
        for (name, text) in crate::catalog::CATALOG {
            let c = parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&c.name, name);
        }
    }
}
