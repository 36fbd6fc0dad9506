//! Bundled example configurations.

pub const CATALOG: &[(&str, &str)] = &[
    ("density-finite", include_str!("../catalog/density-finite.json")),
    ("density-period-7", include_str!("../catalog/density-period-7.json")),
    ("directional-circle", include_str!("../catalog/directional-circle.json")),
    ("example-1-3-q4", include_str!("../catalog/example-1-3-q4.json")),
    ("example-1-8-1-coding", include_str!("../catalog/example-1-8-1-coding.json")),
    ("example-1-8-1-expansive", include_str!("../catalog/example-1-8-1-expansive.json")),
    ("example-1-9-symbolic-halfdensity", include_str!("../catalog/example-1-9-symbolic-halfdensity.json")),
    ("example-1-9-torus-halfdensity", include_str!("../catalog/example-1-9-torus-halfdensity.json")),
    ("expansive-cat-sample", include_str!("../catalog/expansive-cat-sample.json")),
    ("frink-dynamical-cat", include_str!("../catalog/frink-dynamical-cat.json")),
    ("frink-dynamical-shift", include_str!("../catalog/frink-dynamical-shift.json")),
    ("frink-four-point", include_str!("../catalog/frink-four-point.json")),
    ("frink-random-suite", include_str!("../catalog/frink-random-suite.json")),
    ("full-shift-2", include_str!("../catalog/full-shift-2.json")),
    ("golden-mean", include_str!("../catalog/golden-mean.json")),
    ("lipschitz-eca-90", include_str!("../catalog/lipschitz-eca-90.json")),
    ("lipschitz-toral-cellwise", include_str!("../catalog/lipschitz-toral-cellwise.json")),
    ("metric-mdim-circle-shift", include_str!("../catalog/metric-mdim-circle-shift.json")),
    ("metric-mdim-full-shift", include_str!("../catalog/metric-mdim-full-shift.json")),
    ("toral-cat-map", include_str!("../catalog/toral-cat-map.json")),
    ("tower-sec5-remark", include_str!("../catalog/tower-sec5-remark.json")),
    ("tower-sec5-stages", include_str!("../catalog/tower-sec5-stages.json")),
    ("tower-sec6-minimality", include_str!("../catalog/tower-sec6-minimality.json")),
    ("tower-sec6-quarter-density", include_str!("../catalog/tower-sec6-quarter-density.json")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
