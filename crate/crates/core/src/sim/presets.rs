//! Desk-scale versions of the four published coverage studies.

use super::config::{BetaPreset, BetaSpec, DesignSpec, ErrorDist, ScenarioConfig, DEFAULT_HARNESS_DRAWS};
use crate::selectors::{Family, SelectorSpec};

pub struct PresetGroup {
    pub name: &'static str,
    pub description: &'static str,
    pub scenarios: fn() -> Vec<ScenarioConfig>,
}

pub const GROUPS: [PresetGroup; 4] = [
    PresetGroup {
        name: "table1",
        description: "linear model, LAR steps 1-3, n=50, p=10, two designs x four error laws",
        scenarios: table1,
    },
    PresetGroup {
        name: "table2",
        description: "linear model, significance hunting, n=100, p=5, lambda=2",
        scenarios: table2,
    },
    PresetGroup {
        name: "table3",
        description: "logistic model, lasso selector, p=10, rho=0.2, n in {30, 100}",
        scenarios: table3,
    },
    PresetGroup {
        name: "table4",
        description: "logistic model, significance hunting, p=5, rho=0.8, n in {30, 100}",
        scenarios: table4,
    },
];

fn base(id: String, n: usize, p: usize, family: Family, selector: SelectorSpec, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        scenario_id: id,
        n,
        p,
        reps: 500,
        design: DesignSpec::independent(),
        error_dist: ErrorDist::Normal,
        sigma: 1.0,
        beta: BetaSpec::Preset(BetaPreset::Zero),
        family,
        selector,
        alpha: 0.1,
        seed,
        misspec: None,
        link: None,
        naive: None,
        mc_draws: DEFAULT_HARNESS_DRAWS,
        candidates: None,
    }
}

pub fn table1() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for (d, design) in [("independent", DesignSpec::independent()), ("correlated", DesignSpec::correlated())] {
        for err in [ErrorDist::Normal, ErrorDist::Laplace, ErrorDist::Uniform, ErrorDist::SkewNormal { shape: 5.0 }] {
            let id = format!("table1-{d}-{}", err.label());
            let mut c = base(id, 50, 10, Family::Lm, SelectorSpec::LarSteps { k: 3 }, 1000 + out.len() as u64);
            c.design = design;
            c.error_dist = err;
            let mut beta = vec![0.0; 10];
            beta[0] = -4.0;
            beta[1] = 4.0;
            c.beta = BetaSpec::Explicit(beta);
            out.push(c);
        }
    }
    out
}

pub fn table2() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for n_best in [20, 5] {
        for (b, beta) in
            [("zero", BetaSpec::Preset(BetaPreset::Zero)), ("nonzero", BetaSpec::Explicit(vec![2.0, -1.0, 0.0, 0.0, 1.0]))]
        {
            let sel = SelectorSpec::SignificanceHunting { n_best, lambda: 2.0, family: Family::Lm };
            let mut c = base(format!("table2-nbest{n_best}-{b}"), 100, 5, Family::Lm, sel, 2000 + out.len() as u64);
            c.beta = beta;
            out.push(c);
        }
    }
    out
}

pub fn table3() -> Vec<ScenarioConfig> {
    let cells = [
        (BetaPreset::Zero, "small"),
        (BetaPreset::Sparse, "small"),
        (BetaPreset::Scaled, "small"),
        (BetaPreset::Scaled, "large"),
        (BetaPreset::Dense, "small"),
        (BetaPreset::Dense, "large"),
    ];
    let mut out = Vec::new();
    for (beta, size) in cells {
        for n in [30, 100] {
            let lambda = if size == "small" { 0.012 } else { 0.05 } * n as f64;
            let name = serde_json::to_value(beta).expect("serializable").as_str().expect("string").to_owned();
            let sel = SelectorSpec::LassoLogistic { lambda };
            let id = format!("table3-{name}-{size}-n{n}");
            let mut c = base(id, n, 10, Family::Bin, sel, 3000 + out.len() as u64);
            c.design = DesignSpec::GaussianRows { rho: 0.2 };
            c.beta = BetaSpec::Preset(beta);
            out.push(c);
        }
    }
    out
}

pub fn table4() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for n_best in [20, 5] {
        for (b, beta) in [
            ("zero", BetaSpec::Preset(BetaPreset::Zero)),
            ("nonzero", BetaSpec::Explicit(vec![-1.0, 1.0, 0.0, 0.0, 0.0])),
        ] {
            for n in [30, 100] {
                let sel = SelectorSpec::SignificanceHunting { n_best, lambda: 2.0, family: Family::Bin };
                let id = format!("table4-nbest{n_best}-{b}-n{n}");
                let mut c = base(id, n, 5, Family::Bin, sel, 4000 + out.len() as u64);
                c.design = DesignSpec::GaussianRows { rho: 0.8 };
                c.beta = beta.clone();
                out.push(c);
            }
        }
    }
    out
}

pub fn all() -> Vec<ScenarioConfig> {
    GROUPS.iter().flat_map(|g| (g.scenarios)()).collect()
}

/// A whole group by name ("table3") or a single scenario by id.
pub fn find(name: &str) -> Option<Vec<ScenarioConfig>> {
    if let Some(g) = GROUPS.iter().find(|g| g.name == name) {
        return Some((g.scenarios)());
    }
    all().into_iter().find(|c| c.scenario_id == name).map(|c| vec![c])
}
