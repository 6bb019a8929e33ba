//! Benchmark configuration: named presets, TOML overrides, validation.

use serde::Deserialize;

use crate::array::{virtual_geometry, ArrayGeometry};
use crate::signals::{CoherenceLink, DoaSpec, Scenario};
use crate::subspace::SearchConfig;
use crate::{c64, Error, Result};

/// Everything the harness can run per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    SocMusic,
    SocNewton,
    FocMusic,
    FocNewton,
    ConventionalLs,
    SensingAssistedTrue,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::SocMusic,
        Estimator::SocNewton,
        Estimator::FocMusic,
        Estimator::FocNewton,
        Estimator::ConventionalLs,
        Estimator::SensingAssistedTrue,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Estimator::SocMusic => "soc_music",
            Estimator::SocNewton => "soc_newton",
            Estimator::FocMusic => "foc_music",
            Estimator::FocNewton => "foc_newton",
            Estimator::ConventionalLs => "conventional_ls",
            Estimator::SensingAssistedTrue => "sensing_assisted_true",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'")))
    }

    /// Runs a DOA search (as opposed to pilot-only estimation).
    pub fn is_doa(self) -> bool {
        matches!(
            self,
            Estimator::SocMusic | Estimator::SocNewton | Estimator::FocMusic | Estimator::FocNewton
        )
    }
}

/// Fully resolved benchmark description.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub name: String,
    pub geometry: ArrayGeometry,
    pub scenario: Scenario,
    /// Payload snapshots per trial (T).
    pub snapshots: usize,
    /// Pilot symbols per trial (T_p).
    pub pilot_len: usize,
    pub snr_db: Vec<f64>,
    pub search: SearchConfig,
    pub estimators: Vec<Estimator>,
    pub trials: usize,
    pub seed: u64,
    /// Record wall-clock per estimator. Off by default so CSV output is
    /// byte-identical across runs and thread counts.
    pub timing: bool,
}

impl BenchConfig {
    /// Number of consecutive port blocks the conventional estimator sweeps.
    pub fn conventional_blocks(&self) -> usize {
        self.geometry.n_ports().div_ceil(self.geometry.m())
    }

    /// Pilot symbols available to each conventional block.
    pub fn conventional_block_len(&self) -> Result<usize> {
        let blocks = self.conventional_blocks();
        if !self.pilot_len.is_multiple_of(blocks) {
            return Err(Error::Config(format!(
                "pilot length {} does not split into {} equal port blocks",
                self.pilot_len, blocks
            )));
        }
        Ok(self.pilot_len / blocks)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.search.validate()?;
        let k = self.scenario.k;
        let m = self.geometry.m();
        if self.snapshots < 2 {
            return Err(Error::Config("need at least 2 payload snapshots".into()));
        }
        if self.pilot_len < k {
            return Err(Error::Config(format!(
                "pilot length {} shorter than user count {k}",
                self.pilot_len
            )));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("snr_db must be a non-empty list of finite values".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[i + 1..].contains(e) {
                return Err(Error::Config(format!("estimator '{}' listed twice", e.tag())));
            }
        }
        let dof = virtual_geometry(&self.geometry).dof();
        for e in &self.estimators {
            match e {
                Estimator::SocMusic | Estimator::SocNewton => {
                    if k >= m {
                        return Err(Error::Unidentifiable(format!(
                            "{} cannot resolve {k} sources on {m} chains (needs k < M)",
                            e.tag()
                        )));
                    }
                }
                Estimator::FocMusic | Estimator::FocNewton => {
                    if k > dof {
                        return Err(Error::Unidentifiable(format!(
                            "{} supports at most {dof} sources on this port subset",
                            e.tag()
                        )));
                    }
                }
                Estimator::ConventionalLs => {
                    let t_b = self.conventional_block_len()?;
                    if t_b < k {
                        return Err(Error::Unidentifiable(format!(
                            "conventional_ls gets {t_b} pilot symbols per block, fewer than {k} users"
                        )));
                    }
                }
                Estimator::SensingAssistedTrue => {}
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Presets

/// Built-in scenario names with one-line descriptions.
pub fn scenario_catalog() -> &'static [(&'static str, &'static str)] {
    &[
        (
            "los_ula",
            "two closely spaced users (-20/-25 deg) on the uniform 4-port subset; baseline accuracy and the grid-vs-Newton comparison",
        ),
        (
            "coherent_mra",
            "three users (-45/0/40 deg) on the sparse {1,2,5,7} subset with the second fully coherent with the first; rank-collapse stress test",
        ),
        (
            "underdetermined_mra",
            "six users on four chains over the sparse subset; resolvable only through the fourth-order co-array",
        ),
        (
            "random_sep_20",
            "two equal-power users drawn uniformly in [-60, 60] deg with at least 20 deg separation, uniform subset",
        ),
        (
            "random_sep_3",
            "as random_sep_20 but the gap may shrink to 3 deg; resolution-limited regime",
        ),
    ]
}

struct Draft {
    name: String,
    n_ports: usize,
    selected: Option<Vec<usize>>,
    spacing: f64,
    k: Option<usize>,
    base_deg: Option<Vec<f64>>,
    perturb_half_deg: f64,
    random_range_deg: Option<(f64, f64)>,
    min_sep_deg: Option<f64>,
    coherence: Vec<CoherenceLink>,
    gain_ratio_max: f64,
    noise_power: f64,
    snapshots: usize,
    pilot_len: usize,
    snr_db: Vec<f64>,
    search: SearchConfig,
    estimators: Vec<Estimator>,
    trials: usize,
    seed: u64,
    timing: bool,
}

impl Draft {
    fn base(name: &str) -> Self {
        Self {
            name: name.to_string(),
            n_ports: 40,
            selected: None,
            spacing: 1.0,
            k: None,
            base_deg: None,
            perturb_half_deg: 0.5,
            random_range_deg: None,
            min_sep_deg: None,
            coherence: vec![],
            gain_ratio_max: 10.0,
            noise_power: 1.0,
            snapshots: 2000,
            pilot_len: 40,
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            search: SearchConfig::default(),
            estimators: Estimator::ALL.to_vec(),
            trials: 100,
            seed: 7,
            timing: false,
        }
    }

    fn finalize(self) -> Result<BenchConfig> {
        let selected = self
            .selected
            .ok_or_else(|| Error::Config("geometry.selected is required".into()))?;
        let geometry = ArrayGeometry::new(self.n_ports, &selected, self.spacing)?;
        let k = self.k.ok_or_else(|| Error::Config("sources.k is required".into()))?;
        let doas = match (self.base_deg, self.random_range_deg) {
            (Some(base), None) => {
                DoaSpec::Perturbed { base_deg: base, half_width_deg: self.perturb_half_deg }
            }
            (None, Some(range)) => DoaSpec::RandomSeparated {
                range_deg: range,
                min_sep_deg: self.min_sep_deg.unwrap_or(0.0),
            },
            (None, None) => {
                return Err(Error::Config(
                    "sources need either base_deg or random_range_deg".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "sources.base_deg and sources.random_range_deg are mutually exclusive".into(),
                ))
            }
        };
        let cfg = BenchConfig {
            name: self.name,
            geometry,
            scenario: Scenario {
                k,
                doas,
                coherence: self.coherence,
                gain_ratio_max: self.gain_ratio_max,
                noise_power: self.noise_power,
            },
            snapshots: self.snapshots,
            pilot_len: self.pilot_len,
            snr_db: self.snr_db,
            search: self.search,
            estimators: self.estimators,
            trials: self.trials,
            seed: self.seed,
            timing: self.timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn preset(name: &str) -> Option<Draft> {
    let mut d = Draft::base(name);
    match name {
        "los_ula" => {
            d.selected = Some(vec![1, 2, 3, 4]);
            d.k = Some(2);
            d.base_deg = Some(vec![-20.0, -25.0]);
        }
        "coherent_mra" => {
            d.selected = Some(vec![1, 2, 5, 7]);
            d.k = Some(3);
            d.base_deg = Some(vec![-45.0, 0.0, 40.0]);
            d.coherence = vec![CoherenceLink { target: 1, source: 0, coeff: c64(0.9, 0.0) }];
        }
        "underdetermined_mra" => {
            d.selected = Some(vec![1, 2, 5, 7]);
            d.k = Some(6);
            d.base_deg = Some(vec![-50.0, -30.0, -10.0, 10.0, 30.0, 50.0]);
            d.estimators = vec![
                Estimator::FocMusic,
                Estimator::FocNewton,
                Estimator::SensingAssistedTrue,
            ];
        }
        "random_sep_20" | "random_sep_3" => {
            d.selected = Some(vec![1, 2, 3, 4]);
            d.k = Some(2);
            d.random_range_deg = Some((-60.0, 60.0));
            d.min_sep_deg = Some(if name == "random_sep_20" { 20.0 } else { 3.0 });
            d.gain_ratio_max = 1.0;
            d.estimators = vec![
                Estimator::SocMusic,
                Estimator::SocNewton,
                Estimator::FocMusic,
                Estimator::FocNewton,
            ];
        }
        _ => return None,
    }
    Some(d)
}

// ---------------------------------------------------------------------------
// TOML schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    geometry: Option<RawGeometry>,
    sources: Option<RawSources>,
    sampling: Option<RawSampling>,
    search: Option<RawSearch>,
    run: Option<RawRun>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    n_ports: Option<usize>,
    selected: Option<Vec<usize>>,
    spacing: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSources {
    k: Option<usize>,
    base_deg: Option<Vec<f64>>,
    perturb_half_deg: Option<f64>,
    random_range_deg: Option<[f64; 2]>,
    min_sep_deg: Option<f64>,
    gain_ratio_max: Option<f64>,
    noise_power: Option<f64>,
    coherence: Option<Vec<RawLink>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    target: usize,
    source: usize,
    coeff: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    snapshots: Option<usize>,
    pilot_len: Option<usize>,
    snr_db: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    range_deg: Option<[f64; 2]>,
    dense_step_deg: Option<f64>,
    coarse_step_deg: Option<f64>,
    max_newton_iters: Option<usize>,
    newton_tol_rad: Option<f64>,
    trust_radius_rad: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    estimators: Option<Vec<String>>,
    trials: Option<usize>,
    seed: Option<u64>,
    timing: Option<bool>,
}

/// Parses TOML text into a validated [`BenchConfig`]. A `scenario` key names
/// a preset; every other field overrides the preset (or, without a preset,
/// fills out a custom scenario, which must at least provide the selected
/// ports, the user count, and an angle specification).
pub fn parse_config(text: &str) -> Result<BenchConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
    let mut d = match &raw.scenario {
        Some(name) => {
            preset(name).ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))?
        }
        None => Draft::base("custom"),
    };

    if let Some(g) = raw.geometry {
        if let Some(v) = g.n_ports {
            d.n_ports = v;
        }
        if let Some(v) = g.selected {
            d.selected = Some(v);
        }
        if let Some(v) = g.spacing {
            d.spacing = v;
        }
    }
    if let Some(s) = raw.sources {
        if let Some(v) = s.k {
            d.k = Some(v);
        }
        if let Some(v) = s.base_deg {
            d.base_deg = Some(v);
            d.random_range_deg = None;
        }
        if let Some(v) = s.perturb_half_deg {
            d.perturb_half_deg = v;
        }
        if let Some(v) = s.random_range_deg {
            d.random_range_deg = Some((v[0], v[1]));
            d.base_deg = None;
        }
        if let Some(v) = s.min_sep_deg {
            d.min_sep_deg = Some(v);
        }
        if let Some(v) = s.gain_ratio_max {
            d.gain_ratio_max = v;
        }
        if let Some(v) = s.noise_power {
            d.noise_power = v;
        }
        if let Some(links) = s.coherence {
            d.coherence = links
                .into_iter()
                .map(|l| CoherenceLink {
                    target: l.target,
                    source: l.source,
                    coeff: c64(l.coeff[0], l.coeff[1]),
                })
                .collect();
        }
    }
    if let Some(s) = raw.sampling {
        if let Some(v) = s.snapshots {
            d.snapshots = v;
        }
        if let Some(v) = s.pilot_len {
            d.pilot_len = v;
        }
        if let Some(v) = s.snr_db {
            d.snr_db = v;
        }
    }
    if let Some(s) = raw.search {
        if let Some(v) = s.range_deg {
            d.search.range_deg = (v[0], v[1]);
        }
        if let Some(v) = s.dense_step_deg {
            d.search.dense_step_deg = v;
        }
        if let Some(v) = s.coarse_step_deg {
            d.search.coarse_step_deg = v;
        }
        if let Some(v) = s.max_newton_iters {
            d.search.max_newton_iters = v;
        }
        if let Some(v) = s.newton_tol_rad {
            d.search.newton_tol_rad = v;
        }
        if let Some(v) = s.trust_radius_rad {
            d.search.trust_radius_rad = Some(v);
        }
    }
    if let Some(r) = raw.run {
        if let Some(tags) = r.estimators {
            d.estimators = tags.iter().map(|t| Estimator::parse(t)).collect::<Result<Vec<_>>>()?;
        }
        if let Some(v) = r.trials {
            d.trials = v;
        }
        if let Some(v) = r.seed {
            d.seed = v;
        }
        if let Some(v) = r.timing {
            d.timing = v;
        }
    }
    d.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_by_name_carries_defaults() {
        let cfg = parse_config("scenario = \"los_ula\"").unwrap();
        assert_eq!(cfg.name, "los_ula");
        assert_eq!(cfg.geometry.n_ports(), 40);
        assert_eq!(cfg.geometry.selected(), &[1, 2, 3, 4]);
        assert_eq!(cfg.scenario.k, 2);
        assert_eq!(cfg.snapshots, 2000);
        assert_eq!(cfg.pilot_len, 40);
        assert_eq!(cfg.snr_db.len(), 7);
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.estimators.len(), 6);
        assert!(!cfg.timing);
        assert_eq!(cfg.search.dense_step_deg, 0.1);
        assert_eq!(cfg.search.max_newton_iters, 200);
    }

    #[test]
    fn every_catalog_entry_parses() {
        for (name, _) in scenario_catalog() {
            let cfg = parse_config(&format!("scenario = \"{name}\"")).unwrap();
            assert_eq!(&cfg.name, name);
        }
    }

    #[test]
    fn overrides_apply_on_top_of_presets() {
        let cfg = parse_config(
            r#"
scenario = "los_ula"

[sampling]
snapshots = 500
snr_db = [10.0, 20.0]

[run]
estimators = ["soc_newton", "foc_newton"]
trials = 10
seed = 99
"#,
        )
        .unwrap();
        assert_eq!(cfg.snapshots, 500);
        assert_eq!(cfg.snr_db, vec![10.0, 20.0]);
        assert_eq!(cfg.estimators, vec![Estimator::SocNewton, Estimator::FocNewton]);
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn custom_configs_must_specify_the_scenario_core() {
        assert!(matches!(parse_config(""), Err(Error::Config(_))));
        let full = r#"
[geometry]
selected = [1, 2, 5, 7]

[sources]
k = 2
base_deg = [-30.0, 10.0]

[run]
estimators = ["foc_music"]
"#;
        let cfg = parse_config(full).unwrap();
        assert_eq!(cfg.name, "custom");
        assert_eq!(cfg.scenario.k, 2);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(parse_config("scenario = \"nope\""), Err(Error::Config(_))));
        assert!(matches!(
            parse_config("scenario = \"los_ula\"\n[run]\nestimators = [\"magic\"]"),
            Err(Error::Config(_))
        ));
        // Typos in keys are caught, not ignored.
        assert!(matches!(
            parse_config("scenario = \"los_ula\"\n[sampling]\nsnapshot = 10"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identifiability_is_checked_per_estimator() {
        // Six users on four chains: second order must refuse.
        let err = parse_config(
            "scenario = \"underdetermined_mra\"\n[run]\nestimators = [\"soc_music\"]",
        );
        assert!(matches!(err, Err(Error::Unidentifiable(_))));
        // Conventional tiling gets 4 pilot symbols per block, fewer than 6 users.
        let err = parse_config(
            "scenario = \"underdetermined_mra\"\n[run]\nestimators = [\"conventional_ls\"]",
        );
        assert!(matches!(err, Err(Error::Unidentifiable(_))));
        // Seven users exceed even the hole-free co-array of the ULA subset.
        let err = parse_config(
            r#"
[geometry]
selected = [1, 2, 3, 4]
[sources]
k = 7
base_deg = [-60.0, -40.0, -20.0, 0.0, 20.0, 40.0, 60.0]
[run]
estimators = ["foc_music"]
"#,
        );
        assert!(matches!(err, Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn duplicate_estimators_are_rejected() {
        let err = parse_config(
            "scenario = \"los_ula\"\n[run]\nestimators = [\"soc_music\", \"soc_music\"]",
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn coherence_links_parse_from_toml() {
        let cfg = parse_config("scenario = \"coherent_mra\"").unwrap();
        assert_eq!(cfg.scenario.coherence.len(), 1);
        assert_eq!(cfg.scenario.coherence[0].target, 1);
        assert_eq!(cfg.scenario.coherence[0].source, 0);
        let t = parse_config(
            r#"
scenario = "coherent_mra"
[[sources.coherence]]
target = 2
source = 0
coeff = [0.5, 0.5]
"#,
        )
        .unwrap();
        assert_eq!(t.scenario.coherence.len(), 1);
        assert_eq!(t.scenario.coherence[0].coeff, c64(0.5, 0.5));
    }

    #[test]
    fn conventional_block_len_requires_clean_tiling() {
        let mut cfg = parse_config("scenario = \"los_ula\"").unwrap();
        assert_eq!(cfg.conventional_blocks(), 10);
        assert_eq!(cfg.conventional_block_len().unwrap(), 4);
        cfg.pilot_len = 44;
        assert!(matches!(cfg.conventional_block_len(), Err(Error::Config(_))));
    }
}
