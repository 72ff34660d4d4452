//! Experiment configuration: one JSON document with sections
//! `{graph, model, schedule, experiment}`. Unknown keys are hard errors,
//! and the resolved document is echoed into every output directory so a
//! run is reproducible from its artifacts alone.

use crate::oracle::{RidgeModel, XtildePlacement};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("bad override {0:?}: {1}")]
    Override(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Node count.
    pub n: usize,
    /// Probability of each extra directed link.
    pub p: f64,
    /// Seed of the topology draw.
    pub seed: u64,
    /// Redraw the topology for every replication instead of fixing one
    /// network per ensemble.
    #[serde(default)]
    pub per_replication: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XtildeConfig {
    /// "linear" (low/high required) or "constant" (value required).
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl XtildeConfig {
    pub fn placement(&self) -> Result<XtildePlacement, ConfigError> {
        match self.rule.as_str() {
            "linear" => {
                let low = self.low.ok_or_else(|| {
                    ConfigError::Invalid("xtilde.low required for linear rule".into())
                })?;
                let high = self.high.ok_or_else(|| {
                    ConfigError::Invalid("xtilde.high required for linear rule".into())
                })?;
                Ok(XtildePlacement::Linear { low, high })
            }
            "constant" => {
                let value = self.value.ok_or_else(|| {
                    ConfigError::Invalid("xtilde.value required for constant rule".into())
                })?;
                Ok(XtildePlacement::Constant { value })
            }
            other => Err(ConfigError::Invalid(format!(
                "unknown xtilde rule {other:?}"
            ))),
        }
    }
}

/// Ridge model parameters. The agent count comes from the graph section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub gamma: f64,
    pub w_low: f64,
    pub w_high: f64,
    pub noise_sd: f64,
    pub xtilde: XtildeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

fn default_beta() -> f64 {
    0.05
}

fn default_tail_fraction() -> f64 {
    0.8
}

fn default_burn_in() -> usize {
    1
}

fn default_gt_mc_samples() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// "rate", "normality", or "coverage"; may be omitted when the
    /// subcommand implies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub iterations: usize,
    pub replications: usize,
    /// Iterations at which metrics are recorded; defaults depend on the
    /// experiment kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// Subset of {"sab", "dsgt", "dsgd"}.
    pub algorithms: Vec<String>,
    pub base_seed: u64,
    /// Worker threads; 0 means all available.
    #[serde(default)]
    pub parallelism: usize,
    /// Upper-tail probability of the confidence regions.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Iterations skipped before Polyak-Ruppert accumulation. The default
    /// skips only the initial point: it is pinned by configuration, not
    /// data, and including it would inject its transient into the average.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Fraction of trailing checkpoints used by the slope fit.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// Monte Carlo draws behind the ground-truth covariance.
    #[serde(default = "default_gt_mc_samples")]
    pub gt_mc_samples: usize,
    /// Seed of the ground-truth estimation; defaults to `base_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_seed: Option<u64>,
    /// Agent reported by the per-agent coverage/normality rows.
    #[serde(default)]
    pub tracked_agent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub experiment: ExperimentSection,
}

pub const VALID_KINDS: [&str; 3] = ["rate", "normality", "coverage"];
pub const VALID_ALGORITHMS: [&str; 3] = ["sab", "dsgt", "dsgd"];

impl ExperimentConfig {
    /// The simulation-study defaults shared by all three experiments:
    /// 20 agents on a seeded ring-plus-random network, the ridge model,
    /// and the step sequence `0.05/(k+1)^0.6`.
    fn study_base() -> Self {
        ExperimentConfig {
            graph: GraphConfig {
                n: 20,
                p: 0.3,
                seed: 7,
                per_replication: false,
            },
            model: ModelConfig {
                d: 3,
                gamma: 1.0,
                w_low: 1.0,
                w_high: 2.0,
                noise_sd: 1.0,
                xtilde: XtildeConfig {
                    rule: "linear".into(),
                    low: Some(1.0),
                    high: Some(10.0),
                    value: None,
                },
            },
            schedule: ScheduleConfig {
                a: 0.05,
                b: 1.0,
                alpha: 0.6,
            },
            experiment: ExperimentSection {
                kind: None,
                iterations: 5000,
                replications: 50,
                checkpoints: None,
                algorithms: vec!["sab".into(), "dsgt".into(), "dsgd".into()],
                base_seed: 42,
                parallelism: 0,
                beta: default_beta(),
                burn_in: default_burn_in(),
                tail_fraction: default_tail_fraction(),
                gt_mc_samples: default_gt_mc_samples(),
                gt_seed: None,
                tracked_agent: 0,
            },
        }
    }

    /// Defaults of the error-trajectory comparison: 50 replications of
    /// 5000 iterations for all three algorithms.
    pub fn study_rate() -> Self {
        let mut cfg = Self::study_base();
        cfg.experiment.kind = Some("rate".into());
        cfg
    }

    /// Defaults of the normality study: 500 replications of 30000
    /// iterations of push-pull alone.
    pub fn study_normality() -> Self {
        let mut cfg = Self::study_base();
        cfg.experiment.kind = Some("normality".into());
        cfg.experiment.iterations = 30_000;
        cfg.experiment.replications = 500;
        cfg.experiment.algorithms = vec!["sab".into()];
        cfg
    }

    /// Defaults of the coverage study: 500 replications of 30000
    /// iterations with the plug-in estimator, checkpointed at the four
    /// reported iterations.
    pub fn study_coverage() -> Self {
        let mut cfg = Self::study_normality();
        cfg.experiment.kind = Some("coverage".into());
        cfg.experiment.checkpoints = Some(vec![2000, 5000, 15_000, 30_000]);
        cfg
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        // Experiments over a network need n >= 2 (checked where the graph
        // is built); a bare model, e.g. for ground truth, allows n = 1.
        if self.graph.n < 1 {
            return invalid("graph.n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.graph.p) {
            return invalid(format!("graph.p must lie in [0,1], got {}", self.graph.p));
        }
        if self.model.d < 1 {
            return invalid("model.d must be at least 1".into());
        }
        if !(self.model.gamma > 0.0) {
            return invalid(format!(
                "model.gamma must be positive, got {}",
                self.model.gamma
            ));
        }
        if !(self.model.w_high > self.model.w_low) {
            return invalid("model.w_high must exceed model.w_low".into());
        }
        if self.model.noise_sd < 0.0 {
            return invalid("model.noise_sd must be nonnegative".into());
        }
        self.model.xtilde.placement()?;
        if !(self.schedule.a > 0.0 && self.schedule.b > 0.0) {
            return invalid("schedule.a and schedule.b must be positive".into());
        }
        if !(self.schedule.alpha > 0.5 && self.schedule.alpha <= 1.0) {
            return invalid(format!(
                "schedule.alpha must lie in (1/2, 1], got {}",
                self.schedule.alpha
            ));
        }
        let exp = &self.experiment;
        if let Some(kind) = &exp.kind {
            if !VALID_KINDS.contains(&kind.as_str()) {
                return invalid(format!("unknown experiment.kind {kind:?}"));
            }
        }
        if exp.iterations < 1 {
            return invalid("experiment.iterations must be at least 1".into());
        }
        if exp.replications < 1 {
            return invalid("experiment.replications must be at least 1".into());
        }
        if exp.algorithms.is_empty() {
            return invalid("experiment.algorithms must not be empty".into());
        }
        for alg in &exp.algorithms {
            if !VALID_ALGORITHMS.contains(&alg.as_str()) {
                return invalid(format!("unknown algorithm {alg:?}"));
            }
        }
        if let Some(cps) = &exp.checkpoints {
            if cps.is_empty() {
                return invalid("experiment.checkpoints must not be empty when given".into());
            }
            if cps.iter().any(|&c| c > exp.iterations) {
                return invalid("checkpoints must lie within [0, iterations]".into());
            }
            if cps.windows(2).any(|w| w[0] >= w[1]) {
                return invalid("checkpoints must be strictly increasing".into());
            }
        }
        if !(exp.beta > 0.0 && exp.beta < 1.0) {
            return invalid(format!(
                "experiment.beta must lie in (0,1), got {}",
                exp.beta
            ));
        }
        if !(exp.tail_fraction > 0.0 && exp.tail_fraction <= 1.0) {
            return invalid("experiment.tail_fraction must lie in (0,1]".into());
        }
        if exp.gt_mc_samples < 2 {
            return invalid("experiment.gt_mc_samples must be at least 2".into());
        }
        if exp.tracked_agent >= self.graph.n {
            return invalid(format!(
                "experiment.tracked_agent {} out of range for n={}",
                exp.tracked_agent, self.graph.n
            ));
        }
        if exp.burn_in >= exp.iterations {
            return invalid("experiment.burn_in must be below experiment.iterations".into());
        }
        Ok(())
    }

    /// The ridge oracle this configuration describes.
    pub fn build_model(&self) -> Result<RidgeModel, ConfigError> {
        Ok(RidgeModel::new(
            self.graph.n,
            self.model.d,
            self.model.gamma,
            self.model.w_low,
            self.model.w_high,
            self.model.noise_sd,
            self.model.xtilde.placement()?,
        ))
    }

    /// Checkpoints to record, deriving kind-appropriate defaults when the
    /// config leaves them out.
    pub fn resolved_checkpoints(&self) -> Vec<usize> {
        if let Some(cps) = &self.experiment.checkpoints {
            return cps.clone();
        }
        let k = self.experiment.iterations;
        match self.experiment.kind.as_deref() {
            Some("coverage") | Some("normality") => {
                let mut cps: Vec<usize> = [k / 15, k / 6, k / 2, k]
                    .into_iter()
                    .filter(|&c| c >= 1)
                    .collect();
                cps.dedup();
                cps
            }
            _ => {
                let stride = (k / 200).max(1);
                let mut cps: Vec<usize> = (0..=k).step_by(stride).collect();
                if *cps.last().unwrap() != k {
                    cps.push(k);
                }
                cps
            }
        }
    }
}

/// Apply `key.path=value` overrides to a JSON document before it is
/// deserialized; unknown keys then fail in deserialization.
pub fn apply_overrides(
    root: &mut serde_json::Value,
    overrides: &[(String, String)],
) -> Result<(), ConfigError> {
    for (path, raw) in overrides {
        let mut cursor = &mut *root;
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(ConfigError::Override(
                path.clone(),
                "empty path segment".into(),
            ));
        }
        for seg in &segments[..segments.len() - 1] {
            if !cursor.is_object() {
                return Err(ConfigError::Override(
                    path.clone(),
                    format!("{seg} is not an object"),
                ));
            }
            cursor = cursor
                .as_object_mut()
                .unwrap()
                .entry(seg.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
        let leaf = segments.last().unwrap().to_string();
        let value = match serde_json::from_str::<serde_json::Value>(raw) {
            Ok(v) if !v.is_object() => v,
            _ => serde_json::Value::String(raw.clone()),
        };
        match cursor.as_object_mut() {
            Some(obj) => {
                obj.insert(leaf, value);
            }
            None => {
                return Err(ConfigError::Override(
                    path.clone(),
                    "parent is not an object".into(),
                ))
            }
        }
    }
    Ok(())
}

/// Parse a `key=value` CLI override.
pub fn parse_override(spec: &str) -> Result<(String, String), ConfigError> {
    match spec.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(ConfigError::Override(
            spec.to_string(),
            "expected key.path=value".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_defaults_validate() {
        for cfg in [
            ExperimentConfig::study_rate(),
            ExperimentConfig::study_normality(),
            ExperimentConfig::study_coverage(),
        ] {
            cfg.validate().unwrap();
            let round: ExperimentConfig = serde_json::from_str(&cfg.to_json_pretty()).unwrap();
            assert_eq!(cfg, round);
        }
        assert_eq!(
            ExperimentConfig::study_coverage().resolved_checkpoints(),
            vec![2000, 5000, 15_000, 30_000]
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc: serde_json::Value =
            serde_json::to_value(ExperimentConfig::study_rate()).unwrap();
        doc["schedule"]["typo_key"] = serde_json::json!(1.0);
        let err = ExperimentConfig::from_json_str(&doc.to_string()).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
    }

    #[test]
    fn overrides_navigate_dotted_paths() {
        let mut doc = serde_json::to_value(ExperimentConfig::study_rate()).unwrap();
        apply_overrides(
            &mut doc,
            &[
                ("schedule.a".into(), "0.1".into()),
                ("experiment.replications".into(), "2".into()),
                ("model.xtilde.rule".into(), "constant".into()),
                ("model.xtilde.value".into(), "0".into()),
            ],
        )
        .unwrap();
        let cfg = ExperimentConfig::from_json_str(&doc.to_string()).unwrap();
        assert_eq!(cfg.schedule.a, 0.1);
        assert_eq!(cfg.experiment.replications, 2);
        assert_eq!(
            cfg.model.xtilde.placement().unwrap(),
            crate::oracle::XtildePlacement::Constant { value: 0.0 }
        );
    }

    #[test]
    fn validation_catches_bad_sections() {
        let mut cfg = ExperimentConfig::study_rate();
        cfg.experiment.replications = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::study_rate();
        cfg.experiment.algorithms = vec!["sag".into()];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::study_rate();
        cfg.schedule.alpha = 0.5;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::study_rate();
        cfg.experiment.checkpoints = Some(vec![0, 10_000]);
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::study_rate();
        cfg.experiment.tracked_agent = 20;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn override_parsing() {
        assert_eq!(
            parse_override("schedule.a=0.05").unwrap(),
            ("schedule.a".to_string(), "0.05".to_string())
        );
        assert!(parse_override("nonsense").is_err());
        assert!(parse_override("=5").is_err());
    }

    #[test]
    fn default_rate_checkpoints_cover_the_run() {
        let cfg = ExperimentConfig::study_rate();
        let cps = cfg.resolved_checkpoints();
        assert_eq!(cps.first(), Some(&0));
        assert_eq!(cps.last(), Some(&5000));
        assert!(cps.len() >= 100);
    }
}
