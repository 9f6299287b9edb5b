//! Flat key-value config documents.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored. Keys are lowercase identifiers, optionally dotted to
//! group related settings (`base.kind`, `llr.pre_mean`). Values are strings,
//! numbers, booleans, or comma-separated number lists.
//!
//! Descriptor key names:
//!
//! * kernel: `kernel = gaussian`, `sigma2 = 1.0`
//! * distributions (`kind = ...`):
//!   - `gaussian_diag`: `mean`, `variances`
//!   - `gaussian_component_scaled`: `base.*` (nested distribution keys),
//!     `scale_factor`
//!   - `uniform_componentwise`: `dim`, `half_width`
//! * llr models: `llr.pre_mean`, `llr.pre_var`, `llr.post_mean`,
//!   `llr.post_var` (or the same keys unprefixed in a dedicated file)

use std::collections::BTreeMap;

use crate::dist::{Distribution, LlrModel};
use crate::error::{Error, Result};
use crate::eval::{
    default_thresholds, DetectorSpec, EvalJob, ExperimentConfig, SuiteOptions, SuiteTask, TaskId,
};
use crate::kernel::KernelSpec;

/// A parsed flat key-value document.
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", idx + 1)));
            }
            // strip optional quotes around string values
            let value = value.trim().trim_matches('"').to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", idx + 1)));
            }
        }
        Ok(FlatConfig { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a number")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `{key}`: `{v}` is not a nonnegative integer")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!("key `{key}`: `{v}` is not true/false"))),
            })
            .transpose()
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|part| {
                        let part = part.trim();
                        part.parse::<f64>().map_err(|_| {
                            Error::Config(format!("key `{key}`: `{part}` is not a number"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// The sub-document of keys under `prefix.` with the prefix removed.
    pub fn section(&self, prefix: &str) -> FlatConfig {
        let dotted = format!("{prefix}.");
        FlatConfig {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| {
                    k.strip_prefix(&dotted)
                        .map(|rest| (rest.to_string(), v.clone()))
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Read a distribution descriptor from the document's top-level keys.
pub fn distribution_from_config(cfg: &FlatConfig) -> Result<Distribution> {
    match cfg.require("kind")? {
        "gaussian_diag" => {
            let mean = cfg
                .get_f64_list("mean")?
                .ok_or_else(|| Error::Config("gaussian_diag needs `mean`".into()))?;
            let variances = cfg
                .get_f64_list("variances")?
                .ok_or_else(|| Error::Config("gaussian_diag needs `variances`".into()))?;
            Distribution::diagonal_gaussian(mean, variances)
        }
        "gaussian_component_scaled" => {
            let base = cfg.section("base");
            if base.is_empty() {
                return Err(Error::Config(
                    "gaussian_component_scaled needs `base.*` keys".into(),
                ));
            }
            let scale = cfg
                .get_f64("scale_factor")?
                .ok_or_else(|| Error::Config("gaussian_component_scaled needs `scale_factor`".into()))?;
            Distribution::component_scaled(distribution_from_config(&base)?, scale)
        }
        "uniform_componentwise" => {
            let dim = cfg
                .get_u64("dim")?
                .ok_or_else(|| Error::Config("uniform_componentwise needs `dim`".into()))?;
            let half_width = cfg
                .get_f64("half_width")?
                .ok_or_else(|| Error::Config("uniform_componentwise needs `half_width`".into()))?;
            Distribution::componentwise_uniform(dim as usize, half_width)
        }
        other => Err(Error::Config(format!(
            "unknown distribution kind `{other}` (expected gaussian_diag, \
             gaussian_component_scaled, or uniform_componentwise)"
        ))),
    }
}

/// Read a kernel from `kernel` + `sigma2` keys; Gaussian `sigma2 = 1` when
/// both are absent.
pub fn kernel_from_config(cfg: &FlatConfig) -> Result<KernelSpec> {
    match cfg.get("kernel").unwrap_or("gaussian") {
        "gaussian" => KernelSpec::gaussian(cfg.get_f64("sigma2")?.unwrap_or(1.0)),
        other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
    }
}

/// Read a diagonal-Gaussian likelihood-ratio model from `pre_mean`,
/// `pre_var`, `post_mean`, `post_var`.
pub fn llr_model_from_config(cfg: &FlatConfig) -> Result<LlrModel> {
    let need = |key: &str| {
        cfg.get_f64_list(key)?
            .ok_or_else(|| Error::Config(format!("llr model needs `{key}`")))
    };
    LlrModel::gaussian_diag(
        need("pre_mean")?,
        need("pre_var")?,
        need("post_mean")?,
        need("post_var")?,
    )
}

/// Read an evaluation job.
///
/// With `pre.*`/`post.*` keys the document describes a custom experiment
/// (`label`, `detector = kcusum|cusum`, and for the kernel detector `delta`,
/// for the likelihood detector `llr.*` keys). Otherwise it configures the
/// built-in task suite, optionally narrowed to one `task`. Common keys:
/// `thresholds`, `n_reps`, `max_steps`, `master_seed`, `shared_thresholds`,
/// `check_detectability`, `sigma2`, `half_width`, `delta`.
pub fn eval_job_from_config(cfg: &FlatConfig) -> Result<EvalJob> {
    let thresholds = match cfg.get_f64_list("thresholds")? {
        Some(mut t) => {
            t.sort_by(f64::total_cmp);
            t
        }
        None => default_thresholds(),
    };
    let n_reps = cfg.get_u64("n_reps")?.unwrap_or(5000) as usize;
    let max_steps = cfg.get_u64("max_steps")?.unwrap_or(1_000_000);
    let master_seed = cfg.get_u64("master_seed")?.unwrap_or(0);
    let shared = cfg.get_bool("shared_thresholds")?.unwrap_or(true);
    let check = cfg.get_bool("check_detectability")?.unwrap_or(true);

    if cfg.get("pre.kind").is_some() || cfg.get("post.kind").is_some() {
        let pre = distribution_from_config(&cfg.section("pre"))?;
        let post = distribution_from_config(&cfg.section("post"))?;
        let detector = match cfg.get("detector").unwrap_or("kcusum") {
            "kcusum" => DetectorSpec::Kcusum {
                kernel: kernel_from_config(cfg)?,
                delta: cfg
                    .get_f64("delta")?
                    .ok_or_else(|| Error::Config("custom kcusum experiment needs `delta`".into()))?,
            },
            "cusum" => DetectorSpec::Cusum {
                model: llr_model_from_config(&cfg.section("llr"))?,
            },
            other => return Err(Error::Config(format!("unknown detector `{other}`"))),
        };
        let experiment = ExperimentConfig {
            label: cfg.get("label").unwrap_or("custom").to_string(),
            task_code: 0,
            pre,
            post,
            detector,
            thresholds,
            n_reps,
            max_steps,
            master_seed,
            shared_thresholds: shared,
            check_detectability: check,
        };
        experiment.validate()?;
        return Ok(EvalJob::Custom(Box::new(experiment)));
    }

    if matches!(cfg.get("detector"), Some(d) if d != "kcusum") {
        return Err(Error::Config(
            "the task suite runs the kernel detector; use pre.*/post.* keys for a custom \
             cusum experiment"
                .into(),
        ));
    }
    let task_filter = match cfg.get_u64("task")? {
        Some(n) => vec![TaskId::from_number(n as u8)?],
        None => vec![
            TaskId::MeanShift,
            TaskId::VarianceAll,
            TaskId::VarianceRandomComponent,
            TaskId::UniformMatched,
        ],
    };
    let delta_override = cfg.get_f64("delta")?;
    let half_width = cfg.get_f64("half_width")?;
    let tasks = task_filter
        .into_iter()
        .map(|task| SuiteTask {
            task,
            delta: delta_override,
            thresholds: Some(thresholds.clone()),
            half_width,
        })
        .collect();
    let opts = SuiteOptions {
        n_reps,
        master_seed,
        max_steps,
        sigma2: cfg.get_f64("sigma2")?.unwrap_or(1.0),
        shared_thresholds: shared,
        check_detectability: check,
    };
    Ok(EvalJob::Suite { tasks, opts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_quotes() {
        let cfg = FlatConfig::parse(
            "# experiment\nkernel = \"gaussian\"\n\nsigma2 = 1.0  # bandwidth\n",
        )
        .unwrap();
        assert_eq!(cfg.get("kernel"), Some("gaussian"));
        assert_eq!(cfg.get_f64("sigma2").unwrap(), Some(1.0));
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        fn parse_err(s: &str) -> bool {
            FlatConfig::parse(s).is_err()
        }
        assert!(parse_err("just a line"));
        assert!(parse_err("a = 1\na = 2"));
        assert!(parse_err("= 3"));
    }

    #[test]
    fn gaussian_descriptor_round_trip() {
        let cfg = FlatConfig::parse("kind = gaussian_diag\nmean = 0, 0\nvariances = 0.5,0.5\n")
            .unwrap();
        let d = distribution_from_config(&cfg).unwrap();
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn nested_base_descriptor() {
        let text = "kind = gaussian_component_scaled\nscale_factor = 2\n\
                    base.kind = gaussian_diag\nbase.mean = 0,0,0,0\nbase.variances = 0.5,0.5,0.5,0.5\n";
        let d = distribution_from_config(&FlatConfig::parse(text).unwrap()).unwrap();
        assert_eq!(d.dim(), 4);
        assert!(matches!(d, Distribution::ComponentScaledGaussian { .. }));
    }

    #[test]
    fn uniform_descriptor() {
        let cfg =
            FlatConfig::parse("kind = uniform_componentwise\ndim = 4\nhalf_width = 0.2886751345948129\n")
                .unwrap();
        let d = distribution_from_config(&cfg).unwrap();
        assert!(matches!(d, Distribution::ComponentwiseUniform { dim: 4, .. }));
    }

    #[test]
    fn unknown_kind_is_a_config_error() {
        let cfg = FlatConfig::parse("kind = cauchy\n").unwrap();
        assert!(matches!(distribution_from_config(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn llr_model_keys() {
        let text = "pre_mean = 1\npre_var = 1\npost_mean = 1\npost_var = 4\n";
        let model = llr_model_from_config(&FlatConfig::parse(text).unwrap()).unwrap();
        assert_eq!(model.dim(), 1);
    }

    #[test]
    fn kernel_defaults_to_unit_gaussian() {
        let cfg = FlatConfig::parse("").unwrap();
        let k = kernel_from_config(&cfg).unwrap();
        assert_eq!(k.sigma2(), 1.0);
    }

    #[test]
    fn suite_job_with_task_filter() {
        let text = "task = 4\nn_reps = 10\nthresholds = 1,2\nmaster_seed = 5\n";
        let job = eval_job_from_config(&FlatConfig::parse(text).unwrap()).unwrap();
        match job {
            EvalJob::Suite { tasks, opts } => {
                assert_eq!(tasks.len(), 1);
                assert_eq!(tasks[0].task, TaskId::UniformMatched);
                assert_eq!(opts.n_reps, 10);
                assert_eq!(opts.master_seed, 5);
            }
            EvalJob::Custom(_) => panic!("expected suite"),
        }
    }

    #[test]
    fn suite_job_defaults_to_all_tasks() {
        let job = eval_job_from_config(&FlatConfig::parse("n_reps = 2\n").unwrap()).unwrap();
        match job {
            EvalJob::Suite { tasks, .. } => assert_eq!(tasks.len(), 4),
            EvalJob::Custom(_) => panic!("expected suite"),
        }
    }

    #[test]
    fn custom_cusum_job() {
        let text = "\
            label = variance_example\n\
            detector = cusum\n\
            pre.kind = gaussian_diag\npre.mean = 1\npre.variances = 1\n\
            post.kind = gaussian_diag\npost.mean = 1\npost.variances = 4\n\
            llr.pre_mean = 1\nllr.pre_var = 1\nllr.post_mean = 1\nllr.post_var = 4\n\
            thresholds = 2,3\nn_reps = 5\nmax_steps = 1000\nmaster_seed = 1\n";
        let job = eval_job_from_config(&FlatConfig::parse(text).unwrap()).unwrap();
        match job {
            EvalJob::Custom(cfg) => {
                assert_eq!(cfg.label, "variance_example");
                assert!(matches!(cfg.detector, DetectorSpec::Cusum { .. }));
                assert_eq!(cfg.thresholds, vec![2.0, 3.0]);
            }
            EvalJob::Suite { .. } => panic!("expected custom"),
        }
    }

    #[test]
    fn custom_kcusum_requires_delta() {
        let text = "\
            pre.kind = gaussian_diag\npre.mean = 0\npre.variances = 1\n\
            post.kind = gaussian_diag\npost.mean = 1\npost.variances = 1\n";
        assert!(matches!(
            eval_job_from_config(&FlatConfig::parse(text).unwrap()),
            Err(Error::Config(_))
        ));
    }
}
