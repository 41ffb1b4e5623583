//! Flat `section.key` settings merged from defaults, a TOML file, `DCAD_`
//! environment variables and flags, in that order of precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use corpusclean::anomaly::{Algorithm, DetectorConfig};
use corpusclean::features::{FeatureConfig, TokenizerMode, FEATURE_COUNT};
use corpusclean::pipeline::{RunConfig, StatsScope, ThresholdRuleSet};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Text,
    Path,
    PathList,
    Count,
    Seed,
    Real,
    Bool,
}

/// Every setting: key, kind, default (empty for unset), and whether it
/// takes part in the config hash. Output locations and resource-only knobs
/// such as the worker count do not change results and are left out.
const KEYS: &[(&str, Kind, &str, bool)] = &[
    ("run.input", Kind::PathList, "", true),
    ("run.out", Kind::Path, "", false),
    ("run.on_error", Kind::Text, "skip", true),
    ("run.annotate", Kind::Bool, "false", true),
    ("run.min_docs", Kind::Count, "32", true),
    ("run.fit_cap", Kind::Count, "100000", true),
    ("run.stats_scope", Kind::Text, "per-language", true),
    ("run.memory_budget", Kind::Count, "1073741824", false),
    ("run.batch_size", Kind::Count, "4096", false),
    ("run.workers", Kind::Count, "0", false),
    ("run.spill_dir", Kind::Path, "", false),
    ("run.shards", Kind::Count, "1", true),
    ("resources.models_dir", Kind::Path, "", true),
    ("resources.lid_model", Kind::Path, "", true),
    ("resources.stopwords_dir", Kind::Path, "", true),
    ("resources.flagged_dir", Kind::Path, "", true),
    ("resources.special_chars", Kind::Path, "", true),
    ("features.char_gram", Kind::Count, "10", true),
    ("features.word_gram", Kind::Count, "2", true),
    ("features.tokenizer", Kind::Text, "", true),
    ("detector.algorithm", Kind::Text, "iforest", true),
    ("detector.contamination", Kind::Real, "0.0769", true),
    ("detector.tau", Kind::Real, "", true),
    ("detector.trees", Kind::Count, "100", true),
    ("detector.psi", Kind::Count, "256", true),
    ("detector.lof_k", Kind::Count, "20", true),
    ("detector.kmeans_clusters", Kind::Count, "8", true),
    ("detector.kmeans_iters", Kind::Count, "100", true),
    ("detector.seed", Kind::Seed, "42", true),
    ("detector.ablate_feature", Kind::Text, "", true),
    ("threshold.rules", Kind::Text, "", true),
    ("lm.order", Kind::Count, "3", true),
    ("lm.lang", Kind::Text, "", true),
    ("lm.min_sentences", Kind::Count, "10000", true),
    ("lid.gram", Kind::Count, "3", true),
    ("lid.alpha", Kind::Real, "0.5", true),
    ("synth.fluent", Kind::Count, "1000", true),
    ("synth.noise", Kind::Count, "100", true),
    ("synth.seed", Kind::Seed, "1", true),
    ("output.path", Kind::Path, "", false),
    ("output.scatter", Kind::Path, "", false),
];

fn key_info(key: &str) -> Option<(Kind, &'static str, bool)> {
    KEYS.iter().find(|k| k.0 == key).map(|k| (k.1, k.2, k.3))
}

pub fn env_name(key: &str) -> String {
    format!("DCAD_{}", key.replace('.', "_").to_uppercase())
}

/// Raw values by layer; later `set` calls win.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn defaults() -> Self {
        let mut s = Settings::default();
        for (k, _, d, _) in KEYS {
            if !d.is_empty() {
                s.values.insert(k.to_string(), d.to_string());
            }
        }
        s
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(key_info(key).is_some(), "unknown key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    /// Overlays a TOML file of `[section]` tables.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        for (section, body) in table {
            let toml::Value::Table(body) = body else {
                bail!("{}: top-level key {section:?} must be a [section]", path.display());
            };
            for (k, v) in body {
                let key = format!("{section}.{k}");
                if key_info(&key).is_none() {
                    bail!("{}: unknown setting {key:?}", path.display());
                }
                let value = toml_scalar(&v).ok_or_else(|| anyhow!("{}: unsupported value for {key}", path.display()))?;
                self.values.insert(key, value);
            }
        }
        Ok(())
    }

    /// Overlays `DCAD_<SECTION>_<KEY>` variables.
    pub fn merge_env(&mut self, env: impl Fn(&str) -> Option<String>) {
        for (k, ..) in KEYS {
            if let Some(v) = env(&env_name(k)) {
                self.values.insert(k.to_string(), v);
            }
        }
    }

    /// Checks and normalizes every value, so that equal settings written
    /// differently resolve and hash alike.
    pub fn canonical(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.values {
            let (kind, ..) = key_info(k).ok_or_else(|| anyhow!("unknown setting {k:?}"))?;
            if v.is_empty() {
                continue;
            }
            let c = match kind {
                Kind::Text | Kind::Path => v.trim().to_string(),
                Kind::PathList => split_list(v).join(","),
                Kind::Count => v.trim().parse::<usize>().map_err(|_| anyhow!("{k}: expected a non-negative integer, got {v:?}"))?.to_string(),
                Kind::Seed => v.trim().parse::<u64>().map_err(|_| anyhow!("{k}: expected a non-negative integer, got {v:?}"))?.to_string(),
                Kind::Real => {
                    let x: f64 = v.trim().parse().map_err(|_| anyhow!("{k}: expected a number, got {v:?}"))?;
                    if !x.is_finite() {
                        bail!("{k}: expected a finite number, got {v:?}");
                    }
                    x.to_string()
                }
                Kind::Bool => match v.trim() {
                    "true" | "1" | "yes" => "true".into(),
                    "false" | "0" | "no" => "false".into(),
                    _ => bail!("{k}: expected true or false, got {v:?}"),
                },
            };
            out.insert(k.clone(), c);
        }
        Ok(out)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        Resolved::from_canonical(self.canonical()?)
    }
}

fn toml_scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        toml::Value::Array(a) => a.iter().map(toml_scalar).collect::<Option<Vec<_>>>().map(|v| v.join(",")),
        _ => None,
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Paths named by the settings that are loaded into feature resources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResourcePaths {
    pub models_dir: Option<PathBuf>,
    pub lid_model: Option<PathBuf>,
    pub stopwords_dir: Option<PathBuf>,
    pub flagged_dir: Option<PathBuf>,
    pub special_chars: Option<PathBuf>,
}

/// Typed settings.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub inputs: Vec<String>,
    pub out: Option<PathBuf>,
    pub run: RunConfig,
    pub shards: usize,
    pub resources: ResourcePaths,
    pub features: FeatureConfig,
    pub detector: DetectorConfig,
    pub rules: Option<ThresholdRuleSet>,
    pub lm_order: usize,
    pub lm_lang: Option<String>,
    pub lm_min_sentences: usize,
    pub lid_gram: usize,
    pub lid_alpha: f64,
    pub synth_fluent: usize,
    pub synth_noise: usize,
    pub synth_seed: u64,
    pub output: Option<PathBuf>,
    pub hash: String,
}

impl Resolved {
    fn from_canonical(c: BTreeMap<String, String>) -> Result<Self> {
        let text = |k: &str| c.get(k).cloned();
        let path = |k: &str| c.get(k).map(PathBuf::from);
        let count = |k: &str| -> usize { c.get(k).and_then(|v| v.parse().ok()).expect("defaulted count") };

        let mut run = RunConfig::new(path("run.out").unwrap_or_default());
        run.on_error = text("run.on_error").unwrap_or_default().parse()?;
        run.annotate = c.get("run.annotate").is_some_and(|v| v == "true");
        run.min_docs = count("run.min_docs");
        run.fit_cap = count("run.fit_cap");
        run.stats_scope = text("run.stats_scope").unwrap_or_default().parse::<StatsScope>()?;
        run.memory_budget = count("run.memory_budget");
        run.batch_size = count("run.batch_size");
        run.workers = Some(count("run.workers")).filter(|&w| w > 0);
        run.spill_dir = path("run.spill_dir");
        run.scatter = path("output.scatter");
        run.validate()?;

        let mut features = FeatureConfig {
            char_gram: count("features.char_gram"),
            word_gram: count("features.word_gram"),
            ..Default::default()
        };
        for item in split_list(&text("features.tokenizer").unwrap_or_default()) {
            let (lang, mode) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("features.tokenizer: expected lang=words|chars, got {item:?}"))?;
            features.tokenizer_overrides.insert(lang.trim().to_string(), mode.trim().parse::<TokenizerMode>()?);
        }
        features.validate()?;

        let mut detector = DetectorConfig {
            algorithm: text("detector.algorithm").unwrap_or_default().parse::<Algorithm>()?,
            contamination: c["detector.contamination"].parse()?,
            tau: c.get("detector.tau").map(|v| v.parse()).transpose()?,
            trees: count("detector.trees"),
            psi: count("detector.psi"),
            lof_k: count("detector.lof_k"),
            kmeans_clusters: count("detector.kmeans_clusters"),
            kmeans_iters: count("detector.kmeans_iters"),
            seed: c["detector.seed"].parse()?,
            feature_mask: None,
        };
        let ablate = split_list(&text("detector.ablate_feature").unwrap_or_default());
        if !ablate.is_empty() {
            let mut mask: Vec<usize> = (0..FEATURE_COUNT).collect();
            for a in &ablate {
                let i: usize = a
                    .parse()
                    .ok()
                    .filter(|i| (1..=FEATURE_COUNT).contains(i))
                    .ok_or_else(|| anyhow!("detector.ablate_feature: expected 1..={FEATURE_COUNT}, got {a:?}"))?;
                mask.retain(|&m| m != i - 1);
            }
            detector.feature_mask = Some(mask);
        }
        detector.validate(FEATURE_COUNT)?;

        let rules = text("threshold.rules")
            .map(|r| if r == "none" { Ok(ThresholdRuleSet::new()) } else { ThresholdRuleSet::parse(&r) })
            .transpose()?;
        let lid_alpha: f64 = c["lid.alpha"].parse()?;

        let mut hasher = Sha256::new();
        for (k, v) in &c {
            if key_info(k).is_some_and(|s| s.2) {
                hasher.update(format!("{k}={v}\n").as_bytes());
            }
        }
        let hash = hex::encode(hasher.finalize());
        run.config_hash = Some(hash.clone());

        Ok(Resolved {
            inputs: split_list(&text("run.input").unwrap_or_default()),
            out: path("run.out"),
            run,
            shards: count("run.shards"),
            resources: ResourcePaths {
                models_dir: path("resources.models_dir"),
                lid_model: path("resources.lid_model"),
                stopwords_dir: path("resources.stopwords_dir"),
                flagged_dir: path("resources.flagged_dir"),
                special_chars: path("resources.special_chars"),
            },
            features,
            detector,
            rules,
            lm_order: count("lm.order"),
            lm_lang: text("lm.lang"),
            lm_min_sentences: count("lm.min_sentences"),
            lid_gram: count("lid.gram"),
            lid_alpha,
            synth_fluent: count("synth.fluent"),
            synth_noise: count("synth.noise"),
            synth_seed: c["synth.seed"].parse()?,
            output: path("output.path"),
            hash,
        })
    }

    /// Input paths with `*`, `?` and `[...]` patterns expanded in sorted
    /// order. A pattern matching nothing is an error.
    pub fn input_paths(&self) -> Result<Vec<PathBuf>> {
        if self.inputs.is_empty() {
            bail!("no input given (--input or run.input)");
        }
        let mut out = Vec::new();
        for i in &self.inputs {
            if i.contains(['*', '?', '[']) {
                let mut matched: Vec<PathBuf> = glob::glob(i)
                    .with_context(|| format!("bad input pattern {i:?}"))?
                    .collect::<std::result::Result<_, _>>()?;
                if matched.is_empty() {
                    bail!("input pattern {i:?} matches no files");
                }
                matched.sort();
                out.extend(matched);
            } else {
                out.push(PathBuf::from(i));
            }
        }
        Ok(out)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| anyhow!("no output directory given (--out or run.out)"))
    }

    /// The output file, with its parent directory created.
    pub fn output_path(&self) -> Result<&Path> {
        let path = self
            .output
            .as_deref()
            .ok_or_else(|| anyhow!("no output file given (--output or output.path)"))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = Settings::defaults().resolve().unwrap();
        assert_eq!(r.detector, DetectorConfig::default());
        assert_eq!(r.run.min_docs, 32);
        assert_eq!(r.features, FeatureConfig::default());
        assert!(r.rules.is_none());
    }

    #[test]
    fn layers_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.toml");
        std::fs::write(&f, "[detector]\ncontamination = 0.2\ntrees = 50\n[run]\ninput = [\"a.jsonl\", \"b.jsonl\"]\n").unwrap();
        let mut s = Settings::defaults();
        s.merge_file(&f).unwrap();
        s.merge_env(|k| (k == "DCAD_DETECTOR_TREES").then(|| "70".to_string()));
        s.set("detector.contamination", "0.1");
        let r = s.resolve().unwrap();
        assert_eq!(r.detector.contamination, 0.1);
        assert_eq!(r.detector.trees, 70);
        assert_eq!(r.inputs, vec!["a.jsonl", "b.jsonl"]);
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.toml");
        std::fs::write(&f, "[detector]\ncontaminaton = 0.2\n").unwrap();
        assert!(Settings::defaults().merge_file(&f).is_err());
        std::fs::write(&f, "trees = 2\n").unwrap();
        assert!(Settings::defaults().merge_file(&f).is_err());
    }

    #[test]
    fn hash_ignores_spelling_and_output_location() {
        let mut a = Settings::defaults();
        a.set("detector.contamination", "0.07690");
        a.set("run.out", "x");
        let mut b = Settings::defaults();
        b.set("detector.contamination", "7.69e-2");
        b.set("run.out", "y");
        b.set("run.workers", "3");
        assert_eq!(a.resolve().unwrap().hash, b.resolve().unwrap().hash);
        b.set("detector.seed", "7");
        assert_ne!(a.resolve().unwrap().hash, b.resolve().unwrap().hash);
    }

    #[test]
    fn ablation_is_one_based() {
        let mut s = Settings::defaults();
        s.set("detector.ablate_feature", "7");
        let r = s.resolve().unwrap();
        assert_eq!(r.detector.feature_mask, Some(vec![0, 1, 2, 3, 4, 5, 7]));
        s.set("detector.ablate_feature", "0");
        assert!(s.resolve().is_err());
        s.set("detector.ablate_feature", "9");
        assert!(s.resolve().is_err());
    }

    #[test]
    fn range_checks() {
        let mut s = Settings::defaults();
        s.set("detector.contamination", "1.5");
        assert!(s.resolve().is_err());
        let mut s = Settings::defaults();
        s.set("detector.trees", "-1");
        assert!(s.resolve().is_err());
    }

    #[test]
    fn every_key_has_an_env_name() {
        for (k, ..) in KEYS {
            assert!(env_name(k).starts_with("DCAD_"));
            assert!(!env_name(k).contains('.'));
        }
    }
}
