//! Fixed per-feature bounds: the rule-based baseline filter.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anomaly::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRuleSet {
    bounds: [Bound; FEATURE_COUNT],
}

impl ThresholdRuleSet {
    /// No bounds: everything is kept.
    pub fn new() -> Self {
        Self::default()
    }

    /// Permissive rules of the kind common in heuristic web-text filters.
    pub fn loose() -> Self {
        Self::parse("n_words>=5,r_word_rep<=0.8,r_special<=0.5,r_flag<=0.3").expect("valid built-in rules")
    }

    pub fn bounds(&self) -> &[Bound; FEATURE_COUNT] {
        &self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.iter().all(|b| b.min.is_none() && b.max.is_none())
    }

    pub fn set_min(&mut self, feature: usize, v: f64) -> Result<()> {
        let b = self.bound_mut(feature)?;
        if b.max.is_some_and(|m| v > m) {
            return Err(Error::invalid(format!("min {v} above max for {}", FEATURE_NAMES[feature])));
        }
        b.min = Some(v);
        Ok(())
    }

    pub fn set_max(&mut self, feature: usize, v: f64) -> Result<()> {
        let b = self.bound_mut(feature)?;
        if b.min.is_some_and(|m| v < m) {
            return Err(Error::invalid(format!("max {v} below min for {}", FEATURE_NAMES[feature])));
        }
        b.max = Some(v);
        Ok(())
    }

    fn bound_mut(&mut self, feature: usize) -> Result<&mut Bound> {
        self.bounds
            .get_mut(feature)
            .ok_or_else(|| Error::invalid(format!("feature index {feature} out of range")))
    }

    /// Adds one rule of the form `name>=value` or `name<=value`.
    pub fn add_rule(&mut self, rule: &str) -> Result<()> {
        let rule = rule.trim();
        let (name, op, value) = if let Some((n, v)) = rule.split_once(">=") {
            (n, true, v)
        } else if let Some((n, v)) = rule.split_once("<=") {
            (n, false, v)
        } else {
            return Err(Error::invalid(format!("rule {rule:?} is not `feature>=v` or `feature<=v`")));
        };
        let name = name.trim();
        let feature = FeatureVector::index_of(name).ok_or_else(|| Error::invalid(format!("unknown feature {name:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad bound in rule {rule:?}")))?;
        if !v.is_finite() {
            return Err(Error::invalid(format!("bound in rule {rule:?} must be finite")));
        }
        if op {
            self.set_min(feature, v)
        } else {
            self.set_max(feature, v)
        }
    }

    /// Comma-separated rules; an empty string gives the empty rule set.
    pub fn parse(rules: &str) -> Result<Self> {
        let mut set = Self::new();
        for r in rules.split(',').filter(|r| !r.trim().is_empty()) {
            set.add_rule(r)?;
        }
        Ok(set)
    }

    pub fn admits(&self, x: &FeatureVector) -> bool {
        let a = x.to_array();
        self.bounds.iter().zip(a).all(|(b, v)| b.admits(v))
    }

    pub fn label(&self, x: &FeatureVector) -> Label {
        if self.admits(x) {
            Label::Keep
        } else {
            Label::Remove
        }
    }
}

impl fmt::Display for ThresholdRuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, b) in FEATURE_NAMES.iter().zip(&self.bounds) {
            if let Some(m) = b.min {
                parts.push(format!("{name}>={m}"));
            }
            if let Some(m) = b.max {
                parts.push(format!("{name}<={m}"));
            }
        }
        f.write_str(&parts.join(","))
    }
}

/// `-1` for a vector outside any bound, `+1` otherwise.
pub fn threshold_filter(features: &[FeatureVector], rules: &ThresholdRuleSet) -> Vec<Label> {
    features.iter().map(|x| rules.label(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(n_words: f64, r_flag: f64, s_ppl: f64) -> FeatureVector {
        FeatureVector {
            n_words,
            r_flag,
            s_ppl,
            s_lid: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn min_words() {
        let rules = ThresholdRuleSet::parse("n_words>=5").unwrap();
        assert_eq!(threshold_filter(&[fv(3.0, 0.0, 1.0)], &rules), vec![Label::Remove]);
        assert_eq!(threshold_filter(&[fv(5.0, 0.0, 1.0)], &rules), vec![Label::Keep]);
    }

    #[test]
    fn empty_rules_keep_everything() {
        let rules = ThresholdRuleSet::new();
        assert!(rules.is_empty());
        let labels = threshold_filter(&[fv(0.0, 1.0, 1e9), fv(1.0, 0.0, 1.0)], &rules);
        assert_eq!(labels, vec![Label::Keep, Label::Keep]);
    }

    #[test]
    fn two_upper_bounds() {
        let rules = ThresholdRuleSet::parse("r_flag<=0.1, s_ppl<=1000").unwrap();
        assert_eq!(rules.label(&fv(50.0, 0.05, 1200.0)), Label::Remove);
        assert_eq!(rules.label(&fv(50.0, 0.05, 900.0)), Label::Keep);
        assert_eq!(rules.label(&fv(50.0, 0.1, 1000.0)), Label::Keep);
    }

    #[test]
    fn parse_errors_and_display() {
        assert!(ThresholdRuleSet::parse("bogus>=1").is_err());
        assert!(ThresholdRuleSet::parse("n_words=1").is_err());
        assert!(ThresholdRuleSet::parse("n_words>=x").is_err());
        assert!(ThresholdRuleSet::parse("n_words>=10,n_words<=5").is_err());
        let r = ThresholdRuleSet::parse("n_words>=5,r_flag<=0.1").unwrap();
        assert_eq!(r.to_string(), "n_words>=5,r_flag<=0.1");
        assert_eq!(ThresholdRuleSet::parse(&r.to_string()).unwrap(), r);
        assert!(!ThresholdRuleSet::loose().is_empty());
    }
}
