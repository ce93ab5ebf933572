//! TOML configuration: extra or replacement classification rules, remedy
//! overrides, benefit discounts and the counter "unchanged" band.
//!
//! ```toml
//! replace_default_rules = false
//!
//! [[rule]]
//! substring = "call instruction cannot be vectorized"
//! category = "LIBCALL"
//!
//! [[remedies.NORETURN_EXIT]]
//! kind = "flag"
//! text = "-DNDEBUG"
//! rationale = "Strip assertions from release builds."
//! correctness_note = "Disables assert() checks."
//!
//! [benefit]
//! bounds_discount = 0.5
//! reduction_discount = 0.5
//!
//! [counters]
//! tolerance = 0.10
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::advise::{AdviseError, BenefitDiscounts, BlockerCategory, ClassifyRule, KnowledgeBase, Remedy};
use crate::counters::DEFAULT_TOLERANCE;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub replace_default_rules: bool,
    #[serde(default, rename = "rule")]
    pub rules: Vec<ClassifyRule>,
    #[serde(default)]
    pub remedies: BTreeMap<BlockerCategory, Vec<Remedy>>,
    #[serde(default)]
    pub benefit: BenefitSection,
    #[serde(default)]
    pub counters: CounterSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenefitSection {
    pub bounds_discount: Option<f64>,
    pub reduction_discount: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterSection {
    pub tolerance: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    Advise(#[from] AdviseError),
    #[error("{name} must lie in (0, 1], got {value}")]
    Discount { name: &'static str, value: f64 },
    #[error("counters.tolerance must be a non-negative number, got {0}")]
    Tolerance(f64),
}

impl Config {
    pub fn parse(input: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(input)?;
        cfg.tolerance()?;
        Ok(cfg)
    }

    pub fn tolerance(&self) -> Result<f64, ConfigError> {
        let t = self.counters.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if t.is_nan() || t < 0.0 || t.is_infinite() {
            return Err(ConfigError::Tolerance(t));
        }
        Ok(t)
    }

    /// The built-in knowledge base with this config's edits applied.
    pub fn knowledge_base(&self) -> Result<KnowledgeBase, ConfigError> {
        let mut kb = KnowledgeBase::default();
        if self.replace_default_rules {
            kb.set_rules(self.rules.clone())?;
        } else {
            kb.extend_rules(self.rules.clone())?;
        }
        for (&category, list) in &self.remedies {
            kb.set_remedies(category, list.clone())?;
        }
        let defaults = BenefitDiscounts::default();
        kb.discounts = BenefitDiscounts {
            bounds: discount("benefit.bounds_discount", self.benefit.bounds_discount, defaults.bounds)?,
            reduction: discount(
                "benefit.reduction_discount",
                self.benefit.reduction_discount,
                defaults.reduction,
            )?,
        };
        Ok(kb)
    }
}

fn discount(name: &'static str, value: Option<f64>, default: f64) -> Result<f64, ConfigError> {
    let v = value.unwrap_or(default);
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::Discount { name, value: v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advise::RemedyKind;

    #[test]
    fn empty_config_is_default() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg.knowledge_base().unwrap(), KnowledgeBase::default());
        assert_eq!(cfg.tolerance().unwrap(), 0.10);
    }

    #[test]
    fn full_config() {
        let cfg = Config::parse(
            r#"
[[rule]]
substring = "call instruction cannot be vectorized"
category = "LIBCALL"

[[remedies.NORETURN_EXIT]]
kind = "flag"
text = "-DNDEBUG"
rationale = "release builds"
correctness_note = "no asserts"

[benefit]
bounds_discount = 0.25

[counters]
tolerance = 0.2
"#,
        )
        .unwrap();
        let kb = cfg.knowledge_base().unwrap();
        assert_eq!(kb.rules().len(), 7);
        assert_eq!(
            kb.classify_message("call instruction cannot be vectorized"),
            BlockerCategory::Libcall
        );
        let nd = kb.remedies(BlockerCategory::NoreturnExit).unwrap();
        assert_eq!(nd.len(), 1);
        assert_eq!(nd[0].kind, RemedyKind::Flag);
        assert_eq!(kb.discounts.bounds, 0.25);
        assert_eq!(kb.discounts.reduction, 0.5);
        assert_eq!(cfg.tolerance().unwrap(), 0.2);
    }

    #[test]
    fn replacing_rules() {
        let cfg = Config::parse(
            "replace_default_rules = true\n[[rule]]\nsubstring = \"x\"\ncategory = \"CF_SELECT\"\n",
        )
        .unwrap();
        let kb = cfg.knowledge_base().unwrap();
        assert_eq!(kb.rules().len(), 1);
        assert_eq!(kb.classify_message("Unknown array bounds"), BlockerCategory::Unknown);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("[counters]\ntolerance = -1.0\n").is_err());
        assert!(Config::parse("bogus = 1\n").is_err());
        let cfg = Config::parse("[benefit]\nbounds_discount = 1.5\n").unwrap();
        assert!(matches!(cfg.knowledge_base(), Err(ConfigError::Discount { .. })));
        let cfg = Config::parse("[[remedies.VECTORIZED]]\nkind = \"flag\"\ntext = \"x\"\nrationale = \"y\"\n").unwrap();
        assert!(cfg.knowledge_base().is_err());
        let cfg = Config::parse("[[rule]]\nsubstring = \"\"\ncategory = \"LIBCALL\"\n").unwrap();
        assert!(cfg.knowledge_base().is_err());
    }
}
