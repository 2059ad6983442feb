use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bayesnet::BayesNet;
use crate::data::{Dataset, TabularData};
use crate::error::{Error, Result};
use crate::seqdata::{replace_most_frequent, Replacement, SequenceData, PAD, SEQUENCE_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlterationRule {
    /// Every (non-padding) entry of the feature becomes `value`.
    SetConstant { value: u32 },
    /// Resample from the generating network with the node clamped; rows stay
    /// coupled to the factual sample drawn with the same seed.
    MutilateBnNode { value: u8 },
    /// The most frequent value becomes the k-th most frequent (k >= 2).
    ReplaceMostFrequentWithKth { k: usize },
    ReplaceMostFrequentWithValue { value: u32 },
}

impl AlterationRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            AlterationRule::ReplaceMostFrequentWithKth { k } if *k < 2 => {
                Err(Error::Alteration(format!("k = {k} (need k >= 2)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub target_feature: String,
    pub rule: AlterationRule,
    pub applies_to: Split,
}

impl InterventionSpec {
    pub fn new(target_feature: &str, rule: AlterationRule, applies_to: Split) -> Self {
        Self {
            target_feature: target_feature.to_string(),
            rule,
            applies_to,
        }
    }

    /// `do(feature = value)` by setting the column.
    pub fn set_constant(feature: &str, value: u32, applies_to: Split) -> Self {
        Self::new(feature, AlterationRule::SetConstant { value }, applies_to)
    }
}

/// What an alteration may need beyond the data itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlterationContext<'a> {
    /// Generating network and the seed of the factual sample, for
    /// `MutilateBnNode`.
    pub network: Option<(&'a BayesNet, u64)>,
    /// Frequencies for the most-frequent rules come from here (normally the
    /// training split); defaults to the data being altered.
    pub frequency_reference: Option<&'a Dataset>,
}

/// Values ordered by count descending, then value ascending.
fn ranked_values<'a>(values: impl Iterator<Item = &'a u32>) -> Vec<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in values.filter(|&&v| v != PAD) {
        *counts.entry(v).or_default() += 1;
    }
    let mut ranked: Vec<(u32, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(v, _)| v).collect()
}

/// Replacement pair `(most frequent, new value)` for a ranking.
fn replacement_pair(ranked: &[u32], rule: AlterationRule) -> Result<(u32, u32)> {
    let top = *ranked.first().ok_or(Error::Empty("reference values"))?;
    let to = match rule {
        AlterationRule::ReplaceMostFrequentWithKth { k } => *ranked.get(k - 1).ok_or_else(|| {
            Error::Alteration(format!("{} distinct values, cannot take the {k}-th most frequent", ranked.len()))
        })?,
        AlterationRule::ReplaceMostFrequentWithValue { value } => value,
        _ => unreachable!("only most-frequent rules have a replacement pair"),
    };
    Ok((top, to))
}

fn alter_tabular(t: &TabularData, spec: &InterventionSpec, ctx: &AlterationContext) -> Result<Dataset> {
    let name = spec.target_feature.as_str();
    let column = t.require_column(name)?;
    let values = match spec.rule {
        AlterationRule::SetConstant { value } => vec![value; t.len()],
        AlterationRule::MutilateBnNode { value } => {
            let (net, seed) = ctx
                .network
                .ok_or_else(|| Error::Alteration("mutilate_bn_node needs the generating network".into()))?;
            let sample = net.mutilate(name, value)?.ancestral_sample(t.len(), seed)?;
            if sample.names() != t.names() {
                return Err(Error::Alteration("data columns do not match the network nodes".into()));
            }
            return Ok(sample.into());
        }
        rule => {
            let ranked = match ctx.frequency_reference {
                Some(Dataset::Tabular(r)) => ranked_values(r.require_column(name)?.iter()),
                Some(Dataset::Sequence(_)) => {
                    return Err(Error::Alteration("frequency reference is not tabular".into()))
                }
                None => ranked_values(column.iter()),
            };
            let (top, to) = replacement_pair(&ranked, rule)?;
            column.iter().map(|&v| if v == top { to } else { v }).collect()
        }
    };
    Ok(t.with_column(name, values)?.into())
}

fn alter_sequence(s: &SequenceData, spec: &InterventionSpec, ctx: &AlterationContext) -> Result<Dataset> {
    let name = spec.target_feature.as_str();
    if !SEQUENCE_FEATURES.contains(&name) {
        return Err(Error::FeatureMismatch {
            missing: vec![name.to_string()],
            extra: Vec::new(),
        });
    }
    let reference = match ctx.frequency_reference {
        Some(Dataset::Sequence(r)) => r,
        Some(Dataset::Tabular(_)) => return Err(Error::Alteration("frequency reference is not a sequence".into())),
        None => s,
    };
    let altered = match (spec.rule, name) {
        (AlterationRule::SetConstant { value }, _) => {
            let records = s
                .records()
                .iter()
                .map(|r| {
                    let mut out = r.clone();
                    let field = match name {
                        "ls" => &mut out.ls,
                        "ds" => &mut out.ds,
                        "smin" => &mut out.smin,
                        _ => &mut out.w,
                    };
                    for v in field.iter_mut().filter(|v| **v != PAD) {
                        *v = value;
                    }
                    out
                })
                .collect();
            SequenceData::new(records)?
        }
        (AlterationRule::MutilateBnNode { .. }, _) => {
            return Err(Error::Alteration("mutilate_bn_node applies to network-generated tabular data".into()))
        }
        (AlterationRule::ReplaceMostFrequentWithKth { k }, "ls") => replace_most_frequent(s, reference, Replacement::Kth(k))?,
        (AlterationRule::ReplaceMostFrequentWithValue { value }, "ls") => {
            replace_most_frequent(s, reference, Replacement::Value(value))?
        }
        _ => {
            return Err(Error::Alteration(format!(
                "most-frequent rules apply to location sequences, not `{name}`"
            )))
        }
    };
    Ok(altered.into())
}

/// Applies `spec` to `data`. Only the targeted feature changes, except for
/// `MutilateBnNode`, which also resamples the node's descendants.
pub fn apply_alteration(data: &Dataset, spec: &InterventionSpec, ctx: &AlterationContext) -> Result<Dataset> {
    spec.rule.validate()?;
    match data {
        Dataset::Tabular(t) => alter_tabular(t, spec, ctx),
        Dataset::Sequence(s) => alter_sequence(s, spec, ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Dataset {
        TabularData::new(
            vec!["loc".into(), "y".into()],
            vec![vec![5, 5, 3, 5, 2, 3, 7], vec![0, 1, 0, 1, 0, 1, 0]],
        )
        .unwrap()
        .into()
    }

    #[test]
    fn kth_rule_uses_count_then_id_order() {
        let spec = InterventionSpec::new("loc", AlterationRule::ReplaceMostFrequentWithKth { k: 3 }, Split::Train);
        let out = apply_alteration(&table(), &spec, &AlterationContext::default()).unwrap();
        let t = out.as_tabular().unwrap();
        assert_eq!(t.column("loc").unwrap(), &[2, 2, 3, 2, 2, 3, 7]);
        assert_eq!(t.column("y"), table().as_tabular().unwrap().column("y"));
    }

    #[test]
    fn value_rule_substitutes() {
        let spec = InterventionSpec::new("loc", AlterationRule::ReplaceMostFrequentWithValue { value: 0 }, Split::Test);
        let out = apply_alteration(&table(), &spec, &AlterationContext::default()).unwrap();
        assert_eq!(out.as_tabular().unwrap().column("loc").unwrap(), &[0, 0, 3, 0, 2, 3, 7]);
    }

    #[test]
    fn invalid_rules_are_rejected() {
        let ctx = AlterationContext::default();
        let k1 = InterventionSpec::new("loc", AlterationRule::ReplaceMostFrequentWithKth { k: 1 }, Split::Train);
        assert!(apply_alteration(&table(), &k1, &ctx).is_err());
        let k9 = InterventionSpec::new("loc", AlterationRule::ReplaceMostFrequentWithKth { k: 9 }, Split::Train);
        assert!(matches!(apply_alteration(&table(), &k9, &ctx), Err(Error::Alteration(_))));
        let missing = InterventionSpec::set_constant("nope", 1, Split::Train);
        assert!(apply_alteration(&table(), &missing, &ctx).is_err());
        let mutilate = InterventionSpec::new("loc", AlterationRule::MutilateBnNode { value: 1 }, Split::Train);
        assert!(apply_alteration(&table(), &mutilate, &ctx).is_err());
    }

    #[test]
    fn mutilation_clamps_and_keeps_non_descendants() {
        let net = BayesNet::asia();
        let factual: Dataset = net.ancestral_sample(300, 4).unwrap().into();
        let spec = InterventionSpec::new("either", AlterationRule::MutilateBnNode { value: 1 }, Split::Train);
        let ctx = AlterationContext {
            network: Some((&net, 4)),
            ..Default::default()
        };
        let out = apply_alteration(&factual, &spec, &ctx).unwrap();
        let (a, b) = (factual.as_tabular().unwrap(), out.as_tabular().unwrap());
        assert!(b.column("either").unwrap().iter().all(|&v| v == 1));
        for name in ["asia", "tub", "smoke", "lung", "bronc"] {
            assert_eq!(a.column(name), b.column(name), "{name}");
        }
    }
}
