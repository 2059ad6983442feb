use std::collections::BTreeMap;

use super::{SequenceData, PAD};
use crate::error::{Error, Result};

/// Location-sequence alterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsRule {
    /// Most frequent location becomes the third most frequent.
    Ls1,
    /// Most frequent location becomes id 0.
    Ls2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    /// The k-th most frequent location (1-based, k >= 2).
    Kth(usize),
    Value(u32),
}

/// Location counts over every `ls` entry of `reference`, most frequent
/// first; ties go to the smaller id.
pub fn location_frequencies(reference: &SequenceData) -> Vec<(u32, usize)> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for r in reference.records() {
        for &l in r.ls.iter().filter(|&&l| l != PAD) {
            *counts.entry(l).or_default() += 1;
        }
    }
    let mut v: Vec<(u32, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

/// Replaces the most frequent location of `reference` everywhere in the
/// `ls` sequences of `data`. Targets and the other features are untouched.
pub fn replace_most_frequent(
    data: &SequenceData,
    reference: &SequenceData,
    replacement: Replacement,
) -> Result<SequenceData> {
    let freq = location_frequencies(reference);
    let (top, _) = *freq.first().ok_or(Error::Empty("reference locations"))?;
    let to = match replacement {
        Replacement::Kth(k) if k < 2 => {
            return Err(Error::Alteration(format!("k = {k} (need k >= 2)")))
        }
        Replacement::Kth(k) => {
            freq.get(k - 1)
                .ok_or_else(|| {
                    Error::Alteration(format!(
                        "{} distinct locations, cannot take the {k}-th most frequent",
                        freq.len()
                    ))
                })?
                .0
        }
        Replacement::Value(v) => v,
    };
    Ok(data.map_records(|r| {
        let mut out = r.clone();
        for l in out.ls.iter_mut() {
            if *l == top {
                *l = to;
            }
        }
        out
    }))
}

/// Applies an LS rule with frequencies taken from `reference` (normally the
/// training split).
pub fn alter_ls(data: &SequenceData, rule: LsRule, reference: &SequenceData) -> Result<SequenceData> {
    let replacement = match rule {
        LsRule::Ls1 => Replacement::Kth(3),
        LsRule::Ls2 => Replacement::Value(0),
    };
    replace_most_frequent(data, reference, replacement)
}

#[cfg(test)]
mod tests {
    use super::super::TrajectoryRecord;
    use super::*;

    fn single(ls: Vec<u32>) -> SequenceData {
        let n = ls.len();
        SequenceData::new(vec![TrajectoryRecord {
            uid: 0,
            ls,
            ds: vec![1; n],
            smin: vec![0; n],
            w: vec![0; n],
            y: 1,
        }])
        .unwrap()
    }

    #[test]
    fn frequency_order_breaks_ties_by_id() {
        let d = single(vec![5, 5, 3, 5, 2, 3, 7]);
        assert_eq!(location_frequencies(&d), vec![(5, 3), (3, 2), (2, 1), (7, 1)]);
    }

    #[test]
    fn ls1_and_ls2() {
        let d = single(vec![5, 5, 3, 5, 2, 3, 7]);
        assert_eq!(alter_ls(&d, LsRule::Ls1, &d).unwrap().records()[0].ls, vec![2, 2, 3, 2, 2, 3, 7]);
        let ls2 = alter_ls(&d, LsRule::Ls2, &d).unwrap();
        assert_eq!(ls2.records()[0].ls, vec![0, 0, 3, 0, 2, 3, 7]);
        assert_eq!(alter_ls(&ls2, LsRule::Ls2, &d).unwrap(), ls2);
    }

    #[test]
    fn sequences_without_the_top_id_are_unchanged() {
        let reference = single(vec![5, 5, 3, 5, 2, 3, 7]);
        let d = single(vec![1, 2, 3]);
        assert_eq!(alter_ls(&d, LsRule::Ls1, &reference).unwrap(), d);
    }

    #[test]
    fn too_few_distinct_locations() {
        let d = single(vec![1, 1, 2]);
        assert!(matches!(alter_ls(&d, LsRule::Ls1, &d), Err(Error::Alteration(_))));
        assert!(replace_most_frequent(&d, &d, Replacement::Kth(1)).is_err());
    }
}
