//! Dataset to tensor conversion. Tabular features enter as raw 0/1 values;
//! sequence steps are `[ls one-hot (c_max) | ds scaled | smin phase one-hot
//! (4) | weekday one-hot (7)]` restricted to the conditioning features, with
//! padding (and short records, left-padded) encoded as all zeros.

use super::{CvaeArchitecture, TaskKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ndcompute::Tensor;
use crate::seqdata::{day_phase, SequenceData, DAY_PHASES, WEEKDAYS};

#[derive(Debug, Clone)]
pub(crate) enum Features {
    Tabular(Tensor),
    /// One `N x d` tensor per time step, oldest first.
    Sequence(Vec<Tensor>),
}

#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    pub features: Features,
    pub targets: Option<Vec<u32>>,
    pub rows: usize,
}

impl Encoded {
    pub fn select(&self, idx: &[usize]) -> Encoded {
        let features = match &self.features {
            Features::Tabular(x) => Features::Tabular(x.select_rows(idx)),
            Features::Sequence(steps) => Features::Sequence(steps.iter().map(|s| s.select_rows(idx)).collect()),
        };
        Encoded {
            features,
            targets: self.targets.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
            rows: idx.len(),
        }
    }

    pub fn require_targets(&self) -> Result<&[u32]> {
        self.targets
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("the encoder needs observed targets".into()))
    }
}

/// Per-step width of one sequence feature.
pub(crate) fn step_width(feature: &str, c_max: usize) -> usize {
    match feature {
        "ls" => c_max,
        "ds" => 1,
        "smin" => DAY_PHASES as usize,
        "w" => WEEKDAYS as usize,
        _ => 0,
    }
}

/// Min and max of non-padding durations, for scaling.
pub(crate) fn ds_range(data: &SequenceData) -> Option<[f64; 2]> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in data.records() {
        for (i, &d) in r.ds.iter().enumerate() {
            if !r.is_padding(i) {
                lo = lo.min(f64::from(d));
                hi = hi.max(f64::from(d));
            }
        }
    }
    (lo <= hi).then_some([lo, hi])
}

pub(crate) fn encode(arch: &CvaeArchitecture, data: &Dataset, ds_scale: Option<[f64; 2]>) -> Result<Encoded> {
    match (arch.task, data) {
        (TaskKind::Binary, Dataset::Tabular(t)) => {
            let missing: Vec<String> = arch
                .conditioning
                .iter()
                .filter(|c| t.column(c).is_none())
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(Error::FeatureMismatch { missing, extra: Vec::new() });
            }
            let n = t.len();
            let k = arch.conditioning.len();
            let mut x = vec![0.0; n * k];
            for (j, name) in arch.conditioning.iter().enumerate() {
                for (i, &v) in t.column(name).unwrap().iter().enumerate() {
                    if v > 1 {
                        return Err(Error::InvalidArgument(format!("`{name}` has non-binary value {v}")));
                    }
                    x[i * k + j] = f64::from(v);
                }
            }
            let targets = match t.column(&arch.target) {
                Some(col) => {
                    if let Some(&bad) = col.iter().find(|&&v| v > 1) {
                        return Err(Error::LabelOutOfRange { label: bad as usize, classes: 2 });
                    }
                    Some(col.to_vec())
                }
                None => None,
            };
            Ok(Encoded {
                features: Features::Tabular(Tensor::matrix(n, k, x)?),
                targets,
                rows: n,
            })
        }
        (TaskKind::CategoricalSequence, Dataset::Sequence(s)) => encode_sequence(arch, s, ds_scale),
        (TaskKind::Binary, Dataset::Sequence(_)) => Err(Error::InvalidArgument(
            "binary model given sequence data".into(),
        )),
        (TaskKind::CategoricalSequence, Dataset::Tabular(_)) => Err(Error::InvalidArgument(
            "sequence model given tabular data".into(),
        )),
    }
}

fn encode_sequence(arch: &CvaeArchitecture, data: &SequenceData, ds_scale: Option<[f64; 2]>) -> Result<Encoded> {
    let t_max = arch.max_sequence_length;
    let n = data.len();
    let c = arch.c_max;
    let widths: Vec<usize> = arch.conditioning.iter().map(|f| step_width(f, c)).collect();
    let d: usize = widths.iter().sum();
    let mut steps = vec![vec![0.0; n * d]; t_max];
    for (i, r) in data.records().iter().enumerate() {
        if r.len() > t_max {
            return Err(Error::InvalidArgument(format!(
                "record of length {} exceeds max_sequence_length {t_max}",
                r.len()
            )));
        }
        let offset = t_max - r.len();
        for s in 0..r.len() {
            if r.is_padding(s) {
                continue;
            }
            let row = &mut steps[offset + s][i * d..(i + 1) * d];
            let mut col = 0;
            for (f, &w) in arch.conditioning.iter().zip(&widths) {
                match f.as_str() {
                    "ls" => {
                        let l = r.ls[s] as usize;
                        // Ids outside the output vocabulary have no slot.
                        if l < c {
                            row[col + l] = 1.0;
                        }
                    }
                    "ds" => {
                        row[col] = match ds_scale {
                            Some([lo, hi]) if hi > lo => (f64::from(r.ds[s]) - lo) / (hi - lo),
                            _ => 0.0,
                        };
                    }
                    "smin" => row[col + day_phase(r.smin[s]) as usize] = 1.0,
                    "w" => row[col + r.w[s] as usize] = 1.0,
                    _ => unreachable!("validated feature"),
                }
                col += w;
            }
        }
    }
    let steps = steps
        .into_iter()
        .map(|v| Tensor::matrix(n, d, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Encoded {
        features: Features::Sequence(steps),
        targets: Some(data.targets()),
        rows: n,
    })
}

/// Number of input columns the decoder sees besides `z` (per step for
/// sequences).
pub(crate) fn input_width(arch: &CvaeArchitecture) -> usize {
    match arch.task {
        TaskKind::Binary => arch.conditioning.len(),
        TaskKind::CategoricalSequence => arch.conditioning.iter().map(|f| step_width(f, arch.c_max)).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TabularData;
    use crate::seqdata::{TrajectoryRecord, PAD};

    #[test]
    fn tabular_columns_in_conditioning_order() {
        let t = TabularData::new(
            vec!["a".into(), "b".into(), "y".into()],
            vec![vec![0, 1], vec![1, 1], vec![1, 0]],
        )
        .unwrap();
        let arch = CvaeArchitecture::binary("y", &["b", "a"]);
        let e = encode(&arch, &t.into(), None).unwrap();
        match e.features {
            Features::Tabular(x) => assert_eq!(x.data(), &[1.0, 0.0, 1.0, 1.0]),
            _ => panic!(),
        }
        assert_eq!(e.targets, Some(vec![1, 0]));
    }

    #[test]
    fn missing_feature_is_reported() {
        let t = TabularData::new(vec!["a".into()], vec![vec![0]]).unwrap();
        let arch = CvaeArchitecture::binary("y", &["a", "zz"]);
        assert_eq!(
            encode(&arch, &t.into(), None).unwrap_err(),
            Error::FeatureMismatch {
                missing: vec!["zz".into()],
                extra: vec![]
            }
        );
    }

    #[test]
    fn sequence_steps_are_left_padded_one_hots() {
        let rec = TrajectoryRecord {
            uid: 0,
            ls: vec![PAD, 2],
            ds: vec![PAD, 50],
            smin: vec![PAD, 400],
            w: vec![PAD, 6],
            y: 1,
        };
        let data = SequenceData::new(vec![rec]).unwrap();
        let arch = CvaeArchitecture::sequence(&["ls", "ds", "smin", "w"], 3, 3);
        let e = encode(&arch, &data.into(), Some([0.0, 100.0])).unwrap();
        let Features::Sequence(steps) = e.features else { panic!() };
        assert_eq!(steps.len(), 3);
        assert!(steps[0].data().iter().all(|&v| v == 0.0));
        assert!(steps[1].data().iter().all(|&v| v == 0.0));
        let expected = [
            0.0, 0.0, 1.0, // ls = 2
            0.5, // ds
            0.0, 1.0, 0.0, 0.0, // phase 1
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, // weekday 6
        ];
        assert_eq!(steps[2].data(), &expected);
    }
}
