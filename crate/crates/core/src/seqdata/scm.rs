use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SequenceData, TrajectoryRecord, DAY_PHASES, WEEKDAYS};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

const PRIMARY_SHARE: f64 = 0.7;
const WEEKEND_SHARE: f64 = 2.0 / 7.0;

/// Synthetic trajectory generator with a planted causal structure.
///
/// Each record draws a day phase `phi` (encoded in the start minutes) and a
/// weekday. Locations are driven by a hidden phase and weekend flag: when
/// `smin_is_confounder` the hidden phase is `phi` itself (LS <- Smin -> Y),
/// otherwise an independent draw. When `w_is_confounder` a weekend swaps the
/// phase's two anchor locations; otherwise the weekday has no effect.
///
/// Visits come from the phase profile with probability `history_signal`
/// (0.7 on the anchor, 0.3 on the next id) and are uniform otherwise. The
/// next location repeats the last visit with probability `copy_last`, is
/// uniform with probability `noise`, and is the primary anchor otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScm {
    pub num_users: u32,
    pub num_locations: u32,
    pub window: usize,
    pub smin_is_confounder: bool,
    pub w_is_confounder: bool,
    pub ds_is_noise: bool,
    pub noise: f64,
    pub history_signal: f64,
    pub copy_last: f64,
    pub seed: u64,
}

impl Default for SyntheticScm {
    fn default() -> Self {
        Self {
            num_users: 10,
            num_locations: 8,
            window: 5,
            smin_is_confounder: true,
            w_is_confounder: false,
            ds_is_noise: true,
            noise: 0.2,
            history_signal: 0.35,
            copy_last: 0.2,
            seed: 0,
        }
    }
}

/// Which of the context features a predictor observes besides LS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Observed {
    pub smin: bool,
    pub w: bool,
}

#[derive(Clone, Copy)]
struct Hidden {
    phase: u32,
    weekend: bool,
}

impl SyntheticScm {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_locations < 4 {
            return bad(format!("num_locations = {} (need >= 4)", self.num_locations));
        }
        if self.window < 2 {
            return bad(format!("window = {} (need >= 2)", self.window));
        }
        if self.num_users == 0 {
            return bad("num_users must be positive".into());
        }
        for (name, p) in [
            ("noise", self.noise),
            ("history_signal", self.history_signal),
            ("copy_last", self.copy_last),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.noise + self.copy_last > 1.0 {
            return bad("noise + copy_last exceeds 1".into());
        }
        Ok(())
    }

    fn anchors(&self, h: Hidden) -> (u32, u32) {
        let a = h.phase * self.num_locations / DAY_PHASES;
        let b = (a + 1) % self.num_locations;
        if h.weekend {
            (b, a)
        } else {
            (a, b)
        }
    }

    fn visit_probs(&self, h: Hidden) -> Vec<f64> {
        let n = self.num_locations as usize;
        let mut p = vec![(1.0 - self.history_signal) / n as f64; n];
        let (a, b) = self.anchors(h);
        p[a as usize] += self.history_signal * PRIMARY_SHARE;
        p[b as usize] += self.history_signal * (1.0 - PRIMARY_SHARE);
        p
    }

    fn target_probs(&self, h: Hidden, last: u32) -> Vec<f64> {
        let n = self.num_locations as usize;
        let mut p = vec![self.noise / n as f64; n];
        p[last as usize] += self.copy_last;
        p[self.anchors(h).0 as usize] += 1.0 - self.copy_last - self.noise;
        p
    }

    /// Exact Bayes-optimal top-1 accuracy for predicting `y` from a full
    /// window of locations plus the observed context, computed from the
    /// generator's own tables by enumerating every location sequence.
    pub fn bayes_accuracy(&self, observed: Observed) -> Result<f64> {
        self.validate()?;
        let n = self.num_locations as usize;
        let l = self.window;
        let total = (n as f64).powi(l as i32);
        if total > (1u64 << 22) as f64 {
            return Err(Error::InvalidArgument(format!(
                "{n}^{l} location sequences are too many to enumerate"
            )));
        }
        let phase_known = observed.smin && self.smin_is_confounder;
        let weekend_known = observed.w && self.w_is_confounder;
        let weekend_prior = if self.w_is_confounder { WEEKEND_SHARE } else { 0.0 };

        // Every hidden state with its prior weight.
        let mut hidden = Vec::new();
        for phase in 0..DAY_PHASES {
            for weekend in [false, true] {
                let pw = if weekend { weekend_prior } else { 1.0 - weekend_prior };
                if pw > 0.0 {
                    hidden.push((Hidden { phase, weekend }, pw / f64::from(DAY_PHASES)));
                }
            }
        }
        let visit: Vec<Vec<f64>> = hidden.iter().map(|(h, _)| self.visit_probs(*h)).collect();

        // Group hidden states by what the observer can see.
        type Key = (Option<u32>, Option<bool>);
        let key = |h: &Hidden| -> Key {
            (phase_known.then_some(h.phase), weekend_known.then_some(h.weekend))
        };
        let mut groups: Vec<(Key, Vec<usize>)> = Vec::new();
        for (i, (h, _)) in hidden.iter().enumerate() {
            let k = key(h);
            match groups.iter_mut().find(|(g, _)| *g == k) {
                Some((_, members)) => members.push(i),
                None => groups.push((k, vec![i])),
            }
        }

        let mut acc = 0.0;
        let mut ls = vec![0usize; l];
        let mut score = vec![0.0; n];
        loop {
            for (_, members) in &groups {
                score.iter_mut().for_each(|s| *s = 0.0);
                for &hi in members {
                    let (h, prior) = hidden[hi];
                    let p_ls: f64 = ls.iter().map(|&x| visit[hi][x]).product();
                    let w = prior * p_ls;
                    for (s, p) in score.iter_mut().zip(self.target_probs(h, ls[l - 1] as u32)) {
                        *s += w * p;
                    }
                }
                acc += score.iter().cloned().fold(0.0, f64::max);
            }
            // Odometer increment over location sequences.
            let mut pos = 0;
            while pos < l {
                ls[pos] += 1;
                if ls[pos] < n {
                    break;
                }
                ls[pos] = 0;
                pos += 1;
            }
            if pos == l {
                break;
            }
        }
        Ok(acc)
    }
}

/// Draws `n_records` windows and splits each user's records 80/20 in
/// chronological order. Records are assigned to users round-robin.
pub fn generate(scm: &SyntheticScm, n_records: usize) -> Result<(SequenceData, SequenceData)> {
    scm.validate()?;
    if n_records < 10 {
        return Err(Error::InvalidArgument(format!("n_records = {n_records} (need >= 10)")));
    }
    let mut rng = SeedStream::new(scm.seed).rng("seqdata");
    let n = scm.num_locations;
    let sample = |probs: &[f64], u: f64| -> u32 {
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as u32;
            }
        }
        probs.len() as u32 - 1
    };

    let mut records = Vec::with_capacity(n_records);
    for r in 0..n_records {
        let phase = rng.random_range(0..DAY_PHASES);
        let weekday = rng.random_range(0..WEEKDAYS);
        let hidden_phase = rng.random_range(0..DAY_PHASES);
        let h = Hidden {
            phase: if scm.smin_is_confounder { phase } else { hidden_phase },
            weekend: scm.w_is_confounder && weekday >= 5,
        };
        let visit = scm.visit_probs(h);
        let ls: Vec<u32> = (0..scm.window).map(|_| sample(&visit, rng.random())).collect();
        let mut offsets: Vec<u32> = (0..scm.window).map(|_| rng.random_range(0..360)).collect();
        offsets.sort_unstable();
        let smin = offsets.iter().map(|o| phase * 360 + o).collect();
        let ds = ls
            .iter()
            .map(|&loc| {
                if scm.ds_is_noise {
                    rng.random_range(5..=240)
                } else {
                    20 + 15 * loc + rng.random_range(0..15)
                }
            })
            .collect();
        let y = sample(&scm.target_probs(h, ls[scm.window - 1]), rng.random());
        debug_assert!(y < n);
        records.push(TrajectoryRecord {
            uid: (r % scm.num_users as usize) as u32,
            ls,
            ds,
            smin,
            w: vec![weekday; scm.window],
            y,
        });
    }

    let mut per_user = vec![0usize; scm.num_users as usize];
    for rec in &records {
        per_user[rec.uid as usize] += 1;
    }
    let mut seen = vec![0usize; scm.num_users as usize];
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rec in records {
        let u = rec.uid as usize;
        let cut = per_user[u] * 4 / 5;
        if seen[u] < cut {
            train.push(rec);
        } else {
            test.push(rec);
        }
        seen[u] += 1;
    }
    Ok((SequenceData { records: train }, SequenceData { records: test }))
}
