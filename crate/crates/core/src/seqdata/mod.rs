//! Trajectory records for next-location prediction: the record type, its
//! text file format, windowing, location-sequence alterations, and a
//! synthetic generator with a known causal structure.

mod alter;
mod scm;
mod window;

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use alter::{alter_ls, location_frequencies, replace_most_frequent, LsRule, Replacement};
pub use scm::{generate, Observed, SyntheticScm};
pub use window::{unwindow_locations, window, VisitStream, WindowMode};

/// Feature names of a sequence record, in encoding order.
pub const SEQUENCE_FEATURES: [&str; 4] = ["ls", "ds", "smin", "w"];

/// Reserved id for left padding in windowed records. Encodes to all zeros.
pub const PAD: u32 = u32::MAX;

pub const MINUTES_PER_DAY: u32 = 1440;
pub const DAY_PHASES: u32 = 4;
pub const WEEKDAYS: u32 = 7;

/// Day phase (0..4) of a start minute.
pub fn day_phase(smin: u32) -> u32 {
    (smin % MINUTES_PER_DAY) * DAY_PHASES / MINUTES_PER_DAY
}

/// One supervised sample: the last visits (location, duration in minutes,
/// start minute, weekday) and the next location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub uid: u32,
    pub ls: Vec<u32>,
    pub ds: Vec<u32>,
    pub smin: Vec<u32>,
    pub w: Vec<u32>,
    pub y: u32,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.ls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ls.is_empty()
    }

    pub fn is_padding(&self, step: usize) -> bool {
        self.ls[step] == PAD
    }

    /// Checks the parallel-sequence and value-range invariants. Location ids
    /// are bounded by `num_locations` when given.
    pub fn validate(&self, num_locations: Option<u32>) -> Result<()> {
        let n = self.ls.len();
        if n == 0 {
            return Err(Error::InvalidArgument(format!("record of user {} is empty", self.uid)));
        }
        if self.ds.len() != n || self.smin.len() != n || self.w.len() != n {
            return Err(Error::InvalidArgument(format!(
                "record of user {}: sequence lengths ls={} ds={} smin={} w={}",
                self.uid,
                n,
                self.ds.len(),
                self.smin.len(),
                self.w.len()
            )));
        }
        for i in 0..n {
            if self.ls[i] == PAD {
                continue;
            }
            if self.smin[i] >= MINUTES_PER_DAY {
                return Err(Error::InvalidArgument(format!("start minute {} out of range", self.smin[i])));
            }
            if self.w[i] >= WEEKDAYS {
                return Err(Error::InvalidArgument(format!("weekday {} out of range", self.w[i])));
            }
            if let Some(limit) = num_locations {
                if self.ls[i] >= limit {
                    return Err(Error::InvalidArgument(format!(
                        "location {} outside [0, {limit})",
                        self.ls[i]
                    )));
                }
            }
        }
        if let Some(limit) = num_locations {
            if self.y >= limit {
                return Err(Error::InvalidArgument(format!("target {} outside [0, {limit})", self.y)));
            }
        }
        Ok(())
    }
}

/// An ordered collection of trajectory records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SequenceData {
    records: Vec<TrajectoryRecord>,
}

impl SequenceData {
    pub fn new(records: Vec<TrajectoryRecord>) -> Result<Self> {
        for r in &records {
            r.validate(None)?;
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn targets(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.y).collect()
    }

    /// Longest record (the decoder's time-step count).
    pub fn max_len(&self) -> usize {
        self.records.iter().map(TrajectoryRecord::len).max().unwrap_or(0)
    }

    /// Largest location id seen in inputs or targets.
    pub fn max_location(&self) -> Option<u32> {
        self.records
            .iter()
            .flat_map(|r| r.ls.iter().copied().filter(|&l| l != PAD).chain(std::iter::once(r.y)))
            .max()
    }

    pub(crate) fn map_records(&self, f: impl Fn(&TrajectoryRecord) -> TrajectoryRecord) -> Self {
        Self {
            records: self.records.iter().map(f).collect(),
        }
    }

    /// Text format: a schema header, then one
    /// `uid | ls=a,b | ds=.. | smin=.. | w=.. | y=..` line per record.
    /// Padding entries are written as `-1`.
    pub fn to_text(&self) -> String {
        fn join(v: &[u32]) -> String {
            v.iter()
                .map(|&x| if x == PAD { "-1".to_string() } else { x.to_string() })
                .collect::<Vec<_>>()
                .join(",")
        }
        let mut s = String::from(FILE_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{} | ls={} | ds={} | smin={} | w={} | y={}",
                r.uid,
                join(&r.ls),
                join(&r.ds),
                join(&r.smin),
                join(&r.w),
                r.y
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == FILE_HEADER => {}
            Some((i, _)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected header `{FILE_HEADER}`"),
                })
            }
            None => return Err(Error::Empty("sequence file")),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            let err = |m: String| Error::Parse { line: ln, message: m };
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            if parts.len() != 6 {
                return Err(err(format!("{} fields, expected 6", parts.len())));
            }
            let uid = parts[0].parse().map_err(|_| err(format!("bad uid `{}`", parts[0])))?;
            let field = |idx: usize, key: &str| -> Result<Vec<u32>> {
                let body = parts[idx]
                    .strip_prefix(key)
                    .and_then(|s| s.strip_prefix('='))
                    .ok_or_else(|| err(format!("expected `{key}=`")))?;
                body.split(',')
                    .map(|v| match v.trim() {
                        "-1" => Ok(PAD),
                        t => t.parse().map_err(|_| err(format!("bad integer `{t}` in {key}"))),
                    })
                    .collect()
            };
            let y = field(5, "y")?;
            if y.len() != 1 || y[0] == PAD {
                return Err(err("y must be one location id".into()));
            }
            let rec = TrajectoryRecord {
                uid,
                ls: field(1, "ls")?,
                ds: field(2, "ds")?,
                smin: field(3, "smin")?,
                w: field(4, "w")?,
                y: y[0],
            };
            rec.validate(None).map_err(|e| err(e.to_string()))?;
            records.push(rec);
        }
        Ok(Self { records })
    }
}

pub const FILE_HEADER: &str = "uid | ls | ds | smin | w | y";

/// Output vocabulary size: `max(train targets) + 1`.
pub fn c_max(train_targets: &[u32]) -> Result<usize> {
    train_targets
        .iter()
        .max()
        .map(|&m| m as usize + 1)
        .ok_or(Error::Empty("training targets"))
}

/// Test targets the output layer cannot represent (`>= c_max`).
pub fn targets_outside_vocabulary(targets: &[u32], c_max: usize) -> usize {
    targets.iter().filter(|&&y| y as usize >= c_max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TrajectoryRecord {
        TrajectoryRecord {
            uid: 3,
            ls: vec![1, 2, 5],
            ds: vec![30, 45, 10],
            smin: vec![480, 600, 1000],
            w: vec![2, 2, 2],
            y: 4,
        }
    }

    #[test]
    fn c_max_is_max_plus_one() {
        assert_eq!(c_max(&[0, 3, 7]).unwrap(), 8);
        assert_eq!(c_max(&[0]).unwrap(), 1);
        assert!(c_max(&[]).is_err());
        assert_eq!(targets_outside_vocabulary(&[1, 8, 9], 8), 2);
    }

    #[test]
    fn text_round_trip() {
        let mut padded = record();
        padded.ls[0] = PAD;
        padded.ds[0] = PAD;
        padded.smin[0] = PAD;
        padded.w[0] = PAD;
        let data = SequenceData::new(vec![record(), padded]).unwrap();
        let text = data.to_text();
        assert!(text.contains("3 | ls=1,2,5 | ds=30,45,10 | smin=480,600,1000 | w=2,2,2 | y=4"));
        assert_eq!(SequenceData::from_text(&text).unwrap(), data);
    }

    #[test]
    fn loader_validates() {
        let bad_len = format!("{FILE_HEADER}\n1 | ls=1,2 | ds=3 | smin=1,2 | w=0,0 | y=1\n");
        assert!(matches!(SequenceData::from_text(&bad_len), Err(Error::Parse { line: 2, .. })));
        let bad_minute = format!("{FILE_HEADER}\n1 | ls=1 | ds=3 | smin=1440 | w=0 | y=1\n");
        assert!(SequenceData::from_text(&bad_minute).is_err());
        assert!(SequenceData::from_text("uid ls\n").is_err());
    }

    #[test]
    fn phases_split_the_day() {
        assert_eq!(day_phase(0), 0);
        assert_eq!(day_phase(359), 0);
        assert_eq!(day_phase(360), 1);
        assert_eq!(day_phase(1439), 3);
    }
}
