use std::collections::BTreeMap;

use super::{TrajectoryRecord, PAD};
use crate::error::{Error, Result};

/// A user's chronological visit stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitStream {
    pub uid: u32,
    pub ls: Vec<u32>,
    pub ds: Vec<u32>,
    pub smin: Vec<u32>,
    pub w: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Only full windows: a stream of n visits yields n - L records.
    Strict,
    /// Every visit after the first is a target; short histories are
    /// left-padded with [`PAD`].
    Padded,
}

/// Slides a window of `length` visits over each stream; the visit after the
/// window is the target.
pub fn window(streams: &[VisitStream], length: usize, mode: WindowMode) -> Result<Vec<TrajectoryRecord>> {
    if length == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    let mut out = Vec::new();
    for s in streams {
        let n = s.ls.len();
        if s.ds.len() != n || s.smin.len() != n || s.w.len() != n {
            return Err(Error::InvalidArgument(format!("stream of user {} is ragged", s.uid)));
        }
        let first_target = match mode {
            WindowMode::Strict => length,
            WindowMode::Padded => 1,
        };
        for t in first_target..n {
            let start = t.saturating_sub(length);
            let pad = length - (t - start);
            let take = |v: &[u32]| -> Vec<u32> {
                std::iter::repeat_n(PAD, pad).chain(v[start..t].iter().copied()).collect()
            };
            out.push(TrajectoryRecord {
                uid: s.uid,
                ls: take(&s.ls),
                ds: take(&s.ds),
                smin: take(&s.smin),
                w: take(&s.w),
                y: s.ls[t],
            });
        }
    }
    Ok(out)
}

/// Rebuilds per-user location streams from consecutive strict windows
/// (stride one): the first window followed by every later target.
pub fn unwindow_locations(records: &[TrajectoryRecord]) -> BTreeMap<u32, Vec<u32>> {
    let mut out: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for r in records {
        let stream = out.entry(r.uid).or_default();
        if stream.is_empty() {
            stream.extend(r.ls.iter().copied().filter(|&l| l != PAD));
        }
        stream.push(r.y);
    }
    out
}
