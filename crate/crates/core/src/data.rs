//! Supervised datasets: tabular columns of small categorical values, or
//! windowed trajectory records.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::seqdata::SequenceData;

/// Column-major table of categorical values (0/1 for Bayesian-network data).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularData {
    names: Vec<String>,
    columns: Vec<Vec<u32>>,
}

impl TabularData {
    pub fn new(names: Vec<String>, columns: Vec<Vec<u32>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(i) = columns.iter().position(|c| c.len() != rows) {
            return Err(Error::InvalidArgument(format!(
                "column `{}` has {} rows, expected {rows}",
                names[i],
                columns[i].len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidArgument(format!("duplicate column `{n}`")));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[u32]> {
        self.column_index(name).map(|i| self.columns[i].as_slice())
    }

    pub fn require_column(&self, name: &str) -> Result<&[u32]> {
        self.column(name)
            .ok_or_else(|| Error::FeatureMismatch {
                missing: vec![name.to_string()],
                extra: Vec::new(),
            })
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    pub fn row(&self, r: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    /// Copy with one column replaced; every other column is untouched.
    pub fn with_column(&self, name: &str, values: Vec<u32>) -> Result<Self> {
        let idx = self.column_index(name).ok_or_else(|| Error::FeatureMismatch {
            missing: vec![name.to_string()],
            extra: Vec::new(),
        })?;
        if values.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "replacement for `{name}` has {} rows, expected {}",
                values.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        out.columns[idx] = values;
        Ok(out)
    }

    /// First `n` rows and the remainder.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        let head = self.columns.iter().map(|c| c[..n].to_vec()).collect();
        let tail = self.columns.iter().map(|c| c[n..].to_vec()).collect();
        (
            Self {
                names: self.names.clone(),
                columns: head,
            },
            Self {
                names: self.names.clone(),
                columns: tail,
            },
        )
    }

    /// Column mean (for 0/1 columns, the empirical frequency of 1).
    pub fn mean(&self, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        if c.is_empty() {
            return None;
        }
        Some(c.iter().map(|&v| f64::from(v)).sum::<f64>() / c.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for r in 0..self.len() {
            for (i, c) in self.columns.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{}", c[r]);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("csv"))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (ln, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: format!("{} fields, expected {}", fields.len(), names.len()),
                });
            }
            for (c, f) in columns.iter_mut().zip(fields) {
                c.push(f.trim().parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    message: format!("not a non-negative integer: `{f}`"),
                })?);
            }
        }
        Self::new(names, columns)
    }
}

/// Data for one prediction task.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Tabular(TabularData),
    Sequence(SequenceData),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Tabular(t) => t.len(),
            Dataset::Sequence(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_tabular(&self) -> Option<&TabularData> {
        match self {
            Dataset::Tabular(t) => Some(t),
            Dataset::Sequence(_) => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&SequenceData> {
        match self {
            Dataset::Sequence(s) => Some(s),
            Dataset::Tabular(_) => None,
        }
    }

    /// Names of the features a model may condition on.
    pub fn feature_names(&self) -> Vec<String> {
        match self {
            Dataset::Tabular(t) => t.names().to_vec(),
            Dataset::Sequence(_) => crate::seqdata::SEQUENCE_FEATURES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl From<TabularData> for Dataset {
    fn from(t: TabularData) -> Self {
        Dataset::Tabular(t)
    }
}

impl From<SequenceData> for Dataset {
    fn from(s: SequenceData) -> Self {
        Dataset::Sequence(s)
    }
}
