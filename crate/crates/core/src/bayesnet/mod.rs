//! Discrete (binary) Bayesian networks: text format, ancestral sampling,
//! exact inference by enumeration, and graph surgery for `do` interventions.

mod parse;

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::TabularData;
use crate::error::{Error, Result};

pub use parse::{load_network, to_spec_text};

/// Tolerance for CPT row normalization.
pub const CPT_TOLERANCE: f64 = 1e-9;

/// Largest network the enumeration routines accept.
pub const MAX_ENUMERATION_NODES: usize = 24;

const ASIA_SPEC: &str = include_str!("../../data/asia.bn");

/// One node as declared: its parents (in CPT order) and one `[P(0), P(1)]`
/// row per parent combination, the first parent being the most significant
/// bit of the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub parents: Vec<String>,
    pub rows: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    cpt: Vec<Vec<[f64; 2]>>,
    order: Vec<usize>,
}

/// Map from node name to value.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment(BTreeMap<String, u8>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: &str, value: u8) -> Self {
        self.0.insert(node.to_string(), value);
        self
    }

    pub fn set(&mut self, node: &str, value: u8) {
        self.0.insert(node.to_string(), value);
    }

    pub fn get(&self, node: &str) -> Option<u8> {
        self.0.get(node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u8)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<'a> FromIterator<(&'a str, u8)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (&'a str, u8)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

fn row_index(parent_values: impl Iterator<Item = u8>) -> usize {
    parent_values.fold(0, |acc, v| (acc << 1) | v as usize)
}

impl BayesNet {
    pub fn new(specs: Vec<NodeSpec>) -> Result<Self> {
        let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Network(format!("duplicate node `{n}`")));
            }
        }
        let mut parents = Vec::with_capacity(specs.len());
        let mut cpt = Vec::with_capacity(specs.len());
        for spec in &specs {
            let mut ps = Vec::with_capacity(spec.parents.len());
            for p in &spec.parents {
                let idx = names
                    .iter()
                    .position(|n| n == p)
                    .ok_or_else(|| Error::Network(format!("`{}` has unknown parent `{p}`", spec.name)))?;
                if ps.contains(&idx) {
                    return Err(Error::Network(format!("`{}` lists parent `{p}` twice", spec.name)));
                }
                ps.push(idx);
            }
            let expected = 1usize << ps.len();
            if spec.rows.len() != expected {
                return Err(Error::Network(format!(
                    "`{}` has {} CPT rows, expected {expected}",
                    spec.name,
                    spec.rows.len()
                )));
            }
            for (r, row) in spec.rows.iter().enumerate() {
                let sum = row[0] + row[1];
                if row.iter().any(|p| !(0.0..=1.0).contains(p) || !p.is_finite())
                    || (sum - 1.0).abs() > CPT_TOLERANCE
                {
                    return Err(Error::Network(format!(
                        "`{}` CPT row {r} is not a distribution: {row:?}",
                        spec.name
                    )));
                }
            }
            parents.push(ps);
            cpt.push(spec.rows.clone());
        }
        let order = topological_order(&names, &parents)?;
        Ok(Self {
            names,
            parents,
            cpt,
            order,
        })
    }

    /// The bundled eight-node Asia network.
    pub fn asia() -> Self {
        load_network(ASIA_SPEC).expect("bundled Asia network is valid")
    }

    pub fn asia_spec_text() -> &'static str {
        ASIA_SPEC
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, node: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    pub fn parents(&self, node: &str) -> Result<Vec<&str>> {
        let i = self.index_of(node)?;
        Ok(self.parents[i].iter().map(|&p| self.names[p].as_str()).collect())
    }

    /// Directed edges `(parent, child)`.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                out.push((self.names[p].as_str(), self.names[c].as_str()));
            }
        }
        out
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges().contains(&(from, to))
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.names[i].as_str()).collect()
    }

    pub fn node_specs(&self) -> Vec<NodeSpec> {
        (0..self.len())
            .map(|i| NodeSpec {
                name: self.names[i].clone(),
                parents: self.parents[i].iter().map(|&p| self.names[p].clone()).collect(),
                rows: self.cpt[i].clone(),
            })
            .collect()
    }

    /// `P(node = 1 | parents)` for a dense assignment.
    fn p_one(&self, node: usize, values: &[u8]) -> f64 {
        let r = row_index(self.parents[node].iter().map(|&p| values[p]));
        self.cpt[node][r][1]
    }

    fn joint_dense(&self, values: &[u8]) -> f64 {
        let mut p = 1.0;
        for node in 0..self.len() {
            let r = row_index(self.parents[node].iter().map(|&q| values[q]));
            p *= self.cpt[node][r][values[node] as usize];
            if p == 0.0 {
                break;
            }
        }
        p
    }

    fn dense(&self, assignment: &Assignment) -> Result<Vec<u8>> {
        for (k, v) in assignment.iter() {
            self.index_of(k)?;
            if v > 1 {
                return Err(Error::InvalidArgument(format!("value {v} for binary node `{k}`")));
            }
        }
        let missing: Vec<String> = self
            .names
            .iter()
            .filter(|n| assignment.get(n).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteAssignment(missing));
        }
        Ok(self.names.iter().map(|n| assignment.get(n).unwrap()).collect())
    }

    /// Product of CPT entries for a full assignment.
    pub fn joint_probability(&self, assignment: &Assignment) -> Result<f64> {
        Ok(self.joint_dense(&self.dense(assignment)?))
    }

    /// Calls `f(values, probability)` for every full assignment, values in
    /// declaration order.
    pub fn for_each_assignment(&self, mut f: impl FnMut(&[u8], f64)) -> Result<()> {
        let n = self.len();
        if n > MAX_ENUMERATION_NODES {
            return Err(Error::Network(format!(
                "{n} nodes exceed the enumeration limit of {MAX_ENUMERATION_NODES}"
            )));
        }
        let mut values = vec![0u8; n];
        for bits in 0u64..(1u64 << n) {
            for (i, v) in values.iter_mut().enumerate() {
                *v = ((bits >> i) & 1) as u8;
            }
            let p = self.joint_dense(&values);
            f(&values, p);
        }
        Ok(())
    }

    /// Probability of a partial assignment (evidence), by enumeration.
    pub fn probability(&self, evidence: &Assignment) -> Result<f64> {
        let ev: Vec<(usize, u8)> = evidence
            .iter()
            .map(|(k, v)| Ok((self.index_of(k)?, v)))
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        self.for_each_assignment(|vals, p| {
            if ev.iter().all(|&(i, v)| vals[i] == v) {
                total += p;
            }
        })?;
        Ok(total)
    }

    /// `P(node = value | evidence)`.
    pub fn conditional(&self, node: &str, value: u8, evidence: &Assignment) -> Result<f64> {
        let denom = self.probability(evidence)?;
        if denom == 0.0 {
            return Err(Error::InvalidArgument("evidence has probability zero".into()));
        }
        let num = self.probability(&evidence.clone().with(node, value))?;
        Ok(num / denom)
    }

    /// Accuracy of the Bayes-optimal classifier for `target` given the
    /// conditioning nodes: `sum over cells of P(cell) * max_y P(y | cell)`.
    pub fn bayes_optimal_accuracy(&self, target: &str, conditioning: &[&str]) -> Result<f64> {
        let t = self.index_of(target)?;
        let cond: Vec<usize> = conditioning
            .iter()
            .map(|c| self.index_of(c))
            .collect::<Result<_>>()?;
        if cond.contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "target `{target}` is in the conditioning set"
            )));
        }
        let mut cells: BTreeMap<Vec<u8>, [f64; 2]> = BTreeMap::new();
        self.for_each_assignment(|vals, p| {
            let key: Vec<u8> = cond.iter().map(|&c| vals[c]).collect();
            cells.entry(key).or_insert([0.0; 2])[vals[t] as usize] += p;
        })?;
        Ok(cells.values().map(|c| c[0].max(c[1])).sum())
    }

    /// Graph surgery for `do(node = value)`: incoming edges are removed and
    /// the node's CPT becomes a point mass.
    pub fn mutilate(&self, node: &str, value: u8) -> Result<BayesNet> {
        if value > 1 {
            return Err(Error::InvalidArgument(format!("value {value} for binary node `{node}`")));
        }
        let i = self.index_of(node)?;
        let mut out = self.clone();
        out.parents[i].clear();
        let mut row = [0.0; 2];
        row[value as usize] = 1.0;
        out.cpt[i] = vec![row];
        out.order = topological_order(&out.names, &out.parents)?;
        Ok(out)
    }

    /// Draws `n` rows root-to-leaf. Each row consumes exactly one uniform per
    /// node (in declaration order), so two networks differing only in some
    /// CPTs produce coupled samples under the same seed: nodes that are not
    /// descendants of a changed node take identical values.
    pub fn ancestral_sample(&self, n: usize, seed: u64) -> Result<TabularData> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.len();
        let mut columns = vec![Vec::with_capacity(n); k];
        let mut u = vec![0.0f64; k];
        let mut values = vec![0u8; k];
        for _ in 0..n {
            for slot in u.iter_mut() {
                *slot = rng.random::<f64>();
            }
            for &node in &self.order {
                values[node] = u8::from(u[node] < self.p_one(node, &values));
            }
            for (c, &v) in columns.iter_mut().zip(&values) {
                c.push(u32::from(v));
            }
        }
        TabularData::new(self.names.clone(), columns)
    }
}

fn topological_order(names: &[String], parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = names.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() != n {
        let cyclic: Vec<&str> = (0..n)
            .filter(|i| !order.contains(i))
            .map(|i| names[i].as_str())
            .collect();
        return Err(Error::Network(format!("cycle detected among {cyclic:?}")));
    }
    Ok(order)
}
