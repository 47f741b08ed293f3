use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event::ImageGeometry;
use crate::warp::{WarpModel, WarpParams};

/// N x J row-stochastic event-to-cluster probabilities, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    n: usize,
    j: usize,
    data: Vec<f64>,
}

impl AssociationMatrix {
    pub fn uniform(n: usize, j: usize) -> Self {
        assert!(j >= 1);
        Self {
            n,
            j,
            data: vec![1.0 / j as f64; n * j],
        }
    }

    pub fn zeros(n: usize, j: usize) -> Self {
        Self {
            n,
            j,
            data: vec![0.0; n * j],
        }
    }

    /// Builds a matrix from rows; rows are not renormalized.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let j = rows.first().map_or(0, Vec::len);
        if j == 0 {
            return Err(Error::ShapeMismatch("association matrix needs at least one column".into()));
        }
        let mut m = Self::zeros(rows.len(), j);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != j {
                return Err(Error::ShapeMismatch(format!("row {k} has {} entries, expected {j}", row.len())));
            }
            for (c, &v) in row.iter().enumerate() {
                m.set(k, c, v);
            }
        }
        Ok(m)
    }

    pub fn events(&self) -> usize {
        self.n
    }

    pub fn clusters(&self) -> usize {
        self.j
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[j * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        self.data[j * self.n + k] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        (0..self.j).map(|j| self.get(k, j)).collect()
    }

    pub fn column_mass(&self, j: usize) -> f64 {
        self.column(j).iter().sum()
    }

    /// Index of the largest entry of row `k`, ties to the lowest index.
    pub fn argmax(&self, k: usize) -> usize {
        let mut best = 0;
        for j in 1..self.j {
            if self.get(k, j) > self.get(k, best) {
                best = j;
            }
        }
        best
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_error(&self) -> f64 {
        (0..self.n)
            .map(|k| ((0..self.j).map(|j| self.get(k, j)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        self.data.iter().all(|&p| (-tol..=1.0 + tol).contains(&p)) && self.max_row_error() <= tol
    }

    /// Reorders columns: new column `i` is old column `perm[i]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, self.j);
        for (i, &src) in perm.iter().enumerate() {
            out.column_mut(i).copy_from_slice(self.column(src));
        }
        out
    }
}

/// Per-cluster motion parameters plus the alive flags of collapse handling.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub params: Vec<WarpParams>,
    pub alive: Vec<bool>,
}

impl ClusterSet {
    pub fn new(params: Vec<WarpParams>) -> Self {
        assert!(!params.is_empty(), "a cluster set needs at least one cluster");
        let alive = vec![true; params.len()];
        Self { params, alive }
    }

    pub fn zero(models: &[WarpModel], geometry: ImageGeometry) -> Self {
        Self::new(models.iter().map(|&m| WarpParams::zero(m, geometry)).collect())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&j| self.alive[j])
    }

    pub fn permute(&self, perm: &[usize]) -> Self {
        Self {
            params: perm.iter().map(|&i| self.params[i]).collect(),
            alive: perm.iter().map(|&i| self.alive[i]).collect(),
        }
    }
}

/// Expands a model list of length 1 (broadcast) or `j`.
pub fn expand_models(models: &[WarpModel], j: usize) -> Result<Vec<WarpModel>> {
    if j == 0 {
        return Err(Error::Config("cluster count must be >= 1".into()));
    }
    match models.len() {
        1 => Ok(vec![models[0]; j]),
        n if n == j => Ok(models.to_vec()),
        n => Err(Error::Config(format!("{n} motion models given for {j} clusters"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Method {
    #[default]
    Layered,
    Mixture,
    Fuzzy,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Layered, Method::Mixture, Method::Fuzzy];

    pub fn name(self) -> &'static str {
        match self {
            Method::Layered => "layered",
            Method::Mixture => "mixture",
            Method::Fuzzy => "fuzzy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "layered" => Ok(Method::Layered),
            "mixture" => Ok(Method::Mixture),
            "fuzzy" => Ok(Method::Fuzzy),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Outcome of segmenting one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub method: Method,
    pub clusters: ClusterSet,
    pub associations: AssociationMatrix,
    /// Sum of per-cluster contrasts of the weighted IWEs, at the
    /// initialization (entry 0) and after every iteration.
    pub objective_trace: Vec<f64>,
    /// The method's own objective: the same sum of contrasts for the layered
    /// method, the mixture log-likelihood, or the fuzzy objective.
    pub method_trace: Vec<f64>,
    /// Cumulative IWE accumulations at the end of each trace entry.
    pub warp_counts: Vec<u64>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the greedy initialization ran (false for warm starts).
    pub greedy_init: bool,
}

impl SegmentationResult {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}
