//! Fuzzy k-means segmentation on the log of the unweighted IWE.

use crate::error::Result;
use crate::event::EventPacket;
use crate::iwe::GaussianKernel;
use crate::solver::ascent::ascend;
use crate::solver::config::SolverConfig;
use crate::solver::kernels::Kernels;
use crate::solver::types::{AssociationMatrix, ClusterSet, Method, SegmentationResult};
use crate::solver::{drive, init, partition, prepare, Alternation};
use crate::warp::{WarpModel, WarpParams};

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyState {
    pub params: ClusterSet,
    pub responsibilities: AssociationMatrix,
    pub b: f64,
}

fn distance(k: &Kernels, params: &WarpParams, kernel: &GaussianKernel) -> Vec<f64> {
    let (warped, image) = k.image(params, None, kernel);
    k.sample(&image, &warped).into_iter().map(f64::ln_1p).collect()
}

/// Goodness of fit `ln(1 + H)` of every event to one cluster, with `H` the
/// blurred unweighted IWE read at the warped event location.
pub fn fuzzy_distance(packet: &EventPacket, params: &WarpParams, config: &SolverConfig) -> Vec<f64> {
    let k = Kernels::new(packet, config);
    distance(&k, params, &GaussianKernel::new(config.sigma))
}

/// Closed-form responsibilities of one event: `d^(1/(b-1))`, normalized.
/// An all-zero row becomes uniform.
pub fn fuzzy_partition(d: &[f64], b: f64) -> Vec<f64> {
    let e = 1.0 / (b - 1.0);
    let s: Vec<f64> = d.iter().map(|v| v.max(0.0).powf(e)).collect();
    let sum: f64 = s.iter().sum();
    if sum > 0.0 {
        s.iter().map(|v| v / sum).collect()
    } else {
        vec![1.0 / d.len() as f64; d.len()]
    }
}

pub(crate) struct Fuzzy {
    resp: AssociationMatrix,
    dist: Vec<Vec<f64>>,
    kernel: GaussianKernel,
    config: SolverConfig,
}

impl Fuzzy {
    pub(crate) fn new(resp: AssociationMatrix, config: &SolverConfig) -> Self {
        Self {
            resp,
            dist: Vec::new(),
            kernel: GaussianKernel::new(config.sigma),
            config: config.clone(),
        }
    }

    fn refresh(&mut self, k: &Kernels, clusters: &ClusterSet) {
        let kernel = &self.kernel;
        self.dist = k.map(clusters.len(), |j| {
            if clusters.alive[j] {
                distance(k, &clusters.params[j], kernel)
            } else {
                Vec::new()
            }
        });
    }

    fn cluster_value(&self, j: usize, d: &[f64]) -> f64 {
        let b = self.config.fuzzy_b;
        self.resp.column(j).iter().zip(d).map(|(p, d)| p.powf(b) * d).sum()
    }
}

impl Alternation for Fuzzy {
    fn method(&self) -> Method {
        Method::Fuzzy
    }

    fn associations(&self) -> &AssociationMatrix {
        &self.resp
    }

    fn associations_mut(&mut self) -> &mut AssociationMatrix {
        &mut self.resp
    }

    fn value(&mut self, k: &Kernels, clusters: &ClusterSet) -> f64 {
        if self.dist.len() != clusters.len() {
            self.refresh(k, clusters);
        }
        clusters.live().map(|j| self.cluster_value(j, &self.dist[j])).sum()
    }

    fn e_step(&mut self, k: &Kernels, clusters: &ClusterSet) {
        self.refresh(k, clusters);
        let e = 1.0 / (self.config.fuzzy_b - 1.0);
        let scores: Vec<Vec<f64>> = self.dist.iter().map(|d| d.iter().map(|v| v.max(0.0).powf(e)).collect()).collect();
        self.resp = partition(&scores, clusters, 0.0, k.len());
    }

    fn m_step(&mut self, k: &Kernels, clusters: &mut ClusterSet, steps: &mut [f64]) -> f64 {
        let b = self.config.fuzzy_b;
        let snapshot = clusters.clone();
        let this = &*self;
        let stepped = k.map(clusters.len(), |j| {
            if !snapshot.alive[j] {
                return None;
            }
            let pb: Vec<f64> = this.resp.column(j).iter().map(|p| p.powf(b)).collect();
            let f = |p: &WarpParams| -> f64 { distance(k, p, &this.kernel).iter().zip(&pb).map(|(d, w)| w * d).sum() };
            let params = &snapshot.params[j];
            let value = this.cluster_value(j, &this.dist[j]);
            Some(ascend(params, value, k.levers(params), steps[j], &this.config, &f))
        });
        let mut total = 0.0;
        for (j, s) in stepped.into_iter().enumerate() {
            if let Some(s) = s {
                steps[j] = s.next_step;
                if s.moved {
                    clusters.params[j] = s.params;
                }
                total += s.value;
            }
        }
        self.dist.clear();
        total
    }
}

/// Responsibilities from the current motions.
pub fn fuzzy_e_step(state: &FuzzyState, packet: &EventPacket, config: &SolverConfig) -> FuzzyState {
    let k = Kernels::new(packet, config);
    let cfg = SolverConfig {
        fuzzy_b: state.b,
        ..config.clone()
    };
    let mut f = Fuzzy::new(state.responsibilities.clone(), &cfg);
    f.e_step(&k, &state.params);
    FuzzyState {
        params: state.params.clone(),
        responsibilities: f.resp,
        b: state.b,
    }
}

/// The fuzzy objective: sum over clusters and events of `p^b * d`.
pub fn fuzzy_objective(state: &FuzzyState, packet: &EventPacket, config: &SolverConfig) -> f64 {
    let k = Kernels::new(packet, config);
    let cfg = SolverConfig {
        fuzzy_b: state.b,
        ..config.clone()
    };
    Fuzzy::new(state.responsibilities.clone(), &cfg).value(&k, &state.params)
}

pub fn segment_fuzzy(packet: &EventPacket, j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<SegmentationResult> {
    let models = prepare(packet, j, models, config)?;
    let k = Kernels::new(packet, config);
    let diag = Kernels::new(packet, config);
    let (clusters, assoc) = init::greedy(&k, &models, config)?;
    Ok(drive(&k, &diag, clusters, Fuzzy::new(assoc, config), config, true))
}
