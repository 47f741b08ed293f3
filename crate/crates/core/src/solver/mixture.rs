//! Mixture-density segmentation. Each cluster is a density over the image
//! plane given by its normalized, blurred, unweighted IWE; memberships follow
//! from Bayes' rule and the motions ascend the mixture log-likelihood.

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
pub struct MixtureState {
    pub params: ClusterSet,
    pub mixing_weights: Vec<f64>,
    pub membership: AssociationMatrix,
}

impl MixtureState {
    /// Mixing weights are the column means of `membership`.
    pub fn new(params: ClusterSet, membership: AssociationMatrix) -> Self {
        let mixing_weights = column_means(&membership);
        Self {
            params,
            mixing_weights,
            membership,
        }
    }
}

fn column_means(m: &AssociationMatrix) -> Vec<f64> {
    let n = m.events().max(1) as f64;
    (0..m.clusters()).map(|j| m.column_mass(j) / n).collect()
}

fn likelihood(k: &Kernels, params: &WarpParams, kernel: &GaussianKernel, floor: f64) -> Vec<f64> {
    let (warped, image) = k.image(params, None, kernel);
    let mass: f64 = image.iter().sum();
    if !(mass > 0.0) {
        return vec![floor; k.len()];
    }
    k.sample(&image, &warped).into_iter().map(|v| (v / mass).max(floor)).collect()
}

/// Per-event likelihood under one cluster: the cluster's blurred unweighted
/// IWE, normalized to unit mass, read at the warped event locations and
/// floored at `epsilon_c`.
pub fn mixture_component_likelihood(packet: &EventPacket, params: &WarpParams, config: &SolverConfig) -> Vec<f64> {
    let k = Kernels::new(packet, config);
    likelihood(&k, params, &GaussianKernel::new(config.sigma), config.epsilon_c)
}

pub(crate) struct Mixture {
    membership: AssociationMatrix,
    pi: Vec<f64>,
    lik: Vec<Vec<f64>>,
    kernel: GaussianKernel,
    config: SolverConfig,
}

impl Mixture {
    pub(crate) fn new(membership: AssociationMatrix, config: &SolverConfig) -> Self {
        let pi = column_means(&membership);
        Self {
            membership,
            pi,
            lik: Vec::new(),
            kernel: GaussianKernel::new(config.sigma),
            config: config.clone(),
        }
    }

    fn refresh(&mut self, k: &Kernels, clusters: &ClusterSet) {
        let kernel = &self.kernel;
        let floor = self.config.epsilon_c;
        self.lik = k.map(clusters.len(), |j| {
            if clusters.alive[j] {
                likelihood(k, &clusters.params[j], kernel, floor)
            } else {
                Vec::new()
            }
        });
    }

    fn log_likelihood(&self, clusters: &ClusterSet) -> f64 {
        let live: Vec<usize> = clusters.live().collect();
        (0..self.membership.events())
            .map(|e| live.iter().map(|&j| self.lik[j][e] * self.pi[j]).sum::<f64>().ln())
            .sum()
    }

    fn bayes(&mut self, clusters: &ClusterSet) {
        let n = self.membership.events();
        let scores: Vec<Vec<f64>> = (0..clusters.len())
            .map(|j| {
                if clusters.alive[j] {
                    self.lik[j].iter().map(|l| l * self.pi[j]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        self.membership = partition(&scores, clusters, 0.0, n);
        self.pi = column_means(&self.membership);
    }
}

impl Alternation for Mixture {
    fn method(&self) -> Method {
        Method::Mixture
    }

    fn associations(&self) -> &AssociationMatrix {
        &self.membership
    }

    fn associations_mut(&mut self) -> &mut AssociationMatrix {
        &mut self.membership
    }

    fn value(&mut self, k: &Kernels, clusters: &ClusterSet) -> f64 {
        if self.lik.len() != clusters.len() {
            self.refresh(k, clusters);
        }
        self.log_likelihood(clusters)
    }

    fn e_step(&mut self, k: &Kernels, clusters: &ClusterSet) {
        self.refresh(k, clusters);
        self.bayes(clusters);
    }

    fn after_collapse(&mut self, _clusters: &ClusterSet) {
        self.pi = column_means(&self.membership);
    }

    fn m_step(&mut self, k: &Kernels, clusters: &mut ClusterSet, steps: &mut [f64]) -> f64 {
        let live: Vec<usize> = clusters.live().collect();
        let n = k.len();
        for &j in &live {
            let others: Vec<f64> = (0..n)
                .map(|e| live.iter().filter(|&&i| i != j).map(|&i| self.lik[i][e] * self.pi[i]).sum::<f64>())
                .collect();
            let pi_j = self.pi[j];
            let kernel = &self.kernel;
            let floor = self.config.epsilon_c;
            let f = |p: &WarpParams| {
                likelihood(k, p, kernel, floor)
                    .iter()
                    .zip(&others)
                    .map(|(l, o)| (o + pi_j * l).ln())
                    .sum::<f64>()
            };
            let value: f64 = self.lik[j].iter().zip(&others).map(|(l, o)| (o + pi_j * l).ln()).sum();
            let params = clusters.params[j];
            let s = ascend(&params, value, k.levers(&params), steps[j], &self.config, &f);
            steps[j] = s.next_step;
            if s.moved {
                clusters.params[j] = s.params;
                self.lik[j] = likelihood(k, &s.params, kernel, floor);
            }
        }
        self.log_likelihood(clusters)
    }
}

/// Bayes memberships from the current motions and mixing weights, followed
/// by the mixing-weight update.
pub fn mixture_e_step(state: &MixtureState, packet: &EventPacket, config: &SolverConfig) -> MixtureState {
    let k = Kernels::new(packet, config);
    let mut m = Mixture::new(state.membership.clone(), config);
    m.pi = state.mixing_weights.clone();
    m.e_step(&k, &state.params);
    MixtureState {
        params: state.params.clone(),
        mixing_weights: m.pi,
        membership: m.membership,
    }
}

/// One backtracking ascent step of every live cluster on the log-likelihood.
pub fn mixture_m_step(state: &MixtureState, packet: &EventPacket, config: &SolverConfig) -> MixtureState {
    let k = Kernels::new(packet, config);
    let mut m = Mixture::new(state.membership.clone(), config);
    m.pi = state.mixing_weights.clone();
    m.refresh(&k, &state.params);
    let mut params = state.params.clone();
    let mut steps = vec![config.step_mu; params.len()];
    m.m_step(&k, &mut params, &mut steps);
    MixtureState {
        params,
        mixing_weights: state.mixing_weights.clone(),
        membership: state.membership.clone(),
    }
}

/// Mixture log-likelihood of the packet.
pub fn log_likelihood(state: &MixtureState, packet: &EventPacket, config: &SolverConfig) -> f64 {
    let k = Kernels::new(packet, config);
    let mut m = Mixture::new(state.membership.clone(), config);
    m.pi = state.mixing_weights.clone();
    m.value(&k, &state.params)
}

pub fn segment_mixture(packet: &EventPacket, j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<SegmentationResult> {
    let models = prepare(packet, j, models, config)?;
    let k = Kernels::new(packet, config);
    let diag = Kernels::new(packet, config);
    let (clusters, assoc) = init::greedy(&k, &models, config)?;
    Ok(drive(&k, &diag, clusters, Mixture::new(assoc, config), config, true))
}
