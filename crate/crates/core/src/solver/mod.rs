//! Joint estimation of cluster motions and event-cluster associations.

mod ascent;
pub mod config;
pub mod fuzzy;
mod init;
pub(crate) mod kernels;
pub mod layered;
pub mod mixture;
pub mod types;

use crate::error::{Error, Result};
use crate::event::EventPacket;
use crate::iwe::GaussianKernel;
use crate::warp::WarpModel;

use config::SolverConfig;
use kernels::Kernels;
use types::{AssociationMatrix, ClusterSet, Method, SegmentationResult};

/// One alternating method: an association update and a motion update.
pub(crate) trait Alternation {
    fn method(&self) -> Method;
    fn associations(&self) -> &AssociationMatrix;
    fn associations_mut(&mut self) -> &mut AssociationMatrix;
    /// The method objective at the current state.
    fn value(&mut self, k: &Kernels, clusters: &ClusterSet) -> f64;
    fn e_step(&mut self, k: &Kernels, clusters: &ClusterSet);
    /// Called after clusters died and their rows were re-partitioned.
    fn after_collapse(&mut self, _clusters: &ClusterSet) {}
    /// Ascent on the motion parameters; returns the new method objective.
    fn m_step(&mut self, k: &Kernels, clusters: &mut ClusterSet, steps: &mut [f64]) -> f64;
    /// Whether the method objective already is the sum of contrasts.
    fn objective_is_contrast(&self) -> bool {
        false
    }
}

/// Sum over clusters of the contrast of the blurred weighted IWE. The terms
/// are added in sorted order so relabeling clusters gives the same bits.
pub(crate) fn sum_of_contrasts(k: &Kernels, clusters: &ClusterSet, assoc: &AssociationMatrix, kernel: &GaussianKernel) -> f64 {
    let mut terms = k.map(clusters.len(), |j| {
        if assoc.column(j).iter().all(|&p| p == 0.0) {
            0.0
        } else {
            k.contrast(&clusters.params[j], Some(assoc.column(j)), kernel)
        }
    });
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Marks clusters whose association mass fell below `frac * N / J` as dead
/// and re-partitions their rows over the live clusters. Returns true if any
/// cluster died.
pub(crate) fn collapse(clusters: &mut ClusterSet, assoc: &mut AssociationMatrix, frac: f64) -> bool {
    let (n, j_total) = (assoc.events(), assoc.clusters());
    if frac <= 0.0 || n == 0 {
        return false;
    }
    let threshold = frac * n as f64 / j_total as f64;
    let masses: Vec<f64> = (0..j_total).map(|j| assoc.column_mass(j)).collect();
    let mut died = false;
    for (j, &mass) in masses.iter().enumerate() {
        if clusters.alive[j] && mass < threshold {
            clusters.alive[j] = false;
            died = true;
        }
    }
    if clusters.live_count() == 0 {
        let best = (0..j_total).fold(0, |b, j| if masses[j] > masses[b] { j } else { b });
        clusters.alive[best] = true;
    }
    if !died {
        return false;
    }
    for j in 0..j_total {
        if !clusters.alive[j] {
            assoc.column_mut(j).iter_mut().for_each(|p| *p = 0.0);
        }
    }
    let live: Vec<usize> = clusters.live().collect();
    for k in 0..n {
        let sum: f64 = live.iter().map(|&j| assoc.get(k, j)).sum();
        for &j in &live {
            let v = if sum > 0.0 { assoc.get(k, j) / sum } else { 1.0 / live.len() as f64 };
            assoc.set(k, j, v);
        }
    }
    true
}

/// Folds redundant clusters into heavier ones. Live cluster `b` is redundant
/// with a heavier live cluster `a` when warping `b`'s events with `a`'s motion
/// keeps at least `focus` of their contrast. Merging adds column `b` to column
/// `a` and marks `b` dead; it is taken when it raises the sum of contrasts,
/// the pair with the largest gain first. Returns true if any cluster merged.
pub(crate) fn merge_redundant(k: &Kernels, clusters: &mut ClusterSet, assoc: &mut AssociationMatrix, kernel: &GaussianKernel, focus: f64) -> bool {
    let mut merged = false;
    while clusters.live_count() >= 2 {
        let live: Vec<usize> = clusters.live().collect();
        let mass: Vec<f64> = (0..clusters.len()).map(|j| assoc.column_mass(j)).collect();
        let own = k.map(clusters.len(), |j| {
            if clusters.alive[j] && mass[j] > 0.0 {
                k.contrast(&clusters.params[j], Some(assoc.column(j)), kernel)
            } else {
                0.0
            }
        });
        let pairs: Vec<(usize, usize)> = live
            .iter()
            .flat_map(|&b| live.iter().map(move |&a| (a, b)))
            .filter(|&(a, b)| a != b && mass[b] > 0.0 && (mass[a] > mass[b] || (mass[a] == mass[b] && a < b)))
            .collect();
        let gains = k.map(pairs.len(), |i| {
            let (a, b) = pairs[i];
            if k.contrast(&clusters.params[a], Some(assoc.column(b)), kernel) < focus * own[b] {
                return f64::NEG_INFINITY;
            }
            let joined: Vec<f64> = assoc.column(a).iter().zip(assoc.column(b)).map(|(x, y)| x + y).collect();
            k.contrast(&clusters.params[a], Some(&joined), kernel) - own[a] - own[b]
        });
        let best = (0..pairs.len())
            .filter(|&i| gains[i] > 0.0)
            .max_by(|&x, &y| gains[x].total_cmp(&gains[y]));
        let Some(i) = best else { break };
        let (a, b) = pairs[i];
        for e in 0..assoc.events() {
            let v = assoc.get(e, a) + assoc.get(e, b);
            assoc.set(e, a, v);
            assoc.set(e, b, 0.0);
        }
        clusters.alive[b] = false;
        merged = true;
    }
    merged
}

/// Row-normalizes per-cluster scores over the live clusters. Rows without
/// any score above `floor` become uniform; other scores are floored.
#[allow(clippy::needless_range_loop)]
pub(crate) fn partition(scores: &[Vec<f64>], clusters: &ClusterSet, floor: f64, n: usize) -> AssociationMatrix {
    let j_total = clusters.len();
    let live: Vec<usize> = clusters.live().collect();
    let mut assoc = AssociationMatrix::zeros(n, j_total);
    let uniform = 1.0 / live.len() as f64;
    for k in 0..n {
        if live.iter().all(|&j| !(scores[j][k] > floor)) {
            for &j in &live {
                assoc.set(k, j, uniform);
            }
            continue;
        }
        let sum: f64 = live.iter().map(|&j| scores[j][k].max(floor)).sum();
        for &j in &live {
            assoc.set(k, j, scores[j][k].max(floor) / sum);
        }
    }
    assoc
}

pub(crate) fn prepare(packet: &EventPacket, j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<Vec<WarpModel>> {
    config.validate()?;
    if packet.is_empty() {
        return Err(Error::EmptyPacket);
    }
    types::expand_models(models, j)
}

/// Runs an alternating method from the given state until convergence.
pub(crate) fn drive<A: Alternation>(
    k: &Kernels,
    diagnostics: &Kernels,
    mut clusters: ClusterSet,
    mut state: A,
    config: &SolverConfig,
    greedy_init: bool,
) -> SegmentationResult {
    let kernel = GaussianKernel::new(config.sigma);
    let mut steps = vec![config.step_mu; clusters.len()];
    let contrast_of = |state: &A, clusters: &ClusterSet, method_value: f64| {
        if state.objective_is_contrast() {
            method_value
        } else {
            sum_of_contrasts(diagnostics, clusters, state.associations(), &kernel)
        }
    };

    let mut value = state.value(k, &clusters);
    let mut objective_trace = vec![contrast_of(&state, &clusters, value)];
    let mut method_trace = vec![value];
    let mut warp_counts = vec![k.warps()];
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        iterations += 1;
        state.e_step(k, &clusters);
        if collapse(&mut clusters, state.associations_mut(), config.collapse_frac) {
            state.after_collapse(&clusters);
        }
        let next = state.m_step(k, &mut clusters, &mut steps);
        objective_trace.push(contrast_of(&state, &clusters, next));
        method_trace.push(next);
        warp_counts.push(k.warps());

        let gain = (next - value) / value.abs().max(f64::MIN_POSITIVE);
        value = next;
        stalled = if gain < config.rel_tol { stalled + 1 } else { 0 };
        if stalled >= config.stall_iters
            && !config.fixed_iterations
            && config.merge
            && state.objective_is_contrast()
            && merge_redundant(k, &mut clusters, state.associations_mut(), &kernel, config.merge_focus)
        {
            state.after_collapse(&clusters);
            value = state.value(k, &clusters);
            stalled = 0;
            continue;
        }
        if stalled >= config.stall_iters {
            converged = true;
            if !config.fixed_iterations {
                break;
            }
        }
    }

    SegmentationResult {
        method: state.method(),
        clusters,
        associations: state.associations().clone(),
        objective_trace,
        method_trace,
        warp_counts,
        iterations,
        converged,
        greedy_init,
    }
}

/// Segments a packet with the selected method.
pub fn segment_with(method: Method, packet: &EventPacket, j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<SegmentationResult> {
    match method {
        Method::Layered => layered::segment(packet, j, models, config),
        Method::Mixture => mixture::segment_mixture(packet, j, models, config),
        Method::Fuzzy => fuzzy::segment_fuzzy(packet, j, models, config),
    }
}

/// Runs a method from a given initial state (shared initialization for
/// method comparisons and warm starts).
pub fn segment_from(
    method: Method,
    packet: &EventPacket,
    clusters: ClusterSet,
    assoc: AssociationMatrix,
    config: &SolverConfig,
) -> Result<SegmentationResult> {
    config.validate()?;
    if packet.len() != assoc.events() || clusters.len() != assoc.clusters() {
        return Err(Error::ShapeMismatch(format!(
            "{} events / {} clusters vs {}x{} associations",
            packet.len(),
            clusters.len(),
            assoc.events(),
            assoc.clusters()
        )));
    }
    let k = Kernels::new(packet, config);
    let diag = Kernels::new(packet, config);
    Ok(match method {
        Method::Layered => drive(&k, &diag, clusters, layered::Layered::new(assoc, config), config, false),
        Method::Mixture => drive(&k, &diag, clusters, mixture::Mixture::new(assoc, config), config, false),
        Method::Fuzzy => drive(&k, &diag, clusters, fuzzy::Fuzzy::new(assoc, config), config, false),
    })
}

/// Greedy initialization shared by all methods.
pub fn initialize_greedy(packet: &EventPacket, j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<(ClusterSet, AssociationMatrix)> {
    let models = prepare(packet, j, models, config)?;
    let k = Kernels::new(packet, config);
    init::greedy(&k, &models, config)
}
