//! Layered segmentation: every cluster owns a weighted IWE, associations are
//! re-partitioned from the local IWE values and motions ascend the sum of
//! contrasts.

use crate::error::Result;
use crate::event::{sliding_windows, Event, EventPacket, ImageGeometry};
use crate::iwe::GaussianKernel;
use crate::solver::ascent::ascend;
use crate::solver::config::SolverConfig;
use crate::solver::kernels::Kernels;
use crate::solver::types::{AssociationMatrix, ClusterSet, Method, SegmentationResult};
use crate::solver::{drive, init, partition, prepare, sum_of_contrasts, Alternation};
use crate::warp::WarpModel;

pub(crate) struct Layered {
    assoc: AssociationMatrix,
    kernel: GaussianKernel,
    config: SolverConfig,
}

impl Layered {
    pub(crate) fn new(assoc: AssociationMatrix, config: &SolverConfig) -> Self {
        Self {
            assoc,
            kernel: GaussianKernel::new(config.sigma),
            config: config.clone(),
        }
    }
}

impl Alternation for Layered {
    fn method(&self) -> Method {
        Method::Layered
    }

    fn associations(&self) -> &AssociationMatrix {
        &self.assoc
    }

    fn associations_mut(&mut self) -> &mut AssociationMatrix {
        &mut self.assoc
    }

    fn value(&mut self, k: &Kernels, clusters: &ClusterSet) -> f64 {
        sum_of_contrasts(k, clusters, &self.assoc, &self.kernel)
    }

    fn e_step(&mut self, k: &Kernels, clusters: &ClusterSet) {
        self.assoc = e_step(k, clusters, &self.assoc, &self.kernel, self.config.epsilon_c);
    }

    fn m_step(&mut self, k: &Kernels, clusters: &mut ClusterSet, steps: &mut [f64]) -> f64 {
        m_step(k, clusters, &self.assoc, steps, &self.kernel, &self.config)
    }

    fn objective_is_contrast(&self) -> bool {
        true
    }
}

/// Local contrast of every live cluster at each event's warped location,
/// read from the cluster's blurred weighted IWE built with `prev`.
fn e_step(k: &Kernels, clusters: &ClusterSet, prev: &AssociationMatrix, kernel: &GaussianKernel, floor: f64) -> AssociationMatrix {
    let scores = k.map(clusters.len(), |j| {
        if !clusters.alive[j] {
            return Vec::new();
        }
        let (warped, image) = k.image(&clusters.params[j], Some(prev.column(j)), kernel);
        k.sample(&image, &warped)
    });
    partition(&scores, clusters, floor, k.len())
}

fn m_step(
    k: &Kernels,
    clusters: &mut ClusterSet,
    assoc: &AssociationMatrix,
    steps: &mut [f64],
    kernel: &GaussianKernel,
    config: &SolverConfig,
) -> f64 {
    let snapshot = clusters.clone();
    let stepped = k.map(clusters.len(), |j| {
        if !snapshot.alive[j] {
            return None;
        }
        let weights = assoc.column(j);
        let f = |p: &crate::warp::WarpParams| k.contrast(p, Some(weights), kernel);
        let params = &snapshot.params[j];
        let value = f(params);
        Some(ascend(params, value, k.levers(params), steps[j], config, &f))
    });
    let mut terms = Vec::with_capacity(clusters.len());
    for (j, s) in stepped.into_iter().enumerate() {
        if let Some(s) = s {
            clusters.params[j] = s.params;
            steps[j] = s.next_step;
            terms.push(s.value);
        }
    }
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Sum of the contrasts of the blurred weighted IWEs of all clusters.
pub fn objective(packet: &EventPacket, clusters: &ClusterSet, assoc: &AssociationMatrix, config: &SolverConfig) -> f64 {
    let k = Kernels::new(packet, config);
    sum_of_contrasts(&k, clusters, assoc, &GaussianKernel::new(config.sigma))
}

/// Closed-form re-partition of the associations. The weighted IWEs are built
/// with the previous associations `prev`.
pub fn update_associations(packet: &EventPacket, clusters: &ClusterSet, prev: &AssociationMatrix, config: &SolverConfig) -> AssociationMatrix {
    let k = Kernels::new(packet, config);
    e_step(&k, clusters, prev, &GaussianKernel::new(config.sigma), config.epsilon_c)
}

/// One ascent step on every live cluster's motion with the associations held
/// fixed. The trial step is `config.step_mu` pixels of displacement.
pub fn ascend_motion(packet: &EventPacket, clusters: &ClusterSet, assoc: &AssociationMatrix, config: &SolverConfig) -> ClusterSet {
    let k = Kernels::new(packet, config);
    let mut out = clusters.clone();
    let mut steps = vec![config.step_mu; clusters.len()];
    m_step(&k, &mut out, assoc, &mut steps, &GaussianKernel::new(config.sigma), config);
    out
}

/// Segments one packet into `j` clusters, starting from the greedy
/// initialization.
pub fn segment(packet: &EventPacket, j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<SegmentationResult> {
    let models = prepare(packet, j, models, config)?;
    let k = Kernels::new(packet, config);
    let diag = Kernels::new(packet, config);
    let (clusters, assoc) = init::greedy(&k, &models, config)?;
    Ok(drive(&k, &diag, clusters, Layered::new(assoc, config), config, true))
}

/// Initial associations of a warm-started packet. Events shared with the
/// tail of `prev` keep their rows; the others are assigned outright to the
/// cluster with the highest local contrast under the propagated motions.
fn propagate_associations(
    k: &Kernels,
    clusters: &ClusterSet,
    prev: &EventPacket,
    prev_assoc: &AssociationMatrix,
    packet: &EventPacket,
    config: &SolverConfig,
) -> AssociationMatrix {
    let j = clusters.len();
    let mut assoc = AssociationMatrix::uniform(packet.len(), j);
    let offset = packet.events.first().and_then(|first| prev.events.iter().position(|e| e == first));
    let shared = match offset {
        Some(o) if prev.len() - o <= packet.len() && prev.events[o..] == packet.events[..prev.len() - o] && prev_assoc.clusters() == j => {
            for e in 0..prev.len() - o {
                for c in 0..j {
                    assoc.set(e, c, prev_assoc.get(o + e, c));
                }
            }
            prev.len() - o
        }
        _ => 0,
    };
    let guess = e_step(k, clusters, &assoc, &GaussianKernel::new(config.sigma), config.epsilon_c);
    for e in shared..packet.len() {
        let best = guess.argmax(e);
        for c in 0..j {
            assoc.set(e, c, if c == best { 1.0 } else { 0.0 });
        }
    }
    assoc
}

/// Segments consecutive packets. Each packet after the first starts from the
/// previous packet's motions and associations, unless that start is worse than zero motion, in which case
/// the greedy initialization runs.
pub fn segment_packets(packets: &[EventPacket], j: usize, models: &[WarpModel], config: &SolverConfig) -> Result<Vec<SegmentationResult>> {
    let mut out: Vec<SegmentationResult> = Vec::with_capacity(packets.len());
    let kernel = GaussianKernel::new(config.sigma);
    for (n, packet) in packets.iter().enumerate() {
        let models = prepare(packet, j, models, config)?;
        let k = Kernels::new(packet, config);
        let diag = Kernels::new(packet, config);
        let warm = out.last().map(|prev| {
            let dt = packet.t_ref - packets[n - 1].t_ref;
            ClusterSet::new(prev.clusters.params.iter().map(|p| p.propagate(dt)).collect())
        });
        let uniform = AssociationMatrix::uniform(packet.len(), j);
        let start = warm.filter(|warm| {
            let zero = ClusterSet::zero(&models, packet.geometry);
            sum_of_contrasts(&k, warm, &uniform, &kernel) >= sum_of_contrasts(&k, &zero, &uniform, &kernel)
        });
        let result = match start {
            Some(clusters) => {
                let assoc = propagate_associations(&k, &clusters, &packets[n - 1], &out[n - 1].associations, packet, config);
                drive(&k, &diag, clusters, Layered::new(assoc, config), config, false)
            }
            None => {
                let (clusters, assoc) = init::greedy(&k, &models, config)?;
                drive(&k, &diag, clusters, Layered::new(assoc, config), config, true)
            }
        };
        out.push(result);
    }
    Ok(out)
}

/// Sliding-window segmentation of an event stream (`stride` defaults to half
/// a window).
pub fn segment_stream(
    stream: &[Event],
    geometry: ImageGeometry,
    window: usize,
    stride: Option<usize>,
    j: usize,
    models: &[WarpModel],
    config: &SolverConfig,
) -> Result<Vec<SegmentationResult>> {
    let stride = stride.unwrap_or_else(|| crate::event::default_stride(window));
    let packets = sliding_windows(stream, geometry, window, stride);
    segment_packets(&packets, j, models, config)
}
