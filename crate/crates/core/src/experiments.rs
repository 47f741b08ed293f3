//! Experiment drivers: accuracy against relative displacement, throughput
//! and complexity timing, and the three-method comparison.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::evaluation::per_event_accuracy;
use crate::event::{Event, EventPacket, ImageGeometry, Polarity};
use crate::sim::{into_packet, preset_two_pebbles, simulate, SimConfig};
use crate::solver::config::SolverConfig;
use crate::solver::layered;
use crate::solver::types::{AssociationMatrix, ClusterSet, Method};
use crate::solver::{initialize_greedy, segment_from};
use crate::warp::{WarpModel, WarpParams};

/// Shared settings of the two-pebble experiments.
#[derive(Debug, Clone)]
pub struct CurveConfig {
    pub geometry: ImageGeometry,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub base_v: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            geometry: ImageGeometry { width: 96, height: 72 },
            sim: SimConfig::default(),
            solver: SolverConfig::default(),
            base_v: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub delta_v: f64,
    pub displacement_px: f64,
    pub window_s: f64,
    pub events: usize,
    pub accuracy: f64,
    /// Single-motion case: no relative velocity, or fewer than two live clusters.
    pub degenerate: bool,
    pub seconds: f64,
}

/// Segments a two-pebble window whose relative displacement is
/// `displacement_px` (window duration `displacement_px / delta_v`) with two
/// flow clusters. With `delta_v = 0` the window spans the same distance at
/// `base_v` and the point is flagged degenerate.
pub fn two_pebble_point(delta_v: f64, displacement_px: f64, cfg: &CurveConfig) -> Result<CurvePoint> {
    let speed = if delta_v > 0.0 { delta_v } else { cfg.base_v.max(1.0) };
    let window_s = displacement_px / speed;
    let sim = SimConfig {
        duration: window_s,
        ..cfg.sim.clone()
    };
    let scene = preset_two_pebbles(delta_v, cfg.base_v, cfg.geometry, &sim);
    let events = simulate(&scene, &sim, cfg.geometry)?;
    let (packet, truth) = into_packet(&events, &scene, cfg.geometry);
    let start = Instant::now();
    let result = layered::segment(&packet, 2, &[WarpModel::Flow2], &cfg.solver)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = per_event_accuracy(&result.associations, &truth.labels, 2)?;
    Ok(CurvePoint {
        delta_v,
        displacement_px: if delta_v > 0.0 { displacement_px } else { 0.0 },
        window_s,
        events: packet.len(),
        accuracy: report.accuracy,
        degenerate: delta_v == 0.0 || result.clusters.live_count() < 2,
        seconds,
    })
}

/// Accuracy for every relative velocity and displacement.
pub fn accuracy_vs_displacement(delta_vs: &[f64], displacements: &[f64], cfg: &CurveConfig) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::with_capacity(delta_vs.len() * displacements.len());
    for &dv in delta_vs {
        for &d in displacements {
            out.push(two_pebble_point(dv, d, cfg)?);
        }
    }
    Ok(out)
}

/// Uniformly random events over the geometry and one second; a
/// content-independent load for timing.
pub fn random_packet(n: usize, geometry: ImageGeometry, seed: u64) -> EventPacket {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            Event::new(
                rng.random_range(0..geometry.width) as f64,
                rng.random_range(0..geometry.height) as f64,
                rng.random_range(0.0..1.0),
                Polarity::Positive,
            )
        })
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    EventPacket::new(events, geometry)
}

/// Deterministic flow clusters fanned out over directions, with uniform
/// associations; the fixed starting point of the timing runs.
pub fn fixed_start(n: usize, j: usize, speed: f64) -> (ClusterSet, AssociationMatrix) {
    let params = (0..j)
        .map(|c| {
            let a = std::f64::consts::TAU * c as f64 / j as f64;
            WarpParams::flow(speed * a.cos(), speed * a.sin())
        })
        .collect();
    (ClusterSet::new(params), AssociationMatrix::uniform(n, j))
}

/// Timing configuration: fixed iteration budget, no early stop, no
/// collapse or merging, sequential kernels.
pub fn timing_config(base: &SolverConfig, iterations: usize) -> SolverConfig {
    SolverConfig {
        max_iters: iterations,
        fixed_iterations: true,
        collapse_frac: 0.0,
        merge: false,
        parallel: false,
        ..base.clone()
    }
}

/// Median wall time of `runs` layered runs from [`fixed_start`], after one
/// warm-up run.
pub fn time_layered(packet: &EventPacket, j: usize, config: &SolverConfig, runs: usize) -> Result<f64> {
    let once = || -> Result<f64> {
        let (clusters, assoc) = fixed_start(packet.len(), j, 10.0);
        let start = Instant::now();
        segment_from(Method::Layered, packet, clusters, assoc, config)?;
        Ok(start.elapsed().as_secs_f64())
    };
    once()?;
    let mut times = (0..runs.max(1)).map(|_| once()).collect::<Result<Vec<_>>>()?;
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub j: usize,
    pub events: usize,
    pub iterations: usize,
    pub median_seconds: f64,
    /// Events times iterations per second, in thousands.
    pub kev_per_s: f64,
}

/// Throughput of the layered method at a fixed iteration budget
/// (`config.max_iters`), median over `runs` runs per cluster count.
pub fn throughput_benchmark(js: &[usize], packet: &EventPacket, config: &SolverConfig, runs: usize) -> Result<Vec<ThroughputRow>> {
    let cfg = timing_config(config, config.max_iters);
    js.iter()
        .map(|&j| {
            let t = time_layered(packet, j, &cfg, runs.max(5))?;
            Ok(ThroughputRow {
                j,
                events: packet.len(),
                iterations: cfg.max_iters,
                median_seconds: t,
                kev_per_s: packet.len() as f64 * cfg.max_iters as f64 / t / 1e3,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub events: usize,
    pub pixels: usize,
    pub j: usize,
    pub seconds: f64,
}

/// Wall times over every combination of event count, geometry and cluster count.
pub fn complexity_sweep(
    ns: &[usize],
    geometries: &[ImageGeometry],
    js: &[usize],
    config: &SolverConfig,
    iterations: usize,
    runs: usize,
) -> Result<Vec<ComplexityRow>> {
    let cfg = timing_config(config, iterations);
    let mut out = Vec::new();
    for &n in ns {
        for &g in geometries {
            let packet = random_packet(n, g, 11);
            for &j in js {
                out.push(ComplexityRow {
                    events: n,
                    pixels: g.pixel_count(),
                    j,
                    seconds: time_layered(&packet, j, &cfg, runs)?,
                });
            }
        }
    }
    Ok(out)
}

/// Least-squares line `y = slope * x + intercept` and its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit { slope, intercept, r2 }
}

/// Fit of wall time against `(events + pixels) * J`.
pub fn complexity_fit(rows: &[ComplexityRow]) -> LinearFit {
    let xs: Vec<f64> = rows.iter().map(|r| ((r.events + r.pixels) * r.j) as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    linear_fit(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    /// Sum of contrasts of the weighted IWEs after every iteration.
    pub objective_trace: Vec<f64>,
    /// The method's own objective after every iteration.
    pub method_trace: Vec<f64>,
    /// Cumulative IWE accumulations after every iteration.
    pub warp_counts: Vec<u64>,
    pub accuracy: Option<f64>,
    pub iterations: usize,
}

impl MethodRun {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// Runs all three methods from one shared greedy initialization.
pub fn compare_methods(
    packet: &EventPacket,
    labels: Option<&[u32]>,
    j: usize,
    models: &[WarpModel],
    config: &SolverConfig,
) -> Result<Vec<MethodRun>> {
    let (clusters, assoc) = initialize_greedy(packet, j, models, config)?;
    Method::ALL
        .iter()
        .map(|&method| {
            let r = segment_from(method, packet, clusters.clone(), assoc.clone(), config)?;
            let accuracy = match labels {
                Some(l) => Some(per_event_accuracy(&r.associations, l, j)?.accuracy),
                None => None,
            };
            Ok(MethodRun {
                method,
                objective_trace: r.objective_trace,
                method_trace: r.method_trace,
                warp_counts: r.warp_counts,
                accuracy,
                iterations: r.iterations,
            })
        })
        .collect()
}
