mod common;

use common::{drifting_pebble, mean_on_truth, one_hot, one_pebble, relative_error, stroboscopic_dots, two_pebbles};
use motionseg::solver::layered::{ascend_motion, objective, segment_packets, update_associations};
use motionseg::{
    initialize_greedy, per_event_accuracy, segment, segment_stream, sliding_windows, AssociationMatrix, ClusterSet, Event, SolverConfig, WarpModel,
    WarpParams,
};

fn flows(vs: &[[f64; 2]]) -> ClusterSet {
    ClusterSet::new(vs.iter().map(|v| WarpParams::flow(v[0], v[1])).collect())
}

/// Maximizes `f` over (vx, vy) by a dense grid followed by nested refinement.
fn grid_optimum(f: impl Fn(f64, f64) -> f64, lo: [f64; 2], hi: [f64; 2], step: f64) -> [f64; 2] {
    let mut best = (f64::NEG_INFINITY, lo);
    let (mut lo, mut hi, mut step) = (lo, hi, step);
    for _ in 0..6 {
        let nx = ((hi[0] - lo[0]) / step).round() as usize;
        let ny = ((hi[1] - lo[1]) / step).round() as usize;
        for ix in 0..=nx {
            for iy in 0..=ny {
                let p = [lo[0] + ix as f64 * step, lo[1] + iy as f64 * step];
                let v = f(p[0], p[1]);
                if v > best.0 {
                    best = (v, p);
                }
            }
        }
        lo = [best.1[0] - step, best.1[1] - step];
        hi = [best.1[0] + step, best.1[1] + step];
        step /= 5.0;
    }
    best.1
}

#[test]
fn objective_at_truth_beats_zero_motion() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig::default();
    let p = one_hot(&s.truth.labels, 2);
    let truth = ClusterSet::new(s.truth.params.clone());
    let zero = flows(&[[0.0, 0.0], [0.0, 0.0]]);
    assert!(objective(&s.packet, &truth, &p, &cfg) > objective(&s.packet, &zero, &p, &cfg));
}

#[test]
fn single_cluster_objective_is_plain_contrast() {
    let s = one_pebble(40.0, 0.2);
    let cfg = SolverConfig::default();
    let c = flows(&[[40.0, 0.0]]);
    let warped = motionseg::warp::warp_packet(&s.packet, &c.params[0]);
    let plain = motionseg::iwe::variance_contrast(&motionseg::iwe::smooth(
        &motionseg::iwe::accumulate_unweighted(&warped, s.packet.geometry),
        cfg.sigma,
    ));
    let got = objective(&s.packet, &c, &AssociationMatrix::uniform(s.packet.len(), 1), &cfg);
    assert!(relative_error(got, plain) < 1e-12, "{got} vs {plain}");
}

#[test]
fn empty_cluster_contributes_nothing() {
    let s = one_pebble(40.0, 0.2);
    let cfg = SolverConfig::default();
    let n = s.packet.len();
    let mut p = AssociationMatrix::zeros(n, 2);
    p.column_mut(0).iter_mut().for_each(|v| *v = 1.0);
    let both = objective(&s.packet, &flows(&[[40.0, 0.0], [5.0, 5.0]]), &p, &cfg);
    let one = objective(&s.packet, &flows(&[[40.0, 0.0]]), &AssociationMatrix::uniform(n, 1), &cfg);
    assert_eq!(both, one);
}

#[test]
fn e_steps_at_truth_concentrate_associations() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig::default();
    let clusters = ClusterSet::new(s.truth.params.clone());
    let mut p = AssociationMatrix::uniform(s.packet.len(), 2);
    for _ in 0..3 {
        p = update_associations(&s.packet, &clusters, &p, &cfg);
        assert!(p.is_row_stochastic(1e-9));
    }
    let mean = mean_on_truth(&p, &s.truth.labels);
    assert!(mean > 0.8, "mean association on the true cluster {mean}");
}

#[test]
fn e_step_trivial_cases() {
    let s = one_pebble(40.0, 0.1);
    let cfg = SolverConfig::default();
    let n = s.packet.len();
    let single = update_associations(&s.packet, &flows(&[[40.0, 0.0]]), &AssociationMatrix::uniform(n, 1), &cfg);
    assert!(single.column(0).iter().all(|&p| p == 1.0));
    let twins = update_associations(&s.packet, &flows(&[[40.0, 0.0], [40.0, 0.0]]), &AssociationMatrix::uniform(n, 2), &cfg);
    assert!((0..n).all(|k| twins.get(k, 0) == 0.5 && twins.get(k, 1) == 0.5));
}

#[test]
fn gradient_vanishes_at_grid_optimum() {
    let packet = stroboscopic_dots();
    let cfg = SolverConfig::default();
    let ones = AssociationMatrix::uniform(packet.len(), 1);
    let f = |vx: f64, vy: f64| objective(&packet, &flows(&[[vx, vy]]), &ones, &cfg);
    let best = grid_optimum(f, [20.0, 0.0], [60.0, 40.0], 2.0);
    let h = cfg.fd_step;
    let grad = |p: [f64; 2]| {
        let gx = (f(p[0] + h, p[1]) - f(p[0] - h, p[1])) / (2.0 * h);
        let gy = (f(p[0], p[1] + h) - f(p[0], p[1] - h)) / (2.0 * h);
        gx.hypot(gy)
    };
    let (at_best, at_zero) = (grad(best), grad([0.0, 0.0]));
    assert!(at_best < 1e-3 * at_zero, "gradient {at_best} at {best:?} vs {at_zero} at zero");
}

#[test]
fn one_step_from_offset_truth_climbs() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig::default();
    let p = one_hot(&s.truth.labels, 2);
    let mut start = ClusterSet::new(s.truth.params.clone());
    start.params[0].theta_mut()[0] -= 2.0;
    start.params[1].theta_mut()[0] -= 2.0;
    let before = objective(&s.packet, &start, &p, &cfg);
    let after = objective(&s.packet, &ascend_motion(&s.packet, &start, &p, &cfg), &p, &cfg);
    assert!(after > before, "{after} <= {before}");
}

#[test]
fn zero_step_keeps_motion() {
    let s = one_pebble(40.0, 0.1);
    let cfg = SolverConfig {
        step_mu: 0.0,
        ..SolverConfig::default()
    };
    let start = flows(&[[30.0, 1.0]]);
    let next = ascend_motion(&s.packet, &start, &AssociationMatrix::uniform(s.packet.len(), 1), &cfg);
    assert_eq!(next, start);
}

#[test]
fn dead_clusters_are_not_moved() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig::default();
    let mut start = flows(&[[45.0, 0.0], [100.0, 0.0]]);
    start.alive[1] = false;
    let next = ascend_motion(&s.packet, &start, &one_hot(&s.truth.labels, 2), &cfg);
    assert_eq!(next.params[1], start.params[1]);
    assert_ne!(next.params[0], start.params[0]);
}

#[test]
fn greedy_init_finds_both_motions() {
    let s = two_pebbles(60.0, 8.0);
    let (c, p) = initialize_greedy(&s.packet, 2, &[WarpModel::Flow2], &SolverConfig::default()).unwrap();
    assert!(p.is_row_stochastic(1e-9));
    let v: Vec<f64> = c.params.iter().map(|p| p.theta()[0]).collect();
    let truth: Vec<f64> = s.truth.params.iter().map(|p| p.theta()[0]).collect();
    let direct = relative_error(v[0], truth[0]).max(relative_error(v[1], truth[1]));
    let swapped = relative_error(v[0], truth[1]).max(relative_error(v[1], truth[0]));
    assert!(direct.min(swapped) <= 0.3, "init {v:?} vs {truth:?}");
}

#[test]
fn greedy_init_leaves_little_for_a_second_cluster() {
    let s = one_pebble(50.0, 0.16);
    let (_, p) = initialize_greedy(&s.packet, 2, &[WarpModel::Flow2], &SolverConfig::default()).unwrap();
    let n = s.packet.len();
    let taken = (0..n).filter(|&k| p.get(k, 1) > p.get(k, 0)).count() as f64 / n as f64;
    assert!(taken < 0.1, "second cluster takes {taken}");
}

#[test]
fn greedy_init_single_cluster_is_plain_maximization() {
    let s = one_pebble(40.0, 0.2);
    let cfg = SolverConfig::default();
    let (c, p) = initialize_greedy(&s.packet, 1, &[WarpModel::Flow2], &cfg).unwrap();
    assert!(p.column(0).iter().all(|&v| v == 1.0));
    let ones = AssociationMatrix::uniform(s.packet.len(), 1);
    let best = grid_optimum(
        |vx, vy| objective(&s.packet, &flows(&[[vx, vy]]), &ones, &cfg),
        [0.0, -20.0],
        [80.0, 20.0],
        2.0,
    );
    let got = c.params[0].theta();
    assert!((got[0] - best[0]).abs() < 2.0 && (got[1] - best[1]).abs() < 2.0, "{got:?} vs {best:?}");
}

#[test]
fn two_pebbles_are_separated() {
    let s = two_pebbles(60.0, 8.0);
    let r = segment(&s.packet, 2, &[WarpModel::Flow2], &SolverConfig::default()).unwrap();
    let acc = per_event_accuracy(&r.associations, &s.truth.labels, 2).unwrap().accuracy;
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn surplus_clusters_collapse() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig::default();
    let r = segment(&s.packet, 6, &[WarpModel::Flow2], &cfg).unwrap();
    assert_eq!(r.clusters.live_count(), 2);
    let threshold = cfg.collapse_frac * s.packet.len() as f64 / 6.0;
    for j in 0..6 {
        if !r.clusters.alive[j] {
            assert!(r.associations.column_mass(j) < threshold);
        }
    }
}

#[test]
fn single_motion_velocity_is_recovered() {
    let s = drifting_pebble([40.0, 15.0], 0.3);
    let cfg = SolverConfig::default();
    let r = segment(&s.packet, 1, &[WarpModel::Flow2], &cfg).unwrap();
    let v = r.clusters.params[0].theta();
    let err = (v[0] - 40.0).hypot(v[1] - 15.0) / 40f64.hypot(15.0);
    assert!(err < 0.05, "{v:?}");
    let ones = AssociationMatrix::uniform(s.packet.len(), 1);
    let best = grid_optimum(
        |vx, vy| objective(&s.packet, &flows(&[[vx, vy]]), &ones, &cfg),
        [20.0, -5.0],
        [60.0, 35.0],
        1.0,
    );
    assert!((v[0] - best[0]).abs() < 1.0 && (v[1] - best[1]).abs() < 1.0, "{v:?} vs grid {best:?}");
}

#[test]
fn trace_never_drops_by_more_than_one_percent() {
    let s = two_pebbles(30.0, 6.0);
    let r = segment(&s.packet, 3, &[WarpModel::Flow2], &SolverConfig::default()).unwrap();
    for w in r.objective_trace.windows(2) {
        assert!(w[1] >= w[0] * 0.99, "{} -> {}", w[0], w[1]);
    }
}

fn stream_labels(labels: &[u32], window: usize, stride: usize, n: usize) -> &[u32] {
    &labels[n * stride..n * stride + window]
}

#[test]
fn warm_started_windows_converge_faster() {
    let s = two_pebbles(60.0, 20.0);
    let stream: Vec<Event> = s.events.iter().map(|e| e.event).collect();
    let window = stream.len() * 2 / 5;
    let results = segment_stream(&stream, s.packet.geometry, window, None, 2, &[WarpModel::Flow2], &SolverConfig::default()).unwrap();
    assert_eq!(results.len(), 4);
    assert!(results[0].greedy_init);
    for (n, r) in results.iter().enumerate().skip(1) {
        assert!(!r.greedy_init, "window {n} fell back to greedy");
        assert!(
            2 * r.iterations <= results[0].iterations,
            "window {n}: {} iterations vs {}",
            r.iterations,
            results[0].iterations
        );
        let acc = per_event_accuracy(&r.associations, stream_labels(&s.truth.labels, window, window / 2, n), 2).unwrap();
        assert!(acc.accuracy >= 0.9, "window {n}: {}", acc.accuracy);
    }
}

#[test]
fn short_stream_gives_no_results() {
    let s = one_pebble(40.0, 0.02);
    let stream: Vec<Event> = s.events.iter().map(|e| e.event).collect();
    let results = segment_stream(
        &stream,
        s.packet.geometry,
        stream.len() + 1,
        None,
        2,
        &[WarpModel::Flow2],
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(results.is_empty());
}

#[test]
fn velocity_step_falls_back_to_greedy() {
    // The pebbles reverse direction between the two windows.
    let before = two_pebbles(60.0, 8.0);
    let sim = motionseg::SimConfig {
        duration: 16.0 / 60.0,
        ..Default::default()
    };
    let mut objects = motionseg::sim::preset_two_pebbles(60.0, 50.0, common::geometry(), &sim);
    for (i, o) in objects.iter_mut().enumerate() {
        o.motion.theta_mut()[0] *= -1.0;
        o.region.x += 40.0;
        o.pattern = motionseg::sim::Pattern::voronoi(&o.region, 5.0, 0.8, 7 + i as u64);
    }
    let after = common::render(objects, &sim);
    let window = before.events.len();
    let t0 = before.events.last().unwrap().event.t + 1e-6;
    let mut events: Vec<Event> = before.events.iter().map(|e| e.event).collect();
    let mut labels = before.truth.labels.clone();
    events.extend(after.events.iter().map(|e| Event {
        t: e.event.t + t0,
        ..e.event
    }));
    labels.extend(&after.truth.labels);

    let cfg = SolverConfig::default();
    let packets = sliding_windows(&events, before.packet.geometry, window, window);
    assert!(packets.len() >= 2);
    let results = segment_packets(&packets[..2], 2, &[WarpModel::Flow2], &cfg).unwrap();
    assert!(results[1].greedy_init, "propagated motion was kept after the reversal");
    let truth = &labels[window..2 * window];
    let warm = per_event_accuracy(&results[1].associations, truth, 2).unwrap().accuracy;
    let cold = segment(&packets[1], 2, &[WarpModel::Flow2], &cfg).unwrap();
    let cold = per_event_accuracy(&cold.associations, truth, 2).unwrap().accuracy;
    assert!((warm - cold).abs() <= 0.02, "stream {warm} vs cold start {cold}");
}
