mod common;

use common::{geometry, mean_on_truth, one_hot, stroboscopic_dots, two_pebbles, two_squares};
use motionseg::experiments::random_packet;
use motionseg::solver::fuzzy::{fuzzy_distance, fuzzy_e_step, fuzzy_objective, fuzzy_partition, segment_fuzzy, FuzzyState};
use motionseg::solver::mixture::{log_likelihood, mixture_component_likelihood, mixture_e_step, mixture_m_step, segment_mixture, MixtureState};
use motionseg::{
    per_event_accuracy, segment, AssociationMatrix, ClusterSet, Event, EventPacket, GaussianKernel, Polarity, SolverConfig, WarpModel, WarpParams,
};

fn flows(vs: &[[f64; 2]]) -> ClusterSet {
    ClusterSet::new(vs.iter().map(|v| WarpParams::flow(v[0], v[1])).collect())
}

fn accuracy(r: &motionseg::SegmentationResult, labels: &[u32], j: usize) -> f64 {
    per_event_accuracy(&r.associations, labels, j).unwrap().accuracy
}

/// Best (vx, vy) on a grid with step `step`, refined five times.
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

// Mixture component likelihood

#[test]
fn co_located_events_read_the_normalized_peak() {
    let events = (0..50).map(|i| Event::new(30.0, 20.0, i as f64 * 1e-3, Polarity::Positive)).collect();
    let packet = EventPacket::new(events, geometry());
    let cfg = SolverConfig::default();
    let lik = mixture_component_likelihood(&packet, &WarpParams::flow(0.0, 0.0), &cfg);
    let centre = GaussianKernel::new(cfg.sigma).taps()[GaussianKernel::new(cfg.sigma).radius()];
    for l in lik {
        assert!((l - centre * centre).abs() < 1e-12, "{l} vs {}", centre * centre);
    }
}

#[test]
fn uniform_events_give_near_uniform_likelihood() {
    let packet = random_packet(200_000, geometry(), 17);
    let lik = mixture_component_likelihood(&packet, &WarpParams::flow(0.0, 0.0), &SolverConfig::default());
    let max = lik.iter().copied().fold(f64::MIN, f64::max);
    let min = lik.iter().copied().fold(f64::MAX, f64::min);
    assert!(max / min < 3.0, "max/min {}", max / min);
}

#[test]
fn events_warped_out_of_view_are_floored() {
    let s = two_squares(8.0);
    let cfg = SolverConfig::default();
    let lik = mixture_component_likelihood(&s.packet, &WarpParams::flow(1e5, 0.0), &cfg);
    // Events at the reference time stay in view; everything else leaves.
    let t0 = s.packet.t_ref;
    for (e, l) in s.packet.events.iter().zip(&lik) {
        if e.t - t0 > 1e-3 {
            assert_eq!(*l, cfg.epsilon_c);
        }
    }
    let none = EventPacket::new(vec![Event::new(5.0, 5.0, 1.0, Polarity::Positive)], geometry());
    let lik = mixture_component_likelihood(&none, &WarpParams::flow(0.0, 0.0), &cfg);
    assert!(lik[0] > cfg.epsilon_c);
}

// Mixture E-step

#[test]
fn mixture_single_component_takes_everything() {
    let s = two_squares(8.0);
    let cfg = SolverConfig::default();
    let state = MixtureState::new(flows(&[[50.0, 0.0]]), AssociationMatrix::uniform(s.packet.len(), 1));
    let next = mixture_e_step(&state, &s.packet, &cfg);
    assert!(next.membership.column(0).iter().all(|&p| p == 1.0));
    assert_eq!(next.mixing_weights, vec![1.0]);
}

#[test]
fn identical_components_share_evenly() {
    let s = two_squares(8.0);
    let state = MixtureState::new(flows(&[[50.0, 0.0], [50.0, 0.0]]), AssociationMatrix::uniform(s.packet.len(), 2));
    let next = mixture_e_step(&state, &s.packet, &SolverConfig::default());
    for k in 0..s.packet.len() {
        assert_eq!(next.membership.get(k, 0), 0.5);
        assert_eq!(next.membership.get(k, 1), 0.5);
    }
    assert_eq!(next.mixing_weights, vec![0.5, 0.5]);
}

#[test]
fn mixture_memberships_at_truth_follow_the_objects() {
    let s = two_squares(16.0);
    let state = MixtureState::new(ClusterSet::new(s.truth.params.clone()), AssociationMatrix::uniform(s.packet.len(), 2));
    let next = mixture_e_step(&state, &s.packet, &SolverConfig::default());
    assert!(next.membership.is_row_stochastic(1e-9));
    let mean = mean_on_truth(&next.membership, &s.truth.labels);
    assert!(mean >= 0.8, "mean membership on the true component {mean}");
}

// Mixture M-step

#[test]
fn mixture_gradient_vanishes_at_grid_optimum() {
    let packet = stroboscopic_dots();
    let cfg = SolverConfig::default();
    let n = packet.len();
    let ll = |vx: f64, vy: f64| log_likelihood(&MixtureState::new(flows(&[[vx, vy]]), AssociationMatrix::uniform(n, 1)), &packet, &cfg);
    let best = grid_optimum(ll, [20.0, 0.0], [60.0, 40.0], 2.0);
    let h = cfg.fd_step;
    let grad = |p: [f64; 2]| {
        let gx = (ll(p[0] + h, p[1]) - ll(p[0] - h, p[1])) / (2.0 * h);
        let gy = (ll(p[0], p[1] + h) - ll(p[0], p[1] - h)) / (2.0 * h);
        gx.hypot(gy)
    };
    let (at_best, at_zero) = (grad(best), grad([0.0, 0.0]));
    assert!(at_best < 1e-3 * at_zero, "gradient {at_best} at {best:?} vs {at_zero} at zero");
}

#[test]
fn mixture_zero_step_keeps_motion() {
    let s = two_squares(8.0);
    let cfg = SolverConfig {
        step_mu: 0.0,
        ..SolverConfig::default()
    };
    let state = MixtureState::new(flows(&[[40.0, 3.0], [100.0, -2.0]]), one_hot(&s.truth.labels, 2));
    assert_eq!(mixture_m_step(&state, &s.packet, &cfg).params, state.params);
}

#[test]
fn mixture_step_from_perturbed_truth_raises_likelihood() {
    let s = two_squares(16.0);
    let cfg = SolverConfig::default();
    let mut start = ClusterSet::new(s.truth.params.clone());
    start.params[0].theta_mut()[0] -= 4.0;
    start.params[1].theta_mut()[0] += 4.0;
    let state = MixtureState::new(start, one_hot(&s.truth.labels, 2));
    let before = log_likelihood(&state, &s.packet, &cfg);
    let after = log_likelihood(&mixture_m_step(&state, &s.packet, &cfg), &s.packet, &cfg);
    assert!(after > before, "{after} <= {before}");
}

// Mixture segmentation

#[test]
fn mixture_is_within_ten_points_of_layered() {
    let s = two_squares(16.0);
    let cfg = SolverConfig::default();
    let layered = accuracy(&segment(&s.packet, 2, &[WarpModel::Flow2], &cfg).unwrap(), &s.truth.labels, 2);
    let mixture = accuracy(&segment_mixture(&s.packet, 2, &[WarpModel::Flow2], &cfg).unwrap(), &s.truth.labels, 2);
    assert!(layered - mixture <= 0.1, "mixture {mixture} vs layered {layered}");
}

#[test]
fn mixture_single_cluster_maximizes_likelihood() {
    let s = two_squares(16.0);
    let cfg = SolverConfig::default();
    let r = segment_mixture(&s.packet, 1, &[WarpModel::Flow2], &cfg).unwrap();
    assert!(r.associations.column(0).iter().all(|&p| p == 1.0));
    let n = s.packet.len();
    let ll = |p: &WarpParams| {
        log_likelihood(
            &MixtureState::new(ClusterSet::new(vec![*p]), AssociationMatrix::uniform(n, 1)),
            &s.packet,
            &cfg,
        )
    };
    let got = ll(&r.clusters.params[0]);
    assert_eq!(*r.method_trace.last().unwrap(), got);
    let best = grid_optimum(|vx, vy| ll(&WarpParams::flow(vx, vy)), [0.0, -30.0], [160.0, 30.0], 4.0);
    assert!(
        got >= ll(&WarpParams::flow(best[0], best[1])) - 1e-3 * got.abs(),
        "{got} below grid optimum at {best:?}"
    );
}

#[test]
fn mixture_trace_never_drops_by_more_than_one_percent() {
    let s = two_squares(16.0);
    let r = segment_mixture(&s.packet, 2, &[WarpModel::Flow2], &SolverConfig::default()).unwrap();
    for w in r.method_trace.windows(2) {
        assert!(w[1] >= w[0] - 0.01 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
}

// Fuzzy distance and partition

#[test]
fn empty_image_gives_zero_distance() {
    let cfg = SolverConfig::default();
    let packet = EventPacket::new(
        vec![
            Event::new(5.0, 5.0, 0.0, Polarity::Positive),
            Event::new(6.0, 5.0, 1.0, Polarity::Positive),
        ],
        geometry(),
    );
    // Both events leave the image except the one at the reference time.
    let d = fuzzy_distance(&packet, &WarpParams::flow(1e5, 0.0), &cfg);
    assert_eq!(d[1], 0.0);
}

#[test]
fn pixel_of_e_minus_one_gives_unit_distance() {
    let cfg = SolverConfig {
        sigma: 0.0,
        ..SolverConfig::default()
    };
    let offset = 3.0 - std::f64::consts::E;
    let packet = EventPacket::new(
        vec![
            Event::new(5.0, 5.0, 0.0, Polarity::Positive),
            Event::new(5.0 + offset, 5.0, 0.0, Polarity::Positive),
        ],
        geometry(),
    );
    let d = fuzzy_distance(&packet, &WarpParams::flow(0.0, 0.0), &cfg);
    assert!((d[0] - 1.0).abs() < 1e-12, "{}", d[0]);
}

#[test]
fn distance_grows_with_the_image() {
    let cfg = SolverConfig::default();
    let mut last = 0.0;
    for count in 1..8 {
        let events = (0..count).map(|i| Event::new(20.0, 20.0, i as f64 * 1e-3, Polarity::Positive)).collect();
        let d = fuzzy_distance(&EventPacket::new(events, geometry()), &WarpParams::flow(0.0, 0.0), &cfg)[0];
        assert!(d > last);
        last = d;
    }
}

#[test]
fn partition_arithmetic() {
    let p = fuzzy_partition(&[2.0, 1.0], 2.0);
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    assert!(fuzzy_partition(&[0.7, 0.7, 0.7], 2.0).iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    assert_eq!(fuzzy_partition(&[0.0, 0.0], 2.0), vec![0.5, 0.5]);
    let flat = fuzzy_partition(&[5.0, 1.0], 1e6);
    assert!((flat[0] - 0.5).abs() < 1e-5);
}

#[test]
fn fuzzy_e_step_rows_are_stochastic() {
    let s = two_pebbles(60.0, 8.0);
    let state = FuzzyState {
        params: ClusterSet::new(s.truth.params.clone()),
        responsibilities: AssociationMatrix::uniform(s.packet.len(), 2),
        b: 2.0,
    };
    let next = fuzzy_e_step(&state, &s.packet, &SolverConfig::default());
    assert!(next.responsibilities.is_row_stochastic(1e-9));
    let twins = FuzzyState {
        params: flows(&[[50.0, 0.0], [50.0, 0.0]]),
        ..state
    };
    let even = fuzzy_e_step(&twins, &s.packet, &SolverConfig::default());
    assert!((0..s.packet.len()).all(|k| even.responsibilities.get(k, 0) == 0.5));
}

// Fuzzy segmentation

#[test]
fn fuzzy_is_within_ten_points_of_layered() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig::default();
    let layered = accuracy(&segment(&s.packet, 2, &[WarpModel::Flow2], &cfg).unwrap(), &s.truth.labels, 2);
    let fuzzy = accuracy(&segment_fuzzy(&s.packet, 2, &[WarpModel::Flow2], &cfg).unwrap(), &s.truth.labels, 2);
    assert!(layered - fuzzy <= 0.1, "fuzzy {fuzzy} vs layered {layered}");
}

#[test]
fn fuzzy_single_cluster_maximizes_total_distance() {
    let s = two_squares(16.0);
    let cfg = SolverConfig::default();
    let r = segment_fuzzy(&s.packet, 1, &[WarpModel::Flow2], &cfg).unwrap();
    let total = |p: &WarpParams| fuzzy_distance(&s.packet, p, &cfg).iter().sum::<f64>();
    let got = total(&r.clusters.params[0]);
    let state = FuzzyState {
        params: r.clusters.clone(),
        responsibilities: AssociationMatrix::uniform(s.packet.len(), 1),
        b: 2.0,
    };
    assert!((fuzzy_objective(&state, &s.packet, &cfg) - got).abs() < 1e-9 * got);
    let best = grid_optimum(|vx, vy| total(&WarpParams::flow(vx, vy)), [0.0, -30.0], [160.0, 30.0], 4.0);
    assert!(
        got >= total(&WarpParams::flow(best[0], best[1])) * (1.0 - 1e-3),
        "{got} below grid optimum at {best:?}"
    );
}

#[test]
fn fuzzy_trace_stagnates_by_iteration_thirty() {
    let s = two_pebbles(60.0, 8.0);
    let cfg = SolverConfig {
        max_iters: 60,
        fixed_iterations: true,
        ..SolverConfig::default()
    };
    let r = segment_fuzzy(&s.packet, 2, &[WarpModel::Flow2], &cfg).unwrap();
    let t = &r.method_trace;
    let late = (t[t.len() - 1] - t[30]) / t[30].abs();
    let early = (t[30] - t[0]) / t[0].abs();
    assert!(
        late.abs() < 0.01 && late.abs() < 0.1 * early.abs(),
        "gain after 30: {late}, before: {early}"
    );
}
