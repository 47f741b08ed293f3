#![allow(dead_code)]

use motionseg::sim::{into_packet, preset_two_pebbles, Pattern, Rect, Shape};
use motionseg::{
    simulate, AssociationMatrix, Event, EventPacket, GroundTruth, ImageGeometry, LabeledEvent, Polarity, SceneObject, SimConfig, WarpParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn geometry() -> ImageGeometry {
    ImageGeometry::new(96, 72).unwrap()
}

pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub events: Vec<LabeledEvent>,
    pub packet: EventPacket,
    pub truth: GroundTruth,
}

pub fn render(objects: Vec<SceneObject>, sim: &SimConfig) -> Scene {
    let g = geometry();
    let events = simulate(&objects, sim, g).unwrap();
    let (packet, truth) = into_packet(&events, &objects, g);
    Scene {
        objects,
        events,
        packet,
        truth,
    }
}

/// Two textured pebbles at 50 and 50 + `dv` px/s over a window with `disp_px`
/// of relative displacement.
pub fn two_pebbles(dv: f64, disp_px: f64) -> Scene {
    let sim = SimConfig {
        duration: disp_px / dv,
        ..SimConfig::default()
    };
    render(preset_two_pebbles(dv, 50.0, geometry(), &sim), &sim)
}

/// One textured pebble at `v` px/s along x.
pub fn one_pebble(v: f64, duration: f64) -> Scene {
    let sim = SimConfig {
        duration,
        ..SimConfig::default()
    };
    let mut objects = preset_two_pebbles(0.0, v, geometry(), &sim);
    objects.truncate(1);
    render(objects, &sim)
}

/// One textured pebble drifting diagonally at `v` px/s.
pub fn drifting_pebble(v: [f64; 2], duration: f64) -> Scene {
    let sim = SimConfig {
        duration,
        ..SimConfig::default()
    };
    let mut objects = preset_two_pebbles(0.0, v[0], geometry(), &sim);
    objects.truncate(1);
    objects[0].motion = WarpParams::flow(v[0], v[1]);
    render(objects, &sim)
}

/// Two flat squares with sharp outlines, at 50 and 110 px/s, far apart.
pub fn two_squares(disp_px: f64) -> Scene {
    let sim = SimConfig {
        duration: disp_px / 60.0,
        ..SimConfig::default()
    };
    let top = Rect::new(10.0, 8.0, 24.0, 24.0);
    let bottom = Rect::new(10.0, 42.0, 24.0, 24.0);
    render(
        vec![
            SceneObject::new(Pattern::Constant(0.9), Shape::Rect, WarpParams::flow(50.0, 0.0), 0, top),
            SceneObject::new(Pattern::Constant(0.9), Shape::Rect, WarpParams::flow(110.0, 0.0), 1, bottom),
        ],
        &sim,
    )
}

/// One-hot associations from ground-truth labels (noise goes to cluster 0).
pub fn one_hot(labels: &[u32], j: usize) -> AssociationMatrix {
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let c = (l as usize).saturating_sub(1);
            (0..j).map(|i| if i == c { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    AssociationMatrix::from_rows(&rows).unwrap()
}

/// Mean association of each event with its own object's cluster.
pub fn mean_on_truth(assoc: &AssociationMatrix, labels: &[u32]) -> f64 {
    let (sum, n) = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0)
        .fold((0.0, 0usize), |(s, n), (k, &l)| (s + assoc.get(k, l as usize - 1), n + 1));
    sum / n as f64
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// A random dot pattern seen at instants where it has moved by whole pixels
/// at 40 x 20 px/s. Every copy lands on the lattice at the true velocity and
/// the contrast is symmetric about it.
pub fn stroboscopic_dots() -> EventPacket {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dots: Vec<(f64, f64)> = (0..120)
        .map(|_| (rng.random_range(10..40) as f64, rng.random_range(10..40) as f64))
        .collect();
    let mut events = Vec::new();
    for i in 0..8 {
        let t = 0.05 * i as f64;
        for &(x, y) in &dots {
            events.push(Event::new(x + 40.0 * t, y + 20.0 * t, t, Polarity::Positive));
        }
    }
    EventPacket::new(events, geometry())
}
