//! Labeled synthetic events from parametrically moving 2-D log-intensity
//! patterns under the event-camera threshold model.
//!
//! Every object is described by its appearance at `t = 0` in image
//! coordinates. Its appearance at time `t` is obtained by pulling pixels back
//! through the segmentation warp with `dt = t`, so the object's `motion` is
//! exactly the ground-truth warp a segmentation should recover.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::event::{Event, EventPacket, ImageGeometry, Polarity};
use crate::warp::{warp_dt, WarpModel, WarpParams};

/// Axis-aligned placement rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    pub fn center(&self) -> [f64; 2] {
        [self.x + 0.5 * self.width, self.y + 0.5 * self.height]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x && p[0] < self.x + self.width && p[1] >= self.y && p[1] < self.y + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// The whole placement rectangle.
    Rect,
    /// The ellipse inscribed in the placement rectangle.
    Disc,
}

/// Log-intensity content of an object.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    /// Uniform log intensity; produces pure step edges at the silhouette.
    Constant(f64),
    /// Random lattice of log intensities with spacing `cell` px, bilinearly
    /// interpolated over the placement rectangle.
    Texture { cell: f64, cols: usize, rows: usize, values: Vec<f64> },
    /// Random piecewise-constant cells between column boundaries `xs` and
    /// row boundaries `ys` (offsets into the placement rectangle); every cell
    /// border is a step edge.
    Mosaic { xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64> },
    /// Random Voronoi cells: one site jittered inside each `cell`-sized
    /// square of a lattice padded by one square around the placement
    /// rectangle. Cell borders run at every orientation and sub-pixel offset.
    Voronoi {
        cell: f64,
        cols: usize,
        rows: usize,
        sites: Vec<[f64; 2]>,
        values: Vec<f64>,
    },
}

impl Pattern {
    /// Deterministic random texture covering `region`; lattice values are
    /// uniform in `[-amplitude, amplitude]`.
    pub fn texture(region: &Rect, cell: f64, amplitude: f64, seed: u64) -> Self {
        let cols = (region.width / cell).ceil() as usize + 2;
        let rows = (region.height / cell).ceil() as usize + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..cols * rows).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
        Pattern::Texture { cell, cols, rows, values }
    }

    /// Deterministic random mosaic covering `region`. Cell sides are uniform
    /// in `[0.5, 1.5] * cell`, so edges fall at arbitrary sub-pixel offsets;
    /// cell values are uniform in `[-amplitude, amplitude]`.
    pub fn mosaic(region: &Rect, cell: f64, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bounds = |len: f64| {
            let mut edges = vec![0.0];
            while *edges.last().unwrap() < len {
                let next = edges.last().unwrap() + cell * rng.random_range(0.5..1.5);
                edges.push(next);
            }
            edges
        };
        let xs = bounds(region.width);
        let ys = bounds(region.height);
        let cells = (xs.len() - 1) * (ys.len() - 1);
        let values = (0..cells).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
        Pattern::Mosaic { xs, ys, values }
    }

    /// Deterministic random Voronoi texture covering `region`; cell values
    /// are uniform in `[-amplitude, amplitude]`.
    pub fn voronoi(region: &Rect, cell: f64, amplitude: f64, seed: u64) -> Self {
        let cols = (region.width / cell).ceil() as usize + 2;
        let rows = (region.height / cell).ceil() as usize + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sites = Vec::with_capacity(cols * rows);
        let mut values = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                let jitter: [f64; 2] = [rng.random(), rng.random()];
                sites.push([(c as f64 - 1.0 + jitter[0]) * cell, (r as f64 - 1.0 + jitter[1]) * cell]);
                values.push(rng.random_range(-amplitude..=amplitude));
            }
        }
        Pattern::Voronoi {
            cell,
            cols,
            rows,
            sites,
            values,
        }
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        match self {
            Pattern::Constant(l) => *l,
            Pattern::Texture { cell, cols, rows, values } => {
                let (fu, fv) = (u / cell, v / cell);
                let (i, j) = (fu.floor().max(0.0) as usize, fv.floor().max(0.0) as usize);
                let (i, j) = (i.min(cols - 2), j.min(rows - 2));
                let (a, b) = (fu - i as f64, fv - j as f64);
                let at = |c: usize, r: usize| values[r * cols + c];
                (1.0 - a) * (1.0 - b) * at(i, j) + a * (1.0 - b) * at(i + 1, j) + (1.0 - a) * b * at(i, j + 1) + a * b * at(i + 1, j + 1)
            }
            Pattern::Mosaic { xs, ys, values } => {
                let cell = |edges: &[f64], w: f64| edges.partition_point(|&e| e <= w).clamp(1, edges.len() - 1) - 1;
                values[cell(ys, v) * (xs.len() - 1) + cell(xs, u)]
            }
            Pattern::Voronoi {
                cell,
                cols,
                rows,
                sites,
                values,
            } => {
                // The nearest jittered site lies within two lattice squares.
                let c0 = (u / cell).floor() as i64 + 1;
                let r0 = (v / cell).floor() as i64 + 1;
                let mut best = (f64::INFINITY, 0);
                for r in (r0 - 2).max(0)..=(r0 + 2).min(*rows as i64 - 1) {
                    for c in (c0 - 2).max(0)..=(c0 + 2).min(*cols as i64 - 1) {
                        let i = r as usize * cols + c as usize;
                        let d = (sites[i][0] - u).powi(2) + (sites[i][1] - v).powi(2);
                        if d < best.0 {
                            best = (d, i);
                        }
                    }
                }
                values[best.1]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub pattern: Pattern,
    pub shape: Shape,
    /// Forward motion; also the warp that brings the object's events back to `t = 0`.
    pub motion: WarpParams,
    /// Occlusion rank; lower values are in front.
    pub depth_order: i32,
    /// Placement at `t = 0`.
    pub region: Rect,
}

impl SceneObject {
    pub fn new(pattern: Pattern, shape: Shape, motion: WarpParams, depth_order: i32, region: Rect) -> Self {
        Self {
            pattern,
            shape,
            motion,
            depth_order,
            region,
        }
    }

    /// Log intensity at reference position `p`, or `None` outside the silhouette.
    fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        let r = &self.region;
        if !r.contains(p) {
            return None;
        }
        if self.shape == Shape::Disc {
            let [cx, cy] = r.center();
            let (dx, dy) = ((p[0] - cx) / (0.5 * r.width), (p[1] - cy) / (0.5 * r.height));
            if dx * dx + dy * dy > 1.0 {
                return None;
            }
        }
        Some(self.pattern.value(p[0] - r.x, p[1] - r.y))
    }

    /// Upper bound on the image-plane speed of any point of the object.
    fn max_speed(&self) -> f64 {
        let th = self.motion.theta();
        let r = &self.region;
        let corners = [[r.x, r.y], [r.x + r.width, r.y], [r.x, r.y + r.height], [r.x + r.width, r.y + r.height]];
        let reach = |o: [f64; 2]| corners.iter().map(|c| (c[0] - o[0]).hypot(c[1] - o[1])).fold(0.0, f64::max);
        match self.motion.model {
            WarpModel::Flow2 => th[0].hypot(th[1]),
            WarpModel::Rotation => th[2].abs() * reach([th[0], th[1]]),
            WarpModel::FourDof => th[0].hypot(th[1]) + (th[2].abs() + th[3].abs()) * reach(self.motion.pivot),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Contrast threshold `C` in log-intensity units.
    pub contrast_threshold: f64,
    /// Simulated time span in seconds, starting at 0.
    pub duration: f64,
    /// Standard deviation of Gaussian timestamp jitter, seconds.
    pub timestamp_jitter: f64,
    /// Spurious events per pixel per second.
    pub noise_rate: f64,
    pub seed: u64,
    /// Log intensity where no object is visible.
    pub background: f64,
    /// Scene sampling rate override in Hz; by default the larger of 1 kHz and
    /// ten samples per pixel crossed by the fastest point.
    pub sample_rate: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.15,
            duration: 0.1,
            timestamp_jitter: 0.0,
            noise_rate: 0.0,
            seed: 0,
            background: 0.0,
            sample_rate: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.contrast_threshold > 0.0) {
            return Err(Error::Config("contrast threshold must be positive".into()));
        }
        if !(self.duration >= 0.0) || !(self.timestamp_jitter >= 0.0) || !(self.noise_rate >= 0.0) {
            return Err(Error::Config("duration, jitter and noise rate must be non-negative".into()));
        }
        if let Some(r) = self.sample_rate {
            if !(r > 0.0) {
                return Err(Error::Config("sample rate must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledEvent {
    pub event: Event,
    /// 1-based object index; 0 marks noise.
    pub label: u32,
}

/// Per-event labels and per-object true motions of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<u32>,
    /// Motion of object `i + 1`.
    pub params: Vec<WarpParams>,
}

impl GroundTruth {
    pub fn new(events: &[LabeledEvent], scene: &[SceneObject]) -> Self {
        Self {
            labels: events.iter().map(|e| e.label).collect(),
            params: scene.iter().map(|o| o.motion).collect(),
        }
    }
}

/// Splits labeled events into a packet (reference time at the first event)
/// and its ground truth.
pub fn into_packet(events: &[LabeledEvent], scene: &[SceneObject], geometry: ImageGeometry) -> (EventPacket, GroundTruth) {
    let packet = EventPacket::new(events.iter().map(|e| e.event).collect(), geometry);
    (packet, GroundTruth::new(events, scene))
}

/// Scene sampling rate used for `scene` under `config`.
pub fn sample_rate(scene: &[SceneObject], config: &SimConfig) -> f64 {
    config.sample_rate.unwrap_or_else(|| {
        let v = scene.iter().map(SceneObject::max_speed).fold(0.0, f64::max);
        (10.0 * v).max(1000.0)
    })
}

/// Composite log intensity and front-most object index (1-based, 0 for the
/// background) of every pixel at time `t`.
fn render(scene: &[SceneObject], order: &[usize], geometry: ImageGeometry, t: f64, background: f64, level: &mut [f64], owner: &mut [u32]) {
    for y in 0..geometry.height {
        for x in 0..geometry.width {
            let i = y * geometry.width + x;
            level[i] = background;
            owner[i] = 0;
            for &o in order {
                let obj = &scene[o];
                let p = warp_dt(x as f64, y as f64, t, &obj.motion);
                if let Some(v) = obj.value_at(p) {
                    level[i] = v;
                    owner[i] = o as u32 + 1;
                    break;
                }
            }
        }
    }
}

/// Generates the time-sorted labeled events of `scene`.
///
/// Each pixel keeps the log intensity of its last event; whenever the
/// sampled signal has moved by `C` or more from it, one event per crossed
/// level is emitted with a timestamp interpolated linearly between the two
/// sampling instants. Events take the label of the front-most object visible
/// at either instant. Timestamps are rounded to microseconds.
pub fn simulate(scene: &[SceneObject], config: &SimConfig, geometry: ImageGeometry) -> Result<Vec<LabeledEvent>> {
    config.validate()?;
    if scene.is_empty() {
        return Err(Error::Config("scene needs at least one object".into()));
    }
    for (i, o) in scene.iter().enumerate() {
        if !(o.region.area() > 0.0) {
            return Err(Error::Config(format!("object {} has zero area", i + 1)));
        }
        if !o.motion.is_finite() {
            return Err(Error::Config(format!("object {} has non-finite motion", i + 1)));
        }
    }
    let mut order: Vec<usize> = (0..scene.len()).collect();
    order.sort_by_key(|&o| scene[o].depth_order);

    let c = config.contrast_threshold;
    let tol = 1e-9 * c;
    let rate = sample_rate(scene, config);
    let steps = (config.duration * rate).ceil() as usize;
    let dt = if steps > 0 { config.duration / steps as f64 } else { 0.0 };

    let n = geometry.pixel_count();
    let (mut prev, mut prev_owner) = (vec![0.0; n], vec![0u32; n]);
    let (mut cur, mut cur_owner) = (vec![0.0; n], vec![0u32; n]);
    render(scene, &order, geometry, 0.0, config.background, &mut prev, &mut prev_owner);
    let mut reference = prev.clone();
    let rank = |owner: u32| if owner == 0 { i32::MAX } else { scene[owner as usize - 1].depth_order };

    let mut out = Vec::new();
    for s in 1..=steps {
        let (t0, t1) = ((s - 1) as f64 * dt, s as f64 * dt);
        render(scene, &order, geometry, t1, config.background, &mut cur, &mut cur_owner);
        for i in 0..n {
            let (a, b) = (prev[i], cur[i]);
            if (b - reference[i]).abs() < c - tol {
                continue;
            }
            let label = match (prev_owner[i], cur_owner[i]) {
                (0, o) | (o, 0) => o,
                (p, q) => {
                    if rank(q) < rank(p) {
                        q
                    } else {
                        p
                    }
                }
            };
            let (x, y) = ((i % geometry.width) as f64, (i / geometry.width) as f64);
            let sign = if b > reference[i] { 1.0 } else { -1.0 };
            let polarity = if sign > 0.0 { Polarity::Positive } else { Polarity::Negative };
            while sign * (b - reference[i]) >= c - tol {
                reference[i] += sign * c;
                let frac = if b != a { ((reference[i] - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
                out.push(LabeledEvent {
                    event: Event::new(x, y, t0 + frac * dt, polarity),
                    label,
                });
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_owner, &mut cur_owner);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if config.timestamp_jitter > 0.0 {
        let normal = Normal::new(0.0, config.timestamp_jitter).map_err(|e| Error::Config(e.to_string()))?;
        for e in &mut out {
            e.event.t = (e.event.t + normal.sample(&mut rng)).clamp(0.0, config.duration);
        }
    }
    let expected = config.noise_rate * n as f64 * config.duration;
    if expected > 0.0 {
        let count = Poisson::new(expected).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng) as usize;
        for _ in 0..count {
            let x = rng.random_range(0..geometry.width) as f64;
            let y = rng.random_range(0..geometry.height) as f64;
            let t = rng.random_range(0.0..=config.duration);
            let polarity = if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            out.push(LabeledEvent {
                event: Event::new(x, y, t, polarity),
                label: 0,
            });
        }
    }
    for e in &mut out {
        e.event.t = (e.event.t * 1e6).round() / 1e6;
    }
    out.sort_by(|a, b| a.event.t.total_cmp(&b.event.t));
    Ok(out)
}

/// Two textured rectangles stacked vertically, moving along +x at `base_v`
/// and `base_v + delta_v` px/s. `config.seed` drives the textures.
pub fn preset_two_pebbles(delta_v: f64, base_v: f64, geometry: ImageGeometry, config: &SimConfig) -> Vec<SceneObject> {
    let (w, h) = (geometry.width as f64, geometry.height as f64);
    let (pw, ph) = (0.45 * w, 0.4 * h);
    let top = Rect::new(0.08 * w, 0.06 * h, pw, ph);
    let bottom = Rect::new(0.08 * w, 0.54 * h, pw, ph);
    let seed = config.seed.wrapping_mul(2);
    vec![
        SceneObject::new(Pattern::voronoi(&top, 5.0, 0.8, seed), Shape::Rect, WarpParams::flow(base_v, 0.0), 0, top),
        SceneObject::new(
            Pattern::voronoi(&bottom, 5.0, 0.8, seed + 1),
            Shape::Rect,
            WarpParams::flow(base_v + delta_v, 0.0),
            1,
            bottom,
        ),
    ]
}

/// A textured disc spinning at `omega` rad/s about its center, partly
/// occluded by a smaller textured coin translating along +x at `v` px/s.
pub fn preset_fan_and_coin(omega: f64, v: f64, geometry: ImageGeometry, config: &SimConfig) -> Vec<SceneObject> {
    let (w, h) = (geometry.width as f64, geometry.height as f64);
    let r = 0.4 * h;
    let fan = Rect::new(0.6 * w - r, 0.5 * h - r, 2.0 * r, 2.0 * r);
    let [cx, cy] = fan.center();
    let rc = 0.3 * r;
    let coin = Rect::new(cx - 0.6 * r - rc, cy - 0.3 * r - rc, 2.0 * rc, 2.0 * rc);
    let seed = config.seed.wrapping_mul(2);
    vec![
        SceneObject::new(
            Pattern::voronoi(&fan, 5.0, 0.8, seed),
            Shape::Disc,
            WarpParams::rotation(cx, cy, omega),
            1,
            fan,
        ),
        SceneObject::new(
            Pattern::voronoi(&coin, 4.0, 0.8, seed + 1),
            Shape::Disc,
            WarpParams::flow(v, 0.0),
            0,
            coin,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(w: usize, h: usize) -> ImageGeometry {
        ImageGeometry::new(w, h).unwrap()
    }

    fn edge(level: f64, v: f64, region: Rect) -> SceneObject {
        SceneObject::new(Pattern::Constant(level), Shape::Rect, WarpParams::flow(v, 0.0), 0, region)
    }

    #[test]
    fn static_scene_is_silent() {
        let g = geom(32, 24);
        let cfg = SimConfig::default();
        let scene = preset_two_pebbles(0.0, 0.0, g, &cfg);
        assert!(simulate(&scene, &cfg, g).unwrap().is_empty());
    }

    #[test]
    fn step_of_three_thresholds_gives_three_events() {
        let g = geom(4, 1);
        let cfg = SimConfig {
            contrast_threshold: 0.15,
            duration: 0.1,
            ..SimConfig::default()
        };
        let scene = [edge(0.45, 20.0, Rect::new(-10.0, -1.0, 10.5, 3.0))];
        let events = simulate(&scene, &cfg, g).unwrap();
        let at_one: Vec<_> = events.iter().filter(|e| e.event.x == 1.0).collect();
        assert_eq!(at_one.len(), 3);
        assert!(at_one.iter().all(|e| e.event.polarity == Polarity::Positive && e.label == 1));
        assert_eq!(events.len(), 3 * 2);
    }

    #[test]
    fn zero_area_object_is_rejected() {
        let g = geom(8, 8);
        let scene = [edge(1.0, 1.0, Rect::new(0.0, 0.0, 0.0, 4.0))];
        assert!(matches!(simulate(&scene, &SimConfig::default(), g), Err(Error::Config(_))));
        assert!(matches!(simulate(&[], &SimConfig::default(), g), Err(Error::Config(_))));
    }

    #[test]
    fn two_pebble_ground_truth() {
        let g = geom(64, 48);
        let scene = preset_two_pebbles(60.0, 50.0, g, &SimConfig::default());
        assert_eq!(scene[0].motion.theta(), &[50.0, 0.0]);
        assert_eq!(scene[1].motion.theta(), &[110.0, 0.0]);
    }

    #[test]
    fn events_are_sorted_and_reproducible() {
        let g = geom(48, 32);
        let cfg = SimConfig {
            timestamp_jitter: 1e-4,
            noise_rate: 2.0,
            seed: 7,
            ..SimConfig::default()
        };
        let scene = preset_two_pebbles(60.0, 50.0, g, &cfg);
        let a = simulate(&scene, &cfg, g).unwrap();
        let b = simulate(&scene, &cfg, g).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].event.t <= w[1].event.t));
        assert!(a.iter().any(|e| e.label == 0));
        assert!(a.iter().all(|e| e.label <= 2));
    }

    #[test]
    fn static_coin_leaves_only_fan_events() {
        let g = geom(64, 48);
        let cfg = SimConfig::default();
        let scene = preset_fan_and_coin(3.0, 0.0, g, &cfg);
        let events = simulate(&scene, &cfg, g).unwrap();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| e.label == 1));
        let coin = &scene[1];
        assert!(events.iter().all(|e| coin.value_at([e.event.x, e.event.y]).is_none()));
    }
}
