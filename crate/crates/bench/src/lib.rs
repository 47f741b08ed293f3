//! Fixtures shared by the solver benchmarks.

use motionseg::experiments::random_packet;
use motionseg::sim::{into_packet, preset_two_pebbles};
use motionseg::{simulate, AssociationMatrix, ClusterSet, EventPacket, GroundTruth, ImageGeometry, SimConfig, WarpParams};

pub fn geometry() -> ImageGeometry {
    ImageGeometry::new(96, 72).expect("valid geometry")
}

/// Two-pebble window spanning `displacement_px` of relative motion at
/// `delta_v` px/s.
pub fn two_pebbles(delta_v: f64, displacement_px: f64) -> (EventPacket, GroundTruth) {
    let sim = SimConfig {
        duration: displacement_px / delta_v,
        ..SimConfig::default()
    };
    let scene = preset_two_pebbles(delta_v, 50.0, geometry(), &sim);
    let events = simulate(&scene, &sim, geometry()).expect("preset scene simulates");
    into_packet(&events, &scene, geometry())
}

/// Content-independent load of `n` uniform events.
pub fn uniform(n: usize) -> EventPacket {
    random_packet(n, geometry(), 3)
}

/// `j` flow clusters fanned over directions with uniform associations.
pub fn fan(n: usize, j: usize) -> (ClusterSet, AssociationMatrix) {
    let params = (0..j)
        .map(|c| {
            let a = std::f64::consts::TAU * c as f64 / j as f64;
            WarpParams::flow(40.0 * a.cos(), 40.0 * a.sin())
        })
        .collect();
    (ClusterSet::new(params), AssociationMatrix::uniform(n, j))
}
