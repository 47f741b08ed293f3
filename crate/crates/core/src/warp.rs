//! Parametric warps that transport an event back to the packet reference time.
//!
//! All models satisfy `x' = x` at `t = t_ref`. Parameters are in native units:
//! px/s for translation, px for a rotation center, rad/s for angular rate and
//! 1/s for the scale rate.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::Error;
use crate::event::{EventPacket, ImageGeometry};

pub const MAX_PARAMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WarpModel {
    /// Constant optical flow `(v_x, v_y)`.
    Flow2,
    /// In-plane rotation `(c_x, c_y, omega)` about a free center.
    Rotation,
    /// `(v_x, v_y, omega, s)`: translation, rotation and exponential scale
    /// about the image center.
    FourDof,
}

impl WarpModel {
    pub fn param_count(self) -> usize {
        match self {
            WarpModel::Flow2 => 2,
            WarpModel::Rotation => 3,
            WarpModel::FourDof => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WarpModel::Flow2 => "flow2",
            WarpModel::Rotation => "rotation",
            WarpModel::FourDof => "fourdof",
        }
    }
}

impl fmt::Display for WarpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarpModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flow2" | "flow" => Ok(WarpModel::Flow2),
            "rotation" | "rot" => Ok(WarpModel::Rotation),
            "fourdof" | "4dof" => Ok(WarpModel::FourDof),
            other => Err(Error::Config(format!("unknown motion model '{other}'"))),
        }
    }
}

/// Motion parameters of one cluster.
///
/// `pivot` is the fixed scale/rotation origin of [`WarpModel::FourDof`]
/// (normally the image center) and is ignored by the other models.
/// Parameters flagged in `frozen` are held constant by the optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpParams {
    pub model: WarpModel,
    theta: [f64; MAX_PARAMS],
    pub pivot: [f64; 2],
    pub frozen: [bool; MAX_PARAMS],
}

impl WarpParams {
    /// Panics if `theta` does not have exactly `model.param_count()` entries.
    pub fn new(model: WarpModel, theta: &[f64]) -> Self {
        assert_eq!(theta.len(), model.param_count(), "{model} takes {} parameters", model.param_count());
        let mut t = [0.0; MAX_PARAMS];
        t[..theta.len()].copy_from_slice(theta);
        Self {
            model,
            theta: t,
            pivot: [0.0, 0.0],
            frozen: [false; MAX_PARAMS],
        }
    }

    /// Zero motion. Rotation clusters start centered in the image.
    pub fn zero(model: WarpModel, geometry: ImageGeometry) -> Self {
        let c = geometry.center();
        let p = match model {
            WarpModel::Flow2 => Self::new(model, &[0.0, 0.0]),
            WarpModel::Rotation => Self::new(model, &[c[0], c[1], 0.0]),
            WarpModel::FourDof => Self::new(model, &[0.0; 4]),
        };
        p.with_pivot(c)
    }

    pub fn flow(vx: f64, vy: f64) -> Self {
        Self::new(WarpModel::Flow2, &[vx, vy])
    }

    pub fn rotation(cx: f64, cy: f64, omega: f64) -> Self {
        Self::new(WarpModel::Rotation, &[cx, cy, omega])
    }

    pub fn with_pivot(mut self, pivot: [f64; 2]) -> Self {
        self.pivot = pivot;
        self
    }

    /// Freezes the rotation center so only the angular rate is optimized.
    pub fn with_frozen_center(mut self) -> Self {
        if self.model == WarpModel::Rotation {
            self.frozen[0] = true;
            self.frozen[1] = true;
        }
        self
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta[..self.model.param_count()]
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        let n = self.model.param_count();
        &mut self.theta[..n]
    }

    pub fn is_finite(&self) -> bool {
        self.theta().iter().all(|v| v.is_finite())
    }

    /// Indices of parameters the optimizers may change.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.model.param_count()).filter(|&i| !self.frozen[i])
    }

    /// Pixels of displacement produced by a unit change of each parameter over
    /// a packet spanning `span` seconds, for image structure at distance
    /// `radius` from the rotation/scale origin. Used to express steps and
    /// search grids in pixels.
    pub fn displacement_levers(&self, span: f64, radius: f64) -> [f64; MAX_PARAMS] {
        let span = span.max(1e-9);
        match self.model {
            WarpModel::Flow2 => [span, span, 0.0, 0.0],
            WarpModel::Rotation => {
                let c = (self.theta[2].abs() * span).max(0.05);
                [c, c, span * radius, 0.0]
            }
            WarpModel::FourDof => [span, span, span * radius, span * radius],
        }
    }

    /// Time-shift to a later packet. Every supported model has constant rates
    /// and a fixed origin, so the parameters carry over unchanged.
    pub fn propagate(&self, _dt: f64) -> Self {
        *self
    }
}

impl fmt::Display for WarpParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.model)?;
        for v in self.theta() {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

#[inline]
fn rotate(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Transports a point observed at time `t` to its position at `t_ref`.
#[inline]
pub fn warp_point(x: [f64; 2], t: f64, params: &WarpParams, t_ref: f64) -> [f64; 2] {
    warp_dt(x[0], x[1], t - t_ref, params)
}

#[inline]
pub(crate) fn warp_dt(x: f64, y: f64, dt: f64, params: &WarpParams) -> [f64; 2] {
    if dt == 0.0 {
        return [x, y];
    }
    let th = &params.theta;
    match params.model {
        WarpModel::Flow2 => [x - dt * th[0], y - dt * th[1]],
        WarpModel::Rotation if th[2] == 0.0 => [x, y],
        WarpModel::Rotation => {
            let (cx, cy) = (th[0], th[1]);
            let (rx, ry) = rotate(x - cx, y - cy, -th[2] * dt);
            [cx + rx, cy + ry]
        }
        WarpModel::FourDof if th[2] == 0.0 && th[3] == 0.0 => [x - dt * th[0], y - dt * th[1]],
        WarpModel::FourDof => {
            let [ox, oy] = params.pivot;
            let scale = (-th[3] * dt).exp();
            let (rx, ry) = rotate(x - ox, y - oy, -th[2] * dt);
            [ox + scale * rx - dt * th[0], oy + scale * ry - dt * th[1]]
        }
    }
}

/// Warps every event of the packet to `packet.t_ref`, preserving order.
pub fn warp_packet(packet: &EventPacket, params: &WarpParams) -> Vec<[f64; 2]> {
    packet.events.iter().map(|e| warp_point([e.x, e.y], e.t, params, packet.t_ref)).collect()
}

/// Data-parallel [`warp_packet`]; the output is element-wise identical.
pub fn warp_packet_par(packet: &EventPacket, params: &WarpParams) -> Vec<[f64; 2]> {
    packet
        .events
        .par_iter()
        .map(|e| warp_point([e.x, e.y], e.t, params, packet.t_ref))
        .collect()
}

/// Central finite-difference Jacobian of the warped point with respect to
/// each parameter. Row `i` holds `(dx'/d theta_i, dy'/d theta_i)`.
pub fn numeric_warp_jacobian(x: [f64; 2], t: f64, params: &WarpParams, t_ref: f64, h: f64) -> Vec<[f64; 2]> {
    assert!(h > 0.0, "perturbation must be positive");
    (0..params.model.param_count())
        .map(|i| {
            let mut plus = *params;
            let mut minus = *params;
            plus.theta[i] += h;
            minus.theta[i] -= h;
            let a = warp_point(x, t, &plus, t_ref);
            let b = warp_point(x, t, &minus, t_ref);
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
        })
        .collect()
}
