//! Warp/accumulate/blur kernels shared by the segmentation methods, with a
//! running count of IWE accumulations.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::event::{EventPacket, ImageGeometry};
use crate::iwe::{sample_pixels, splat, variance_of, GaussianKernel, Voting};
use crate::solver::config::SolverConfig;
use crate::warp::{warp_dt, WarpParams, MAX_PARAMS};

pub(crate) struct Kernels {
    xs: Vec<f64>,
    ys: Vec<f64>,
    dts: Vec<f64>,
    pub geometry: ImageGeometry,
    pub span: f64,
    radius: f64,
    voting: Voting,
    parallel: bool,
    warps: AtomicU64,
}

impl Kernels {
    pub fn new(packet: &EventPacket, config: &SolverConfig) -> Self {
        let geometry = packet.geometry;
        Self {
            xs: packet.events.iter().map(|e| e.x).collect(),
            ys: packet.events.iter().map(|e| e.y).collect(),
            dts: packet.events.iter().map(|e| e.t - packet.t_ref).collect(),
            geometry,
            span: packet.span(),
            radius: 0.25 * (geometry.width + geometry.height) as f64,
            voting: config.voting,
            parallel: config.parallel,
            warps: AtomicU64::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn warps(&self) -> u64 {
        self.warps.load(Ordering::Relaxed)
    }

    pub fn levers(&self, params: &WarpParams) -> [f64; MAX_PARAMS] {
        params.displacement_levers(self.span, self.radius)
    }

    pub fn warp(&self, params: &WarpParams) -> Vec<[f64; 2]> {
        (0..self.len()).map(|k| warp_dt(self.xs[k], self.ys[k], self.dts[k], params)).collect()
    }

    /// Warped positions plus the blurred IWE; `weights = None` is unweighted.
    pub fn image(&self, params: &WarpParams, weights: Option<&[f64]>, kernel: &GaussianKernel) -> (Vec<[f64; 2]>, Vec<f64>) {
        let warped = self.warp(params);
        let raw = self.accumulate(&warped, weights);
        (warped, self.blur(raw, kernel))
    }

    pub fn accumulate(&self, warped: &[[f64; 2]], weights: Option<&[f64]>) -> Vec<f64> {
        self.warps.fetch_add(1, Ordering::Relaxed);
        let mut pixels = vec![0.0; self.geometry.pixel_count()];
        match weights {
            Some(w) => {
                for (p, &wk) in warped.iter().zip(w) {
                    if wk != 0.0 {
                        splat(&mut pixels, self.geometry, p[0], p[1], wk, self.voting);
                    }
                }
            }
            None => {
                for p in warped {
                    splat(&mut pixels, self.geometry, p[0], p[1], 1.0, self.voting);
                }
            }
        }
        pixels
    }

    fn blur(&self, raw: Vec<f64>, kernel: &GaussianKernel) -> Vec<f64> {
        if kernel.is_identity() {
            return raw;
        }
        let mut out = vec![0.0; raw.len()];
        let mut scratch = Vec::new();
        kernel.apply(&raw, &mut out, &mut scratch, self.geometry);
        out
    }

    /// Contrast of the blurred (weighted) IWE without keeping the warp.
    pub fn contrast(&self, params: &WarpParams, weights: Option<&[f64]>, kernel: &GaussianKernel) -> f64 {
        self.warps.fetch_add(1, Ordering::Relaxed);
        let mut pixels = vec![0.0; self.geometry.pixel_count()];
        for k in 0..self.len() {
            let w = weights.map_or(1.0, |w| w[k]);
            if w != 0.0 {
                let p = warp_dt(self.xs[k], self.ys[k], self.dts[k], params);
                splat(&mut pixels, self.geometry, p[0], p[1], w, self.voting);
            }
        }
        variance_of(&self.blur(pixels, kernel))
    }

    pub fn sample(&self, image: &[f64], warped: &[[f64; 2]]) -> Vec<f64> {
        warped.iter().map(|p| sample_pixels(image, self.geometry, p[0], p[1])).collect()
    }

    /// Maps `f` over `0..n`, on the rayon pool when parallel evaluation is on.
    /// Output order never depends on scheduling.
    pub fn map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        if self.parallel && n > 1 {
            (0..n).into_par_iter().map(f).collect()
        } else {
            (0..n).map(f).collect()
        }
    }
}
