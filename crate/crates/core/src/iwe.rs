//! Images of warped events (IWE) and the contrast functionals evaluated on them.

use crate::error::{Error, Result};
use crate::event::ImageGeometry;

/// How a warped event deposits its weight onto the pixel lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Voting {
    #[default]
    Bilinear,
    Nearest,
}

/// Accumulation image of warped events. Pixels are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwe {
    pub pixels: Vec<f64>,
    pub geometry: ImageGeometry,
    pub total_mass: f64,
}

impl Iwe {
    pub fn zeros(geometry: ImageGeometry) -> Self {
        Self {
            pixels: vec![0.0; geometry.pixel_count()],
            geometry,
            total_mass: 0.0,
        }
    }

    pub fn from_pixels(pixels: Vec<f64>, geometry: ImageGeometry) -> Self {
        assert_eq!(pixels.len(), geometry.pixel_count());
        let total_mass = pixels.iter().sum();
        Self {
            pixels,
            geometry,
            total_mass,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.geometry.width + x]
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    /// Binary 8-bit PGM, scaled so the brightest pixel is 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let ImageGeometry { width, height } = self.geometry;
        let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
        let max = self.max();
        let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
        out.extend(self.pixels.iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
        out
    }
}

#[inline]
pub(crate) fn splat(pixels: &mut [f64], geometry: ImageGeometry, x: f64, y: f64, w: f64, voting: Voting) {
    let (width, height) = (geometry.width as isize, geometry.height as isize);
    match voting {
        Voting::Bilinear => {
            let fx = x.floor();
            let fy = y.floor();
            let (x0, y0) = (fx as isize, fy as isize);
            if x0 < -1 || y0 < -1 || x0 >= width || y0 >= height {
                return;
            }
            let (ax, ay) = (x - fx, y - fy);
            let corners = [
                (x0, y0, (1.0 - ax) * (1.0 - ay)),
                (x0 + 1, y0, ax * (1.0 - ay)),
                (x0, y0 + 1, (1.0 - ax) * ay),
                (x0 + 1, y0 + 1, ax * ay),
            ];
            for (cx, cy, k) in corners {
                if cx >= 0 && cy >= 0 && cx < width && cy < height {
                    pixels[cy as usize * geometry.width + cx as usize] += w * k;
                }
            }
        }
        Voting::Nearest => {
            let (cx, cy) = (x.round() as isize, y.round() as isize);
            if cx >= 0 && cy >= 0 && cx < width && cy < height {
                pixels[cy as usize * geometry.width + cx as usize] += w;
            }
        }
    }
}

/// Weighted IWE: every event deposits its weight by bilinear voting. Events
/// (or the parts of their footprint) outside the image deposit nothing.
pub fn accumulate_weighted(warped: &[[f64; 2]], weights: &[f64], geometry: ImageGeometry) -> Result<Iwe> {
    accumulate_weighted_with(warped, weights, geometry, Voting::Bilinear)
}

pub fn accumulate_weighted_with(warped: &[[f64; 2]], weights: &[f64], geometry: ImageGeometry, voting: Voting) -> Result<Iwe> {
    if warped.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} warped points but {} weights",
            warped.len(),
            weights.len()
        )));
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::NegativeWeight { index, value });
    }
    let mut pixels = vec![0.0; geometry.pixel_count()];
    for (p, &w) in warped.iter().zip(weights) {
        splat(&mut pixels, geometry, p[0], p[1], w, voting);
    }
    Ok(Iwe::from_pixels(pixels, geometry))
}

/// Unweighted IWE (every event weighs one).
pub fn accumulate_unweighted(warped: &[[f64; 2]], geometry: ImageGeometry) -> Iwe {
    let mut pixels = vec![0.0; geometry.pixel_count()];
    for p in warped {
        splat(&mut pixels, geometry, p[0], p[1], 1.0, Voting::Bilinear);
    }
    Iwe::from_pixels(pixels, geometry)
}

/// Normalized, truncated 1-D Gaussian (radius `ceil(3 sigma)`).
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Self {
        assert!(sigma >= 0.0, "sigma must be non-negative");
        if sigma == 0.0 {
            return Self { taps: vec![1.0] };
        }
        let radius = (3.0 * sigma).ceil() as i64;
        let mut taps: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Self { taps }
    }

    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn is_identity(&self) -> bool {
        self.taps.len() == 1
    }

    /// Separable convolution with zero padding; `scratch` is resized as needed.
    pub fn apply(&self, src: &[f64], dst: &mut [f64], scratch: &mut Vec<f64>, geometry: ImageGeometry) {
        let ImageGeometry { width, height } = geometry;
        if self.is_identity() {
            dst.copy_from_slice(src);
            return;
        }
        let r = self.radius() as isize;
        scratch.clear();
        scratch.resize(src.len(), 0.0);
        for y in 0..height {
            let row = &src[y * width..(y + 1) * width];
            let out = &mut scratch[y * width..(y + 1) * width];
            for (x, o) in out.iter_mut().enumerate() {
                let lo = (x as isize - r).max(0) as usize;
                let hi = (x as isize + r).min(width as isize - 1) as usize;
                let taps = &self.taps[(lo as isize - x as isize + r) as usize..];
                let mut acc = 0.0;
                for (v, t) in row[lo..=hi].iter().zip(taps) {
                    acc += v * t;
                }
                *o = acc;
            }
        }
        for y in 0..height {
            let lo = (y as isize - r).max(0) as usize;
            let hi = (y as isize + r).min(height as isize - 1) as usize;
            let out = &mut dst[y * width..(y + 1) * width];
            out.iter_mut().for_each(|v| *v = 0.0);
            for yy in lo..=hi {
                let k = self.taps[(yy as isize - y as isize + r) as usize];
                let row = &scratch[yy * width..(yy + 1) * width];
                for (o, &v) in out.iter_mut().zip(row) {
                    *o += k * v;
                }
            }
        }
    }
}

/// Gaussian blur. Mass is preserved except what leaks past the border.
pub fn smooth(iwe: &Iwe, sigma: f64) -> Iwe {
    let kernel = GaussianKernel::new(sigma);
    let mut out = vec![0.0; iwe.pixels.len()];
    let mut scratch = Vec::new();
    kernel.apply(&iwe.pixels, &mut out, &mut scratch, iwe.geometry);
    Iwe::from_pixels(out, iwe.geometry)
}

/// Population variance of the pixel values.
pub fn variance_contrast(iwe: &Iwe) -> f64 {
    variance_of(&iwe.pixels)
}

pub(crate) fn variance_of(pixels: &[f64]) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    let n = pixels.len() as f64;
    let mean = pixels.iter().sum::<f64>() / n;
    pixels.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Bilinear interpolation of the image at fractional coordinates; samples
/// outside the image read as zero. This is the adjoint of bilinear voting.
pub fn sample_local(iwe: &Iwe, x: [f64; 2]) -> f64 {
    sample_pixels(&iwe.pixels, iwe.geometry, x[0], x[1])
}

#[inline]
pub(crate) fn sample_pixels(pixels: &[f64], geometry: ImageGeometry, x: f64, y: f64) -> f64 {
    let (width, height) = (geometry.width as isize, geometry.height as isize);
    let fx = x.floor();
    let fy = y.floor();
    let (x0, y0) = (fx as isize, fy as isize);
    if x0 < -1 || y0 < -1 || x0 >= width || y0 >= height {
        return 0.0;
    }
    let (ax, ay) = (x - fx, y - fy);
    let corners = [
        (x0, y0, (1.0 - ax) * (1.0 - ay)),
        (x0 + 1, y0, ax * (1.0 - ay)),
        (x0, y0 + 1, (1.0 - ax) * ay),
        (x0 + 1, y0 + 1, ax * ay),
    ];
    let mut acc = 0.0;
    for (cx, cy, k) in corners {
        if cx >= 0 && cy >= 0 && cx < width && cy < height {
            acc += k * pixels[cy as usize * geometry.width + cx as usize];
        }
    }
    acc
}
