use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

/// Ground-truth morphology of one procedural galaxy.
///
/// Radii and widths are fractions of the image half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalaxyParams {
    pub ellipticity: f64,
    pub orientation: f64,
    pub bulge_fraction: f64,
    pub has_bar: bool,
    pub bar_strength: f64,
    pub arm_count: u8,
    /// 0 is loosely wound, 1 tightly wound.
    pub winding: f64,
    pub has_ring: bool,
    pub ring_radius: f64,
    pub ring_width: f64,
    /// Peak ring surface brightness.
    pub ring_strength: f64,
    /// Overall flux scale.
    pub brightness: f64,
    pub noise: f64,
}

impl GalaxyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Dataset(m));
        if !(0.0..1.0).contains(&self.ellipticity) {
            return bad(format!("ellipticity {} outside [0, 1)", self.ellipticity));
        }
        if !self.orientation.is_finite() {
            return bad("orientation must be finite".into());
        }
        for (name, v) in [
            ("bulge_fraction", self.bulge_fraction),
            ("bar_strength", self.bar_strength),
            ("winding", self.winding),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if ![0, 2, 4].contains(&self.arm_count) {
            return bad(format!("arm count {} not in {{0, 2, 4}}", self.arm_count));
        }
        if self.has_ring && !(self.ring_width > 0.0 && self.ring_radius > self.ring_width) {
            return bad(format!(
                "ring radius {} must exceed positive width {}",
                self.ring_radius, self.ring_width
            ));
        }
        if !(self.ring_strength >= 0.0 && self.brightness > 0.0) {
            return bad(format!(
                "ring strength {} and brightness {} out of range",
                self.ring_strength, self.brightness
            ));
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return bad(format!("noise {} must be nonnegative", self.noise));
        }
        Ok(())
    }

    /// Random morphology; `ring` forces the ring flag, otherwise it is drawn with `ring_prevalence`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, ring: Option<bool>, ring_prevalence: f64) -> Self {
        let bulge_fraction = rng.random::<f64>();
        let ellipticity = 0.8 * rng.random::<f64>().powf(1.5);
        let orientation = PI * rng.random::<f64>();
        let has_bar = rng.random::<f64>() < 0.35;
        let bar_strength = 0.3 + 0.7 * rng.random::<f64>();
        let spiral = bulge_fraction < 0.65 && rng.random::<f64>() < 0.7;
        let arm_count = if !spiral {
            0
        } else if rng.random::<f64>() < 0.7 {
            2
        } else {
            4
        };
        let winding = rng.random::<f64>();
        let ring_draw = rng.random::<f64>() < ring_prevalence;
        let ring_radius = 0.35 + 0.3 * rng.random::<f64>();
        let ring_width = 0.05 + 0.05 * rng.random::<f64>();
        let ring_strength = 0.06 + 0.2 * rng.random::<f64>();
        let brightness = 0.45 + 0.55 * rng.random::<f64>();
        let noise = 0.02 + 0.06 * rng.random::<f64>();
        Self {
            ellipticity,
            orientation,
            bulge_fraction,
            has_bar,
            bar_strength: if has_bar { bar_strength } else { 0.0 },
            arm_count,
            winding,
            has_ring: ring.unwrap_or(ring_draw),
            ring_radius,
            ring_width,
            ring_strength,
            brightness,
            noise,
        }
    }

    /// Elliptical radius and angle of pixel `(y, x)` in an image of side `size`.
    pub fn elliptical_coords(&self, size: usize, y: usize, x: usize) -> (f64, f64) {
        let half = size as f64 / 2.0;
        let dx = (x as f64 + 0.5 - half) / half;
        let dy = (y as f64 + 0.5 - half) / half;
        let (s, c) = self.orientation.sin_cos();
        let u = dx * c + dy * s;
        let v = (-dx * s + dy * c) / (1.0 - self.ellipticity);
        ((u * u + v * v).sqrt(), v.atan2(u))
    }
}

type Rgb = [f64; 3];

const BULGE: Rgb = [1.0, 0.8, 0.55];
const DISK: Rgb = [0.75, 0.85, 1.0];
const ARMS: Rgb = [0.6, 0.8, 1.0];
const BAR: Rgb = [1.0, 0.85, 0.65];
const RING: Rgb = [0.55, 0.75, 1.0];

fn components(p: &GalaxyParams, size: usize, y: usize, x: usize) -> [(f64, Rgb); 5] {
    let (r, theta) = p.elliptical_coords(size, y, x);
    let bulge = p.bulge_fraction * (-3.0 * (r / 0.12).sqrt()).exp();
    let disk = (1.0 - p.bulge_fraction) * 0.8 * (-r / 0.3).exp();
    let arms = if p.arm_count > 0 && r > 0.0 {
        let pitch = (10.0 + 30.0 * (1.0 - p.winding)).to_radians();
        let phase = f64::from(p.arm_count) * (theta - r.ln() / pitch.tan());
        let envelope = (-r / 0.4).exp() * (1.0 - (-(r / 0.12).powi(2)).exp());
        0.6 * (1.0 - p.bulge_fraction) * envelope * ((1.0 + phase.cos()) / 2.0).powi(3)
    } else {
        0.0
    };
    let bar = if p.has_bar {
        let (s, c) = p.orientation.sin_cos();
        let half = size as f64 / 2.0;
        let dx = (x as f64 + 0.5 - half) / half;
        let dy = (y as f64 + 0.5 - half) / half;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        0.7 * p.bar_strength * (-(u / 0.35).powi(2) - (v / 0.07).powi(2)).exp()
    } else {
        0.0
    };
    let ring = if p.has_ring {
        p.ring_strength * (-0.5 * ((r - p.ring_radius) / p.ring_width).powi(2)).exp()
    } else {
        0.0
    };
    [(bulge, BULGE), (disk, DISK), (arms, ARMS), (bar, BAR), (ring, RING)]
}

/// Renders `params` as a `3 × size × size` image in [0, 1].
pub fn generate_galaxy<R: Rng + ?Sized>(params: &GalaxyParams, size: usize, rng: &mut R) -> Result<Image> {
    params.validate()?;
    if size == 0 {
        return Err(Error::Dataset("image size must be positive".into()));
    }
    let n = size * size;
    let mut data = vec![0f32; 3 * n];
    let noise = (params.noise > 0.0).then(|| Normal::new(0.0, params.noise).expect("positive sigma"));
    for y in 0..size {
        for x in 0..size {
            let parts = components(params, size, y, x);
            for c in 0..3 {
                let mut v: f64 = params.brightness * parts.iter().map(|(amp, rgb)| amp * rgb[c]).sum::<f64>();
                if let Some(d) = &noise {
                    v += d.sample(rng);
                }
                data[c * n + y * size + x] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }
    Image::new(size, size, data)
}
