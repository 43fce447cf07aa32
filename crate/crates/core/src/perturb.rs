//! Pixel-level perturbation kernels.
//!
//! All kernels are pure functions of the input image, the severity and (for
//! the noise kernels) the state of the [`RandomStream`] they are handed.
//! Elements are visited in row-major, channel-minor order, which fixes the
//! order in which random draws are consumed.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, CHANNELS};
use crate::rng::{RandomStream, UNIT_EPSILON};

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("{kind} severity {severity} is outside {range}")]
    SeverityOutOfRange {
        kind: PerturbationKind,
        severity: f64,
        range: &'static str,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    SaltPepper,
    Gaussian,
    Rotation,
}

impl PerturbationKind {
    /// Two-letter code used in condition labels (rotation uses `RL`/`RR`).
    pub fn code(self) -> &'static str {
        match self {
            PerturbationKind::SaltPepper => "SP",
            PerturbationKind::Gaussian => "GA",
            PerturbationKind::Rotation => "RO",
        }
    }

    fn check(self, severity: f64) -> Result<(), PerturbError> {
        let (ok, range) = match self {
            PerturbationKind::SaltPepper => ((0.0..=1.0).contains(&severity), "[0, 1]"),
            PerturbationKind::Gaussian => (severity >= 0.0 && severity.is_finite(), "[0, inf)"),
            PerturbationKind::Rotation => ((-360.0..=360.0).contains(&severity), "[-360, 360]"),
        };
        if ok {
            Ok(())
        } else {
            Err(PerturbError::SeverityOutOfRange {
                kind: self,
                severity,
                range,
            })
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PerturbationKind::SaltPepper => "salt & pepper",
            PerturbationKind::Gaussian => "gaussian",
            PerturbationKind::Rotation => "rotation",
        };
        f.write_str(name)
    }
}

/// One atomic corruption.
///
/// `severity` is the flip density for salt & pepper, the variance on the
/// `[0, 1]` intensity scale for Gaussian noise, and degrees for rotation
/// (negative = counterclockwise).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub severity: f64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, severity: f64) -> Result<Self, PerturbError> {
        kind.check(severity)?;
        Ok(Self { kind, severity })
    }

    pub fn salt_pepper(density: f64) -> Result<Self, PerturbError> {
        Self::new(PerturbationKind::SaltPepper, density)
    }

    pub fn gaussian(variance: f64) -> Result<Self, PerturbError> {
        Self::new(PerturbationKind::Gaussian, variance)
    }

    pub fn rotation(degrees: f64) -> Result<Self, PerturbError> {
        Self::new(PerturbationKind::Rotation, degrees)
    }

    pub fn is_identity(&self) -> bool {
        self.severity == 0.0
    }

    pub fn apply(&self, img: &Image, stream: &mut RandomStream) -> Result<Image, PerturbError> {
        match self.kind {
            PerturbationKind::SaltPepper => salt_pepper(img, self.severity, stream),
            PerturbationKind::Gaussian => gaussian_noise(img, self.severity, stream),
            PerturbationKind::Rotation => {
                self.kind.check(self.severity)?;
                Ok(rotate(img, self.severity))
            }
        }
    }
}

/// Replaces each channel element with 0 or 255 with probability `density`.
///
/// Every element consumes one Bernoulli draw; a replaced element consumes a
/// second draw for the coin (`< 0.5` is pepper).
pub fn salt_pepper(
    img: &Image,
    density: f64,
    stream: &mut RandomStream,
) -> Result<Image, PerturbError> {
    PerturbationKind::SaltPepper.check(density)?;
    let mut out = img.clone();
    for value in out.data_mut() {
        if stream.next_f64() < density {
            *value = if stream.next_f64() < 0.5 { 0 } else { 255 };
        }
    }
    Ok(out)
}

/// Box-Muller pair from two uniform draws. `u1 == 0` is remapped to 2^-53.
#[inline]
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let u1 = if u1 == 0.0 { UNIT_EPSILON } else { u1 };
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Additive zero-mean Gaussian noise of the given variance on the `[0, 1]`
/// intensity scale, clamped.
pub fn gaussian_noise(
    img: &Image,
    variance: f64,
    stream: &mut RandomStream,
) -> Result<Image, PerturbError> {
    PerturbationKind::Gaussian.check(variance)?;
    let sigma = variance.sqrt();
    let mut out = img.clone();
    for pair in out.data_mut().chunks_mut(2) {
        let u1 = stream.next_f64();
        let u2 = stream.next_f64();
        let (z1, z2) = box_muller(u1, u2);
        for (value, z) in pair.iter_mut().zip([z1, z2]) {
            let x = f64::from(*value) / 255.0 + sigma * z;
            *value = to_byte(x.clamp(0.0, 1.0) * 255.0);
        }
    }
    Ok(out)
}

#[inline]
fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90.
fn sin_cos_deg(degrees: f64) -> (f64, f64) {
    let reduced = degrees.rem_euclid(360.0);
    if reduced % 90.0 == 0.0 {
        return match (reduced / 90.0) as u32 {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    reduced.to_radians().sin_cos()
}

/// Rotates about the image center, keeping the original frame.
///
/// Positive angles turn the content clockwise on screen (raster `y` grows
/// downward). Each output pixel is bilinearly sampled at its inverse-rotated
/// position; taps that fall outside the source read as black.
pub fn rotate(img: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (sin, cos) = sin_cos_deg(degrees);
    let cx = (w - 1) as f64 * 0.5;
    let cy = (h - 1) as f64 * 0.5;
    let src = img.data();
    let mut out = Image::filled(img.width(), img.height(), 0).expect("same shape as input");

    let tap = |x: i64, y: i64, c: usize| -> f64 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            f64::from(src[(y * w + x) as usize * CHANNELS + c])
        }
    };

    let dst = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            if sx <= -1.0 || sy <= -1.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let base = (y * w + x) as usize * CHANNELS;
            for c in 0..CHANNELS {
                let top = tap(x0, y0, c) * (1.0 - fx) + tap(x0 + 1, y0, c) * fx;
                let bottom = tap(x0, y0 + 1, c) * (1.0 - fx) + tap(x0 + 1, y0 + 1, c) * fx;
                dst[base + c] = to_byte(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}

/// Applies `specs` left to right, threading one stream through every noise step.
pub fn apply_sequence(
    img: &Image,
    specs: &[PerturbationSpec],
    stream: &mut RandomStream,
) -> Result<Image, PerturbError> {
    let mut current = img.clone();
    for spec in specs {
        current = spec.apply(&current, stream)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use proptest::prelude::*;

    fn textured(width: u32, height: u32) -> Image {
        let data = (0..width * height * 3)
            .map(|i| ((i * 37 + (i / 3) * 11) % 256) as u8)
            .collect();
        Image::new(width, height, data).unwrap()
    }

    #[test]
    fn zero_density_is_identity() {
        let img = textured(16, 9);
        let out = salt_pepper(&img, 0.0, &mut derive_stream(1, 1, 0)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_density_saturates_every_element() {
        let img = textured(16, 9);
        let out = salt_pepper(&img, 1.0, &mut derive_stream(1, 1, 0)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0 || v == 255));
        assert!(out.data().contains(&0));
        assert!(out.data().contains(&255));
    }

    #[test]
    fn severity_ranges_are_enforced() {
        let img = textured(4, 4);
        let mut rng = derive_stream(0, 0, 0);
        assert!(salt_pepper(&img, 1.01, &mut rng).is_err());
        assert!(salt_pepper(&img, -0.1, &mut rng).is_err());
        assert!(gaussian_noise(&img, -1e-3, &mut rng).is_err());
        assert!(PerturbationSpec::rotation(400.0).is_err());
        assert!(PerturbationSpec::rotation(-360.0).is_ok());
    }

    #[test]
    fn zero_variance_is_identity() {
        let img = textured(16, 9);
        let out = gaussian_noise(&img, 0.0, &mut derive_stream(1, 1, 0)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn box_muller_closed_form() {
        // sqrt(-2 ln e^-2) = 2; angle pi/2.
        let (z1, z2) = box_muller((-2.0f64).exp(), 0.25);
        assert!(z1.abs() < 1e-12);
        assert!((z2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_muller_guards_zero() {
        let (z1, z2) = box_muller(0.0, 0.0);
        assert!(z1.is_finite() && z2.is_finite());
        assert!((z1 - (-2.0 * UNIT_EPSILON.ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rotation_by_zero_is_identity() {
        let img = textured(13, 7);
        assert_eq!(rotate(&img, 0.0), img);
    }

    #[test]
    fn quarter_turn_moves_top_center_to_right_center() {
        let mut img = Image::filled(33, 33, 0).unwrap();
        img.set_pixel(16, 0, [255, 255, 255]);
        let out = rotate(&img, 90.0);
        assert_eq!(out.pixel(32, 16), [255, 255, 255]);
        let lit = out.data().chunks(3).filter(|p| p[0] > 0).count();
        assert_eq!(lit, 1);

        let out = rotate(&img, -90.0);
        assert_eq!(out.pixel(0, 16), [255, 255, 255]);
    }

    #[test]
    fn half_turn_on_odd_square_is_a_point_reflection() {
        let img = textured(9, 9);
        let out = rotate(&img, 180.0);
        for y in 0..9 {
            for x in 0..9 {
                assert_eq!(out.pixel(x, y), img.pixel(8 - x, 8 - y));
            }
        }
    }

    #[test]
    fn diagonal_rotation_blackens_the_corners() {
        let img = Image::filled(64, 64, 255).unwrap();
        let out = rotate(&img, 45.0);
        let black = out.data().chunks(3).filter(|p| p == &[0, 0, 0]).count();
        let fraction = black as f64 / (64.0 * 64.0);
        let expected = 1.0 - 2.0 * (2f64.sqrt() - 1.0);
        assert!((fraction - expected).abs() <= 0.02, "fraction {fraction}");
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
        assert_eq!(out.pixel(32, 32), [255, 255, 255]);
    }

    #[test]
    fn empty_sequence_is_identity() {
        let img = textured(8, 8);
        let out = apply_sequence(&img, &[], &mut derive_stream(3, 4, 5)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn single_step_sequence_matches_kernel() {
        let img = textured(8, 8);
        let spec = PerturbationSpec::salt_pepper(0.1).unwrap();
        let via_sequence = apply_sequence(&img, &[spec], &mut derive_stream(3, 4, 5)).unwrap();
        let direct = salt_pepper(&img, 0.1, &mut derive_stream(3, 4, 5)).unwrap();
        assert_eq!(via_sequence, direct);
    }

    #[test]
    fn sequence_order_matters() {
        let img = textured(32, 32);
        let sp = PerturbationSpec::salt_pepper(0.2).unwrap();
        let ga = PerturbationSpec::gaussian(0.1).unwrap();
        let a = apply_sequence(&img, &[sp, ga], &mut derive_stream(9, 9, 9)).unwrap();
        let b = apply_sequence(&img, &[ga, sp], &mut derive_stream(9, 9, 9)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn sequence_threads_one_stream() {
        let img = textured(8, 8);
        let sp = PerturbationSpec::salt_pepper(0.3).unwrap();
        let ga = PerturbationSpec::gaussian(0.05).unwrap();
        let mut rng = derive_stream(1, 2, 3);
        let first = salt_pepper(&img, 0.3, &mut rng).unwrap();
        let manual = gaussian_noise(&first, 0.05, &mut rng).unwrap();
        let chained = apply_sequence(&img, &[sp, ga], &mut derive_stream(1, 2, 3)).unwrap();
        assert_eq!(chained, manual);
    }

    proptest! {
        #[test]
        fn salt_pepper_only_touches_to_extremes(seed in any::<u64>(), density in 0.0f64..=1.0) {
            let img = textured(12, 10);
            let out = salt_pepper(&img, density, &mut derive_stream(seed, 1, 0)).unwrap();
            for (&before, &after) in img.data().iter().zip(out.data()) {
                prop_assert!(after == before || after == 0 || after == 255);
            }
        }

        #[test]
        fn rotation_preserves_shape(w in 1u32..24, h in 1u32..24, deg in -360.0f64..360.0) {
            let img = textured(w, h);
            let out = rotate(&img, deg);
            prop_assert_eq!(out.width(), w);
            prop_assert_eq!(out.height(), h);
            prop_assert_eq!(out.data().len(), img.data().len());
        }

        #[test]
        fn kernels_are_deterministic(seed in any::<u64>(), var in 0.0f64..0.3) {
            let img = textured(10, 10);
            let a = gaussian_noise(&img, var, &mut derive_stream(seed, 2, 1)).unwrap();
            let b = gaussian_noise(&img, var, &mut derive_stream(seed, 2, 1)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
