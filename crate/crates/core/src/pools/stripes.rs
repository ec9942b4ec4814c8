use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub type Rgb = [f64; 3];

/// Parameters of one S-shaped stripe image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripeParams {
    /// Stripe orientation in radians.
    pub theta: f64,
    /// Stripe width in pixels, > 1.
    pub width: f64,
    /// Bend amplitude in pixels.
    pub amplitude: f64,
    /// Bend frequency in cycles per image width.
    pub frequency: f64,
    pub phase_offset: f64,
    pub phase_bend: f64,
    pub colors: [Rgb; 2],
}

fn color_distance(a: &Rgb, b: &Rgb) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl StripeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 1.0) {
            return Err(Error::Parameter(format!("stripe width {} must exceed 1 px", self.width)));
        }
        if !(self.amplitude >= 0.0) || !(self.frequency > 0.0) {
            return Err(Error::Parameter("stripe bend needs amplitude >= 0 and frequency > 0".into()));
        }
        if self.colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Parameter("stripe colors must lie in [0, 1]".into()));
        }
        if color_distance(&self.colors[0], &self.colors[1]) <= 0.1 {
            return Err(Error::Parameter("stripe colors must differ by more than 0.1".into()));
        }
        Ok(())
    }

    /// Stripe coordinate of pixel column `u`, row `v` in an image `w` wide.
    pub fn coordinate(&self, u: f64, v: f64, image_width: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let along = u * c - v * s;
        (v * c + u * s)
            + self.amplitude * (2.0 * PI * self.frequency * along / image_width + self.phase_bend).sin()
            + self.phase_offset * self.width / (2.0 * PI)
    }
}

/// How stripe colors are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ColorRule {
    /// Uniform in the RGB cube, redrawn until the pair is distinct.
    Uniform,
    /// Each color within `jitter` (per channel) of its anchor.
    Around { anchors: [Rgb; 2], jitter: f64 },
}

/// Sampling ranges for random stripe images. Every range is `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripeRanges {
    pub theta: (f64, f64),
    pub width: (f64, f64),
    pub amplitude: (f64, f64),
    pub frequency: (f64, f64),
    pub colors: ColorRule,
}

impl Default for StripeRanges {
    fn default() -> Self {
        StripeRanges {
            theta: (0.0, PI),
            width: (3.0, 10.0),
            amplitude: (0.0, 6.0),
            frequency: (0.5, 2.0),
            colors: ColorRule::Uniform,
        }
    }
}

fn draw(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl StripeRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("theta", self.theta),
            ("width", self.width),
            ("amplitude", self.amplitude),
            ("frequency", self.frequency),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Parameter(format!("stripe {name} range ({lo}, {hi}) is empty")));
            }
        }
        if self.width.0 <= 1.0 || self.amplitude.0 < 0.0 || self.frequency.0 <= 0.0 {
            return Err(Error::Parameter("stripe ranges allow width <= 1, negative bend or zero frequency".into()));
        }
        if let ColorRule::Around { anchors, jitter } = &self.colors {
            if color_distance(&anchors[0], &anchors[1]) <= 0.1 + 2.0 * 3f64.sqrt() * jitter {
                return Err(Error::Parameter("stripe color anchors too close for their jitter".into()));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> StripeParams {
        let theta = draw(rng, self.theta);
        let width = draw(rng, self.width);
        let amplitude = draw(rng, self.amplitude);
        let frequency = draw(rng, self.frequency);
        let phase_offset = rng.random_range(0.0..2.0 * PI);
        let phase_bend = rng.random_range(0.0..2.0 * PI);
        let colors = match &self.colors {
            ColorRule::Uniform => loop {
                let a: Rgb = [rng.random(), rng.random(), rng.random()];
                let b: Rgb = [rng.random(), rng.random(), rng.random()];
                if color_distance(&a, &b) > 0.1 {
                    break [a, b];
                }
            },
            ColorRule::Around { anchors, jitter } => {
                let mut pick = |anchor: &Rgb| -> Rgb {
                    let mut c = *anchor;
                    for v in &mut c {
                        *v = (*v + rng.random_range(-1.0..=1.0) * jitter).clamp(0.0, 1.0);
                    }
                    c
                };
                [pick(&anchors[0]), pick(&anchors[1])]
            }
        };
        StripeParams {
            theta,
            width,
            amplitude,
            frequency,
            phase_offset,
            phase_bend,
            colors,
        }
    }
}

/// Renders `[3, H, W]` stripes: the color of pixel `(u, v)` alternates with
/// `floor(s(u, v) / width) mod 2`. Edges are hard (no anti-aliasing).
pub fn sinusoid_stripes(params: &StripeParams, height: usize, width: usize) -> Result<Tensor> {
    params.validate()?;
    let hw = height * width;
    let mut data = vec![0.0; 3 * hw];
    for v in 0..height {
        for u in 0..width {
            let s = params.coordinate(u as f64, v as f64, width as f64);
            let band = (s / params.width).floor().rem_euclid(2.0) as usize;
            let color = &params.colors[band.min(1)];
            for (c, &value) in color.iter().enumerate() {
                data[c * hw + v * width + u] = f64::from(value as f32);
            }
        }
    }
    Tensor::new(&[3, height, width], data)
}
