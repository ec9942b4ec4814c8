use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Sprite placement in one frame. Coordinates are fractions of the canvas
/// width and height; `scale` multiplies the sprite's base size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub rotation: f64,
}

/// The built-in motion programs, indexed by class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Motion {
    TranslateRight,
    TranslateLeft,
    VerticalBounce,
    CircularOrbit,
    HorizontalOscillation,
    ExpandContract,
}

pub const MOTIONS: [Motion; 6] = [
    Motion::TranslateRight,
    Motion::TranslateLeft,
    Motion::VerticalBounce,
    Motion::CircularOrbit,
    Motion::HorizontalOscillation,
    Motion::ExpandContract,
];

impl Motion {
    pub fn for_class(class: usize) -> Result<Motion> {
        MOTIONS
            .get(class)
            .copied()
            .ok_or_else(|| Error::config(format!("no motion program for class {class}; only {} exist", MOTIONS.len())))
    }

    pub fn name(self) -> &'static str {
        match self {
            Motion::TranslateRight => "translate-right",
            Motion::TranslateLeft => "translate-left",
            Motion::VerticalBounce => "vertical-bounce",
            Motion::CircularOrbit => "circular-orbit",
            Motion::HorizontalOscillation => "horizontal-oscillation",
            Motion::ExpandContract => "expand-contract",
        }
    }
}

/// Per-clip randomness of a motion program.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub dx: f64,
    pub dy: f64,
    pub speed: f64,
    pub rotation: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        dx: 0.0,
        dy: 0.0,
        speed: 1.0,
        rotation: 0.0,
    };

    pub fn sample(rng: &mut Rng) -> Jitter {
        Jitter {
            dx: rng.random_range(-0.04..=0.04),
            dy: rng.random_range(-0.04..=0.04),
            speed: rng.random_range(0.9..=1.1),
            rotation: rng.random_range(0.0..2.0 * PI),
        }
    }
}

/// Pose of `motion` at frame `t` of a `frames`-long clip. Periodic programs
/// complete exactly one cycle between the first and last frame.
pub fn pose(motion: Motion, t: usize, frames: usize, jitter: &Jitter) -> Pose {
    let span = frames.saturating_sub(1).max(1) as f64;
    let u = t as f64 / span;
    let phase = 2.0 * PI * ((t as f64) % span) / span;
    let (cx, cy) = (0.5 + jitter.dx, 0.5 + jitter.dy);
    let k = jitter.speed;
    let (x, y, scale) = match motion {
        Motion::TranslateRight => (cx + 0.44 * k * (u - 0.5), cy, 1.0),
        Motion::TranslateLeft => (cx - 0.44 * k * (u - 0.5), cy, 1.0),
        Motion::VerticalBounce => (cx, 0.72 + jitter.dy - 0.38 * k * phase.sin().abs(), 1.0),
        Motion::CircularOrbit => (cx + 0.2 * k * phase.cos(), cy + 0.2 * k * phase.sin(), 1.0),
        Motion::HorizontalOscillation => (cx + 0.22 * k * phase.sin(), cy, 1.0),
        Motion::ExpandContract => (cx, cy, 1.05 + 0.2 * phase.sin()),
    };
    Pose {
        x,
        y,
        scale,
        rotation: jitter.rotation,
    }
}

/// Pose of class `class` at frame `t`, with jitter drawn from `seed`.
pub fn motion_program(class: usize, t: usize, frames: usize, seed: u64) -> Result<Pose> {
    let motion = Motion::for_class(class)?;
    if t >= frames {
        return Err(Error::Parameter(format!("frame {t} outside a {frames}-frame clip")));
    }
    let jitter = Jitter::sample(&mut rng::stream(seed, &[rng::tag("jitter")]));
    Ok(pose(motion, t, frames, &jitter))
}

/// Fraction of frames at which the un-jittered sprite centers of `a` and `b`
/// are more than one pixel apart on a `height x width` canvas.
pub fn separation(a: Motion, b: Motion, frames: usize, height: usize, width: usize) -> f64 {
    let differing = (0..frames)
        .filter(|&t| {
            let (p, q) = (pose(a, t, frames, &Jitter::NONE), pose(b, t, frames, &Jitter::NONE));
            let d = ((p.x - q.x) * width as f64).hypot((p.y - q.y) * height as f64);
            // expand-contract stays put but changes size; treat a scale
            // change of a sprite ~12 px across as a pixel of movement
            let ds = (p.scale - q.scale).abs() * 12.0;
            d > 1.0 || ds > 1.0
        })
        .count();
    differing as f64 / frames.max(1) as f64
}
