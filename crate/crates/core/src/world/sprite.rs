use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::motion::Pose;

/// Fraction of the canvas covered by a sprite at scale 1.
pub const SPRITE_AREA_FRACTION: f64 = 0.115;

const MIN_HALF_SIZE: f64 = 2.0;

// A pixel joins the mask when at least half of its SUBSAMPLES^2 sample
// points fall inside the shape.
const SUBSAMPLES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Ring,
    Cross,
    Star,
}

pub const SHAPES: [Shape; 6] = [
    Shape::Circle,
    Shape::Square,
    Shape::Triangle,
    Shape::Ring,
    Shape::Cross,
    Shape::Star,
];

fn star_vertices() -> [(f64, f64); 10] {
    std::array::from_fn(|i| {
        let r = if i % 2 == 0 { 1.0 } else { 0.5 };
        let a = -PI / 2.0 + i as f64 * PI / 5.0;
        (r * a.cos(), r * a.sin())
    })
}

fn triangle_vertices() -> [(f64, f64); 3] {
    std::array::from_fn(|i| {
        let a = -PI / 2.0 + i as f64 * 2.0 * PI / 3.0;
        (a.cos(), a.sin())
    })
}

fn inside_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl Shape {
    /// Area of the shape at half-size 1.
    pub fn area_coefficient(self) -> f64 {
        match self {
            Shape::Circle => PI,
            Shape::Square => 2.56,
            Shape::Triangle => 3.0 * 3f64.sqrt() / 4.0,
            Shape::Ring => 0.75 * PI,
            Shape::Cross => 2.04,
            Shape::Star => 10.0 * 0.5 * 0.5 * (PI / 5.0).sin(),
        }
    }

    /// Distance from the center to the farthest point, at half-size 1.
    pub fn extent(self) -> f64 {
        match self {
            Shape::Square => 0.8 * 2f64.sqrt(),
            Shape::Cross => 1.09f64.sqrt(),
            _ => 1.0,
        }
    }

    /// Whether local point `(x, y)` (in units of the half-size, unrotated)
    /// lies inside the shape.
    pub fn contains(self, x: f64, y: f64) -> bool {
        match self {
            Shape::Circle => x * x + y * y <= 1.0,
            Shape::Square => x.abs() <= 0.8 && y.abs() <= 0.8,
            Shape::Triangle => inside_polygon(&triangle_vertices(), x, y),
            Shape::Ring => (0.25..=1.0).contains(&(x * x + y * y)),
            Shape::Cross => (x.abs() <= 0.3 && y.abs() <= 1.0) || (y.abs() <= 0.3 && x.abs() <= 1.0),
            Shape::Star => inside_polygon(&star_vertices(), x, y),
        }
    }
}

/// Appearance `a`: a shape and a fill color. The border is a darker shade of
/// the fill so the sprite stays visible on light and dark backgrounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub shape: Shape,
    pub fill: [f64; 3],
    pub border: [f64; 3],
}

impl Appearance {
    pub fn new(id: usize, count: usize) -> Appearance {
        // offset by half a family hue step so fills never match a family
        let hue = (id as f64 + 0.5) / count.max(1) as f64;
        let fill = crate::pools::hsv(hue, 0.9, 1.0);
        Appearance {
            shape: SHAPES[id % SHAPES.len()],
            fill,
            border: fill.map(|c| c * 0.3),
        }
    }
}

/// A rasterized sprite on a full canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    /// `[3, H, W]` colors; zero outside the mask.
    pub rgb: Vec<f32>,
    /// `[H, W]` values in {0, 1}.
    pub mask: Vec<f32>,
    /// Set when a non-positive scale was clamped to the minimum size.
    pub clamped: bool,
}

/// Half-size in pixels of `shape` at scale 1 on an `H x W` canvas.
pub fn base_half_size(shape: Shape, height: usize, width: usize) -> f64 {
    (SPRITE_AREA_FRACTION * (height * width) as f64 / shape.area_coefficient()).sqrt()
}

/// Draws `appearance` at `pose` with a hard (binary) mask; the sprite center is clamped so the whole shape stays on the canvas.
pub fn rasterize(pose: &Pose, appearance: &Appearance, height: usize, width: usize) -> Raster {
    let shape = appearance.shape;
    let mut half = base_half_size(shape, height, width) * pose.scale;
    let clamped = !(half > 0.0);
    if clamped {
        log::warn!("sprite scale {} is degenerate; clamped to {MIN_HALF_SIZE} px", pose.scale);
        half = MIN_HALF_SIZE;
    }
    let reach = shape.extent() * half;
    let clamp = |c: f64, n: usize| {
        let n = n as f64;
        if 2.0 * reach >= n {
            n / 2.0
        } else {
            c.clamp(reach, n - reach)
        }
    };
    let cx = clamp(pose.x * width as f64, width);
    let cy = clamp(pose.y * height as f64, height);
    let (sin, cos) = pose.rotation.sin_cos();
    let hw = height * width;
    let mut mask = vec![0.0f32; hw];
    let x0 = (cx - reach).floor().max(0.0) as usize;
    let x1 = ((cx + reach).ceil() as usize).min(width);
    let y0 = (cy - reach).floor().max(0.0) as usize;
    let y1 = ((cy + reach).ceil() as usize).min(height);
    for py in y0..y1 {
        for px in x0..x1 {
            let mut covered = 0;
            for sy in 0..SUBSAMPLES {
                for sx in 0..SUBSAMPLES {
                    let dx = (px as f64 + (sx as f64 + 0.5) / SUBSAMPLES as f64 - cx) / half;
                    let dy = (py as f64 + (sy as f64 + 0.5) / SUBSAMPLES as f64 - cy) / half;
                    let lx = cos * dx + sin * dy;
                    let ly = -sin * dx + cos * dy;
                    covered += shape.contains(lx, ly) as usize;
                }
            }
            if 2 * covered >= SUBSAMPLES * SUBSAMPLES {
                mask[py * width + px] = 1.0;
            }
        }
    }
    let mut rgb = vec![0.0f32; 3 * hw];
    for py in 0..height {
        for px in 0..width {
            let i = py * width + px;
            if mask[i] == 0.0 {
                continue;
            }
            let edge = px == 0
                || py == 0
                || px + 1 == width
                || py + 1 == height
                || mask[i - 1] == 0.0
                || mask[i + 1] == 0.0
                || mask[i - width] == 0.0
                || mask[i + width] == 0.0;
            let color = if edge { appearance.border } else { appearance.fill };
            for c in 0..3 {
                rgb[c * hw + i] = color[c] as f32;
            }
        }
    }
    Raster { rgb, mask, clamped }
}
