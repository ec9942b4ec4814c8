use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::stripes::Rgb;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Multi-octave value noise mapped through a two-color palette.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub octaves: usize,
    /// Lattice points per side at the coarsest octave; each further octave
    /// doubles the number of cells.
    pub lattice: usize,
    pub palette: [Rgb; 2],
}

/// Bilinearly interpolated value noise in `[0, 1]` on an `H x W` grid.
pub fn noise_field(seed: u64, height: usize, width: usize, octaves: usize, lattice: usize) -> Result<Vec<f64>> {
    if octaves == 0 {
        return Err(Error::Parameter("smooth noise needs at least one octave".into()));
    }
    if lattice == 0 {
        return Err(Error::Parameter("noise lattice needs at least one point".into()));
    }
    let mut field = vec![0.0; height * width];
    let mut total_amp = 0.0;
    for o in 0..octaves {
        let points = if lattice == 1 { 1 } else { (lattice - 1) * (1 << o) + 1 };
        let mut r = rng::stream(seed, &[rng::tag("noise-octave"), o as u64]);
        let values: Vec<f64> = (0..points * points).map(|_| r.random::<f64>()).collect();
        let amp = 0.5f64.powi(o as i32);
        total_amp += amp;
        let coord = |i: usize, n: usize| -> (usize, usize, f64) {
            if points == 1 || n == 1 {
                return (0, 0, 0.0);
            }
            let g = i as f64 * (points - 1) as f64 / (n - 1) as f64;
            let i0 = (g.floor() as usize).min(points - 2);
            (i0, i0 + 1, g - i0 as f64)
        };
        for y in 0..height {
            let (y0, y1, fy) = coord(y, height);
            for x in 0..width {
                let (x0, x1, fx) = coord(x, width);
                let top = values[y0 * points + x0] * (1.0 - fx) + values[y0 * points + x1] * fx;
                let bottom = values[y1 * points + x0] * (1.0 - fx) + values[y1 * points + x1] * fx;
                field[y * width + x] += amp * (top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    field.iter_mut().for_each(|v| *v /= total_amp);
    Ok(field)
}

/// Renders `[3, H, W]` smooth noise: `palette[0] + field * (palette[1] - palette[0])`.
pub fn smooth_noise(seed: u64, height: usize, width: usize, params: &NoiseParams) -> Result<Tensor> {
    if params.palette.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::Parameter("noise palette must lie in [0, 1]".into()));
    }
    let field = noise_field(seed, height, width, params.octaves, params.lattice)?;
    let hw = height * width;
    let [a, b] = params.palette;
    let mut data = vec![0.0; 3 * hw];
    for c in 0..3 {
        for (i, &f) in field.iter().enumerate() {
            let v = (a[c] + f * (b[c] - a[c])).clamp(0.0, 1.0);
            data[c * hw + i] = f64::from(v as f32);
        }
    }
    Tensor::new(&[3, height, width], data)
}
