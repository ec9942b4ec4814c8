use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Images decoded from a directory, already cropped and resized.
#[derive(Clone, Debug)]
pub struct ImageSet {
    pub images: Vec<Tensor>,
    /// Files that could not be decoded.
    pub skipped: Vec<PathBuf>,
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "ppm" | "pnm")
    )
}

/// Loads every PNG/PPM file in `dir` (sorted by name) as a `[3, H, W]`
/// tensor in `[0, 1]`: center-cropped to the target aspect, then bilinearly
/// resized.
pub fn load_dir(dir: &Path, height: usize, width: usize) -> Result<ImageSet> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Pool(format!("cannot read image directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        match image::open(&path) {
            Ok(img) => {
                let rgb = img.to_rgb8();
                let (w, h) = rgb.dimensions();
                let src: Vec<f64> = rgb.pixels().flat_map(|p| p.0.map(|v| f64::from(v) / 255.0)).collect();
                let planar = interleaved_to_planar(&src, h as usize, w as usize);
                let cropped = center_crop(&planar, h as usize, w as usize, height, width);
                images.push(resize_bilinear(&cropped.0, cropped.1, cropped.2, height, width)?);
            }
            Err(e) => {
                log::warn!("skipping undecodable image {}: {e}", path.display());
                skipped.push(path);
            }
        }
    }
    if images.is_empty() {
        return Err(Error::Pool(format!("no decodable PNG/PPM images in {}", dir.display())));
    }
    Ok(ImageSet { images, skipped })
}

fn interleaved_to_planar(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; 3 * h * w];
    for (i, px) in src.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * h * w + i] = px[c];
        }
    }
    out
}

/// Crops a planar `[3, h, w]` image to the aspect ratio of `th x tw`,
/// keeping the center. Returns `(data, h', w')`.
pub fn center_crop(planar: &[f64], h: usize, w: usize, th: usize, tw: usize) -> (Vec<f64>, usize, usize) {
    // Compare w/h against tw/th without floating point.
    let (ch, cw) = if w * th > tw * h {
        (h, ((h * tw) as f64 / th as f64).round().max(1.0) as usize)
    } else if w * th < tw * h {
        (((w * th) as f64 / tw as f64).round().max(1.0) as usize, w)
    } else {
        (h, w)
    };
    if (ch, cw) == (h, w) {
        return (planar.to_vec(), h, w);
    }
    let (oy, ox) = ((h - ch) / 2, (w - cw) / 2);
    let mut out = Vec::with_capacity(3 * ch * cw);
    for c in 0..3 {
        for y in 0..ch {
            let row = &planar[c * h * w + (oy + y) * w + ox..][..cw];
            out.extend_from_slice(row);
        }
    }
    (out, ch, cw)
}

/// Bilinear resize of a planar `[3, h, w]` image with half-pixel centers.
pub fn resize_bilinear(planar: &[f64], h: usize, w: usize, th: usize, tw: usize) -> Result<Tensor> {
    let axis = |o: usize, src: usize, dst: usize| -> (usize, usize, f64) {
        let s = ((o as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = vec![0.0; 3 * th * tw];
    for c in 0..3 {
        let plane = &planar[c * h * w..(c + 1) * h * w];
        for y in 0..th {
            let (y0, y1, fy) = axis(y, h, th);
            for x in 0..tw {
                let (x0, x1, fx) = axis(x, w, tw);
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[c * th * tw + y * tw + x] = f64::from(v as f32);
            }
        }
    }
    Tensor::new(&[3, th, tw], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_halves_to_gray() {
        let mut planar = vec![0.0; 3 * 16];
        for c in 0..3 {
            for y in 0..4 {
                for x in 0..4 {
                    planar[c * 16 + y * 4 + x] = ((x + y) % 2) as f64;
                }
            }
        }
        let out = resize_bilinear(&planar, 4, 4, 2, 2).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn square_crop_of_square_is_identity() {
        let planar: Vec<f64> = (0..3 * 25).map(|i| i as f64).collect();
        let (out, h, w) = center_crop(&planar, 5, 5, 8, 8);
        assert_eq!((h, w), (5, 5));
        assert_eq!(out, planar);
    }

    #[test]
    fn wide_image_is_cropped_to_center() {
        // 2 x 6 image cropped to a square keeps columns 2..4
        let planar: Vec<f64> = (0..3 * 12).map(|i| (i % 12 % 6) as f64).collect();
        let (out, h, w) = center_crop(&planar, 2, 6, 4, 4);
        assert_eq!((h, w), (2, 2));
        assert_eq!(&out[..4], &[2.0, 3.0, 2.0, 3.0]);
    }
}
