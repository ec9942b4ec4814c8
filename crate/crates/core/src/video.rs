//! Clip and mask containers. Pixels are stored at single precision, which is
//! also the on-disk precision, so a clip survives a write/read cycle
//! bit-exactly. Arithmetic on clips happens after widening to [`Tensor`].

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A `C x T x H x W` clip with values in `[0, 1]`, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl Video {
    pub fn new(dims: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("video dims {dims:?} contain a zero")));
        }
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::dim(format!(
                "video dims {dims:?} need {} values, got {}",
                dims.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Video { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        Self::new(dims, vec![0.0; dims.iter().product()])
    }

    /// Narrows a `[C,T,H,W]` tensor to single precision.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let dims: [usize; 4] = t
            .shape()
            .try_into()
            .map_err(|_| Error::dim(format!("video tensor must be 4-D, got {:?}", t.shape())))?;
        Self::new(dims, t.data().iter().map(|&v| v as f32).collect())
    }

    /// Builds a one-frame clip from a `[C,H,W]` image tensor.
    pub fn from_image(t: &Tensor) -> Result<Self> {
        match t.shape() {
            &[c, h, w] => Self::new([c, 1, h, w], t.data().iter().map(|&v| v as f32).collect()),
            s => Err(Error::dim(format!("image tensor must be [C,H,W], got {s:?}"))),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.dims[0]
    }

    pub fn frames(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, c: usize, t: usize, y: usize, x: usize) -> usize {
        ((c * self.dims[1] + t) * self.dims[2] + y) * self.dims[3] + x
    }

    pub fn at(&self, c: usize, t: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, t, y, x)]
    }

    /// Plane `(c, t)` as a contiguous `H*W` slice.
    pub fn plane(&self, c: usize, t: usize) -> &[f32] {
        let hw = self.dims[2] * self.dims[3];
        let start = (c * self.dims[1] + t) * hw;
        &self.data[start..start + hw]
    }

    pub fn plane_mut(&mut self, c: usize, t: usize) -> &mut [f32] {
        let hw = self.dims[2] * self.dims[3];
        let start = (c * self.dims[1] + t) * hw;
        &mut self.data[start..start + hw]
    }

    /// Frame `t` as a one-frame clip.
    pub fn frame(&self, t: usize) -> Result<Video> {
        if t >= self.frames() {
            return Err(Error::dim(format!("frame {t} out of range (T = {})", self.frames())));
        }
        let [c, _, h, w] = self.dims;
        let mut data = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            data.extend_from_slice(self.plane(ch, t));
        }
        Video::new([c, 1, h, w], data)
    }

    /// Repeats a one-frame clip `frames` times along time.
    pub fn tile(frame: &Video, frames: usize) -> Result<Video> {
        if frame.frames() != 1 {
            return Err(Error::dim(format!("tile expects a single frame, got T = {}", frame.frames())));
        }
        let [c, _, h, w] = frame.dims;
        let mut out = Video::zeros([c, frames, h, w])?;
        for ch in 0..c {
            let src = frame.plane(ch, 0).to_vec();
            for t in 0..frames {
                out.plane_mut(ch, t).copy_from_slice(&src);
            }
        }
        Ok(out)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&self.dims, self.data.iter().map(|&v| f64::from(v)).collect())
            .expect("video dims are valid tensor dims")
    }

    /// Copies the clip into `dst` in frame-major `[T, C, H, W]` order, the
    /// layout the networks consume.
    pub fn write_frame_major(&self, dst: &mut [f64]) {
        let [c, t, h, w] = self.dims;
        let hw = h * w;
        for ti in 0..t {
            for ch in 0..c {
                let d = &mut dst[(ti * c + ch) * hw..][..hw];
                for (o, &v) in d.iter_mut().zip(self.plane(ch, ti)) {
                    *o = f64::from(v);
                }
            }
        }
    }

    /// True when every frame is bit-identical to frame 0.
    pub fn frames_identical(&self) -> bool {
        (0..self.channels()).all(|c| {
            let first = self.plane(c, 0);
            (1..self.frames()).all(|t| {
                self.plane(c, t)
                    .iter()
                    .zip(first)
                    .all(|(a, b)| a.to_bits() == b.to_bits())
            })
        })
    }

    /// Mean over pixels of the per-pixel variance across time.
    pub fn temporal_variance(&self) -> f64 {
        let [c, t, h, w] = self.dims;
        let mut total = 0.0;
        for ch in 0..c {
            for p in 0..h * w {
                let vals: Vec<f64> = (0..t).map(|ti| f64::from(self.plane(ch, ti)[p])).collect();
                let mean = vals.iter().sum::<f64>() / t as f64;
                total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
            }
        }
        total / (c * h * w) as f64
    }
}

/// Per-frame binary foreground masks, stored as a one-channel [`Video`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSequence(Video);

impl MaskSequence {
    /// Wraps a one-channel clip, rejecting any value other than 0 or 1.
    pub fn new(video: Video) -> Result<Self> {
        if video.channels() != 1 {
            return Err(Error::Validation(format!(
                "mask must have one channel, got {}",
                video.channels()
            )));
        }
        if let Some(v) = video.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Validation(format!("mask value {v} is not binary")));
        }
        Ok(MaskSequence(video))
    }

    /// Thresholds a soft matte at 0.5. Returns the masks and whether any
    /// value had to be rounded.
    pub fn from_soft(video: Video) -> Result<(Self, bool)> {
        let mut video = video;
        let mut rounded = false;
        for v in video.data_mut() {
            if *v != 0.0 && *v != 1.0 {
                rounded = true;
                *v = if *v >= 0.5 { 1.0 } else { 0.0 };
            }
        }
        if rounded {
            log::warn!("soft mask thresholded at 0.5");
        }
        Ok((Self::new(video)?, rounded))
    }

    pub fn video(&self) -> &Video {
        &self.0
    }

    pub fn into_video(self) -> Video {
        self.0
    }

    pub fn frames(&self) -> usize {
        self.0.frames()
    }

    pub fn plane(&self, t: usize) -> &[f32] {
        self.0.plane(0, t)
    }

    /// Foreground pixel count of frame `t`.
    pub fn area(&self, t: usize) -> usize {
        self.plane(t).iter().filter(|&&v| v == 1.0).count()
    }

    /// Mask centroid `(x, y)` of frame `t` in pixel-center coordinates, or
    /// `None` for an empty mask.
    pub fn centroid(&self, t: usize) -> Option<(f64, f64)> {
        let w = self.0.width();
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (i, &v) in self.plane(t).iter().enumerate() {
            if v == 1.0 {
                sx += (i % w) as f64 + 0.5;
                sy += (i / w) as f64 + 0.5;
                n += 1;
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_and_identity_check() {
        let f = Video::new([2, 1, 2, 2], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
        let v = Video::tile(&f, 3).unwrap();
        assert!(v.frames_identical());
        assert_eq!(v.temporal_variance(), 0.0);
        assert_eq!(v.frame(2).unwrap(), f);
    }

    #[test]
    fn frame_major_layout() {
        let data: Vec<f32> = (0..8).map(|i| i as f32).collect();
        // C=2, T=2, H=1, W=2
        let v = Video::new([2, 2, 1, 2], data).unwrap();
        let mut out = vec![0.0; 8];
        v.write_frame_major(&mut out);
        assert_eq!(out, vec![0.0, 1.0, 4.0, 5.0, 2.0, 3.0, 6.0, 7.0]);
    }

    #[test]
    fn masks_must_be_binary() {
        let v = Video::new([1, 1, 1, 2], vec![0.0, 0.5]).unwrap();
        assert!(MaskSequence::new(v.clone()).is_err());
        let (m, rounded) = MaskSequence::from_soft(v).unwrap();
        assert!(rounded);
        assert_eq!(m.video().data(), &[0.0, 1.0]);
    }
}
