//! The mixing operations themselves, with every random choice passed in.

use crate::bench::composite;
use crate::error::{Error, Result};
use crate::video::{MaskSequence, Video};

/// A clip with a label distribution over `K` classes.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSample {
    pub video: Video,
    pub label: Vec<f64>,
    /// Whether the augmentation fired for this sample.
    pub applied: bool,
}

pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label >= classes {
        return Err(Error::InvalidTarget(format!("label {label} with only {classes} classes")));
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}

fn check_same(a: &Video, b: &Video) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("cannot mix clips of dims {:?} and {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn lerp(a: f32, b: f32, weight_a: f64) -> f32 {
    (weight_a * f64::from(a) + (1.0 - weight_a) * f64::from(b)) as f32
}

/// `lambda * x + (1 - lambda) * tile(frame, T)`; the label is untouched.
pub fn stillmix_with(video: &Video, frame: &Video, lambda: f64) -> Result<Video> {
    let [c, t, h, w] = video.dims();
    if frame.dims() != [c, 1, h, w] {
        return Err(Error::dim(format!(
            "bank frame {:?} does not match clip {:?}",
            frame.dims(),
            video.dims()
        )));
    }
    let mut out = video.clone();
    for ch in 0..c {
        let z = frame.plane(ch, 0);
        for ti in 0..t {
            for (o, &zi) in out.plane_mut(ch, ti).iter_mut().zip(z) {
                *o = lerp(*o, zi, lambda);
            }
        }
    }
    Ok(out)
}

/// `lambda * a + (1 - lambda) * b` over every element, labels likewise.
pub fn mixup_with(a: &Video, label_a: usize, b: &Video, label_b: usize, classes: usize, lambda: f64) -> Result<AugmentedSample> {
    check_same(a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| lerp(x, y, lambda)).collect();
    let mut label = one_hot(label_a, classes)?;
    label.iter_mut().for_each(|v| *v *= lambda);
    label[label_b] += 1.0 - lambda;
    Ok(AugmentedSample {
        video: Video::new(a.dims(), data)?,
        label,
        applied: true,
    })
}

/// Axis-aligned box `(top, left, height, width)` in pixels.
pub type PixelBox = (usize, usize, usize, usize);

/// Pastes the `region` of `b` into `a` on every frame. The label weight of
/// `a` is the fraction of the frame left untouched.
pub fn videomix_with(a: &Video, label_a: usize, b: &Video, label_b: usize, classes: usize, region: PixelBox) -> Result<AugmentedSample> {
    check_same(a, b)?;
    let [c, t, h, w] = a.dims();
    let (top, left, bh, bw) = region;
    if top + bh > h || left + bw > w {
        return Err(Error::dim(format!("box {region:?} exceeds the {h}x{w} frame")));
    }
    let mut out = a.clone();
    for ch in 0..c {
        for ti in 0..t {
            let src = b.plane(ch, ti);
            let dst = out.plane_mut(ch, ti);
            for y in top..top + bh {
                dst[y * w + left..y * w + left + bw].copy_from_slice(&src[y * w + left..y * w + left + bw]);
            }
        }
    }
    let lambda = 1.0 - (bh * bw) as f64 / (h * w) as f64;
    let mut label = one_hot(label_a, classes)?;
    label.iter_mut().for_each(|v| *v *= lambda);
    label[label_b] += 1.0 - lambda;
    Ok(AugmentedSample {
        video: out,
        label,
        applied: true,
    })
}

/// `(1 - mu) * x_t + mu * x_k` for every frame `t`.
pub fn be_with(video: &Video, k: usize, mu: f64) -> Result<Video> {
    let [c, t, _, _] = video.dims();
    if k >= t {
        return Err(Error::dim(format!("frame {k} out of range (T = {t})")));
    }
    let mut out = video.clone();
    for ch in 0..c {
        let xk = video.plane(ch, k);
        for ti in 0..t {
            for (o, &z) in out.plane_mut(ch, ti).iter_mut().zip(xk) {
                *o = lerp(*o, z, 1.0 - mu);
            }
        }
    }
    Ok(out)
}

/// Background swap is exactly the compositing operator with a new backdrop.
pub fn bgswap_with(video: &Video, masks: &MaskSequence, background: &Video) -> Result<Video> {
    composite(video, masks, background)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(dims: [usize; 4], v: f32) -> Video {
        Video::new(dims, vec![v; dims.iter().product()]).unwrap()
    }

    #[test]
    fn stillmix_hand_values_and_boundaries() {
        let x = constant([1, 2, 1, 1], 0.8);
        let z = constant([1, 1, 1, 1], 0.4);
        assert_eq!(stillmix_with(&x, &z, 0.25).unwrap().data(), &[0.5, 0.5]);
        assert_eq!(stillmix_with(&x, &z, 1.0).unwrap(), x);
        assert_eq!(stillmix_with(&x, &z, 0.0).unwrap(), Video::tile(&z, 2).unwrap());
    }

    #[test]
    fn mixup_hand_values() {
        let a = constant([1, 1, 2, 2], 1.0);
        let b = constant([1, 1, 2, 2], 0.0);
        let s = mixup_with(&a, 0, &b, 1, 3, 0.3).unwrap();
        assert!(s.video.data().iter().all(|&v| v == 0.3f64 as f32));
        assert_eq!(s.label, vec![0.3, 0.7, 0.0]);
        let same = mixup_with(&a, 2, &b, 2, 3, 0.3).unwrap();
        assert_eq!(same.label, vec![0.0, 0.0, 1.0]);
        let full = mixup_with(&a, 0, &b, 1, 2, 1.0).unwrap();
        assert_eq!((full.video, full.label), (a, vec![1.0, 0.0]));
    }

    #[test]
    fn videomix_box_area() {
        let a = constant([3, 2, 32, 32], 0.0);
        let b = constant([3, 2, 32, 32], 1.0);
        let s = videomix_with(&a, 0, &b, 1, 2, (4, 8, 16, 16)).unwrap();
        assert_eq!(s.label, vec![0.75, 0.25]);
        assert_eq!(s.video.data().iter().filter(|&&v| v == 1.0).count(), 3 * 2 * 256);
        let none = videomix_with(&a, 0, &b, 1, 2, (0, 0, 0, 0)).unwrap();
        assert_eq!((none.video, none.label), (a.clone(), vec![1.0, 0.0]));
        let all = videomix_with(&a, 0, &b, 1, 2, (0, 0, 32, 32)).unwrap();
        assert_eq!((all.video, all.label), (b, vec![0.0, 1.0]));
        assert!(videomix_with(&a, 0, &a, 1, 2, (20, 0, 16, 4)).is_err());
    }

    #[test]
    fn be_hand_values() {
        let v = Video::new([1, 2, 1, 1], vec![0.5, 1.0]).unwrap();
        let out = be_with(&v, 1, 0.2).unwrap();
        assert_eq!(out.data()[0], 0.6f64 as f32);
        assert_eq!(be_with(&v, 1, 0.0).unwrap(), v);
        assert!(be_with(&v, 0, 1.0).unwrap().frames_identical());
    }
}
