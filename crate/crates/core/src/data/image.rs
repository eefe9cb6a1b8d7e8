use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{read_ctt, Tensor};

/// Bilinear resize of an `[H, W, C]` tensor with half-pixel sampling
/// (`align_corners = false`): output pixel `i` samples source coordinate
/// `(i + 0.5)·in/out - 0.5`, clamped to the image.
pub fn resize_bilinear(src: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let [h, w, c] = *src.shape() else {
        return Err(Error::dim(format!("resize expects [H, W, C], got {:?}", src.shape())));
    };
    if (h, w) == (out_h, out_w) {
        return Ok(src.clone());
    }
    let taps = |out: usize, len: usize| -> Vec<(usize, usize, f32)> {
        let scale = len as f64 / out as f64;
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(len - 1);
                (lo, hi, (s - lo as f64) as f32)
            })
            .collect()
    };
    let rows = taps(out_h, h);
    let cols = taps(out_w, w);
    let d = src.data();
    let at = |y: usize, x: usize, ch: usize| d[(y * w + x) * c + ch];
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            for ch in 0..c {
                let top = at(y0, x0, ch) * (1.0 - fx) + at(y0, x1, ch) * fx;
                let bottom = at(y1, x0, ch) * (1.0 - fx) + at(y1, x1, ch) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(&[out_h, out_w, c], out)
}

fn load_ctt_pixels(path: &Path) -> Result<Tensor<f32>> {
    let t = read_ctt(path)?;
    match *t.shape() {
        [_, _, 1] | [_, _, 3] => {}
        _ => {
            return Err(Error::format(
                4,
                format!("{}: CTT1 image must be [H, W, 1|3], got {:?}", path.display(), t.shape()),
            ))
        }
    }
    if let Some(bad) = t.data().iter().find(|v| !(0.0..=255.0).contains(*v)) {
        return Err(Error::format(
            8 + 4 * t.rank() as u64,
            format!("{}: pixel value {bad} outside [0, 255]", path.display()),
        ));
    }
    Ok(t)
}

fn decode_raster(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    // Grayscale sources replicate into all three channels.
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(f32::from).collect();
    Tensor::new(&[h as usize, w as usize, 3], data)
}

/// Loads a PNG, JPEG or CTT1 file as a `size × size × 3` tensor in `[0, 1]`.
///
/// Sources are decoded to 0..=255 intensities, single-channel data is
/// replicated to three channels, the image is resized bilinearly and then
/// divided by 255. CTT1 files carry raw intensities in `[0, 255]`.
pub fn load_image(path: impl AsRef<Path>, size: usize) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let is_ctt = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ctt"));
    let mut pixels = if is_ctt {
        load_ctt_pixels(path)?
    } else {
        decode_raster(path)?
    };
    if pixels.shape()[2] == 1 {
        let [h, w, _] = *pixels.shape() else { unreachable!() };
        let data = pixels.data().iter().flat_map(|&v| [v, v, v]).collect();
        pixels = Tensor::new(&[h, w, 3], data)?;
    }
    let mut out = resize_bilinear(&pixels, size, size)?;
    for v in out.data_mut() {
        *v = (*v / 255.0).clamp(0.0, 1.0);
    }
    Ok(out)
}
