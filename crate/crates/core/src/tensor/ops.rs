use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn matrix_dims<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::dim(format!(
            "{what} must be rank 2, got shape {:?}",
            t.shape()
        ))),
    }
}

/// Matrix product `a · b`.
///
/// Every output element accumulates its products in ascending inner index
/// starting from zero, so results are bit-reproducible and identical to a
/// naive triple loop.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = matrix_dims(a, "left operand")?;
    let (k2, n) = matrix_dims(b, "right operand")?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner extents disagree: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![T::zero(); m * n];
    for (i, row) in out.chunks_exact_mut(n).enumerate() {
        let a_row = &ad[i * k..(i + 1) * k];
        // i-t-j order still adds terms to each c[i][j] in ascending t.
        for (t, &a_it) in a_row.iter().enumerate() {
            let b_row = &bd[t * n..(t + 1) * n];
            for (c, &b_tj) in row.iter_mut().zip(b_row) {
                *c = *c + a_it * b_tj;
            }
        }
    }
    Tensor::new(&[m, n], out)
}

pub fn transpose<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, n) = matrix_dims(a, "operand")?;
    let d = a.data();
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    Tensor::new(&[n, m], out)
}

fn image_dims<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::dim(format!(
            "expected an [H, W, C] image tensor, got shape {:?}",
            t.shape()
        ))),
    }
}

/// Unrolls every valid `kernel × kernel` patch (stride 1) into one row.
///
/// Output is `[(H-k+1)·(W-k+1), k·k·C]`; rows enumerate output positions
/// row-major and each row is laid out in `(kh, kw, c)` order.
pub fn im2col<T: Scalar>(input: &Tensor<T>, kernel: usize) -> Result<Tensor<T>> {
    let (h, w, c) = image_dims(input)?;
    if kernel == 0 || h < kernel || w < kernel {
        return Err(Error::dim(format!(
            "input {:?} is smaller than the {kernel}x{kernel} kernel",
            input.shape()
        )));
    }
    let (oh, ow) = (h - kernel + 1, w - kernel + 1);
    let row_len = kernel * kernel * c;
    let src = input.data();
    let mut out = Vec::with_capacity(oh * ow * row_len);
    for i in 0..oh {
        for j in 0..ow {
            for u in 0..kernel {
                let start = ((i + u) * w + j) * c;
                // kw and c are contiguous in HWC layout.
                out.extend_from_slice(&src[start..start + kernel * c]);
            }
        }
    }
    Tensor::new(&[oh * ow, row_len], out)
}

/// Inverse scatter of [`im2col`]: sums each patch row back into an image.
pub(crate) fn col2im<T: Scalar>(
    cols: &Tensor<T>,
    (h, w, c): (usize, usize, usize),
    kernel: usize,
) -> Result<Tensor<T>> {
    let (oh, ow) = (h - kernel + 1, w - kernel + 1);
    let row_len = kernel * kernel * c;
    cols.expect_shape(&[oh * ow, row_len])?;
    let mut out = vec![T::zero(); h * w * c];
    let src = cols.data();
    for i in 0..oh {
        for j in 0..ow {
            let row = &src[(i * ow + j) * row_len..(i * ow + j + 1) * row_len];
            for u in 0..kernel {
                let start = ((i + u) * w + j) * c;
                let seg = &row[u * kernel * c..(u + 1) * kernel * c];
                for (o, &v) in out[start..start + kernel * c].iter_mut().zip(seg) {
                    *o = *o + v;
                }
            }
        }
    }
    Tensor::new(&[h, w, c], out)
}

/// Index of the maximum element; ties resolve to the smallest index.
pub fn argmax<T: Scalar>(v: &Tensor<T>) -> Result<usize> {
    if v.rank() != 1 {
        return Err(Error::dim(format!(
            "argmax expects a rank-1 tensor, got {:?}",
            v.shape()
        )));
    }
    let mut best = 0;
    for (i, &x) in v.data().iter().enumerate().skip(1) {
        if x > v.data()[best] {
            best = i;
        }
    }
    Ok(best)
}
