//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code under test except to
//! build inputs.
#![allow(dead_code)]

use std::path::Path;

use lungnet::data::{load_samples, scan_dataset, split_dataset, synth_dataset, DatasetSplit, Sample};
use lungnet::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor<f32> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Textbook triple loop, `i-j-t` order, accumulating in ascending `t`.
pub fn naive_matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut c = vec![0.0f32; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0f32;
            for t in 0..k {
                acc += a[i * k + t] * b[t * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    c
}

/// Valid 3×3 stride-1 convolution by direct summation in f64.
///
/// `x` is HWC, `w` is `[kh, kw, cin, cout]`, result is HWC.
pub fn direct_conv(x: &Tensor<f32>, w: &Tensor<f32>, b: &Tensor<f32>) -> Vec<f64> {
    let (h, wd, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (k, cout) = (w.shape()[0], w.shape()[3]);
    let (oh, ow) = (h - k + 1, wd - k + 1);
    let xv = |i: usize, j: usize, c: usize| x.data()[(i * wd + j) * cin + c] as f64;
    let wv = |u: usize, v: usize, c: usize, o: usize| w.data()[((u * k + v) * cin + c) * cout + o] as f64;
    let mut out = Vec::with_capacity(oh * ow * cout);
    for i in 0..oh {
        for j in 0..ow {
            for o in 0..cout {
                let mut acc = b.data()[o] as f64;
                for u in 0..k {
                    for v in 0..k {
                        for c in 0..cin {
                            acc += xv(i + u, j + v, c) * wv(u, v, c, o);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Numerically stable softmax in f64.
pub fn softmax64(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Synthesizes a dataset under `root` and loads it the same way `train` does.
pub fn synth_split(root: &Path, per_class: usize, seed: u64, size: usize, ratio: f64) -> (DatasetSplit<Sample>, Vec<String>) {
    synth_dataset(root, per_class, seed, size).unwrap();
    let scanned = scan_dataset(root).unwrap();
    let split = split_dataset(&scanned.entries, ratio, seed).unwrap();
    let data = DatasetSplit {
        train: load_samples(&split.train, size).unwrap(),
        val: load_samples(&split.val, size).unwrap(),
        seed,
    };
    (data, scanned.classes.names().to_vec())
}

/// Path to the compiled command-line binary.
pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lungnet")
}
