mod common;

use common::{random_tensor, rng};
use lungnet::layers::{softmax_cross_entropy, Mode};
use lungnet::model::{
    build_model, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Layer, Preset, Sequential,
};
use lungnet::{Error, Tensor};

fn classes() -> Vec<String> {
    ["adenocarcinoma", "large.cell.carcinoma", "normal", "squamous.cell.carcinoma"]
        .map(String::from)
        .to_vec()
}

fn zero_head(model: &mut Sequential<f32>) {
    let Some(Layer::Dense(head)) = model.layers_mut().last_mut() else {
        panic!("last layer is not dense");
    };
    for p in head.params_mut() {
        p.fill(0.0);
    }
}

#[test]
fn paper_summary_rows() {
    let s = build_model::<f32>(Preset::Paper, 0).unwrap().summary();
    let rows: Vec<(&str, Vec<usize>, usize)> = s
        .rows
        .iter()
        .map(|r| (r.name.as_str(), r.output_shape.clone(), r.params))
        .collect();
    let expected: Vec<(&str, Vec<usize>, usize)> = vec![
        ("conv2d", vec![348, 348, 32], 896),
        ("conv2d_1", vec![346, 346, 32], 9248),
        ("max_pooling2d", vec![173, 173, 32], 0),
        ("conv2d_2", vec![171, 171, 64], 18496),
        ("max_pooling2d_1", vec![85, 85, 64], 0),
        ("conv2d_3", vec![83, 83, 128], 73856),
        ("max_pooling2d_2", vec![41, 41, 128], 0),
        ("dropout", vec![41, 41, 128], 0),
        ("flatten", vec![215168], 0),
        ("dense", vec![64], 13_770_816),
        ("dropout_1", vec![64], 0),
        ("dense_1", vec![4], 260),
    ];
    assert_eq!(rows, expected);
    assert_eq!((s.total_params, s.trainable_params, s.non_trainable_params), (13_873_572, 13_873_572, 0));
    let text = s.to_string();
    assert_eq!(text.lines().last().unwrap(), "Total params: 13,873,572");
}

#[test]
fn tiny_shapes() {
    let m = build_model::<f32>(Preset::Tiny, 0).unwrap();
    assert_eq!(m.input_shape(), &[64, 64, 3]);
    assert_eq!(m.params().len(), 12);
    let flat: Vec<Vec<usize>> = m.shapes();
    assert!(flat.contains(&vec![1152]));
    assert_eq!(flat.last().unwrap(), &vec![4]);
}

#[test]
fn init_is_seeded() {
    let a = build_model::<f32>(Preset::Tiny, 5).unwrap();
    let b = build_model::<f32>(Preset::Tiny, 5).unwrap();
    let c = build_model::<f32>(Preset::Tiny, 6).unwrap();
    assert_eq!(a.params(), b.params());
    assert_ne!(a.params(), c.params());
    // Biases start at zero.
    assert!(a.params()[1].data().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_head_gives_uniform_loss() {
    let mut m = build_model::<f32>(Preset::Tiny, 3).unwrap();
    zero_head(&mut m);
    let mut r = rng(4);
    for class in 0..4 {
        let x = random_tensor(&mut r, &[64, 64, 3], 0.0, 1.0);
        let out = softmax_cross_entropy(&m.infer(&x).unwrap(), class).unwrap();
        assert!((out.loss as f64 - 4f64.ln()).abs() < 1e-6);
    }
}

#[test]
fn backward_requires_training_forward() {
    let mut m = build_model::<f32>(Preset::Tiny, 1).unwrap();
    let g = Tensor::zeros(&[4]).unwrap();
    assert!(matches!(m.backward(&g), Err(Error::State(_))));
    let x = Tensor::zeros(&[64, 64, 3]).unwrap();
    m.forward(&x, Mode::Infer).unwrap();
    assert!(matches!(m.backward(&g), Err(Error::State(_))));
    m.forward(&x, Mode::Train).unwrap();
    assert_eq!(m.backward(&g).unwrap().len(), 12);
}

#[test]
fn forward_rejects_wrong_input() {
    let mut m = build_model::<f32>(Preset::Tiny, 1).unwrap();
    let x = Tensor::zeros(&[32, 32, 3]).unwrap();
    assert!(matches!(m.forward(&x, Mode::Train), Err(Error::Dimension(_))));
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cnck");
    let m = build_model::<f32>(Preset::Tiny, 8).unwrap();
    save_checkpoint(&m, &classes(), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"CNCK");
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.classes, classes());
    assert_eq!(loaded.model.params(), m.params());
    assert_eq!(encode_checkpoint(&loaded.model, &loaded.classes).unwrap(), bytes);

    let mut r = rng(9);
    let x = random_tensor(&mut r, &[64, 64, 3], 0.0, 1.0);
    assert_eq!(loaded.model.infer(&x).unwrap(), m.infer(&x).unwrap());
}

#[test]
fn checkpoint_rejects_corruption() {
    let m = build_model::<f32>(Preset::Tiny, 8).unwrap();
    let bytes = encode_checkpoint(&m, &classes()).unwrap();
    for cut in [0, 3, 8, 12, 40, bytes.len() - 1] {
        assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Format { .. })), "cut {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(decode_checkpoint(&extra), Err(Error::Format { .. })));
    let mut bad_version = bytes;
    bad_version[4] = 2;
    assert!(matches!(decode_checkpoint(&bad_version), Err(Error::Format { .. })));
}

#[test]
fn checkpoint_load_missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_checkpoint(dir.path().join("none.cnck")), Err(Error::Io { .. })));
}
