mod common;

use std::fs;
use std::path::Path;

use rdcnn::data::{
    augment, dataset_to_raw, load_cifar, load_idx, load_mnist, load_raw, load_stl10, Augmentation,
    CifarVariant, Split,
};
use rdcnn::persistence::write_raw_images;
use rdcnn::{Error, ImageTensor, Normalization};
use tempfile::tempdir;

fn idx_bytes(magic: u32, dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

fn write_idx_pair(dir: &Path, images: &[u8], labels: &[u8], n: u32) -> (std::path::PathBuf, std::path::PathBuf) {
    let ip = dir.join("images");
    let lp = dir.join("labels");
    fs::write(&ip, idx_bytes(0x803, &[n, 3, 2], images)).unwrap();
    fs::write(&lp, idx_bytes(0x801, &[n], labels)).unwrap();
    (ip, lp)
}

#[test]
fn idx_fixture_decodes_exactly() {
    let dir = tempdir().unwrap();
    let pixels: Vec<u8> = (0..12).map(|i| i * 20).collect();
    let (ip, lp) = write_idx_pair(dir.path(), &pixels, &[7, 2], 2);
    let ds = load_idx(&ip, &lp, false).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.shape(), Some((1, 3, 2)));
    assert_eq!(ds.labels.as_deref(), Some(&[7, 2][..]));
    assert_eq!(ds.class_count, 8);
    let flat: Vec<f32> = ds.images.iter().flat_map(|im| im.data().to_vec()).collect();
    assert_eq!(flat, pixels.iter().map(|&p| p as f32).collect::<Vec<_>>());
    assert_eq!(ds.images[1].get(0, 2, 1), 220.0);
}

#[test]
fn idx_padding_centres_the_digit() {
    let dir = tempdir().unwrap();
    let ip = dir.path().join("i");
    let lp = dir.path().join("l");
    let pixels: Vec<u8> = (0..28 * 28).map(|i| (i % 251) as u8).collect();
    fs::write(&ip, idx_bytes(0x803, &[1, 28, 28], &pixels)).unwrap();
    fs::write(&lp, idx_bytes(0x801, &[1], &[4])).unwrap();
    let ds = load_idx(&ip, &lp, true).unwrap();
    let im = &ds.images[0];
    assert_eq!(im.shape(), (1, 32, 32));
    assert_eq!(im.get(0, 2, 2), pixels[0] as f32);
    assert_eq!(im.get(0, 29, 29), pixels[28 * 28 - 1] as f32);
    assert_eq!(im.get(0, 0, 5), 0.0);
    assert_eq!(im.get(0, 31, 31), 0.0);
}

#[test]
fn idx_errors_carry_offsets() {
    let dir = tempdir().unwrap();
    let (ip, lp) = write_idx_pair(dir.path(), &[0; 12], &[1, 2], 2);
    let bad = dir.path().join("bad");
    fs::write(&bad, idx_bytes(0x802, &[2, 3, 2], &[0; 12])).unwrap();
    match load_idx(&bad, &lp, false) {
        Err(Error::Decode { offset: 0, reason, .. }) => assert!(reason.contains("magic")),
        other => panic!("{other:?}"),
    }
    let short = dir.path().join("short");
    fs::write(&short, idx_bytes(0x803, &[2, 3, 2], &[0; 10])).unwrap();
    match load_idx(&short, &lp, false) {
        Err(Error::Decode { offset, .. }) => assert_eq!(offset, 26),
        other => panic!("{other:?}"),
    }
    let few = dir.path().join("few");
    fs::write(&few, idx_bytes(0x801, &[3], &[0; 3])).unwrap();
    match load_idx(&ip, &few, false) {
        Err(Error::Decode { offset: 4, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_idx(&dir.path().join("none"), &lp, false), Err(Error::Io { .. })));
}

fn cifar_record(label_bytes: &[u8], seed: u8) -> Vec<u8> {
    let mut rec = label_bytes.to_vec();
    rec.extend((0..3072u32).map(|i| (i as u8).wrapping_mul(seed)));
    rec
}

#[test]
fn cifar_fixture_decodes_exactly() {
    let dir = tempdir().unwrap();
    let mut bytes = cifar_record(&[3], 1);
    bytes.extend(cifar_record(&[9], 7));
    fs::write(dir.path().join("test_batch.bin"), &bytes).unwrap();
    // the loader insists on the standard record count
    match load_cifar(dir.path(), CifarVariant::Cifar10, Split::Test) {
        Err(Error::Decode { reason, .. }) => assert!(reason.contains("10000 records"), "{reason}"),
        other => panic!("{other:?}"),
    }
    let (images, labels) =
        rdcnn::data::decode_cifar_batch(Path::new("fixture"), &bytes, CifarVariant::Cifar10).unwrap();
    assert_eq!(labels, [3, 9]);
    let im = &images[1];
    assert_eq!(im.shape(), (3, 32, 32));
    // R plane then G then B, each row-major
    assert_eq!(im.get(0, 0, 5), (5u8.wrapping_mul(7)) as f32);
    assert_eq!(im.get(1, 1, 0), ((1024 + 32) as u32 as u8).wrapping_mul(7) as f32);
    assert_eq!(im.get(2, 31, 31), (3071u32 as u8).wrapping_mul(7) as f32);
}

#[test]
fn cifar100_uses_fine_labels() {
    let mut bytes = cifar_record(&[4, 87], 3);
    bytes.extend(cifar_record(&[19, 99], 5));
    let (_, labels) =
        rdcnn::data::decode_cifar_batch(Path::new("fixture"), &bytes, CifarVariant::Cifar100).unwrap();
    assert_eq!(labels, [87, 99]);
    assert!(labels.iter().all(|&l| l < 100));
}

#[test]
fn stl10_column_major_round_trip() {
    let side = 96;
    let image = ImageTensor::from_fn(3, side, side, |c, y, x| ((c * 31 + y * 7 + x * 3) % 256) as f32).unwrap();
    let mut bytes = vec![0u8; 3 * side * side];
    for c in 0..3 {
        for y in 0..side {
            for x in 0..side {
                bytes[c * side * side + x * side + y] = image.get(c, y, x) as u8;
            }
        }
    }
    let (images, labels) =
        rdcnn::data::decode_stl10(Path::new("x"), &bytes, Path::new("y"), &[10]).unwrap();
    assert_eq!(labels, [9]);
    assert_eq!(images[0], image);
    assert!(rdcnn::data::decode_stl10(Path::new("x"), &bytes, Path::new("y"), &[0]).is_err());
    assert!(rdcnn::data::decode_stl10(Path::new("x"), &bytes[1..], Path::new("y"), &[1]).is_err());

    let dir = tempdir().unwrap();
    fs::write(dir.path().join("test_X.bin"), &bytes).unwrap();
    fs::write(dir.path().join("test_y.bin"), [10]).unwrap();
    match load_stl10(dir.path(), Split::Test) {
        Err(Error::Decode { reason, .. }) => assert!(reason.contains("8000 records"), "{reason}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn raw_round_trip_through_dataset() {
    let dir = tempdir().unwrap();
    let image = ImageTensor::from_fn(2, 5, 4, |c, y, x| (c * 50 + y * 9 + x) as f32).unwrap();
    let ds = rdcnn::data::Dataset::new("t", vec![image.clone(), image.scaled(2.0).unwrap()], Some(vec![0, 1]), 2)
        .unwrap();
    let path = dir.path().join("imgs.rdim");
    write_raw_images(&dataset_to_raw(&ds).unwrap(), &path).unwrap();
    let back = load_raw(&path).unwrap();
    assert_eq!(back.images, ds.images);
    assert_eq!(back.labels, ds.labels);
}

#[test]
fn normalization_maps_pixel_range_exactly() {
    assert_eq!(Normalization::Unit.apply(0.0), 0.0);
    assert_eq!(Normalization::Unit.apply(255.0), 1.0);
    assert_eq!(Normalization::Symmetric.apply(0.0), -1.0);
    assert_eq!(Normalization::Symmetric.apply(255.0), 1.0);
    assert_eq!(Normalization::None.apply(17.0), 17.0);
    for p in 0..=255 {
        assert!((0.0..=1.0).contains(&Normalization::Unit.apply(p as f32)));
        assert!((-1.0..=1.0).contains(&Normalization::Symmetric.apply(p as f32)));
    }
}

#[test]
fn augmentations_keep_shape() {
    let image = ImageTensor::from_fn(3, 9, 7, |c, y, x| (c + y * x) as f32).unwrap();
    for op in [
        Augmentation::HFlip,
        Augmentation::Rotate(12.5),
        Augmentation::Rotate(-400.0),
        Augmentation::Cutout { size: 3, seed: 2 },
    ] {
        assert_eq!(augment(&image, op).unwrap().shape(), image.shape());
    }
}

#[test]
fn real_mnist_when_present() {
    let dir = common::data_dir();
    if !dir.join("mnist").join("t10k-images-idx3-ubyte").exists() {
        eprintln!("MNIST not found under {}, skipping", dir.display());
        return;
    }
    let test = load_mnist(&dir, Split::Test, false).unwrap();
    assert_eq!(test.len(), 10_000);
    assert_eq!(test.class_count, 10);
    assert_eq!(test.shape(), Some((1, 28, 28)));
    let train = load_mnist(&dir, Split::Train, false).unwrap();
    assert_eq!(train.len(), 60_000);
}
