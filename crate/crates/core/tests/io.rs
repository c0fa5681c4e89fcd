mod common;

use std::fs;

use common::*;
use texbias_core::volume::{
    load_labelmap, load_volume, normalize_zmuv, save_labelmap, save_volume, LabelMap, Volume3D,
    VolumeFormat,
};
use texbias_core::Error;

#[test]
fn hand_built_u8_and_f32_headers() {
    let dir = tempfile::tempdir().unwrap();

    let mut u8_file = nifti_header([3, 2, 2], 2, 8, [1.0, 1.0, 1.0], 0.0, 0.0);
    u8_file.extend((0..12u8).map(|i| i * 20));
    let p = dir.path().join("u8.nii");
    fs::write(&p, &u8_file).unwrap();
    let v = load_volume(&p).unwrap();
    assert_eq!(v.dims(), [3, 2, 2]);
    // Slope 0 means the stored values are used as is.
    assert_eq!(v.data(), (0..12).map(|i| (i * 20) as f64).collect::<Vec<_>>().as_slice());

    let values: Vec<f32> = (0..8).map(|i| i as f32 * 0.25 - 1.0).collect();
    let mut f32_file = nifti_header([2, 2, 2], 16, 32, [0.5, 0.5, 3.0], 2.0, -1.0);
    for x in &values {
        f32_file.extend_from_slice(&x.to_le_bytes());
    }
    let p = dir.path().join("f32.nii.gz");
    fs::write(&p, gzip(&f32_file)).unwrap();
    let v = load_volume(&p).unwrap();
    assert_eq!(v.spacing(), [0.5, 0.5, 3.0]);
    let expect: Vec<f64> = values.iter().map(|&x| 2.0 * x as f64 - 1.0).collect();
    assert_eq!(v.data(), expect.as_slice());
}

#[test]
fn gzip_detection_does_not_rely_on_the_extension() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = nifti_header([2, 1, 1], 2, 8, [1.0; 3], 1.0, 0.0);
    bytes.extend([7u8, 9]);
    let p = dir.path().join("actually_gzipped.nii");
    fs::write(&p, gzip(&bytes)).unwrap();
    assert_eq!(load_volume(&p).unwrap().data(), &[7.0, 9.0]);
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let good = {
        let mut b = nifti_header([2, 2, 2], 2, 8, [1.0; 3], 1.0, 0.0);
        b.extend([1u8; 8]);
        b
    };

    let p = dir.path().join("short.nii");
    fs::write(&p, &good[..good.len() - 3]).unwrap();
    assert!(matches!(load_volume(&p), Err(Error::Truncated { declared: 8, available: 5 })));

    let mut bad_magic = good.clone();
    bad_magic[344..348].copy_from_slice(b"ni1\0");
    let p = dir.path().join("magic.nii");
    fs::write(&p, &bad_magic).unwrap();
    assert!(matches!(load_volume(&p), Err(Error::BadMagic(_))));

    let mut f64_file = good.clone();
    f64_file[70..72].copy_from_slice(&64i16.to_le_bytes());
    let p = dir.path().join("f64.nii");
    fs::write(&p, &f64_file).unwrap();
    assert!(matches!(load_volume(&p), Err(Error::UnsupportedDtype(64))));

    let mut four_d = good;
    four_d[40..42].copy_from_slice(&4i16.to_le_bytes());
    let p = dir.path().join("4d.nii");
    fs::write(&p, &four_d).unwrap();
    assert!(load_volume(&p).is_err());

    assert!(matches!(load_volume(dir.path().join("missing.nii")), Err(Error::Io { .. })));
}

#[test]
fn saved_nifti_header_fields() {
    let dir = tempfile::tempdir().unwrap();
    let v = random_volume([3, 4, 5], 1).with_spacing([0.7, 0.8, 0.9]);
    let p = dir.path().join("v.nii");
    save_volume(&v, &p, VolumeFormat::Nifti).unwrap();
    let b = fs::read(&p).unwrap();
    let i16_at = |o: usize| i16::from_le_bytes([b[o], b[o + 1]]);
    let f32_at = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    assert_eq!(i32::from_le_bytes(b[0..4].try_into().unwrap()), 348);
    assert_eq!(&b[344..348], b"n+1\0");
    assert_eq!([i16_at(40), i16_at(42), i16_at(44), i16_at(46)], [3, 3, 4, 5]);
    assert_eq!(i16_at(70), 16);
    assert_eq!(f32_at(108), 352.0);
    assert_eq!((f32_at(112), f32_at(116)), (1.0, 0.0));
    assert_eq!(b.len(), 352 + 4 * 60);
}

#[test]
fn nifti_round_trip_keeps_f32_precision() {
    let dir = tempfile::tempdir().unwrap();
    let v = normalize_zmuv(&random_volume([10, 9, 8], 2)).unwrap();
    for name in ["a.nii", "a.nii.gz"] {
        let p = dir.path().join(name);
        save_volume(&v, &p, VolumeFormat::Nifti).unwrap();
        let back = load_volume(&p).unwrap();
        assert_eq!(back.dims(), v.dims());
        for (a, b) in v.data().iter().zip(back.data()) {
            assert_eq!(*b, *a as f32 as f64);
        }
    }
}

#[test]
fn raw_payload_layout() {
    let dir = tempfile::tempdir().unwrap();
    let v = Volume3D::from_fn([3, 2, 2], |x, y, z| (x + 10 * y + 100 * z) as f64).unwrap();
    let p = dir.path().join("ramp.vol.json");
    save_volume(&v, &p, VolumeFormat::from_path(&p)).unwrap();
    let payload = fs::read(dir.path().join("ramp.vol.bin")).unwrap();
    let floats: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    assert_eq!(floats, vec![0., 1., 2., 10., 11., 12., 100., 101., 102., 110., 111., 112.]);
    let back = load_volume(&p).unwrap();
    assert_eq!(back, v);
}

#[test]
fn label_maps_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let lm = random_labels([6, 5, 4], 10, 3);
    for name in ["seg.nii.gz", "seg.vol.json"] {
        let p = dir.path().join(name);
        save_labelmap(&lm, &p).unwrap();
        let back = load_labelmap(&p, Some(10)).unwrap();
        assert_eq!(back.labels(), lm.labels());
        assert_eq!(back.num_classes(), 10);
    }
    let small = LabelMap::new([2, 1, 1], vec![0, 2], 5).unwrap();
    let p = dir.path().join("small.nii");
    save_labelmap(&small, &p).unwrap();
    assert_eq!(load_labelmap(&p, None).unwrap().num_classes(), 3);
    assert!(load_labelmap(&p, Some(2)).is_err());
}
