use freeshap::kernel::read_kernel_header;
use freeshap::{read_kernel, write_kernel, Error, KernelStore, Layout};

/// Expected file bytes assembled by hand from the format description.
fn hand_encoded(n: u32, m: u32, c: u32, layout: u8, payload: &[f64]) -> Vec<u8> {
    let mut b = b"ENTKFMT1".to_vec();
    for v in [1u32, n, m, c] {
        b.extend(v.to_le_bytes());
    }
    b.extend([layout, 0, 0, 0]);
    for v in payload {
        b.extend(v.to_le_bytes());
    }
    b
}

#[test]
fn file_bytes_follow_the_format() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (Layout::Shared0, 0u8, 2 * 3usize),
        (Layout::PerClass1, 1, 2 * 2 * 3),
        (Layout::Full2, 2, 3 * 2 * 2 * 2),
    ];
    for (layout, code, len) in cases {
        let payload: Vec<f64> = (0..len).map(|i| 1.0 + (i % 3) as f64 * 0.25).collect();
        let store = KernelStore::new(2, 1, 2, layout, payload.clone()).unwrap();
        let path = dir.path().join(format!("k{code}.bin"));
        write_kernel(&store, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes, hand_encoded(2, 1, 2, code, &payload));
        let back = read_kernel(&path).unwrap();
        assert_eq!(back, store);
        assert!(back.data().iter().zip(&payload).all(|(a, b)| a.to_bits() == b.to_bits()));
        let header = read_kernel_header(&path).unwrap();
        assert_eq!((header.n_train, header.n_test, header.n_classes, header.layout), (2, 1, 2, layout));
    }
}

#[test]
fn damaged_files_are_rejected() {
    let good = hand_encoded(1, 1, 2, 0, &[1.0, 0.5]);
    assert!(KernelStore::from_bytes(&good).is_ok());

    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(matches!(KernelStore::from_bytes(&magic), Err(Error::BadMagic { .. })));

    let mut version = good.clone();
    version[8] = 2;
    assert!(matches!(KernelStore::from_bytes(&version), Err(Error::VersionMismatch { found: 2, .. })));

    assert!(matches!(KernelStore::from_bytes(&good[..good.len() - 1]), Err(Error::Truncated { .. })));
    assert!(matches!(KernelStore::from_bytes(&good[..10]), Err(Error::Truncated { .. })));

    let mut trailing = good.clone();
    trailing.push(0);
    assert!(KernelStore::from_bytes(&trailing).is_err());

    let mut layout = good.clone();
    layout[24] = 7;
    assert!(KernelStore::from_bytes(&layout).is_err());

    let nan = hand_encoded(1, 1, 2, 0, &[1.0, f64::NAN]);
    assert!(matches!(KernelStore::from_bytes(&nan), Err(Error::NonFinite { offset: 1 })));
}
