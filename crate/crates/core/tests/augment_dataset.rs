use std::path::Path;

use blurkit::augment::{expand_dataset, AugmentConfig, Manifest};
use blurkit::io::write_image;
use blurkit::{ImageU8, Parallelism};

fn corpus(dir: &Path, n: usize) {
    std::fs::create_dir_all(dir.join("images")).unwrap();
    std::fs::create_dir_all(dir.join("labels")).unwrap();
    for i in 0..n {
        let mut img = ImageU8::filled(40 + i, 36, 3, 0).unwrap();
        for (j, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((j * 31 + i * 7) % 251) as u8;
        }
        write_image(dir.join(format!("images/s{i:02}.png")), &img).unwrap();
        std::fs::write(dir.join(format!("labels/s{i:02}.txt")), format!("{} 0.4 0.5 0.3 0.2\n", i % 4)).unwrap();
    }
}

fn expand(dir: &Path, out: &str, fold: usize) -> Manifest {
    let cfg = AugmentConfig { fold, seed: 5, ..AugmentConfig::default() };
    expand_dataset(&dir.join("images"), &dir.join("labels"), &dir.join(out), &cfg, Parallelism::new(2)).unwrap()
}

fn count(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().count()
}

#[test]
fn threefold_expansion() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 10);
    let manifest = expand(dir.path(), "out", 3);
    let out = dir.path().join("out");
    assert_eq!(count(&out.join("images")), 30);
    assert_eq!(count(&out.join("labels")), 30);
    assert_eq!(manifest.pairs().count(), 20);
    assert_eq!(manifest.warnings().count(), 0);
    for (aug, orig) in manifest.pairs() {
        assert!(out.join(aug).exists() && out.join(orig).exists());
    }
    let lines = std::fs::read_to_string(out.join(Manifest::FILE_NAME)).unwrap();
    assert_eq!(lines.lines().count(), 30);
}

#[test]
fn labels_are_copied_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 4);
    expand(dir.path(), "out", 3);
    let src = std::fs::read(dir.path().join("labels/s02.txt")).unwrap();
    let copies: Vec<_> = std::fs::read_dir(dir.path().join("out/labels"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("s02"))
        .collect();
    assert_eq!(copies.len(), 3);
    for p in copies {
        assert_eq!(std::fs::read(p).unwrap(), src);
    }
}

#[test]
fn fold_one_copies_without_pairs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 3);
    let manifest = expand(dir.path(), "out", 1);
    assert_eq!(manifest.pairs().count(), 0);
    assert_eq!(count(&dir.path().join("out/images")), 3);
}

#[test]
fn same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 5);
    expand(dir.path(), "a", 3);
    expand(dir.path(), "b", 3);
    for sub in ["images", "labels"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a").join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let a = std::fs::read(dir.path().join("a").join(sub).join(&name)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(sub).join(&name)).unwrap();
            assert_eq!(a, b, "{name:?}");
        }
    }
    assert_eq!(
        std::fs::read(dir.path().join("a/manifest.jsonl")).unwrap(),
        std::fs::read(dir.path().join("b/manifest.jsonl")).unwrap()
    );
}

#[test]
fn image_without_labels_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 2);
    std::fs::remove_file(dir.path().join("labels/s01.txt")).unwrap();
    let manifest = expand(dir.path(), "out", 3);
    assert_eq!(manifest.warnings().count(), 1);
    assert_eq!(count(&dir.path().join("out/images")), 3);
}
