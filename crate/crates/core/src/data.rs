//! Labeled image datasets: IDX files, synthetic classes, and stratified folds.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images `(n, 1, h, w)` with pixels in `[0, 1]` and one class index per image.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    images: Tensor,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.batch() != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.batch(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {bad} outside {classes} classes")));
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("pixel values must lie in [0, 1]".into()));
        }
        Ok(LabeledDataset {
            images,
            labels,
            classes,
        })
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[channels, height, width]` of one image.
    pub fn image_shape(&self) -> [usize; 3] {
        let [_, c, h, w] = self.images.shape();
        [c, h, w]
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            images: self.images.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn take(&self, n: usize) -> LabeledDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Stratified holdout: roughly `fraction` of every class goes to the second part.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "holdout fraction {fraction} outside [0, 1)"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut keep, mut held) = (Vec::new(), Vec::new());
        for mut members in self.by_class() {
            members.shuffle(&mut rng);
            let n_held = (members.len() as f64 * fraction).round() as usize;
            held.extend_from_slice(&members[..n_held]);
            keep.extend_from_slice(&members[n_held..]);
        }
        keep.sort_unstable();
        held.sort_unstable();
        Ok((self.subset(&keep), self.subset(&held)))
    }

    fn by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Format(format!("{}: bad gzip stream: {e}", path.display())))?;
    } else {
        let mut file = file;
        file.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        let mut file = file;
        file.write_all(bytes)?;
    }
    Ok(())
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses one IDX buffer with the given magic; returns the dimension sizes and the payload.
fn parse_idx<'a>(bytes: &'a [u8], magic: u32, what: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let observed = be_u32(bytes, 0)
        .ok_or_else(|| Error::Format(format!("{what} file: expected at least 4 bytes, got {}", bytes.len())))?;
    if observed != magic {
        return Err(Error::Format(format!(
            "{what} file: magic 0x{observed:08x}, expected 0x{magic:08x}"
        )));
    }
    let rank = (magic & 0xff) as usize;
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::Format(format!(
            "{what} file truncated: expected {header} header bytes, got {}",
            bytes.len()
        )));
    }
    let dims: Vec<usize> = (0..rank).map(|i| be_u32(bytes, 4 + 4 * i).unwrap() as usize).collect();
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{what} file: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok((dims, &bytes[header..]))
}

/// Builds a dataset from in-memory IDX image and label buffers.
pub fn decode_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledDataset> {
    let (dims, pixels) = parse_idx(image_bytes, IMAGE_MAGIC, "image")?;
    let (ldims, labels) = parse_idx(label_bytes, LABEL_MAGIC, "label")?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    if ldims[0] != n {
        return Err(Error::Data(format!(
            "image file holds {n} images but label file holds {} labels",
            ldims[0]
        )));
    }
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let images = Tensor::new([n, 1, h, w], data)?;
    let labels: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(images, labels, classes)
}

/// Reads an IDX image/label file pair, gunzipping files whose name ends in `.gz`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images = read_maybe_gz(images_path.as_ref())?;
    let labels = read_maybe_gz(labels_path.as_ref())?;
    decode_idx(&images, &labels)
}

/// IDX image and label buffers; pixels are rounded to the nearest `k / 255`.
pub fn encode_idx(dataset: &LabeledDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let [c, h, w] = dataset.image_shape();
    if c != 1 {
        return Err(Error::InvalidArgument(format!(
            "IDX images are single-channel, got {c} channels"
        )));
    }
    if dataset.classes() > 256 {
        return Err(Error::InvalidArgument("IDX labels are single bytes".into()));
    }
    let n = dataset.len();
    let mut images = Vec::with_capacity(16 + n * h * w);
    images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for d in [n, h, w] {
        images.extend_from_slice(&(d as u32).to_be_bytes());
    }
    images.extend(dataset.images().data().iter().map(|&v| (v * 255.0).round() as u8));
    let mut labels = Vec::with_capacity(8 + n);
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());
    labels.extend(dataset.labels().iter().map(|&l| l as u8));
    Ok((images, labels))
}

pub fn write_idx(dataset: &LabeledDataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let (images, labels) = encode_idx(dataset)?;
    write_maybe_gz(images_path.as_ref(), &images)?;
    write_maybe_gz(labels_path.as_ref(), &labels)
}

/// Synthetic classes. Each image holds one striped Gaussian blob: the stripe
/// orientation is set by the class and the stripe phase is random, so no single
/// pixel template separates the classes. The blob also sits near a
/// class-specific point with heavy jitter, and pixels get Gaussian noise.
pub fn synth_classes(classes: usize, per_class: usize, h: usize, w: usize, seed: u64) -> Result<LabeledDataset> {
    if classes == 0 || per_class == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs positive sizes (classes={classes}, per_class={per_class}, h={h}, w={w})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).expect("valid normal");
    let size = h.min(w) as f64;
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let radius = 0.12 * size;
    let sigma = 0.25 * size;
    let jitter = 0.2 * size;
    let wavenumber = std::f64::consts::TAU / 4.0;

    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * h * w);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let ring = std::f64::consts::TAU * class as f64 / classes as f64;
        let theta = std::f64::consts::PI * class as f64 / classes as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        let py = cy + radius * ring.sin() + rng.gen_range(-jitter..=jitter);
        let px = cx + radius * ring.cos() + rng.gen_range(-jitter..=jitter);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let amp = rng.gen_range(0.6..0.9);
        for y in 0..h {
            for x in 0..w {
                let (fy, fx) = (y as f64, x as f64);
                let env = (-((fy - py).powi(2) + (fx - px).powi(2)) / (2.0 * sigma * sigma)).exp();
                let stripes = 0.5 + 0.5 * (wavenumber * (fx * cos_t + fy * sin_t) + phase).cos();
                let v = 0.05 + amp * env * stripes + rng.sample(noise);
                data.push(v.clamp(0.0, 1.0));
            }
        }
        labels.push(class);
    }
    LabeledDataset::new(Tensor::new([n, 1, h, w], data)?, labels, classes)
}

/// Disjoint folds covering every sample index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`; with a single fold, the fold itself.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        if self.k == 1 {
            return self.folds[0].clone();
        }
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shuffles each class with the seed, then deals its members round-robin.
/// The dealing start carries over between classes so fold sizes stay balanced.
pub fn stratified_kfold(dataset: &LabeledDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::InvalidArgument("fold count must be at least 1".into()));
    }
    let groups = dataset.by_class();
    for (class, members) in groups.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} samples, fewer than {k} folds",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut start = 0;
    for mut members in groups {
        members.shuffle(&mut rng);
        for (j, idx) in members.iter().enumerate() {
            folds[(start + j) % k].push(*idx);
        }
        start = (start + members.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_pair() -> (Vec<u8>, Vec<u8>) {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        images.extend_from_slice(&[0, 255, 51, 102, 1, 2, 3, 4]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];
        (images, labels)
    }

    #[test]
    fn decodes_hand_built_pair() {
        let (images, labels) = idx_pair();
        let ds = decode_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.image_shape(), [1, 2, 2]);
        assert_eq!(ds.images().data()[1], 1.0);
        assert_eq!(ds.images().data()[2], 0.2);
        assert_eq!(ds.labels(), &[7, 3]);
        assert_eq!(ds.classes(), 8);
    }

    #[test]
    fn idx_errors() {
        let (images, labels) = idx_pair();
        let err = decode_idx(&labels, &labels).unwrap_err();
        assert!(matches!(&err, Error::Format(m) if m.contains("0x00000801")), "{err}");
        let err = decode_idx(&images[..images.len() - 1], &labels).unwrap_err();
        assert!(
            matches!(&err, Error::Format(m) if m.contains("expected 24 bytes, got 23")),
            "{err}"
        );
        let mut short_labels = labels.clone();
        short_labels[7] = 1;
        short_labels.pop();
        assert!(matches!(decode_idx(&images, &short_labels), Err(Error::Data(_))));
    }

    #[test]
    fn synth_shape_and_determinism() {
        let a = synth_classes(4, 5, 8, 8, 3).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.class_counts(), vec![5; 4]);
        assert_eq!(a, synth_classes(4, 5, 8, 8, 3).unwrap());
        assert_ne!(a, synth_classes(4, 5, 8, 8, 4).unwrap());
        assert!(synth_classes(0, 5, 8, 8, 3).is_err());
    }

    #[test]
    fn synth_class_means_differ() {
        let ds = synth_classes(4, 50, 12, 12, 7).unwrap();
        let plane = 144;
        let mut means = vec![vec![0.0; plane]; 4];
        for (i, &l) in ds.labels().iter().enumerate() {
            for (m, v) in means[l].iter_mut().zip(ds.images().item(i)) {
                *m += v / 50.0;
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                let gap = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                assert!(gap > 0.1, "classes {a} and {b}: {gap}");
            }
        }
    }

    #[test]
    fn kfold_examples() {
        let images = Tensor::zeros([30, 1, 1, 1]);
        let ds = LabeledDataset::new(images, (0..30).map(|i| i % 3).collect(), 3).unwrap();
        let plan = stratified_kfold(&ds, 3, 0).unwrap();
        for fold in &plan.folds {
            assert_eq!(fold.len(), 10);
        }
        let plan = stratified_kfold(&ds, 1, 0).unwrap();
        assert_eq!(plan.folds, vec![(0..30).collect::<Vec<_>>()]);
        assert_eq!(plan.train_indices(0), plan.folds[0]);

        let small = LabeledDataset::new(Tensor::zeros([4, 1, 1, 1]), vec![0, 0, 0, 1], 2).unwrap();
        let err = stratified_kfold(&small, 2, 0).unwrap_err();
        assert!(matches!(&err, Error::Data(m) if m.contains("class 1")), "{err}");
    }

    #[test]
    fn holdout_split_is_stratified() {
        let ds = synth_classes(4, 20, 4, 4, 1).unwrap();
        let (train, val) = ds.split_holdout(0.15, 2).unwrap();
        assert_eq!(val.class_counts(), vec![3; 4]);
        assert_eq!(train.len() + val.len(), 80);
    }
}
