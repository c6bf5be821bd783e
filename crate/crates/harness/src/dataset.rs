//! Labeled image sets: a self-contained procedural dataset that needs no
//! downloads, and a loader for IDX ubyte files.

use std::path::Path;

use wgap_core::numerics::{prng_stream, Prng};
use wgap_core::{Error, Result, Tensor};

pub const SYNTH_CLASSES: usize = 10;
pub const SYNTH_SIDE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Images with class labels. Pixels live in [0, 1]; every label is below
/// `num_classes`; `images` and `labels` have equal length.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Shape shared by every image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images[0].shape();
        [s[0], s[1], s[2]]
    }

    /// Keeps only the first `n` samples; `n = 0` keeps everything.
    pub fn truncate(&mut self, n: usize) {
        if n > 0 && n < self.images.len() {
            self.images.truncate(n);
            self.labels.truncate(n);
        }
    }
}

/// Ten procedural texture/shape classes on 1x32x32 grids, `n_per_class`
/// each, interleaved so any prefix stays nearly balanced. Every sample gets
/// its own stream split off the seed, so content is deterministic and two
/// seeds give different jitter with the same class structure.
pub fn synth_dataset(seed: u64, n_per_class: usize) -> Dataset {
    assert!(n_per_class >= 1, "n_per_class must be at least 1");
    let mut root = prng_stream(seed);
    let n = SYNTH_CLASSES * n_per_class;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % SYNTH_CLASSES;
        let mut rng = root.split();
        images.push(render_class(class, &mut rng));
        labels.push(class);
    }
    Dataset {
        images,
        labels,
        num_classes: SYNTH_CLASSES,
        split: Split::Train,
    }
}

/// One sample of `class` with seed-driven jitter in position, phase, and
/// amplitude. Background sits at 0.1 and feature amplitude in [0.6, 0.9],
/// so everything stays inside [0, 1].
fn render_class(class: usize, rng: &mut Prng) -> Tensor {
    let side = SYNTH_SIDE;
    let bg = 0.1;
    let amp: f64 = rng.uniform_in(0.6, 0.9);
    let mut img = Tensor::filled(&[1, side, side], bg);
    match class {
        // Bars at four orientations: phase-jittered stripes of period 8.
        // Positional jitter here and below is quantized to the stride-4
        // lattice so features land on a small menu of grid alignments;
        // amplitude jitter stays continuous.
        0..=3 => {
            let phase = 4 * rng.below(2);
            for y in 0..side {
                for x in 0..side {
                    let t = match class {
                        0 => y,
                        1 => x,
                        2 => x + y,
                        _ => x + (side - 1 - y),
                    };
                    if (t + phase) % 8 < 4 {
                        img.set3(0, y, x, bg + amp);
                    }
                }
            }
        }
        // Filled disk with jittered center and radius, one-pixel soft edge.
        4 => {
            let cx = (12 + 4 * rng.below(3)) as f64;
            let cy = (12 + 4 * rng.below(3)) as f64;
            let r = (6 + 2 * rng.below(3)) as f64;
            for y in 0..side {
                for x in 0..side {
                    let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                    let edge = (0.5 + r - d).clamp(0.0, 1.0);
                    img.set3(0, y, x, bg + amp * edge);
                }
            }
        }
        // Checkerboards at two cell sizes; the fine one is almost pure
        // finest-scale detail, the coarse one is not. The fine lattice is
        // fixed (cells smaller than the jitter quantum), the coarse one
        // shifts by half a cell.
        5 | 6 => {
            let cell = if class == 5 { 8 } else { 2 };
            let px = if class == 5 { 4 * rng.below(2) } else { 0 };
            let py = if class == 5 { 4 * rng.below(2) } else { 0 };
            for y in 0..side {
                for x in 0..side {
                    if ((y + py) / cell + (x + px) / cell) % 2 == 0 {
                        img.set3(0, y, x, bg + amp);
                    }
                }
            }
        }
        // Corner gradient: a smooth ramp with a jittered axis mix.
        7 => {
            let ax = rng.uniform_in(0.3, 0.7);
            let denom = (side - 1) as f64;
            for y in 0..side {
                for x in 0..side {
                    let t = ax * x as f64 / denom + (1.0 - ax) * y as f64 / denom;
                    img.set3(0, y, x, bg + amp * t);
                }
            }
        }
        // Annulus with jittered center, radius, and width.
        8 => {
            let cx = (12 + 4 * rng.below(2)) as f64;
            let cy = (12 + 4 * rng.below(2)) as f64;
            let r0 = (8 + 2 * rng.below(3)) as f64;
            let w = 1.5 + rng.below(2) as f64;
            for y in 0..side {
                for x in 0..side {
                    let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                    let edge = (0.5 + w - (d - r0).abs()).clamp(0.0, 1.0);
                    img.set3(0, y, x, bg + amp * edge);
                }
            }
        }
        // Box-blurred uniform noise, min-max rescaled onto [bg, bg + amp].
        9 => {
            let mut v: Vec<f64> = (0..side * side).map(|_| rng.uniform::<f64>()).collect();
            for _ in 0..2 {
                v = box_blur(&v, side);
            }
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(1e-12);
            for (dst, s) in img.data_mut().iter_mut().zip(&v) {
                *dst = bg + amp * (s - lo) / span;
            }
        }
        _ => unreachable!("class index out of range"),
    }
    img
}

/// 3x3 mean filter with clamped borders.
fn box_blur(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for y in 0..side {
        for x in 0..side {
            let mut acc = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let yy = (y as i64 + dy).clamp(0, side as i64 - 1) as usize;
                    let xx = (x as i64 + dx).clamp(0, side as i64 - 1) as usize;
                    acc += v[yy * side + xx];
                }
            }
            out[y * side + x] = acc / 9.0;
        }
    }
    out
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        ByteReader { bytes, pos: 0, path }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "{}: truncated at byte {}: needed {n} bytes for {what}, file has {}",
                self.path.display(),
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after declared data (byte {})",
                self.path.display(),
                self.bytes.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

/// Loads an IDX ubyte image/label pair (magics 0x00000803 / 0x00000801,
/// big-endian headers). Pixels are scaled to [0, 1]; 28x28 images are
/// zero-padded to 32x32 centered so extents divide 2^3 without resampling.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = std::fs::read(images_path)?;
    let lab_bytes = std::fs::read(labels_path)?;

    let mut r = ByteReader::new(&img_bytes, images_path);
    let magic = r.u32_be("image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{}: image magic 0x{magic:08x} at byte 0, expected 0x{IDX_IMAGE_MAGIC:08x}",
            images_path.display()
        )));
    }
    let count = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    if count == 0 {
        return Err(Error::Format(format!(
            "{}: declares zero images",
            images_path.display()
        )));
    }
    let pad = rows == 28 && cols == 28;
    if !pad && (rows == 0 || cols == 0 || rows % 8 != 0 || cols % 8 != 0) {
        return Err(Error::Format(format!(
            "{}: {rows}x{cols} images are not 28x28 and not divisible by 8",
            images_path.display()
        )));
    }
    let (out_h, out_w) = if pad { (32, 32) } else { (rows, cols) };
    let (off_y, off_x) = ((out_h - rows) / 2, (out_w - cols) / 2);
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let raw = r.take(rows * cols, &format!("pixels of image {i}"))?;
        let mut img = Tensor::zeros(&[1, out_h, out_w]);
        for y in 0..rows {
            for x in 0..cols {
                img.set3(0, off_y + y, off_x + x, raw[y * cols + x] as f64 / 255.0);
            }
        }
        images.push(img);
    }
    r.done()?;

    let mut r = ByteReader::new(&lab_bytes, labels_path);
    let magic = r.u32_be("label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{}: label magic 0x{magic:08x} at byte 0, expected 0x{IDX_LABEL_MAGIC:08x}",
            labels_path.display()
        )));
    }
    let lab_count = r.u32_be("label count")? as usize;
    if lab_count != count {
        return Err(Error::Format(format!(
            "{} declares {lab_count} labels but {} declares {count} images",
            labels_path.display(),
            images_path.display()
        )));
    }
    let labels: Vec<usize> = r
        .take(lab_count, "label bytes")?
        .iter()
        .map(|&b| b as usize)
        .collect();
    r.done()?;

    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    Ok(Dataset {
        images,
        labels,
        num_classes,
        split: Split::Train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_balanced_interleaved_and_in_range() {
        let ds = synth_dataset(0, 3);
        assert_eq!(ds.len(), 30);
        assert_eq!(ds.num_classes, 10);
        let mut counts = [0usize; 10];
        for (i, &l) in ds.labels.iter().enumerate() {
            assert_eq!(l, i % 10);
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c == 3));
        for img in &ds.images {
            assert_eq!(img.shape(), &[1, 32, 32]);
            assert!(img.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn synth_is_deterministic_and_seed_sensitive() {
        let a = synth_dataset(5, 2);
        let b = synth_dataset(5, 2);
        let c = synth_dataset(6, 2);
        for (x, y) in a.images.iter().zip(&b.images) {
            assert_eq!(x.data(), y.data());
        }
        assert_eq!(a.labels, c.labels);
        let differs = a
            .images
            .iter()
            .zip(&c.images)
            .any(|(x, y)| x.data() != y.data());
        assert!(differs);
    }

    #[test]
    fn synth_classes_are_mutually_distinct() {
        let ds = synth_dataset(3, 1);
        for i in 0..ds.len() {
            for j in (i + 1)..ds.len() {
                let d = ds.images[i].sub(&ds.images[j]).unwrap().max_abs();
                assert!(d > 0.05, "classes {i} and {j} nearly identical");
            }
        }
    }

    // 8x8 frames: small enough to write by hand, large enough to pass the
    // divisibility precondition.
    fn idx_pair(n_images: u32, fill: u8, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&n_images.to_be_bytes());
        img.extend_from_slice(&8u32.to_be_bytes());
        img.extend_from_slice(&8u32.to_be_bytes());
        img.extend_from_slice(&vec![fill; 64 * n_images as usize]);
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lab.extend_from_slice(labels);
        (img, lab)
    }

    fn write_pair(dir: &Path, img: &[u8], lab: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("imgs.idx");
        let lp = dir.join("labs.idx");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_loader_scales_and_keeps_small_sizes() {
        let dir = tempfile::tempdir().unwrap();
        // 2x2 is rejected (not divisible by 8), so build 8x8 frames instead.
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&8u32.to_be_bytes());
        img.extend_from_slice(&8u32.to_be_bytes());
        img.extend_from_slice(&[255u8; 64]);
        img.extend_from_slice(&[0u8; 64]);
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&[7, 1]);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);

        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![7, 1]);
        assert_eq!(ds.num_classes, 8);
        assert_eq!(ds.images[0].shape(), &[1, 8, 8]);
        assert!(ds.images[0].data().iter().all(|&v| v == 1.0));
        assert!(ds.images[1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn idx_loader_pads_28x28_to_centered_32x32() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        img.extend_from_slice(&1u32.to_be_bytes());
        img.extend_from_slice(&28u32.to_be_bytes());
        img.extend_from_slice(&28u32.to_be_bytes());
        img.extend_from_slice(&[255u8; 28 * 28]);
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        lab.extend_from_slice(&1u32.to_be_bytes());
        lab.push(3);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);

        let ds = load_idx(&ip, &lp).unwrap();
        let x = &ds.images[0];
        assert_eq!(x.shape(), &[1, 32, 32]);
        assert_eq!(x.at3(0, 0, 0), 0.0);
        assert_eq!(x.at3(0, 1, 16), 0.0);
        assert_eq!(x.at3(0, 2, 2), 1.0);
        assert_eq!(x.at3(0, 29, 29), 1.0);
        assert_eq!(x.at3(0, 30, 16), 0.0);
    }

    #[test]
    fn idx_loader_rejects_bad_magic_truncation_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (mut img, lab) = idx_pair(1, 9, &[0]);
        img[3] = 0x99;
        let (ip, lp) = write_pair(dir.path(), &img, &lab);
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("0x00000899") && err.contains("0x00000803"), "{err}");

        // Header promises one 8x8 image; cut the pixel payload short.
        let (img, lab) = idx_pair(1, 9, &[0]);
        let (ip, lp) = write_pair(dir.path(), &img[..20], &lab);
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("truncated at byte 16"), "{err}");

        let (img, lab) = idx_pair(1, 9, &[0, 5]);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("2 labels") && err.contains("1 images"), "{err}");

        let (mut img, lab) = idx_pair(1, 9, &[0]);
        img.push(0);
        let (ip, lp) = write_pair(dir.path(), &img, &lab);
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("trailing"), "{err}");

        let (img, lab) = idx_pair(1, 9, &[0]);
        let mut bad = img.clone();
        bad[11] = 12; // 12x8 images: neither 28x28 nor divisible by 8
        let (ip, lp) = write_pair(dir.path(), &bad, &lab);
        let err = load_idx(&ip, &lp).unwrap_err().to_string();
        assert!(err.contains("divisible by 8"), "{err}");
    }
}
