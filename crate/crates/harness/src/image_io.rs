//! Binary PGM (P5, one channel) and PPM (P6, three channels) files at 8
//! bits per sample. Roundtrips lose only the [0, 1] -> 0..=255 quantization.

use std::path::Path;

use wgap_core::numerics::clamp01;
use wgap_core::{Error, Result, Tensor};

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a `[1, h, w]` tensor as PGM or a `[3, h, w]` tensor as PPM.
/// Values are clamped to [0, 1] and quantized to 8 bits.
pub fn write_image(path: &Path, img: &Tensor) -> Result<()> {
    let shape = img.shape();
    if img.rank() != 3 || !(shape[0] == 1 || shape[0] == 3) {
        return Err(Error::Shape(format!(
            "image files need [1|3, h, w] tensors, got {shape:?}"
        )));
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                bytes.push(quantize(img.at3(ch, y, x)));
            }
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

struct PnmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> PnmReader<'a> {
    fn fail(&self, msg: &str) -> Error {
        Error::Format(format!("{}: {msg} (byte {})", self.path.display(), self.pos))
    }

    /// Next header token, skipping whitespace and `#` comments.
    fn token(&mut self, what: &str) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), None | Some(b'\n')) {
                        self.pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(self.fail(&format!("missing {what}"))),
            }
        }
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.token(what)?;
        t.parse()
            .map_err(|_| self.fail(&format!("{what} `{t}` is not a number")))
    }
}

/// Reads a binary PGM/PPM file into a `[c, h, w]` tensor scaled to [0, 1].
/// Header comments are allowed; the max sample value must be 255.
pub fn read_image(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    let mut r = PnmReader { bytes: &bytes, pos: 0, path };
    let magic = r.token("magic")?;
    let c = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(r.fail(&format!("magic `{other}`, expected P5 or P6"))),
    };
    let w = r.number("width")?;
    let h = r.number("height")?;
    let maxval = r.number("max value")?;
    if w == 0 || h == 0 {
        return Err(r.fail("zero image extent"));
    }
    if maxval != 255 {
        return Err(r.fail(&format!("max value {maxval}, only 255 is supported")));
    }
    // Exactly one whitespace byte separates the header from the samples.
    match r.bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(r.fail("missing separator after max value")),
    }
    let need = c * h * w;
    let rest = &bytes[r.pos..];
    if rest.len() < need {
        return Err(Error::Format(format!(
            "{}: truncated pixel data: needed {need} bytes, found {}",
            path.display(),
            rest.len()
        )));
    }
    if rest.len() > need {
        return Err(Error::Format(format!(
            "{}: {} trailing bytes after pixel data",
            path.display(),
            rest.len() - need
        )));
    }
    let mut img = Tensor::zeros(&[c, h, w]);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let v = rest[(y * w + x) * c + ch] as f64 / 255.0;
                img.set3(ch, y, x, v);
            }
        }
    }
    Ok(img)
}

/// Writes the amplified perturbation `clamp01(gain * |x - x_adv|)` so
/// near-invisible residuals become inspectable.
pub fn export_residual(path: &Path, x: &Tensor, x_adv: &Tensor, gain: f64) -> Result<()> {
    x.check_same_shape(x_adv)?;
    if !(gain > 0.0) {
        return Err(Error::InvalidArgument("residual gain must be positive".into()));
    }
    let residual = clamp01(&x.zip_map(x_adv, |a, b| (a - b).abs() * gain)?);
    write_image(path, &residual)
}
