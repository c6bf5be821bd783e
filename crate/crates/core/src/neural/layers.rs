use crate::error::{Error, Result};
use crate::neural::{missing_forward_cache, Layer, Param};
use crate::numerics::{gaussian_sample, Prng, Scalar, Tensor};

/// Border handling for same-padded convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Reflect,
}

/// Maps a possibly out-of-range coordinate into `[0, n)`, or returns -1 to
/// drop the tap (zero padding). Reflection mirrors without repeating the
/// edge sample and needs the pad to be at most `n`.
#[inline]
fn map_coord(i: isize, n: usize, padding: Padding) -> isize {
    let n = n as isize;
    if (0..n).contains(&i) {
        i
    } else {
        match padding {
            Padding::Zero => -1,
            Padding::Reflect => {
                if i < 0 {
                    -i - 1
                } else {
                    2 * n - 1 - i
                }
            }
        }
    }
}

fn coord_table(out_len: usize, n: usize, k: usize, stride: usize, padding: Padding) -> Vec<isize> {
    let pad = (k - 1) / 2;
    let mut table = Vec::with_capacity(out_len * k);
    for o in 0..out_len {
        for tap in 0..k {
            let i = (o * stride + tap) as isize - pad as isize;
            table.push(map_coord(i, n, padding));
        }
    }
    table
}

/// Same-padded 2D convolution over `[c_in, h, w]` with stride 1 or 2.
pub struct Conv2d<T> {
    weight: Param<T>,
    bias: Param<T>,
    c_in: usize,
    c_out: usize,
    k: usize,
    stride: usize,
    padding: Padding,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// He-initialized filters: the variance choice that keeps ReLU
    /// activations at constant scale through depth.
    pub fn new(
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: Padding,
        rng: &mut Prng,
    ) -> Self {
        assert!(k % 2 == 1, "kernel must be odd for same padding");
        assert!(stride == 1 || stride == 2, "stride must be 1 or 2");
        assert!(c_in >= 1 && c_out >= 1);
        let std = (2.0 / (c_in * k * k) as f64).sqrt();
        let mut weight = gaussian_sample::<T>(rng, &[c_out, c_in, k, k]);
        weight.map_inplace(|v| v * T::cast(std));
        Conv2d {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[c_out])),
            c_in,
            c_out,
            k,
            stride,
            padding,
            cache: None,
        }
    }

    /// Multiplies the current weights by `gain`. A small gain on the last
    /// layer of an image-to-image net starts it near the zero map.
    pub fn scale_weights(&mut self, gain: T) {
        self.weight.value.map_inplace(|v| v * gain);
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        if x.rank() != 3 || x.shape()[0] != self.c_in {
            return Err(Error::Shape(format!(
                "conv expects [{}, h, w], got {:?}",
                self.c_in,
                x.shape()
            )));
        }
        let (h, w) = (x.shape()[1], x.shape()[2]);
        if h % self.stride != 0 || w % self.stride != 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "spatial dims {h}x{w} not divisible by stride {}",
                self.stride
            )));
        }
        let pad = (self.k - 1) / 2;
        if self.padding == Padding::Reflect && (pad > h || pad > w) {
            return Err(Error::Shape(format!(
                "{h}x{w} too small to reflect-pad a {}-tap kernel",
                self.k
            )));
        }
        Ok((h, w, h / self.stride, w / self.stride))
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (h, w, ho, wo) = self.check_input(x)?;
        let k = self.k;
        let ymap = coord_table(ho, h, k, self.stride, self.padding);
        let xmap = coord_table(wo, w, k, self.stride, self.padding);

        let mut out = Tensor::zeros(&[self.c_out, ho, wo]);
        for co in 0..self.c_out {
            out.channel_mut(co).fill(self.bias.value.data()[co]);
        }
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                let wbase = (co * self.c_in + ci) * k * k;
                let taps = &self.weight.value.data()[wbase..wbase + k * k];
                let xplane = x.channel(ci);
                let oplane = out.channel_mut(co);
                for oy in 0..ho {
                    let orow = &mut oplane[oy * wo..(oy + 1) * wo];
                    for ky in 0..k {
                        let iy = ymap[oy * k + ky];
                        if iy < 0 {
                            continue;
                        }
                        let xrow = &xplane[iy as usize * w..(iy as usize + 1) * w];
                        let trow = &taps[ky * k..(ky + 1) * k];
                        for (ox, o) in orow.iter_mut().enumerate() {
                            let mut acc = *o;
                            for (kx, &t) in trow.iter().enumerate() {
                                let ix = xmap[ox * k + kx];
                                if ix >= 0 {
                                    acc += t * xrow[ix as usize];
                                }
                            }
                            *o = acc;
                        }
                    }
                }
            }
        }
        self.cache = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(x) = self.cache.take() else {
            return missing_forward_cache("Conv2d");
        };
        let (h, w, ho, wo) = self.check_input(&x)?;
        if grad_out.shape() != [self.c_out, ho, wo] {
            return Err(Error::Shape(format!(
                "conv backward expects [{}, {ho}, {wo}], got {:?}",
                self.c_out,
                grad_out.shape()
            )));
        }
        let k = self.k;
        let ymap = coord_table(ho, h, k, self.stride, self.padding);
        let xmap = coord_table(wo, w, k, self.stride, self.padding);

        let mut gx = x.zeros_like();
        for co in 0..self.c_out {
            let gsum = grad_out.channel(co).iter().copied().sum::<T>();
            self.bias.grad.data_mut()[co] += gsum;
        }
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                let wbase = (co * self.c_in + ci) * k * k;
                let taps = &self.weight.value.data()[wbase..wbase + k * k];
                let gtaps = &mut self.weight.grad.data_mut()[wbase..wbase + k * k];
                let xplane = x.channel(ci);
                let gxplane = gx.channel_mut(ci);
                let goplane = grad_out.channel(co);
                for oy in 0..ho {
                    let gorow = &goplane[oy * wo..(oy + 1) * wo];
                    for ky in 0..k {
                        let iy = ymap[oy * k + ky];
                        if iy < 0 {
                            continue;
                        }
                        let xrow = &xplane[iy as usize * w..(iy as usize + 1) * w];
                        let gxrow = &mut gxplane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, &g) in gorow.iter().enumerate() {
                            for kx in 0..k {
                                let ix = xmap[ox * k + kx];
                                if ix >= 0 {
                                    let ix = ix as usize;
                                    gtaps[ky * k + kx] += g * xrow[ix];
                                    gxrow[ix] += taps[ky * k + kx] * g;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

struct NormCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

/// Per-sample, per-channel normalization with learned gain and bias.
///
/// Batches here are loops over single samples, so per-channel statistics of
/// the one sample stand in for batch statistics; this keeps every forward
/// deterministic and batch-size independent.
pub struct InstanceNorm<T> {
    gain: Param<T>,
    bias: Param<T>,
    channels: usize,
    eps: T,
    cache: Option<NormCache<T>>,
}

impl<T: Scalar> InstanceNorm<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        InstanceNorm {
            gain: Param::new(format!("{name}.gain"), Tensor::filled(&[channels], T::one())),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[channels])),
            channels,
            eps: T::cast(1e-5),
            cache: None,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.rank() != 3 || x.shape()[0] != self.channels {
            return Err(Error::Shape(format!(
                "norm expects [{}, h, w], got {:?}",
                self.channels,
                x.shape()
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Layer<T> for InstanceNorm<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut xhat = x.zeros_like();
        let mut inv_std = Vec::with_capacity(self.channels);
        let mut out = x.zeros_like();
        for c in 0..self.channels {
            let plane = x.channel(c);
            let n = T::cast(plane.len() as f64);
            let mean = plane.iter().copied().sum::<T>() / n;
            let var = plane.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + self.eps).sqrt();
            inv_std.push(inv);
            let (g, b) = (self.gain.value.data()[c], self.bias.value.data()[c]);
            let hat = xhat.channel_mut(c);
            let o = out.channel_mut(c);
            for ((hv, ov), &v) in hat.iter_mut().zip(o.iter_mut()).zip(plane) {
                let centered = (v - mean) * inv;
                *hv = centered;
                *ov = g * centered + b;
            }
        }
        self.cache = Some(NormCache { xhat, inv_std });
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(NormCache { xhat, inv_std }) = self.cache.take() else {
            return missing_forward_cache("InstanceNorm");
        };
        grad_out.check_same_shape(&xhat)?;
        let mut gx = xhat.zeros_like();
        for c in 0..self.channels {
            let hat = xhat.channel(c);
            let go = grad_out.channel(c);
            let n = T::cast(hat.len() as f64);
            let sum_g = go.iter().copied().sum::<T>();
            let sum_gh = go.iter().zip(hat).map(|(&g, &h)| g * h).sum::<T>();
            self.gain.grad.data_mut()[c] += sum_gh;
            self.bias.grad.data_mut()[c] += sum_g;
            let scale = self.gain.value.data()[c] * inv_std[c];
            let mean_g = sum_g / n;
            let mean_gh = sum_gh / n;
            let out = gx.channel_mut(c);
            for ((o, &g), &h) in out.iter_mut().zip(go).zip(hat) {
                *o = scale * (g - mean_g - h * mean_gh);
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gain, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gain, &mut self.bias]
    }
}

#[derive(Default)]
pub struct Relu<T> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Relu { cache: None }
    }
}

impl<T: Scalar> Layer<T> for Relu<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.clone());
        Ok(x.map(|v| v.max(T::zero())))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(x) = self.cache.take() else {
            return missing_forward_cache("Relu");
        };
        grad_out.zip_map(&x, |g, v| if v > T::zero() { g } else { T::zero() })
    }
}

#[derive(Default)]
pub struct Tanh<T> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Tanh<T> {
    pub fn new() -> Self {
        Tanh { cache: None }
    }
}

impl<T: Scalar> Layer<T> for Tanh<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = x.map(|v| v.tanh());
        self.cache = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(y) = self.cache.take() else {
            return missing_forward_cache("Tanh");
        };
        grad_out.zip_map(&y, |g, v| g * (T::one() - v * v))
    }
}

/// Fully connected layer. Flattens any input shape; emits rank 1.
pub struct Dense<T> {
    weight: Param<T>,
    bias: Param<T>,
    in_features: usize,
    out_features: usize,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(name: &str, in_features: usize, out_features: usize, rng: &mut Prng) -> Self {
        let std = (2.0 / in_features as f64).sqrt();
        let mut weight = gaussian_sample::<T>(rng, &[out_features, in_features]);
        weight.map_inplace(|v| v * T::cast(std));
        Dense {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[out_features])),
            in_features,
            out_features,
            cache: None,
        }
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.len() != self.in_features {
            return Err(Error::Shape(format!(
                "dense expects {} inputs, got shape {:?}",
                self.in_features,
                x.shape()
            )));
        }
        let mut out = Tensor::zeros(&[self.out_features]);
        let w = self.weight.value.data();
        for (o, ov) in out.data_mut().iter_mut().enumerate() {
            let row = &w[o * self.in_features..(o + 1) * self.in_features];
            let mut acc = self.bias.value.data()[o];
            for (&wi, &xi) in row.iter().zip(x.data()) {
                acc += wi * xi;
            }
            *ov = acc;
        }
        self.cache = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(x) = self.cache.take() else {
            return missing_forward_cache("Dense");
        };
        if grad_out.shape() != [self.out_features] {
            return Err(Error::Shape(format!(
                "dense backward expects [{}], got {:?}",
                self.out_features,
                grad_out.shape()
            )));
        }
        let mut gx = x.zeros_like();
        let w = self.weight.value.data();
        let gw = self.weight.grad.data_mut();
        for (o, &g) in grad_out.data().iter().enumerate() {
            self.bias.grad.data_mut()[o] += g;
            let row = &w[o * self.in_features..(o + 1) * self.in_features];
            let grow = &mut gw[o * self.in_features..(o + 1) * self.in_features];
            for ((gwi, &wi), (&xi, gxi)) in grow
                .iter_mut()
                .zip(row)
                .zip(x.data().iter().zip(gx.data_mut()))
            {
                *gwi += g * xi;
                *gxi += wi * g;
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Max-shifted softmax over a rank-1 vector.
#[derive(Default)]
pub struct Softmax<T> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Softmax<T> {
    pub fn new() -> Self {
        Softmax { cache: None }
    }
}

impl<T: Scalar> Layer<T> for Softmax<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 1 || x.is_empty() {
            return Err(Error::Shape(format!(
                "softmax expects a nonempty rank-1 vector, got {:?}",
                x.shape()
            )));
        }
        let max = x
            .data()
            .iter()
            .fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut y = x.map(|v| (v - max).exp());
        let sum = y.sum();
        y.map_inplace(|v| v / sum);
        self.cache = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let Some(y) = self.cache.take() else {
            return missing_forward_cache("Softmax");
        };
        grad_out.check_same_shape(&y)?;
        let dot = grad_out.dot(&y)?;
        y.zip_map(grad_out, |yi, gi| yi * (gi - dot))
    }
}

/// Nearest-neighbor 2x upsampling followed by a same-padded 3x3 convolution;
/// the checkerboard-free way to double resolution.
pub struct UpsampleConv<T> {
    conv: Conv2d<T>,
}

impl<T: Scalar> UpsampleConv<T> {
    pub fn new(name: &str, c_in: usize, c_out: usize, rng: &mut Prng) -> Self {
        UpsampleConv {
            conv: Conv2d::new(name, c_in, c_out, 3, 1, Padding::Reflect, rng),
        }
    }
}

impl<T: Scalar> Layer<T> for UpsampleConv<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 3 {
            return Err(Error::Shape(format!(
                "upsample expects [c, h, w], got {:?}",
                x.shape()
            )));
        }
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut up = Tensor::zeros(&[c, 2 * h, 2 * w]);
        for ch in 0..c {
            let src = x.channel(ch);
            let dst = up.channel_mut(ch);
            for y in 0..2 * h {
                let srow = &src[(y / 2) * w..(y / 2 + 1) * w];
                let drow = &mut dst[y * 2 * w..(y + 1) * 2 * w];
                for (xx, d) in drow.iter_mut().enumerate() {
                    *d = srow[xx / 2];
                }
            }
        }
        self.conv.forward(&up)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let gup = self.conv.backward(grad_out)?;
        let (c, h2, w2) = (gup.shape()[0], gup.shape()[1], gup.shape()[2]);
        let (h, w) = (h2 / 2, w2 / 2);
        let mut gx = Tensor::zeros(&[c, h, w]);
        for ch in 0..c {
            let src = gup.channel(ch);
            let dst = gx.channel_mut(ch);
            for y in 0..h2 {
                let srow = &src[y * w2..(y + 1) * w2];
                let drow = &mut dst[(y / 2) * w..(y / 2 + 1) * w];
                for (xx, &g) in srow.iter().enumerate() {
                    drow[xx / 2] += g;
                }
            }
        }
        Ok(gx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        self.conv.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.conv.params_mut()
    }
}

/// `x + f(x)` with `f = norm(conv(relu(norm(conv(.)))))`, channel-preserving.
pub struct ResidualBlock<T> {
    conv1: Conv2d<T>,
    norm1: InstanceNorm<T>,
    relu: Relu<T>,
    conv2: Conv2d<T>,
    norm2: InstanceNorm<T>,
}

impl<T: Scalar> ResidualBlock<T> {
    pub fn new(name: &str, channels: usize, rng: &mut Prng) -> Self {
        ResidualBlock {
            conv1: Conv2d::new(
                &format!("{name}.conv1"),
                channels,
                channels,
                3,
                1,
                Padding::Reflect,
                rng,
            ),
            norm1: InstanceNorm::new(&format!("{name}.norm1"), channels),
            relu: Relu::new(),
            conv2: Conv2d::new(
                &format!("{name}.conv2"),
                channels,
                channels,
                3,
                1,
                Padding::Reflect,
                rng,
            ),
            norm2: InstanceNorm::new(&format!("{name}.norm2"), channels),
        }
    }
}

impl<T: Scalar> Layer<T> for ResidualBlock<T> {
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut branch = self.conv1.forward(x)?;
        branch = self.norm1.forward(&branch)?;
        branch = self.relu.forward(&branch)?;
        branch = self.conv2.forward(&branch)?;
        branch = self.norm2.forward(&branch)?;
        x.add(&branch)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = self.norm2.backward(grad_out)?;
        g = self.conv2.backward(&g)?;
        g = self.relu.backward(&g)?;
        g = self.norm1.backward(&g)?;
        g = self.conv1.backward(&g)?;
        grad_out.add(&g)
    }

    fn params(&self) -> Vec<&Param<T>> {
        [&self.conv1 as &dyn Layer<T>, &self.norm1, &self.conv2, &self.norm2]
            .into_iter()
            .flat_map(|l| l.params())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.conv1.params_mut();
        out.extend(self.norm1.params_mut());
        out.extend(self.conv2.params_mut());
        out.extend(self.norm2.params_mut());
        out
    }
}
