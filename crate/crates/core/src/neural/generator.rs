use crate::error::Result;
use crate::neural::{
    Conv2d, InstanceNorm, Layer, Network, Padding, Relu, ResidualBlock, Tanh, UpsampleConv,
};
use crate::numerics::{Prng, Scalar, Tensor};

/// Size knobs for the perturbation generator.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorConfig {
    /// Input and output channel count. The wavelet attack feeds the three
    /// detail bands stacked along channels (3x the image channels); the
    /// pixel-domain attack feeds the image itself.
    pub channels: usize,
    /// Width of the first feature map; deeper stages use 2x and 4x.
    pub base_filters: usize,
    pub res_blocks: usize,
}

/// Image-to-image residual generator: 7x7 stem, two stride-2 downsamplings,
/// a residual trunk, two nearest-neighbor upsamplings back to full size, and
/// a tanh head, so outputs live strictly inside (-1, 1). Spatial dims must be
/// divisible by 4.
pub struct GeneratorNet<T: Scalar> {
    pub net: Network<T>,
    pub config: GeneratorConfig,
}

impl<T: Scalar> GeneratorNet<T> {
    pub fn new(config: &GeneratorConfig, rng: &mut Prng) -> Self {
        assert!(config.channels >= 1 && config.base_filters >= 1);
        let c = config.channels;
        let f = config.base_filters;
        let mut layers: Vec<Box<dyn Layer<T>>> = vec![
            Box::new(Conv2d::new("gen.stem", c, f, 7, 1, Padding::Reflect, rng)),
            Box::new(InstanceNorm::new("gen.stem_norm", f)),
            Box::new(Relu::new()),
            Box::new(Conv2d::new("gen.down1", f, 2 * f, 3, 2, Padding::Reflect, rng)),
            Box::new(InstanceNorm::new("gen.down1_norm", 2 * f)),
            Box::new(Relu::new()),
            Box::new(Conv2d::new("gen.down2", 2 * f, 4 * f, 3, 2, Padding::Reflect, rng)),
            Box::new(InstanceNorm::new("gen.down2_norm", 4 * f)),
            Box::new(Relu::new()),
        ];
        for i in 0..config.res_blocks {
            layers.push(Box::new(ResidualBlock::new(&format!("gen.res{i}"), 4 * f, rng)));
        }
        layers.push(Box::new(UpsampleConv::new("gen.up1", 4 * f, 2 * f, rng)));
        layers.push(Box::new(InstanceNorm::new("gen.up1_norm", 2 * f)));
        layers.push(Box::new(Relu::new()));
        layers.push(Box::new(UpsampleConv::new("gen.up2", 2 * f, f, rng)));
        layers.push(Box::new(InstanceNorm::new("gen.up2_norm", f)));
        layers.push(Box::new(Relu::new()));
        let mut head = Conv2d::new("gen.head", f, c, 7, 1, Padding::Reflect, rng);
        // Damped head: a fresh generator emits a near-zero field, so training
        // starts from a small perturbation and grows it instead of having to
        // walk a large random one back inside the budget.
        head.scale_weights(T::cast(1e-2));
        layers.push(Box::new(head));
        layers.push(Box::new(Tanh::new()));
        GeneratorNet {
            net: Network::new("generator", layers),
            config: *config,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.net.forward(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        self.net.backward(grad_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_sample, prng_stream};

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            channels: 9,
            base_filters: 4,
            res_blocks: 2,
        }
    }

    #[test]
    fn output_matches_input_shape_and_stays_inside_unit_interval() {
        let mut rng = prng_stream(1);
        let mut gen = GeneratorNet::<f64>::new(&small(), &mut rng);
        let x = gaussian_sample::<f64>(&mut rng, &[9, 16, 16]);
        let y = gen.forward(&x).unwrap();
        assert_eq!(y.shape(), &[9, 16, 16]);
        for &v in y.data() {
            assert!(v > -1.0 && v < 1.0);
        }
    }

    #[test]
    fn rejects_spatial_dims_not_divisible_by_four() {
        let mut rng = prng_stream(2);
        let mut gen = GeneratorNet::<f64>::new(&small(), &mut rng);
        let x = gaussian_sample::<f64>(&mut rng, &[9, 6, 6]);
        assert!(gen.forward(&x).is_err());
    }

    #[test]
    fn equal_seeds_build_identical_parameters() {
        let build = || {
            let mut rng = prng_stream(42);
            GeneratorNet::<f64>::new(&small(), &mut rng)
        };
        let a = build();
        let b = build();
        for (pa, pb) in a.net.params().iter().zip(b.net.params()) {
            assert_eq!(pa.name, pb.name);
            assert_eq!(pa.value.data(), pb.value.data());
        }
    }
}
