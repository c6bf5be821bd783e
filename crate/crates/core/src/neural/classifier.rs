use crate::error::{Error, Result};
use crate::neural::{Conv2d, Dense, Layer, Network, Padding, Relu, Softmax};
use crate::numerics::{Prng, Scalar, Tensor};

/// The two classifier architectures used by the attack experiments. They
/// differ in depth, widths, and kernel sizes so that transfer between them
/// is a genuine cross-architecture test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierKind {
    /// The attacked (white-box) model: two stride-2 conv stages and a
    /// two-layer head.
    Surrogate,
    /// The held-out (black-box) model: three stride-2 conv stages and a
    /// linear head.
    TransferTarget,
}

impl ClassifierKind {
    pub fn model_name(&self) -> &'static str {
        match self {
            ClassifierKind::Surrogate => "surrogate",
            ClassifierKind::TransferTarget => "transfer_target",
        }
    }
}

/// A softmax classifier over `[c, h, w]` images. `forward` returns the
/// probability vector; training drives it through cross-entropy.
pub struct ClassifierNet<T: Scalar> {
    pub net: Network<T>,
    pub kind: ClassifierKind,
    pub input_shape: [usize; 3],
    pub num_classes: usize,
}

impl<T: Scalar> ClassifierNet<T> {
    pub fn new(
        kind: ClassifierKind,
        input_shape: [usize; 3],
        num_classes: usize,
        rng: &mut Prng,
    ) -> Result<Self> {
        let [c, h, w] = input_shape;
        if c == 0 || num_classes < 2 {
            return Err(Error::InvalidArgument(
                "classifier needs at least 1 channel and 2 classes".into(),
            ));
        }
        let downs = match kind {
            ClassifierKind::Surrogate => 4,
            ClassifierKind::TransferTarget => 8,
        };
        if h % downs != 0 || w % downs != 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "{} needs spatial dims divisible by {downs}, got {h}x{w}",
                kind.model_name()
            )));
        }
        let prefix = kind.model_name();
        let layers: Vec<Box<dyn Layer<T>>> = match kind {
            ClassifierKind::Surrogate => {
                let feat = 16 * (h / 4) * (w / 4);
                vec![
                    Box::new(Conv2d::new(&format!("{prefix}.conv1"), c, 8, 3, 2, Padding::Zero, rng)),
                    Box::new(Relu::new()),
                    Box::new(Conv2d::new(&format!("{prefix}.conv2"), 8, 16, 3, 2, Padding::Zero, rng)),
                    Box::new(Relu::new()),
                    Box::new(Dense::new(&format!("{prefix}.fc1"), feat, 64, rng)),
                    Box::new(Relu::new()),
                    Box::new(Dense::new(&format!("{prefix}.fc2"), 64, num_classes, rng)),
                    Box::new(Softmax::new()),
                ]
            }
            ClassifierKind::TransferTarget => {
                let feat = 24 * (h / 8) * (w / 8);
                vec![
                    Box::new(Conv2d::new(&format!("{prefix}.conv1"), c, 6, 5, 2, Padding::Zero, rng)),
                    Box::new(Relu::new()),
                    Box::new(Conv2d::new(&format!("{prefix}.conv2"), 6, 12, 3, 2, Padding::Zero, rng)),
                    Box::new(Relu::new()),
                    Box::new(Conv2d::new(&format!("{prefix}.conv3"), 12, 24, 3, 2, Padding::Zero, rng)),
                    Box::new(Relu::new()),
                    Box::new(Dense::new(&format!("{prefix}.fc"), feat, num_classes, rng)),
                    Box::new(Softmax::new()),
                ]
            }
        };
        Ok(ClassifierNet {
            net: Network::new(prefix, layers),
            kind,
            input_shape,
            num_classes,
        })
    }

    /// Class probabilities for one image.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.shape() != self.input_shape {
            return Err(Error::Shape(format!(
                "{} expects {:?}, got {:?}",
                self.kind.model_name(),
                self.input_shape,
                x.shape()
            )));
        }
        self.net.forward(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        self.net.backward(grad_out)
    }

    /// Most likely class of the last-computed probabilities for `x`; ties
    /// break to the lowest index.
    pub fn predict(&mut self, x: &Tensor<T>) -> Result<usize> {
        let probs = self.forward(x)?;
        let mut best = 0;
        for (i, &p) in probs.data().iter().enumerate().skip(1) {
            if p > probs.data()[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn zero_grads(&mut self) {
        self.net.zero_grads();
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.net.save(path)
    }

    pub fn load(&mut self, path: &std::path::Path) -> Result<()> {
        self.net.load(path)
    }
}
