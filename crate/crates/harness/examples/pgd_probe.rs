// Throwaway feasibility probe: per-sample PGD at a fixed relative-L2 radius.
// Measures how often a white-box L2 attack flips the surrogate's own clean
// prediction. Upper-bounds what a universal generator can reach at the same
// realized distortion.

use wgap_core::metrics::cross_entropy_grad;
use wgap_core::neural::ClassifierKind;
use wgap_core::numerics::{clamp01, prng_stream};
use wgap_core::{ClassifierNet, Tensor};
use wgap_harness::config::RunConfig;
use wgap_harness::dataset::Split;
use wgap_harness::pipeline::load_split;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn main() {
    let eps: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.1);
    let steps: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    let n: usize = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);

    let rc = RunConfig::default();
    let test = load_split(&rc, Split::Test).unwrap();
    let mut prng = prng_stream(0);
    let mut clf = ClassifierNet::new(
        ClassifierKind::Surrogate,
        test.image_shape(),
        test.num_classes,
        &mut prng,
    )
    .unwrap();
    let ckpt = std::env::args().nth(4).unwrap_or_else(|| "/tmp/cal2/out/surrogate.ckpt".into());
    clf.load(std::path::Path::new(&ckpt))
        .unwrap();

    let mut fooled = 0usize;
    let mut real_rel = 0.0f64;
    for i in 0..n.min(test.len()) {
        let x = &test.images[i];
        let clean = clf.predict(x).unwrap();
        let xnorm = l2(x.data());
        let radius = eps * xnorm;
        let step = 0.3 * radius;

        let mut adv = x.clone();
        for _ in 0..steps {
            let probs = clf.forward(&adv).unwrap();
            // ascend CE at the clean prediction: untargeted flip
            let g_out = cross_entropy_grad(&probs, clean).unwrap();
            let g_in = clf.backward(&g_out).unwrap();
            let gn = l2(g_in.data());
            if gn < 1e-18 {
                break;
            }
            let mut delta: Vec<f64> = adv
                .data()
                .iter()
                .zip(x.data())
                .zip(g_in.data())
                .map(|((a, o), g)| (a - o) + step * g / gn)
                .collect();
            let dn = l2(&delta);
            if dn > radius {
                let s = radius / dn;
                for d in &mut delta {
                    *d *= s;
                }
            }
            let mut next = x.clone();
            for (v, d) in next.data_mut().iter_mut().zip(&delta) {
                *v = *v + *d;
            }
            adv = clamp01(&next);
        }
        let advp = clf.predict(&adv).unwrap();
        if advp != clean {
            fooled += 1;
        }
        let d: Vec<f64> = adv
            .data()
            .iter()
            .zip(x.data())
            .map(|(a, o)| a - o)
            .collect();
        real_rel += l2(&d) / xnorm;
    }
    let m = n.min(test.len()) as f64;
    println!(
        "pgd eps={eps} steps={steps} n={n}: fooled {:.3} realized_rel_l2 {:.4}",
        fooled as f64 / m,
        real_rel / m
    );
    let _ = Tensor::zeros(&[1]);
}
