mod common;

use common::*;

fn assert_layer(rep: LayerReport) {
    assert!(rep.shapes >= SHAPES_PER_LAYER, "{}: only {} shapes", rep.layer, rep.shapes);
    let tol = layer_tolerance(rep.layer);
    assert!(
        rep.max_rel_error < tol,
        "{}: error {:e} at {} exceeds {tol:e}",
        rep.layer,
        rep.max_rel_error,
        rep.worst_shape
    );
}

#[test]
fn conv_gradients() {
    assert_layer(conv_report(11));
}

#[test]
fn dense_gradients() {
    assert_layer(dense_report(12));
}

#[test]
fn batchnorm_gradients() {
    assert_layer(batchnorm_report(13));
}

#[test]
fn relu_gradients() {
    assert_layer(relu_report(14));
}

#[test]
fn maxpool_gradients() {
    assert_layer(maxpool_report(15));
}

#[test]
fn dropout_gradients() {
    assert_layer(dropout_report(16));
}

#[test]
fn softmax_ce_gradients() {
    assert_layer(softmax_ce_report(17));
}

#[test]
fn fused_model_end_to_end() {
    for seed in [1, 2, 3] {
        let e = full_model_error(seed);
        assert!(e < 1e-3, "seed {seed}: worst relative error {e:e}");
    }
}

#[test]
fn plain_model_end_to_end() {
    use satfuse::model::{FusionNet, ModelConfig};
    use satfuse::nn::softmax_ce;
    use rand::Rng;

    let cfg = ModelConfig {
        fused_feature_width: 0,
        batchnorm: false,
        dense_widths: vec![3],
        ..tiny_fused_config()
    };
    let mut net = FusionNet::<f64>::build(&cfg).unwrap();
    let mut r = rng(40);
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v = r.gen_range(-0.8..0.8);
        }
    }
    let x = tensor(&[3, 6, 6, 4], &uniform(&mut r, 3 * 144, 0.0, 1.0));
    let labels = [1usize, 0, 2];
    let (logits, trace) = net.forward_train(&x, None, 0).unwrap();
    let grads = net.backward(&trace, &softmax_ce(&logits, &labels).unwrap().grad).unwrap();
    for (pi, g) in grads.iter().enumerate() {
        let base = net.params()[pi].1.data().to_vec();
        let report = satfuse::nn::grad_check(
            |v| {
                let mut probe = net.clone();
                probe.params_mut()[pi].data_mut().copy_from_slice(v);
                softmax_ce(&probe.forward_train(&x, None, 0).unwrap().0, &labels).unwrap().loss
            },
            &base,
            g.data(),
        );
        assert!(report.max_rel_error < 1e-3, "param {pi}: {report:?}");
    }
}
