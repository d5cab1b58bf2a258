mod common;

use common::grad::*;
use common::*;
use tabinhib::model::{backward, evaluate_loss, Head};

#[test]
fn cross_entropy_heads() {
    for seed in 0..20 {
        let e = parameter_gradient_error(&instance(seed, Head::SixDSoftmax, 0.0));
        assert!(e < 1e-5, "softmax seed {seed}: {e:e}");
        let e = parameter_gradient_error(&instance(seed, Head::Logistic, 0.0));
        assert!(e < 1e-5, "logistic seed {seed}: {e:e}");
    }
}

#[test]
fn total_loss_with_inhibition() {
    for lambda in [1.0, 10.0] {
        for seed in 0..20 {
            let e = parameter_gradient_error(&instance(seed, Head::Logistic, lambda));
            assert!(e < 1e-5, "lambda {lambda} seed {seed}: {e:e}");
        }
    }
}

#[test]
fn inhibition_energy_gradient() {
    for seed in 0..20 {
        let e = sheet_gradient_error(seed);
        assert!(e < 1e-5, "seed {seed}: {e:e}");
    }
}

#[test]
fn gradient_check_detects_a_wrong_gradient() {
    let inst = instance(3, Head::Logistic, 1.0);
    let (_, mut grads) = backward(&inst.params, &inst.config, inst.features.view(), inst.targets.view()).unwrap();
    grads.b2[0] += 1e-3;
    let mut flat = inst.params.b2.to_vec();
    let numeric = numeric_gradient(&mut flat, |x| {
        let mut p = inst.params.clone();
        p.b2.as_slice_mut().unwrap().copy_from_slice(x);
        evaluate_loss(&p, &inst.config, inst.features.view(), inst.targets.view()).unwrap().total
    });
    assert!(relative_error(grads.b2[0], numeric[0], FD_FLOOR) > 1e-5);
}

#[test]
fn worst_case_margin() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        for (head, lambda) in [(Head::SixDSoftmax, 0.0), (Head::Logistic, 0.0), (Head::Logistic, 1.0), (Head::Logistic, 10.0)] {
            worst = worst.max(parameter_gradient_error(&instance(seed, head, lambda)));
        }
        worst = worst.max(sheet_gradient_error(seed));
    }
    println!("worst relative error {worst:e}");
    assert!(worst < 1e-5);
}
