mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stargaze::nn::{Activation, Linear};
use support::gradcheck::{
    self, fd_check, random_matrix, weighted_sum, LinearFixture, Slot, MAX_RELATIVE_ERROR,
};

#[test]
fn gcn_layer() {
    gradcheck::gcn_layer().assert_ok("gcn");
}

#[test]
fn linear_layer() {
    gradcheck::linear_layer().assert_ok("linear");
}

#[test]
fn conv1d_layer() {
    gradcheck::conv1d_layer().assert_ok("conv1d");
}

#[test]
fn sort_pooling_path() {
    gradcheck::sort_pooling_path().assert_ok("sort pooling");
}

#[test]
fn dropout_off_and_fixed_mask() {
    gradcheck::dropout_off_and_fixed_mask().assert_ok("dropout");
}

#[test]
fn bce() {
    gradcheck::bce().assert_ok("bce");
}

#[test]
fn margin() {
    gradcheck::margin().assert_ok("margin");
}

#[test]
fn classifier_1() {
    gradcheck::classifier(1).assert_ok("classifier 1");
}

#[test]
fn classifier_2() {
    gradcheck::classifier(2).assert_ok("classifier 2");
}

#[test]
fn classifier_3() {
    gradcheck::classifier(3).assert_ok("classifier 3");
}

#[test]
fn classifier_4() {
    gradcheck::classifier(4).assert_ok("classifier 4");
}

#[test]
fn sage_encoder() {
    gradcheck::sage_encoder().assert_ok("sage");
}

#[test]
fn corrupted_gradient_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut f = LinearFixture {
        layer: Linear::new(3, 2, Activation::Linear, &mut rng),
        x: random_matrix(4, 3, &mut rng),
        r: random_matrix(4, 2, &mut rng),
    };
    f.layer.forward(&f.x).unwrap();
    let dx = f.layer.backward(&f.r).unwrap().map(|v| v * 1.001);
    let eval = |f: &mut LinearFixture| (weighted_sum(&f.layer.forward(&f.x).unwrap(), &f.r), 0);
    let slot: Slot<LinearFixture> = |f, _| &mut f.x;
    let report = fd_check(&mut f, slot, &[dx], eval, 40, &mut rng);
    assert!(report.max_relative > MAX_RELATIVE_ERROR);
}
