mod common;

use common::*;
use tractalign::curve::{align_pair, apply_gamma};
use tractalign::tangent::log_map;
use tractalign::io::{synth_bundle, SynthSpec};
use tractalign::{karcher_mean, MeanOptions};

#[test]
fn mean_of_warped_rotated_copies_recovers_the_shape() {
    let mut r = rng(31);
    let q = random_srvf(&mut r, 80);
    let members: Vec<_> = (0..8)
        .map(|_| apply_gamma(&q.rotated(&random_rotation(&mut r)), &random_warp(&mut r, 80, 0.3)).unwrap())
        .collect();
    let m = karcher_mean(&members, &MeanOptions::default()).unwrap();
    let d = align_pair(&q, &m.beta_mu, 10).unwrap().distance();
    assert!(d < 0.05, "{d}");
}

#[test]
fn objective_never_increases_and_members_are_aligned() {
    let bundle = synth_bundle(&SynthSpec { fibers: 10, samples: 50, ..SynthSpec::default() }, 32).unwrap();
    let members = bundle.srvfs().unwrap();
    let m = karcher_mean(&members, &MeanOptions::default()).unwrap();
    assert!(m.objective.windows(2).all(|w| w[1] < w[0]), "{:?}", m.objective);
    assert_eq!(m.aligned.len(), 10);
    for (i, q) in members.iter().enumerate() {
        let redo = apply_gamma(&q.rotated(&m.rotations[i]), &m.gammas[i]).unwrap();
        assert!(redo.sup_distance(&m.aligned[i]) < 1e-9);
    }
    // For a bundle of similar fibers the mean is near-stationary: the
    // averaged shooting vector is small compared with the members' spread.
    let spread: f64 = m.aligned.iter().map(|q| log_map(&m.beta_mu, q).unwrap().norm()).sum::<f64>() / 10.0;
    assert!(m.final_gradient_norm < 0.05 * spread, "{} vs {}", m.final_gradient_norm, spread);
}

#[test]
fn single_member_is_its_own_mean() {
    let mut r = rng(33);
    let q = random_srvf(&mut r, 40);
    let m = karcher_mean(std::slice::from_ref(&q), &MeanOptions::default()).unwrap();
    assert!(m.beta_mu.sup_distance(&q) < 1e-9);
    assert!(m.converged);
}
