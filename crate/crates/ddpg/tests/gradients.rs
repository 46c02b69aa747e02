use ddpg::gradcheck::{check_gradients, random_net, reference_forward, GradCheck};
use ddpg::{Activation, DenseNet, Init};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn actor(rng: &mut ChaCha8Rng) -> DenseNet {
    random_net(&[34, 32, 16, 29], &[Activation::Relu, Activation::Relu, Activation::Tanh], rng)
}

fn critic(rng: &mut ChaCha8Rng) -> DenseNet {
    let mut acts = vec![Activation::Relu; 5];
    acts.push(Activation::Linear);
    random_net(&[63, 32, 16, 8, 16, 8, 1], &acts, rng)
}

#[test]
fn forward_matches_reference_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let net = DenseNet::new(
            &[2, 3, 1],
            &[Activation::Relu, Activation::Tanh],
            Init::GlorotWithSmallHead { final_scale: 1.0 },
            &mut rng,
        );
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let got = net.forward(&x).unwrap().0;
        let want = reference_forward(net.sizes(), net.activations(), net.params(), &x).0;
        assert!((got[0] - want[0]).abs() <= 1e-12);
        assert_eq!(net.predict(&x).unwrap(), got);
    }
}

#[test]
fn small_net_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = random_net(&[4, 8, 8, 2], &[Activation::Relu, Activation::Relu, Activation::Tanh], &mut rng);
    let check = check_gradients(&net, H, &mut rng);
    assert_eq!(check.skipped, 0);
    assert!(check.worst < 1e-4, "worst relative error {}", check.worst);
}

#[test]
fn actor_and_critic_gradients_match_finite_differences() {
    let mut total = GradCheck::default();
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let a = actor(&mut rng);
        let c = critic(&mut rng);
        total = total.merge(check_gradients(&a, H, &mut rng)).merge(check_gradients(&c, H, &mut rng));
    }
    assert!(total.skipped * 1000 < total.compared, "{} kink crossings out of {}", total.skipped, total.compared);
    assert!(total.worst < 1e-4, "worst relative error {}", total.worst);
}
