use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use momnet::prox::ThresholdVector;
use momnet::refiner::{
    delta_measure, make_tf_filterbank, paired_epsilon, read_refiner, refiner_to_text, write_refiner, DcnnRefiner,
    ScaledRefiner, ScnnRefiner, TiedCaolRefiner,
};
use momnet::*;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_filters(rng: &mut ChaCha8Rng, count: usize, side: usize) -> Vec<Filter> {
    (0..count)
        .map(|_| Filter::new(side, (0..side * side).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap())
        .collect()
}

fn random_scnn(seed: u64, channels: usize, side: usize, residual: bool) -> ScnnRefiner<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = random_filters(&mut rng, channels, side);
    let dec = random_filters(&mut rng, channels, side);
    let logthr = (0..channels).map(|_| rng.gen_range(-4.0..0.0)).collect();
    ScnnRefiner::new(enc, dec, logthr, residual).unwrap()
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scnn_is_jointly_homogeneous(seed in 0u64..10_000, c in 0.05f64..20.0) {
        let base = random_scnn(seed, 3, 3, false);
        let shifted: Vec<f64> = base.log_thresholds().iter().map(|a| a + c.ln()).collect();
        let scaled = ScnnRefiner::new(base.encoder().to_vec(), base.decoder().to_vec(), shifted, false).unwrap();
        let u = random_image(&mut ChaCha8Rng::seed_from_u64(seed + 1), 7, 6);
        let lhs = scaled.refine(&u.scaled(c)).unwrap();
        let rhs = base.refine(&u).unwrap().scaled(c);
        let tol = 1e-12 * c.max(1.0) * rhs.norm().max(1.0);
        prop_assert!(max_abs_diff(&lhs, &rhs) <= tol);
    }

    #[test]
    fn tight_frame_caol_without_thresholds_is_identity(seed in 0u64..10_000, k in prop::sample::select(vec![1usize, 4, 9, 16])) {
        let bank = make_tf_filterbank::<f64>(k).unwrap();
        let r = TiedCaolRefiner::new(bank, ThresholdVector::uniform(k, 0.0).unwrap(), true).unwrap();
        let u = random_image(&mut ChaCha8Rng::seed_from_u64(seed), 9, 8);
        prop_assert!(max_abs_diff(&r.refine(&u).unwrap(), &u) <= 1e-10);
    }

    #[test]
    fn dcnn_with_zero_last_layer_is_identity(seed in 0u64..10_000, depth in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 2;
        let mut layers = vec![random_filters(&mut rng, k, 3)];
        for _ in 1..depth - 1 {
            layers.push(random_filters(&mut rng, k * k, 3));
        }
        layers.push(vec![Filter::zeros(3); k]);
        let r = DcnnRefiner::new(layers).unwrap();
        let u = random_image(&mut rng, 6, 6);
        prop_assert_eq!(r.refine(&u).unwrap(), u);
    }

    #[test]
    fn diagnostics_are_nonnegative(seed in 0u64..10_000, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<_> = (0..5).map(|_| (random_image(&mut rng, 4, 4), random_image(&mut rng, 4, 4))).collect();
        let eps = paired_epsilon(&ScaledRefiner(a), &ScaledRefiner(b), &pairs).unwrap();
        prop_assert!(eps >= 0.0);
        let (zn, zp, x) = (random_image(&mut rng, 4, 4), random_image(&mut rng, 4, 4), random_image(&mut rng, 4, 4));
        prop_assert!(delta_measure(&zn, &zp, &x).unwrap() >= 0.0);
    }

    #[test]
    fn diagnostics_vanish_with_slack(seed in 0u64..10_000, a in 0.0f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<_> = (0..5).map(|_| (random_image(&mut rng, 4, 4), random_image(&mut rng, 4, 4))).collect();
        // a contraction applied at both iterations satisfies the bound strictly
        prop_assert_eq!(paired_epsilon(&ScaledRefiner(a), &ScaledRefiner(a), &pairs).unwrap(), 0.0);
        let x = random_image(&mut rng, 4, 4);
        let z_prev = random_image(&mut rng, 4, 4);
        let z_next = x.zip_map(&z_prev, |xv, zv| xv + a * (zv - xv));
        prop_assert_eq!(delta_measure(&z_next, &z_prev, &x).unwrap(), 0.0);
    }
}

#[test]
fn refiner_files_round_trip_bit_exactly() {
    let models = [
        Model::Scnn(random_scnn(1, 4, 5, true)),
        Model::Dcnn({
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            DcnnRefiner::new(vec![
                random_filters(&mut rng, 2, 3),
                random_filters(&mut rng, 4, 3),
                random_filters(&mut rng, 2, 3),
            ])
            .unwrap()
        }),
        Model::TiedCaol(
            TiedCaolRefiner::new(make_tf_filterbank(9).unwrap(), ThresholdVector::uniform(9, 0.3).unwrap(), true).unwrap(),
        ),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, m) in models.iter().enumerate() {
        let path = dir.path().join(format!("r{i}.txt"));
        write_refiner(m, std::fs::File::create(&path).unwrap()).unwrap();
        let back: Model = read_refiner(momnet::io::open_reader(&path).unwrap()).unwrap();
        assert_eq!(&back, m);
        assert_eq!(refiner_to_text(&back), refiner_to_text(m));
        let u = random_image(&mut ChaCha8Rng::seed_from_u64(9), 8, 8);
        assert_eq!(back.refine(&u).unwrap(), m.refine(&u).unwrap());
    }
}

/// Central-difference check of the analytic parameter gradient on a residual sCNN.
#[test]
fn residual_scnn_gradient_matches_finite_differences() {
    let model = random_scnn(7, 2, 3, true);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (u, t) = (random_image(&mut rng, 5, 5), random_image(&mut rng, 5, 5));
    let mut grad = vec![0.0; model.num_params()];
    model.loss_and_grad(&u, &t, &mut grad).unwrap();
    let base = model.params();
    let h = 1e-6;
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for i in 0..base.len() {
        let eval = |delta: f64| {
            let mut p = base.clone();
            p[i] += delta;
            let mut m = model.clone();
            m.set_params(&p).unwrap();
            m.loss_and_grad(&u, &t, &mut vec![0.0; p.len()]).unwrap()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-3 * gmax);
        assert!(err <= 1e-4, "parameter {i}: analytic {} fd {fd}", grad[i]);
    }
}
