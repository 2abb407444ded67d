use gp_icl::bias::{fit_tau2, gaussian_logpdf, prediction_loglik};
use gp_icl::curve::{learning_curve, BootstrapConfig};
use gp_icl::gp::{posterior_predictive, Demo};
use gp_icl::kernel::{gram_matrix, KernelFamily, KernelSpec, NoiseSpec, Smoothness};
use gp_icl::nn_bound::{expected_1nn_mae, nn_distance_pdf, BoundQuery};
use gp_icl::prompt::{parse_prediction, render_prompt};
use gp_icl::quadrature::integrate;
use gp_icl::records::PredictionRecord;
use gp_icl::reward::{advantages, reward, RewardConfig, RewardContext};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(KernelFamily::Matern(Smoothness::Half)),
        Just(KernelFamily::Matern(Smoothness::ThreeHalves)),
        Just(KernelFamily::Matern(Smoothness::FiveHalves)),
        Just(KernelFamily::SquaredExponential),
    ]
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    (family(), 0.1f64..20.0, 1e-4f64..10.0).prop_map(|(f, l, v)| KernelSpec::new(f, l, v).unwrap())
}

fn demos(dims: usize, max: usize) -> impl Strategy<Value = Vec<Demo>> {
    prop::collection::vec(
        (prop::collection::vec(0.0f64..29.0, dims), -1.0f64..1.0).prop_map(|(x, y)| Demo::new(x, y)),
        0..max,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernel_is_bounded_and_non_increasing(k in kernel(), a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (ka, kb) = (k.kernel_value(lo).unwrap(), k.kernel_value(hi).unwrap());
        prop_assert!(ka >= kb);
        prop_assert!(ka <= k.output_variance() && kb >= 0.0);
        prop_assert_eq!(k.kernel_value(0.0).unwrap(), k.output_variance());
    }

    #[test]
    fn gram_is_symmetric_with_noisy_diagonal(k in kernel(), ds in demos(2, 8), noise in 0.0f64..1.0) {
        let xs: Vec<&[f64]> = ds.iter().map(|d| d.x.as_slice()).collect();
        let g = gram_matrix(&k, &NoiseSpec::new(noise).unwrap(), &xs).unwrap();
        for i in 0..xs.len() {
            prop_assert_eq!(g[(i, i)], k.output_variance() + noise);
            for j in 0..i {
                prop_assert_eq!(g[(i, j)], g[(j, i)]);
            }
        }
    }

    #[test]
    fn posterior_variance_between_zero_and_prior(k in kernel(), ds in demos(1, 10), q in 0.0f64..29.0) {
        let noise = NoiseSpec::new(0.001).unwrap();
        let p = posterior_predictive(&k, &noise, &ds, &[q]).unwrap();
        prop_assert!(p.variance_f >= 0.0);
        prop_assert!(p.variance_f <= k.output_variance() * (1.0 + 1e-9));
        prop_assert!((p.variance_y - p.variance_f - 0.001).abs() < 1e-15);
    }

    #[test]
    fn posterior_ignores_demo_order(k in kernel(), ds in demos(2, 8), q in prop::collection::vec(0.0f64..29.0, 2)) {
        let noise = NoiseSpec::new(0.01).unwrap();
        let a = posterior_predictive(&k, &noise, &ds, &q).unwrap();
        let mut rev = ds.clone();
        rev.reverse();
        let b = posterior_predictive(&k, &noise, &rev, &q).unwrap();
        prop_assert!((a.mean - b.mean).abs() < 1e-8);
        prop_assert!((a.variance_f - b.variance_f).abs() < 1e-8);
    }

    #[test]
    fn printed_numbers_parse_back(v in -1e6f64..1e6, words in "[a-zA-Z ,:]{0,20}") {
        let s = format!("{words} {v}");
        prop_assert_eq!(parse_prediction(&s).value, Some(v));
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,40}") {
        let p = parse_prediction(&s);
        prop_assert_eq!(p.value.is_some(), p.matched_span.is_some());
        if let Some(span) = p.matched_span {
            prop_assert!(s.get(span).is_some());
        }
    }

    #[test]
    fn prompt_structure(dims in 1usize..=4, n in 0usize..12, seed in 0u64..1000) {
        let ds: Vec<Demo> = (0..n)
            .map(|i| Demo::new((0..dims).map(|j| ((seed as usize + i * 7 + j) % 29) as f64).collect(), i as f64))
            .collect();
        let q: Vec<f64> = vec![1.5; dims];
        let p = render_prompt(&ds, &q, dims, 3).unwrap();
        prop_assert_eq!(p.text.matches(", Y: ").count(), n);
        prop_assert!(p.text.ends_with(", Y:"));
        prop_assert_eq!(p.text.lines().count(), n + 2);
    }

    #[test]
    fn bound_between_noise_floor_and_ceiling(k in kernel(), noise in 1e-4f64..1.0, n in 2usize..60, len in 1.0f64..50.0) {
        let q = BoundQuery::new(k, NoiseSpec::new(noise).unwrap(), n, len).unwrap();
        let v = expected_1nn_mae(&q).unwrap();
        let c = (2.0 / std::f64::consts::PI).sqrt();
        prop_assert!(v >= c * (2.0 * noise).sqrt() * (1.0 - 1e-9));
        prop_assert!(v <= c * (2.0 * k.output_variance() + 2.0 * noise).sqrt() * (1.0 + 1e-9));
    }

    #[test]
    fn bound_decreases_with_n(k in kernel(), n in 2usize..49) {
        let noise = NoiseSpec::new(0.001).unwrap();
        let a = expected_1nn_mae(&BoundQuery::new(k, noise, n, 29.0).unwrap()).unwrap();
        let b = expected_1nn_mae(&BoundQuery::new(k, noise, n + 1, 29.0).unwrap()).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn distance_density_normalized(n in 2usize..80, len in 0.5f64..100.0) {
        let r = integrate(|d| nn_distance_pdf(n, len, d), 0.0, len / 2.0, 1e-12, 1e-12).unwrap();
        prop_assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn loglik_never_above_noise_floor(k in kernel(), ds in demos(1, 8), q in 0.0f64..29.0, y in -2.0f64..2.0) {
        let noise = NoiseSpec::new(0.001).unwrap();
        let l = prediction_loglik(&k, &noise, &ds, &[q], y, 0.0).unwrap();
        prop_assert!(l <= gaussian_logpdf(0.0, 0.0, 0.001) + 1e-12);
    }

    #[test]
    fn tau2_is_a_local_maximum(
        pairs in prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 2..30)
    ) {
        let (r, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let t = fit_tau2(&r, &v).unwrap();
        prop_assert!((1e-12..=1e6).contains(&t));
        let obj = |t: f64| r.iter().zip(&v).map(|(r, v)| gaussian_logpdf(*r, 0.0, v + t)).sum::<f64>();
        let f = obj(t);
        prop_assert!(f >= obj(t * 1.01) - 1e-9 * f.abs().max(1.0));
        if t > 1e-12 {
            prop_assert!(f >= obj(t / 1.01) - 1e-9 * f.abs().max(1.0));
        }
    }

    #[test]
    fn neg_abs_error_translation_covariant(v in -5.0f64..5.0, y in -5.0f64..5.0, shift in -5i32..5) {
        let c = RewardConfig::neg_abs_error();
        let ctx = |t: f64| RewardContext { demos: &[], query: &[0.0], y_target: t };
        // Use binary fractions so the shifted text is exact.
        let (v, y) = ((v * 8.0).round() / 8.0, (y * 8.0).round() / 8.0);
        let a = reward(&c, &format!("{v}"), &ctx(y));
        let b = reward(&c, &format!("{}", v + shift as f64), &ctx(y + shift as f64));
        prop_assert_eq!(a, b);
        prop_assert!((-11.0..=0.0).contains(&a));
    }

    #[test]
    fn advantages_affine_invariant(rs in prop::collection::vec(-100.0f64..100.0, 2..16), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let a = advantages(&rs).values;
        let moved: Vec<f64> = rs.iter().map(|r| scale * r + shift).collect();
        let b = advantages(&moved).values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_is_order_free_and_seeded(
        errs in prop::collection::vec(0.0f64..1.0, 3..25),
        seed in 0u64..100,
        rot in 0usize..25,
    ) {
        let records: Vec<PredictionRecord> = errs.iter().enumerate().map(|(i, e)| PredictionRecord {
            predictor_id: "p".into(),
            episode_id: format!("ep{i:05}"),
            n: i % 3,
            x_star: vec![0.0],
            y_hat: Some(*e),
            y_target: 0.0,
            raw_text: String::new(),
            error: None,
        }).collect();
        let cfg = BootstrapConfig { n_bootstrap: 200, ci_level: 0.95, seed };
        let a = learning_curve(&records, &cfg).unwrap();
        let mut rotated = records.clone();
        rotated.rotate_left(rot % records.len());
        prop_assert_eq!(&a, &learning_curve(&rotated, &cfg).unwrap());

        let wide = learning_curve(&records, &BootstrapConfig { ci_level: 0.99, ..cfg }).unwrap();
        for (p, w) in a.iter().zip(&wide) {
            prop_assert!(w.ci_low.unwrap() <= p.ci_low.unwrap());
            prop_assert!(w.ci_high.unwrap() >= p.ci_high.unwrap());
            prop_assert!(p.ci_low.unwrap() <= p.mean_abs_error.unwrap());
            prop_assert!(p.mean_abs_error.unwrap() <= p.ci_high.unwrap());
        }
    }
}
