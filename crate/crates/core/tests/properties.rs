use gmc::chaos::{build_measure, ChaosMeasure, NormalizationRule};
use gmc::decorrelate::{build_partition, zeps_cov};
use gmc::grid::{CircleDistance, GridDomain};
use gmc::kernels::{Mollifier, Scheme};
use gmc::rng::{Purpose, RngStream};
use gmc::samplers::sample_fourier_field;
use gmc::stats::{kr_distance, ks_two_sample};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 5..60)
}

fn masses(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, m)
}

fn measure(grid: GridDomain, w: Vec<f64>) -> ChaosMeasure {
    ChaosMeasure::from_weights(grid, w).unwrap()
}

proptest! {
    #[test]
    fn ks_is_symmetric(xs in sample(), ys in sample()) {
        let a = ks_two_sample(&xs, &ys).unwrap();
        let b = ks_two_sample(&ys, &xs).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert!((0.0..=1.0).contains(&a.statistic));
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn ks_ignores_monotone_transforms(xs in sample(), ys in sample()) {
        let f = |v: &[f64]| v.iter().map(|x| (x / 10.0).exp() + x.powi(3)).collect::<Vec<_>>();
        let a = ks_two_sample(&xs, &ys).unwrap();
        let b = ks_two_sample(&f(&xs), &f(&ys)).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
    }

    #[test]
    fn kr_is_a_metric_on_the_circle(a in masses(32), b in masses(32), c in masses(32)) {
        let g = GridDomain::circle(32).unwrap();
        let (a, b, c) = (measure(g, a), measure(g, b), measure(g, c));
        let ab = kr_distance(&a, &b).unwrap();
        prop_assert!((ab - kr_distance(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(kr_distance(&a, &a).unwrap(), 0.0);
        let tri = kr_distance(&a, &c).unwrap() + kr_distance(&c, &b).unwrap();
        prop_assert!(ab <= tri + 1e-10);
    }

    #[test]
    fn kr_is_a_metric_on_the_interval(a in masses(17), b in masses(17), c in masses(17)) {
        let g = GridDomain::interval(17).unwrap();
        let (a, b, c) = (measure(g, a), measure(g, b), measure(g, c));
        let ab = kr_distance(&a, &b).unwrap();
        prop_assert!((ab - kr_distance(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(ab <= kr_distance(&a, &c).unwrap() + kr_distance(&c, &b).unwrap() + 1e-10);
    }

    #[test]
    fn circle_distance_is_a_metric(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
        let d = |p, q| CircleDistance::between(p, q).get();
        prop_assert!((0.0..=0.5).contains(&d(x, y)));
        prop_assert!((d(x, y) - d(y, x)).abs() <= 1e-15);
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-12);
    }

    #[test]
    fn kernels_are_symmetric(x in 0.0f64..1.0, y in 0.0f64..1.0, n in 1u32..64) {
        prop_assume!(CircleDistance::between(x, y).get() > 1e-9);
        for s in [
            Scheme::LimitCircle,
            Scheme::FourierPartial { n },
            Scheme::WhiteNoiseCone { t: (n as f64).ln() + 0.1 },
            Scheme::ConvolutionSpectral { n, mollifier: Mollifier::Poisson },
            Scheme::Vaguelet { n: n % 8 },
            Scheme::ExactConeInterval { t: 1.5 },
        ] {
            let (a, b) = (s.kernel(x, y).unwrap(), s.kernel(y, x).unwrap());
            prop_assert!(a.is_finite());
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} {a} {b}", s.name());
        }
    }

    #[test]
    fn partition_sums_to_one(k in 1u32..5) {
        let g = GridDomain::circle(256).unwrap();
        let eps = 0.5f64.powi(k as i32);
        let p = build_partition(eps, &g).unwrap();
        for i in 0..g.len() {
            let s: f64 = (0..p.len()).map(|c| p.part(c)[i]).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!((zeps_cov(&p, i, i) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn chaos_weights_are_positive(seed in any::<u64>(), beta in 0.05f64..1.0) {
        let g = GridDomain::circle(64).unwrap();
        let (field, _) = sample_fourier_field(16, &g, RngStream::new(seed, 0, Purpose::Test)).unwrap();
        let mu = build_measure(&field, beta, NormalizationRule::lebesgue()).unwrap();
        prop_assert!(mu.weights.iter().all(|w| *w > 0.0 && w.is_finite()));
    }
}
