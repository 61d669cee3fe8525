use gmc::kernels::{Mollifier, Scheme};
use gmc::stats::second_moment_quadrature;
use statrs::function::gamma::gamma;

#[test]
fn limit_moment_matches_gamma_identity() {
    // β² = 1/4: ∫∫ e^{β² K} = 2Γ(1/2)/Γ(3/4)².
    let want = 2.0 * gamma(0.5) / gamma(0.75).powi(2);
    let got = second_moment_quadrature(0.5, &Scheme::LimitCircle, 64).unwrap();
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn limit_moment_general_beta() {
    // With K = 4 ln 2 − 2 ln(2 sin πd): 2^{2β²} Γ(1/2 − β²)/(√π Γ(1 − β²)).
    for beta in [0.2f64, 0.4, 0.6] {
        let b2 = beta * beta;
        let want = 2f64.powf(2.0 * b2) * gamma(0.5 - b2) / (std::f64::consts::PI.sqrt() * gamma(1.0 - b2));
        let got = second_moment_quadrature(beta, &Scheme::LimitCircle, 64).unwrap();
        assert!((got - want).abs() < 1e-6 * want, "β={beta}: {got} vs {want}");
    }
}

#[test]
fn supercritical_second_moment_is_rejected() {
    assert!(second_moment_quadrature(0.8, &Scheme::LimitCircle, 64).is_err());
    assert!(second_moment_quadrature(0.5, &Scheme::Vaguelet { n: 3 }, 64).is_err());
}

#[test]
fn approximations_increase_to_the_limit() {
    let limit = second_moment_quadrature(0.5, &Scheme::LimitCircle, 64).unwrap();
    let mut prev = 0.0;
    for n in [4u32, 16, 64, 256, 1024] {
        let f = second_moment_quadrature(0.5, &Scheme::FourierPartial { n }, 64).unwrap();
        assert!(f > prev && f < limit, "n={n}: {f}");
        prev = f;
    }
    assert!((limit - prev) / limit < 0.05);
    let w = second_moment_quadrature(0.5, &Scheme::WhiteNoiseCone { t: 1024f64.ln() }, 64).unwrap();
    let c = second_moment_quadrature(0.5, &Scheme::ConvolutionSpectral { n: 1024, mollifier: Mollifier::Gaussian }, 64).unwrap();
    for v in [w, c] {
        assert!((v - limit).abs() / limit < 0.1, "{v} vs {limit}");
    }
}
