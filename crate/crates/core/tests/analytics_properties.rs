//! Structural properties of the closed-form predictions: quadrature
//! convergence, monotonicities, bounds and the symmetry of the phase
//! integrand.

use sqdistill_core::analytics::{v_in, v_out, v_out_qcp_with, ProtocolParams, QuadratureSettings};
use sqdistill_core::covariance::{closed_form_moments, SqueezedModeParams};
use sqdistill_core::quadrature::QuadratureRule;
use sqdistill_core::special::erf;

fn params(sigma: f64, theta: f64, q: f64) -> ProtocolParams {
    ProtocolParams::new(
        SqueezedModeParams::new(0.32, 8.5).unwrap(),
        sigma,
        theta,
        q,
        1.0,
        1,
    )
    .unwrap()
}

#[test]
fn adaptive_quadrature_settles_across_regime() {
    // The default ladder must converge for all sigma up to 0.6 and a
    // refined ladder must land on the same numbers.
    for &sigma in &[0.1, 0.28, 0.4, 0.6] {
        for &q in &[0.1, 0.7, 1.5, 3.0] {
            for &theta in &[0.0, std::f64::consts::FRAC_PI_2] {
                let p = params(sigma, theta, q);
                let coarse = v_out_qcp_with(&p, &QuadratureSettings::default()).unwrap();
                let fine = v_out_qcp_with(
                    &p,
                    &QuadratureSettings {
                        base_nodes: 256,
                        max_nodes: 2048,
                        tol: 1e-10,
                    },
                )
                .unwrap();
                assert!(
                    (coarse.v_out - fine.v_out).abs() < 2e-8,
                    "sigma={sigma} q={q} theta={theta}: {} vs {}",
                    coarse.v_out,
                    fine.v_out
                );
                assert!((coarse.p_success - fine.p_success).abs() < 2e-8);
            }
        }
    }
}

#[test]
fn quadrature_cap_reports_nonconvergence() {
    let p = params(0.6, 0.0, 0.5);
    let starved = QuadratureSettings {
        base_nodes: 16,
        max_nodes: 32,
        tol: 1e-12,
    };
    assert!(v_out_qcp_with(&p, &starved).is_err());
}

#[test]
fn success_probability_strictly_increases_with_threshold() {
    for &sigma in &[0.17, 0.28, 0.40] {
        for &theta in &[0.0, std::f64::consts::FRAC_PI_2] {
            let mut last = 0.0;
            for &q in &[0.2, 0.4, 0.7, 1.0, 1.5, 2.0, 3.0] {
                let r = v_out(&params(sigma, theta, q)).unwrap();
                assert!(r.p_success > last, "p not increasing at q={q}");
                assert!(r.p_success <= 1.0);
                last = r.p_success;
            }
        }
    }
}

#[test]
fn output_variance_never_beats_initial_squeezing() {
    for &sigma in &[0.17, 0.28, 0.40] {
        for &q in &[0.4, 0.7, 1.0, 1.5] {
            for &theta in &[0.0, std::f64::consts::FRAC_PI_2] {
                let r = v_out(&params(sigma, theta, q)).unwrap();
                assert!(r.v_out >= 0.32, "v_out {} below V_x", r.v_out);
            }
        }
    }
}

#[test]
fn integrand_symmetric_under_joint_phase_flip() {
    // At the protocol trigger angles the conditioned-moment integrand is
    // pointwise invariant under (phi1, phi2) -> (-phi1, -phi2): doubling
    // the quadrature sum over the phi1 > 0 half-plane must reproduce the
    // full tensor quadrature.
    let state = SqueezedModeParams::new(0.32, 8.5).unwrap();
    let (sigma, q) = (0.28, 0.9);
    let rule = QuadratureRule::gauss_hermite(64).unwrap();
    let scale = std::f64::consts::SQRT_2 * sigma;

    for theta in [0.0, std::f64::consts::FRAC_PI_2] {
        let bracket = |phi1: f64, phi2: f64| -> f64 {
            let m = closed_form_moments(&state, phi1, phi2, theta);
            let e = erf(q / (2.0 * m.a).sqrt());
            m.b * e
                - (2.0 / std::f64::consts::PI).sqrt()
                    * m.c
                    * m.c
                    * q
                    * m.a.powf(-1.5)
                    * (-q * q / (2.0 * m.a)).exp()
        };

        let n = rule.len();
        let mut full = 0.0;
        let mut half = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = rule.weights()[i] * rule.weights()[j];
                let value = w * bracket(scale * rule.nodes()[i], scale * rule.nodes()[j]);
                full += value;
                // even node count, so no node sits at phi1 = 0
                if rule.nodes()[i] > 0.0 {
                    half += 2.0 * value;
                }
            }
        }
        assert!(
            (full - half).abs() <= 1e-10 * full.abs().max(1.0),
            "theta = {theta}: {full} vs {half}"
        );
    }
}

#[test]
fn conjugate_crossover_sits_near_sigma_point_three() {
    // Coarse version of the acceptance criterion: the advantage of the
    // anti-squeezed trigger changes sign between sigma = 0.25 and 0.35.
    let gap = |sigma: f64| -> f64 {
        let v0 = v_out(&params(sigma, 0.0, 1.0)).unwrap().v_out;
        let v90 = v_out(&params(sigma, std::f64::consts::FRAC_PI_2, 1.0))
            .unwrap()
            .v_out;
        v90 - v0
    };
    assert!(gap(0.25) < 0.0);
    assert!(gap(0.35) > 0.0);
}

#[test]
fn input_variance_monotone_in_noise() {
    let mut last = 0.0;
    for &sigma in &[0.0, 0.1, 0.2, 0.3, 0.5, 0.8] {
        let v = v_in(&params(sigma, 0.0, 1.0)).unwrap();
        assert!(v > last || sigma == 0.0);
        last = v;
    }
}
