mod common;

use proptest::prelude::*;
use rand::Rng;
use tvrestore::{prox_conjugate, prox_group_l12, prox_numeric_oracle, GroupedVector};

use common::rng;

fn group_prox(v: [f64; 2], tau: f64) -> [f64; 2] {
    let out = prox_group_l12(&GroupedVector::new(v.to_vec()).unwrap(), tau).unwrap();
    [out.as_slice()[0], out.as_slice()[1]]
}

#[test]
fn matches_brute_force_oracle() {
    let mut r = rng(10);
    for _ in 0..100 {
        let z = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        let tau = r.random_range(0.05..2.0);
        let got = group_prox(z, tau);
        let want = prox_numeric_oracle(|u| u[0].hypot(u[1]), tau, &z).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-4, "z={z:?} tau={tau} got={got:?} want={want:?}");
        }
    }
}

#[test]
fn conjugate_is_projection() {
    // prox of the conjugate of λ‖·‖₂ with γ = 1 projects onto the λ-ball
    let lambda = 0.5;
    let out = prox_conjugate(&[3.0, 4.0], 1.0, |u| group_prox([u[0], u[1]], lambda).to_vec()).unwrap();
    assert!((out[0] - 0.3).abs() < 1e-12 && (out[1] - 0.4).abs() < 1e-12);
    let out = prox_conjugate(&[0.1, 0.2], 1.0, |u| group_prox([u[0], u[1]], lambda).to_vec()).unwrap();
    assert!((out[0] - 0.1).abs() < 1e-12 && (out[1] - 0.2).abs() < 1e-12);
}

fn pair() -> impl Strategy<Value = [f64; 2]> {
    [-10.0f64..10.0, -10.0f64..10.0]
}

proptest! {
    #[test]
    fn nonexpansive(a in pair(), b in pair(), tau in 0.01f64..5.0) {
        let pa = group_prox(a, tau);
        let pb = group_prox(b, tau);
        let d_out = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        let d_in = (a[0] - b[0]).hypot(a[1] - b[1]);
        prop_assert!(d_out <= d_in + 1e-12);
    }

    #[test]
    fn output_collinear_and_shrunk(z in pair(), tau in 0.01f64..5.0) {
        let p = group_prox(z, tau);
        let cross = p[0] * z[1] - p[1] * z[0];
        prop_assert!(cross.abs() < 1e-9);
        prop_assert!(p[0] * z[0] + p[1] * z[1] >= 0.0);
        let nz = z[0].hypot(z[1]);
        let np = p[0].hypot(p[1]);
        prop_assert!((np - (nz - tau).max(0.0)).abs() < 1e-9);
    }

    #[test]
    fn moreau_identity(z in pair(), gamma in 0.05f64..5.0, lambda in 0.05f64..3.0) {
        // prox_{γh}(z) + γ·proj_{λ-ball}(z/γ) = z for h = λ‖·‖₂
        let p = group_prox(z, gamma * lambda);
        let w = [z[0] / gamma, z[1] / gamma];
        let nw = w[0].hypot(w[1]);
        let s = if nw > lambda { lambda / nw } else { 1.0 };
        for i in 0..2 {
            prop_assert!((p[i] + gamma * s * w[i] - z[i]).abs() < 1e-9 * (1.0 + z[i].abs()));
        }
    }
}
