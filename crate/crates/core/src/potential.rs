//! The quartic double well `W(s) = 18 s²(1-s)²` and its optimal profile.
//!
//! The normalization makes the surface tension `∫₀¹ √(2W(s)) ds` equal to one,
//! so diffuse energies converge to unweighted perimeters and curvature
//! integrals.

/// `W(s) = 18 s² (1-s)²`.
pub fn double_well(s: f64) -> f64 {
    let p = s * (1.0 - s);
    18.0 * p * p
}

/// `W'(s) = 36 s (1-s) (1-2s)`.
pub fn double_well_d1(s: f64) -> f64 {
    36.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// `W''(s) = 36 (1 - 6s + 6s²)`.
pub fn double_well_d2(s: f64) -> f64 {
    36.0 * (1.0 - 6.0 * s + 6.0 * s * s)
}

/// `√(2W(s)) = 6 |s(1-s)|`.
pub fn sqrt_2w(s: f64) -> f64 {
    6.0 * (s * (1.0 - s)).abs()
}

/// Derivative of [`sqrt_2w`]: `6(1-2s)·sign(s(1-s))`, taken as zero at the
/// kinks `s ∈ {0, 1}`.
pub fn sqrt_2w_d1(s: f64) -> f64 {
    let p = s * (1.0 - s);
    if p > 0.0 {
        6.0 * (1.0 - 2.0 * s)
    } else if p < 0.0 {
        -6.0 * (1.0 - 2.0 * s)
    } else {
        0.0
    }
}

/// Optimal 1D transition `q(r) = 1 / (1 + e^{-6r})`, the solution of
/// `q' = √(2W(q))` with `q(0) = 1/2`.
pub fn profile(r: f64) -> f64 {
    // Written so that neither branch overflows for large |r|.
    if r >= 0.0 {
        1.0 / (1.0 + (-6.0 * r).exp())
    } else {
        let e = (6.0 * r).exp();
        e / (1.0 + e)
    }
}

/// `q'(r) = 6 q (1 - q)`.
pub fn profile_d1(r: f64) -> f64 {
    // q(1-q) loses everything to cancellation once q rounds to 1
    let e = (-6.0 * r.abs()).exp();
    6.0 * e / ((1.0 + e) * (1.0 + e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wells_and_midpoint_values() {
        assert_eq!(double_well(0.0), 0.0);
        assert_eq!(double_well(1.0), 0.0);
        assert_eq!(double_well(0.5), 1.125);
        assert_eq!(double_well_d1(0.5), 0.0);
        assert_eq!(double_well_d2(0.5), -18.0);
        assert_eq!(double_well_d1(0.0), 0.0);
        assert_eq!(double_well_d1(1.0), 0.0);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for k in 0..100 {
            let s = -0.5 + 2.0 * k as f64 / 99.0 + 1e-3;
            let fd1 = (double_well(s + h) - double_well(s - h)) / (2.0 * h);
            let fd2 = (double_well_d1(s + h) - double_well_d1(s - h)) / (2.0 * h);
            assert!((fd1 - double_well_d1(s)).abs() < 1e-6, "W' at {s}");
            assert!((fd2 - double_well_d2(s)).abs() < 1e-5, "W'' at {s}");
            if s * (1.0 - s) != 0.0 {
                let fds = (sqrt_2w(s + h) - sqrt_2w(s - h)) / (2.0 * h);
                assert!((fds - sqrt_2w_d1(s)).abs() < 1e-6, "(√2W)' at {s}");
            }
        }
    }

    #[test]
    fn sqrt_2w_values_and_surface_tension() {
        assert_eq!(sqrt_2w(0.0), 0.0);
        assert_eq!(sqrt_2w(1.0), 0.0);
        assert_eq!(sqrt_2w(0.5), 1.5);
        assert_eq!(sqrt_2w_d1(0.0), 0.0);
        assert_eq!(sqrt_2w_d1(1.0), 0.0);
        let n = 10_000;
        let sigma: f64 = (0..n).map(|i| sqrt_2w((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        assert!((sigma - 1.0).abs() < 1e-6);
    }

    #[test]
    fn profile_solves_its_ode() {
        assert_eq!(profile(0.0), 0.5);
        let mut worst = 0.0f64;
        for k in 0..=1000 {
            let r = -5.0 + 10.0 * k as f64 / 1000.0;
            let q = profile(r);
            worst = worst.max((profile_d1(r) - 6.0 * q * (1.0 - q)).abs());
            // q' = √(2W(q)) and equipartition ½q'² = W(q)
            assert!((profile_d1(r) - sqrt_2w(q)).abs() < 1e-12);
            assert!((0.5 * profile_d1(r).powi(2) - double_well(q)).abs() < 1e-12);
        }
        assert!(worst < 1e-12);
        assert!(profile(-200.0) >= 0.0 && profile(200.0) <= 1.0);
    }

    proptest! {
        #[test]
        fn profile_symmetry_and_monotonicity(r in -20.0f64..20.0, dr in 1e-6f64..1.0) {
            prop_assert!((profile(r) + profile(-r) - 1.0).abs() < 1e-14);
            prop_assert!(profile(r + dr) >= profile(r));
            prop_assert!(profile_d1(r) > 0.0);
            let step = if r > 0.0 { 1.0 } else if r < 0.0 { 0.0 } else { 0.5 };
            prop_assert!((profile(r) - step).abs() <= (-6.0 * r.abs()).exp() + 1e-15);
        }

        #[test]
        fn potential_is_nonnegative(s in -10.0f64..10.0) {
            prop_assert!(double_well(s) >= 0.0);
            prop_assert!(sqrt_2w(s) >= 0.0);
        }
    }
}
