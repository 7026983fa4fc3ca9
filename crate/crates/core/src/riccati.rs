//! Radial evolution of the geodesic-circle curvature.
//!
//! On a surface, the mean curvature h(r) of the geodesic circle of radius r
//! obeys the Riccati equation h' = -h^2 - K(r) along the ray, with the flat
//! small-radius asymptote h ~ 1/r. Conjugate points show up as blow-up of h
//! to -infinity and are reported, never clipped.

use crate::{Error, Result};

/// Integration tolerance for the adaptive stepper.
pub const RICCATI_TOL: f64 = 1e-9;

/// Solution threshold: |h| beyond 1/RICCATI_TOL counts as a conjugate-point
/// blow-up.
const BLOWUP: f64 = 1.0 / RICCATI_TOL;

/// Integrate h' = -h^2 - K(r) from `r0` to `r`.
///
/// `h0` seeds the curvature at `r0`; pass `None` for the flat asymptote
/// 1/r0 shared by all geodesic circles at small radius. `k_profile` is the
/// Gaussian curvature along the ray.
pub fn geodesic_circle_curvature(
    k_profile: impl Fn(f64) -> f64,
    r: f64,
    r0: f64,
    h0: Option<f64>,
) -> Result<f64> {
    if !(r0 > 0.0) || r < r0 {
        return Err(Error::domain(format!(
            "need 0 < r0 <= r, got r0 = {r0}, r = {r}"
        )));
    }
    let h0 = h0.unwrap_or(1.0 / r0);
    if !h0.is_finite() {
        return Err(Error::domain("initial curvature h0 must be finite"));
    }
    let f = |r: f64, h: f64| -h * h - k_profile(r);
    integrate_adaptive(f, r0, r, h0)
}

/// Dormand-Prince 5(4) with PI step control on a scalar ODE.
fn integrate_adaptive(f: impl Fn(f64, f64) -> f64, t0: f64, t1: f64, y0: f64) -> Result<f64> {
    // Butcher tableau (coefficients of the classical DOPRI5 pair).
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    // 4th-order embedded weights
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];

    let mut t = t0;
    let mut y = y0;
    let mut h = ((t1 - t0) / 100.0).min(0.1 * t0).max(1e-12);
    let mut k = [0.0; 7];
    let max_steps = 2_000_000;

    for _ in 0..max_steps {
        if t >= t1 {
            return Ok(y);
        }
        if h > t1 - t {
            h = t1 - t;
        }
        k[0] = f(t, y);
        for s in 0..6 {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                acc += A[s][j] * kj;
            }
            k[s + 1] = f(t + C[s] * h, y + h * acc);
        }
        let y5: f64 = y + h * (0..7).map(|j| B5[j] * k[j]).sum::<f64>();
        let y4: f64 = y + h * (0..7).map(|j| B4[j] * k[j]).sum::<f64>();
        let err = (y5 - y4).abs();
        let scale = RICCATI_TOL * (1.0 + y.abs().max(y5.abs()));
        if err <= scale {
            t += h;
            y = y5;
            if !y.is_finite() || y.abs() > BLOWUP {
                return Err(Error::ConjugatePoint { radius: t });
            }
        }
        let factor = if err > 0.0 {
            0.9 * (scale / err).powf(0.2)
        } else {
            5.0
        };
        h *= factor.clamp(0.2, 5.0);
        if h < 1e-15 {
            return Err(Error::ConjugatePoint { radius: t });
        }
    }
    Err(Error::Solver {
        context: format!("Riccati integration exceeded step cap before r = {t1}"),
        residuals: vec![y],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_profile_gives_inverse_radius() {
        // K = 0, seeded at r0 = 0.01 with h0 = 100: h(r) = 1/r.
        let h = geodesic_circle_curvature(|_| 0.0, 0.5, 0.01, Some(100.0)).unwrap();
        assert_relative_eq!(h, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn sphere_profile_gives_cotangent() {
        let r0 = 1e-4;
        let h = geodesic_circle_curvature(|_| 1.0, 1.0, r0, Some(1.0 / r0.tan())).unwrap();
        assert_relative_eq!(h, 1.0_f64.tan().recip(), epsilon = 1e-6);
        assert_relative_eq!(h, 0.642_092_615_934_330_7, epsilon = 1e-6);
    }

    #[test]
    fn hyperbolic_profile_gives_cotanh() {
        let r0 = 1e-4;
        let h0 = f64::cosh(r0) / f64::sinh(r0);
        let h = geodesic_circle_curvature(|_| -1.0, 1.0, r0, Some(h0)).unwrap();
        assert_relative_eq!(h, 1.0 / 1.0_f64.tanh(), epsilon = 1e-6);
        assert_relative_eq!(h, 1.313_035_285_499_331, epsilon = 1e-6);
    }

    #[test]
    fn default_seed_is_flat_asymptote() {
        let h = geodesic_circle_curvature(|_| 0.0, 1.0, 1e-6, None).unwrap();
        assert_relative_eq!(h, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn conjugate_point_reported_on_sphere() {
        // On the unit sphere h = cot r blows up at r = pi.
        let err = geodesic_circle_curvature(|_| 1.0, 3.5, 1e-4, None).unwrap_err();
        match err {
            Error::ConjugatePoint { radius } => {
                assert!((radius - std::f64::consts::PI).abs() < 0.05, "radius {radius}");
            }
            other => panic!("expected conjugate point, got {other}"),
        }
    }

    #[test]
    fn comparison_order_across_curvatures() {
        // h_{K=1} < h_{K=0} < h_{K=-1} on (0, pi/2).
        for &r in &[0.2, 0.5, 1.0, 1.5] {
            let r0 = 1e-5;
            let hs = geodesic_circle_curvature(|_| 1.0, r, r0, None).unwrap();
            let hf = geodesic_circle_curvature(|_| 0.0, r, r0, None).unwrap();
            let hh = geodesic_circle_curvature(|_| -1.0, r, r0, None).unwrap();
            assert!(hs < hf && hf < hh, "order violated at r = {r}: {hs} {hf} {hh}");
        }
    }

    #[test]
    fn bad_interval_rejected() {
        assert!(geodesic_circle_curvature(|_| 0.0, 0.5, 0.0, None).is_err());
        assert!(geodesic_circle_curvature(|_| 0.0, 0.1, 0.2, None).is_err());
    }
}
