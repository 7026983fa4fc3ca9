//! Legendre polynomials, associated Legendre functions and their zeros.
//!
//! Unnormalized conventions (no Condon-Shortley factors stripped): these feed
//! the closed-form eigenfunction families and the nodal-length oracles, where
//! only ratios and zero locations matter.

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
pub fn legendre(l: u32, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=l {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Derivative `P_l'(x)` from the standard identity
/// `(1-x^2) P_l'(x) = l (P_{l-1}(x) - x P_l(x))`.
pub fn legendre_deriv(l: u32, x: f64) -> f64 {
    if l == 0 {
        return 0.0;
    }
    let denom = 1.0 - x * x;
    if denom.abs() < 1e-12 {
        // endpoint limit: P_l'(1) = l(l+1)/2, odd/even symmetry at -1
        let v = l as f64 * (l as f64 + 1.0) / 2.0;
        return if x > 0.0 {
            v
        } else if l % 2 == 0 {
            -v
        } else {
            v
        };
    }
    l as f64 * (legendre(l - 1, x) - x * legendre(l, x)) / denom
}

/// Associated Legendre `P_l^m(x)` for `0 <= m <= l`, Condon-Shortley phase
/// included.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    assert!(m <= l, "assoc_legendre requires m <= l");
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let mut pmm = 1.0;
    if m > 0 {
        let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        let ll = ll as f64;
        let m = m as f64;
        pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

/// `d/dtheta P_l^m(cos theta)`, needed for exact tangential derivatives of
/// spherical harmonics along meridians.
pub fn assoc_legendre_dtheta(l: u32, m: u32, theta: f64) -> f64 {
    let x = theta.cos();
    let s = theta.sin();
    if s.abs() < 1e-12 {
        // poles: nonzero only for m = 1
        if m == 1 {
            let v = -(l as f64) * (l as f64 + 1.0) / 2.0;
            return if x > 0.0 { -v } else { v * if l % 2 == 0 { -1.0 } else { 1.0 } };
        }
        return 0.0;
    }
    // d/dtheta P_l^m(cos t) = (1/sin t) [ l x P_l^m(x) - (l+m) P_{l-1}^m(x) ]
    let plm = assoc_legendre(l, m, x);
    let pl1m = if l >= 1 && m <= l - 1 {
        assoc_legendre(l - 1, m, x)
    } else {
        0.0
    };
    (l as f64 * x * plm - (l as f64 + m as f64) * pl1m) / s
}

/// All `l` roots of `P_l` in `(-1, 1)`, ascending. Newton from the classical
/// Chebyshev-based initial guesses (the Gauss-Legendre node construction).
pub fn legendre_roots(l: u32) -> Vec<f64> {
    let n = l as usize;
    let mut roots = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let f = legendre(l, x);
            let fp = legendre_deriv(l, x);
            let dx = f / fp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_order_values() {
        assert_relative_eq!(legendre(2, 0.0), -0.5);
        assert_relative_eq!(legendre(3, 1.0), 1.0);
        assert_relative_eq!(legendre(2, 0.5), 0.5 * (3.0 * 0.25 - 1.0));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for l in 1..8 {
            for &x in &[-0.7, -0.2, 0.1, 0.6, 0.93] {
                let h = 1e-6;
                let fd = (legendre(l, x + h) - legendre(l, x - h)) / (2.0 * h);
                assert_relative_eq!(legendre_deriv(l, x), fd, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn assoc_reduces_to_plain_at_m0() {
        for l in 0..6 {
            for &x in &[-0.4, 0.0, 0.8] {
                assert_relative_eq!(assoc_legendre(l, 0, x), legendre(l, x), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn dtheta_matches_finite_difference() {
        for &(l, m) in &[(1u32, 0u32), (2, 0), (3, 1), (5, 2), (20, 0)] {
            for &t in &[0.4_f64, 1.1, 2.0, 2.8] {
                let h = 1e-6;
                let fd =
                    (assoc_legendre(l, m, (t + h).cos()) - assoc_legendre(l, m, (t - h).cos()))
                        / (2.0 * h);
                assert_relative_eq!(assoc_legendre_dtheta(l, m, t), fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn roots_are_zeros_and_symmetric() {
        for l in 2..12 {
            let roots = legendre_roots(l);
            assert_eq!(roots.len(), l as usize);
            for &r in &roots {
                assert!(legendre(l, r).abs() < 1e-12, "P_{l}({r}) not zero");
            }
            for (a, b) in roots.iter().zip(roots.iter().rev()) {
                assert_relative_eq!(*a, -*b, epsilon = 1e-12);
            }
        }
    }
}
