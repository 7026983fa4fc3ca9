//! Lojasiewicz exponents of harmonic polynomials by sampled lower-envelope
//! fits: the gradient form |grad h| >= c1 |h|^{1 - l1} and the distance form
//! |h| >= c2 d(x, N(h))^{l2}.

use rand::Rng;

use super::poly::Polynomial;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LojasiewiczFit {
    pub c1: f64,
    pub ell1: f64,
    /// Distance form, fitted on 2-D polynomials; `None` otherwise.
    pub c2: Option<f64>,
    pub ell2: Option<f64>,
    pub sample_count: usize,
    /// min over samples of log|grad h| - (log c1 + (1 - l1) log|h|);
    /// nonnegative because c1 is calibrated on the worst sample.
    pub worst_violation_margin: f64,
}

/// Fit the Lojasiewicz envelope of a harmonic polynomial over `count`
/// uniform samples in `[-box_half, box_half]^n`.
pub fn lojasiewicz_fit(
    h: &Polynomial,
    box_half: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Result<LojasiewiczFit> {
    if h.is_zero() {
        return Err(Error::domain("cannot fit the zero polynomial"));
    }
    if !h.is_harmonic() {
        return Err(Error::domain("polynomial is not harmonic (checked on coefficients)"));
    }
    if count < 10_000 {
        return Err(Error::domain("Lojasiewicz fit needs at least 1e4 samples"));
    }
    let n = h.n_vars();
    let grad = h.gradient();

    let mut log_h = Vec::with_capacity(count);
    let mut log_g = Vec::with_capacity(count);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-box_half..box_half)).collect();
        let hv = h.eval(&x).abs();
        let gv = grad.iter().map(|p| p.eval(&x).powi(2)).sum::<f64>().sqrt();
        if hv < 1e-300 || gv < 1e-300 {
            continue;
        }
        log_h.push(hv.ln());
        log_g.push(gv.ln());
        points.push(x);
    }
    if log_h.len() < 100 {
        return Err(Error::domain("too few usable samples"));
    }

    let slope = envelope_slope(&log_h, &log_g);
    // gradient of a linear polynomial is constant: slope 0, l1 = 1
    let ell1 = (1.0 - slope).clamp(1e-9, 1.0);
    let slope = 1.0 - ell1;
    // calibrate c1 on the worst sample so no violations remain
    let log_c1 = log_g
        .iter()
        .zip(&log_h)
        .map(|(g, h)| g - slope * h)
        .fold(f64::INFINITY, f64::min);
    let c1 = log_c1.exp();
    let worst = log_g
        .iter()
        .zip(&log_h)
        .map(|(g, h)| g - (log_c1 + slope * h))
        .fold(f64::INFINITY, f64::min);

    // distance form via a marching-squares point cloud of N(h) (2-D only)
    let (c2, ell2) = if n == 2 {
        let cloud = zero_cloud_2d(h, box_half, 512);
        if cloud.is_empty() {
            (None, None)
        } else {
            let mut log_d = Vec::with_capacity(points.len());
            let mut log_h2 = Vec::with_capacity(points.len());
            for (x, lh) in points.iter().zip(&log_h) {
                let d = cloud
                    .iter()
                    .map(|c| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                if d > 1e-12 {
                    log_d.push(d.ln());
                    log_h2.push(*lh);
                }
            }
            let s2 = envelope_slope(&log_d, &log_h2);
            let log_c2 = log_h2
                .iter()
                .zip(&log_d)
                .map(|(h, d)| h - s2 * d)
                .fold(f64::INFINITY, f64::min);
            (Some(log_c2.exp()), Some(s2))
        }
    } else {
        (None, None)
    };

    Ok(LojasiewiczFit {
        c1,
        ell1,
        c2,
        ell2,
        sample_count: log_h.len(),
        worst_violation_margin: worst,
    })
}

/// Slope of the lower envelope of (x, y) scatter: minima over quantile bins
/// of the central x-range, then least squares through the bin minima. The
/// central restriction avoids the poorly sampled extreme bins.
fn envelope_slope(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |f: f64| xs[((xs.len() - 1) as f64 * f) as usize];
    let (lo, hi) = (q(0.30), q(0.98));
    let nb = 24;
    let mut bx = Vec::with_capacity(nb);
    let mut by = Vec::with_capacity(nb);
    for b in 0..nb {
        let a = lo + (hi - lo) * b as f64 / nb as f64;
        let c = lo + (hi - lo) * (b + 1) as f64 / nb as f64;
        let mut best: Option<(f64, f64)> = None;
        for (xi, yi) in x.iter().zip(y) {
            if *xi >= a && *xi <= c {
                if best.map_or(true, |(_, v)| *yi < v) {
                    best = Some((*xi, *yi));
                }
            }
        }
        if let Some((xi, yi)) = best {
            bx.push(xi);
            by.push(yi);
        }
    }
    if bx.len() < 2 {
        return 0.0;
    }
    let n = bx.len() as f64;
    let mx = bx.iter().sum::<f64>() / n;
    let my = by.iter().sum::<f64>() / n;
    let sxx: f64 = bx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = bx.iter().zip(&by).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Marching-squares point cloud of `{h = 0}` on a `res x res` grid.
fn zero_cloud_2d(h: &Polynomial, box_half: f64, res: usize) -> Vec<[f64; 2]> {
    let step = 2.0 * box_half / res as f64;
    let coord = |i: usize| -box_half + i as f64 * step;
    let mut values = vec![0.0; (res + 1) * (res + 1)];
    for j in 0..=res {
        for i in 0..=res {
            values[j * (res + 1) + i] = h.eval(&[coord(i), coord(j)]);
        }
    }
    let mut cloud = Vec::new();
    let at = |i: usize, j: usize| values[j * (res + 1) + i];
    for j in 0..res {
        for i in 0..res {
            // sign-change points on the two lower edges of each cell
            let (f00, f10, f01) = (at(i, j), at(i + 1, j), at(i, j + 1));
            if (f00 > 0.0) != (f10 > 0.0) {
                let t = f00 / (f00 - f10);
                cloud.push([coord(i) + t * step, coord(j)]);
            }
            if (f00 > 0.0) != (f01 > 0.0) {
                let t = f00 / (f00 - f01);
                cloud.push([coord(i), coord(j) + t * step]);
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exponents_match_one_over_m() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for m in [2u32, 3, 4] {
            let h = Polynomial::re_z_pow(m);
            let fit = lojasiewicz_fit(&h, 1.0, 20_000, &mut rng).unwrap();
            assert!(
                (fit.ell1 - 1.0 / m as f64).abs() <= 0.02,
                "m = {m}: l1 = {}",
                fit.ell1
            );
            assert!(fit.worst_violation_margin >= -1e-9);
            // distance form: |h| >= c d^m near the zero rays
            let ell2 = fit.ell2.unwrap();
            assert!(
                (ell2 - m as f64).abs() <= 0.25,
                "m = {m}: l2 = {ell2}"
            );
        }
    }

    #[test]
    fn linear_polynomial_has_constant_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = Polynomial::coordinate(2, 0);
        let fit = lojasiewicz_fit(&h, 1.0, 10_000, &mut rng).unwrap();
        // slope 1 - l1 = 0
        assert!((1.0 - fit.ell1).abs() < 0.02, "slope {}", 1.0 - fit.ell1);
        assert!((fit.c1 - 1.0).abs() < 0.05, "c1 = {}", fit.c1);
    }

    #[test]
    fn zero_and_nonharmonic_rejected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let zero = Polynomial::new(2, []).unwrap();
        assert!(lojasiewicz_fit(&zero, 1.0, 10_000, &mut rng).is_err());
        let xsq = Polynomial::new(2, [(vec![2, 0], 1.0)]).unwrap();
        assert!(lojasiewicz_fit(&xsq, 1.0, 10_000, &mut rng).is_err());
        let h = Polynomial::re_z_pow(2);
        assert!(lojasiewicz_fit(&h, 1.0, 100, &mut rng).is_err());
    }

    #[test]
    fn envelope_has_no_violations_by_construction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = Polynomial::re_z_pow(3);
        let fit = lojasiewicz_fit(&h, 1.0, 15_000, &mut rng).unwrap();
        assert!(fit.worst_violation_margin >= -1e-9);
        assert!(fit.c1 > 0.0);
    }
}
