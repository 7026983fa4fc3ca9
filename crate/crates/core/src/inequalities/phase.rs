//! Phase-amplitude splitting along rays: extract u = e^Lambda sin(beta1 phi)
//! with beta1 = sqrt(lambda) via the energy envelope, and measure the
//! eikonal defect | |grad phi|^2 - 1 |.

use crate::spectral::EigenPair;
use crate::surface::{Surface, SurfaceKind};
use crate::vec3;
use crate::{Error, Result};

/// Uniformly sampled values of `u` along a ray, with optional exact
/// directional derivatives (closed-form pairs supply them; FEM pairs fall
/// back to finite differences).
#[derive(Debug, Clone)]
pub struct Ray {
    pub arclength: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Option<Vec<f64>>,
}

impl Ray {
    /// Sample a closed-form torus pair along `y = const`, `x` in
    /// `[x0, x0 + span]`.
    pub fn along_torus_x(
        pair: &EigenPair,
        surface: &Surface,
        y: f64,
        x0: f64,
        span: f64,
        n: usize,
    ) -> Result<Ray> {
        if !matches!(surface.kind(), SurfaceKind::FlatTorus { .. }) {
            return Err(Error::domain("ray helper needs a flat torus"));
        }
        let mut arclength = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        let mut derivatives = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = span * i as f64 / n as f64;
            let p = [x0 + s, y, 0.0];
            let (u, g) = pair
                .eval_closed_form(p)
                .ok_or_else(|| Error::domain("torus ray sampling needs a closed-form pair"))?;
            arclength.push(s);
            values.push(u);
            derivatives.push(g[0]);
        }
        Ok(Ray {
            arclength,
            values,
            derivatives: Some(derivatives),
        })
    }

    /// Sample a closed-form sphere pair along the meridian `phi = const`,
    /// colatitude in `[theta0, theta1]`.
    pub fn along_sphere_meridian(
        pair: &EigenPair,
        surface: &Surface,
        phi: f64,
        theta0: f64,
        theta1: f64,
        n: usize,
    ) -> Result<Ray> {
        if !matches!(surface.kind(), SurfaceKind::UnitSphere) {
            return Err(Error::domain("meridian helper needs the unit sphere"));
        }
        let mut arclength = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        let mut derivatives = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let theta = theta0 + (theta1 - theta0) * i as f64 / n as f64;
            let p = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            let (u, g) = pair
                .eval_closed_form(p)
                .ok_or_else(|| Error::domain("meridian sampling needs a closed-form pair"))?;
            // unit tangent in the direction of increasing theta
            let e_theta = [
                theta.cos() * phi.cos(),
                theta.cos() * phi.sin(),
                -theta.sin(),
            ];
            arclength.push(theta - theta0);
            values.push(u);
            derivatives.push(vec3::dot(g, e_theta));
        }
        Ok(Ray {
            arclength,
            values,
            derivatives: Some(derivatives),
        })
    }

    fn step(&self) -> f64 {
        self.arclength
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max)
    }

    fn derivative_samples(&self) -> Vec<f64> {
        match &self.derivatives {
            Some(d) => d.clone(),
            None => {
                let n = self.values.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = if i == 0 {
                            (0, 1)
                        } else if i + 1 == n {
                            (n - 2, n - 1)
                        } else {
                            (i - 1, i + 1)
                        };
                        (self.values[b] - self.values[a])
                            / (self.arclength[b] - self.arclength[a])
                    })
                    .collect()
            }
        }
    }
}

/// A ray with optional angular neighbors for the transverse phase gradient.
#[derive(Debug, Clone)]
pub struct RayBundle {
    pub main: Ray,
    /// (left, right, angular spacing): rays at transverse offsets -+spacing.
    pub neighbors: Option<(Ray, Ray, f64)>,
}

#[derive(Debug, Clone)]
pub struct PhaseAmplitude {
    pub beta1: f64,
    /// Lambda: log-amplitude per sample.
    pub log_amplitude: Vec<f64>,
    /// Unwrapped phase (length units) per sample.
    pub phase: Vec<f64>,
    /// sup over interior samples of | |grad phi|^2 - 1 |.
    pub eikonal_defect: f64,
    /// max relative error of e^Lambda sin(beta1 phi) against u, away from
    /// amplitude zeros.
    pub reconstruction_error: f64,
}

/// Extract the envelope and phase of an eigenfunction along a ray.
pub fn phase_amplitude_extract(pair: &EigenPair, bundle: &RayBundle) -> Result<PhaseAmplitude> {
    let beta1 = pair.lambda.sqrt();
    let ray = &bundle.main;
    let n = ray.values.len();
    if n < 5 {
        return Err(Error::domain("ray needs at least 5 samples"));
    }
    let max_step = ray.step();
    let allowed = (2.0 * std::f64::consts::PI / beta1) / 16.0;
    if max_step > allowed * (1.0 + 1e-9) {
        return Err(Error::domain(format!(
            "ray step {max_step} exceeds a sixteenth of the wavelength {allowed}"
        )));
    }
    let umax = ray.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if umax <= 0.0 {
        return Err(Error::domain("u vanishes identically on the ray"));
    }

    let (log_amplitude, phase) = extract_on_ray(ray, beta1, umax)?;

    // reconstruction identity away from amplitude zeros
    let mut reconstruction_error = 0.0f64;
    for i in 0..n {
        let amp = log_amplitude[i].exp();
        if amp < 1e-9 * umax {
            continue;
        }
        let rec = amp * (beta1 * phase[i]).sin();
        reconstruction_error = reconstruction_error.max((rec - ray.values[i]).abs() / umax);
    }

    // eikonal defect on interior samples
    let angular = match &bundle.neighbors {
        Some((left, right, spacing)) => {
            let (_, pl) = extract_on_ray(left, beta1, umax)?;
            let (_, pr) = extract_on_ray(right, beta1, umax)?;
            Some((pl, pr, *spacing))
        }
        None => None,
    };
    let mut defect = 0.0f64;
    for i in 1..n - 1 {
        let ds = ray.arclength[i + 1] - ray.arclength[i - 1];
        let dphi = (phase[i + 1] - phase[i - 1]) / ds;
        let mut grad2 = dphi * dphi;
        if let Some((pl, pr, spacing)) = &angular {
            if i < pl.len() && i < pr.len() {
                let da = (pr[i] - pl[i]) / (2.0 * spacing);
                grad2 += da * da;
            }
        }
        defect = defect.max((grad2 - 1.0).abs());
    }

    Ok(PhaseAmplitude {
        beta1,
        log_amplitude,
        phase,
        eikonal_defect: defect,
        reconstruction_error,
    })
}

fn extract_on_ray(ray: &Ray, beta1: f64, umax: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ray.values.len();
    let derivs = ray.derivative_samples();
    let mut log_amplitude = Vec::with_capacity(n);
    let mut wrapped = Vec::with_capacity(n);
    let mut all_tiny = true;
    for i in 0..n {
        let u = ray.values[i];
        let v = derivs[i] / beta1;
        let energy = u * u + v * v;
        if energy.sqrt() > 1e-12 * umax {
            all_tiny = false;
        }
        log_amplitude.push(0.5 * energy.max(1e-300).ln());
        wrapped.push(u.atan2(v));
    }
    if all_tiny {
        return Err(Error::domain(
            "amplitude below 1e-12 ||u||_inf along the whole ray",
        ));
    }
    // unwrap and convert to length units
    let mut phase = Vec::with_capacity(n);
    let mut offset = 0.0;
    for i in 0..n {
        if i > 0 {
            let mut d = wrapped[i] - wrapped[i - 1];
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
                offset -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        phase.push((wrapped[i] + offset) / beta1);
    }
    Ok((log_amplitude, phase))
}
