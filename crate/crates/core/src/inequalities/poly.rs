//! Multivariate polynomials as sparse coefficient maps, with the symbolic
//! operations the inequality estimates need (gradient, Laplacian,
//! homogeneity and harmonicity checks) and a JSON exchange format.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// exponent tuple -> coefficient
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new(n_vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Polynomial> {
        let mut map = BTreeMap::new();
        for (exp, coef) in terms {
            if exp.len() != n_vars {
                return Err(Error::domain(format!(
                    "exponent tuple {exp:?} does not match {n_vars} variables"
                )));
            }
            if coef != 0.0 {
                *map.entry(exp).or_insert(0.0) += coef;
            }
        }
        map.retain(|_, c| *c != 0.0);
        Ok(Polynomial {
            n_vars,
            terms: map,
        })
    }

    /// Coordinate polynomial `x_i`.
    pub fn coordinate(n_vars: usize, i: usize) -> Polynomial {
        let mut exp = vec![0u32; n_vars];
        exp[i] = 1;
        Polynomial::new(n_vars, [(exp, 1.0)]).unwrap()
    }

    /// Real part of `(x + i y)^m` in two variables.
    pub fn re_z_pow(m: u32) -> Polynomial {
        let mut terms = Vec::new();
        for k in (0..=m).step_by(2) {
            let sign = if k % 4 == 0 { 1.0 } else { -1.0 };
            terms.push((vec![m - k, k], sign * binomial(m, k)));
        }
        Polynomial::new(2, terms).unwrap()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degrees = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degrees.next() {
            None => true,
            Some(d) => degrees.all(|x| x == d),
        }
    }

    /// Harmonicity check on coefficients: the Laplacian cancels exactly up
    /// to rounding in the coefficient arithmetic.
    pub fn is_harmonic(&self) -> bool {
        let lap = self.laplacian();
        let scale = self
            .terms
            .values()
            .map(|c| c.abs())
            .fold(0.0f64, f64::max)
            .max(1.0);
        lap.terms.values().all(|c| c.abs() <= 1e-12 * scale)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_vars);
        let mut acc = 0.0;
        for (exp, coef) in &self.terms {
            let mut term = *coef;
            for (xi, &e) in x.iter().zip(exp) {
                term *= xi.powi(e as i32);
            }
            acc += term;
        }
        acc
    }

    pub fn partial(&self, var: usize) -> Polynomial {
        let mut terms = Vec::new();
        for (exp, coef) in &self.terms {
            if exp[var] == 0 {
                continue;
            }
            let mut e = exp.clone();
            e[var] -= 1;
            terms.push((e, coef * exp[var] as f64));
        }
        Polynomial::new(self.n_vars, terms).unwrap()
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n_vars).map(|i| self.partial(i)).collect()
    }

    pub fn laplacian(&self) -> Polynomial {
        let mut acc = Polynomial::new(self.n_vars, []).unwrap();
        for i in 0..self.n_vars {
            acc = acc.add(&self.partial(i).partial(i));
        }
        acc
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.n_vars, other.n_vars);
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            *terms.entry(e.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Polynomial {
            n_vars: self.n_vars,
            terms,
        }
    }

    pub fn grad_norm(&self, x: &[f64]) -> f64 {
        self.gradient()
            .iter()
            .map(|p| {
                let v = p.eval(x);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// JSON format: `{"n": 3, "terms": {"2,0,0": 1.0, "0,1,1": -2.0}}`.
    pub fn from_json(text: &str) -> Result<Polynomial> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = doc["n"]
            .as_u64()
            .ok_or_else(|| Error::Parse("polynomial JSON needs an integer \"n\"".into()))?
            as usize;
        let map = doc["terms"]
            .as_object()
            .ok_or_else(|| Error::Parse("polynomial JSON needs a \"terms\" object".into()))?;
        let mut terms = Vec::new();
        for (key, value) in map {
            let exp: Vec<u32> = key
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map_err(|e| Error::Parse(format!("bad exponent {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let coef = value
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("coefficient of {key} is not a number")))?;
            terms.push((exp, coef));
        }
        Polynomial::new(n, terms)
    }

    pub fn to_json(&self) -> String {
        let terms: BTreeMap<String, f64> = self
            .terms
            .iter()
            .map(|(e, c)| {
                (
                    e.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                    *c,
                )
            })
            .collect();
        serde_json::json!({ "n": self.n_vars, "terms": terms }).to_string()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn re_z_pow_values() {
        // Re(z^2) = x^2 - y^2, Re(z^3) = x^3 - 3 x y^2
        let p2 = Polynomial::re_z_pow(2);
        assert_relative_eq!(p2.eval(&[1.5, 0.5]), 1.5f64.powi(2) - 0.25);
        let p3 = Polynomial::re_z_pow(3);
        assert_relative_eq!(p3.eval(&[0.7, -0.3]), 0.7f64.powi(3) - 3.0 * 0.7 * 0.09);
    }

    #[test]
    fn harmonicity_and_homogeneity() {
        for m in 1..=5 {
            let p = Polynomial::re_z_pow(m);
            assert!(p.is_harmonic(), "Re z^{m} is harmonic");
            assert!(p.is_homogeneous());
            assert_eq!(p.degree(), m);
        }
        let q = Polynomial::new(2, [(vec![2, 0], 1.0)]).unwrap(); // x^2
        assert!(!q.is_harmonic());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = Polynomial::new(3, [(vec![2, 1, 0], 1.5), (vec![0, 0, 3], -2.0)]).unwrap();
        let x = [0.4, -0.7, 0.9];
        let g = p.gradient();
        for i in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
            assert_relative_eq!(g[i].eval(&x), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = Polynomial::new(3, [(vec![1, 0, 0], 1.0), (vec![0, 2, 1], -0.5)]).unwrap();
        let q = Polynomial::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn bad_json_rejected() {
        assert!(Polynomial::from_json("{\"terms\": {}}").is_err());
        assert!(Polynomial::from_json("{\"n\": 2, \"terms\": {\"1\": 1.0}}").is_err());
    }
}
