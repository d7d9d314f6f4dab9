//! Parameter domains and training/prediction designs.

use rand::seq::SliceRandom;

use super::ExperimentError;
use crate::model::Model;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

/// Box of varied parameters plus fixed overrides of model defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDomain {
    varied: Vec<ParamRange>,
    fixed: Vec<(String, f64)>,
}

impl ParameterDomain {
    pub fn new(varied: Vec<ParamRange>, fixed: Vec<(String, f64)>) -> Result<Self, ExperimentError> {
        if varied.is_empty() {
            return Err(ExperimentError::Domain("at least one parameter must be varied".into()));
        }
        for (i, r) in varied.iter().enumerate() {
            if !(r.low.is_finite() && r.high.is_finite() && r.low < r.high) {
                return Err(ExperimentError::Domain(format!(
                    "range of `{}` must satisfy low < high, got [{}, {}]",
                    r.name, r.low, r.high
                )));
            }
            if varied[..i].iter().any(|o| o.name == r.name) {
                return Err(ExperimentError::Domain(format!("`{}` is varied twice", r.name)));
            }
        }
        for (name, value) in &fixed {
            if varied.iter().any(|r| &r.name == name) {
                return Err(ExperimentError::Domain(format!("`{name}` is both varied and fixed")));
            }
            if !value.is_finite() {
                return Err(ExperimentError::Domain(format!(
                    "fixed value of `{name}` is not finite"
                )));
            }
        }
        Ok(ParameterDomain { varied, fixed })
    }

    /// Single varied parameter, no fixed overrides.
    pub fn single(name: &str, low: f64, high: f64) -> Result<Self, ExperimentError> {
        ParameterDomain::new(
            vec![ParamRange {
                name: name.to_string(),
                low,
                high,
            }],
            Vec::new(),
        )
    }

    pub fn varied(&self) -> &[ParamRange] {
        &self.varied
    }

    pub fn fixed(&self) -> &[(String, f64)] {
        &self.fixed
    }

    pub fn dim(&self) -> usize {
        self.varied.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.varied.iter().map(|r| r.name.clone()).collect()
    }

    /// Checks that every named parameter is declared by the model.
    pub fn check_against(&self, model: &Model) -> Result<(), ExperimentError> {
        let names = self
            .varied
            .iter()
            .map(|r| &r.name)
            .chain(self.fixed.iter().map(|(n, _)| n));
        for name in names {
            if model.param_index(name).is_none() {
                return Err(ExperimentError::Domain(format!("model declares no parameter `{name}`")));
            }
        }
        Ok(())
    }

    /// Full model parameter vector at a domain point: declared defaults,
    /// then fixed overrides, then the point's coordinates.
    pub fn full_params(&self, model: &Model, point: &[f64]) -> Vec<f64> {
        let mut p = model.default_params();
        for (name, v) in &self.fixed {
            if let Some(i) = model.param_index(name) {
                p[i] = *v;
            }
        }
        for (r, &x) in self.varied.iter().zip(point) {
            if let Some(i) = model.param_index(&r.name) {
                p[i] = x;
            }
        }
        p
    }

    /// Affine map of a point onto the unit box.
    pub fn to_unit(&self, point: &[f64]) -> Vec<f64> {
        self.varied
            .iter()
            .zip(point)
            .map(|(r, &x)| (x - r.low) / (r.high - r.low))
            .collect()
    }
}

fn linspace(low: f64, high: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                high
            } else {
                low + (high - low) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Cartesian grid with `counts[d]` evenly spaced values per dimension,
/// endpoints included, first parameter varying slowest.
pub fn regular_grid(domain: &ParameterDomain, counts: &[usize]) -> Result<Vec<Vec<f64>>, ExperimentError> {
    if counts.len() != domain.dim() {
        return Err(ExperimentError::Domain(format!(
            "{} grid counts for {} varied parameters",
            counts.len(),
            domain.dim()
        )));
    }
    if let Some(c) = counts.iter().find(|&&c| c < 2) {
        return Err(ExperimentError::Domain(format!(
            "grid needs at least 2 points per dimension, got {c}"
        )));
    }
    let axes: Vec<Vec<f64>> = domain
        .varied
        .iter()
        .zip(counts)
        .map(|(r, &c)| linspace(r.low, r.high, c))
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    Ok(points)
}

/// `n` points, one per stratum of width `1/n` along every dimension, each
/// placed at its stratum midpoint; strata are paired by seeded permutations.
pub fn latin_hypercube(domain: &ParameterDomain, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 0);
    let columns: Vec<Vec<f64>> = domain
        .varied
        .iter()
        .map(|r| {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut rng);
            strata
                .into_iter()
                .map(|k| r.low + (r.high - r.low) * (k as f64 + 0.5) / n as f64)
                .collect()
        })
        .collect();
    (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}
