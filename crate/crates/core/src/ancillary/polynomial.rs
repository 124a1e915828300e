use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::MpComplex;

/// All multi-indices ν ∈ N^dim with |ν| = degree, in lexicographic order
/// (first coordinate descending).
pub fn multi_indices(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    if dim == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    if dim == 1 {
        return vec![vec![degree]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in multi_indices(dim - 1, degree - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Multi-indices with |ν| ≤ max_degree, grouped by degree.
pub fn multi_indices_upto(dim: usize, max_degree: u32) -> Vec<Vec<u32>> {
    (0..=max_degree).flat_map(|k| multi_indices(dim, k)).collect()
}

/// Polynomial `Σ c_ν z^ν` on C^dim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(Vec<u32>, Complex64)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(Vec<u32>, Complex64)>) -> Self {
        assert!(terms.iter().all(|(nu, _)| nu.len() == dim));
        Polynomial { dim, terms }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Polynomial::new(dim, vec![(vec![0; dim], c)])
    }

    pub fn monomial(nu: Vec<u32>, c: Complex64) -> Self {
        Polynomial::new(nu.len(), vec![(nu, c)])
    }

    /// Dense polynomial of total degree ≤ `degree` with independent
    /// standard complex Gaussian coefficients.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, degree: u32) -> Self {
        let terms = multi_indices_upto(dim, degree)
            .into_iter()
            .map(|nu| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                (nu, Complex64::new(re, im))
            })
            .collect();
        Polynomial { dim, terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(nu, _)| nu.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Sum of the coefficients of ν.
    pub fn coefficient(&self, nu: &[u32]) -> Complex64 {
        self.terms
            .iter()
            .filter(|(m, _)| m.as_slice() == nu)
            .map(|(_, c)| *c)
            .sum()
    }

    /// `u(0)`.
    pub fn constant_term(&self) -> Complex64 {
        self.coefficient(&vec![0; self.dim])
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(nu, c)| {
                nu.iter()
                    .zip(z)
                    .fold(*c, |acc, (&k, zi)| acc * zi.powu(k))
            })
            .sum()
    }

    pub fn eval_mp(&self, z: &[MpComplex]) -> MpComplex {
        let prec = z.iter().map(|c| c.prec()).max().unwrap_or(64);
        let mut acc = MpComplex::zero(prec);
        for (nu, c) in &self.terms {
            let mut term = MpComplex::from_c64(prec, *c);
            for (&k, zi) in nu.iter().zip(z) {
                if k > 0 {
                    term = term.mul(&zi.powu(k));
                }
            }
            acc.add_assign(&term);
        }
        acc
    }
}
