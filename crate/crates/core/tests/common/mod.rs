#![allow(dead_code)]

use cqcap::linalg::{self, CMatrix, CVector};
use cqcap::{DecisionRule, DensityMatrix, PureState};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let rank = rng.random_range(1..=dim);
    let g = ginibre(rng, dim, rank);
    let mut rho = &g * g.adjoint();
    let tr = linalg::trace(&rho).re;
    rho /= Complex64::new(tr, 0.0);
    DensityMatrix::new(rho).unwrap()
}

pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> PureState {
    let v: CVector = ginibre(rng, dim, 1).column(0).into_owned();
    PureState::normalized(v).unwrap()
}

pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    ginibre(rng, dim, dim).qr().q()
}

pub fn random_probs<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

/// Random complete POVM with `k` elements: `X_j = T^{-1/2} A_j T^{-1/2}`.
pub fn random_povm<R: Rng>(rng: &mut R, dim: usize, k: usize) -> DecisionRule {
    let parts: Vec<CMatrix> = (0..k)
        .map(|_| {
            let rank = rng.random_range(1..=dim);
            let g = ginibre(rng, dim, rank);
            &g * g.adjoint()
        })
        .collect();
    let total = parts.iter().fold(CMatrix::zeros(dim, dim), |acc, a| acc + a);
    let w = linalg::pinv_sqrt(&total, 1e-14);
    let elements = parts
        .iter()
        .map(|a| {
            let x = &w * a * &w;
            (&x + x.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    DecisionRule::new(elements).unwrap()
}
