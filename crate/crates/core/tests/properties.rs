mod common;

use cqcap::decode::{self, Codebook};
use cqcap::gaussian::{self, ModeSpec, NoiseSpectrum};
use cqcap::info::{self, ChannelCq};
use cqcap::linalg::{self, CMatrix};
use cqcap::qstate::{self, DensityMatrix, Ensemble};
use cqcap::reliability::{self, ExponentOptions};
use cqcap::{io, ExperimentConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn partial_traces(rho: &CMatrix, da: usize, db: usize) -> (CMatrix, CMatrix) {
    let a = CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| rho[(i * db + k, j * db + k)]).sum());
    let b = CMatrix::from_fn(db, db, |i, j| (0..da).map(|k| rho[(k * db + i, k * db + j)]).sum());
    (a, b)
}

fn random_channel(r: &mut ChaCha8Rng, letters: usize, dim: usize, pure: bool) -> ChannelCq {
    if pure {
        ChannelCq::from_pure((0..letters).map(|_| common::random_pure(r, dim)).collect(), None).unwrap()
    } else {
        ChannelCq::new((0..letters).map(|_| common::random_density(r, dim)).collect(), None).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_is_additive_under_tensor(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut r = rng(seed);
        let (a, b) = (common::random_density(&mut r, da), common::random_density(&mut r, db));
        let ab = qstate::tensor(&a, &b).unwrap();
        prop_assert!((qstate::entropy(&ab) - qstate::entropy(&a) - qstate::entropy(&b)).abs() < 1e-10);
    }

    #[test]
    fn entropy_lies_between_zero_and_log_dim(seed in any::<u64>(), d in 1usize..6) {
        let s = common::random_density(&mut rng(seed), d);
        let h = qstate::entropy(&s);
        prop_assert!(h >= 0.0 && h <= (d as f64).ln() + 1e-12);
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let (s, t) = (common::random_density(&mut r, d), common::random_density(&mut r, d));
        prop_assert!(qstate::relative_entropy(&s, &t).unwrap() >= -1e-12);
        prop_assert!(qstate::relative_entropy(&s, &s).unwrap().abs() < 1e-9);
    }

    #[test]
    fn entropy_is_subadditive(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let rho = common::random_density(&mut rng(seed), da * db);
        let (a, b) = partial_traces(rho.matrix(), da, db);
        let (a, b) = (DensityMatrix::new(a).unwrap(), DensityMatrix::new(b).unwrap());
        prop_assert!(qstate::entropy(&rho) <= qstate::entropy(&a) + qstate::entropy(&b) + 1e-10);
    }

    #[test]
    fn holevo_quantity_is_bounded_by_average_entropy(seed in any::<u64>(), k in 1usize..5, d in 1usize..5) {
        let mut r = rng(seed);
        let probs = common::random_probs(&mut r, k);
        let states: Vec<DensityMatrix> = (0..k).map(|_| common::random_density(&mut r, d)).collect();
        let ens = Ensemble::from_parts(&probs, &states).unwrap();
        let chi = info::holevo_chi(&ens);
        prop_assert!(chi >= -1e-12);
        prop_assert!(chi <= qstate::entropy(&qstate::average_state(&ens)) + 1e-12);
    }

    #[test]
    fn accessible_information_is_below_holevo(seed in any::<u64>(), k in 1usize..5, d in 1usize..5, outcomes in 1usize..6) {
        let mut r = rng(seed);
        let probs = common::random_probs(&mut r, k);
        let states: Vec<DensityMatrix> = (0..k).map(|_| common::random_density(&mut r, d)).collect();
        let ens = Ensemble::from_parts(&probs, &states).unwrap();
        let rule = common::random_povm(&mut r, d, outcomes);
        let i = info::accessible_info(&ens, &rule).unwrap();
        prop_assert!(i >= -1e-12 && i <= info::holevo_chi(&ens) + 1e-9);
    }

    #[test]
    fn optimal_chi_dominates_random_priors(seed in any::<u64>(), k in 2usize..5, d in 2usize..4, pure in any::<bool>()) {
        let mut r = rng(seed);
        let ch = random_channel(&mut r, k, d, pure);
        let best = info::optimize_chi(&ch, None).unwrap();
        for _ in 0..5 {
            let pi = common::random_probs(&mut r, k);
            prop_assert!(info::holevo_chi(&ch.ensemble(&pi).unwrap()) <= best.value + 1e-7);
        }
        prop_assert!(best.value <= (d as f64).ln() + 1e-12);
    }

    #[test]
    fn capacity_grows_with_budget(seed in any::<u64>(), k in 2usize..5) {
        let mut r = rng(seed);
        let cost: Vec<f64> = (0..k).map(|i| if i == 0 { 0.0 } else { r.random_range(0.1..2.0) }).collect();
        let ch = random_channel(&mut r, k, 2, false).with_cost(cost).unwrap();
        let mut last = 0.0;
        for budget in [0.05, 0.2, 0.5, 1.0, 3.0] {
            let c = info::optimize_chi(&ch, Some(budget)).unwrap().value;
            prop_assert!(c >= last - 1e-7);
            last = c;
        }
        prop_assert!(last <= info::optimize_chi(&ch, None).unwrap().value + 1e-7);
    }

    #[test]
    fn srm_is_a_povm_and_obeys_its_bounds(seed in any::<u64>(), d in 1usize..4, n in 1usize..3, m in 1usize..6) {
        let mut r = rng(seed);
        let ch = random_channel(&mut r, 3, d, true);
        let words = (0..m).map(|_| (0..n).map(|_| r.random_range(0..3)).collect()).collect();
        let cb = Codebook::new(&ch, words).unwrap();
        let rule = decode::srm(&cb).unwrap();
        let err = decode::average_error(&cb, &rule).unwrap();
        let b = decode::srm_bounds(&cb).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&err));
        prop_assert!(err <= b.tight + 1e-10 && err <= b.coarse + 1e-10);
    }

    #[test]
    fn random_coding_bound_holds_exactly(seed in any::<u64>(), m in 2usize..4) {
        let mut r = rng(seed);
        let ch = random_channel(&mut r, 2, 2, true);
        let pi = common::random_probs(&mut r, 2);
        let exact = decode::exhaustive_expected_error(&ch, &pi, 1, m).unwrap();
        let (_, bound) = decode::random_coding_bound(&ch.average(&pi), 1, m);
        prop_assert!(exact <= bound + 1e-10);
    }

    #[test]
    fn mu_is_concave_with_chi_slope_at_zero(seed in any::<u64>(), k in 2usize..4, d in 2usize..4) {
        let mut r = rng(seed);
        let ch = random_channel(&mut r, k, d, true);
        let pi = common::random_probs(&mut r, k);
        prop_assert!(reliability::mu(&ch, &pi, 0.0).unwrap().abs() < 1e-12);
        let chi = info::holevo_chi(&ch.ensemble(&pi).unwrap());
        prop_assert!((reliability::mu_prime(&ch, &pi, 0.0).unwrap() - chi).abs() < 1e-9);
        let grid: Vec<f64> = (0..=20).map(|i| reliability::mu(&ch, &pi, i as f64 / 20.0).unwrap()).collect();
        for w in grid.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] <= 1e-12);
        }
    }

    #[test]
    fn exponent_curve_is_nonincreasing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ch = random_channel(&mut r, 2, 2, true);
        let c = info::optimize_chi(&ch, None).unwrap().value;
        prop_assume!(c > 1e-3);
        let rates: Vec<f64> = (1..10).map(|i| c * i as f64 / 10.0).collect();
        let curve = reliability::exponents(&ch, &rates, None, &ExponentOptions::default()).unwrap();
        for w in curve.e.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-8);
        }
        prop_assert!(curve.e.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn g_is_increasing_and_concave(x in 0.0f64..50.0, y in 0.0f64..50.0) {
        let (gx, gy, gm) = (gaussian::g(x).unwrap(), gaussian::g(y).unwrap(), gaussian::g(0.5 * (x + y)).unwrap());
        prop_assert!(gx + gy <= 2.0 * gm + 1e-12);
        if x < y {
            prop_assert!(gx <= gy);
        }
    }

    #[test]
    fn water_filling_satisfies_kkt(seed in any::<u64>(), k in 1usize..6, e in 0.01f64..10.0) {
        let mut r = rng(seed);
        let modes: Vec<ModeSpec> = (0..k).map(|_| ModeSpec { omega: r.random_range(0.2..4.0), n: r.random_range(0.0..3.0) }).collect();
        let res = gaussian::multimode_capacity(&modes, e, 1.0).unwrap();
        prop_assert!(res.budget_residual.abs() <= 1e-8 * e);
        for (m, a) in modes.iter().zip(&res.allocations) {
            let level = gaussian::planck(res.theta, 1.0, m.omega);
            if *a > 0.0 {
                prop_assert!((m.n + a - level).abs() <= 1e-8 * level.max(1.0));
            } else {
                prop_assert!(m.n >= level - 1e-12);
            }
        }
        // any other feasible split does no better
        for _ in 0..5 {
            let w = common::random_probs(&mut r, k);
            let c: f64 = modes.iter().zip(&w).map(|(m, w)| gaussian::single_mode_capacity(m.n, w * e / m.omega).unwrap()).sum();
            prop_assert!(c <= res.capacity + 1e-9);
        }
    }

    #[test]
    fn channel_json_round_trips(seed in any::<u64>(), k in 1usize..4, d in 1usize..4, pure in any::<bool>()) {
        let ch = random_channel(&mut rng(seed), k, d, pure);
        let back = io::read_channel(&io::write_channel(&ch)).unwrap();
        prop_assert_eq!(back.alphabet_size(), k);
        for (a, b) in ch.states().iter().zip(back.states()) {
            prop_assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn experiment_is_reproducible(seed in any::<u64>()) {
        let ch = ChannelCq::binary(0.4).unwrap();
        let cfg = ExperimentConfig { n: 2, m: 3, trials: 50, seed, ..Default::default() };
        let a = decode::random_coding_experiment(&ch, &[0.5, 0.5], &cfg).unwrap();
        let b = decode::random_coding_experiment(&ch, &[0.5, 0.5], &cfg).unwrap();
        prop_assert_eq!(a.errors, b.errors);
    }

    #[test]
    fn waveform_capacity_is_monotone(n0 in 0.0f64..2.0, e in 0.05f64..2.0) {
        let noise = NoiseSpectrum::Flat(n0);
        let small = gaussian::waveform_capacity(&noise, (1.0, 3.0), e, 1.0).unwrap().capacity;
        let more_energy = gaussian::waveform_capacity(&noise, (1.0, 3.0), 1.5 * e, 1.0).unwrap().capacity;
        let wider = gaussian::waveform_capacity(&noise, (0.5, 3.0), e, 1.0).unwrap().capacity;
        prop_assert!(more_energy >= small - 1e-9);
        prop_assert!(wider >= small - 1e-9);
    }
}

#[test]
fn pure_gaussian_mu_matches_discretized_coherent_ensemble() {
    // coherent states on a square grid with Gaussian weights of variance E
    let (e, s) = (0.5_f64, 0.7);
    let (h, radius, fock) = (0.12_f64, 4.0_f64, 40);
    let mut vectors = Vec::new();
    let mut weights = Vec::new();
    let k = (radius / h).ceil() as i32;
    for i in -k..=k {
        for j in -k..=k {
            let z = Complex64::new(i as f64 * h, j as f64 * h);
            if z.norm() > radius {
                continue;
            }
            vectors.push(gaussian::coherent_state(z, fock).unwrap().0);
            weights.push((-z.norm_sqr() / e).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let ch = ChannelCq::from_pure(vectors, None).unwrap();
    let discrete = reliability::mu(&ch, &pi, s).unwrap();
    let closed = gaussian::gaussian_mu(e, s, 0.0).unwrap();
    assert!((discrete - closed).abs() < 1e-4, "{discrete} vs {closed}");
}

#[test]
fn photon_ensemble_is_a_valid_quasiclassical_channel() {
    let ens = gaussian::photon_channel_ensemble(0.5, 1.0, 1e-10).unwrap();
    let avg = qstate::average_state(&ens);
    let thermal = gaussian::thermal_state(1.5, avg.dim()).unwrap();
    let diff = linalg::max_abs_diff(avg.matrix(), thermal.state.matrix());
    assert!(diff < 1e-8, "average state differs from thermal(N + E) by {diff}");
}

#[test]
fn coherent_gram_matches_overlap_law() {
    let points = [Complex64::new(0.0, 0.0), Complex64::new(0.7, -0.3), Complex64::new(-1.1, 0.4), Complex64::new(0.2, 1.2)];
    let vectors = points.iter().map(|&z| gaussian::coherent_state(z, 60).unwrap().0).collect();
    let ch = ChannelCq::from_pure(vectors, None).unwrap();
    let words = (0..points.len()).map(|i| vec![i]).collect();
    let cb = Codebook::new(&ch, words).unwrap();
    let g = decode::gram(&cb).unwrap();
    for (i, z) in points.iter().enumerate() {
        for (j, w) in points.iter().enumerate() {
            assert!((g.entries[(i, j)].norm_sqr() - gaussian::coherent_overlap(*z, *w)).abs() < 1e-12);
        }
    }
}

#[test]
fn water_filling_equalizes_marginal_gain() {
    let modes = [
        ModeSpec { omega: 0.7, n: 0.2 },
        ModeSpec { omega: 1.3, n: 0.05 },
        ModeSpec { omega: 2.1, n: 0.6 },
    ];
    let r = gaussian::multimode_capacity(&modes, 2.0, 1.0).unwrap();
    let gains: Vec<f64> = modes
        .iter()
        .zip(&r.allocations)
        .filter(|(_, a)| **a > 0.0)
        .map(|(m, a)| gaussian::g_prime(m.n + a).unwrap() / m.omega)
        .collect();
    assert!(gains.len() >= 2);
    for g in &gains {
        assert!((g - gains[0]).abs() < 1e-6);
        assert!((g - r.theta).abs() < 1e-6);
    }
}

#[test]
fn gaussian_exponent_approaches_twice_energy_at_zero_rate() {
    let e = 0.8;
    let r = gaussian::gaussian_reliability(e, &[1e-10]).unwrap();
    assert!((r.curve.e[0] - 2.0 * e).abs() < 1e-4);
    assert_eq!(gaussian::q_of(0.0).ln(), 0.0);
}
