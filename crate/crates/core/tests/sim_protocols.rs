//! Generator and censoring-protocol checks: empirical covariance of the
//! prior sampler, overlap-scenario structure, and the three censoring
//! operations.

mod common;

use hmocgp_core::dataset::CensoredDataset;
use hmocgp_core::kernels::{lmc_covariance, Kernel, LmcSpec};
use hmocgp_core::likelihood::LikelihoodSpec;
use hmocgp_core::linalg::Mat;
use hmocgp_core::math;
use hmocgp_core::rng::Xoshiro256;
use hmocgp_core::sim::{
    apply_intensity_censoring, apply_supply_proxy_censoring,
    sample_mogp_prior, simulate, supply_proxy_censor, OverlapScenario, SyntheticSpec,
};

fn base_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        d_outputs: 2,
        n_points: 100,
        input_lo: 0.0,
        input_hi: 10.0,
        lmc_mean: LmcSpec {
            kernels: vec![Kernel::rbf(2.0, 1.2), Kernel::rbf(0.5, 2.5)],
            weights: vec![
                Mat::from_rows(&[&[1.0], &[0.85]]),
                Mat::from_rows(&[&[0.5], &[-0.55]]),
            ],
        },
        lmc_noise: Some(LmcSpec {
            kernels: vec![Kernel::rbf(0.4, 2.0)],
            weights: vec![Mat::from_rows(&[&[0.7], &[0.6]])],
        }),
        heteroscedastic: true,
        noise_std: 0.3,
        dispersion: 0.5,
        likelihood: LikelihoodSpec::gaussian(false),
        mean_shift: 0.0,
        noise_shift: 0.0,
        censor_regions: vec![],
        overlap_scenario: Some(OverlapScenario::None),
        seed,
    }
}

fn censored_indices(ds: &CensoredDataset, output: usize) -> Vec<usize> {
    (0..ds.n_points()).filter(|&i| ds.is_censored(i, output)).collect()
}

#[test]
fn degenerate_prior_produces_zero_outputs() {
    let mut spec = base_spec(1);
    spec.heteroscedastic = false;
    spec.lmc_noise = None;
    spec.noise_std = 0.0;
    spec.overlap_scenario = None;
    spec.n_points = 30;
    // signal variance pushed to zero
    spec.lmc_mean = LmcSpec {
        kernels: vec![Kernel::Rbf(hmocgp_core::kernels::RbfKernelParams {
            log_variance: -80.0,
            log_lengthscale: 0.0,
        })],
        weights: vec![Mat::from_rows(&[&[1.0], &[1.0]])],
    };
    let mut rng = Xoshiro256::seed_from(4);
    let ds = sample_mogp_prior(&spec, &mut rng).unwrap();
    for i in 0..ds.n_points() {
        for d in 0..2 {
            assert!(ds.y[(i, d)].abs() < 1e-6, "y[{i},{d}] = {}", ds.y[(i, d)]);
        }
    }
}

#[test]
fn rank_one_unit_weights_duplicate_outputs_exactly() {
    let mut spec = base_spec(2);
    spec.heteroscedastic = false;
    spec.lmc_noise = None;
    spec.noise_std = 0.0;
    spec.overlap_scenario = None;
    spec.n_points = 25;
    spec.lmc_mean = LmcSpec {
        kernels: vec![Kernel::rbf(1.0, 1.5)],
        weights: vec![Mat::from_rows(&[&[1.0], &[1.0]])],
    };
    let mut rng = Xoshiro256::seed_from(9);
    let ds = sample_mogp_prior(&spec, &mut rng).unwrap();
    for i in 0..ds.n_points() {
        assert_eq!(ds.y[(i, 0)], ds.y[(i, 1)], "outputs must be identical at {i}");
    }
}

#[test]
fn empirical_covariance_matches_the_assembled_prior() {
    // noise-free draws of the latent stack at 5 fixed inputs; kernel scale
    // kept below one so the absolute CLT bound is comfortably wide
    let mut spec = base_spec(3);
    spec.heteroscedastic = false;
    spec.lmc_noise = None;
    spec.noise_std = 0.0;
    spec.overlap_scenario = None;
    spec.n_points = 5;
    spec.input_hi = 4.0;
    spec.lmc_mean = LmcSpec {
        kernels: vec![Kernel::rbf(0.5, 1.2), Kernel::rbf(0.25, 2.5)],
        weights: vec![
            Mat::from_rows(&[&[0.8], &[0.7]]),
            Mat::from_rows(&[&[0.4], &[-0.45]]),
        ],
    };
    let x = spec.inputs();
    let k = lmc_covariance(&x, &spec.lmc_mean, 2).unwrap();
    let m = 10;
    let reps = 10_000;
    let mut rng = Xoshiro256::seed_from(31);
    let mut acc = vec![0.0; m * m];
    for _ in 0..reps {
        let ds = sample_mogp_prior(&spec, &mut rng).unwrap();
        // stack output-major to match the covariance layout
        let mut z = vec![0.0; m];
        for d in 0..2 {
            for i in 0..5 {
                z[d * 5 + i] = ds.y[(i, d)];
            }
        }
        for a in 0..m {
            for b in 0..m {
                acc[a * m + b] += z[a] * z[b];
            }
        }
    }
    let bound = 5.0 / (reps as f64).sqrt();
    for a in 0..m {
        for b in 0..m {
            let emp = acc[a * m + b] / reps as f64;
            let diff = (emp - k.mat[(a, b)]).abs();
            assert!(diff < bound, "entry ({a},{b}): empirical {emp} vs {}", k.mat[(a, b)]);
        }
    }
}

#[test]
fn section_4_3_setup_censors_only_the_first_output_inside_the_interval() {
    let ds = simulate(&base_spec(7)).unwrap();
    assert_eq!(ds.n_points(), 100);
    assert_eq!(ds.n_outputs(), 2);
    let c0 = censored_indices(&ds, 0);
    let c1 = censored_indices(&ds, 1);
    assert!(!c0.is_empty());
    assert!(c1.is_empty(), "second output must be untouched");
    for i in 0..ds.n_points() {
        let x = ds.x[(i, 0)];
        let inside = (1.3..=5.5).contains(&x);
        assert_eq!(ds.is_censored(i, 0), inside, "x = {x}");
    }
    // censoring preserved the truth and the ordering y ≤ ỹ
    let t = ds.true_y.as_ref().unwrap();
    for i in 0..ds.n_points() {
        for d in 0..2 {
            assert!(ds.y[(i, d)] <= t[(i, d)] + 1e-12);
            if ds.is_censored(i, d) {
                assert_eq!(ds.y[(i, d)], ds.threshold(i, d).unwrap());
            }
        }
    }
}

#[test]
fn overlap_scenarios_share_the_documented_index_fractions() {
    let scenarios: [(OverlapScenario, fn(&[usize], &[usize])); 4] = [
        (OverlapScenario::Overlap0, |c0, c1| {
            assert!(!c0.is_empty() && !c1.is_empty());
            assert!(c0.iter().all(|i| !c1.contains(i)), "index sets must be disjoint");
        }),
        (OverlapScenario::Overlap50, |c0, c1| {
            let shared = c0.iter().filter(|i| c1.contains(i)).count();
            let half = c0.len() / 2;
            assert!(
                (shared as i64 - half as i64).abs() <= 1,
                "shared {shared} vs half of {}",
                c0.len()
            );
        }),
        (OverlapScenario::Overlap100Mild, |c0, c1| {
            assert_eq!(c0, c1);
            assert!(!c0.is_empty());
        }),
        (OverlapScenario::Overlap100Hard, |c0, c1| {
            assert_eq!(c0, c1);
            // contiguous indices
            for w in c0.windows(2) {
                assert_eq!(w[1], w[0] + 1, "hard scenario must be contiguous");
            }
        }),
    ];
    for (scenario, check) in scenarios {
        let mut spec = base_spec(11);
        spec.overlap_scenario = Some(scenario);
        let ds = simulate(&spec).unwrap();
        let c0 = censored_indices(&ds, 0);
        let c1 = censored_indices(&ds, 1);
        check(&c0, &c1);
    }
}

#[test]
fn mild_scenario_is_discontinuous() {
    let mut spec = base_spec(13);
    spec.overlap_scenario = Some(OverlapScenario::Overlap100Mild);
    let ds = simulate(&spec).unwrap();
    let c0 = censored_indices(&ds, 0);
    let gaps = c0.windows(2).filter(|w| w[1] != w[0] + 1).count();
    assert_eq!(gaps, 1, "two sub-intervals expected");
}

#[test]
fn empty_region_list_leaves_data_untouched() {
    let mut spec = base_spec(17);
    spec.overlap_scenario = None;
    spec.censor_regions = vec![vec![], vec![]];
    let ds = simulate(&spec).unwrap();
    assert!(ds.censored.iter().all(|&c| !c));
    let t = ds.true_y.as_ref().unwrap();
    for i in 0..ds.n_points() {
        for d in 0..2 {
            assert_eq!(ds.y[(i, d)], t[(i, d)]);
        }
    }
}

#[test]
fn full_region_censors_every_point_below_the_truth() {
    let mut spec = base_spec(19);
    spec.overlap_scenario = None;
    spec.censor_regions = vec![vec![(0.0, 10.0)], vec![]];
    let ds = simulate(&spec).unwrap();
    let t = ds.true_y.as_ref().unwrap();
    for i in 0..ds.n_points() {
        assert!(ds.is_censored(i, 0));
        assert!(ds.y[(i, 0)] <= t[(i, 0)]);
        if t[(i, 0)] > 0.0 {
            assert!(ds.y[(i, 0)] < t[(i, 0)], "positive truth must be strictly censored");
        }
    }
}

#[test]
fn interval_censoring_thresholds_stay_below_negative_paths_too() {
    // the running-minimum rule must respect y ≤ ỹ even when paths go negative
    let mut spec = base_spec(23);
    spec.overlap_scenario = None;
    spec.censor_regions = vec![vec![(0.0, 10.0)], vec![(2.0, 8.0)]];
    spec.mean_shift = -3.0; // force mostly negative values
    let ds = simulate(&spec).unwrap();
    ds.validate().unwrap();
    let t = ds.true_y.as_ref().unwrap();
    for i in 0..ds.n_points() {
        for d in 0..2 {
            assert!(ds.y[(i, d)] <= t[(i, d)] + 1e-12, "point {i}, output {d}");
        }
    }
}

#[test]
fn intensity_censoring_formula_and_bounds() {
    let x = Mat::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
    let y = Mat::from_vec(4, 1, vec![10.0, 4.0, 7.0, 2.0]);
    let mut ds = CensoredDataset::uncensored(x, y.clone());
    ds.true_y = Some(y);
    let flags = [true, false, true, false];

    let mut at = ds.clone();
    apply_intensity_censoring(&mut at, &flags, 0.5).unwrap();
    assert_eq!(at.y[(0, 0)], 5.0);
    assert_eq!(at.y[(2, 0)], 3.5);
    assert_eq!(at.y[(1, 0)], 4.0);
    assert!(at.is_censored(0, 0) && !at.is_censored(1, 0));

    let mut extreme = ds.clone();
    apply_intensity_censoring(&mut extreme, &flags, 0.8).unwrap();
    assert!((extreme.y[(0, 0)] - 2.0).abs() < 1e-12);

    // boundary: c = 0 keeps values but still flags
    let mut zero = ds.clone();
    apply_intensity_censoring(&mut zero, &flags, 0.0).unwrap();
    assert_eq!(zero.y[(0, 0)], 10.0);
    assert!(zero.is_censored(0, 0));
    assert_eq!(zero.threshold(0, 0), Some(10.0));

    // out-of-range intensity rejected
    assert!(apply_intensity_censoring(&mut ds.clone(), &flags, 1.0).is_err());
    assert!(apply_intensity_censoring(&mut ds.clone(), &flags, -0.1).is_err());

    // negative true values rejected
    let xneg = Mat::from_vec(2, 1, vec![0.0, 1.0]);
    let yneg = Mat::from_vec(2, 1, vec![-1.0, 2.0]);
    let mut neg = CensoredDataset::uncensored(xneg, yneg.clone());
    neg.true_y = Some(yneg);
    assert!(apply_intensity_censoring(&mut neg, &[true, false], 0.5).is_err());
}

#[test]
fn supply_proxy_probability_spot_values() {
    // dropoffs − pickups = −5 gives exactly 1/2
    assert!((1.0 - math::sigmoid(0.0) - 0.5).abs() < 1e-15);
    // equal series: 1 − sigmoid(5)
    let p = 1.0 - math::sigmoid(5.0);
    assert!((p - 0.006692850924284856).abs() < 1e-15);
    // pickups exceed dropoffs by 20: 1 − sigmoid(−15)
    let p = 1.0 - math::sigmoid(-15.0);
    assert!((p - 0.9999996940977731).abs() < 1e-12);
}

#[test]
fn supply_proxy_never_censors_the_first_step_and_matches_its_frequency() {
    let n = 100_000;
    // constant gap of −5 puts every step at probability 1/2
    let pickups = vec![10.0; n];
    let dropoffs = vec![5.0; n];
    let mut rng = Xoshiro256::seed_from(77);
    let (flags, values) = supply_proxy_censor(&pickups, &dropoffs, true, &mut rng).unwrap();
    assert!(!flags[0]);
    assert_eq!(values[0], 10.0);
    let hits = flags.iter().filter(|&&f| f).count() as f64;
    let trials = (n - 1) as f64;
    let se = (0.25 / trials).sqrt();
    assert!(
        (hits / trials - 0.5).abs() <= 3.0 * se,
        "frequency {} vs 0.5 ± {se}",
        hits / trials
    );
    // censored draws live in [0, ỹ] and are integers here
    for t in 0..n {
        if flags[t] {
            assert!(values[t] >= 0.0 && values[t] <= pickups[t]);
            assert_eq!(values[t].floor(), values[t]);
        }
    }
}

#[test]
fn supply_proxy_is_reproducible_and_validates_on_datasets() {
    let mut spec = base_spec(29);
    spec.overlap_scenario = None;
    spec.likelihood = LikelihoodSpec::poisson(false);
    spec.heteroscedastic = false;
    spec.lmc_noise = None;
    spec.mean_shift = 2.0;
    spec.n_points = 60;
    let mut rng = Xoshiro256::seed_from(5);
    let base = sample_mogp_prior(&spec, &mut rng).unwrap();

    let dropoffs: Vec<f64> =
        (0..60).map(|i| base.true_y.as_ref().unwrap()[(i, 0)].max(0.0)).collect();

    let run = |seed: u64| {
        let mut ds = base.clone();
        let mut r = Xoshiro256::seed_from(seed);
        apply_supply_proxy_censoring(&mut ds, 0, &dropoffs, true, &mut r).unwrap();
        ds
    };
    let a = run(42);
    let b = run(42);
    assert_eq!(a, b);
    a.validate().unwrap();
    assert!(!a.is_censored(0, 0));
}

#[test]
fn negative_series_are_rejected() {
    let mut rng = Xoshiro256::seed_from(1);
    let err = supply_proxy_censor(&[1.0, -2.0], &[1.0, 1.0], false, &mut rng);
    assert!(err.is_err());
}

#[test]
fn simulation_is_deterministic_in_the_seed() {
    let a = simulate(&base_spec(123)).unwrap();
    let b = simulate(&base_spec(123)).unwrap();
    assert_eq!(a, b);
    let c = simulate(&base_spec(124)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn count_generation_produces_nonnegative_integers() {
    let mut spec = base_spec(31);
    spec.likelihood = LikelihoodSpec::negative_binomial(false);
    spec.heteroscedastic = false;
    spec.lmc_noise = None;
    spec.overlap_scenario = None;
    spec.mean_shift = 1.5;
    spec.n_points = 50;
    let mut rng = Xoshiro256::seed_from(3);
    let ds = sample_mogp_prior(&spec, &mut rng).unwrap();
    for i in 0..ds.n_points() {
        for d in 0..2 {
            let v = ds.y[(i, d)];
            assert!(v >= 0.0 && v.floor() == v, "count value {v}");
        }
    }
}

#[test]
fn generated_covariance_stays_psd_under_the_acceptance_bound() {
    // smaller rehearsal of the PSD acceptance criterion
    let mut rng = Xoshiro256::seed_from(55);
    for _ in 0..100 {
        let n = 2 + (rng.next_u64() % 8) as usize;
        let d = 1 + (rng.next_u64() % 3) as usize;
        let q = 1 + (rng.next_u64() % 2) as usize;
        let x = Mat::from_vec(n, 1, (0..n).map(|_| rng.uniform_in(-4.0, 4.0)).collect());
        let spec = LmcSpec {
            kernels: (0..q)
                .map(|_| Kernel::rbf(rng.uniform_in(0.1, 3.0), rng.uniform_in(0.2, 3.0)))
                .collect(),
            weights: (0..q)
                .map(|_| {
                    let r = 1 + (rng.next_u64() % 3) as usize;
                    Mat::from_vec(d, r, (0..d * r).map(|_| rng.standard_normal()).collect())
                })
                .collect(),
        };
        let cov = lmc_covariance(&x, &spec, d).unwrap();
        let max_diag = (0..cov.dim()).map(|i| cov.mat[(i, i)]).fold(0.0_f64, f64::max);
        let min_eig = hmocgp_core::linalg::sym_min_eigenvalue(&cov.mat);
        assert!(min_eig >= -1e-8 * max_diag, "min eig {min_eig}, max diag {max_diag}");
    }
}
