use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

use covlab::diagnostics::{
    dense_spectral_norm, eps_star, eps_star_enumerated, gamma1, kl_gaussian, m_star,
    operator_quantities, rel_error, sample_rate, spectral_norm, NuSequence, NuSource,
};
use covlab::estimators::{
    adaptive_threshold, choose_kappa, sample_cov, taper_estimate, threshold_estimate,
    EstimatorConfig, KInfMode,
};
use covlab::experiments::{read_trials, summarize, write_csv, TrialRecord};
use covlab::grid_kernel::{
    build_grid, lift_matrix_norm_check, taper_weight, taper_weight_sumform, KernelSpec,
};
use covlab::minimax_testbed::{
    build_f2_family, BandedFamilySpec, Family, SparseFamilySpec, ThetaIndex,
};
use covlab::rng::stream_rng;
use covlab::sampling::{cholesky_psd, draw_paths};

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
    let b = gaussian_matrix(n, rank, seed);
    let a = &b * b.transpose();
    (&a + a.transpose()) * 0.5
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    let lambda = 0.02f64..0.8;
    prop_oneof![
        lambda
            .clone()
            .prop_map(|l| KernelSpec::squared_exponential(l).unwrap()),
        (lambda.clone(), prop_oneof![Just(0.5), Just(1.5), Just(2.5)])
            .prop_map(|(l, z)| KernelSpec::matern(z, l).unwrap()),
        (lambda.clone(), 0.1f64..1.0).prop_map(|(l, p)| KernelSpec::periodic(l, p).unwrap()),
        (lambda, any::<u64>()).prop_map(|(l, s)| KernelSpec::permuted(
            KernelSpec::squared_exponential(l).unwrap(),
            s
        )
        .unwrap()),
    ]
}

fn nu_strategy() -> impl Strategy<Value = NuSource> {
    prop_oneof![
        prop_oneof![Just(0.5), Just(1.0), Just(2.0)].prop_map(|alpha| NuSource::PowerLaw { alpha }),
        prop_oneof![Just(1.0), Just(2.0)].prop_map(|power| NuSource::ExpPower { rate: 1.0, power }),
        Just(NuSource::ClosedFormSeD1),
        Just(NuSource::ClosedFormExponential),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn taper_forms_agree(
        d in 1usize..=3,
        kappa in 0.001f64..=1.0,
        xy in proptest::collection::vec(0.0f64..=1.0, 6),
    ) {
        let (x, y) = (&xy[..d], &xy[3..3 + d]);
        let a = taper_weight(x, y, kappa).unwrap();
        let b = taper_weight_sumform(x, y, kappa).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, taper_weight(y, x, kappa).unwrap());
        prop_assert_eq!(taper_weight(x, x, kappa).unwrap(), 1.0);
    }

    #[test]
    fn taper_is_monotone_in_distance(
        kappa in 0.01f64..=1.0,
        x in 0.0f64..=1.0,
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let (near, far) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = taper_weight(&[x, 0.5], &[x, 0.5 + 0.5 * near], kappa).unwrap();
        let b = taper_weight(&[x, 0.5], &[x, 0.5 + 0.5 * far], kappa).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn truncation_pair_properties(
        nu in nu_strategy(),
        n in prop_oneof![Just(1usize), Just(10), Just(100), Just(10_000), 1usize..500],
        d in 1usize..=3,
    ) {
        let nu = NuSequence::new(nu).unwrap();
        let m = m_star(&nu, n, d).unwrap();
        let eps = eps_star(&nu, n, d).unwrap();
        let enumerated = eps_star_enumerated(&nu, n, d).unwrap();
        prop_assert!((eps - enumerated).abs() <= 1e-12 * enumerated.max(1e-300));
        prop_assert!(n as f64 >= 2f64.powi(-(d as i32)) * (m as f64).powi(d as i32));
        let rate = sample_rate(m, n, d);
        prop_assert!(eps <= rate * (1.0 + 1e-12));
        if m >= 2 || nu.value(1).unwrap() == 1.0 {
            prop_assert!(rate <= 2f64.powf(d as f64 / 2.0) * eps * (1.0 + 1e-12));
        }
        prop_assert!(eps > 0.0 && eps <= 1.0);
        prop_assert!(m_star(&nu, n + 1, d).unwrap() >= m);
    }

    #[test]
    fn kl_is_nonnegative(seed in any::<u64>(), n in 1usize..6) {
        let a = random_psd(n, n + 2, seed) + DMatrix::identity(n, n) * 0.1;
        let b = random_psd(n, n + 2, seed ^ 1) + DMatrix::identity(n, n) * 0.1;
        prop_assert!(kl_gaussian(&a, &b).unwrap() >= -1e-12);
        prop_assert!(kl_gaussian(&a, &a).unwrap().abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discretize_symmetric_unit_diagonal(k in kernel_strategy(), l in 4usize..40, d in 1usize..=2) {
        let grid = build_grid(l, d).unwrap();
        let c = k.discretize(&grid).unwrap();
        let e = c.entries();
        prop_assert_eq!(e, &e.transpose());
        prop_assert!((0..c.n()).all(|i| e[(i, i)] == 1.0));
    }

    #[test]
    fn permutation_preserves_spectrum(lambda in 0.02f64..0.5, seed in any::<u64>(), l in 5usize..60) {
        let grid = build_grid(l, 1).unwrap();
        let base = KernelSpec::squared_exponential(lambda).unwrap();
        let a = base.discretize(&grid).unwrap().into_entries();
        let b = KernelSpec::permuted(base, seed).unwrap().discretize(&grid).unwrap().into_entries();
        let mut ea: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut eb: Vec<f64> = b.symmetric_eigen().eigenvalues.iter().copied().collect();
        ea.sort_by(f64::total_cmp);
        eb.sort_by(f64::total_cmp);
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x - y).abs() <= 1e-10 * ea.last().unwrap().abs());
        }
    }

    #[test]
    fn lift_norm_identity(m in 1usize..=32, reps in 1usize..4, rank in 1usize..6, seed in any::<u64>()) {
        let sigma = random_psd(m, rank, seed);
        let grid = build_grid(m * reps, 1).unwrap();
        let (lifted, direct) = lift_matrix_norm_check(&sigma, &grid).unwrap();
        prop_assert!((lifted - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn block_diagonal_norm_is_max_block(blocks in 2usize..=8, seed in any::<u64>()) {
        let sizes: Vec<usize> = (0..blocks).map(|b| 2 + (seed.rotate_left(b as u32 * 7) % 9) as usize).collect();
        let n: usize = sizes.iter().sum();
        let mut a = DMatrix::zeros(n, n);
        let mut best = 0.0f64;
        let mut at = 0;
        for (b, &s) in sizes.iter().enumerate() {
            let blk = random_psd(s, 3, seed.wrapping_add(b as u64));
            best = best.max(spectral_norm(&blk, 1e-13).unwrap());
            a.view_mut((at, at), (s, s)).copy_from(&blk);
            at += s;
        }
        let norm = spectral_norm(&a, 1e-13).unwrap();
        prop_assert!((norm - best).abs() <= 1e-10 * best);
    }

    #[test]
    fn spectral_norm_matches_dense(n in 1usize..=120, seed in any::<u64>()) {
        let b = gaussian_matrix(n, n, seed);
        let a = (&b + b.transpose()) * 0.5;
        let ours = spectral_norm(&a, 1e-12).unwrap();
        let dense = dense_spectral_norm(&a);
        prop_assert!((ours - dense).abs() <= 1e-8 * dense);
    }

    #[test]
    fn gamma1_ordering_and_scale_invariance(k in kernel_strategy(), l in 10usize..60, alpha in 0.1f64..10.0) {
        let grid = build_grid(l, 1).unwrap();
        let c = k.discretize(&grid).unwrap();
        let g = [0.25, 0.5, 1.0].map(|q| gamma1(&c, q).unwrap());
        prop_assert!(g[0] >= g[1] * (1.0 - 1e-12));
        prop_assert!(g[1] >= g[2] * (1.0 - 1e-12));
        prop_assert!(g[2] >= 1.0 - 1e-9);
        let r = operator_quantities(&c).unwrap().r_eff;
        let rs = operator_quantities(&c.scaled(alpha)).unwrap().r_eff;
        prop_assert!((r - rs).abs() <= 1e-12 * r);
        prop_assert!(r >= 1.0 - 1e-12);
    }

    #[test]
    fn estimators_are_symmetric_with_expected_support(
        lambda in 0.03f64..0.4,
        seed in any::<u64>(),
        kappa in 0.01f64..1.2,
        rho in 0.0f64..1.5,
        extra in 0.0f64..1.0,
    ) {
        let grid = build_grid(40, 1).unwrap();
        let c = KernelSpec::squared_exponential(lambda).unwrap().discretize(&grid).unwrap();
        let paths = draw_paths(&cholesky_psd(c.entries(), 1e-6).unwrap(), 8, seed).unwrap();
        let chat = sample_cov(&paths, grid.cell_weight()).unwrap();

        let t = taper_estimate(&chat, kappa, &grid).unwrap();
        prop_assert_eq!(t.entries(), &t.entries().transpose());
        for i in 0..c.n() {
            for j in 0..c.n() {
                let w = taper_weight(grid.point(i), grid.point(j), kappa).unwrap();
                if w == 0.0 {
                    prop_assert_eq!(t.get(i, j), 0.0);
                } else {
                    prop_assert_eq!(t.get(i, j), chat.get(i, j) * w);
                }
            }
        }

        let th = threshold_estimate(&chat, rho).unwrap();
        prop_assert_eq!(th.entries(), &th.entries().transpose());
        let again = threshold_estimate(&th, rho).unwrap();
        prop_assert_eq!(again.entries(), th.entries());
        let tighter = threshold_estimate(&chat, rho + extra).unwrap();
        for (a, b) in tighter.entries().iter().zip(th.entries().iter()) {
            prop_assert!(*a == 0.0 || *b != 0.0);
        }
    }

    #[test]
    fn kappa_non_decreasing_in_n(nu in nu_strategy(), n in 1usize..2000, scale in 0.001f64..1.0) {
        let nu = NuSequence::new(nu).unwrap();
        let a = choose_kappa(&nu, n, 1, scale).unwrap();
        let b = choose_kappa(&nu, n + 1 + n / 3, 1, scale).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn errors_scale_consistently(lambda in 0.03f64..0.4, seed in any::<u64>(), n in 2usize..20) {
        let grid = build_grid(50, 1).unwrap();
        let c = KernelSpec::squared_exponential(lambda).unwrap().discretize(&grid).unwrap();
        let paths = draw_paths(&cholesky_psd(c.entries(), 1e-6).unwrap(), n, seed).unwrap();
        let cfg = EstimatorConfig { k_inf_mode: KInfMode::PluginMaxDiag, ..EstimatorConfig::default() };
        let kappa = 3.0 * lambda;
        let run = |c: &covlab::grid_kernel::CovMatrix, p: &covlab::sampling::SampleSet| {
            let chat = sample_cov(p, grid.cell_weight()).unwrap();
            let rho = adaptive_threshold(p, &cfg).unwrap();
            let t = taper_estimate(&chat, kappa, &grid).unwrap();
            let th = threshold_estimate(&chat, rho).unwrap();
            (
                rel_error(&chat, c).unwrap(),
                rel_error(&t, c).unwrap(),
                rel_error(&th, c).unwrap(),
                rho,
            )
        };
        let (e1, k1, t1, r1) = run(&c, &paths);
        let (e2, k2, t2, r2) = run(&c.scaled(4.0), &paths.scaled(2.0));
        prop_assert_eq!(e1, e2);
        prop_assert_eq!(k1, k2);
        prop_assert_eq!(t1, t2);
        prop_assert_eq!(4.0 * r1, r2);
    }

    #[test]
    fn cholesky_reconstructs(n in 1usize..40, rank in 1usize..40, seed in any::<u64>()) {
        let a = random_psd(n, rank, seed);
        let f = cholesky_psd(&a, 1e-6 * a.diagonal().max().max(1e-300)).unwrap();
        let jittered = &a + DMatrix::identity(n, n) * f.jitter();
        let err = (f.reconstruct() - &jittered).norm() / jittered.norm();
        prop_assert!(err <= 1e-8);
        let p1 = draw_paths(&f, 3, seed).unwrap();
        let p2 = draw_paths(&f, 3, seed).unwrap();
        prop_assert!(p1.iter().zip(p2.iter()).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())));
    }

    #[test]
    fn f2_members_and_hamming_bookkeeping(seed in any::<u64>(), flips in proptest::collection::vec(0usize..64, 1..6)) {
        let nu = NuSequence::new(NuSource::PowerLaw { alpha: 0.5 }).unwrap();
        let fam = build_f2_family(&BandedFamilySpec::desk(nu)).unwrap();
        let theta = fam.random_theta(seed);
        let sigma = fam.build(&theta).unwrap();
        prop_assert_eq!(&sigma, &sigma.transpose());
        let min_eig = sigma.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= 0.75 - 1e-10);

        let lifted = KernelSpec::piecewise_constant(sigma.clone()).unwrap()
            .discretize(&build_grid(fam.n() * 2, 1).unwrap()).unwrap();
        prop_assert!((operator_quantities(&lifted).unwrap().trace_op - 1.0).abs() <= 1e-10);

        let mut other = theta.clone();
        for f in &flips {
            other = other.flipped(f % theta.bits().len());
        }
        let family = Family::Banded(fam);
        let h = theta.hamming(&other).unwrap();
        let s2 = family.build(&other).unwrap();
        prop_assert_eq!(h, family.support_difference(&sigma, &s2));
    }

    #[test]
    fn sparse_hamming_bookkeeping(seed in any::<u64>(), flips in proptest::collection::vec(0usize..200, 1..6)) {
        let family = Family::Sparse(SparseFamilySpec::default());
        let theta = family.random_theta(seed);
        let mut other = theta.clone();
        for f in &flips {
            other = other.flipped(f % theta.bits().len());
        }
        let a = family.build(&theta).unwrap();
        let b = family.build(&other).unwrap();
        prop_assert_eq!(&a, &a.transpose());
        prop_assert!(a.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        prop_assert_eq!(theta.hamming(&other).unwrap(), family.support_difference(&a, &b));
        if let ThetaIndex::Sparse { lambda_rows, .. } = &theta {
            let ell = SparseFamilySpec::default().ell();
            prop_assert!(lambda_rows.iter().all(|r| r.len() == ell));
        }
    }

    #[test]
    fn csv_round_trip_and_summary_bounds(
        errs in proptest::collection::vec((0.0f64..50.0, 0.0f64..50.0, 0.0f64..50.0), 1..12),
        seed in any::<u64>(),
        lambda in 1e-4f64..1.0,
    ) {
        let records: Vec<TrialRecord> = errs.iter().enumerate().map(|(t, &(a, b, c))| TrialRecord {
            kernel: "se".into(),
            lambda,
            dim: 1,
            points_per_axis: 64,
            n_samples: 7,
            trial: t,
            seed: seed.wrapping_add(t as u64),
            kappa: a / 7.0,
            rho_hat: b / 3.0,
            err_sample: a,
            err_taper: b,
            err_thresh: c,
            r_eff: None,
        }).collect();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        prop_assert_eq!(read_trials(buf.as_slice()).unwrap(), records.clone());
        let rows = summarize(&records);
        prop_assert_eq!(rows.len(), 1);
        let lo = errs.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = errs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(rows[0].mean_sample >= lo - 1e-12 && rows[0].mean_sample <= hi + 1e-12);
        prop_assert!(rows[0].ci_sample.map_or(records.len() == 1, |c| c >= 0.0));
    }
}

#[test]
fn empirical_covariance_of_many_draws() {
    let sigma = random_psd(5, 5, 17) + DMatrix::identity(5, 5) * 0.2;
    let f = cholesky_psd(&sigma, 0.0).unwrap();
    let paths = draw_paths(&f, 100_000, 3).unwrap();
    let mut acc = DMatrix::zeros(5, 5);
    for p in paths.iter() {
        let v = DVector::from_column_slice(p);
        acc += &v * v.transpose();
    }
    acc /= 100_000.0;
    let rel = dense_spectral_norm(&(&acc - &sigma)) / dense_spectral_norm(&sigma);
    assert!(rel <= 0.05, "relative error {rel}");
}
