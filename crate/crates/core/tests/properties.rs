mod common;

use common::*;
use mrct_core::assessment::{one_step_only, two_step_assess, AssessmentConfig, Verdict};
use mrct_core::ate::{
    equivalent_global_threshold, estimate_global_ate, global_z, one_step_assess, z_alpha, RegionalEstimates,
};
use mrct_core::data::{
    discretize_covariates, partition_by_region, read_csv, write_csv, Arm, DatasetBuilder, Endpoint, TrialDataset,
};
use mrct_core::ite::{fit_working_model, ite_profile, IteProfile, WorkingModelOptions};
use mrct_core::num::{
    loo_prediction, ols_fit, std_normal_cdf, trunc_normal_invert_moment, trunc_normal_moment, RngStream,
    TruncNormalParams,
};
use mrct_core::shift::{adjusted_ate, density_ratio, step2_event, AdjustedAte, CovariateAdjustment};
use mrct_core::sim::{builtin_scenario, estimate_cp_methods, generate_trial, population_ate, run_replicates};
use mrct_core::survival::{kaplan_meier, pseudo_observations, rmst, to_pseudo_dataset};
use mrct_core::assessment::Method;
use proptest::prelude::*;

mod num {
    use super::*;

    proptest! {
        #[test]
        fn cdf_is_symmetric(x in -8.0f64..8.0) {
            let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-14, "x = {x}: {s}");
        }

        #[test]
        fn loo_matches_refits(seed in any::<u64>(), k in 1usize..=6, extra in 3usize..=24) {
            let n = (k + extra).min(30);
            let mut rng = RngStream::new(seed, 0);
            let (rows, y) = random_design(&mut rng, n, k);
            let fit = ols_fit(&matrix(&rows), &y).unwrap();
            let fast = loo_prediction(&fit, &y).unwrap();
            let slow = brute_force_loo(&rows, &y);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
            }
        }

        #[test]
        fn residuals_orthogonal_to_design(seed in any::<u64>(), k in 1usize..=6, n in 10usize..=60) {
            let mut rng = RngStream::new(seed, 1);
            let (rows, y) = random_design(&mut rng, n, k);
            let fit = ols_fit(&matrix(&rows), &y).unwrap();
            let e = fit.residuals(&y);
            for j in 0..k {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                prop_assert!(dot(&col, &e).abs() <= 1e-9, "column {j}");
            }
        }

        #[test]
        fn rng_streams_repeat(seed in any::<u64>(), stream in any::<u64>()) {
            let draw = |mut r: RngStream| (0..64).map(|_| r.uniform().to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(draw(RngStream::new(seed, stream)), draw(RngStream::new(seed, stream)));
        }
    }

    #[test]
    fn moment_inversion_round_trips() {
        for step in 0..=40 {
            let mu = -2.0 + 0.1 * step as f64;
            let m = trunc_normal_moment(&TruncNormalParams::new(mu, 1.4, -3.0, 3.0).unwrap(), 1).unwrap();
            let back = trunc_normal_invert_moment(m, 1, 1.4, -3.0, 3.0).unwrap();
            assert!((back - mu).abs() <= 1e-6, "mu {mu}: {back}");
        }
    }
}

mod data {
    use super::*;

    #[test]
    fn recutting_is_rejected() {
        let d = discretized_small_trial(2, 20, 30, 2);
        assert!(discretize_covariates(&d).is_err());
    }

    #[test]
    fn partition_sizes_add_up() {
        let d = small_trial(&mut RngStream::new(5, 0), 17, 41, 1, 0.0);
        let p = partition_by_region(&d, "r").unwrap();
        assert_eq!(p.n_r + p.n_minus_r, d.n());
        assert!(p.rho_r > 0.0 && p.rho_r < 1.0);
        assert!((p.rho_r - 17.0 / 58.0).abs() < 1e-15);
        let mut all: Vec<usize> = p.in_region.iter().chain(&p.complement).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..d.n()).collect::<Vec<_>>());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = builtin_scenario("survival-shift-i").unwrap();
        let d = generate_trial(&spec, &mut RngStream::new(3, 0)).unwrap();
        let mut first = Vec::new();
        write_csv(&d, &mut first).unwrap();
        let back = read_csv(first.as_slice(), d.endpoint(), d.pi1()).unwrap();
        let mut second = Vec::new();
        write_csv(&back, &mut second).unwrap();
        assert_eq!(first, second);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(d.outcomes()), bits(back.outcomes()));
        for s in 0..d.p() {
            assert_eq!(bits(d.covariate(s)), bits(back.covariate(s)));
        }
        assert_eq!(d.status(), back.status());
        assert_eq!(d.treatments(), back.treatments());
    }
}

mod ate {
    use super::*;

    /// Equal arm splits in both regions, so the global ATE decomposes.
    fn balanced(seed: u64, n_r: usize, n_o: usize, shift_r: f64) -> TrialDataset {
        let mut rng = RngStream::new(seed, 0);
        let mut b = DatasetBuilder::new(Endpoint::Continuous, vec![], 0.5).unwrap();
        for (label, n, effect) in [("r", n_r, 1.0 + shift_r), ("o", n_o, 1.0)] {
            for i in 0..n {
                let arm = if i % 2 == 0 { Arm::Treatment } else { Arm::Control };
                let y = rng.standard_normal() + if arm == Arm::Treatment { effect } else { 0.0 };
                b.push(y, None, arm, label, &[]).unwrap();
            }
        }
        b.finish().unwrap()
    }

    proptest! {
        #[test]
        fn global_effect_decomposes(seed in any::<u64>(), half_r in 2usize..40, half_o in 2usize..120, shift in -2.0f64..2.0) {
            let d = balanced(seed, 2 * half_r, 2 * half_o, shift);
            let p = partition_by_region(&d, "r").unwrap();
            let e = RegionalEstimates::compute(&d, &p).unwrap();
            let mix = p.rho_r * e.region.delta + (1.0 - p.rho_r) * e.complement.delta;
            prop_assert!((e.global.delta - mix).abs() <= 1e-10);
        }

        #[test]
        fn ratio_events_agree(seed in any::<u64>(), half_r in 2usize..40, half_o in 2usize..120, shift in -2.0f64..2.0) {
            let d = balanced(seed, 2 * half_r, 2 * half_o, shift);
            let p = partition_by_region(&d, "r").unwrap();
            let e = RegionalEstimates::compute(&d, &p).unwrap();
            let (dr, dm, dg) = (e.region.delta, e.complement.delta, e.global.delta);
            prop_assume!(dm > 0.0 && dg > 0.0);
            for q in [0.5, 0.75, 0.9] {
                let lhs = dr / dm > q;
                let rhs = dr / dg > equivalent_global_threshold(q, p.rho_r);
                // Skip knife-edge cases where rounding decides the event.
                prop_assume!((dr / dm - q).abs() > 1e-12);
                prop_assert_eq!(lhs, rhs, "q = {}", q);
            }
        }

        #[test]
        fn claims_are_nested_in_q(seed in any::<u64>(), shift in -1.5f64..1.0) {
            let d = balanced(seed, 60, 340, shift);
            let p = partition_by_region(&d, "r").unwrap();
            let qs = [0.5, 0.6, 0.75, 0.9, 1.0, 1.5];
            let claims: Vec<bool> = qs.iter().map(|&q| one_step_assess(&d, &p, q, 0.025, 0.0).unwrap().consistent).collect();
            for w in claims.windows(2) {
                prop_assert!(w[0] || !w[1], "{:?}", claims);
            }
        }
    }

    #[test]
    fn zero_margin_is_superiority_path() {
        for seed in 0..50 {
            let d = balanced(seed, 60, 340, -0.3);
            let p = partition_by_region(&d, "r").unwrap();
            let e = RegionalEstimates::compute(&d, &p).unwrap();
            let r = e.one_step(0.5, 0.025, 0.0).unwrap();
            let z = e.global.delta / e.global.se;
            assert_eq!(r.z.to_bits(), z.to_bits());
            assert_eq!(global_z(&d, 0.0).unwrap().to_bits(), z.to_bits());
            assert_eq!(r.overall_significant, z > z_alpha(0.025).unwrap());
            if r.overall_significant && e.complement.delta > 0.0 {
                let plain = e.region.delta / e.complement.delta;
                assert_eq!(r.ratio.unwrap().to_bits(), plain.to_bits());
            }
        }
    }
}

mod survival {
    use super::*;

    proptest! {
        #[test]
        fn uncensored_pseudo_values_are_truncated_times(
            times in prop::collection::vec(0.01f64..200.0, 2..60),
            tau in 1.0f64..150.0,
        ) {
            let status = vec![true; times.len()];
            let po = pseudo_observations(&times, &status, tau).unwrap();
            for (v, t) in po.values.iter().zip(&times) {
                prop_assert!((v - t.min(tau)).abs() <= 1e-9, "{v} vs {t}");
            }
        }
    }

    #[test]
    fn pseudo_ate_is_rmst_difference() {
        for name in ["survival-noshift", "survival-shift-ii"] {
            let spec = builtin_scenario(name).unwrap();
            let d = generate_trial(&spec, &mut RngStream::new(11, 0)).unwrap();
            let pseudo = to_pseudo_dataset(&d).unwrap();
            let arm_rmst = |arm: Arm| {
                let idx: Vec<usize> = (0..d.n()).filter(|&i| d.treatments()[i] == arm).collect();
                let t: Vec<f64> = idx.iter().map(|&i| d.outcomes()[i]).collect();
                let s: Vec<bool> = idx.iter().map(|&i| d.status().unwrap()[i]).collect();
                rmst(&kaplan_meier(&t, &s).unwrap(), spec.tau).unwrap()
            };
            let want = arm_rmst(Arm::Treatment) - arm_rmst(Arm::Control);
            let got = estimate_global_ate(&pseudo).unwrap().delta;
            assert!((got - want).abs() <= 1e-9, "{name}: {got} vs {want}");
        }
    }

    #[test]
    fn single_subject_arm_is_rejected() {
        let mut b = DatasetBuilder::new(Endpoint::Survival { tau: 10.0 }, vec!["x".into()], 0.5).unwrap();
        b.push(3.0, Some(true), Arm::Treatment, "r", &[0.0]).unwrap();
        for t in [1.0, 2.0, 4.0] {
            b.push(t, Some(false), Arm::Control, "r", &[1.0]).unwrap();
        }
        assert!(to_pseudo_dataset(&b.finish().unwrap()).is_err());
    }
}

mod ite {
    use super::*;

    #[test]
    fn own_outcome_never_enters_mhat() {
        let d = discretized_small_trial(8, 30, 50, 3);
        let p = partition_by_region(&d, "r").unwrap();
        let base = ite_profile(&d, &p).unwrap();
        for i in [0, 7, 31, 79] {
            let mut y = d.outcomes().to_vec();
            y[i] += 123.0;
            let moved = d.with_outcomes(y, Endpoint::Continuous).unwrap();
            let prof = ite_profile(&moved, &p).unwrap();
            // The hat-matrix shortcut cancels y_i algebraically, not bitwise.
            assert!((prof.mhat[i] - base.mhat[i]).abs() <= 1e-9, "subject {i}");
            assert!(prof.mhat.iter().zip(&base.mhat).any(|(a, b)| (a - b).abs() > 1.0));
        }
    }

    #[test]
    fn wald_matches_quadratic_form() {
        let mut checked = 0;
        for seed in 0..40 {
            let d = discretized_small_trial(100 + seed, 20, 30, 2);
            let p = partition_by_region(&d, "r").unwrap();
            let prof = ite_profile(&d, &p).unwrap();
            let fit = fit_working_model(&d, &p, &prof, WorkingModelOptions::default()).unwrap();
            if !fit.dropped_terms.is_empty() {
                continue;
            }
            let layout = mrct_core::ite::DesignLayout::new(&d, Default::default()).unwrap();
            let design = layout.build(&d, &p);
            let rows: Vec<Vec<f64>> = (0..design.nrows()).map(|i| design.row(i)).collect();
            let want = wald_quadratic_form(&rows, &prof.ite, layout.interaction_columns());
            assert!((fit.wald_stat - want).abs() <= 1e-8 * want.max(1.0), "{} vs {want}", fit.wald_stat);
            checked += 1;
        }
        assert!(checked >= 30);
    }

    #[test]
    fn region_mean_ite_is_unbiased() {
        let mut spec = builtin_scenario("continuous-quadratic-noshift").unwrap();
        spec.n_r = 100_000;
        spec.n_minus_r = 100_000;
        let d = discretize_covariates(&generate_trial(&spec, &mut RngStream::new(21, 0)).unwrap()).unwrap();
        let p = partition_by_region(&d, "r").unwrap();
        let prof = ite_profile(&d, &p).unwrap();
        let vals: Vec<f64> = p.in_region.iter().map(|&i| prof.ite[i]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        let truth = population_ate(&spec, true).unwrap();
        assert!((mean - truth).abs() <= 3.0 * se, "{mean} vs {truth} (se {se})");
    }
}

mod shift {
    use super::*;

    /// Complement repeats the region's covariate rows, so level frequencies
    /// match exactly.
    fn mirrored(seed: u64) -> TrialDataset {
        let mut rng = RngStream::new(seed, 0);
        let rows: Vec<[f64; 3]> = (0..45).map(|_| [rng.standard_normal(), rng.standard_normal(), rng.uniform()]).collect();
        let mut b = DatasetBuilder::new(Endpoint::Continuous, vec!["a".into(), "b".into(), "c".into()], 0.5).unwrap();
        for (label, copies) in [("r", 1), ("o", 3)] {
            for _ in 0..copies {
                for (i, x) in rows.iter().enumerate() {
                    let arm = if (i + copies) % 2 == 0 { Arm::Treatment } else { Arm::Control };
                    b.push(x[0] + rng.standard_normal(), None, arm, label, x).unwrap();
                }
            }
        }
        discretize_covariates(&b.finish().unwrap()).unwrap()
    }

    #[test]
    fn identical_frequencies_reduce_to_region_mean() {
        for seed in 0..20 {
            let d = mirrored(seed);
            let p = partition_by_region(&d, "r").unwrap();
            let prof = ite_profile(&d, &p).unwrap();
            let plain = prof.mean_over(&p.in_region);
            for s in 0..d.p() {
                let table = density_ratio(&d, &p, s, 0.0).unwrap();
                let adj = adjusted_ate(&d, &prof, &p, &table).unwrap();
                assert!((adj - plain).abs() <= 1e-12, "seed {seed} covariate {s}: {adj} vs {plain}");
            }
        }
    }

    #[test]
    fn reweighting_has_unit_mass() {
        for seed in 0..20 {
            let d = discretized_small_trial(300 + seed, 60, 340, 4);
            let p = partition_by_region(&d, "r").unwrap();
            let ones = IteProfile { mhat: vec![0.0; d.n()], ite: vec![1.0; d.n()], pi1: 0.5 };
            for s in 0..d.p() {
                let table = density_ratio(&d, &p, s, 0.0).unwrap();
                if table.freq_r.contains(&0.0) {
                    continue;
                }
                let mass = adjusted_ate(&d, &ones, &p, &table).unwrap();
                assert!((mass - 1.0).abs() <= 1e-12, "{mass}");
            }
        }
    }

    proptest! {
        #[test]
        fn step2_is_monotone_in_q2(
            stars in prop::collection::vec(-3.0f64..3.0, 1..6),
            dm in -1.0f64..3.0,
            q_hi in 0.5f64..2.0,
            gap in 0.0f64..1.0,
        ) {
            let adjusted = AdjustedAte {
                per_covariate: stars
                    .iter()
                    .enumerate()
                    .map(|(s, &delta_star)| CovariateAdjustment { s, name: format!("x{s}"), delta_star })
                    .collect(),
                max_ratio_over_delta_minus_r: None,
                best_covariate: None,
            };
            let q_lo = (q_hi - gap).max(0.5);
            if step2_event(&adjusted, dm, q_hi, 0.0).passed {
                prop_assert!(step2_event(&adjusted, dm, q_lo, 0.0).passed);
            }
        }
    }
}

mod assessment {
    use super::*;

    fn scenario_trials() -> Vec<TrialDataset> {
        let mut out = Vec::new();
        for name in ["continuous-linear-noshift", "binary-shift-i", "survival-shift-ii", "continuous-cubic-shift-i"] {
            for kappa in [0.0, 6.0, 10.0] {
                let spec = builtin_scenario(name).unwrap().with_kappa_r(kappa);
                for i in 0..15 {
                    out.push(generate_trial(&spec, &mut RngStream::new(17, i)).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn two_step_dominates_one_step() {
        for d in scenario_trials() {
            for (q1, q2) in [(0.5, 0.5), (0.75, 0.5), (0.9, 0.5), (0.9, 0.8)] {
                let cfg = AssessmentConfig { q1, q2, ..AssessmentConfig::default() };
                let one = one_step_only(&d, &cfg).unwrap();
                let two = two_step_assess(&d, &cfg).unwrap();
                if one.verdict == Verdict::Consistency {
                    assert_eq!(two.verdict, Verdict::Consistency);
                }
            }
        }
    }

    #[test]
    fn not_significant_exactly_when_z_below_threshold() {
        let cfg = AssessmentConfig::default();
        let za = z_alpha(cfg.alpha).unwrap();
        for d in scenario_trials() {
            let report = two_step_assess(&d, &cfg).unwrap();
            let z = report.one_step.z;
            assert_eq!(report.verdict == Verdict::NotSignificant, z <= za, "z = {z}");
        }
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let cfg = AssessmentConfig::default();
        let trials = scenario_trials();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| trials.iter().map(|d| two_step_assess(d, &cfg).unwrap().to_json()).collect::<Vec<_>>())
        };
        assert_eq!(run(1), run(4));
    }
}

mod sim {
    use super::*;

    fn mean_and_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn generated_moments_match_truncated_normal() {
        for name in ["continuous-linear-noshift", "continuous-quadratic-shift-ii"] {
            let mut spec = builtin_scenario(name).unwrap();
            spec.n_r = 1_000_000;
            spec.n_minus_r = 4;
            assert_eq!(spec.mu_r[1], 0.0);
            let d = generate_trial(&spec, &mut RngStream::new(6, 0)).unwrap();
            for (s, m) in [(0, spec.mu_r[0]), (1, 0.0)] {
                let law = TruncNormalParams::new(m, spec.sigma, spec.bounds.0, spec.bounds.1).unwrap();
                let x = &d.covariate(s)[..spec.n_r];
                for k in 1..=3u8 {
                    let powers: Vec<f64> = x.iter().map(|v| v.powi(k as i32)).collect();
                    let (emp, se) = mean_and_se(&powers);
                    let want = trunc_normal_moment(&law, k).unwrap();
                    assert!((emp - want).abs() <= 3.0 * se, "{name} x{} k={k}: {emp} vs {want}", s + 1);
                }
            }
        }
    }

    #[test]
    fn headline_moments() {
        let law = TruncNormalParams::new(0.8, 1.4, -3.0, 3.0).unwrap();
        assert!((trunc_normal_moment(&law, 1).unwrap() - 0.64).abs() < 0.005);
        let law = TruncNormalParams::new(0.0, 1.4, -3.0, 3.0).unwrap();
        assert!((trunc_normal_moment(&law, 2).unwrap() - 1.61).abs() < 0.005);
    }

    #[test]
    fn pooled_ate_matches_table_effects() {
        for (name, factor) in [("continuous-linear-noshift", 0.64), ("continuous-quadratic-noshift", 0.84)] {
            let mut spec = builtin_scenario(name).unwrap();
            spec.n_r = 500_000;
            spec.n_minus_r = 500_000;
            let d = generate_trial(&spec, &mut RngStream::new(9, 0)).unwrap();
            let est = estimate_global_ate(&d).unwrap();
            let kappa = spec.kappa_minus_r;
            assert_eq!(spec.kappa_r, kappa);
            assert!((est.delta - factor * kappa).abs() <= 3.0 * est.se, "{name}: {} vs {}", est.delta, factor * kappa);
            let exact = population_ate(&spec, true).unwrap();
            assert!((est.delta - exact).abs() <= 3.0 * est.se, "{name}: {} vs {exact}", est.delta);
        }
    }

    #[test]
    fn equal_effects_give_centred_regional_difference() {
        let cfg = AssessmentConfig::default();
        for spec in mrct_core::sim::builtin_scenarios().into_iter().filter(|s| s.shift == mrct_core::sim::ShiftKind::Noshift) {
            let spec = spec.with_kappa_r(10.0);
            assert_eq!(population_ate(&spec, true).unwrap(), population_ate(&spec, false).unwrap());
            let outs = run_replicates(&spec, &[Method::OneStep { q: 0.5 }], &cfg, 2000, 33).unwrap();
            let diffs: Vec<f64> = outs.iter().map(|o| o.delta_r - o.delta_minus_r).collect();
            assert!(diffs.iter().all(|d| d.is_finite()), "{}", spec.name);
            let (m, se) = mean_and_se(&diffs);
            assert!(m.abs() <= 3.0 * se, "{}: {m} (se {se})", spec.name);
        }
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let cfg = AssessmentConfig::default();
        let spec = builtin_scenario("binary-shift-ii").unwrap().with_kappa_r(6.0);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| estimate_cp_methods(&spec, &Method::table_set(), &cfg, 300, 2024).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn survival_censoring_near_quarter() {
        for name in ["survival-noshift", "survival-shift-i", "survival-shift-ii"] {
            let mut spec = builtin_scenario(name).unwrap();
            spec.n_r = 20_000;
            spec.n_minus_r = 20_000;
            let d = generate_trial(&spec, &mut RngStream::new(1, 0)).unwrap();
            let censored = d.status().unwrap().iter().filter(|&&s| !s).count() as f64 / d.n() as f64;
            assert!((censored - 0.25).abs() <= 0.02, "{name}: censoring fraction {censored:.3}");
        }
    }
}
