use proptest::prelude::*;

use frogsim_core::estimate::LevelStats;
use frogsim_core::io::{merge_series, read_level_csv, read_plot_table, write_level_csv, write_plot_table, LevelRow};
use frogsim_core::nbbrw::{spectral_certificate, spectral_report, Classification};
use frogsim_core::seed::SeedSpec;
use frogsim_core::sfm::{laplace_criterion, poisson_mixture_dominates, simulate_sfm_detailed, SfmConfig};
use frogsim_core::tree_sim::{run_levels, run_to_fence_sync, InitConfig, ModelKind};
use frogsim_core::{derive_params, Prob};

fn level_row(ell: u32, mean: f64) -> LevelRow {
    let s = LevelStats {
        ell,
        trials: 500,
        mean_A: mean,
        stderr_A: mean.sqrt() / 10.0,
        s_ell: mean / 7.0,
        censored: 0,
        n_k: None,
    };
    LevelRow::new("nbfm", 4, "27/100", &s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drift_parameters_are_ordered(d in 2u32..200, p in 0.001f64..0.499) {
        let a = derive_params(d, Prob::Float(p)).unwrap();
        let b = derive_params(d + 1, Prob::Float(p)).unwrap();
        prop_assert!(0.0 < a.p_star() && a.p_star() < a.p_hat());
        prop_assert!(a.p_star() < b.p_star());
        prop_assert!((a.p_hat() - p / (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_outcome(master in any::<u64>(), stream in 0u64..1000, nb in any::<bool>()) {
        let kind = if nb { ModelKind::Nbfm } else { ModelKind::Fm };
        let params = derive_params(3, Prob::Float(0.22)).unwrap();
        let s = SeedSpec::new(master, stream);
        let a = run_levels(kind, &params, 5, InitConfig::OnePerSite, s, 1_000_000);
        let b = run_levels(kind, &params, 5, InitConfig::OnePerSite, s, 1_000_000);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fenced_counts_are_consistent(master in any::<u64>(), fence in 1usize..5) {
        let params = derive_params(3, Prob::Float(0.25)).unwrap();
        let o = run_to_fence_sync(ModelKind::Nbfm, &params, fence, InitConfig::OnePerSite, SeedSpec::new(master, 0), 1_000_000);
        prop_assert!(!o.censored);
        prop_assert!(o.frozen_at_fence >= 1);
        prop_assert!(o.frozen_at_fence <= 3u64.pow(fence as u32));
        let levels = run_levels(ModelKind::Nbfm, &params, fence as u32, InitConfig::OnePerSite, SeedSpec::new(master, 0), 1_000_000);
        prop_assert!(levels.windows(2).all(|w| w[0].root_visits <= w[1].root_visits));
    }

    #[test]
    fn sfm_vertices_entered_once(master in any::<u64>(), lambda in 0.0f64..3.0, p in 0.1f64..0.45) {
        let cfg = SfmConfig { params: derive_params(3, Prob::Float(p)).unwrap(), lambda_init: lambda, fence: 5 };
        let r = simulate_sfm_detailed(&cfg, SeedSpec::new(master, 1)).unwrap();
        prop_assert!(r.max_entries_from_above <= 1);
        prop_assert!(r.outcome.frozen_at_fence <= 3u64.pow(5));
    }

    #[test]
    fn poisson_comparison_matches_laplace(a in 0.0f64..8.0, b in 0.0f64..8.0, q in 0.0f64..1.0, l in 0.0f64..6.0) {
        let th = [(q, a), (1.0 - q, b)];
        let e: f64 = q * (-a).exp() + (1.0 - q) * (-b).exp();
        prop_assume!((e - (-l).exp()).abs() > 1e-6);
        prop_assert_eq!(poisson_mixture_dominates(&th, l), laplace_criterion(&th, l));
    }

    #[test]
    fn mu_increases_on_transient_side(p in 0.001f64..0.1666, dp in 1e-4f64..1e-3) {
        let a = spectral_report(&Prob::Float(p)).unwrap();
        let b = spectral_report(&Prob::Float((p + dp).min(1.0 / 6.0))).unwrap();
        prop_assert_eq!(a.classification, Classification::Transient);
        prop_assert!(a.mu.unwrap() < b.mu.unwrap());
        let c = spectral_certificate(&Prob::Float(p)).unwrap();
        prop_assert!(c.valid && c.residuals.iter().all(|r| r.abs() <= 1e-10));
    }

    #[test]
    fn recurrent_side_has_no_spectrum(p in 0.1667f64..0.4999) {
        let r = spectral_report(&Prob::Float(p)).unwrap();
        prop_assert_eq!(r.classification, Classification::Recurrent);
        prop_assert!(r.mu.is_none());
    }

    #[test]
    fn level_csv_roundtrips(means in proptest::collection::vec(0.0f64..1e9, 1..16)) {
        let rows: Vec<LevelRow> = means.iter().enumerate().map(|(i, &m)| level_row(i as u32 + 1, m)).collect();
        let mut buf = Vec::new();
        write_level_csv(&mut buf, &rows).unwrap();
        prop_assert_eq!(read_level_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn plot_merge_keeps_every_level(sets in proptest::collection::vec(proptest::collection::btree_set(1u32..16, 1..15), 1..=3)) {
        let series: Vec<Vec<LevelRow>> = sets
            .iter()
            .enumerate()
            .map(|(k, s)| s.iter().map(|&l| {
                let mut r = level_row(l, l as f64 * 1.5);
                r.p = format!("0.2{k}");
                r
            }).collect())
            .collect();
        let t = merge_series(&series).unwrap();
        let union: std::collections::BTreeSet<u32> = sets.iter().flatten().copied().collect();
        prop_assert_eq!(t.rows.len(), union.len());
        for (ell, cells) in &t.rows {
            for (k, c) in cells.iter().enumerate() {
                prop_assert_eq!(c.is_some(), sets[k].contains(ell));
            }
        }
        let mut buf = Vec::new();
        write_plot_table(&mut buf, &t).unwrap();
        prop_assert_eq!(read_plot_table(&buf[..]).unwrap(), t);
    }
}
