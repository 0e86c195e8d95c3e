use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use sextic_core::analysis::{
    condition_star_estimate, emit, exponent_fit, fluctuation_report, forward_map,
    integrate_triple_density, ks_statistic, lln_check, rescale_values, triple_density,
    HistogramSpec, LimitLaw, LlnTolerances, TripleBox, Verdict,
};
use sextic_core::sampler::{run_parallel, ChainPlan};
use sextic_core::{Error, LogDensity, Measure, MomentSet, SampleRecord};
use std::sync::OnceLock;

fn law() -> &'static LimitLaw {
    static LAW: OnceLock<LimitLaw> = OnceLock::new();
    LAW.get_or_init(LimitLaw::new)
}

fn uniform() -> Measure {
    Measure::density(LogDensity::Uniform, -1.0, 1.0, 256).unwrap()
}

fn five_point() -> Measure {
    Measure::discrete(&[(-2.0, 0.2), (-1.0, 0.2), (0.0, 0.2), (1.0, 0.2), (2.0, 0.2)]).unwrap()
}

#[test]
fn normaliser_matches_gamma_closed_form_and_second_quadrature() {
    let closed = 40.5f64.powf(1.0 / 6.0) / statrs::function::gamma::gamma(1.0 / 6.0);
    assert!((law().normalizer / closed - 1.0).abs() < 1e-8);
    // Midpoint rule on a fine grid as an independent quadrature.
    let m = 200_000;
    let h = 12.0 / m as f64;
    let total: f64 = (0..m)
        .map(|i| {
            let s = -6.0 + (i as f64 + 0.5) * h;
            (-s.powi(6) / 18.0).exp()
        })
        .sum::<f64>()
        * h;
    assert!((total * law().normalizer - 1.0).abs() < 1e-8);
    assert_eq!(law().density(0.0), law().normalizer);
}

#[test]
fn cdf_limits_and_symmetry() {
    assert_eq!(law().cdf(0.0), 0.5);
    assert!((law().cdf(-6.0) + law().cdf(6.0) - 1.0).abs() < 1e-8);
    assert_eq!(law().cdf(-7.0), 0.0);
    assert_eq!(law().cdf(7.0), 1.0);
}

#[test]
fn variance_of_limit_law() {
    assert!((law().variance() - 0.8345).abs() < 1e-3);
}

#[test]
fn ks_of_exact_draws_is_small() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let draws: Vec<f64> = (0..100_000).map(|_| law().quantile(rng.random())).collect();
    let d = ks_statistic(&draws, |s| law().cdf(s));
    assert!(d < 0.006, "{d}");
}

#[test]
fn rescale_doubling_n() {
    let ms = MomentSet::new(2.0, 6.8, 26.0, 110.0);
    let a = rescale_values(&[3.0, -7.5], &ms, 500).unwrap();
    let b = rescale_values(&[3.0, -7.5], &ms, 1000).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((y / x - 2f64.powf(-5.0 / 6.0)).abs() < 1e-14);
    }
}

fn moment_set() -> impl Strategy<Value = MomentSet> {
    // Moments of a symmetric two-point-plus-zero mixture keep the set realisable.
    (0.1f64..3.0, 0.05f64..0.95).prop_map(|(a, p)| {
        let m = |k: i32| p * a.powi(k);
        MomentSet::new(m(2), m(4), m(6), m(8))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rescaling_algebra_identity(ms in moment_set(), s in -1e4f64..1e4, n in 1usize..100_000) {
        prop_assume!(ms.is_admissible());
        let lhs = n as f64 * ms.sixth_order_coefficient() * (s / n as f64).powi(6);
        let r = rescale_values(&[s], &ms, n).unwrap()[0];
        let rhs = r.powi(6) / 18.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        let constant = ms.sixth_order_coefficient() * ms.sigma2.powi(6) * 18.0;
        let target = ms.mu4 * ms.mu4 / ms.sigma2 - 0.4 * ms.mu6;
        prop_assert!((constant - target).abs() <= 1e-12 * target.abs());
    }

    #[test]
    fn cdf_is_monotone(a in -7.0f64..7.0, b in -7.0f64..7.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(law().cdf(lo) <= law().cdf(hi));
    }

    #[test]
    fn ks_permutation_invariant(mut v in prop::collection::vec(-3.0f64..3.0, 1..200), seed in any::<u64>()) {
        let d1 = ks_statistic(&v, |s| law().cdf(s));
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        for i in (1..v.len()).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(d1, ks_statistic(&v, |s| law().cdf(s)));
    }

    #[test]
    fn triple_density_permutation_invariant(x in -0.95f64..0.95, y in -0.95f64..0.95, z in -0.95f64..0.95) {
        prop_assume!((x - y).abs() > 1e-2 && (y - z).abs() > 1e-2 && (x - z).abs() > 1e-2);
        prop_assume!((x + y + z).abs() > 1e-2);
        let m = uniform();
        let perms = [[x, y, z], [y, x, z], [z, y, x], [x, z, y], [y, z, x], [z, x, y]];
        let values: Vec<f64> = perms
            .iter()
            .map(|p| {
                let [u, v, w] = forward_map(p[0], p[1], p[2]);
                triple_density(&m, u, v, w).unwrap()
            })
            .collect();
        for d in &values {
            prop_assert!((d - values[0]).abs() <= 1e-9 * values[0]);
        }
        prop_assert!(values[0] > 0.0);
    }
}

#[test]
fn triple_density_integrates_to_one_for_uniform() {
    let res = integrate_triple_density(&uniform(), &TripleBox::covering(1.0), 200).unwrap();
    assert!((res.integral - 1.0).abs() < 0.01, "{res:?}");
}

#[test]
fn triple_density_rejects_u_zero() {
    assert!(matches!(
        triple_density(&uniform(), 0.0, 1.0, 1.0),
        Err(Error::DomainError(_))
    ));
}

#[test]
fn condition_star_verdicts() {
    let m = uniform();
    let finite = condition_star_estimate(&m, 1.1, 1 << 21, 5).unwrap();
    assert_eq!(finite.verdict, Verdict::Finite, "{finite:?}");
    let suspect = condition_star_estimate(&m, 1.9, 1 << 21, 5).unwrap();
    assert_eq!(suspect.verdict, Verdict::Suspect, "{suspect:?}");
    let plain = condition_star_estimate(&m, 1.0, 1 << 12, 5).unwrap();
    assert!((plain.estimate - 1.0).abs() < 1e-12);
}

fn records_from(values: &[(f64, f64, f64)]) -> Vec<SampleRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &(s, t, u))| SampleRecord {
            chain_id: 0,
            sweep: i as u64,
            s,
            t,
            u,
        })
        .collect()
}

#[test]
fn emitted_files_are_deterministic() {
    let ms = MomentSet::new(2.0, 6.8, 26.0, 110.0);
    let recs = records_from(&[(10.0, 2000.0, 6800.0), (-40.0, 1990.0, 6790.0), (3.0, 2010.0, 6805.0)]);
    let rep = fluctuation_report(&recs, &ms, 1000, law(), &LlnTolerances::default(), &HistogramSpec::default()).unwrap();
    let mass: f64 = rep.histogram.iter().map(|b| b.density * (b.bin_right - b.bin_left)).sum();
    assert!((mass - 1.0).abs() < 1e-9);
    assert_eq!(rep.histogram.iter().map(|b| b.count).sum::<u64>(), 3);
    let dir = tempfile::tempdir().unwrap();
    let a = emit(&rep, law(), &dir.path().join("a"), "n1000").unwrap();
    let b = emit(&rep, law(), &dir.path().join("b"), "n1000").unwrap();
    for (p, q) in [(&a.csv, &b.csv), (&a.json, &b.json), (&a.svg, &b.svg)] {
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
    let csv = std::fs::read_to_string(&a.csv).unwrap();
    assert!(csv.starts_with("bin_left,bin_right,count,density\n"));
}

#[test]
fn empty_report_carries_warning() {
    let ms = MomentSet::new(2.0, 6.8, 26.0, 110.0);
    let rep = fluctuation_report(&[], &ms, 1000, law(), &LlnTolerances::default(), &HistogramSpec::default()).unwrap();
    assert!(rep.warning.is_some());
    let dir = tempfile::tempdir().unwrap();
    let files = emit(&rep, law(), dir.path(), "empty").unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(files.json).unwrap()).unwrap();
    assert!(json.get("warning").is_some());
}

#[test]
fn inadmissible_report_is_rejected() {
    let ms = MomentSet::new(1.0, 1.0, 10.0, 100.0);
    let recs = records_from(&[(1.0, 1.0, 1.0)]);
    let r = fluctuation_report(&recs, &ms, 10, law(), &LlnTolerances::default(), &HistogramSpec::default());
    assert!(matches!(r, Err(Error::InadmissibleMeasure(_))));
}

#[test]
fn five_point_lln_and_exponent() {
    let m = five_point();
    let ms = m.moments();
    let plan = ChainPlan::new(26_000, 1_000, 1);
    let run = run_parallel(&m, 1000, 4, &plan, 99).unwrap();
    assert_eq!(run.records.len(), 100_000);
    let lln = lln_check(&run.records, &ms, 1000, &LlnTolerances::default());
    assert!((lln.mean_triple[1] / 2.0 - 1.0).abs() < 0.02, "{lln:?}");
    assert!((lln.mean_triple[2] / 6.8 - 1.0).abs() < 0.02, "{lln:?}");

    let pairs: Vec<(f64, f64)> = [250usize, 500, 1000, 2000]
        .iter()
        .map(|&n| {
            let plan = ChainPlan::new(10_000, 1_000, 1);
            let run = run_parallel(&m, n, 4, &plan, 1234 + n as u64).unwrap();
            let mean = run.records.iter().map(|r| r.s.abs()).sum::<f64>() / run.records.len() as f64;
            (n as f64, mean)
        })
        .collect();
    let slope = exponent_fit(&pairs).unwrap();
    assert!((0.76..=0.92).contains(&slope), "{slope} {pairs:?}");
}

#[test]
fn triple_density_integrates_to_one_for_truncated_quartic() {
    let m = Measure::density(LogDensity::ExpQuartic, -2.0, 2.0, 512).unwrap();
    let res = integrate_triple_density(&m, &TripleBox::covering(2.0), 400).unwrap();
    assert!((res.integral - 1.0).abs() < 0.01, "{res:?}");
    assert_eq!(res.masked, 0);
}
