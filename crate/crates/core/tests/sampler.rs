use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use sextic_core::interaction::{self, Interaction};
use sextic_core::sampler::{enumerate_exact, run, run_parallel, tv_distance, ChainPlan, ChainState, ExactLaw};
use sextic_core::{LogDensity, Measure, SummaryTriple, TriplePoint};

fn five_point() -> Measure {
    Measure::discrete(&[(-2.0, 0.2), (-1.0, 0.2), (0.0, 0.2), (1.0, 0.2), (2.0, 0.2)]).unwrap()
}

fn exp_quartic() -> Measure {
    Measure::density(LogDensity::ExpQuartic, -4.0, 4.0, 2048).unwrap()
}

fn s_values(records: &[sextic_core::SampleRecord]) -> Vec<f64> {
    records.iter().map(|r| r.s).collect()
}

#[test]
fn incremental_log_ratio_matches_fresh_evaluation() {
    let m = exp_quartic();
    let chain = ChainState::new(&m, 50, 3).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
    for _ in 0..1000 {
        let i = rng.random_range(0..chain.n);
        let x = m.draw_one(&mut rng);
        let incremental = chain.proposed_sums(i, x);
        let mut cfg = chain.config.clone();
        cfg[i] = x;
        let fresh = SummaryTriple::of(&cfg);
        assert!((incremental.s - fresh.s).abs() < 1e-12 * fresh.t.sqrt());
        assert!((incremental.t - fresh.t).abs() < 1e-12 * fresh.t);
        assert!((incremental.u - fresh.u).abs() < 1e-12 * fresh.u);
        let h_new = interaction::h(TriplePoint::new(fresh.s, fresh.t, fresh.u)).unwrap();
        let h_old = chain.log_target();
        let dh = Interaction::Candidate.on_sums(incremental.s, incremental.t, incremental.u) - h_old;
        assert!((dh - (h_new - h_old)).abs() < 1e-12 * (1.0 + h_new.abs()));
    }
}

#[test]
fn cached_sums_do_not_drift() {
    let m = exp_quartic();
    let mut chain = ChainState::new(&m, 100, 21).unwrap();
    for _ in 0..10_000 {
        chain.sweep(&m);
        assert!(chain.drift() < 1e-9);
    }
}

#[test]
fn mirrored_chain_is_sign_flipped() {
    let m = five_point();
    let mut a = ChainState::new(&m, 40, 77).unwrap();
    let mut b = ChainState::new(&m, 40, 77).unwrap();
    b.config = a.config.iter().map(|x| -x).collect();
    b.refresh();
    for _ in 0..500 {
        a.sweep_with(|rng| m.draw_one(rng));
        b.sweep_with(|rng| -m.draw_one(rng));
        assert_eq!(a.sums.s, -b.sums.s);
        assert!(a.config.iter().zip(&b.config).all(|(x, y)| *x == -*y));
    }
    assert_eq!(a.stats, b.stats);
}

#[test]
fn records_lie_in_the_moment_cone() {
    let m = exp_quartic();
    let n = 300;
    let run = run_parallel(&m, n, 2, &ChainPlan::new(2000, 0, 1), 5).unwrap();
    let nf = n as f64;
    for r in &run.records {
        assert!(r.t > 0.0);
        assert!(r.s * r.s <= nf * r.t * (1.0 + 1e-12));
        assert!(r.t * r.t <= nf * r.u * (1.0 + 1e-12));
    }
}

fn mcmc_tv(m: &Measure, n: usize, sweeps: u64, seed: u64) -> (f64, ExactLaw) {
    let exact = enumerate_exact(m, n, Interaction::Candidate).unwrap();
    let run = run_parallel(m, n, 4, &ChainPlan::new(sweeps / 4 + 1000, 1000, 1), seed).unwrap();
    (tv_distance(&s_values(&run.records), &exact.s_marginal), exact)
}

#[test]
fn single_site_stationary_law() {
    let m = five_point();
    let (tv, exact) = mcmc_tv(&m, 1, 400_000, 8);
    assert!(exact.s_marginal.iter().all(|&(s, _)| s != 0.0));
    let w1 = interaction::h(TriplePoint::new(1.0, 1.0, 1.0)).unwrap().exp();
    let w2 = interaction::h(TriplePoint::new(2.0, 4.0, 16.0)).unwrap().exp();
    let p1 = w1 / (2.0 * (w1 + w2));
    let got = exact.s_marginal.iter().find(|(s, _)| *s == 1.0).unwrap().1;
    assert!((got - p1).abs() < 1e-14);
    assert!(tv < 0.01, "{tv}");
}

#[test]
fn two_site_two_atom_stationary_law() {
    let m = Measure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let (tv, exact) = mcmc_tv(&m, 2, 400_000, 9);
    let e = (25.0f64 / 24.0).exp();
    let p0 = exact.s_marginal.iter().find(|(s, _)| *s == 0.0).unwrap().1;
    assert!((p0 - 1.0 / (1.0 + e)).abs() < 1e-15);
    assert!(tv < 0.01, "{tv}");
}

#[test]
fn six_site_five_point_matches_enumeration() {
    let (tv, exact) = mcmc_tv(&five_point(), 6, 1_000_000, 2024);
    assert!(tv < 0.01, "{tv}");
    assert!(exact.z >= 1.0 && exact.z <= 6f64.exp());
}

#[test]
fn runs_are_deterministic_and_parallel_equals_serial() {
    let m = five_point();
    let plan = ChainPlan::new(300, 50, 2);
    let a = run_parallel(&m, 30, 4, &plan, 100).unwrap();
    let b = run_parallel(&m, 30, 4, &plan, 100).unwrap();
    assert_eq!(a, b);
    let mut serial = Vec::new();
    for id in 0..4u32 {
        let mut c = ChainState::new(&m, 30, 100 + id as u64).unwrap();
        serial.extend(run(&mut c, &m, id, &plan).unwrap());
    }
    assert_eq!(a.records, serial);
    assert_eq!(a.seeds, vec![100, 101, 102, 103]);
    let one = run_parallel(&m, 30, 1, &plan, 100).unwrap();
    assert_eq!(one.records, serial[..one.records.len()]);
}

#[test]
fn initial_configuration_follows_the_law_of_large_numbers() {
    let m = exp_quartic();
    let n = 10_000;
    let c = ChainState::new(&m, n, 1).unwrap();
    let s2 = m.moments().sigma2;
    assert!((c.sums.t / (n as f64 * s2) - 1.0).abs() < 0.05);
    let fresh = SummaryTriple::of(&c.config);
    assert_eq!(fresh, c.sums);
}

#[test]
fn stationary_second_moment_at_n_1000() {
    let m = exp_quartic();
    let ms = m.moments();
    let mut c = ChainState::new(&m, 1000, 17).unwrap();
    let recs = run(&mut c, &m, 0, &ChainPlan::new(100_000, 1000, 1)).unwrap();
    let mean_t = recs.iter().map(|r| r.t).sum::<f64>() / recs.len() as f64 / 1000.0;
    assert!((mean_t / ms.sigma2 - 1.0).abs() < 0.02, "{mean_t}");
}

/// Asymptotic two-sample Kolmogorov-Smirnov p-value.
fn ks_two_sample_p(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn pooled_chains_agree_with_one_long_chain() {
    let m = five_point();
    let n = 200;
    let pooled = run_parallel(&m, n, 8, &ChainPlan::new(42_000, 2_000, 20), 300).unwrap();
    let mut long = ChainState::new(&m, n, 999).unwrap();
    let single = run(&mut long, &m, 0, &ChainPlan::new(322_000, 2_000, 20)).unwrap();
    assert_eq!(pooled.records.len(), single.len());
    let p = ks_two_sample_p(&s_values(&pooled.records), &s_values(&single));
    assert!(p > 0.01, "{p}");
}

fn symmetric_discrete() -> impl Strategy<Value = (Vec<(f64, f64)>, bool)> {
    (
        prop::collection::vec((0.2f64..2.5, 0.05f64..1.0), 1..=3),
        any::<bool>(),
        0.05f64..1.0,
    )
        .prop_map(|(pairs, zero, wz)| {
            let mut atoms = Vec::new();
            for (x, w) in &pairs {
                atoms.push((-x, *w));
                atoms.push((*x, *w));
            }
            if zero {
                atoms.push((0.0, wz));
            }
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            (atoms.into_iter().map(|(x, w)| (x, w / total)).collect(), zero)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_function_bounds((atoms, has_zero) in symmetric_discrete(), n in 1usize..=6) {
        let Ok(m) = Measure::discrete(&atoms) else { return Ok(()); };
        let law = enumerate_exact(&m, n, Interaction::Candidate).unwrap();
        let nf = n as f64;
        prop_assert!(law.z >= law.p_positive * (1.0 - 1e-12));
        if !has_zero {
            prop_assert!(law.z >= 1.0 - 1e-12);
        }
        prop_assert!(law.z <= (nf / 2.0 + nf * nf / 12.0).exp() * (1.0 + 1e-12));
        let total: f64 = law.s_marginal.iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for w in law.s_marginal.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
        }
        let mirrored: f64 = law.s_marginal.iter().map(|&(s, p)| {
            let q = law.s_marginal.iter().find(|(t, _)| (t + s).abs() < 1e-9).map_or(0.0, |x| x.1);
            (p - q).abs()
        }).sum();
        prop_assert!(mirrored < 1e-12);
    }
}
