#![allow(clippy::needless_range_loop)]

mod common;

use num_bigint::BigUint;
use perclab::env::EnvironmentSample;
use perclab::labels::{estimate_pk, label_intervals};
use perclab::pmf::{build_pmf, DistributionSpec, IntegerPmf};
use perclab::proof::*;
use perclab::renewal::{fc, Renewal};
use perclab::scales::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scale_inequalities_random_a(a in 1.0001f64..=50.0) {
        let rows = verify_scale_inequalities(a, 10).unwrap();
        for r in &rows {
            prop_assert!(r.pass != Some(false), "A={a} k={} {}", r.k, r.id.name());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn labels_match_recursive_oracle(
        weights in prop::collection::vec(0.0f64..1.0, 9),
        delay in 0u64..10,
        seed in any::<u64>(),
    ) {
        let values: Vec<u64> = (1..=9).collect();
        let mut w = weights;
        w[0] += 0.05;
        let ren = Renewal::new(build_pmf(&DistributionSpec::Table { values, weights: w }).unwrap());
        let scales = ScaleTable::new(3.0, 3).unwrap();
        let window = 2 * 729;
        let mut s = perclab::rng::derive_stream(seed, "labels", 0);
        let mut gaps = Vec::new();
        let mut x = delay;
        while x < window {
            let g = ren.sample_xi(&mut s);
            gaps.push(g);
            x += g;
        }
        let env = EnvironmentSample::from_gaps(delay, gaps).unwrap();
        let grid = label_intervals(&env, &scales, 0, 2, window).unwrap();
        let lens = [3u64, 27, 729];
        let kids = [1u64, 9, 27];
        let mut oracle = common::LabelOracle::new(&env.points, &lens, &kids, 0);
        for k in 0..=2 {
            for i in 0..window / lens[k] {
                prop_assert_eq!(grid.is_bad(k, i), oracle.bad(k, i), "k={} i={}", k, i);
            }
        }
    }
}

#[test]
fn label_definition_cases() {
    let scales = ScaleTable::new(4.0, 1).unwrap();
    // L0 = 4, 16 children per scale-1 interval; renewals skip children 0,1 or 0,2
    let grid_for = |skip: &[u64]| {
        let pts: Vec<u64> = (0..16).filter(|i| !skip.contains(i)).map(|i| 4 * i).collect();
        let gaps: Vec<u64> = pts.windows(2).map(|w| w[1] - w[0]).chain([64]).collect();
        let env = EnvironmentSample::from_gaps(pts[0], gaps).unwrap();
        label_intervals(&env, &scales, 0, 1, 64).unwrap()
    };
    assert!(!grid_for(&[0, 1]).is_bad(1, 0));
    assert!(grid_for(&[0, 2]).is_bad(1, 0));
    assert!(!grid_for(&[]).is_bad(1, 0));
}

#[test]
fn scale_table_integer_oracle() {
    let t = ScaleTable::new(9216.0, 6).unwrap();
    assert_eq!(t.l, common::integer_scales(9216, 6));
    let t = ScaleTable::new(3.0, 5).unwrap();
    assert_eq!(t.l, common::integer_scales(3, 5));
}

#[test]
fn scale_table_examples() {
    let t = scale_table(2.5, 3).unwrap();
    let want: Vec<BigUint> = [2u32, 12, 180, 7020].iter().map(|&x| BigUint::from(x)).collect();
    assert_eq!(t.l, want);
    let t = scale_table(2.0, 1).unwrap();
    assert_eq!(t.l[1], BigUint::from(8u32));
    let r0 = 2.0 * 4f64.ln() / (2.0 * 2.5f64.ln() - 2.0 * 2f64.ln()) + 3.0;
    assert!((r_k(0, 2.5) - r0).abs() < 1e-12);
}

#[test]
fn scale_inequalities_fixed_a() {
    let a = compute_a(0.99, 18.0).unwrap();
    for (a, kmax) in [(a, 6), (2.5, 10), (1.0001, 5)] {
        let rows = verify_scale_inequalities(a, kmax).unwrap();
        assert!(rows.iter().all(|r| r.pass != Some(false)), "A={a}");
        assert!(inequality_csv(&rows).starts_with("k,inequality,pass,margin\n"));
    }
}

#[test]
fn compute_a_examples() {
    let c = (32.0 * 10f64.ln()).sqrt();
    assert!((compute_a(0.5, c).unwrap() - 5.0).abs() < 1e-12);
    let a = compute_a(0.99, 18.0).unwrap();
    assert!((a - 0.99 * (18.0f64 * 18.0 / 32.0).exp()).abs() < 1e-9 && (a - 2.47e4).abs() < 100.0);
    assert!(compute_a(1.0, 18.0).is_err());
    assert!(compute_a((-(18.0f64 * 18.0) / 32.0).exp() * 0.999, 18.0).is_err());
}

#[test]
fn alpha_mu_selection() {
    let am = find_alpha_mu(18.0).unwrap();
    assert!(w_alpha_mu(am.alpha, am.mu) < 18.0);
    let a = compute_a(am.alpha, 18.0).unwrap();
    assert!(am.mu / 2.0 * a.ln() > LN_96);
    assert!((w_alpha_mu(0.99, 0.99) - 17.19).abs() < 0.01);
    assert!(find_alpha_mu(17.0).is_err());
    let far = find_alpha_mu(60.0).unwrap();
    assert!(far.alpha > 0.9 && far.mu > 0.9);
}

#[test]
fn heights_log_space_oracle() {
    let t = ScaleTable::new(9216.0, 3).unwrap();
    let beta = 0.995;
    let h = HeightTable::new(beta, &t, 2, None).unwrap();
    assert_eq!(h.h_log[0], 100f64.ln());
    let mut want = 100f64.ln();
    for k in 1..=2u32 {
        let ln_l = f64::from((k + 1) * (k + 2) / 2) * 9216f64.ln();
        want += std::f64::consts::LN_2 + ((1.0 - beta / f64::from(k + 1)) * ln_l).exp();
        assert!((h.h_log[k as usize] - want).abs() <= 1e-12 * want, "k={k}");
    }
    let toy = HeightTable::new(0.9, &t, 1, Some(10.0)).unwrap();
    assert_eq!(toy.h(1), Some(2 * 22027 * 100));
}

#[test]
fn pk_examples() {
    let pk = 1e-3;
    let want = 0.5 * 3f64.powi(6) * (pk * pk + 1.0 / fc(2.0, 27.0));
    assert!((pk_recursion_rhs(pk, 1.0, 3.0, 1, 27.0, 2.0) - want).abs() < 1e-15 * want);
    assert_eq!(pk_recursion_rhs(0.0, 0.0, 3.0, 1, 27.0, 2.0), 0.0);
    let d = pk_recursion_rhs(pk, 2.0, 3.0, 1, 27.0, 2.0) - pk_recursion_rhs(pk, 1.0, 3.0, 1, 27.0, 2.0);
    assert!((d - 3f64.powi(6) / (2.0 * fc(2.0, 27.0))).abs() < 1e-12);
    assert_eq!(pk_bound(18.0, 1.0), 1.0);
    assert!((pk_bound(2.0, 4f64.exp()) - (-2f64).exp()).abs() < 1e-15);
    assert!((pk_bound(18.0, 9216.0) - (-9.0 * 9216f64.ln().sqrt()).exp()).abs() < 1e-20);
}

#[test]
fn pk_estimates() {
    let scales = ScaleTable::new(3.0, 4).unwrap();
    let one = Renewal::new(build_pmf(&DistributionSpec::Deterministic { d: 1 }).unwrap());
    for e in estimate_pk(&one, &scales, 2, 0, 500, 1).unwrap() {
        assert_eq!(e.p_hat, 0.0);
    }
    // base scale: bad iff rho >= L0
    let law = [(1u64, 0.5), (4, 0.3), (8, 0.2)];
    let ren = Renewal::new(IntegerPmf::from_weights(&law).unwrap());
    let lambda = common::lambda_oracle(&law);
    let exact: f64 = lambda[3..].iter().sum();
    let est = estimate_pk(&ren, &scales, 0, 0, 20_000, 2).unwrap();
    assert!((est[0].p_hat - exact).abs() < 3.0 * est[0].se().max(1e-9) + 1e-12);

    let bl = Renewal::new(build_pmf(&DistributionSpec::BorderlineLog { c: 18.0, eps: 0.5, cutoff: 3 }).unwrap());
    let est = estimate_pk(&bl, &scales, 3, 0, 5_000, 3).unwrap();
    for w in est.windows(2) {
        assert!(w[1].wilson_ci.0 <= w[0].wilson_ci.1, "k={} {:?}", w[1].k, est);
    }
}

/// Direct evaluation of the three k0 displays, summing `ln floor(A^j)` from scratch.
fn k0_oracle(a: f64, c: f64, c1: f64, moment: f64, kmax: u64) -> Option<u64> {
    let s = (2.0 * a.ln()).sqrt();
    let ok = |k: u64| {
        let kf = k as f64;
        let ln_l: f64 = (1..=k + 1).map(|j| if j < 30 { a.powi(j as i32).floor().ln() } else { j as f64 * a.ln() }).sum();
        let r = 2.0 * 4f64.ln() / ((kf + 1.0) * ((kf + 2.0) * a.ln() - 2.0 * 2f64.ln())) + (kf + 3.0) / (kf + 1.0);
        let one = c - 2.0 * ((kf + 2.0) / (kf + 1.0)).sqrt() * s - c / 2.0 * r.sqrt() > c / 4.0 - s && c / 4.0 > s;
        let two = (c / 4.0 - s) * ((kf + 1.0) * (kf + 2.0) / 2.0).sqrt() * a.ln().sqrt() > (16.0 * (c1 + 1.0)).ln();
        let three = moment.ln() <= c / 2.0 * ln_l.sqrt();
        one && two && three
    };
    let mut k0 = None;
    for k in (0..=kmax).rev() {
        if !ok(k) {
            break;
        }
        k0 = Some(k);
    }
    k0
}

#[test]
fn k0_matches_direct_evaluation() {
    let params = MultiscaleParams { c: 18.0, alpha: 0.99, beta: 0.995, mu: 0.99, toy_a: None, height_cap: None };
    let a = params.a().unwrap();
    for (c1, moment) in [(10.0, 5.0), (1e3, 1e3)] {
        let rep = check_k0_conditions(&params, c1, moment, 12_000).unwrap();
        assert_eq!(rep.k0, k0_oracle(a, 18.0, c1, moment, 12_000));
        assert!(rep.k0.is_some());
        assert!(rep.monotonicity_violations.is_empty(), "{:?}", rep.monotonicity_violations);
        let short = check_k0_conditions(&params, c1, moment, rep.k0.unwrap() - 1).unwrap();
        assert_eq!(short.k0, None);
        assert_eq!(short.rows.len() as u64, rep.k0.unwrap());
    }
    // c/4 <= sqrt(2 ln A): condition one never holds
    let low = MultiscaleParams { toy_a: Some(1e4), ..params };
    let c_small = MultiscaleParams { c: 10.0, ..low };
    let rep = check_k0_conditions(&c_small, 10.0, 5.0, 50).unwrap();
    assert!(rep.rows.iter().all(|r| !r.cond1));
}

#[test]
fn tail_sums_and_ladder() {
    let (a, mu) = (9216.0, 0.95);
    let (k4, t) = minimal_k4(a, mu, 16, 64).unwrap().unwrap();
    assert_eq!(k4, 1);
    assert!(t.ln_total < -1e5 && t.value < 0.5);
    let lad = ladder_lower_bound(a, mu, 1, 16).unwrap();
    assert!(lad.bound >= 1.0 - 1e-12 && lad.bound_exact_scales >= lad.bound - 1e-15);

    let (k4_small, _) = minimal_k4(1.5, 0.5, 64, 200).unwrap().unwrap();
    assert!(k4_small > 1);
    let terms: Vec<f64> = (k4_small..k4_small + 50).map(|k| ln_tail_term(1.5, 0.5, k)).collect();
    assert!(terms.windows(2).all(|w| w[1] < w[0]));
    assert!(ln_tail_term(9216.0, 0.95, 40).exp() == 0.0);

    // monotone in the cutoff
    for a in [1.5, 3.0, 9216.0] {
        let sums: Vec<f64> = (1..12).map(|k| tail_sum_k4(a, 0.5, k, 24).unwrap().ln_total).collect();
        assert!(sums.windows(2).all(|w| w[1] <= w[0]), "A={a}");
        let lads: Vec<f64> = (1..12).map(|k| ladder_lower_bound(a, 0.5, k, 24).unwrap().bound).collect();
        assert!(lads.windows(2).all(|w| w[1] >= w[0]), "A={a}");
    }
    // past the horizon: one explicit term, then the remainder
    let t = tail_sum_k4(3.0, 0.5, 30, 10).unwrap();
    assert_eq!(t.remainder_from, 31);
    assert_eq!(t.ln_partial, ln_tail_term(3.0, 0.5, 30));
    let l = ladder_lower_bound(3.0, 0.5, 30, 10).unwrap();
    assert!((l.bound - (1.0 - t.value)).abs() < 1e-15);
}

#[test]
fn corollary_union_bounds_reported() {
    let a = compute_a(0.99, 18.0).unwrap();
    let rep = corollary_union_bounds(a, 18.0, 1, 6);
    assert_eq!(rep.rows.len(), 6);
    assert!(rep.lower_bound <= 1.0);
}

#[test]
fn decoupling_gap_matches_enumeration() {
    use perclab::decouple::{decoupling_gap, Event};
    use perclab::renewal::{aperiodic_lift, WeightFunction};
    let base = build_pmf(&DistributionSpec::UniformRange { a: 2, b: 3 }).unwrap();
    let lift = aperiodic_lift(&base, WeightFunction::new(2.0).unwrap()).unwrap();
    let law: Vec<(u64, f64)> = lift.lifted.atoms(16).into_iter().map(|v| (v, lift.lifted.mass(v))).collect();
    let (pa, pb, pab) = common::zero_pair(&law, 0, 4);
    let ren = Renewal::new(lift.lifted.clone());
    let r = decoupling_gap(&ren, 0, 2, &Event::zero_at(0), &Event::zero_at(4), 200_000, 3, 2.0, 1.0).unwrap();
    let se = |p: f64| (p * (1.0 - p) / 200_000.0).sqrt();
    assert!((r.p_a - pa).abs() < 4.0 * se(pa));
    assert!((r.p_b - pb).abs() < 4.0 * se(pb));
    assert!((r.p_ab - pab).abs() < 4.0 * se(pab));
    assert!((r.gap - (pab - pa * pb)).abs() < 4.0 * r.se, "gap {} exact {}", r.gap, pab - pa * pb);
}
