use std::f64::consts::PI;

use proptest::prelude::*;

use propagg::data::{read_profile_csv, write_profile_csv};
use propagg::metrics::{ip_levels, kt_agreement_rankings};
use propagg::model::{
    angular_distance, binomial2, exp_map, log_map, rank_batch, ItemBatch, Profile, Ranking,
    ScoringVector, TieBreak,
};
use propagg::rules::{angular_mean, arithmetic_mean, borda_ranking, psb_ranking, OptimizerOptions};
use propagg::sampling::{sample_batch, ItemDistribution, SeedSpec};

fn unit(dim: usize) -> impl Strategy<Value = ScoringVector> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| ScoringVector::normalize(v).unwrap())
}

fn batch(dim: usize, m: usize) -> impl Strategy<Value = ItemBatch> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), m)
        .prop_map(|rows| ItemBatch::from_rows(&rows).unwrap())
}

fn profile(dim: usize, n: usize) -> impl Strategy<Value = Profile> {
    (
        prop::collection::vec(unit(dim), n),
        prop::collection::vec(0.05f64..1.0, n),
    )
        .prop_map(|(t, w)| {
            let s: f64 = w.iter().sum();
            Profile::new(t, w.iter().map(|x| x / s).collect()).unwrap()
        })
}

/// Pairs ordered the same way by both rankings, counted directly.
fn brute_agreement(a: &Ranking, b: &Ranking) -> usize {
    let (pa, pb) = (a.positions(), b.positions());
    let m = pa.len();
    let mut c = 0;
    for j in 0..m {
        for k in j + 1..m {
            c += usize::from((pa[j] < pa[k]) == (pb[j] < pb[k]));
        }
    }
    c
}

fn rotate(v: &ScoringVector, rho: f64) -> ScoringVector {
    let (c, s) = (rho.cos(), rho.sin());
    let x = v.coords();
    ScoringVector::normalize(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn log_exp_round_trip((u, v) in (2usize..7).prop_flat_map(|d| (unit(d), unit(d)))) {
        prop_assume!(angular_distance(&u, &v).unwrap() < PI - 1e-3);
        let t = log_map(&u, &v).unwrap();
        let back = exp_map(&u, &t).unwrap();
        prop_assert!(angular_distance(&back, &v).unwrap() < 1e-9);
        let len = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((len - angular_distance(&u, &v).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn distance_is_a_metric((a, b, c) in (2usize..6).prop_flat_map(|d| (unit(d), unit(d), unit(d)))) {
        let ab = angular_distance(&a, &b).unwrap();
        let bc = angular_distance(&b, &c).unwrap();
        let ac = angular_distance(&a, &c).unwrap();
        prop_assert!((0.0..=PI).contains(&ab));
        prop_assert_eq!(ab, angular_distance(&b, &a).unwrap());
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(angular_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ranking_ignores_item_scale(
        (theta, x) in (2usize..5).prop_flat_map(|d| (unit(d), (2usize..9).prop_flat_map(move |m| batch(d, m)))),
        k in -4i32..5,
    ) {
        let c = 2f64.powi(k);
        let rows: Vec<Vec<f64>> = x.items().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let scaled = ItemBatch::from_rows(&rows).unwrap();
        prop_assert_eq!(
            rank_batch(&theta, &x, TieBreak::default()).unwrap(),
            rank_batch(&theta, &scaled, TieBreak::default()).unwrap()
        );
    }

    #[test]
    fn agreement_matches_pair_count(
        (a, b, x) in (2usize..5).prop_flat_map(|d| (unit(d), unit(d), (2usize..12).prop_flat_map(move |m| batch(d, m))))
    ) {
        let ra = rank_batch(&a, &x, TieBreak::default()).unwrap();
        let rb = rank_batch(&b, &x, TieBreak::default()).unwrap();
        let k = kt_agreement_rankings(&ra, &rb).unwrap();
        prop_assert_eq!(k, brute_agreement(&ra, &rb));
        prop_assert_eq!(k, kt_agreement_rankings(&rb, &ra).unwrap());
        prop_assert_eq!(kt_agreement_rankings(&ra, &rb.reversed()).unwrap(), binomial2(x.len()) - k);
    }

    #[test]
    fn means_rotate_with_the_profile(p in (2usize..6).prop_flat_map(|n| profile(2, n)), rho in 0.0f64..(2.0 * PI)) {
        let q = p.map_thetas(|t| rotate(t, rho)).unwrap();
        let opts = OptimizerOptions::with_seed(3);
        let (a, _) = angular_mean(&p, &opts).unwrap();
        let (b, diag) = angular_mean(&q, &opts).unwrap();
        prop_assert!(diag.converged);
        // With several global minimizers either may be returned; compare objectives then.
        let fa = propagg::rules::angular_objective(&p, &a);
        let fb = propagg::rules::angular_objective(&q, &b);
        prop_assert!((fa - fb).abs() < 1e-9);
        if let (Ok(am), Ok(bm)) = (arithmetic_mean(&p), arithmetic_mean(&q)) {
            prop_assert!(angular_distance(&rotate(&am, rho), &bm).unwrap() < 1e-9);
        }
    }

    #[test]
    fn psb_weights_only_decrease(
        (p, x) in (2usize..5).prop_flat_map(|d| ((1usize..5).prop_flat_map(move |n| profile(d, n)), (2usize..9).prop_flat_map(move |m| batch(d, m))))
    ) {
        let (r, state) = psb_ranking(&p, &x).unwrap();
        let mut sorted = r.order().to_vec();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..x.len()).collect::<Vec<_>>());
        let mut prev = p.alphas().to_vec();
        for w in state.weight_history.iter().chain(std::iter::once(&state.residual_weights)) {
            for (a, b) in w.iter().zip(&prev) {
                prop_assert!(*a >= 0.0 && *a <= *b + 1e-15);
            }
            prev = w.clone();
        }
    }

    #[test]
    fn borda_single_voter_is_that_voter(
        (t, x) in (2usize..5).prop_flat_map(|d| (unit(d), (2usize..9).prop_flat_map(move |m| batch(d, m))))
    ) {
        let p = Profile::uniform(vec![t.clone()]).unwrap();
        let b = borda_ranking(&p, &x).unwrap();
        let r = rank_batch(&t, &x, TieBreak::default()).unwrap();
        prop_assert_eq!(b.order(), r.order());
    }

    #[test]
    fn ip_levels_scale_agreement_counts(
        (p, x) in (2usize..5).prop_flat_map(|d| ((1usize..5).prop_flat_map(move |n| profile(d, n)), (2usize..9).prop_flat_map(move |m| batch(d, m))))
    ) {
        // α_i C(m,2) IP_i recovers voter i's pair agreement count.
        let r = borda_ranking(&p, &x).unwrap();
        let s = ip_levels(&r, &p, &x).unwrap();
        let pairs = binomial2(x.len()) as f64;
        for ((t, a), ip) in p.thetas().iter().zip(p.alphas()).zip(&s.per_voter_ip) {
            let k = brute_agreement(&r, &rank_batch(t, &x, TieBreak::default()).unwrap()) as f64;
            prop_assert!((ip * a * pairs - k).abs() < 1e-9);
        }
        prop_assert_eq!(s.min_ip, s.per_voter_ip.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn profile_csv_round_trips_exactly(p in (2usize..6).prop_flat_map(|d| (1usize..6).prop_flat_map(move |n| profile(d, n)))) {
        let mut buf = Vec::new();
        write_profile_csv(&p, &["note".to_string()], &mut buf).unwrap();
        let back = read_profile_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn batches_are_reproducible(seed in any::<u64>(), idx in 0u64..1000, m in 2usize..10) {
        let dist = ItemDistribution::uniform_sphere(3);
        let a = sample_batch(&dist, m, SeedSpec::new(seed, 0), idx).unwrap();
        let b = sample_batch(&dist, m, SeedSpec::new(seed, 0), idx).unwrap();
        prop_assert_eq!(a, b);
    }
}
