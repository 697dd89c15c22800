use freeshap::applications::{correlate, detection_curve, removal_curve, Direction, DETECTION_GRID};
use freeshap::robustness::{theorem_bounds, Coverage, PointSigns, ProtocolMethod, SignProtocolResult};
use freeshap::shapley::{MarginalProfile, ProfileEntry};
use freeshap::{synth_kernel, DistributionSpec, EngineConfig, KernelGame, KernelStore, LabeledDataset, Method, ScoreTable, SynthKernel, Target};
use proptest::prelude::*;

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

fn non_constant(xs: &[f64]) -> bool {
    xs.iter().any(|&x| x != xs[0])
}

fn world(n: usize) -> (KernelStore, LabeledDataset, LabeledDataset) {
    let dist = DistributionSpec::default();
    let train = dist.sample(n, "t", 1).unwrap();
    let test = dist.without_noise().sample(40, "q", 2).unwrap();
    let store = synth_kernel(&train, &test, SynthKernel::Rbf { bandwidth: 1.0 }).unwrap();
    (store, train, test)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_is_symmetric(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 3..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(non_constant(&a) && non_constant(&b));
        let ab = correlate(&a, &b).unwrap();
        let ba = correlate(&b, &a).unwrap();
        prop_assert!((ab.pearson - ba.pearson).abs() < 1e-12);
        prop_assert!((ab.spearman - ba.spearman).abs() < 1e-12);
        prop_assert!(ab.pearson.abs() <= 1.0 + 1e-12 && ab.spearman.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn correlation_invariances(a in finite_vec(3..40), scale in 0.1..10.0f64, shift in -5.0..5.0f64) {
        prop_assume!(non_constant(&a));
        let affine: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
        let c = correlate(&a, &affine).unwrap();
        prop_assert!((c.pearson - 1.0).abs() < 1e-9);
        prop_assert!((c.spearman - 1.0).abs() < 1e-12);
        // a strictly increasing map keeps the ranks
        let cubed: Vec<f64> = a.iter().map(|x| x * x * x + x).collect();
        prop_assert!((correlate(&a, &cubed).unwrap().spearman - 1.0).abs() < 1e-12);
        let negated: Vec<f64> = a.iter().map(|x| -x).collect();
        prop_assert!((correlate(&a, &negated).unwrap().spearman + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detection_curve_is_monotone_and_complete(
        scores in finite_vec(5..80),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..10),
    ) {
        let n = scores.len();
        let mut flipped: Vec<usize> = picks.iter().map(|p| p.index(n)).collect();
        flipped.sort_unstable();
        flipped.dedup();
        let curve = detection_curve(&ScoreTable::from_scores(scores, Method::Mc), &flipped).unwrap();
        prop_assert_eq!(curve.points.len(), DETECTION_GRID + 1);
        prop_assert_eq!(curve.points[0].found, 0.0);
        prop_assert_eq!(curve.points[DETECTION_GRID].found, 1.0);
        prop_assert!(curve.points.windows(2).all(|w| w[0].found <= w[1].found));
        prop_assert!((curve.baseline_area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sign_rate_is_a_fraction(rows in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 1..7), 1..20)) {
        let points: Vec<PointSigns> = rows
            .into_iter()
            .enumerate()
            .map(|(i, s)| PointSigns::from_scores(format!("p{i}"), s))
            .collect();
        let flagged = points.iter().filter(|p| p.flagged).count();
        let res = SignProtocolResult::from_points(ProtocolMethod::Shapley, points);
        prop_assert!((0.0..=1.0).contains(&res.rate));
        prop_assert!((res.rate * res.points.len() as f64 - flagged as f64).abs() < 1e-9);
    }

    #[test]
    fn bounds_scale_covariantly(
        taus in prop::collection::vec(0.01..1.0f64, 2..10),
        deltas in prop::collection::vec(0.0..1.0f64, 10),
        c in 0.1..10.0f64,
    ) {
        let n = taus.len();
        let make = |ts: f64, ds: f64| MarginalProfile {
            n,
            entries: (0..n)
                .map(|k| ProfileEntry { k, tau: ts * taus[k], delta: ds * deltas[k], samples: 2 })
                .collect(),
        };
        let base = theorem_bounds(&make(1.0, 1.0), Coverage::Full).unwrap();
        let scaled = theorem_bounds(&make(c, c * c), Coverage::Full).unwrap();
        prop_assert!((scaled.shapley - base.shapley).abs() <= 1e-9 * base.shapley.max(1.0));
        prop_assert!((scaled.loo - base.loo).abs() <= 1e-9 * base.loo.max(1.0));
        let wider = theorem_bounds(&make(1.0, c), Coverage::Full).unwrap();
        prop_assert!((wider.shapley - c * base.shapley).abs() <= 1e-9 * (c * base.shapley).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn removal_curve_has_expected_levels(step in 0.01..0.5f64, scores in finite_vec(20..21)) {
        let (store, train, test) = world(20);
        let game = KernelGame::new(&store, &train, &test, &Target::All, EngineConfig::default()).unwrap();
        let table = ScoreTable::from_scores(scores, Method::Mc);
        let curve = removal_curve(&table, Direction::HighFirst, step, &game).unwrap();
        // levels k·step for k up to the first one reaching 1
        let last = (1..).find(|&k| k as f64 * step >= 1.0 - 1e-9).unwrap();
        let expected = (0..=last)
            .filter(|&l| {
                let f = ((l as f64 * step * 1e12).round() / 1e12).min(1.0);
                ((f * 20.0).round() as usize) < 20
            })
            .count();
        prop_assert_eq!(curve.points.len(), expected);
        prop_assert_eq!(curve.points[0].fraction, 0.0);
        prop_assert!(curve.points.iter().all(|p| (0.0..=1.0).contains(&p.accuracy)));
    }
}
