use passby::eval::{self, EvalReport};
use proptest::prelude::*;

fn times() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u32..2000).prop_map(|t| t as f64 * 0.05), 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn counts_are_consistent(det in times(), truth in times(), tol in 0.1f64..3.0) {
        let r = eval::report(&det, &truth, tol).unwrap();
        prop_assert_eq!(r.efficacy_eta, r.events_e - r.false_negatives_n);
        prop_assert_eq!(r.efficacy_eta, r.detections_d - r.false_positives_p);
        prop_assert_eq!(r.detections_d, det.len());
        prop_assert_eq!(r.events_e, truth.len());
    }

    #[test]
    fn swapping_roles_swaps_errors(det in times(), truth in times(), tol in 0.1f64..3.0) {
        let a = eval::match_events(&det, &truth, tol).unwrap();
        let b = eval::match_events(&truth, &det, tol).unwrap();
        prop_assert_eq!(&a.unmatched_detections, &b.unmatched_truth);
        prop_assert_eq!(&a.unmatched_truth, &b.unmatched_detections);
        prop_assert_eq!(a.pairs.len(), b.pairs.len());
    }

    #[test]
    fn input_order_does_not_matter(
        det in times(),
        truth in times(),
        tol in 0.1f64..3.0,
        rot in 0usize..40,
    ) {
        let a = eval::match_events(&det, &truth, tol).unwrap();
        let mut d2 = det.clone();
        d2.reverse();
        if !d2.is_empty() {
            let r = rot % d2.len();
            d2.rotate_left(r);
        }
        let mut t2 = truth.clone();
        t2.reverse();
        let b = eval::match_events(&d2, &t2, tol).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pairs_respect_tolerance(det in times(), truth in times(), tol in 0.1f64..3.0) {
        let m = eval::match_events(&det, &truth, tol).unwrap();
        for p in &m.pairs {
            prop_assert!((p.detection_s - p.truth_s).abs() <= tol);
        }
        // nothing left over could still be paired
        for d in &m.unmatched_detections {
            for t in &m.unmatched_truth {
                prop_assert!((d - t).abs() > tol);
            }
        }
    }
}

#[test]
fn exact_matches_score_perfectly() {
    let t = [3.0, 10.0, 17.5];
    let r = eval::report(&t, &t, 2.0).unwrap();
    assert_eq!(
        (r.false_positives_p, r.false_negatives_n, r.efficacy_eta),
        (0, 0, 3)
    );
}

#[test]
fn one_detection_cannot_serve_two_events() {
    let m = eval::match_events(&[10.0], &[9.5, 10.7], 2.0).unwrap();
    assert_eq!(m.pairs.len(), 1);
    assert_eq!(m.pairs[0].truth_s, 9.5);
    assert_eq!(m.unmatched_truth, vec![10.7]);
}

#[test]
fn reference_counts_to_percentages() {
    let r = EvalReport::from_counts(141, 139, 6, 8, 2.0).unwrap();
    let p = r.ratios.unwrap();
    let got: Vec<String> = [
        p.detections,
        p.false_positives,
        p.false_negatives,
        p.efficacy,
    ]
    .iter()
    .map(|v| format!("{v:.2}"))
    .collect();
    assert_eq!(got, ["98.58", "4.26", "5.67", "94.33"]);
    assert_eq!(r.efficacy_eta, 133);
}
