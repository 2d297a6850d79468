mod common;

use common::{end_to_end, end_to_end_expected_fine, task_taxonomy};

#[test]
fn classify_ensemble_score_matches_closed_form() {
    let run = end_to_end(4);
    assert_eq!(run.report.documents, 30);
    let want = end_to_end_expected_fine(&task_taxonomy(), &run.docs);
    assert!((run.report.f1_samples_fine - want).abs() < 1e-12);
    assert!((run.report.f1_coarse - 1.0).abs() < 1e-12);
    assert!(run.report.missing_predictions.is_empty());
}

#[test]
fn outputs_are_byte_identical_across_parallelism() {
    let base = end_to_end(1).bytes();
    for p in [4, 8] {
        assert_eq!(end_to_end(p).bytes(), base, "parallelism {p}");
    }
}
