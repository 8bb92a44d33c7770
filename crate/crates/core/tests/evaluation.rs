mod common;

use common::groups;
use rectilens::estimator::OptimizerConfig;
use rectilens::metrics::{evaluate_matrix, EvalMethod};
use rectilens::synthesis::DistortionGroup;
use rectilens::ModelKind;

#[test]
fn oracle_diagonal_is_sharp() {
    let gs = groups(5, 129);
    let report = evaluate_matrix(&gs, &EvalMethod::Oracle { config: OptimizerConfig::default() }, true).unwrap();
    for kind in ModelKind::ALL {
        let cell = report.cell(kind, kind).unwrap();
        assert_eq!((cell.n, cell.failures), (10, 0));
        assert!(cell.psnr_mean > 28.0, "{kind}: {}", cell.psnr_mean);
    }
    for kind in ModelKind::ALL {
        let row: Vec<f64> = ModelKind::ALL.iter().map(|&t| report.cell(kind, t).unwrap().psnr_mean).collect();
        let avg = report.average(kind).unwrap();
        assert!((avg.psnr_mean - row.iter().sum::<f64>() / 3.0).abs() < 1e-9);
    }
    assert_eq!(report.records.len(), 5 * 3 * 3 * 2);
    assert_eq!(report.to_csv().lines().filter(|l| !l.starts_with('#')).count(), 1 + 9 + 3);
}

#[test]
fn single_image_sets_are_well_formed() {
    let g = groups(1, 97).remove(0);
    let single = DistortionGroup { items: g.items.iter().filter(|it| it.slot == 1).cloned().collect(), ..g };
    let report = evaluate_matrix(&[single], &EvalMethod::Supervised { config: OptimizerConfig::default() }, true).unwrap();
    for row in ModelKind::ALL {
        for test in ModelKind::ALL {
            let cell = report.cell(row, test).unwrap();
            assert_eq!(cell.n, 1);
            assert!(cell.psnr_mean.is_finite());
        }
    }
}

#[test]
fn full_frame_scores_lower_than_masked() {
    let gs = groups(2, 97);
    let method = EvalMethod::Oracle { config: OptimizerConfig::default() };
    let masked = evaluate_matrix(&gs, &method, true).unwrap();
    let full = evaluate_matrix(&gs, &method, false).unwrap();
    assert!(masked.header.masked && !full.header.masked);
    let dm = ModelKind::Dm;
    assert!(full.cell(dm, dm).unwrap().psnr_mean < masked.cell(dm, dm).unwrap().psnr_mean);
}
