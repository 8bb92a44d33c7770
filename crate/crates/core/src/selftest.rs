//! Embedded property checks backing the `selftest` command.

use serde::{Deserialize, Serialize};

use crate::image::{ImageBuffer, Mask};
use crate::losses::{total_loss, GroupState, LossSpec, PairSet};
use crate::metrics::{psnr, ssim, PSNR_CAP};
use crate::model::{backward_radius, forward_domain_limit, forward_radius, DistortionModel, ModelKind};
use crate::scenes::scene;
use crate::synthesis::{group_rng, synthesize_default};
use crate::warp::{distort, rectify, WarpResult};
use crate::METRIC_EROSION;

const SIZE: usize = 129;

/// Knobs for exercising the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelftestOptions {
    /// Multiplies every forward radius in the round-trip property; anything
    /// other than 1.0 must make it fail.
    pub radial_scale: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { radial_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &str, passed: bool, detail: String) -> PropertyResult {
    PropertyResult { name: name.into(), passed, detail }
}

fn radial_round_trip(opts: &SelftestOptions) -> PropertyResult {
    let mut worst: f64 = 0.0;
    for kind in ModelKind::ALL {
        let range = kind.default_range();
        for i in 0..10 {
            let k = range.k_min + range.width() * i as f64 / 9.0;
            let limit = forward_domain_limit(kind, k).map_or(1.0, |l| l.min(1.0));
            for j in 0..100 {
                let r = limit * 0.999 * j as f64 / 99.0;
                let err = match forward_radius(kind, r, k).and_then(|ru| backward_radius(kind, ru * opts.radial_scale, k)) {
                    Some(back) => (back - r).abs(),
                    None => f64::INFINITY,
                };
                worst = worst.max(err);
            }
        }
    }
    result("radial_round_trip", worst < 1e-6, format!("max error {worst:.3e}"))
}

fn warp_round_trip() -> PropertyResult {
    let mut worst = f64::INFINITY;
    let mut failure = None;
    for (seed, kind) in [(0, ModelKind::Fov), (1, ModelKind::Dm), (2, ModelKind::Ed)] {
        let normal = scene(seed, SIZE);
        let model = DistortionModel::with_default_range(kind);
        let check = (|| {
            let k = model.denormalize(0.5)?;
            let back = rectify(&distort(&WarpResult::full(normal.clone()), &model, k)?, &model, k)?;
            psnr(&back.image, &normal, Some(&back.mask.erode(METRIC_EROSION)))
        })();
        match check {
            Ok(p) => worst = worst.min(p),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    match failure {
        Some(e) => result("warp_round_trip", false, e),
        None => result("warp_round_trip", worst > 30.0, format!("min PSNR {worst:.2} dB")),
    }
}

fn loss_at_truth() -> PropertyResult {
    let spec = LossSpec::intra_inter(PairSet::M4);
    let check = || -> crate::Result<(f64, f64)> {
        let group = synthesize_default(&scene(3, SIZE), &mut group_rng(0, 0))?;
        let inputs = group.inputs();
        let truth = group.true_params();
        let at_truth = total_loss(&GroupState::new(&inputs, group.models, truth)?, &spec)?.total;
        let mut shifted = truth;
        let dm = group.models[ModelKind::Dm.index()];
        let norm = dm.normalize(truth[ModelKind::Dm.index()][0])?;
        let off = if norm > 0.5 { norm - 0.1 } else { norm + 0.1 };
        shifted[ModelKind::Dm.index()][0] = dm.denormalize(off)?;
        let perturbed = total_loss(&GroupState::new(&inputs, group.models, shifted)?, &spec)?.total;
        Ok((at_truth, perturbed))
    };
    match check() {
        Ok((t, p)) => result("loss_at_truth", t < 0.05 && t < p, format!("truth {t:.4}, perturbed {p:.4}")),
        Err(e) => result("loss_at_truth", false, e.to_string()),
    }
}

fn metric_identities() -> PropertyResult {
    let check = || -> crate::Result<bool> {
        let x = scene(4, 48);
        let y = scene(5, 48);
        let a = ImageBuffer::filled(16, 16, 3, 0.2);
        let b = ImageBuffer::filled(16, 16, 3, 0.3);
        let full = Mask::full(48, 48);
        Ok(psnr(&x, &x, None)? == PSNR_CAP
            && (psnr(&a, &b, None)? - 20.0).abs() < 1e-6
            && (ssim(&x, &x, Some(&full))? - 1.0).abs() < 1e-9
            && (ssim(&x, &y, None)? - ssim(&y, &x, None)?).abs() < 1e-9)
    };
    match check() {
        Ok(ok) => result("metric_identities", ok, if ok { "ok".into() } else { "identity violated".into() }),
        Err(e) => result("metric_identities", false, e.to_string()),
    }
}

/// Runs every property; the run passes iff all entries pass.
pub fn run(opts: &SelftestOptions) -> Vec<PropertyResult> {
    vec![radial_round_trip(opts), warp_round_trip(), loss_at_truth(), metric_identities()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_property_detects_corruption() {
        assert!(radial_round_trip(&SelftestOptions::default()).passed);
        let bad = radial_round_trip(&SelftestOptions { radial_scale: 1.001 });
        assert!(!bad.passed);
        assert_eq!(bad.name, "radial_round_trip");
    }
}
