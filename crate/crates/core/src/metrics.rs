//! PSNR/SSIM scoring and the cross-model evaluation matrix.
//!
//! Both metrics treat RGB channels independently and average them; the
//! peak value is 1.0.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_group, estimate_supervised, OptimizerConfig};
use crate::image::{ImageBuffer, Mask};
use crate::losses::{GroupInputs, LossSpec};
use crate::model::{DistortionModel, ModelKind};
use crate::synthesis::DistortionGroup;
use crate::warp::{rectify, WarpResult};
use crate::METRIC_EROSION;

/// Reported for identical inputs instead of `+∞`.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_pair(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&Mask>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    if let Some(m) = mask {
        if !m.matches(a) {
            return Err(Error::ShapeMismatch("mask does not match images".into()));
        }
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over the masked pixels.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&Mask>) -> Result<f64> {
    check_pair(a, b, mask)?;
    let ch = a.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, (pa, pb)) in a.data().chunks_exact(ch).zip(b.data().chunks_exact(ch)).enumerate() {
        if mask.is_none_or(|m| m.bits()[p]) {
            n += ch;
            sum += pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Gaussian-weighted sum over every full window ("valid" convolution).
fn filter_valid(plane: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let oh = h - SSIM_WINDOW + 1;
    let ow = w - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for v in 0..h {
        for u in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * plane[v * w + u + t];
            }
            rows[v * ow + u] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for v in 0..oh {
        for u in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * rows[(v + t) * ow + u];
            }
            out[v * ow + u] = acc;
        }
    }
    out
}

/// Which full windows contain only valid pixels.
fn window_validity(mask: Option<&Mask>, h: usize, w: usize) -> Vec<bool> {
    let oh = h - SSIM_WINDOW + 1;
    let ow = w - SSIM_WINDOW + 1;
    let Some(mask) = mask else { return vec![true; oh * ow] };
    let mut integral = vec![0usize; (h + 1) * (w + 1)];
    for v in 0..h {
        for u in 0..w {
            integral[(v + 1) * (w + 1) + u + 1] = usize::from(!mask.get(v, u)) + integral[v * (w + 1) + u + 1]
                + integral[(v + 1) * (w + 1) + u]
                - integral[v * (w + 1) + u];
        }
    }
    let mut out = vec![false; oh * ow];
    for v in 0..oh {
        for u in 0..ow {
            let (y1, x1) = (v + SSIM_WINDOW, u + SSIM_WINDOW);
            let bad = integral[y1 * (w + 1) + x1] + integral[v * (w + 1) + u]
                - integral[v * (w + 1) + x1]
                - integral[y1 * (w + 1) + u];
            out[v * ow + u] = bad == 0;
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5).
///
/// Windows touching a masked-out pixel are skipped.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&Mask>) -> Result<f64> {
    check_pair(a, b, mask)?;
    let (h, w, ch) = (a.height(), a.width(), a.channels());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { height: h, width: w, window: SSIM_WINDOW });
    }
    let kernel = gaussian_kernel();
    let valid = window_validity(mask, h, w);
    let count = valid.iter().filter(|&&v| v).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mut total = 0.0;
    for c in 0..ch {
        let pa: Vec<f64> = (0..h * w).map(|p| a.data()[p * ch + c]).collect();
        let pb: Vec<f64> = (0..h * w).map(|p| b.data()[p * ch + c]).collect();
        let aa: Vec<f64> = pa.iter().map(|x| x * x).collect();
        let bb: Vec<f64> = pb.iter().map(|x| x * x).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(&pa, h, w, &kernel);
        let mu_b = filter_valid(&pb, h, w, &kernel);
        let s_aa = filter_valid(&aa, h, w, &kernel);
        let s_bb = filter_valid(&bb, h, w, &kernel);
        let s_ab = filter_valid(&ab, h, w, &kernel);
        let mut acc = 0.0;
        for i in 0..valid.len() {
            if !valid[i] {
                continue;
            }
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = s_aa[i] - ma * ma;
            let vb = s_bb[i] - mb * mb;
            let cov = s_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
        total += acc / count as f64;
    }
    Ok(total / ch as f64)
}

/// Scores a rectification against the ground-truth normal image.
///
/// Masked scoring uses the rectification's validity mask eroded by
/// [`METRIC_EROSION`] pixels; full-frame scoring includes black borders.
pub fn score_rectification(rectified: &WarpResult, normal: &ImageBuffer, masked: bool) -> Result<(f64, f64)> {
    if masked {
        let mask = rectified.mask.erode(METRIC_EROSION);
        Ok((psnr(&rectified.image, normal, Some(&mask))?, ssim(&rectified.image, normal, Some(&mask))?))
    } else {
        Ok((psnr(&rectified.image, normal, None)?, ssim(&rectified.image, normal, None)?))
    }
}

/// How rectification parameters are obtained for each matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMethod {
    /// Ground-truth parameters on the diagonal; off the diagonal, where the
    /// row model has no true parameter, the best supervised fit.
    Oracle { config: OptimizerConfig },
    /// Fit each row model to each test image using the normal image.
    Supervised { config: OptimizerConfig },
    /// Diagonal from whole-group self-supervised estimation; off the diagonal
    /// the row model is fitted to the test model's image pair by intra-model
    /// consistency alone.
    SelfSupervised { spec: LossSpec, config: OptimizerConfig },
}

impl EvalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMethod::Oracle { .. } => "oracle",
            EvalMethod::Supervised { .. } => "supervised",
            EvalMethod::SelfSupervised { .. } => "self_supervised",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub group: usize,
    pub row_model: ModelKind,
    pub test_model: ModelKind,
    pub slot: u8,
    pub k_used: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub row_model: ModelKind,
    pub test_model: ModelKind,
    pub n: usize,
    pub failures: usize,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
}

/// Mean over a row's test-set means ("universality").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowAverage {
    pub row_model: ModelKind,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub method: String,
    pub masked: bool,
    pub erosion: usize,
    pub channels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub header: ReportHeader,
    pub cells: Vec<CellSummary>,
    pub averages: Vec<RowAverage>,
    pub records: Vec<ImageRecord>,
}

impl EvalReport {
    pub fn cell(&self, row: ModelKind, test: ModelKind) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.row_model == row && c.test_model == test)
    }

    pub fn average(&self, row: ModelKind) -> Option<&RowAverage> {
        self.averages.iter().find(|a| a.row_model == row)
    }

    /// Cells first, then one `avg` row per row model.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# method={} masked={} erosion={} channels={}\n",
            self.header.method, self.header.masked, self.header.erosion, self.header.channels
        );
        out.push_str("row_model,test_model,n,psnr_mean,ssim_mean\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{:.6},{:.6}\n", c.row_model, c.test_model, c.n, c.psnr_mean, c.ssim_mean));
        }
        for a in &self.averages {
            let n: usize = self.cells.iter().filter(|c| c.row_model == a.row_model).map(|c| c.n).sum();
            out.push_str(&format!("{},avg,{},{:.6},{:.6}\n", a.row_model, n, a.psnr_mean, a.ssim_mean));
        }
        out
    }
}

/// Rectification parameter for one (row model, test image) cell.
type Fitted = std::result::Result<f64, String>;

fn off_diagonal_self_fit(group: &DistortionGroup, row: &DistortionModel, test: ModelKind, config: &OptimizerConfig) -> [Fitted; 2] {
    let (Some(a), Some(b)) = (group.item(test, 1), group.item(test, 2)) else {
        return [Err("missing test images".into()), Err("missing test images".into())];
    };
    let inputs = GroupInputs::new().with(row.kind, a.image.clone(), b.image.clone());
    let mut models = group.models;
    models[row.kind.index()] = *row;
    match estimate_group(&inputs, models, LossSpec::intra_only(), config) {
        Ok(res) => {
            let raw = res.raw_params()[row.kind.index()];
            [Ok(raw[0]), Ok(raw[1])]
        }
        Err(e) => [Err(e.to_string()), Err(e.to_string())],
    }
}

fn fit_group(group: &DistortionGroup, method: &EvalMethod) -> [[[Fitted; 2]; 3]; 3] {
    let mut out: [[[Fitted; 2]; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| [Err(String::new()), Err(String::new())]));
    let full_estimate = match method {
        EvalMethod::SelfSupervised { spec, config } => Some(
            estimate_group(&group.inputs(), group.models, *spec, config).map_err(|e| e.to_string()),
        ),
        _ => None,
    };
    for row in group.models {
        for test in ModelKind::ALL {
            let cell = &mut out[row.kind.index()][test.index()];
            match method {
                EvalMethod::Oracle { config } | EvalMethod::Supervised { config } => {
                    let oracle = matches!(method, EvalMethod::Oracle { .. });
                    for slot in 0..2 {
                        let Some(item) = group.item(test, slot as u8 + 1) else {
                            cell[slot] = Err("missing test image".into());
                            continue;
                        };
                        cell[slot] = if oracle && row.kind == test {
                            Ok(item.k_true)
                        } else {
                            estimate_supervised(&item.image, &group.normal, &row, config)
                                .map(|fit| fit.k_raw)
                                .map_err(|e| e.to_string())
                        };
                    }
                }
                EvalMethod::SelfSupervised { config, .. } => {
                    if row.kind == test {
                        let est = full_estimate.as_ref().expect("computed above");
                        for slot in 0..2 {
                            cell[slot] = est.as_ref().map(|r| r.raw_params()[row.kind.index()][slot]).map_err(Clone::clone);
                        }
                    } else {
                        *cell = off_diagonal_self_fit(group, &row, test, config);
                    }
                }
            }
        }
    }
    out
}

fn score_group(index: usize, group: &DistortionGroup, method: &EvalMethod, masked: bool) -> Vec<ImageRecord> {
    let fitted = fit_group(group, method);
    let mut records = Vec::new();
    for row in group.models {
        for test in ModelKind::ALL {
            for slot in 0..2u8 {
                let Some(item) = group.item(test, slot + 1) else { continue };
                let fit = &fitted[row.kind.index()][test.index()][usize::from(slot)];
                let mut record = ImageRecord {
                    group: index,
                    row_model: row.kind,
                    test_model: test,
                    slot: slot + 1,
                    k_used: None,
                    psnr: None,
                    ssim: None,
                    error: None,
                };
                match fit {
                    Ok(k) => {
                        record.k_used = Some(*k);
                        match rectify(&item.image, &row, *k).and_then(|r| score_rectification(&r, &group.normal, masked)) {
                            Ok((p, s)) => {
                                record.psnr = Some(p);
                                record.ssim = Some(s);
                            }
                            Err(e) => record.error = Some(e.to_string()),
                        }
                    }
                    Err(e) => record.error = Some(e.clone()),
                }
                records.push(record);
            }
        }
    }
    records
}

/// Rectifies every test image with every row model and aggregates scores.
///
/// Groups are processed in parallel; records and means are assembled in
/// group order.
pub fn evaluate_matrix(groups: &[DistortionGroup], method: &EvalMethod, masked: bool) -> Result<EvalReport> {
    #[cfg(feature = "parallel")]
    let per_group: Vec<Vec<ImageRecord>> =
        groups.par_iter().enumerate().map(|(i, g)| score_group(i, g, method, masked)).collect();
    #[cfg(not(feature = "parallel"))]
    let per_group: Vec<Vec<ImageRecord>> =
        groups.iter().enumerate().map(|(i, g)| score_group(i, g, method, masked)).collect();
    let records: Vec<ImageRecord> = per_group.into_iter().flatten().collect();
    Ok(summarize(records, method.name(), masked))
}

pub(crate) fn summarize(records: Vec<ImageRecord>, method: &str, masked: bool) -> EvalReport {
    let mut cells = Vec::new();
    let mut averages = Vec::new();
    for row in ModelKind::ALL {
        let mut row_psnr = Vec::new();
        let mut row_ssim = Vec::new();
        for test in ModelKind::ALL {
            let in_cell: Vec<&ImageRecord> =
                records.iter().filter(|r| r.row_model == row && r.test_model == test).collect();
            if in_cell.is_empty() {
                continue;
            }
            let ok: Vec<(f64, f64)> = in_cell.iter().filter_map(|r| Some((r.psnr?, r.ssim?))).collect();
            let n = ok.len();
            let mean = |f: fn(&(f64, f64)) -> f64| if n == 0 { f64::NAN } else { ok.iter().map(f).sum::<f64>() / n as f64 };
            let cell = CellSummary {
                row_model: row,
                test_model: test,
                n,
                failures: in_cell.len() - n,
                psnr_mean: mean(|v| v.0),
                ssim_mean: mean(|v| v.1),
            };
            if n > 0 {
                row_psnr.push(cell.psnr_mean);
                row_ssim.push(cell.ssim_mean);
            }
            cells.push(cell);
        }
        if !row_psnr.is_empty() {
            averages.push(RowAverage {
                row_model: row,
                psnr_mean: row_psnr.iter().sum::<f64>() / row_psnr.len() as f64,
                ssim_mean: row_ssim.iter().sum::<f64>() / row_ssim.len() as f64,
            });
        }
    }
    EvalReport {
        header: ReportHeader {
            method: method.to_string(),
            masked,
            erosion: if masked { METRIC_EROSION } else { 0 },
            channels: "rgb-mean".into(),
        },
        cells,
        averages,
        records,
    }
}
