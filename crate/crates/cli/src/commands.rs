use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rectilens::estimator::{estimate_group, EstimationResult, Step, TraceEntry};
use rectilens::losses::LossSpec;
use rectilens::metrics::{evaluate_matrix, EvalMethod};
use rectilens::scenes::desk_set;
use rectilens::selftest::{self, SelftestOptions};
use rectilens::synthesis::{group_rng, prepare_normal_to, synthesize_group, DistortionGroup};
use rectilens::{rectify as rectify_image, DistortionModel, ImageBuffer, ModelKind, WarpResult};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, load_mask, load_png, read_json, save_mask, save_png, write_json};
use crate::manifest::{load_group, load_manifest, GroupEntry, ItemEntry, Manifest};
use crate::{effective_models, Command, EstimateArgs, EvalArgs, RectifyArgs, SelftestArgs, SynthArgs};

fn echo_config(out: &Path, name: &str, command: Command) -> CliResult<()> {
    write_json(&out.join(format!("{name}_config.json")), &command)
}

fn model_array(models: &[DistortionModel]) -> [DistortionModel; 3] {
    ModelKind::ALL.map(|kind| models.iter().copied().find(|m| m.kind == kind).expect("all models present"))
}

fn list_images(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(CliError::io(dir))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::io(dir))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

struct Normal {
    source: String,
    image: ImageBuffer,
}

fn gather_normals(args: &SynthArgs) -> CliResult<(Vec<Normal>, usize)> {
    let limit = args.count.unwrap_or(usize::MAX);
    if let Some(n) = args.scenes {
        let normals = desk_set(n.min(limit), args.size)
            .into_iter()
            .enumerate()
            .map(|(i, image)| Normal { source: format!("scene_{i:04}"), image })
            .collect();
        return Ok((normals, 0));
    }
    let dir = args.in_dir.as_ref().expect("clap requires in_dir without scenes");
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("{} contains no images", dir.display())));
    }
    let mut normals = Vec::new();
    let mut skipped = 0;
    for path in files.into_iter().take(limit) {
        let prepared = load_png(&path).and_then(|raw| Ok(prepare_normal_to(&raw, args.size)?));
        match prepared {
            Ok(image) => {
                let source = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                normals.push(Normal { source, image });
            }
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                skipped += 1;
            }
        }
    }
    if normals.is_empty() {
        return Err(CliError::Usage(format!("no decodable images in {}", dir.display())));
    }
    Ok((normals, skipped))
}

fn write_group(out: &Path, index: usize, source: &str, group: &DistortionGroup) -> CliResult<GroupEntry> {
    let normal_path = format!("normals/g{index:04}.png");
    save_png(&out.join(&normal_path), &group.normal)?;
    let mut items = Vec::with_capacity(group.items.len());
    for it in &group.items {
        let stem = format!("distorted/g{index:04}_{}_{}", it.model.as_str().to_lowercase(), it.slot);
        let image_path = format!("{stem}.png");
        let mask_path = format!("{stem}_mask.png");
        save_png(&out.join(&image_path), &it.image.image)?;
        save_mask(&out.join(&mask_path), &it.image.mask)?;
        let model = group.models[it.model.index()];
        items.push(ItemEntry {
            model: it.model,
            slot: it.slot,
            k_raw: it.k_true,
            k_norm: model.normalize(it.k_true)?,
            image_path,
            mask_path,
        });
    }
    Ok(GroupEntry { index, source: source.to_string(), normal_path, items })
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let models = effective_models(&args.ranges);
    let (normals, skipped) = gather_normals(&args)?;
    create_dir(&args.out.join("normals"))?;
    create_dir(&args.out.join("distorted"))?;
    let echo = SynthArgs { ranges: models.clone(), count: Some(normals.len() + skipped), ..args.clone() };
    echo_config(&args.out, "synth", Command::Synth(echo))?;

    let array = model_array(&models);
    let written: Vec<CliResult<(GroupEntry, Vec<f64>)>> = normals
        .par_iter()
        .enumerate()
        .map(|(index, normal)| {
            let group = synthesize_group(&normal.image, array, &mut group_rng(args.seed, index as u64))?;
            let fractions = group.items.iter().map(|it| it.image.valid_fraction()).collect();
            Ok((write_group(&args.out, index, &normal.source, &group)?, fractions))
        })
        .collect();
    let mut groups = Vec::with_capacity(written.len());
    let mut valid_by_model = [Vec::new(), Vec::new(), Vec::new()];
    for result in written {
        let (entry, fractions) = result?;
        for (it, f) in entry.items.iter().zip(fractions) {
            valid_by_model[it.model.index()].push(f);
        }
        groups.push(entry);
    }
    let manifest = Manifest { seed: args.seed, size: args.size, models, groups };
    write_json(&args.out.join("manifest.json"), &manifest)?;

    println!("groups: {}  images: {}  skipped: {skipped}", manifest.groups.len(), 6 * manifest.groups.len());
    for kind in ModelKind::ALL {
        let v = &valid_by_model[kind.index()];
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        println!("  {kind:<3} valid fraction mean {mean:.3} min {min:.3}");
    }
    Ok(())
}

/// Per-group estimation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimate {
    pub index: usize,
    pub source: String,
    pub spec: LossSpec,
    pub models: Vec<DistortionModel>,
    #[serde(flatten)]
    pub result: EstimationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceFile {
    index: usize,
    sweeps: usize,
    coordinates: usize,
    pattern_moves: usize,
    entries: Vec<TraceEntry>,
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_all_groups(path: &Path, manifest: &Manifest) -> CliResult<Vec<DistortionGroup>> {
    let base = manifest_dir(path);
    manifest.groups.iter().map(|g| load_group(&base, manifest, g)).collect()
}

pub fn estimate(args: EstimateArgs) -> CliResult<()> {
    let spec = LossSpec::parse(&args.loss, args.pairs)?;
    let config = args.optimizer.config();
    config.validate()?;
    let manifest = load_manifest(&args.manifest)?;
    let groups = load_all_groups(&args.manifest, &manifest)?;
    create_dir(&args.out.join("estimates"))?;
    if args.trace {
        create_dir(&args.out.join("traces"))?;
    }
    echo_config(&args.out, "estimate", Command::Estimate(args.clone()))?;

    let results: Vec<Result<EstimationResult, rectilens::Error>> = groups
        .par_iter()
        .map(|g| estimate_group(&g.inputs(), g.models, spec, &config))
        .collect();
    let mut failures = 0;
    println!("{:>5}  {:>9}  {:>9}  {:>6}  {:>9}  reference error", "group", "loss", "initial", "sweeps", "converged");
    for ((entry, group), result) in manifest.groups.iter().zip(&groups).zip(results) {
        let mut result = match result {
            Ok(r) => r,
            Err(e) => {
                eprintln!("group {}: estimation failed: {e}", entry.index);
                failures += 1;
                continue;
            }
        };
        if args.trace {
            let trace = TraceFile {
                index: entry.index,
                sweeps: result.sweeps,
                coordinates: result.estimates.len(),
                pattern_moves: result.trace.iter().filter(|t| t.step == Step::Pattern).count(),
                entries: result.trace.clone(),
            };
            write_json(&args.out.join(format!("traces/g{:04}.json", entry.index)), &trace)?;
        }
        result.trace.clear();
        let truth = group.true_params_norm();
        let errors: Vec<String> = result
            .estimates
            .iter()
            .map(|e| format!("{}{}={:.3}", e.model, e.slot, (e.k_norm - truth[e.model.index()][usize::from(e.slot - 1)]).abs()))
            .collect();
        println!(
            "{:>5}  {:>9.5}  {:>9.5}  {:>6}  {:>9}  {}",
            entry.index,
            result.loss.total,
            result.initial_loss,
            result.sweeps,
            result.converged,
            errors.join(" ")
        );
        let out = GroupEstimate { index: entry.index, source: entry.source.clone(), spec, models: manifest.models.clone(), result };
        write_json(&args.out.join(format!("estimates/g{:04}.json", entry.index)), &out)?;
    }
    if failures > 0 {
        return Err(CliError::Failed(format!("{failures} group(s) could not be estimated")));
    }
    Ok(())
}

pub fn rectify(args: RectifyArgs) -> CliResult<()> {
    let image = load_png(&args.image)?;
    let mask = match &args.mask {
        Some(p) => load_mask(p)?,
        None => rectilens::Mask::full(image.height(), image.width()),
    };
    let (model, k) = match (&args.estimate, args.k) {
        (Some(path), _) => {
            let est: GroupEstimate = read_json(path)?;
            let slot = est
                .result
                .get(args.model, args.slot)
                .ok_or_else(|| CliError::Usage(format!("{} has no {} slot {}", path.display(), args.model, args.slot)))?;
            let model = est
                .models
                .iter()
                .copied()
                .find(|m| m.kind == args.model)
                .unwrap_or_else(|| DistortionModel::with_default_range(args.model));
            (model, slot.k_raw)
        }
        (None, Some(k)) => {
            let models = effective_models(&args.ranges);
            (models[args.model.index()], k)
        }
        (None, None) => return Err(CliError::Usage("either --k or --estimate is required".into())),
    };
    let rectified = rectify_image(&WarpResult { image, mask }, &model, k)?;
    create_dir(&args.out)?;
    let stem = args.image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into());
    let echo = RectifyArgs { k: Some(k), estimate: None, ranges: vec![model], ..args.clone() };
    echo_config(&args.out, "rectify", Command::Rectify(echo))?;
    let image_path = args.out.join(format!("{stem}_rectified.png"));
    let mask_path = args.out.join(format!("{stem}_rectified_mask.png"));
    save_png(&image_path, &rectified.image)?;
    save_mask(&mask_path, &rectified.mask)?;
    println!("{} k={k} valid fraction {:.3}", model.kind, rectified.valid_fraction());
    println!("wrote {} and {}", image_path.display(), mask_path.display());
    Ok(())
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let config = args.optimizer.config();
    config.validate()?;
    let method = if args.use_true_k {
        EvalMethod::Oracle { config }
    } else if args.supervised {
        EvalMethod::Supervised { config }
    } else {
        EvalMethod::SelfSupervised { spec: LossSpec::parse(&args.loss, args.pairs)?, config }
    };
    let manifest = load_manifest(&args.manifest)?;
    let groups = load_all_groups(&args.manifest, &manifest)?;
    create_dir(&args.out)?;
    echo_config(&args.out, "eval", Command::Eval(args.clone()))?;
    let report = evaluate_matrix(&groups, &method, !args.full_frame)?;
    fs::write(args.out.join("eval.csv"), report.to_csv()).map_err(CliError::io(args.out.join("eval.csv")))?;
    write_json(&args.out.join("eval.json"), &report)?;

    println!(
        "method {}  scoring {}",
        report.header.method,
        if report.header.masked { format!("masked (erosion {})", report.header.erosion) } else { "full frame".into() }
    );
    println!("{:<4} {:<4} {:>4} {:>9} {:>7} {:>8}", "row", "test", "n", "psnr", "ssim", "failures");
    for c in &report.cells {
        println!(
            "{:<4} {:<4} {:>4} {:>9.3} {:>7.4} {:>8}",
            c.row_model.as_str(),
            c.test_model.as_str(),
            c.n,
            c.psnr_mean,
            c.ssim_mean,
            c.failures
        );
    }
    for a in &report.averages {
        println!("{:<4} {:<4} {:>4} {:>9.3} {:>7.4}", a.row_model.as_str(), "avg", "", a.psnr_mean, a.ssim_mean);
    }
    Ok(())
}

pub fn selftest(args: SelftestArgs) -> CliResult<()> {
    let results = selftest::run(&SelftestOptions { radial_scale: args.corrupt_radial });
    println!("{:<20} {:<6} detail", "property", "result");
    for r in &results {
        println!("{:<20} {:<6} {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        echo_config(out, "selftest", Command::Selftest(args.clone()))?;
        write_json(&out.join("selftest.json"), &results)?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed properties: {}", failed.join(", "))))
    }
}
