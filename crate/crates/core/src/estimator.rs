//! Parameter recovery by direct minimization of the consistency objectives.
//!
//! Every parameter lives on its normalized `[0, 1]` scale. A coordinate is
//! solved with a coarse grid followed by golden-section refinement around
//! the best grid point; cyclic coordinate descent sweeps over all
//! coordinates until a sweep stops paying off.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::losses::{
    inter_terms, intra_terms, masked_l1, variant_losses, CrossHeadState, GroupInputs, LossBreakdown, LossSpec,
    LossTerms, Variant, L1,
};
use crate::model::{DistortionModel, ModelKind};
use crate::warp::{distort, rectify, WarpResult};

/// Search settings shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub coarse_grid_points: usize,
    /// Final bracket width on the normalized scale.
    pub golden_section_tol: f64,
    pub max_sweeps: usize,
    /// A sweep improving the objective by less than this ends the descent.
    pub sweep_tol: f64,
    pub seed: u64,
    /// Randomly shift interior grid points by up to a quarter spacing.
    pub grid_jitter: bool,
    /// After each sweep, line-search along the sweep's net displacement.
    pub pattern_moves: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            coarse_grid_points: 17,
            golden_section_tol: 1e-3,
            max_sweeps: 6,
            sweep_tol: 1e-5,
            seed: 0,
            grid_jitter: false,
            pattern_moves: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_grid_points < 3 {
            return Err(Error::InvalidConfig(format!(
                "coarse_grid_points must be at least 3, got {}",
                self.coarse_grid_points
            )));
        }
        if self.golden_section_tol.is_nan() || self.golden_section_tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "golden_section_tol must be positive, got {}",
                self.golden_section_tol
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let n = self.coarse_grid_points;
        let step = 1.0 / (n - 1) as f64;
        let mut grid: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        if self.grid_jitter {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for x in grid.iter_mut().take(n - 1).skip(1) {
                *x += rng.gen_range(-0.25..0.25) * step;
            }
        }
        grid
    }
}

/// Outcome of a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMinimum {
    pub argmin: f64,
    pub value: f64,
    pub evaluations: usize,
    /// Spread of the finite grid values; near zero for a flat objective.
    pub grid_span: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes `objective` over `[0, 1]`.
///
/// Equal grid minima resolve to the smaller argument. NaN counts as `+∞`.
pub fn minimize_scalar(mut objective: impl FnMut(f64) -> Result<f64>, config: &OptimizerConfig) -> Result<ScalarMinimum> {
    config.validate()?;
    let grid = config.grid();
    let mut evaluations = 0;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = objective(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };

    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid {
        values.push(eval(x)?);
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    if !values[best].is_finite() {
        return Err(Error::ObjectiveNotFinite { points: grid.len() });
    }
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo_v, hi_v) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let grid_span = hi_v - lo_v;

    let mut best_x = grid[best];
    let mut best_v = values[best];
    let mut a = if best == 0 { grid[0] } else { grid[best - 1] };
    let mut b = if best + 1 == grid.len() { grid[best] } else { grid[best + 1] };

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > config.golden_section_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best_v || (v == best_v && x < best_x) {
            best_x = x;
            best_v = v;
        }
    }
    Ok(ScalarMinimum { argmin: best_x, value: best_v, evaluations, grid_span })
}

/// A multivariate objective over normalized coordinates that can be probed
/// one coordinate at a time.
pub trait CoordinateObjective {
    fn dim(&self) -> usize;
    /// Objective at the current position.
    fn value(&self) -> f64;
    fn position(&self) -> Vec<f64>;
    /// Objective with coordinate `coord` moved to `x`, leaving the position unchanged.
    fn trial(&mut self, coord: usize, x: f64) -> Result<f64>;
    /// Moves coordinate `coord` to `x`.
    fn accept(&mut self, coord: usize, x: f64) -> Result<()>;
    /// Objective at an arbitrary position, leaving the position unchanged.
    fn trial_point(&mut self, x: &[f64]) -> Result<f64>;

    fn accept_point(&mut self, x: &[f64]) -> Result<()> {
        for (c, &v) in x.iter().enumerate() {
            self.accept(c, v)?;
        }
        Ok(())
    }
}

/// What a line search of a descent moved along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// A single coordinate.
    Axis(usize),
    /// The net displacement of the sweep.
    Pattern,
}

/// One line search of a descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub step: Step,
    /// Normalized position after the step.
    pub params: Vec<f64>,
    pub loss: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentOutcome {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

/// Cyclic coordinate descent; each coordinate solved by [`minimize_scalar`].
///
/// With `pattern_moves`, a sweep ends with a line search along its net
/// displacement, extended up to the boundary of the unit cube; axis steps
/// alone only creep along narrow diagonal valleys. A step is accepted only if
/// it lowers the objective, so losses along the trace never increase.
pub fn coordinate_descent(objective: &mut impl CoordinateObjective, config: &OptimizerConfig) -> Result<DescentOutcome> {
    config.validate()?;
    let initial_loss = objective.value();
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut converged = false;
    let mut sweeps = 0;
    let mut iteration = 0;
    for _ in 0..config.max_sweeps {
        sweeps += 1;
        let start = objective.value();
        let start_pos = objective.position();
        for coord in 0..objective.dim() {
            let found = minimize_scalar(|x| objective.trial(coord, x), config);
            let mut accepted = false;
            match found {
                Ok(min) => {
                    evaluations += min.evaluations;
                    if min.value < objective.value() {
                        objective.accept(coord, min.argmin)?;
                        accepted = true;
                    }
                }
                Err(Error::ObjectiveNotFinite { points }) => evaluations += points,
                Err(e) => return Err(e),
            }
            trace.push(TraceEntry {
                iteration,
                step: Step::Axis(coord),
                params: objective.position(),
                loss: objective.value(),
                accepted,
            });
            iteration += 1;
        }
        if config.pattern_moves && start - objective.value() >= config.sweep_tol {
            let here = objective.position();
            let dir: Vec<f64> = here.iter().zip(&start_pos).map(|(a, b)| a - b).collect();
            if let Some(accepted) = line_search(objective, &dir, config, &mut evaluations)? {
                trace.push(TraceEntry {
                    iteration,
                    step: Step::Pattern,
                    params: objective.position(),
                    loss: objective.value(),
                    accepted,
                });
                iteration += 1;
            }
        }
        let end = objective.value();
        if end.is_finite() && start - end < config.sweep_tol {
            converged = true;
            break;
        }
    }
    Ok(DescentOutcome { initial_loss, final_loss: objective.value(), sweeps, converged, evaluations, trace })
}

/// Line search forward from the current position along `dir`, up to the
/// boundary of the unit cube.
///
/// Returns `None` when there is no segment to search.
fn line_search(
    objective: &mut impl CoordinateObjective,
    dir: &[f64],
    config: &OptimizerConfig,
    evaluations: &mut usize,
) -> Result<Option<bool>> {
    let here = objective.position();
    let mut t_max = f64::INFINITY;
    for (&x, &d) in here.iter().zip(dir) {
        if d > 1e-12 {
            t_max = t_max.min((1.0 - x) / d);
        } else if d < -1e-12 {
            t_max = t_max.min(-x / d);
        }
    }
    if !t_max.is_finite() || t_max <= 1e-12 {
        return Ok(None);
    }
    let point = |s: f64| -> Vec<f64> {
        here.iter().zip(dir).map(|(&x, &d)| (x + s * t_max * d).clamp(0.0, 1.0)).collect()
    };
    let mut accepted = false;
    match minimize_scalar(|s| objective.trial_point(&point(s)), config) {
        Ok(min) => {
            *evaluations += min.evaluations;
            if min.value < objective.value() {
                objective.accept_point(&point(min.argmin))?;
                accepted = true;
            }
        }
        Err(Error::ObjectiveNotFinite { points }) => *evaluations += points,
        Err(e) => return Err(e),
    }
    Ok(Some(accepted))
}

/// Group objective with cached rectifications; a coordinate trial re-renders
/// only the buffers that depend on it.
struct GroupObjective<'a> {
    inputs: &'a GroupInputs,
    models: [DistortionModel; 3],
    spec: LossSpec,
    coords: Vec<(ModelKind, usize)>,
    norm: [[f64; 2]; 3],
    raw: [[f64; 2]; 3],
    rectified: [Option<[WarpResult; 2]>; 3],
    terms: LossTerms,
    loss: f64,
}

impl<'a> GroupObjective<'a> {
    fn new(inputs: &'a GroupInputs, models: [DistortionModel; 3], spec: LossSpec, start: [[f64; 2]; 3]) -> Result<Self> {
        let present = inputs.models();
        if present.is_empty() {
            return Err(Error::SingleImage);
        }
        if let Some(pairs) = spec.inter_pairs() {
            for &(i, m) in pairs.pairs() {
                for kind in [i, m] {
                    if inputs.get(kind).is_none() {
                        return Err(Error::MissingModel(kind));
                    }
                }
            }
        }
        let mut norm = [[START; 2]; 3];
        let mut raw = [[0.0; 2]; 3];
        let mut rectified = [None, None, None];
        let mut coords = Vec::new();
        for &kind in &present {
            let i = kind.index();
            let slot = inputs.get(kind).expect("present");
            for j in 0..2 {
                norm[i][j] = start[i][j];
                raw[i][j] = models[i].denormalize(start[i][j])?;
                coords.push((kind, j));
            }
            rectified[i] = Some([rectify(&slot[0], &models[i], raw[i][0])?, rectify(&slot[1], &models[i], raw[i][1])?]);
        }
        let mut obj = Self {
            inputs,
            models,
            spec,
            coords,
            norm,
            raw,
            rectified,
            terms: LossTerms::default(),
            loss: f64::INFINITY,
        };
        obj.terms = obj.full_terms()?;
        obj.loss = obj.terms.breakdown().total;
        Ok(obj)
    }

    fn full_terms(&self) -> Result<LossTerms> {
        self.terms_at(&self.raw, &self.rectified)
    }

    fn terms_at(&self, raw: &[[f64; 2]; 3], rectified: &[Option<[WarpResult; 2]>; 3]) -> Result<LossTerms> {
        let mut terms = LossTerms::default();
        if self.spec.use_intra() {
            for kind in self.inputs.models() {
                let i = kind.index();
                let b = rectified[i].as_ref().expect("present");
                let a_hat = [distort(&b[1], &self.models[i], raw[i][0])?, distort(&b[0], &self.models[i], raw[i][1])?];
                terms.intra[i] = Some(intra_terms(self.inputs.get(kind).expect("present"), &a_hat)?);
            }
        }
        if let Some(pairs) = self.spec.inter_pairs() {
            for &(i, m) in pairs.pairs() {
                let bi = rectified[i.index()].as_ref().expect("checked");
                let bm = rectified[m.index()].as_ref().expect("checked");
                terms.inter.push(inter_terms(bi, bm)?);
            }
        }
        Ok(terms)
    }

    /// Full state at an arbitrary position; only moved slots are re-rendered.
    fn at_point(&self, x: &[f64]) -> Result<PointState> {
        let mut norm = self.norm;
        let mut raw = self.raw;
        let mut rectified = self.rectified.clone();
        for (c, &(kind, j)) in self.coords.iter().enumerate() {
            let i = kind.index();
            if x[c] != self.norm[i][j] {
                norm[i][j] = x[c];
                raw[i][j] = self.models[i].denormalize(x[c])?;
                let a = &self.inputs.get(kind).expect("present")[j];
                rectified[i].as_mut().expect("present")[j] = rectify(a, &self.models[i], raw[i][j])?;
            }
        }
        let terms = self.terms_at(&raw, &rectified)?;
        Ok(PointState { norm, raw, rectified, terms })
    }

    fn candidate(&self, coord: usize, x: f64) -> Result<(WarpResult, LossTerms)> {
        let (kind, j) = self.coords[coord];
        let i = kind.index();
        let other = 1 - j;
        let model = &self.models[i];
        let k = model.denormalize(x)?;
        let a = self.inputs.get(kind).expect("present");
        let b_cur = self.rectified[i].as_ref().expect("present");
        let b_new = rectify(&a[j], model, k)?;

        let mut terms = self.terms.clone();
        if self.spec.use_intra() {
            // Â^j = distort(B^other, k), Â^other = distort(B^j_new, k^other)
            let a_hat_j = distort(&b_cur[other], model, k)?;
            let a_hat_other = distort(&b_new, model, self.raw[i][other])?;
            let mut t = [L1 { value: 0.0, valid_fraction: 0.0 }; 2];
            t[j] = masked_l1(&a[j], &a_hat_j)?;
            t[other] = masked_l1(&a[other], &a_hat_other)?;
            terms.intra[i] = Some(t);
        }
        if let Some(pairs) = self.spec.inter_pairs() {
            for (p, &(pi, pm)) in pairs.pairs().iter().enumerate() {
                let l = if pi == kind {
                    let bm = &self.rectified[pm.index()].as_ref().expect("checked")[j];
                    masked_l1(&b_new, bm)?
                } else if pm == kind {
                    let bi = &self.rectified[pi.index()].as_ref().expect("checked")[j];
                    masked_l1(bi, &b_new)?
                } else {
                    continue;
                };
                terms.inter[p][j] = l;
            }
        }
        Ok((b_new, terms))
    }

    fn breakdown(&self) -> LossBreakdown {
        self.terms.breakdown()
    }

    fn raw_params(&self) -> [[f64; 2]; 3] {
        self.raw
    }
}

struct PointState {
    norm: [[f64; 2]; 3],
    raw: [[f64; 2]; 3],
    rectified: [Option<[WarpResult; 2]>; 3],
    terms: LossTerms,
}

impl CoordinateObjective for GroupObjective<'_> {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn value(&self) -> f64 {
        self.loss
    }

    fn position(&self) -> Vec<f64> {
        self.coords.iter().map(|&(kind, j)| self.norm[kind.index()][j]).collect()
    }

    fn trial(&mut self, coord: usize, x: f64) -> Result<f64> {
        Ok(self.candidate(coord, x)?.1.breakdown().total)
    }

    fn accept(&mut self, coord: usize, x: f64) -> Result<()> {
        let (kind, j) = self.coords[coord];
        let i = kind.index();
        let (b, terms) = self.candidate(coord, x)?;
        self.rectified[i].as_mut().expect("present")[j] = b;
        self.norm[i][j] = x;
        self.raw[i][j] = self.models[i].denormalize(x)?;
        self.terms = terms;
        self.loss = self.terms.breakdown().total;
        Ok(())
    }

    fn trial_point(&mut self, x: &[f64]) -> Result<f64> {
        Ok(self.at_point(x)?.terms.breakdown().total)
    }


    fn accept_point(&mut self, x: &[f64]) -> Result<()> {
        let p = self.at_point(x)?;
        self.norm = p.norm;
        self.raw = p.raw;
        self.rectified = p.rectified;
        self.terms = p.terms;
        self.loss = self.terms.breakdown().total;
        Ok(())
    }
}

/// One estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotEstimate {
    pub model: ModelKind,
    /// 1 or 2.
    pub slot: u8,
    pub k_raw: f64,
    pub k_norm: f64,
}

/// Parameters recovered for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimates: Vec<SlotEstimate>,
    pub loss: LossBreakdown,
    pub initial_loss: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

impl EstimationResult {
    pub fn get(&self, model: ModelKind, slot: u8) -> Option<&SlotEstimate> {
        self.estimates.iter().find(|e| e.model == model && e.slot == slot)
    }

    /// Raw parameters indexed like [`crate::losses::GroupState`] params (absent models as NaN).
    pub fn raw_params(&self) -> [[f64; 2]; 3] {
        let mut out = [[f64::NAN; 2]; 3];
        for e in &self.estimates {
            out[e.model.index()][usize::from(e.slot - 1)] = e.k_raw;
        }
        out
    }
}

/// Initial normalized value for every parameter.
pub const START: f64 = 0.5;

/// Recovers the slot parameters of every model present in `inputs`.
///
/// The model of origin of each input is known, its parameter is not. A
/// descent that runs out of sweeps is reported with `converged = false`.
pub fn estimate_group(
    inputs: &GroupInputs,
    models: [DistortionModel; 3],
    spec: LossSpec,
    config: &OptimizerConfig,
) -> Result<EstimationResult> {
    estimate_group_from(inputs, models, spec, config, [[START; 2]; 3])
}

/// [`estimate_group`] from an explicit normalized starting point.
pub fn estimate_group_from(
    inputs: &GroupInputs,
    models: [DistortionModel; 3],
    spec: LossSpec,
    config: &OptimizerConfig,
    start: [[f64; 2]; 3],
) -> Result<EstimationResult> {
    config.validate()?;
    let mut objective = GroupObjective::new(inputs, models, spec, start)?;
    let outcome = coordinate_descent(&mut objective, config)?;
    let raw = objective.raw_params();
    let estimates = objective
        .coords
        .iter()
        .map(|&(kind, j)| SlotEstimate {
            model: kind,
            slot: j as u8 + 1,
            k_raw: raw[kind.index()][j],
            k_norm: objective.norm[kind.index()][j],
        })
        .collect();
    Ok(EstimationResult {
        estimates,
        loss: objective.breakdown(),
        initial_loss: outcome.initial_loss,
        sweeps: outcome.sweeps,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
        trace: outcome.trace,
    })
}

/// Direct fit of one model to a distorted image given its normal image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisedFit {
    pub model: ModelKind,
    pub k_raw: f64,
    pub k_norm: f64,
    pub loss: f64,
    /// False when the objective is flat over the grid.
    pub converged: bool,
    pub grid_span: f64,
}

/// Variation below which a supervised objective counts as flat.
const FLAT_OBJECTIVE: f64 = 1e-9;

/// Minimizes `|rectify(distorted, k) − normal|` over the model's range.
pub fn estimate_supervised(
    distorted: &WarpResult,
    normal: &ImageBuffer,
    model: &DistortionModel,
    config: &OptimizerConfig,
) -> Result<SupervisedFit> {
    let target = WarpResult::full(normal.clone());
    let min = minimize_scalar(
        |x| {
            let k = model.denormalize(x)?;
            Ok(masked_l1(&rectify(distorted, model, k)?, &target)?.value)
        },
        config,
    )?;
    Ok(SupervisedFit {
        model: model.kind,
        k_raw: model.denormalize(min.argmin)?,
        k_norm: min.argmin,
        loss: min.value,
        converged: min.grid_span > FLAT_OBJECTIVE,
        grid_span: min.grid_span,
    })
}

/// Which parameters of a cross-head state a variant optimizes.
fn variant_coords(variants: &[Variant]) -> Vec<(usize, usize)> {
    if variants.iter().all(|&v| v == Variant::Reprojection) {
        (0..3).map(|i| (i, i)).collect()
    } else {
        (0..3).flat_map(|h| (0..3).map(move |m| (h, m))).collect()
    }
}

struct VariantObjective<'a> {
    state: CrossHeadState<'a>,
    variants: Vec<Variant>,
    coords: Vec<(usize, usize)>,
    norm: [[f64; 3]; 3],
    loss: f64,
}

impl CoordinateObjective for VariantObjective<'_> {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn value(&self) -> f64 {
        self.loss
    }

    fn position(&self) -> Vec<f64> {
        self.coords.iter().map(|&(h, m)| self.norm[h][m]).collect()
    }

    fn trial(&mut self, coord: usize, x: f64) -> Result<f64> {
        let (h, m) = self.coords[coord];
        let old = self.state.params()[h][m];
        let k = self.state.models()[h].denormalize(x)?;
        self.state.set_param(h, m, k)?;
        let v = variant_losses(&self.state, &self.variants);
        self.state.set_param(h, m, old)?;
        v
    }

    fn accept(&mut self, coord: usize, x: f64) -> Result<()> {
        let (h, m) = self.coords[coord];
        let k = self.state.models()[h].denormalize(x)?;
        self.state.set_param(h, m, k)?;
        self.norm[h][m] = x;
        self.loss = variant_losses(&self.state, &self.variants)?;
        Ok(())
    }

    fn trial_point(&mut self, x: &[f64]) -> Result<f64> {
        let saved = self.state.clone();
        for (c, &(h, m)) in self.coords.iter().enumerate() {
            if x[c] != self.norm[h][m] {
                let k = self.state.models()[h].denormalize(x[c])?;
                self.state.set_param(h, m, k)?;
            }
        }
        let v = variant_losses(&self.state, &self.variants);
        self.state = saved;
        v
    }
}

/// Result of minimizing alternative losses on a cross-head state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantEstimate {
    /// `params[head][input]`, raw.
    pub params: [[f64; 3]; 3],
    pub norm: [[f64; 3]; 3],
    pub loss: f64,
    pub converged: bool,
}

impl VariantEstimate {
    /// Normalized parameter each model assigns to its own input.
    pub fn diagonal_norm(&self) -> [f64; 3] {
        [self.norm[0][0], self.norm[1][1], self.norm[2][2]]
    }
}

/// Minimizes a sum of alternative losses over one input per model.
pub fn estimate_variant(
    inputs: &[WarpResult; 3],
    models: [DistortionModel; 3],
    variants: &[Variant],
    config: &OptimizerConfig,
) -> Result<VariantEstimate> {
    if variants.is_empty() {
        return Err(Error::InvalidLossSpec("no variant selected".into()));
    }
    let mut raw = [[0.0; 3]; 3];
    for (h, row) in raw.iter_mut().enumerate() {
        row.fill(models[h].denormalize(START)?);
    }
    let state = CrossHeadState::new(inputs, models, raw)?;
    let loss = variant_losses(&state, variants)?;
    let mut objective = VariantObjective {
        state,
        variants: variants.to_vec(),
        coords: variant_coords(variants),
        norm: [[START; 3]; 3],
        loss,
    };
    let outcome = coordinate_descent(&mut objective, config)?;
    Ok(VariantEstimate {
        params: objective.state.params(),
        norm: objective.norm,
        loss: outcome.final_loss,
        converged: outcome.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> OptimizerConfig {
        OptimizerConfig::default()
    }

    #[test]
    fn quadratic_and_kink() {
        let q = minimize_scalar(|x| Ok((x - 0.3) * (x - 0.3)), &cfg()).unwrap();
        assert!((q.argmin - 0.3).abs() < 1e-3, "{q:?}");
        let k = minimize_scalar(|x| Ok((x - 0.7).abs()), &cfg()).unwrap();
        assert!((k.argmin - 0.7).abs() < 1e-3, "{k:?}");
    }

    #[test]
    fn two_basins_global_captured() {
        let f = |x: f64| {
            -0.1 * (-((x - 0.9) / 0.05).powi(2)).exp() - 0.05 * (-((x - 0.2) / 0.05).powi(2)).exp()
        };
        // brute-force oracle on a fine grid
        let (mut xo, mut fo) = (0.0, f64::INFINITY);
        for i in 0..=1_000_000 {
            let x = i as f64 / 1e6;
            if f(x) < fo {
                fo = f(x);
                xo = x;
            }
        }
        assert!((xo - 0.9).abs() < 1e-4);
        let m = minimize_scalar(|x| Ok(f(x)), &cfg()).unwrap();
        assert!((m.argmin - xo).abs() < 1e-3, "{m:?} vs {xo}");
    }

    #[test]
    fn boundary_minimum() {
        let m = minimize_scalar(Ok, &cfg()).unwrap();
        assert!(m.argmin < 1e-3);
        let m = minimize_scalar(|x| Ok(-x), &cfg()).unwrap();
        assert!(m.argmin > 1.0 - 1e-3);
    }

    #[test]
    fn ties_resolve_low_and_infinite_fails() {
        let m = minimize_scalar(|_| Ok(1.0), &cfg()).unwrap();
        assert_eq!(m.argmin, 0.0);
        assert_eq!(m.grid_span, 0.0);
        let err = minimize_scalar(|_| Ok(f64::INFINITY), &cfg()).unwrap_err();
        assert!(matches!(err, Error::ObjectiveNotFinite { points: 17 }));
        // sentinel on part of the domain is tolerated
        let m = minimize_scalar(|x| Ok(if x < 0.5 { f64::INFINITY } else { (x - 0.8).powi(2) }), &cfg()).unwrap();
        assert!((m.argmin - 0.8).abs() < 1e-3);
    }

    #[test]
    fn config_validation() {
        let bad = OptimizerConfig { coarse_grid_points: 2, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig { golden_section_tol: 0.0, ..cfg() };
        assert!(minimize_scalar(Ok, &bad).is_err());
    }

    #[test]
    fn jitter_is_seeded() {
        let a = OptimizerConfig { grid_jitter: true, seed: 3, ..cfg() };
        assert_eq!(a.grid(), a.grid());
        assert_ne!(a.grid(), cfg().grid());
        assert_eq!(a.grid()[0], 0.0);
        assert_eq!(*a.grid().last().unwrap(), 1.0);
        let m = minimize_scalar(|x| Ok((x - 0.41).powi(2)), &a).unwrap();
        assert!((m.argmin - 0.41).abs() < 1e-3);
    }

    struct Bowl {
        x: Vec<f64>,
        target: Vec<f64>,
        coupling: f64,
    }

    impl Bowl {
        fn f(&self, x: &[f64]) -> f64 {
            // coupled quadratic
            let d: Vec<f64> = x.iter().zip(&self.target).map(|(a, b)| a - b).collect();
            d.iter().map(|v| v * v).sum::<f64>() + self.coupling * d[0] * d[1]
        }
    }

    impl CoordinateObjective for Bowl {
        fn dim(&self) -> usize {
            self.x.len()
        }
        fn value(&self) -> f64 {
            self.f(&self.x)
        }
        fn position(&self) -> Vec<f64> {
            self.x.clone()
        }
        fn trial(&mut self, coord: usize, x: f64) -> Result<f64> {
            let mut p = self.x.clone();
            p[coord] = x;
            Ok(self.f(&p))
        }
        fn accept(&mut self, coord: usize, x: f64) -> Result<()> {
            self.x[coord] = x;
            Ok(())
        }
        fn trial_point(&mut self, x: &[f64]) -> Result<f64> {
            Ok(self.f(x))
        }
    }

    #[test]
    fn descent_reaches_coupled_minimum_with_monotone_trace() {
        let mut bowl = Bowl { x: vec![0.5; 3], target: vec![0.2, 0.85, 0.6], coupling: 0.5 };
        let out = coordinate_descent(&mut bowl, &OptimizerConfig { max_sweeps: 20, pattern_moves: false, ..cfg() }).unwrap();
        assert!(out.converged);
        for (x, t) in bowl.x.iter().zip(&bowl.target) {
            assert!((x - t).abs() < 5e-3, "{:?}", bowl.x);
        }
        let mut prev = out.initial_loss;
        for e in &out.trace {
            assert!(e.loss <= prev);
            prev = e.loss;
        }
        assert_eq!(out.trace.len(), out.sweeps * 3);
    }

    #[test]
    fn pattern_moves_cross_narrow_valley() {
        let run = |pattern_moves| {
            let mut bowl = Bowl { x: vec![0.1, 0.1], target: vec![0.9, 0.85], coupling: -1.98 };
            let out = coordinate_descent(&mut bowl, &OptimizerConfig { pattern_moves, ..cfg() }).unwrap();
            (out.final_loss, out.trace.iter().filter(|e| e.step == Step::Pattern).count())
        };
        let (plain, none) = run(false);
        let (pattern, used) = run(true);
        assert_eq!(none, 0);
        assert!(used > 0);
        assert!(pattern < 1e-4 && pattern < 0.1 * plain, "{pattern} vs {plain}");
    }

    #[test]
    fn empty_group_is_rejected() {
        let inputs = GroupInputs::new();
        let err = estimate_group(&inputs, ModelKind::ALL.map(DistortionModel::with_default_range), LossSpec::intra_only(), &cfg());
        assert!(matches!(err, Err(Error::SingleImage)));
    }
}
