//! Self-supervised consistency objectives.
//!
//! A group holds two distorted views per model of one unseen scene. With
//! candidate parameters `k_i^j` every view is rectified (`B_i^j`), and each
//! rectification is re-distorted with the *partner* slot's parameter
//! (`Â_i^j = distort(B_i^m, k_i^j)`, `m ≠ j`).
//!
//! * intra: `Σ_i Σ_j |A_i^j − Â_i^j|`
//! * inter: `Σ_(i,m)∈pairs Σ_j |B_i^j − B_m^j|`
//! * total: intra + inter
//!
//! All differences are mean absolute errors over the joint validity mask.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DistortionModel, ModelKind};
use crate::warp::{distort, rectify, WarpResult};

/// Minimum joint valid fraction below which a comparison is meaningless.
pub const MIN_VALID_FRACTION: f64 = 0.05;

/// One masked L1 comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1 {
    /// Mean absolute difference, `+∞` when the overlap is below [`MIN_VALID_FRACTION`].
    pub value: f64,
    pub valid_fraction: f64,
}

/// Mean `|a − b|` over pixels valid in both inputs.
pub fn masked_l1(a: &WarpResult, b: &WarpResult) -> Result<L1> {
    if !a.image.same_shape(&b.image) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.image.height(),
            a.image.width(),
            a.image.channels(),
            b.image.height(),
            b.image.width(),
            b.image.channels()
        )));
    }
    let ch = a.image.channels();
    let (am, bm) = (a.mask.bits(), b.mask.bits());
    let mut count = 0usize;
    let mut sum = 0.0;
    for (p, (pa, pb)) in a.image.data().chunks_exact(ch).zip(b.image.data().chunks_exact(ch)).enumerate() {
        if am[p] && bm[p] {
            count += 1;
            for (x, y) in pa.iter().zip(pb) {
                sum += (x - y).abs();
            }
        }
    }
    let valid_fraction = count as f64 / am.len() as f64;
    let value = if valid_fraction < MIN_VALID_FRACTION {
        f64::INFINITY
    } else {
        sum / (count * ch) as f64
    };
    Ok(L1 { value, valid_fraction })
}

/// Unordered model pairs compared by the inter-model term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSet {
    /// (FOV,DM), (FOV,ED), (DM,ED)
    #[serde(rename = "m1")]
    M1,
    /// (FOV,DM)
    #[serde(rename = "m2")]
    M2,
    /// (FOV,ED)
    #[serde(rename = "m3")]
    M3,
    /// (DM,ED)
    #[serde(rename = "m4")]
    #[default]
    M4,
}


impl PairSet {
    pub fn pairs(self) -> &'static [(ModelKind, ModelKind)] {
        use ModelKind::*;
        match self {
            PairSet::M1 => &[(Fov, Dm), (Fov, Ed), (Dm, Ed)],
            PairSet::M2 => &[(Fov, Dm)],
            PairSet::M3 => &[(Fov, Ed)],
            PairSet::M4 => &[(Dm, Ed)],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairSet::M1 => "m1",
            PairSet::M2 => "m2",
            PairSet::M3 => "m3",
            PairSet::M4 => "m4",
        }
    }

    pub fn involves(self, kind: ModelKind) -> bool {
        self.pairs().iter().any(|&(a, b)| a == kind || b == kind)
    }
}

impl fmt::Display for PairSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" => Ok(PairSet::M1),
            "m2" => Ok(PairSet::M2),
            "m3" => Ok(PairSet::M3),
            "m4" => Ok(PairSet::M4),
            other => Err(Error::InvalidLossSpec(format!("unknown pair set {other:?} (expected m1..m4)"))),
        }
    }
}

/// Which terms enter the group objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSpec {
    use_intra: bool,
    inter: Option<PairSet>,
}

impl LossSpec {
    pub fn new(use_intra: bool, inter: Option<PairSet>) -> Result<Self> {
        match (use_intra, inter) {
            (false, Some(_)) => Err(Error::InterOnly),
            (false, None) => Err(Error::InvalidLossSpec("no loss term selected".into())),
            _ => Ok(Self { use_intra, inter }),
        }
    }

    pub fn intra_only() -> Self {
        Self { use_intra: true, inter: None }
    }

    pub fn intra_inter(pairs: PairSet) -> Self {
        Self { use_intra: true, inter: Some(pairs) }
    }

    pub fn use_intra(&self) -> bool {
        self.use_intra
    }

    pub fn inter_pairs(&self) -> Option<PairSet> {
        self.inter
    }

    /// Parses the command-line vocabulary `intra`, `intra+inter`, `inter`.
    pub fn parse(loss: &str, pairs: PairSet) -> Result<Self> {
        match loss {
            "intra" => Self::new(true, None),
            "intra+inter" => Self::new(true, Some(pairs)),
            "inter" => Self::new(false, Some(pairs)),
            other => Err(Error::InvalidLossSpec(format!(
                "unknown loss {other:?} (expected intra or intra+inter)"
            ))),
        }
    }
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::intra_inter(PairSet::M4)
    }
}

/// Distorted inputs of one group, two slots per model; absent models are `None`.
#[derive(Debug, Clone)]
pub struct GroupInputs {
    pub slots: [Option<[WarpResult; 2]>; 3],
}

impl GroupInputs {
    pub fn new() -> Self {
        Self { slots: [None, None, None] }
    }

    pub fn with(mut self, kind: ModelKind, first: WarpResult, second: WarpResult) -> Self {
        self.slots[kind.index()] = Some([first, second]);
        self
    }

    pub fn get(&self, kind: ModelKind) -> Option<&[WarpResult; 2]> {
        self.slots[kind.index()].as_ref()
    }

    pub fn models(&self) -> Vec<ModelKind> {
        ModelKind::ALL.into_iter().filter(|k| self.slots[k.index()].is_some()).collect()
    }
}

impl Default for GroupInputs {
    fn default() -> Self {
        Self::new()
    }
}

/// Model slots, per-model ranges and raw parameters needed to score a group.
#[derive(Debug, Clone)]
pub struct GroupState<'a> {
    inputs: &'a GroupInputs,
    models: [DistortionModel; 3],
    params: [[f64; 2]; 3],
    rectified: [Option<[WarpResult; 2]>; 3],
    redistorted: [Option<[WarpResult; 2]>; 3],
}

/// Rectified views `B^j` and partner re-distortions `Â^j` of one model.
pub(crate) fn derive_model(
    inputs: &[WarpResult; 2],
    model: &DistortionModel,
    k: [f64; 2],
) -> Result<([WarpResult; 2], [WarpResult; 2])> {
    let b = [rectify(&inputs[0], model, k[0])?, rectify(&inputs[1], model, k[1])?];
    let a_hat = [distort(&b[1], model, k[0])?, distort(&b[0], model, k[1])?];
    Ok((b, a_hat))
}

impl<'a> GroupState<'a> {
    /// Derives all rectified and re-distorted buffers for the given raw parameters.
    ///
    /// `params` is indexed by [`ModelKind::index`]; entries for absent models are ignored.
    pub fn new(inputs: &'a GroupInputs, models: [DistortionModel; 3], params: [[f64; 2]; 3]) -> Result<Self> {
        let mut rectified = [None, None, None];
        let mut redistorted = [None, None, None];
        for kind in inputs.models() {
            let i = kind.index();
            let slot = inputs.slots[i].as_ref().expect("present");
            let (b, a_hat) = derive_model(slot, &models[i], params[i])?;
            rectified[i] = Some(b);
            redistorted[i] = Some(a_hat);
        }
        Ok(Self { inputs, models, params, rectified, redistorted })
    }

    pub fn with_default_models(inputs: &'a GroupInputs, params: [[f64; 2]; 3]) -> Result<Self> {
        Self::new(inputs, ModelKind::ALL.map(DistortionModel::with_default_range), params)
    }

    pub fn params(&self) -> [[f64; 2]; 3] {
        self.params
    }

    pub fn models(&self) -> &[DistortionModel; 3] {
        &self.models
    }

    pub fn inputs(&self) -> &GroupInputs {
        self.inputs
    }

    pub fn rectified(&self, kind: ModelKind) -> Result<&[WarpResult; 2]> {
        self.rectified[kind.index()].as_ref().ok_or(Error::MissingModel(kind))
    }

    pub fn redistorted(&self, kind: ModelKind) -> Result<&[WarpResult; 2]> {
        self.redistorted[kind.index()].as_ref().ok_or(Error::MissingModel(kind))
    }

    fn distorted(&self, kind: ModelKind) -> Result<&[WarpResult; 2]> {
        self.inputs.get(kind).ok_or(Error::MissingModel(kind))
    }

    /// Any model whose two slot parameters coincide, the configuration where
    /// the cross re-distortion loses its signal.
    pub fn degenerate(&self) -> bool {
        self.inputs.models().iter().any(|k| {
            let [a, b] = self.params[k.index()];
            a == b
        })
    }
}

/// Individual terms of the group objective, summed in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTerms {
    /// `intra[model][slot]`, `None` if the model is not scored.
    pub intra: [Option<[L1; 2]>; 3],
    /// Per pair of the spec's pair set, both slots.
    pub inter: Vec<[L1; 2]>,
}

/// Serializable summary of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub intra: f64,
    pub inter: f64,
    pub total: f64,
    pub valid_fraction: f64,
}

impl LossTerms {
    pub fn breakdown(&self) -> LossBreakdown {
        let mut intra = 0.0;
        let mut inter = 0.0;
        let mut frac = 0.0;
        let mut n = 0usize;
        for terms in self.intra.iter().flatten() {
            for t in terms {
                intra += t.value;
                frac += t.valid_fraction;
                n += 1;
            }
        }
        for terms in &self.inter {
            for t in terms {
                inter += t.value;
                frac += t.valid_fraction;
                n += 1;
            }
        }
        LossBreakdown {
            intra,
            inter,
            total: intra + inter,
            valid_fraction: if n == 0 { 0.0 } else { frac / n as f64 },
        }
    }
}

pub(crate) fn intra_terms(a: &[WarpResult; 2], a_hat: &[WarpResult; 2]) -> Result<[L1; 2]> {
    Ok([masked_l1(&a[0], &a_hat[0])?, masked_l1(&a[1], &a_hat[1])?])
}

pub(crate) fn inter_terms(b_i: &[WarpResult; 2], b_m: &[WarpResult; 2]) -> Result<[L1; 2]> {
    Ok([masked_l1(&b_i[0], &b_m[0])?, masked_l1(&b_i[1], &b_m[1])?])
}

/// Result of the intra-model term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraLoss {
    pub value: f64,
    /// Some scored model has equal slot parameters.
    pub degenerate: bool,
}

/// Cross re-distortion consistency over `models`.
pub fn intra_loss(state: &GroupState<'_>, models: &[ModelKind]) -> Result<IntraLoss> {
    let mut value = 0.0;
    let mut degenerate = false;
    for &kind in ModelKind::ALL.iter().filter(|k| models.contains(k)) {
        let terms = intra_terms(state.distorted(kind)?, state.redistorted(kind)?)?;
        value += terms[0].value + terms[1].value;
        let [a, b] = state.params[kind.index()];
        degenerate |= a == b;
    }
    Ok(IntraLoss { value, degenerate })
}

/// Agreement of rectifications under different models.
pub fn inter_loss(state: &GroupState<'_>, pairs: PairSet) -> Result<f64> {
    let mut value = 0.0;
    for &(i, m) in pairs.pairs() {
        let terms = inter_terms(state.rectified(i)?, state.rectified(m)?)?;
        value += terms[0].value + terms[1].value;
    }
    Ok(value)
}

/// All terms selected by `spec`, intra over every model present in the group.
pub fn loss_terms(state: &GroupState<'_>, spec: &LossSpec) -> Result<LossTerms> {
    let mut terms = LossTerms::default();
    if spec.use_intra {
        for kind in state.inputs.models() {
            terms.intra[kind.index()] = Some(intra_terms(state.distorted(kind)?, state.redistorted(kind)?)?);
        }
    }
    if let Some(pairs) = spec.inter {
        for &(i, m) in pairs.pairs() {
            terms.inter.push(inter_terms(state.rectified(i)?, state.rectified(m)?)?);
        }
    }
    Ok(terms)
}

/// `L_intra + L_inter` with unit weights.
pub fn total_loss(state: &GroupState<'_>, spec: &LossSpec) -> Result<LossBreakdown> {
    Ok(loss_terms(state, spec)?.breakdown())
}

/// The naive re-distortion loop `|A_i^j − distort(rectify(A_i^j, k), k)|`.
///
/// Near zero for any parameter, which is why the objective above re-distorts
/// with the partner slot instead.
pub fn same_param_loop_loss(state: &GroupState<'_>, models: &[ModelKind]) -> Result<f64> {
    let mut value = 0.0;
    for &kind in ModelKind::ALL.iter().filter(|k| models.contains(k)) {
        let a = state.distorted(kind)?;
        let b = state.rectified(kind)?;
        let model = &state.models[kind.index()];
        let k = state.params[kind.index()];
        for j in 0..2 {
            let loop_back = distort(&b[j], model, k[j])?;
            value += masked_l1(&a[j], &loop_back)?.value;
        }
    }
    Ok(value)
}

/// Alternative consistency losses evaluated on a cross-head state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// All inputs rectified by one head agree, summed over heads.
    #[serde(rename = "L_s")]
    SameHead,
    /// Inputs re-projected through a different model's backward warp.
    #[serde(rename = "L_r")]
    Reprojection,
    /// The same input rectified by different heads agrees.
    #[serde(rename = "L_c")]
    CrossHead,
}

/// One distorted input per model, each rectified by every model ("head").
///
/// `params[head][input]` is the raw parameter head `head` assigns to the
/// input synthesized by model `input`. Diagonal entries are the only ones
/// with a ground truth.
#[derive(Debug, Clone)]
pub struct CrossHeadState<'a> {
    inputs: &'a [WarpResult; 3],
    models: [DistortionModel; 3],
    params: [[f64; 3]; 3],
    rectified: [[WarpResult; 3]; 3],
}

impl<'a> CrossHeadState<'a> {
    pub fn new(inputs: &'a [WarpResult; 3], models: [DistortionModel; 3], params: [[f64; 3]; 3]) -> Result<Self> {
        let mut rect: Vec<[WarpResult; 3]> = Vec::with_capacity(3);
        for head in 0..3 {
            let row = [
                rectify(&inputs[0], &models[head], params[head][0])?,
                rectify(&inputs[1], &models[head], params[head][1])?,
                rectify(&inputs[2], &models[head], params[head][2])?,
            ];
            rect.push(row);
        }
        let rectified: [[WarpResult; 3]; 3] = rect.try_into().expect("three heads");
        Ok(Self { inputs, models, params, rectified })
    }

    pub fn with_default_models(inputs: &'a [WarpResult; 3], params: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(inputs, ModelKind::ALL.map(DistortionModel::with_default_range), params)
    }

    pub fn params(&self) -> [[f64; 3]; 3] {
        self.params
    }

    pub fn rectified(&self, head: ModelKind, input: ModelKind) -> &WarpResult {
        &self.rectified[head.index()][input.index()]
    }

    /// Replaces one parameter and re-renders only the affected rectification.
    pub fn set_param(&mut self, head: usize, input: usize, k: f64) -> Result<()> {
        self.rectified[head][input] = rectify(&self.inputs[input], &self.models[head], k)?;
        self.params[head][input] = k;
        Ok(())
    }

    pub fn inputs(&self) -> &[WarpResult; 3] {
        self.inputs
    }

    pub fn models(&self) -> &[DistortionModel; 3] {
        &self.models
    }
}

/// Evaluates one alternative loss.
pub fn variant_loss(state: &CrossHeadState<'_>, variant: Variant) -> Result<f64> {
    let mut value = 0.0;
    match variant {
        Variant::SameHead => {
            for head in &state.rectified {
                for a in 0..3 {
                    for b in a + 1..3 {
                        value += masked_l1(&head[a], &head[b])?.value;
                    }
                }
            }
        }
        Variant::CrossHead => {
            for h in 0..3 {
                for g in h + 1..3 {
                    for input in 0..3 {
                        value += masked_l1(&state.rectified[h][input], &state.rectified[g][input])?.value;
                    }
                }
            }
        }
        Variant::Reprojection => {
            for i in 0..3 {
                for j in 0..3 {
                    if i == j {
                        continue;
                    }
                    let reprojected = distort(&state.rectified[i][i], &state.models[j], state.params[j][j])?;
                    value += masked_l1(&state.inputs[j], &reprojected)?.value;
                }
            }
        }
    }
    Ok(value)
}

/// Sum of several variants.
pub fn variant_losses(state: &CrossHeadState<'_>, variants: &[Variant]) -> Result<f64> {
    variants.iter().try_fold(0.0, |acc, &v| Ok(acc + variant_loss(state, v)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageBuffer;

    fn flat(v: f64) -> WarpResult {
        WarpResult::full(ImageBuffer::filled(16, 16, 3, v))
    }

    #[test]
    fn masked_l1_basics() {
        let a = flat(0.2);
        let b = flat(0.5);
        assert_eq!(masked_l1(&a, &a).unwrap().value, 0.0);
        assert!((masked_l1(&a, &b).unwrap().value - 0.3).abs() < 1e-12);
        assert_eq!(masked_l1(&a, &b).unwrap().value, masked_l1(&b, &a).unwrap().value);

        let mut empty = flat(0.5);
        empty.mask = crate::image::Mask::new(16, 16, vec![false; 256]).unwrap();
        let l = masked_l1(&a, &empty).unwrap();
        assert!(l.value.is_infinite() && l.valid_fraction == 0.0);

        let other = WarpResult::full(ImageBuffer::filled(8, 8, 3, 0.5));
        assert!(matches!(masked_l1(&a, &other), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn masked_l1_ignores_invalid_pixels() {
        let a = flat(0.2);
        let mut b = WarpResult::full(ImageBuffer::from_fn(16, 16, 3, |v, _, _| if v < 8 { 0.2 } else { 0.0 }));
        b.mask = crate::image::Mask::new(16, 16, (0..256).map(|p| p / 16 < 8).collect()).unwrap();
        let l = masked_l1(&a, &b).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.valid_fraction, 0.5);
    }

    #[test]
    fn loss_spec_rules() {
        assert!(matches!(LossSpec::new(false, Some(PairSet::M4)), Err(Error::InterOnly)));
        assert!(matches!(LossSpec::parse("inter", PairSet::M1), Err(Error::InterOnly)));
        assert!(Error::InterOnly.to_string().contains("trivial solution"));
        assert_eq!(LossSpec::default().inter_pairs(), Some(PairSet::M4));
        assert_eq!(LossSpec::parse("intra", PairSet::M2).unwrap(), LossSpec::intra_only());
        assert_eq!("m3".parse::<PairSet>().unwrap(), PairSet::M3);
        assert!("m5".parse::<PairSet>().is_err());
    }

    #[test]
    fn pair_sets() {
        assert_eq!(PairSet::M1.pairs().len(), 3);
        assert_eq!(PairSet::M4.pairs(), &[(ModelKind::Dm, ModelKind::Ed)]);
        assert!(!PairSet::M4.involves(ModelKind::Fov));
        assert_eq!(serde_json::to_string(&PairSet::M2).unwrap(), "\"m2\"");
    }

    #[test]
    fn missing_model_is_reported() {
        let inputs = GroupInputs::new().with(ModelKind::Dm, flat(0.3), flat(0.3));
        let state = GroupState::with_default_models(&inputs, [[0.5; 2], [-0.5, -0.4], [1.0; 2]]).unwrap();
        assert!(matches!(inter_loss(&state, PairSet::M4), Err(Error::MissingModel(ModelKind::Ed))));
        assert!(intra_loss(&state, &[ModelKind::Dm]).unwrap().value < 1e-12);
    }
}
