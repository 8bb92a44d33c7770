//! Single-parameter radial distortion models.
//!
//! Each model relates the radius `r_d` of a point in the distorted image to
//! the radius `r_u` of the same point in the ideal pinhole ("normal") image.
//! Radii are measured in the square normalized frame `[-1, 1]²` centred on
//! the image centre.
//!
//! ```text
//! FOV:  r_u = tan(k r_d) / (2 tan(k/2))      r_d = atan(2 r_u tan(k/2)) / k
//! DM:   r_u = r_d / (1 + k r_d²)             r_d = 2 r_u / (1 + sqrt(1 - 4 k r_u²))
//! ED:   r_u = k tan(r_d / k)                 r_d = k atan(r_u / k)
//! ```
//!
//! `forward` is the distorted → normal direction (rectification), `backward`
//! is normal → distorted (synthesis and re-distortion).

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three supported distortion models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "FOV")]
    Fov,
    #[serde(rename = "DM")]
    Dm,
    #[serde(rename = "ED")]
    Ed,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Fov, ModelKind::Dm, ModelKind::Ed];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fov => "FOV",
            ModelKind::Dm => "DM",
            ModelKind::Ed => "ED",
        }
    }

    /// Position in [`ModelKind::ALL`].
    pub fn index(self) -> usize {
        match self {
            ModelKind::Fov => 0,
            ModelKind::Dm => 1,
            ModelKind::Ed => 2,
        }
    }

    /// Default admissible parameter range.
    pub fn default_range(self) -> ParamRange {
        match self {
            ModelKind::Fov => ParamRange { k_min: 0.2, k_max: 1.2 },
            ModelKind::Dm => ParamRange { k_min: -1.0, k_max: -0.02 },
            ModelKind::Ed => ParamRange { k_min: 0.7, k_max: 2.0 },
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "FOV" => Ok(ModelKind::Fov),
            "DM" => Ok(ModelKind::Dm),
            "ED" => Ok(ModelKind::Ed),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

/// Closed interval of raw parameter values, `k_min < k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub k_min: f64,
    pub k_max: f64,
}

impl ParamRange {
    pub fn new(k_min: f64, k_max: f64) -> Result<Self> {
        if !(k_min.is_finite() && k_max.is_finite() && k_min < k_max) {
            return Err(Error::InvalidRange { k_min, k_max });
        }
        Ok(Self { k_min, k_max })
    }

    pub fn width(&self) -> f64 {
        self.k_max - self.k_min
    }

    pub fn contains(&self, k: f64) -> bool {
        k >= self.k_min && k <= self.k_max
    }
}

/// A model kind together with its admissible parameter range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionModel {
    pub kind: ModelKind,
    pub range: ParamRange,
}

impl DistortionModel {
    pub fn new(kind: ModelKind, range: ParamRange) -> Self {
        Self { kind, range }
    }

    pub fn with_default_range(kind: ModelKind) -> Self {
        Self::new(kind, kind.default_range())
    }

    fn check_param(&self, k: f64) -> Result<()> {
        if !self.range.contains(k) {
            return Err(Error::ParamOutOfRange {
                model: self.kind,
                k,
                k_min: self.range.k_min,
                k_max: self.range.k_max,
            });
        }
        Ok(())
    }

    /// Maps a raw parameter to `[0, 1]`.
    pub fn normalize(&self, k: f64) -> Result<f64> {
        self.check_param(k)?;
        Ok((k - self.range.k_min) / self.range.width())
    }

    /// Maps a normalized parameter in `[0, 1]` back to the raw range.
    pub fn denormalize(&self, k_norm: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&k_norm) {
            return Err(Error::NormalizedOutOfRange(k_norm));
        }
        Ok((self.range.k_min + k_norm * self.range.width()).clamp(self.range.k_min, self.range.k_max))
    }

    /// Distorted radius → normal radius.
    ///
    /// `Ok(None)` marks a radius past the model's singularity.
    pub fn radial_forward(&self, r_d: f64, k: f64) -> Result<Option<f64>> {
        check_radius(r_d)?;
        self.check_param(k)?;
        Ok(forward_radius(self.kind, r_d, k))
    }

    /// Normal radius → distorted radius.
    pub fn radial_backward(&self, r_u: f64, k: f64) -> Result<f64> {
        check_radius(r_u)?;
        self.check_param(k)?;
        backward_radius(self.kind, r_u, k).ok_or(Error::NoRealRoot { model: self.kind, r_u, k })
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidRadius(r));
    }
    Ok(())
}

/// Unchecked forward mapping used by the warping inner loops.
#[inline]
pub(crate) fn forward_radius(kind: ModelKind, r_d: f64, k: f64) -> Option<f64> {
    let r_u = match kind {
        ModelKind::Fov => {
            let angle = k * r_d;
            if angle >= FRAC_PI_2 {
                return None;
            }
            angle.tan() / (2.0 * (0.5 * k).tan())
        }
        ModelKind::Dm => {
            let denom = 1.0 + k * r_d * r_d;
            if denom <= 0.0 {
                return None;
            }
            r_d / denom
        }
        ModelKind::Ed => {
            let theta = r_d / k;
            if theta >= FRAC_PI_2 {
                return None;
            }
            k * theta.tan()
        }
    };
    r_u.is_finite().then_some(r_u)
}

/// Unchecked backward mapping used by the warping inner loops.
///
/// `None` only for DM with positive `k` and a negative discriminant.
#[inline]
pub(crate) fn backward_radius(kind: ModelKind, r_u: f64, k: f64) -> Option<f64> {
    match kind {
        ModelKind::Fov => Some((2.0 * r_u * (0.5 * k).tan()).atan() / k),
        ModelKind::Dm => {
            // Smaller positive root, rationalized so r_u = 0 needs no special case.
            let disc = 1.0 - 4.0 * k * r_u * r_u;
            if disc < 0.0 {
                return None;
            }
            Some(2.0 * r_u / (1.0 + disc.sqrt()))
        }
        ModelKind::Ed => Some(k * (r_u / k).atan()),
    }
}

/// Largest distorted radius that maps to a finite normal radius, if bounded.
pub fn forward_domain_limit(kind: ModelKind, k: f64) -> Option<f64> {
    match kind {
        ModelKind::Fov => Some(FRAC_PI_2 / k),
        ModelKind::Dm if k < 0.0 => Some((-1.0 / k).sqrt()),
        ModelKind::Dm => None,
        ModelKind::Ed => Some(FRAC_PI_2 * k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(kind: ModelKind) -> DistortionModel {
        DistortionModel::with_default_range(kind)
    }

    fn wide(kind: ModelKind) -> DistortionModel {
        DistortionModel::new(kind, ParamRange::new(1e-9, 1e4).unwrap())
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        for kind in ModelKind::ALL {
            let m = model(kind);
            assert_eq!(m.normalize(m.range.k_min).unwrap(), 0.0);
            assert_eq!(m.normalize(m.range.k_max).unwrap(), 1.0);
        }
        let dm = model(ModelKind::Dm);
        assert!((dm.normalize(-0.51).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        let err = model(ModelKind::Dm).normalize(0.1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("DM") && msg.contains("-1") && msg.contains("-0.02"), "{msg}");
    }

    #[test]
    fn default_ranges() {
        assert_eq!(ModelKind::Dm.default_range(), ParamRange { k_min: -1.0, k_max: -0.02 });
        assert_eq!(ModelKind::Fov.default_range(), ParamRange { k_min: 0.2, k_max: 1.2 });
        assert_eq!(ModelKind::Ed.default_range(), ParamRange { k_min: 0.7, k_max: 2.0 });
        assert!(ParamRange::new(1.0, 1.0).is_err());
    }

    #[test]
    fn forward_examples() {
        assert_eq!(model(ModelKind::Fov).radial_forward(0.0, 0.5).unwrap(), Some(0.0));
        // independent evaluation of r / (1 + k r^2)
        let expected = 0.5 / (1.0 - 0.5 * 0.25);
        let got = model(ModelKind::Dm).radial_forward(0.5, -0.5).unwrap().unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.571_428_571_428_571).abs() < 1e-12);

        let fov = wide(ModelKind::Fov).radial_forward(0.7, 1e-6).unwrap().unwrap();
        assert!((fov - 0.7).abs() < 1e-6);
        // tan(x) ~ x + x^3/3 for x = 8e-4
        let ed = wide(ModelKind::Ed).radial_forward(0.8, 1e3).unwrap().unwrap();
        assert!((ed - 0.8).abs() < 1e-5);
    }

    #[test]
    fn forward_marks_singularities() {
        let fov = model(ModelKind::Fov);
        assert_eq!(fov.radial_forward(1.4, 1.2).unwrap(), None);
        let dm = model(ModelKind::Dm);
        assert_eq!(dm.radial_forward(1.0, -1.0).unwrap(), None);
        assert_eq!(dm.radial_forward(1.2, -1.0).unwrap(), None);
        let ed = model(ModelKind::Ed);
        assert_eq!(ed.radial_forward(1.2, 0.7).unwrap(), None);
    }

    #[test]
    fn forward_rejects_bad_radius() {
        let dm = model(ModelKind::Dm);
        assert!(matches!(dm.radial_forward(f64::NAN, -0.5), Err(Error::InvalidRadius(_))));
        assert!(matches!(dm.radial_forward(-0.1, -0.5), Err(Error::InvalidRadius(_))));
        assert!(matches!(dm.radial_backward(-0.1, -0.5), Err(Error::InvalidRadius(_))));
    }

    #[test]
    fn backward_examples() {
        for kind in ModelKind::ALL {
            let m = model(kind);
            let k = 0.5 * (m.range.k_min + m.range.k_max);
            assert_eq!(m.radial_backward(0.0, k).unwrap(), 0.0);
        }
        let dm = model(ModelKind::Dm);
        let r_u = dm.radial_forward(0.5, -0.5).unwrap().unwrap();
        assert!((dm.radial_backward(r_u, -0.5).unwrap() - 0.5).abs() < 1e-12);

        let fov = model(ModelKind::Fov);
        let r_u = fov.radial_forward(0.6, 0.9).unwrap().unwrap();
        assert!((fov.radial_backward(r_u, 0.9).unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn dm_backward_matches_textbook_root() {
        let dm = model(ModelKind::Dm);
        for &(r_u, k) in &[(0.3f64, -0.2f64), (0.9, -1.0), (1.5, -0.6)] {
            let textbook = (1.0 - (1.0 - 4.0 * k * r_u * r_u).sqrt()) / (2.0 * k * r_u);
            assert!((dm.radial_backward(r_u, k).unwrap() - textbook).abs() < 1e-12);
        }
        // tiny radius: series r_u + k r_u^3
        let r = 1e-7;
        assert!((dm.radial_backward(r, -0.5).unwrap() - (r - 0.5 * r * r * r)).abs() < 1e-20);
    }

    #[test]
    fn dm_positive_parameter_without_real_root() {
        let dm = DistortionModel::new(ModelKind::Dm, ParamRange::new(-1.0, 1.0).unwrap());
        assert!(matches!(dm.radial_backward(0.8, 1.0), Err(Error::NoRealRoot { .. })));
        assert!(dm.radial_backward(0.4, 1.0).is_ok());
    }

    #[test]
    fn round_trip_grid() {
        for kind in ModelKind::ALL {
            let m = model(kind);
            for ki in 0..10 {
                let k = m.denormalize(ki as f64 / 9.0).unwrap();
                let limit = forward_domain_limit(kind, k).unwrap_or(f64::INFINITY).min(2f64.sqrt());
                for ri in 0..100 {
                    let r_d = 0.999 * limit * ri as f64 / 99.0;
                    let Some(r_u) = m.radial_forward(r_d, k).unwrap() else {
                        panic!("{kind} k={k} r_d={r_d} unexpectedly invalid");
                    };
                    let back = m.radial_backward(r_u, k).unwrap();
                    assert!((back - r_d).abs() < 1e-6, "{kind} k={k} r_d={r_d} back={back}");
                }
            }
        }
    }

    #[test]
    fn forward_strictly_increasing() {
        for kind in ModelKind::ALL {
            let m = model(kind);
            for ki in 0..5 {
                let k = m.denormalize(ki as f64 / 4.0).unwrap();
                let limit = forward_domain_limit(kind, k).unwrap_or(f64::INFINITY).min(2f64.sqrt());
                let mut prev = -1.0;
                for ri in 0..2000 {
                    let r_d = 0.999 * limit * ri as f64 / 1999.0;
                    let r_u = m.radial_forward(r_d, k).unwrap().unwrap();
                    assert!(r_u > prev, "{kind} k={k} not increasing at r_d={r_d}");
                    prev = r_u;
                }
            }
        }
    }

    #[test]
    fn identity_limits() {
        let fov = wide(ModelKind::Fov);
        let ed = wide(ModelKind::Ed);
        for i in 0..=20 {
            let r = 1.4 * i as f64 / 20.0;
            let a = fov.radial_forward(r, 1e-6).unwrap().unwrap();
            let b = ed.radial_forward(r, 1e3).unwrap().unwrap();
            assert!((a - r).abs() < 1e-4 && (b - r).abs() < 1e-4);
        }
    }

    #[test]
    fn model_kind_strings() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
            assert_eq!(serde_json::to_string(&kind).unwrap(), format!("\"{kind}\""));
        }
        assert!("fov".parse::<ModelKind>().is_err());
    }

    proptest! {
        #[test]
        fn normalize_denormalize_identity(t in 0.0f64..=1.0, which in 0usize..3) {
            let m = model(ModelKind::ALL[which]);
            let k = m.denormalize(t).unwrap();
            let back = m.denormalize(m.normalize(k).unwrap()).unwrap();
            prop_assert!((back - k).abs() < 1e-12);
            prop_assert!((m.normalize(k).unwrap() - t).abs() < 1e-12);
        }
    }
}
