//! NME and AUC metrics comparing predicted anchors/contours against dense
//! ground-truth landmarks.
//!
//! Every ground-truth landmark is either an anchor landmark (scored
//! point-to-point against the matching predicted anchor) or a contour
//! landmark (scored point-to-curve against the matching predicted
//! contour). Errors are normalized by the inter-ocular distance and
//! reported in percent.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{point_polyline_distance, Point2, Polyline};
use crate::{Error, Result};

/// Dense ground-truth landmarks with their role assignment.
///
/// `parts` maps anchor/contour names to a face-part tag (eyes, nose,
/// mouth, chin, ...); names without a tag are simply skipped in the
/// per-part breakdown. `normalization_pair` names the two anchors whose
/// distance normalizes all errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLandmarks {
    pub anchor_landmarks: Vec<(String, Point2)>,
    pub contour_landmark_groups: Vec<(String, Vec<Point2>)>,
    pub parts: BTreeMap<String, String>,
    pub normalization_pair: (String, String),
}

impl GroundTruthLandmarks {
    fn anchor(&self, name: &str) -> Option<Point2> {
        self.anchor_landmarks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
    }

    /// Inter-ocular distance between the two normalization anchors.
    pub fn normalization_distance(&self) -> Result<f64> {
        let a = self
            .anchor(&self.normalization_pair.0)
            .ok_or_else(|| Error::Evaluation(format!("missing normalization anchor '{}'", self.normalization_pair.0)))?;
        let b = self
            .anchor(&self.normalization_pair.1)
            .ok_or_else(|| Error::Evaluation(format!("missing normalization anchor '{}'", self.normalization_pair.1)))?;
        let d = a.distance(b);
        if !(d > 0.0) {
            return Err(Error::Evaluation("normalization distance is zero".into()));
        }
        Ok(d)
    }
}

/// Predicted anchors and contours, matched to ground truth by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub anchors: Vec<(String, Point2)>,
    pub contours: Vec<(String, Polyline)>,
}

impl Prediction {
    pub fn anchor(&self, name: &str) -> Option<Point2> {
        self.anchors.iter().find(|(n, _)| n == name).map(|(_, p)| *p)
    }

    pub fn contour(&self, name: &str) -> Option<&Polyline> {
        self.contours
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
    }
}

/// Evaluation knobs: error cutoff in percent and names to exclude.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// CED/AUC cutoff and missing-part penalty level, in percent of the
    /// normalization distance.
    pub cutoff: f64,
    /// Anchor/contour names whose landmarks are skipped entirely.
    pub exclude: BTreeSet<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cutoff: 6.0,
            exclude: BTreeSet::new(),
        }
    }
}

/// Single-face evaluation result. All `nme_*` values are in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_landmark_errors: Vec<f64>,
    pub nme_overall: f64,
    pub nme_per_part: BTreeMap<String, f64>,
    pub ced: Vec<(f64, f64)>,
    pub auc: f64,
    /// Names whose predicted counterpart was missing and were scored at
    /// the penalty error (cutoff percent of the normalization distance).
    pub missing: Vec<String>,
}

/// Point-to-point error for an anchor landmark.
pub fn anchor_error(l: Point2, predicted: Point2) -> f64 {
    l.distance(predicted)
}

/// Point-to-curve error for a contour landmark.
pub fn contour_landmark_error(l: Point2, predicted: &Polyline) -> f64 {
    point_polyline_distance(l, predicted)
}

/// Full NME evaluation of one face.
///
/// Missing predicted anchors/contours score every affected landmark at
/// the maximum countable error, `cutoff/100 * d`; dropping a hard part
/// therefore never helps the score. Affected names are listed in
/// [`EvalReport::missing`].
pub fn nme_ac(gt: &GroundTruthLandmarks, pred: &Prediction, opts: &EvalOptions) -> Result<EvalReport> {
    if !(opts.cutoff > 0.0) || !opts.cutoff.is_finite() {
        return Err(Error::InvalidParam(format!(
            "cutoff must be > 0, got {}",
            opts.cutoff
        )));
    }
    let d = gt.normalization_distance()?;
    let penalty = opts.cutoff * d / 100.0;

    let mut errors = Vec::new();
    let mut per_part: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut missing = Vec::new();

    let push = |name: &str, err: f64, errors: &mut Vec<f64>, per_part: &mut BTreeMap<String, (f64, usize)>| {
        errors.push(err);
        if let Some(part) = gt.parts.get(name) {
            let e = per_part.entry(part.clone()).or_insert((0.0, 0));
            e.0 += err;
            e.1 += 1;
        }
    };

    for (name, l) in &gt.anchor_landmarks {
        if opts.exclude.contains(name) {
            continue;
        }
        let err = match pred.anchor(name) {
            Some(a) => anchor_error(*l, a),
            None => {
                missing.push(name.clone());
                penalty
            }
        };
        push(name, err, &mut errors, &mut per_part);
    }
    for (name, group) in &gt.contour_landmark_groups {
        if opts.exclude.contains(name) {
            continue;
        }
        match pred.contour(name) {
            Some(c) => {
                for l in group {
                    push(name, contour_landmark_error(*l, c), &mut errors, &mut per_part);
                }
            }
            None => {
                missing.push(name.clone());
                for _ in group {
                    push(name, penalty, &mut errors, &mut per_part);
                }
            }
        }
    }

    if errors.is_empty() {
        return Err(Error::Evaluation("no landmarks to evaluate".into()));
    }
    let mean: f64 = errors.iter().sum::<f64>() / errors.len() as f64;
    let nme_overall = 100.0 * mean / d;
    let nme_per_part = per_part
        .into_iter()
        .map(|(part, (sum, n))| (part, 100.0 * sum / (n as f64 * d)))
        .collect();
    let (ced, auc) = ced_auc(&[nme_overall], opts.cutoff)?;
    Ok(EvalReport {
        per_landmark_errors: errors,
        nme_overall,
        nme_per_part,
        ced,
        auc,
        missing,
    })
}

/// Cumulative error distribution over per-face NME values and its exact
/// integral over `[0, cutoff]`, normalized to percent.
///
/// The CED is the empirical step CDF; the area is integrated exactly, so
/// a single face at `cutoff/2` yields an AUC of 50%.
pub fn ced_auc(nmes: &[f64], cutoff: f64) -> Result<(Vec<(f64, f64)>, f64)> {
    if nmes.is_empty() {
        return Err(Error::Evaluation("no per-face errors".into()));
    }
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidParam(format!("cutoff must be > 0, got {cutoff}")));
    }
    if nmes.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::Evaluation("per-face NME must be finite and >= 0".into()));
    }
    let mut sorted = nmes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;

    let mut ced = Vec::new();
    for (i, &e) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match ced.last_mut() {
            Some((last_e, last_f)) if *last_e == e => *last_f = frac,
            _ => ced.push((e, frac)),
        }
    }

    // Integrate the step CDF exactly over [0, cutoff].
    let mut area = 0.0;
    let mut prev = 0.0;
    for (i, &e) in sorted.iter().enumerate() {
        let x = e.min(cutoff);
        area += (x - prev) * i as f64 / n;
        prev = x;
        if e >= cutoff {
            break;
        }
    }
    if prev < cutoff && sorted.last().copied().unwrap_or(f64::INFINITY) < cutoff {
        area += cutoff - prev;
    }
    let auc = 100.0 * area / cutoff;
    Ok((ced, auc))
}
