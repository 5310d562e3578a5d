//! Loss functionals on heatmaps: the fully supervised weighted-RMS loss,
//! the three weakly supervised terms (landmark, line, far), and their
//! analytic gradients with respect to the predicted heatmap.
//!
//! Gradients chain through the convolutional closed form of the
//! contourness map using transposed correlations (every basis kernel is
//! symmetric under point reflection, so the transpose is the same
//! correlation). All evaluation accumulates in f64.

use crate::contourness::{build_filter_bank, correlate, dense_fields, ideal_peak_contourness, DenseFields, FilterBank};
use crate::geometry::{point_polyline_distance, resample_polyline, Point2, Polyline};
use crate::raster::{Heatmap, HeatmapStack, SigmaParam};
use crate::{Error, Result};

/// Parameters of the contourness-to-loss mapping
/// f(C) = clamp(1 - 2^((C - c_max) / scale), 0, 1).
#[derive(Debug, Clone, Copy)]
pub struct FParams {
    pub c_max: f64,
    pub scale: f64,
}

impl FParams {
    /// c_max computed from the ideal straight-contour heatmap at this
    /// sigma (reference value approximately 4.92 at sigma = 2).
    pub fn defaults(sigma: SigmaParam) -> Self {
        FParams {
            c_max: ideal_peak_contourness(sigma),
            scale: 1.5,
        }
    }
}

/// Hyper-parameters of the loss functionals.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    /// Hard-example emphasis in the weighting term; >= 1.
    pub alpha: f64,
    pub lambda_landmark: f64,
    pub lambda_line: f64,
    /// Contourness pooling radius for the line loss and far mask, pixels.
    pub d_radius: f64,
    pub f_params: FParams,
}

impl LossWeights {
    pub fn defaults(sigma: SigmaParam) -> Self {
        LossWeights {
            alpha: 10.0,
            lambda_landmark: 0.1,
            lambda_line: 0.1,
            d_radius: 6.0,
            f_params: FParams::defaults(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1.0 {
            return Err(Error::InvalidParam("alpha must be >= 1".into()));
        }
        if self.d_radius < 1.0 {
            return Err(Error::InvalidParam("d_radius must be >= 1".into()));
        }
        if !(self.f_params.scale > 0.0) {
            return Err(Error::InvalidParam("f scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Sparse supervision for one contour channel: its landmarks, the
/// line-contour through them, and the frame's anchors.
#[derive(Debug, Clone)]
pub struct WeakSupervision {
    pub landmarks: Vec<Point2>,
    pub line_contour: Polyline,
    pub anchors: Vec<Point2>,
}

impl WeakSupervision {
    pub fn new(landmarks: Vec<Point2>, line_contour: Polyline, anchors: Vec<Point2>) -> Result<Self> {
        for l in &landmarks {
            if point_polyline_distance(*l, &line_contour) > 1e-6 {
                return Err(Error::Geometry(format!(
                    "landmark ({}, {}) not on line-contour",
                    l.x, l.y
                )));
            }
        }
        Ok(WeakSupervision {
            landmarks,
            line_contour,
            anchors,
        })
    }
}

const SQRT_FLOOR: f64 = 1e-12;

#[inline]
fn weight_term(gt: f64, err_abs: f64, alpha: f64) -> f64 {
    1.0 + (alpha - 1.0) * gt.max(err_abs)
}

/// Per-pixel weighting emphasizing positive and hard negative examples:
/// W = 1 + (alpha - 1) max(H, |H - H_pred|).
pub fn weight_map(gt: &Heatmap, pred: &Heatmap, alpha: f64) -> Result<Heatmap> {
    if !gt.same_size(pred) {
        return Err(Error::DimensionMismatch("weight_map inputs differ".into()));
    }
    let data = gt
        .data()
        .iter()
        .zip(pred.data())
        .map(|(&h, &p)| weight_term(h as f64, (h as f64 - p as f64).abs(), alpha) as f32)
        .collect();
    Heatmap::from_data(gt.width(), gt.height(), data)
}

fn check_stacks(gt: &HeatmapStack, pred: &HeatmapStack) -> Result<usize> {
    if gt.len() != pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} gt channels vs {} pred channels",
            gt.len(),
            pred.len()
        )));
    }
    let mut total = 0usize;
    for (g, p) in gt.channels().iter().zip(pred.channels()) {
        if !g.same_size(p) {
            return Err(Error::DimensionMismatch("channel sizes differ".into()));
        }
        total += g.data().len();
    }
    if total == 0 {
        return Err(Error::DimensionMismatch("empty stacks".into()));
    }
    Ok(total)
}

/// Weighted root-mean-square loss over a heatmap stack:
/// L = (1/|H|) sqrt(Sum W (H - H_pred)^2).
pub fn full_loss(gt: &HeatmapStack, pred: &HeatmapStack, alpha: f64) -> Result<f64> {
    let total = check_stacks(gt, pred)?;
    let mut s = 0.0f64;
    for (g, p) in gt.channels().iter().zip(pred.channels()) {
        for (&hv, &pv) in g.data().iter().zip(p.data()) {
            let e = hv as f64 - pv as f64;
            s += weight_term(hv as f64, e.abs(), alpha) * e * e;
        }
    }
    Ok(s.max(0.0).sqrt() / total as f64)
}

/// Gradient of [`full_loss`] with respect to every pixel of `pred`,
/// one row-major f64 buffer per channel.
pub fn full_loss_grad(gt: &HeatmapStack, pred: &HeatmapStack, alpha: f64) -> Result<Vec<Vec<f64>>> {
    let total = check_stacks(gt, pred)?;
    let mut s = 0.0f64;
    for (g, p) in gt.channels().iter().zip(pred.channels()) {
        for (&hv, &pv) in g.data().iter().zip(p.data()) {
            let e = hv as f64 - pv as f64;
            s += weight_term(hv as f64, e.abs(), alpha) * e * e;
        }
    }
    let denom = 2.0 * total as f64 * s.max(SQRT_FLOOR).sqrt();
    let mut out = Vec::with_capacity(gt.len());
    for (g, p) in gt.channels().iter().zip(pred.channels()) {
        let grad = g
            .data()
            .iter()
            .zip(p.data())
            .map(|(&hv, &pv)| {
                let h = hv as f64;
                let e = h - pv as f64;
                let w = weight_term(h, e.abs(), alpha);
                let mut ds = -2.0 * w * e;
                // max(H, |e|): the |e| branch contributes through W; ties
                // resolve to the H branch (zero contribution).
                if e.abs() > h {
                    ds += -(alpha - 1.0) * e.signum() * e * e;
                }
                ds / denom
            })
            .collect();
        out.push(grad);
    }
    Ok(out)
}

/// Contourness-to-loss mapping, clamped into [0, 1].
pub fn map_f(c: f64, f: &FParams) -> f64 {
    (1.0 - 2f64.powf((c - f.c_max) / f.scale)).clamp(0.0, 1.0)
}

fn map_f_grad(c: f64, f: &FParams) -> f64 {
    if c >= f.c_max {
        0.0 // clamped region
    } else {
        -(std::f64::consts::LN_2 / f.scale) * 2f64.powf((c - f.c_max) / f.scale)
    }
}

/// Bilinear sample of a dense f64 field, requiring all four support
/// pixels to be valid (inside the border-safe region).
fn sample_valid(fields: &DenseFields, values: &[f64], p: Point2) -> Option<f64> {
    let (w, h) = (fields.width, fields.height);
    if !(p.x >= 0.0 && p.x <= (w - 1) as f64 && p.y >= 0.0 && p.y <= (h - 1) as f64) {
        return None;
    }
    let x0 = (p.x.floor() as usize).min(w - 1);
    let y0 = (p.y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    for &(x, y) in &[(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
        if !fields.is_valid(x, y) {
            return None;
        }
    }
    let fx = p.x - x0 as f64;
    let fy = p.y - y0 as f64;
    Some(
        values[y0 * w + x0] * (1.0 - fx) * (1.0 - fy)
            + values[y0 * w + x1] * fx * (1.0 - fy)
            + values[y1 * w + x0] * (1.0 - fx) * fy
            + values[y1 * w + x1] * fx * fy,
    )
}

/// Scatter an upstream value through the bilinear weights into a
/// gradient buffer.
fn scatter_bilinear(fields: &DenseFields, grad: &mut [f64], p: Point2, v: f64) {
    let (w, h) = (fields.width, fields.height);
    let x0 = (p.x.floor() as usize).min(w - 1);
    let y0 = (p.y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = p.x - x0 as f64;
    let fy = p.y - y0 as f64;
    grad[y0 * w + x0] += v * (1.0 - fx) * (1.0 - fy);
    grad[y0 * w + x1] += v * fx * (1.0 - fy);
    grad[y1 * w + x0] += v * (1.0 - fx) * fy;
    grad[y1 * w + x1] += v * fx * fy;
}

/// Pull a gradient on the contourness map back to a gradient on the
/// predicted heatmap through the closed form
/// C = Ra + Rc + sqrt((Ra - Rc)^2 + 4 Rb^2) - H+^2 (x) G.
fn c_grad_to_heatmap(
    pred: &Heatmap,
    bank: &FilterBank,
    fields: &DenseFields,
    upstream: &[f64],
) -> Vec<f64> {
    let (w, h) = (fields.width, fields.height);
    let n = w * h;
    let mut ua = vec![0.0; n];
    let mut ub = vec![0.0; n];
    let mut uc = vec![0.0; n];
    let mut ug = vec![0.0; n];
    for k in 0..n {
        let u = upstream[k];
        if u == 0.0 {
            continue;
        }
        let d = fields.ra[k] - fields.rc[k];
        let q = (d * d + 4.0 * fields.rb[k] * fields.rb[k]).sqrt();
        let (da, db, dc) = if q < 1e-12 {
            (1.0, 0.0, 1.0) // degenerate isotropic point
        } else {
            (1.0 + d / q, 4.0 * fields.rb[k] / q, 1.0 - d / q)
        };
        ua[k] = u * da;
        ub[k] = u * db;
        uc[k] = u * dc;
        ug[k] = -u;
    }
    // Transposed correlations; all four kernels are point-symmetric so
    // the transpose is the same correlation.
    let ga = correlate(&ua, w, h, bank, bank_kernel(bank, Kernel::G2a));
    let gb = correlate(&ub, w, h, bank, bank_kernel(bank, Kernel::G2b));
    let gc = correlate(&uc, w, h, bank, bank_kernel(bank, Kernel::G2c));
    let gg = correlate(&ug, w, h, bank, bank_kernel(bank, Kernel::G));
    (0..n)
        .map(|k| {
            let hv = pred.data()[k] as f64;
            if hv <= 0.0 {
                0.0 // clip kink: subgradient 0 at and below zero
            } else {
                ga[k] + gb[k] + gc[k] + 2.0 * hv * gg[k]
            }
        })
        .collect()
}

enum Kernel {
    G,
    G2a,
    G2b,
    G2c,
}

fn bank_kernel(bank: &FilterBank, which: Kernel) -> &[f64] {
    match which {
        Kernel::G => bank.g_kernel(),
        Kernel::G2a => bank.g2a_kernel(),
        Kernel::G2b => bank.g2b_kernel(),
        Kernel::G2c => bank.g2c_kernel(),
    }
}

/// Mean of f over the bilinear-sampled contourness at each landmark.
pub fn weak_landmark_loss(
    pred: &Heatmap,
    supervision: &WeakSupervision,
    sigma: SigmaParam,
    weights: &LossWeights,
) -> Result<f64> {
    let bank = build_filter_bank(sigma);
    let fields = dense_fields(pred, &bank)?;
    landmark_loss_inner(&fields, supervision, weights).map(|(loss, _)| loss)
}

fn landmark_loss_inner(
    fields: &DenseFields,
    supervision: &WeakSupervision,
    weights: &LossWeights,
) -> Result<(f64, Vec<(Point2, f64)>)> {
    if supervision.landmarks.is_empty() {
        return Err(Error::InvalidParam("no contour landmarks".into()));
    }
    let mut acc = 0.0;
    let mut samples = Vec::with_capacity(supervision.landmarks.len());
    for l in &supervision.landmarks {
        let c = sample_valid(fields, &fields.c, *l).ok_or_else(|| {
            Error::OutOfBounds(format!("landmark ({}, {}) in invalid border zone", l.x, l.y))
        })?;
        acc += map_f(c, &weights.f_params);
        samples.push((*l, c));
    }
    Ok((acc / supervision.landmarks.len() as f64, samples))
}

pub fn weak_landmark_grad(
    pred: &Heatmap,
    supervision: &WeakSupervision,
    sigma: SigmaParam,
    weights: &LossWeights,
) -> Result<Vec<f64>> {
    let bank = build_filter_bank(sigma);
    let fields = dense_fields(pred, &bank)?;
    let (_, samples) = landmark_loss_inner(&fields, supervision, weights)?;
    let mut upstream = vec![0.0; fields.width * fields.height];
    let scale = 1.0 / samples.len() as f64;
    for (p, c) in samples {
        scatter_bilinear(&fields, &mut upstream, p, scale * map_f_grad(c, &weights.f_params));
    }
    Ok(c_grad_to_heatmap(pred, &bank, &fields, &upstream))
}

/// Unit-spaced samples along the line-contour; for each, the contourness
/// is max-pooled over integer offsets d in [-D, D] along the normal
/// before the f mapping.
pub fn weak_line_loss(
    pred: &Heatmap,
    supervision: &WeakSupervision,
    sigma: SigmaParam,
    weights: &LossWeights,
) -> Result<f64> {
    let bank = build_filter_bank(sigma);
    let fields = dense_fields(pred, &bank)?;
    line_loss_inner(&fields, supervision, weights).map(|(loss, _)| loss)
}

fn line_loss_inner(
    fields: &DenseFields,
    supervision: &WeakSupervision,
    weights: &LossWeights,
) -> Result<(f64, Vec<(Point2, f64)>)> {
    let samples = resample_polyline(&supervision.line_contour, 1.0)?;
    let d_max = weights.d_radius.floor() as i64;
    let mut acc = 0.0;
    let mut picked = Vec::with_capacity(samples.len());
    for (p, normal) in &samples {
        let mut best: Option<(Point2, f64)> = None;
        for d in -d_max..=d_max {
            let q = Point2::new(p.x + d as f64 * normal.0, p.y + d as f64 * normal.1);
            if let Some(c) = sample_valid(fields, &fields.c, q) {
                if best.map_or(true, |(_, bc)| c > bc) {
                    best = Some((q, c));
                }
            }
        }
        let (q, c) = best.ok_or_else(|| {
            Error::OutOfBounds(format!(
                "all probes of line sample ({}, {}) leave the valid region",
                p.x, p.y
            ))
        })?;
        acc += map_f(c, &weights.f_params);
        picked.push((q, c));
    }
    Ok((acc / samples.len() as f64, picked))
}

pub fn weak_line_grad(
    pred: &Heatmap,
    supervision: &WeakSupervision,
    sigma: SigmaParam,
    weights: &LossWeights,
) -> Result<Vec<f64>> {
    let bank = build_filter_bank(sigma);
    let fields = dense_fields(pred, &bank)?;
    let (_, picked) = line_loss_inner(&fields, supervision, weights)?;
    let mut upstream = vec![0.0; fields.width * fields.height];
    let scale = 1.0 / picked.len() as f64;
    // Only the argmax probe of each sample receives gradient.
    for (q, c) in picked {
        scatter_bilinear(&fields, &mut upstream, q, scale * map_f_grad(c, &weights.f_params));
    }
    Ok(c_grad_to_heatmap(pred, &bank, &fields, &upstream))
}

/// Binary mask selecting pixels farther than D from the line-contour.
pub fn far_mask(line_contour: &Polyline, d_radius: f64, width: usize, height: usize) -> Result<Heatmap> {
    let mut m = Heatmap::zeros(width, height)?;
    for y in 0..height {
        for x in 0..width {
            let d = point_polyline_distance(Point2::new(x as f64, y as f64), line_contour);
            m.set(x, y, if d > d_radius { 1.0 } else { 0.0 });
        }
    }
    Ok(m)
}

/// Masked background suppression: the weighted-RMS loss against a zero
/// ground truth, restricted to pixels far from the line-contour.
pub fn weak_far_loss(
    pred: &Heatmap,
    line_contour: &Polyline,
    d_radius: f64,
    alpha: f64,
) -> Result<f64> {
    let mask = far_mask(line_contour, d_radius, pred.width(), pred.height())?;
    let mut s = 0.0f64;
    for (&m, &v) in mask.data().iter().zip(pred.data()) {
        if m == 0.0 {
            continue;
        }
        let v = v as f64;
        s += weight_term(0.0, v.abs(), alpha) * v * v;
    }
    Ok(s.max(0.0).sqrt() / pred.data().len() as f64)
}

pub fn weak_far_grad(
    pred: &Heatmap,
    line_contour: &Polyline,
    d_radius: f64,
    alpha: f64,
) -> Result<Vec<f64>> {
    let mask = far_mask(line_contour, d_radius, pred.width(), pred.height())?;
    let n = pred.data().len() as f64;
    let mut s = 0.0f64;
    for (&m, &v) in mask.data().iter().zip(pred.data()) {
        if m != 0.0 {
            let v = v as f64;
            s += weight_term(0.0, v.abs(), alpha) * v * v;
        }
    }
    let denom = 2.0 * n * s.max(SQRT_FLOOR).sqrt();
    Ok(mask
        .data()
        .iter()
        .zip(pred.data())
        .map(|(&m, &vf)| {
            if m == 0.0 {
                return 0.0;
            }
            let v = vf as f64;
            let w = weight_term(0.0, v.abs(), alpha);
            (2.0 * v * w + (alpha - 1.0) * v.signum() * v * v) / denom
        })
        .collect())
}

/// Breakdown of the weak contour loss.
#[derive(Debug, Clone, Copy)]
pub struct WeakLossBreakdown {
    pub total: f64,
    pub landmark: f64,
    pub line: f64,
    pub far: f64,
}

/// Weak contour loss: far + lambda_landmark * landmark + lambda_line * line.
pub fn weak_loss(
    pred: &Heatmap,
    supervision: &WeakSupervision,
    sigma: SigmaParam,
    weights: &LossWeights,
) -> Result<WeakLossBreakdown> {
    weights.validate()?;
    let landmark = weak_landmark_loss(pred, supervision, sigma, weights)?;
    let line = weak_line_loss(pred, supervision, sigma, weights)?;
    let far = weak_far_loss(pred, &supervision.line_contour, weights.d_radius, weights.alpha)?;
    Ok(WeakLossBreakdown {
        total: far + weights.lambda_landmark * landmark + weights.lambda_line * line,
        landmark,
        line,
        far,
    })
}
