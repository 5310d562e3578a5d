//! Heatmap-to-geometry extraction: anchors via local center of mass,
//! contours via NMS along contourness normals with sub-pixel parabola
//! refinement and two-threshold hysteresis tracing.

use crate::contourness::{contourness_map, ideal_peak_contourness, ContournessFields};
use crate::geometry::Point2;
use crate::raster::{bilinear_sample, Heatmap, SigmaParam};
use crate::{Error, Result};

/// Parameters of the contour extraction stage.
#[derive(Debug, Clone)]
pub struct ExtractionParams {
    pub sigma: SigmaParam,
    pub high_threshold: f64,
    pub low_threshold: f64,
    pub min_trace_length: usize,
}

impl ExtractionParams {
    /// Defaults relative to the ideal-contour peak at this sigma:
    /// high = 0.5 peak, low = 0.25 peak, minimum trace length 3.
    pub fn defaults(sigma: SigmaParam) -> Self {
        let peak = ideal_peak_contourness(sigma);
        ExtractionParams {
            sigma,
            high_threshold: 0.5 * peak,
            low_threshold: 0.25 * peak,
            min_trace_length: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low_threshold > 0.0 && self.low_threshold <= self.high_threshold) {
            return Err(Error::InvalidParam(format!(
                "thresholds must satisfy 0 < low <= high, got low={} high={}",
                self.low_threshold, self.high_threshold
            )));
        }
        Ok(())
    }
}

/// An ordered sub-pixel contour trace with per-point contourness scores.
#[derive(Debug, Clone)]
pub struct ContourTrace {
    pub points: Vec<Point2>,
    pub scores: Vec<f64>,
}

impl ContourTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A surviving NMS pixel: source pixel, refined sub-pixel location and
/// contourness score.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub px: usize,
    pub py: usize,
    pub point: Point2,
    pub score: f64,
}

/// Sub-pixel anchor extraction around the peak pixel (row-major first
/// tie-break). An ideal anchor heatmap is a clipped circular paraboloid,
/// and its strictly positive pixels are exactly unclipped, so a least
/// squares fit of v = c0 + c1 x + c2 y + c3 (x^2 + y^2) over them
/// recovers the vertex -0.5 (c1, c2) / c3 without sampling bias. With
/// too few positive pixels for a stable fit the weighted centroid of the
/// disc of radius sigma is the fallback.
pub fn extract_anchor(h: &Heatmap, sigma: SigmaParam) -> Result<Point2> {
    let mut best = f32::NEG_INFINITY;
    let mut peak = (0usize, 0usize);
    for y in 0..h.height() {
        for x in 0..h.width() {
            let v = h.get(x, y);
            if v > best {
                best = v;
                peak = (x, y);
            }
        }
    }
    if best <= 0.0 {
        return Err(Error::NoAnchor);
    }
    let s = sigma.get();
    let r = (2.0 * s).ceil() as i64;
    let (px, py) = (peak.0 as i64, peak.1 as i64);

    // Gather positive samples in peak-centered coordinates.
    let mut samples: Vec<(f64, f64, f64)> = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (px + dx, py + dy);
            if x < 0 || y < 0 || x >= h.width() as i64 || y >= h.height() as i64 {
                continue;
            }
            let v = h.get(x as usize, y as usize) as f64;
            if v > 0.0 {
                samples.push((dx as f64, dy as f64, v));
            }
        }
    }
    if samples.len() >= 5 {
        if let Some((vx, vy)) = paraboloid_vertex(&samples) {
            // Reject runaway fits from non-paraboloid data.
            if vx * vx + vy * vy <= s * s {
                return Ok(Point2::new(px as f64 + vx, py as f64 + vy));
            }
        }
    } else if samples.len() == 4 {
        if let Some((vx, vy)) = square_blob_vertex(&samples) {
            if vx * vx + vy * vy <= s * s {
                return Ok(Point2::new(px as f64 + vx, py as f64 + vy));
            }
        }
    }

    // Fallback: weighted centroid over the disc of radius sigma.
    let rc = s.ceil() as i64;
    let mut wx = 0.0f64;
    let mut wy = 0.0f64;
    let mut wsum = 0.0f64;
    for dy in -rc..=rc {
        for dx in -rc..=rc {
            if ((dx * dx + dy * dy) as f64) > s * s {
                continue;
            }
            let (x, y) = (px + dx, py + dy);
            if x < 0 || y < 0 || x >= h.width() as i64 || y >= h.height() as i64 {
                continue;
            }
            let w = (h.get(x as usize, y as usize) as f64).max(0.0);
            wx += w * x as f64;
            wy += w * y as f64;
            wsum += w;
        }
    }
    Ok(Point2::new(wx / wsum, wy / wsum))
}

/// Vertex of the least-squares circular paraboloid
/// v = c0 + c1 x + c2 y + c3 (x^2 + y^2) through weighted samples;
/// `None` when the normal equations are singular or the fit is not
/// concave.
fn paraboloid_vertex(samples: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    // Normal equations A c = b for the basis [1, x, y, x^2 + y^2].
    let mut a = [[0.0f64; 4]; 4];
    let mut b = [0.0f64; 4];
    for &(x, y, v) in samples {
        let q = x * x + y * y;
        let phi = [1.0, x, y, q];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] += phi[i] * phi[j];
            }
            b[i] += phi[i] * v;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for j in col..4 {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut c = [0.0f64; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for j in row + 1..4 {
            acc -= a[row][j] * c[j];
        }
        c[row] = acc / a[row][row];
    }
    if c[3] >= -1e-12 {
        return None; // not concave
    }
    Some((-0.5 * c[1] / c[3], -0.5 * c[2] / c[3]))
}

/// Vertex of a unit-peak circular paraboloid v = 1 + c3 * dist^2 from
/// exactly four samples on a 2x2 pixel square. Four square samples leave
/// the general paraboloid underdetermined (the basis [1, x, y, x^2+y^2]
/// is rank-3 on them), so the known unit peak value closes the system:
/// with the vertex at (u, w) inside the square and a = 2u - 1, b = 2w - 1,
/// the corner differences give p = c3*a, q = c3*b, and the corner sum
/// T = 4 + 2*c3*(1 + (a^2 + b^2)/2), hence
/// 2*c3^2 + (4 - T)*c3 + (p^2 + q^2) = 0. Both roots are negative; the
/// spurious one is c3*(a^2 + b^2)/2, always smaller in magnitude, so the
/// more negative root is the curvature.
fn square_blob_vertex(samples: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let x0 = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let y0 = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut v = [f64::NAN; 4]; // v00, v10, v01, v11
    for &(x, y, val) in samples {
        let (dx, dy) = (x - x0, y - y0);
        if (dx != 0.0 && dx != 1.0) || (dy != 0.0 && dy != 1.0) {
            return None; // not a unit square
        }
        v[dx as usize + 2 * dy as usize] = val;
    }
    if v.iter().any(|c| c.is_nan()) {
        return None;
    }
    let p = v[0] - v[1];
    let q = v[0] - v[2];
    let t = v.iter().sum::<f64>();
    let disc = ((4.0 - t) * (4.0 - t) - 8.0 * (p * p + q * q)).max(0.0);
    let c3 = 0.25 * ((t - 4.0) - disc.sqrt());
    if c3 >= -1e-9 {
        return None;
    }
    let (a, b) = (p / c3, q / c3);
    Some((x0 + 0.5 * (a + 1.0), y0 + 0.5 * (b + 1.0)))
}

/// NMS with parabola refinement: keep valid pixels whose contourness
/// strictly exceeds the bilinear-sampled contourness one pixel away on
/// either side along the local normal, then shift by the parabola vertex
/// offset (clamped to half a pixel).
pub fn nms_subpixel(fields: &ContournessFields, params: &ExtractionParams) -> Vec<Candidate> {
    let c = &fields.c;
    let (w, h) = (c.width(), c.height());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !fields.is_valid(x, y) {
                continue;
            }
            let c0 = c.get(x, y) as f64;
            if c0 < params.low_threshold {
                continue;
            }
            let n = fields.n.get(x, y) as f64;
            let (dx, dy) = (n.cos(), n.sin());
            let pm = Point2::new(x as f64 - dx, y as f64 - dy);
            let pp = Point2::new(x as f64 + dx, y as f64 + dy);
            let (cm, cp) = match (bilinear_sample(c, pm), bilinear_sample(c, pp)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            if !(c0 > cm && c0 > cp) {
                continue;
            }
            let second = cm - 2.0 * c0 + cp;
            let delta = if second >= 0.0 {
                0.0
            } else {
                ((cm - cp) / (2.0 * second)).clamp(-0.5, 0.5)
            };
            out.push(Candidate {
                px: x,
                py: y,
                point: Point2::new(x as f64 + delta * dx, y as f64 + delta * dy),
                score: c0,
            });
        }
    }
    out
}

/// Two-threshold hysteresis over 8-connected candidate pixels: a
/// component survives if any member reaches the high threshold; surviving
/// members are ordered into traces by walking from an endpoint.
pub fn hysteresis_trace(candidates: &[Candidate], params: &ExtractionParams) -> Vec<ContourTrace> {
    let kept: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.score >= params.low_threshold)
        .collect();
    if kept.is_empty() {
        return Vec::new();
    }

    use std::collections::HashMap;
    let mut grid: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, c) in kept.iter().enumerate() {
        grid.insert((c.px, c.py), i);
    }
    let neighbors = |i: usize| -> Vec<usize> {
        let (px, py) = (kept[i].px as i64, kept[i].py as i64);
        let mut ns = Vec::new();
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (px + dx, py + dy);
                if nx < 0 || ny < 0 {
                    continue;
                }
                if let Some(&j) = grid.get(&(nx as usize, ny as usize)) {
                    ns.push(j);
                }
            }
        }
        ns
    };

    // Connected components in deterministic row-major seed order.
    let mut comp = vec![usize::MAX; kept.len()];
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by_key(|&i| (kept[i].py, kept[i].px));
    let mut n_comp = 0;
    for &seed in &order {
        if comp[seed] != usize::MAX {
            continue;
        }
        let id = n_comp;
        n_comp += 1;
        let mut stack = vec![seed];
        comp[seed] = id;
        while let Some(i) = stack.pop() {
            for j in neighbors(i) {
                if comp[j] == usize::MAX {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
    }

    let mut traces = Vec::new();
    for id in 0..n_comp {
        let members: Vec<usize> = order.iter().copied().filter(|&i| comp[i] == id).collect();
        if !members.iter().any(|&i| kept[i].score >= params.high_threshold) {
            continue;
        }
        let mut visited = vec![false; kept.len()];
        loop {
            let remaining: Vec<usize> = members.iter().copied().filter(|&i| !visited[i]).collect();
            if remaining.is_empty() {
                break;
            }
            // Endpoint: at most one unvisited component neighbor.
            let start = remaining
                .iter()
                .copied()
                .find(|&i| {
                    neighbors(i)
                        .iter()
                        .filter(|&&j| comp[j] == id && !visited[j])
                        .count()
                        <= 1
                })
                .unwrap_or(remaining[0]);

            let mut trace_idx = vec![start];
            visited[start] = true;
            let mut dir: Option<(f64, f64)> = None;
            let mut cur = start;
            loop {
                let nexts: Vec<usize> = neighbors(cur)
                    .into_iter()
                    .filter(|&j| comp[j] == id && !visited[j])
                    .collect();
                if nexts.is_empty() {
                    break;
                }
                let step = |j: usize| {
                    let dx = kept[j].px as f64 - kept[cur].px as f64;
                    let dy = kept[j].py as f64 - kept[cur].py as f64;
                    let n = dx.hypot(dy);
                    (dx / n, dy / n, n)
                };
                let next = match dir {
                    // Prefer the neighbor most aligned with the walk
                    // direction; remaining branches become new traces.
                    Some((cx, cy)) => nexts
                        .iter()
                        .copied()
                        .max_by(|&a, &b| {
                            let (ax, ay, _) = step(a);
                            let (bx, by, _) = step(b);
                            (ax * cx + ay * cy)
                                .partial_cmp(&(bx * cx + by * cy))
                                .unwrap()
                                .then_with(|| {
                                    (kept[b].py, kept[b].px).cmp(&(kept[a].py, kept[a].px))
                                })
                        })
                        .unwrap(),
                    // No direction yet: nearest neighbor, row-major
                    // tie-break.
                    None => nexts
                        .iter()
                        .copied()
                        .min_by(|&a, &b| {
                            let (_, _, da) = step(a);
                            let (_, _, db) = step(b);
                            da.partial_cmp(&db)
                                .unwrap()
                                .then_with(|| {
                                    (kept[a].py, kept[a].px).cmp(&(kept[b].py, kept[b].px))
                                })
                        })
                        .unwrap(),
                };
                let (sx, sy, _) = step(next);
                dir = Some((sx, sy));
                visited[next] = true;
                trace_idx.push(next);
                cur = next;
            }
            if trace_idx.len() >= params.min_trace_length {
                traces.push(ContourTrace {
                    points: trace_idx.iter().map(|&i| kept[i].point).collect(),
                    scores: trace_idx.iter().map(|&i| kept[i].score).collect(),
                });
            }
        }
    }
    traces
}

/// Full contour extraction pipeline: contourness map, NMS with sub-pixel
/// refinement, hysteresis tracing.
pub fn extract_contour(h: &Heatmap, params: &ExtractionParams) -> Result<Vec<ContourTrace>> {
    params.validate()?;
    let fields = contourness_map(h, params.sigma)?;
    let candidates = nms_subpixel(&fields, params);
    Ok(hysteresis_trace(&candidates, params))
}
