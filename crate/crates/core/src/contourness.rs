//! Contourness scoring via steerable filters.
//!
//! A heatmap neighborhood that matches an oriented ridge template scores
//! high; the match quality maximized over orientation has a closed form
//! in terms of three fixed filter responses:
//!
//! C = Ra + Rc + sqrt((Ra - Rc)^2 + 4 Rb^2) - (H+^2 (x) G)
//! O = atan2(-2 Rb, Rc - Ra) / 2
//! N = O + pi/2
//!
//! where Ra, Rb, Rc are correlations of the clipped heatmap H+ = max(0, H)
//! with the second-derivative-of-Gaussian basis. A brute-force sweep over
//! sampled orientations ([`contourness_bruteforce`]) serves as the
//! independent oracle for the closed form.
//!
//! Conventions: all kernel applications are correlations (no flip) with
//! zero padding; pixels within `radius` of the border are flagged invalid.

use crate::raster::{Heatmap, SigmaParam};
use crate::{Error, Result};

/// Ridge template value at offset (i, j) for contour orientation theta:
/// max(0, 1 - 2 (j cos t - i sin t)^2 / sigma^2). The ridge runs along
/// direction (cos t, sin t).
pub fn template(sigma: SigmaParam, theta: f64, i: i32, j: i32) -> f64 {
    (1.0 - 2.0 * proj_sq(sigma, theta, i, j)).max(0.0)
}

/// Unclipped template used by the matching objective (the clipping on
/// the signal side already makes the clipped and unclipped optima agree).
fn template_unclipped(sigma: SigmaParam, theta: f64, i: i32, j: i32) -> f64 {
    1.0 - 2.0 * proj_sq(sigma, theta, i, j)
}

#[inline]
fn proj_sq(sigma: SigmaParam, theta: f64, i: i32, j: i32) -> f64 {
    let s2 = sigma.get() * sigma.get();
    let d = j as f64 * theta.cos() - i as f64 * theta.sin();
    d * d / s2
}

/// Gaussian weight G(i, j) = exp(-(i^2 + j^2) / sigma^2).
pub fn gaussian_weight(sigma: SigmaParam, i: i32, j: i32) -> f64 {
    (-((i * i + j * j) as f64) / (sigma.get() * sigma.get())).exp()
}

/// The steerable basis sampled at integer offsets in [-radius, radius]^2,
/// radius = ceil(2 sigma). Kernels are truncated, not renormalized.
#[derive(Debug, Clone)]
pub struct FilterBank {
    sigma: SigmaParam,
    radius: i32,
    g: Vec<f64>,
    g2a: Vec<f64>,
    g2b: Vec<f64>,
    g2c: Vec<f64>,
}

impl FilterBank {
    pub fn sigma(&self) -> SigmaParam {
        self.sigma
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    #[inline]
    fn idx(&self, i: i32, j: i32) -> usize {
        ((j + self.radius) as usize) * self.side() + (i + self.radius) as usize
    }

    pub fn g(&self, i: i32, j: i32) -> f64 {
        self.g[self.idx(i, j)]
    }

    pub fn g2a(&self, i: i32, j: i32) -> f64 {
        self.g2a[self.idx(i, j)]
    }

    pub fn g2b(&self, i: i32, j: i32) -> f64 {
        self.g2b[self.idx(i, j)]
    }

    pub fn g2c(&self, i: i32, j: i32) -> f64 {
        self.g2c[self.idx(i, j)]
    }

    pub fn g_kernel(&self) -> &[f64] {
        &self.g
    }

    pub fn g2a_kernel(&self) -> &[f64] {
        &self.g2a
    }

    pub fn g2b_kernel(&self) -> &[f64] {
        &self.g2b
    }

    pub fn g2c_kernel(&self) -> &[f64] {
        &self.g2c
    }
}

pub fn build_filter_bank(sigma: SigmaParam) -> FilterBank {
    let s2 = sigma.get() * sigma.get();
    let radius = (2.0 * sigma.get()).ceil() as i32;
    let side = (2 * radius + 1) as usize;
    let mut g = vec![0.0; side * side];
    let mut g2a = vec![0.0; side * side];
    let mut g2b = vec![0.0; side * side];
    let mut g2c = vec![0.0; side * side];
    for j in -radius..=radius {
        for i in -radius..=radius {
            let e = (-((i * i + j * j) as f64) / s2).exp();
            let k = ((j + radius) as usize) * side + (i + radius) as usize;
            let (x, y) = (i as f64, j as f64);
            g[k] = e;
            g2a[k] = (1.0 - 2.0 * x * x / s2) * e;
            g2b[k] = -(2.0 * x * y / s2) * e;
            g2c[k] = (1.0 - 2.0 * y * y / s2) * e;
        }
    }
    FilterBank {
        sigma,
        radius,
        g,
        g2a,
        g2b,
        g2c,
    }
}

/// Dense f64 field maps kept at full precision for the loss gradients.
#[derive(Debug, Clone)]
pub(crate) struct DenseFields {
    pub width: usize,
    pub height: usize,
    pub radius: i32,
    pub c: Vec<f64>,
    pub ra: Vec<f64>,
    pub rb: Vec<f64>,
    pub rc: Vec<f64>,
    /// H+^2 correlated with G; kept for oracle cross-checks.
    #[cfg_attr(not(test), allow(dead_code))]
    pub gh2: Vec<f64>,
}

impl DenseFields {
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        let r = self.radius as usize;
        x >= r && y >= r && x + r < self.width && y + r < self.height
    }
}

fn check_size(h: &Heatmap, bank: &FilterBank) -> Result<()> {
    if h.width() < bank.side() || h.height() < bank.side() {
        return Err(Error::Raster(format!(
            "raster {}x{} smaller than {}x{} kernel",
            h.width(),
            h.height(),
            bank.side(),
            bank.side()
        )));
    }
    Ok(())
}

/// Correlation (no kernel flip) with zero padding, f64 accumulation.
pub(crate) fn correlate(values: &[f64], width: usize, height: usize, bank: &FilterBank, kernel: &[f64]) -> Vec<f64> {
    let r = bank.radius;
    let side = bank.side();
    let mut out = vec![0.0; width * height];
    for y in 0..height as i32 {
        for x in 0..width as i32 {
            let mut acc = 0.0;
            for j in -r..=r {
                let sy = y + j;
                if sy < 0 || sy >= height as i32 {
                    continue;
                }
                for i in -r..=r {
                    let sx = x + i;
                    if sx < 0 || sx >= width as i32 {
                        continue;
                    }
                    acc += kernel[((j + r) as usize) * side + (i + r) as usize]
                        * values[sy as usize * width + sx as usize];
                }
            }
            out[y as usize * width + x as usize] = acc;
        }
    }
    out
}

pub(crate) fn dense_fields(h: &Heatmap, bank: &FilterBank) -> Result<DenseFields> {
    check_size(h, bank)?;
    let (w, ht) = (h.width(), h.height());
    let hp: Vec<f64> = h.data().iter().map(|&v| (v as f64).max(0.0)).collect();
    let hp2: Vec<f64> = hp.iter().map(|&v| v * v).collect();
    let ra = correlate(&hp, w, ht, bank, &bank.g2a);
    let rb = correlate(&hp, w, ht, bank, &bank.g2b);
    let rc = correlate(&hp, w, ht, bank, &bank.g2c);
    let gh2 = correlate(&hp2, w, ht, bank, &bank.g);
    let c: Vec<f64> = (0..w * ht)
        .map(|k| {
            let d = ra[k] - rc[k];
            ra[k] + rc[k] + (d * d + 4.0 * rb[k] * rb[k]).sqrt() - gh2[k]
        })
        .collect();
    Ok(DenseFields {
        width: w,
        height: ht,
        radius: bank.radius,
        c,
        ra,
        rb,
        rc,
        gh2,
    })
}

/// Correlation responses of the clipped heatmap with the three basis
/// kernels.
pub fn responses(h: &Heatmap, bank: &FilterBank) -> Result<(Heatmap, Heatmap, Heatmap)> {
    let f = dense_fields(h, bank)?;
    let to_map = |v: &[f64]| {
        Heatmap::from_data(f.width, f.height, v.iter().map(|&x| x as f32).collect()).unwrap()
    };
    Ok((to_map(&f.ra), to_map(&f.rb), to_map(&f.rc)))
}

/// Contourness, orientation and normal maps plus border validity mask.
#[derive(Debug, Clone)]
pub struct ContournessFields {
    /// Contourness score (unbounded reals).
    pub c: Heatmap,
    /// Contour orientation, radians in [-pi/2, pi/2).
    pub o: Heatmap,
    /// Contour normal angle, radians in [0, pi).
    pub n: Heatmap,
    valid: Vec<bool>,
    radius: i32,
}

impl ContournessFields {
    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.c.width() + x]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Orientation from responses, reduced to [-pi/2, pi/2). Isotropic
/// neighborhoods (Ra = Rc, Rb = 0) map to 0.
fn orientation(ra: f64, rb: f64, rc: f64) -> f64 {
    let mut o = f64::atan2(-2.0 * rb, rc - ra) / 2.0;
    if o >= HALF_PI {
        o -= std::f64::consts::PI;
    }
    o
}

/// Closed-form contourness/orientation/normal maps.
pub fn contourness_map(h: &Heatmap, sigma: SigmaParam) -> Result<ContournessFields> {
    let bank = build_filter_bank(sigma);
    let f = dense_fields(h, &bank)?;
    let (w, ht) = (f.width, f.height);
    let mut c = Heatmap::zeros(w, ht)?;
    let mut o = Heatmap::zeros(w, ht)?;
    let mut n = Heatmap::zeros(w, ht)?;
    let mut valid = vec![false; w * ht];
    for y in 0..ht {
        for x in 0..w {
            let k = y * w + x;
            c.data_mut()[k] = f.c[k] as f32;
            let ov = orientation(f.ra[k], f.rb[k], f.rc[k]);
            // f32 rounding must not push values onto the excluded
            // upper bounds of [-pi/2, pi/2) and [0, pi).
            let mut of = ov as f32;
            if of >= std::f32::consts::FRAC_PI_2 {
                of = -std::f32::consts::FRAC_PI_2;
            }
            let mut nf = (ov + HALF_PI) as f32;
            if nf >= std::f32::consts::PI {
                nf = 0.0;
            }
            o.data_mut()[k] = of;
            n.data_mut()[k] = nf;
            valid[k] = f.is_valid(x, y);
        }
    }
    Ok(ContournessFields {
        c,
        o,
        n,
        valid,
        radius: bank.radius,
    })
}

/// Template-matching objective at a single orientation (the quantity the
/// closed form maximizes): 2 Sum G H+ T - Sum G H+^2 over the kernel
/// support centered at integer pixel (px, py).
pub fn contourness_objective(
    h: &Heatmap,
    px: usize,
    py: usize,
    sigma: SigmaParam,
    theta: f64,
) -> Result<f64> {
    let radius = (2.0 * sigma.get()).ceil() as i32;
    check_interior(h, px, py, radius)?;
    let mut acc = 0.0;
    for j in -radius..=radius {
        for i in -radius..=radius {
            let hv = (h.get((px as i32 + i) as usize, (py as i32 + j) as usize) as f64).max(0.0);
            let g = gaussian_weight(sigma, i, j);
            let t = template_unclipped(sigma, theta, i, j);
            acc += g * (2.0 * hv * t - hv * hv);
        }
    }
    Ok(acc)
}

fn check_interior(h: &Heatmap, px: usize, py: usize, radius: i32) -> Result<()> {
    let r = radius as usize;
    if px < r || py < r || px + r >= h.width() || py + r >= h.height() {
        return Err(Error::OutOfBounds(format!(
            "pixel ({px}, {py}) within {r} of border"
        )));
    }
    Ok(())
}

/// Brute-force orientation sweep: max of the matching objective over
/// n_theta uniformly sampled orientations in [0, pi).
pub fn contourness_bruteforce(
    h: &Heatmap,
    px: usize,
    py: usize,
    sigma: SigmaParam,
    n_theta: usize,
) -> Result<f64> {
    if n_theta < 2 {
        return Err(Error::InvalidParam("n_theta must be >= 2".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..n_theta {
        let theta = std::f64::consts::PI * k as f64 / n_theta as f64;
        best = best.max(contourness_objective(h, px, py, sigma, theta)?);
    }
    Ok(best)
}

/// Contourness of an ideal straight-contour heatmap at the given sigma,
/// evaluated at an interior on-contour pixel. Used as the reference peak
/// for the loss mapping f and the extraction thresholds.
pub fn ideal_peak_contourness(sigma: SigmaParam) -> f64 {
    let radius = (2.0 * sigma.get()).ceil() as usize;
    let width = 8 * radius + 1;
    let height = 4 * radius + 1;
    let y0 = (height / 2) as f64;
    let s2 = sigma.get() * sigma.get();
    let mut h = Heatmap::zeros(width, height).unwrap();
    for y in 0..height {
        let d = y as f64 - y0;
        let v = (1.0 - 2.0 * d * d / s2).max(0.0) as f32;
        for x in 0..width {
            h.set(x, y, v);
        }
    }
    let fields = contourness_map(&h, sigma).unwrap();
    fields.c.get(width / 2, height / 2) as f64
}
