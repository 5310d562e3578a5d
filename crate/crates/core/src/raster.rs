//! Dense scalar heatmaps: synthesis from anchors and contours via the
//! quadratic falloff, and bilinear sampling.
//!
//! Pixel model: the value stored at integer coordinates (x, y) represents
//! the continuous point (x, y) exactly (no half-pixel offset). Rasters
//! store 32-bit reals; reductions accumulate in 64-bit.

use crate::geometry::{point_polyline_distance, Point2, Polyline};
use crate::{Error, Result};

/// Width of the heatmap peak; the quadratic falloff reaches zero at
/// distance sigma / sqrt(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParam {
    sigma: f64,
}

impl SigmaParam {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(SigmaParam { sigma })
    }

    pub fn get(&self) -> f64 {
        self.sigma
    }
}

/// A dense row-major raster of 32-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Raster("heatmap must be at least 1x1".into()));
        }
        Ok(Heatmap {
            width,
            height,
            data: vec![0.0; width * height],
        })
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Raster("heatmap must be at least 1x1".into()));
        }
        if data.len() != width * height {
            return Err(Error::Raster(format!(
                "data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Raster("non-finite heatmap value".into()));
        }
        Ok(Heatmap {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_size(&self, other: &Heatmap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// H(p) = max(0, 1 - 2 |p - a|^2 / sigma^2) at integer pixel centers.
pub fn synth_anchor_heatmap(a: Point2, sigma: SigmaParam, width: usize, height: usize) -> Result<Heatmap> {
    if !a.is_finite() {
        return Err(Error::Geometry("non-finite anchor".into()));
    }
    let mut h = Heatmap::zeros(width, height)?;
    let s2 = sigma.get() * sigma.get();
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - a.x;
            let dy = y as f64 - a.y;
            let v = (1.0 - 2.0 * (dx * dx + dy * dy) / s2).max(0.0);
            h.set(x, y, v as f32);
        }
    }
    Ok(h)
}

/// H(p) = max(0, 1 - 2 dist(p, c)^2 / sigma^2) at integer pixel centers.
pub fn synth_contour_heatmap(
    c: &Polyline,
    sigma: SigmaParam,
    width: usize,
    height: usize,
) -> Result<Heatmap> {
    let mut h = Heatmap::zeros(width, height)?;
    let s2 = sigma.get() * sigma.get();
    for y in 0..height {
        for x in 0..width {
            let d = point_polyline_distance(Point2::new(x as f64, y as f64), c);
            let v = (1.0 - 2.0 * d * d / s2).max(0.0);
            h.set(x, y, v as f32);
        }
    }
    Ok(h)
}

/// Bilinear interpolation over the four surrounding pixel centers.
pub fn bilinear_sample(h: &Heatmap, p: Point2) -> Result<f64> {
    let (w, ht) = (h.width() as f64, h.height() as f64);
    if !(p.x >= 0.0 && p.x <= w - 1.0 && p.y >= 0.0 && p.y <= ht - 1.0) {
        return Err(Error::OutOfBounds(format!(
            "sample point ({}, {}) outside [0,{}]x[0,{}]",
            p.x,
            p.y,
            w - 1.0,
            ht - 1.0
        )));
    }
    let x0 = (p.x.floor() as usize).min(h.width() - 1);
    let y0 = (p.y.floor() as usize).min(h.height() - 1);
    let x1 = (x0 + 1).min(h.width() - 1);
    let y1 = (y0 + 1).min(h.height() - 1);
    let fx = p.x - x0 as f64;
    let fy = p.y - y0 as f64;
    let v00 = h.get(x0, y0) as f64;
    let v10 = h.get(x1, y0) as f64;
    let v01 = h.get(x0, y1) as f64;
    let v11 = h.get(x1, y1) as f64;
    Ok(v00 * (1.0 - fx) * (1.0 - fy)
        + v10 * fx * (1.0 - fy)
        + v01 * (1.0 - fx) * fy
        + v11 * fx * fy)
}

/// An ordered stack of equally-sized heatmap channels with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    channels: Vec<Heatmap>,
    names: Vec<String>,
}

impl HeatmapStack {
    pub fn new(channels: Vec<Heatmap>, names: Vec<String>) -> Result<Self> {
        if channels.len() != names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} channels vs {} names",
                channels.len(),
                names.len()
            )));
        }
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| !c.same_size(first)) {
                return Err(Error::DimensionMismatch(
                    "stack channels differ in size".into(),
                ));
            }
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Raster(format!("duplicate channel name '{n}'")));
            }
        }
        Ok(HeatmapStack { channels, names })
    }

    pub fn channels(&self) -> &[Heatmap] {
        &self.channels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&Heatmap> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.channels[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn sigma(v: f64) -> SigmaParam {
        SigmaParam::new(v).unwrap()
    }

    #[test]
    fn anchor_peak_at_integer_pixel() {
        let h = synth_anchor_heatmap(Point2::new(5.0, 7.0), sigma(2.0), 16, 16).unwrap();
        assert_eq!(h.get(5, 7), 1.0);
    }

    #[test]
    fn anchor_falloff_values() {
        let s = 2.0;
        let h = synth_anchor_heatmap(Point2::new(8.0, 8.0), sigma(s), 32, 32).unwrap();
        // Distance sigma/2 -> 0.5.
        assert!((h.get(9, 8) as f64 - (1.0 - 2.0 / (s * s))).abs() < 1e-6);
        let a = Point2::new(8.0, 8.0 + s / 2.0_f64.sqrt());
        let hz = synth_anchor_heatmap(a, sigma(s), 32, 32).unwrap();
        // Pixel at distance sigma/sqrt(2) sits exactly on the zero crossing.
        assert_eq!(hz.get(8, 8), 0.0);
    }

    #[test]
    fn contour_heatmap_matches_per_pixel_brute_force() {
        use crate::geometry::{point_polyline_distance, Polyline};
        let c = Polyline::new(
            vec![
                Point2::new(3.0, 4.2),
                Point2::new(12.0, 8.9),
                Point2::new(20.0, 5.5),
            ],
            false,
        )
        .unwrap();
        let s = 2.5;
        let h = synth_contour_heatmap(&c, sigma(s), 24, 16).unwrap();
        for y in 0..16 {
            for x in 0..24 {
                let d = point_polyline_distance(Point2::new(x as f64, y as f64), &c);
                let expect = (1.0 - 2.0 * d * d / (s * s)).max(0.0) as f32;
                assert_eq!(h.get(x, y), expect);
            }
        }
    }

    #[test]
    fn synthesized_values_in_unit_interval() {
        let h = synth_anchor_heatmap(Point2::new(3.3, 3.7), sigma(3.0), 16, 16).unwrap();
        assert!(h.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn integer_translation_equivariance() {
        let s = sigma(2.0);
        let h0 = synth_anchor_heatmap(Point2::new(10.0, 10.0), s, 32, 32).unwrap();
        let h1 = synth_anchor_heatmap(Point2::new(13.0, 15.0), s, 32, 32).unwrap();
        for y in 0..24 {
            for x in 0..24 {
                assert_eq!(h0.get(x, y), h1.get(x + 3, y + 5));
            }
        }
    }

    #[test]
    fn bilinear_examples() {
        let h = Heatmap::from_data(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&h, Point2::new(0.5, 0.5)).unwrap(), 0.5);
        let c = Heatmap::from_data(3, 3, vec![0.7; 9]).unwrap();
        for &(x, y) in &[(0.0, 0.0), (1.3, 0.2), (2.0, 2.0), (0.9, 1.7)] {
            let v = bilinear_sample(&c, Point2::new(x, y)).unwrap();
            assert!((v - 0.7).abs() < 1e-7);
        }
        assert!(bilinear_sample(&h, Point2::new(-0.1, 0.0)).is_err());
        assert!(bilinear_sample(&h, Point2::new(0.0, 1.1)).is_err());
    }

    #[test]
    fn stack_rejects_duplicate_names() {
        let h = Heatmap::zeros(4, 4).unwrap();
        assert!(HeatmapStack::new(vec![h.clone(), h], vec!["a".into(), "a".into()]).is_err());
    }
}
