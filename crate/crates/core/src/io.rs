//! Byte-stable serialization: the ACH binary heatmap-stack format,
//! annotation / trace / report JSON documents, and PGM export.
//!
//! All JSON is emitted with sorted keys and decimal reals rounded to 9
//! significant digits (round-trip safe for 32-bit payloads), so golden
//! files are byte-identical across platforms.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::evaluation::{EvalReport, GroundTruthLandmarks, Prediction};
use crate::extraction::{ContourTrace, ExtractionParams};
use crate::geometry::{point_polyline_distance, Point2, Polyline};
use crate::raster::{Heatmap, HeatmapStack};
use crate::synthscene::SceneGT;
use crate::{Error, Result};

const ACH_MAGIC: &[u8; 4] = b"ACHM";
const ACH_VERSION: u32 = 1;

/// Serialize a heatmap stack to the ACH byte format.
///
/// Layout: magic `ACHM`, version u32, width/height/channels u32, a block
/// of length-prefixed UTF-8 channel names, then the payload as 32-bit
/// little-endian reals, channel-major, row-major within each channel.
pub fn write_ach(stack: &HeatmapStack) -> Vec<u8> {
    let (w, h) = match stack.channels().first() {
        Some(c) => (c.width(), c.height()),
        None => (0, 0),
    };
    let mut out = Vec::new();
    out.extend_from_slice(ACH_MAGIC);
    out.extend_from_slice(&ACH_VERSION.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(stack.len() as u32).to_le_bytes());
    for name in stack.names() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for c in stack.channels() {
        for v in c.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("truncated while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parse an ACH byte stream; rejects bad magic/version and truncation
/// with the byte offset of the failure.
pub fn read_ach(bytes: &[u8]) -> Result<HeatmapStack> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != ACH_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:02x?}, expected \"ACHM\""),
        });
    }
    let version_at = r.pos as u64;
    let version = r.u32("version")?;
    if version != ACH_VERSION {
        return Err(Error::Format {
            offset: version_at,
            msg: format!("unsupported version {version}"),
        });
    }
    let w = r.u32("width")? as usize;
    let h = r.u32("height")? as usize;
    let n = r.u32("channel count")? as usize;
    let mut names = Vec::with_capacity(n);
    for i in 0..n {
        let at = r.pos as u64;
        let len = r.u32("name length")? as usize;
        let raw = r.take(len, "channel name")?;
        let name = std::str::from_utf8(raw).map_err(|e| Error::Format {
            offset: at + 4,
            msg: format!("channel {i} name is not UTF-8: {e}"),
        })?;
        names.push(name.to_string());
    }
    let mut channels = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.pos as u64;
        let raw = r.take(4 * w * h, "payload")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        channels.push(Heatmap::from_data(w, h, data).map_err(|e| Error::Format {
            offset: at,
            msg: e.to_string(),
        })?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos as u64,
            msg: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    HeatmapStack::new(channels, names)
}

pub fn write_ach_file(stack: &HeatmapStack, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, write_ach(stack))?)
}

pub fn read_ach_file(path: &Path) -> Result<HeatmapStack> {
    read_ach(&std::fs::read(path)?)
}

/// Round to 9 significant decimal digits; the fixed JSON real format.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.8e}").parse().unwrap()
}

fn num(x: f64) -> Value {
    json!(round9(x))
}

fn point_json(p: &Point2) -> Value {
    json!([num(p.x), num(p.y)])
}

fn points_json(pts: &[Point2]) -> Value {
    Value::Array(pts.iter().map(point_json).collect())
}

fn parse_point(v: &Value, what: &str) -> Result<Point2> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| bad(format!("{what}: expected [x, y]")))?;
    let x = arr[0].as_f64().ok_or_else(|| bad(format!("{what}: non-numeric x")))?;
    let y = arr[1].as_f64().ok_or_else(|| bad(format!("{what}: non-numeric y")))?;
    if !x.is_finite() || !y.is_finite() {
        return Err(bad(format!("{what}: non-finite point")));
    }
    Ok(Point2::new(x, y))
}

fn bad(msg: String) -> Error {
    Error::Format { offset: 0, msg }
}

/// The annotation document: anchors, dense contours, optional sparse
/// landmark chains, the normalization anchor pair and part tags.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDoc {
    pub image_size: (usize, usize),
    pub anchors: Vec<(String, Point2)>,
    /// (name, closed, points)
    pub contours: Vec<(String, bool, Vec<Point2>)>,
    /// (contour name, sparse points on that contour)
    pub landmarks: Vec<(String, Vec<Point2>)>,
    pub normalization_pair: (String, String),
    pub parts: BTreeMap<String, String>,
}

impl AnnotationDoc {
    pub fn from_scene(gt: &SceneGT, width: usize, height: usize) -> Self {
        AnnotationDoc {
            image_size: (width, height),
            anchors: gt.anchors.clone(),
            contours: gt
                .contours
                .iter()
                .map(|(n, c)| (n.clone(), c.is_closed(), c.points().to_vec()))
                .collect(),
            landmarks: gt
                .landmarks
                .iter()
                .map(|(n, l)| (n.clone(), l.points.clone()))
                .collect(),
            normalization_pair: gt.normalization_pair.clone(),
            parts: gt.parts.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.anchors.iter().map(|(n, _)| n.as_str()).collect();
        names.extend(self.contours.iter().map(|(n, _, _)| n.as_str()));
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(bad(format!("duplicate name '{n}'")));
            }
        }
        for (name, pts) in &self.landmarks {
            let c = self
                .contour(name)
                .ok_or_else(|| bad(format!("landmarks reference unknown contour '{name}'")))?;
            for p in pts {
                if point_polyline_distance(*p, &c) > 1e-6 {
                    return Err(bad(format!(
                        "landmark ({}, {}) is not on contour '{name}'",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contour(&self, name: &str) -> Option<Polyline> {
        self.contours
            .iter()
            .find(|(n, _, _)| n == name)
            .and_then(|(_, closed, pts)| Polyline::new(pts.clone(), *closed).ok())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "image_size": [self.image_size.0, self.image_size.1],
            "anchors": self.anchors.iter().map(|(n, p)| json!({
                "name": n, "x": num(p.x), "y": num(p.y),
            })).collect::<Vec<_>>(),
            "contours": self.contours.iter().map(|(n, closed, pts)| json!({
                "name": n, "closed": closed, "points": points_json(pts),
            })).collect::<Vec<_>>(),
            "landmarks": self.landmarks.iter().map(|(n, pts)| json!({
                "contour": n, "points": points_json(pts),
            })).collect::<Vec<_>>(),
            "normalization_pair": [self.normalization_pair.0, self.normalization_pair.1],
            "parts": self.parts,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let size = v
            .get("image_size")
            .and_then(|s| s.as_array())
            .filter(|a| a.len() == 2)
            .ok_or_else(|| bad("missing image_size [w, h]".into()))?;
        let (w, h) = (
            size[0].as_u64().ok_or_else(|| bad("bad width".into()))? as usize,
            size[1].as_u64().ok_or_else(|| bad("bad height".into()))? as usize,
        );
        let mut anchors = Vec::new();
        for a in v.get("anchors").and_then(|a| a.as_array()).unwrap_or(&Vec::new()) {
            let name = a
                .get("name")
                .and_then(|n| n.as_str())
                .ok_or_else(|| bad("anchor without name".into()))?;
            let x = a.get("x").and_then(|x| x.as_f64()).ok_or_else(|| bad(format!("anchor '{name}': bad x")))?;
            let y = a.get("y").and_then(|y| y.as_f64()).ok_or_else(|| bad(format!("anchor '{name}': bad y")))?;
            anchors.push((name.to_string(), Point2::new(x, y)));
        }
        let mut contours = Vec::new();
        for c in v.get("contours").and_then(|c| c.as_array()).unwrap_or(&Vec::new()) {
            let name = c
                .get("name")
                .and_then(|n| n.as_str())
                .ok_or_else(|| bad("contour without name".into()))?;
            let closed = c.get("closed").and_then(|b| b.as_bool()).unwrap_or(false);
            let pts = c
                .get("points")
                .and_then(|p| p.as_array())
                .ok_or_else(|| bad(format!("contour '{name}': missing points")))?
                .iter()
                .map(|p| parse_point(p, &format!("contour '{name}'")))
                .collect::<Result<Vec<_>>>()?;
            contours.push((name.to_string(), closed, pts));
        }
        let mut landmarks = Vec::new();
        for l in v.get("landmarks").and_then(|l| l.as_array()).unwrap_or(&Vec::new()) {
            let name = l
                .get("contour")
                .and_then(|n| n.as_str())
                .ok_or_else(|| bad("landmark group without contour name".into()))?;
            let pts = l
                .get("points")
                .and_then(|p| p.as_array())
                .ok_or_else(|| bad(format!("landmarks '{name}': missing points")))?
                .iter()
                .map(|p| parse_point(p, &format!("landmarks '{name}'")))
                .collect::<Result<Vec<_>>>()?;
            landmarks.push((name.to_string(), pts));
        }
        let pair = v
            .get("normalization_pair")
            .and_then(|p| p.as_array())
            .filter(|a| a.len() == 2)
            .and_then(|a| Some((a[0].as_str()?.to_string(), a[1].as_str()?.to_string())))
            .ok_or_else(|| bad("missing normalization_pair".into()))?;
        let mut parts = BTreeMap::new();
        if let Some(map) = v.get("parts").and_then(|p| p.as_object()) {
            for (k, val) in map {
                parts.insert(
                    k.clone(),
                    val.as_str().ok_or_else(|| bad(format!("part tag for '{k}' is not a string")))?.to_string(),
                );
            }
        }
        let doc = AnnotationDoc {
            image_size: (w, h),
            anchors,
            contours,
            landmarks,
            normalization_pair: pair,
            parts,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// Evaluator view: anchors plus sparse landmark groups (falling back
    /// to the dense contour points if no sparse chains are present).
    pub fn ground_truth(&self) -> GroundTruthLandmarks {
        let groups = if self.landmarks.is_empty() {
            self.contours
                .iter()
                .map(|(n, _, pts)| (n.clone(), pts.clone()))
                .collect()
        } else {
            self.landmarks.clone()
        };
        GroundTruthLandmarks {
            anchor_landmarks: self.anchors.clone(),
            contour_landmark_groups: groups,
            parts: self.parts.clone(),
            normalization_pair: self.normalization_pair.clone(),
        }
    }

    /// Prediction view: the annotation's own geometry (for self-eval and
    /// for scoring one annotation against another).
    pub fn prediction(&self) -> Result<Prediction> {
        let contours = self
            .contours
            .iter()
            .map(|(n, closed, pts)| Ok((n.clone(), Polyline::new(pts.clone(), *closed)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prediction {
            anchors: self.anchors.clone(),
            contours,
        })
    }
}

fn to_json_string(v: &Value) -> String {
    // serde_json maps are BTree-backed: keys come out sorted.
    let mut s = serde_json::to_string_pretty(v).expect("json serialization");
    s.push('\n');
    s
}

pub fn write_annotation(doc: &AnnotationDoc) -> String {
    to_json_string(&doc.to_json())
}

pub fn read_annotation(text: &str) -> Result<AnnotationDoc> {
    AnnotationDoc::from_json(&serde_json::from_str(text)?)
}

/// Extracted geometry per channel: traces plus an echo of the extraction
/// parameters that produced them.
pub fn write_traces(
    channels: &[(String, Option<Point2>, Vec<ContourTrace>)],
    params: &ExtractionParams,
) -> String {
    let v = json!({
        "params": {
            "sigma": num(params.sigma.get()),
            "high_threshold": num(params.high_threshold),
            "low_threshold": num(params.low_threshold),
            "min_trace_length": params.min_trace_length,
        },
        "channels": channels.iter().map(|(name, anchor, traces)| json!({
            "name": name,
            "anchor": anchor.as_ref().map(point_json),
            "traces": traces.iter().map(|t| json!({
                "points": points_json(&t.points),
                "scores": t.scores.iter().map(|s| num(*s)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    to_json_string(&v)
}

/// Parse a trace document back into per-channel anchors and traces.
pub fn read_traces(text: &str) -> Result<Vec<(String, Option<Point2>, Vec<ContourTrace>)>> {
    let v: Value = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for ch in v
        .get("channels")
        .and_then(|c| c.as_array())
        .ok_or_else(|| bad("missing channels".into()))?
    {
        let name = ch
            .get("name")
            .and_then(|n| n.as_str())
            .ok_or_else(|| bad("channel without name".into()))?
            .to_string();
        let anchor = match ch.get("anchor") {
            None | Some(Value::Null) => None,
            Some(a) => Some(parse_point(a, &format!("channel '{name}' anchor"))?),
        };
        let mut traces = Vec::new();
        for t in ch.get("traces").and_then(|t| t.as_array()).unwrap_or(&Vec::new()) {
            let points = t
                .get("points")
                .and_then(|p| p.as_array())
                .ok_or_else(|| bad(format!("channel '{name}': trace without points")))?
                .iter()
                .map(|p| parse_point(p, &format!("channel '{name}' trace")))
                .collect::<Result<Vec<_>>>()?;
            let scores = t
                .get("scores")
                .and_then(|s| s.as_array())
                .ok_or_else(|| bad(format!("channel '{name}': trace without scores")))?
                .iter()
                .map(|s| s.as_f64().ok_or_else(|| bad("non-numeric score".into())))
                .collect::<Result<Vec<_>>>()?;
            if points.len() != scores.len() {
                return Err(bad(format!(
                    "channel '{name}': {} points vs {} scores",
                    points.len(),
                    scores.len()
                )));
            }
            traces.push(ContourTrace { points, scores });
        }
        out.push((name, anchor, traces));
    }
    Ok(out)
}

/// Evaluation report JSON (single face or aggregate).
pub fn write_report(report: &EvalReport) -> String {
    let v = json!({
        "auc": num(report.auc),
        "ced": report.ced.iter().map(|(e, f)| json!([num(*e), num(*f)])).collect::<Vec<_>>(),
        "missing": report.missing,
        "nme_overall": num(report.nme_overall),
        "nme_per_part": report.nme_per_part.iter()
            .map(|(k, v)| (k.clone(), json!(num(*v))))
            .collect::<serde_json::Map<String, Value>>(),
        "num_landmarks": report.per_landmark_errors.len(),
    });
    to_json_string(&v)
}

/// CED pairs as CSV for plotting.
pub fn write_ced_csv(ced: &[(f64, f64)]) -> String {
    let mut s = String::from("nme,fraction\n");
    for (e, f) in ced {
        s.push_str(&format!("{},{}\n", round9(*e), round9(*f)));
    }
    s
}

/// 16-bit binary PGM with the affine map min -> 0, max -> 65535;
/// constant rasters map to all zeros. Sample bytes are big-endian per
/// the netpbm format.
pub fn export_pgm(h: &Heatmap, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write!(out, "P5\n{} {}\n65535\n", h.width(), h.height())?;
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in h.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo) as f64;
    for &v in h.data() {
        let q = if span > 0.0 {
            (((v - lo) as f64 / span) * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(std::fs::write(path, out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::SigmaParam;
    use crate::synthscene::{gen_scene, SceneSpec};

    fn stack() -> HeatmapStack {
        let a = Heatmap::from_data(2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let b = Heatmap::from_data(2, 2, vec![-1.5, 3.25, 0.125, 2.0]).unwrap();
        HeatmapStack::new(vec![a, b], vec!["alpha".into(), "beta".into()]).unwrap()
    }

    #[test]
    fn ach_round_trip_is_bit_identical() {
        let s = stack();
        let bytes = write_ach(&s);
        let back = read_ach(&bytes).unwrap();
        assert_eq!(s, back);
        assert_eq!(bytes, write_ach(&back));
    }

    #[test]
    fn ach_payload_hex() {
        let a = Heatmap::from_data(2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let s = HeatmapStack::new(vec![a], vec!["h".into()]).unwrap();
        let bytes = write_ach(&s);
        // IEEE-754 LE: 0.0, 0.25, 0.5, 1.0.
        let payload = &bytes[bytes.len() - 16..];
        assert_eq!(
            payload,
            [
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3e, 0x00, 0x00, 0x00, 0x3f, 0x00,
                0x00, 0x80, 0x3f
            ]
        );
    }

    #[test]
    fn ach_rejects_malformed_input() {
        let s = stack();
        let bytes = write_ach(&s);
        // Truncated payload.
        match read_ach(&bytes[..bytes.len() - 3]) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
        // Bad magic.
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        match read_ach(&bad_magic) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("expected magic error, got {other:?}"),
        }
        // Bad version, offset 4.
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        match read_ach(&bad_version) {
            Err(Error::Format { offset: 4, .. }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
        // Trailing garbage.
        let mut long = bytes;
        long.push(0);
        assert!(read_ach(&long).is_err());
    }

    #[test]
    fn round9_behaviour() {
        assert_eq!(round9(0.0), 0.0);
        assert_eq!(round9(1.0), 1.0);
        assert_eq!(round9(123.456789123), 123.456789);
        assert_eq!(round9(-0.000123456789123), -0.000123456789);
        // f32 payloads survive the 9-digit round trip exactly.
        for v in [0.1f32, 1.0 / 3.0, 4.9195752f32, -7.25e-3] {
            assert_eq!(round9(v as f64) as f32, v);
        }
    }

    #[test]
    fn annotation_round_trip() {
        let gt = gen_scene(&SceneSpec { seed: 5, ..SceneSpec::default() }).unwrap();
        let doc = AnnotationDoc::from_scene(&gt, 256, 256);
        let text = write_annotation(&doc);
        let back = read_annotation(&text).unwrap();
        // Round-trips byte-stably after one quantization pass.
        assert_eq!(write_annotation(&back), text);
        assert_eq!(back.anchors.len(), 12);
        assert_eq!(back.contours.len(), 13);
        // Keys are sorted in the output.
        let a = text.find("\"anchors\"").unwrap();
        let c = text.find("\"contours\"").unwrap();
        let i = text.find("\"image_size\"").unwrap();
        assert!(a < c && c < i);
    }

    #[test]
    fn annotation_rejects_off_contour_landmark() {
        let gt = gen_scene(&SceneSpec { seed: 5, ..SceneSpec::default() }).unwrap();
        let mut doc = AnnotationDoc::from_scene(&gt, 256, 256);
        doc.landmarks[0].1[0].y += 0.5;
        let text = write_annotation(&doc);
        assert!(read_annotation(&text).is_err());
    }

    #[test]
    fn trace_doc_round_trip() {
        let params = ExtractionParams::defaults(SigmaParam::new(3.0).unwrap());
        let traces = vec![ContourTrace {
            points: vec![Point2::new(1.25, 2.5), Point2::new(3.0, 4.125)],
            scores: vec![10.312, 9.875],
        }];
        let channels = vec![
            ("chin boundary".to_string(), None, traces),
            ("nose tip".to_string(), Some(Point2::new(7.5, 8.25)), vec![]),
        ];
        let text = write_traces(&channels, &params);
        let back = read_traces(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].2[0].points, channels[0].2[0].points);
        assert_eq!(back[1].1, Some(Point2::new(7.5, 8.25)));
        assert_eq!(write_traces(&back, &params), text);
    }

    #[test]
    fn pgm_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let h = Heatmap::from_data(2, 2, vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        export_pgm(&h, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n2 2\n65535\n"));
        let pix = &bytes[b"P5\n2 2\n65535\n".len()..];
        assert_eq!(pix.len(), 8);
        assert_eq!(&pix[0..2], &[0, 0]);
        assert_eq!(&pix[4..6], &[0xff, 0xff]);

        let flat = Heatmap::from_data(2, 2, vec![0.7; 4]).unwrap();
        export_pgm(&flat, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes[b"P5\n2 2\n65535\n".len()..].iter().all(|&b| b == 0));
    }
}
