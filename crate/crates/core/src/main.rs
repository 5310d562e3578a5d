//! `ac`: the anchor-contour pipeline CLI.
//!
//! Subcommands cover the full desk-scale pipeline: scene generation,
//! heatmap synthesis, contourness, extraction, losses and evaluation.
//! Every subcommand is deterministic given its flags and inputs; the
//! thread count changes wall time only, never output bytes. Logging goes
//! to stderr, data to files or stdout. Exit codes: 0 success, 1
//! computation failure, 2 usage error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use anchor_contour::contourness::{contourness_bruteforce, contourness_map, ideal_peak_contourness};
use anchor_contour::evaluation::{ced_auc, nme_ac, EvalOptions, Prediction};
use anchor_contour::extraction::{extract_anchor, extract_contour, ContourTrace, ExtractionParams};
use anchor_contour::geometry::{line_contour, spline_contour, LandmarkChain, Point2, Polyline};
use anchor_contour::io::{
    export_pgm, read_ach_file, read_annotation, read_traces, round9, write_ach_file,
    write_annotation, write_ced_csv, write_report, write_traces, AnnotationDoc,
};
use anchor_contour::losses::{
    full_loss, full_loss_grad, weak_far_grad, weak_landmark_grad, weak_line_grad, weak_loss,
    FParams, LossWeights, WeakSupervision,
};
use anchor_contour::raster::{
    synth_anchor_heatmap, synth_contour_heatmap, Heatmap, HeatmapStack, SigmaParam,
};
use anchor_contour::synthscene::{gen_scene, render_scene, SceneSpec, ANCHOR_NAMES};
use anchor_contour::{Error, Result};

#[derive(Parser)]
#[command(name = "ac", version, about = "Anchor-contour face alignment pipeline")]
struct Cli {
    /// Worker threads (0 = all cores). Affects wall time only.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a deterministic face-like scene with exact ground truth.
    GenScene(GenSceneArgs),
    /// Synthesize ground-truth heatmaps from an annotation.
    Synth(SynthArgs),
    /// Compute contourness/orientation/normal maps for a heatmap stack.
    Contourness(ContournessArgs),
    /// Extract sub-pixel anchors and contour traces from heatmaps.
    Extract(ExtractArgs),
    /// Score a predicted stack against an annotation.
    Loss(LossArgs),
    /// Evaluate predictions against ground-truth landmarks.
    Eval(EvalArgs),
}

#[derive(clap::Args)]
struct GenSceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Raster size as WxH.
    #[arg(long, default_value = "256x256")]
    size: String,
    /// Output annotation JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Optional PGM render of the scene.
    #[arg(long)]
    render: Option<PathBuf>,
    /// Base face radius in pixels.
    #[arg(long, default_value_t = 90.0)]
    face_radius: f64,
    /// Minimum border margin in pixels.
    #[arg(long, default_value_t = 6.0)]
    margin: f64,
    /// Sparse landmarks per contour.
    #[arg(long, default_value_t = 16)]
    landmarks_k: usize,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Input annotation JSON.
    #[arg(long)]
    annotation: PathBuf,
    /// Output ACH stack.
    #[arg(long)]
    out: PathBuf,
    /// Heatmap peak width.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
}

#[derive(clap::Args)]
struct ContournessArgs {
    /// Input ACH stack.
    #[arg(long)]
    input: PathBuf,
    /// Output ACH stack with C/O/N channels per input channel.
    #[arg(long)]
    out: PathBuf,
    /// Steerable filter width.
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    /// Cross-check the closed form against a brute-force orientation
    /// sweep on every valid pixel; fails the run on disagreement.
    #[arg(long)]
    oracle: bool,
}

#[derive(clap::Args)]
struct ExtractArgs {
    /// Input ACH stack of predicted heatmaps.
    #[arg(long)]
    input: PathBuf,
    /// Output trace JSON.
    #[arg(long)]
    out: PathBuf,
    /// Extraction filter width.
    #[arg(long, default_value_t = 3.0)]
    sigma: f64,
    /// High hysteresis threshold (default: half the ideal peak).
    #[arg(long)]
    high: Option<f64>,
    /// Low hysteresis threshold (default: a quarter of the ideal peak).
    #[arg(long)]
    low: Option<f64>,
    #[arg(long, default_value_t = 3)]
    min_trace_length: usize,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum LossMode {
    Full,
    Weak,
}

#[derive(clap::Args)]
struct LossArgs {
    /// Predicted ACH stack.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth annotation JSON.
    #[arg(long)]
    annotation: PathBuf,
    #[arg(long, value_enum, default_value_t = LossMode::Full)]
    mode: LossMode,
    /// Heatmap peak width (synthesis and weak-loss filters).
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    /// Pooling radius for the line term and far-field mask.
    #[arg(long, default_value_t = 6.0)]
    d_radius: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_landmark: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_line: f64,
    /// Validate analytic gradients against central finite differences;
    /// exits nonzero on mismatch.
    #[arg(long)]
    grad_check: bool,
    /// Output JSON path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ContourModel {
    Line,
    Spline,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Predicted trace JSON or annotation JSON. Not needed with
    /// --contours, which rebuilds predictions from GT landmarks.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Ground-truth annotation JSON.
    #[arg(long)]
    gt: PathBuf,
    /// CED/AUC cutoff in percent.
    #[arg(long, default_value_t = 6.0)]
    cutoff: f64,
    /// Comma-separated anchor/contour names to exclude.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Score contours rebuilt from k sparse GT landmarks instead of a
    /// prediction file (the line-vs-spline experiment).
    #[arg(long, value_enum)]
    contours: Option<ContourModel>,
    /// Landmarks per contour for --contours.
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// Output report JSON path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CED CSV export.
    #[arg(long)]
    ced_csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<()> {
        match &cli.cmd {
            Cmd::GenScene(a) => cmd_gen_scene(a),
            Cmd::Synth(a) => cmd_synth(a),
            Cmd::Contourness(a) => cmd_contourness(a),
            Cmd::Extract(a) => cmd_extract(a),
            Cmd::Loss(a) => cmd_loss(a),
            Cmd::Eval(a) => cmd_eval(a),
        }
    };
    let result = if cli.threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(Error::InvalidParam(format!("thread pool: {e}"))),
        }
    } else {
        run()
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ac: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| Error::InvalidParam(format!("size must be WxH, got '{s}'")))?;
    let parse = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| Error::InvalidParam(format!("bad size component '{v}'")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sigma_param(v: f64) -> Result<SigmaParam> {
    SigmaParam::new(v)
}

fn cmd_gen_scene(a: &GenSceneArgs) -> Result<()> {
    let (w, h) = parse_size(&a.size)?;
    let spec = SceneSpec {
        seed: a.seed,
        width: w,
        height: h,
        face_radius: a.face_radius,
        margin: a.margin,
        landmarks_k: a.landmarks_k,
        ..SceneSpec::default()
    };
    let gt = gen_scene(&spec)?;
    let doc = AnnotationDoc::from_scene(&gt, w, h);
    std::fs::write(&a.out, write_annotation(&doc))?;
    eprintln!(
        "gen-scene: seed {} -> {} anchors, {} contours -> {}",
        a.seed,
        gt.anchors.len(),
        gt.contours.len(),
        a.out.display()
    );
    if let Some(render) = &a.render {
        export_pgm(&render_scene(&gt, w, h)?, render)?;
        eprintln!("gen-scene: render -> {}", render.display());
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let sigma = sigma_param(a.sigma)?;
    let doc = read_annotation(&std::fs::read_to_string(&a.annotation)?)?;
    let (w, h) = doc.image_size;
    // Channel order: anchors first, then contours, in annotation order.
    enum Src<'a> {
        Anchor(Point2),
        Contour(&'a str),
    }
    let mut jobs: Vec<(String, Src)> = Vec::new();
    for (name, p) in &doc.anchors {
        jobs.push((name.clone(), Src::Anchor(*p)));
    }
    for (name, _, _) in &doc.contours {
        jobs.push((name.clone(), Src::Contour(name)));
    }
    let channels: Vec<Heatmap> = jobs
        .par_iter()
        .map(|(_, src)| match src {
            Src::Anchor(p) => synth_anchor_heatmap(*p, sigma, w, h),
            Src::Contour(name) => {
                let c = doc
                    .contour(name)
                    .ok_or_else(|| Error::Geometry(format!("contour '{name}' is degenerate")))?;
                synth_contour_heatmap(&c, sigma, w, h)
            }
        })
        .collect::<Result<_>>()?;
    let names = jobs.into_iter().map(|(n, _)| n).collect();
    let stack = HeatmapStack::new(channels, names)?;
    write_ach_file(&stack, &a.out)?;
    eprintln!(
        "synth: {} channels at {}x{}, sigma {} -> {}",
        stack.len(),
        w,
        h,
        a.sigma,
        a.out.display()
    );
    Ok(())
}

fn cmd_contourness(a: &ContournessArgs) -> Result<()> {
    let sigma = sigma_param(a.sigma)?;
    let stack = read_ach_file(&a.input)?;
    let fields: Vec<_> = stack
        .channels()
        .par_iter()
        .map(|h| contourness_map(h, sigma))
        .collect::<Result<_>>()?;
    if a.oracle {
        let tol = 1e-3 * ideal_peak_contourness(sigma);
        for (h, f) in stack.channels().iter().zip(&fields) {
            for y in 0..h.height() {
                for x in 0..h.width() {
                    if !f.is_valid(x, y) {
                        continue;
                    }
                    let brute = contourness_bruteforce(h, x, y, sigma, 720)?;
                    let closed = f.c.get(x, y) as f64;
                    if (closed - brute).abs() > tol {
                        return Err(Error::Evaluation(format!(
                            "oracle mismatch at ({x}, {y}): closed {closed} vs brute {brute}"
                        )));
                    }
                }
            }
        }
        eprintln!("contourness: oracle check passed");
    }
    let mut channels = Vec::new();
    let mut names = Vec::new();
    for (name, f) in stack.names().iter().zip(fields) {
        channels.extend([f.c, f.o, f.n]);
        names.extend([format!("{name}.C"), format!("{name}.O"), format!("{name}.N")]);
    }
    let out = HeatmapStack::new(channels, names)?;
    write_ach_file(&out, &a.out)?;
    eprintln!(
        "contourness: {} -> {} channels -> {}",
        stack.len(),
        out.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let sigma = sigma_param(a.sigma)?;
    let mut params = ExtractionParams::defaults(sigma);
    if let Some(high) = a.high {
        params.high_threshold = high;
    }
    if let Some(low) = a.low {
        params.low_threshold = low;
    }
    params.min_trace_length = a.min_trace_length;
    params.validate()?;
    let stack = read_ach_file(&a.input)?;
    let channels: Vec<(String, Option<Point2>, Vec<ContourTrace>)> = stack
        .names()
        .par_iter()
        .zip(stack.channels().par_iter())
        .map(|(name, h)| {
            if ANCHOR_NAMES.contains(&name.as_str()) {
                let p = extract_anchor(h, sigma)?;
                Ok((name.clone(), Some(p), Vec::new()))
            } else {
                let traces = extract_contour(h, &params)?;
                Ok((name.clone(), None, traces))
            }
        })
        .collect::<Result<_>>()?;
    std::fs::write(&a.out, write_traces(&channels, &params))?;
    let n_traces: usize = channels.iter().map(|(_, _, t)| t.len()).sum();
    eprintln!(
        "extract: {} channels -> {} traces -> {}",
        channels.len(),
        n_traces,
        a.out.display()
    );
    Ok(())
}

/// Central finite-difference check of an analytic gradient on a fixed,
/// deterministic sample of pixels.
fn grad_check(
    pred: &Heatmap,
    grad: &[f64],
    eval: &dyn Fn(&Heatmap) -> Result<f64>,
    label: &str,
) -> Result<()> {
    let step = 1e-3f32;
    let n = pred.data().len();
    let samples: Vec<usize> = (0..24).map(|i| (i * 7919) % n).collect();
    for k in samples {
        let v = pred.data()[k];
        let mut hi = pred.clone();
        hi.data_mut()[k] = v + step;
        let mut lo = pred.clone();
        lo.data_mut()[k] = v - step;
        let realized = ((v + step) as f64) - ((v - step) as f64);
        let fd = (eval(&hi)? - eval(&lo)?) / realized;
        let g = grad[k];
        if g.abs() > 1e-6 || fd.abs() > 1e-6 {
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-9);
            if rel > 1e-2 {
                return Err(Error::Evaluation(format!(
                    "{label}: gradient mismatch at pixel {k}: analytic {g}, finite-diff {fd}"
                )));
            }
        }
    }
    Ok(())
}

fn cmd_loss(a: &LossArgs) -> Result<()> {
    let sigma = sigma_param(a.sigma)?;
    let doc = read_annotation(&std::fs::read_to_string(&a.annotation)?)?;
    let pred = read_ach_file(&a.pred)?;
    let weights = LossWeights {
        alpha: a.alpha,
        lambda_landmark: a.lambda_landmark,
        lambda_line: a.lambda_line,
        d_radius: a.d_radius,
        f_params: FParams::defaults(sigma),
    };
    weights.validate()?;
    let (w, h) = doc.image_size;

    let report = match a.mode {
        LossMode::Full => {
            // Ground-truth channels synthesized to match the prediction's
            // channel names.
            let gt_channels: Vec<Heatmap> = pred
                .names()
                .par_iter()
                .map(|name| {
                    if let Some((_, p)) = doc.anchors.iter().find(|(n, _)| n == name) {
                        synth_anchor_heatmap(*p, sigma, w, h)
                    } else if let Some(c) = doc.contour(name) {
                        synth_contour_heatmap(&c, sigma, w, h)
                    } else {
                        Err(Error::InvalidParam(format!(
                            "channel '{name}' is not in the annotation"
                        )))
                    }
                })
                .collect::<Result<_>>()?;
            let gt = HeatmapStack::new(gt_channels, pred.names().to_vec())?;
            let loss = full_loss(&gt, &pred, a.alpha)?;
            if a.grad_check {
                let grads = full_loss_grad(&gt, &pred, a.alpha)?;
                for (i, name) in pred.names().iter().enumerate() {
                    let gt = gt.clone();
                    let pred_stack = pred.clone();
                    let eval = move |h: &Heatmap| -> Result<f64> {
                        let mut channels = pred_stack.channels().to_vec();
                        channels[i] = h.clone();
                        let st = HeatmapStack::new(channels, pred_stack.names().to_vec())?;
                        full_loss(&gt, &st, a.alpha)
                    };
                    grad_check(&pred.channels()[i], &grads[i], &eval, name)?;
                }
                eprintln!("loss: gradient check passed");
            }
            serde_json::json!({ "mode": "full", "alpha": round9(a.alpha), "loss": round9(loss) })
        }
        LossMode::Weak => {
            let mut per_channel = Vec::new();
            let anchors: Vec<Point2> = doc.anchors.iter().map(|(_, p)| *p).collect();
            let mut total = 0.0;
            for (name, pts) in &doc.landmarks {
                let Some(h) = pred.channel_by_name(name) else {
                    continue;
                };
                let chain = LandmarkChain::new(pts.clone(), false)?;
                let sup = WeakSupervision::new(pts.clone(), line_contour(&chain), anchors.clone())?;
                let b = weak_loss(h, &sup, sigma, &weights)?;
                if a.grad_check {
                    let g = weak_landmark_grad(h, &sup, sigma, &weights)?;
                    grad_check(h, &g, &|m| {
                        anchor_contour::losses::weak_landmark_loss(m, &sup, sigma, &weights)
                    }, &format!("{name} (landmark)"))?;
                    let g = weak_line_grad(h, &sup, sigma, &weights)?;
                    grad_check(h, &g, &|m| {
                        anchor_contour::losses::weak_line_loss(m, &sup, sigma, &weights)
                    }, &format!("{name} (line)"))?;
                    let g = weak_far_grad(h, &sup.line_contour, a.d_radius, a.alpha)?;
                    grad_check(h, &g, &|m| {
                        anchor_contour::losses::weak_far_loss(m, &sup.line_contour, a.d_radius, a.alpha)
                    }, &format!("{name} (far)"))?;
                }
                total += b.total;
                per_channel.push(serde_json::json!({
                    "name": name,
                    "total": round9(b.total),
                    "landmark": round9(b.landmark),
                    "line": round9(b.line),
                    "far": round9(b.far),
                }));
            }
            if per_channel.is_empty() {
                return Err(Error::InvalidParam(
                    "no predicted channel matches an annotated landmark group".into(),
                ));
            }
            if a.grad_check {
                eprintln!("loss: gradient check passed");
            }
            serde_json::json!({
                "mode": "weak",
                "channels": per_channel,
                "mean_total": round9(total / per_channel.len() as f64),
            })
        }
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_text(a.out.as_deref(), &text)?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let doc = read_annotation(&std::fs::read_to_string(&a.gt)?)?;
    let gt = doc.ground_truth();
    let pred = match a.contours {
        Some(model) => {
            // Rebuild contours from k sparse GT landmarks; anchors are
            // taken as exact.
            let mut contours = Vec::new();
            for (name, _, _) in &doc.contours {
                let dense = doc
                    .contour(name)
                    .ok_or_else(|| Error::Geometry(format!("contour '{name}' is degenerate")))?;
                let chain = anchor_contour::synthscene::sample_landmarks(&dense, a.k)?;
                let c = match model {
                    ContourModel::Line => line_contour(&chain),
                    ContourModel::Spline => spline_contour(&chain, 16)?,
                };
                contours.push((name.clone(), c));
            }
            Prediction {
                anchors: doc.anchors.clone(),
                contours,
            }
        }
        None => {
            let path = a.pred.as_ref().ok_or_else(|| {
                Error::InvalidParam("--pred is required unless --contours is given".into())
            })?;
            load_prediction(path)?
        }
    };
    let opts = EvalOptions {
        cutoff: a.cutoff,
        exclude: a.exclude.iter().cloned().collect::<BTreeSet<_>>(),
    };
    let report = nme_ac(&gt, &pred, &opts)?;
    if let Some(csv) = &a.ced_csv {
        let (ced, _) = ced_auc(&[report.nme_overall], a.cutoff)?;
        std::fs::write(csv, write_ced_csv(&ced))?;
    }
    eprintln!(
        "eval: NME {:.4}%, AUC {:.2}%{}",
        report.nme_overall,
        report.auc,
        if report.missing.is_empty() {
            String::new()
        } else {
            format!(" ({} missing parts at penalty)", report.missing.len())
        }
    );
    write_text(a.out.as_deref(), &write_report(&report))?;
    Ok(())
}

/// A prediction file is either a trace document (from `extract`) or a
/// plain annotation. For trace documents the longest trace per channel
/// stands in as that contour's polyline.
fn load_prediction(path: &Path) -> Result<Prediction> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(traces) = read_traces(&text) {
        let mut anchors = Vec::new();
        let mut contours = Vec::new();
        for (name, anchor, ts) in traces {
            if let Some(p) = anchor {
                anchors.push((name.clone(), p));
            }
            if let Some(best) = ts.iter().max_by_key(|t| t.len()) {
                if best.len() >= 2 {
                    contours.push((name.clone(), Polyline::new(best.points.clone(), false)?));
                }
            }
        }
        return Ok(Prediction { anchors, contours });
    }
    read_annotation(&text)?.prediction()
}
