//! SVG rendering of an explanation document's trajectory.

use std::fmt::Write as _;
use std::path::PathBuf;

use aimguard_core::explainer::ExplanationDoc;
use aimguard_core::features::FEATURE_NAMES;
use aimguard_core::trajectory::{render_trajectory, ScreenPoint, TrajectoryDrawing, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use anyhow::{ensure, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::manifest::{file_manifest, Run};

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct RenderArgs {
    /// Explanation document written by `explain`.
    #[arg(long)]
    pub explanation: PathBuf,
    /// Feature whose attribution colors the path; the one with the most
    /// attribution mass when omitted.
    #[arg(long)]
    pub feature: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn dominant_feature(doc: &ExplanationDoc) -> &'static str {
    let mass = |n: &str| doc.feature_track(n).iter().map(|v| v.abs()).sum::<f64>();
    FEATURE_NAMES
        .iter()
        .copied()
        .max_by(|a, b| mass(a).total_cmp(&mass(b)))
        .expect("feature list is not empty")
}

pub fn svg(drawing: &TrajectoryDrawing, title: &str) -> String {
    let mut s = String::new();
    let (w, h) = (drawing.width, drawing.height);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", title.replace('&', "&amp;").replace('<', "&lt;"));
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for seg in &drawing.segments {
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{}" stroke-width="3" stroke-linecap="round"/>"#,
            seg.from.0, seg.from.1, seg.to.0, seg.to.1, seg.color
        );
    }
    for (x, y) in &drawing.fire_markers {
        let _ = writeln!(s, r##"<circle cx="{x:.3}" cy="{y:.3}" r="5" fill="none" stroke="#202020"/>"##);
    }
    if let Some((x, y)) = drawing.elimination_marker {
        let _ = writeln!(
            s,
            r##"<path d="M {:.3} {:.3} L {:.3} {:.3} M {:.3} {:.3} L {:.3} {:.3}" stroke="#000000" stroke-width="3"/>"##,
            x - 10.0,
            y - 10.0,
            x + 10.0,
            y + 10.0,
            x - 10.0,
            y + 10.0,
            x + 10.0,
            y - 10.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render(args: RenderArgs) -> Result<()> {
    let mut run = Run::start("render", &args)?;
    let bytes = std::fs::read(&args.explanation)
        .with_context(|| format!("render: reading {}", args.explanation.display()))?;
    run.input(&args.explanation);
    let doc: ExplanationDoc = serde_json::from_slice(&bytes).context("render: not an explanation document")?;
    let feature = match &args.feature {
        Some(f) => {
            ensure!(FEATURE_NAMES.contains(&f.as_str()), "render: unknown feature {f:?}; expected one of {FEATURE_NAMES:?}");
            f.clone()
        }
        None => dominant_feature(&doc).to_string(),
    };
    let points: Vec<ScreenPoint> = doc
        .ticks
        .iter()
        .map(|t| ScreenPoint {
            tick: t.t,
            x: t.x,
            y: t.y,
            fired: t.fired,
            eliminated: t.eliminated,
        })
        .collect();
    let values = doc.feature_track(&feature);
    let drawing = render_trajectory(&points, Some(&values), DEFAULT_WIDTH, DEFAULT_HEIGHT);
    let text = svg(&drawing, &format!("{} ({feature})", doc.elimination_id));
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, text).with_context(|| format!("render: writing {}", args.out.display()))?;
    run.output(&args.out);
    run.notes = serde_json::json!({ "feature": feature });
    run.finish(&file_manifest(&args.out))?;
    Ok(())
}
