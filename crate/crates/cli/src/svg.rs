//! Deterministic SVG output: fixed sampling, fixed number formatting, no
//! timestamps or ids that depend on the run.

use std::fmt::Write;

use birkhoff::beams::FocusChainInput;
use birkhoff::{PolygonalPath, Table, Vec2};

const TABLE_SAMPLES: usize = 720;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

struct View {
    min: Vec2,
    scale: f64,
    height: f64,
}

impl View {
    fn map(&self, p: Vec2) -> (f64, f64) {
        // SVG y grows downwards
        ((p.x - self.min.x) * self.scale, self.height - (p.y - self.min.y) * self.scale)
    }
}

fn coord(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn render(table: &Table, paths: &[PolygonalPath], endpoints: Option<(Vec2, Vec2)>, focus: bool, size: u32) -> String {
    let outline: Vec<Vec2> = (0..TABLE_SAMPLES)
        .map(|i| table.point(i as f64 / TABLE_SAMPLES as f64))
        .collect();
    let (mut lo, mut hi) = (outline[0], outline[0]);
    for p in &outline {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = 0.05 * (hi - lo).norm();
    let (lo, hi) = (lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad));
    let width = size as f64;
    let scale = width / (hi.x - lo.x);
    let height = ((hi.y - lo.y) * scale).ceil();
    let view = View { min: lo, scale, height };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = size,
        h = height as u32
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let pts: Vec<String> = outline
        .iter()
        .map(|&p| {
            let (x, y) = view.map(p);
            format!("{},{}", coord(x), coord(y))
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon class="table" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        pts.join(" ")
    );

    for (i, path) in paths.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, p) in path.nodes().iter().enumerate() {
            let (x, y) = view.map(*p);
            let _ = write!(d, "{}{} {} ", if k == 0 { "M" } else { "L" }, coord(x), coord(y));
        }
        let _ = writeln!(
            out,
            r#"<path class="billiard" data-index="{i}" d="{}" fill="none" stroke="{colour}" stroke-width="1"/>"#,
            d.trim_end()
        );
        for p in &path.points {
            let (x, y) = view.map(*p);
            let _ = writeln!(
                out,
                r#"<circle class="vertex" cx="{}" cy="{}" r="2.5" fill="{colour}"/>"#,
                coord(x),
                coord(y)
            );
        }
        if focus {
            let chain = FocusChainInput::from_path(table, path, 1.0);
            if let Ok(records) = chain.dump(None) {
                for (p, r) in path.points.iter().zip(records) {
                    let (x, y) = view.map(*p);
                    let _ = writeln!(
                        out,
                        r#"<text class="focus" x="{}" y="{}" font-size="9" fill="{colour}">f={:.4}</text>"#,
                        coord(x + 4.0),
                        coord(y - 4.0),
                        r.f_after
                    );
                }
            }
        }
    }

    if let Some((x, y)) = endpoints {
        for (label, p) in [("x", x), ("y", y)] {
            let (px, py) = view.map(p);
            let _ = writeln!(
                out,
                r#"<circle class="endpoint" cx="{}" cy="{}" r="3.5" fill="black"/>"#,
                coord(px),
                coord(py)
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="12">{label}</text>"#,
                coord(px + 5.0),
                coord(py + 12.0)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
