//! Small self-contained SVG renderers: line charts, body outlines, flow
//! profiles and meshes.

use std::fmt::Write;

use crate::flowshape::FlowShapePair;
use crate::geometry::{BodyShape, ConfinementBox, Rect};
use crate::lift::LiftCurve;
use crate::mesh::{BoundaryTag, Mesh};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub width: f64,
    pub height: f64,
}

impl LineChart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LineChart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: vec![],
            width: 640.0,
            height: 400.0,
        }
    }

    pub fn with_series(mut self, name: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { name: name.into(), points });
        self
    }

    pub fn to_svg(&self) -> String {
        let (w, h) = (self.width, self.height);
        let (ml, mr, mt, mb) = (70.0, 20.0, 36.0, 48.0);
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| if b - a > 0.0 { (a, b) } else { (a - 0.5 * a.abs().max(1.0), b + 0.5 * b.abs().max(1.0)) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        let (y0, y1) = (y0 - 0.05 * (y1 - y0), y1 + 0.05 * (y1 - y0));
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
        let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

        let mut s = svg_open(w, h);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, esc(&self.title));
        let _ = writeln!(
            s,
            r##"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            w - ml - mr,
            h - mt - mb
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
                sx(xv),
                h - mb + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
                ml - 6.0,
                sy(yv) + 4.0,
                tick(yv)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{ml}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
                w - mr,
                sy(yv),
                sy(yv)
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(s, r##"<line x1="{ml}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#888"/>"##, w - mr, sy(0.0), sy(0.0));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, (ml + w - mr) / 2.0, h - 10.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {y})">{}</text>"#,
            esc(&self.y_label),
            y = (mt + h - mb) / 2.0
        );
        for (k, ser) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = ser
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#, path.join(" "));
            let ly = mt + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="11">{}</text>"#,
                ml + 10.0,
                ml + 30.0,
                ml + 36.0,
                ly + 4.0,
                esc(&ser.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Lift against magnitude.
pub fn lift_curve_svg(curves: &[(&str, &LiftCurve)]) -> String {
    let mut c = LineChart::new("Lift", "λ", "L(λ)");
    for (name, curve) in curves {
        c = c.with_series(name, curve.lambdas.iter().cloned().zip(curve.lifts.iter().cloned()).collect());
    }
    c.to_svg()
}

/// Inflow and outflow profiles against `x2`.
pub fn profile_svg(pair: &FlowShapePair) -> String {
    let pts = |v: &crate::flowshape::FlowProfile| (0..v.len()).map(|i| (v.x(i), v.nodes()[i])).collect();
    LineChart::new("Flow shape", "x2", "V(x2)")
        .with_series("inflow", pts(&pair.v_in))
        .with_series("outflow", pts(&pair.v_out))
        .to_svg()
}

/// Body outlines, optionally inside the confinement box and the channel.
pub fn shapes_svg(rect: Option<&Rect>, d: Option<&ConfinementBox>, bodies: &[(&str, &BodyShape)]) -> String {
    let (mut a, mut b) = (0.0f64, 0.0f64);
    if let Some(r) = rect {
        (a, b) = (r.half_width, r.half_height);
    } else if let Some(d) = d {
        (a, b) = (d.half_width, d.half_height);
    }
    for (_, body) in bodies {
        let (lo, hi) = body.bbox();
        a = a.max(lo[0].abs()).max(hi[0].abs());
        b = b.max(lo[1].abs()).max(hi[1].abs());
    }
    let (a, b) = (1.05 * a.max(1e-9), 1.05 * b.max(1e-9));
    let w = 720.0;
    let h = (w * b / a).clamp(160.0, 720.0);
    let sx = |x: f64| (x + a) / (2.0 * a) * w;
    let sy = |y: f64| h - (y + b) / (2.0 * b) * h;
    let mut s = svg_open(w, h);
    let mut rect_el = |half_w: f64, half_h: f64, style: &str| {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            sx(-half_w),
            sy(half_h),
            sx(half_w) - sx(-half_w),
            sy(-half_h) - sy(half_h)
        );
    };
    if let Some(r) = rect {
        rect_el(r.half_width, r.half_height, r##"fill="#f4f8fc" stroke="#333""##);
    }
    if let Some(d) = d {
        rect_el(d.half_width, d.half_height, r##"fill="none" stroke="#999" stroke-dasharray="6 4""##);
    }
    for (k, (name, body)) in bodies.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = body.vertices().iter().map(|p| format!("{:.2},{:.2}", sx(p[0]), sy(p[1]))).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.25" stroke="{color}" stroke-width="1.5"><title>{}</title></polygon>"#,
            pts.join(" "),
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Triangles of the mesh with the body boundary highlighted.
pub fn mesh_svg(m: &Mesh) -> String {
    let r = m.rect();
    let (a, b) = (r.half_width, r.half_height);
    let w = 960.0;
    let h = w * b / a;
    let sx = |x: f64| (x + a) / (2.0 * a) * w;
    let sy = |y: f64| h - (y + b) / (2.0 * b) * h;
    let mut s = svg_open(w, h);
    let mut path = String::new();
    for t in m.triangles() {
        let p = t.map(|v| m.nodes()[v]);
        let _ = write!(
            path,
            "M{:.2} {:.2}L{:.2} {:.2}L{:.2} {:.2}Z",
            sx(p[0][0]),
            sy(p[0][1]),
            sx(p[1][0]),
            sy(p[1][1]),
            sx(p[2][0]),
            sy(p[2][1])
        );
    }
    let _ = writeln!(s, r##"<path d="{path}" fill="#fbfbfb" stroke="#6a8caf" stroke-width="0.4"/>"##);
    let mut body = String::new();
    for e in m.boundary().iter().filter(|e| e.tag == BoundaryTag::BodyBoundary) {
        let [p, q] = e.edge.map(|v| m.nodes()[v]);
        let _ = write!(body, "M{:.2} {:.2}L{:.2} {:.2}", sx(p[0]), sy(p[1]), sx(q[0]), sy(q[1]));
    }
    let _ = writeln!(s, r##"<path d="{body}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##);
    s.push_str("</svg>\n");
    s
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">\n"
    )
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
