//! CSV traces and SVG convergence plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::trace::Trace;

/// `iteration,grad_evals,error`, then `w_0..` when positions were recorded and
/// `alpha_0..` when step-sizes were recorded. Records without a step-size
/// leave the alpha cells empty.
pub fn csv_string(t: &Trace) -> String {
    let mut out = String::from("iteration,grad_evals,error");
    if t.options.record_w {
        for i in 0..t.dim {
            write!(out, ",w_{i}").unwrap();
        }
    }
    if t.options.record_alpha {
        for i in 0..t.dim {
            write!(out, ",alpha_{i}").unwrap();
        }
    }
    out.push('\n');
    for r in &t.records {
        write!(out, "{},{},{}", r.iteration, r.grad_evals, r.error).unwrap();
        if t.options.record_w {
            push_cells(&mut out, r.w.as_ref().map(|v| v.as_slice()), t.dim);
        }
        if t.options.record_alpha {
            push_cells(&mut out, r.alpha.as_ref().map(|v| v.as_slice()), t.dim);
        }
        out.push('\n');
    }
    out
}

fn push_cells(out: &mut String, values: Option<&[f64]>, dim: usize) {
    match values {
        Some(v) => v.iter().for_each(|x| write!(out, ",{x}").unwrap()),
        None => (0..dim).for_each(|_| out.push(',')),
    }
}

pub fn write_csv(t: &Trace, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, csv_string(t))?;
    Ok(())
}

/// Several traces in one table: `label,iteration,grad_evals,error`.
pub fn combined_csv_string(traces: &[Trace]) -> String {
    let mut out = String::from("label,iteration,grad_evals,error\n");
    for t in traces {
        let label = t.label.replace(['"', ','], " ");
        for r in &t.records {
            writeln!(out, "{label},{},{},{}", r.iteration, r.grad_evals, r.error).unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XAxis {
    Iteration,
    #[default]
    GradEvals,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub title: String,
    pub log_y: bool,
    pub x_axis: XAxis,
    pub width: f64,
    pub height: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: String::new(),
            log_y: true,
            x_axis: XAxis::GradEvals,
            width: 800.0,
            height: 500.0,
        }
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#7f7f7f", "#bcbd22",
];

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per trace over error versus iterations or gradient
/// evaluations. With `log_y`, non-positive errors are drawn on the bottom axis.
pub fn svg_string(traces: &[Trace], opts: &PlotOptions) -> String {
    let x_of = |r: &crate::trace::TraceRecord| match opts.x_axis {
        XAxis::Iteration => r.iteration as f64,
        XAxis::GradEvals => r.grad_evals as f64,
    };
    let all = || traces.iter().flat_map(|t| t.records.iter());
    let x_max = all().map(x_of).fold(1.0f64, f64::max);
    let (y_lo, y_hi) = y_range(all().map(|r| r.error), opts.log_y);

    let plot_w = opts.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = opts.height - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let sy = |y: f64| {
        let v = if opts.log_y { y.max(10f64.powf(y_lo)).log10() } else { y };
        MARGIN_TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = opts.width,
        h = opts.height
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    if !opts.title.is_empty() {
        writeln!(
            s,
            r#"<text x="{:.1}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(&opts.title)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    // y ticks
    let ticks: Vec<f64> = if opts.log_y {
        let step = ((y_hi - y_lo) / 10.0).ceil().max(1.0);
        let mut v = Vec::new();
        let mut e = y_lo;
        while e <= y_hi + 1e-9 {
            v.push(e);
            e += step;
        }
        v
    } else {
        (0..=5).map(|i| y_lo + (y_hi - y_lo) * i as f64 / 5.0).collect()
    };
    for t in ticks {
        let y = MARGIN_TOP + (1.0 - (t - y_lo) / (y_hi - y_lo)) * plot_h;
        let label = if opts.log_y { format!("1e{}", t as i64) } else { format!("{t:.3e}") };
        writeln!(
            s,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_LEFT}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"##,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    // x ticks
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let x = sx(xv);
        let y0 = MARGIN_TOP + plot_h;
        writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            xv.round() as i64
        )
        .unwrap();
    }
    let x_label = match opts.x_axis {
        XAxis::Iteration => "iteration",
        XAxis::GradEvals => "gradient evaluations",
    };
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{x_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        opts.height - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">error</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, t) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for r in &t.records {
            if !points.is_empty() {
                points.push(' ');
            }
            write!(points, "{:.2},{:.2}", sx(x_of(r)), sy(r.error)).unwrap();
        }
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>"#
        )
        .unwrap();
        let ly = MARGIN_TOP + 12.0 + 18.0 * i as f64;
        let lx = opts.width - MARGIN_RIGHT + 12.0;
        writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&t.label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Axis range: decades `(lo, hi)` for log scale, raw values otherwise.
fn y_range(errors: impl Iterator<Item = f64>, log_y: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for e in errors {
        if log_y && e <= 0.0 {
            continue;
        }
        let v = if log_y { e.log10() } else { e };
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if log_y {
        lo = lo.floor();
        hi = hi.ceil();
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    (lo, hi)
}

pub fn render_svg(traces: &[Trace], path: impl AsRef<Path>, opts: &PlotOptions) -> Result<()> {
    fs::write(path, svg_string(traces, opts))?;
    Ok(())
}
