//! Minimal SVG plots: warp-function panels, profile heatmaps and grouped bars.
//! Coordinates are printed with fixed precision so output is reproducible.

use std::fmt::Write;

const PANEL: f64 = 260.0;
const MARGIN: f64 = 40.0;

fn header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(out, "<polyline fill=\"none\" {style} points=\"{}\"/>", d.trim_end());
}

/// One square panel per entry, each showing curves on `[0,1]²` with the
/// identity dashed. `emphasis` is drawn on top in a darker stroke.
pub struct WarpPanel<'a> {
    pub title: &'a str,
    pub curves: Vec<&'a [f64]>,
    pub emphasis: Option<&'a [f64]>,
}

pub fn warp_panels(title: &str, panels: &[WarpPanel]) -> String {
    let w = MARGIN + panels.len() as f64 * (PANEL + MARGIN);
    let h = PANEL + 2.5 * MARGIN;
    let mut out = header(w, h, title);
    for (p, panel) in panels.iter().enumerate() {
        let x0 = MARGIN + p as f64 * (PANEL + MARGIN);
        let y0 = 1.5 * MARGIN;
        let map = |t: f64, v: f64| (x0 + t * PANEL, y0 + (1.0 - v) * PANEL);
        let _ = writeln!(
            out,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{PANEL:.0}\" height=\"{PANEL:.0}\" fill=\"none\" stroke=\"#444\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x0 + PANEL / 2.0,
            y0 - 6.0,
            escape(panel.title)
        );
        let (a, b) = (map(0.0, 0.0), map(1.0, 1.0));
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
            a.0, a.1, b.0, b.1
        );
        let curve = |out: &mut String, g: &[f64], style: &str| {
            let n = g.len().max(2) - 1;
            polyline(out, g.iter().enumerate().map(|(j, &v)| map(j as f64 / n as f64, v)), style);
        };
        for g in &panel.curves {
            curve(&mut out, g, "stroke=\"#3b75af\" stroke-opacity=\"0.35\" stroke-width=\"1\"");
        }
        if let Some(g) = panel.emphasis {
            curve(&mut out, g, "stroke=\"#c03d3e\" stroke-width=\"2\"");
        }
    }
    out.push_str("</svg>\n");
    out
}

fn colour(v: f64) -> String {
    // White to dark blue.
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

/// Side-by-side heatmaps (one row per fiber) on a shared colour scale.
pub fn heatmaps(title: &str, panels: &[(&str, &[Vec<f64>])]) -> String {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in panels.iter().flat_map(|(_, rows)| rows.iter().flatten()) {
        if v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let w = MARGIN + panels.len() as f64 * (PANEL + MARGIN);
    let h = PANEL + 2.5 * MARGIN;
    let mut out = header(w, h, title);
    for (p, (name, rows)) in panels.iter().enumerate() {
        let x0 = MARGIN + p as f64 * (PANEL + MARGIN);
        let y0 = 1.5 * MARGIN;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            x0 + PANEL / 2.0,
            y0 - 6.0,
            escape(name)
        );
        let nr = rows.len().max(1) as f64;
        for (i, row) in rows.iter().enumerate() {
            let nc = row.len().max(1) as f64;
            let (cw, ch) = (PANEL / nc, PANEL / nr);
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                    x0 + j as f64 * cw,
                    y0 + i as f64 * ch,
                    cw + 0.05,
                    ch + 0.05,
                    colour((v - lo) / span)
                );
            }
        }
        let _ = writeln!(
            out,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{PANEL:.0}\" height=\"{PANEL:.0}\" fill=\"none\" stroke=\"#444\"/>"
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN:.0}\" y=\"{:.1}\">scale {lo:.3} to {hi:.3}</text>",
        h - 8.0
    );
    out.push_str("</svg>\n");
    out
}

/// Bar height with an error bar.
pub struct Bar {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
}

/// Groups of bars sharing one y axis starting at zero.
pub fn grouped_bars(title: &str, y_label: &str, groups: &[(String, Vec<Bar>)]) -> String {
    const BAR: f64 = 28.0;
    let palette = ["#7f7f7f", "#3b75af", "#c03d3e", "#519e3e"];
    let top = groups
        .iter()
        .flat_map(|(_, bars)| bars.iter())
        .map(|b| b.mean + b.sd.max(0.0))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let per_group: f64 = groups.iter().map(|(_, b)| b.len()).max().unwrap_or(1) as f64 * BAR + BAR;
    let w = 2.0 * MARGIN + groups.len().max(1) as f64 * per_group;
    let h = PANEL + 3.0 * MARGIN;
    let (y0, y1) = (1.5 * MARGIN, 1.5 * MARGIN + PANEL);
    let ymap = |v: f64| y1 - (v / top) * PANEL;
    let mut out = header(w, h, title);
    let _ = writeln!(
        out,
        "<line x1=\"{:.1}\" y1=\"{y0:.1}\" x2=\"{:.1}\" y2=\"{y1:.1}\" stroke=\"#444\"/>",
        MARGIN + 10.0,
        MARGIN + 10.0
    );
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{:.1}\" transform=\"rotate(-90 12 {:.1})\" text-anchor=\"middle\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{v:.2}</text>",
            MARGIN + 6.0,
            ymap(v) + 3.0
        );
    }
    for (g, (name, bars)) in groups.iter().enumerate() {
        let gx = 2.0 * MARGIN + g as f64 * per_group;
        for (b, bar) in bars.iter().enumerate() {
            let x = gx + b as f64 * BAR;
            let (mean, sd) = (bar.mean.max(0.0), bar.sd.max(0.0));
            if !mean.is_finite() {
                continue;
            }
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{:.2}\" width=\"{:.1}\" height=\"{:.2}\" fill=\"{}\"><title>{} {mean:.4} ± {sd:.4}</title></rect>",
                ymap(mean),
                BAR - 4.0,
                y1 - ymap(mean),
                palette[b % palette.len()],
                escape(&bar.label)
            );
            if sd.is_finite() && sd > 0.0 {
                let cx = x + (BAR - 4.0) / 2.0;
                let _ = writeln!(
                    out,
                    "<line x1=\"{cx:.1}\" y1=\"{:.2}\" x2=\"{cx:.1}\" y2=\"{:.2}\" stroke=\"black\"/>",
                    ymap(mean + sd),
                    ymap((mean - sd).max(0.0))
                );
            }
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            gx + bars.len() as f64 * BAR / 2.0,
            y1 + 16.0,
            escape(name)
        );
    }
    // Legend from the first group's labels.
    if let Some((_, bars)) = groups.first() {
        for (b, bar) in bars.iter().enumerate() {
            let x = 2.0 * MARGIN + b as f64 * 110.0;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                h - 22.0,
                palette[b % palette.len()],
                x + 14.0,
                h - 13.0,
                escape(&bar.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
