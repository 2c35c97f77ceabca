use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CrossTab;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    /// One group of bars per row, one bar per column.
    Bars,
    Heatmap,
}

const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Standalone SVG with axis labels and printed values. Output depends only
/// on the table, so identical tables give identical bytes.
pub fn render_svg(table: &CrossTab, kind: ChartKind) -> Result<String> {
    if table.is_empty() {
        return Err(Error::invalid("cannot render an empty table"));
    }
    match kind {
        ChartKind::Bars => Ok(bars(table)),
        ChartKind::Heatmap => Ok(heatmap(table)),
    }
}

fn header(out: &mut String, width: usize, height: usize, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        out,
        r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##
    );
}

fn bars(t: &CrossTab) -> String {
    let (bar_w, gap, plot_h, left, top) = (18usize, 24usize, 220usize, 60usize, 40usize);
    let group_w = t.cols.len() * bar_w;
    let plot_w = t.rows.len() * group_w + (t.rows.len() + 1) * gap;
    let legend_h = 16 * t.cols.len();
    let width = left + plot_w + 20;
    let height = top + plot_h + 50 + legend_h;
    let max = t.values.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let scale = if max > 0.0 { plot_h as f64 / max } else { 0.0 };
    let title = format!("{} by {}", t.col_dim, t.row_dim);

    let mut out = String::new();
    header(&mut out, width, height, &title);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        width / 2,
        escape(&title)
    );
    let base = top + plot_h;
    let _ = writeln!(
        out,
        r##"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="#333333"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="#333333"/>"##,
        left + plot_w
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        left - 4,
        top + 4,
        number(max)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">0</text>"#,
        left - 4,
        base
    );

    for (r, (label, row)) in t.rows.iter().zip(&t.values).enumerate() {
        let x0 = left + gap + r * (group_w + gap);
        for (c, v) in row.iter().enumerate() {
            let h = (v * scale).round() as usize;
            let x = x0 + c * bar_w;
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{}" width="{}" height="{h}" fill="{}"><title>{}, {}: {}</title></rect>"#,
                base - h,
                bar_w - 2,
                PALETTE[c % PALETTE.len()],
                escape(label),
                escape(&t.cols[c]),
                number(*v)
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
                x + bar_w / 2 - 1,
                base - h - 2,
                number(*v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + group_w / 2,
            base + 16,
            escape(label)
        );
    }
    for (c, col) in t.cols.iter().enumerate() {
        let y = base + 36 + 16 * c;
        let _ = writeln!(
            out,
            r#"<rect x="{left}" y="{}" width="10" height="10" fill="{}"/>"#,
            y - 9,
            PALETTE[c % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}">{}</text>"#,
            left + 14,
            escape(col)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn heatmap(t: &CrossTab) -> String {
    let (cell_w, cell_h, top) = (90usize, 28usize, 60usize);
    let left = 20 + 7 * t.rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
    let width = left + cell_w * t.cols.len() + 20;
    let height = top + cell_h * t.rows.len() + 20;
    let max = t.values.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let title = format!("{} by {}", t.col_dim, t.row_dim);

    let mut out = String::new();
    header(&mut out, width, height, &title);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        width / 2,
        escape(&title)
    );
    for (c, col) in t.cols.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            left + c * cell_w + cell_w / 2,
            top - 8,
            escape(col)
        );
    }
    for (r, (label, row)) in t.rows.iter().zip(&t.values).enumerate() {
        let y = top + r * cell_h;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6,
            y + cell_h / 2 + 4,
            escape(label)
        );
        for (c, v) in row.iter().enumerate() {
            let share = if max > 0.0 { v / max } else { 0.0 };
            // White to dark blue.
            let shade = |hi: f64| (255.0 - share * (255.0 - hi)).round() as u8;
            let fill = format!(
                "#{:02x}{:02x}{:02x}",
                shade(33.0),
                shade(102.0),
                shade(172.0)
            );
            let ink = if share > 0.6 { "#ffffff" } else { "#000000" };
            let x = left + c * cell_w;
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="#ffffff"/>"##
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{}</text>"#,
                x + cell_w / 2,
                y + cell_h / 2 + 4,
                number(*v)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
