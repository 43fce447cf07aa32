//! mCV scatter plots (SVG) and summary tables (CSV / Markdown).
//!
//! The plot puts CV on the x axis and mean accuracy on the y axis (upwards).
//! Lines through the reference point split it into four groups: I upper
//! left, II upper right, III lower left, IV lower right.

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

use crate::metrics::{classify_quadrant, QuadrantGroup, RunSummary};

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("plot has no reference point")]
    NoReference,
    #[error("plot has {0} reference points, expected exactly one")]
    MultipleReferences(usize),
    #[error("no run named {0:?} among the summaries")]
    UnknownReference(String),
    #[error("point {0:?} has a non-finite coordinate")]
    NonFinite(String),
    #[error("{axis} range [{lo}, {hi}] is empty")]
    BadRange { axis: &'static str, lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct McvPoint {
    pub label: String,
    pub mean_accuracy: f64,
    pub cv: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub is_reference: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McvPlotSpec {
    pub title: Option<String>,
    pub points: Vec<McvPoint>,
    /// Explicit `(lo, hi)` for the CV axis; padded data bounds when `None`.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    /// Draw a vertical min..max accuracy bar through each point.
    pub whiskers: bool,
}

impl McvPlotSpec {
    /// One point per summary; `reference` is matched against
    /// [`RunSummary::display_name`].
    pub fn from_summaries(summaries: &[RunSummary], reference: &str) -> Result<Self, ReportError> {
        if !summaries.iter().any(|s| s.display_name() == reference) {
            return Err(ReportError::UnknownReference(reference.to_string()));
        }
        Ok(Self {
            title: None,
            points: summaries
                .iter()
                .map(|s| McvPoint {
                    label: s.display_name(),
                    mean_accuracy: s.mean_accuracy,
                    cv: s.cv,
                    min_accuracy: s.min_accuracy,
                    max_accuracy: s.max_accuracy,
                    is_reference: s.display_name() == reference,
                })
                .collect(),
            x_range: None,
            y_range: None,
            whiskers: true,
        })
    }

    pub fn reference(&self) -> Result<&McvPoint, ReportError> {
        let refs: Vec<&McvPoint> = self.points.iter().filter(|p| p.is_reference).collect();
        match refs.as_slice() {
            [] => Err(ReportError::NoReference),
            [one] => Ok(one),
            many => Err(ReportError::MultipleReferences(many.len())),
        }
    }

    /// Group of every point relative to the reference, in point order.
    pub fn groups(&self) -> Result<Vec<QuadrantGroup>, ReportError> {
        let r = self.reference()?;
        Ok(self
            .points
            .iter()
            .map(|p| classify_quadrant(p.mean_accuracy, p.cv, r.mean_accuracy, r.cv))
            .collect())
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const TICKS: usize = 5;

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 { span * 0.1 } else { 1.0 };
    (lo - pad, hi + pad)
}

fn check_range(axis: &'static str, (lo, hi): (f64, f64)) -> Result<(f64, f64), ReportError> {
    if lo.is_finite() && hi.is_finite() && hi > lo {
        Ok((lo, hi))
    } else {
        Err(ReportError::BadRange { axis, lo, hi })
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Affine map from data space to SVG pixels; y is flipped.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, cv: f64) -> f64 {
        LEFT + (cv - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, ma: f64) -> f64 {
        TOP + (self.y.1 - ma) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
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

/// Renders the plot as SVG 1.1. Identical specs give identical bytes.
pub fn render_mcv_svg(spec: &McvPlotSpec) -> Result<String, ReportError> {
    let reference = spec.reference()?;
    for p in &spec.points {
        let coords = [p.mean_accuracy, p.cv, p.min_accuracy, p.max_accuracy];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(ReportError::NonFinite(p.label.clone()));
        }
    }
    let groups = spec.groups()?;

    let x = match spec.x_range {
        Some(r) => r,
        None => padded_nonnegative(bounds(spec.points.iter().map(|p| p.cv))),
    };
    let y = match spec.y_range {
        Some(r) => r,
        None => {
            let values = spec.points.iter().flat_map(|p| {
                if spec.whiskers {
                    vec![p.mean_accuracy, p.min_accuracy, p.max_accuracy]
                } else {
                    vec![p.mean_accuracy]
                }
            });
            let (lo, hi) = bounds(values);
            padded(lo, hi)
        }
    };
    let frame = Frame {
        x: check_range("x", x)?,
        y: check_range("y", y)?,
    };

    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP, HEIGHT - BOTTOM);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="white"/>"#
    );
    if let Some(title) = &spec.title {
        let _ = writeln!(
            svg,
            r#"<text x="{:.4}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
            (x0 + x1) / 2.0,
            escape(title)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect class="frame" x="{x0:.4}" y="{y0:.4}" width="{:.4}" height="{:.4}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );

    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let px = frame.px(xv);
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{px:.4}" y1="{y1:.4}" x2="{px:.4}" y2="{:.4}" stroke="black"/>"#,
            y1 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.4}" y="{:.4}" text-anchor="middle" font-size="11">{xv:.2}</text>"#,
            y1 + 18.0
        );
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let py = frame.py(yv);
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{:.4}" y1="{py:.4}" x2="{x0:.4}" y2="{py:.4}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.4}" y="{:.4}" text-anchor="end" font-size="11">{yv:.2}</text>"#,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.4}" y="{:.4}" text-anchor="middle" font-size="13">Coefficient of variation (%)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.4}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {:.4})">Mean accuracy (%)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let ref_x = frame.px(reference.cv);
    let ref_y = frame.py(reference.mean_accuracy);
    let _ = writeln!(
        svg,
        r#"<line class="quadrant-line" id="ref-cv" x1="{ref_x:.4}" y1="{y0:.4}" x2="{ref_x:.4}" y2="{y1:.4}" stroke="gray" stroke-dasharray="6 4"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line class="quadrant-line" id="ref-ma" x1="{x0:.4}" y1="{ref_y:.4}" x2="{x1:.4}" y2="{ref_y:.4}" stroke="gray" stroke-dasharray="6 4"/>"#
    );
    let corners = [
        ("I", x0 + 8.0, y0 + 18.0, "start"),
        ("II", x1 - 8.0, y0 + 18.0, "end"),
        ("III", x0 + 8.0, y1 - 8.0, "start"),
        ("IV", x1 - 8.0, y1 - 8.0, "end"),
    ];
    for (numeral, qx, qy, anchor) in corners {
        let _ = writeln!(
            svg,
            r#"<text class="quadrant-label" x="{qx:.4}" y="{qy:.4}" text-anchor="{anchor}" font-size="14" fill="gray">Group {numeral}</text>"#
        );
    }

    for (p, group) in spec.points.iter().zip(&groups) {
        let numeral = group.to_string().trim_start_matches("Group ").to_string();
        let cx = frame.px(p.cv);
        let cy = frame.py(p.mean_accuracy);
        let _ = writeln!(
            svg,
            r#"<g class="point" data-label="{}" data-group="{numeral}" data-reference="{}">"#,
            escape(&p.label),
            p.is_reference
        );
        if spec.whiskers {
            let _ = writeln!(
                svg,
                r#"<line class="whisker" x1="{cx:.4}" y1="{:.4}" x2="{cx:.4}" y2="{:.4}" stroke="steelblue"/>"#,
                frame.py(p.max_accuracy),
                frame.py(p.min_accuracy)
            );
        }
        let (fill, radius) = if p.is_reference {
            ("crimson", 6.0)
        } else {
            ("steelblue", 4.0)
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.4}" cy="{cy:.4}" r="{radius:.1}" fill="{fill}"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.4}" y="{:.4}" font-size="10">{}</text>"#,
            cx + 7.0,
            cy - 5.0,
            escape(&p.label)
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded_nonnegative(range: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = padded(range.0, range.1);
    if range.0 >= 0.0 && lo < 0.0 {
        (0.0, hi)
    } else {
        (lo, hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub const TABLE_COLUMNS: [&str; 6] = [
    "classifier(training set)",
    "CV %",
    "mean Accu %",
    "Accu(clean) %",
    "min Accu %",
    "max Accu %",
];

/// Decimal rendering rounded half away from zero at 2 places, treating the
/// value as its shortest 6-decimal form so `1.005` becomes `1.01`.
pub fn format_2dp(value: f64) -> String {
    let micros = (value * 1e6).round() as i128;
    let sign = if micros < 0 { "-" } else { "" };
    let hundredths = (micros.abs() + 5_000) / 10_000;
    format!("{sign}{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Case-insensitive order on (classifier, training label), exact order as tiebreak.
fn table_order(a: &RunSummary, b: &RunSummary) -> Ordering {
    let key = |s: &RunSummary| {
        (
            s.classifier_name.to_lowercase(),
            s.training_label.to_lowercase(),
        )
    };
    key(a)
        .cmp(&key(b))
        .then_with(|| a.classifier_name.cmp(&b.classifier_name))
        .then_with(|| a.training_label.cmp(&b.training_label))
}

fn table_cells(s: &RunSummary) -> [String; 6] {
    [
        s.display_name(),
        format_2dp(s.cv),
        format_2dp(s.mean_accuracy),
        s.accu_clean.map(format_2dp).unwrap_or_default(),
        format_2dp(s.min_accuracy),
        format_2dp(s.max_accuracy),
    ]
}

pub fn render_table(summaries: &[RunSummary], format: TableFormat) -> String {
    let mut sorted: Vec<&RunSummary> = summaries.iter().collect();
    sorted.sort_by(|a, b| table_order(a, b));
    match format {
        TableFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(TABLE_COLUMNS).expect("in-memory write");
            for s in sorted {
                writer.write_record(table_cells(s)).expect("in-memory write");
            }
            String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("UTF-8 input")
        }
        TableFormat::Markdown => {
            let mut out = format!("| {} |\n", TABLE_COLUMNS.join(" | "));
            out.push_str("|---|---:|---:|---:|---:|---:|\n");
            for s in sorted {
                let cells = table_cells(s).map(|c| c.replace('|', "\\|"));
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(label: &str, ma: f64, cv: f64, is_reference: bool) -> McvPoint {
        McvPoint {
            label: label.into(),
            mean_accuracy: ma,
            cv,
            min_accuracy: ma - 2.0,
            max_accuracy: ma + 2.0,
            is_reference,
        }
    }

    fn attr(line: &str, name: &str) -> f64 {
        let start = line.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        let end = start + line[start..].find('"').unwrap();
        line[start..end].parse().unwrap()
    }

    #[test]
    fn reference_alone_sits_on_both_lines() {
        let spec = McvPlotSpec {
            title: None,
            points: vec![point("Net(clean)", 85.0, 2.0, true)],
            x_range: None,
            y_range: None,
            whiskers: false,
        };
        let svg = render_mcv_svg(&spec).unwrap();
        let vline = svg.lines().find(|l| l.contains(r#"id="ref-cv""#)).unwrap();
        let hline = svg.lines().find(|l| l.contains(r#"id="ref-ma""#)).unwrap();
        let circle = svg.lines().find(|l| l.starts_with("<circle")).unwrap();
        assert_eq!(attr(circle, "cx"), attr(vline, "x1"));
        assert_eq!(attr(circle, "cy"), attr(hline, "y1"));
        assert!(svg.contains(r#"data-group="I""#));
    }

    #[test]
    fn reference_count_is_enforced() {
        let mut spec = McvPlotSpec {
            title: None,
            points: vec![point("a", 1.0, 1.0, false)],
            x_range: None,
            y_range: None,
            whiskers: true,
        };
        assert_eq!(render_mcv_svg(&spec), Err(ReportError::NoReference));
        spec.points.push(point("b", 1.0, 1.0, true));
        spec.points.push(point("c", 1.0, 1.0, true));
        assert_eq!(render_mcv_svg(&spec), Err(ReportError::MultipleReferences(2)));
    }

    #[test]
    fn bad_inputs() {
        let mut spec = McvPlotSpec {
            title: None,
            points: vec![point("a", 1.0, 1.0, true)],
            x_range: Some((2.0, 2.0)),
            y_range: None,
            whiskers: true,
        };
        assert!(matches!(
            render_mcv_svg(&spec),
            Err(ReportError::BadRange { axis: "x", .. })
        ));
        spec.x_range = None;
        spec.y_range = Some((5.0, 1.0));
        assert!(matches!(
            render_mcv_svg(&spec),
            Err(ReportError::BadRange { axis: "y", .. })
        ));
        spec.y_range = None;
        spec.points[0].cv = f64::NAN;
        assert_eq!(render_mcv_svg(&spec), Err(ReportError::NonFinite("a".into())));
    }

    #[test]
    fn labels_are_escaped() {
        let spec = McvPlotSpec {
            title: Some("A & B".into()),
            points: vec![point("<x>", 1.0, 1.0, true)],
            x_range: None,
            y_range: None,
            whiskers: false,
        };
        let svg = render_mcv_svg(&spec).unwrap();
        assert!(svg.contains("&lt;x&gt;"));
        assert!(svg.contains("A &amp; B"));
        assert!(!svg.contains("<x>"));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_2dp(1.005), "1.01");
        assert_eq!(format_2dp(2.28), "2.28");
        assert_eq!(format_2dp(85.2549), "85.25");
        assert_eq!(format_2dp(85.255), "85.26");
        assert_eq!(format_2dp(90.9), "90.90");
        assert_eq!(format_2dp(0.0), "0.00");
        assert_eq!(format_2dp(-1.005), "-1.01");
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(
            render_table(&[], TableFormat::Csv),
            "classifier(training set),CV %,mean Accu %,Accu(clean) %,min Accu %,max Accu %\n"
        );
        assert_eq!(render_table(&[], TableFormat::Markdown).lines().count(), 2);
    }
}
