//! Minimal static SVG plot emitter: scatter, line, and grouped bar charts
//! with linear or log axes. Enough to render the report figures without a
//! plotting dependency.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub log: bool,
}

impl Axis {
    pub fn linear(label: &str, min: f64, max: f64) -> Self {
        let pad = 0.05 * (max - min).max(f64::MIN_POSITIVE);
        Self {
            label: label.into(),
            min: min - pad,
            max: max + pad,
            log: false,
        }
    }

    pub fn log(label: &str, min: f64, max: f64) -> Self {
        Self {
            label: label.into(),
            min: (min / 1.2).max(f64::MIN_POSITIVE),
            max: max * 1.2,
            log: true,
        }
    }

    fn fraction(&self, v: f64) -> f64 {
        if self.log {
            (v.ln() - self.min.ln()) / (self.max.ln() - self.min.ln())
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }
}

pub struct Plot {
    width: f64,
    height: f64,
    margin: f64,
    x: Axis,
    y: Axis,
    body: String,
}

impl Plot {
    pub fn new(title: &str, x: Axis, y: Axis) -> Self {
        let (width, height, margin) = (760.0, 520.0, 70.0);
        let mut plot = Self {
            width,
            height,
            margin,
            x,
            y,
            body: String::new(),
        };
        let _ = write!(
            plot.body,
            r##"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"##
        );
        plot.frame_and_ticks();
        let cx = width / 2.0;
        let _ = write!(
            plot.body,
            r##"<text x="{cx}" y="28" text-anchor="middle" font-size="16" font-family="sans-serif">{}</text>"##,
            escape(title)
        );
        plot
    }

    fn px(&self, v: f64) -> f64 {
        self.margin + self.x.fraction(v) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, v: f64) -> f64 {
        self.height - self.margin - self.y.fraction(v) * (self.height - 2.0 * self.margin)
    }

    fn frame_and_ticks(&mut self) {
        let (x0, y0) = (self.margin, self.margin);
        let (x1, y1) = (self.width - self.margin, self.height - self.margin);
        let _ = write!(
            self.body,
            r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            x1 - x0,
            y1 - y0
        );
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = if self.x.log {
                (self.x.min.ln() + f * (self.x.max.ln() - self.x.min.ln())).exp()
            } else {
                self.x.min + f * (self.x.max - self.x.min)
            };
            let yv = if self.y.log {
                (self.y.min.ln() + f * (self.y.max.ln() - self.y.min.ln())).exp()
            } else {
                self.y.min + f * (self.y.max - self.y.min)
            };
            let px = self.margin + f * (self.width - 2.0 * self.margin);
            let py = self.height - self.margin - f * (self.height - 2.0 * self.margin);
            let _ = write!(
                self.body,
                r##"<line x1="{px}" y1="{y1}" x2="{px}" y2="{}" stroke="#333"/><text x="{px}" y="{}" text-anchor="middle" font-size="11" font-family="sans-serif">{}</text>"##,
                y1 + 6.0,
                y1 + 20.0,
                fmt_tick(xv)
            );
            let _ = write!(
                self.body,
                r##"<line x1="{}" y1="{py}" x2="{x0}" y2="{py}" stroke="#333"/><text x="{}" y="{}" text-anchor="end" font-size="11" font-family="sans-serif">{}</text>"##,
                x0 - 6.0,
                x0 - 9.0,
                py + 4.0,
                fmt_tick(yv)
            );
        }
        let cx = self.width / 2.0;
        let cy = self.height - 18.0;
        let _ = write!(
            self.body,
            r##"<text x="{cx}" y="{cy}" text-anchor="middle" font-size="13" font-family="sans-serif">{}</text>"##,
            escape(&self.x.label)
        );
        let ly = self.height / 2.0;
        let _ = write!(
            self.body,
            r##"<text x="18" y="{ly}" text-anchor="middle" font-size="13" font-family="sans-serif" transform="rotate(-90 18 {ly})">{}</text>"##,
            escape(&self.y.label)
        );
    }

    pub fn scatter(&mut self, points: &[(f64, f64)], color: &str) {
        for &(x, y) in points {
            let _ = write!(
                self.body,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}" fill-opacity="0.75"/>"##,
                self.px(x),
                self.py(y)
            );
        }
    }

    pub fn line(&mut self, points: &[(f64, f64)], color: &str) {
        if points.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                self.px(x),
                self.py(y)
            );
        }
        let _ = write!(
            self.body,
            r##"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.8"/>"##
        );
    }

    /// A vertical bar from the bottom frame to `y`, centered on `x` in data
    /// coordinates with the given pixel width.
    pub fn bar(&mut self, x: f64, y: f64, px_width: f64, color: &str) {
        let top = self.py(y);
        let bottom = self.height - self.margin;
        let left = self.px(x) - px_width / 2.0;
        let _ = write!(
            self.body,
            r##"<rect x="{left:.2}" y="{top:.2}" width="{px_width:.2}" height="{:.2}" fill="{color}" fill-opacity="0.85"/>"##,
            (bottom - top).max(0.0)
        );
    }

    pub fn label(&mut self, x: f64, y: f64, text: &str, color: &str) {
        let _ = write!(
            self.body,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif" fill="{color}">{}</text>"##,
            self.px(x),
            self.py(y),
            escape(text)
        );
    }

    /// Legend entry at a fixed slot in the top-right corner.
    pub fn legend(&mut self, slot: usize, text: &str, color: &str) {
        let x = self.width - self.margin - 150.0;
        let y = self.margin + 18.0 + 18.0 * slot as f64;
        let _ = write!(
            self.body,
            r##"<rect x="{x}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-size="12" font-family="sans-serif">{}</text>"##,
            y - 10.0,
            x + 18.0,
            y,
            escape(text)
        );
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = format!(
            r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">{}</svg>
"##,
            self.width, self.height, self.width, self.height, self.body
        );
        std::fs::write(path, doc).with_context(|| format!("writing {}", path.display()))
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a >= 1e5 || a < 1e-3) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
