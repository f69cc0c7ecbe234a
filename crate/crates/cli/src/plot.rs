//! Self-contained SVG line plots and heatmaps.

use std::fmt::Write;

const WIDTH: f64 = 680.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        esc(title)
    );
}

/// Short tick label.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.0e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 * hi.abs().max(1.0) {
            let pad = if log { 0.5 } else { 0.5 * hi.abs().max(1.0) };
            lo -= pad;
            hi += pad;
        } else if !log {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Some(Self { lo, hi, log })
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let step = ((b - a) / 6 + 1).max(1);
            let mut t: Vec<f64> = (a..=b).step_by(step as usize).map(|e| 10f64.powi(e)).collect();
            if t.is_empty() {
                t.push(10f64.powf(0.5 * (self.lo + self.hi)));
            }
            t
        } else {
            let span = self.hi - self.lo;
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last).map(|k| k as f64 * step).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error bar per point.
    pub err: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl LinePlot {
    fn usable(&self, x: f64, y: f64) -> bool {
        x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0)
    }

    /// `None` when no series has a plottable point.
    pub fn render(&self) -> Option<String> {
        let pts = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter().copied())
                .filter(|&(x, y)| self.usable(x, y))
        };
        let xa = Axis::fit(pts().map(|p| p.0), self.log_x)?;
        let mut ys: Vec<f64> = pts().map(|p| p.1).collect();
        for s in &self.series {
            if let Some(err) = &s.err {
                for (&(x, y), &e) in s.points.iter().zip(err) {
                    if self.usable(x, y) && e.is_finite() {
                        ys.push(y + e);
                        if !self.log_y || y - e > 0.0 {
                            ys.push(y - e);
                        }
                    }
                }
            }
        }
        let ya = Axis::fit(ys.into_iter(), self.log_y)?;
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let px = |x: f64| LEFT + xa.frac(x) * pw;
        let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

        let mut out = String::new();
        header(&mut out, WIDTH, HEIGHT, &self.title);
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        for t in xa.ticks() {
            let x = px(t);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 16.0,
                esc(&tick_label(t))
            );
        }
        for t in ya.ticks() {
            let y = py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                esc(&tick_label(t))
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 18.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let good: Vec<(usize, (f64, f64))> = s
                .points
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, (x, y))| self.usable(x, y))
                .collect();
            if good.len() > 1 {
                let coords: Vec<String> = good.iter().map(|&(_, (x, y))| format!("{:.2},{:.2}", px(x), py(y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                    coords.join(" ")
                );
            }
            // Markers only for short series.
            if good.len() <= 40 {
                for &(_, (x, y)) in &good {
                    let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
                }
            }
            if let Some(err) = &s.err {
                for &(k, (x, y)) in &good {
                    let e = err.get(k).copied().unwrap_or(0.0);
                    if !(e > 0.0) {
                        continue;
                    }
                    let lo = if self.log_y && y - e <= 0.0 { 10f64.powf(ya.lo) } else { y - e };
                    let (x0, y0, y1) = (px(x), py(lo), py(y + e));
                    let _ = writeln!(
                        out,
                        r#"<path d="M{x0:.2},{y0:.2}V{y1:.2}M{:.2},{y0:.2}h8M{:.2},{y1:.2}h8" stroke="{color}" fill="none"/>"#,
                        x0 - 4.0,
                        x0 - 4.0
                    );
                }
            }
            let ly = TOP + 10.0 + 20.0 * i as f64;
            let lx = WIDTH - RIGHT + 16.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                esc(&s.name)
            );
        }
        out.push_str("</svg>\n");
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Text shown instead of a value, e.g. `div`.
    Label(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_ticks: Vec<String>,
    pub y_ticks: Vec<String>,
    /// `cells[row][col]`, row 0 drawn at the top.
    pub cells: Vec<Vec<Cell>>,
}

/// Piecewise linear blue-green-yellow ramp on `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.33, [49.0, 104.0, 142.0]),
        (0.66, [53.0, 183.0, 121.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let k = STOPS.iter().position(|s| s.0 >= t).unwrap_or(3).max(1);
    let ((t0, c0), (t1, c1)) = (STOPS[k - 1], STOPS[k]);
    let u = (t - t0) / (t1 - t0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + u * (c1[i] - c0[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

impl Heatmap {
    /// `None` for an empty grid. Colors follow `log10` of the finite
    /// positive values.
    pub fn render(&self) -> Option<String> {
        let rows = self.cells.len();
        let cols = self.cells.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return None;
        }
        let vals: Vec<f64> = self
            .cells
            .iter()
            .flatten()
            .filter_map(|c| match c {
                Cell::Value(v) if v.is_finite() && *v > 0.0 => Some(v.log10()),
                _ => None,
            })
            .collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell = 56.0;
        let (left, top) = (100.0, 50.0);
        let w = left + cell * cols as f64 + 40.0;
        let h = top + cell * rows as f64 + 70.0;
        let mut out = String::new();
        header(&mut out, w, h, &self.title);
        for (r, row) in self.cells.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let (x, y) = (left + cell * c as f64, top + cell * r as f64);
                let (fill, text) = match v {
                    Cell::Value(v) if v.is_finite() && *v > 0.0 => {
                        let t = if hi > lo { (v.log10() - lo) / (hi - lo) } else { 0.5 };
                        (ramp(t), format!("{v:.2e}"))
                    }
                    Cell::Value(v) => ("#bbbbbb".to_string(), format!("{v}")),
                    Cell::Label(s) => ("#bbbbbb".to_string(), s.clone()),
                };
                let _ = writeln!(
                    out,
                    r##"<rect x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10" fill="#000">{}</text>"##,
                    x + cell / 2.0,
                    y + cell / 2.0 + 3.0,
                    esc(&text)
                );
            }
        }
        for (c, t) in self.x_ticks.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
                left + cell * (c as f64 + 0.5),
                top + cell * rows as f64 + 14.0,
                esc(t)
            );
        }
        for (r, t) in self.y_ticks.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
                left - 6.0,
                top + cell * (r as f64 + 0.5) + 3.0,
                esc(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + cell * cols as f64 / 2.0,
            h - 20.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            top + cell * rows as f64 / 2.0,
            top + cell * rows as f64 / 2.0,
            esc(&self.y_label)
        );
        out.push_str("</svg>\n");
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(series: Vec<Series>) -> LinePlot {
        LinePlot {
            title: "t <&>".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: true,
            series,
        }
    }

    #[test]
    fn empty_plot_renders_nothing() {
        assert!(plot(vec![]).render().is_none());
        let only_bad = Series {
            name: "a".into(),
            points: vec![(1.0, -1.0), (f64::NAN, 2.0)],
            err: None,
        };
        assert!(plot(vec![only_bad]).render().is_none());
    }

    #[test]
    fn line_plot_escapes_and_draws() {
        let s = Series {
            name: "vpal".into(),
            points: vec![(1.0, 1.0), (2.0, 0.1), (3.0, 0.01)],
            err: Some(vec![0.5, 0.01, 0.02]),
        };
        let svg = plot(vec![s]).render().unwrap();
        assert!(svg.contains("t &lt;&amp;&gt;"));
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<path").count(), 3);
    }

    #[test]
    fn ticks_cover_range() {
        let a = Axis { lo: -0.3, hi: 9.7, log: false };
        let t = a.ticks();
        assert_eq!(t, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let l = Axis { lo: -5.2, hi: 2.1, log: true };
        assert_eq!(l.ticks().len(), 4);
    }

    #[test]
    fn heatmap_cells() {
        let h = Heatmap {
            title: "grid".into(),
            x_label: "lambda".into(),
            y_label: "mu".into(),
            x_ticks: vec!["a".into(), "b".into()],
            y_ticks: vec!["c".into()],
            cells: vec![vec![Cell::Value(0.5), Cell::Label("div".into())]],
        };
        let svg = h.render().unwrap();
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains(">div<"));
        assert!(Heatmap { cells: vec![], ..h }.render().is_none());
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
    }
}
