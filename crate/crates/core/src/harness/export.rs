//! CSV, JSON and SVG output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::episode::TrajectoryLog;
use super::monte_carlo::{envelope, Envelope, EnvelopeReport};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Column names for a log: `t`, states, inputs, `w_<state>`, barrier values,
/// estimates, bounds and `set_rows`.
pub fn csv_header(log: &TrajectoryLog) -> Vec<String> {
    let names = &log.header.state_names;
    let m = log
        .steps
        .iter()
        .find_map(|s| s.u_safe.as_ref().map(Vec::len))
        .unwrap_or(1);
    let input = |base: &str| -> Vec<String> {
        if m == 1 {
            vec![base.to_string()]
        } else {
            (1..=m).map(|i| format!("{base}_{i}")).collect()
        }
    };
    let mut h = vec!["t".to_string()];
    h.extend(names.iter().cloned());
    h.extend(input("u_nom"));
    h.extend(input("u_safe"));
    h.extend(names.iter().map(|n| format!("w_{n}")));
    h.extend(["B", "margin", "B_rt", "B_bar_rt", "V_t"].map(String::from));
    h.extend((1..=log.header.theta_true.len()).map(|i| format!("theta_hat_{i}")));
    h.extend(["beta1", "beta2", "set_rows"].map(String::from));
    h
}

/// 17 significant digits, so values round-trip.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn opt_vec(v: &Option<Vec<f64>>, len: usize) -> Vec<String> {
    match v {
        Some(v) => v.iter().map(|&x| num(x)).collect(),
        None => vec![String::new(); len],
    }
}

pub fn write_csv(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let header = csv_header(log);
    let n = log.header.state_names.len();
    let m = log
        .steps
        .iter()
        .find_map(|s| s.u_safe.as_ref().map(Vec::len))
        .unwrap_or(1);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for s in &log.steps {
        let mut row = vec![s.t.to_string()];
        row.extend(s.x.iter().map(|&x| num(x)));
        row.extend(opt_vec(&s.u_nom, m));
        row.extend(opt_vec(&s.u_safe, m));
        row.extend(opt_vec(&s.w, n));
        row.extend([num(s.b), opt(s.margin), num(s.b_rt), num(s.b_bar_rt), num(s.v_t)]);
        row.extend(s.theta_hat.iter().map(|&x| num(x)));
        row.extend([num(s.beta1), opt(s.beta2), s.set_rows.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text)?;
    Ok(())
}

/// Write one log in the chosen format. SVG plots the log as a one-seed envelope.
pub fn export(log: &TrajectoryLog, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => write_csv(log, path),
        Format::Json => write_json(log, path),
        Format::Svg => write_svg(&envelope(std::slice::from_ref(log)), path),
    }
}

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 150.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 24.0;
const GAP: f64 = 36.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Panels for each state, `B`, `u` and the parameter estimates.
pub fn svg_panels(report: &EnvelopeReport) -> Vec<(String, Vec<String>)> {
    let mut panels: Vec<(String, Vec<String>)> = Vec::new();
    let thetas: Vec<String> = report.channels.keys().filter(|k| k.starts_with("theta_hat_")).cloned().collect();
    for name in report.channels.keys() {
        if name != "u" && name != "B" && !name.starts_with("theta_hat_") {
            panels.push((name.clone(), vec![name.clone()]));
        }
    }
    panels.push(("B".into(), vec!["B".into()]));
    panels.push(("u".into(), vec!["u".into()]));
    panels.push(("theta_hat (normalized)".into(), thetas));
    panels
}

pub fn render_svg(report: &EnvelopeReport) -> String {
    let panels = svg_panels(report);
    let height = MARGIN_T + panels.len() as f64 * (PANEL_H + GAP);
    let width = MARGIN_L + PANEL_W + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (k, (title, channels)) in panels.iter().enumerate() {
        let top = MARGIN_T + k as f64 * (PANEL_H + GAP);
        let normalize = channels.len() > 1;
        let envs: Vec<&Envelope> = channels.iter().filter_map(|c| report.channels.get(c)).collect();
        let (lo, hi) = if normalize {
            (0.0, 1.0)
        } else {
            range(envs.iter().flat_map(|e| e.min.iter().chain(e.max.iter())))
        };
        let _ = writeln!(s, r#"<g class="panel" id="panel-{k}">"#);
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_L}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>"##
        );
        let _ = writeln!(s, r#"<text x="{MARGIN_L}" y="{}">{}</text>"#, top - 6.0, escape(title));
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, top + 10.0, short(hi));
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, top + PANEL_H, short(lo));
        for (c, env) in envs.iter().enumerate() {
            let color = COLORS[c % COLORS.len()];
            let (elo, ehi) = if normalize {
                range(env.min.iter().chain(env.max.iter()))
            } else {
                (lo, hi)
            };
            let map_y = |v: f64| top + PANEL_H * (1.0 - (v - elo) / (ehi - elo));
            let n = env.mean.len().max(2) - 1;
            let map_x = |t: usize| MARGIN_L + PANEL_W * t as f64 / n as f64;
            let mut band = String::new();
            for (t, v) in env.max.iter().enumerate() {
                let _ = write!(band, "{:.2},{:.2} ", map_x(t), map_y(*v));
            }
            for (t, v) in env.min.iter().enumerate().rev() {
                let _ = write!(band, "{:.2},{:.2} ", map_x(t), map_y(*v));
            }
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
            let line: String = env
                .mean
                .iter()
                .enumerate()
                .map(|(t, v)| format!("{:.2},{:.2}", map_x(t), map_y(*v)))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(s, r#"<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
            if normalize {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" fill="{color}">{} in [{}, {}]</text>"#,
                    MARGIN_L + 8.0,
                    top + 14.0 + 13.0 * c as f64,
                    escape(&channels[c]),
                    short(elo),
                    short(ehi)
                );
            }
        }
        if title == "B" && lo < 0.0 && hi > 0.0 {
            let y = top + PANEL_H * (1.0 - (0.0 - lo) / (hi - lo));
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#000" stroke-dasharray="4 3"/>"##,
                MARGIN_L + PANEL_W
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(report: &EnvelopeReport, path: &Path) -> Result<()> {
    fs::write(path, render_svg(report))?;
    Ok(())
}

fn range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * (1.0 + lo.abs());
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn short(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{x:.2e}")
    } else {
        format!("{x:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_episode, RunConfig};

    #[test]
    fn acc_header_is_exact() {
        let cfg = RunConfig {
            horizon: 2,
            ..RunConfig::default()
        };
        let log = run_episode(&cfg, 0).unwrap();
        assert_eq!(
            csv_header(&log).join(","),
            "t,v,d,u_nom,u_safe,w_v,w_d,B,margin,B_rt,B_bar_rt,V_t,theta_hat_1,theta_hat_2,beta1,beta2,set_rows"
        );
    }

    #[test]
    fn empty_log_is_header_only() {
        let cfg = RunConfig {
            horizon: 2,
            ..RunConfig::default()
        };
        let mut log = run_episode(&cfg, 0).unwrap();
        log.steps.clear();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_csv(&log, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn svg_has_five_panels() {
        let cfg = RunConfig {
            horizon: 200,
            ..RunConfig::default()
        };
        let log = run_episode(&cfg, 0).unwrap();
        let svg = render_svg(&envelope(std::slice::from_ref(&log)));
        assert_eq!(svg.matches(r#"class="panel""#).count(), 5);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
