//! SVG utilization timeline: time runs left to right, one row per data tile.
//! Magic-state waits are horizontal lines on the waiting row; cross-segment
//! transfers are sloped lines from the source row to the destination row.

use std::fmt::Write as _;
use std::path::Path;

use crate::schedule::{OpRole, Schedule};

const WIDTH: f64 = 1200.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const ROW_HEIGHT: f64 = 6.0;
const TICKS: usize = 5;

/// Delay classes with a line on the timeline, and their fixed colors.
pub const LEGEND: [(&str, &str, &str); 3] = [
    ("d-anc", "#d62728", "magic-state wait (horizontal)"),
    ("d-tel", "#1f77b4", "teleport / EPR wait (sloped)"),
    ("d-swp", "#9467bd", "cross-segment swap (sloped)"),
];
const GATE_COLOR: &str = "#bbbbbb";

/// One delay line in schedule coordinates (microseconds, rows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayLine {
    pub class: &'static str,
    pub t0: f64,
    pub row0: usize,
    pub t1: f64,
    pub row1: usize,
}

/// The delay lines of a schedule, in op order: a magic-state wait ends when
/// the gate starts; a transfer starts when the gate became ready.
pub fn delay_lines(schedule: &Schedule) -> Vec<DelayLine> {
    let mut out = Vec::new();
    for op in schedule.gate_ops() {
        let d = &op.delays;
        if d.d_anc > 0.0 {
            out.push(DelayLine {
                class: "d-anc",
                t0: op.t_start_actual - d.d_anc,
                row0: op.row,
                t1: op.t_start_actual,
                row1: op.row,
            });
        }
        if let Some(from) = op.from_row {
            for (class, dt) in [("d-tel", d.d_tel), ("d-swp", d.d_swp)] {
                if dt > 0.0 {
                    out.push(DelayLine { class, t0: op.t_start_ready, row0: from, t1: op.t_start_ready + dt, row1: op.row });
                }
            }
        }
    }
    out
}

/// Renders the timeline. The output depends only on the schedule.
pub fn render_timeline(schedule: &Schedule) -> String {
    let n_rows = schedule.n_rows().max(1);
    let t_max = schedule.t_total().max(1.0);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = n_rows as f64 * ROW_HEIGHT;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;
    let x = |t: f64| MARGIN_LEFT + t / t_max * plot_w;
    let y = |row: usize| MARGIN_TOP + (row as f64 + 0.5) * ROW_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.1}" viewBox="0 0 {WIDTH} {height:.1}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // axes
    let (x0, x1, y0, y1) = (MARGIN_LEFT, MARGIN_LEFT + plot_w, MARGIN_TOP, MARGIN_TOP + plot_h);
    let _ = writeln!(s, r#"<g id="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y1:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="ticks" text-anchor="middle">"#);
    for i in 0..=TICKS {
        let t = t_max * i as f64 / TICKS as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{t:.0}</text>"#, x(t), y1 + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">time (us)</text>"#, x0 + plot_w / 2.0, y1 + 32.0);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="segments" text-anchor="end">"#);
    for (seg, &row) in schedule.segment_rows.iter().enumerate().take(schedule.segment_rows.len().saturating_sub(1)) {
        let top = MARGIN_TOP + row as f64 * ROW_HEIGHT;
        let _ = writeln!(s, r##"<line x1="{x0:.2}" y1="{top:.2}" x2="{x1:.2}" y2="{top:.2}" stroke="#eeeeee"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">seg {seg}</text>"#, x0 - 4.0, top + 8.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" transform="rotate(-90 {:.2} {:.2})" text-anchor="middle">data tile</text>"#, 14.0, y0 + plot_h / 2.0, 14.0, y0 + plot_h / 2.0);
    let _ = writeln!(s, "</g>");

    // gate executions
    let _ = writeln!(s, r#"<g id="gates" fill="{GATE_COLOR}">"#);
    for op in schedule.gate_ops() {
        let w = (x(op.t_finish) - x(op.t_start_actual)).max(0.5);
        let top = MARGIN_TOP + op.row as f64 * ROW_HEIGHT + 1.0;
        let _ = writeln!(s, r#"<rect x="{:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}"/>"#, x(op.t_start_actual), ROW_HEIGHT - 2.0);
    }
    let _ = writeln!(s, "</g>");

    // delays
    let _ = writeln!(s, r#"<g id="delays" stroke-width="1.2">"#);
    for l in delay_lines(schedule) {
        let color = LEGEND.iter().find(|(c, _, _)| *c == l.class).map(|e| e.1).unwrap_or("black");
        let _ = writeln!(
            s,
            r#"<line class="{}" stroke="{color}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" data-t0="{}" data-t1="{}" data-row0="{}" data-row1="{}"/>"#,
            l.class,
            x(l.t0),
            y(l.row0),
            x(l.t1),
            y(l.row1),
            l.t0,
            l.t1,
            l.row0,
            l.row1
        );
    }
    let _ = writeln!(s, "</g>");

    // legend
    let lx = WIDTH - MARGIN_RIGHT + 12.0;
    let _ = writeln!(s, r#"<g id="legend">"#);
    for (i, (class, color, label)) in LEGEND.iter().enumerate() {
        let ly = MARGIN_TOP + 14.0 * i as f64;
        let _ = writeln!(s, r#"<line class="legend-{class}" x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 16.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 20.0, ly + 3.0);
    }
    let gy = MARGIN_TOP + 14.0 * LEGEND.len() as f64;
    let _ = writeln!(s, r#"<rect x="{lx:.2}" y="{:.2}" width="16" height="4" fill="{GATE_COLOR}"/>"#, gy - 2.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">gate execution</text>"#, lx + 20.0, gy + 3.0);
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn write_timeline(schedule: &Schedule, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_timeline(schedule))
}

/// Accumulated magic-state wait per row, from the same records as the plot.
pub fn d_anc_by_row(schedule: &Schedule) -> Vec<f64> {
    let mut v = vec![0.0; schedule.n_rows()];
    for op in schedule.gate_ops().filter(|o| o.role == OpRole::Gate) {
        if let Some(x) = v.get_mut(op.row) {
            *x += op.delays.d_anc;
        }
    }
    v
}
