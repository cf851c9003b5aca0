//! Minimal SVG renderings: residuals against thresholds, the causal graph of
//! variable suspicions and the false-alarm bar chart.

use std::fmt::Write;

use hydrodiag_core::residuals::signature;
use hydrodiag_core::{Channel, FalseAlarmReport, PipelineOutput, VariableStateMap, RESIDUAL_COUNT};

const MAX_POINTS: usize = 1000;

fn header(w: u32, h: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, stroke: &str, dash: bool) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.1},{y:.1} ");
    }
    let dash = if dash { " stroke-dasharray=\"4 3\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1\"{dash}/>",
        d.trim_end()
    );
}

/// One panel per residual: the residual and its symmetric threshold envelope.
pub fn residuals_svg(outputs: &[PipelineOutput]) -> String {
    let (w, panel, left, top) = (900.0, 140.0, 60.0, 30.0);
    let plot_w = w - left - 20.0;
    let h = top + panel * RESIDUAL_COUNT as f64 + 30.0;
    let mut s = header(w as u32, h as u32);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"18\" font-size=\"14\">Residuals and adaptive thresholds</text>");
    if outputs.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let stride = outputs.len().div_ceil(MAX_POINTS).max(1);
    let picked: Vec<&PipelineOutput> = outputs.iter().step_by(stride).collect();
    let (t0, t1) = (outputs[0].t, outputs[outputs.len() - 1].t.max(outputs[0].t + 1e-9));
    let x = |t: f64| left + (t - t0) / (t1 - t0) * plot_w;
    for i in 0..RESIDUAL_COUNT {
        let y0 = top + panel * i as f64;
        let ph = panel - 25.0;
        let span = picked
            .iter()
            .filter(|o| !o.warming_up)
            .map(|o| o.residuals.to_array()[i].abs().max(o.thresholds[i]))
            .fold(0.0_f64, f64::max)
            .max(1e-12)
            * 1.1;
        let y = |v: f64| y0 + ph / 2.0 - (v / span).clamp(-1.0, 1.0) * ph / 2.0;
        let _ = writeln!(
            s,
            "<rect x=\"{left}\" y=\"{y0}\" width=\"{plot_w}\" height=\"{ph}\" fill=\"none\" stroke=\"#999\"/>"
        );
        let _ = writeln!(s, "<text x=\"8\" y=\"{:.1}\">r{}</text>", y0 + ph / 2.0 + 4.0, i + 1);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">{span:.3e}</text>", left - 55.0, y0 + 10.0);
        let live: Vec<&&PipelineOutput> = picked.iter().filter(|o| !o.warming_up).collect();
        polyline(&mut s, live.iter().map(|o| (x(o.t), y(o.thresholds[i]))), "#c00", true);
        polyline(&mut s, live.iter().map(|o| (x(o.t), y(-o.thresholds[i]))), "#c00", true);
        polyline(&mut s, picked.iter().map(|o| (x(o.t), y(o.residuals.to_array()[i]))), "#036", false);
    }
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"{:.1}\">t = {t0:.1} s</text><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">t = {t1:.1} s</text>",
        h - 10.0,
        left + plot_w,
        h - 10.0
    );
    s.push_str("</svg>\n");
    s
}

fn node_position(c: Channel) -> (f64, f64) {
    let x = match c {
        Channel::Msf1 => 70.0,
        Channel::De1 => 190.0,
        Channel::Df1 => 310.0,
        Channel::De2 => 430.0,
        Channel::Df2 => 550.0,
        Channel::De3 => 670.0,
        Channel::Msf2 => 790.0,
    };
    (x, 70.0)
}

/// Variables colored by suspicion, linked to the residuals they enter.
pub fn causal_graph_svg(vars: &VariableStateMap, t: f64) -> String {
    let sig = signature();
    let mut s = header(860, 300);
    let _ = writeln!(s, "<text x=\"20\" y=\"20\" font-size=\"14\">Variable suspicion at t = {t:.2} s</text>");
    let residual_pos = |i: usize| (150.0 + 140.0 * i as f64, 240.0);
    for i in 0..RESIDUAL_COUNT {
        let (rx, ry) = residual_pos(i);
        for c in sig.row(i) {
            let (vx, vy) = node_position(c);
            let _ = writeln!(
                s,
                "<line x1=\"{vx}\" y1=\"{}\" x2=\"{rx}\" y2=\"{}\" stroke=\"#888\"/>",
                vy + 24.0,
                ry - 16.0
            );
        }
    }
    for v in &vars.variables {
        let (x, y) = node_position(v.variable);
        let [r, g, b] = v.rgb;
        let _ = writeln!(
            s,
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"24\" fill=\"rgb({r},{g},{b})\" stroke=\"black\"/>\n<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{:.2}</text>",
            y + 4.0,
            v.variable,
            y - 30.0,
            v.suspicion
        );
    }
    for i in 0..RESIDUAL_COUNT {
        let (x, y) = residual_pos(i);
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"40\" height=\"32\" fill=\"#eee\" stroke=\"black\"/>\n<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">r{}</text>",
            x - 20.0,
            y - 16.0,
            y + 4.0,
            i + 1
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Percentage of runs with a false alarm, per detection mode.
pub fn false_alarms_svg(report: &FalseAlarmReport) -> String {
    let (w, h, base, top) = (420.0, 320.0, 260.0, 50.0);
    let mut s = header(w as u32, h as u32);
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"22\" font-size=\"14\">False alarms over {} runs (reduction {})</text>",
        report.n_runs, report.reduction
    );
    let _ = writeln!(s, "<line x1=\"60\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>", w - 30.0);
    let _ = writeln!(s, "<line x1=\"60\" y1=\"{top}\" x2=\"60\" y2=\"{base}\" stroke=\"black\"/>");
    for pct in [0, 25, 50, 75, 100] {
        let y = base - (base - top) * pct as f64 / 100.0;
        let _ = writeln!(s, "<text x=\"52\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\">{pct}%</text>", y + 4.0);
    }
    let bars = [
        ("threshold only", report.p_threshold_only, "#c33"),
        ("hybrid", report.p_hybrid, "#36c"),
    ];
    for (i, (label, pct, fill)) in bars.iter().enumerate() {
        let x = 110.0 + 150.0 * i as f64;
        let bh = (base - top) * pct.clamp(0.0, 100.0) / 100.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{:.1}\" width=\"80\" height=\"{bh:.1}\" fill=\"{fill}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{pct:.1}%</text>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>",
            base - bh,
            x + 40.0,
            base - bh - 6.0,
            x + 40.0,
            base + 18.0
        );
    }
    s.push_str("</svg>\n");
    s
}
