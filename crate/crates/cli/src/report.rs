//! Report rendering: a plain-text summary plus standalone SVG charts
//! (compute frontiers per board with the fitted curve dotted over them,
//! and train/test trade-off iso-lines). Output is deterministic: fixed
//! decimal formatting, artifacts visited in sorted order.

use std::fmt::Write as _;

use hexlab_core::scaling::model_elo;
use hexlab_core::store::RunStore;

use crate::artifacts::{
    EloArtifact, FitArtifact, FrontierArtifact, PredictArtifact, TradeoffArtifact, ELO_SCHEMA,
    FIT_SCHEMA, FRONTIER_SCHEMA, PREDICT_SCHEMA, TRADEOFF_SCHEMA,
};
use crate::{CliError, CODE_VERSION};

const PALETTE: [&str; 7] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Frame {
        // Pad degenerate ranges so mapping stays finite.
        let (xmin, xmax) = pad_range(xmin, xmax);
        let (ymin, ymax) = pad_range(ymin, ymax);
        Frame {
            width: 640.0,
            height: 440.0,
            left: 70.0,
            right: 20.0,
            top: 34.0,
            bottom: 48.0,
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        let span = self.width - self.left - self.right;
        self.left + (x - self.xmin) / (self.xmax - self.xmin) * span
    }

    fn sy(&self, y: f64) -> f64 {
        let span = self.height - self.top - self.bottom;
        self.top + (self.ymax - y) / (self.ymax - self.ymin) * span
    }
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-9 {
        let pad = (hi - lo) * 0.06;
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Tick positions at a 1/2/5 decade step giving 4..=9 ticks.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 8.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v.fract().abs() < 1e-9 && v.abs() >= 1.0) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

struct Svg {
    body: String,
    frame: Frame,
}

impl Svg {
    fn new(frame: Frame, title: &str, xlabel: &str, ylabel: &str) -> Svg {
        let mut body = String::new();
        let _ = write!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">
<rect width="{w:.0}" height="{h:.0}" fill="white"/>
<text x="{tx:.1}" y="20" text-anchor="middle" font-size="14">{title}</text>
"#,
            w = frame.width,
            h = frame.height,
            tx = frame.width / 2.0,
            title = escape(title),
        );
        let mut svg = Svg { body, frame };
        svg.axes(xlabel, ylabel);
        svg
    }

    fn axes(&mut self, xlabel: &str, ylabel: &str) {
        let f = &self.frame;
        let (x0, x1) = (f.left, f.width - f.right);
        let (y0, y1) = (f.top, f.height - f.bottom);
        let _ = write!(
            self.body,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" \
fill=\"none\" stroke=\"#444\"/>\n",
            w = x1 - x0,
            h = y1 - y0,
        );
        for t in ticks(f.xmin, f.xmax) {
            let x = f.sx(t);
            let _ = write!(
                self.body,
                "<line x1=\"{x:.1}\" y1=\"{y1:.1}\" x2=\"{x:.1}\" y2=\"{y2:.1}\" stroke=\"#444\"/>\n\
<text x=\"{x:.1}\" y=\"{ty:.1}\" text-anchor=\"middle\">{label}</text>\n",
                y1 = y1,
                y2 = y1 + 5.0,
                ty = y1 + 18.0,
                label = fmt_tick(t),
            );
        }
        for t in ticks(f.ymin, f.ymax) {
            let y = f.sy(t);
            let _ = write!(
                self.body,
                "<line x1=\"{x2:.1}\" y1=\"{y:.1}\" x2=\"{x0:.1}\" y2=\"{y:.1}\" stroke=\"#444\"/>\n\
<text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\">{label}</text>\n",
                x2 = x0 - 5.0,
                ty = y + 4.0,
                tx = x0 - 8.0,
                label = fmt_tick(t),
            );
        }
        let _ = write!(
            self.body,
            "<text x=\"{cx:.1}\" y=\"{by:.1}\" text-anchor=\"middle\">{xl}</text>\n\
<text x=\"16\" y=\"{cy:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {cy:.1})\">{yl}</text>\n",
            cx = (x0 + x1) / 2.0,
            by = f.height - 12.0,
            cy = (y0 + y1) / 2.0,
            xl = escape(xlabel),
            yl = escape(ylabel),
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", self.frame.sx(x), self.frame.sy(y)))
            .collect();
        let dash = if dashed { " stroke-dasharray=\"5 4\"" } else { "" };
        let _ = write!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            coords.join(" "),
        );
    }

    fn dots(&mut self, pts: &[(f64, f64)], color: &str) {
        for &(x, y) in pts {
            let _ = write!(
                self.body,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{color}\"/>\n",
                self.frame.sx(x),
                self.frame.sy(y),
            );
        }
    }

    fn legend(&mut self, items: &[(String, &str)]) {
        for (k, (label, color)) in items.iter().enumerate() {
            let y = self.frame.top + 14.0 + 16.0 * k as f64;
            let x = self.frame.left + 12.0;
            let _ = write!(
                self.body,
                "<rect x=\"{x:.1}\" y=\"{ry:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
<text x=\"{tx:.1}\" y=\"{ty:.1}\">{label}</text>\n",
                ry = y - 9.0,
                tx = x + 15.0,
                ty = y,
                label = escape(label),
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn try_read<T: serde::de::DeserializeOwned>(
    store: &RunStore,
    name: &str,
    schema: &str,
) -> Option<T> {
    let bytes = store.read_analysis(name).ok()?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).ok()?;
    if value.get("schema").and_then(|s| s.as_str()) != Some(schema) {
        return None;
    }
    serde_json::from_value(value).ok()
}

/// The changepoint fit used for chart overlays: the one fitted on the
/// most boards, ties broken by file name.
fn overlay_fit(store: &RunStore, names: &[String]) -> Option<FitArtifact> {
    let mut best: Option<FitArtifact> = None;
    for name in names {
        if !name.starts_with("fit-changepoint-") {
            continue;
        }
        let Some(fit) = try_read::<FitArtifact>(store, name, FIT_SCHEMA) else { continue };
        if fit.changepoint.is_none() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => fit.boards.len() >= b.boards.len(),
        };
        if better {
            best = Some(fit);
        }
    }
    best
}

fn frontier_chart(frontier: &FrontierArtifact, fit: Option<&FitArtifact>) -> String {
    let pts: Vec<(f64, f64)> = frontier
        .points
        .iter()
        .map(|p| (p.log10_train_flops, p.elo))
        .collect();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, 0.0f64);
    for &(x, y) in &pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let mut svg = Svg::new(
        Frame::new(xmin, xmax, ymin, ymax),
        &format!("Compute frontier, board {}", frontier.board_size),
        "log10 train flops",
        "Elo vs perfect play",
    );
    svg.polyline(&pts, PALETTE[0], false);
    svg.dots(&pts, PALETTE[0]);
    let mut legend = vec![("frontier".to_string(), PALETTE[0])];
    if let Some(fit) = fit.and_then(|f| f.changepoint.as_ref()) {
        let curve: Vec<(f64, f64)> = (0..=120)
            .map(|k| {
                let x = xmin + (xmax - xmin) * k as f64 / 120.0;
                (x, model_elo(&fit.params, frontier.board_size, x))
            })
            .collect();
        svg.polyline(&curve, PALETTE[1], true);
        legend.push(("fitted curve".to_string(), PALETTE[1]));
    }
    svg.legend(&legend);
    svg.finish()
}

fn all_boards_chart(frontiers: &[FrontierArtifact], fit: Option<&FitArtifact>) -> String {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, 0.0f64);
    for f in frontiers {
        for p in &f.points {
            xmin = xmin.min(p.log10_train_flops);
            xmax = xmax.max(p.log10_train_flops);
            ymin = ymin.min(p.elo);
            ymax = ymax.max(p.elo);
        }
    }
    let mut svg = Svg::new(
        Frame::new(xmin, xmax, ymin, ymax),
        "Compute frontiers by board size",
        "log10 train flops",
        "Elo vs perfect play",
    );
    let mut legend = Vec::new();
    for (k, f) in frontiers.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> =
            f.points.iter().map(|p| (p.log10_train_flops, p.elo)).collect();
        svg.polyline(&pts, color, false);
        svg.dots(&pts, color);
        if let Some(fit) = fit.and_then(|x| x.changepoint.as_ref()) {
            let curve: Vec<(f64, f64)> = (0..=120)
                .map(|i| {
                    let x = xmin + (xmax - xmin) * i as f64 / 120.0;
                    (x, model_elo(&fit.params, f.board_size, x))
                })
                .collect();
            svg.polyline(&curve, color, true);
        }
        legend.push((format!("board {}", f.board_size), color));
    }
    svg.legend(&legend);
    svg.finish()
}

fn tradeoff_chart(t: &TradeoffArtifact) -> String {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &t.points {
        xmin = xmin.min(p.log10_train_flops);
        xmax = xmax.max(p.log10_train_flops);
        ymin = ymin.min(p.log10_test_flops);
        ymax = ymax.max(p.log10_test_flops);
    }
    let mut svg = Svg::new(
        Frame::new(xmin, xmax, ymin, ymax),
        &format!("Train/test compute trade-off, board {}", t.board_size),
        "log10 train flops",
        "log10 test flops",
    );
    let mut legend = Vec::new();
    for (k, line) in t.iso_lines.iter().enumerate() {
        if line.frontier.len() < 2 {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        svg.polyline(&line.frontier, color, false);
        svg.dots(&line.frontier, color);
        if legend.len() < 4 {
            legend.push((format!("iso {:.0} Elo", line.elo), color));
        }
    }
    if let Some(slope) = t.slope {
        legend.push((format!("median slope {slope:.2}"), "#444"));
    }
    svg.legend(&legend);
    svg.finish()
}

fn push_table(out: &mut String, title: &str, rows: &[(String, String)]) {
    let _ = writeln!(out, "## {title}");
    let key_w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        let _ = writeln!(out, "  {k:<key_w$}  {v}");
    }
    let _ = writeln!(out);
}

pub fn render(store: &RunStore) -> Result<Vec<String>, CliError> {
    let names = store.list_analysis()?;
    if names.is_empty() {
        return Err(CliError::Missing(
            "no analysis artifacts to report; run elo/frontier/fit first".into(),
        ));
    }
    let fit = overlay_fit(store, &names);
    let mut written = Vec::new();
    let mut text = format!("# hexlab report (code {CODE_VERSION})\n\n");
    let mut frontiers: Vec<FrontierArtifact> = Vec::new();

    for name in &names {
        if let Some(elo) = try_read::<EloArtifact>(store, name, ELO_SCHEMA) {
            let mut rated: Vec<_> =
                elo.entries.iter().filter_map(|e| e.rating.map(|r| (e.id.clone(), r))).collect();
            rated.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut rows = vec![
                ("anchor".to_string(), elo.anchor.clone()),
                ("games".to_string(), elo.games.to_string()),
                ("agents".to_string(), elo.entries.len().to_string()),
            ];
            for (id, r) in rated.iter().take(8) {
                rows.push((id.clone(), format!("{r:+.1}")));
            }
            push_table(&mut text, &format!("Ratings {} ({name})", elo.context), &rows);
        } else if let Some(f) = try_read::<FrontierArtifact>(store, name, FRONTIER_SCHEMA) {
            let span = match (f.points.first(), f.points.last()) {
                (Some(a), Some(b)) => b.elo - a.elo,
                _ => 0.0,
            };
            push_table(
                &mut text,
                &format!("Frontier board {} ({name})", f.board_size),
                &[
                    ("points".to_string(), f.points.len().to_string()),
                    ("elo span".to_string(), format!("{span:.1}")),
                ],
            );
            frontiers.push(f);
        } else if let Some(fa) = try_read::<FitArtifact>(store, name, FIT_SCHEMA) {
            let mut rows = vec![(
                "boards".to_string(),
                fa.boards.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
            )];
            if let Some(cp) = &fa.changepoint {
                rows.push(("mse".to_string(), format!("{:.2}", cp.mse)));
                rows.push(("m_plateau_boardsize".to_string(), format!("{:.2}", cp.params.m_plateau_boardsize)));
                rows.push(("c_plateau".to_string(), format!("{:.2}", cp.params.c_plateau)));
                rows.push(("m_incline_flops".to_string(), format!("{:.2}", cp.params.m_incline_flops)));
                rows.push(("m_incline_boardsize".to_string(), format!("{:.2}", cp.params.m_incline_boardsize)));
                rows.push(("c_incline".to_string(), format!("{:.2}", cp.params.c_incline)));
            }
            if let Some(d) = &fa.derived {
                rows.push(("elo per oom".to_string(), format!("{:.1}", d.elo_per_oom)));
                rows.push((
                    "perfect-play multiplier".to_string(),
                    format!("{:.2}", d.perfect_play_compute_multiplier),
                ));
                rows.push((
                    "takeoff multiplier".to_string(),
                    format!("{:.2}", d.takeoff_compute_multiplier),
                ));
                rows.push((
                    "random-perfect gap per board".to_string(),
                    format!("{:.1}", d.random_perfect_gap_per_board),
                ));
            }
            if let Some(s) = &fa.sigmoid {
                rows.push(("mse".to_string(), format!("{:.2}", s.mse)));
            }
            if let Some(l) = &fa.linear {
                rows.push(("mse".to_string(), format!("{:.2}", l.mse)));
            }
            push_table(&mut text, &format!("Fit {} ({name})", fa.model), &rows);
        } else if let Some(p) = try_read::<PredictArtifact>(store, name, PREDICT_SCHEMA) {
            push_table(
                &mut text,
                &format!("Prediction board {} ({name})", p.eval_board),
                &[
                    (
                        "fit boards".to_string(),
                        p.fit_boards.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
                    ),
                    ("residual variance".to_string(), format!("{:.2}", p.error.residual_variance)),
                    ("r squared".to_string(), format!("{:.4}", p.error.r_squared)),
                    ("eval points".to_string(), p.error.n_eval_points.to_string()),
                ],
            );
        } else if let Some(t) = try_read::<TradeoffArtifact>(store, name, TRADEOFF_SCHEMA) {
            push_table(
                &mut text,
                &format!("Trade-off board {} ({name})", t.board_size),
                &[
                    ("points".to_string(), t.points.len().to_string()),
                    (
                        "median slope".to_string(),
                        t.slope.map(|s| format!("{s:.3}")).unwrap_or_else(|| "undefined".into()),
                    ),
                ],
            );
            let chart = format!("report-tradeoff-b{}.svg", t.board_size);
            store.write_analysis(&chart, tradeoff_chart(&t).as_bytes())?;
            written.push(chart);
        }
    }

    for f in &frontiers {
        let chart = format!("report-frontier-b{}.svg", f.board_size);
        store.write_analysis(&chart, frontier_chart(f, fit.as_ref()).as_bytes())?;
        written.push(chart);
    }
    if frontiers.len() > 1 {
        let chart = "report-frontiers-all.svg".to_string();
        store.write_analysis(&chart, all_boards_chart(&frontiers, fit.as_ref()).as_bytes())?;
        written.push(chart);
    }
    store.write_analysis("report.txt", text.as_bytes())?;
    written.push("report.txt".to_string());
    written.sort();
    Ok(written)
}
