//! Static SVG plots built from trial logs.

use std::fmt::Write as _;

use czest::simharness::{Algorithm, MonteCarloSummary, TrialLog};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

fn color(alg: Algorithm) -> &'static str {
    match alg {
        Algorithm::Centralized => "#1f77b4",
        Algorithm::Oit => "#d62728",
        Algorithm::Distributed => "#2ca02c",
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new() -> Self {
        Self {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, x: f64, y: f64) {
        if x.is_finite() && y.is_finite() {
            self.x0 = self.x0.min(x);
            self.x1 = self.x1.max(x);
            self.y0 = self.y0.min(y);
            self.y1 = self.y1.max(y);
        }
    }

    fn finish(mut self) -> Self {
        if !self.x0.is_finite() {
            return Self { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        if self.x1 - self.x0 < 1e-9 {
            self.x0 -= 0.5;
            self.x1 += 0.5;
        }
        if self.y1 - self.y0 < 1e-9 {
            self.y0 -= 0.5;
            self.y1 += 0.5;
        }
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(s: &mut String, title: &str, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" text-anchor="start">{:.3}</text>"#, HEIGHT - MARGIN + 14.0, f.x0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, WIDTH - MARGIN, HEIGHT - MARGIN + 14.0, f.x1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN, f.y0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, MARGIN + 10.0, f.y1);
}

fn legend(s: &mut String, algs: &[Algorithm]) {
    for (n, alg) in algs.iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * n as f64;
        let x = WIDTH - MARGIN - 110.0;
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>"#, y - 4.0, x + 20.0, y - 4.0, color(*alg));
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 26.0, alg.name());
    }
}

/// Plot coordinates of an agent's state: position on both axes for planar
/// models (`[px, vx, py, vy]`), or time against the state when scalar.
fn plane_coords(dim: usize) -> Option<(usize, usize)> {
    match dim {
        0 | 1 => None,
        d => Some((0, d / 2)),
    }
}

/// Truth of one agent as dots with each algorithm's estimate boxes.
pub fn trajectory(log: &TrialLog, agent: usize) -> String {
    let algs: Vec<Algorithm> = log
        .steps
        .first()
        .map(|s| s.estimates.iter().map(|e| e.algorithm).collect())
        .unwrap_or_default();
    let dim = log
        .steps
        .first()
        .and_then(|s| s.estimates.first())
        .and_then(|e| e.agents.get(agent))
        .map_or(0, |a| a.lo.len());
    let plane = plane_coords(dim);

    // (x_lo, x_hi, y_lo, y_hi) per step, algorithm; truth point per step.
    let mut boxes = Vec::new();
    let mut truth = Vec::new();
    let mut frame = Frame::new();
    for step in &log.steps {
        if step.estimates.first().and_then(|e| e.agents.get(agent)).is_none() {
            continue;
        }
        let offset: usize = step.estimates[0].agents[..agent].iter().map(|a| a.lo.len()).sum();
        let t = match plane {
            Some((a, b)) => (step.truth[offset + a], step.truth[offset + b]),
            None => (step.k as f64, step.truth[offset]),
        };
        frame.include(t.0, t.1);
        truth.push(t);
        for est in &step.estimates {
            let e = &est.agents[agent];
            let r = match plane {
                Some((a, b)) => (e.lo[a], e.hi[a], e.lo[b], e.hi[b]),
                None => (step.k as f64 - 0.3, step.k as f64 + 0.3, e.lo[0], e.hi[0]),
            };
            frame.include(r.0, r.2);
            frame.include(r.1, r.3);
            boxes.push((est.algorithm, r));
        }
    }
    let f = frame.finish();
    let mut s = String::new();
    let (xl, yl) = if plane.is_some() { ("x position", "y position") } else { ("k", "state") };
    header(&mut s, &format!("trial {} agent {}", log.trial, agent + 1), &f, xl, yl);
    for (alg, (x0, x1, y0, y1)) in &boxes {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{}" stroke-width="1"/>"#,
            f.px(*x0),
            f.py(*y1),
            f.px(*x1) - f.px(*x0),
            f.py(*y0) - f.py(*y1),
            color(*alg)
        );
    }
    for (x, y) in &truth {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="black"/>"#, f.px(*x), f.py(*y));
    }
    legend(&mut s, &algs);
    s.push_str("</svg>\n");
    s
}

/// Mean and maximum generator norm per step and algorithm for one agent
/// (1-based), over all trials.
pub fn gnorm_curves(summary: &MonteCarloSummary, agent: usize) -> String {
    let algs: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| summary.stats.iter().any(|s| s.algorithm == *a))
        .collect();
    let mut frame = Frame::new();
    for st in summary.stats.iter().filter(|s| s.agent == agent) {
        frame.include(st.k as f64, st.gnorm_max);
        frame.include(st.k as f64, 0.0);
    }
    let f = frame.finish();
    let mut s = String::new();
    header(&mut s, &format!("agent {agent}: generator norm (d = 2 x norm)"), &f, "k", "norm");
    for alg in &algs {
        for (field, dash) in [(0, ""), (1, r#" stroke-dasharray="4 3""#)] {
            let pts: Vec<String> = summary
                .stats
                .iter()
                .filter(|st| st.agent == agent && st.algorithm == *alg)
                .map(|st| {
                    let v = if field == 0 { st.gnorm_mean } else { st.gnorm_max };
                    format!("{:.2},{:.2}", f.px(st.k as f64), f.py(v))
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                pts.join(" "),
                color(*alg)
            );
        }
    }
    legend(&mut s, &algs);
    s.push_str("</svg>\n");
    s
}
