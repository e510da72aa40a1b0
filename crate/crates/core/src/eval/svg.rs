use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;

fn frame(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n{body}</svg>\n",
        W / 2.0,
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Q-Q scatter on log-log axes with the diagonal for reference.
pub fn qq_svg(points: &[(f64, f64)], title: &str) -> String {
    let logs: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.log10(), p.1.log10())).collect();
    let (lo, hi) = logs
        .iter()
        .flat_map(|p| [p.0, p.1])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let sx = |v: f64| PAD + (v - lo) / (hi - lo) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);
    let mut body = format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n",
        sx(lo),
        sy(lo),
        sx(hi),
        sy(hi)
    );
    for &(x, y) in &logs {
        let _ = writeln!(body, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>", sx(x), sy(y));
    }
    let _ = writeln!(
        body,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">log10 reference quantile (h) {lo:.2} to {hi:.2}</text>",
        PAD,
        H - 10.0
    );
    frame(title, &body)
}

/// Side-by-side bars of two proportion vectors.
pub fn histogram_svg(reference: &[f64], generated: &[f64], title: &str) -> String {
    let n = reference.len().max(generated.len()).max(1);
    let top = reference.iter().chain(generated).copied().fold(0.0, f64::max).max(1e-12);
    let slot = (W - 2.0 * PAD) / n as f64;
    let mut body = String::new();
    for (k, (series, color)) in [(reference, "gray"), (generated, "steelblue")].into_iter().enumerate() {
        for (i, &p) in series.iter().enumerate() {
            let h = p / top * (H - 2.0 * PAD);
            let _ = writeln!(
                body,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{color}\"/>",
                PAD + i as f64 * slot + k as f64 * slot / 2.0,
                H - PAD - h,
                slot / 2.0
            );
        }
    }
    frame(title, &body)
}
