//! CSV and SVG emission.
//!
//! Every CSV starts with a schema line `# flatcore-<kind> v1`. Floats are
//! written as `{:.10e}`, so a rerun with the same inputs is byte-identical.
//!
//! | kind    | columns                                                   |
//! |---------|-----------------------------------------------------------|
//! | sweep   | `theta,p,q,eps,measure,W,min_interior_gap,classification` |
//! | fit     | `eps,W`, then `# fit slope=… intercept=… r2=… n=…`        |
//! | oned    | `x,u,gap`                                                 |
//! | profile | `rho,E_D,E_A,E_T`                                         |
//! | aux     | `theta,delta,min_w,max_w,E_T,bound,radius,pointwise_radius` |
//!
//! Plots are standalone SVG with log-log axes, one polyline with markers
//! per series and an optional dashed fitted line.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::deadcore::{CoincidenceReport, EnergyProfile, ScalingFit};
use crate::experiments::{AuxRow, SweepRow};

pub const SWEEP_SCHEMA: &str = "# flatcore-sweep v1";
pub const FIT_SCHEMA: &str = "# flatcore-fit v1";
pub const PROFILE_SCHEMA: &str = "# flatcore-profile v1";
pub const AUX_SCHEMA: &str = "# flatcore-aux v1";

pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_SCHEMA}")?;
    writeln!(w, "theta,p,q,eps,measure,W,min_interior_gap,classification")?;
    for r in rows {
        writeln!(
            w,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
            r.theta, r.p, r.q, r.eps, r.measure, r.width, r.min_interior_gap, r.classification
        )?;
    }
    Ok(())
}

pub fn write_fit_csv<W: Write>(w: &mut W, fit: &ScalingFit) -> io::Result<()> {
    writeln!(w, "{FIT_SCHEMA}")?;
    writeln!(w, "eps,W")?;
    for (e, width) in &fit.samples {
        writeln!(w, "{e:.10e},{width:.10e}")?;
    }
    writeln!(w, "# fit slope={:.10e} intercept={:.10e} r2={:.10e} n={}", fit.slope, fit.intercept, fit.r2, fit.samples.len())
}

pub fn write_profile_csv<W: Write>(w: &mut W, p: &EnergyProfile) -> io::Result<()> {
    writeln!(w, "{PROFILE_SCHEMA}")?;
    writeln!(w, "rho,E_D,E_A,E_T")?;
    for k in 0..p.rho.len() {
        writeln!(w, "{:.10e},{:.10e},{:.10e},{:.10e}", p.rho[k], p.e_d[k], p.e_a[k], p.e_t[k])?;
    }
    Ok(())
}

/// Failed runs are written with NaN columns.
pub fn write_aux_csv<W: Write>(w: &mut W, rows: &[AuxRow]) -> io::Result<()> {
    writeln!(w, "{AUX_SCHEMA}")?;
    writeln!(w, "theta,delta,min_w,max_w,E_T,bound,radius,pointwise_radius")?;
    for r in rows {
        writeln!(
            w,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            r.theta, r.delta, r.min_w, r.max_w, r.total_energy, r.energy_bound, r.radius, r.pointwise_radius
        )?;
    }
    Ok(())
}

/// `key value` lines.
pub fn coincidence_to_log(r: &CoincidenceReport) -> String {
    format!(
        "tau_c {:.10e}\nmeasure {:.10e}\nwidth {:.10e}\nmin_interior_gap {:.10e}\ninterior_kappa {:.10e}\nmask_vertices {}\nempty {}\n",
        r.tau_c,
        r.measure,
        r.width,
        r.min_interior_gap,
        r.interior_kappa,
        r.mask.iter().filter(|&&b| b).count(),
        r.is_empty()
    )
}

/// Write through a sibling temporary file and rename, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// `(slope, intercept)` of `ln y = slope ln x + intercept`.
    pub fit: Option<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl LogLogPlot {
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 480.0);
        let (left, right, top, bottom) = (80.0, 20.0, 40.0, 60.0);
        let pts: Vec<(f64, f64)> =
            self.series.iter().flat_map(|s| s.points.iter().copied()).filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#, w / 2.0, esc(&self.title));
        if pts.is_empty() {
            svg.push_str("</svg>\n");
            return svg;
        }
        let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
        let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
        let x0 = lx.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let x1 = lx.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil().max(x0 + 1.0);
        let y0 = ly.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let y1 = ly.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil().max(y0 + 1.0);
        let pw = w - left - right;
        let ph = h - top - bottom;
        let sx = |x: f64| left + (x.log10() - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + (y1 - y.log10()) / (y1 - y0) * ph;

        let _ = writeln!(svg, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##);
        for d in (x0 as i32)..=(x1 as i32) {
            let x = sx(10f64.powi(d));
            let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, top + ph);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">1e{d}</text>"#, top + ph + 18.0);
        }
        for d in (y0 as i32)..=(y1 as i32) {
            let y = sy(10f64.powi(d));
            let _ = writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, left + pw);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">1e{d}</text>"#, left - 6.0, y + 4.0);
        }
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#, left + pw / 2.0, h - 16.0, esc(&self.x_label));
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})">{}</text>"#,
            top + ph / 2.0,
            top + ph / 2.0,
            esc(&self.y_label)
        );
        if let Some((slope, icpt)) = self.fit {
            let (a, b) = (10f64.powf(x0), 10f64.powf(x1));
            let fy = |x: f64| (slope * x.ln() + icpt).exp();
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="6 4" clip-path="url(#plot)"/>"##,
                sx(a),
                sy(fy(a)),
                sx(b),
                sy(fy(b))
            );
        }
        let _ = writeln!(svg, r#"<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>"#);
        for (k, s) in self.series.iter().enumerate() {
            let c = COLORS[k % COLORS.len()];
            let coords: Vec<String> = s
                .points
                .iter()
                .filter(|&&(x, y)| x > 0.0 && y > 0.0)
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, coords.join(" "));
            for p in &coords {
                let (x, y) = p.split_once(',').unwrap();
                let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{c}"/>"#);
            }
            let ly = top + 16.0 + 16.0 * k as f64;
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="12" fill="{c}">{}</text>"#, left + 10.0, esc(&s.label));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Classification;

    fn row(eps: f64) -> SweepRow {
        SweepRow {
            theta: 0.5,
            p: 2.0,
            q: 2.0,
            eps,
            measure: 0.25,
            width: 0.1,
            min_interior_gap: 0.0,
            tau_c: 1e-6,
            classification: Classification::Nonempty,
            residual: 1e-9,
            iterations: 3,
            error: None,
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[row(1e-3)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], SWEEP_SCHEMA);
        assert_eq!(lines[1], "theta,p,q,eps,measure,W,min_interior_gap,classification");
        assert_eq!(lines[2], "5.0000000000e-1,2.0000000000e0,2.0000000000e0,1.0000000000e-3,2.5000000000e-1,1.0000000000e-1,0.0000000000e0,nonempty");
    }

    #[test]
    fn svg_is_well_formed() {
        let plot = LogLogPlot {
            title: "W vs eps".into(),
            x_label: "eps".into(),
            y_label: "W".into(),
            series: vec![Series { label: "p=2".into(), points: vec![(1e-4, 0.04), (1e-3, 0.12), (1e-2, 0.38)] }],
            fit: Some((0.5, 1.2f64.ln())),
        };
        let svg = plot.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
