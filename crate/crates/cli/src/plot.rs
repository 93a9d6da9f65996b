//! SVG figures rendered from the CSV artifacts. Failures are reported as
//! warnings by the callers; the CSVs remain the ground truth.

use std::path::Path;

use plotters::prelude::*;

use crate::error::Result;
use crate::io::{read_cumulative_cost, read_trajectory, write_atomic};

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

const PALETTE: [RGBColor; 7] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
];

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    (x0, x1, y0 - pad, y1 + pad)
}

/// Renders `series` as an SVG document.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> std::result::Result<String, String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let (x0, x1, y0, y1) = bounds(series);
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| e.to_string())?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc(y_label)
            .draw()
            .map_err(|e| e.to_string())?;
        for (i, s) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let style = ShapeStyle::from(&color).stroke_width(if s.dashed { 1 } else { 2 });
            let drawn = if s.dashed {
                chart.draw_series(DashedLineSeries::new(s.points.iter().copied(), 6, 4, style))
            } else {
                chart.draw_series(LineSeries::new(s.points.iter().copied(), style))
            };
            drawn
                .map_err(|e| e.to_string())?
                .label(s.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(|e| e.to_string())?;
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(svg)
}

/// States (solid) and references (dashed) over the first `steps` samples.
pub fn trajectory_figure(csv: &Path, steps: usize, title: &str) -> Result<std::result::Result<String, String>> {
    let traj = read_trajectory(csv)?;
    let n = traj.states[0].len();
    let upto = (steps + 1).min(traj.states.len());
    let mut series = Vec::new();
    for i in 0..n {
        series.push(Series {
            label: format!("x{}", i + 1),
            points: (0..upto).map(|k| (k as f64, traj.states[k][i])).collect(),
            dashed: false,
        });
    }
    for i in 0..n {
        series.push(Series {
            label: format!("r{}", i + 1),
            points: (0..upto).map(|k| (k as f64, traj.references[k][i])).collect(),
            dashed: true,
        });
    }
    Ok(line_chart(title, "time step", "temperature (°C)", &series))
}

/// Cumulative costs of one or more cost CSVs on shared axes.
pub fn cost_figure(csvs: &[(&str, &Path)], title: &str) -> Result<std::result::Result<String, String>> {
    let mut series = Vec::new();
    for (label, path) in csvs {
        let points = read_cumulative_cost(path)?
            .into_iter()
            .map(|(t, c)| (t as f64, c))
            .collect();
        series.push(Series {
            label: label.to_string(),
            points,
            dashed: false,
        });
    }
    Ok(line_chart(title, "time step", "cumulative cost", &series))
}

/// Writes a rendered figure, or logs why it could not be produced.
pub fn emit(path: &Path, figure: Result<std::result::Result<String, String>>) {
    match figure {
        Ok(Ok(svg)) => {
            if let Err(e) = write_atomic(path, svg.as_bytes()) {
                log::warn!("plot {} not written: {e}", path.display());
            }
        }
        Ok(Err(e)) => log::warn!("plot {} not rendered: {e}", path.display()),
        Err(e) => log::warn!("plot {} skipped: {e}", path.display()),
    }
}
