use std::fmt::Write as _;
use std::io::Write;

use crate::energy::SingularPart;
use crate::error::{Error, Result};
use crate::geometry::ScalarField;

use super::SolveReport;

/// CSV with columns `x, y, d, v, w, u`, one row per unknown.
pub fn write_fields_csv<W: Write>(report: &SolveReport, sp: &SingularPart, out: W) -> Result<()> {
    report.w.check_same(&sp.v)?;
    let grid = report.w.grid();
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["x", "y", "d", "v", "w", "u"])?;
    for k in 0..grid.len() {
        let p = grid.position(k);
        csv.write_record(
            [
                p[0],
                p[1],
                sp.d.values()[k],
                sp.v.values()[k],
                report.w.values()[k],
                report.u.values()[k],
            ]
            .iter()
            .map(|x| x.to_string()),
        )?;
    }
    csv.flush()?;
    Ok(())
}

fn color(t: f64) -> (u8, u8, u8) {
    // blue -> white -> red
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (1.0, s, s)
    };
    ((r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Heat map of a nodal field, averaged over blocks so that at most `max_cells`
/// cells are drawn per axis. Colors span the range of the block averages.
pub fn heatmap_svg(field: &ScalarField, width_px: f64, max_cells: usize) -> Result<String> {
    if max_cells == 0 || !(width_px > 0.0) {
        return Err(Error::InvalidParams("heat map needs a positive size".into()));
    }
    let grid = field.grid();
    let (nx, ny) = grid.shape();
    let block = nx.max(ny).div_ceil(max_cells).max(1);
    let (bx, by) = (nx.div_ceil(block), ny.div_ceil(block));
    let mut sum = vec![0.0; bx * by];
    let mut count = vec![0usize; bx * by];
    for (k, &v) in field.values().iter().enumerate() {
        let (i, j) = grid.grid_coords(k);
        let b = (j / block) * bx + i / block;
        sum[b] += v;
        count[b] += 1;
    }
    let means: Vec<Option<f64>> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let (lo, hi) = means
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = width_px / bx.max(by) as f64;
    let (w, h) = (cell * bx as f64, cell * by as f64);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.3} {h:.3}">"#
    );
    let _ = writeln!(svg, "<!-- min {lo:e} max {hi:e} -->");
    for (b, mean) in means.iter().enumerate() {
        let Some(v) = mean else { continue };
        let (i, j) = (b % bx, b / bx);
        let (r, g, bl) = color((v - lo) / span);
        let _ = writeln!(
            svg,
            r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}" fill="rgb({r},{g},{bl})"/>"#,
            i as f64 * cell,
            h - (j + 1) as f64 * cell
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
