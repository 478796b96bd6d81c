//! 2D cell pictures: shaded cells, rectangle and disk outlines, and phi arrows.

use std::fmt::Write as _;

use cellflow::{CellId, CellSet, OrderedCover, Region};

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

fn color(z: usize) -> String {
    // Golden-angle hue steps keep neighbouring ids apart.
    format!("hsl({:.1},60%,80%)", (z as f64 * 137.508) % 360.0)
}

struct Frame {
    lo: [f64; 2],
    span: [f64; 2],
}

impl Frame {
    fn px(&self, p: &[f64]) -> (f64, f64) {
        let u = (p[0] - self.lo[0]) / self.span[0];
        let v = (p[1] - self.lo[1]) / self.span[1];
        (
            MARGIN + u * (SIZE - 2.0 * MARGIN),
            SIZE - MARGIN - v * (SIZE - 2.0 * MARGIN),
        )
    }

    fn scale(&self, axis: usize) -> f64 {
        (SIZE - 2.0 * MARGIN) / self.span[axis]
    }
}

/// Renders `cover` (2D only) with one `<g class="cell">` per cell and an
/// arrow from each cell's centroid to every other cell of `phi[z]`.
///
/// `centroids[z]` is `None` for cells without samples; `resolution` raster
/// squares per axis shade cells that are not rectangles.
pub fn render_svg(
    cover: &OrderedCover,
    phi: &[CellSet],
    centroids: &[Option<Vec<f64>>],
    t: f64,
    resolution: usize,
) -> String {
    let b = cover.space().bounds();
    let f = Frame {
        lo: [b[0].0, b[1].0],
        span: [b[0].1 - b[0].0, b[1].1 - b[1].0],
    };
    let mut raster: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cover.len()];
    let needs_raster = cover.regions().iter().any(|r| !matches!(r, Region::HyperRect(_)));
    if needs_raster && resolution > 0 {
        for i in 0..resolution {
            for j in 0..resolution {
                let p = [
                    f.lo[0] + (i as f64 + 0.5) * f.span[0] / resolution as f64,
                    f.lo[1] + (j as f64 + 0.5) * f.span[1] / resolution as f64,
                ];
                if let Ok(z) = cover.abstract_point(&p) {
                    raster[z.0].push((p[0], p[1]));
                }
            }
        }
    }
    let (dx, dy) = (
        f.span[0] / resolution.max(1) as f64,
        f.span[1] / resolution.max(1) as f64,
    );

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    s.push_str(
        r#"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="black"/></marker></defs>"#,
    );
    s.push('\n');
    let _ = writeln!(s, r#"<title>cells and phi at t = {t}</title>"#);
    for z in cover.cells() {
        let fill = color(z.0);
        let _ = writeln!(s, r#"<g class="cell" id="cell-{}">"#, z.0);
        for &(x, y) in &raster[z.0] {
            let (px, py) = f.px(&[x - dx / 2.0, y + dy / 2.0]);
            let _ = writeln!(
                s,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="none"/>"#,
                dx * f.scale(0),
                dy * f.scale(1)
            );
        }
        match cover.region(z) {
            Region::HyperRect(r) => {
                let (x0, y0) = f.px(&[r[0].0, r[1].1]);
                let fill = if needs_raster { "none".to_string() } else { fill.clone() };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.6" stroke="black"/>"#,
                    (r[0].1 - r[0].0) * f.scale(0),
                    (r[1].1 - r[1].0) * f.scale(1)
                );
            }
            Region::MetricBall { center, radius, metric } if metric.form().is_none() => {
                let (cx, cy) = f.px(center);
                let _ = writeln!(
                    s,
                    r#"<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" fill="none" stroke="black" stroke-width="0.5"/>"#,
                    radius * f.scale(0),
                    radius * f.scale(1)
                );
            }
            _ => {}
        }
        if let Some(c) = &centroids[z.0] {
            let (cx, cy) = f.px(c);
            let _ = writeln!(s, r#"<text x="{cx:.2}" y="{cy:.2}" font-size="10">{}</text>"#, z.0);
        }
        s.push_str("</g>\n");
    }
    for z in cover.cells() {
        let Some(from) = &centroids[z.0] else { continue };
        for w in phi[z.0].iter().filter(|&&w| w != z) {
            let Some(to) = &centroids[w.0] else { continue };
            let (x1, y1) = f.px(from);
            let (x2, y2) = f.px(to);
            let _ = writeln!(
                s,
                r#"<line class="phi" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="black" stroke-width="0.7" marker-end="url(#arrow)"/>"#
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Mean of the samples of each cell.
pub fn centroids(cover: &OrderedCover, samples: usize, seed: u64) -> Vec<Option<Vec<f64>>> {
    cover
        .cells()
        .map(|z: CellId| {
            let pts = cover
                .sample_cell(z, samples, cellflow::rng::derive_seed(seed, z.0 as u64))
                .ok()?;
            let n = pts.len() as f64;
            let dim = cover.space().dim();
            Some((0..dim).map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / n).collect())
        })
        .collect()
}
