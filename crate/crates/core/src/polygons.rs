//! Polygons of planar regions, with CSV and SVG export.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::Halfspace;
use crate::regions::RegionSet;

const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polygon {
    /// Index of the region in its set.
    pub region_id: usize,
    pub pattern: String,
    /// Counterclockwise.
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    /// Signed shoelace area; positive for counterclockwise vertices.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        (0..v.len())
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct PolygonExport {
    pub polygons: Vec<Polygon>,
    /// Regions dropped because their vertices do not span an area.
    pub warnings: Vec<String>,
}

fn polygon_of(constraints: &[Halfspace], center: Vector2<f64>) -> Vec<[f64; 2]> {
    let lines: Vec<(Vector2<f64>, f64)> = constraints
        .iter()
        .map(|h| (Vector2::new(h.normal[0], h.normal[1]), h.offset))
        .collect();
    let mut verts: Vec<Vector2<f64>> = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let m = Matrix2::from_rows(&[lines[i].0.transpose(), lines[j].0.transpose()]);
            let Some(inv) = m.try_inverse() else { continue };
            let p = inv * Vector2::new(lines[i].1, lines[j].1);
            let feasible = lines
                .iter()
                .all(|(n, o)| n.dot(&p) <= o + VERTEX_TOL * (1.0 + o.abs()));
            if feasible && !verts.iter().any(|q| (q - p).amax() <= VERTEX_TOL * (1.0 + p.amax())) {
                verts.push(p);
            }
        }
    }
    verts.sort_by(|a, b| {
        let ta = (a.y - center.y).atan2(a.x - center.x);
        let tb = (b.y - center.y).atan2(b.x - center.x);
        ta.total_cmp(&tb)
    });
    verts.into_iter().map(|p| [p.x, p.y]).collect()
}

/// Vertex lists of all regions of a planar network, optionally clipped to the
/// square `[-view, view]^2`. Regions outside the view are skipped.
pub fn region_polygons_2d(rs: &RegionSet, view: Option<f64>) -> Result<PolygonExport> {
    let mut out = PolygonExport::default();
    for (id, region) in rs.regions.iter().enumerate() {
        if region.witness.len() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: region.witness.len(),
            });
        }
        let mut constraints = region.constraints.clone();
        if let Some(v) = view {
            constraints.extend(crate::lp::box_halfspaces(2, v));
        }
        let center = match view {
            None => Vector2::new(region.witness[0], region.witness[1]),
            Some(_) => match crate::lp::chebyshev_center(2, &constraints) {
                Ok(s) if s.slack > 0.0 => Vector2::new(s.center[0], s.center[1]),
                _ => continue,
            },
        };
        let vertices = polygon_of(&constraints, center);
        let polygon = Polygon {
            region_id: id,
            pattern: region.pattern.code(),
            vertices,
        };
        if polygon.vertices.len() < 3 || polygon.area() <= 0.0 {
            out.warnings.push(format!(
                "region {id} ({}) has no area after clipping; skipped",
                polygon.pattern
            ));
            continue;
        }
        out.polygons.push(polygon);
    }
    Ok(out)
}

pub fn polygons_to_csv(polygons: &[Polygon]) -> String {
    let mut s = String::from("region_id,vertex_index,x,y\n");
    for p in polygons {
        for (i, v) in p.vertices.iter().enumerate() {
            writeln!(s, "{},{},{},{}", p.region_id, i, v[0], v[1]).unwrap();
        }
    }
    s
}

/// 64-bit FNV-1a.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn color(pattern: &str) -> String {
    let h = fnv1a(pattern);
    format!(
        "hsl({},{}%,{}%)",
        h % 360,
        55 + (h >> 16) % 30,
        45 + (h >> 32) % 25
    )
}

/// Standalone SVG with one path per region, colored by a hash of its pattern.
pub fn polygons_to_svg(polygons: &[Polygon]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in polygons.iter().flat_map(|p| &p.vertices) {
        for a in 0..2 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    if polygons.is_empty() {
        (lo, hi) = ([0.0; 2], [1.0; 2]);
    }
    let size = 800.0;
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = size / span;
    let px = |v: &[f64; 2]| ((v[0] - lo[0]) * scale, (hi[1] - v[1]) * scale);
    let width = (hi[0] - lo[0]) * scale;
    let height = (hi[1] - lo[1]) * scale;
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.3} {height:.3}\">"
    )
    .unwrap();
    for p in polygons {
        let mut d = String::new();
        for (i, v) in p.vertices.iter().enumerate() {
            let (x, y) = px(v);
            write!(d, "{}{x:.3},{y:.3} ", if i == 0 { "M" } else { "L" }).unwrap();
        }
        d.push('Z');
        writeln!(
            s,
            "  <path d=\"{d}\" fill=\"{}\" stroke=\"#222\" stroke-width=\"0.5\"><title>{} {}</title></path>",
            color(&p.pattern),
            p.region_id,
            p.pattern
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_abs_net;
    use crate::net::{Layer, Network};
    use crate::regions::{enumerate_regions, FeasibilityConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn boxed(b: f64) -> FeasibilityConfig {
        FeasibilityConfig {
            box_halfwidth: b,
            ..Default::default()
        }
    }

    fn shallow(w: &[f64], b: &[f64]) -> Network {
        let rows = b.len();
        Network::new(
            2,
            vec![Layer::rectifier(DMatrix::from_row_slice(rows, 2, w), DVector::from_row_slice(b)).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn abs_net_quadrants_are_unit_squares() {
        let rs = enumerate_regions(&build_abs_net().network, &boxed(1.0)).unwrap();
        let ex = region_polygons_2d(&rs, None).unwrap();
        assert_eq!(ex.polygons.len(), 4);
        for p in &ex.polygons {
            assert_eq!(p.vertices.len(), 4);
            assert_abs_diff_eq!(p.area(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_line_two_rectangles() {
        let rs = enumerate_regions(&shallow(&[1.0, 0.0], &[0.0]), &boxed(1.0)).unwrap();
        let ex = region_polygons_2d(&rs, None).unwrap();
        assert_eq!(ex.polygons.len(), 2);
        assert!(ex.polygons.iter().all(|p| p.vertices.len() == 4));
    }

    #[test]
    fn areas_sum_to_box() {
        let net = shallow(&[1.0, 0.2, -0.3, 1.0, 0.7, 0.6], &[0.1, -0.2, 0.05]);
        let rs = enumerate_regions(&net, &boxed(2.0)).unwrap();
        assert_eq!(rs.len(), 7);
        let ex = region_polygons_2d(&rs, None).unwrap();
        assert_eq!(ex.polygons.len(), 7);
        let total: f64 = ex.polygons.iter().map(Polygon::area).sum();
        assert_abs_diff_eq!(total, 16.0, epsilon = 1e-6);
    }

    #[test]
    fn view_clipping_and_exports() {
        let rs = enumerate_regions(&build_abs_net().network, &FeasibilityConfig::default()).unwrap();
        let ex = region_polygons_2d(&rs, Some(0.5)).unwrap();
        let total: f64 = ex.polygons.iter().map(Polygon::area).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        let csv = polygons_to_csv(&ex.polygons);
        assert!(csv.starts_with("region_id,vertex_index,x,y\n"));
        assert_eq!(csv.lines().count(), 1 + 16);
        let svg = polygons_to_svg(&ex.polygons);
        assert_eq!(svg.matches("<path").count(), 4);
        assert_eq!(svg, polygons_to_svg(&ex.polygons));
    }

    #[test]
    fn rejects_other_dimensions() {
        let net = Network::new(
            1,
            vec![Layer::rectifier(DMatrix::from_element(1, 1, 1.0), DVector::zeros(1)).unwrap()],
        )
        .unwrap();
        let rs = enumerate_regions(&net, &FeasibilityConfig::default()).unwrap();
        assert!(region_polygons_2d(&rs, None).is_err());
    }
}
