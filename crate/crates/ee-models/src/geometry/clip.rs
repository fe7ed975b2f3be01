//! Clipping of general (possibly concave, holed) polygons against the convex
//! polygonal approximation of a disc. This is the only clip pattern the
//! likelihood machinery requires.

use crate::error::{Error, Result};

use super::polygon::{PolygonSet, Ring};

/// Inscribed regular `n`-gon of the disc around `center`, counterclockwise.
pub fn disc_polygon(center: [f64; 2], radius: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            [
                center[0] + radius * theta.cos(),
                center[1] + radius * theta.sin(),
            ]
        })
        .collect()
}

/// Clip one ring against the left half-plane of edge a -> b
/// (Sutherland-Hodgman step). Points on the edge are kept.
fn clip_ring_halfplane(pts: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let n = pts.len();
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(n + 4);
    for i in 0..n {
        let s = pts[i];
        let e = pts[(i + 1) % n];
        let sc = side(s);
        let ec = side(e);
        let s_in = sc >= 0.0;
        let e_in = ec >= 0.0;
        let push_intersection = |out: &mut Vec<[f64; 2]>| {
            let denom = sc - ec;
            if denom.abs() > 1e-300 {
                let t = sc / denom;
                out.push([s[0] + (e[0] - s[0]) * t, s[1] + (e[1] - s[1]) * t]);
            }
        };
        match (s_in, e_in) {
            (true, true) => out.push(e),
            (true, false) => push_intersection(&mut out),
            (false, true) => {
                push_intersection(&mut out);
                out.push(e);
            }
            (false, false) => {}
        }
    }
    // remove consecutive duplicates
    out.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-300 && (a[1] - b[1]).abs() < 1e-300);
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Clip a ring against a convex counterclockwise polygon.
fn clip_ring_convex(pts: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut cur = pts.to_vec();
    let m = clip.len();
    for i in 0..m {
        if cur.len() < 3 {
            return Vec::new();
        }
        cur = clip_ring_halfplane(&cur, clip[i], clip[(i + 1) % m]);
    }
    if cur.len() < 3 {
        Vec::new()
    } else {
        cur
    }
}

/// Does any vertex of `disc` lie (numerically) on an edge of `p`?
fn disc_vertex_on_edge(p: &PolygonSet, disc: &[[f64; 2]]) -> bool {
    for v in disc {
        for ring in &p.rings {
            let n = ring.pts.len();
            for i in 0..n {
                let a = ring.pts[i];
                let b = ring.pts[(i + 1) % n];
                let cross = (b[0] - a[0]) * (v[1] - a[1]) - (b[1] - a[1]) * (v[0] - a[0]);
                let scale = ((b[0] - a[0]).abs() + (b[1] - a[1]).abs()).max(1.0);
                if cross.abs() < 1e-12 * scale {
                    let dot = (v[0] - a[0]) * (b[0] - a[0]) + (v[1] - a[1]) * (b[1] - a[1]);
                    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                    if dot >= 0.0 && dot <= len2 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Intersection of `p` with the inscribed regular `n_vertices`-gon of the
/// disc around `center`. Returns an empty set when the disc misses `p`.
///
/// Degenerate overlaps (a disc vertex collinear with a polygon edge) are
/// resolved by shifting the disc center by 1e-9 before clipping.
pub fn intersect_poly_disc(
    p: &PolygonSet,
    center: [f64; 2],
    radius: f64,
    n_vertices: usize,
) -> Result<PolygonSet> {
    if radius <= 0.0 {
        return Err(Error::Geometry("disc radius must be positive".into()));
    }
    if n_vertices < 8 {
        return Err(Error::Geometry(
            "disc approximation needs at least 8 vertices".into(),
        ));
    }
    let mut disc = disc_polygon(center, radius, n_vertices);
    if disc_vertex_on_edge(p, &disc) {
        disc = disc_polygon([center[0] + 1e-9, center[1] + 1e-9], radius, n_vertices);
    }
    let mut rings = Vec::new();
    for ring in &p.rings {
        let clipped = clip_ring_convex(&ring.pts, &disc);
        if clipped.len() >= 3 {
            let r = Ring { pts: clipped };
            if r.signed_area().abs() > 1e-300 {
                rings.push(r);
            }
        }
    }
    Ok(PolygonSet { rings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::polygon::polygon_area;
    use approx::assert_relative_eq;

    /// Area of the inscribed regular n-gon of a disc.
    fn ngon_area(r: f64, n: usize) -> f64 {
        let nf = n as f64;
        0.5 * nf * r * r * (2.0 * std::f64::consts::PI / nf).sin()
    }

    #[test]
    fn disc_inside_large_square() {
        let p = PolygonSet::rectangle(-10.0, -10.0, 10.0, 10.0);
        let clipped = intersect_poly_disc(&p, [0.0, 0.0], 1.0, 16).unwrap();
        assert_relative_eq!(
            polygon_area(&clipped).unwrap(),
            ngon_area(1.0, 16),
            epsilon = 1e-12
        );
    }

    #[test]
    fn disc_on_halfplane_edge() {
        // rectangle acting as a half plane: disc centered on its left edge,
        // far from the corners -> half the inscribed polygon area
        let p = PolygonSet::rectangle(0.0, -100.0, 200.0, 100.0);
        let clipped = intersect_poly_disc(&p, [0.0, 0.0], 1.0, 16).unwrap();
        // two disc vertices fall exactly on the clip edge, so the 1e-9
        // center shift applies; tolerance reflects that perturbation
        assert_relative_eq!(
            polygon_area(&clipped).unwrap(),
            0.5 * ngon_area(1.0, 16),
            epsilon = 1e-7
        );
    }

    #[test]
    fn disc_outside_returns_empty() {
        let p = PolygonSet::rectangle(0.0, 0.0, 1.0, 1.0);
        let clipped = intersect_poly_disc(&p, [50.0, 50.0], 1.0, 16).unwrap();
        assert!(clipped.is_empty());
        assert_eq!(polygon_area(&clipped).unwrap(), 0.0);
    }

    #[test]
    fn clip_respects_holes() {
        // square with a hole, disc covering everything: area preserved
        let outer = Ring::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let mut hole =
            Ring::new(vec![[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]]).unwrap();
        hole.reverse();
        let p = PolygonSet::new(vec![outer, hole]).unwrap();
        let clipped = intersect_poly_disc(&p, [0.5, 0.5], 10.0, 64).unwrap();
        assert_relative_eq!(polygon_area(&clipped).unwrap(), 0.75, epsilon = 1e-9);
    }

    #[test]
    fn monotone_in_radius_and_converges() {
        let p = PolygonSet::rectangle(-1.0, -1.0, 1.0, 1.0);
        let mut prev = 0.0;
        for r in [0.3, 0.6, 0.9, 1.2, 2.0] {
            let a = polygon_area(&intersect_poly_disc(&p, [0.0, 0.0], r, 64).unwrap()).unwrap();
            assert!(a >= prev);
            prev = a;
        }
        // n -> infinity converges to the true disc intersection
        let truth = std::f64::consts::PI * 0.8f64 * 0.8; // disc strictly inside
        let mut errs = Vec::new();
        for n in [16, 64, 256] {
            let a = polygon_area(&intersect_poly_disc(&p, [0.0, 0.0], 0.8, n).unwrap()).unwrap();
            errs.push((truth - a).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-3);
    }
}
