use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed coordinate loop. The closing vertex is implicit (the last point
/// connects back to the first). Orientation encodes the role: counterclockwise
/// rings are outer boundaries, clockwise rings are holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub pts: Vec<[f64; 2]>,
}

impl Ring {
    pub fn new(mut pts: Vec<[f64; 2]>) -> Result<Self> {
        // drop an explicit closing vertex
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(Error::Geometry(format!(
                "degenerate ring with {} vertices",
                pts.len()
            )));
        }
        Ok(Ring { pts })
    }

    /// Signed shoelace area: positive for counterclockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.pts.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.pts[i];
            let b = self.pts[(i + 1) % n];
            s += a[0] * b[1] - a[1] * b[0];
        }
        0.5 * s
    }

    pub fn is_hole(&self) -> bool {
        self.signed_area() < 0.0
    }

    pub fn reverse(&mut self) {
        self.pts.reverse();
    }

    /// Even-odd containment for a single ring; boundary points count as inside.
    pub fn contains(&self, pt: [f64; 2]) -> bool {
        if self.on_boundary(pt) {
            return true;
        }
        let n = self.pts.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let pi = self.pts[i];
            let pj = self.pts[j];
            if (pi[1] > pt[1]) != (pj[1] > pt[1]) {
                let xint = (pj[0] - pi[0]) * (pt[1] - pi[1]) / (pj[1] - pi[1]) + pi[0];
                if pt[0] < xint {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn on_boundary(&self, pt: [f64; 2]) -> bool {
        let n = self.pts.len();
        for i in 0..n {
            let a = self.pts[i];
            let b = self.pts[(i + 1) % n];
            let cross = (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0]);
            if cross.abs() < 1e-12 * ((b[0] - a[0]).abs() + (b[1] - a[1]).abs()).max(1.0) {
                let dot = (pt[0] - a[0]) * (b[0] - a[0]) + (pt[1] - a[1]) * (b[1] - a[1]);
                let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                if dot >= 0.0 && dot <= len2 {
                    return true;
                }
            }
        }
        false
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.pts.len();
        for i in 0..n {
            let a1 = self.pts[i];
            let a2 = self.pts[(i + 1) % n];
            for j in (i + 1)..n {
                // skip adjacent edges (shared vertex)
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let b1 = self.pts[j];
                let b2 = self.pts[(j + 1) % n];
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = d(q1, q2, p1);
    let d2 = d(q1, q2, p2);
    let d3 = d(p1, p2, q1);
    let d4 = d(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// A set of rings forming a (possibly multi-part) polygon with holes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolygonSet {
    pub rings: Vec<Ring>,
}

impl PolygonSet {
    /// Construct from rings whose orientation already encodes hole status.
    pub fn new(rings: Vec<Ring>) -> Result<Self> {
        let p = PolygonSet { rings };
        for ring in &p.rings {
            if ring.pts.len() < 3 {
                return Err(Error::Geometry("degenerate ring".into()));
            }
        }
        Ok(p)
    }

    /// Construct from GeoJSON-style polygon parts: per part, the first ring is
    /// the outer boundary and the remaining rings are holes. Orientation is
    /// normalized (outer counterclockwise, holes clockwise) and holes are
    /// checked to lie within their outer ring.
    pub fn from_parts(parts: Vec<Vec<Vec<[f64; 2]>>>) -> Result<Self> {
        let mut rings = Vec::new();
        for part in parts {
            let mut iter = part.into_iter();
            let outer_pts = iter
                .next()
                .ok_or_else(|| Error::Geometry("polygon part without rings".into()))?;
            let mut outer = Ring::new(outer_pts)?;
            if !outer.is_simple() {
                return Err(Error::Geometry("self-intersecting outer ring".into()));
            }
            if outer.is_hole() {
                outer.reverse();
            }
            let outer_idx = rings.len();
            rings.push(outer);
            for hole_pts in iter {
                let mut hole = Ring::new(hole_pts)?;
                if !hole.is_simple() {
                    return Err(Error::Geometry("self-intersecting hole ring".into()));
                }
                if !hole.is_hole() {
                    hole.reverse();
                }
                if !rings[outer_idx].contains(hole.pts[0]) {
                    return Err(Error::Geometry(
                        "hole lies outside its outer ring".into(),
                    ));
                }
                rings.push(hole);
            }
        }
        Ok(PolygonSet { rings })
    }

    /// Convenience constructor for a single simple ring.
    pub fn from_ring(pts: Vec<[f64; 2]>) -> Result<Self> {
        let mut ring = Ring::new(pts)?;
        if ring.is_hole() {
            ring.reverse();
        }
        Ok(PolygonSet { rings: vec![ring] })
    }

    pub fn rectangle(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        PolygonSet {
            rings: vec![Ring {
                pts: vec![[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]],
            }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    pub fn bbox(&self) -> Option<[f64; 4]> {
        let mut it = self.rings.iter().flat_map(|r| r.pts.iter());
        let first = it.next()?;
        let mut b = [first[0], first[1], first[0], first[1]];
        for p in self.rings.iter().flat_map(|r| r.pts.iter()) {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        Some(b)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> PolygonSet {
        PolygonSet {
            rings: self
                .rings
                .iter()
                .map(|r| Ring {
                    pts: r.pts.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
                })
                .collect(),
        }
    }

    /// Maximum distance from the origin to any vertex.
    pub fn max_radius(&self) -> f64 {
        self.max_distance_from([0.0, 0.0])
    }

    /// Maximum distance from `p` to any vertex (an upper bound on the
    /// distance to any point of the polygon).
    pub fn max_distance_from(&self, p: [f64; 2]) -> f64 {
        self.rings
            .iter()
            .flat_map(|r| r.pts.iter())
            .map(|v| ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Even-odd containment across all rings; holes are excluded by parity.
    pub fn contains(&self, pt: [f64; 2]) -> bool {
        let mut crossings = 0usize;
        for ring in &self.rings {
            if ring.on_boundary(pt) {
                return true;
            }
            let n = ring.pts.len();
            let mut j = n - 1;
            for i in 0..n {
                let pi = ring.pts[i];
                let pj = ring.pts[j];
                if (pi[1] > pt[1]) != (pj[1] > pt[1]) {
                    let xint = (pj[0] - pi[0]) * (pt[1] - pi[1]) / (pj[1] - pi[1]) + pi[0];
                    if pt[0] < xint {
                        crossings += 1;
                    }
                }
                j = i;
            }
        }
        crossings % 2 == 1
    }

    /// Fan triangulation of all rings by ear clipping; holes come out with
    /// negative-area triangles so that signed sums remain correct.
    pub fn triangulate(&self) -> Result<Vec<([f64; 2], [f64; 2], [f64; 2])>> {
        let mut tris = Vec::new();
        for ring in &self.rings {
            let hole = ring.is_hole();
            let mut pts = ring.pts.clone();
            if hole {
                pts.reverse();
            }
            let mut ring_tris = ear_clip(&pts)?;
            if hole {
                for t in &mut ring_tris {
                    std::mem::swap(&mut t.1, &mut t.2);
                }
            }
            tris.extend(ring_tris);
        }
        Ok(tris)
    }
}

/// Ear-clipping triangulation of a simple counterclockwise ring.
fn ear_clip(pts: &[[f64; 2]]) -> Result<Vec<([f64; 2], [f64; 2], [f64; 2])>> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::new();
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let in_tri = |a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]| {
        let d1 = cross(a, b, p);
        let d2 = cross(b, c, p);
        let d3 = cross(c, a, p);
        d1 > 0.0 && d2 > 0.0 && d3 > 0.0
    };
    let mut guard = 0usize;
    while idx.len() > 3 {
        guard += 1;
        if guard > 4 * pts.len() * pts.len() {
            return Err(Error::Geometry("ear clipping failed to converge".into()));
        }
        let n = idx.len();
        let mut clipped = false;
        for k in 0..n {
            let ia = idx[(k + n - 1) % n];
            let ib = idx[k];
            let ic = idx[(k + 1) % n];
            let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
            if cross(a, b, c) <= 0.0 {
                continue; // reflex or collinear corner
            }
            let mut ear = true;
            for &other in &idx {
                if other == ia || other == ib || other == ic {
                    continue;
                }
                if in_tri(a, b, c, pts[other]) {
                    ear = false;
                    break;
                }
            }
            if ear {
                tris.push((a, b, c));
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // only collinear corners left; drop one and continue
            let n = idx.len();
            let mut dropped = false;
            for k in 0..n {
                let ia = idx[(k + n - 1) % n];
                let ib = idx[k];
                let ic = idx[(k + 1) % n];
                if cross(pts[ia], pts[ib], pts[ic]).abs() < 1e-300 {
                    idx.remove(k);
                    dropped = true;
                    break;
                }
            }
            if !dropped {
                return Err(Error::Geometry("no ear found (non-simple ring?)".into()));
            }
        }
    }
    if idx.len() == 3 {
        tris.push((pts[idx[0]], pts[idx[1]], pts[idx[2]]));
    }
    Ok(tris)
}

/// Total polygon area: outer rings minus holes.
pub fn polygon_area(p: &PolygonSet) -> Result<f64> {
    let mut total = 0.0;
    for ring in &p.rings {
        if ring.pts.len() < 3 {
            return Err(Error::Geometry("degenerate ring".into()));
        }
        total += ring.signed_area();
    }
    Ok(total.max(0.0))
}

/// Even-odd point-in-polygon test; boundary points classify as inside.
pub fn point_in_polygon(p: &PolygonSet, pt: [f64; 2]) -> bool {
    p.contains(pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> PolygonSet {
        PolygonSet::rectangle(0.0, 0.0, 1.0, 1.0)
    }

    fn square_with_hole() -> PolygonSet {
        // unit square with centered 0.5 x 0.5 hole
        let outer = Ring::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let mut hole =
            Ring::new(vec![[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]]).unwrap();
        if !hole.is_hole() {
            hole.reverse();
        }
        PolygonSet::new(vec![outer, hole]).unwrap()
    }

    #[test]
    fn area_unit_square() {
        assert_relative_eq!(polygon_area(&unit_square()).unwrap(), 1.0);
    }

    #[test]
    fn area_with_hole() {
        assert_relative_eq!(polygon_area(&square_with_hole()).unwrap(), 0.75);
    }

    #[test]
    fn degenerate_ring_rejected() {
        assert!(Ring::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn point_in_polygon_center_and_hole() {
        assert!(point_in_polygon(&unit_square(), [0.5, 0.5]));
        let p = square_with_hole();
        assert!(!point_in_polygon(&p, [0.5, 0.5])); // inside the hole
        assert!(point_in_polygon(&p, [0.1, 0.1]));
        // boundary counts as inside
        assert!(point_in_polygon(&p, [0.0, 0.5]));
        assert!(point_in_polygon(&p, [0.25, 0.5])); // hole boundary
    }

    #[test]
    fn triangulation_preserves_area() {
        let p = square_with_hole();
        let tris = p.triangulate().unwrap();
        let area: f64 = tris
            .iter()
            .map(|(a, b, c)| {
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            })
            .sum();
        assert_relative_eq!(area, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn triangulation_concave() {
        // L-shaped polygon, area 3
        let p = PolygonSet::from_ring(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ])
        .unwrap();
        let tris = p.triangulate().unwrap();
        let area: f64 = tris
            .iter()
            .map(|(a, b, c)| {
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            })
            .sum();
        assert_relative_eq!(area, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn hole_outside_outer_rejected() {
        let parts = vec![vec![
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[2.0, 2.0], [3.0, 2.0], [3.0, 3.0], [2.0, 3.0]],
        ]];
        assert!(PolygonSet::from_parts(parts).is_err());
    }
}
