//! Convex polygons in the plane.

pub type Pt = [f64; 2];

/// Keeps the part of `poly` where `n·p ≤ c`.
pub fn clip_half_plane(poly: &[Pt], n: Pt, c: f64) -> Vec<Pt> {
    let side = |p: &Pt| n[0] * p[0] + n[1] * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Keeps the part of `poly` where `lo ≤ n·p ≤ hi`.
pub fn clip_slab(poly: &[Pt], n: Pt, lo: f64, hi: f64) -> Vec<Pt> {
    let p = clip_half_plane(poly, n, hi);
    clip_half_plane(&p, [-n[0], -n[1]], -lo)
}

pub fn area(poly: &[Pt]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s.abs()
}

/// Axis-aligned rectangle as a counter-clockwise polygon.
pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Pt> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

/// Range of the linear functional `n·p` over the polygon.
pub fn extent(poly: &[Pt], n: Pt) -> Option<(f64, f64)> {
    poly.iter()
        .map(|p| n[0] * p[0] + n[1] * p[1])
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((a, b)) => Some((a.min(v), b.max(v))),
        })
}

/// Range of the first coordinate on the horizontal chord `{p : p[1] = y}`.
pub fn chord(poly: &[Pt], y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (y0, y1) = (p[1].min(q[1]), p[1].max(q[1]));
        if y < y0 || y > y1 {
            continue;
        }
        if q[1] == p[1] {
            lo = lo.min(p[0].min(q[0]));
            hi = hi.max(p[0].max(q[0]));
        } else {
            let x = p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (hi >= lo).then_some((lo, hi))
}

/// Maps every vertex through `f`.
pub fn map(poly: &[Pt], f: impl Fn(Pt) -> Pt) -> Vec<Pt> {
    poly.iter().map(|&p| f(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_diagonal() {
        let sq = rect(0.0, 1.0, 0.0, 1.0);
        let half = clip_half_plane(&sq, [1.0, 1.0], 1.0);
        assert!((area(&half) - 0.5).abs() < 1e-15);
        let slab = clip_slab(&sq, [1.0, 0.0], 0.25, 0.5);
        assert!((area(&slab) - 0.25).abs() < 1e-15);
        assert!(clip_half_plane(&sq, [1.0, 0.0], -1.0).is_empty());
        assert_eq!(extent(&sq, [1.0, -1.0]), Some((-1.0, 1.0)));
        let tri = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        assert_eq!(chord(&tri, 1.0), Some((0.0, 1.0)));
        assert_eq!(chord(&tri, 3.0), None);
    }
}
