//! Small planar geometry kit: vectors, rotations and closed-polygon predicates.

use nalgebra::{Matrix2, Vector2};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

#[inline]
pub fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

/// z-component of the 3d cross product.
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counterclockwise quarter turn, (x, y) -> (-y, x).
#[inline]
pub fn perp(a: Vec2) -> Vec2 {
    v(-a.y, a.x)
}

pub fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, -s, s, c)
}

pub fn unit(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    v(c, s)
}

/// Polar angle of a vector.
pub fn angle_of_vec(a: Vec2) -> f64 {
    a.y.atan2(a.x)
}

/// Angle of a rotation-like matrix.
pub fn angle_of(r: &Mat2) -> f64 {
    r[(1, 0)].atan2(r[(0, 0)])
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let mut x = a % t;
    if x <= -std::f64::consts::PI {
        x += t;
    } else if x > std::f64::consts::PI {
        x -= t;
    }
    x
}

fn seg_point_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / l2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(poly: &[Vec2], p: Vec2) -> f64 {
    let n = poly.len();
    (0..n).map(|i| seg_point_dist(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

/// Winding-number test for the open interior.
fn winding_inside(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    let mut wn = 0i32;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.y <= p.y {
            if b.y > p.y && cross(b - a, p - a) > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && cross(b - a, p - a) < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

/// Closed containment: interior points plus points within `tol` of the boundary.
pub fn contains_closed(poly: &[Vec2], p: Vec2, tol: f64) -> bool {
    boundary_distance(poly, p) <= tol || winding_inside(poly, p)
}

/// Open containment: interior points farther than `tol` from the boundary.
pub fn contains_open(poly: &[Vec2], p: Vec2, tol: f64) -> bool {
    boundary_distance(poly, p) > tol && winding_inside(poly, p)
}

/// Parameters in (0,1) where segment [p,q] meets the polygon boundary.
fn boundary_hits(poly: &[Vec2], p: Vec2, q: Vec2) -> Vec<f64> {
    let n = poly.len();
    let d = q - p;
    let mut ts = Vec::new();
    for i in 0..n {
        let a = poly[i];
        let e = poly[(i + 1) % n] - a;
        let den = cross(d, e);
        if den.abs() < 1e-300 {
            continue;
        }
        let t = cross(a - p, e) / den;
        let s = cross(a - p, d) / den;
        if (0.0..=1.0).contains(&s) && t > 0.0 && t < 1.0 {
            ts.push(t);
        }
    }
    ts
}

/// Whether the closed segment [p,q] lies in the closed polygon (up to `tol`).
pub fn segment_inside(poly: &[Vec2], p: Vec2, q: Vec2, tol: f64) -> bool {
    if !contains_closed(poly, p, tol) || !contains_closed(poly, q, tol) {
        return false;
    }
    let mut ts = boundary_hits(poly, p, q);
    ts.push(0.0);
    ts.push(1.0);
    ts.sort_by(f64::total_cmp);
    ts.windows(2).all(|w| contains_closed(poly, p + (q - p) * (0.5 * (w[0] + w[1])), tol))
}

/// Pieces of [p,q] inside the polygon.
pub fn clip_segment(poly: &[Vec2], p: Vec2, q: Vec2) -> Vec<(Vec2, Vec2)> {
    let mut ts = boundary_hits(poly, p, q);
    ts.push(0.0);
    ts.push(1.0);
    ts.sort_by(f64::total_cmp);
    let mut out: Vec<(Vec2, Vec2)> = Vec::new();
    for w in ts.windows(2) {
        if w[1] - w[0] < 1e-14 {
            continue;
        }
        let mid = p + (q - p) * (0.5 * (w[0] + w[1]));
        if contains_closed(poly, mid, 0.0) {
            let a = p + (q - p) * w[0];
            let b = p + (q - p) * w[1];
            match out.last_mut() {
                Some(last) if (last.1 - a).norm() < 1e-14 => last.1 = b,
                _ => out.push((a, b)),
            }
        }
    }
    out
}

/// Length of the part of the infinite line through `p` with direction `d` inside the polygon.
pub fn chord_length(poly: &[Vec2], p: Vec2, d: Vec2) -> f64 {
    let big = 4.0 * (diameter(poly) + (p - poly[0]).norm() + 1.0);
    let d = d.normalize();
    clip_segment(poly, p - d * big, p + d * big).iter().map(|(a, b)| (b - a).norm()).sum()
}

pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>()
}

pub fn diameter(poly: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for a in poly {
        for b in poly {
            d = d.max((a - b).norm());
        }
    }
    d
}

pub fn perimeter(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| (poly[(i + 1) % n] - poly[i]).norm()).sum()
}

pub fn bbox(poly: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = v(f64::INFINITY, f64::INFINITY);
    let mut hi = v(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Whether two closed segments intersect.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = cross(b - a, c - a);
    let o2 = cross(b - a, d - a);
    let o3 = cross(d - c, a - c);
    let o4 = cross(d - c, b - c);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2, o: f64| {
        o == 0.0 && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Closed counterclockwise triangle contains `p`.
pub fn triangle_contains(t: [Vec2; 3], p: Vec2) -> bool {
    (0..3).all(|k| cross(t[(k + 1) % 3] - t[k], p - t[k]) >= 0.0)
}

/// Polygon validity: at least three vertices, nonzero area, no crossing non-adjacent edges.
pub fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly).abs() < 1e-14 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}
