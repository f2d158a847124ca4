//! Triangular reference lattice clipped to a polygon: nodes, bonds and oriented triangles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geom::{self, cross, perp, v, Vec2, SQRT3};
use crate::Error;

/// The three lattice unit vectors and the derived direction sets.
#[derive(Debug, Clone, Copy)]
pub struct LatticeVectors;

impl LatticeVectors {
    pub fn eta(k: usize) -> Vec2 {
        match k {
            1 => v(1.0, 0.0),
            2 => v(0.5, 0.5 * SQRT3),
            3 => v(0.5, -0.5 * SQRT3),
            _ => panic!("lattice direction index {k} out of 1..=3"),
        }
    }

    /// The six signed unit vectors ±η¹, ±η², ±η³.
    pub fn s() -> [Vec2; 6] {
        let e = [Self::eta(1), Self::eta(2), Self::eta(3)];
        [e[0], -e[0], e[1], -e[1], e[2], -e[2]]
    }

    /// The six coordinate directions, one quarter turn from each member of S,
    /// ordered by angle starting at 30°.
    pub fn d() -> [Vec2; 6] {
        std::array::from_fn(|j| geom::unit(std::f64::consts::FRAC_PI_6 * (1 + 2 * j) as f64))
    }

    /// Whether `nu` is (up to a tolerance) a member of D.
    pub fn is_coordinate_direction(nu: Vec2) -> bool {
        let n = nu.norm();
        n > 0.0 && Self::s().iter().any(|s| (perp(*s) - nu / n).norm() < 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    /// Lattice direction 1, 2 or 3.
    pub dir: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeDomain {
    pub epsilon: f64,
    pub polygon: Vec<Vec2>,
    pub offset: Vec2,
    /// Node positions, sorted by row then by position along the row.
    pub nodes: Vec<Vec2>,
    /// Integer coordinates (a, b) with node = offset + ε(a η¹ + b η²).
    pub coords: Vec<(i64, i64)>,
    pub bonds: Vec<Bond>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    #[serde(skip)]
    index: HashMap<(i64, i64), usize>,
}

impl LatticeDomain {
    /// Clip ε(aη¹ + bη²) + offset to the closed polygon.
    pub fn build(polygon: &[Vec2], epsilon: f64, offset: Vec2) -> Result<Self, Error> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if !geom::is_simple(polygon) {
            return Err(Error::InvalidParameter("polygon must be simple and non-degenerate".into()));
        }
        let mut poly = polygon.to_vec();
        if geom::signed_area(&poly) < 0.0 {
            poly.reverse();
        }
        let tol = 1e-12 * epsilon;
        let h = 0.5 * SQRT3 * epsilon;
        let (lo, hi) = geom::bbox(&poly);
        let b0 = ((lo.y - offset.y) / h).floor() as i64 - 1;
        let b1 = ((hi.y - offset.y) / h).ceil() as i64 + 1;
        let mut coords = Vec::new();
        let mut nodes = Vec::new();
        for b in b0..=b1 {
            let row_x = offset.x + 0.5 * epsilon * b as f64;
            let a0 = ((lo.x - row_x) / epsilon).floor() as i64 - 1;
            let a1 = ((hi.x - row_x) / epsilon).ceil() as i64 + 1;
            for a in a0..=a1 {
                let p = Self::position(offset, epsilon, a, b);
                if geom::contains_closed(&poly, p, tol) {
                    coords.push((a, b));
                    nodes.push(p);
                }
            }
        }
        let index: HashMap<(i64, i64), usize> = coords.iter().enumerate().map(|(n, c)| (*c, n)).collect();

        let inside = |i: usize, j: usize| geom::segment_inside(&poly, nodes[i], nodes[j], tol);
        let mut bonds = Vec::new();
        for (n, &(a, b)) in coords.iter().enumerate() {
            for (dir, (da, db)) in [(1u8, (1, 0)), (2, (0, 1)), (3, (-1, 1))] {
                if let Some(&m) = index.get(&(a + da, b + db)) {
                    if inside(n, m) {
                        let (i, j) = if n < m { (n, m) } else { (m, n) };
                        bonds.push(Bond { i, j, dir });
                    }
                }
            }
        }
        bonds.sort_by_key(|bd| (bd.i, bd.j));

        let mut triangles = Vec::new();
        for &(a, b) in &coords {
            let up = [(a, b), (a + 1, b), (a, b + 1)];
            let down = [(a + 1, b), (a + 1, b + 1), (a, b + 1)];
            for tri in [up, down] {
                let ids: Option<Vec<usize>> = tri.iter().map(|c| index.get(c).copied()).collect();
                if let Some(ids) = ids {
                    if inside(ids[0], ids[1]) && inside(ids[1], ids[2]) && inside(ids[2], ids[0]) {
                        triangles.push([ids[0], ids[1], ids[2]]);
                    }
                }
            }
        }
        if bonds.is_empty() {
            return Err(Error::EmptyLattice);
        }
        Ok(Self { epsilon, polygon: poly, offset, nodes, coords, bonds, triangles, index })
    }

    pub fn position(offset: Vec2, epsilon: f64, a: i64, b: i64) -> Vec2 {
        offset + v(epsilon * (a as f64 + 0.5 * b as f64), epsilon * 0.5 * SQRT3 * b as f64)
    }

    /// Rebuild the coordinate lookup after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.coords.iter().enumerate().map(|(n, c)| (*c, n)).collect();
    }

    pub fn node_at(&self, a: i64, b: i64) -> Option<usize> {
        self.index.get(&(a, b)).copied()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Reference signed area of triangle `t` (√3ε²/4 for every stored triangle).
    pub fn reference_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(self.nodes[b] - self.nodes[a], self.nodes[c] - self.nodes[a])
    }

    /// Lattice direction of a bond.
    pub fn direction_index(&self, bond: usize) -> u8 {
        self.bonds[bond].dir
    }

    /// Each triangle's three sides as sorted node pairs.
    pub fn triangle_edges(&self, t: usize) -> [(usize, usize); 3] {
        let [a, b, c] = self.triangles[t];
        let e = |x: usize, y: usize| if x < y { (x, y) } else { (y, x) };
        [e(a, b), e(b, c), e(c, a)]
    }

    /// Triangles whose closed hull meets the segment [p, q].
    pub fn triangles_crossing_segment(&self, p: Vec2, q: Vec2) -> Vec<usize> {
        let lo = p.inf(&q);
        let hi = p.sup(&q);
        let eps = self.epsilon;
        (0..self.triangles.len())
            .filter(|&t| {
                let [a, b, c] = self.triangles[t].map(|n| self.nodes[n]);
                let tlo = a.inf(&b).inf(&c);
                let thi = a.sup(&b).sup(&c);
                if tlo.x > hi.x + 1e-12 * eps
                    || tlo.y > hi.y + 1e-12 * eps
                    || thi.x < lo.x - 1e-12 * eps
                    || thi.y < lo.y - 1e-12 * eps
                {
                    return false;
                }
                geom::triangle_contains([a, b, c], p)
                    || geom::segments_intersect(a, b, p, q)
                    || geom::segments_intersect(b, c, p, q)
                    || geom::segments_intersect(c, a, p, q)
            })
            .collect()
    }

    /// For every bond, the triangles containing it.
    pub fn bond_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut m: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for t in 0..self.triangles.len() {
            for e in self.triangle_edges(t) {
                m.entry(e).or_default().push(t);
            }
        }
        m
    }
}
