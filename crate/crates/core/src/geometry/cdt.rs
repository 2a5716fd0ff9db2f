//! Constrained Delaunay triangulation: incremental insertion with Lawson flips
//! inside a large super triangle, constraint recovery by edge flips, and
//! removal of everything outside the constrained outer loop.

use std::collections::VecDeque;

use super::{coord, Vec2};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[inline]
fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

#[inline]
fn incircle(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

/// Working triangulation. Triangle `t` stores its vertices counterclockwise;
/// `nbr[t][k]` is the triangle across the edge opposite vertex `k`.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pts: Vec<Vec2>,
    tris: Vec<[u32; 3]>,
    nbr: Vec<[u32; 3]>,
    fixed: Vec<[bool; 3]>,
    vtri: Vec<u32>,
    n_real: usize,
    last: u32,
}

impl Triangulation {
    /// Delaunay triangulation of `points`, which must be pairwise distinct.
    pub fn new(points: &[Vec2]) -> Result<Self> {
        let n = points.len();
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let c = (lo + hi) * 0.5;
        let r = (hi - lo).norm().max(1e-300) * 100.0;
        let mut pts = points.to_vec();
        pts.push(c + Vec2::polar(r, -std::f64::consts::FRAC_PI_2));
        pts.push(c + Vec2::polar(r, std::f64::consts::FRAC_PI_6));
        pts.push(c + Vec2::polar(r, 5.0 * std::f64::consts::FRAC_PI_6));
        let s = n as u32;
        let mut t = Triangulation {
            pts,
            tris: vec![[s, s + 1, s + 2]],
            nbr: vec![[NONE; 3]],
            fixed: vec![[false; 3]],
            vtri: vec![NONE; n + 3],
            n_real: n,
            last: 0,
        };
        t.vtri[n] = 0;
        t.vtri[n + 1] = 0;
        t.vtri[n + 2] = 0;
        for i in hilbert_order(points, lo, hi) {
            t.insert(i as u32)?;
        }
        Ok(t)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts[..self.n_real]
    }

    fn p(&self, v: u32) -> Vec2 {
        self.pts[v as usize]
    }

    fn locate(&mut self, q: Vec2) -> u32 {
        let mut t = self.last;
        let mut turn = 0usize;
        loop {
            let tri = self.tris[t as usize];
            let mut moved = false;
            for j in 0..3 {
                let k = (j + turn) % 3;
                let a = self.p(tri[(k + 1) % 3]);
                let b = self.p(tri[(k + 2) % 3]);
                if orient(a, b, q) < 0.0 {
                    let nb = self.nbr[t as usize][k];
                    if nb != NONE {
                        t = nb;
                        moved = true;
                        break;
                    }
                }
            }
            turn += 1;
            if !moved {
                self.last = t;
                return t;
            }
        }
    }

    fn set_nbr(&mut self, t: u32, old: u32, new: u32) {
        if t == NONE {
            return;
        }
        for k in 0..3 {
            if self.nbr[t as usize][k] == old {
                self.nbr[t as usize][k] = new;
                return;
            }
        }
    }

    fn push_tri(&mut self, v: [u32; 3], n: [u32; 3], f: [bool; 3]) -> u32 {
        self.tris.push(v);
        self.nbr.push(n);
        self.fixed.push(f);
        (self.tris.len() - 1) as u32
    }

    fn touch(&mut self, t: u32) {
        for v in self.tris[t as usize] {
            self.vtri[v as usize] = t;
        }
    }

    fn insert(&mut self, pi: u32) -> Result<()> {
        let q = self.p(pi);
        let t = self.locate(q);
        let tri = self.tris[t as usize];
        let mut on_edge = None;
        for k in 0..3 {
            let a = self.p(tri[(k + 1) % 3]);
            let b = self.p(tri[(k + 2) % 3]);
            if a == q || b == q {
                return Err(Error::MeshFailure(format!("duplicate point {q:?}")));
            }
            if orient(a, b, q) == 0.0 {
                on_edge = Some(k);
            }
        }
        let mut stack = Vec::new();
        match on_edge {
            None => {
                let [a, b, c] = tri;
                let [na, nb, nc] = self.nbr[t as usize];
                let [fa, fb, fc] = self.fixed[t as usize];
                let t1 = self.push_tri([b, c, pi], [NONE, t, na], [false, false, fa]);
                let t2 = self.push_tri([c, a, pi], [t, t1, nb], [false, false, fb]);
                self.nbr[t1 as usize][0] = t2;
                self.tris[t as usize] = [a, b, pi];
                self.nbr[t as usize] = [t1, t2, nc];
                self.fixed[t as usize] = [false, false, fc];
                self.set_nbr(na, t, t1);
                self.set_nbr(nb, t, t2);
                self.touch(t);
                self.touch(t1);
                self.touch(t2);
                stack.extend([(t, 2usize), (t1, 2), (t2, 2)]);
            }
            Some(k1) => {
                let t1 = t;
                let a = tri[k1];
                let u = tri[(k1 + 1) % 3];
                let v = tri[(k1 + 2) % 3];
                let t2 = self.nbr[t1 as usize][k1];
                if t2 == NONE {
                    return Err(Error::MeshFailure("point on super triangle hull".into()));
                }
                let k2 = self.index_of_opposite(t2, t1);
                let b = self.tris[t2 as usize][k2];
                let a1 = self.nbr[t1 as usize][(k1 + 1) % 3];
                let a2 = self.nbr[t1 as usize][(k1 + 2) % 3];
                let fa1 = self.fixed[t1 as usize][(k1 + 1) % 3];
                let fa2 = self.fixed[t1 as usize][(k1 + 2) % 3];
                let b1 = self.nbr[t2 as usize][(k2 + 1) % 3];
                let b2 = self.nbr[t2 as usize][(k2 + 2) % 3];
                let fb1 = self.fixed[t2 as usize][(k2 + 1) % 3];
                let fb2 = self.fixed[t2 as usize][(k2 + 2) % 3];
                let fe = self.fixed[t1 as usize][k1];
                let t3 = self.push_tri([a, pi, v], [t2, a1, t1], [fe, fa1, false]);
                let t4 = self.push_tri([b, pi, u], [t1, b1, t2], [fe, fb1, false]);
                self.tris[t1 as usize] = [a, u, pi];
                self.nbr[t1 as usize] = [t4, t3, a2];
                self.fixed[t1 as usize] = [fe, false, fa2];
                self.tris[t2 as usize] = [b, v, pi];
                self.nbr[t2 as usize] = [t3, t4, b2];
                self.fixed[t2 as usize] = [fe, false, fb2];
                self.set_nbr(a1, t1, t3);
                self.set_nbr(b1, t2, t4);
                for x in [t1, t2, t3, t4] {
                    self.touch(x);
                }
                stack.extend([(t1, 2usize), (t3, 1), (t2, 2), (t4, 1)]);
            }
        }
        self.legalize(pi, stack);
        Ok(())
    }

    fn index_of_opposite(&self, t: u32, other: u32) -> usize {
        (0..3).find(|&k| self.nbr[t as usize][k] == other).expect("broken adjacency")
    }

    fn index_of(&self, t: u32, v: u32) -> usize {
        (0..3).find(|&k| self.tris[t as usize][k] == v).expect("vertex not in triangle")
    }

    /// Flips the edge opposite vertex `k1` of `t1`. Returns the two triangles,
    /// with the former opposite vertex of `t1` at index 0 of the first.
    fn flip(&mut self, t1: u32, k1: usize) -> (u32, u32) {
        let t2 = self.nbr[t1 as usize][k1];
        let k2 = self.index_of_opposite(t2, t1);
        let tri1 = self.tris[t1 as usize];
        let p = tri1[k1];
        let u = tri1[(k1 + 1) % 3];
        let v = tri1[(k1 + 2) % 3];
        let q = self.tris[t2 as usize][k2];
        let a = self.nbr[t1 as usize][(k1 + 1) % 3];
        let b = self.nbr[t1 as usize][(k1 + 2) % 3];
        let c = self.nbr[t2 as usize][(k2 + 1) % 3];
        let d = self.nbr[t2 as usize][(k2 + 2) % 3];
        let fa = self.fixed[t1 as usize][(k1 + 1) % 3];
        let fb = self.fixed[t1 as usize][(k1 + 2) % 3];
        let fc = self.fixed[t2 as usize][(k2 + 1) % 3];
        let fd = self.fixed[t2 as usize][(k2 + 2) % 3];
        self.tris[t1 as usize] = [p, u, q];
        self.nbr[t1 as usize] = [c, t2, b];
        self.fixed[t1 as usize] = [fc, false, fb];
        self.tris[t2 as usize] = [q, v, p];
        self.nbr[t2 as usize] = [a, t1, d];
        self.fixed[t2 as usize] = [fa, false, fd];
        self.set_nbr(c, t2, t1);
        self.set_nbr(a, t1, t2);
        self.touch(t1);
        self.touch(t2);
        (t1, t2)
    }

    fn legalize(&mut self, pi: u32, mut stack: Vec<(u32, usize)>) {
        while let Some((t, k)) = stack.pop() {
            if self.tris[t as usize][k] != pi {
                continue;
            }
            let nb = self.nbr[t as usize][k];
            if nb == NONE || self.fixed[t as usize][k] {
                continue;
            }
            let kq = self.index_of_opposite(nb, t);
            let q = self.tris[nb as usize][kq];
            let tri = self.tris[t as usize];
            if incircle(self.p(tri[0]), self.p(tri[1]), self.p(tri[2]), self.p(q)) > 0.0 {
                let (t1, t2) = self.flip(t, k);
                stack.push((t1, 0));
                stack.push((t2, 2));
            }
        }
    }

    /// Triangle containing the directed edge `u -> v` and the index of the
    /// vertex opposite it.
    fn find_edge(&self, u: u32, v: u32) -> Option<(u32, usize)> {
        let start = self.vtri[u as usize];
        let mut t = start;
        // rotate one way around u
        loop {
            let i = self.index_of(t, u);
            if self.tris[t as usize][(i + 1) % 3] == v {
                return Some((t, (i + 2) % 3));
            }
            let nb = self.nbr[t as usize][(i + 1) % 3];
            if nb == NONE || nb == start {
                break;
            }
            t = nb;
        }
        t = start;
        loop {
            let i = self.index_of(t, u);
            if self.tris[t as usize][(i + 1) % 3] == v {
                return Some((t, (i + 2) % 3));
            }
            let nb = self.nbr[t as usize][(i + 2) % 3];
            if nb == NONE || nb == start {
                return None;
            }
            t = nb;
        }
    }

    fn has_edge(&self, u: u32, v: u32) -> bool {
        self.find_edge(u, v).is_some() || self.find_edge(v, u).is_some()
    }

    fn mark_fixed(&mut self, u: u32, v: u32) {
        for (a, b) in [(u, v), (v, u)] {
            if let Some((t, k)) = self.find_edge(a, b) {
                self.fixed[t as usize][k] = true;
            }
        }
    }

    /// Forces the segment between vertices `a` and `b` into the triangulation.
    /// No other vertex may lie on the open segment.
    pub fn insert_constraint(&mut self, a: usize, b: usize) -> Result<()> {
        let (a, b) = (a as u32, b as u32);
        if self.has_edge(a, b) {
            self.mark_fixed(a, b);
            return Ok(());
        }
        let pa = self.p(a);
        let pb = self.p(b);
        let fail = |m: &str| Err(Error::MeshFailure(format!("constraint {a}-{b}: {m}")));
        // find the first crossed edge in the fan of a
        let start = self.vtri[a as usize];
        let mut t = start;
        let mut first = None;
        for _ in 0..10_000 {
            let i = self.index_of(t, a);
            let v1 = self.tris[t as usize][(i + 1) % 3];
            let v2 = self.tris[t as usize][(i + 2) % 3];
            let o1 = orient(pa, self.p(v1), pb);
            let o2 = orient(pa, self.p(v2), pb);
            if o1 == 0.0 && (self.p(v1) - pa).dot(pb - pa) > 0.0 {
                return fail("vertex on segment");
            }
            if o1 > 0.0 && o2 < 0.0 {
                first = Some((v1, v2, t));
                break;
            }
            let nb = self.nbr[t as usize][(i + 1) % 3];
            if nb == NONE || nb == start {
                break;
            }
            t = nb;
        }
        let Some((mut r, mut l, _)) = first else {
            return fail("no starting triangle");
        };
        let mut crossing = VecDeque::new();
        loop {
            crossing.push_back((r, l));
            let (t, k) = match self.find_edge(l, r) {
                Some(x) => x,
                None => return fail("walk lost"),
            };
            let w = self.tris[t as usize][k];
            if w == b {
                break;
            }
            let o = orient(pa, pb, self.p(w));
            if o > 0.0 {
                l = w;
            } else if o < 0.0 {
                r = w;
            } else {
                return fail("vertex on segment");
            }
        }
        let mut fresh = Vec::new();
        let mut guard = 0usize;
        while let Some((u, v)) = crossing.pop_front() {
            guard += 1;
            if guard > 1_000_000 {
                return fail("flip recovery did not terminate");
            }
            let Some((t1, k1)) = self.find_edge(u, v).or_else(|| self.find_edge(v, u)) else {
                return fail("crossing edge vanished");
            };
            let t2 = self.nbr[t1 as usize][k1];
            let k2 = self.index_of_opposite(t2, t1);
            let tri = self.tris[t1 as usize];
            let p = tri[k1];
            let uu = tri[(k1 + 1) % 3];
            let vv = tri[(k1 + 2) % 3];
            let q = self.tris[t2 as usize][k2];
            let convex = orient(self.p(p), self.p(uu), self.p(q)) > 0.0
                && orient(self.p(q), self.p(vv), self.p(p)) > 0.0;
            if !convex {
                crossing.push_back((u, v));
                continue;
            }
            self.flip(t1, k1);
            let pp = self.p(p);
            let pq = self.p(q);
            let crosses = p != a
                && p != b
                && q != a
                && q != b
                && orient(pa, pb, pp) * orient(pa, pb, pq) < 0.0
                && orient(pp, pq, pa) * orient(pp, pq, pb) < 0.0;
            if crosses {
                crossing.push_back((p, q));
            } else {
                fresh.push((p, q));
            }
        }
        self.mark_fixed(a, b);
        // restore the Delaunay property on the new edges
        let mut work: VecDeque<(u32, u32)> = fresh.into();
        let mut budget = 1_000_000usize;
        while let Some((u, v)) = work.pop_front() {
            budget -= 1;
            if budget == 0 {
                return fail("Delaunay restoration did not terminate");
            }
            if (u == a && v == b) || (u == b && v == a) {
                continue;
            }
            let Some((t1, k1)) = self.find_edge(u, v).or_else(|| self.find_edge(v, u)) else { continue };
            if self.fixed[t1 as usize][k1] {
                continue;
            }
            let t2 = self.nbr[t1 as usize][k1];
            if t2 == NONE {
                continue;
            }
            let k2 = self.index_of_opposite(t2, t1);
            let q = self.tris[t2 as usize][k2];
            let tri = self.tris[t1 as usize];
            if incircle(self.p(tri[0]), self.p(tri[1]), self.p(tri[2]), self.p(q)) > 0.0 {
                let p = tri[k1];
                let (uu, vv) = (tri[(k1 + 1) % 3], tri[(k1 + 2) % 3]);
                self.flip(t1, k1);
                work.extend([(p, uu), (uu, q), (q, vv), (vv, p)]);
            }
        }
        Ok(())
    }

    /// Triangles (counterclockwise, real vertices only) enclosed by constrained
    /// edges, i.e. not reachable from the super triangle without crossing a
    /// constraint.
    pub fn interior_triangles(&self) -> Vec<[usize; 3]> {
        let nt = self.tris.len();
        let mut outside = vec![false; nt];
        let mut queue = VecDeque::new();
        for t in 0..nt {
            if self.tris[t].iter().any(|&v| v as usize >= self.n_real) {
                outside[t] = true;
                queue.push_back(t);
            }
        }
        while let Some(t) = queue.pop_front() {
            for k in 0..3 {
                let nb = self.nbr[t][k];
                if nb != NONE && !self.fixed[t][k] && !outside[nb as usize] {
                    outside[nb as usize] = true;
                    queue.push_back(nb as usize);
                }
            }
        }
        (0..nt)
            .filter(|&t| !outside[t])
            .map(|t| self.tris[t].map(|v| v as usize))
            .collect()
    }
}

/// Hilbert-curve ordering for cache-friendly insertion and short walks.
fn hilbert_order(points: &[Vec2], lo: Vec2, hi: Vec2) -> Vec<usize> {
    const ORDER: u32 = 16;
    let side = (1u64 << ORDER) as f64 - 1.0;
    let span = Vec2::new((hi.x - lo.x).max(1e-300), (hi.y - lo.y).max(1e-300));
    let mut keyed: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x = (((p.x - lo.x) / span.x) * side) as u64;
            let y = (((p.y - lo.y) / span.y) * side) as u64;
            (hilbert_d(ORDER, x, y), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn hilbert_d(order: u32, mut x: u64, mut y: u64) -> u64 {
    let n = 1u64 << order;
    let mut d = 0u64;
    let mut s = n / 2;
    while s > 0 {
        let rx = u64::from(x & s > 0);
        let ry = u64::from(y & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn is_delaunay(t: &Triangulation) -> bool {
        for (i, tri) in t.tris.iter().enumerate() {
            for k in 0..3 {
                let nb = t.nbr[i][k];
                if nb == NONE || t.fixed[i][k] {
                    continue;
                }
                let kq = t.index_of_opposite(nb, i as u32);
                let q = t.tris[nb as usize][kq];
                if incircle(t.p(tri[0]), t.p(tri[1]), t.p(tri[2]), t.p(q)) > 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec2::new(rng.random::<f64>(), rng.random::<f64>())).collect()
    }

    #[test]
    fn random_points_are_delaunay_with_euler_count() {
        let mut pts = random_points(500, 1);
        pts.extend([Vec2::new(-0.1, -0.1), Vec2::new(1.1, -0.1), Vec2::new(1.1, 1.1), Vec2::new(-0.1, 1.1)]);
        let mut t = Triangulation::new(&pts).unwrap();
        assert!(is_delaunay(&t));
        let n = pts.len();
        for k in 0..4 {
            t.insert_constraint(n - 4 + k, n - 4 + (k + 1) % 4).unwrap();
        }
        let tris = t.interior_triangles();
        // convex hull is the square: 2n - 2 - 4 triangles
        assert_eq!(tris.len(), 2 * n - 2 - 4);
        let area: f64 = tris
            .iter()
            .map(|tr| 0.5 * (pts[tr[1]] - pts[tr[0]]).cross(pts[tr[2]] - pts[tr[0]]))
            .sum();
        assert!((area - 1.44).abs() < 1e-12);
    }

    #[test]
    fn grid_points_with_cocircular_degeneracy() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Vec2::new(i as f64, j as f64));
            }
        }
        let t = Triangulation::new(&pts).unwrap();
        assert!(is_delaunay(&t));
    }

    #[test]
    fn constraint_is_recovered() {
        let mut pts = random_points(400, 7);
        let n = pts.len();
        pts.push(Vec2::new(0.05, 0.5017));
        pts.push(Vec2::new(0.95, 0.4983));
        let mut t = Triangulation::new(&pts).unwrap();
        t.insert_constraint(n, n + 1).unwrap();
        assert!(t.has_edge(n as u32, n as u32 + 1));
        assert!(is_delaunay(&t));
    }

    #[test]
    fn duplicate_point_is_an_error() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        assert!(Triangulation::new(&pts).is_err());
    }
}
