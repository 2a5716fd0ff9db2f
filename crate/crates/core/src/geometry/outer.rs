use std::f64::consts::PI;

use super::Vec2;

/// The body Omega. Only shapes with an analytic boundary parameterization are
/// supported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterDomain {
    Disk { center: Vec2, radius: f64 },
    Rectangle { min: Vec2, max: Vec2 },
}

impl OuterDomain {
    pub fn unit_disk() -> Self {
        OuterDomain::Disk { center: Vec2::ZERO, radius: 1.0 }
    }

    pub fn boundary_length(&self) -> f64 {
        match *self {
            OuterDomain::Disk { radius, .. } => 2.0 * PI * radius,
            OuterDomain::Rectangle { min, max } => 2.0 * ((max.x - min.x) + (max.y - min.y)),
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn inside_distance(&self, p: Vec2) -> f64 {
        match *self {
            OuterDomain::Disk { center, radius } => radius - p.dist(center),
            OuterDomain::Rectangle { min, max } => {
                let dx = (p.x - min.x).min(max.x - p.x);
                let dy = (p.y - min.y).min(max.y - p.y);
                dx.min(dy)
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.inside_distance(p) > 0.0
    }

    /// Boundary point at arc length `s` (counterclockwise). The disk starts at
    /// angle 0, the rectangle at its lower-left corner.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let l = self.boundary_length();
        let s = s.rem_euclid(l);
        match *self {
            OuterDomain::Disk { center, radius } => center + Vec2::polar(radius, s / radius),
            OuterDomain::Rectangle { min, max } => {
                let w = max.x - min.x;
                let h = max.y - min.y;
                if s < w {
                    Vec2::new(min.x + s, min.y)
                } else if s < w + h {
                    Vec2::new(max.x, min.y + (s - w))
                } else if s < 2.0 * w + h {
                    Vec2::new(max.x - (s - w - h), max.y)
                } else {
                    Vec2::new(min.x, max.y - (s - 2.0 * w - h))
                }
            }
        }
    }

    /// Inverse of [`point_at`](Self::point_at) for points on (or projected to) the boundary.
    pub fn arc_length_of(&self, p: Vec2) -> f64 {
        match *self {
            OuterDomain::Disk { center, radius } => (p - center).angle().rem_euclid(2.0 * PI) * radius,
            OuterDomain::Rectangle { min, max } => {
                let w = max.x - min.x;
                let h = max.y - min.y;
                let d = [p.y - min.y, max.x - p.x, max.y - p.y, p.x - min.x];
                let side = (0..4)
                    .min_by(|&a, &b| d[a].abs().partial_cmp(&d[b].abs()).unwrap())
                    .unwrap();
                match side {
                    0 => (p.x - min.x).clamp(0.0, w),
                    1 => w + (p.y - min.y).clamp(0.0, h),
                    2 => w + h + (max.x - p.x).clamp(0.0, w),
                    _ => (2.0 * w + h + (max.y - p.y).clamp(0.0, h)) % self.boundary_length(),
                }
            }
        }
    }

    /// Boundary nodes with spacing at most `hmax`. Rectangle corners are always
    /// included.
    pub fn boundary_nodes(&self, hmax: f64) -> Vec<Vec2> {
        match *self {
            OuterDomain::Disk { .. } => {
                let l = self.boundary_length();
                let n = ((l / hmax).ceil() as usize).max(8);
                (0..n).map(|j| self.point_at(l * j as f64 / n as f64)).collect()
            }
            OuterDomain::Rectangle { min, max } => {
                let corners = [min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)];
                let mut out = Vec::new();
                for c in 0..4 {
                    let a = corners[c];
                    let b = corners[(c + 1) % 4];
                    let m = ((a.dist(b) / hmax).ceil() as usize).max(2);
                    for j in 0..m {
                        out.push(a.lerp(b, j as f64 / m as f64));
                    }
                }
                out
            }
        }
    }

    /// Fourier current of index `m` in arc length: `cos(2 pi m s / L)` for
    /// `sine == false`, `sin(...)` otherwise. On the unit disk this is `cos m theta`.
    pub fn fourier_mode(&self, m: usize, sine: bool, p: Vec2) -> f64 {
        let l = self.boundary_length();
        let phase = 2.0 * PI * m as f64 * self.arc_length_of(p) / l;
        if sine {
            phase.sin()
        } else {
            phase.cos()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_parameterization_roundtrip() {
        let d = OuterDomain::unit_disk();
        for j in 0..20 {
            let s = 0.3 * j as f64;
            let p = d.point_at(s);
            assert!((p.norm() - 1.0).abs() < 1e-14);
            assert!((d.arc_length_of(p) - s.rem_euclid(2.0 * PI)).abs() < 1e-12);
        }
        assert!((d.fourier_mode(1, false, Vec2::new(0.0, 1.0))).abs() < 1e-15);
    }

    #[test]
    fn rectangle_parameterization_roundtrip() {
        let r = OuterDomain::Rectangle { min: Vec2::new(-1.0, -0.5), max: Vec2::new(1.0, 0.5) };
        assert_eq!(r.boundary_length(), 6.0);
        for j in 0..60 {
            let s = 0.1 * j as f64 + 0.01;
            let p = r.point_at(s);
            assert!(r.inside_distance(p).abs() < 1e-14);
            assert!((r.arc_length_of(p) - s).abs() < 1e-12, "{s}");
        }
        let nodes = r.boundary_nodes(0.3);
        assert!(nodes.contains(&Vec2::new(1.0, 0.5)));
    }
}
