//! Equispaced grids on the unit circle and the unit interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    Circle,
    Interval,
}

/// Arc distance on ℝ/ℤ, always in `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CircleDistance(f64);

impl CircleDistance {
    pub fn new(d: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "circle distance must lie in [0, 1/2], got {d}"
            )));
        }
        Ok(Self(d))
    }

    /// `min_k |x - y + k|`.
    pub fn between(x: f64, y: f64) -> Self {
        // abs first: rem_euclid of a tiny negative rounds up to 1.
        let r = (x - y).abs().rem_euclid(1.0);
        Self(r.min(1.0 - r))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `m` equispaced points `x_i = i/m`, each owning the left-endpoint cell
/// `[x_i, x_i + 1/m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDomain {
    kind: DomainKind,
    m: usize,
}

impl GridDomain {
    pub fn new(kind: DomainKind, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        Ok(Self { kind, m })
    }

    pub fn circle(m: usize) -> Result<Self> {
        Self::new(DomainKind::Circle, m)
    }

    pub fn interval(m: usize) -> Result<Self> {
        Self::new(DomainKind::Interval, m)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.point(i)).collect()
    }

    /// Distance between two grid points in index units.
    pub fn lag(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        match self.kind {
            DomainKind::Circle => d.min(self.m - d),
            DomainKind::Interval => d,
        }
    }

    /// Distance between arbitrary points of the domain.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            DomainKind::Circle => CircleDistance::between(x, y).get(),
            DomainKind::Interval => (x - y).abs(),
        }
    }

    /// Largest lag that can occur on this grid.
    pub fn max_lag(&self) -> usize {
        match self.kind {
            DomainKind::Circle => self.m / 2,
            DomainKind::Interval => self.m - 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_separation_is_kept() {
        assert_eq!(CircleDistance::between(0.0, 3e-17).get(), 3e-17);
        assert_eq!(CircleDistance::between(3e-17, 0.0).get(), 3e-17);
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((CircleDistance::between(0.05, 0.95).get() - 0.1).abs() < 1e-15);
        assert_eq!(CircleDistance::between(0.3, 0.3).get(), 0.0);
        assert!((CircleDistance::between(0.0, 0.5).get() - 0.5).abs() < 1e-15);
        assert!(CircleDistance::new(0.6).is_err());
    }

    #[test]
    fn grid_cells_sum_to_one() {
        let g = GridDomain::circle(8).unwrap();
        let pts = g.points();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!((g.cell_width() * g.len() as f64 - 1.0).abs() < 1e-15);
        assert_eq!(g.lag(1, 7), 2);
        assert_eq!(GridDomain::interval(8).unwrap().lag(1, 7), 6);
        assert!(GridDomain::circle(1).is_err());
    }
}
