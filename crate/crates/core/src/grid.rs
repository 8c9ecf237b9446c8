//! Uniform 1-D grids, piecewise-constant densities on them, and binnings.

use std::f64::consts::PI;

use crate::entropy::DiscreteMeasure;
use crate::geometry::{sphere_chart, ModelSpace, SpaceKind, Vec3};
use crate::quad::gauss_legendre;

/// Uniform cells on `[lo, hi]`, optionally periodic.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1d {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub periodic: bool,
}

impl Grid1d {
    pub fn new(lo: f64, hi: f64, cells: usize, periodic: bool) -> Self {
        assert!(hi > lo && cells > 0);
        Self {
            lo,
            hi,
            cells,
            periodic,
        }
    }

    /// Grid covering an `Interval` or `Circle`.
    pub fn for_space(space: &ModelSpace, cells: usize) -> Option<Self> {
        match space.kind() {
            SpaceKind::Interval { lo, hi } => Some(Self::new(*lo, *hi, cells, false)),
            SpaceKind::Circle { circumference } => {
                Some(Self::new(0.0, *circumference, cells, true))
            }
            _ => None,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Cell containing `x`; periodic grids wrap, others reject points outside.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let x = if self.periodic {
            self.lo + (x - self.lo).rem_euclid(self.length())
        } else {
            x
        };
        let slack = 1e-12 * self.length();
        if x < self.lo - slack || x > self.hi + slack {
            return None;
        }
        let i = ((x - self.lo) / self.spacing()).floor();
        Some((i.max(0.0) as usize).min(self.cells - 1))
    }

    /// Lebesgue cell volumes as a reference measure.
    pub fn reference(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(
            self.centers()
                .into_iter()
                .map(|c| Vec3::new(c, 0.0, 0.0))
                .collect(),
            vec![self.spacing(); self.cells],
        )
    }

    pub fn with_cells(&self, cells: usize) -> Self {
        Self {
            cells,
            ..self.clone()
        }
    }
}

/// Assignment of points to the cells of a reference measure.
pub trait Binning {
    fn reference(&self) -> DiscreteMeasure;
    fn cell_of(&self, p: &Vec3) -> Option<usize>;
}

impl Binning for Grid1d {
    fn reference(&self) -> DiscreteMeasure {
        Grid1d::reference(self)
    }

    fn cell_of(&self, p: &Vec3) -> Option<usize> {
        Grid1d::cell_of(self, p[0])
    }
}

/// Latitude-longitude cells on an embedded sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereBins {
    pub radius: f64,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl Binning for SphereBins {
    fn reference(&self) -> DiscreteMeasure {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let dp = PI / self.n_polar as f64;
        let da = 2.0 * PI / self.n_azimuth as f64;
        for i in 0..self.n_polar {
            let (a, b) = (i as f64 * dp, (i + 1) as f64 * dp);
            let area = self.radius * self.radius * da * (a.cos() - b.cos());
            for j in 0..self.n_azimuth {
                points.push(crate::geometry::sphere_point(
                    self.radius,
                    a + 0.5 * dp,
                    (j as f64 + 0.5) * da,
                ));
                weights.push(area);
            }
        }
        DiscreteMeasure::new(points, weights)
    }

    fn cell_of(&self, p: &Vec3) -> Option<usize> {
        let (polar, az) = sphere_chart(p);
        let i = ((polar / PI * self.n_polar as f64) as usize).min(self.n_polar - 1);
        let j = ((az / (2.0 * PI) * self.n_azimuth as f64) as usize).min(self.n_azimuth - 1);
        Some(i * self.n_azimuth + j)
    }
}

/// A probability measure with constant density on each grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Density1d {
    pub grid: Grid1d,
    pub mass: Vec<f64>,
}

impl Density1d {
    /// Normalizes nonnegative cell masses to total 1.
    pub fn from_masses(grid: Grid1d, mass: Vec<f64>) -> Self {
        assert_eq!(mass.len(), grid.cells);
        assert!(mass.iter().all(|&m| m >= 0.0), "masses must be nonnegative");
        let total: f64 = mass.iter().sum();
        assert!(total > 0.0, "zero measure");
        Self {
            grid,
            mass: mass.into_iter().map(|m| m / total).collect(),
        }
    }

    /// Cell averages of a nonnegative profile.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid1d, f: F) -> Self {
        let mass = (0..grid.cells)
            .map(|i| gauss_legendre(grid.edge(i), grid.edge(i + 1), &f).max(0.0))
            .collect();
        Self::from_masses(grid, mass)
    }

    /// Uniform on `[a, b]` (exact cell overlaps, wrapped on periodic grids).
    pub fn block(grid: Grid1d, a: f64, b: f64) -> Self {
        let shifts: &[f64] = if grid.periodic {
            &[-1.0, 0.0, 1.0]
        } else {
            &[0.0]
        };
        // float slivers at the block edges would become spurious cells
        let sliver = 1e-9 * grid.spacing();
        let mass = (0..grid.cells)
            .map(|i| {
                let m: f64 = shifts
                    .iter()
                    .map(|k| {
                        let off = k * grid.length();
                        (grid.edge(i + 1).min(b + off) - grid.edge(i).max(a + off)).max(0.0)
                    })
                    .sum();
                if m > sliver {
                    m
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_masses(grid, mass)
    }

    /// Smooth compactly supported bump `cos²` of half-width `w` around `c`.
    pub fn bump(grid: Grid1d, c: f64, w: f64) -> Self {
        let period = grid.periodic.then(|| grid.length());
        Self::from_fn(grid, move |x| {
            let d = match period {
                Some(p) => crate::geometry::signed_gap(c, x, p),
                None => x - c,
            };
            if d.abs() < w {
                (0.5 * PI * d / w).cos().powi(2)
            } else {
                0.0
            }
        })
    }

    pub fn uniform(grid: Grid1d) -> Self {
        let n = grid.cells;
        Self::from_masses(grid, vec![1.0; n])
    }

    pub fn density(&self, i: usize) -> f64 {
        self.mass[i] / self.grid.spacing()
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.grid.cell_of(x).map_or(0.0, |i| self.density(i))
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.grid.center(i))
            .sum()
    }

    /// `Σ m log(m/h)` against Lebesgue measure.
    pub fn entropy(&self) -> f64 {
        let h = self.grid.spacing();
        self.mass
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| m * (m / h).ln())
            .sum()
    }

    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(
            self.grid
                .centers()
                .into_iter()
                .map(|c| Vec3::new(c, 0.0, 0.0))
                .collect(),
            self.mass.clone(),
        )
    }

    /// Increasing linear pieces of the quantile function, one per charged cell.
    pub fn quantile_pieces(&self) -> Vec<QuantilePiece> {
        let mut out = Vec::new();
        let mut c = 0.0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > 0.0 {
                out.push(QuantilePiece {
                    u0: c,
                    u1: c + m,
                    x0: self.grid.edge(i),
                    x1: self.grid.edge(i + 1),
                    mass: m,
                    cell: i,
                });
            }
            c += m;
        }
        if let Some(last) = out.last_mut() {
            last.u1 = 1.0;
        }
        out
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let pieces = self.quantile_pieces();
        let k = pieces.partition_point(|p| p.u1 < u).min(pieces.len() - 1);
        pieces[k].eval(u)
    }
}

/// `u ↦ x0 + (x1 − x0)(u − u0)/mass` on `[u0, u1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantilePiece {
    pub u0: f64,
    pub u1: f64,
    pub x0: f64,
    pub x1: f64,
    /// cell mass, kept so the slope avoids differencing cumulative sums
    pub mass: f64,
    pub cell: usize,
}

impl QuantilePiece {
    pub fn slope(&self) -> f64 {
        (self.x1 - self.x0) / self.mass
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.x0 + self.slope() * (u - self.u0)
    }
}
