//! Hypercubic lattice geometry.
//!
//! Sites are addressed by a flat index in row-major order over their
//! coordinates (the last coordinate varies fastest). The lattice spacing is
//! one, so Euclidean distances are measured directly in coordinate units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `d`-dimensional hypercubic lattice of side `r` with `q` levels per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: u32,
    pub r: usize,
    pub q: usize,
}

impl LatticeSpec {
    pub fn new(d: u32, r: usize, q: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if r == 0 {
            return Err(Error::InvalidArgument("side length must be at least 1".into()));
        }
        if q < 2 {
            return Err(Error::InvalidArgument(format!(
                "sites need at least 2 levels, got q = {q}"
            )));
        }
        let spec = LatticeSpec { d, r, q };
        spec.site_count()?;
        Ok(spec)
    }

    /// Total number of sites `r^d`.
    pub fn site_count(&self) -> Result<usize> {
        self.r
            .checked_pow(self.d)
            .ok_or_else(|| Error::InvalidArgument(format!("{}^{} sites overflow", self.r, self.d)))
    }

    /// The region covering the whole lattice.
    pub fn full_region(&self) -> Region {
        Region {
            anchor: vec![0; self.d as usize],
            side: self.r,
        }
    }

    pub fn coords_of(&self, site: usize) -> Result<Vec<usize>> {
        let n = self.site_count()?;
        if site >= n {
            return Err(Error::InvalidSite(format!("site {site} outside lattice of {n} sites")));
        }
        let mut coords = vec![0; self.d as usize];
        let mut rest = site;
        for c in coords.iter_mut().rev() {
            *c = rest % self.r;
            rest /= self.r;
        }
        Ok(coords)
    }

    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.d as usize {
            return Err(Error::InvalidSite(format!(
                "expected {} coordinates, got {}",
                self.d,
                coords.len()
            )));
        }
        let mut idx = 0usize;
        for &c in coords {
            if c >= self.r {
                return Err(Error::InvalidSite(format!("coordinate {c} outside side {}", self.r)));
            }
            idx = idx * self.r + c;
        }
        Ok(idx)
    }

    /// Euclidean distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        let ca = self.coords_of(a)?;
        let cb = self.coords_of(b)?;
        Ok(ca
            .iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let diff = x as f64 - y as f64;
                diff * diff
            })
            .sum::<f64>()
            .sqrt())
    }
}

/// An axis-aligned subcube given by its lowest corner and side length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub anchor: Vec<usize>,
    pub side: usize,
}

impl Region {
    pub fn new(anchor: Vec<usize>, side: usize) -> Result<Self> {
        if anchor.is_empty() {
            return Err(Error::InvalidArgument("region needs at least one dimension".into()));
        }
        if side == 0 {
            return Err(Error::InvalidArgument("region side must be positive".into()));
        }
        Ok(Region { anchor, side })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn site_count(&self) -> usize {
        self.side.pow(self.dim() as u32)
    }

    pub fn contains_coords(&self, coords: &[usize]) -> bool {
        coords.len() == self.dim()
            && coords
                .iter()
                .zip(&self.anchor)
                .all(|(&c, &a)| c >= a && c < a + self.side)
    }

    pub fn contains_site(&self, lattice: &LatticeSpec, site: usize) -> bool {
        lattice
            .coords_of(site)
            .map(|c| self.contains_coords(&c))
            .unwrap_or(false)
    }

    /// Coordinates of every site, in lexicographic order.
    pub fn coords(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        let count = self.site_count();
        let mut out = Vec::with_capacity(count);
        let mut offset = vec![0usize; d];
        for _ in 0..count {
            out.push(self.anchor.iter().zip(&offset).map(|(a, o)| a + o).collect());
            for k in (0..d).rev() {
                offset[k] += 1;
                if offset[k] < self.side {
                    break;
                }
                offset[k] = 0;
            }
        }
        out
    }

    /// Flat lattice index of the anchor corner.
    pub fn anchor_site(&self, lattice: &LatticeSpec) -> Result<usize> {
        lattice.index_of(&self.anchor)
    }

    /// Largest distance between any two points of the cube, `side * sqrt(d)`.
    pub fn euclidean_diameter_bound(&self) -> f64 {
        self.side as f64 * (self.dim() as f64).sqrt()
    }

    /// Split into `m^d` subcubes of side `side / m`, ordered lexicographically
    /// by anchor.
    pub fn partition(&self, m: usize) -> Result<Vec<Region>> {
        if m == 0 || !self.side.is_multiple_of(m) {
            return Err(Error::Divisibility { side: self.side, m });
        }
        let sub = self.side / m;
        let grid = Region {
            anchor: vec![0; self.dim()],
            side: m,
        };
        Ok(grid
            .coords()
            .into_iter()
            .map(|cell| Region {
                anchor: self
                    .anchor
                    .iter()
                    .zip(&cell)
                    .map(|(a, c)| a + c * sub)
                    .collect(),
                side: sub,
            })
            .collect())
    }

    /// Like [`Region::partition`], but the subcube containing `site` is moved
    /// to the front. The remaining subcubes keep their lexicographic order.
    pub fn partition_around(&self, m: usize, lattice: &LatticeSpec, site: usize) -> Result<Vec<Region>> {
        let coords = lattice.coords_of(site)?;
        if !self.contains_coords(&coords) {
            return Err(Error::InvalidSite(format!("site {site} is not inside the region")));
        }
        let mut parts = self.partition(m)?;
        let pos = parts
            .iter()
            .position(|p| p.contains_coords(&coords))
            .expect("partition covers the parent");
        let first = parts.remove(pos);
        parts.insert(0, first);
        Ok(parts)
    }

    pub fn check_within(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.dim() != lattice.d as usize {
            return Err(Error::OutOfBounds(format!(
                "region has {} dimensions, lattice has {}",
                self.dim(),
                lattice.d
            )));
        }
        if self.anchor.iter().any(|&a| a + self.side > lattice.r) {
            return Err(Error::OutOfBounds(format!(
                "region at {:?} with side {} exceeds lattice side {}",
                self.anchor, self.side, lattice.r
            )));
        }
        Ok(())
    }
}

/// Flat indices of the region's sites, ascending.
pub fn site_mask(region: &Region, lattice: &LatticeSpec) -> Result<Vec<usize>> {
    region.check_within(lattice)?;
    region.coords().iter().map(|c| lattice.index_of(c)).collect()
}
