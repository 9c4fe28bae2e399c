//! Uniform grids, dyadic cubes and the node-based field types.
//!
//! Nodes are numbered row-major with axis 0 slowest. Physical positions
//! are `index * spacing`; on periodic grids all distances are measured on
//! the torus.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment for the discrete stand-in of ℝⁿ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    sizes: Vec<usize>,
    spacing: f64,
    boundary: Boundary,
}

impl Grid {
    pub fn new(sizes: &[usize], spacing: f64, boundary: Boundary) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {}", sizes.len())));
        }
        if let Some(&s) = sizes.iter().find(|&&s| s < 8) {
            return Err(Error::InvalidGrid(format!("every size must be >= 8, got {s}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { sizes: sizes.to_vec(), spacing, boundary })
    }

    /// 1D grid on a domain of unit length.
    pub fn unit_1d(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&[n], 1.0 / n as f64, boundary)
    }

    /// Square 2D grid on the unit square.
    pub fn unit_2d(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&[n, n], 1.0 / n as f64, boundary)
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Total node count N.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one node cell, hᵈ.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Physical side length of the domain along `axis`.
    pub fn side(&self, axis: usize) -> f64 {
        self.sizes[axis] as f64 * self.spacing
    }

    pub fn max_side(&self) -> f64 {
        (0..self.dim()).map(|a| self.side(a)).fold(0.0, f64::max)
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [node, 0]
        } else {
            [node / self.sizes[1], node % self.sizes[1]]
        }
    }

    pub fn node(&self, idx: [usize; 2]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] * self.sizes[1] + idx[1]
        }
    }

    /// Node reached from `node` by the integer offset `delta`; `None` when
    /// the step leaves a Dirichlet domain.
    pub fn shift(&self, node: usize, delta: [isize; 2]) -> Option<usize> {
        let idx = self.multi_index(node);
        let mut out = [0usize; 2];
        for axis in 0..self.dim() {
            let n = self.sizes[axis] as isize;
            let j = idx[axis] as isize + delta[axis];
            out[axis] = match self.boundary {
                Boundary::Periodic => j.rem_euclid(n) as usize,
                Boundary::Dirichlet => {
                    if j < 0 || j >= n {
                        return None;
                    }
                    j as usize
                }
            };
        }
        Some(self.node(out))
    }

    /// Signed separation `b - a` along `axis` in node units (minimal image on
    /// periodic grids).
    pub fn axis_delta(&self, a: f64, b: f64, axis: usize) -> f64 {
        let d = b - a;
        match self.boundary {
            Boundary::Periodic => {
                let n = self.sizes[axis] as f64;
                d - n * (d / n).round()
            }
            Boundary::Dirichlet => d,
        }
    }

    /// Physical distance between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        let mut s = 0.0;
        for axis in 0..self.dim() {
            let d = self.axis_delta(ia[axis] as f64, ib[axis] as f64, axis);
            s += d * d;
        }
        s.sqrt() * self.spacing
    }

    /// Distinct lattice offsets, each paired with its physical length, that
    /// reach every node of the grid exactly once. Sorted by length.
    pub fn offsets(&self) -> Vec<([isize; 2], f64)> {
        let range = |axis: usize| -> Vec<isize> {
            if axis >= self.dim() {
                return vec![0];
            }
            let n = self.sizes[axis] as isize;
            match self.boundary {
                Boundary::Periodic => (-((n - 1) / 2)..=n / 2).collect(),
                Boundary::Dirichlet => (-(n - 1)..=n - 1).collect(),
            }
        };
        let mut out = Vec::new();
        for &a in &range(0) {
            for &b in &range(1) {
                let r = ((a * a + b * b) as f64).sqrt() * self.spacing;
                out.push(([a, b], r));
            }
        }
        out.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        out
    }

    /// Offsets with length strictly below `radius`.
    pub fn offsets_within(&self, radius: f64) -> Vec<[isize; 2]> {
        self.offsets().into_iter().take_while(|(_, r)| *r < radius).map(|(d, _)| d).collect()
    }

    pub fn coordinates(&self, node: usize) -> [f64; 2] {
        let idx = self.multi_index(node);
        [idx[0] as f64 * self.spacing, idx[1] as f64 * self.spacing]
    }
}

/// Axis-aligned cube. The center is kept in node-index units so that cubes
/// with an even node count per side (center between nodes) are exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    /// Center in node-index units, one entry per axis (second unused in 1D).
    pub center: [f64; 2],
    /// Side length in units of the spacing.
    pub side_nodes: f64,
}

impl Cube {
    /// Aligned cube whose lowest node is `corner`, with `count` nodes per side.
    pub fn from_corner(corner: [usize; 2], count: usize) -> Self {
        let half = (count as f64 - 1.0) / 2.0;
        Self { center: [corner[0] as f64 + half, corner[1] as f64 + half], side_nodes: count as f64 }
    }

    /// Cube covering every node of `grid`.
    pub fn whole(grid: &Grid) -> Self {
        let n = grid.sizes().iter().copied().max().unwrap_or(1);
        let mut c = Self::from_corner([0, 0], n);
        if grid.dim() == 2 {
            c.center[1] = (grid.sizes()[1] as f64 - 1.0) / 2.0;
        }
        c.center[0] = (grid.sizes()[0] as f64 - 1.0) / 2.0;
        c
    }

    pub fn sidelength(&self, grid: &Grid) -> f64 {
        self.side_nodes * grid.spacing()
    }

    /// Physical volume |Q| = ℓ(Q)ᵈ.
    pub fn volume(&self, grid: &Grid) -> f64 {
        self.sidelength(grid).powi(grid.dim() as i32)
    }

    pub fn contains(&self, grid: &Grid, node: usize) -> bool {
        let idx = grid.multi_index(node);
        let reach = (self.side_nodes - 1.0) / 2.0 + 1e-9;
        (0..grid.dim()).all(|axis| {
            let n = grid.sizes()[axis] as f64;
            if grid.is_periodic() && self.side_nodes >= n {
                return true;
            }
            grid.axis_delta(self.center[axis], idx[axis] as f64, axis).abs() <= reach
        })
    }

    pub fn nodes(&self, grid: &Grid) -> Vec<usize> {
        (0..grid.len()).filter(|&x| self.contains(grid, x)).collect()
    }

    /// 2ⁱQ: same center, side multiplied by 2ⁱ.
    pub fn dilate(&self, i: u32) -> Self {
        Self { center: self.center, side_nodes: self.side_nodes * 2f64.powi(i as i32) }
    }

    /// Nodes of the annulus S_i(Q): S_0 = Q and S_i = 2ⁱQ \ 2ⁱ⁻¹Q.
    pub fn annulus(&self, grid: &Grid, i: u32) -> Vec<usize> {
        if i == 0 {
            return self.nodes(grid);
        }
        let outer = self.dilate(i);
        let inner = self.dilate(i - 1);
        (0..grid.len()).filter(|&x| outer.contains(grid, x) && !inner.contains(grid, x)).collect()
    }

    /// Every annulus up to the first dilate that covers the grid; later
    /// annuli are empty.
    pub fn annuli(&self, grid: &Grid) -> Vec<Vec<usize>> {
        let mut out = vec![self.nodes(grid)];
        let mut i = 0;
        loop {
            let covered = (0..grid.len()).all(|x| self.dilate(i).contains(grid, x));
            if covered {
                break;
            }
            i += 1;
            out.push(self.annulus(grid, i));
        }
        out
    }
}

/// Complex values, one per grid node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<c64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<c64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![c64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: &Grid, c: c64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid.clone(), values.iter().map(|&v| c64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(usize) -> c64) -> Self {
        Self { grid: grid.clone(), values: (0..grid.len()).map(&mut f).collect() }
    }

    /// Indicator of a node set.
    pub fn indicator(grid: &Grid, nodes: &[usize]) -> Self {
        let mut f = Self::zeros(grid);
        for &x in nodes {
            f.values[x] = c64::new(1.0, 0.0);
        }
        f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, c: c64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, op: impl Fn(c64, c64) -> c64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
        }
    }

    /// Discrete mean over the grid.
    pub fn mean(&self) -> c64 {
        self.values.iter().sum::<c64>() / self.values.len() as f64
    }

    pub fn remove_mean(&self) -> Self {
        let m = self.mean();
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v - m).collect() }
    }

    /// ⟨f, g⟩ = Σ hᵈ f ḡ.
    pub fn inner(&self, other: &Self) -> c64 {
        let vol = self.grid.cell_volume();
        self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<c64>() * vol
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_lp(2.0)
    }

    pub fn norm_l1(&self) -> f64 {
        self.norm_lp(1.0)
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        lp_norm(&self.grid, &self.values, None, p)
    }

    /// L^p norm restricted to a node subset.
    pub fn norm_lp_on(&self, nodes: &[usize], p: f64) -> f64 {
        lp_norm(&self.grid, &self.values, Some(nodes), p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pointwise moduli |f(x)|.
    pub fn abs_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// One row per node: `node,x[,y],re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.grid.dim() == 1 { "node,x,re,im\n" } else { "node,x,y,re,im\n" });
        for (i, v) in self.values.iter().enumerate() {
            let c = self.grid.coordinates(i);
            let pos = if self.grid.dim() == 1 { format!("{}", c[0]) } else { format!("{},{}", c[0], c[1]) };
            out.push_str(&format!("{i},{pos},{},{}\n", v.re, v.im));
        }
        out
    }
}

pub(crate) fn lp_norm(grid: &Grid, values: &[c64], nodes: Option<&[usize]>, p: f64) -> f64 {
    let vol = grid.cell_volume();
    let iter: Box<dyn Iterator<Item = f64>> = match nodes {
        Some(ns) => Box::new(ns.iter().map(|&x| values[x].norm())),
        None => Box::new(values.iter().map(|v| v.norm())),
    };
    if p.is_infinite() {
        return iter.fold(0.0, f64::max);
    }
    if p == 2.0 {
        return (iter.map(|a| a * a).sum::<f64>() * vol).sqrt();
    }
    (iter.map(|a| a.powf(p)).sum::<f64>() * vol).powf(1.0 / p)
}

/// One complex component per axis per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<c64>>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), components: vec![vec![c64::new(0.0, 0.0); grid.len()]; grid.dim()] }
    }

    /// Pointwise Euclidean magnitude |v(x)|.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|x| self.components.iter().map(|c| c[x].norm_sqr()).sum::<f64>().sqrt()).collect()
    }

    pub fn norm_l1(&self) -> f64 {
        self.magnitude().iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.magnitude().iter().map(|m| m * m).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn norm_l2_on(&self, nodes: &[usize]) -> f64 {
        let mag = self.magnitude();
        (nodes.iter().map(|&x| mag[x] * mag[x]).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        }
    }
}
