//! Uniform grids and discrete fields.
//!
//! Periodic grids carry `n` nodes per side at `x = origin + k·h`, `k = 0..n`.
//! Dirichlet grids carry `n + 1` nodes per side including both boundary faces.
//! Field data is component-major: component `c` occupies `data[c·N .. (c+1)·N]`.
//!
//! Edge fields store the value for the edge from node `p` to `p + e_i` at node
//! index `p`, in component `i·c + a`. On Dirichlet grids the slot for `p_i = n`
//! has no edge and stays zero.

mod apf;
pub mod fft;
mod norms;
mod ops;
mod smoothing;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use apf::{read_apf, write_apf, ApfHeader};
pub use norms::{h1_norm, l2_norm, mean, windowed_norm, windowed_norm_where};
pub use ops::{centered_derivative, divergence, edge_to_node, gradient, roll};
pub use smoothing::{cutoff, heat_smooth, mollifier_weights, mollify};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Node,
    Edge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    n: usize,
    side: T,
    origin: T,
    boundary: Boundary,
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, n: usize, side: T, boundary: Boundary) -> Result<Self> {
        Self::with_origin(dim, n, side, T::zero(), boundary)
    }

    pub fn with_origin(dim: usize, n: usize, side: T, origin: T, boundary: Boundary) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!("n = {n} < 4")));
        }
        if !(side > T::zero()) || !side.is_finite() {
            return Err(Error::InvalidGrid("box side must be positive".into()));
        }
        Ok(Self { dim, n, side, origin, boundary })
    }

    pub fn periodic(dim: usize, n: usize, side: T) -> Result<Self> {
        Self::new(dim, n, side, Boundary::Periodic)
    }

    /// Dirichlet grid on the unit box with `n` cells per side.
    pub fn unit_dirichlet(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, T::one(), Boundary::Dirichlet)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn h(&self) -> T {
        self.side / T::from_count(self.n)
    }

    /// Nodes per side (`n` periodic, `n + 1` Dirichlet).
    pub fn nodes_per_side(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::Dirichlet => self.n + 1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_side().pow(self.dim as u32)
    }

    /// Stride of axis `k` in the linear node index (axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes_per_side().pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let s = self.nodes_per_side();
        let mut out = [0usize; 3];
        for k in (0..self.dim).rev() {
            out[k] = idx % s;
            idx /= s;
        }
        out
    }

    pub fn linear_index(&self, p: &[usize]) -> usize {
        let s = self.nodes_per_side();
        p[..self.dim].iter().fold(0, |acc, &v| acc * s + v)
    }

    /// Physical position of a node.
    pub fn position(&self, idx: usize) -> [T; 3] {
        let p = self.multi_index(idx);
        let h = self.h();
        let mut x = [T::zero(); 3];
        for k in 0..self.dim {
            x[k] = self.origin + T::from_count(p[k]) * h;
        }
        x
    }

    /// Midpoint of the edge from node `idx` along `axis`.
    pub fn edge_midpoint(&self, idx: usize, axis: usize) -> [T; 3] {
        let mut x = self.position(idx);
        x[axis] = x[axis] + T::lit(0.5) * self.h();
        x
    }

    /// Neighbour index along `axis` offset by `delta`, or `None` outside a Dirichlet grid.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, delta: isize) -> Option<usize> {
        let s = self.nodes_per_side() as isize;
        let stride = self.stride(axis);
        let coord = ((idx / stride) % s as usize) as isize;
        let mut c = coord + delta;
        match self.boundary {
            Boundary::Periodic => {
                c = c.rem_euclid(s);
            }
            Boundary::Dirichlet => {
                if c < 0 || c >= s {
                    return None;
                }
            }
        }
        Some((idx as isize + (c - coord) * stride as isize) as usize)
    }

    /// True when the node lies on the boundary of a Dirichlet grid.
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        if self.is_periodic() {
            return false;
        }
        let p = self.multi_index(idx);
        p[..self.dim].iter().any(|&c| c == 0 || c == self.n)
    }

    /// Whether the edge from `idx` along `axis` exists.
    #[inline]
    pub fn has_edge(&self, idx: usize, axis: usize) -> bool {
        self.is_periodic() || (idx / self.stride(axis)) % self.nodes_per_side() < self.n
    }

    /// Distance from a node to the boundary of a Dirichlet box.
    pub fn boundary_distance(&self, idx: usize) -> T {
        let p = self.multi_index(idx);
        let h = self.h();
        (0..self.dim).map(|k| T::from_count(p[k].min(self.n - p[k])) * h).fold(T::infinity(), T::min)
    }

    /// Quadrature weight of a node (trapezoid; boundary faces halved on Dirichlet grids).
    pub fn node_weight(&self, idx: usize) -> T {
        let h = self.h();
        let mut w = h.powi(self.dim as i32);
        if !self.is_periodic() {
            let p = self.multi_index(idx);
            for &c in &p[..self.dim] {
                if c == 0 || c == self.n {
                    w = w * T::lit(0.5);
                }
            }
        }
        w
    }

    /// Volume of the box.
    pub fn volume(&self) -> T {
        self.side.powi(self.dim as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField<T> {
    grid: Grid<T>,
    components: usize,
    location: Location,
    data: Vec<T>,
}

impl<T: Real> DiscreteField<T> {
    pub fn zeros(grid: &Grid<T>, components: usize, location: Location) -> Self {
        let len = components * grid.num_nodes();
        Self { grid: grid.clone(), components, location, data: vec![T::zero(); len] }
    }

    pub fn from_data(grid: &Grid<T>, components: usize, location: Location, data: Vec<T>) -> Result<Self> {
        let expected = components * grid.num_nodes();
        if data.len() != expected {
            return Err(Error::RankMismatch { expected, found: data.len() });
        }
        Ok(Self { grid: grid.clone(), components, location, data })
    }

    /// Samples a scalar function at the nodes.
    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let d = grid.dim();
        let data = (0..grid.num_nodes()).map(|i| f(&grid.position(i)[..d])).collect();
        Self { grid: grid.clone(), components: 1, location: Location::Node, data }
    }

    /// Stacks scalar node fields into one multi-component field.
    pub fn stack(parts: &[&DiscreteField<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::arg("nothing to stack"))?;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        let mut components = 0;
        for p in parts {
            if p.grid != first.grid || p.location != first.location {
                return Err(Error::arg("stacked fields must share grid and location"));
            }
            components += p.components;
            data.extend_from_slice(&p.data);
        }
        Ok(Self { grid: first.grid.clone(), components, location: first.location, data })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[T] {
        let n = self.grid.num_nodes();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.grid.num_nodes();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copies out one component as a scalar field.
    pub fn extract(&self, c: usize) -> Self {
        Self { grid: self.grid.clone(), components: 1, location: self.location, data: self.component(c).to_vec() }
    }

    /// Copies out components `first..first + count`.
    pub fn extract_range(&self, first: usize, count: usize) -> Self {
        let n = self.grid.num_nodes();
        Self {
            grid: self.grid.clone(),
            components: count,
            location: self.location,
            data: self.data[first * n..(first + count) * n].to_vec(),
        }
    }

    /// Same shape with new data.
    pub fn with_data(&self, data: Vec<T>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Self { data, ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.data.len() != other.data.len() {
            return Err(Error::RankMismatch { expected: self.data.len(), found: other.data.len() });
        }
        Ok(self.with_data(self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm over components at every node.
    pub fn pointwise_magnitude(&self) -> Vec<T> {
        let n = self.grid.num_nodes();
        (0..n)
            .map(|i| {
                (0..self.components)
                    .map(|c| {
                        let v = self.data[c * n + i];
                        v * v
                    })
                    .sum::<T>()
                    .sqrt()
            })
            .collect()
    }

    /// Weighted inner product `Σ w_p a(p)·b(p)` over nodes and components.
    pub fn inner(&self, other: &Self) -> T {
        let n = self.grid.num_nodes();
        let mut acc = T::zero();
        for c in 0..self.components {
            for i in 0..n {
                acc = acc + self.grid.node_weight(i) * self.data[c * n + i] * other.data[c * n + i];
            }
        }
        acc
    }

    pub fn cast<U: Real>(&self) -> DiscreteField<U> {
        let g = &self.grid;
        DiscreteField {
            grid: Grid {
                dim: g.dim,
                n: g.n,
                side: U::lit(g.side.as_f64()),
                origin: U::lit(g.origin.as_f64()),
                boundary: g.boundary,
            },
            components: self.components,
            location: self.location,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}
