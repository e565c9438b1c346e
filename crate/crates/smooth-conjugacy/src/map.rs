//! Closed-form measure-preserving maps of `T × [0,1]^(d−1)`. Coordinate 0 is
//! the circle and is kept in `[0, 1)`.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bump::Plateau;

/// An invertible map with a closed-form inverse.
pub trait Diffeo: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;
    fn apply(&self, x: &mut [f64]);
    fn apply_inv(&self, x: &mut [f64]);
    /// Coordinates that may change.
    fn moves(&self) -> BTreeSet<usize>;
    /// Coordinates the change depends on.
    fn depends(&self) -> BTreeSet<usize>;
}

pub fn wrap(z: f64) -> f64 {
    let w = z.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Signed circle difference `a − b` in `[−1/2, 1/2)`.
pub fn circle_diff(a: f64, b: f64) -> f64 {
    (a - b + 0.5).rem_euclid(1.0) - 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub dim: usize,
}

impl Diffeo for Identity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, _x: &mut [f64]) {}
    fn apply_inv(&self, _x: &mut [f64]) {}
    fn moves(&self) -> BTreeSet<usize> {
        BTreeSet::new()
    }
    fn depends(&self) -> BTreeSet<usize> {
        BTreeSet::new()
    }
}

/// `S_α`: `z ↦ z + α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub dim: usize,
    pub alpha: f64,
}

impl Diffeo for Rotation {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &mut [f64]) {
        x[0] = wrap(x[0] + self.alpha);
    }
    fn apply_inv(&self, x: &mut [f64]) {
        x[0] = wrap(x[0] - self.alpha);
    }
    fn moves(&self) -> BTreeSet<usize> {
        [0].into()
    }
    fn depends(&self) -> BTreeSet<usize> {
        [0].into()
    }
}

/// Fibered rotation `z ↦ z + amount · φ(x)` with `φ` a plateau in the cube
/// coordinates listed in `coords` (its box has one side per entry).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberedRotation {
    pub dim: usize,
    pub amount: f64,
    pub coords: Vec<usize>,
    pub window: Plateau,
}

impl FiberedRotation {
    fn shift(&self, x: &[f64]) -> f64 {
        let sub: Vec<f64> = self.coords.iter().map(|&k| x[k]).collect();
        self.amount * self.window.eval(&sub)
    }
}

impl Diffeo for FiberedRotation {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &mut [f64]) {
        let s = self.shift(x);
        if s != 0.0 {
            x[0] = wrap(x[0] + s);
        }
    }
    fn apply_inv(&self, x: &mut [f64]) {
        let s = self.shift(x);
        if s != 0.0 {
            x[0] = wrap(x[0] - s);
        }
    }
    fn moves(&self) -> BTreeSet<usize> {
        [0].into()
    }
    fn depends(&self) -> BTreeSet<usize> {
        self.coords.iter().copied().collect()
    }
}

/// `maps[last] ∘ … ∘ maps[0]`.
#[derive(Debug, Clone)]
pub struct Composition {
    pub dim: usize,
    pub maps: Vec<Arc<dyn Diffeo>>,
}

impl Composition {
    pub fn new(dim: usize, maps: Vec<Arc<dyn Diffeo>>) -> Self {
        Composition { dim, maps }
    }
}

impl Diffeo for Composition {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &mut [f64]) {
        for m in &self.maps {
            m.apply(x);
        }
    }
    fn apply_inv(&self, x: &mut [f64]) {
        for m in self.maps.iter().rev() {
            m.apply_inv(x);
        }
    }
    fn moves(&self) -> BTreeSet<usize> {
        self.maps.iter().flat_map(|m| m.moves()).collect()
    }
    fn depends(&self) -> BTreeSet<usize> {
        self.maps
            .iter()
            .flat_map(|m| m.depends().into_iter().chain(m.moves()))
            .collect()
    }
}

/// The inverse of a map, as a map.
#[derive(Debug, Clone)]
pub struct Inverse(pub Arc<dyn Diffeo>);

impl Diffeo for Inverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &mut [f64]) {
        self.0.apply_inv(x)
    }
    fn apply_inv(&self, x: &mut [f64]) {
        self.0.apply(x)
    }
    fn moves(&self) -> BTreeSet<usize> {
        self.0.moves()
    }
    fn depends(&self) -> BTreeSet<usize> {
        self.0.depends()
    }
}

pub fn image(map: &dyn Diffeo, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    map.apply(&mut y);
    y
}

pub fn preimage(map: &dyn Diffeo, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    map.apply_inv(&mut y);
    y
}
