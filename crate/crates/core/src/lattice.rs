//! Truncated Fourier lattices and spectral fields.
//!
//! Points are stored lexicographically with digits `k_d + k_max`, so the
//! negation `k -> -k` maps index `i` to `len - 1 - i` and `k = 0` sits in
//! the middle. Indices `>= center` form the half-lattice on which work is
//! done; the other half follows by conjugation.

use serde::{Deserialize, Serialize};

use crate::error::{KineticError, Result};
use crate::grid::{VelocityGrid, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLattice {
    /// Number of Fourier directions: 3 on the torus, 2 in the channel.
    pub dim: usize,
    pub k_max: i64,
}

impl ModeLattice {
    pub fn new(dim: usize, k_max: i64) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(KineticError::InvalidArgument(format!("lattice dimension {dim} not in {{2, 3}}")));
        }
        if k_max < 0 {
            return Err(KineticError::InvalidArgument(format!("k_max = {k_max} < 0")));
        }
        Ok(Self { dim, k_max })
    }

    pub fn side(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `k = 0`.
    pub fn center(&self) -> usize {
        self.len() / 2
    }

    /// Lattice point as a velocity-aligned 3-vector. In two dimensions the
    /// point is `(0, k_2, k_3)` so that `k . v` only sees `v_2, v_3`.
    pub fn point(&self, idx: usize) -> [i64; 3] {
        let side = self.side();
        let mut out = [0i64; 3];
        let mut rest = idx;
        for d in (0..self.dim).rev() {
            out[3 - self.dim + d] = (rest % side) as i64 - self.k_max;
            rest /= side;
        }
        out
    }

    pub fn index(&self, k: [i64; 3]) -> Option<usize> {
        if self.dim == 2 && k[0] != 0 {
            return None;
        }
        let side = self.side();
        let mut idx = 0usize;
        for &kd in &k[3 - self.dim..] {
            if kd.abs() > self.k_max {
                return None;
            }
            idx = idx * side + (kd + self.k_max) as usize;
        }
        Some(idx)
    }

    #[inline]
    pub fn neg(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    pub fn half(&self) -> std::ops::Range<usize> {
        self.center()..self.len()
    }

    /// `<k> = sqrt(1 + |k|^2)`.
    pub fn bracket(&self, idx: usize) -> f64 {
        let k = self.point(idx);
        (1.0 + (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt()
    }
}

/// Map from lattice points to velocity fields, kept conjugate symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub lattice: ModeLattice,
    pub n_velocity: usize,
    pub modes: Vec<Vec<C64>>,
}

impl SpectralField {
    pub fn zeros(lattice: ModeLattice, grid: &VelocityGrid) -> Self {
        Self { lattice, n_velocity: grid.len(), modes: vec![vec![C64::new(0.0, 0.0); grid.len()]; lattice.len()] }
    }

    pub fn mode(&self, k: [i64; 3]) -> Option<&[C64]> {
        self.lattice.index(k).map(|i| self.modes[i].as_slice())
    }

    /// Overwrites mode `k` and its mirror `-k` with the conjugate.
    pub fn set_mode(&mut self, k: [i64; 3], values: &[C64]) -> Result<()> {
        let idx = self
            .lattice
            .index(k)
            .ok_or_else(|| KineticError::InvalidArgument(format!("mode {k:?} outside the truncation")))?;
        if values.len() != self.n_velocity {
            return Err(KineticError::DimensionMismatch { expected: self.n_velocity, got: values.len() });
        }
        let neg = self.lattice.neg(idx);
        self.modes[idx] = values.to_vec();
        self.modes[neg] = values.iter().map(|z| z.conj()).collect();
        if idx == neg {
            self.modes[idx].iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(())
    }

    /// Rebuilds the lower half from the half-lattice.
    pub fn complete_conjugates(&mut self) {
        for idx in self.lattice.half() {
            let neg = self.lattice.neg(idx);
            if neg == idx {
                self.modes[idx].iter_mut().for_each(|z| z.im = 0.0);
            } else {
                let c: Vec<C64> = self.modes[idx].iter().map(|z| z.conj()).collect();
                self.modes[neg] = c;
            }
        }
    }

    /// `max_k |f(-k) - conj f(k)|_inf`.
    pub fn conjugate_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.lattice.len() {
            let neg = self.lattice.neg(idx);
            for (a, b) in self.modes[idx].iter().zip(&self.modes[neg]) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    pub fn is_zero_mode(&self, idx: usize) -> bool {
        self.modes[idx].iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scale(&mut self, c: f64) {
        for m in &mut self.modes {
            m.iter_mut().for_each(|z| *z *= c);
        }
    }

    /// `sum_k |f(k)|_{L^2_v}`.
    pub fn l1k_l2v(&self, grid: &VelocityGrid) -> f64 {
        self.modes.iter().map(|m| grid.norm(m)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_and_negation() {
        for dim in [2, 3] {
            let lat = ModeLattice::new(dim, 2).unwrap();
            assert_eq!(lat.point(lat.center()), [0, 0, 0]);
            for idx in 0..lat.len() {
                let k = lat.point(idx);
                assert_eq!(lat.index(k), Some(idx));
                let n = lat.point(lat.neg(idx));
                assert_eq!(n, [-k[0], -k[1], -k[2]]);
            }
            assert_eq!(lat.index([0, 0, 3]), None);
        }
        assert_eq!(ModeLattice::new(2, 1).unwrap().index([1, 0, 0]), None);
        assert!(ModeLattice::new(4, 1).is_err());
    }

    #[test]
    fn conjugate_completion() {
        let grid = VelocityGrid::new(8, 4.0).unwrap();
        let lat = ModeLattice::new(3, 1).unwrap();
        let mut f = SpectralField::zeros(lat, &grid);
        let vals: Vec<C64> = (0..grid.len()).map(|i| C64::new(i as f64, 1.0)).collect();
        f.set_mode([1, 0, -1], &vals).unwrap();
        assert_eq!(f.mode([-1, 0, 1]).unwrap()[3], C64::new(3.0, -1.0));
        assert_eq!(f.conjugate_defect(), 0.0);
        f.modes[lat.center()] = vals.clone();
        assert!(f.conjugate_defect() > 0.0);
        f.complete_conjugates();
        assert_eq!(f.conjugate_defect(), 0.0);
    }
}
