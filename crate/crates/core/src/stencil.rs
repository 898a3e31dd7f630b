//! Five-point first-derivative stencils in the Maxwellian-twisted frame.
//!
//! For a grid function `g` we differentiate `phi = g / sqrt(mu)` and map back:
//! `Pi_i g = sqrt(mu) d_i (g / sqrt(mu))`, which in the continuum equals
//! `d_i g + v_i g / 2`. Because every stencil is exact on quartics, `Pi`
//! reproduces the derivative of `sqrt(mu) p(v)` exactly for polynomials `p`
//! of degree at most four, in particular for the collision invariants.
//!
//! Near the box edge the twist multiplies outward neighbours by
//! `exp((2 s h v_i + s^2 h^2) / 4)`. Each node therefore picks, among the
//! central, biased and one-sided five-point stencils that fit, the one with
//! the smallest twisted coefficient. The choice is mirrored exactly so the
//! operator commutes with `v_i -> -v_i`.

use crate::grid::{VelocityGrid, C64};

const CANDIDATES: [[i32; 5]; 5] = [
    [-2, -1, 0, 1, 2],
    [-3, -2, -1, 0, 1],
    [-1, 0, 1, 2, 3],
    [-4, -3, -2, -1, 0],
    [0, 1, 2, 3, 4],
];

/// Fornberg weights for the first derivative at 0 from the given offsets
/// (unit spacing).
pub fn derivative_weights(offsets: &[i32]) -> Vec<f64> {
    let m = offsets.len();
    // Solve the Vandermonde system sum_s w_s s^p = [p == 1] for p < m.
    let mut a = vec![vec![0.0; m + 1]; m];
    for p in 0..m {
        for (j, &s) in offsets.iter().enumerate() {
            a[p][j] = (s as f64).powi(p as i32);
        }
        a[p][m] = if p == 1 { 1.0 } else { 0.0 };
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..m).map(|r| a[r][m] / a[r][r]).collect()
}

/// Per-node twisted stencil along one axis: `offsets[i]` and `coeffs[i]`
/// give `(Pi g)[i] = sum_s coeffs[i][s] g[i + offsets[i][s]]`.
#[derive(Debug, Clone)]
pub struct AxisStencil {
    pub offsets: Vec<[i32; 5]>,
    pub coeffs: Vec<[f64; 5]>,
}

impl AxisStencil {
    pub fn new(axis: &[f64], h: f64) -> Self {
        let n = axis.len();
        let weights: Vec<Vec<f64>> = CANDIDATES.iter().map(|c| derivative_weights(c)).collect();
        let mut offsets = vec![[0i32; 5]; n];
        let mut coeffs = vec![[0.0; 5]; n];
        let twist = |x: f64, s: i32| ((2.0 * s as f64 * h * x + (s as f64 * h).powi(2)) / 4.0).exp();
        for i in 0..n.div_ceil(2) {
            let x = axis[i];
            let mut best: Option<(f64, usize)> = None;
            for (ci, cand) in CANDIDATES.iter().enumerate() {
                let fits = cand.iter().all(|&s| {
                    let j = i as i64 + s as i64;
                    j >= 0 && j < n as i64
                });
                if !fits {
                    continue;
                }
                let amp = cand
                    .iter()
                    .zip(&weights[ci])
                    .map(|(&s, w)| (w * twist(x, s)).abs())
                    .fold(0.0, f64::max);
                if best.is_none_or(|(b, _)| amp < b * (1.0 - 1e-12)) {
                    best = Some((amp, ci));
                }
            }
            let (_, ci) = best.expect("grid too small for a five-point stencil");
            let cand = CANDIDATES[ci];
            for s in 0..5 {
                offsets[i][s] = cand[s];
                coeffs[i][s] = weights[ci][s] * twist(x, cand[s]) / h;
                // mirror node n-1-i uses negated offsets and negated weights
                let m = n - 1 - i;
                offsets[m][s] = -cand[s];
                coeffs[m][s] = -coeffs[i][s];
            }
        }
        Self { offsets, coeffs }
    }
}

/// The three twisted derivative operators on a velocity grid.
#[derive(Debug, Clone)]
pub struct TwistedGradient {
    n: usize,
    stencil: AxisStencil,
    axis: Vec<f64>,
}

impl TwistedGradient {
    pub fn new(grid: &VelocityGrid) -> Self {
        Self { n: grid.n_per_dim, stencil: AxisStencil::new(&grid.axis, grid.spacing), axis: grid.axis.clone() }
    }

    fn stride(&self, dir: usize) -> usize {
        match dir {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    #[inline]
    fn coord(&self, idx: usize, dir: usize) -> usize {
        (idx / self.stride(dir)) % self.n
    }

    /// `out = Pi_dir g`.
    pub fn apply(&self, dir: usize, g: &[C64], out: &mut [C64]) {
        let st = self.stride(dir) as i64;
        for (idx, o) in out.iter_mut().enumerate() {
            let i = self.coord(idx, dir);
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..5 {
                let j = (idx as i64 + self.stencil.offsets[i][s] as i64 * st) as usize;
                acc += g[j] * self.stencil.coeffs[i][s];
            }
            *o = acc;
        }
    }

    /// `out += Pi_dir^T g` (transpose with respect to the uniform weights).
    pub fn apply_transpose_add(&self, dir: usize, g: &[C64], out: &mut [C64]) {
        let st = self.stride(dir) as i64;
        for (idx, &gv) in g.iter().enumerate() {
            let i = self.coord(idx, dir);
            for s in 0..5 {
                let j = (idx as i64 + self.stencil.offsets[i][s] as i64 * st) as usize;
                out[j] += gv * self.stencil.coeffs[i][s];
            }
        }
    }

    /// `[Pi_1 g, Pi_2 g, Pi_3 g]`.
    pub fn gradient(&self, g: &[C64]) -> [Vec<C64>; 3] {
        std::array::from_fn(|d| {
            let mut out = vec![C64::new(0.0, 0.0); g.len()];
            self.apply(d, g, &mut out);
            out
        })
    }

    /// `Pi^- g = Pi g - v g`, the twisted form of `d g - v g / 2`.
    pub fn gradient_minus(&self, g: &[C64]) -> [Vec<C64>; 3] {
        let mut out = self.gradient(g);
        for (d, comp) in out.iter_mut().enumerate() {
            for (idx, c) in comp.iter_mut().enumerate() {
                *c -= g[idx] * self.axis[self.coord(idx, d)];
            }
        }
        out
    }

    /// Plain derivative `d g = Pi g - v g / 2`.
    pub fn derivative(&self, g: &[C64]) -> [Vec<C64>; 3] {
        let mut out = self.gradient(g);
        for (d, comp) in out.iter_mut().enumerate() {
            for (idx, c) in comp.iter_mut().enumerate() {
                *c -= g[idx] * (0.5 * self.axis[self.coord(idx, d)]);
            }
        }
        out
    }

    /// `sum_d Pi_d^T J_d`.
    pub fn divergence_transpose(&self, j: &[Vec<C64>; 3]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); j[0].len()];
        for (d, comp) in j.iter().enumerate() {
            self.apply_transpose_add(d, comp, &mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::complexify;

    #[test]
    fn fornberg_central() {
        let w = derivative_weights(&[-2, -1, 0, 1, 2]);
        let exact = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(exact) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_on_weighted_quartics() {
        let g = VelocityGrid::new(12, 8.0).unwrap();
        let tg = TwistedGradient::new(&g);
        let sm = g.sqrt_maxwellian();
        // f = sqrt(mu) (v1^4 + v2 v3^2), d f = sqrt(mu)(dp - v p / 2)
        let p = |v: &[f64; 3]| v[0].powi(4) + v[1] * v[2] * v[2];
        let dp = |v: &[f64; 3]| [4.0 * v[0].powi(3), v[2] * v[2], 2.0 * v[1] * v[2]];
        let f: Vec<f64> = g.nodes.iter().zip(&sm).map(|(v, m)| m * p(v)).collect();
        let d = tg.derivative(&complexify(&f));
        for (idx, v) in g.nodes.iter().enumerate() {
            for dir in 0..3 {
                let exact = sm[idx] * (dp(v)[dir] - 0.5 * v[dir] * p(v));
                assert!((d[dir][idx].re - exact).abs() < 1e-9 * (1.0 + exact.abs()), "{idx} {dir}");
            }
        }
    }

    #[test]
    fn mirror_equivariance() {
        let g = VelocityGrid::new(12, 8.0).unwrap();
        let st = AxisStencil::new(&g.axis, g.spacing);
        let n = g.n_per_dim;
        for i in 0..n {
            for s in 0..5 {
                assert_eq!(st.offsets[i][s], -st.offsets[n - 1 - i][s]);
                assert_eq!(st.coeffs[i][s], -st.coeffs[n - 1 - i][s]);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let g = VelocityGrid::new(8, 6.0).unwrap();
        let tg = TwistedGradient::new(&g);
        let a: Vec<C64> = (0..g.len()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
        let b: Vec<C64> = (0..g.len()).map(|i| C64::new((i as f64 * 0.11).cos(), 0.3)).collect();
        for d in 0..3 {
            let mut pa = vec![C64::new(0.0, 0.0); g.len()];
            tg.apply(d, &a, &mut pa);
            let mut ptb = vec![C64::new(0.0, 0.0); g.len()];
            tg.apply_transpose_add(d, &b, &mut ptb);
            let lhs: C64 = pa.iter().zip(&b).map(|(x, y)| x * y).sum();
            let rhs: C64 = a.iter().zip(&ptb).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        }
    }
}
