//! The 48 signed axis permutations that map a cell-centred velocity grid to
//! itself. They are used to assemble rotation-equivariant discretizations
//! from a fundamental set of rows.

use crate::error::{KineticError, Result};
use crate::grid::VelocityGrid;

/// `(R v)_i = sign_i * v_{perm_i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeSymmetry {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

impl CubeSymmetry {
    pub fn all() -> Vec<CubeSymmetry> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(48);
        for perm in PERMS {
            for bits in 0..8u8 {
                out.push(CubeSymmetry { perm, flip: [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0] });
            }
        }
        out
    }

    /// Grid index of `R v` for the node with index `idx`.
    #[inline]
    pub fn apply_index(&self, idx: usize, n: usize) -> usize {
        let c = [idx / (n * n), (idx / n) % n, idx % n];
        let t: [usize; 3] = std::array::from_fn(|i| {
            let x = c[self.perm[i]];
            if self.flip[i] {
                n - 1 - x
            } else {
                x
            }
        });
        (t[0] * n + t[1]) * n + t[2]
    }

    /// Index table `idx -> R idx`.
    pub fn index_table(&self, n: usize) -> Vec<usize> {
        (0..n * n * n).map(|i| self.apply_index(i, n)).collect()
    }
}

/// Rows with `v_1 >= v_2 >= v_3 > 0`: one representative per orbit.
pub fn fundamental_rows(grid: &VelocityGrid) -> Vec<usize> {
    let n = grid.n_per_dim;
    let mut out = Vec::new();
    for i in n / 2..n {
        for j in n / 2..=i {
            for k in n / 2..=j {
                out.push(grid.index(i, j, k));
            }
        }
    }
    out
}

/// Number of group elements fixing the node.
pub fn stabilizer_size(idx: usize, tables: &[Vec<usize>]) -> usize {
    tables.iter().filter(|t| t[idx] == idx).count()
}

/// Signed permutation of a field family under every symmetry:
/// `action[r][a] = (b, s)` with `e_a(R v) = s e_b(v)`.
pub type FamilyAction = Vec<Vec<(usize, f64)>>;

/// Finds how a family of real fields transforms under the cube group.
/// Fails unless the family is closed up to sign.
pub fn family_action(fields: &[&[f64]], tables: &[Vec<usize>]) -> Result<FamilyAction> {
    let scale: Vec<f64> = fields.iter().map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut action = Vec::with_capacity(tables.len());
    for t in tables {
        let mut row = Vec::with_capacity(fields.len());
        for (a, fa) in fields.iter().enumerate() {
            let moved: Vec<f64> = t.iter().map(|&j| fa[j]).collect();
            let hit = fields.iter().enumerate().find_map(|(b, fb)| {
                if (scale[a] - scale[b]).abs() > 1e-9 * scale[a].max(1e-300) {
                    return None;
                }
                for s in [1.0, -1.0] {
                    let err: f64 = moved.iter().zip(fb.iter()).map(|(x, y)| (x - s * y).abs()).fold(0.0, f64::max);
                    if err <= 1e-9 * scale[a].max(1e-300) {
                        return Some((b, s));
                    }
                }
                None
            });
            match hit {
                Some(h) => row.push(h),
                None => {
                    return Err(KineticError::InvalidArgument(format!(
                        "field {a} has no signed image under a grid symmetry"
                    )))
                }
            }
        }
        action.push(row);
    }
    Ok(action)
}
