//! Zero-padded 3D FFT convolution on the difference lattice.
//!
//! A grid of `n` nodes per axis is embedded in a periodic box of `2n` so the
//! circular convolution equals the aperiodic sum
//! `(K * f)(v_i) = sum_j K(v_i - u_j) f(u_j) h^3` exactly. Lines that are
//! known to be zero on input, or not needed on output, are skipped.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::C64;

pub struct Convolver {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("n", &self.n).field("m", &self.m).finish()
    }
}

/// Spectrum of a kernel sampled on the padded difference lattice.
#[derive(Debug, Clone)]
pub struct KernelSpectrum(pub Vec<C64>);

impl Convolver {
    pub fn new(n: usize) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        Self { n, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    pub fn padded_len(&self) -> usize {
        self.m * self.m * self.m
    }

    /// Transforms a kernel given as a function of the integer offset `d`
    /// with `|d_i| < n`, already multiplied by the cell volume.
    pub fn kernel_spectrum(&self, kernel: impl Fn([i64; 3]) -> f64) -> KernelSpectrum {
        let (n, m) = (self.n as i64, self.m);
        let mut buf = vec![C64::new(0.0, 0.0); self.padded_len()];
        let wrap = |d: i64| if d < 0 { (d + m as i64) as usize } else { d as usize };
        for a in -(n - 1)..n {
            for b in -(n - 1)..n {
                for c in -(n - 1)..n {
                    buf[(wrap(a) * m + wrap(b)) * m + wrap(c)] = C64::new(kernel([a, b, c]), 0.0);
                }
            }
        }
        self.transform(&mut buf, false, true);
        KernelSpectrum(buf)
    }

    /// Forward transform of a grid field after zero padding.
    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        let (n, m) = (self.n, self.m);
        let mut buf = vec![C64::new(0.0, 0.0); self.padded_len()];
        for i in 0..n {
            for j in 0..n {
                let src = (i * n + j) * n;
                let dst = (i * m + j) * m;
                buf[dst..dst + n].copy_from_slice(&f[src..src + n]);
            }
        }
        self.transform(&mut buf, false, false);
        buf
    }

    /// Inverse transform of a spectrum, returning the grid-sized window.
    pub fn inverse(&self, mut spectrum: Vec<C64>) -> Vec<C64> {
        let (n, m) = (self.n, self.m);
        self.transform(&mut spectrum, true, false);
        let scale = 1.0 / self.padded_len() as f64;
        let mut out = vec![C64::new(0.0, 0.0); n * n * n];
        for i in 0..n {
            for j in 0..n {
                let src = (i * m + j) * m;
                let dst = (i * n + j) * n;
                for k in 0..n {
                    out[dst + k] = spectrum[src + k] * scale;
                }
            }
        }
        out
    }

    /// `out = inverse(sum_t kernels[t] * spectra[t])`.
    pub fn combine(&self, terms: &[(&KernelSpectrum, &[C64])]) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); self.padded_len()];
        for (k, s) in terms {
            for ((a, kk), ss) in acc.iter_mut().zip(&k.0).zip(s.iter()) {
                *a += kk * ss;
            }
        }
        self.inverse(acc)
    }

    /// In-place 3D transform. `full` disables pruning (used for kernels);
    /// otherwise the forward pass assumes support in the low `n` block and
    /// the inverse pass only produces the low `n` block.
    fn transform(&self, buf: &mut [C64], inverse: bool, full: bool) {
        let (n, m) = (self.n, self.m);
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![C64::new(0.0, 0.0); m];
        let lim = if full { m } else { n };
        if !inverse {
            // axis 2 on rows with i < n, j < n
            for i in 0..lim {
                for j in 0..lim {
                    let s = (i * m + j) * m;
                    fft.process_with_scratch(&mut buf[s..s + m], &mut scratch);
                }
            }
            // axis 1 on planes i < n
            for i in 0..lim {
                for k in 0..m {
                    for j in 0..m {
                        line[j] = buf[(i * m + j) * m + k];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..m {
                        buf[(i * m + j) * m + k] = line[j];
                    }
                }
            }
            // axis 0 everywhere
            for j in 0..m {
                for k in 0..m {
                    for i in 0..m {
                        line[i] = buf[(i * m + j) * m + k];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..m {
                        buf[(i * m + j) * m + k] = line[i];
                    }
                }
            }
        } else {
            for j in 0..m {
                for k in 0..m {
                    for i in 0..m {
                        line[i] = buf[(i * m + j) * m + k];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..m {
                        buf[(i * m + j) * m + k] = line[i];
                    }
                }
            }
            for i in 0..lim {
                for k in 0..m {
                    for j in 0..m {
                        line[j] = buf[(i * m + j) * m + k];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..m {
                        buf[(i * m + j) * m + k] = line[j];
                    }
                }
            }
            for i in 0..lim {
                for j in 0..lim {
                    let s = (i * m + j) * m;
                    fft.process_with_scratch(&mut buf[s..s + m], &mut scratch);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let n = 6;
        let conv = Convolver::new(n);
        let kern = |d: [i64; 3]| 1.0 / (1.0 + (d[0] * d[0] + 2 * d[1] * d[1] + d[2] * d[2]) as f64) + 0.1 * d[0] as f64;
        let ks = conv.kernel_spectrum(kern);
        let f: Vec<C64> = (0..n * n * n).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos())).collect();
        let out = conv.combine(&[(&ks, &conv.forward(&f))]);
        let at = |i: usize| [(i / (n * n)) as i64, ((i / n) % n) as i64, (i % n) as i64];
        for a in 0..n * n * n {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..n * n * n {
                let (x, y) = (at(a), at(b));
                acc += f[b] * kern([x[0] - y[0], x[1] - y[1], x[2] - y[2]]);
            }
            assert!((acc - out[a]).norm() < 1e-10, "{a}");
        }
    }
}
