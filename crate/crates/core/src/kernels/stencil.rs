//! Time-stepped stencils. Only the spatial loops are tiled; the time loop
//! always encloses the tiles.

use alloc::vec::Vec;

use super::tiles::for_each_tile;
use super::{Inputs, KernelInstance};

fn two_d(levels: &[[usize; 3]]) -> Vec<[usize; 2]> {
    levels.iter().map(|l| [l[0], l[1]]).collect()
}

/// In-place 9-point Gauss-Seidel sweep.
///
/// Each point reads neighbours already updated in the same sweep, so only the
/// row loop is strip-mined; reordering columns across rows would change the
/// result.
#[derive(Debug, Clone)]
pub struct Seidel2d {
    pub tsteps: usize,
    pub n: usize,
    pub a: Vec<f64>,
}

impl Seidel2d {
    pub(super) fn init(tsteps: usize, n: usize, inputs: &mut Inputs) -> Self {
        Seidel2d {
            tsteps,
            n,
            a: inputs.array(n * n),
        }
    }
}

impl KernelInstance for Seidel2d {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Seidel2d { tsteps, n, a } = self;
        let n = *n;
        if n < 3 {
            return;
        }
        let rows: Vec<[usize; 1]> = levels.iter().map(|l| [l[0]]).collect();
        for _ in 0..*tsteps {
            #[allow(clippy::single_range_in_vec_init)]
            for_each_tile([1..n - 1], &rows, &mut |[ri]| {
                for i in ri {
                    for j in 1..n - 1 {
                        a[i * n + j] = (a[(i - 1) * n + j - 1]
                            + a[(i - 1) * n + j]
                            + a[(i - 1) * n + j + 1]
                            + a[i * n + j - 1]
                            + a[i * n + j]
                            + a[i * n + j + 1]
                            + a[(i + 1) * n + j - 1]
                            + a[(i + 1) * n + j]
                            + a[(i + 1) * n + j + 1])
                            / 9.0;
                    }
                }
            });
        }
    }

    fn checksum(&self) -> f64 {
        self.a.iter().sum()
    }
}

/// 2-D finite-difference time-domain update of `ex`, `ey`, `hz`.
#[derive(Debug, Clone)]
pub struct Fdtd2d {
    pub tmax: usize,
    pub nx: usize,
    pub ny: usize,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
    pub hz: Vec<f64>,
    pub fict: Vec<f64>,
}

impl Fdtd2d {
    pub(super) fn init(tmax: usize, nx: usize, ny: usize, inputs: &mut Inputs) -> Self {
        Fdtd2d {
            tmax,
            nx,
            ny,
            ex: inputs.array(nx * ny),
            ey: inputs.array(nx * ny),
            hz: inputs.array(nx * ny),
            fict: (0..tmax).map(|t| t as f64).collect(),
        }
    }
}

impl KernelInstance for Fdtd2d {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Fdtd2d {
            tmax,
            nx,
            ny,
            ex,
            ey,
            hz,
            fict,
        } = self;
        let (nx, ny) = (*nx, *ny);
        if nx < 2 || ny < 2 {
            return;
        }
        let ij = two_d(levels);
        #[allow(clippy::needless_range_loop)]
        for t in 0..*tmax {
            ey[..ny].fill(fict[t]);
            for_each_tile([1..nx, 0..ny], &ij, &mut |[ri, rj]| {
                for i in ri {
                    for j in rj.clone() {
                        ey[i * ny + j] -= 0.5 * (hz[i * ny + j] - hz[(i - 1) * ny + j]);
                    }
                }
            });
            for_each_tile([0..nx, 1..ny], &ij, &mut |[ri, rj]| {
                for i in ri {
                    for j in rj.clone() {
                        ex[i * ny + j] -= 0.5 * (hz[i * ny + j] - hz[i * ny + j - 1]);
                    }
                }
            });
            for_each_tile([0..nx - 1, 0..ny - 1], &ij, &mut |[ri, rj]| {
                for i in ri {
                    for j in rj.clone() {
                        hz[i * ny + j] -=
                            0.7 * (ex[i * ny + j + 1] - ex[i * ny + j] + ey[(i + 1) * ny + j] - ey[i * ny + j]);
                    }
                }
            });
        }
    }

    fn checksum(&self) -> f64 {
        self.ex.iter().sum::<f64>() + self.ey.iter().sum::<f64>() + self.hz.iter().sum::<f64>()
    }
}

/// 5-point Jacobi relaxation alternating between `A` and `B`.
#[derive(Debug, Clone)]
pub struct Jacobi2d {
    pub tsteps: usize,
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Jacobi2d {
    pub(super) fn init(tsteps: usize, n: usize, inputs: &mut Inputs) -> Self {
        Jacobi2d {
            tsteps,
            n,
            a: inputs.array(n * n),
            b: inputs.array(n * n),
        }
    }
}

fn jacobi_sweep(dst: &mut [f64], src: &[f64], n: usize, ij: &[[usize; 2]]) {
    for_each_tile([1..n - 1, 1..n - 1], ij, &mut |[ri, rj]| {
        for i in ri {
            for j in rj.clone() {
                dst[i * n + j] = 0.2
                    * (src[i * n + j]
                        + src[i * n + j - 1]
                        + src[i * n + 1 + j]
                        + src[(1 + i) * n + j]
                        + src[(i - 1) * n + j]);
            }
        }
    });
}

impl KernelInstance for Jacobi2d {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let n = self.n;
        if n < 3 {
            return;
        }
        let ij = two_d(levels);
        for _ in 0..self.tsteps {
            jacobi_sweep(&mut self.b, &self.a, n, &ij);
            jacobi_sweep(&mut self.a, &self.b, n, &ij);
        }
    }

    fn checksum(&self) -> f64 {
        self.a.iter().sum()
    }
}
