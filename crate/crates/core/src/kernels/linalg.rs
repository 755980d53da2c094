//! Dense linear-algebra kernels.
//!
//! Each kernel runs through [`for_each_tile`]; the untiled variant passes no
//! levels, which makes the whole iteration space one tile and reproduces the
//! original loop order. Tiled variants keep the per-element order of
//! reductions, so both variants produce bit-identical results.

use alloc::vec::Vec;

use super::tiles::for_each_tile;
use super::{Inputs, KernelInstance};

/// `out[i][j] = out[i][j] + sum_k scale * a[i][k] * b[k][j]` in `i, j, k` order.
#[allow(clippy::too_many_arguments)]
fn matmul_ijk(
    out: &mut [f64],
    a: &[f64],
    b: &[f64],
    ni: usize,
    nj: usize,
    nk: usize,
    scale: f64,
    levels: &[[usize; 3]],
) {
    for_each_tile([0..ni, 0..nj, 0..nk], levels, &mut |[ri, rj, rk]| {
        for i in ri {
            let arow = &a[i * nk..(i + 1) * nk];
            for j in rj.clone() {
                let mut acc = out[i * nj + j];
                for k in rk.clone() {
                    acc += scale * arow[k] * b[k * nj + j];
                }
                out[i * nj + j] = acc;
            }
        }
    });
}

fn sum(xs: &[f64]) -> f64 {
    xs.iter().sum()
}

/// `C = beta * C + alpha * A * B`, loops `i, k, j`.
#[derive(Debug, Clone)]
pub struct Gemm {
    pub ni: usize,
    pub nj: usize,
    pub nk: usize,
    pub alpha: f64,
    pub beta: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Gemm {
    pub(super) fn init(ni: usize, nj: usize, nk: usize, inputs: &mut Inputs) -> Self {
        Gemm {
            ni,
            nj,
            nk,
            alpha: inputs.alpha(),
            beta: inputs.beta(),
            a: inputs.array(ni * nk),
            b: inputs.array(nk * nj),
            c: inputs.array(ni * nj),
        }
    }
}

impl KernelInstance for Gemm {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Gemm {
            ni,
            nj,
            nk,
            alpha,
            beta,
            a,
            b,
            c,
        } = self;
        let (ni, nj, nk, alpha, beta) = (*ni, *nj, *nk, *alpha, *beta);
        c.iter_mut().for_each(|x| *x *= beta);
        for_each_tile([0..ni, 0..nk, 0..nj], levels, &mut |[ri, rk, rj]| {
            for i in ri {
                let crow = &mut c[i * nj + rj.start..i * nj + rj.end];
                for k in rk.clone() {
                    let aik = alpha * a[i * nk + k];
                    let brow = &b[k * nj + rj.start..k * nj + rj.end];
                    for (cx, bx) in crow.iter_mut().zip(brow) {
                        *cx += aik * bx;
                    }
                }
            }
        });
    }

    fn checksum(&self) -> f64 {
        sum(&self.c)
    }
}

/// `D = beta * D + (alpha * A * B) * C`.
#[derive(Debug, Clone)]
pub struct TwoMm {
    pub ni: usize,
    pub nj: usize,
    pub nk: usize,
    pub nl: usize,
    pub alpha: f64,
    pub beta: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub tmp: Vec<f64>,
}

impl TwoMm {
    pub(super) fn init(ni: usize, nj: usize, nk: usize, nl: usize, inputs: &mut Inputs) -> Self {
        TwoMm {
            ni,
            nj,
            nk,
            nl,
            alpha: inputs.alpha(),
            beta: inputs.beta(),
            a: inputs.array(ni * nk),
            b: inputs.array(nk * nj),
            c: inputs.array(nj * nl),
            d: inputs.array(ni * nl),
            tmp: alloc::vec![0.0; ni * nj],
        }
    }
}

impl KernelInstance for TwoMm {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let (ni, nj, nk, nl) = (self.ni, self.nj, self.nk, self.nl);
        self.tmp.fill(0.0);
        matmul_ijk(&mut self.tmp, &self.a, &self.b, ni, nj, nk, self.alpha, levels);
        let beta = self.beta;
        self.d.iter_mut().for_each(|x| *x *= beta);
        let second = super::clamp_levels(levels, [ni, nl, nj]);
        matmul_ijk(&mut self.d, &self.tmp, &self.c, ni, nl, nj, 1.0, &second);
    }

    fn checksum(&self) -> f64 {
        sum(&self.d)
    }
}

/// `G = (A * B) * (C * D)`.
#[derive(Debug, Clone)]
pub struct ThreeMm {
    pub ni: usize,
    pub nj: usize,
    pub nk: usize,
    pub nl: usize,
    pub nm: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ThreeMm {
    pub(super) fn init(ni: usize, nj: usize, nk: usize, nl: usize, nm: usize, inputs: &mut Inputs) -> Self {
        ThreeMm {
            ni,
            nj,
            nk,
            nl,
            nm,
            a: inputs.array(ni * nk),
            b: inputs.array(nk * nj),
            c: inputs.array(nj * nm),
            d: inputs.array(nm * nl),
            e: alloc::vec![0.0; ni * nj],
            f: alloc::vec![0.0; nj * nl],
            g: alloc::vec![0.0; ni * nl],
        }
    }
}

impl KernelInstance for ThreeMm {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let (ni, nj, nk, nl, nm) = (self.ni, self.nj, self.nk, self.nl, self.nm);
        self.e.fill(0.0);
        self.f.fill(0.0);
        self.g.fill(0.0);
        matmul_ijk(&mut self.e, &self.a, &self.b, ni, nj, nk, 1.0, levels);
        let lf = super::clamp_levels(levels, [nj, nl, nm]);
        matmul_ijk(&mut self.f, &self.c, &self.d, nj, nl, nm, 1.0, &lf);
        let lg = super::clamp_levels(levels, [ni, nl, nj]);
        matmul_ijk(&mut self.g, &self.e, &self.f, ni, nl, nj, 1.0, &lg);
    }

    fn checksum(&self) -> f64 {
        sum(&self.g)
    }
}

/// Lower triangle of `C = beta * C + alpha * A * A^T`, loops `i, k, j <= i`.
#[derive(Debug, Clone)]
pub struct Syrk {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl Syrk {
    pub(super) fn init(n: usize, m: usize, inputs: &mut Inputs) -> Self {
        Syrk {
            n,
            m,
            alpha: inputs.alpha(),
            beta: inputs.beta(),
            a: inputs.array(n * m),
            c: inputs.array(n * n),
        }
    }
}

impl KernelInstance for Syrk {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Syrk {
            n,
            m,
            alpha,
            beta,
            a,
            c,
        } = self;
        let (n, m, alpha, beta) = (*n, *m, *alpha, *beta);
        for i in 0..n {
            c[i * n..i * n + i + 1].iter_mut().for_each(|x| *x *= beta);
        }
        for_each_tile([0..n, 0..m, 0..n], levels, &mut |[ri, rk, rj]| {
            for i in ri {
                let hi = rj.end.min(i + 1);
                if rj.start >= hi {
                    continue;
                }
                for k in rk.clone() {
                    let aik = alpha * a[i * m + k];
                    for j in rj.start..hi {
                        c[i * n + j] += aik * a[j * m + k];
                    }
                }
            }
        });
    }

    fn checksum(&self) -> f64 {
        sum(&self.c)
    }
}

/// Column means, centring, then the upper triangle of `data^T * data / (n - 1)`
/// mirrored into the lower one.
#[derive(Debug, Clone)]
pub struct Covariance {
    /// Columns (variables).
    pub m: usize,
    /// Rows (observations).
    pub n: usize,
    pub data: Vec<f64>,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl Covariance {
    pub(super) fn init(m: usize, n: usize, inputs: &mut Inputs) -> Self {
        Covariance {
            m,
            n,
            data: inputs.array(n * m),
            mean: alloc::vec![0.0; m],
            cov: alloc::vec![0.0; m * m],
        }
    }
}

impl KernelInstance for Covariance {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Covariance { m, n, data, mean, cov } = self;
        let (m, n) = (*m, *n);
        let float_n = n as f64;
        for (j, mj) in mean.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                s += data[i * m + j];
            }
            *mj = s / float_n;
        }
        for i in 0..n {
            for j in 0..m {
                data[i * m + j] -= mean[j];
            }
        }
        cov.fill(0.0);
        for_each_tile([0..m, 0..m, 0..n], levels, &mut |[ri, rj, rk]| {
            for i in ri {
                let lo = rj.start.max(i);
                for j in lo..rj.end {
                    let mut acc = cov[i * m + j];
                    for k in rk.clone() {
                        acc += data[k * m + i] * data[k * m + j];
                    }
                    cov[i * m + j] = acc;
                }
            }
        });
        for i in 0..m {
            for j in i..m {
                cov[i * m + j] /= float_n - 1.0;
                cov[j * m + i] = cov[i * m + j];
            }
        }
    }

    fn checksum(&self) -> f64 {
        sum(&self.cov)
    }
}

/// Multi-resolution kernel: `A[r][q][:] = A[r][q][:] * C4` for every `r, q`.
#[derive(Debug, Clone)]
pub struct Doitgen {
    pub nr: usize,
    pub nq: usize,
    pub np: usize,
    pub a: Vec<f64>,
    pub c4: Vec<f64>,
    pub sum: Vec<f64>,
}

impl Doitgen {
    pub(super) fn init(nr: usize, nq: usize, np: usize, inputs: &mut Inputs) -> Self {
        Doitgen {
            nr,
            nq,
            np,
            a: inputs.array(nr * nq * np),
            c4: inputs.array(np * np),
            sum: alloc::vec![0.0; np],
        }
    }
}

impl KernelInstance for Doitgen {
    /// Levels cover the `p, s` loops.
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Doitgen { nr, nq, np, a, c4, sum } = self;
        let (nr, nq, np) = (*nr, *nq, *np);
        let ps: Vec<[usize; 2]> = levels.iter().map(|l| [l[0], l[1]]).collect();
        for r in 0..nr {
            for q in 0..nq {
                let row = (r * nq + q) * np;
                sum.fill(0.0);
                for_each_tile([0..np, 0..np], &ps, &mut |[rp, rs]| {
                    for p in rp {
                        let mut acc = sum[p];
                        for s in rs.clone() {
                            acc += a[row + s] * c4[s * np + p];
                        }
                        sum[p] = acc;
                    }
                });
                a[row..row + np].copy_from_slice(sum);
            }
        }
    }

    fn checksum(&self) -> f64 {
        sum(&self.a)
    }
}

/// BiCG sub-kernel: `s = A^T r`, `q = A p`.
#[derive(Debug, Clone)]
pub struct Bicg {
    /// Rows.
    pub n: usize,
    /// Columns.
    pub m: usize,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    pub q: Vec<f64>,
}

impl Bicg {
    pub(super) fn init(m: usize, n: usize, inputs: &mut Inputs) -> Self {
        Bicg {
            n,
            m,
            a: inputs.array(n * m),
            r: inputs.array(n),
            p: inputs.array(m),
            s: alloc::vec![0.0; m],
            q: alloc::vec![0.0; n],
        }
    }
}

impl KernelInstance for Bicg {
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Bicg { n, m, a, r, p, s, q } = self;
        let (n, m) = (*n, *m);
        s.fill(0.0);
        q.fill(0.0);
        let ij: Vec<[usize; 2]> = levels.iter().map(|l| [l[0], l[1]]).collect();
        for_each_tile([0..n, 0..m], &ij, &mut |[ri, rj]| {
            for i in ri {
                let row = &a[i * m..(i + 1) * m];
                let ri_val = r[i];
                let mut qi = q[i];
                for j in rj.clone() {
                    s[j] += ri_val * row[j];
                    qi += row[j] * p[j];
                }
                q[i] = qi;
            }
        });
    }

    fn checksum(&self) -> f64 {
        sum(&self.s) + sum(&self.q)
    }
}

/// `y = A^T (A x)`.
#[derive(Debug, Clone)]
pub struct Atax {
    /// Rows.
    pub m: usize,
    /// Columns.
    pub n: usize,
    pub a: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub tmp: Vec<f64>,
}

impl Atax {
    pub(super) fn init(m: usize, n: usize, inputs: &mut Inputs) -> Self {
        Atax {
            m,
            n,
            a: inputs.array(m * n),
            x: inputs.array(n),
            y: alloc::vec![0.0; n],
            tmp: alloc::vec![0.0; m],
        }
    }
}

impl KernelInstance for Atax {
    /// The two inner loops become separate passes over each outermost row
    /// strip, so each can be tiled; `tmp[i]` is complete before any `y[j]`
    /// uses it, as in the original order.
    fn run(&mut self, levels: &[[usize; 3]]) {
        let Atax { m, n, a, x, y, tmp } = self;
        let (m, n) = (*m, *n);
        y.fill(0.0);
        tmp.fill(0.0);
        let ij: Vec<[usize; 2]> = levels.iter().map(|l| [l[0], l[1]]).collect();
        if ij.is_empty() {
            for i in 0..m {
                let row = &a[i * n..(i + 1) * n];
                let mut t = 0.0;
                for j in 0..n {
                    t += row[j] * x[j];
                }
                tmp[i] = t;
                for j in 0..n {
                    y[j] += row[j] * t;
                }
            }
            return;
        }
        let strip = ij.last().map_or(m, |t| t[0].max(1));
        for i0 in (0..m).step_by(strip) {
            let ri = i0..(i0 + strip).min(m);
            for_each_tile([ri.clone(), 0..n], &ij, &mut |[ri, rj]| {
                for i in ri {
                    let row = &a[i * n..(i + 1) * n];
                    let mut t = tmp[i];
                    for j in rj.clone() {
                        t += row[j] * x[j];
                    }
                    tmp[i] = t;
                }
            });
            for_each_tile([ri, 0..n], &ij, &mut |[ri, rj]| {
                for i in ri {
                    let row = &a[i * n..(i + 1) * n];
                    let t = tmp[i];
                    for j in rj.clone() {
                        y[j] += row[j] * t;
                    }
                }
            });
        }
    }

    fn checksum(&self) -> f64 {
        sum(&self.y)
    }
}
