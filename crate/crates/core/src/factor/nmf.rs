//! Non-negative factorization X ≈ WH under the Frobenius loss, by
//! Lee–Seung multiplicative updates on sparse X.
//!
//! Rows of X without entries are not stored: their optimal W row is zero.
//! All reductions run in a fixed order so results do not depend on the
//! thread count.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dense_serde, FactorError, MatrixInfo};
use crate::counts::{Csr, SparseMatrix};

const TINY: f64 = 1e-300;
/// Up to this many dense entries the objective is evaluated directly rather
/// than through the Gram-matrix expansion, which loses precision near zero.
const DIRECT_OBJECTIVE_LIMIT: usize = 4 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfOptions {
    pub d: usize,
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        NmfOptions { d: 10, max_iters: 500, rel_tol: 1e-6, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfModel {
    pub d: usize,
    pub seed: u64,
    pub iterations_run: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Rows of X that have a stored row of W, ascending. Other rows of W
    /// are zero.
    pub rows: Vec<u32>,
    /// `rows.len()` x d.
    #[serde(with = "dense_serde")]
    pub w: DMatrix<f64>,
    /// d x p.
    #[serde(with = "dense_serde")]
    pub h: DMatrix<f64>,
    /// Objective at initialization, then after every iteration.
    pub objective_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<MatrixInfo>,
}

impl NmfModel {
    /// Stored position of logical row `i`.
    pub fn stored_row(&self, i: usize) -> Option<usize> {
        self.rows.binary_search(&(i as u32)).ok()
    }

    /// W as a full n x d matrix.
    pub fn w_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n_rows, self.d);
        for (k, &i) in self.rows.iter().enumerate() {
            w.set_row(i as usize, &self.w.row(k));
        }
        w
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    /// `‖X − WH‖²_F`.
    pub fn reconstruction_error(&self, x: &SparseMatrix) -> Result<f64, FactorError> {
        if (x.n_rows, x.n_cols) != (self.n_rows, self.n_cols) {
            return Err(FactorError::ShapeMismatch {
                expected: (self.n_rows, self.n_cols),
                found: (x.n_rows, x.n_cols),
            });
        }
        let mut total = 0.0;
        for i in 0..x.n_rows {
            let (cols, vals) = x.row(i);
            match self.stored_row(i) {
                None => total += vals.iter().map(|v| v * v).sum::<f64>(),
                Some(k) => {
                    let approx = self.w.row(k) * &self.h;
                    let mut row = 0.0;
                    let mut next = 0;
                    for j in 0..self.n_cols {
                        let xv = if next < cols.len() && cols[next] as usize == j {
                            next += 1;
                            vals[next - 1]
                        } else {
                            0.0
                        };
                        row += (xv - approx[j]).powi(2);
                    }
                    total += row;
                }
            }
        }
        Ok(total)
    }

    pub fn reconstruction_error_dense(&self, x: &DMatrix<f64>) -> Result<f64, FactorError> {
        self.reconstruction_error(&SparseMatrix::from_dense(x))
    }
}

pub fn nmf_fit_dense(x: &DMatrix<f64>, opts: &NmfOptions) -> Result<NmfModel, FactorError> {
    for (j, col) in x.column_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(FactorError::NegativeInput { row: i, col: j, value: v });
            }
        }
    }
    nmf_fit(&SparseMatrix::from_dense(x), opts)
}

/// Factorizes non-negative `x` with `opts.d` components, starting from
/// seeded uniform(0.1, 1.1) factors.
pub fn nmf_fit(x: &SparseMatrix, opts: &NmfOptions) -> Result<NmfModel, FactorError> {
    if opts.d == 0 {
        return Err(FactorError::InvalidDimension { d: 0, max: usize::MAX });
    }
    for (i, j, v) in x.triplets() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(FactorError::NegativeInput { row: i, col: j as usize, value: v });
        }
    }
    let rows: Vec<u32> = x.nonempty_rows().map(|i| i as u32).collect();
    let compact = Csr::from_sorted(
        rows.len(),
        x.n_cols,
        rows.iter().enumerate().flat_map(|(k, &i)| {
            let (c, v) = x.row(i as usize);
            c.iter().zip(v).map(move |(&c, &v)| (k, c, v))
        }),
    );
    let mut state = State::new(&compact, opts.d, opts.seed);
    let mut trace = vec![state.objective()];
    let mut iterations = 0;
    while iterations < opts.max_iters && trace[iterations] > 0.0 {
        state.update_h();
        state.update_w();
        let obj = state.objective();
        trace.push(obj);
        iterations += 1;
        let prev = trace[iterations - 1];
        if prev - obj < opts.rel_tol * prev {
            break;
        }
    }
    let (m, d, p) = (state.m, state.d, state.p);
    Ok(NmfModel {
        d,
        seed: opts.seed,
        iterations_run: iterations,
        n_rows: x.n_rows,
        n_cols: x.n_cols,
        rows,
        w: DMatrix::from_row_slice(m, d, &state.w),
        h: DMatrix::from_column_slice(d, p, &state.h),
        objective_trace: trace,
        info: None,
    })
}

/// Working factors: `w` row-major (m x d), `h` column-major (d x p), so the
/// d-vectors `w_i` and `h_j` are contiguous.
struct State<'a> {
    x: &'a SparseMatrix,
    /// Transpose of `x` for column access.
    xt: SparseMatrix,
    x_norm_sq: f64,
    m: usize,
    p: usize,
    d: usize,
    w: Vec<f64>,
    h: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(x: &'a SparseMatrix, d: usize, seed: u64) -> Self {
        let (m, p) = (x.n_rows, x.n_cols);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = (0..m * d).map(|_| rng.random_range(0.1..1.1)).collect();
        let h = (0..p * d).map(|_| rng.random_range(0.1..1.1)).collect();
        State { x, xt: transpose(x), x_norm_sq: x.frobenius_sq(), m, p, d, w, h }
    }

    fn update_h(&mut self) {
        let d = self.d;
        let g = gram(&self.w, d);
        let (w, xt) = (&self.w, &self.xt);
        self.h.par_chunks_mut(d).enumerate().for_each(|(j, hj)| {
            let mut num = vec![0.0; d];
            let (rows, vals) = xt.row(j);
            for (&i, &v) in rows.iter().zip(vals) {
                axpy(&mut num, v, &w[i as usize * d..][..d]);
            }
            scale(hj, &num, &g);
        });
    }

    fn update_w(&mut self) {
        let d = self.d;
        let k = gram(&self.h, d);
        let (h, x) = (&self.h, self.x);
        self.w.par_chunks_mut(d).enumerate().for_each(|(i, wi)| {
            let mut num = vec![0.0; d];
            let (cols, vals) = x.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                axpy(&mut num, v, &h[j as usize * d..][..d]);
            }
            scale(wi, &num, &k);
        });
    }

    fn objective(&self) -> f64 {
        let (d, p) = (self.d, self.p);
        let (w, h, x) = (&self.w, &self.h, self.x);
        if self.m * p <= DIRECT_OBJECTIVE_LIMIT {
            let per_row: Vec<f64> = (0..self.m)
                .into_par_iter()
                .map(|i| {
                    let wi = &w[i * d..][..d];
                    let (cols, vals) = x.row(i);
                    let mut next = 0;
                    let mut s = 0.0;
                    for j in 0..p {
                        let approx = dot(wi, &h[j * d..][..d]);
                        let xv = if next < cols.len() && cols[next] as usize == j {
                            next += 1;
                            vals[next - 1]
                        } else {
                            0.0
                        };
                        s += (xv - approx) * (xv - approx);
                    }
                    s
                })
                .collect();
            per_row.iter().sum()
        } else {
            let cross: Vec<f64> = (0..self.m)
                .into_par_iter()
                .map(|i| {
                    let wi = &w[i * d..][..d];
                    let (cols, vals) = x.row(i);
                    cols.iter().zip(vals).map(|(&j, &v)| v * dot(wi, &h[j as usize * d..][..d])).sum()
                })
                .collect();
            let cross: f64 = cross.iter().sum();
            let (g, k) = (gram(w, d), gram(h, d));
            let model_sq: f64 = g.iter().zip(&k).map(|(a, b)| a * b).sum();
            (self.x_norm_sq - 2.0 * cross + model_sq).max(0.0)
        }
    }
}

/// Σ v vᵀ over the consecutive d-vectors of `flat`, summed in fixed-size
/// chunks and then in order.
fn gram(flat: &[f64], d: usize) -> Vec<f64> {
    const CHUNK: usize = 512;
    let partials: Vec<Vec<f64>> = flat
        .par_chunks(CHUNK * d)
        .map(|block| {
            let mut g = vec![0.0; d * d];
            for v in block.chunks(d) {
                for a in 0..d {
                    for b in 0..d {
                        g[a * d + b] += v[a] * v[b];
                    }
                }
            }
            g
        })
        .collect();
    let mut g = vec![0.0; d * d];
    for part in partials {
        axpy(&mut g, 1.0, &part);
    }
    g
}

/// `v ← v ∘ num / (G v)`.
fn scale(v: &mut [f64], num: &[f64], g: &[f64]) {
    let d = v.len();
    let den: Vec<f64> = (0..d).map(|a| dot(&g[a * d..][..d], v)).collect();
    for a in 0..d {
        v[a] = v[a] * num[a] / den[a].max(TINY);
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn transpose(x: &SparseMatrix) -> SparseMatrix {
    let mut entries: Vec<(usize, u32, f64)> = x.triplets().map(|(i, j, v)| (j as usize, i as u32, v)).collect();
    entries.sort_by_key(|&(r, c, _)| (r, c));
    Csr::from_sorted(x.n_cols, x.n_rows, entries)
}
