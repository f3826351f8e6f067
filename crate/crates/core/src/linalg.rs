//! Small numeric kernels shared by the propagators.

use num_complex::Complex64;

/// Compressed sparse row matrix with real entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                out[r * self.dim + c] = v;
            }
        }
        out
    }

    /// Largest absolute row sum; an upper bound on the spectral norm for
    /// symmetric matrices.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                acc += x[c] * v;
            }
            *out = acc;
        }
    }
}

/// Computes `exp(-i t H) v` by splitting `t` into steps with
/// `|t| * norm_bound / steps <= 1` and summing the Taylor series of each
/// step until the terms fall below machine precision.
///
/// `apply_h(x, y)` must write `H x` into `y`; `norm_bound` must bound the
/// spectral norm of `H`.
pub fn taylor_expm_apply<F>(apply_h: F, norm_bound: f64, t: f64, v: &[Complex64]) -> Vec<Complex64>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let scale = (t.abs() * norm_bound).max(0.0);
    let steps = (scale.ceil() as usize).max(1);
    let h = t / steps as f64;
    let coeff = Complex64::new(0.0, -h);

    let mut state = v.to_vec();
    let mut term = vec![Complex64::new(0.0, 0.0); v.len()];
    let mut next = vec![Complex64::new(0.0, 0.0); v.len()];
    for _ in 0..steps {
        term.copy_from_slice(&state);
        let base = state.iter().map(|a| a.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for m in 1..=80 {
            apply_h(&term, &mut next);
            let factor = coeff / m as f64;
            let mut largest = 0.0f64;
            for (s, (t_out, n_in)) in state.iter_mut().zip(term.iter_mut().zip(next.iter())) {
                *t_out = n_in * factor;
                *s += *t_out;
                largest = largest.max(t_out.norm());
            }
            if largest <= 1e-17 * base {
                break;
            }
        }
    }
    state
}
