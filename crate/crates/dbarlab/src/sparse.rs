//! Complex CSR matrices with the exactness guarantees the discretization
//! relies on: `adjoint` is an entrywise conjugate transpose, and `aah`
//! (A * A^H) accumulates the (i,j) and (j,i) entries over the shared
//! columns in the same ascending order, so the product is Hermitian to the
//! last bit, not just up to rounding order.

use crate::C64;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    /// Build from unordered (row, col, value) triplets; duplicates are summed
    /// in (row, col)-sorted order, which keeps assembly deterministic.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// y = A x
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// exact conjugate transpose (counting-sort transpose, conj each entry)
    pub fn adjoint(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![C64::new(0.0, 0.0); self.nnz()];
        let mut next = counts;
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                next[c] += 1;
                col_idx[dst] = r;
                values[dst] = self.values[k].conj();
            }
        }
        CsrMatrix { n_rows: self.n_cols, n_cols: self.n_rows, row_ptr, col_idx, values }
    }

    /// C = A A^H. For every pair (i, j) the entry is the merge-dot of rows i
    /// and j over shared columns in ascending column order; C[j][i] runs the
    /// same merge with the roles swapped, so its terms are the exact
    /// conjugates summed in the same order and C is exactly Hermitian.
    pub fn aah(&self) -> CsrMatrix {
        let at = self.adjoint(); // column -> rows index (structure only)
        let n = self.n_rows;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut mark = vec![usize::MAX; n];
        let mut partners: Vec<usize> = Vec::new();
        for i in 0..n {
            partners.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                for kk in at.row_ptr[c]..at.row_ptr[c + 1] {
                    let j = at.col_idx[kk];
                    if mark[j] != i {
                        mark[j] = i;
                        partners.push(j);
                    }
                }
            }
            partners.sort_unstable();
            for &j in &partners {
                let (ci, vi) = self.row(i);
                let (cj, vj) = self.row(j);
                let mut acc = C64::new(0.0, 0.0);
                let (mut a, mut b) = (0usize, 0usize);
                while a < ci.len() && b < cj.len() {
                    match ci[a].cmp(&cj[b]) {
                        std::cmp::Ordering::Less => a += 1,
                        std::cmp::Ordering::Greater => b += 1,
                        std::cmp::Ordering::Equal => {
                            acc += vi[a] * vj[b].conj();
                            a += 1;
                            b += 1;
                        }
                    }
                }
                col_idx.push(j);
                values.push(acc);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        CsrMatrix { n_rows: n, n_cols: n, row_ptr, col_idx, values }
    }

    /// max |a_ij - conj(a_ji)|; zero for exactly Hermitian matrices
    pub fn hermitian_defect(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let at = self.adjoint();
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (c1, v1) = self.row(r);
            let (c2, v2) = at.row(r);
            // compare sparse rows, allowing structural zeros on either side
            let (mut a, mut b) = (0usize, 0usize);
            while a < c1.len() || b < c2.len() {
                let ca = if a < c1.len() { c1[a] } else { usize::MAX };
                let cb = if b < c2.len() { c2[b] } else { usize::MAX };
                if ca < cb {
                    worst = worst.max(v1[a].norm());
                    a += 1;
                } else if cb < ca {
                    worst = worst.max(v2[b].norm());
                    b += 1;
                } else {
                    worst = worst.max((v1[a] - v2[b]).norm());
                    a += 1;
                    b += 1;
                }
            }
        }
        worst
    }

    /// real part of the diagonal (Jacobi preconditioner data)
    pub fn diagonal_real(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k].re;
                }
            }
        }
        d
    }

    /// coordinate-format export, one `i j re im` line per stored entry
    pub fn write_coordinate(&self, w: &mut impl Write) -> std::io::Result<()> {
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                writeln!(w, "{} {} {} {}", r, self.col_idx[k], v.re, v.im)?;
            }
        }
        Ok(())
    }
}

// --- small dense-vector helpers shared by cg and spectral ---

pub fn vdot(x: &[C64], y: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        acc += a.conj() * b;
    }
    acc
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (a, b) in x.iter().zip(y.iter_mut()) {
        *b += alpha * a;
    }
}

pub fn scale(alpha: f64, x: &mut [C64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

/// linear operator abstraction: assembled matrices and shifted variants
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
    /// real diagonal for Jacobi preconditioning, when cheaply available
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y);
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.diagonal_real())
    }
}

/// A - shift I
pub struct ShiftedOp<'a> {
    pub base: &'a CsrMatrix,
    pub shift: f64,
}

impl LinearOp for ShiftedOp<'_> {
    fn dim(&self) -> usize {
        self.base.n_rows
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.base.matvec(x, y);
        if self.shift != 0.0 {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi -= self.shift * xi;
            }
        }
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        let mut d = self.base.diagonal_real();
        for v in &mut d {
            *v -= self.shift;
        }
        Some(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplet_assembly_merges_duplicates() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![
                (1, 0, c(1.0, 0.0)),
                (0, 0, c(2.0, 1.0)),
                (0, 0, c(3.0, -1.0)),
                (1, 1, c(0.0, 4.0)),
            ],
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[0usize][..], &[c(5.0, 0.0)][..]));
        assert_eq!(m.row(1), (&[0usize, 1][..], &[c(1.0, 0.0), c(0.0, 4.0)][..]));
    }

    #[test]
    fn matvec_small() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 0, c(1.0, 0.0)), (0, 2, c(0.0, 1.0)), (1, 1, c(2.0, 0.0))],
        );
        let y = m.apply(&[c(1.0, 0.0), c(5.0, 0.0), c(0.0, -1.0)]);
        assert_eq!(y, vec![c(2.0, 0.0), c(10.0, 0.0)]);
    }

    #[test]
    fn adjoint_is_exact_involution() {
        let m = CsrMatrix::from_triplets(
            3,
            2,
            vec![
                (0, 1, c(1.5, -2.0)),
                (2, 0, c(0.25, 0.125)),
                (1, 1, c(-3.0, 1.0)),
            ],
        );
        let a = m.adjoint();
        assert_eq!(a.n_rows, 2);
        let back = a.adjoint();
        assert_eq!(back, m);
        // spot: entry (1,0) of adjoint equals conj of entry (0,1)
        assert_eq!(a.row(1).1[0], c(1.5, 2.0));
    }

    #[test]
    fn aah_exact_hermitian_and_correct() {
        // pseudo-random small matrix; compare against dense product
        let n = 7;
        let mut trips = Vec::new();
        let mut s = 1u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                if (i + 2 * j) % 3 == 0 {
                    trips.push((i, j, c(rnd(), rnd())));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trips);
        let p = a.aah();
        assert_eq!(p.hermitian_defect(), 0.0);
        // dense check
        let mut dense = vec![[c(0.0, 0.0); 7]; 7];
        for r in 0..n {
            let (cs, vs) = a.row(r);
            for (cc, vv) in cs.iter().zip(vs) {
                dense[r][*cc] = *vv;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = c(0.0, 0.0);
                for k in 0..n {
                    acc += dense[i][k] * dense[j][k].conj();
                }
                let (cs, vs) = p.row(i);
                let got = cs
                    .iter()
                    .position(|&cc| cc == j)
                    .map(|k| vs[k])
                    .unwrap_or(c(0.0, 0.0));
                assert!((acc - got).norm() < 1e-12, "mismatch at ({i},{j})");
            }
        }
    }

    #[test]
    fn shifted_op_applies() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, c(3.0, 0.0)), (1, 1, c(5.0, 0.0))]);
        let s = ShiftedOp { base: &m, shift: -1.0 };
        let mut y = vec![c(0.0, 0.0); 2];
        s.apply_into(&[c(1.0, 0.0), c(1.0, 0.0)], &mut y);
        assert_eq!(y, vec![c(4.0, 0.0), c(6.0, 0.0)]);
        assert_eq!(s.diagonal().unwrap(), vec![4.0, 6.0]);
    }

    #[test]
    fn coordinate_export() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, -2.0)), (1, 0, c(0.5, 0.0))]);
        let mut buf = Vec::new();
        m.write_coordinate(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 1 1 -2\n1 0 0.5 0\n");
    }
}
