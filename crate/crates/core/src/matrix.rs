//! Dense arbitrary-precision integer matrices and Smith normal form.
//!
//! Every equality decision in the engine bottoms out here, so the entries
//! are `BigInt` throughout and the reduction is fully deterministic: the
//! pivot rule is "smallest nonzero absolute value, then lowest row index,
//! then lowest column index".

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Row-major matrix over the integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
        }
        IntMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let prod = a * b;
                        out[(i, j)] += prod;
                    }
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn vec_mul(v: &[BigInt], m: &IntMatrix) -> Vec<BigInt> {
        assert_eq!(v.len(), m.rows, "dimension mismatch in vec_mul");
        let mut out = vec![BigInt::zero(); m.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for j in 0..m.cols {
                let e = &m[(i, j)];
                if !e.is_zero() {
                    out[j] += vi * e;
                }
            }
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.entries.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            let idx = a * self.cols + j;
            let v = std::mem::take(&mut self.entries[idx]);
            self.entries[idx] = -v;
        }
    }

    /// row a += q * row b
    fn add_row_multiple(&mut self, a: usize, b: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let add = q * &self[(b, j)];
            self[(a, j)] += add;
        }
    }

    /// col a += q * col b
    fn add_col_multiple(&mut self, a: usize, b: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let add = q * &self[(i, b)];
            self[(i, a)] += add;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.entries[i * self.cols + j]
    }
}

/// Result of a Smith normal form computation: `u * m * v = d`, with `u` and
/// `v` unimodular and `d` diagonal with each diagonal entry dividing the next.
/// `vinv` is the inverse of `v`, tracked during reduction; it is what turns
/// group elements into diagonal coordinates and back.
#[derive(Debug, Clone)]
pub struct SnfResult {
    pub d: IntMatrix,
    pub u: IntMatrix,
    pub v: IntMatrix,
    pub vinv: IntMatrix,
}

impl SnfResult {
    /// Nonzero diagonal entries, in divisibility order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n)
            .map(|i| self.d[(i, i)].clone())
            .take_while(|x| !x.is_zero())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors().len()
    }
}

/// Smith normal form by alternating row/column elimination.
///
/// Pivot selection is fixed (min |entry|, then min row, then min column) so
/// that identical inputs always produce identical outputs.
pub fn smith_normal_form(m: &IntMatrix) -> SnfResult {
    let rows = m.rows();
    let cols = m.cols();
    let mut a = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    let mut vinv = IntMatrix::identity(cols);

    let mut t = 0;
    while t < rows && t < cols {
        let Some((pi, pj)) = find_pivot(&a, t) else {
            break;
        };
        a.swap_rows(t, pi);
        u.swap_rows(t, pi);
        a.swap_cols(t, pj);
        v.swap_cols(t, pj);
        vinv.swap_rows(t, pj);

        if a[(t, t)].is_negative() {
            a.negate_row(t);
            u.negate_row(t);
        }

        // Reduce column t and row t against the pivot; a failed division
        // leaves a smaller remainder which becomes the next pivot.
        let mut clean = true;
        for i in (t + 1)..rows {
            if !a[(i, t)].is_zero() {
                let q = -a[(i, t)].div_floor(&a[(t, t)]);
                a.add_row_multiple(i, t, &q);
                u.add_row_multiple(i, t, &q);
                if !a[(i, t)].is_zero() {
                    clean = false;
                }
            }
        }
        for j in (t + 1)..cols {
            if !a[(t, j)].is_zero() {
                let q = -a[(t, j)].div_floor(&a[(t, t)]);
                a.add_col_multiple(j, t, &q);
                v.add_col_multiple(j, t, &q);
                // col_j += q*col_t on a matches row_t -= q*row_j on vinv
                let neg_q = -q;
                vinv.add_row_multiple(t, j, &neg_q);
                if !a[(t, j)].is_zero() {
                    clean = false;
                }
            }
        }
        if !clean {
            continue;
        }

        // Pivot divides every remaining entry, or we merge the offending row
        // and start over at this position.
        let mut offender = None;
        'scan: for i in (t + 1)..rows {
            for j in (t + 1)..cols {
                if !a[(i, j)].is_multiple_of(&a[(t, t)]) {
                    offender = Some(i);
                    break 'scan;
                }
            }
        }
        if let Some(i) = offender {
            let one = BigInt::one();
            a.add_row_multiple(t, i, &one);
            u.add_row_multiple(t, i, &one);
            continue;
        }
        t += 1;
    }

    SnfResult { d: a, u, v, vinv }
}

fn find_pivot(a: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(BigInt, usize, usize)> = None;
    for i in t..a.rows() {
        for j in t..a.cols() {
            let e = &a[(i, j)];
            if e.is_zero() {
                continue;
            }
            let mag = e.abs();
            match &best {
                Some((m, _, _)) if *m <= mag => {}
                _ => best = Some((mag, i, j)),
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}
