use std::rc::Rc;

use crate::error::{Error, Result};

/// Gaussian RBF kernel `exp(-gamma * |a - b|^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "kernel arguments have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(rbf(a, b, gamma))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

/// Row-major sample matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DataMatrix {
    pub fn from_rows<V: AsRef<[f64]>>(rows: &[V]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Kernel rows for the solver: the full Gram matrix when it fits the memory
/// budget, otherwise a least-recently-used row cache.
pub(crate) struct KernelRows<'a> {
    x: &'a DataMatrix,
    gamma: f64,
    full: Option<Vec<f64>>,
    slots: Vec<Option<Rc<[f64]>>>,
    last_used: Vec<u64>,
    resident: usize,
    capacity: usize,
    clock: u64,
}

impl<'a> KernelRows<'a> {
    pub fn new(x: &'a DataMatrix, gamma: f64, cache_bytes: usize) -> Self {
        let n = x.rows;
        let row_bytes = n.max(1) * std::mem::size_of::<f64>();
        let capacity = (cache_bytes / row_bytes).max(2);
        let full = if capacity >= n {
            let mut gram = vec![0.0; n * n];
            crate::par::for_each_chunk(&mut gram, n.max(1), |i, row| {
                let xi = x.row(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = rbf(xi, x.row(j), gamma);
                }
            });
            Some(gram)
        } else {
            None
        };
        Self {
            x,
            gamma,
            full,
            slots: vec![None; if capacity >= n { 0 } else { n }],
            last_used: vec![0; if capacity >= n { 0 } else { n }],
            resident: 0,
            capacity,
            clock: 0,
        }
    }

    #[cfg(test)]
    pub fn is_full(&self) -> bool {
        self.full.is_some()
    }

    /// Calls `f` with row `i` of the Gram matrix.
    pub fn with_row<R>(&mut self, i: usize, f: impl FnOnce(&[f64]) -> R) -> R {
        if let Some(r) = self.full_row(i) {
            return f(r);
        }
        let r = self.cached_row(i);
        f(&r)
    }

    /// Calls `f` with rows `i` and `j` of the Gram matrix.
    pub fn with_rows<R>(&mut self, i: usize, j: usize, f: impl FnOnce(&[f64], &[f64]) -> R) -> R {
        if let (Some(a), Some(b)) = (self.full_row(i), self.full_row(j)) {
            return f(a, b);
        }
        let a = self.cached_row(i);
        let b = self.cached_row(j);
        f(&a, &b)
    }

    fn cached_row(&mut self, i: usize) -> Rc<[f64]> {
        let n = self.x.rows;
        self.clock += 1;
        self.last_used[i] = self.clock;
        if let Some(r) = &self.slots[i] {
            return Rc::clone(r);
        }
        if self.resident >= self.capacity {
            let victim = (0..n)
                .filter(|&k| self.slots[k].is_some())
                .min_by_key(|&k| self.last_used[k])
                .expect("cache holds at least one row");
            self.slots[victim] = None;
            self.resident -= 1;
        }
        let xi = self.x.row(i);
        let row: Rc<[f64]> = (0..n).map(|j| rbf(xi, self.x.row(j), self.gamma)).collect();
        self.slots[i] = Some(Rc::clone(&row));
        self.resident += 1;
        row
    }

    /// Borrowed view of row `i` when the full matrix is resident.
    pub fn full_row(&self, i: usize) -> Option<&[f64]> {
        let n = self.x.rows;
        self.full.as_ref().map(|f| &f[i * n..(i + 1) * n])
    }
}
