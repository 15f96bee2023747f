//! Small direct solvers: dense LU for tiny blocks, banded LU with partial
//! pivoting, and a low-rank (Woodbury) correction for periodic wrap-around
//! entries. Jacobians and shifted operators on 1-D grids are banded up to a
//! handful of corner entries, so this is all the linear algebra the solvers need.

use crate::error::{Error, Result};

/// Square sparse matrix assembled row by row.
#[derive(Debug, Clone)]
pub struct SparseRows {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(n: usize) -> Self {
        Self { n, rows: vec![Vec::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` to entry (i, j).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if let Some(e) = self.rows[i].iter_mut().find(|e| e.0 == j) {
            e.1 += v;
        } else {
            self.rows[i].push((j, v));
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }
}

/// LU factorization of a small dense matrix with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// `a` is row-major n×n.
    pub fn new(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut piv = vec![0; n];
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= 1e-14 * scale {
                return Err(Error::Solver(format!("singular dense matrix at column {k}")));
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let m = a[i * n + k] / d;
                a[i * n + k] = m;
                for j in k + 1..n {
                    a[i * n + j] -= m * a[k * n + j];
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            for i in k + 1..n {
                b[i] -= self.lu[i * n + k] * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s -= self.lu[k * n + j] * b[j];
            }
            b[k] = s / self.lu[k * n + k];
        }
    }
}

#[derive(Debug, Clone)]
struct BandRow {
    start: isize,
    vals: Vec<f64>,
}

impl BandRow {
    #[inline]
    fn get(&self, col: usize) -> f64 {
        let k = col as isize - self.start;
        if k < 0 || k as usize >= self.vals.len() {
            0.0
        } else {
            self.vals[k as usize]
        }
    }

    /// Mutable access; grows the row to the right when pivoting drifts fill-in
    /// past the initial allocation.
    #[inline]
    fn slot(&mut self, col: usize) -> &mut f64 {
        let k = (col as isize - self.start) as usize;
        if k >= self.vals.len() {
            self.vals.resize(k + 1, 0.0);
        }
        &mut self.vals[k]
    }
}

/// Banded LU with partial pivoting (row interchanges within the lower band).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<BandRow>,
    mult: Vec<Vec<f64>>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// Factors the entries of `m` with |i - j| within (kl, ku); other entries
    /// must be absent.
    pub fn new(m: &SparseRows, kl: usize, ku: usize) -> Result<Self> {
        let n = m.dim();
        let width = 2 * kl + ku + 1;
        let mut rows: Vec<BandRow> = (0..n)
            .map(|i| BandRow { start: i as isize - kl as isize, vals: vec![0.0; width] })
            .collect();
        let mut scale = 0.0f64;
        for (i, row) in rows.iter_mut().enumerate() {
            for &(j, v) in m.row(i) {
                if j + kl < i || j > i + ku {
                    return Err(Error::Solver(format!("entry ({i},{j}) outside band")));
                }
                *row.slot(j) += v;
                scale = scale.max(v.abs());
            }
        }
        let scale = scale.max(f64::MIN_POSITIVE);
        let mut piv = vec![0; n];
        let mut mult = vec![Vec::new(); n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (p, pv) = (k..=last)
                .map(|i| (i, rows[i].get(k).abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if !(pv > 1e-13 * scale) {
                return Err(Error::Solver(format!("singular banded matrix at row {k}")));
            }
            piv[k] = p;
            rows.swap(k, p);
            let cend = (k + ku + kl).min(n - 1);
            let d = rows[k].get(k);
            let (head, tail) = rows.split_at_mut(k + 1);
            let pivot_row = &head[k];
            let mut mk = Vec::with_capacity(last - k);
            for row in tail.iter_mut().take(last - k) {
                let l = row.get(k) / d;
                mk.push(l);
                if l != 0.0 {
                    for c in k + 1..=cend {
                        let u = pivot_row.get(c);
                        if u != 0.0 {
                            *row.slot(c) -= l * u;
                        }
                    }
                }
                *row.slot(k) = 0.0;
            }
            mult[k] = mk;
        }
        Ok(Self { n, kl, ku, rows, mult, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for (off, &l) in self.mult[k].iter().enumerate() {
                b[k + 1 + off] -= l * bk;
            }
        }
        for k in (0..n).rev() {
            let row = &self.rows[k];
            let cend = (k + self.ku + self.kl).min(n - 1);
            let mut s = b[k];
            for c in k + 1..=cend {
                s -= row.get(c) * b[c];
            }
            b[k] = s / row.get(k);
        }
    }
}

/// Direct solver for banded matrices with a few far-off-diagonal entries
/// (periodic closures). Entries with |i - j| > n/2 are treated as a low-rank
/// correction.
#[derive(Debug, Clone)]
pub struct BandedSolver {
    band: BandedLu,
    wrap_cols: Vec<usize>,
    z: Vec<Vec<f64>>,
    capacitance: Option<DenseLu>,
}

impl BandedSolver {
    pub fn new(m: &SparseRows) -> Result<Self> {
        let n = m.dim();
        let half = n / 2;
        let mut band = SparseRows::new(n);
        let mut wrap: Vec<(usize, usize, f64)> = Vec::new();
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &(j, v) in m.row(i) {
                if i.abs_diff(j) > half {
                    wrap.push((i, j, v));
                } else {
                    if j < i {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                    band.add(i, j, v);
                }
            }
        }
        let band = BandedLu::new(&band, kl, ku)?;
        let mut wrap_cols: Vec<usize> = wrap.iter().map(|w| w.1).collect();
        wrap_cols.sort_unstable();
        wrap_cols.dedup();
        let mut z = Vec::with_capacity(wrap_cols.len());
        for &c in &wrap_cols {
            let mut col = vec![0.0; n];
            for &(i, j, v) in &wrap {
                if j == c {
                    col[i] += v;
                }
            }
            band.solve(&mut col);
            z.push(col);
        }
        let r = wrap_cols.len();
        let capacitance = if r == 0 {
            None
        } else {
            let mut s = vec![0.0; r * r];
            for a in 0..r {
                for b in 0..r {
                    s[a * r + b] = z[b][wrap_cols[a]] + if a == b { 1.0 } else { 0.0 };
                }
            }
            Some(DenseLu::new(r, s)?)
        };
        Ok(Self { band, wrap_cols, z, capacitance })
    }

    pub fn solve(&self, b: &mut [f64]) {
        self.band.solve(b);
        if let Some(cap) = &self.capacitance {
            let mut t: Vec<f64> = self.wrap_cols.iter().map(|&c| b[c]).collect();
            cap.solve(&mut t);
            for (zc, tc) in self.z.iter().zip(&t) {
                for (bi, zi) in b.iter_mut().zip(zc) {
                    *bi -= zi * tc;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.band.dim()
    }
}
