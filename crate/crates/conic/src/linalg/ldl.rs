use super::CscMatrix;

const NONE: usize = usize::MAX;

/// Elimination tree and column counts of `L` for an upper-triangular pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    etree: Vec<usize>,
    lp: Vec<usize>,
}

impl LdlSymbolic {
    /// `upper` must be square and hold the upper triangle, diagonal included.
    pub fn analyse(upper: &CscMatrix) -> Self {
        let n = upper.ncols;
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for (i, _) in upper.col(j) {
                let mut i = i;
                if i >= j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        Self { n, etree, lp }
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }
}

/// Numeric `L D Lᵀ` factor with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    sym: LdlSymbolic,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    // workspace
    y_vals: Vec<f64>,
    y_marker: Vec<bool>,
    y_idx: Vec<usize>,
    elim_buffer: Vec<usize>,
    next_in_col: Vec<usize>,
    /// Number of pivots replaced by the dynamic regularisation in the last factorisation.
    pub regularised_pivots: usize,
}

impl LdlFactor {
    pub fn new(sym: LdlSymbolic) -> Self {
        let n = sym.n;
        let nnz = sym.nnz_l();
        Self {
            sym,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            y_vals: vec![0.0; n],
            y_marker: vec![false; n],
            y_idx: vec![0; n],
            elim_buffer: vec![0; n],
            next_in_col: vec![0; n],
            regularised_pivots: 0,
        }
    }

    /// Factors `upper`, which must share the pattern passed to [`LdlSymbolic::analyse`].
    ///
    /// `signs[k]` is the expected sign of pivot `k`. A pivot whose signed value
    /// falls below `eps` is replaced by `signs[k] * delta`.
    pub fn factor(&mut self, upper: &CscMatrix, signs: &[f64], eps: f64, delta: f64) -> Result<(), usize> {
        let n = self.sym.n;
        let lp = &self.sym.lp;
        let etree = &self.sym.etree;
        self.regularised_pivots = 0;
        for k in 0..n {
            self.next_in_col[k] = lp[k];
        }

        for k in 0..n {
            let mut nnz_y = 0usize;
            self.d[k] = 0.0;
            for (i, v) in upper.col(k) {
                if i == k {
                    self.d[k] = v;
                    continue;
                }
                self.y_vals[i] = v;
                if !self.y_marker[i] {
                    self.y_marker[i] = true;
                    self.elim_buffer[0] = i;
                    let mut nnz_e = 1usize;
                    let mut next = etree[i];
                    while next != NONE && next < k {
                        if self.y_marker[next] {
                            break;
                        }
                        self.y_marker[next] = true;
                        self.elim_buffer[nnz_e] = next;
                        nnz_e += 1;
                        next = etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        self.y_idx[nnz_y] = self.elim_buffer[nnz_e];
                        nnz_y += 1;
                    }
                }
            }

            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let slot = self.next_in_col[c];
                let yc = self.y_vals[c];
                for j in lp[c]..slot {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[slot] = k;
                let l = yc * self.dinv[c];
                self.lx[slot] = l;
                self.d[k] -= yc * l;
                self.next_in_col[c] += 1;
                self.y_vals[c] = 0.0;
                self.y_marker[c] = false;
            }

            if self.d[k] * signs[k] < eps {
                self.d[k] = signs[k] * delta;
                self.regularised_pivots += 1;
            }
            if !self.d[k].is_finite() || self.d[k] == 0.0 {
                return Err(k);
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.sym.n;
        let lp = &self.sym.lp;
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in lp[i]..lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in lp[i]..lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.d
    }
}
