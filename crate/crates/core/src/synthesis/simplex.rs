//! Bounded dual simplex for covering LPs with 0/1 columns.
//!
//! Rows are `lo_r <= sum_j a_rj x_j <= hi_r` with `a_rj` in {0, 1}. Each row
//! gets a logical variable `s_r = sum_j a_rj x_j` carrying the row bounds, so
//! the system is `A x - s = 0`. Every variable is boxed, which makes any basis
//! dual feasible once nonbasic variables sit at the bound matching the sign
//! of their reduced cost; the dual simplex then restores primal feasibility.
//! The basis is small (one row per node), so it is refactored every iteration.

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Iterations before switching to Bland's rule for the rest of a solve.
const BLAND_AFTER: usize = 500;
const ITERATION_LIMIT: usize = 50_000;

#[derive(Clone, Debug)]
pub(crate) struct CoverLp {
    rows: usize,
    /// Row indices with coefficient 1, per structural column.
    cols: Vec<Vec<usize>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    basis: Vec<usize>,
    /// Position of each variable in the basis, if basic.
    basic_pos: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    binv: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(f64),
    /// No point satisfies the bounds; the row of the logical variable that
    /// could not be repaired, if the failing basic variable was one.
    Infeasible(Option<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct IterationLimit;

impl CoverLp {
    /// Columns are 0/1 membership lists; structural variables are boxed in [0, 1].
    pub fn new(rows: usize, cols: Vec<Vec<usize>>, cost: Vec<f64>, row_lo: &[f64], row_hi: &[f64]) -> Self {
        let n = cols.len();
        let total = n + rows;
        let mut lo = vec![0.0; total];
        let mut hi = vec![1.0; total];
        lo[n..].copy_from_slice(row_lo);
        hi[n..].copy_from_slice(row_hi);
        let mut basic_pos = vec![None; total];
        let basis: Vec<usize> = (n..total).collect();
        for (k, &v) in basis.iter().enumerate() {
            basic_pos[v] = Some(k);
        }
        CoverLp {
            rows,
            cols,
            cost,
            lo,
            hi,
            basis,
            basic_pos,
            at_upper: vec![false; total],
            binv: vec![0.0; rows * rows],
            x: vec![0.0; total],
            d: vec![0.0; total],
            objective: 0.0,
        }
    }

    pub fn structurals(&self) -> usize {
        self.cols.len()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
    }

    /// Values of the structural variables at the last solve.
    pub fn values(&self) -> &[f64] {
        &self.x[..self.cols.len()]
    }

    /// Reduced cost of structural `j` at the last solve.
    pub fn reduced_cost(&self, j: usize) -> f64 {
        self.d[j]
    }

    pub fn is_basic(&self, j: usize) -> bool {
        self.basic_pos[j].is_some()
    }

    fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        let n = self.cols.len();
        if j < n {
            self.cols[j].iter().map(|&r| v[r]).sum()
        } else {
            -v[j - n]
        }
    }

    fn var_cost(&self, j: usize) -> f64 {
        self.cost.get(j).copied().unwrap_or(0.0)
    }

    /// Gauss-Jordan inverse of the basis matrix.
    fn refactor(&mut self) {
        let m = self.rows;
        let n = self.cols.len();
        let mut a = vec![0.0f64; m * m];
        for (k, &v) in self.basis.iter().enumerate() {
            if v < n {
                for &r in &self.cols[v] {
                    a[r * m + k] = 1.0;
                }
            } else {
                a[(v - n) * m + k] = -1.0;
            }
        }
        let inv = &mut self.binv;
        inv.iter_mut().for_each(|e| *e = 0.0);
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i * m + c].abs().total_cmp(&a[j * m + c].abs()))
                .expect("non-empty");
            assert!(a[p * m + c].abs() > 1e-12, "singular basis");
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = a[i * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[i * m + k] -= f * a[c * m + k];
                        inv[i * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
    }

    /// Duals, reduced costs, nonbasic positions and basic values for the current basis.
    fn price(&mut self) {
        let m = self.rows;
        let total = self.lo.len();
        let mut y = vec![0.0; m];
        for (k, &v) in self.basis.iter().enumerate() {
            let c = self.var_cost(v);
            if c != 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += c * self.binv[k * m + i];
                }
            }
        }
        let mut rhs = vec![0.0; m];
        for j in 0..total {
            if self.basic_pos[j].is_some() {
                self.d[j] = 0.0;
                continue;
            }
            let d = self.var_cost(j) - self.column_dot(j, &y);
            self.d[j] = d;
            if self.lo[j] == self.hi[j] {
                self.at_upper[j] = false;
            } else if d < -DUAL_TOL {
                self.at_upper[j] = true;
            } else if d > DUAL_TOL {
                self.at_upper[j] = false;
            }
            let v = if self.at_upper[j] { self.hi[j] } else { self.lo[j] };
            self.x[j] = v;
            if v != 0.0 {
                let n = self.cols.len();
                if j < n {
                    for &r in &self.cols[j] {
                        rhs[r] -= v;
                    }
                } else {
                    rhs[j - n] += v;
                }
            }
        }
        for (k, &v) in self.basis.iter().enumerate() {
            self.x[v] = (0..m).map(|i| self.binv[k * m + i] * rhs[i]).sum();
        }
        self.objective = (0..self.cols.len()).map(|j| self.cost[j] * self.x[j]).sum();
    }

    pub fn solve(&mut self) -> Result<LpOutcome, IterationLimit> {
        let m = self.rows;
        let total = self.lo.len();
        for iter in 0..ITERATION_LIMIT {
            let bland = iter >= BLAND_AFTER;
            self.refactor();
            self.price();

            let mut leave: Option<(usize, f64)> = None;
            for (k, &v) in self.basis.iter().enumerate() {
                let infeas = (self.lo[v] - self.x[v]).max(self.x[v] - self.hi[v]);
                if infeas <= PRIMAL_TOL {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((kk, best)) => {
                        if bland {
                            v < self.basis[kk]
                        } else {
                            infeas > best || (infeas == best && v < self.basis[kk])
                        }
                    }
                };
                if better {
                    leave = Some((k, infeas));
                }
            }
            let Some((k, _)) = leave else {
                return Ok(LpOutcome::Optimal(self.objective));
            };
            let leaving = self.basis[k];
            let increase = self.x[leaving] < self.lo[leaving];
            let rho: Vec<f64> = self.binv[k * m..(k + 1) * m].to_vec();

            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.basic_pos[j].is_some() || self.lo[j] == self.hi[j] {
                    continue;
                }
                let alpha = self.column_dot(j, &rho);
                let eligible = if increase {
                    (!self.at_upper[j] && alpha < -PIVOT_TOL) || (self.at_upper[j] && alpha > PIVOT_TOL)
                } else {
                    (!self.at_upper[j] && alpha > PIVOT_TOL) || (self.at_upper[j] && alpha < -PIVOT_TOL)
                };
                if !eligible {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => {
                        if ratio < br - 1e-12 {
                            true
                        } else if ratio <= br + 1e-12 {
                            !bland && alpha.abs() > ba
                        } else {
                            false
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, alpha.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                let n = self.cols.len();
                return Ok(LpOutcome::Infeasible((leaving >= n).then(|| leaving - n)));
            };
            self.at_upper[leaving] = !increase;
            self.basic_pos[leaving] = None;
            self.basis[k] = q;
            self.basic_pos[q] = Some(k);
        }
        Err(IterationLimit)
    }
}
