//! Dense two-phase simplex for small systems of linear inequalities.
//!
//! Solves `maximize c.x  subject to  A x <= b` where every component of `x`
//! is unrestricted in sign. Free variables are split into nonnegative pairs
//! internally; Bland's rule guarantees termination on degenerate systems.
//! Redundant rows whose artificial variable stays basic after phase 1 are
//! dropped before phase 2.

use thiserror::Error;

/// Pivot-element and reduced-cost threshold.
const TOL: f64 = 1e-9;
/// Phase-1 objective must come this close to zero for feasibility.
const PHASE1_TOL: f64 = 1e-7;

/// One inequality `coeffs . x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// An inequality system over `num_vars` sign-free variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct System {
    pub num_vars: usize,
    pub rows: Vec<Row>,
}

/// Work counters for the deterministic cost model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LpStats {
    pub pivots: u64,
    pub rows: usize,
    pub cols: usize,
}

impl LpStats {
    /// Abstract operation count: tableau sweeps per pivot plus setup.
    pub fn ops(&self) -> u64 {
        let sweep = (self.rows as u64 + 1) * (self.cols as u64 + 1);
        self.pivots * sweep + (self.rows as u64) * (self.cols as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible { x: Vec<f64>, objective: f64 },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub feasibility: Feasibility,
    pub stats: LpStats,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[f64]> {
        match &self.feasibility {
            Feasibility::Feasible { x, .. } => Some(x),
            Feasibility::Infeasible => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimplexError {
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("objective is unbounded above")]
    Unbounded,
    #[error("non-finite coefficient in linear system")]
    NonFinite,
}

impl System {
    pub fn new(num_vars: usize) -> Self {
        System { num_vars, rows: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push(Row { coeffs, rhs });
    }

    /// Phase 1 only: any point satisfying every row, or `Infeasible`.
    pub fn feasible_point(&self) -> Result<LpOutcome, SimplexError> {
        self.solve(None)
    }

    /// Two phases: feasibility, then `maximize objective . x`.
    pub fn maximize(&self, objective: &[f64]) -> Result<LpOutcome, SimplexError> {
        debug_assert_eq!(objective.len(), self.num_vars);
        self.solve(Some(objective))
    }

    fn solve(&self, objective: Option<&[f64]>) -> Result<LpOutcome, SimplexError> {
        for row in &self.rows {
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(SimplexError::NonFinite);
            }
        }
        if let Some(obj) = objective {
            if obj.iter().any(|c| !c.is_finite()) {
                return Err(SimplexError::NonFinite);
            }
        }
        let mut tableau = Tableau::build(self);
        let stats_cols = tableau.cols;
        let feasible = tableau.phase1()?;
        if !feasible {
            return Ok(LpOutcome {
                feasibility: Feasibility::Infeasible,
                stats: LpStats { pivots: tableau.pivots, rows: self.rows.len(), cols: stats_cols },
            });
        }
        if let Some(obj) = objective {
            tableau.phase2(obj)?;
        }
        let x = tableau.extract(self.num_vars);
        let objective_value = match objective {
            Some(obj) => obj.iter().zip(&x).map(|(c, v)| c * v).sum(),
            None => 0.0,
        };
        Ok(LpOutcome {
            feasibility: Feasibility::Feasible { x, objective: objective_value },
            stats: LpStats { pivots: tableau.pivots, rows: self.rows.len(), cols: stats_cols },
        })
    }
}

/// Simplex tableau. Columns: `2 * num_vars` split structural variables
/// (column `2k` is the positive part of variable `k`, `2k + 1` the negative
/// part), then one slack per row, then artificials for rows that started
/// with a negative right-hand side.
struct Tableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    n_struct: usize,
    /// First artificial column; also the column count after cleanup.
    art_start: usize,
    cols: usize,
    pivots: u64,
}

impl Tableau {
    fn build(system: &System) -> Tableau {
        let m = system.rows.len();
        let n_struct = 2 * system.num_vars;
        let art_start = n_struct + m;
        let n_art = system.rows.iter().filter(|r| r.rhs < 0.0).count();
        let cols = art_start + n_art;

        let mut a = vec![vec![0.0; cols]; m];
        let mut b = vec![0.0; m];
        let mut basis = vec![0usize; m];
        let mut next_art = art_start;
        for (i, row) in system.rows.iter().enumerate() {
            let flip = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            for (k, &c) in row.coeffs.iter().enumerate() {
                a[i][2 * k] = flip * c;
                a[i][2 * k + 1] = -flip * c;
            }
            a[i][n_struct + i] = flip;
            b[i] = flip * row.rhs;
            if flip < 0.0 {
                a[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = n_struct + i;
            }
        }
        Tableau { a, b, basis, n_struct, art_start, cols, pivots: 0 }
    }

    fn iteration_cap(&self) -> u64 {
        1_000u64.max(200 * (self.a.len() as u64 + self.cols as u64))
    }

    /// Minimize the artificial sum; returns whether the system is feasible.
    /// Afterwards the artificial columns are removed and redundant rows with
    /// a basic artificial are deleted.
    fn phase1(&mut self) -> Result<bool, SimplexError> {
        if self.art_start == self.cols {
            return Ok(true);
        }
        let mut cost = vec![0.0; self.cols];
        for c in &mut cost[self.art_start..self.cols] {
            *c = -1.0;
        }
        self.run(&cost)?;
        let art_sum: f64 = self
            .basis
            .iter()
            .zip(&self.b)
            .filter(|(v, _)| **v >= self.art_start)
            .map(|(_, rhs)| rhs)
            .sum();
        if art_sum > PHASE1_TOL {
            return Ok(false);
        }

        // Drive remaining zero-level artificials out of the basis, or drop
        // the row entirely when it is redundant.
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= self.art_start {
                let pivot_col =
                    (0..self.art_start).find(|&j| self.a[i][j].abs() > TOL);
                match pivot_col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.a.swap_remove(i);
                        self.b.swap_remove(i);
                        self.basis.swap_remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in &mut self.a {
            row.truncate(self.art_start);
        }
        self.cols = self.art_start;
        Ok(true)
    }

    fn phase2(&mut self, objective: &[f64]) -> Result<(), SimplexError> {
        let mut cost = vec![0.0; self.cols];
        for (k, &c) in objective.iter().enumerate() {
            cost[2 * k] = c;
            cost[2 * k + 1] = -c;
        }
        self.run(&cost)
    }

    /// Bland-rule simplex loop maximizing `cost . vars`.
    fn run(&mut self, cost: &[f64]) -> Result<(), SimplexError> {
        let cap = self.iteration_cap();
        loop {
            let entering = self.entering(cost);
            let Some(enter) = entering else { return Ok(()) };
            let Some(leave) = self.leaving(enter) else {
                return Err(SimplexError::Unbounded);
            };
            self.pivot(leave, enter);
            if self.pivots > cap {
                return Err(SimplexError::IterationLimit);
            }
        }
    }

    /// Smallest column index with positive reduced cost (Bland).
    fn entering(&self, cost: &[f64]) -> Option<usize> {
        for j in 0..self.cols {
            if self.basis.contains(&j) {
                continue;
            }
            let mut reduced = cost[j];
            for (i, row) in self.a.iter().enumerate() {
                reduced -= cost[self.basis[i]] * row[j];
            }
            if reduced > TOL {
                return Some(j);
            }
        }
        None
    }

    /// Minimum-ratio row; ties resolved towards the smallest basis index.
    fn leaving(&self, enter: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.a.iter().enumerate() {
            let coeff = row[enter];
            if coeff > TOL {
                let ratio = self.b[i] / coeff;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - TOL
                            || (ratio < br + TOL && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        self.pivots += 1;
        let p = self.a[row][col];
        debug_assert!(p.abs() > TOL);
        for v in &mut self.a[row] {
            *v /= p;
        }
        self.b[row] /= p;
        for i in 0..self.a.len() {
            if i == row {
                continue;
            }
            let f = self.a[i][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                let delta = f * self.a[row][j];
                self.a[i][j] -= delta;
            }
            self.b[i] -= f * self.b[row];
        }
        self.basis[row] = col;
    }

    /// Recombine the split pairs into signed variable values.
    fn extract(&self, num_vars: usize) -> Vec<f64> {
        let mut value = vec![0.0; self.n_struct];
        for (i, &v) in self.basis.iter().enumerate() {
            if v < self.n_struct {
                value[v] = self.b[i];
            }
        }
        (0..num_vars).map(|k| value[2 * k] - value[2 * k + 1]).collect()
    }
}
