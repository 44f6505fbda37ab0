//! Dense two-phase simplex for small linear programs.
//!
//! Variables carry interval bounds (possibly infinite). The solver converts the
//! program to standard form (nonnegative shifted variables, slack/surplus columns,
//! artificials where needed), runs phase 1 to find a feasible basis and phase 2
//! on the real objective. Pricing uses the most negative reduced cost and falls
//! back to Bland's smallest-index rule once a run of degenerate pivots is seen,
//! so the solver terminates and is deterministic for a fixed input.

use super::linalg::Lu;
use crate::error::{check_dim, check_finite, Error, Result};

const PIVOT_TOL: f64 = 1e-12;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;
const HARRIS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub normal: Vec<f64>,
    pub relation: Relation,
    pub offset: f64,
}

impl Constraint {
    pub fn new(normal: Vec<f64>, relation: Relation, offset: f64) -> Self {
        Self {
            normal,
            relation,
            offset,
        }
    }

    /// Signed violation of the constraint at `point` (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs: f64 = self.normal.iter().zip(point).map(|(a, x)| a * x).sum();
        match self.relation {
            Relation::Le => (lhs - self.offset).max(0.0),
            Relation::Ge => (self.offset - lhs).max(0.0),
            Relation::Eq => (lhs - self.offset).abs(),
        }
    }
}

/// `objective · x` subject to `constraints` and per-coordinate `bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A program over `n` free variables.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn constrain(&mut self, normal: Vec<f64>, relation: Relation, offset: f64) {
        self.constraints.push(Constraint::new(normal, relation, offset));
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_finite("objective", &self.objective)?;
        check_dim("bounds", n, self.bounds.len())?;
        for c in &self.constraints {
            check_dim("constraint normal", n, c.normal.len())?;
            check_finite("constraint normal", &c.normal)?;
            if !c.offset.is_finite() {
                return Err(Error::Input("constraint offset is not finite".into()));
            }
        }
        for &(lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Input("malformed variable bound".into()));
            }
        }
        Ok(())
    }

    /// Largest constraint or bound violation at `point`.
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(point))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(point)
            .map(|(&(lo, hi), &x)| (lo - x).max(x - hi).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn optimal(self) -> Option<(f64, Vec<f64>)> {
        match self {
            LpStatus::Optimal { value, point } => Some((value, point)),
            _ => None,
        }
    }
}

/// How an original variable is expressed through standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = shift + y
    Shifted { col: usize, shift: f64 },
    /// x = shift - y
    Mirrored { col: usize, shift: f64 },
    /// x = y⁺ - y⁻
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    width: usize, // columns + rhs
    data: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>, // reduced costs, last entry = -objective
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[pr * w + pc];
        for j in 0..w {
            self.data[pr * w + j] *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        let f = self.cost[pc];
        if f != 0.0 {
            for (x, p) in self.cost.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn set_costs(&mut self, c: &[f64]) {
        let w = self.width;
        self.cost = vec![0.0; w];
        self.cost[..c.len()].copy_from_slice(c);
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    self.cost[j] -= cb * self.data[r * w + j];
                }
            }
        }
    }

    fn point(&self, maps: &[VarMap], total: usize) -> Vec<f64> {
        let mut y = vec![0.0; total];
        for r in 0..self.rows {
            y[self.basis[r]] = self.rhs(r).max(0.0);
        }
        maps.iter()
            .map(|&mp| match mp {
                VarMap::Shifted { col, shift } => shift + y[col],
                VarMap::Mirrored { col, shift } => shift - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }

    /// Textbook ratio test: smallest ratio, ties to the smallest basic index.
    fn min_ratio_row(&self, pc: usize) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-14
                            || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        leave
    }

    /// Harris two-pass ratio test: among rows whose ratio is within the
    /// feasibility tolerance of the minimum, pivot on the largest entry.
    fn harris_row(&self, pc: usize) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOL {
                bound = bound.min((self.rhs(r).max(0.0) + HARRIS_TOL) / a);
            }
        }
        if bound == f64::INFINITY {
            return None;
        }
        let mut leave: Option<(usize, f64, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOL {
                let ratio = self.rhs(r).max(0.0) / a;
                if ratio <= bound && leave.is_none_or(|(_, _, la)| a > la) {
                    leave = Some((r, ratio, a));
                }
            }
        }
        leave.map(|(r, ratio, _)| (r, ratio))
    }

    /// Recomputes the tableau from the original rows for the current basis,
    /// discarding the rounding accumulated by pivoting.
    fn refactor(&mut self, orig: &[f64]) -> bool {
        let (m, w) = (self.rows, self.width);
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for (r, &col) in self.basis.iter().enumerate() {
                b[i * m + r] = orig[i * w + col];
            }
        }
        let Some(lu) = Lu::factor(b, m) else {
            return false;
        };
        let mut column = vec![0.0; m];
        for j in 0..w {
            for i in 0..m {
                column[i] = orig[i * w + j];
            }
            let x = lu.solve(&column);
            for r in 0..m {
                self.data[r * w + j] = x[r];
            }
        }
        true
    }

    /// Dual simplex pivots restoring `rhs ≥ 0` while reduced costs stay
    /// nonnegative. Returns false if some row has no admissible pivot.
    fn restore_feasibility(&mut self, blocked: &[bool], max_iter: usize) -> bool {
        let ncols = self.width - 1;
        for _ in 0..max_iter {
            let mut row = None;
            let mut worst = -FEAS_TOL;
            for r in 0..self.rows {
                if self.rhs(r) < worst {
                    worst = self.rhs(r);
                    row = Some(r);
                }
            }
            let Some(pr) = row else {
                return true;
            };
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..ncols {
                let a = self.at(pr, j);
                if blocked[j] || a >= -PIVOT_TOL {
                    continue;
                }
                let ratio = self.cost[j].max(0.0) / -a;
                if enter.is_none_or(|(_, best)| ratio < best) {
                    enter = Some((j, ratio));
                }
            }
            let Some((pc, _)) = enter else {
                return false;
            };
            self.pivot(pr, pc);
        }
        false
    }

    /// Runs simplex iterations minimizing the current cost row. Columns with
    /// `blocked[j]` never enter.
    fn optimize(&mut self, blocked: &[bool], max_iter: usize) -> Result<bool> {
        let ncols = self.width - 1;
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..ncols {
                if blocked[j] {
                    continue;
                }
                let d = self.cost[j];
                if d < -COST_TOL {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(pc) = enter else {
                return Ok(true);
            };
            let leave = if bland {
                self.min_ratio_row(pc)
            } else {
                self.harris_row(pc)
            };
            let Some((pr, ratio)) = leave else {
                return Ok(false);
            };
            if ratio <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
        }
        Err(Error::SolverFailure("simplex iteration limit reached".into()))
    }
}

/// Solves `lp` in the requested sense.
pub fn solve_lp(lp: &LinearProgram, sense: Sense) -> Result<LpStatus> {
    lp.validate()?;
    let n = lp.dim();
    if lp.bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(LpStatus::Infeasible);
    }

    // Standard-form columns for the original variables.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col: ncols, shift: lo });
            if hi.is_finite() {
                bound_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored { col: ncols, shift: hi });
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }
    let nstruct = ncols;

    // Rows over structural columns: (coefficients, relation, rhs).
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut coef = vec![0.0; nstruct];
        let mut rhs = c.offset;
        for (j, &a) in c.normal.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, shift } => {
                    coef[col] += a;
                    rhs -= a * shift;
                }
                VarMap::Mirrored { col, shift } => {
                    coef[col] -= a;
                    rhs -= a * shift;
                }
                VarMap::Split { pos, neg } => {
                    coef[pos] += a;
                    coef[neg] -= a;
                }
            }
        }
        rows.push((coef, c.relation, rhs));
    }
    for &(col, ub) in &bound_rows {
        let mut coef = vec![0.0; nstruct];
        coef[col] = 1.0;
        rows.push((coef, Relation::Le, ub));
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|a| *a = -*a);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let nart = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let total = nstruct + nslack + nart;
    let width = total + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    let mut slack = nstruct;
    let mut art = nstruct + nslack;
    for (r, (coef, rel, rhs)) in rows.iter().enumerate() {
        let base = r * width;
        data[base..base + nstruct].copy_from_slice(coef);
        data[base + width - 1] = *rhs;
        match rel {
            Relation::Le => {
                data[base + slack] = 1.0;
                basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                data[base + slack] = -1.0;
                slack += 1;
                data[base + art] = 1.0;
                basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                data[base + art] = 1.0;
                basis[r] = art;
                art += 1;
            }
        }
    }
    let orig = data.clone();
    let mut tab = Tableau {
        rows: m,
        width,
        data,
        basis,
        cost: Vec::new(),
    };
    let max_iter = 200 * (m + total) + 1000;
    let is_art = |j: usize| j >= nstruct + nslack && j < total;

    // Phase 1.
    if nart > 0 {
        let mut c1 = vec![0.0; total];
        c1[nstruct + nslack..total].iter_mut().for_each(|c| *c = 1.0);
        tab.set_costs(&c1);
        let blocked = vec![false; total];
        tab.optimize(&blocked, max_iter)?;
        let infeas = -tab.cost[width - 1];
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return Ok(LpStatus::Infeasible);
        }
        // Drive artificials out of the basis where possible.
        for r in 0..m {
            if is_art(tab.basis[r]) {
                let mut best = None;
                let mut best_abs = 1e-9;
                for j in 0..nstruct + nslack {
                    let a = tab.at(r, j).abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(j);
                    }
                }
                if let Some(j) = best {
                    tab.pivot(r, j);
                }
            }
        }
    }

    // Phase 2.
    let mut c2 = vec![0.0; total];
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for (j, &c) in lp.objective.iter().enumerate() {
        let c = sign * c;
        match maps[j] {
            VarMap::Shifted { col, .. } => c2[col] += c,
            VarMap::Mirrored { col, .. } => c2[col] -= c,
            VarMap::Split { pos, neg } => {
                c2[pos] += c;
                c2[neg] -= c;
            }
        }
    }
    tab.set_costs(&c2);
    let blocked: Vec<bool> = (0..total).map(is_art).collect();
    if !tab.optimize(&blocked, max_iter)? {
        return Ok(LpStatus::Unbounded);
    }

    let scale = 1.0
        + lp
            .constraints
            .iter()
            .map(|c| c.offset.abs())
            .fold(0.0, f64::max);
    let mut point = tab.point(&maps, total);
    let mut violation = lp.max_violation(&point);
    if violation > FEAS_TOL * scale {
        // Rounding drift: rebuild the tableau for the final basis, repair
        // primal feasibility with dual pivots, then finish with primal ones.
        if tab.refactor(&orig) {
            tab.set_costs(&c2);
            if tab.restore_feasibility(&blocked, max_iter) && tab.optimize(&blocked, max_iter)? {
                point = tab.point(&maps, total);
                violation = lp.max_violation(&point);
            }
        }
    }
    if violation > FEAS_TOL * scale {
        return Err(Error::SolverFailure(format!(
            "optimal point violates constraints by {violation:e}"
        )));
    }
    let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    Ok(LpStatus::Optimal { value, point })
}
