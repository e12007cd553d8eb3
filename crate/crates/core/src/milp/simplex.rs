//! Bounded-variable primal/dual simplex on a dense basis inverse.
//!
//! Every row is brought to equality form `a'x + s = b` with a slack
//! whose bounds encode the sense (`<=` gives `s in [0, inf)`, `>=`
//! gives `s in (-inf, 0]`, `=` pins `s` to zero). A cold solve runs a
//! phase-1 over artificial columns followed by the real objective.
//!
//! [`LpEngine`] keeps the instance and its factorization alive across
//! repeated solves under changing variable bounds — branch-and-bound
//! moves from node to node by rebinding bounds and re-optimizing with a
//! dual-simplex restoration pass (the basis matrix is bound-independent,
//! so the factorization carries over). Refactorization runs on a global
//! pivot counter to keep drift in check.

use super::{ModelBuilder, ModelError, Objective, SolveResult, SolveStatus, SolverParams};

const REFACTOR_INTERVAL: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLo,
    AtHi,
    /// Nonbasic free variable resting at zero.
    FreeZero,
}

struct Simplex {
    m: usize,
    ncols: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    state: Vec<VarState>,
    xval: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    pivots_since_refactor: usize,
    cost_scale: f64,
    bland: bool,
    degen_streak: usize,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Progress,
}

impl Simplex {
    fn pick_start(lo: f64, hi: f64) -> (VarState, f64) {
        if lo.is_finite() {
            (VarState::AtLo, lo)
        } else if hi.is_finite() {
            (VarState::AtHi, hi)
        } else {
            (VarState::FreeZero, 0.0)
        }
    }

    fn refactorize(&mut self) -> Result<(), ModelError> {
        self.pivots_since_refactor = 0;
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut b = vec![0.0f64; m * m];
        for (pos, &col) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[col] {
                b[r * m + pos] = a;
            }
        }
        let mut inv = vec![0.0f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_mag = b[k * m + k].abs();
            for r in (k + 1)..m {
                let mag = b[r * m + k].abs();
                if mag > piv_mag {
                    piv_mag = mag;
                    piv_row = r;
                }
            }
            if piv_mag < 1e-12 {
                return Err(ModelError::Numeric {
                    phase: "refactorization".into(),
                    detail: format!("singular basis at pivot {k}"),
                });
            }
            if piv_row != k {
                for c in 0..m {
                    b.swap(k * m + c, piv_row * m + c);
                    inv.swap(k * m + c, piv_row * m + c);
                }
            }
            let piv = b[k * m + k];
            let inv_piv = 1.0 / piv;
            for c in 0..m {
                b[k * m + c] *= inv_piv;
                inv[k * m + c] *= inv_piv;
            }
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = b[r * m + k];
                if f != 0.0 {
                    for c in 0..m {
                        b[r * m + c] -= f * b[k * m + c];
                        inv[r * m + c] -= f * inv[k * m + c];
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basic_values();
        Ok(())
    }

    /// x_B = B^-1 (b - N x_N), refreshing stored basic values.
    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for j in 0..self.ncols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.xval[j];
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    resid[r] -= a * v;
                }
            }
        }
        for pos in 0..m {
            let mut v = 0.0;
            for r in 0..m {
                v += self.binv[pos * m + r] * resid[r];
            }
            self.xval[self.basis[pos]] = v;
        }
    }

    /// y' = c_B' B^-1 for the given cost vector.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0f64; m];
        for pos in 0..m {
            let cb = cost[self.basis[pos]];
            if cb != 0.0 {
                let row = &self.binv[pos * m..(pos + 1) * m];
                for i in 0..m {
                    y[i] += cb * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for &(r, a) in &self.cols[j] {
            d -= y[r] * a;
        }
        d
    }

    /// w = B^-1 A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0f64; m];
        for &(r, a) in &self.cols[j] {
            for pos in 0..m {
                w[pos] += self.binv[pos * m + r] * a;
            }
        }
        w
    }

    /// Replaces the basic variable at `piv_pos` with column `j`, given
    /// `w = B^-1 A_j`.
    fn update_basis(&mut self, piv_pos: usize, j: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[piv_pos];
        let inv_piv = 1.0 / piv;
        for c in 0..m {
            self.binv[piv_pos * m + c] *= inv_piv;
        }
        for pos in 0..m {
            if pos == piv_pos {
                continue;
            }
            let f = w[pos];
            if f != 0.0 {
                for c in 0..m {
                    self.binv[pos * m + c] -= f * self.binv[piv_pos * m + c];
                }
            }
        }
        self.state[j] = VarState::Basic(piv_pos);
        self.basis[piv_pos] = j;
        self.iterations += 1;
        self.pivots_since_refactor += 1;
    }

    fn choose_entering(&self, cost: &[f64], y: &[f64], tol: f64) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            let dirs: (bool, bool) = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLo => (self.hi[j] > self.lo[j], false),
                VarState::AtHi => (false, self.lo[j] < self.hi[j]),
                VarState::FreeZero => (true, true),
            };
            if !dirs.0 && !dirs.1 {
                continue;
            }
            let d = self.reduced_cost(cost, y, j);
            let (attract, dir) = if dirs.0 && d < -tol {
                (-d, 1.0)
            } else if dirs.1 && d > tol {
                (d, -1.0)
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir, d));
            }
            match best {
                Some((_, _, bd)) if attract <= bd.abs() => {}
                _ => best = Some((j, dir, d)),
            }
        }
        best
    }

    fn step(&mut self, cost: &[f64], tol: f64) -> Result<StepOutcome, ModelError> {
        let y = self.duals(cost);
        let Some((j, dir, _)) = self.choose_entering(cost, &y, tol) else {
            return Ok(StepOutcome::Optimal);
        };
        let w = self.ftran(j);
        let own_range = self.hi[j] - self.lo[j];
        let own_limit = if own_range.is_finite() { own_range } else { f64::INFINITY };

        // Harris-style two-pass ratio test: find the tightest ratio, then
        // take the largest pivot among candidates within a small slack of
        // it. Tiny pivots wreck the factorization, so they only win when
        // nothing better blocks.
        let mut min_ratio = f64::INFINITY;
        for pos in 0..self.m {
            let wk = w[pos];
            if wk.abs() <= PIVOT_TOL {
                continue;
            }
            let g = -dir * wk;
            let col = self.basis[pos];
            let x = self.xval[col];
            let bound = if g > 0.0 { self.hi[col] } else { self.lo[col] };
            if !bound.is_finite() {
                continue;
            }
            min_ratio = min_ratio.min(((bound - x) / g).max(0.0));
        }
        let relaxed = min_ratio + 1e-9 + 1e-7 * min_ratio.abs();
        let mut best_ratio = f64::INFINITY;
        let mut leaving: Option<(usize, f64, bool)> = None;
        if min_ratio.is_finite() {
            let mut best_piv = 0.0f64;
            for pos in 0..self.m {
                let wk = w[pos];
                if wk.abs() <= PIVOT_TOL {
                    continue;
                }
                let g = -dir * wk;
                let col = self.basis[pos];
                let x = self.xval[col];
                let (bound, hits_upper) =
                    if g > 0.0 { (self.hi[col], true) } else { (self.lo[col], false) };
                if !bound.is_finite() {
                    continue;
                }
                let ratio = ((bound - x) / g).max(0.0);
                if ratio <= relaxed && wk.abs() > best_piv {
                    best_piv = wk.abs();
                    best_ratio = ratio;
                    leaving = Some((pos, wk.abs(), hits_upper));
                }
            }
        }

        if own_limit <= best_ratio {
            if own_limit.is_infinite() {
                return Ok(StepOutcome::Unbounded);
            }
            let delta = own_limit;
            for pos in 0..self.m {
                let g = -dir * w[pos];
                if g != 0.0 {
                    self.xval[self.basis[pos]] += g * delta;
                }
            }
            self.state[j] = if dir > 0.0 { VarState::AtHi } else { VarState::AtLo };
            self.xval[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            self.note_progress(delta);
            return Ok(StepOutcome::Progress);
        }

        let Some((piv_pos, _, hits_upper)) = leaving else {
            return Ok(StepOutcome::Unbounded);
        };
        let delta = best_ratio;
        for pos in 0..self.m {
            let g = -dir * w[pos];
            if g != 0.0 {
                self.xval[self.basis[pos]] += g * delta;
            }
        }
        let leave_col = self.basis[piv_pos];
        self.xval[leave_col] = if hits_upper { self.hi[leave_col] } else { self.lo[leave_col] };
        self.state[leave_col] = if hits_upper { VarState::AtHi } else { VarState::AtLo };
        self.xval[j] += dir * delta;
        self.update_basis(piv_pos, j, &w);
        self.note_progress(delta);
        Ok(StepOutcome::Progress)
    }

    /// Worst row residual `|b - Ax|` at the current point.
    fn residual_norm(&self) -> f64 {
        let mut resid = self.rhs.clone();
        for j in 0..self.ncols {
            let v = self.xval[j];
            if v != 0.0 {
                for &(r, a) in &self.cols[j] {
                    resid[r] -= a * v;
                }
            }
        }
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        resid.iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale
    }

    /// Worst bound violation over basic variables.
    fn bound_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for pos in 0..self.m {
            let col = self.basis[pos];
            let x = self.xval[col];
            worst = worst.max(self.lo[col] - x).max(x - self.hi[col]);
        }
        worst
    }

    fn note_progress(&mut self, delta: f64) {
        if delta > 1e-10 {
            self.degen_streak = 0;
            self.bland = false;
        } else {
            self.degen_streak += 1;
            if self.degen_streak > 64 + 2 * self.m {
                self.bland = true;
            }
        }
    }

    fn run(&mut self, cost: &[f64], tol: f64, phase: &str) -> Result<SolveStatus, ModelError> {
        let iter_cap = 2_000 + 200 * (self.m + self.ncols);
        let mut local_iters = 0usize;
        loop {
            if self.pivots_since_refactor >= REFACTOR_INTERVAL {
                self.refactorize()?;
            }
            match self.step(cost, tol)? {
                StepOutcome::Optimal => return Ok(SolveStatus::Optimal),
                StepOutcome::Unbounded => return Ok(SolveStatus::Unbounded),
                StepOutcome::Progress => {}
            }
            local_iters += 1;
            if local_iters > iter_cap {
                return Err(ModelError::Numeric {
                    phase: phase.into(),
                    detail: format!("iteration cap {iter_cap} exceeded"),
                });
            }
        }
    }

    /// Dual-simplex loop: drives out-of-bounds basics onto their violated
    /// bound while keeping reduced costs sign-feasible. `Ok(false)` means
    /// primal infeasible (dual ray found).
    fn dual_restore(&mut self, cost: &[f64], feas_tol: f64) -> Result<bool, ModelError> {
        let m = self.m;
        let iter_cap = 400 + 40 * m;
        for _iter in 0..iter_cap {
            if self.pivots_since_refactor >= REFACTOR_INTERVAL {
                self.refactorize()?;
            }
            let mut worst: Option<(usize, f64, bool)> = None;
            for pos in 0..m {
                let col = self.basis[pos];
                let x = self.xval[col];
                let viol_hi = x - self.hi[col];
                let viol_lo = self.lo[col] - x;
                let (viol, above) =
                    if viol_hi >= viol_lo { (viol_hi, true) } else { (viol_lo, false) };
                if viol > feas_tol {
                    match worst {
                        Some((_, wv, _)) if viol <= wv => {}
                        _ => worst = Some((pos, viol, above)),
                    }
                }
            }
            let Some((piv_pos, _, above)) = worst else {
                return Ok(true);
            };

            let row = self.binv[piv_pos * m..(piv_pos + 1) * m].to_vec();
            let y = self.duals(cost);
            let mu = if above { 1.0 } else { -1.0 };

            // Two passes, as in the primal ratio test: tightest dual ratio
            // first, then the largest pivot within a small slack of it.
            let mut candidates: Vec<(usize, f64, f64)> = Vec::new(); // (col, ratio, |alpha|)
            let mut min_ratio = f64::INFINITY;
            for j in 0..self.ncols {
                let dirs = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLo => (true, false),
                    VarState::AtHi => (false, true),
                    VarState::FreeZero => (true, true),
                };
                if self.hi[j] <= self.lo[j] && !matches!(self.state[j], VarState::FreeZero) {
                    continue;
                }
                let mut alpha = 0.0;
                for &(r, a) in &self.cols[j] {
                    alpha += row[r] * a;
                }
                let scaled = mu * alpha;
                let ok = (dirs.0 && scaled > PIVOT_TOL) || (dirs.1 && scaled < -PIVOT_TOL);
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                let ratio = (d / scaled).max(0.0);
                min_ratio = min_ratio.min(ratio);
                candidates.push((j, ratio, alpha.abs()));
            }
            if candidates.is_empty() {
                return Ok(false);
            }
            let relaxed = min_ratio + 1e-9 * self.cost_scale + 1e-7 * min_ratio.abs();
            let mut e = candidates[0].0;
            let mut best_piv = 0.0f64;
            for &(j, ratio, amag) in &candidates {
                if ratio <= relaxed && amag > best_piv {
                    best_piv = amag;
                    e = j;
                }
            }

            let w = self.ftran(e);
            let alpha_e = w[piv_pos];
            let leave_col = self.basis[piv_pos];
            let bound = if above { self.hi[leave_col] } else { self.lo[leave_col] };
            let delta_e = (self.xval[leave_col] - bound) / alpha_e;
            for pos in 0..m {
                if w[pos] != 0.0 {
                    self.xval[self.basis[pos]] -= w[pos] * delta_e;
                }
            }
            self.xval[e] += delta_e;
            self.xval[leave_col] = bound;
            self.state[leave_col] = if above { VarState::AtHi } else { VarState::AtLo };
            self.update_basis(piv_pos, e, &w);
        }
        Err(ModelError::Numeric {
            phase: "dual restore".into(),
            detail: "iteration cap exceeded".into(),
        })
    }
}

/// A reusable LP solver bound to one model's rows and columns. Solves
/// repeatedly under different variable bounds, carrying the basis (and
/// its factorization) from one solve to the next.
pub(crate) struct LpEngine {
    sx: Simplex,
    maximize: bool,
    base_cols: usize,
    factored: bool,
    costs_user: Vec<f64>,
}

impl LpEngine {
    pub fn new(model: &ModelBuilder) -> Result<Self, ModelError> {
        let n = model.vars.len();
        let m = model.rows.len();
        let maximize = model.objective == Objective::Maximize;

        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in &model.vars {
            lo.push(v.lo);
            hi.push(v.hi);
            cost.push(if maximize { -v.cost } else { v.cost });
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        let mut rhs = Vec::with_capacity(m);
        for (i, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                cols[j].push((i, a));
            }
            let slack = n + i;
            cols[slack].push((i, 1.0));
            let (sl, sh) = match row.sense {
                super::Sense::Le => (0.0, f64::INFINITY),
                super::Sense::Ge => (f64::NEG_INFINITY, 0.0),
                super::Sense::Eq => (0.0, 0.0),
            };
            lo.push(sl);
            hi.push(sh);
            cost.push(0.0);
            rhs.push(row.rhs);
        }
        let cost_scale = 1.0 + cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let costs_user = model.vars.iter().map(|v| v.cost).collect();
        Ok(LpEngine {
            sx: Simplex {
                m,
                ncols: n + m,
                n_struct: n,
                cols,
                lo,
                hi,
                cost,
                rhs,
                state: Vec::new(),
                xval: Vec::new(),
                basis: vec![0; m],
                binv: Vec::new(),
                iterations: 0,
                pivots_since_refactor: 0,
                cost_scale,
                bland: false,
                degen_streak: 0,
            },
            maximize,
            base_cols: n + m,
            factored: false,
            costs_user,
        })
    }

    /// Solves under the given structural bounds, warm-starting from the
    /// current basis when one exists. Falls back to a cold phase-1 start
    /// on numerical failure.
    pub fn solve(
        &mut self,
        params: &SolverParams,
        bounds: &[(f64, f64)],
    ) -> Result<SolveResult, ModelError> {
        debug_assert_eq!(bounds.len(), self.sx.n_struct);
        for &(l, h) in bounds {
            if l > h {
                return Ok(infeasible_result(self.sx.n_struct));
            }
        }
        if self.factored {
            match self.solve_warm(params, bounds) {
                Ok(res) => return Ok(res),
                Err(_) => {
                    self.factored = false; // numerical trouble: cold restart
                }
            }
        }
        self.solve_cold(params, bounds)
    }

    fn apply_bounds(&mut self, bounds: &[(f64, f64)]) {
        let sx = &mut self.sx;
        for (j, &(l, h)) in bounds.iter().enumerate() {
            sx.lo[j] = l;
            sx.hi[j] = h;
            match sx.state[j] {
                VarState::Basic(_) => {}
                VarState::AtLo => {
                    if l.is_finite() {
                        sx.xval[j] = l;
                    } else {
                        sx.state[j] = VarState::FreeZero;
                        sx.xval[j] = 0.0;
                    }
                }
                VarState::AtHi => {
                    if h.is_finite() {
                        sx.xval[j] = h;
                    } else {
                        sx.state[j] = VarState::FreeZero;
                        sx.xval[j] = 0.0;
                    }
                }
                VarState::FreeZero => {}
            }
        }
        sx.recompute_basic_values();
    }

    fn solve_warm(
        &mut self,
        params: &SolverParams,
        bounds: &[(f64, f64)],
    ) -> Result<SolveResult, ModelError> {
        self.apply_bounds(bounds);
        let cost = self.sx.cost.clone();
        let feas_tol = params.feasibility_tol.max(1e-9);
        if !self.sx.dual_restore(&cost, feas_tol)? {
            return Ok(infeasible_result(self.sx.n_struct));
        }
        self.finish(params, &cost)
    }

    fn solve_cold(
        &mut self,
        params: &SolverParams,
        bounds: &[(f64, f64)],
    ) -> Result<SolveResult, ModelError> {
        let sx = &mut self.sx;
        let n = sx.n_struct;
        let m = sx.m;
        // Drop any artificial columns from previous cold solves.
        sx.cols.truncate(self.base_cols);
        sx.lo.truncate(self.base_cols);
        sx.hi.truncate(self.base_cols);
        sx.cost.truncate(self.base_cols);
        sx.ncols = self.base_cols;

        for (j, &(l, h)) in bounds.iter().enumerate() {
            sx.lo[j] = l;
            sx.hi[j] = h;
        }
        sx.state = Vec::with_capacity(sx.ncols);
        sx.xval = Vec::with_capacity(sx.ncols);
        for j in 0..n {
            let (st, v) = Simplex::pick_start(sx.lo[j], sx.hi[j]);
            sx.state.push(st);
            sx.xval.push(v);
        }
        let mut resid = sx.rhs.clone();
        for j in 0..n {
            let v = sx.xval[j];
            if v != 0.0 {
                for &(r, a) in &sx.cols[j] {
                    resid[r] -= a * v;
                }
            }
        }
        let mut art_rows: Vec<(usize, f64)> = Vec::new();
        for i in 0..m {
            let slack = n + i;
            let r = resid[i];
            if r >= sx.lo[slack] - params.feasibility_tol
                && r <= sx.hi[slack] + params.feasibility_tol
            {
                sx.state.push(VarState::Basic(i));
                sx.xval.push(r);
                sx.basis[i] = slack;
            } else {
                let clamped = r.clamp(sx.lo[slack], sx.hi[slack]);
                sx.state
                    .push(if clamped == sx.lo[slack] { VarState::AtLo } else { VarState::AtHi });
                sx.xval.push(clamped);
                art_rows.push((i, r - clamped));
            }
        }
        let mut artificials: Vec<usize> = Vec::new();
        for &(i, gap) in &art_rows {
            let art = sx.ncols;
            sx.cols.push(vec![(i, gap.signum())]);
            sx.lo.push(0.0);
            sx.hi.push(f64::INFINITY);
            sx.cost.push(0.0);
            sx.state.push(VarState::Basic(i));
            sx.xval.push(gap.abs());
            sx.basis[i] = art;
            artificials.push(art);
            sx.ncols += 1;
        }
        sx.refactorize()?;
        self.factored = true;

        let opt_tol = params.optimality_tol.max(1e-10);
        if !artificials.is_empty() {
            let rhs_scale = 1.0 + self.sx.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
            let mut phase1_cost = vec![0.0f64; self.sx.ncols];
            for &a in &artificials {
                phase1_cost[a] = 1.0;
            }
            let status = self.sx.run(&phase1_cost, opt_tol, "phase 1")?;
            if status == SolveStatus::Unbounded {
                return Err(ModelError::Numeric {
                    phase: "phase 1".into(),
                    detail: "unbounded infeasibility objective".into(),
                });
            }
            let infeas: f64 = artificials.iter().map(|&a| self.sx.xval[a]).sum();
            if infeas > params.feasibility_tol * rhs_scale * 10.0 {
                return Ok(infeasible_result(n));
            }
            for &a in &artificials {
                self.sx.lo[a] = 0.0;
                self.sx.hi[a] = 0.0;
                if !matches!(self.sx.state[a], VarState::Basic(_)) {
                    self.sx.state[a] = VarState::AtLo;
                    self.sx.xval[a] = 0.0;
                }
            }
        }
        let cost = self.sx.cost.clone();
        self.finish(params, &cost)
    }

    fn finish(&mut self, params: &SolverParams, cost: &[f64]) -> Result<SolveResult, ModelError> {
        let tol2 = params.optimality_tol.max(1e-10) * self.sx.cost_scale;
        let feas_tol = params.feasibility_tol.max(1e-9);
        let n = self.sx.n_struct;
        let mut status;
        // Optimize, then audit against drift: exact residuals and basic
        // bounds must hold after a fresh factorization, or the basis gets
        // refactored and re-optimized.
        let mut rounds = 0;
        loop {
            status = self.sx.run(cost, tol2, "phase 2")?;
            if status == SolveStatus::Unbounded {
                return Ok(SolveResult {
                    status: SolveStatus::Unbounded,
                    objective_value: if self.maximize { f64::INFINITY } else { f64::NEG_INFINITY },
                    primal_values: vec![0.0; n],
                    dual_values: None,
                    reduced_costs: None,
                    gap: 0.0,
                    simplex_iterations: self.sx.iterations,
                    nodes: 0,
                });
            }
            if self.sx.residual_norm() <= feas_tol * 100.0 && self.sx.bound_violation() <= feas_tol
            {
                break;
            }
            rounds += 1;
            if rounds > 4 {
                return Err(ModelError::Numeric {
                    phase: "post-solve audit".into(),
                    detail: "residuals would not settle".into(),
                });
            }
            self.sx.refactorize()?;
            if !self.sx.dual_restore(cost, feas_tol)? {
                return Ok(infeasible_result(n));
            }
        }
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let y = self.sx.duals(cost);
        let primal: Vec<f64> = (0..n).map(|j| self.sx.xval[j]).collect();
        let objective: f64 = self
            .costs_user
            .iter()
            .enumerate()
            .map(|(j, c)| c * primal[j])
            .sum();
        let duals: Vec<f64> = (0..self.sx.m).map(|i| sign * y[i]).collect();
        let reduced: Vec<f64> = (0..n)
            .map(|j| match self.sx.state[j] {
                VarState::Basic(_) => 0.0,
                _ => sign * self.sx.reduced_cost(cost, &y, j),
            })
            .collect();
        Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective_value: objective,
            primal_values: primal,
            dual_values: Some(duals),
            reduced_costs: Some(reduced),
            gap: 0.0,
            simplex_iterations: self.sx.iterations,
            nodes: 0,
        })
    }
}

fn infeasible_result(n: usize) -> SolveResult {
    SolveResult {
        status: SolveStatus::Infeasible,
        objective_value: f64::NAN,
        primal_values: vec![0.0; n],
        dual_values: None,
        reduced_costs: None,
        gap: 0.0,
        simplex_iterations: 0,
        nodes: 0,
    }
}

pub(crate) fn solve_lp_with_bounds(
    model: &ModelBuilder,
    params: &SolverParams,
    overrides: Option<&[(f64, f64)]>,
) -> Result<SolveResult, ModelError> {
    let mut engine = LpEngine::new(model)?;
    let bounds: Vec<(f64, f64)> = match overrides {
        Some(o) => o.to_vec(),
        None => model.vars.iter().map(|v| (v.lo, v.hi)).collect(),
    };
    engine.solve(params, &bounds)
}

pub(crate) fn solve_lp(
    model: &ModelBuilder,
    params: &SolverParams,
) -> Result<SolveResult, ModelError> {
    solve_lp_with_bounds(model, params, None)
}

#[cfg(test)]
mod tests {
    use super::super::{ModelBuilder, Sense, SolveStatus, SolverParams};
    use super::*;

    #[test]
    fn bound_flip_path() {
        let mut m = ModelBuilder::maximize();
        let x = m.add_var("x", 0.0, 1.0, 1.0).unwrap();
        let y = m.add_var("y", 0.0, 1.0, 1.0).unwrap();
        m.add_row("loose", Sense::Le, 10.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_equality() {
        let mut m = ModelBuilder::minimize();
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0).unwrap();
        let y = m.add_var("y", 0.0, f64::INFINITY, 2.0).unwrap();
        m.add_row("eq", Sense::Eq, -3.0, &[(x, -1.0), (y, -1.0)]).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 3.0).abs() < 1e-8);
        assert!((res.primal_values[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_lp_terminates() {
        let mut m = ModelBuilder::minimize();
        let x = m.add_var("x", 0.0, f64::INFINITY, -1.0).unwrap();
        let y = m.add_var("y", 0.0, f64::INFINITY, -1.0).unwrap();
        m.add_row("r1", Sense::Le, 1.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        m.add_row("r2", Sense::Le, 1.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        m.add_row("r3", Sense::Le, 2.0, &[(x, 2.0), (y, 2.0)]).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value + 1.0).abs() < 1e-8);
    }

    #[test]
    fn boxed_duals_via_reduced_costs() {
        let mut m = ModelBuilder::minimize();
        let x = m.add_var("x", 0.0, 2.0, -1.0).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.value(x) - 2.0).abs() < 1e-9);
        let rc = res.reduced_costs.as_ref().unwrap()[0];
        assert!((rc + 1.0).abs() < 1e-9);
    }

    #[test]
    fn engine_warm_solves_match_cold_under_bound_changes() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(0xfeed);
        let params = SolverParams::default();
        for trial in 0..50 {
            let nv = rng.random_range(3..=8);
            let nr = rng.random_range(2..=8);
            let mut m = ModelBuilder::minimize();
            let mut vars = Vec::new();
            for j in 0..nv {
                let cost = rng.random_range(-4.0..4.0);
                vars.push(m.add_var(format!("x{j}"), 0.0, 1.0, cost).unwrap());
            }
            for i in 0..nr {
                let mut terms = Vec::new();
                for &v in &vars {
                    if rng.random_bool(0.7) {
                        terms.push((v, rng.random_range(-2.0..2.0)));
                    }
                }
                let sense = if rng.random_bool(0.5) { Sense::Le } else { Sense::Ge };
                m.add_row(format!("r{i}"), sense, rng.random_range(-1.0..2.0), &terms)
                    .unwrap();
            }
            let mut engine = LpEngine::new(&m).unwrap();
            let base: Vec<(f64, f64)> = (0..nv).map(|_| (0.0, 1.0)).collect();
            let root = engine.solve(&params, &base).unwrap();
            if root.status != SolveStatus::Optimal {
                continue;
            }
            // A chain of random refixings, each warm solve checked cold.
            let mut current = base.clone();
            for _ in 0..6 {
                let j = rng.random_range(0..nv);
                current[j] = match rng.random_range(0..3) {
                    0 => (0.0, 0.0),
                    1 => (1.0, 1.0),
                    _ => (0.0, 1.0),
                };
                let warm = engine.solve(&params, &current).unwrap();
                let cold = solve_lp_with_bounds(&m, &params, Some(&current)).unwrap();
                assert_eq!(warm.status, cold.status, "trial {trial}");
                if warm.status == SolveStatus::Optimal {
                    assert!(
                        (warm.objective_value - cold.objective_value).abs()
                            <= 1e-6 * (1.0 + cold.objective_value.abs()),
                        "trial {trial}: warm {} vs cold {}",
                        warm.objective_value,
                        cold.objective_value
                    );
                }
            }
        }
    }
}
