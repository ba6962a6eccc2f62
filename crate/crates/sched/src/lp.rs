//! Dense two-phase primal simplex with Bland's anti-cycling rule, plus a
//! cutting-plane driver. Deliberately simple: desk-scale LPs only, dense
//! tableau, no factorization.

pub const TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpModel {
    pub num_vars: usize,
    /// Finite lower bounds (default 0).
    pub lo: Vec<f64>,
    /// Upper bounds; f64::INFINITY marks unbounded above.
    pub hi: Vec<f64>,
    pub rows: Vec<Row>,
    /// Minimization objective coefficients.
    pub objective: Vec<f64>,
}

impl LpModel {
    pub fn new(num_vars: usize) -> Self {
        LpModel {
            num_vars,
            lo: vec![0.0; num_vars],
            hi: vec![f64::INFINITY; num_vars],
            rows: vec![],
            objective: vec![0.0; num_vars],
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Rel, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push(Row { coeffs, rel, rhs });
    }

    /// Sparse convenience: coefficients given as (var, value) pairs.
    pub fn add_row_sparse(&mut self, entries: &[(usize, f64)], rel: Rel, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(v, c) in entries {
            coeffs[v] += c;
        }
        self.rows.push(Row { coeffs, rel, rhs });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    CutLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize) -> Self {
        LpSolution { status, values: vec![0.0; n], objective: f64::NAN }
    }
}

struct Tableau {
    /// (m+1) x (ncols+1); last row = objective, last col = rhs.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let m = self.a.len();
        let w = self.ncols + 1;
        let piv = self.a[r][c];
        let inv = 1.0 / piv;
        for v in self.a[r].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.a[r].clone();
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.a[i][c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i];
            for k in 0..w {
                row[k] -= f * pivot_row[k];
            }
        }
        self.basis[r] = c;
    }
}

/// Run simplex on a tableau whose last row holds reduced costs.
/// `allowed` marks columns permitted to enter the basis.
/// Returns Ok(()) at optimality, or an error status.
fn run_simplex(t: &mut Tableau, allowed: &[bool], iter_cap: usize) -> Result<(), LpStatus> {
    let m = t.a.len() - 1;
    let obj_row = m;
    let mut stall = 0usize;
    let mut bland = false;
    let mut last_obj = t.a[obj_row][t.ncols];
    for _ in 0..iter_cap {
        // entering column
        let mut enter = None;
        if bland {
            for c in 0..t.ncols {
                if allowed[c] && t.a[obj_row][c] < -TOL {
                    enter = Some(c);
                    break;
                }
            }
        } else {
            let mut best = -TOL;
            for c in 0..t.ncols {
                if allowed[c] && t.a[obj_row][c] < best {
                    best = t.a[obj_row][c];
                    enter = Some(c);
                }
            }
        }
        let Some(c) = enter else { return Ok(()) };

        // ratio test; ties broken by smallest basis variable (Bland-safe)
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..m {
            let a = t.a[r][c];
            if a > TOL {
                let ratio = t.a[r][t.ncols] / a;
                if ratio < best_ratio - 1e-12
                    || (ratio < best_ratio + 1e-12
                        && leave.map_or(true, |l| t.basis[r] < t.basis[l]))
                {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(r) = leave else { return Err(LpStatus::Unbounded) };
        t.pivot(r, c);

        let obj = t.a[obj_row][t.ncols];
        if obj > last_obj - 1e-12 {
            stall += 1;
            if stall >= 64 {
                bland = true;
            }
        } else {
            stall = 0;
            bland = false;
        }
        last_obj = obj;
    }
    Err(LpStatus::IterLimit)
}

pub fn solve(model: &LpModel) -> LpSolution {
    let n = model.num_vars;

    // Shift out lower bounds, turn finite upper bounds into extra rows.
    let mut rows: Vec<(Vec<f64>, Rel, f64)> = Vec::with_capacity(model.rows.len() + n);
    for row in &model.rows {
        let shift: f64 = row
            .coeffs
            .iter()
            .zip(&model.lo)
            .map(|(c, l)| c * l)
            .sum();
        rows.push((row.coeffs.clone(), row.rel, row.rhs - shift));
    }
    for v in 0..n {
        if model.hi[v].is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[v] = 1.0;
            rows.push((coeffs, Rel::Le, model.hi[v] - model.lo[v]));
        }
    }

    // Normalize to rhs >= 0.
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            for c in coeffs.iter_mut() {
                *c = -*c;
            }
            *rhs = -*rhs;
            *rel = match *rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
        }
    }

    let m = rows.len();
    // Columns: structural | slacks/surplus | artificials.
    let mut num_slack = 0usize;
    let mut num_art = 0usize;
    for (_, rel, _) in &rows {
        match rel {
            Rel::Le => num_slack += 1,
            Rel::Ge => {
                num_slack += 1;
                num_art += 1;
            }
            Rel::Eq => num_art += 1,
        }
    }
    let ncols = n + num_slack + num_art;
    let mut t = Tableau {
        a: vec![vec![0.0; ncols + 1]; m + 1],
        basis: vec![0; m],
        ncols,
    };
    let mut slack_at = n;
    let mut art_at = n + num_slack;
    let mut artificials = vec![];
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t.a[i][..n].copy_from_slice(coeffs);
        t.a[i][ncols] = *rhs;
        match rel {
            Rel::Le => {
                t.a[i][slack_at] = 1.0;
                t.basis[i] = slack_at;
                slack_at += 1;
            }
            Rel::Ge => {
                t.a[i][slack_at] = -1.0;
                slack_at += 1;
                t.a[i][art_at] = 1.0;
                t.basis[i] = art_at;
                artificials.push(art_at);
                art_at += 1;
            }
            Rel::Eq => {
                t.a[i][art_at] = 1.0;
                t.basis[i] = art_at;
                artificials.push(art_at);
                art_at += 1;
            }
        }
    }

    let iter_cap = 50 * (m + ncols);
    let allowed_all = vec![true; ncols];

    // Phase 1: minimize sum of artificials.
    if !artificials.is_empty() {
        for &c in &artificials {
            t.a[m][c] = 1.0;
        }
        // price out basic artificials
        for i in 0..m {
            if artificials.contains(&t.basis[i]) {
                let row = t.a[i].clone();
                for k in 0..=ncols {
                    t.a[m][k] -= row[k];
                }
            }
        }
        match run_simplex(&mut t, &allowed_all, iter_cap) {
            Ok(()) => {}
            Err(LpStatus::Unbounded) => {
                return LpSolution::failed(LpStatus::IterLimit, n); // cannot happen
            }
            Err(s) => return LpSolution::failed(s, n),
        }
        let phase1 = -t.a[m][ncols];
        if phase1 > 1e-6 {
            return LpSolution::failed(LpStatus::Infeasible, n);
        }
        // Drive remaining basic artificials out where possible.
        for i in 0..m {
            if artificials.contains(&t.basis[i]) {
                if let Some(c) = (0..n + num_slack).find(|&c| t.a[i][c].abs() > 1e-9) {
                    t.pivot(i, c);
                }
            }
        }
    }

    // Phase 2: rebuild the objective row.
    for k in 0..=ncols {
        t.a[m][k] = 0.0;
    }
    t.a[m][..n].copy_from_slice(&model.objective);
    for i in 0..m {
        let b = t.basis[i];
        let f = t.a[m][b];
        if f != 0.0 {
            let row = t.a[i].clone();
            for k in 0..=ncols {
                t.a[m][k] -= f * row[k];
            }
        }
    }
    let mut allowed = vec![true; ncols];
    for &c in &artificials {
        allowed[c] = false;
    }
    match run_simplex(&mut t, &allowed, iter_cap) {
        Ok(()) => {}
        Err(s) => return LpSolution::failed(s, n),
    }

    let mut values = model.lo.clone();
    for i in 0..m {
        if t.basis[i] < n {
            values[t.basis[i]] = model.lo[t.basis[i]] + t.a[i][ncols];
        }
    }
    let objective: f64 = values
        .iter()
        .zip(&model.objective)
        .map(|(v, c)| v * c)
        .sum();
    LpSolution { status: LpStatus::Optimal, values, objective }
}

/// Re-solve after each violated constraint produced by `separator`, until the
/// separator is satisfied or `max_cuts` rounds elapse (status CutLimit).
pub fn cut_loop<F>(mut model: LpModel, mut separator: F, max_cuts: usize) -> (LpSolution, LpModel)
where
    F: FnMut(&LpSolution) -> Option<Row>,
{
    let mut cuts = 0;
    loop {
        let sol = solve(&model);
        if sol.status != LpStatus::Optimal {
            return (sol, model);
        }
        match separator(&sol) {
            None => return (sol, model),
            Some(row) => {
                if cuts >= max_cuts {
                    return (
                        LpSolution { status: LpStatus::CutLimit, ..sol },
                        model,
                    );
                }
                model.rows.push(row);
                cuts += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_lower_bound() {
        let mut m = LpModel::new(1);
        m.objective = vec![1.0];
        m.add_row(vec![1.0], Rel::Ge, 3.0);
        let s = solve(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 3.0).abs() < TOL);
    }

    #[test]
    fn empty_polytope() {
        let mut m = LpModel::new(1);
        m.objective = vec![1.0];
        m.add_row(vec![1.0], Rel::Le, -1.0);
        let s = solve(&m);
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut m = LpModel::new(1);
        m.objective = vec![-1.0];
        let s = solve(&m);
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_upper_bound() {
        // min -x - y  s.t.  x + y = 1, x <= 0.3
        let mut m = LpModel::new(2);
        m.objective = vec![-1.0, -1.0];
        m.hi[0] = 0.3;
        m.add_row(vec![1.0, 1.0], Rel::Eq, 1.0);
        let s = solve(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-6);
    }

    /// Enumerate every basis of the standard form [A | I] z = b to find the
    /// optimum of min cx, Ax <= b, x >= 0 independently of the simplex code.
    fn enumerate_optimum(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
        let m = a.len();
        let n = c.len();
        let total = n + m;
        let mut best = f64::INFINITY;
        let mut cols: Vec<usize> = (0..m).collect();
        loop {
            // solve for basis `cols`
            let mut mat = vec![vec![0.0; m + 1]; m];
            for (bi, &col) in cols.iter().enumerate() {
                for r in 0..m {
                    mat[r][bi] = if col < n { a[r][col] } else if col - n == r { 1.0 } else { 0.0 };
                }
            }
            for r in 0..m {
                mat[r][m] = b[r];
            }
            // gaussian elimination
            let mut ok = true;
            for p in 0..m {
                let (mut mx, mut mr) = (1e-9, usize::MAX);
                for r in p..m {
                    if mat[r][p].abs() > mx {
                        mx = mat[r][p].abs();
                        mr = r;
                    }
                }
                if mr == usize::MAX {
                    ok = false;
                    break;
                }
                mat.swap(p, mr);
                let inv = 1.0 / mat[p][p];
                for k in p..=m {
                    mat[p][k] *= inv;
                }
                for r in 0..m {
                    if r != p && mat[r][p] != 0.0 {
                        let f = mat[r][p];
                        for k in p..=m {
                            mat[r][k] -= f * mat[p][k];
                        }
                    }
                }
            }
            if ok {
                let vals: Vec<f64> = (0..m).map(|r| mat[r][m]).collect();
                if vals.iter().all(|&v| v >= -1e-8) {
                    let obj: f64 = cols
                        .iter()
                        .enumerate()
                        .filter(|(_, &col)| col < n)
                        .map(|(bi, &col)| c[col] * vals[bi])
                        .sum();
                    best = best.min(obj);
                }
            }
            // next combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if cols[i] < total - (m - i) {
                    cols[i] += 1;
                    for k in i + 1..m {
                        cols[k] = cols[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn random_lps_match_basis_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let m = 5;
            let n = 8;
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-3..=5) as f64).collect())
                .collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0..=10) as f64).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=6) as f64).collect();
            // make it a minimization with some negative costs but bounded:
            // min (c - shift) x over a bounded-ish polytope is risky, keep c >= 0
            let mut model = LpModel::new(n);
            model.objective = c.iter().map(|&v| v - 3.0).collect();
            // bound every variable to keep the LP bounded with negative costs
            for v in 0..n {
                model.hi[v] = 4.0;
            }
            for r in 0..m {
                model.add_row(a[r].clone(), Rel::Le, b[r]);
            }
            // oracle works on the Ax <= b, 0 <= x <= 4 polytope: fold bounds in
            let mut a2 = a.clone();
            let mut b2 = b.clone();
            for v in 0..n {
                let mut row = vec![0.0; n];
                row[v] = 1.0;
                a2.push(row);
                b2.push(4.0);
            }
            let c2: Vec<f64> = c.iter().map(|&v| v - 3.0).collect();
            let want = enumerate_optimum(&a2, &b2, &c2);
            let got = solve(&model);
            assert_eq!(got.status, LpStatus::Optimal);
            assert!(
                (got.objective - want).abs() < 1e-5,
                "simplex {} vs enumeration {}",
                got.objective,
                want
            );
        }
    }

    #[test]
    fn determinism() {
        let mut m = LpModel::new(3);
        m.objective = vec![1.0, 2.0, -1.0];
        m.hi = vec![5.0, 5.0, 5.0];
        m.add_row(vec![1.0, 1.0, 1.0], Rel::Le, 7.0);
        m.add_row(vec![2.0, -1.0, 1.0], Rel::Ge, 1.0);
        let a = solve(&m);
        let b = solve(&m);
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn cut_loop_no_cuts_equals_solve() {
        let mut m = LpModel::new(1);
        m.objective = vec![1.0];
        m.add_row(vec![1.0], Rel::Ge, 3.0);
        let plain = solve(&m);
        let (cut, _) = cut_loop(m, |_| None, 10);
        assert_eq!(plain.values, cut.values);
    }

    #[test]
    fn cut_loop_single_cut() {
        // min x, x >= 0; separator demands x >= 2 once
        let mut m = LpModel::new(1);
        m.objective = vec![1.0];
        let mut fired = false;
        let (sol, model) = cut_loop(
            m.clone(),
            move |s| {
                if s.values[0] < 2.0 - TOL && !fired {
                    fired = true;
                    Some(Row { coeffs: vec![1.0], rel: Rel::Ge, rhs: 2.0 })
                } else {
                    None
                }
            },
            10,
        );
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 2.0).abs() < TOL);
        assert_eq!(model.rows.len(), m.rows.len() + 1);
    }

    #[test]
    fn cut_loop_limit() {
        let m = LpModel::new(1);
        let mut k = 0.0;
        let (sol, _) = cut_loop(
            m,
            move |_| {
                k += 1.0;
                Some(Row { coeffs: vec![1.0], rel: Rel::Ge, rhs: k })
            },
            3,
        );
        assert_eq!(sol.status, LpStatus::CutLimit);
    }
}
