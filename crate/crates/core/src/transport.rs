//! Distribution distances: exact Wasserstein via the transportation linear
//! program, an entropic (Sinkhorn) approximation with annealing, the 1-D
//! closed form, and the sliced distance over deterministic projection
//! angles.
//!
//! The exact solver is a transportation simplex over the bipartite
//! support-atom graph. Optimality is certified after the pivot loop: dual
//! feasibility of the potentials, complementary slackness of the flows, and
//! a vanishing duality gap. Masses are real-valued; degenerate pivots are
//! handled by switching the entering rule to Bland's after a soft pivot
//! budget.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimate::Histogram;
use crate::exec::map_range;

/// Point mass at a planar position.
pub type Atom = ((f64, f64), f64);

/// Split atom list: positions and masses.
type PositionsMasses = (Vec<(f64, f64)>, Vec<f64>);

/// Pairwise `p`-power Euclidean costs between two atom sets.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    entries: Vec<f64>,
    n_cols: usize,
    exponent: f64,
}

impl CostMatrix {
    pub fn new(sources: &[(f64, f64)], targets: &[(f64, f64)], exponent: f64) -> Self {
        let n_cols = targets.len();
        let mut entries = Vec::with_capacity(sources.len() * n_cols);
        for &(sx, sy) in sources {
            for &(tx, ty) in targets {
                entries.push((sx - tx).hypot(sy - ty).powf(exponent));
            }
        }
        CostMatrix {
            entries,
            n_cols,
            exponent,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    fn median(&self) -> f64 {
        let mut v = self.entries.clone();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            0.0
        } else {
            v[v.len() / 2]
        }
    }
}

/// A coupling matrix realizing a transport objective between two atom sets.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    source_mass: Vec<f64>,
    target_mass: Vec<f64>,
    coupling: Vec<f64>,
    objective: f64,
    value: f64,
}

impl TransportPlan {
    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn n_sources(&self) -> usize {
        self.source_mass.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_mass.len()
    }

    /// Transport cost `sum c_ij R_ij` (the p-th power of the distance).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// The distance, `objective^(1/p)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Largest deviation of the plan's marginals from the prescribed
    /// masses.
    pub fn marginal_violation(&self) -> f64 {
        let m = self.source_mass.len();
        let n = self.target_mass.len();
        let mut worst = 0.0f64;
        for i in 0..m {
            let row: f64 = self.coupling[i * n..(i + 1) * n].iter().sum();
            worst = worst.max((row - self.source_mass[i]).abs());
        }
        for j in 0..n {
            let col: f64 = (0..m).map(|i| self.coupling[i * n + j]).sum();
            worst = worst.max((col - self.target_mass[j]).abs());
        }
        worst
    }
}

fn support_atoms(h: &Histogram) -> Vec<Atom> {
    let grid = h.grid();
    h.support()
        .into_iter()
        .map(|(c, m)| (grid.cell_center(c), m))
        .collect()
}

fn check_pair(p: &Histogram, q: &Histogram) -> Result<()> {
    if p.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Exact Wasserstein distance: solves the transportation LP between the two
/// histograms' support atoms and returns `(objective)^(1/p)` with the
/// optimal plan. Refused above [`EXACT_SUPPORT_CAP`] combined support
/// atoms.
pub fn wasserstein_exact(p: &Histogram, q: &Histogram, exponent: f64) -> Result<(f64, TransportPlan)> {
    check_pair(p, q)?;
    let a = support_atoms(p);
    let b = support_atoms(q);
    let support = a.len() + b.len();
    if support > EXACT_SUPPORT_CAP {
        return Err(Error::SupportTooLarge {
            support,
            cap: EXACT_SUPPORT_CAP,
        });
    }
    wasserstein_exact_atoms(&a, &b, exponent)
}

/// Combined-support cap for the exact LP; larger instances route to the
/// Sinkhorn approximation.
pub const EXACT_SUPPORT_CAP: usize = 500;

/// Exact transport between explicit atom sets.
pub fn wasserstein_exact_atoms(a: &[Atom], b: &[Atom], exponent: f64) -> Result<(f64, TransportPlan)> {
    let (a_pos, a_mass) = split_atoms(a)?;
    let (b_pos, b_mass) = split_atoms(b)?;

    // Identical distributions short-circuit to the trivial diagonal plan.
    if a_pos == b_pos
        && a_mass
            .iter()
            .zip(&b_mass)
            .all(|(x, y)| (x - y).abs() <= 1e-12)
    {
        let n = a_pos.len();
        let mut coupling = vec![0.0; n * n];
        for (i, &m) in a_mass.iter().enumerate() {
            coupling[i * n + i] = m;
        }
        let plan = TransportPlan {
            source_mass: a_mass,
            target_mass: b_mass,
            coupling,
            objective: 0.0,
            value: 0.0,
        };
        return Ok((0.0, plan));
    }

    let cost = CostMatrix::new(&a_pos, &b_pos, exponent);
    let coupling = solve_transport(&a_mass, &b_mass, &cost)?;
    let objective: f64 = coupling
        .iter()
        .zip(&cost.entries)
        .map(|(x, c)| x * c)
        .sum();
    let value = objective.max(0.0).powf(1.0 / exponent);
    let plan = TransportPlan {
        source_mass: a_mass,
        target_mass: b_mass,
        coupling,
        objective,
        value,
    };
    Ok((value, plan))
}

fn split_atoms(atoms: &[Atom]) -> Result<PositionsMasses> {
    if atoms.is_empty() {
        return Err(Error::EmptyInput("no support atoms".into()));
    }
    let total: f64 = atoms.iter().map(|(_, m)| m).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(total));
    }
    if atoms.iter().any(|&(_, m)| m < 0.0) {
        return Err(Error::ShapeMismatch("negative atom mass".into()));
    }
    let positions = atoms.iter().map(|&(p, _)| p).collect();
    let masses = atoms.iter().map(|&(_, m)| m).collect();
    Ok((positions, masses))
}

/// Transportation simplex. Returns the optimal coupling, row-major.
fn solve_transport(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<Vec<f64>> {
    let m = a.len();
    let n = b.len();
    // Balance the (already nearly equal) totals exactly.
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    let a: Vec<f64> = a.to_vec();
    let b: Vec<f64> = b.iter().map(|x| x * sum_a / sum_b).collect();

    let scale = cost.max_abs().max(1.0);
    let opt_tol = 1e-11 * scale;

    // Basic arcs (i, j, flow); the basis is a spanning tree over the m row
    // nodes and n column nodes.
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);

    // Northwest-corner initial solution.
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut a_rem = a[0];
        let mut b_rem = b[0];
        loop {
            let f = a_rem.min(b_rem);
            basis.push((i, j, f));
            a_rem -= f;
            b_rem -= f;
            if i + 1 == m && j + 1 == n {
                break;
            }
            // On ties advance the row only, producing a degenerate basic
            // cell and keeping exactly m + n - 1 arcs.
            if a_rem <= b_rem && i + 1 < m {
                i += 1;
                a_rem = a[i];
            } else {
                j += 1;
                b_rem = b[j];
            }
        }
    }

    let soft_cap = 64 * (m + n) + 1024;
    let hard_cap = 1024 * (m + n) + 65_536;
    let mut pivots = 0usize;

    loop {
        // Potentials from the basis tree: u_i + v_j = c_ij on basic arcs.
        let (u, v) = potentials(&basis, m, n, cost)?;

        // Entering arc: most negative reduced cost, or Bland's rule (first
        // negative) once the soft budget is spent.
        let bland = pivots > soft_cap;
        let mut enter: Option<(usize, usize, f64)> = None;
        'scan: for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                let rc = cost.at(i, j) - ui - vj;
                if rc < -opt_tol {
                    match enter {
                        Some((_, _, best)) if rc >= best => {}
                        _ => enter = Some((i, j, rc)),
                    }
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = enter else { break };

        pivots += 1;
        if pivots > hard_cap {
            return Err(Error::TransportFailed(format!(
                "pivot budget exhausted after {pivots} pivots"
            )));
        }

        // Unique tree path from row node ei to column node ej; the cycle is
        // that path plus the entering arc.
        let path = tree_path(&basis, m, n, ei, ej)?;
        // Arcs along the path alternate -,+,-,... starting at the arc that
        // shares row ei with the entering arc.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (k, &arc) in path.iter().enumerate() {
            if k % 2 == 0 {
                let flow = basis[arc].2;
                if flow < theta {
                    theta = flow;
                    leave = arc;
                }
            }
        }
        if leave == usize::MAX {
            return Err(Error::TransportFailed("cycle without leaving arc".into()));
        }
        for (k, &arc) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[arc].2 = (basis[arc].2 - theta).max(0.0);
            } else {
                basis[arc].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }

    // Certify: dual feasibility, complementary slackness, duality gap.
    let (u, v) = potentials(&basis, m, n, cost)?;
    let mut objective = 0.0;
    for &(i, j, f) in &basis {
        objective += cost.at(i, j) * f;
        if f > 1e-12 && (cost.at(i, j) - u[i] - v[j]).abs() > 1e-9 * scale {
            return Err(Error::TransportFailed(
                "complementary slackness violated".into(),
            ));
        }
    }
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            if cost.at(i, j) - ui - vj < -1e-9 * scale {
                return Err(Error::TransportFailed("dual infeasibility".into()));
            }
        }
    }
    let dual: f64 = u.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>()
        + v.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
    if (objective - dual).abs() > 1e-7 * objective.abs().max(1.0) {
        return Err(Error::TransportFailed(format!(
            "duality gap {} too large",
            objective - dual
        )));
    }

    let mut coupling = vec![0.0; m * n];
    for &(i, j, f) in &basis {
        coupling[i * n + j] = f;
    }
    // Feasibility of the final plan.
    for i in 0..m {
        let row: f64 = coupling[i * n..(i + 1) * n].iter().sum();
        if (row - a[i]).abs() > 1e-9 {
            return Err(Error::TransportFailed(format!(
                "row marginal off by {}",
                row - a[i]
            )));
        }
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| coupling[i * n + j]).sum();
        if (col - b[j]).abs() > 1e-9 {
            return Err(Error::TransportFailed(format!(
                "column marginal off by {}",
                col - b[j]
            )));
        }
    }
    Ok(coupling)
}

/// Solves `u_i + v_j = c_ij` over the basis tree, `u_0 = 0`.
fn potentials(
    basis: &[(usize, usize, f64)],
    m: usize,
    n: usize,
    cost: &CostMatrix,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut row_arcs: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        row_arcs[i].push(k);
        col_arcs[j].push(k);
    }
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    // BFS over tree nodes: rows 0..m, cols m..m+n.
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        if node < m {
            for &k in &row_arcs[node] {
                let (i, j, _) = basis[k];
                if v[j].is_nan() {
                    v[j] = cost.at(i, j) - u[i];
                    queue.push_back(m + j);
                }
            }
        } else {
            let jn = node - m;
            for &k in &col_arcs[jn] {
                let (i, j, _) = basis[k];
                if u[i].is_nan() {
                    u[i] = cost.at(i, j) - v[j];
                    queue.push_back(i);
                }
            }
        }
    }
    if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
        return Err(Error::TransportFailed("basis tree is disconnected".into()));
    }
    Ok((u, v))
}

/// Unique path of basic arcs from row node `ei` to column node `ej`.
fn tree_path(
    basis: &[(usize, usize, f64)],
    m: usize,
    n: usize,
    ei: usize,
    ej: usize,
) -> Result<Vec<usize>> {
    let mut row_arcs: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        row_arcs[i].push(k);
        col_arcs[j].push(k);
    }
    let total = m + n;
    let mut parent_arc = vec![usize::MAX; total];
    let mut parent_node = vec![usize::MAX; total];
    let mut seen = vec![false; total];
    seen[ei] = true;
    let mut queue = std::collections::VecDeque::from([ei]);
    while let Some(node) = queue.pop_front() {
        if node == m + ej {
            break;
        }
        let arcs = if node < m {
            &row_arcs[node]
        } else {
            &col_arcs[node - m]
        };
        for &k in arcs {
            let (i, j, _) = basis[k];
            let next = if node < m { m + j } else { i };
            if !seen[next] {
                seen[next] = true;
                parent_arc[next] = k;
                parent_node[next] = node;
                queue.push_back(next);
            }
        }
    }
    if !seen[m + ej] {
        return Err(Error::TransportFailed("basis tree is disconnected".into()));
    }
    let mut path = Vec::new();
    let mut node = m + ej;
    while node != ei {
        path.push(parent_arc[node]);
        node = parent_node[node];
    }
    path.reverse();
    Ok(path)
}

/// Outcome of one annealed Sinkhorn solve.
#[derive(Clone, Debug)]
pub struct SinkhornOutcome {
    /// Distance from the rounded feasible plan, `objective^(1/p)`.
    pub value: f64,
    /// Rounded-plan distance after each annealing level, coarsest first.
    pub level_values: Vec<f64>,
    /// L1 marginal violation of the unrounded plan at the last level.
    pub marginal_violation: f64,
}

/// Number of annealing levels; the regularization halves at each.
pub const SINKHORN_LEVELS: usize = 6;

/// Entropic approximation of the transport distance with an annealing
/// schedule, log-domain scaling, and feasible rounding of the final plan.
pub fn sinkhorn(
    p: &Histogram,
    q: &Histogram,
    exponent: f64,
    reg: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutcome> {
    check_pair(p, q)?;
    sinkhorn_atoms(
        &support_atoms(p),
        &support_atoms(q),
        exponent,
        reg,
        max_iter,
        tol,
    )
}

/// [`sinkhorn`] with the default schedule: starting regularization a tenth
/// of the median cost, tolerance 1e-6, 10000 iterations per level.
pub fn sinkhorn_default(p: &Histogram, q: &Histogram, exponent: f64) -> Result<SinkhornOutcome> {
    check_pair(p, q)?;
    let a = support_atoms(p);
    let b = support_atoms(q);
    let (a_pos, _) = split_atoms(&a)?;
    let (b_pos, _) = split_atoms(&b)?;
    let median = CostMatrix::new(&a_pos, &b_pos, exponent).median();
    let reg = if median > 0.0 { 0.1 * median } else { 0.1 };
    sinkhorn_atoms(&a, &b, exponent, reg, 10_000, 1e-6)
}

/// Entropic transport between explicit atom sets.
pub fn sinkhorn_atoms(
    a: &[Atom],
    b: &[Atom],
    exponent: f64,
    reg: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutcome> {
    crate::error::ensure_positive(reg, "reg")?;
    crate::error::ensure_positive(tol, "tol")?;
    let (a_pos, a_mass) = split_atoms(a)?;
    let (b_pos, b_mass) = split_atoms(b)?;
    let m = a_mass.len();
    let n = b_mass.len();
    let cost = CostMatrix::new(&a_pos, &b_pos, exponent);

    let ln_a: Vec<f64> = a_mass.iter().map(|x| x.ln()).collect();
    let ln_b: Vec<f64> = b_mass.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0f64; m];
    let mut g = vec![0.0f64; n];
    let mut level_values = Vec::with_capacity(SINKHORN_LEVELS);
    let mut violation = f64::INFINITY;

    let mut level_reg = reg;
    for level in 0..SINKHORN_LEVELS {
        for _ in 0..max_iter {
            // f-update makes row marginals exact, g-update the columns.
            f = map_range(m, |i| {
                let row = &cost.entries[i * n..(i + 1) * n];
                let lse = log_sum_exp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / level_reg));
                level_reg * (ln_a[i] - lse)
            });
            g = map_range(n, |j| {
                let lse = log_sum_exp(
                    (0..m).map(|i| (f[i] - cost.at(i, j)) / level_reg),
                );
                level_reg * (ln_b[j] - lse)
            });
            // Row violation after the column update.
            let row_violation: f64 = map_range(m, |i| {
                let row_sum: f64 = (0..n)
                    .map(|j| ((f[i] + g[j] - cost.at(i, j)) / level_reg).exp())
                    .sum();
                (row_sum - a_mass[i]).abs()
            })
            .iter()
            .sum();
            violation = row_violation;
            if row_violation < tol {
                break;
            }
        }
        let plan = rounded_plan(&f, &g, level_reg, &a_mass, &b_mass, &cost);
        let objective: f64 = plan.iter().zip(&cost.entries).map(|(x, c)| x * c).sum();
        level_values.push(objective.max(0.0).powf(1.0 / exponent));
        if level + 1 < SINKHORN_LEVELS {
            level_reg *= 0.5;
        }
    }

    if violation > tol {
        return Err(Error::SinkhornNotConverged {
            violation,
            tolerance: tol,
        });
    }
    Ok(SinkhornOutcome {
        value: *level_values.last().expect("at least one level"),
        level_values,
        marginal_violation: violation,
    })
}

/// Rounds the entropic plan onto the transport polytope: scale rows and
/// columns down to their marginals, then patch the residual with a rank-one
/// correction.
fn rounded_plan(
    f: &[f64],
    g: &[f64],
    reg: f64,
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
) -> Vec<f64> {
    let m = a.len();
    let n = b.len();
    let mut plan: Vec<f64> = map_range(m, |i| {
        (0..n)
            .map(|j| ((f[i] + g[j] - cost.at(i, j)) / reg).exp())
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();

    for i in 0..m {
        let row_sum: f64 = plan[i * n..(i + 1) * n].iter().sum();
        if row_sum > a[i] && row_sum > 0.0 {
            let s = a[i] / row_sum;
            for x in &mut plan[i * n..(i + 1) * n] {
                *x *= s;
            }
        }
    }
    for j in 0..n {
        let col_sum: f64 = (0..m).map(|i| plan[i * n + j]).sum();
        if col_sum > b[j] && col_sum > 0.0 {
            let s = b[j] / col_sum;
            for i in 0..m {
                plan[i * n + j] *= s;
            }
        }
    }
    let err_a: Vec<f64> = (0..m)
        .map(|i| a[i] - plan[i * n..(i + 1) * n].iter().sum::<f64>())
        .collect();
    let err_b: Vec<f64> = (0..n)
        .map(|j| b[j] - (0..m).map(|i| plan[i * n + j]).sum::<f64>())
        .collect();
    let total_err: f64 = err_a.iter().sum();
    if total_err > 1e-300 {
        for i in 0..m {
            for j in 0..n {
                plan[i * n + j] += err_a[i] * err_b[j] / total_err;
            }
        }
    }
    plan
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Closed-form 1-D Wasserstein between weighted atom lists via the
/// quantile coupling. Atoms are (position, mass); masses must each sum to
/// one.
pub fn wasserstein_1d(p: &[(f64, f64)], q: &[(f64, f64)], exponent: f64) -> Result<f64> {
    let sort = |atoms: &[(f64, f64)]| -> Result<Vec<(f64, f64)>> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("no atoms".into()));
        }
        let total: f64 = atoms.iter().map(|(_, m)| m).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(total));
        }
        if atoms.iter().any(|&(_, m)| m < 0.0) {
            return Err(Error::ShapeMismatch("negative atom mass".into()));
        }
        let mut v = atoms.to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(v)
    };
    let pa = sort(p)?;
    let qa = sort(q)?;

    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_p = pa[0].1;
    let mut rem_q = qa[0].1;
    while i < pa.len() && j < qa.len() {
        let delta = rem_p.min(rem_q);
        cost += delta * (pa[i].0 - qa[j].0).abs().powf(exponent);
        rem_p -= delta;
        rem_q -= delta;
        if rem_p <= 1e-15 {
            i += 1;
            if i < pa.len() {
                rem_p = pa[i].1;
            }
        }
        if rem_q <= 1e-15 {
            j += 1;
            if j < qa.len() {
                rem_q = qa[j].1;
            }
        }
    }
    Ok(cost.max(0.0).powf(1.0 / exponent))
}

/// Sliced Wasserstein distance between two histograms on the same grid:
/// the mean over `n_angles` deterministic directions `theta_k = k pi / n`
/// of the 1-D distance between the projected atom sets.
pub fn sliced_wasserstein(
    p: &Histogram,
    q: &Histogram,
    n_angles: usize,
    exponent: f64,
) -> Result<f64> {
    check_pair(p, q)?;
    sliced_wasserstein_atoms(&support_atoms(p), &support_atoms(q), n_angles, exponent)
}

/// Sliced distance between explicit atom sets.
pub fn sliced_wasserstein_atoms(
    a: &[Atom],
    b: &[Atom],
    n_angles: usize,
    exponent: f64,
) -> Result<f64> {
    if n_angles < 1 {
        return Err(Error::TooSmall {
            name: "n_angles",
            min: 1,
            value: n_angles as i64,
        });
    }
    let per_angle = map_range(n_angles, |k| {
        let theta = k as f64 * PI / n_angles as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let project = |atoms: &[Atom]| -> Vec<(f64, f64)> {
            atoms
                .iter()
                .map(|&((x, y), m)| (x * c + y * s, m))
                .collect()
        };
        wasserstein_1d(&project(a), &project(b), exponent)
    });
    let mut sum = 0.0;
    for w in per_angle {
        sum += w?;
    }
    Ok(sum / n_angles as f64)
}
