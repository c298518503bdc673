//! Grid discretization and the linear-programming solvers behind local
//! moment matching: a fixed-mass feasibility program per interval, and a
//! minimum-mass program (bisection over feasibility) for the leftmost
//! interval.
//!
//! Constraints are solved in the scaled basis `φ_k(g) = ((g − x_j)/r_j)^k`
//! so that all coefficient magnitudes are comparable; in that basis the
//! tolerance radii become `τ_k/r_j^k = sqrt(S_j·ln n)` independent of `k`.
//! Every feasible outcome can be re-checked against the original unscaled
//! constraints by [`verify_unscaled`], an evaluator deliberately separate
//! from the solver.

// The dense-tableau code walks rows and columns by index throughout;
// iterator rewrites obscure the pivot arithmetic.
#![allow(clippy::needless_range_loop)]

use serde::Serialize;

use crate::measures::GridMeasure;
use crate::{Error, Result};

/// Residual threshold in scaled units: a phase-1 optimum above this is
/// reported as infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Scaled-basis coefficient bound asserted at problem construction.
pub const CONDITIONING_BOUND: f64 = 1e6;
/// Bisection iterations for the minimum-mass program.
const BISECTION_ITERS: usize = 40;
/// Upper-bracket doublings attempted before declaring the minimum-mass
/// program infeasible. Tolerances grow like sqrt(mass), so if any mass is
/// feasible, a bracket at most this far above the initial guess finds it.
const BRACKET_DOUBLINGS: usize = 24;

/// `g_count` equally spaced points on `[lo, hi]`; `include_zero` prepends
/// the point 0 when `lo > 0` (the leftmost interval's grid and the fix-up
/// atom both live at 0).
pub fn discretize(lo: f64, hi: f64, g_count: usize, include_zero: bool) -> Result<Vec<f64>> {
    if g_count < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2 points, got {g_count}"
        )));
    }
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("invalid grid range [{lo}, {hi}]")));
    }
    let mut grid = Vec::with_capacity(g_count + 1);
    if include_zero && lo > 0.0 {
        grid.push(0.0);
    }
    let step = (hi - lo) / (g_count - 1) as f64;
    for i in 0..g_count {
        let p = if i + 1 == g_count {
            hi
        } else {
            lo + step * i as f64
        };
        if grid.last().is_none_or(|&last| p > last) {
            grid.push(p);
        }
    }
    Ok(grid)
}

/// One interval's moment-matching program: find a nonnegative measure on
/// `grid` whose scaled moments `Σ w·φ_k` lie within `τ_k` of the targets,
/// with either a fixed total mass (`total_mass = Some`) or mass left free
/// for the minimum-mass search (`total_mass = None`, in which case
/// `tolerances` are the radii at unit mass and scale with `sqrt(m)`).
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    grid: Vec<f64>,
    center: f64,
    scale: f64,
    k_max: usize,
    targets: Vec<f64>,
    tolerances: Vec<f64>,
    total_mass: Option<f64>,
}

impl FeasibilityProblem {
    /// Validates geometry and conditioning. Grid points strictly inside
    /// `forbidden_zone` are deleted (mass there is structurally zero, the
    /// support-size mode's constraint). Construction fails if the zone
    /// swallows the whole grid or if any scaled coefficient would exceed
    /// [`CONDITIONING_BOUND`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Vec<f64>,
        center: f64,
        scale: f64,
        k_max: usize,
        targets: Vec<f64>,
        tolerances: Vec<f64>,
        total_mass: Option<f64>,
        forbidden_zone: Option<(f64, f64)>,
    ) -> Result<Self> {
        if k_max == 0 || targets.len() != k_max || tolerances.len() != k_max {
            return Err(Error::Config(format!(
                "need {k_max} targets and tolerances, got {} and {}",
                targets.len(),
                tolerances.len()
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!(
                "scale must be positive, got {scale}"
            )));
        }
        if tolerances.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("tolerances must be nonnegative".into()));
        }
        if let Some(m) = total_mass {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Config(format!(
                    "total mass must be nonnegative, got {m}"
                )));
            }
        }
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        if let Some((z_lo, z_hi)) = forbidden_zone {
            grid.retain(|&g| !(g > z_lo && g < z_hi));
        }
        if grid.is_empty() {
            return Err(Error::Config(
                "empty grid after forbidden-zone deletion".into(),
            ));
        }
        let rho = grid
            .iter()
            .map(|&g| ((g - center) / scale).abs())
            .fold(0.0f64, f64::max);
        if rho.powi(k_max as i32) >= CONDITIONING_BOUND {
            return Err(Error::Config(format!(
                "scaled coefficients reach {:.3e}; decrease the moment count or increase c3",
                rho.powi(k_max as i32)
            )));
        }
        Ok(Self {
            grid,
            center,
            scale,
            k_max,
            targets,
            tolerances,
            total_mass,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn tolerances(&self) -> &[f64] {
        &self.tolerances
    }

    /// Scaled coefficient `φ_k(g)` for each grid point, `k = 1..=k_max`.
    fn phi_columns(&self) -> Vec<Vec<f64>> {
        let base: Vec<f64> = self
            .grid
            .iter()
            .map(|&g| (g - self.center) / self.scale)
            .collect();
        let mut columns = Vec::with_capacity(self.k_max);
        let mut current = vec![1.0; base.len()];
        for _ in 1..=self.k_max {
            for (c, b) in current.iter_mut().zip(&base) {
                *c *= b;
            }
            columns.push(current.clone());
        }
        columns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Feasible,
    Infeasible,
}

/// Slack report for one constraint, in scaled units (`k = 0` is the
/// total-mass row).
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintResidual {
    pub k: usize,
    pub achieved: f64,
    pub target: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub measure: Option<GridMeasure>,
    pub residuals: Vec<ConstraintResidual>,
}

/// Solves the fixed-mass feasibility program. Numerical non-convergence is
/// an `Err` ([`Error::SolverStalled`]), distinct from a certified
/// `Infeasible` outcome.
pub fn solve_feasibility(problem: &FeasibilityProblem) -> Result<LpOutcome> {
    let mass = problem
        .total_mass
        .ok_or_else(|| Error::Config("fixed-mass feasibility requires total_mass".into()))?;
    solve_at_mass(problem, mass, &problem.tolerances)
}

/// Finds approximately the smallest mass `m ∈ [0, mass_upper]` whose
/// fixed-mass program with radii `sqrt(m)·tolerances` is feasible, by
/// bisection. With `grow_bracket`, an infeasible `mass_upper` is doubled up
/// to [`BRACKET_DOUBLINGS`] times before reporting `Infeasible`; without it
/// (a hard mass bound, e.g. a known support size) the bound is final.
/// Feasibility is treated as monotone in `m` (radii grow with mass); if it
/// is not, the returned mass is feasible but possibly not minimal.
///
/// Returns the outcome together with the accepted mass.
pub fn solve_min_mass(
    problem: &FeasibilityProblem,
    mass_upper: f64,
    grow_bracket: bool,
) -> Result<(LpOutcome, f64)> {
    if problem.total_mass.is_some() {
        return Err(Error::Config(
            "minimum-mass search requires total_mass = None".into(),
        ));
    }
    if !(mass_upper >= 0.0) || !mass_upper.is_finite() {
        return Err(Error::Config(format!(
            "mass_upper must be nonnegative, got {mass_upper}"
        )));
    }
    let radii = |m: f64| -> Vec<f64> { problem.tolerances.iter().map(|t| t * m.sqrt()).collect() };

    // Mass 0 is feasible exactly when all targets vanish (empty-data path).
    let at_zero = solve_at_mass(problem, 0.0, &radii(0.0))?;
    if at_zero.status == LpStatus::Feasible {
        return Ok((at_zero, 0.0));
    }

    let mut hi = if grow_bracket {
        mass_upper.max(1.0)
    } else {
        mass_upper
    };
    let mut at_hi = solve_at_mass(problem, hi, &radii(hi))?;
    let mut doublings = 0;
    while grow_bracket && at_hi.status == LpStatus::Infeasible && doublings < BRACKET_DOUBLINGS {
        hi *= 2.0;
        doublings += 1;
        at_hi = solve_at_mass(problem, hi, &radii(hi))?;
    }
    if at_hi.status == LpStatus::Infeasible {
        return Ok((at_hi, hi));
    }

    let mut lo = 0.0f64;
    let mut best = at_hi;
    let mut accepted = hi;
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let at_mid = solve_at_mass(problem, mid, &radii(mid))?;
        if at_mid.status == LpStatus::Feasible {
            hi = mid;
            accepted = mid;
            best = at_mid;
        } else {
            lo = mid;
        }
    }
    Ok((best, accepted))
}

/// Re-checks a measure against the unscaled constraints
/// `|Σ w·(g − x)^k − t_k| ≤ τ_k`, allowing slack `1e-6·max(1, τ_k)`; the
/// independent verifier for any `Feasible` outcome.
pub fn verify_unscaled(
    measure: &GridMeasure,
    center: f64,
    targets: &[f64],
    tolerances: &[f64],
) -> bool {
    for (idx, (&t, &tau)) in targets.iter().zip(tolerances).enumerate() {
        let k = (idx + 1) as i32;
        let achieved: f64 = measure
            .points()
            .iter()
            .zip(measure.masses())
            .map(|(&g, &w)| w * (g - center).powi(k))
            .sum();
        if (achieved - t).abs() > tau + 1e-6 * tau.max(1.0) {
            return false;
        }
    }
    true
}

fn solve_at_mass(problem: &FeasibilityProblem, mass: f64, taus: &[f64]) -> Result<LpOutcome> {
    let g_n = problem.grid.len();
    let k_max = problem.k_max;
    let phi = problem.phi_columns();

    // Scaled targets and radii: t'_k = t_k/r^k, τ'_k = τ_k/r^k.
    let mut t_scaled = Vec::with_capacity(k_max);
    let mut tau_scaled = Vec::with_capacity(k_max);
    let mut r_pow = 1.0;
    for k in 0..k_max {
        r_pow *= problem.scale;
        t_scaled.push(problem.targets[k] / r_pow);
        tau_scaled.push(taus[k] / r_pow);
    }

    // Rows: Σw = mass; for each k, Σ φ_k w + u = t' + τ' and Σ φ_k w − v = t' − τ'.
    let n_structural = g_n + 2 * k_max;
    let n_rows = 1 + 2 * k_max;
    let mut a = vec![vec![0.0f64; n_structural]; n_rows];
    let mut b = vec![0.0f64; n_rows];
    let mut slack_of_row = vec![None; n_rows];

    for col in 0..g_n {
        a[0][col] = 1.0;
    }
    b[0] = mass;
    for k in 0..k_max {
        let up = 1 + 2 * k;
        let lo = 2 + 2 * k;
        for col in 0..g_n {
            a[up][col] = phi[k][col];
            a[lo][col] = phi[k][col];
        }
        let u_col = g_n + 2 * k;
        let v_col = g_n + 2 * k + 1;
        a[up][u_col] = 1.0;
        a[lo][v_col] = -1.0;
        b[up] = t_scaled[k] + tau_scaled[k];
        b[lo] = t_scaled[k] - tau_scaled[k];
        slack_of_row[up] = Some(u_col);
        slack_of_row[lo] = Some(v_col);
    }

    let weights = phase1(&mut a, &mut b, &slack_of_row, g_n)?;
    let Some(w) = weights else {
        return Ok(LpOutcome {
            status: LpStatus::Infeasible,
            measure: None,
            residuals: Vec::new(),
        });
    };

    let mut residuals = Vec::with_capacity(1 + k_max);
    let total: f64 = w.iter().sum();
    residuals.push(ConstraintResidual {
        k: 0,
        achieved: total,
        target: mass,
        tolerance: 0.0,
    });
    for k in 0..k_max {
        let achieved: f64 = w.iter().zip(&phi[k]).map(|(wi, p)| wi * p).sum();
        residuals.push(ConstraintResidual {
            k: k + 1,
            achieved,
            target: t_scaled[k],
            tolerance: tau_scaled[k],
        });
    }
    let measure = GridMeasure::new(problem.grid.clone(), w)?;
    Ok(LpOutcome {
        status: LpStatus::Feasible,
        measure: Some(measure),
        residuals,
    })
}

/// Phase-1 simplex on `A x = b, x ≥ 0` (dense tableau, Bland's rule).
/// Rows whose slack column can serve as the initial basic variable use it;
/// the rest get artificial variables, whose total is minimized. Returns the
/// first `n_weights` coordinates of a feasible point, or `None` when the
/// phase-1 optimum exceeds [`FEASIBILITY_TOL`].
fn phase1(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    slack_of_row: &[Option<usize>],
    n_weights: usize,
) -> Result<Option<Vec<f64>>> {
    let n_rows = a.len();
    let n_structural = a[0].len();

    // Ensure b ≥ 0.
    for i in 0..n_rows {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for v in a[i].iter_mut() {
                *v = -*v;
            }
        }
    }

    // Initial basis: the row's slack if it survived the sign flip with
    // coefficient +1, else an artificial variable (index n_structural + i,
    // never materialized as a column: artificials never re-enter).
    let mut basis = vec![0usize; n_rows];
    let mut obj = vec![0.0f64; n_structural];
    let mut obj_rhs = 0.0f64;
    for i in 0..n_rows {
        match slack_of_row[i] {
            Some(s) if a[i][s] == 1.0 => basis[i] = s,
            _ => {
                basis[i] = n_structural + i;
                for j in 0..n_structural {
                    obj[j] += a[i][j];
                }
                obj_rhs += b[i];
            }
        }
    }

    let cap = 50 * (n_structural + n_rows);
    for _ in 0..cap {
        // Bland: entering = lowest-index column with positive reduced cost.
        let Some(enter) = (0..n_structural).find(|&j| obj[j] > 1e-9) else {
            break;
        };
        // Ratio test; ties take the row with the lowest basic-variable index.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..n_rows {
            if a[i][enter] > 1e-11 {
                let ratio = b[i] / a[i][enter];
                let better = ratio < best - 1e-12
                    || ((ratio - best).abs() <= 1e-12
                        && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(pivot_row) = leave else {
            // The phase-1 objective is bounded below by zero, so an
            // unbounded ray only arises from numerical breakdown.
            return Err(Error::SolverStalled(cap));
        };

        let inv = 1.0 / a[pivot_row][enter];
        for v in a[pivot_row].iter_mut() {
            *v *= inv;
        }
        b[pivot_row] *= inv;
        a[pivot_row][enter] = 1.0;
        for i in 0..n_rows {
            if i != pivot_row && a[i][enter] != 0.0 {
                let f = a[i][enter];
                for j in 0..n_structural {
                    a[i][j] -= f * a[pivot_row][j];
                }
                b[i] -= f * b[pivot_row];
                if b[i] < 0.0 {
                    b[i] = 0.0; // round-off guard; simplex keeps b ≥ 0
                }
                a[i][enter] = 0.0;
            }
        }
        if obj[enter] != 0.0 {
            let f = obj[enter];
            for j in 0..n_structural {
                obj[j] -= f * a[pivot_row][j];
            }
            obj_rhs -= f * b[pivot_row];
            obj[enter] = 0.0;
        }
        basis[pivot_row] = enter;
        if obj_rhs <= 0.0 {
            break;
        }
    }

    // Residual infeasibility = mass still carried by basic artificials.
    let infeasibility: f64 = (0..n_rows)
        .filter(|&i| basis[i] >= n_structural)
        .map(|i| b[i])
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        if (0..n_structural).any(|j| obj[j] > 1e-9) {
            // Pivot budget exhausted before reaching the phase-1 optimum.
            return Err(Error::SolverStalled(50 * (n_structural + n_rows)));
        }
        return Ok(None);
    }
    let mut w = vec![0.0f64; n_weights];
    for i in 0..n_rows {
        if basis[i] < n_weights {
            w[basis[i]] = b[i].max(0.0);
        }
    }
    Ok(Some(w))
}
