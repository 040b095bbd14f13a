//! Regularized low-rank matrix completion by alternating minimization.
//!
//! Minimizes
//!
//! ```text
//! λ(‖L‖² + ‖R‖²) + ‖(L Rᵀ − C) ∘ S‖² + w_s ‖Δ L Rᵀ‖² + w_t ‖L Rᵀ D‖²
//! ```
//!
//! over `L (n×r)` and `R (m×r)`, where `S` is the observation mask, `Δ` the
//! 4-neighbour grid Laplacian over the rows (cells) and `D` the first-difference
//! matrix over the columns (time). Every half-step is an exact minimization
//! (closed-form ridge solves, or warm-started preconditioned CG when the
//! Laplacian couples the rows), so the objective never increases.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use spider_core::{sampling, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsConfig {
    pub rank: usize,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CsConfig {
    fn default() -> Self {
        Self { rank: 3, lambda: 0.1, max_iters: 300, tol: 1e-7, seed: 0 }
    }
}

impl CsConfig {
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rank == 0 || self.rank > rows.min(cols) {
            return Err(Error::Config(format!("rank {} invalid for a {rows}x{cols} matrix", self.rank)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// `L` and `R` with `F̂ = L Rᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl FactorPair {
    pub fn product(&self) -> DMatrix<f64> {
        &self.left * self.right.transpose()
    }
}

/// Structural penalties; both zero reduces to plain CS.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penalties {
    pub spatial_weight: f64,
    /// Grid shape whose cells index the matrix rows; required when
    /// `spatial_weight > 0`.
    pub grid: Option<(usize, usize)>,
    pub temporal_weight: f64,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub factors: FactorPair,
    /// Objective after initialization and after every full alternation.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// 4-neighbour graph Laplacian applied to the rows of `x`.
fn laplacian(x: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        for i in 0..rows {
            for j in 0..cols {
                let idx = i * cols + j;
                let mut acc = 0.0;
                let mut deg = 0.0;
                let mut nb = |n: usize| {
                    acc -= x[(n, c)];
                    deg += 1.0;
                };
                if i > 0 {
                    nb(idx - cols);
                }
                if i + 1 < rows {
                    nb(idx + cols);
                }
                if j > 0 {
                    nb(idx - 1);
                }
                if j + 1 < cols {
                    nb(idx + 1);
                }
                out[(idx, c)] = deg * x[(idx, c)] + acc;
            }
        }
    }
    out
}

fn degree(idx: usize, rows: usize, cols: usize) -> f64 {
    let (i, j) = (idx / cols, idx % cols);
    [i > 0, i + 1 < rows, j > 0, j + 1 < cols].iter().filter(|&&b| b).count() as f64
}

fn spd_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Domain("normal equations are not positive definite (lambda = 0 with too few observations?)".into()))?;
    Ok(chol.solve(&b))
}

struct Solver<'a> {
    values: &'a DMatrix<f64>,
    mask: &'a DMatrix<bool>,
    lambda: f64,
    pen: Penalties,
    rank: usize,
}

impl Solver<'_> {
    fn objective(&self, f: &FactorPair) -> f64 {
        let p = f.product();
        let mut fit = 0.0;
        for (k, (&v, &o)) in self.values.iter().zip(self.mask.iter()).enumerate() {
            if o {
                fit += (p[k] - v).powi(2);
            }
        }
        let mut total = self.lambda * (f.left.norm_squared() + f.right.norm_squared()) + fit;
        if self.pen.spatial_weight > 0.0 {
            let (r, c) = self.pen.grid.expect("validated");
            total += self.pen.spatial_weight * laplacian(&p, r, c).norm_squared();
        }
        if self.pen.temporal_weight > 0.0 {
            let mut diff = 0.0;
            for t in 1..p.ncols() {
                diff += (p.column(t) - p.column(t - 1)).norm_squared();
            }
            total += self.pen.temporal_weight * diff;
        }
        total
    }

    /// Row-wise curvature `λI + w_t Rᵀ D Dᵀ R + Σ_obs R_j R_jᵀ` and right-hand sides.
    fn left_systems(&self, right: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
        let r = self.rank;
        let mut base = DMatrix::identity(r, r) * self.lambda;
        if self.pen.temporal_weight > 0.0 {
            let mut q = DMatrix::zeros(r, r);
            for t in 1..right.nrows() {
                let d = right.row(t) - right.row(t - 1);
                q += d.transpose() * &d;
            }
            base += q * self.pen.temporal_weight;
        }
        let n = self.values.nrows();
        let mut systems = Vec::with_capacity(n);
        let mut rhs = DMatrix::zeros(n, r);
        for i in 0..n {
            let mut a = base.clone();
            let mut b = DVector::zeros(r);
            for j in 0..self.values.ncols() {
                if self.mask[(i, j)] {
                    let rj = right.row(j).transpose();
                    a += &rj * rj.transpose();
                    b += rj * self.values[(i, j)];
                }
            }
            systems.push(a);
            rhs.set_row(i, &b.transpose());
        }
        (systems, rhs)
    }

    fn update_left(&self, f: &mut FactorPair) -> Result<()> {
        let (systems, rhs) = self.left_systems(&f.right);
        if self.pen.spatial_weight == 0.0 {
            for (i, a) in systems.into_iter().enumerate() {
                let x = spd_solve(a, rhs.row(i).transpose())?;
                f.left.set_row(i, &x.transpose());
            }
            return Ok(());
        }
        let (gr, gc) = self.pen.grid.expect("validated");
        let ws = self.pen.spatial_weight;
        let gram = f.right.transpose() * &f.right;
        let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
            let mut out = laplacian(&laplacian(x, gr, gc), gr, gc) * &gram * ws;
            for (i, a) in systems.iter().enumerate() {
                let row = a * x.row(i).transpose();
                for c in 0..x.ncols() {
                    out[(i, c)] += row[c];
                }
            }
            out
        };
        let precond: Vec<DMatrix<f64>> = systems
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = degree(i, gr, gc);
                let m = a + &gram * (ws * (d * d + d));
                m.cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Domain("singular preconditioner".into()))
            })
            .collect::<Result<_>>()?;
        let precondition = |res: &DMatrix<f64>| -> DMatrix<f64> {
            let mut z = DMatrix::zeros(res.nrows(), res.ncols());
            for (i, m) in precond.iter().enumerate() {
                z.set_row(i, &(m * res.row(i).transpose()).transpose());
            }
            z
        };
        // Warm-started PCG: each iterate lowers the quadratic, hence the objective.
        let mut x = f.left.clone();
        let mut res = &rhs - apply(&x);
        let stop = 1e-12 * rhs.norm_squared().max(1e-300);
        let mut z = precondition(&res);
        let mut p = z.clone();
        let mut rz = res.dot(&z);
        for _ in 0..(4 * x.len()).min(500) {
            if res.norm_squared() <= stop {
                break;
            }
            let ap = apply(&p);
            let denom = p.dot(&ap);
            if !(denom > 0.0) {
                break;
            }
            let alpha = rz / denom;
            x += &p * alpha;
            res -= &ap * alpha;
            z = precondition(&res);
            let rz_next = res.dot(&z);
            p = &z + &p * (rz_next / rz);
            rz = rz_next;
        }
        f.left = x;
        Ok(())
    }

    fn update_right(&self, f: &mut FactorPair) -> Result<()> {
        let r = self.rank;
        let (n, m) = (self.values.nrows(), self.values.ncols());
        let mut base = DMatrix::identity(r, r) * self.lambda;
        if self.pen.spatial_weight > 0.0 {
            let (gr, gc) = self.pen.grid.expect("validated");
            let sl = laplacian(&f.left, gr, gc);
            base += sl.transpose() * sl * self.pen.spatial_weight;
        }
        let mut blocks = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for j in 0..m {
            let mut a = base.clone();
            let mut b = DVector::zeros(r);
            for i in 0..n {
                if self.mask[(i, j)] {
                    let li = f.left.row(i).transpose();
                    a += &li * li.transpose();
                    b += li * self.values[(i, j)];
                }
            }
            blocks.push(a);
            rhs.push(b);
        }
        let wt = self.pen.temporal_weight;
        if wt == 0.0 || m < 2 {
            for (j, (a, b)) in blocks.into_iter().zip(rhs).enumerate() {
                let x = spd_solve(a, b)?;
                f.right.set_row(j, &x.transpose());
            }
            return Ok(());
        }
        // Columns coupled through the first differences: block-tridiagonal system.
        let h = f.left.transpose() * &f.left * wt;
        let mut big = DMatrix::zeros(m * r, m * r);
        let mut big_b = DVector::zeros(m * r);
        for j in 0..m {
            let links = (j > 0) as usize + (j + 1 < m) as usize;
            let diag = &blocks[j] + &h * links as f64;
            big.view_mut((j * r, j * r), (r, r)).copy_from(&diag);
            big_b.rows_mut(j * r, r).copy_from(&rhs[j]);
            if j + 1 < m {
                big.view_mut((j * r, (j + 1) * r), (r, r)).copy_from(&(-&h));
                big.view_mut(((j + 1) * r, j * r), (r, r)).copy_from(&(-&h));
            }
        }
        let x = spd_solve(big, big_b)?;
        for j in 0..m {
            f.right.set_row(j, &x.rows(j * r, r).transpose());
        }
        Ok(())
    }
}

/// Completes `values` (entries outside `mask` are ignored).
pub fn complete_matrix(
    values: &DMatrix<f64>,
    mask: &DMatrix<bool>,
    config: &CsConfig,
    penalties: Penalties,
) -> Result<Completion> {
    let (n, m) = values.shape();
    config.validate(n, m)?;
    if mask.shape() != (n, m) {
        return Err(Error::Shape(format!("mask {:?} vs values {:?}", mask.shape(), (n, m))));
    }
    if !(penalties.spatial_weight >= 0.0 && penalties.temporal_weight >= 0.0) {
        return Err(Error::Config("penalty weights must be non-negative".into()));
    }
    if penalties.spatial_weight > 0.0 {
        match penalties.grid {
            Some((gr, gc)) if gr * gc == n => {}
            _ => return Err(Error::Config("spatial penalty needs a grid matching the row count".into())),
        }
    }
    let observed = mask.iter().filter(|&&b| b).count();
    if observed < config.rank {
        return Err(Error::InsufficientData(format!("{observed} observations for rank {}", config.rank)));
    }
    let mean = values.iter().zip(mask.iter()).filter(|(_, &o)| o).map(|(v, _)| *v).sum::<f64>() / observed as f64;

    let mut rng = sampling::rng(config.seed);
    let mut init = |rows: usize| DMatrix::from_fn(rows, config.rank, |_, _| rng.gen::<f64>() * mean);
    let left = init(n);
    let right = init(m);
    let mut factors = FactorPair { left, right };

    let solver = Solver { values, mask, lambda: config.lambda, pen: penalties, rank: config.rank };
    let mut objective = vec![solver.objective(&factors)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        solver.update_left(&mut factors)?;
        solver.update_right(&mut factors)?;
        iterations += 1;
        let prev = *objective.last().expect("seeded");
        let cur = solver.objective(&factors);
        objective.push(cur);
        debug_assert!(cur <= prev * (1.0 + 1e-9) + 1e-12, "objective rose from {prev} to {cur}");
        if prev <= 0.0 || (prev - cur).abs() / prev < config.tol {
            converged = true;
            break;
        }
    }
    Ok(Completion { factors, objective, iterations, converged })
}
