//! Dense second-order cone programming by a primal log-barrier method.
//!
//! Solves
//!
//! ```text
//! minimize    fᵀx
//! subject to  ‖A_i x + b_i‖₂ ≤ g_iᵀx + h_i,   i = 1..m
//! ```
//!
//! Each cone contributes the barrier `−log((g_iᵀx + h_i)² − ‖A_i x + b_i‖²)`
//! with parameter 2, so after centring at barrier weight `τ` the duality gap is
//! at most `2m/τ`. When no strictly feasible start is supplied a phase-I
//! problem with a shared slack is solved first; a non-negative optimal slack
//! is reported as infeasibility.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One constraint `‖A x + b‖ ≤ gᵀx + h`.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DVector<f64>,
    pub h: f64,
}

impl SocConstraint {
    fn slack(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (self.g.dot(x) + self.h, &self.a * x + &self.b)
    }

    /// `gᵀx + h − ‖A x + b‖`; positive in the interior.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        let (s, r) = self.slack(x);
        s - r.norm()
    }
}

#[derive(Debug, Clone)]
pub struct SocProblem {
    pub objective: DVector<f64>,
    pub constraints: Vec<SocConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop once the gap bound `2m/τ` is below `abs_tol + rel_tol·|fᵀx|`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Growth factor for the barrier weight.
    pub mu: f64,
    pub max_newton: usize,
    pub max_outer: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            mu: 12.0,
            max_newton: 200,
            max_outer: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SocSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Upper bound on `fᵀx − p*`.
    pub gap: f64,
    pub newton_steps: usize,
    /// `gᵀx + h − ‖A x + b‖` for every constraint.
    pub margins: Vec<f64>,
}

impl SocProblem {
    pub fn dimension(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.dimension();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.a.ncols() != n || c.g.len() != n || c.b.len() != c.a.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "SocProblem",
                    expected: format!("{n} columns"),
                    actual: format!("constraint {i}: A {}x{}, g {}", c.a.nrows(), c.a.ncols(), c.g.len()),
                });
            }
        }
        Ok(())
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.constraints.iter().all(|c| {
            let (s, r) = c.slack(x);
            s > 0.0 && s * s - r.norm_squared() > 0.0
        })
    }

    /// Solves from `start`, running phase I when `start` is absent or not
    /// strictly feasible.
    pub fn solve(&self, start: Option<DVector<f64>>, settings: &SolverSettings) -> Result<SocSolution> {
        self.check()?;
        let n = self.dimension();
        let x0 = start.unwrap_or_else(|| DVector::zeros(n));
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                context: "SocProblem::solve",
                expected: format!("start of length {n}"),
                actual: format!("length {}", x0.len()),
            });
        }
        let x0 = if self.strictly_feasible(&x0) {
            x0
        } else {
            self.phase_one(x0, settings)?
        };
        let mut barrier = Barrier::new(self);
        barrier.minimise(x0, settings)
    }

    fn phase_one(&self, x0: DVector<f64>, settings: &SolverSettings) -> Result<DVector<f64>> {
        let n = self.dimension();
        let worst = self
            .constraints
            .iter()
            .map(|c| -c.margin(&x0))
            .fold(f64::NEG_INFINITY, f64::max);
        // Variables (x, s): ‖A x + b‖ ≤ gᵀx + h + s, plus s ≥ −1 to keep the
        // problem bounded.
        let mut constraints: Vec<SocConstraint> = self
            .constraints
            .iter()
            .map(|c| {
                let mut a = DMatrix::zeros(c.a.nrows(), n + 1);
                a.view_mut((0, 0), (c.a.nrows(), n)).copy_from(&c.a);
                let mut g = DVector::zeros(n + 1);
                g.rows_mut(0, n).copy_from(&c.g);
                g[n] = 1.0;
                SocConstraint {
                    a,
                    b: c.b.clone(),
                    g,
                    h: c.h,
                }
            })
            .collect();
        let mut g = DVector::zeros(n + 1);
        g[n] = 1.0;
        constraints.push(SocConstraint {
            a: DMatrix::zeros(0, n + 1),
            b: DVector::zeros(0),
            g,
            h: 1.0,
        });
        let mut objective = DVector::zeros(n + 1);
        objective[n] = 1.0;
        let aux = SocProblem { objective, constraints };
        let mut start = DVector::zeros(n + 1);
        start.rows_mut(0, n).copy_from(&x0);
        start[n] = worst.max(0.0) + 1.0;

        let mut barrier = Barrier::new(&aux);
        barrier.stop_below = Some(-1e-7);
        let sol = barrier.minimise(start, settings)?;
        let s = sol.x[n];
        let x = sol.x.rows(0, n).into_owned();
        if s < 0.0 && self.strictly_feasible(&x) {
            Ok(x)
        } else {
            Err(Error::Infeasible(format!(
                "smallest achievable constraint violation is {s:.3e} (must be negative)"
            )))
        }
    }
}

struct Barrier<'a> {
    problem: &'a SocProblem,
    /// Constant part of each cone's barrier Hessian numerator, `2(AᵀA − ggᵀ)`.
    curvature: Vec<DMatrix<f64>>,
    stop_below: Option<f64>,
}

impl<'a> Barrier<'a> {
    fn new(problem: &'a SocProblem) -> Self {
        let curvature = problem
            .constraints
            .iter()
            .map(|c| (c.a.transpose() * &c.a - &c.g * c.g.transpose()) * 2.0)
            .collect();
        Self {
            problem,
            curvature,
            stop_below: None,
        }
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let mut total = 0.0;
        for c in &self.problem.constraints {
            let (s, r) = c.slack(x);
            let psi = s * s - r.norm_squared();
            if s <= 0.0 || psi <= 0.0 {
                return None;
            }
            total -= psi.ln();
        }
        Some(total)
    }

    fn gradient_hessian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (c, curv) in self.problem.constraints.iter().zip(&self.curvature) {
            let (s, r) = c.slack(x);
            let psi = s * s - r.norm_squared();
            // ∇ψ = 2 s g − 2 Aᵀ r
            let dpsi = &c.g * (2.0 * s) - c.a.transpose() * &r * 2.0;
            grad -= &dpsi / psi;
            hess.ger(1.0 / (psi * psi), &dpsi, &dpsi, 1.0);
            hess += curv / psi;
        }
        (grad, hess)
    }

    fn minimise(&mut self, mut x: DVector<f64>, settings: &SolverSettings) -> Result<SocSolution> {
        let f = &self.problem.objective;
        let nu = 2.0 * self.problem.constraints.len() as f64;
        let n = x.len();
        // Initial weight balances objective and barrier gradients.
        let (g0, _) = self.gradient_hessian(&x);
        let mut tau = (g0.norm() / f.norm().max(1e-12)).clamp(1e-3, 1e3);
        let mut steps = 0usize;
        let mut gap = nu / tau;

        for _ in 0..settings.max_outer {
            for _ in 0..settings.max_newton {
                let (gb, mut hess) = self.gradient_hessian(&x);
                let grad = f * tau + gb;
                // Regularise only against round-off in the factorisation.
                let scale = hess.diagonal().amax().max(1e-300);
                for i in 0..n {
                    hess[(i, i)] += 1e-14 * scale;
                }
                let Some(chol) = nalgebra::linalg::Cholesky::new(hess) else {
                    return Err(Error::SolverNotConverged {
                        iterations: steps,
                        gap,
                        residual: grad.norm(),
                    });
                };
                let dx = -chol.solve(&grad);
                let decrement = -grad.dot(&dx);
                if decrement <= 1e-10 {
                    break;
                }
                let phi0 = tau * f.dot(&x) + self.value(&x).unwrap_or(f64::INFINITY);
                let mut step = 1.0;
                let mut accepted = false;
                for _ in 0..80 {
                    let trial = &x + &dx * step;
                    if let Some(b) = self.value(&trial) {
                        if tau * f.dot(&trial) + b <= phi0 - 0.25 * step * decrement {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                steps += 1;
                if !accepted {
                    break;
                }
                if let Some(limit) = self.stop_below {
                    if f.dot(&x) < limit {
                        return Ok(self.finish(x, gap, steps));
                    }
                }
            }
            gap = nu / tau;
            let obj = f.dot(&x);
            if gap <= settings.abs_tol + settings.rel_tol * obj.abs() {
                return Ok(self.finish(x, gap, steps));
            }
            tau *= settings.mu;
        }
        let residual = self
            .problem
            .constraints
            .iter()
            .map(|c| (-c.margin(&x)).max(0.0))
            .fold(0.0, f64::max);
        Err(Error::SolverNotConverged {
            iterations: steps,
            gap,
            residual,
        })
    }

    fn finish(&self, x: DVector<f64>, gap: f64, steps: usize) -> SocSolution {
        let margins = self.problem.constraints.iter().map(|c| c.margin(&x)).collect();
        SocSolution {
            objective: self.problem.objective.dot(&x),
            x,
            gap,
            newton_steps: steps,
            margins,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ball(center: &[f64], radius: f64) -> SocConstraint {
        let n = center.len();
        SocConstraint {
            a: DMatrix::identity(n, n),
            b: -DVector::from_column_slice(center),
            g: DVector::zeros(n),
            h: radius,
        }
    }

    #[test]
    fn linear_objective_over_disc() {
        // min x + y over the unit disc centred at (1, 1): optimum 2 − √2.
        let p = SocProblem {
            objective: DVector::from_vec(vec![1.0, 1.0]),
            constraints: vec![ball(&[1.0, 1.0], 1.0)],
        };
        let sol = p.solve(None, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, 2.0 - 2f64.sqrt(), epsilon = 1e-7);
        assert!(sol.margins.iter().all(|&m| m >= -1e-12));
    }

    #[test]
    fn chebyshev_centre_of_points() {
        // min t s.t. ‖x − p_i‖ ≤ t for three points; the smallest enclosing
        // circle of an equilateral triangle with unit side has radius 1/√3.
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let constraints = pts
            .iter()
            .map(|p| {
                let mut a = DMatrix::zeros(2, 3);
                a[(0, 0)] = 1.0;
                a[(1, 1)] = 1.0;
                SocConstraint {
                    a,
                    b: DVector::from_vec(vec![-p[0], -p[1]]),
                    g: DVector::from_vec(vec![0.0, 0.0, 1.0]),
                    h: 0.0,
                }
            })
            .collect();
        let p = SocProblem {
            objective: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            constraints,
        };
        let sol = p.solve(None, &SolverSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0 / 3f64.sqrt(), epsilon = 1e-7);
        assert_abs_diff_eq!(sol.x[0], 0.5, epsilon = 1e-5);
    }

    #[test]
    fn disjoint_balls_are_infeasible() {
        let p = SocProblem {
            objective: DVector::from_vec(vec![0.0, 0.0]),
            constraints: vec![ball(&[0.0, 0.0], 1.0), ball(&[3.0, 0.0], 1.0)],
        };
        assert!(matches!(
            p.solve(None, &SolverSettings::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn phase_one_recovers_from_bad_start() {
        let p = SocProblem {
            objective: DVector::from_vec(vec![-1.0, 0.0]),
            constraints: vec![ball(&[0.0, 0.0], 2.0), ball(&[1.5, 0.0], 1.0)],
        };
        let sol = p
            .solve(Some(DVector::from_vec(vec![-10.0, 4.0])), &SolverSettings::default())
            .unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn dimension_errors() {
        let p = SocProblem {
            objective: DVector::from_vec(vec![1.0]),
            constraints: vec![ball(&[0.0, 0.0], 1.0)],
        };
        assert!(matches!(
            p.solve(None, &SolverSettings::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
