use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ControllerError;

/// min ½uᵀHu + cᵀu subject to lower ≤ u ≤ upper.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QpStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub status: QpStatus,
    pub active: Vec<Bound>,
    pub iterations: usize,
    /// Largest gradient component on the free set.
    pub stationarity: f64,
}

impl QpSolution {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|b| **b != Bound::Free).count()
    }
}

impl QpProblem {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let n = self.dim();
        if self.h.shape() != (n, n) || self.lower.len() != n || self.upper.len() != n {
            return Err(ControllerError::Dimension(format!(
                "H is {:?}, c has {n} rows, bounds have {} and {}",
                self.h.shape(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(ControllerError::Dimension("lower bound above upper bound".into()));
        }
        Ok(())
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + self.c.dot(u)
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.h * u + &self.c
    }

    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| u[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Tolerance scale for stationarity tests.
    fn scale(&self) -> f64 {
        let b = self.lower.amax().max(self.upper.amax()).min(1e6);
        (self.h.amax() * b + self.c.amax()).max(1.0)
    }

    /// Largest KKT violation at `u`: gradient on free coordinates, wrongly
    /// signed multipliers on bound coordinates.
    pub fn kkt_residual(&self, u: &DVector<f64>, active: &[Bound]) -> f64 {
        let g = self.gradient(u);
        (0..self.dim())
            .map(|i| match active[i] {
                Bound::Free => g[i].abs(),
                Bound::Lower => (-g[i]).max(0.0),
                Bound::Upper => g[i].max(0.0),
            })
            .fold(0.0, f64::max)
    }
}

/// Primal active-set method. Starts from the projection of the origin and
/// keeps every iterate feasible; terminates when the free-set Newton step
/// vanishes and all bound multipliers have the correct sign.
pub fn solve_qp(problem: &QpProblem) -> QpSolution {
    let n = problem.dim();
    let fail = |u: DVector<f64>, active: Vec<Bound>, iterations| QpSolution {
        u,
        status: QpStatus::Failure,
        active,
        iterations,
        stationarity: f64::INFINITY,
    };
    if problem.validate().is_err() || !problem.h.iter().chain(problem.c.iter()).all(|x| x.is_finite()) {
        return fail(DVector::zeros(n), vec![Bound::Free; n], 0);
    }
    let (lo, hi) = (&problem.lower, &problem.upper);
    let mut u = problem.project(&DVector::zeros(n));
    let mut active: Vec<Bound> = (0..n).map(|i| if lo[i] == hi[i] { Bound::Lower } else { Bound::Free }).collect();
    let tol = 1e-13 * problem.scale();
    let max_iter = 20 * n + 50;
    let mut at_minimum = false;
    for iter in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| active[i] == Bound::Free).collect();
        let g = problem.gradient(&u);
        let step = if free.is_empty() || at_minimum {
            Some(DVector::zeros(0))
        } else {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| problem.h[(free[a], free[b])]);
            let gf = DVector::from_fn(free.len(), |a, _| -g[free[a]]);
            hff.cholesky().map(|c| c.solve(&gf))
        };
        let Some(p) = step else {
            return fail(u, active, iter);
        };
        if at_minimum || free.is_empty() || p.amax() <= 1e-15 * (1.0 + u.amax()) {
            // Newton step vanished: check multipliers of the bound set.
            let worst = (0..n)
                .filter_map(|i| {
                    let mult = match active[i] {
                        Bound::Free => return None,
                        Bound::Lower if lo[i] == hi[i] => return None,
                        Bound::Lower => g[i],
                        Bound::Upper => -g[i],
                    };
                    (mult < -tol).then_some((i, mult))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, _)) => {
                    active[i] = Bound::Free;
                    at_minimum = false;
                }
                None => {
                    let stationarity = free.iter().map(|&i| g[i].abs()).fold(0.0, f64::max);
                    return QpSolution { u, status: QpStatus::Success, active, iterations: iter + 1, stationarity };
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (a, &i) in free.iter().enumerate() {
            let limit = if p[a] < 0.0 {
                (lo[i] - u[i]) / p[a]
            } else if p[a] > 0.0 {
                (hi[i] - u[i]) / p[a]
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit.max(0.0);
                blocking = Some((i, if p[a] < 0.0 { Bound::Lower } else { Bound::Upper }));
            }
        }
        for (a, &i) in free.iter().enumerate() {
            u[i] = (u[i] + alpha * p[a]).clamp(lo[i], hi[i]);
        }
        match blocking {
            Some((i, b)) => {
                u[i] = if b == Bound::Lower { lo[i] } else { hi[i] };
                active[i] = b;
            }
            None => at_minimum = true,
        }
    }
    fail(u, active, max_iter)
}
