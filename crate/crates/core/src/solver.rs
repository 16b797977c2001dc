//! Damped Newton minimization with sparse Cholesky factorization.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::energy::{
    check_conditions, check_conditions_hyperbolic, BoundaryConditions, ConditionReport, EnergyError, EnergyEval,
    Problem, ProblemKind, VariableLayout,
};
use crate::mesh::{DiscreteMetric, Geometry, MeshError, Triangulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    FixOneVertex,
    ProjectOutConstants,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub tikhonov: f64,
    pub gauge: Gauge,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-10,
            max_iter: 100,
            armijo: 1e-4,
            backtrack: 0.5,
            tikhonov: 1e-12,
            gauge: Gauge::FixOneVertex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    UnboundedDirectionSuspected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub value: f64,
    pub grad_norm: f64,
    /// Accepted step length factor.
    pub step: f64,
    pub step_norm: f64,
    pub broken_faces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub value: f64,
    pub trace: Vec<IterationRecord>,
    pub status: SolveStatus,
    pub broken_faces: Vec<usize>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolverError {
    #[error("factorization failed even with regularization {0:e}")]
    LinearSolveFailure(f64),
    #[error("Newton direction is not a descent direction (slope {0:e})")]
    NonDescentDirection(f64),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("prescribed data is infeasible")]
    InfeasibleDetected(Box<ConditionReport>),
    #[error("minimizer has broken triangles {faces:?}")]
    BrokenAtOptimum { faces: Vec<usize>, report: Box<SolveReport> },
    #[error("solver stopped with status {:?} after {} iterations", .0.status, .0.iterations)]
    NotConverged(Box<SolveReport>),
}

/// A convex function with value, gradient and sparse Hessian.
pub trait Objective {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> EnergyEval;
    /// Direction along which the function is affine, if any.
    fn kernel(&self) -> Option<Vec<f64>> {
        None
    }
}

impl Objective for Problem<'_> {
    fn dim(&self) -> usize {
        self.layout.n
    }

    fn evaluate(&self, x: &[f64]) -> EnergyEval {
        self.eval(x)
    }
}

struct WithKernel<'a, O: Objective + ?Sized> {
    inner: &'a O,
    kernel: Vec<f64>,
}

impl<O: Objective + ?Sized> Objective for WithKernel<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> EnergyEval {
        self.inner.evaluate(x)
    }

    fn kernel(&self) -> Option<Vec<f64>> {
        Some(self.kernel.clone())
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn project_out(p: &mut [f64], k: &[f64]) {
    let kk: f64 = k.iter().map(|x| x * x).sum();
    let pk: f64 = p.iter().zip(k).map(|(a, b)| a * b).sum();
    for (a, b) in p.iter_mut().zip(k) {
        *a -= pk / kk * b;
    }
}

/// Solves `(H + tau I) p = -g`, escalating `tau` on failure. With a kernel
/// vector, the pivot entry of largest weight is removed from the system.
fn newton_direction(ev: &EnergyEval, kernel: Option<&[f64]>, tikhonov: f64) -> Result<Vec<f64>, SolverError> {
    let n = ev.gradient.len();
    let keep: Option<Vec<Option<usize>>> = kernel.map(|k| {
        let pivot = (0..n).max_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs())).unwrap_or(0);
        let mut next = 0;
        (0..n)
            .map(|i| {
                (i != pivot).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    });
    let mut tau = tikhonov;
    loop {
        let (lower, m) = ev.hessian.to_faer_lower(tau, keep.as_deref());
        let rhs = match &keep {
            Some(keep) => {
                let mut r = vec![0.0; m];
                for (i, k) in keep.iter().enumerate() {
                    if let Some(k) = k {
                        r[*k] = -ev.gradient[i];
                    }
                }
                r
            }
            None => ev.gradient.iter().map(|g| -g).collect(),
        };
        if m == 0 {
            return Ok(vec![0.0; n]);
        }
        if let Ok(llt) = lower.sp_cholesky(Side::Lower) {
            let b = Mat::from_fn(m, 1, |i, _| rhs[i]);
            let sol = llt.solve(&b);
            let mut p = vec![0.0; n];
            match &keep {
                Some(keep) => {
                    for (i, k) in keep.iter().enumerate() {
                        if let Some(k) = k {
                            p[i] = sol[(*k, 0)];
                        }
                    }
                }
                None => {
                    for (i, pi) in p.iter_mut().enumerate() {
                        *pi = sol[(i, 0)];
                    }
                }
            }
            if p.iter().all(|x| x.is_finite()) {
                if let Some(k) = kernel {
                    project_out(&mut p, k);
                }
                return Ok(p);
            }
        }
        tau *= 10.0;
        if tau > 1e8 {
            return Err(SolverError::LinearSolveFailure(tau));
        }
    }
}

const UNBOUNDED_WINDOW: usize = 25;
const UNBOUNDED_NORM: f64 = 1e3;
const RUNAWAY_NORM: f64 = 1e8;

/// Damped Newton method with Armijo backtracking.
pub fn minimize(obj: &dyn Objective, x0: &[f64], config: &SolverConfig) -> Result<SolveReport, SolverError> {
    let kernel = obj.kernel();
    let mut x = x0.to_vec();
    if let Some(k) = &kernel {
        project_out(&mut x, k);
    }
    let mut ev = obj.evaluate(&x);
    let mut trace = Vec::new();
    let mut stagnant = 0;
    let mut iterations = 0;
    let status = loop {
        let gnorm = max_norm(&ev.gradient);
        if gnorm <= config.grad_tol {
            trace.push(IterationRecord {
                value: ev.value,
                grad_norm: gnorm,
                step: 0.0,
                step_norm: 0.0,
                broken_faces: ev.broken_faces.len(),
            });
            break SolveStatus::Converged;
        }
        if iterations >= config.max_iter {
            trace.push(IterationRecord {
                value: ev.value,
                grad_norm: gnorm,
                step: 0.0,
                step_norm: 0.0,
                broken_faces: ev.broken_faces.len(),
            });
            break SolveStatus::MaxIterations;
        }
        let p = newton_direction(&ev, kernel.as_deref(), config.tikhonov)?;
        let slope: f64 = p.iter().zip(&ev.gradient).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            return Err(SolverError::NonDescentDirection(slope));
        }
        let slack = 4.0 * f64::EPSILON * (1.0 + ev.value.abs());
        let noise = 1e4 * f64::EPSILON * (1.0 + ev.value.abs());
        let mut t = 1.0;
        let accepted = loop {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            let en = obj.evaluate(&xn);
            if en.value.is_finite() && en.value <= ev.value + config.armijo * t * slope + slack {
                break Some((xn, en));
            }
            // below the rounding floor of E only the gradient can tell progress
            if -slope * t < noise && en.value.is_finite() && max_norm(&en.gradient) < gnorm {
                break Some((xn, en));
            }
            t *= config.backtrack;
            if t < 1e-14 {
                break None;
            }
        };
        iterations += 1;
        let Some((xn, en)) = accepted else {
            trace.push(IterationRecord {
                value: ev.value,
                grad_norm: gnorm,
                step: 0.0,
                step_norm: 0.0,
                broken_faces: ev.broken_faces.len(),
            });
            break SolveStatus::MaxIterations;
        };
        let decrease = ev.value - en.value;
        trace.push(IterationRecord {
            value: ev.value,
            grad_norm: gnorm,
            step: t,
            step_norm: t * max_norm(&p),
            broken_faces: ev.broken_faces.len(),
        });
        x = xn;
        ev = en;
        let xnorm = max_norm(&x);
        if decrease < 1e-14 && xnorm > UNBOUNDED_NORM {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        if stagnant >= UNBOUNDED_WINDOW || xnorm > RUNAWAY_NORM {
            break SolveStatus::UnboundedDirectionSuspected;
        }
    };
    Ok(SolveReport {
        grad_norm: max_norm(&ev.gradient),
        value: ev.value,
        x,
        iterations,
        trace,
        status,
        broken_faces: ev.broken_faces,
    })
}

/// Minimizes a prepared problem, optionally modulo a kernel direction, and
/// requires convergence to a point without broken triangles.
pub fn solve_energy(
    problem: &Problem,
    kernel: Option<Vec<f64>>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>, SolveReport), SolveError> {
    let x0 = problem.initial();
    let report = match kernel {
        Some(k) => minimize(&WithKernel { inner: problem, kernel: k }, &x0, config)?,
        None => minimize(problem, &x0, config)?,
    };
    if report.status != SolveStatus::Converged {
        return Err(SolveError::NotConverged(Box::new(report)));
    }
    if !report.broken_faces.is_empty() {
        return Err(SolveError::BrokenAtOptimum { faces: report.broken_faces.clone(), report: Box::new(report) });
    }
    let (u, lambda) = problem.unpack(&report.x);
    Ok((u, lambda, report))
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub metric: DiscreteMetric,
    pub u: Vec<f64>,
    pub report: SolveReport,
    pub conditions: ConditionReport,
}

/// Solves for scale factors with prescribed `u` on `V0` and angle sums on
/// `V1`, returning the rescaled metric.
pub fn solve_problem(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    bc: &BoundaryConditions,
    config: &SolverConfig,
) -> Result<Solution, SolveError> {
    solve_problem_from(tri, metric, bc, None, config)
}

/// As [`solve_problem`], starting from `start` on the free vertices.
pub fn solve_problem_from(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    bc: &BoundaryConditions,
    start: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<Solution, SolveError> {
    if metric.len() != tri.n_edges() {
        return Err(MeshError::SizeMismatch { expected: tri.n_edges(), got: metric.len() }.into());
    }
    bc.validate(tri)?;
    let theta_opt: Vec<Option<f64>> = bc
        .vertices
        .iter()
        .map(|c| match c {
            crate::energy::VertexCondition::AngleSum(t) => Some(*t),
            crate::energy::VertexCondition::Scale(_) => None,
        })
        .collect();
    let geometry = metric.geometry();
    let conditions = match geometry {
        Geometry::Euclidean => check_conditions(tri, &theta_opt),
        Geometry::Hyperbolic => check_conditions_hyperbolic(tri, &theta_opt),
    };
    if conditions.condition1 == Some(false) || !conditions.condition2 {
        return Err(SolveError::InfeasibleDetected(Box::new(conditions)));
    }
    let mut fixed = bc.fixed_mask();
    let all_free = !fixed.iter().any(|&f| f);
    let mut kernel = None;
    if geometry == Geometry::Euclidean && all_free {
        match config.gauge {
            Gauge::FixOneVertex => fixed[0] = true,
            Gauge::ProjectOutConstants => kernel = Some(vec![1.0; tri.n_vertices()]),
            Gauge::None => {}
        }
    }
    let mut problem = Problem {
        tri,
        kind: match geometry {
            Geometry::Euclidean => ProblemKind::Euclidean,
            Geometry::Hyperbolic => ProblemKind::Hyperbolic,
        },
        lambda: metric.lambda().to_vec(),
        theta: bc.theta(),
        phi: None,
        u: bc.initial_u(),
        layout: VariableLayout::new(&fixed, &[]),
    };
    if let Some(start) = start {
        if start.len() != tri.n_vertices() {
            return Err(MeshError::SizeMismatch { expected: tri.n_vertices(), got: start.len() }.into());
        }
        for v in 0..tri.n_vertices() {
            if !fixed[v] {
                problem.u[v] = start[v];
            }
        }
    }
    let (u, _, report) = solve_energy(&problem, kernel, config)?;
    let metric = metric.rescaled(tri, &u)?;
    Ok(Solution { metric, u, report, conditions })
}
