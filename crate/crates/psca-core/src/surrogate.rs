//! Block surrogate models and the per-block best-response solve.
//!
//! Two families are built in. `ProximalLinear` models the smooth part by
//! its block gradient plus a proximal quadratic, so the best response is a
//! single prox evaluation. `BlockProximal` keeps the exact smooth function
//! in the active block plus a proximal quadratic; it solves in closed form
//! when the problem declares blockwise quadratic curvatures, and otherwise
//! falls back to an inner proximal-gradient loop driven by substituted
//! oracles.
//!
//! Both families satisfy, by construction, τ-strong convexity of
//! f̃_i(·, y), gradient consistency at the anchor, and Lipschitz dependence
//! of ∇f̃_i on the anchor; `certify_constants` probes those properties
//! numerically.

use crate::error::{CoreError, Result};
use crate::linalg::{dist, dist_sq};
use crate::problem::Problem;
use crate::rng::{mix64, SplitMix64};

/// Iteration cap for the inner proximal-gradient solve.
const INNER_ITER_CAP: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurrogateFamily {
    /// f̃_i(x_i, y) = ⟨∇_i f(y), x_i − y_i⟩ + (α/2)‖x_i − y_i‖², anchored
    /// (the constant f(y) is dropped; only argmins and differences matter).
    ProximalLinear,
    /// f̃_i(x_i, y) = f(x_i, y_{−i}) + (α/2)‖x_i − y_i‖².
    BlockProximal,
}

impl SurrogateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SurrogateFamily::ProximalLinear => "proximal-linear",
            SurrogateFamily::BlockProximal => "block-proximal",
        }
    }
}

/// A surrogate family with its certified constants.
#[derive(Clone, Debug)]
pub struct SurrogateSpec {
    pub family: SurrogateFamily,
    /// Proximal coefficient α.
    pub alpha: f64,
    /// Strong-convexity parameter τ of f̃_i(·, y).
    pub tau: f64,
    /// Lipschitz constant of ∇f̃_i in the anchor, when the problem's L_∇f
    /// is known (L̃ = L_∇f + α for both families).
    pub l_tilde: Option<f64>,
    /// Block Lipschitz constants L_i of ∇f̃_i(·, y).
    pub l_block: Vec<f64>,
}

impl SurrogateSpec {
    /// Derives the constants of `family` with coefficient `alpha` for a
    /// concrete problem.
    pub fn for_problem(family: SurrogateFamily, alpha: f64, problem: &Problem) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(CoreError::invalid(format!(
                "proximal coefficient alpha = {alpha} must be positive and finite"
            )));
        }
        let n = problem.n_blocks();
        let l_tilde = problem.lipschitz_grad().map(|l| l + alpha);
        match family {
            SurrogateFamily::ProximalLinear => Ok(SurrogateSpec {
                family,
                alpha,
                tau: alpha,
                l_tilde,
                l_block: vec![alpha; n],
            }),
            SurrogateFamily::BlockProximal => {
                if let Some(curv) = problem.block_curvatures() {
                    let c_min = curv.iter().cloned().fold(f64::INFINITY, f64::min);
                    let tau = alpha + c_min.min(0.0);
                    if !(tau > 0.0) {
                        return Err(CoreError::invalid(format!(
                            "block-proximal surrogate needs alpha > {:.6e} to stay strongly convex",
                            -c_min
                        )));
                    }
                    Ok(SurrogateSpec {
                        family,
                        alpha,
                        // For convex blocks (c_min ≥ 0) the subproblem is at
                        // least α-strongly convex.
                        tau: if c_min >= 0.0 { alpha } else { tau },
                        l_tilde,
                        l_block: curv.iter().map(|c| c.max(0.0) + alpha).collect(),
                    })
                } else if substitution_available(problem) {
                    let l_grad = problem.lipschitz_grad().ok_or_else(|| {
                        CoreError::unsupported(
                            "block-proximal surrogate on a problem without quadratic block \
                             structure needs a Lipschitz gradient hint",
                        )
                    })?;
                    Ok(SurrogateSpec {
                        family,
                        alpha,
                        tau: alpha,
                        l_tilde,
                        l_block: vec![l_grad + alpha; n],
                    })
                } else {
                    Err(CoreError::unsupported(
                        "block-proximal surrogate requires either declared block curvatures or \
                         substituted-evaluation support from the smooth oracle",
                    ))
                }
            }
        }
    }

    /// Default coefficient rule: 1.1 × the largest block curvature, so the
    /// surrogate majorizes blockwise on quadratics.
    pub fn default_alpha(problem: &Problem) -> Option<f64> {
        problem
            .block_curvatures()
            .map(|c| 1.1 * c.iter().cloned().fold(0.0f64, f64::max))
            .filter(|a| *a > 0.0)
    }

    pub fn l_max(&self) -> f64 {
        self.l_block.iter().cloned().fold(0.0f64, f64::max)
    }

    pub fn check_problem(&self, problem: &Problem) -> Result<()> {
        if self.l_block.len() != problem.n_blocks() {
            return Err(CoreError::DimensionMismatch {
                expected: problem.n_blocks(),
                got: self.l_block.len(),
            });
        }
        Ok(())
    }
}

fn substitution_available(problem: &Problem) -> bool {
    let dim0 = problem.layout().block_dim(0);
    let probe_anchor = vec![0.0; problem.total_dim()];
    let probe_block = vec![0.0; dim0];
    problem
        .smooth()
        .substituted_value(problem.layout().block_range(0), &probe_block, &probe_anchor)
        .is_some()
}

fn block_curvature(spec: &SurrogateSpec, problem: &Problem, i: usize) -> Option<f64> {
    debug_assert_eq!(spec.family, SurrogateFamily::BlockProximal);
    problem.block_curvatures().map(|c| c[i])
}

/// f̃_i(x_i, y) for the selected family. ProximalLinear values are anchored
/// (f(y) dropped); BlockProximal values include the substituted smooth term.
pub fn surrogate_value(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    x_i: &[f64],
    y: &[f64],
) -> Result<f64> {
    spec.check_problem(problem)?;
    problem.layout().check_dim(y)?;
    let range = problem.layout().block_range(i);
    if x_i.len() != range.len() {
        return Err(CoreError::DimensionMismatch {
            expected: range.len(),
            got: x_i.len(),
        });
    }
    let y_i = &y[range.clone()];
    let quad = 0.5 * spec.alpha * dist_sq(x_i, y_i);
    match spec.family {
        SurrogateFamily::ProximalLinear => {
            let grad = problem.smooth_gradient(y)?;
            let g_i = &grad[range];
            let mut lin = 0.0;
            for k in 0..x_i.len() {
                lin += g_i[k] * (x_i[k] - y_i[k]);
            }
            Ok(lin + quad)
        }
        SurrogateFamily::BlockProximal => {
            if let Some(c) = block_curvature(spec, problem, i) {
                let grad = problem.smooth_gradient(y)?;
                let g_i = &grad[range];
                let f_y = problem.smooth_value(y)?;
                let mut lin = 0.0;
                for k in 0..x_i.len() {
                    lin += g_i[k] * (x_i[k] - y_i[k]);
                }
                Ok(f_y + lin + 0.5 * c * dist_sq(x_i, y_i) + quad)
            } else if let Some(v) = problem
                .smooth()
                .substituted_value(problem.layout().block_range(i), x_i, y)
            {
                Ok(v + quad)
            } else {
                Err(CoreError::unsupported(
                    "block-proximal value needs curvatures or a substituted value oracle",
                ))
            }
        }
    }
}

/// ∇_{x_i} f̃_i(x_i, y).
pub fn surrogate_gradient(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    x_i: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    spec.check_problem(problem)?;
    problem.layout().check_dim(y)?;
    let range = problem.layout().block_range(i);
    if x_i.len() != range.len() {
        return Err(CoreError::DimensionMismatch {
            expected: range.len(),
            got: x_i.len(),
        });
    }
    let grad = problem.smooth_gradient(y)?;
    let mut out = vec![0.0; x_i.len()];
    surrogate_gradient_with(spec, problem, i, x_i, y, &grad[range], &mut out)?;
    Ok(out)
}

/// Same as [`surrogate_gradient`] but reusing a precomputed ∇_i f(y).
fn surrogate_gradient_with(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    x_i: &[f64],
    y: &[f64],
    grad_i: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let range = problem.layout().block_range(i);
    let y_i = &y[range.clone()];
    match spec.family {
        SurrogateFamily::ProximalLinear => {
            for k in 0..x_i.len() {
                out[k] = grad_i[k] + spec.alpha * (x_i[k] - y_i[k]);
            }
            Ok(())
        }
        SurrogateFamily::BlockProximal => {
            if let Some(c) = block_curvature(spec, problem, i) {
                let coef = c + spec.alpha;
                for k in 0..x_i.len() {
                    out[k] = grad_i[k] + coef * (x_i[k] - y_i[k]);
                }
                Ok(())
            } else if problem
                .smooth()
                .substituted_gradient_into(range, x_i, y, out)
            {
                for k in 0..x_i.len() {
                    out[k] += spec.alpha * (x_i[k] - y_i[k]);
                }
                Ok(())
            } else {
                Err(CoreError::unsupported(
                    "block-proximal gradient needs curvatures or a substituted gradient oracle",
                ))
            }
        }
    }
}

/// x̂_i = argmin_{x_i ∈ X_i} f̃_i(x_i, y) + g_i(x_i).
///
/// The subproblem is τ-strongly convex, so the minimizer is unique. The
/// returned point's subproblem proximal-gradient residual is at most `tol`
/// (closed forms are exact up to roundoff and still verified).
pub fn best_response(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    y: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    spec.check_problem(problem)?;
    problem.layout().check_dim(y)?;
    let range = problem.layout().block_range(i);
    let grad = problem.smooth_gradient(y)?;
    let mut out = vec![0.0; range.len()];
    best_response_with_gradient_into(spec, problem, i, y, &grad[range], tol, &mut out)?;
    Ok(out)
}

/// Hot-path best response: the full anchor `y` plus its precomputed block
/// gradient `grad_i`. Writes x̂_i into `out` and returns the subproblem
/// residual.
pub fn best_response_with_gradient_into(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    y: &[f64],
    grad_i: &[f64],
    tol: f64,
    out: &mut [f64],
) -> Result<f64> {
    let range = problem.layout().block_range(i);
    debug_assert_eq!(grad_i.len(), range.len());
    debug_assert_eq!(out.len(), range.len());
    let y_i = &y[range.clone()];

    let closed_form_coef = match spec.family {
        SurrogateFamily::ProximalLinear => Some(spec.alpha),
        SurrogateFamily::BlockProximal => {
            block_curvature(spec, problem, i).map(|c| c + spec.alpha)
        }
    };

    if let Some(coef) = closed_form_coef {
        let inv = 1.0 / coef;
        let mut z = vec![0.0; y_i.len()];
        for k in 0..z.len() {
            z[k] = y_i[k] - grad_i[k] * inv;
        }
        problem.block_prox_into(i, &z, inv, out)?;
        // Residual check: ‖x̂ − prox(x̂ − ∇f̃(x̂), 1)‖ at unit step.
        let mut sg = vec![0.0; out.len()];
        for k in 0..out.len() {
            sg[k] = out[k] - (grad_i[k] + coef * (out[k] - y_i[k]));
        }
        let mut back = vec![0.0; out.len()];
        problem.block_prox_into(i, &sg, 1.0, &mut back)?;
        let residual = dist(out, &back);
        if residual > tol.max(1e-9) {
            return Err(CoreError::ConvergenceFailure {
                block: i,
                iters: 1,
                residual,
            });
        }
        return Ok(residual);
    }

    best_response_iterative(spec, problem, i, y, grad_i, tol, out)
}

/// Inner proximal-gradient loop on the surrogate subproblem, used by the
/// block-proximal family when no quadratic block structure is declared.
/// Backtracks on the smooth part, so no Lipschitz constant is needed.
fn best_response_iterative(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    y: &[f64],
    grad_i: &[f64],
    tol: f64,
    out: &mut [f64],
) -> Result<f64> {
    let range = problem.layout().block_range(i);
    let y_i = &y[range.clone()];
    let smooth_value = |x_i: &[f64]| -> Result<f64> {
        let v = problem
            .smooth()
            .substituted_value(range.clone(), x_i, y)
            .ok_or_else(|| {
                CoreError::unsupported("inner best-response solve needs a substituted value oracle")
            })?;
        Ok(v + 0.5 * spec.alpha * dist_sq(x_i, y_i))
    };

    let dim = y_i.len();
    let mut x = y_i.to_vec();
    let mut grad = vec![0.0; dim];
    let mut cand = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut step = 1.0 / spec.l_block[i].max(spec.alpha);
    let mut residual = f64::INFINITY;

    for _ in 0..INNER_ITER_CAP {
        surrogate_gradient_with(spec, problem, i, &x, y, grad_i, &mut grad)?;
        // Unit-step residual, same measure as the closed-form check.
        for k in 0..dim {
            z[k] = x[k] - grad[k];
        }
        problem.block_prox_into(i, &z, 1.0, &mut cand)?;
        residual = dist(&x, &cand);
        if residual <= tol {
            out.copy_from_slice(&x);
            return Ok(residual);
        }

        let f_x = smooth_value(&x)?;
        loop {
            for k in 0..dim {
                z[k] = x[k] - step * grad[k];
            }
            problem.block_prox_into(i, &z, step, &mut cand)?;
            let mut lin = 0.0;
            let mut sq = 0.0;
            for k in 0..dim {
                let d = cand[k] - x[k];
                lin += grad[k] * d;
                sq += d * d;
            }
            let f_cand = smooth_value(&cand)?;
            if f_cand <= f_x + lin + sq / (2.0 * step) + 1e-14 * (1.0 + f_x.abs()) {
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        x.copy_from_slice(&cand);
        step = (step * 1.25).min(1.0 / spec.alpha.min(1.0));
    }

    out.copy_from_slice(&x);
    Err(CoreError::ConvergenceFailure {
        block: i,
        iters: INNER_ITER_CAP,
        residual,
    })
}

/// Max over sampled blocks of ‖∇f̃_i(y_i, y) − ∇_i f(y)‖. Both built-in
/// families satisfy the identity analytically, so this should sit at
/// floating-point roundoff.
pub fn verify_gradient_consistency(
    spec: &SurrogateSpec,
    problem: &Problem,
    y: &[f64],
    trials: usize,
    rng_seed: u64,
) -> Result<f64> {
    spec.check_problem(problem)?;
    problem.layout().check_dim(y)?;
    let grad = problem.smooth_gradient(y)?;
    let n = problem.n_blocks();
    let mut rng = SplitMix64::new(mix64(rng_seed));
    let mut worst = 0.0f64;
    let mut buf = Vec::new();
    let all = trials >= n;
    let count = if all { n } else { trials };
    for t in 0..count {
        let i = if all { t } else { rng.next_index(n) };
        let range = problem.layout().block_range(i);
        let y_i = &y[range.clone()];
        buf.resize(range.len(), 0.0);
        surrogate_gradient_with(spec, problem, i, y_i, y, &grad[range.clone()], &mut buf)?;
        let mut dev = 0.0;
        for (k, j) in range.enumerate() {
            let d = buf[k] - grad[j];
            dev += d * d;
        }
        worst = worst.max(dev.sqrt());
    }
    Ok(worst)
}

/// Observed constants from randomized sampling.
#[derive(Clone, Debug)]
pub struct ConstantsReport {
    /// Strong-convexity gap check passed on every sample.
    pub tau_ok: bool,
    /// Max observed ‖∇f̃_i(x_i, y) − ∇f̃_i(x_i, z)‖ / ‖y − z‖; lower-bounds L̃.
    pub l_tilde_observed: f64,
    /// Per-block max observed gradient ratio in x_i; lower-bounds L_i.
    pub l_block_observed: Vec<f64>,
}

/// Samples random (x_i, y, z) triples and reports observed Lipschitz ratios
/// and strong-convexity gaps. Report-only: the observed values lower-bound
/// the certified constants.
pub fn certify_constants(
    spec: &SurrogateSpec,
    problem: &Problem,
    trials: usize,
    rng_seed: u64,
) -> Result<ConstantsReport> {
    spec.check_problem(problem)?;
    let n = problem.n_blocks();
    let mut rng = SplitMix64::new(mix64(rng_seed ^ 0xCE27));
    let mut tau_ok = true;
    let mut l_tilde_observed = 0.0f64;
    let mut l_block_observed = vec![0.0f64; n];
    let mut grad_a = Vec::new();
    let mut grad_b = Vec::new();

    for t in 0..trials.max(1) {
        let y = problem.sample_feasible(&mut rng, 1.0);
        let z = problem.sample_feasible(&mut rng, 1.0);
        let i = if t < n { t } else { rng.next_index(n) };
        let range = problem.layout().block_range(i);
        let dim = range.len();

        // Random feasible block points a, b.
        let mut raw = vec![0.0; dim];
        rng.fill_gaussian(&mut raw);
        let a = problem.block_prox(i, &raw, 1.0)?;
        rng.fill_gaussian(&mut raw);
        let b = problem.block_prox(i, &raw, 1.0)?;

        // Anchor Lipschitz ratio at fixed x_i = a.
        let dyz = {
            let mut s = 0.0;
            for k in 0..y.len() {
                let d = y[k] - z[k];
                s += d * d;
            }
            s.sqrt()
        };
        if dyz > 1e-12 {
            grad_a.resize(dim, 0.0);
            grad_b.resize(dim, 0.0);
            let gy = problem.smooth_gradient(&y)?;
            let gz = problem.smooth_gradient(&z)?;
            surrogate_gradient_with(spec, problem, i, &a, &y, &gy[range.clone()], &mut grad_a)?;
            surrogate_gradient_with(spec, problem, i, &a, &z, &gz[range.clone()], &mut grad_b)?;
            l_tilde_observed = l_tilde_observed.max(dist(&grad_a, &grad_b) / dyz);
        }

        // Block Lipschitz ratio at fixed anchor y.
        let dab = dist(&a, &b);
        if dab > 1e-12 {
            let gy = problem.smooth_gradient(&y)?;
            grad_a.resize(dim, 0.0);
            grad_b.resize(dim, 0.0);
            surrogate_gradient_with(spec, problem, i, &a, &y, &gy[range.clone()], &mut grad_a)?;
            surrogate_gradient_with(spec, problem, i, &b, &y, &gy[range.clone()], &mut grad_b)?;
            l_block_observed[i] = l_block_observed[i].max(dist(&grad_a, &grad_b) / dab);
        }

        // Strong-convexity gap: f̃(a) − f̃(b) − ⟨∇f̃(b), a−b⟩ ≥ τ/2‖a−b‖² − 1e-9.
        let fa = surrogate_value(spec, problem, i, &a, &y)?;
        let fb = surrogate_value(spec, problem, i, &b, &y)?;
        let gy = problem.smooth_gradient(&y)?;
        grad_b.resize(dim, 0.0);
        surrogate_gradient_with(spec, problem, i, &b, &y, &gy[range], &mut grad_b)?;
        let mut lin = 0.0;
        for k in 0..dim {
            lin += grad_b[k] * (a[k] - b[k]);
        }
        if fa - fb - lin < 0.5 * spec.tau * dab * dab - 1e-9 * (1.0 + fa.abs()) {
            tau_ok = false;
        }
    }

    Ok(ConstantsReport {
        tau_ok,
        l_tilde_observed,
        l_block_observed,
    })
}

/// ‖∇f̃_i(x̂_i, y)‖² accumulated for the stacked Q̂ statistic; the solver
/// calls this on each updated block.
pub(crate) fn surrogate_gradient_norm_sq_at(
    spec: &SurrogateSpec,
    problem: &Problem,
    i: usize,
    x_hat_i: &[f64],
    y: &[f64],
    grad_i: &[f64],
) -> f64 {
    let range = problem.layout().block_range(i);
    let y_i = &y[range];
    match spec.family {
        SurrogateFamily::ProximalLinear => {
            let mut s = 0.0;
            for k in 0..x_hat_i.len() {
                let g = grad_i[k] + spec.alpha * (x_hat_i[k] - y_i[k]);
                s += g * g;
            }
            s
        }
        SurrogateFamily::BlockProximal => {
            let coef = block_curvature(spec, problem, i)
                .map(|c| c + spec.alpha)
                .unwrap_or(spec.alpha);
            let mut s = 0.0;
            for k in 0..x_hat_i.len() {
                let g = grad_i[k] + coef * (x_hat_i[k] - y_i[k]);
                s += g * g;
            }
            s
        }
    }
}
