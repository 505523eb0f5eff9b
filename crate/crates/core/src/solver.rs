//! Constrained minimization of J on the grid.
//!
//! Subcritical (1 < p < N): minimize J under V = 1 by projected descent with
//! exact constraint reprojection through dilation, since V(u_σ) = σ^N V(u)
//! makes σ = V^{-1/N} an exact projector. Critical (p = N): minimize J under
//! V >= 0, u != 0, restoring feasibility by truncation at the level where V
//! vanishes, and polishing the converged iterate onto V = 0.
//!
//! The descent objective is a face-difference energy whose exact gradient is
//! the monotone discrete p-Laplacian; the reported J stays the central-
//! difference functional. A resolution-consistency guard rejects iterates on
//! which the two discretizations disagree by more than a configured ratio:
//! past that point the grid can no longer represent the descent direction
//! and further "progress" is discretization artifact, not energy decrease.
//! The returned minimizer is therefore the restricted infimum over fields
//! the grid resolves, an upper bound that converges as the mesh refines.

use crate::error::SolverError;
use crate::field::{Field, Grid};
use crate::functionals::{
    self, multiplier_and_scales, EnergyReport, ProblemSpec, Regime, Scales,
};
use crate::nonlinearity::{Nonlinearity, SignNearZero};
use crate::transforms::{dilate, dilation_truncation_ratio, find_zero_truncation, translate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum InitKind {
    /// Gaussian bump in every component; the amplitude is rescanned so the
    /// constraint set is reachable.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Option<Vec<f64>>,
    },
    /// Start from a supplied field (must match grid and component count).
    FromField(Field),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub step_init: f64,
    pub armijo_c: f64,
    /// δ in the regularized gradient magnitude (|∇u|^2 + δ^2)^{(p-2)/2}.
    pub grad_regularization: f64,
    /// Stop when the relative J decrease over 50 iterations falls below this.
    pub tol_rel_j: f64,
    pub seed: u64,
    pub init: InitKind,
    /// Independent restarts; the smallest converged J wins.
    pub restarts: usize,
    /// Largest tolerated ratio mismatch between the face and central
    /// discretizations of J along the descent.
    pub consistency_guard: f64,
    /// Length^2 of the H^1 smoothing metric (I - β Δ)^{-1} on gradients.
    pub precond_beta: f64,
    /// CG iterations applied to the smoothing solve.
    pub precond_iters: usize,
    /// |V - 1| drift tolerated before reprojection fires (subcritical).
    pub reproject_band: f64,
    /// Sup-norm floor, relative to the initial amplitude (critical regime).
    pub norm_floor_rel: f64,
    /// Threads for the multi-start fan-out; restarts are independent and the
    /// winner is selected deterministically regardless of completion order.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 2000,
            step_init: 1.0,
            armijo_c: 1e-4,
            grad_regularization: 1e-8,
            tol_rel_j: 1e-8,
            seed: 0,
            init: InitKind::Gaussian {
                amplitude: 2.0,
                width: 1.5,
                center: None,
            },
            restarts: 1,
            consistency_guard: 0.05,
            precond_beta: 1.0,
            precond_iters: 10,
            reproject_band: 0.005,
            norm_floor_rel: 1e-3,
            threads: 1,
        }
    }
}

/// Scalar outcome of a solve, serialized to the result artifact.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub regime: Regime,
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub sigma0: f64,
    pub lambda: f64,
    pub energy: EnergyReport,
    pub minimizer_energy: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    pub multiplier_residual: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub minimizer: Field,
    /// The rescaled field u_{σ0} solving the unconstrained system.
    pub solution: Field,
    pub summary: SolveSummary,
}

impl SolverResult {
    pub fn t(&self) -> f64 {
        self.summary.t
    }

    pub fn converged(&self) -> bool {
        self.summary.converged
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MultiplierEstimate {
    pub alpha: f64,
    /// ‖-Δ_p u - α g(u)‖ / ‖α g(u)‖ in the discrete L^2 norm.
    pub relative_residual: f64,
}

// ---------------------------------------------------------------------------
// face-difference energy and its exact gradient
// ---------------------------------------------------------------------------

/// Regularized per-cell squared gradient magnitude from face differences:
/// δ^2 + Σ_a ((D⁺_a u)^2 + (D⁻_a u)^2)/2, zero outside the box.
fn face_magnitude_sq(grid: &Grid, comp: &[f64], delta: f64) -> Vec<f64> {
    let n = grid.cells_per_dim();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let mut mag = vec![delta * delta; comp.len()];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        for (cell, m) in mag.iter_mut().enumerate() {
            let k = (cell / stride) % n;
            let up = if k + 1 < n { comp[cell + stride] } else { 0.0 };
            let down = if k > 0 { comp[cell - stride] } else { 0.0 };
            let dp = up - comp[cell];
            let dm = comp[cell] - down;
            *m += 0.5 * (dp * dp + dm * dm) * inv_h2;
        }
    }
    mag
}

/// Descent objective: (h^N / p) Σ_cells (face magnitude)^{p/2} per component.
pub fn face_energy(field: &Field, p: f64, delta: f64) -> f64 {
    let grid = field.grid();
    let mut total = 0.0;
    for comp in field.components() {
        let mag = face_magnitude_sq(grid, comp, delta);
        let sum = if (p - 2.0).abs() < 1e-14 {
            crate::field::pairwise_sum(&mag)
        } else {
            let powed: Vec<f64> = mag.iter().map(|w| w.powf(p / 2.0)).collect();
            crate::field::pairwise_sum(&powed)
        };
        total += sum * grid.cell_volume() / p;
    }
    total
}

/// Exact gradient of [`face_energy`]: h^N times the monotone discrete
/// p-Laplacian with face-averaged coefficients.
pub fn face_energy_grad(field: &Field, p: f64, delta: f64) -> Vec<Vec<f64>> {
    let grid = field.grid();
    let n = grid.cells_per_dim();
    let h = grid.spacing();
    let scale = grid.cell_volume() / (h * h);
    let two_p = (p - 2.0).abs() < 1e-14;
    let mut out = Vec::with_capacity(field.num_components());
    for comp in field.components() {
        let coeff: Vec<f64> = if two_p {
            Vec::new()
        } else {
            face_magnitude_sq(grid, comp, delta)
                .iter()
                .map(|w| w.powf((p - 2.0) / 2.0))
                .collect()
        };
        let c_at = |cell: usize| -> f64 {
            if two_p {
                1.0
            } else {
                coeff[cell]
            }
        };
        let mut grad = vec![0.0; comp.len()];
        for axis in 0..grid.dim() {
            let stride = grid.stride(axis);
            for (cell, g) in grad.iter_mut().enumerate() {
                let k = (cell / stride) % n;
                // exterior neighbors carry value 0 and coefficient 0 (the
                // wall face enters the energy through one cell only)
                let (up, c_up) = if k + 1 < n {
                    (comp[cell + stride], c_at(cell + stride))
                } else {
                    (0.0, 0.0)
                };
                let (down, c_down) = if k > 0 {
                    (comp[cell - stride], c_at(cell - stride))
                } else {
                    (0.0, 0.0)
                };
                let c_plus = 0.5 * (c_at(cell) + c_up);
                let c_minus = 0.5 * (c_at(cell) + c_down);
                *g += scale * (c_plus * (comp[cell] - up) + c_minus * (comp[cell] - down));
            }
        }
        out.push(grad);
    }
    out
}

/// h^N g_i(u) per cell: the gradient of V.
fn v_grad(field: &Field, spec: &ProblemSpec) -> Vec<Vec<f64>> {
    let grid = field.grid();
    let m = spec.m();
    let hn = grid.cell_volume();
    let nl = spec.nonlinearity();
    let mut out = vec![vec![0.0; grid.cell_count()]; m];
    let mut xi = vec![0.0; m];
    let mut g = vec![0.0; m];
    for cell in 0..grid.cell_count() {
        for (i, slot) in xi.iter_mut().enumerate() {
            *slot = field.component(i)[cell];
        }
        nl.grad_potential(&xi, &mut g);
        for (i, gi) in g.iter().enumerate() {
            out[i][cell] = gi * hn;
        }
    }
    out
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (ca, cb) in a.iter().zip(b) {
        for (x, y) in ca.iter().zip(cb) {
            s += x * y;
        }
    }
    s
}

/// Applies (I - β Δ) with the zero-exterior 2N+1 stencil.
fn helmholtz_apply(grid: &Grid, beta: f64, x: &[f64], out: &mut [f64]) {
    let n = grid.cells_per_dim();
    let h2 = grid.spacing() * grid.spacing();
    let c = beta / h2;
    for (cell, o) in out.iter_mut().enumerate() {
        let mut lap = -(2.0 * grid.dim() as f64) * x[cell];
        for axis in 0..grid.dim() {
            let stride = grid.stride(axis);
            let k = (cell / stride) % n;
            if k + 1 < n {
                lap += x[cell + stride];
            }
            if k > 0 {
                lap += x[cell - stride];
            }
        }
        *o = x[cell] - c * lap;
    }
}

/// Approximate (I - β Δ)^{-1} b by a fixed number of CG iterations.
fn smooth(grid: &Grid, b: &[Vec<f64>], beta: f64, iters: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(b.len());
    for rhs in b {
        let mut x = vec![0.0; rhs.len()];
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; rhs.len()];
        let mut rs: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..iters {
            if rs <= 1e-300 {
                break;
            }
            helmholtz_apply(grid, beta, &p, &mut ap);
            let denom: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if denom <= 0.0 {
                break;
            }
            let alpha = rs / denom;
            for ((xi, pi), api) in x.iter_mut().zip(&p).zip(&ap) {
                *xi += alpha * pi;
                let _ = api;
            }
            for (ri, api) in r.iter_mut().zip(&ap) {
                *ri -= alpha * api;
            }
            let rs_new: f64 = r.iter().map(|v| v * v).sum();
            let beta_cg = rs_new / rs;
            rs = rs_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta_cg * *pi;
            }
        }
        out.push(x);
    }
    out
}

fn field_axpy(base: &Field, a: f64, d: &[Vec<f64>]) -> Field {
    let mut out = base.clone();
    for (i, comp) in d.iter().enumerate() {
        for (o, v) in out.component_mut(i).iter_mut().zip(comp) {
            *o += a * v;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// initialization
// ---------------------------------------------------------------------------

fn gaussian_init(
    grid: Grid,
    spec: &ProblemSpec,
    amplitude: f64,
    width: f64,
    center: &[f64],
    target_v: f64,
) -> Result<Field, SolverError> {
    // scan upward by doubling until V > target, then bisect onto the target
    let build = |a: f64| functionals::gaussian_bump(grid, spec.m(), a, width, center);
    let mut hi = amplitude.max(1e-3);
    let mut v_hi = functionals::v(&build(hi), spec);
    while v_hi <= target_v {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(SolverError::NoPositiveV(hi));
        }
        v_hi = functionals::v(&build(hi), spec);
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if functionals::v(&build(mid), spec) <= target_v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(build(hi))
}

/// Iterated exact dilation projection onto V = 1.
fn project_onto_unit_v(field: &Field, spec: &ProblemSpec) -> Result<Field, SolverError> {
    let n = spec.dim() as f64;
    let mut current = field.clone();
    for _ in 0..12 {
        let v = functionals::v(&current, spec);
        if v <= 0.0 {
            return Err(SolverError::Diverged(format!(
                "projection lost the constraint set (V = {v})"
            )));
        }
        if (v - 1.0).abs() <= 1e-10 {
            return Ok(current);
        }
        current = dilate(&current, v.powf(-1.0 / n));
    }
    Ok(current)
}

// ---------------------------------------------------------------------------
// common descent loop
// ---------------------------------------------------------------------------

struct DescentOutcome {
    field: Field,
    iterations: usize,
    converged: bool,
    warnings: Vec<String>,
}

enum Constraint {
    /// V pinned to 1 by dilation reprojection.
    UnitV,
    /// V pinned to 0 by amplitude rescaling (the root of c ↦ V(c u) nearest
    /// 1), with zero-level truncation of the positive part as fallback for
    /// candidates the rescaling cannot reach. Carries the sup-norm floor.
    ZeroV { floor: f64 },
}

/// Scales the field amplitude onto { V = 0 }, picking the root nearest 1.
/// None when no bracket exists in a generous factor range.
fn project_zero_v_amplitude(field: &Field, spec: &ProblemSpec) -> Option<Field> {
    let v_at = |c: f64| -> f64 {
        let mut scaled = field.clone();
        for comp in 0..scaled.num_components() {
            for v in scaled.component_mut(comp).iter_mut() {
                *v *= c;
            }
        }
        functionals::v(&scaled, spec)
    };
    let v1 = functionals::v(field, spec);
    if v1 == 0.0 {
        return Some(field.clone());
    }
    // expand around 1 until the sign flips
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut v_lo = v1;
    let mut v_hi = v1;
    for k in 1..=40 {
        let step = 1.0 + 0.05 * k as f64;
        if v1 < 0.0 {
            hi = step;
            v_hi = v_at(hi);
            if v_hi > 0.0 {
                break;
            }
            lo = hi;
            v_lo = v_hi;
        } else {
            lo = 1.0 / step;
            v_lo = v_at(lo);
            if v_lo < 0.0 {
                break;
            }
            hi = lo;
            v_hi = v_lo;
        }
    }
    if !(v_lo < 0.0 && v_hi > 0.0) {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if v_at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let mut out = field.clone();
    for comp in 0..out.num_components() {
        for v in out.component_mut(comp).iter_mut() {
            *v *= c;
        }
    }
    Some(out)
}

fn descend(
    start: Field,
    spec: &ProblemSpec,
    config: &SolverConfig,
    constraint: Constraint,
) -> Result<DescentOutcome, SolverError> {
    let grid = *start.grid();
    let p = spec.p();
    let n = spec.dim() as f64;
    let delta = config.grad_regularization;
    let mut warnings = Vec::new();

    let mut u = start;
    let mut jf = face_energy(&u, p, delta);
    let mut jc = functionals::j(&u, spec);
    if jf > jc * (1.0 + config.consistency_guard) {
        warnings.push(format!(
            "initial field already at the resolution guard (face/central J = {:.4})",
            jf / jc
        ));
    }
    let mut alpha = config.step_init;
    let mut window_j = jf;
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..config.max_iterations {
        iterations = iter + 1;
        let gj = face_energy_grad(&u, p, delta);
        let gv = v_grad(&u, spec);
        let v_now = functionals::v(&u, spec);

        // descent direction, projected tangential to the active constraint
        let active = match constraint {
            Constraint::UnitV => true,
            Constraint::ZeroV { .. } => v_now.abs() <= 1e-3 * jf.max(1.0),
        };
        let gg = dot(&gv, &gv);
        let mut d: Vec<Vec<f64>> = gj.iter().map(|c| c.iter().map(|v| -v).collect()).collect();
        if active && gg > 0.0 {
            let mu = -dot(&d, &gv) / gg;
            for (dc, gc) in d.iter_mut().zip(&gv) {
                for (dv, gvv) in dc.iter_mut().zip(gc) {
                    *dv += mu * gvv;
                }
            }
        }
        let raw = d.clone();
        if config.precond_iters > 0 {
            d = smooth(&grid, &d, config.precond_beta, config.precond_iters);
            if active && gg > 0.0 {
                let mu = -dot(&d, &gv) / gg;
                for (dc, gc) in d.iter_mut().zip(&gv) {
                    for (dv, gvv) in dc.iter_mut().zip(gc) {
                        *dv += mu * gvv;
                    }
                }
            }
        }
        let mut slope = dot(&gj, &d);
        if slope >= 0.0 {
            d = raw;
            slope = dot(&gj, &d);
            if slope >= 0.0 {
                converged = true;
                break;
            }
        }

        // backtracking on the projected candidate
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..60 {
            let cand = field_axpy(&u, a, &d);
            if !cand.is_finite() {
                a *= 0.5;
                continue;
            }
            let candidate = match constraint {
                Constraint::UnitV => {
                    let vc = functionals::v(&cand, spec);
                    if vc <= 0.05 {
                        a *= 0.5;
                        continue;
                    }
                    if (vc - 1.0).abs() > config.reproject_band {
                        let projected = dilate(&cand, vc.powf(-1.0 / n));
                        let vp = functionals::v(&projected, spec);
                        if (vp - 1.0).abs() > 0.02 {
                            a *= 0.5;
                            continue;
                        }
                        projected
                    } else {
                        cand
                    }
                }
                Constraint::ZeroV { floor } => {
                    let vc = functionals::v(&cand, spec);
                    let scale = jf.max(1.0);
                    let restored = if vc.abs() <= 1e-10 * scale {
                        cand
                    } else if let Some(projected) = project_zero_v_amplitude(&cand, spec) {
                        projected
                    } else if vc > 0.0 {
                        // the amplitude family misses zero: cut the peaks
                        let mut pos = cand.clone();
                        for v in pos.component_mut(0).iter_mut() {
                            *v = v.max(0.0);
                        }
                        match find_zero_truncation(&pos, spec) {
                            Ok(zt) => zt.field,
                            Err(_) => {
                                a *= 0.5;
                                continue;
                            }
                        }
                    } else {
                        a *= 0.5;
                        continue;
                    };
                    if restored.max_abs() < floor {
                        a *= 0.5;
                        continue;
                    }
                    restored
                }
            };
            let jf_c = face_energy(&candidate, p, delta);
            if jf_c <= jf + config.armijo_c * a * slope {
                let jc_c = functionals::j(&candidate, spec);
                if jf_c <= jc_c * (1.0 + config.consistency_guard) {
                    u = candidate;
                    jf = jf_c;
                    jc = jc_c;
                    accepted = true;
                    break;
                }
            }
            a *= 0.5;
        }
        if !accepted {
            // no direction decreases the resolved energy: converged at the
            // resolution this grid supports
            converged = true;
            break;
        }
        alpha = (a * 2.0).clamp(1e-12, 1e6);

        if let Constraint::ZeroV { floor } = constraint {
            if u.max_abs() < floor {
                return Err(SolverError::CollapsedToZero { floor });
            }
        }
        if iterations % 50 == 0 {
            let rel = (window_j - jf) / jf.max(1e-300);
            if rel < config.tol_rel_j {
                converged = true;
                break;
            }
            window_j = jf;
        }
    }
    let _ = jc;
    Ok(DescentOutcome {
        field: u,
        iterations,
        converged,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// public entry points
// ---------------------------------------------------------------------------

fn initial_field(
    grid: Grid,
    spec: &ProblemSpec,
    config: &SolverConfig,
    restart: usize,
    target_v: f64,
) -> Result<Field, SolverError> {
    match &config.init {
        InitKind::FromField(f) => {
            if f.grid() != &grid || f.num_components() != spec.m() {
                return Err(SolverError::InvalidSpec(
                    "initial field does not match grid or component count".into(),
                ));
            }
            Ok(f.clone())
        }
        InitKind::Gaussian {
            amplitude,
            width,
            center,
        } => {
            let mut c = center.clone().unwrap_or_else(|| vec![0.0; spec.dim()]);
            let mut w = *width;
            if restart > 0 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                    config.seed.wrapping_add(restart as u64),
                );
                for slot in c.iter_mut() {
                    *slot += rng.gen_range(-0.3..0.3) * w;
                }
                w *= rng.gen_range(0.8..1.25);
            }
            gaussian_init(grid, spec, *amplitude, w, &c, target_v)
        }
    }
}

/// Minimizes J over { V = 1 } and rescales the minimizer to a solution of
/// the unconstrained system.
pub fn minimize_p1(
    grid: Grid,
    spec: &ProblemSpec,
    config: &SolverConfig,
) -> Result<SolverResult, SolverError> {
    if spec.regime() != Regime::Subcritical {
        return Err(SolverError::InvalidSpec(
            "unit-constraint minimization needs 1 < p < N".into(),
        ));
    }
    let restarts = config.restarts.max(1);
    let outcomes: Vec<Result<SolverResult, SolverError>> = if config.threads > 1 && restarts > 1 {
        let mut slots: Vec<Option<Result<SolverResult, SolverError>>> =
            (0..restarts).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (restart, slot) in slots.iter_mut().enumerate() {
                handles.push(scope.spawn(move || {
                    *slot = Some(run_p1_once(grid, spec, config, restart));
                }));
                if handles.len() == config.threads {
                    handles.drain(..).for_each(|h| h.join().expect("restart thread"));
                }
            }
            handles.drain(..).for_each(|h| h.join().expect("restart thread"));
        });
        slots.into_iter().map(|s| s.expect("restart ran")).collect()
    } else {
        (0..restarts)
            .map(|restart| run_p1_once(grid, spec, config, restart))
            .collect()
    };
    let mut best: Option<SolverResult> = None;
    let mut last_err: Option<SolverError> = None;
    for outcome in outcomes {
        match outcome {
            Ok(result) => {
                let better = best.as_ref().map_or(true, |b| {
                    (result.converged(), -result.t()) > (b.converged(), -b.t())
                });
                if better {
                    best = Some(result);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| SolverError::Diverged("no restart ran".into())))
}

fn run_p1_once(
    grid: Grid,
    spec: &ProblemSpec,
    config: &SolverConfig,
    restart: usize,
) -> Result<SolverResult, SolverError> {
    let n = spec.dim() as f64;
    let p = spec.p();
    let init = initial_field(grid, spec, config, restart, 1.0)?;
    let init = project_onto_unit_v(&init, spec)?;
    let outcome = descend(init, spec, config, Constraint::UnitV)?;
    let mut warnings = outcome.warnings;

    // canonical gauge: recenter at the energy centroid, then land exactly on
    // the constraint
    let centroid = functionals::energy_centroid(&outcome.field, spec);
    let shift_sq: f64 = centroid.iter().map(|c| c * c).sum();
    let recentred = if shift_sq.sqrt() > 1e-3 * grid.spacing() {
        translate(&outcome.field, &centroid)
    } else {
        outcome.field
    };
    let minimizer = project_onto_unit_v(&recentred, spec)?;

    let t = functionals::j(&minimizer, spec);
    let Scales {
        alpha,
        sigma0,
        lambda,
    } = multiplier_and_scales(t, spec.dim(), p).map_err(SolverError::Functional)?;
    let trunc = dilation_truncation_ratio(&minimizer, sigma0);
    if trunc > 1e-6 {
        warnings.push(format!(
            "rescaling by σ0 = {sigma0:.4} pushes boundary-shell mass {trunc:.2e} of the maximum off the grid"
        ));
    }
    let solution = dilate(&minimizer, sigma0);
    let energy = EnergyReport::assemble(&solution, spec, Some(1.0), Some(t));
    let minimizer_energy = EnergyReport::assemble(&minimizer, spec, Some(alpha), Some(t));
    let _ = n;
    Ok(SolverResult {
        summary: SolveSummary {
            regime: Regime::Subcritical,
            t,
            alpha,
            sigma0,
            lambda,
            energy,
            minimizer_energy,
            iterations: outcome.iterations,
            converged: outcome.converged,
            multiplier_residual: None,
            warnings,
        },
        minimizer,
        solution,
    })
}

/// Minimizes J over { u != 0, V = 0 } at p = N through its inequality
/// relaxation V >= 0 (or V <= 0 when G is positive near the origin, by
/// flipping the sign of the potential).
pub fn minimize_p0_prime(
    grid: Grid,
    spec: &ProblemSpec,
    config: &SolverConfig,
) -> Result<SolverResult, SolverError> {
    if spec.regime() != Regime::Critical {
        return Err(SolverError::InvalidSpec(
            "zero-constraint minimization needs p = N".into(),
        ));
    }
    if spec.m() != 1 {
        return Err(SolverError::InvalidSpec(
            "zero-constraint minimization is scalar-only".into(),
        ));
    }
    match spec.nonlinearity().sign_near_zero() {
        SignNearZero::Negative => run_p0_once(grid, spec, config, spec.clone(), false),
        SignNearZero::Positive => {
            // mirrored path: minimizing with V <= 0 is the nonnegative-V
            // problem for the flipped potential -G
            let flipped = flip_potential(spec.nonlinearity());
            let flipped_spec = ProblemSpec::new(spec.dim(), spec.p(), flipped)
                .map_err(SolverError::Functional)?;
            run_p0_once(grid, spec, config, flipped_spec, true)
        }
        SignNearZero::Indefinite => Err(SolverError::InvalidSpec(
            "critical path needs a sign-definite potential near the origin".into(),
        )),
    }
}

fn flip_potential(nl: &Nonlinearity) -> Nonlinearity {
    let base = nl.clone();
    let base2 = nl.clone();
    Nonlinearity::custom(
        format!("{}-flipped", nl.name()),
        nl.m(),
        Arc::new(move |xi: &[f64]| -base.potential(xi)),
        Arc::new(move |xi: &[f64], out: &mut [f64]| {
            base2.grad_potential(xi, out);
            for v in out.iter_mut() {
                *v = -*v;
            }
        }),
        SignNearZero::Negative,
        nl.sign_radius(),
    )
}

fn run_p0_once(
    grid: Grid,
    spec: &ProblemSpec,
    config: &SolverConfig,
    work_spec: ProblemSpec,
    flipped: bool,
) -> Result<SolverResult, SolverError> {
    let p = spec.p();
    // feasible start: V slightly positive
    let init = initial_field(grid, &work_spec, config, 0, 0.0)?;
    let floor = config.norm_floor_rel * init.max_abs();
    let outcome = descend(init, &work_spec, config, Constraint::ZeroV { floor })?;
    let mut warnings = outcome.warnings;

    // polish onto V = 0 exactly
    let mut minimizer = outcome.field;
    let v_now = functionals::v(&minimizer, &work_spec);
    let scale = functionals::j(&minimizer, &work_spec).max(1.0);
    if v_now.abs() > 1e-8 * scale {
        if v_now > 0.0 {
            let mut pos = minimizer.clone();
            for v in pos.component_mut(0).iter_mut() {
                *v = v.max(0.0);
            }
            match find_zero_truncation(&pos, &work_spec) {
                Ok(zt) => minimizer = zt.field,
                Err(e) => warnings.push(format!("zero-level polish failed: {e}")),
            }
        } else {
            warnings.push(format!("converged iterate left V = {v_now:.3e} < 0"));
        }
    }
    // recenter
    let centroid = functionals::energy_centroid(&minimizer, spec);
    if centroid.iter().map(|c| c * c).sum::<f64>().sqrt() > 1e-3 * grid.spacing() {
        minimizer = translate(&minimizer, &centroid);
    }

    let t0 = functionals::j(&minimizer, spec);
    let est = estimate_multiplier(&minimizer, spec)?;
    if est.alpha <= 0.0 {
        warnings.push(format!(
            "estimated multiplier α = {:.3e} is not positive",
            est.alpha
        ));
    }
    let sigma0 = est.alpha.abs().powf(1.0 / p);
    let solution = dilate(&minimizer, sigma0);
    let energy = EnergyReport::assemble(&solution, spec, Some(est.alpha), None);
    let minimizer_energy = EnergyReport::assemble(&minimizer, spec, Some(est.alpha), None);
    let _ = flipped;
    Ok(SolverResult {
        summary: SolveSummary {
            regime: Regime::Critical,
            t: t0,
            alpha: est.alpha,
            sigma0,
            lambda: 0.0,
            energy,
            minimizer_energy,
            iterations: outcome.iterations,
            converged: outcome.converged,
            multiplier_residual: Some(est.relative_residual),
            warnings,
        },
        minimizer,
        solution,
    })
}

/// Lagrange multiplier of a converged minimizer.
///
/// Subcritical: the closed form α = (N-p) J / (N V). Critical: the Galerkin
/// ratio ⟨-Δ_p u, u⟩ / ⟨g(u), u⟩ with the residual of the Euler-Lagrange
/// system reported alongside.
pub fn estimate_multiplier(
    field: &Field,
    spec: &ProblemSpec,
) -> Result<MultiplierEstimate, SolverError> {
    match spec.regime() {
        Regime::Subcritical => {
            let jv = functionals::j(field, spec);
            let vv = functionals::v(field, spec);
            if vv.abs() < 1e-12 * jv.max(1.0) {
                return Err(SolverError::DegenerateDenominator);
            }
            let n = spec.dim() as f64;
            Ok(MultiplierEstimate {
                alpha: (n - spec.p()) * jv / (n * vv),
                relative_residual: 0.0,
            })
        }
        Regime::Critical => {
            let gj = face_energy_grad(field, spec.p(), 1e-8);
            let gv = v_grad(field, spec);
            let fc: Vec<Vec<f64>> = field.components().to_vec();
            let num = dot(&gj, &fc);
            let den = dot(&gv, &fc);
            if den.abs() < 1e-300 || field.max_abs() == 0.0 {
                return Err(SolverError::DegenerateDenominator);
            }
            let alpha = num / den;
            let mut res2 = 0.0;
            let mut ref2 = 0.0;
            for (gjc, gvc) in gj.iter().zip(&gv) {
                for (a, b) in gjc.iter().zip(gvc) {
                    let r = a - alpha * b;
                    res2 += r * r;
                    ref2 += (alpha * b) * (alpha * b);
                }
            }
            Ok(MultiplierEstimate {
                alpha,
                relative_residual: (res2 / ref2.max(1e-300)).sqrt(),
            })
        }
    }
}

/// Full pipeline: dispatch by regime, then attach the verification verdicts.
pub fn solve_least_energy(
    grid: Grid,
    spec: &ProblemSpec,
    config: &SolverConfig,
    thresholds: &crate::verify::Thresholds,
) -> Result<(SolverResult, Vec<crate::verify::Verdict>), SolverError> {
    let result = match spec.regime() {
        Regime::Subcritical => minimize_p1(grid, spec, config)?,
        Regime::Critical => minimize_p0_prime(grid, spec, config)?,
    };
    let verdicts = crate::verify::suite(&result, spec, thresholds);
    Ok((result, verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;

    fn spec(dim: usize, p: f64) -> ProblemSpec {
        ProblemSpec::new(dim, p, Nonlinearity::cubic()).unwrap()
    }

    #[test]
    fn face_energy_gradient_matches_finite_differences() {
        let grid = Grid::new(2, 2.0, 8).unwrap();
        let f = Field::from_fn(grid, 1, |x, out| {
            out[0] = (1.3 * x[0]).sin() + 0.4 * x[1] * x[1] - 0.2
        });
        for &p in &[2.0, 2.5] {
            let delta = 1e-6;
            let grad = face_energy_grad(&f, p, delta);
            let base = face_energy(&f, p, delta);
            let step = 1e-6;
            for cell in [0usize, 5, 17, 30, 63] {
                let mut probe = f.clone();
                probe.component_mut(0)[cell] += step;
                let fd = (face_energy(&probe, p, delta) - base) / step;
                assert!(
                    (fd - grad[0][cell]).abs() <= 1e-4 * (1.0 + fd.abs()),
                    "p = {p}, cell {cell}: fd {fd} vs grad {}",
                    grad[0][cell]
                );
            }
        }
    }

    #[test]
    fn smoothing_solves_helmholtz_approximately() {
        let grid = Grid::new(2, 3.0, 16).unwrap();
        let f = Field::from_scalar_fn(grid, |x| (x[0] * 0.9).cos() * (1.1 * x[1]).sin());
        let b = vec![f.component(0).to_vec()];
        let x = smooth(&grid, &b, 0.7, 200);
        let mut back = vec![0.0; b[0].len()];
        helmholtz_apply(&grid, 0.7, &x[0], &mut back);
        let err: f64 = back
            .iter()
            .zip(&b[0])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = b[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * norm, "residual {err} vs norm {norm}");
    }

    #[test]
    fn initialization_requires_reachable_constraint() {
        // a nonlinearity with G <= 0 everywhere can never reach V > 0
        let nl = Nonlinearity::custom(
            "hopeless",
            1,
            Arc::new(|xi: &[f64]| -xi[0] * xi[0]),
            Arc::new(|xi: &[f64], out: &mut [f64]| out[0] = -2.0 * xi[0]),
            SignNearZero::Negative,
            1.0,
        );
        let spec = ProblemSpec::new(3, 2.0, nl).unwrap();
        let grid = Grid::new(3, 4.0, 16).unwrap();
        let config = SolverConfig::default();
        match minimize_p1(grid, &spec, &config) {
            Err(SolverError::NoPositiveV(_)) => {}
            other => panic!("expected NoPositiveV, got {other:?}"),
        }
    }

    #[test]
    fn multiplier_on_rescaled_subcritical_field() {
        // α = (N-p) J/(N V); on a field with V = 1 this is (N-p) J / N
        let sp = spec(3, 2.0);
        let grid = Grid::new(3, 6.0, 32).unwrap();
        let f = functionals::gaussian_bump(grid, 1, 3.0, 1.0, &[0.0; 3]);
        let est = estimate_multiplier(&f, &sp).unwrap();
        let expect =
            (3.0 - 2.0) * functionals::j(&f, &sp) / (3.0 * functionals::v(&f, &sp));
        assert!((est.alpha - expect).abs() < 1e-12);
    }

    #[test]
    fn multiplier_rejects_zero_field() {
        let sp = spec(2, 2.0);
        let grid = Grid::new(2, 4.0, 16).unwrap();
        let f = Field::zeros(grid, 1);
        assert!(matches!(
            estimate_multiplier(&f, &sp),
            Err(SolverError::DegenerateDenominator)
        ));
    }

    #[test]
    fn critical_solver_reaches_flat_v() {
        let sp = spec(2, 2.0);
        let grid = Grid::new(2, 8.0, 64).unwrap();
        let config = SolverConfig {
            max_iterations: 600,
            ..SolverConfig::default()
        };
        let result = minimize_p0_prime(grid, &sp, &config).unwrap();
        let v = functionals::v(&result.minimizer, &sp);
        let t0 = result.t();
        assert!(t0 > 0.0);
        assert!(
            v.abs() <= 1e-3 * t0,
            "V = {v} vs T0 = {t0} (not on the constraint)"
        );
        assert!(result.summary.multiplier_residual.is_some());
    }
}
