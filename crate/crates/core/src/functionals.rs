//! The constrained-minimization functionals on grid fields: the p-Dirichlet
//! energy J, the potential integral V, the action S = J - V, the Pohozaev
//! balances, the scaling lower bound, and the closed-form least-energy
//! quantities derived from the dilation identities
//! J(u_σ) = σ^{N-p} J(u), V(u_σ) = σ^N V(u).

use crate::error::FunctionalError;
use crate::field::{gradient, integrate, pairwise_sum, Field, Grid};
use crate::nonlinearity::Nonlinearity;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// 1 < p < N; constraint V = 1.
    Subcritical,
    /// p = N; constraint V = 0.
    Critical,
}

/// Which equation is being solved: dimension, exponent and nonlinearity.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    dim: usize,
    p: f64,
    nonlinearity: Nonlinearity,
}

impl ProblemSpec {
    pub fn new(dim: usize, p: f64, nonlinearity: Nonlinearity) -> Result<Self, FunctionalError> {
        if dim < 2 {
            return Err(FunctionalError::Domain(format!("dimension {dim} < 2")));
        }
        if !(p > 1.0 && p <= dim as f64) {
            return Err(FunctionalError::Domain(format!(
                "exponent p = {p} outside (1, N] with N = {dim}"
            )));
        }
        Ok(ProblemSpec {
            dim,
            p,
            nonlinearity,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.nonlinearity.m()
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn regime(&self) -> Regime {
        if (self.p - self.dim as f64).abs() < 1e-12 {
            Regime::Critical
        } else {
            Regime::Subcritical
        }
    }
}

/// Energy summary of one field.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub alpha: Option<f64>,
    pub pohozaev_residual: f64,
    pub lower_bound_slack: Option<f64>,
}

impl EnergyReport {
    /// Assembles the report for a field claimed to solve the Euler-Lagrange
    /// system with multiplier `alpha` (None leaves the residual at alpha = 1).
    pub fn assemble(field: &Field, spec: &ProblemSpec, alpha: Option<f64>, t: Option<f64>) -> Self {
        let jv = j(field, spec);
        let vv = v(field, spec);
        let residual = match spec.regime() {
            Regime::Subcritical => {
                let a = alpha.unwrap_or(1.0);
                (spec.dim() as f64 - spec.p()) * jv - a * spec.dim() as f64 * vv
            }
            Regime::Critical => vv,
        };
        let slack = match (spec.regime(), t) {
            (Regime::Subcritical, Some(t)) if vv > 0.0 => {
                Some(jv - t * vv.powf((spec.dim() as f64 - spec.p()) / spec.dim() as f64))
            }
            _ => None,
        };
        EnergyReport {
            j: jv,
            v: vv,
            s: jv - vv,
            alpha,
            pohozaev_residual: residual,
            lower_bound_slack: slack,
        }
    }
}

/// J(u) = (1/p) ∫ Σ_i |∇u_i|^p.
pub fn j(field: &Field, spec: &ProblemSpec) -> f64 {
    assert_eq!(field.num_components(), spec.m(), "component count mismatch");
    let grid = field.grid();
    let p = spec.p();
    let grads = gradient(field);
    let mut density = vec![0.0; grid.cell_count()];
    for comp in &grads {
        if (p - 2.0).abs() < 1e-14 {
            for (cell, d) in density.iter_mut().enumerate() {
                *d += comp.magnitude_sq(cell);
            }
        } else {
            for (cell, d) in density.iter_mut().enumerate() {
                *d += comp.magnitude_sq(cell).powf(p / 2.0);
            }
        }
    }
    integrate(grid, &density) / p
}

/// V(u) = ∫ G(u).
pub fn v(field: &Field, spec: &ProblemSpec) -> f64 {
    assert_eq!(field.num_components(), spec.m(), "component count mismatch");
    let grid = field.grid();
    let nl = spec.nonlinearity();
    let m = spec.m();
    let mut density = vec![0.0; grid.cell_count()];
    let mut xi = vec![0.0; m];
    for (cell, d) in density.iter_mut().enumerate() {
        for (i, slot) in xi.iter_mut().enumerate() {
            *slot = field.component(i)[cell];
        }
        *d = nl.potential(&xi);
    }
    integrate(grid, &density)
}

/// S(u) = J(u) - V(u).
pub fn action(field: &Field, spec: &ProblemSpec) -> f64 {
    j(field, spec) - v(field, spec)
}

/// (N-p) J(u) - α N V(u); small absolute value certifies the subcritical
/// Pohozaev balance.
pub fn pohozaev_residual(
    field: &Field,
    spec: &ProblemSpec,
    alpha: f64,
) -> Result<f64, FunctionalError> {
    if spec.regime() != Regime::Subcritical {
        return Err(FunctionalError::Domain(
            "subcritical residual requested in the critical regime".into(),
        ));
    }
    let n = spec.dim() as f64;
    Ok((n - spec.p()) * j(field, spec) - alpha * n * v(field, spec))
}

/// In the critical regime the balance degenerates to V(u) = 0; returns V.
pub fn critical_pohozaev_residual(
    field: &Field,
    spec: &ProblemSpec,
) -> Result<f64, FunctionalError> {
    if spec.regime() != Regime::Critical {
        return Err(FunctionalError::Domain(
            "critical residual requested in the subcritical regime".into(),
        ));
    }
    Ok(v(field, spec))
}

/// J(u) - T V(u)^{(N-p)/N}; nonnegative for every admissible field once T is
/// the constrained infimum.
pub fn lower_bound_slack(
    field: &Field,
    spec: &ProblemSpec,
    t: f64,
) -> Result<f64, FunctionalError> {
    if spec.regime() != Regime::Subcritical {
        return Err(FunctionalError::Domain(
            "lower bound requires the subcritical regime".into(),
        ));
    }
    let vv = v(field, spec);
    if vv <= 0.0 {
        return Err(FunctionalError::Domain(format!(
            "lower bound requires V > 0, got {vv}"
        )));
    }
    let n = spec.dim() as f64;
    Ok(j(field, spec) - t * vv.powf((n - spec.p()) / n))
}

/// Least-energy action p (N-p)^{N/p - 1} N^{-N/p} T^{N/p}.
pub fn least_energy_value(t: f64, dim: usize, p: f64) -> Result<f64, FunctionalError> {
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(FunctionalError::Domain(format!(
            "closed form requires 1 < p < N, got p = {p}, N = {n}"
        )));
    }
    if t <= 0.0 {
        return Err(FunctionalError::Domain(format!("T = {t} must be positive")));
    }
    Ok(p * (n - p).powf(n / p - 1.0) * n.powf(-n / p) * t.powf(n / p))
}

/// Multiplier and dilation scales of a constrained minimizer with J = T.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Scales {
    /// Lagrange multiplier α = (N-p) T / N.
    pub alpha: f64,
    /// σ0 = α^{1/p}; dilation carrying the minimizer to a solution.
    pub sigma0: f64,
    /// λ = α^{N/p}; constraint level of the least-energy solution.
    pub lambda: f64,
}

pub fn multiplier_and_scales(t: f64, dim: usize, p: f64) -> Result<Scales, FunctionalError> {
    let n = dim as f64;
    if !(p > 1.0 && p < n) {
        return Err(FunctionalError::Domain(format!(
            "scales require 1 < p < N, got p = {p}, N = {n}"
        )));
    }
    if t <= 0.0 {
        return Err(FunctionalError::Domain(format!("T = {t} must be positive")));
    }
    let alpha = (n - p) * t / n;
    Ok(Scales {
        alpha,
        sigma0: alpha.powf(1.0 / p),
        lambda: alpha.powf(n / p),
    })
}

/// Σ_i ‖f_i‖_p^p integrated, then the p-th root: the L^p norm of the field.
pub fn lp_norm(field: &Field, p: f64) -> f64 {
    let grid = field.grid();
    let mut density = vec![0.0; grid.cell_count()];
    for comp in field.components() {
        for (cell, d) in density.iter_mut().enumerate() {
            *d += comp[cell].abs().powf(p);
        }
    }
    (grid.cell_volume() * pairwise_sum(&density)).powf(1.0 / p)
}

/// |∇u|^p-weighted barycenter, the canonical symmetry center. Falls back to
/// the origin for fields with no gradient mass.
pub fn energy_centroid(field: &Field, spec: &ProblemSpec) -> Vec<f64> {
    let grid = field.grid();
    let p = spec.p();
    let grads = gradient(field);
    let mut density = vec![0.0; grid.cell_count()];
    for comp in &grads {
        for (cell, d) in density.iter_mut().enumerate() {
            *d += comp.magnitude_sq(cell).powf(p / 2.0);
        }
    }
    let mass = pairwise_sum(&density);
    let mut centroid = vec![0.0; grid.dim()];
    if mass <= 0.0 {
        return centroid;
    }
    for (axis, slot) in centroid.iter_mut().enumerate() {
        let mut weighted = 0.0;
        for (cell, d) in density.iter().enumerate() {
            weighted += grid.axis_coord(grid.axis_index(cell, axis)) * d;
        }
        *slot = weighted / mass;
    }
    centroid
}

/// Convenience: gaussian bump A exp(-|x - c|^2 / w^2) in every component.
pub fn gaussian_bump(grid: Grid, m: usize, amplitude: f64, width: f64, center: &[f64]) -> Field {
    let c = center.to_vec();
    Field::from_fn(grid, m, move |pos, out| {
        let r2: f64 = pos.iter().zip(&c).map(|(x, c)| (x - c) * (x - c)).sum();
        out.fill(amplitude * (-r2 / (width * width)).exp());
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use std::f64::consts::PI;

    fn cubic_spec(dim: usize, p: f64) -> ProblemSpec {
        ProblemSpec::new(dim, p, Nonlinearity::cubic()).unwrap()
    }

    #[test]
    fn spec_validates_exponent() {
        assert!(ProblemSpec::new(3, 1.0, Nonlinearity::cubic()).is_err());
        assert!(ProblemSpec::new(3, 3.5, Nonlinearity::cubic()).is_err());
        assert_eq!(cubic_spec(3, 2.0).regime(), Regime::Subcritical);
        assert_eq!(cubic_spec(2, 2.0).regime(), Regime::Critical);
    }

    #[test]
    fn energies_vanish_on_zero_field() {
        let spec = cubic_spec(3, 2.0);
        let f = Field::zeros(Grid::new(3, 4.0, 16).unwrap(), 1);
        assert_eq!(j(&f, &spec), 0.0);
        assert_eq!(v(&f, &spec), 0.0);
        assert_eq!(action(&f, &spec), 0.0);
    }

    #[test]
    fn dirichlet_energy_of_gaussian() {
        // J = (1/2) ∫ 4|x|^2 e^{-2|x|^2} = (3/2)(π/2)^{3/2} for N = 3, p = 2.
        // Central differences under-measure the narrow bump by about
        // (5/3) <k^2> h^2, so the error contracts fourfold per refinement.
        let spec = cubic_spec(3, 2.0);
        let exact = 1.5 * (PI / 2.0).powf(1.5);
        let j_at = |n: usize| {
            let grid = Grid::new(3, 6.0, n).unwrap();
            j(&gaussian_bump(grid, 1, 1.0, 1.0, &[0.0; 3]), &spec)
        };
        let coarse = j_at(96);
        assert!(
            (coarse - exact).abs() < 0.03 * exact,
            "n=96: got {coarse}, want {exact}"
        );
        let fine = j_at(160);
        assert!(
            (fine - exact).abs() < 0.011 * exact,
            "n=160: got {fine}, want {exact}"
        );
        assert!((fine - exact).abs() < 0.5 * (coarse - exact).abs());
    }

    #[test]
    fn potential_of_gaussian_cubic() {
        // V = (1/4)(π/4)^{3/2} - (1/2)(π/2)^{3/2} ≈ -0.810
        let spec = cubic_spec(3, 2.0);
        let grid = Grid::new(3, 6.0, 96).unwrap();
        let f = gaussian_bump(grid, 1, 1.0, 1.0, &[0.0; 3]);
        let exact = 0.25 * (PI / 4.0).powf(1.5) - 0.5 * (PI / 2.0).powf(1.5);
        let got = v(&f, &spec);
        assert!(
            (got - exact).abs() < 0.01 * exact.abs(),
            "got {got}, want {exact}"
        );
    }

    #[test]
    fn potential_sign_flips_at_large_amplitude() {
        // A = 3: (81/4)(π/4)^{3/2} - (9/2)(π/2)^{3/2} > 0
        let spec = cubic_spec(3, 2.0);
        let grid = Grid::new(3, 6.0, 96).unwrap();
        let f = gaussian_bump(grid, 1, 3.0, 1.0, &[0.0; 3]);
        let exact = (81.0 / 4.0) * (PI / 4.0).powf(1.5) - 4.5 * (PI / 2.0).powf(1.5);
        assert!(exact > 0.0);
        let got = v(&f, &spec);
        assert!(got > 0.0);
        assert!((got - exact).abs() < 0.01 * exact);
    }

    #[test]
    fn action_is_j_minus_v() {
        let spec = cubic_spec(3, 2.0);
        let grid = Grid::new(3, 5.0, 32).unwrap();
        let f = gaussian_bump(grid, 1, 1.7, 1.2, &[0.4, -0.2, 0.0]);
        let s = action(&f, &spec);
        assert_eq!(s, j(&f, &spec) - v(&f, &spec));
    }

    #[test]
    fn pohozaev_residual_zero_field() {
        let spec = cubic_spec(3, 2.0);
        let f = Field::zeros(Grid::new(3, 4.0, 16).unwrap(), 1);
        assert_eq!(pohozaev_residual(&f, &spec, 2.7).unwrap(), 0.0);
        assert!(pohozaev_residual(&f, &cubic_spec(2, 2.0), 1.0).is_err());
    }

    #[test]
    fn critical_residual_is_v() {
        let spec = cubic_spec(2, 2.0);
        let grid = Grid::new(2, 5.0, 64).unwrap();
        let f = gaussian_bump(grid, 1, 3.0, 1.0, &[0.0; 2]);
        let res = critical_pohozaev_residual(&f, &spec).unwrap();
        assert_eq!(res, v(&f, &spec));
        assert!(critical_pohozaev_residual(&f, &cubic_spec(3, 2.0)).is_err());
    }

    #[test]
    fn lower_bound_requires_positive_v() {
        let spec = cubic_spec(3, 2.0);
        let grid = Grid::new(3, 5.0, 32).unwrap();
        let small = gaussian_bump(grid, 1, 0.5, 1.0, &[0.0; 3]); // V < 0
        assert!(lower_bound_slack(&small, &spec, 1.0).is_err());
    }

    #[test]
    fn least_energy_closed_forms() {
        // N=3, p=2, T=1: 2 * 3^{-3/2}
        let v1 = least_energy_value(1.0, 3, 2.0).unwrap();
        assert!((v1 - 2.0 * 3f64.powf(-1.5)).abs() < 1e-15);
        // N=4, p=2, T=1: 2 * 2 * 4^{-2} = 1/4
        let v2 = least_energy_value(1.0, 4, 2.0).unwrap();
        assert!((v2 - 0.25).abs() < 1e-15);
        // homogeneity in T
        let v3 = least_energy_value(2.0, 3, 2.0).unwrap();
        assert!((v3 - 2f64.powf(1.5) * v1).abs() < 1e-12);
        assert!(least_energy_value(1.0, 3, 3.0).is_err());
    }

    #[test]
    fn scales_examples() {
        let s = multiplier_and_scales(3.0, 3, 2.0).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-15);
        assert!((s.sigma0 - 1.0).abs() < 1e-15);
        assert!((s.lambda - 1.0).abs() < 1e-15);
        let s = multiplier_and_scales(1.0, 3, 2.0).unwrap();
        assert!((s.alpha - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.sigma0 - 3f64.powf(-0.5)).abs() < 1e-15);
        assert!((s.lambda - 3f64.powf(-1.5)).abs() < 1e-15);
        assert!(multiplier_and_scales(1.0, 2, 2.0).is_err());
    }

    #[test]
    fn scales_consistent_with_least_energy_value() {
        // S(u_{σ0}) = σ0^{N-p} T - σ0^N with J = T, V = 1
        for &(t, dim, p) in &[(1.0, 3, 2.0), (3.0, 3, 2.0), (5.0, 4, 2.0), (2.0, 4, 3.0)] {
            let s = multiplier_and_scales(t, dim, p).unwrap();
            let n = dim as f64;
            let direct = s.sigma0.powf(n - p) * t - s.sigma0.powf(n);
            let closed = least_energy_value(t, dim, p).unwrap();
            assert!(
                (direct - closed).abs() < 1e-12 * closed,
                "T={t} N={dim} p={p}: {direct} vs {closed}"
            );
        }
    }
}
