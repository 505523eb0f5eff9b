//! Numerical verdicts for the structural properties a least-energy solution
//! must carry: radial symmetry about the energy centroid, constant sign,
//! radial monotonicity, the variational characterization through the
//! dilation closed forms, constraint halving across hyperplanes, and the
//! positive/negative part sum rule.

use crate::error::VerifyError;
use crate::field::{pairwise_sum, Field};
use crate::functionals::{self, least_energy_value, ProblemSpec, Regime};
use crate::solver::SolverResult;
use crate::transforms::{radial_profile, reflect, split_search, RadialProfile, Side, SplitTarget};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

/// One named check: passes iff metric <= threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub metric: f64,
    pub threshold: f64,
    pub pass: bool,
    pub details: String,
}

impl Verdict {
    fn new(name: &str, metric: f64, threshold: f64, details: String) -> Self {
        Verdict {
            name: name.into(),
            metric,
            threshold,
            pass: metric <= threshold,
            details,
        }
    }
}

/// Default acceptance thresholds; all config-overridable.
#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    pub symmetry: f64,
    pub sign: f64,
    pub monotonicity: f64,
    pub variational: f64,
    pub halving: f64,
    pub sum_rule: f64,
    pub sum_rule_critical: f64,
    pub pohozaev: f64,
    pub pohozaev_critical: f64,
    pub domain_truncation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            symmetry: 0.03,
            sign: 1e-6,
            monotonicity: 1e-2,
            variational: 0.03,
            halving: 0.05,
            sum_rule: 0.02,
            sum_rule_critical: 1e-3,
            pohozaev: 1e-2,
            pohozaev_critical: 1e-3,
            domain_truncation: 0.01,
        }
    }
}

/// Rebuilds the field from its shell-averaged profile about `center`,
/// interpolating the profile smoothly between shell nodes.
pub fn radialize(field: &Field, center: &[f64]) -> Field {
    let grid = *field.grid();
    let profile = radial_profile(field, center);
    let m = field.num_components();
    let mut out = Field::zeros(grid, m);
    for cell in 0..grid.cell_count() {
        let r = grid.radius_sq(cell, Some(center)).sqrt();
        for i in 0..m {
            out.component_mut(i)[cell] =
                crate::transforms::profile_value_at(&profile, i, r);
        }
    }
    out
}

fn component_lp(values: &[f64], cell_volume: f64, p: f64) -> f64 {
    let density: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    (cell_volume * pairwise_sum(&density)).powf(1.0 / p)
}

/// Relative L^p distance to the radialization about an explicit center.
pub fn check_symmetry_about(
    field: &Field,
    spec: &ProblemSpec,
    center: &[f64],
    threshold: f64,
) -> Verdict {
    let radial = radialize(field, center);
    let p = spec.p();
    let hn = field.grid().cell_volume();
    let mut metric = 0.0f64;
    for i in 0..field.num_components() {
        let norm = component_lp(field.component(i), hn, p);
        if norm == 0.0 {
            continue;
        }
        let diff: Vec<f64> = field
            .component(i)
            .iter()
            .zip(radial.component(i))
            .map(|(a, b)| a - b)
            .collect();
        metric = metric.max(component_lp(&diff, hn, p) / norm);
    }
    Verdict::new(
        "symmetry",
        metric,
        threshold,
        format!("center {center:?}"),
    )
}

/// Symmetry about the energy centroid (the canonical gauge).
pub fn check_symmetry(field: &Field, spec: &ProblemSpec, threshold: f64) -> Verdict {
    let center = functionals::energy_centroid(field, spec);
    check_symmetry_about(field, spec, &center, threshold)
}

/// Constant-sign check for scalar fields: max(0, -min·max)/‖f‖_∞^2.
pub fn check_sign(field: &Field, threshold: f64) -> Result<Verdict, VerifyError> {
    if field.num_components() != 1 {
        return Err(VerifyError::NotScalar {
            check: "sign",
            m: field.num_components(),
        });
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in field.component(0) {
        min = min.min(v);
        max = max.max(v);
    }
    let sup = min.abs().max(max.abs());
    let metric = if sup == 0.0 {
        0.0
    } else {
        (-(min * max)).max(0.0) / (sup * sup)
    };
    Ok(Verdict::new(
        "sign",
        metric,
        threshold,
        format!("min {min:.3e}, max {max:.3e}"),
    ))
}

/// Radial monotonicity of a scalar profile: the largest step in the wrong
/// direction, relative to the profile's sup. Nonpositive profiles are
/// expected to increase toward zero instead.
pub fn check_monotonicity(profile: &RadialProfile, threshold: f64) -> Verdict {
    let values = &profile.values[0];
    let sup = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if sup == 0.0 {
        return Verdict::new("monotonicity", 0.0, threshold, "zero profile".into());
    }
    let nonpositive = values.iter().sum::<f64>() < 0.0;
    let mut metric = 0.0f64;
    for pair in values.windows(2) {
        let increase = if nonpositive {
            pair[0] - pair[1]
        } else {
            pair[1] - pair[0]
        };
        metric = metric.max(increase.max(0.0));
    }
    Verdict::new(
        "monotonicity",
        metric / sup,
        threshold,
        format!(
            "{} profile, {} shells",
            if nonpositive { "nonpositive" } else { "nonnegative" },
            values.len()
        ),
    )
}

/// The closed-form triple S, J, V of the rescaled solution versus the
/// dilation identities evaluated at the measured T.
pub fn check_variational_characterization(
    result: &SolverResult,
    spec: &ProblemSpec,
    threshold: f64,
) -> Verdict {
    if spec.regime() != Regime::Subcritical {
        return Verdict::new(
            "variational_characterization",
            0.0,
            threshold,
            "critical regime: S = J = T0 checked by the pohozaev verdict".into(),
        );
    }
    let n = spec.dim() as f64;
    let p = spec.p();
    let t = result.summary.t;
    let s_target = least_energy_value(t, spec.dim(), p).unwrap_or(f64::NAN);
    let j_target = ((n - p) / n).powf((n - p) / p) * t.powf(n / p);
    let v_target = ((n - p) / n).powf(n / p) * t.powf(n / p);
    let j_sol = functionals::j(&result.solution, spec);
    let v_sol = functionals::v(&result.solution, spec);
    let s_sol = j_sol - v_sol;
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    let metric = rel(s_sol, s_target)
        .max(rel(j_sol, j_target))
        .max(rel(v_sol, v_target));
    Verdict::new(
        "variational_characterization",
        metric,
        threshold,
        format!(
            "S {s_sol:.4} vs {s_target:.4}, J {j_sol:.4} vs {j_target:.4}, V {v_sol:.4} vs {v_target:.4}"
        ),
    )
}

/// Splits the constraint along each direction and compares the energies of
/// both reflected halves with the original: minimizers tie.
pub fn check_halving(
    field: &Field,
    spec: &ProblemSpec,
    directions: &[Vec<f64>],
    threshold: f64,
) -> Result<Verdict, VerifyError> {
    let target = match spec.regime() {
        Regime::Subcritical => SplitTarget::HalfLambda,
        Regime::Critical => SplitTarget::Zero,
    };
    let j0 = functionals::j(field, spec);
    let mut metric = 0.0f64;
    let mut details = String::new();
    for e in directions {
        let plane = split_search(field, spec, e, target)?;
        let j_plus = functionals::j(&reflect(field, &plane, Side::Plus), spec);
        let j_minus = functionals::j(&reflect(field, &plane, Side::Minus), spec);
        let dev = ((j_plus - j0).abs()).max((j_minus - j0).abs()) / j0;
        metric = metric.max(dev);
        details.push_str(&format!(
            "e {e:?}: t {:.4}, J± ({j_plus:.4}, {j_minus:.4}) vs {j0:.4}; ",
            plane.offset()
        ));
    }
    Ok(Verdict::new("halving", metric, threshold, details))
}

/// Positive/negative part bookkeeping: in the subcritical case both parts
/// carry nonnegative V, the concavity inequality
/// 1 >= (V+/λ)^{(N-p)/N} + (V-/λ)^{(N-p)/N} holds, and one part carries the
/// whole constraint; in the critical case both parts have vanishing V.
pub fn check_sum_rule(
    field: &Field,
    spec: &ProblemSpec,
    thresholds: &Thresholds,
) -> Result<Verdict, VerifyError> {
    if field.num_components() != 1 {
        return Err(VerifyError::NotScalar {
            check: "sum_rule",
            m: field.num_components(),
        });
    }
    let mut plus = field.clone();
    let mut minus = field.clone();
    for v in plus.component_mut(0).iter_mut() {
        *v = v.max(0.0);
    }
    for v in minus.component_mut(0).iter_mut() {
        *v = v.min(0.0);
    }
    let v_plus = functionals::v(&plus, spec);
    let v_minus = functionals::v(&minus, spec);
    match spec.regime() {
        Regime::Subcritical => {
            let lambda = functionals::v(field, spec);
            let n = spec.dim() as f64;
            let exponent = (n - spec.p()) / n;
            let share = |v: f64| (v.max(0.0) / lambda).powf(exponent);
            let slack = 1.0 - share(v_plus) - share(v_minus);
            let metric = (-v_plus / lambda)
                .max(-v_minus / lambda)
                .max(-slack)
                .max(v_plus.min(v_minus) / lambda)
                .max(0.0);
            Ok(Verdict::new(
                "sum_rule",
                metric,
                thresholds.sum_rule,
                format!("V+ {v_plus:.4e}, V- {v_minus:.4e}, λ {lambda:.4e}, slack {slack:.4e}"),
            ))
        }
        Regime::Critical => {
            let j0 = functionals::j(field, spec);
            let metric = v_plus.abs().max(v_minus.abs()) / j0.max(1e-300);
            Ok(Verdict::new(
                "sum_rule",
                metric,
                thresholds.sum_rule_critical,
                format!("V+ {v_plus:.4e}, V- {v_minus:.4e}, J {j0:.4e}"),
            ))
        }
    }
}

/// Pohozaev balance of the rescaled solution: (N-p)J = N V at α = 1 in the
/// subcritical regime, V = 0 at p = N.
pub fn check_pohozaev(result: &SolverResult, spec: &ProblemSpec, thresholds: &Thresholds) -> Verdict {
    match spec.regime() {
        Regime::Subcritical => {
            let n = spec.dim() as f64;
            let j = functionals::j(&result.solution, spec);
            let v = functionals::v(&result.solution, spec);
            let residual = (n - spec.p()) * j - n * v;
            let metric = residual.abs() / ((n - spec.p()) * j).max(1e-300);
            Verdict::new(
                "pohozaev",
                metric,
                thresholds.pohozaev,
                format!("(N-p)J {:.4}, NV {:.4}", (n - spec.p()) * j, n * v),
            )
        }
        Regime::Critical => {
            let j = functionals::j(&result.minimizer, spec);
            let v = functionals::v(&result.minimizer, spec);
            Verdict::new(
                "pohozaev",
                v.abs() / j.max(1e-300),
                thresholds.pohozaev_critical,
                format!("V {v:.4e}, J {j:.4e}"),
            )
        }
    }
}

/// Change of J when the box is embedded in one of twice the extent (computed
/// exactly from the boundary stencils, without materializing the large
/// grid). A visible change means the truncation radius is too small.
pub fn check_domain_truncation(field: &Field, spec: &ProblemSpec, threshold: f64) -> Verdict {
    let grid = field.grid();
    let n = grid.cells_per_dim();
    let h = grid.spacing();
    let p = spec.p();
    let j0 = functionals::j(field, spec);
    if j0 == 0.0 {
        return Verdict::new("domain_truncation", 0.0, threshold, "zero field".into());
    }
    let mut correction = 0.0;
    for comp_idx in 0..field.num_components() {
        let comp = field.component(comp_idx);
        for cell in 0..grid.cell_count() {
            let mut boundary = false;
            let mut mag_old = 0.0;
            let mut mag_new = 0.0;
            for axis in 0..grid.dim() {
                let stride = grid.stride(axis);
                let k = (cell / stride) % n;
                let (d_old, d_new) = if k == 0 {
                    let one_sided = (comp[cell + stride] - comp[cell]) / h;
                    let central = comp[cell + stride] / (2.0 * h);
                    boundary = true;
                    (one_sided, central)
                } else if k == n - 1 {
                    let one_sided = (comp[cell] - comp[cell - stride]) / h;
                    let central = -comp[cell - stride] / (2.0 * h);
                    boundary = true;
                    (one_sided, central)
                } else {
                    let central =
                        (comp[cell + stride] - comp[cell - stride]) / (2.0 * h);
                    (central, central)
                };
                mag_old += d_old * d_old;
                mag_new += d_new * d_new;
            }
            if boundary {
                correction += (mag_new.powf(p / 2.0) - mag_old.powf(p / 2.0))
                    * grid.cell_volume()
                    / p;
                // the exterior cell beyond each wall face picks up the value
                // through its central stencil
                for axis in 0..grid.dim() {
                    let stride = grid.stride(axis);
                    let k = (cell / stride) % n;
                    if k == 0 || k == n - 1 {
                        let d = comp[cell] / (2.0 * h);
                        correction += (d * d).powf(p / 2.0) * grid.cell_volume() / p;
                    }
                }
            }
        }
    }
    Verdict::new(
        "domain_truncation",
        correction.abs() / j0,
        threshold,
        format!("J {j0:.6}, embedding correction {correction:.3e}"),
    )
}

/// Seeded random unit vectors for the halving check.
pub fn default_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-3 {
                    return v.iter().map(|x| x / norm).collect();
                }
            }
        })
        .collect()
}

/// The verdicts that apply to a bare field (no solver bookkeeping needed).
pub fn field_suite(field: &Field, spec: &ProblemSpec, thresholds: &Thresholds) -> Vec<Verdict> {
    let mut verdicts = Vec::new();
    verdicts.push(check_symmetry(field, spec, thresholds.symmetry));
    if spec.m() == 1 {
        if let Ok(v) = check_sign(field, thresholds.sign) {
            verdicts.push(v);
        }
        let center = functionals::energy_centroid(field, spec);
        let profile = radial_profile(field, &center);
        verdicts.push(check_monotonicity(&profile, thresholds.monotonicity));
        if let Ok(v) = check_sum_rule(field, spec, thresholds) {
            verdicts.push(v);
        }
    }
    match check_halving(
        field,
        spec,
        &default_directions(spec.dim(), 3, 42),
        thresholds.halving,
    ) {
        Ok(v) => verdicts.push(v),
        Err(e) => verdicts.push(Verdict {
            name: "halving".into(),
            metric: f64::INFINITY,
            threshold: thresholds.halving,
            pass: false,
            details: format!("split search failed: {e}"),
        }),
    }
    verdicts.push(check_domain_truncation(
        field,
        spec,
        thresholds.domain_truncation,
    ));
    verdicts
}

/// The full verdict suite on a solver result.
pub fn suite(result: &SolverResult, spec: &ProblemSpec, thresholds: &Thresholds) -> Vec<Verdict> {
    let mut verdicts = field_suite(&result.minimizer, spec, thresholds);
    verdicts.push(check_variational_characterization(
        result,
        spec,
        thresholds.variational,
    ));
    verdicts.push(check_pohozaev(result, spec, thresholds));
    verdicts
}

/// Renders verdicts as an aligned text table.
pub fn format_table(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<32} {:>12} {:>12}  {}\n",
        "check", "metric", "threshold", "status"
    ));
    for v in verdicts {
        out.push_str(&format!(
            "{:<32} {:>12.4e} {:>12.4e}  {}\n",
            v.name,
            v.metric,
            v.threshold,
            if v.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::functionals::gaussian_bump;
    use crate::nonlinearity::Nonlinearity;

    fn spec3() -> ProblemSpec {
        ProblemSpec::new(3, 2.0, Nonlinearity::cubic()).unwrap()
    }

    #[test]
    fn symmetry_passes_on_radial_fields() {
        let spec = spec3();
        let grid = Grid::new(3, 5.0, 96).unwrap();
        let f = gaussian_bump(grid, 1, 2.0, 1.3, &[0.0; 3]);
        let v = check_symmetry(&f, &spec, 0.03);
        assert!(v.pass, "metric {}", v.metric);
        assert!(v.metric <= 1e-3, "metric {}", v.metric);
    }

    #[test]
    fn symmetry_requires_recentering() {
        let spec = spec3();
        let grid = Grid::new(3, 5.0, 64).unwrap();
        let f = gaussian_bump(grid, 1, 2.0, 1.0, &[1.0, 0.0, 0.0]);
        let about_origin = check_symmetry_about(&f, &spec, &[0.0; 3], 0.03);
        assert!(!about_origin.pass, "metric {}", about_origin.metric);
        assert!(about_origin.metric > 0.1);
        let recentred = check_symmetry(&f, &spec, 0.03);
        assert!(recentred.pass, "metric {}", recentred.metric);
        assert!(recentred.metric <= 1e-2);
    }

    #[test]
    fn radialize_is_idempotent_gauge() {
        let spec = spec3();
        let grid = Grid::new(3, 4.0, 32).unwrap();
        let f = Field::from_scalar_fn(grid, |x| {
            x[0] + 2.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let r = radialize(&f, &[0.0; 3]);
        let v = check_symmetry_about(&r, &spec, &[0.0; 3], 0.03);
        assert!(v.pass, "metric {}", v.metric);
        assert!(v.metric <= 1e-2, "metric {}", v.metric);
    }

    #[test]
    fn sign_detects_odd_fields() {
        let grid = Grid::new(3, 4.0, 24).unwrap();
        let even = gaussian_bump(grid, 1, 1.0, 1.0, &[0.0; 3]);
        assert!(check_sign(&even, 1e-6).unwrap().pass);
        let odd = Field::from_scalar_fn(grid, |x| {
            x[0] * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let v = check_sign(&odd, 1e-6).unwrap();
        assert!(!v.pass);
        assert!(v.metric > 1e-6);
        let two = Field::zeros(grid, 2);
        assert!(check_sign(&two, 1e-6).is_err());
    }

    #[test]
    fn monotonicity_on_profiles() {
        let radii: Vec<f64> = (0..40).map(|j| 0.1 * (j as f64 + 0.5)).collect();
        let decaying = RadialProfile {
            values: vec![radii.iter().map(|r| (-r * r).exp()).collect()],
            mean_radii: radii.clone(),
            radii,
            center: vec![0.0; 3],
            max_deviation: vec![0.0; 40],
        };
        assert_eq!(check_monotonicity(&decaying, 1e-2).metric, 0.0);

        // interior bump: 0 < u(r1) < u(r2) for r1 < r2
        let mut bump = decaying.clone();
        bump.values[0][20] = 0.9;
        let v = check_monotonicity(&bump, 1e-2);
        assert!(!v.pass, "metric {}", v.metric);
    }

    #[test]
    fn sum_rule_trivial_for_one_signed_fields() {
        let spec = spec3();
        let grid = Grid::new(3, 5.0, 32).unwrap();
        let f = gaussian_bump(grid, 1, 3.0, 1.0, &[0.0; 3]);
        let v = check_sum_rule(&f, &spec, &Thresholds::default()).unwrap();
        assert!(v.pass, "{}", v.details);
    }

    #[test]
    fn sum_rule_rejects_balanced_sign_changers() {
        // both parts carrying visible constraint mass violates the
        // concavity inequality
        let spec = spec3();
        let grid = Grid::new(3, 6.0, 48).unwrap();
        let f = Field::from_scalar_fn(grid, |x| {
            let r2 = |c: f64| (x[0] - c) * (x[0] - c) + x[1] * x[1] + x[2] * x[2];
            3.0 * (-r2(1.8)).exp() - 3.0 * (-r2(-1.8)).exp()
        });
        let v = check_sum_rule(&f, &spec, &Thresholds::default()).unwrap();
        assert!(!v.pass, "{}", v.details);
    }

    #[test]
    fn domain_truncation_small_for_decayed_fields() {
        let spec = spec3();
        let grid = Grid::new(3, 6.0, 48).unwrap();
        let tight = gaussian_bump(grid, 1, 1.0, 1.0, &[0.0; 3]);
        let v = check_domain_truncation(&tight, &spec, 0.01);
        assert!(v.pass, "{}: {}", v.metric, v.details);
        let wide = gaussian_bump(grid, 1, 1.0, 4.0, &[0.0; 3]);
        let vw = check_domain_truncation(&wide, &spec, 0.01);
        assert!(vw.metric > v.metric);
    }
}
