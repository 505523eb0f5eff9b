//! Registry of nonlinearities: the potential density G and its gradient
//! g = ∇G, with the metadata the structural checks need (sign of G near the
//! origin). G(0) = 0 and g(0) = 0 hold exactly for every entry; G need only
//! be continuous at the origin, so g is supplied analytically per entry
//! rather than auto-differentiated.

use crate::error::NonlinearityError;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignNearZero {
    Negative,
    Positive,
    Indefinite,
}

type PotentialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// The pair (G, g = ∇G) plus metadata.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    m: usize,
    potential: Arc<PotentialFn>,
    grad: Arc<GradientFn>,
    sign_near_zero: SignNearZero,
    sign_radius: f64,
    params: Vec<(String, f64)>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("sign_near_zero", &self.sign_near_zero)
            .field("sign_radius", &self.sign_radius)
            .field("params", &self.params)
            .finish()
    }
}

impl Nonlinearity {
    pub fn custom(
        name: impl Into<String>,
        m: usize,
        potential: Arc<PotentialFn>,
        grad: Arc<GradientFn>,
        sign_near_zero: SignNearZero,
        sign_radius: f64,
    ) -> Self {
        Nonlinearity {
            name: name.into(),
            m,
            potential,
            grad,
            sign_near_zero,
            sign_radius,
            params: Vec::new(),
        }
    }

    /// G(s) = s^4/4 - s^2/2, g(s) = s^3 - s. Negative on 0 < |s| <= 1.
    pub fn cubic() -> Self {
        Nonlinearity {
            name: "cubic".into(),
            m: 1,
            potential: Arc::new(|xi: &[f64]| {
                let s = xi[0];
                s * s * s * s / 4.0 - s * s / 2.0
            }),
            grad: Arc::new(|xi: &[f64], out: &mut [f64]| {
                let s = xi[0];
                out[0] = s * s * s - s;
            }),
            sign_near_zero: SignNearZero::Negative,
            sign_radius: 1.0,
            params: Vec::new(),
        }
    }

    /// G(s) = |s|^q/q - |s|^r/r with 2 <= r < q; negative for |s| < (q/r)^{1/(q-r)}.
    pub fn double_power(q: f64, r: f64) -> Result<Self, NonlinearityError> {
        if !(2.0 <= r && r < q) {
            return Err(NonlinearityError::InvalidParams {
                name: "double_power".into(),
                message: format!("need 2 <= r < q, got q = {q}, r = {r}"),
            });
        }
        let eps = (q / r).powf(1.0 / (q - r));
        Ok(Nonlinearity {
            name: "double_power".into(),
            m: 1,
            potential: Arc::new(move |xi: &[f64]| {
                let a = xi[0].abs();
                if a == 0.0 {
                    return 0.0;
                }
                a.powf(q) / q - a.powf(r) / r
            }),
            grad: Arc::new(move |xi: &[f64], out: &mut [f64]| {
                let s = xi[0];
                let a = s.abs();
                if a == 0.0 {
                    out[0] = 0.0;
                    return;
                }
                out[0] = a.powf(q - 2.0) * s - a.powf(r - 2.0) * s;
            }),
            sign_near_zero: SignNearZero::Negative,
            sign_radius: 0.99 * eps,
            params: vec![("q".into(), q), ("r".into(), r)],
        })
    }

    /// Two-component coupling G(u1, u2) = u1^2 u2^2 - (u1^2 + u2^2)/2.
    ///
    /// Not cooperative: ∂g1/∂u2 = 4 u1 u2 changes sign.
    pub fn coupled_quartic() -> Self {
        Nonlinearity {
            name: "coupled_quartic".into(),
            m: 2,
            potential: Arc::new(|xi: &[f64]| {
                let (a, b) = (xi[0], xi[1]);
                a * a * b * b - (a * a + b * b) / 2.0
            }),
            grad: Arc::new(|xi: &[f64], out: &mut [f64]| {
                let (a, b) = (xi[0], xi[1]);
                out[0] = 2.0 * a * b * b - a;
                out[1] = 2.0 * a * a * b - b;
            }),
            sign_near_zero: SignNearZero::Negative,
            sign_radius: 1.0,
            params: Vec::new(),
        }
    }

    /// Looks an entry up by registry name; parameters as (key, value) pairs.
    pub fn by_name(name: &str, params: &[(String, f64)]) -> Result<Self, NonlinearityError> {
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        match name {
            "cubic" => Ok(Self::cubic()),
            "coupled_quartic" => Ok(Self::coupled_quartic()),
            "double_power" => {
                let q = get("q").ok_or_else(|| NonlinearityError::InvalidParams {
                    name: name.into(),
                    message: "missing parameter q".into(),
                })?;
                let r = get("r").ok_or_else(|| NonlinearityError::InvalidParams {
                    name: name.into(),
                    message: "missing parameter r".into(),
                })?;
                Self::double_power(q, r)
            }
            other => Err(NonlinearityError::Unknown(other.into())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sign_near_zero(&self) -> SignNearZero {
        self.sign_near_zero
    }

    pub fn sign_radius(&self) -> f64 {
        self.sign_radius
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// G(ξ).
    pub fn potential(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.m);
        (self.potential)(xi)
    }

    /// g(ξ) = ∇G(ξ), with g(0) = 0 by definition.
    pub fn grad_potential(&self, xi: &[f64], out: &mut [f64]) {
        debug_assert_eq!(xi.len(), self.m);
        if xi.iter().all(|&v| v == 0.0) {
            out.fill(0.0);
            return;
        }
        (self.grad)(xi, out);
    }

    /// Central finite differences of G against g over the sample points.
    ///
    /// Points inside a ball of radius 1e-6 around the origin are skipped
    /// (G need not be differentiable there).
    pub fn check_gradient_consistency(
        &self,
        points: &[Vec<f64>],
        step: f64,
        tol: f64,
    ) -> Result<ConsistencyReport, NonlinearityError> {
        let mut worst = 0.0f64;
        let mut worst_point: Option<Vec<f64>> = None;
        let mut checked = 0usize;
        let mut g = vec![0.0; self.m];
        for point in points {
            let norm2: f64 = point.iter().map(|v| v * v).sum();
            if norm2.sqrt() <= 1e-6 {
                continue;
            }
            checked += 1;
            self.grad_potential(point, &mut g);
            let mut residual = 0.0f64;
            let mut probe = point.clone();
            for i in 0..self.m {
                probe[i] = point[i] + step;
                let plus = self.potential(&probe);
                probe[i] = point[i] - step;
                let minus = self.potential(&probe);
                probe[i] = point[i];
                let fd = (plus - minus) / (2.0 * step);
                residual = residual.max((g[i] - fd).abs());
            }
            if residual > worst {
                worst = residual;
                worst_point = Some(point.clone());
            }
        }
        if worst > tol {
            return Err(NonlinearityError::ConsistencyViolation {
                point: worst_point.unwrap(),
                residual: worst,
                tol,
            });
        }
        Ok(ConsistencyReport {
            points_checked: checked,
            max_residual: worst,
            tol,
        })
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConsistencyReport {
    pub points_checked: usize,
    pub max_residual: f64,
    pub tol: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cubic_values() {
        let nl = Nonlinearity::cubic();
        assert_eq!(nl.potential(&[0.0]), 0.0);
        assert!((nl.potential(&[1.0]) + 0.25).abs() < 1e-15);
        assert!(nl.potential(&[2f64.sqrt()]).abs() < 1e-15);
        let mut g = [0.0];
        nl.grad_potential(&[0.0], &mut g);
        assert_eq!(g[0], 0.0);
        nl.grad_potential(&[1.0], &mut g);
        assert!(g[0].abs() < 1e-15);
    }

    #[test]
    fn coupled_gradient_on_axis() {
        // hand-differentiated: g(0, t) = (0, -t)
        let nl = Nonlinearity::coupled_quartic();
        let mut g = [0.0, 0.0];
        for t in [0.3, -1.7, 2.5] {
            nl.grad_potential(&[0.0, t], &mut g);
            assert!(g[0].abs() < 1e-15);
            assert!((g[1] + t).abs() < 1e-15);
        }
    }

    #[test]
    fn registry_zero_conventions() {
        let entries = [
            Nonlinearity::cubic(),
            Nonlinearity::double_power(4.0, 2.0).unwrap(),
            Nonlinearity::coupled_quartic(),
        ];
        for nl in &entries {
            let zero = vec![0.0; nl.m()];
            assert_eq!(nl.potential(&zero), 0.0, "{}", nl.name());
            let mut g = vec![1.0; nl.m()];
            nl.grad_potential(&zero, &mut g);
            assert!(g.iter().all(|&v| v == 0.0), "{}", nl.name());
        }
    }

    #[test]
    fn negative_sign_near_zero_holds_on_samples() {
        let entries = [
            Nonlinearity::cubic(),
            Nonlinearity::double_power(4.0, 2.0).unwrap(),
            Nonlinearity::coupled_quartic(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for nl in &entries {
            assert_eq!(nl.sign_near_zero(), SignNearZero::Negative);
            for _ in 0..200 {
                let dir: Vec<f64> = (0..nl.m()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-3 {
                    continue;
                }
                let scale = rng.gen_range(1e-3..nl.sign_radius()) / norm;
                let xi: Vec<f64> = dir.iter().map(|v| v * scale).collect();
                assert!(
                    nl.potential(&xi) < 0.0,
                    "{} not negative at {xi:?}",
                    nl.name()
                );
            }
        }
    }

    fn sample_points(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect()
    }

    #[test]
    fn gradient_consistency_cubic() {
        let nl = Nonlinearity::cubic();
        let report = nl
            .check_gradient_consistency(&sample_points(1, 1000, 3), 1e-5, 1e-6)
            .unwrap();
        assert!(report.points_checked > 900);
    }

    #[test]
    fn gradient_consistency_coupled() {
        let nl = Nonlinearity::coupled_quartic();
        nl.check_gradient_consistency(&sample_points(2, 1000, 4), 1e-5, 1e-6)
            .unwrap();
    }

    #[test]
    fn gradient_consistency_double_power() {
        let nl = Nonlinearity::double_power(4.0, 2.0).unwrap();
        nl.check_gradient_consistency(&sample_points(1, 1000, 5), 1e-5, 1e-6)
            .unwrap();
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        // g(s) = s^3 drops the -s term; residual at s = 1 is about 1
        let nl = Nonlinearity::custom(
            "corrupted",
            1,
            Arc::new(|xi: &[f64]| xi[0].powi(4) / 4.0 - xi[0] * xi[0] / 2.0),
            Arc::new(|xi: &[f64], out: &mut [f64]| out[0] = xi[0].powi(3)),
            SignNearZero::Negative,
            1.0,
        );
        let err = nl
            .check_gradient_consistency(&[vec![1.0]], 1e-5, 1e-6)
            .unwrap_err();
        match err {
            NonlinearityError::ConsistencyViolation { residual, .. } => {
                assert!((residual - 1.0).abs() < 1e-6, "residual {residual}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(Nonlinearity::by_name("septic", &[]).is_err());
        assert!(Nonlinearity::by_name("double_power", &[("q".into(), 4.0)]).is_err());
        assert!(Nonlinearity::double_power(2.0, 4.0).is_err());
    }
}
