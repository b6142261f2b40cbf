//! Pointwise cancellations behind the renormalized equation, for a noise field `a` with
//! `ā = (Div a) a`:
//!
//! ```text
//! F'(ρ) Λ(ρ) − Λ(F(ρ)) = G_F(ρ) Λ(1) − F''(ρ) (a(ρ))²
//! (Div(ρa))² − (a(ρ))² = (ρ Div a)² + 2ρ ā(ρ)
//! ```
//!
//! The first follows from `Λ(φ) = a(a(φ)) + 2(Div a) a(φ) + Λ(1) φ` and the chain rule,
//! the second from `Div(ρa) = a(ρ) + ρ Div a`. Discretely both hold up to the stencil
//! truncation error, which is what gets reported.

use serde::Serialize;

use super::RenormError;
use crate::geometry::{ChartGeometry, LambdaMode, ScalarField, VectorField};
use crate::spde::Nonlinearity;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CancellationResiduals {
    /// `‖lhs − rhs‖_{L²}` of the Λ identity.
    pub lambda_identity: f64,
    /// `‖F'(ρ) Λ(ρ)‖_{L²}`, for scale.
    pub lambda_scale: f64,
    pub quadratic_identity: f64,
    /// `‖(Div(ρa))²‖_{L²}`.
    pub quadratic_scale: f64,
}

pub fn cancellation_checks(
    geom: &ChartGeometry,
    rho: &ScalarField,
    a: &VectorField,
    f: &dyn Nonlinearity,
) -> Result<CancellationResiduals, RenormError> {
    let div_a = geom.div_vector(a)?;
    let a_bar = a.scaled(&div_a.values);
    let lambda_one = geom.div_vector(&a_bar)?;
    let a_rho = geom.apply(a, rho)?;
    let abar_rho = geom.apply(&a_bar, rho)?;
    let lam_rho = geom.lambda(rho, a, LambdaMode::Direct)?;
    let f_rho = rho.map(|r| f.f(r));
    let lam_f = geom.lambda(&f_rho, a, LambdaMode::Direct)?;
    let div_rho_a = geom.div_vector(&a.scaled(&rho.values))?;

    let n = geom.len();
    let mut e1 = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    let mut e2 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for k in 0..n {
        let r = rho.values[k];
        let ar = a_rho.values[k];
        let lhs1 = f.df(r) * lam_rho.values[k] - lam_f.values[k];
        let rhs1 = f.g(r) * lambda_one.values[k] - f.d2f(r) * ar * ar;
        e1[k] = lhs1 - rhs1;
        s1[k] = f.df(r) * lam_rho.values[k];
        let d = div_rho_a.values[k];
        let lhs2 = d * d - ar * ar;
        let rd = r * div_a.values[k];
        let rhs2 = rd * rd + 2.0 * r * abar_rho.values[k];
        e2[k] = lhs2 - rhs2;
        s2[k] = d * d;
    }
    Ok(CancellationResiduals {
        lambda_identity: geom.norm(&e1),
        lambda_scale: geom.norm(&s1),
        quadratic_identity: geom.norm(&e2),
        quadratic_scale: geom.norm(&s2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renormalization::RenormFunction;
    use crate::spde::{BrownianDriver, Domain, SpdeProblem};

    const TAU_ID: f64 = 1e-4;

    fn residuals(d: Domain, n: usize, amp: f64, f: &RenormFunction) -> Vec<CancellationResiduals> {
        let geom = d.geometry(n).unwrap();
        let c = d.preset(&geom, "generic").unwrap();
        let rho = d.initial_profile(&geom, amp);
        c.a.iter().map(|a| cancellation_checks(&geom, &rho, a, f).unwrap()).collect()
    }

    #[test]
    fn constants_cancel() {
        let geom = Domain::Torus2d.geometry(32).unwrap();
        let rho = ScalarField::constant(0, geom.len(), 1.7);
        let a = geom.vector_fn(|_| [0.4, -0.3]);
        let r = cancellation_checks(&geom, &rho, &a, &RenormFunction::truncated(2.0).unwrap()).unwrap();
        assert!(r.lambda_identity < 1e-12 && r.quadratic_identity < 1e-12, "{r:?}");
    }

    #[test]
    fn smooth_fixtures_below_the_blend() {
        let f = RenormFunction::truncated(4.0).unwrap();
        for r in residuals(Domain::Torus2d, 128, 0.5, &f) {
            assert!(r.lambda_identity < TAU_ID && r.quadratic_identity < TAU_ID, "{r:?}");
        }
        for r in residuals(Domain::Sphere, 128, 0.5, &f) {
            assert!(r.lambda_identity < 4.0 * TAU_ID && r.quadratic_identity < 4.0 * TAU_ID, "{r:?}");
        }
        let cubic = RenormFunction::polynomial(vec![0.0, 0.0, 0.5, 0.1]);
        for r in residuals(Domain::Torus2d, 128, 0.5, &cubic) {
            assert!(r.lambda_identity < TAU_ID, "{r:?}");
        }
    }

    #[test]
    fn every_slice_of_a_path() {
        let d = Domain::Torus2d;
        let geom = d.geometry(128).unwrap();
        let c = d.preset(&geom, "generic").unwrap();
        let p = SpdeProblem::new(geom, c).unwrap();
        let rho0 = d.initial_profile(&p.geom, 0.5);
        let driver = BrownianDriver { noises: 2, dt: 0.5 * p.dt_max(), steps: 400, seed: 8 };
        let traj = p.simulate(&rho0, &driver, 0).unwrap();
        let f = RenormFunction::truncated(4.0).unwrap();
        for state in traj.states.iter().step_by(40) {
            let rho = ScalarField::new(0, state.clone());
            for a in &p.coeffs.a {
                let r = cancellation_checks(&p.geom, &rho, a, &f).unwrap();
                assert!(r.lambda_identity < TAU_ID && r.quadratic_identity < TAU_ID, "{r:?}");
            }
        }
    }

    #[test]
    fn crossing_the_blend_converges() {
        let f = RenormFunction::truncated(1.0).unwrap();
        let coarse = residuals(Domain::Torus1d, 128, 0.5, &f);
        let fine = residuals(Domain::Torus1d, 256, 0.5, &f);
        for (c, w) in coarse.iter().zip(&fine) {
            assert!(w.lambda_identity < 0.5 * c.lambda_identity, "{c:?} {w:?}");
            assert!(w.quadratic_identity < 0.1 * c.quadratic_identity, "{c:?} {w:?}");
        }
    }
}
