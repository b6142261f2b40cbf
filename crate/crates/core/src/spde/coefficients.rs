//! Velocity and noise fields with the derived quantities the weak forms need:
//! `Div u`, `Div a_i`, `ā_i = (Div a_i) a_i`, `â_i`, `∇_{a_i} a_i` and
//! `Λ_i(1) = Div²(â_i) − Div(∇_{a_i} a_i)`, which also equals `Div ā_i`.
//!
//! Presets per domain (`c` constant, `b(θ)` the band cutoff on the sphere):
//!
//! | preset | u | a_i |
//! |---|---|---|
//! | zero | 0 | none |
//! | transport | 0 | one constant field (`b ∂_φ` on the sphere) |
//! | rotation | divergence-free cellular flow (`b ∂_φ` on the sphere) | none |
//! | shear | `0.5 sin 2πy ∂_x` (2-d) or differential rotation (sphere) | none |
//! | constant-noise | rotation | divergence-free fields |
//! | generic | compressible | compressible fields |
//! | kink | `|z − ½|^0.6`-modulated | one divergence-free field |

use std::f64::consts::PI;

use super::SpdeError;
use crate::geometry::ops::hat;
use crate::geometry::{fixtures, ChartGeometry, ScalarField, SymTensor2Field, VectorField};
use crate::grid::max_abs;
use crate::regularization::partition::smooth_step;

pub const MAX_NOISES: usize = 4;

/// Colatitudes where the sphere presets switch on: zero below `lo`, full above `lo + ramp`.
const BAND_LO: f64 = 0.35;
const BAND_RAMP: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub name: String,
    pub u: VectorField,
    pub a: Vec<VectorField>,
    pub div_u: ScalarField,
    pub div_a: Vec<ScalarField>,
    pub a_bar: Vec<VectorField>,
    pub a_hat: Vec<SymTensor2Field>,
    pub nabla_aa: Vec<VectorField>,
    pub lambda_one: Vec<ScalarField>,
    /// Largest `‖Div²â_i − Div(∇_{a_i}a_i) − Div ā_i‖_{L²}`.
    pub lambda_one_defect: f64,
}

impl CoefficientSet {
    pub fn new(name: &str, geom: &ChartGeometry, u: VectorField, a: Vec<VectorField>) -> Result<Self, SpdeError> {
        if a.len() > MAX_NOISES {
            return Err(SpdeError::TooManyNoises { got: a.len(), max: MAX_NOISES });
        }
        let div_u = geom.div_vector(&u)?;
        let mut set = Self {
            name: name.to_string(),
            div_u,
            u,
            a: Vec::new(),
            div_a: Vec::new(),
            a_bar: Vec::new(),
            a_hat: Vec::new(),
            nabla_aa: Vec::new(),
            lambda_one: Vec::new(),
            lambda_one_defect: 0.0,
        };
        for ai in a {
            let div = geom.div_vector(&ai)?;
            let bar = ai.scaled(&div.values);
            let ahat = hat(&ai);
            let nabla = geom.self_covariant(&ai)?;
            let first = geom.div2(&ahat)?;
            let second = geom.div_vector(&nabla)?;
            let lam = first.zip_with(&second, |p, q| p - q);
            let alt = geom.div_vector(&bar)?;
            let diff: Vec<f64> = lam.values.iter().zip(&alt.values).map(|(p, q)| p - q).collect();
            set.lambda_one_defect = set.lambda_one_defect.max(geom.norm(&diff));
            set.a.push(ai);
            set.div_a.push(div);
            set.a_bar.push(bar);
            set.a_hat.push(ahat);
            set.nabla_aa.push(nabla);
            set.lambda_one.push(lam);
        }
        Ok(set)
    }

    pub fn noises(&self) -> usize {
        self.a.len()
    }

    /// Growth rate of `E‖ρ‖²`: `Σ_i (½‖Λ_i(1)‖_∞ + ‖(Div a_i)²‖_∞) + ‖Div u‖_∞`.
    /// For steady `u`, `exp(C̄ t)` carries `‖Div u‖_{L¹(0,t; L^∞)}` exactly.
    pub fn cbar(&self) -> f64 {
        let noise: f64 = self
            .lambda_one
            .iter()
            .zip(&self.div_a)
            .map(|(l, d)| 0.5 * max_abs(&l.values) + max_abs(&d.values).powi(2))
            .sum();
        noise + max_abs(&self.div_u.values)
    }

    /// `‖Div u‖_{L¹(0,t; L^∞)}`.
    pub fn div_u_l1_linf(&self, t: f64) -> f64 {
        t * max_abs(&self.div_u.values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Torus1d,
    Torus2d,
    Sphere,
}

fn band(theta: f64) -> f64 {
    smooth_step((theta - BAND_LO) / BAND_RAMP) * smooth_step((PI - BAND_LO - theta) / BAND_RAMP)
}

fn kink(t: f64) -> f64 {
    (t - 0.5).abs().powf(0.6)
}

impl Domain {
    pub const PRESETS: [&'static str; 7] =
        ["zero", "transport", "rotation", "shear", "constant-noise", "generic", "kink"];

    pub fn from_name(name: &str) -> Result<Self, SpdeError> {
        match name {
            "flat-torus-1d" => Ok(Self::Torus1d),
            "flat-torus-2d" => Ok(Self::Torus2d),
            "sphere" => Ok(Self::Sphere),
            other => Err(SpdeError::UnknownManifold(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Torus1d => "flat-torus-1d",
            Self::Torus2d => "flat-torus-2d",
            Self::Sphere => "sphere",
        }
    }

    pub fn default_resolution(&self) -> usize {
        match self {
            Self::Torus1d => 128,
            Self::Torus2d | Self::Sphere => 64,
        }
    }

    /// Simulation chart with `n` nodes per axis.
    pub fn geometry(&self, n: usize) -> Result<ChartGeometry, SpdeError> {
        let atlas = match self {
            Self::Torus1d => fixtures::flat_torus(1, n)?,
            Self::Torus2d => fixtures::flat_torus(2, n)?,
            Self::Sphere => fixtures::sphere(n)?,
        };
        Ok(ChartGeometry::new(&atlas.charts[0])?)
    }

    /// `e^{cos 2πz}`, `e^{sin 2πx cos 2πy}`, or `e^{x}` in model coordinates on the sphere.
    pub fn initial_density(&self, geom: &ChartGeometry) -> ScalarField {
        self.initial_profile(geom, 1.0)
    }

    /// [`Domain::initial_density`] with the exponent scaled by `amp`.
    pub fn initial_profile(&self, geom: &ChartGeometry, amp: f64) -> ScalarField {
        match self {
            Self::Torus1d => geom.scalar_fn(|p| (amp * (2.0 * PI * p[0]).cos()).exp()),
            Self::Torus2d => geom.scalar_fn(|p| (amp * (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos()).exp()),
            Self::Sphere => geom.scalar_fn(|p| (amp * p[0].sin() * p[1].cos()).exp()),
        }
    }

    /// `one` or `fourier:k`; on the sphere the `k`-th mode is `Re (x + iy)^k = sin^k θ cos kφ`.
    pub fn test_function(&self, geom: &ChartGeometry, spec: &str) -> Result<ScalarField, SpdeError> {
        let bad = || SpdeError::BadTestFunction(spec.to_string());
        if spec == "one" {
            return Ok(ScalarField::constant(geom.chart.id, geom.len(), 1.0));
        }
        let k: u32 = spec.strip_prefix("fourier:").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        let kf = k as f64;
        Ok(match self {
            Self::Torus1d | Self::Torus2d => geom.scalar_fn(|p| (2.0 * PI * kf * p[0]).cos()),
            Self::Sphere => geom.scalar_fn(|p| p[0].sin().powi(k as i32) * (kf * p[1]).cos()),
        })
    }

    pub fn preset(&self, geom: &ChartGeometry, preset: &str) -> Result<CoefficientSet, SpdeError> {
        let unknown = || SpdeError::UnknownPreset { preset: preset.to_string(), manifold: self.name().to_string() };
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let v = |f: &dyn Fn([f64; 2]) -> [f64; 2]| geom.vector_fn(f);
        let tau = 2.0 * PI;
        let (u, a): (VectorField, Vec<VectorField>) = match (self, preset) {
            (_, "zero") => (v(&zero), vec![]),
            (Self::Torus1d, "transport") => (v(&zero), vec![v(&|_| [0.5, 0.0])]),
            (Self::Torus1d, "rotation") => (v(&|_| [0.3, 0.0]), vec![]),
            (Self::Torus1d, "constant-noise") => (v(&|_| [0.3, 0.0]), vec![v(&|_| [0.2, 0.0])]),
            (Self::Torus1d, "generic") => (
                v(&|p| [0.3 + 0.2 * (tau * p[0]).sin(), 0.0]),
                vec![v(&|p| [0.3 * (tau * p[0]).sin() + 0.2, 0.0]), v(&|p| [0.15 * (2.0 * tau * p[0]).cos(), 0.0])],
            ),
            (Self::Torus1d, "kink") => (v(&|p| [0.2 + 0.3 * kink(p[0]), 0.0]), vec![v(&|_| [0.2, 0.0])]),
            (Self::Torus2d, "transport") => (v(&zero), vec![v(&|_| [0.5, 0.3])]),
            (Self::Torus2d, "rotation") => (v(&|p| cellular(p, 1.0)), vec![]),
            (Self::Torus2d, "shear") => (v(&|p| [0.5 * (tau * p[1]).sin(), 0.0]), vec![]),
            (Self::Torus2d, "constant-noise") => {
                (v(&|p| cellular(p, 0.5)), vec![v(&|_| [0.3, 0.0]), v(&|_| [0.0, 0.2])])
            }
            (Self::Torus2d, "generic") => (
                v(&|p| {
                    let c = cellular(p, 0.5);
                    [c[0] + 0.1 * (tau * p[0]).sin(), c[1]]
                }),
                vec![
                    v(&|p| [0.3 * (tau * p[1]).sin(), 0.2]),
                    v(&|p| [0.1 * (tau * p[0]).cos(), 0.25 * (tau * p[1]).sin()]),
                ],
            ),
            (Self::Torus2d, "kink") => (v(&|p| [0.5 * kink(p[1]), 0.0]), vec![v(&|_| [0.2, 0.1])]),
            (Self::Sphere, "transport") => (v(&zero), vec![v(&|p| [0.0, 0.5 * band(p[0])])]),
            (Self::Sphere, "rotation") => (v(&|p| [0.0, 0.5 * band(p[0])]), vec![]),
            (Self::Sphere, "shear") => (v(&|p| [0.0, 0.6 * p[0].cos() * band(p[0])]), vec![]),
            (Self::Sphere, "constant-noise") => {
                (v(&|p| [0.0, 0.5 * band(p[0])]), vec![v(&|p| [0.0, 0.4 * band(p[0])])])
            }
            (Self::Sphere, "generic") => (
                v(&|p| [0.2 * p[1].cos() * band(p[0]), 0.5 * band(p[0])]),
                vec![
                    v(&|p| [0.3 * p[1].sin() * band(p[0]), 0.2 * band(p[0])]),
                    v(&|p| [0.25 * p[1].cos() * band(p[0]), 0.0]),
                ],
            ),
            (Self::Sphere, "kink") => (
                v(&|p| [0.0, (0.2 + 0.3 * (p[0] - PI / 2.0).abs().powf(0.6)) * band(p[0])]),
                vec![v(&|p| [0.0, 0.3 * band(p[0])])],
            ),
            _ => return Err(unknown()),
        };
        CoefficientSet::new(preset, geom, u, a)
    }
}

/// Stream function `s sin 2πx sin 2πy / 2π`.
fn cellular(p: [f64; 2], s: f64) -> [f64; 2] {
    let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
    [s * x.sin() * y.cos(), -s * x.cos() * y.sin()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_one_two_ways_agree() {
        for (d, n, tol) in [(Domain::Torus1d, 256, 1e-4), (Domain::Torus2d, 128, 1e-4), (Domain::Sphere, 128, 4e-4)] {
            let geom = d.geometry(n).unwrap();
            for p in Domain::PRESETS {
                let Ok(c) = d.preset(&geom, p) else { continue };
                assert!(c.lambda_one_defect < tol, "{} {p}: {}", d.name(), c.lambda_one_defect);
            }
        }
    }

    #[test]
    fn divergence_free_presets() {
        for d in [Domain::Torus2d, Domain::Sphere] {
            let geom = d.geometry(64).unwrap();
            for p in ["rotation", "shear", "constant-noise"] {
                let c = d.preset(&geom, p).unwrap();
                assert!(max_abs(&c.div_u.values) < 1e-3, "{p}");
                assert!(c.div_a.iter().all(|x| max_abs(&x.values) < 1e-3), "{p}");
                assert!(c.cbar() < 2e-3, "{p}: {}", c.cbar());
            }
        }
    }

    #[test]
    fn sphere_fields_vanish_near_chart_ends() {
        let geom = Domain::Sphere.geometry(64).unwrap();
        let c = Domain::Sphere.preset(&geom, "generic").unwrap();
        for n in 0..geom.len() {
            let theta = geom.grid().point(n)[0];
            if !(BAND_LO..=PI - BAND_LO).contains(&theta) {
                assert_eq!(c.u.comps[0][n], 0.0);
                assert!(c.a.iter().all(|a| a.comps[0][n] == 0.0 && a.comps[1][n] == 0.0));
            }
        }
    }

    #[test]
    fn unknown_names() {
        let geom = Domain::Torus1d.geometry(32).unwrap();
        assert!(matches!(Domain::Torus1d.preset(&geom, "shear"), Err(SpdeError::UnknownPreset { .. })));
        assert!(Domain::from_name("klein-bottle").is_err());
        assert!(Domain::Torus1d.test_function(&geom, "fourier:0").is_err());
        assert!(Domain::Torus1d.test_function(&geom, "fourier:2").is_ok());
    }
}
