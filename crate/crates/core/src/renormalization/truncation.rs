//! Truncated squares `F_μ(ξ) = μ χ(ξ²/μ)`.
//!
//! `χ(x) = x` for `x ≤ 1`, `χ(x) = 2` for `x ≥ 2`, and in between the quintic
//! `p(s) = 1 + s + 4s³ − 7s⁴ + 3s⁵`, `s = x − 1`, which matches value, slope and
//! curvature at both ends. `p'(s) = 1 + 12s² − 28s³ + 15s⁴ ≥ 0`, so χ is C², nondecreasing,
//! `χ(x) ≤ min(x, 2)`. `A₀ = sup χ' = p'(2/5)` and `A₁ = sup |χ''|` sits at a root of
//! `p'''(s) = 24 − 168s + 180s²`.
//!
//! With `s = ξ²/μ`:
//!
//! ```text
//! F' = 2ξ χ'(s),      F'' = 2χ'(s) + 4s χ''(s),      G = ξF' − F = μ (2s χ'(s) − χ(s)).
//! ```
//!
//! For `ξ² ≤ μ`, `F = G = ξ²`; for `ξ² ≥ 2μ`, `F = 2μ`, `G = −2μ`, `F'' = 0`.

use serde::Serialize;

use super::RenormError;

/// Coefficients of the blend `p(s) = Σ c_k s^k` on `s ∈ [0, 1]`.
const BLEND: [f64; 6] = [1.0, 1.0, 0.0, 4.0, -7.0, 3.0];

fn p(s: f64, deriv: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in BLEND.iter().enumerate().skip(deriv).rev() {
        let falling: f64 = ((k - deriv + 1)..=k).map(|j| j as f64).product();
        acc = acc * s + c * falling;
    }
    acc
}

/// `χ^{(deriv)}(x)` for `x ≥ 0`, `deriv ≤ 2`.
pub fn chi(x: f64, deriv: usize) -> f64 {
    if x <= 1.0 {
        [x, 1.0, 0.0][deriv.min(2)]
    } else if x >= 2.0 {
        [2.0, 0.0, 0.0][deriv.min(2)]
    } else {
        p(x - 1.0, deriv.min(2))
    }
}

/// `max_{[0,1]} |p^{(deriv)}|`: dense scan, then Newton on `p^{(deriv+1)}` from the best sample.
fn blend_sup(deriv: usize) -> f64 {
    const N: usize = 4096;
    let (mut best, mut arg) = (0.0, 0.0);
    for k in 0..=N {
        let s = k as f64 / N as f64;
        let v = p(s, deriv).abs();
        if v > best {
            (best, arg) = (v, s);
        }
    }
    let mut s = arg;
    for _ in 0..50 {
        let d2 = p(s, deriv + 2);
        if d2 == 0.0 {
            break;
        }
        s = (s - p(s, deriv + 1) / d2).clamp(0.0, 1.0);
    }
    best.max(p(s, deriv).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationFamily {
    pub mu: f64,
    /// `sup χ'`.
    pub a0: f64,
    /// `sup |χ''|`.
    pub a1: f64,
}

impl TruncationFamily {
    pub fn new(mu: f64) -> Result<Self, RenormError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(RenormError::InvalidMu(mu));
        }
        Ok(Self { mu, a0: blend_sup(1), a1: blend_sup(2) })
    }

    pub fn f(&self, xi: f64) -> f64 {
        self.mu * chi(xi * xi / self.mu, 0)
    }

    pub fn df(&self, xi: f64) -> f64 {
        2.0 * xi * chi(xi * xi / self.mu, 1)
    }

    pub fn d2f(&self, xi: f64) -> f64 {
        let s = xi * xi / self.mu;
        2.0 * chi(s, 1) + 4.0 * s * chi(s, 2)
    }

    pub fn g(&self, xi: f64) -> f64 {
        let s = xi * xi / self.mu;
        self.mu * (2.0 * s * chi(s, 1) - chi(s, 0))
    }
}

/// Worst `lhs / rhs` seen for one inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityStat {
    pub display: String,
    pub worst_ratio: f64,
    pub at_xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FmuReport {
    pub family: TruncationFamily,
    pub probes: usize,
    pub inequalities: Vec<InequalityStat>,
    /// Smallest constant with `|G| ≤ C F` everywhere, `|ξ²F''| ≤ C F` for `|ξ| ≤ √μ` and
    /// `|ξ²F''| ≤ C ξ²` for `√μ < |ξ| ≤ √(2μ)`.
    pub c_chi: f64,
}

const PROBES: usize = 6001;

const DISPLAYS: [&str; 9] = [
    "0 <= F_mu",
    "F_mu <= 2 mu",
    "F_mu <= 2 xi^2",
    "|F_mu'| <= 2 sqrt2 A0 sqrt(mu)",
    "|F_mu'| <= 2 sqrt2 A0 |xi|",
    "|F_mu''| <= 8 A1 + 2 A0",
    "|G_mu| <= (4 A0 + 2) mu",
    "|G_mu| <= 2 (sqrt2 A0 + 1) xi^2",
    "xi^2 F_mu'' = 0 for xi^2 >= 2 mu",
];
const SLACK: f64 = 1e-12;

struct Tracker {
    stats: Vec<InequalityStat>,
}

impl Tracker {
    fn new(displays: &[&str]) -> Self {
        Self {
            stats: displays
                .iter()
                .map(|d| InequalityStat { display: d.to_string(), worst_ratio: 0.0, at_xi: 0.0 })
                .collect(),
        }
    }

    fn check(&mut self, slot: usize, xi: f64, lhs: f64, rhs: f64) -> Result<(), RenormError> {
        let display = self.stats[slot].display.clone();
        if lhs > rhs * (1.0 + SLACK) + f64::MIN_POSITIVE {
            return Err(RenormError::InequalityViolation { display, xi, lhs, rhs });
        }
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        let s = &mut self.stats[slot];
        if ratio > s.worst_ratio {
            s.worst_ratio = ratio;
            s.at_xi = xi;
        }
        Ok(())
    }
}

/// Every pointwise bound of the family on `[−3√μ, 3√μ]`, with the break points
/// `±√μ, ±√(2μ)` always among the probes.
pub fn fmu_suite(fam: &TruncationFamily) -> Result<FmuReport, RenormError> {
    let mu = fam.mu;
    let r = 3.0 * mu.sqrt();
    let mut xs: Vec<f64> = (0..PROBES).map(|k| -r + 2.0 * r * k as f64 / (PROBES - 1) as f64).collect();
    for b in [mu.sqrt(), (2.0 * mu).sqrt()] {
        xs.extend([b, -b]);
    }
    let s2 = 2f64.sqrt();
    let mut t = Tracker::new(&DISPLAYS);
    let mut c_chi: f64 = 0.0;
    for &x in &xs {
        let (f, df, d2f, g) = (fam.f(x), fam.df(x), fam.d2f(x), fam.g(x));
        let x2 = x * x;
        t.check(0, x, -f, 0.0)?;
        t.check(1, x, f, 2.0 * mu)?;
        t.check(2, x, f, 2.0 * x2)?;
        t.check(3, x, df.abs(), 2.0 * s2 * fam.a0 * mu.sqrt())?;
        t.check(4, x, df.abs(), 2.0 * s2 * fam.a0 * x.abs())?;
        t.check(5, x, d2f.abs(), 8.0 * fam.a1 + 2.0 * fam.a0)?;
        t.check(6, x, g.abs(), (4.0 * fam.a0 + 2.0) * mu)?;
        t.check(7, x, g.abs(), 2.0 * (s2 * fam.a0 + 1.0) * x2)?;
        if x2 >= 2.0 * mu {
            t.check(8, x, (x2 * d2f).abs(), 0.0)?;
        }
        if f > 0.0 {
            c_chi = c_chi.max(g.abs() / f);
        }
        if x2 <= mu && f > 0.0 {
            c_chi = c_chi.max((x2 * d2f).abs() / f);
        } else if x2 > mu && x2 <= 2.0 * mu {
            c_chi = c_chi.max(d2f.abs());
        }
    }
    Ok(FmuReport { family: *fam, probes: xs.len(), inequalities: t.stats, c_chi })
}

/// `(μ, |F_μ(ξ) − ξ²|, |G_μ(ξ) − ξ²|)` for each μ.
pub fn limit_errors(xi: f64, mus: &[f64]) -> Result<Vec<(f64, f64, f64)>, RenormError> {
    mus.iter()
        .map(|&mu| {
            let fam = TruncationFamily::new(mu)?;
            Ok((mu, (fam.f(xi) - xi * xi).abs(), (fam.g(xi) - xi * xi).abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_is_c2_and_monotone() {
        for x in [1.0, 2.0] {
            for d in 0..3 {
                let (l, r) = (chi(x - 1e-9, d), chi(x + 1e-9, d));
                assert!((l - r).abs() < 1e-6, "χ^({d}) jumps at {x}: {l} {r}");
            }
        }
        let mut prev = chi(0.0, 0);
        for k in 1..=3000 {
            let x = k as f64 * 1e-3;
            assert!(chi(x, 1) >= -1e-12);
            assert!(chi(x, 0) >= prev && chi(x, 0) <= (2.0 * x).min(2.0) + 1e-15);
            prev = chi(x, 0);
        }
    }

    #[test]
    fn constants() {
        let f = TruncationFamily::new(1.0).unwrap();
        assert!((f.a0 - 1.512).abs() < 1e-12, "{}", f.a0);
        assert!(f.a0 > 1.0);
        let brute = (0..=100_000).map(|k| p(k as f64 * 1e-5, 2).abs()).fold(0.0, f64::max);
        assert!(f.a1 >= brute && f.a1 - brute < 1e-8, "{} {brute}", f.a1);
        let brute0 = (0..=100_000).map(|k| p(k as f64 * 1e-5, 1)).fold(0.0, f64::max);
        assert!(f.a0 >= brute0 && f.a0 - brute0 < 1e-8);
    }

    #[test]
    fn suite_passes_and_c_chi_is_scale_free() {
        let cs: Vec<f64> = [1.0, 16.0, 256.0]
            .iter()
            .map(|&mu| fmu_suite(&TruncationFamily::new(mu).unwrap()).unwrap().c_chi)
            .collect();
        assert!(cs.iter().all(|&c| (c - cs[0]).abs() < 1e-9 * cs[0]), "{cs:?}");
        assert!(cs[0] >= 2.0);
    }

    #[test]
    fn violations_name_the_display() {
        let bad = TruncationFamily { mu: 1.0, a0: 0.5, a1: 3.9 };
        match fmu_suite(&bad) {
            Err(RenormError::InequalityViolation { display, .. }) => assert!(display.contains("F_mu'"), "{display}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_pieces() {
        let f = TruncationFamily::new(4.0).unwrap();
        assert_eq!(f.f(1.5), 2.25);
        assert_eq!(f.g(1.5), 2.25);
        assert_eq!(f.f(3.0), 8.0);
        assert_eq!(f.g(3.0), -8.0);
        assert_eq!(f.d2f(3.0), 0.0);
    }

    #[test]
    fn limits_decrease() {
        for mus in [[16.0, 64.0, 256.0], [1.0, 16.0, 256.0]] {
            let e = limit_errors(3.0, &mus).unwrap();
            assert!(e.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].2 <= w[0].2), "{e:?}");
            assert_eq!((e[2].1, e[2].2), (0.0, 0.0));
        }
    }

    proptest::proptest! {
        #[test]
        fn g_identity(xi in -50.0f64..50.0, mu in 0.1f64..100.0) {
            let f = TruncationFamily::new(mu).unwrap();
            let g = xi * f.df(xi) - f.f(xi);
            proptest::prop_assert!((f.g(xi) - g).abs() <= 1e-10 * (1.0 + mu));
        }
    }
}
