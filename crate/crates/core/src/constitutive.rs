//! Constitutive laws for the heat-conducting compressible fluid: the pressure
//! split p(rho, theta) = p_e(rho) + theta p_theta(rho), the derived potentials
//! P_e, Q, K, the renormalization family h(theta) = (1+theta)^(-z), the Newton
//! stress law and validators for the structural hypotheses the solver relies
//! on (growth of p_e, monotonicity of p_theta, conductivity and specific-heat
//! sandwich bounds, exponent inequalities).

use crate::numerics::{adaptive_quadrature, invert_increasing, MonotoneCubic};
use thiserror::Error;

const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("negative input for {what}: {value}")]
    NegativeInput { what: &'static str, value: f64 },
    #[error("renormalization exponent must lie in (0,1), got {0}")]
    BadExponent(f64),
}

pub type Result<T> = std::result::Result<T, ConstitutiveError>;

/// A scalar material law f(s). The affine-power form c0 + c1 s^e covers every
/// default law; arbitrary laws come in as monotone-interpolated tables.
#[derive(Debug, Clone)]
pub enum Law {
    AffinePower { c0: f64, c1: f64, exp: f64 },
    Tabulated(MonotoneCubic),
}

impl Law {
    pub fn power(c1: f64, exp: f64) -> Self {
        Law::AffinePower { c0: 0.0, c1, exp }
    }

    pub fn affine_power(c0: f64, c1: f64, exp: f64) -> Self {
        Law::AffinePower { c0, c1, exp }
    }

    pub fn constant(c: f64) -> Self {
        Law::AffinePower { c0: c, c1: 0.0, exp: 1.0 }
    }

    pub fn tabulated(x: Vec<f64>, y: Vec<f64>) -> Option<Self> {
        MonotoneCubic::new(x, y).map(Law::Tabulated)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Law::AffinePower { c0, c1, exp } => {
                if *c1 == 0.0 {
                    *c0
                } else {
                    c0 + c1 * crate::numerics::fast_pow(s, *exp)
                }
            }
            Law::Tabulated(t) => t.eval(s),
        }
    }

    #[inline]
    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            Law::AffinePower { c1, exp, .. } => {
                if *c1 == 0.0 || *exp == 0.0 {
                    0.0
                } else {
                    c1 * exp * crate::numerics::fast_pow(s, exp - 1.0)
                }
            }
            Law::Tabulated(t) => t.deriv(s),
        }
    }

    /// Antiderivative from zero: F(x) = int_0^x f(s) ds.
    pub fn integral_from_zero(&self, x: f64) -> f64 {
        match self {
            Law::AffinePower { c0, c1, exp } => {
                if *c1 == 0.0 {
                    c0 * x
                } else {
                    c0 * x + c1 * x.powf(exp + 1.0) / (exp + 1.0)
                }
            }
            Law::Tabulated(_) => adaptive_quadrature(&|s| self.eval(s), 0.0, x, QUAD_REL_TOL),
        }
    }

    /// Elastic-potential integral: int_1^x f(z)/z^2 dz.
    pub fn elastic_integral(&self, x: f64) -> f64 {
        match self {
            Law::AffinePower { c0, c1, exp } => {
                let lead = if *c0 == 0.0 {
                    0.0
                } else if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    c0 * (1.0 - 1.0 / x)
                };
                let tail = if *c1 == 0.0 {
                    0.0
                } else if (exp - 1.0).abs() < 1e-14 {
                    if x == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        c1 * x.ln()
                    }
                } else {
                    c1 * (x.powf(exp - 1.0) - 1.0) / (exp - 1.0)
                };
                lead + tail
            }
            Law::Tabulated(_) => {
                let lo = 1e-12_f64.max(x.min(1.0) * 1e-12);
                adaptive_quadrature(&|z| self.eval(z.max(lo)) / (z * z).max(lo * lo), 1.0, x, QUAD_REL_TOL)
            }
        }
    }

    /// f(x)/x with the x -> 0 limit taken for power laws.
    pub fn over_arg(&self, x: f64) -> f64 {
        match self {
            Law::AffinePower { c0, c1, exp } => {
                if x == 0.0 {
                    if *c0 != 0.0 {
                        f64::INFINITY
                    } else if *exp > 1.0 {
                        0.0
                    } else if (*exp - 1.0).abs() < 1e-14 {
                        *c1
                    } else {
                        f64::INFINITY
                    }
                } else {
                    self.eval(x) / x
                }
            }
            Law::Tabulated(_) => self.eval(x) / x.max(1e-300),
        }
    }
}

/// Bounds the hypothesis validators test against. The constant `c_ptheta` is
/// the free constant in the p_theta growth bound; validators also report the
/// tightest constant observed on the sample grid.
#[derive(Debug, Clone)]
pub struct HypothesisBounds {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub k1: f64,
    pub k2: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub c_ptheta: f64,
}

impl Default for HypothesisBounds {
    fn default() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            b: 0.5,
            k1: 0.9,
            k2: 1.1,
            c_lower: 0.9,
            c_upper: 1.1,
            c_ptheta: 1.0,
        }
    }
}

/// The complete material description used by the solver.
#[derive(Debug, Clone)]
pub struct ConstitutiveSet {
    pub gamma: f64,
    pub alpha: f64,
    pub mu: f64,
    pub eta: f64,
    pub zeta: f64,
    pub p_e: Law,
    pub p_theta: Law,
    pub c_v: Law,
    pub kappa: Law,
    pub bounds: HypothesisBounds,
}

impl ConstitutiveSet {
    /// The validated default instance: gamma = 2, p_e = rho^2,
    /// p_theta = rho^(2/3), alpha = 6, kappa = 1 + theta^6, c_v = 1 + theta^2.
    pub fn default_laws() -> Self {
        Self {
            gamma: 2.0,
            alpha: 6.0,
            mu: 1.0,
            eta: 0.0,
            zeta: 0.0,
            p_e: Law::power(1.0, 2.0),
            p_theta: Law::power(1.0, 2.0 / 3.0),
            c_v: Law::affine_power(1.0, 1.0, 2.0),
            kappa: Law::affine_power(1.0, 1.0, 6.0),
            bounds: HypothesisBounds::default(),
        }
    }

    /// p(rho, theta) = p_e(rho) + theta p_theta(rho).
    pub fn pressure(&self, rho: f64, theta: f64) -> Result<f64> {
        check_nonneg("rho", rho)?;
        check_nonneg("theta", theta)?;
        Ok(self.p_e.eval(rho) + theta * self.p_theta.eval(rho))
    }

    /// p + delta rho^beta.
    pub fn artificial_pressure(&self, rho: f64, theta: f64, delta: f64, beta: f64) -> Result<f64> {
        check_nonneg("delta", delta)?;
        Ok(self.pressure(rho, theta)? + delta * rho.powf(beta))
    }

    /// Elastic potential P_e(rho) = int_1^rho p_e(z)/z^2 dz.
    pub fn elastic_potential(&self, rho: f64) -> f64 {
        self.p_e.elastic_integral(rho)
    }

    /// Thermal energy Q(theta) = int_0^theta c_v(z) dz.
    pub fn thermal_q(&self, theta: f64) -> Result<f64> {
        check_nonneg("theta", theta)?;
        Ok(self.c_v.integral_from_zero(theta))
    }

    /// Inverse of Q: the unique theta >= 0 with Q(theta) = q.
    pub fn invert_q(&self, q: f64) -> Result<f64> {
        self.invert_q_seeded(q, q / self.c_v.eval(0.0).max(1e-300))
    }

    /// Same as [`invert_q`](Self::invert_q) with an explicit Newton seed
    /// (the solver warm-starts from the previous temperature field).
    pub fn invert_q_seeded(&self, q: f64, seed: f64) -> Result<f64> {
        check_nonneg("q", q)?;
        if q == 0.0 {
            return Ok(0.0);
        }
        // Q is strictly increasing with Q' = c_v >= c_v(0) > 0.
        let hi_guess = q / self.c_v.eval(0.0).max(1e-300);
        let mut hi = hi_guess.max(seed).max(1e-12);
        let mut guard = 0;
        while self.c_v.integral_from_zero(hi) < q && guard < 200 {
            hi *= 2.0;
            guard += 1;
        }
        let tol = 1e-12 * q.max(1.0);
        Ok(invert_increasing(
            &|t| self.c_v.integral_from_zero(t),
            &|t| self.c_v.eval(t),
            q,
            seed,
            0.0,
            hi,
            tol,
        ))
    }

    /// Conductivity primitive K(theta) = int_0^theta kappa(z) dz.
    pub fn conductivity_primitive(&self, theta: f64) -> Result<f64> {
        check_nonneg("theta", theta)?;
        Ok(self.kappa.integral_from_zero(theta))
    }

    /// Renormalized pair (Q_h, K_h, h) for h(s) = (1+s)^(-z), z in (0,1).
    pub fn renorm_pair(&self, theta: f64, z: f64) -> Result<(f64, f64, f64)> {
        check_nonneg("theta", theta)?;
        if !(0.0 < z && z < 1.0) {
            return Err(ConstitutiveError::BadExponent(z));
        }
        let h = |s: f64| (1.0 + s).powf(-z);
        let q_h = adaptive_quadrature(&|s| self.c_v.eval(s) * h(s), 0.0, theta, QUAD_REL_TOL);
        let k_h = adaptive_quadrature(&|s| self.kappa.eval(s) * h(s), 0.0, theta, QUAD_REL_TOL);
        Ok((q_h, k_h, h(theta)))
    }

    /// Specific elastic enthalpy d/drho [rho P_e(rho)] = P_e(rho) + p_e(rho)/rho.
    pub fn specific_g_elastic(&self, rho: f64) -> f64 {
        self.elastic_potential(rho) + self.p_e.over_arg(rho)
    }

    /// Validate the structural hypotheses on logarithmic sample grids.
    pub fn validate_hypotheses(&self) -> HypothesisReport {
        let mut checks = Vec::new();
        let grid = log_grid(1e-6, 1e6, 121);

        checks.push(check(
            "gamma > 3/2",
            self.gamma > 1.5,
            format!("gamma = {}", self.gamma),
        ));
        checks.push(check(
            "alpha >= 4",
            self.alpha >= 4.0,
            format!("alpha = {}", self.alpha),
        ));
        let alpha_min = 12.0 * (self.gamma - 1.0) / self.gamma;
        checks.push(check(
            "alpha >= 12(gamma-1)/gamma",
            self.alpha >= alpha_min - 1e-12,
            format!("alpha = {}, required >= {}", self.alpha, alpha_min),
        ));
        checks.push(check("mu > 0", self.mu > 0.0, format!("mu = {}", self.mu)));
        checks.push(check("eta >= 0", self.eta >= 0.0, format!("eta = {}", self.eta)));
        checks.push(check("zeta >= 0", self.zeta >= 0.0, format!("zeta = {}", self.zeta)));

        // elastic pressure growth
        let b = &self.bounds;
        let pe0 = self.p_e.eval(0.0);
        checks.push(check("p_e(0) = 0", pe0.abs() <= 1e-12, format!("p_e(0) = {pe0}")));
        let mut lower_ok = true;
        let mut upper_ok = true;
        let mut worst = String::new();
        for &r in &grid {
            let dpe = self.p_e.deriv(r);
            if dpe < b.a1 * r.powf(self.gamma - 1.0) - b.b - 1e-9 {
                lower_ok = false;
                worst = format!("p_e'({r}) = {dpe}");
            }
            if self.p_e.eval(r) > b.a2 * r.powf(self.gamma) + b.b + 1e-9 {
                upper_ok = false;
                worst = format!("p_e({r}) = {}", self.p_e.eval(r));
            }
        }
        checks.push(check("p_e' >= a1 rho^(gamma-1) - b", lower_ok, worst.clone()));
        checks.push(check("p_e <= a2 rho^gamma + b", upper_ok, worst));

        // thermal pressure coefficient
        let pt0 = self.p_theta.eval(0.0);
        checks.push(check("p_theta(0) = 0", pt0.abs() <= 1e-12, format!("p_theta(0) = {pt0}")));
        let mut monotone = true;
        let mut growth = true;
        let mut tightest_c: f64 = 0.0;
        let mut prev = pt0;
        for &r in &grid {
            let v = self.p_theta.eval(r);
            if v < prev - 1e-12 * prev.abs().max(1.0) {
                monotone = false;
            }
            prev = v;
            let cap = r.powf(self.gamma / 3.0);
            if cap > 0.0 {
                tightest_c = tightest_c.max(v / cap);
            }
            if v > b.c_ptheta * cap + 1e-9 {
                growth = false;
            }
        }
        checks.push(check(
            "p_theta nondecreasing, p_theta >= 0",
            monotone && prev >= -1e-12,
            format!("p_theta(1e6) = {prev}"),
        ));
        checks.push(check(
            "p_theta <= c rho^(gamma/3)",
            growth,
            format!("tightest c observed = {tightest_c:.6}"),
        ));

        // conductivity sandwich
        let mut kappa_ok = true;
        let mut kdetail = String::new();
        for &t in &grid {
            let k = self.kappa.eval(t);
            let env = t.powf(self.alpha) + 1.0;
            if k < b.k1 * env - 1e-9 || k > b.k2 * env + 1e-9 {
                kappa_ok = false;
                kdetail = format!("kappa({t}) = {k}, envelope = {env}");
                break;
            }
        }
        checks.push(check("k1(theta^alpha+1) <= kappa <= k2(theta^alpha+1)", kappa_ok, kdetail));

        // specific heat sandwich
        let mut cv_ok = true;
        let mut cdetail = String::new();
        for &t in &grid {
            let c = self.c_v.eval(t);
            let env = 1.0 + t.powf(self.alpha / 2.0 - 1.0);
            if c < b.c_lower * env - 1e-9 || c > b.c_upper * env + 1e-9 {
                cv_ok = false;
                cdetail = format!("c_v({t}) = {c}, envelope = {env}");
                break;
            }
        }
        checks.push(check(
            "c_lower(1+theta^(alpha/2-1)) <= c_v <= c_upper(...)",
            cv_ok,
            cdetail,
        ));

        HypothesisReport { checks, tightest_ptheta_const: tightest_c }
    }
}

/// Newton stress law: S = mu_eff (G + G^T - (2/dim) tr(G) I) + eta tr(G) I.
pub fn stress(grad_u: &[[f64; 3]; 3], mu_eff: f64, eta: f64, dim: usize) -> [[f64; 3]; 3] {
    let mut s = [[0.0; 3]; 3];
    let mut div = 0.0;
    for a in 0..dim {
        div += grad_u[a][a];
    }
    let dev = 2.0 / dim as f64;
    for a in 0..dim {
        for c in 0..dim {
            s[a][c] = mu_eff * (grad_u[a][c] + grad_u[c][a]);
        }
        s[a][a] += -mu_eff * dev * div + eta * div;
    }
    s
}

/// Contraction S(G) : G, the pointwise viscous dissipation density.
pub fn stress_dissipation(grad_u: &[[f64; 3]; 3], mu_eff: f64, eta: f64, dim: usize) -> f64 {
    let s = stress(grad_u, mu_eff, eta, dim);
    let mut acc = 0.0;
    for a in 0..dim {
        for c in 0..dim {
            acc += s[a][c] * grad_u[a][c];
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    /// Smallest constant c with p_theta <= c rho^(gamma/3) on the sample grid.
    pub tightest_ptheta_const: f64,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl std::fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}{}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                if c.detail.is_empty() { String::new() } else { format!("  [{}]", c.detail) }
            )?;
        }
        writeln!(f, "tightest p_theta constant: {:.6}", self.tightest_ptheta_const)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> HypothesisCheck {
    HypothesisCheck { name, passed, detail }
}

fn check_nonneg(what: &'static str, value: f64) -> Result<()> {
    if value < 0.0 {
        Err(ConstitutiveError::NegativeInput { what, value })
    } else {
        Ok(())
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn set() -> ConstitutiveSet {
        ConstitutiveSet::default_laws()
    }

    #[test]
    fn pressure_examples() {
        let s = set();
        assert_eq!(s.pressure(0.0, 5.0).unwrap(), 0.0);
        assert_relative_eq!(s.pressure(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(s.pressure(8.0, 2.0).unwrap(), 72.0, max_relative = 1e-13);
        assert!(s.pressure(-1.0, 0.0).is_err());
    }

    #[test]
    fn artificial_pressure_examples() {
        let s = set();
        assert_relative_eq!(
            s.artificial_pressure(1.3, 0.7, 0.0, 5.0).unwrap(),
            s.pressure(1.3, 0.7).unwrap()
        );
        assert_relative_eq!(s.artificial_pressure(1.0, 0.0, 0.1, 5.0).unwrap(), 1.1);
        assert_eq!(s.artificial_pressure(0.0, 0.0, 0.3, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn elastic_potential_examples() {
        let s = set();
        assert_eq!(s.elastic_potential(1.0), 0.0);
        assert_relative_eq!(s.elastic_potential(2.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.elastic_potential(0.5), -0.5, max_relative = 1e-12);
    }

    #[test]
    fn thermal_q_examples() {
        let s = set();
        assert_eq!(s.thermal_q(0.0).unwrap(), 0.0);
        assert_relative_eq!(s.thermal_q(1.0).unwrap(), 4.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(s.thermal_q(2.0).unwrap(), 14.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn invert_q_examples() {
        let s = set();
        assert_eq!(s.invert_q(0.0).unwrap(), 0.0);
        assert_relative_eq!(s.invert_q(4.0 / 3.0).unwrap(), 1.0, max_relative = 1e-11);
        assert_relative_eq!(s.invert_q(14.0 / 3.0).unwrap(), 2.0, max_relative = 1e-11);
    }

    #[test]
    fn conductivity_primitive_examples() {
        let s = set();
        assert_eq!(s.conductivity_primitive(0.0).unwrap(), 0.0);
        assert_relative_eq!(s.conductivity_primitive(1.0).unwrap(), 8.0 / 7.0, max_relative = 1e-12);
        assert_relative_eq!(
            s.conductivity_primitive(2.0).unwrap(),
            2.0 + 128.0 / 7.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn renorm_pair_limits() {
        let s = set();
        let (q0, k0, h0) = s.renorm_pair(0.0, 0.5).unwrap();
        assert_eq!((q0, k0, h0), (0.0, 0.0, 1.0));

        // z -> 0 recovers the plain potentials
        let (qh, kh, _) = s.renorm_pair(2.0, 1e-9).unwrap();
        assert_relative_eq!(qh, s.thermal_q(2.0).unwrap(), max_relative = 1e-7);
        assert_relative_eq!(kh, s.conductivity_primitive(2.0).unwrap(), max_relative = 1e-7);

        assert!(s.renorm_pair(1.0, 0.0).is_err());
        assert!(s.renorm_pair(1.0, 1.0).is_err());
    }

    #[test]
    fn renorm_h_condition_closed_form() {
        // h''h - 2h'^2 = z(1-z)(1+theta)^(-2z-2) >= 0 for z in (0,1)
        for &z in &[0.1, 0.5, 0.9] {
            for k in 0..60 {
                let t = 0.2 * k as f64;
                let base: f64 = 1.0 + t;
                let h = base.powf(-z);
                let dh = -z * base.powf(-z - 1.0);
                let ddh = z * (z + 1.0) * base.powf(-z - 2.0);
                let lhs = ddh * h - 2.0 * dh * dh;
                let closed = z * (1.0 - z) * base.powf(-2.0 * z - 2.0);
                assert_relative_eq!(lhs, closed, max_relative = 1e-12);
                assert!(lhs >= 0.0);
            }
        }
    }

    #[test]
    fn renorm_pair_dominated_by_plain_potentials() {
        let s = set();
        let mut prev_q = 0.0;
        let mut prev_k = 0.0;
        for k in 1..=20 {
            let t = 0.5 * k as f64;
            let (qh, kh, _) = s.renorm_pair(t, 0.5).unwrap();
            assert!(qh <= s.thermal_q(t).unwrap() + 1e-12);
            assert!(kh <= s.conductivity_primitive(t).unwrap() + 1e-12);
            assert!(qh >= prev_q && kh >= prev_k);
            prev_q = qh;
            prev_k = kh;
        }
    }

    #[test]
    fn stress_hand_cases() {
        let zero = [[0.0; 3]; 3];
        assert_eq!(stress(&zero, 1.0, 0.0, 3), zero);

        // 2D, u = (x, -y): grad u = diag(1, -1), div u = 0
        let mut g = [[0.0; 3]; 3];
        g[0][0] = 1.0;
        g[1][1] = -1.0;
        let s = stress(&g, 1.0, 0.0, 2);
        assert_eq!(s[0][0], 2.0);
        assert_eq!(s[1][1], -2.0);
        assert_eq!(s[0][1], 0.0);

        // 3D, u = (x, y, z): deviatoric part vanishes
        let mut g3 = [[0.0; 3]; 3];
        for a in 0..3 {
            g3[a][a] = 1.0;
        }
        let s3 = stress(&g3, 1.0, 0.0, 3);
        for a in 0..3 {
            for c in 0..3 {
                assert_relative_eq!(s3[a][c], 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn validate_default_passes() {
        let report = set().validate_hypotheses();
        assert!(report.all_passed(), "{report}");
        // 12(gamma-1)/gamma = 6 <= alpha = 6
        assert!(report.checks.iter().any(|c| c.name.contains("12(gamma-1)")));
    }

    #[test]
    fn validate_rejects_small_alpha() {
        let mut s = set();
        s.alpha = 4.0;
        s.gamma = 3.0;
        // exponent inequality needs alpha >= 8; sandwich bounds also move
        let report = s.validate_hypotheses();
        assert!(report
            .checks
            .iter()
            .any(|c| c.name.contains("12(gamma-1)") && !c.passed));
    }

    #[test]
    fn validate_rejects_decreasing_ptheta() {
        let mut s = set();
        s.p_theta = Law::power(-1.0, 1.0);
        let report = s.validate_hypotheses();
        assert!(report
            .checks
            .iter()
            .any(|c| c.name.contains("nondecreasing") && !c.passed));
    }

    #[test]
    fn elastic_enthalpy_second_derivative() {
        // (rho P_e(rho))'' = p_e'(rho)/rho, checked by central differences
        let s = set();
        for &rho in &[0.3, 0.7, 1.0, 2.5, 6.0] {
            let f = |r: f64| r * s.elastic_potential(r);
            let h = 1e-4 * rho;
            let second = (f(rho + h) - 2.0 * f(rho) + f(rho - h)) / (h * h);
            let expect = s.p_e.deriv(rho) / rho;
            assert_relative_eq!(second, expect, max_relative = 1e-6);
        }
    }

    proptest! {
        #[test]
        fn invert_q_round_trip(theta in 0.0f64..100.0) {
            let s = set();
            let q = s.thermal_q(theta).unwrap();
            let back = s.invert_q(q).unwrap();
            prop_assert!((back - theta).abs() <= 1e-10 * theta.max(1.0));
        }

        #[test]
        fn stress_trace_and_dissipation(g in proptest::array::uniform9(-3.0f64..3.0), dim in 2usize..=3, eta in 0.0f64..2.0) {
            let grad = [
                [g[0], g[1], g[2]],
                [g[3], g[4], g[5]],
                [g[6], g[7], g[8]],
            ];
            let s = stress(&grad, 1.3, eta, dim);
            let mut tr_s = 0.0;
            let mut div = 0.0;
            for a in 0..dim {
                tr_s += s[a][a];
                div += grad[a][a];
            }
            prop_assert!((tr_s - dim as f64 * eta * div).abs() <= 1e-10 * tr_s.abs().max(1.0));
            prop_assert!(stress_dissipation(&grad, 1.3, eta, dim) >= -1e-12);
        }
    }
}
