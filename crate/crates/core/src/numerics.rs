//! Small numerical kernels shared across the crate: compensated summation,
//! adaptive quadrature, safeguarded Newton, monotone cubic interpolation and
//! a C2 smoothstep.

/// Neumaier-compensated accumulator for long sums of cell quantities.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum a slice with compensation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// x^e with fast paths for small-integer, half-integer and third-integer
/// exponents (the constitutive laws hit these in the per-cell hot loop).
#[inline]
pub fn fast_pow(x: f64, e: f64) -> f64 {
    let r = e.round();
    if (e - r).abs() < 1e-14 && r.abs() <= 16.0 {
        return x.powi(r as i32);
    }
    let r2 = (2.0 * e).round();
    if (2.0 * e - r2).abs() < 1e-14 && r2.abs() <= 16.0 {
        return x.sqrt().powi(r2 as i32);
    }
    let r3 = (3.0 * e).round();
    if (3.0 * e - r3).abs() < 1e-14 && r3.abs() <= 16.0 {
        return x.cbrt().powi(r3 as i32);
    }
    x.powf(e)
}

/// Quintic smoothstep: 0 for z <= 0, 1 for z >= 1, C2 across the junctions.
#[inline]
pub fn smoothstep(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
///
/// Subdivides until the local error estimate meets `rel_tol` scaled by the
/// running magnitude of the integral (with a small absolute floor).
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let scale = whole.abs().max(1e-300);
    recurse(f, a, b, fa, fm, fb, whole, rel_tol * scale, 50)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Invert a strictly increasing function by Newton iteration with a bisection
/// safeguard. `f` and `df` are the function and its derivative; the root is
/// bracketed in `[lo, hi]`.
pub fn invert_increasing<F, D>(
    f: &F,
    df: &D,
    target: f64,
    seed: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = seed.clamp(lo, hi);
    for _ in 0..100 {
        let fx = f(x) - target;
        if fx.abs() <= tol {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = if d > 0.0 { x - fx / d } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            return x;
        }
        x = next;
    }
    x
}

/// Least-squares slope of log(value) against log(parameter).
///
/// Returns `None` when fewer than two distinct positive parameters (or any
/// non-positive value) make the fit degenerate.
pub fn log_log_slope(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for &(p, v) in samples {
        if p <= 0.0 || v <= 0.0 {
            return None;
        }
        xs.push(p.ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Monotone piecewise-cubic interpolant (Fritsch-Carlson slopes).
///
/// Used for tabulated constitutive laws: preserves the monotonicity of the
/// input data, C1 overall.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Build from strictly increasing abscissae. Returns `None` if fewer than
    /// two points or unsorted input.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Option<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return None;
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let n = x.len();
        let mut slopes = vec![0.0; n - 1];
        for i in 0..n - 1 {
            slopes[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut d = vec![0.0; n];
        d[0] = slopes[0];
        d[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            if slopes[i - 1] * slopes[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                // harmonic mean keeps the interpolant monotone
                let w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
                let w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
                d[i] = (w1 + w2) / (w1 / slopes[i - 1] + w2 / slopes[i]);
            }
        }
        for i in 0..n - 1 {
            if slopes[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
            } else {
                let a = d[i] / slopes[i];
                let b = d[i + 1] / slopes[i];
                let s = a * a + b * b;
                if s > 9.0 {
                    let t = 3.0 / s.sqrt();
                    d[i] = t * a * slopes[i];
                    d[i + 1] = t * b * slopes[i];
                }
            }
        }
        Some(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    /// Evaluate, clamping to the tabulated range (constant extrapolation).
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let xc = x.clamp(lo, hi);
        let i = self.segment(xc);
        let h = self.x[i + 1] - self.x[i];
        let t = (xc - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    /// Derivative at x (zero outside the table).
    pub fn deriv(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let dh00 = (6.0 * t * t - 6.0 * t) / h;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t * t + 6.0 * t) / h;
        let dh11 = 3.0 * t * t - 2.0 * t;
        dh00 * self.y[i] + dh10 * self.d[i] + dh01 * self.y[i + 1] + dh11 * self.d[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compensated_sum_exact_on_cancellation() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn quadrature_polynomial() {
        let v = adaptive_quadrature(&|z: f64| z * z, 0.0, 2.0, 1e-12);
        assert_relative_eq!(v, 8.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_stiff_integrand() {
        // integral of 1 + z^6 over [0, 2]
        let v = adaptive_quadrature(&|z: f64| 1.0 + z.powi(6), 0.0, 2.0, 1e-11);
        assert_relative_eq!(v, 2.0 + 128.0 / 7.0, max_relative = 1e-10);
    }

    #[test]
    fn invert_increasing_cubic() {
        let f = |x: f64| x + x * x * x / 3.0;
        let df = |x: f64| 1.0 + x * x;
        let x = invert_increasing(&f, &df, f(1.7), 0.5, 0.0, 100.0, 1e-14);
        assert_relative_eq!(x, 1.7, max_relative = 1e-12);
    }

    #[test]
    fn slope_of_quadratic_values() {
        let samples: Vec<(f64, f64)> = [1.0, 0.1, 0.01].iter().map(|&p| (p, p * p)).collect();
        assert_relative_eq!(log_log_slope(&samples).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 2.0, 2.05, 5.0];
        let c = MonotoneCubic::new(x, y).unwrap();
        let mut prev = c.eval(0.0);
        for k in 1..=400 {
            let v = c.eval(4.0 * k as f64 / 400.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn smoothstep_endpoints_and_midpoint() {
        assert_eq!(smoothstep(-0.2), 0.0);
        assert_eq!(smoothstep(1.2), 1.0);
        assert_relative_eq!(smoothstep(0.5), 0.5, epsilon = 1e-15);
    }
}
