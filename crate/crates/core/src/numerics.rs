//! Small numerical kernels shared across the crate: adaptive quadrature
//! (two independent rules, so integrals can be cross-checked), bracketed
//! root finding, Richardson-extrapolated difference stencils and a C-infinity
//! step function with closed-form derivatives.

/// Third-order jet of a scalar function value: `(v, v', v'', v''')`.
///
/// Used to evaluate deformation fields together with their first three
/// derivatives exactly; products and affine combinations follow Leibniz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet3 {
    pub const ZERO: Jet3 = Jet3 { v: 0.0, d1: 0.0, d2: 0.0, d3: 0.0 };

    pub fn constant(v: f64) -> Jet3 {
        Jet3 { v, d1: 0.0, d2: 0.0, d3: 0.0 }
    }

    pub fn add(self, o: Jet3) -> Jet3 {
        Jet3 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2, d3: self.d3 + o.d3 }
    }

    pub fn sub(self, o: Jet3) -> Jet3 {
        Jet3 { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2, d3: self.d3 - o.d3 }
    }

    pub fn scale(self, c: f64) -> Jet3 {
        Jet3 { v: c * self.v, d1: c * self.d1, d2: c * self.d2, d3: c * self.d3 }
    }

    pub fn mul(self, o: Jet3) -> Jet3 {
        Jet3 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            d3: self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        }
    }
}

/// C-infinity step `psi: R -> [0,1]`, identically 0 for `t <= 0` and 1 for
/// `t >= 1`, with exact first three derivatives.
///
/// `psi(t) = (1/Z) ∫_0^t exp(-1/(u(1-u))) du`, the classical mollifier ramp.
/// The antiderivative is tabulated once on a dense grid; point values come
/// from quintic Hermite interpolation with the exact derivatives `B/Z`,
/// `B'/Z`, which keeps interpolation error far below 1e-14.
pub fn smoothstep(t: f64) -> Jet3 {
    if t <= 0.0 {
        return Jet3::ZERO;
    }
    if t >= 1.0 {
        return Jet3::constant(1.0);
    }
    let table = smoothstep_table();
    let z = table.z;
    let u = t;
    let w = u * (1.0 - u);
    let f = -1.0 / w;
    let b = f.exp();
    // f' and f'' of the exponent
    let fp = (1.0 - 2.0 * u) / (w * w);
    let fpp = -2.0 / (w * w) - 2.0 * (1.0 - 2.0 * u) * (1.0 - 2.0 * u) / (w * w * w);
    let bp = b * fp;
    let bpp = b * (fpp + fp * fp);
    // quintic Hermite between grid nodes, using value + two derivatives
    let n = table.values.len() - 1;
    let x = t * n as f64;
    let i = (x.floor() as usize).min(n - 1);
    let h = 1.0 / n as f64;
    let tau = (t - i as f64 * h) / h;
    let node = |j: usize| -> (f64, f64, f64) {
        let tj = j as f64 * h;
        let wj = tj * (1.0 - tj);
        let bj = if wj > 0.0 { (-1.0 / wj).exp() } else { 0.0 };
        let bpj = if wj > 0.0 { bj * (1.0 - 2.0 * tj) / (wj * wj) } else { 0.0 };
        (table.values[j], bj, bpj)
    };
    let (v0, d0, dd0) = node(i);
    let (v1, d1n, dd1) = node(i + 1);
    let v = quintic_hermite(tau, v0, d0 * h, dd0 * h * h, v1, d1n * h, dd1 * h * h);
    Jet3 { v: v / z, d1: b / z, d2: bp / z, d3: bpp / z }
}

fn quintic_hermite(t: f64, p0: f64, m0: f64, c0: f64, p1: f64, m1: f64, c1: f64) -> f64 {
    // basis for value/first/second derivative data at both ends
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * t3 - t4 + 0.5 * t5;
    h00 * p0 + h10 * m0 + h20 * c0 + h01 * p1 + h11 * m1 + h21 * c1
}

struct StepTable {
    /// cumulative integral of the bump at uniform nodes (unnormalized)
    values: Vec<f64>,
    /// total integral
    z: f64,
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn smoothstep_table() -> &'static StepTable {
    static TABLE: std::sync::OnceLock<StepTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 2048;
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            acc += adaptive_simpson(&bump, a, b, 1e-16);
            values.push(acc);
        }
        StepTable { z: acc, values }
    })
}

/// Largest `|psi''|` of the unit smoothstep; a transition of height `h` over
/// width `w` has second derivative bounded by `h * SMOOTHSTEP_D2_MAX / w^2`.
pub fn smoothstep_d2_max() -> f64 {
    static M: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *M.get_or_init(|| {
        (1..=4096)
            .map(|i| smoothstep(i as f64 / 4097.0).d2.abs())
            .fold(0.0, f64::max)
    })
}

/// Adaptive Simpson quadrature with absolute/relative tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    fn simpson<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec<F: Fn(f64) -> f64 + ?Sized>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        let floor = 1e-17 * whole.abs().max(1.0);
        if depth == 0 || delta.abs() <= (15.0 * tol).max(floor) {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 22)
}

// Gauss-Kronrod 7-15 nodes/weights on [-1,1] (Kronrod abscissae, symmetric).
const GK_XK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GK_WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let mut k = 0.0;
    let mut g = 0.0;
    for (i, (&x, &wk)) in GK_XK.iter().zip(GK_WK.iter()).enumerate() {
        let (f1, f2) = if x == 0.0 {
            let v = f(c);
            (v, 0.0)
        } else {
            (f(c - h * x), f(c + h * x))
        };
        let s = if x == 0.0 { f1 } else { f1 + f2 };
        k += wk * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        } else if x == 0.0 {
            g += GK_WG[3] * s;
        }
    }
    // Gauss weight of the center node belongs to index 7 (x = 0)
    (k * h, (k - g).abs() * h.abs())
}

/// Adaptive Gauss-Kronrod (G7,K15) quadrature; independent of
/// [`adaptive_simpson`] so the two can serve as mutual oracles.
pub fn adaptive_gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if depth == 0 || err <= tol.max(1e-17 * v.abs().max(1.0)) {
            v
        } else {
            let m = 0.5 * (a + b);
            rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, tol, 22)
}

/// Brent root finder on a bracketing interval `[a, b]` with `f(a) f(b) <= 0`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut mflag = true;
    let mut d = 0.0;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < xtol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = 0.25 * (3.0 * a + b);
        let cond = !(s > lo.min(b) && s < lo.max(b))
            || (mflag && (s - b).abs() >= 0.5 * (b - c).abs())
            || (!mflag && (s - b).abs() >= 0.5 * (c - d).abs())
            || (mflag && (b - c).abs() < xtol)
            || (!mflag && (c - d).abs() < xtol);
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(b)
}

/// Newton iteration safeguarded by a bracket `[lo, hi]` with
/// `f(lo) f(hi) <= 0`; `fdf` returns `(f, f')`.
pub fn newton_bracketed<F: FnMut(f64) -> (f64, f64)>(
    mut fdf: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    xtol: f64,
    max_iter: usize,
) -> f64 {
    let (flo, _) = fdf(lo);
    if flo == 0.0 {
        return lo;
    }
    if flo > 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    // now f(lo) < 0 < f(hi), interval endpoints possibly unordered
    let mut x = x0;
    if !(x > lo.min(hi) && x < lo.max(hi)) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..max_iter {
        let (g, dg) = fdf(x);
        if g == 0.0 {
            return x;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - g / dg;
        if !next.is_finite() || !(next > lo.min(hi) && next < lo.max(hi)) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < xtol {
            return next;
        }
        x = next;
    }
    x
}

/// Third derivative of `f` at 0 by the 5-point antisymmetric stencil with
/// two-level Richardson extrapolation, `h` the base step.
pub fn third_derivative_richardson<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let stencil = |t: f64| (f(2.0 * t) - 2.0 * f(t) + 2.0 * f(-t) - f(-2.0 * t)) / (2.0 * t * t * t);
    let d1 = stencil(h);
    let d2 = stencil(0.5 * h);
    let d3 = stencil(0.25 * h);
    // eliminate the O(h^2) term twice
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Wrap `x` into `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x % period;
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

/// Signed distance from `x` to `y` on a circle of circumference `period`,
/// in `(-period/2, period/2]`.
pub fn circ_dist(x: f64, y: f64, period: f64) -> f64 {
    let d = wrap(x - y, period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}
