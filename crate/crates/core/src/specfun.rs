//! Incomplete elliptic integrals of the first and second kind and the Jacobi
//! amplitude, for both the classical modulus range `0 <= k < 1` and the
//! analytic continuation to `k > 1` needed by hyperbolic caustics.
//!
//! Evaluation goes through Carlson symmetric forms (`R_F`, `R_D`), which are
//! accurate to full double precision; the independent oracle used by the
//! tests is direct adaptive quadrature of the defining integrals.
//!
//! For `k > 1` the integrals only converge for amplitudes
//! `|phi| <= arcsin(1/k)`; the amplitude function is extended to all real
//! arguments by the parity rule `am(eta + 2*Ktilde, k) = -am(eta, k)`, with
//! `Ktilde(k) = F(arcsin(1/k), k)`.

use thiserror::Error;

use crate::numerics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Modulus regime of an elliptic integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `0 <= k < 1`, amplitudes unrestricted.
    Elliptic,
    /// `k > 1`, amplitudes restricted to `|phi| <= arcsin(1/k)`.
    Hyperbolic,
}

/// Validated elliptic modulus; `k = 1` (the separatrix) is rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulus {
    k: f64,
}

impl Modulus {
    pub fn new(k: f64) -> Result<Modulus, SpecFunError> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(SpecFunError::Domain(format!("modulus must be finite and >= 0, got {k}")));
        }
        if k == 1.0 {
            return Err(SpecFunError::Domain("modulus k = 1 is the separatrix".into()));
        }
        Ok(Modulus { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn regime(&self) -> Regime {
        if self.k < 1.0 {
            Regime::Elliptic
        } else {
            Regime::Hyperbolic
        }
    }

    /// `arcsin(1/k)`, the largest convergent amplitude for `k > 1`.
    pub fn max_amplitude(&self) -> f64 {
        match self.regime() {
            Regime::Elliptic => f64::INFINITY,
            Regime::Hyperbolic => (1.0 / self.k).asin(),
        }
    }
}

/// Jacobi amplitude with its branch bookkeeping.
///
/// For an elliptic modulus the continued value is `principal + branch * pi`;
/// for a hyperbolic one it is `(-1)^branch * principal`, `principal` lying in
/// the convergent window `[-arcsin(1/k), arcsin(1/k)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    pub principal: f64,
    pub branch: i64,
    regime: Regime,
}

impl Amplitude {
    /// The fully continued amplitude value.
    pub fn value(&self) -> f64 {
        match self.regime {
            Regime::Elliptic => self.principal + self.branch as f64 * std::f64::consts::PI,
            Regime::Hyperbolic => {
                if self.branch.rem_euclid(2) == 0 {
                    self.principal
                } else {
                    -self.principal
                }
            }
        }
    }
}

/// Carlson symmetric integral `R_F(x, y, z)`.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut mu;
    loop {
        let sx = x.sqrt();
        let sy = y.sqrt();
        let sz = z.sqrt();
        let lam = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        mu = (x + y + z) / 3.0;
        let eps = ((x - mu).abs().max((y - mu).abs()).max((z - mu).abs())) / mu;
        if eps < 1e-10 {
            break;
        }
    }
    let dx = (mu - x) / mu;
    let dy = (mu - y) / mu;
    let dz = (mu - z) / mu;
    let e2 = dx * dy + dy * dz + dz * dx;
    let e3 = dx * dy * dz;
    (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / mu.sqrt()
}

/// Carlson symmetric integral `R_D(x, y, z)`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    let mut mu;
    loop {
        let sx = x.sqrt();
        let sy = y.sqrt();
        let sz = z.sqrt();
        let lam = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        mu = (x + y + 3.0 * z) / 5.0;
        let eps = ((x - mu).abs().max((y - mu).abs()).max((z - mu).abs())) / mu;
        if eps < 1e-10 {
            break;
        }
    }
    let dx = (mu - x) / mu;
    let dy = (mu - y) / mu;
    let dz = (mu - z) / mu;
    let ea = dx * dy;
    let eb = dz * dz;
    let ec = ea - eb;
    let ed = ea - 6.0 * eb;
    let ee = ed + ec + ec;
    3.0 * sum
        + fac
            * (1.0 + ed * (-3.0 / 14.0 + 9.0 / 88.0 * ed - 4.5 / 26.0 * dz * ee)
                + dz * (ee / 6.0 + dz * (-9.0 / 22.0 * ec + 3.0 / 26.0 * dz * ea)))
            / (mu * mu.sqrt())
}

// F and E on the principal window [-pi/2, pi/2] for 0 <= k < 1.
fn f_principal(phi: f64, k: f64) -> f64 {
    let s = phi.sin();
    let c = phi.cos();
    if s == 0.0 {
        return 0.0;
    }
    s * carlson_rf(c * c, 1.0 - k * k * s * s, 1.0)
}

fn e_principal(phi: f64, k: f64) -> f64 {
    let s = phi.sin();
    let c = phi.cos();
    if s == 0.0 {
        return 0.0;
    }
    let q = 1.0 - k * k * s * s;
    s * carlson_rf(c * c, q, 1.0) - k * k * s * s * s / 3.0 * carlson_rd(c * c, q, 1.0)
}

/// Complete integral `K(k) = F(pi/2, k)` for an elliptic modulus.
pub fn complete_k(m: &Modulus) -> Result<f64, SpecFunError> {
    match m.regime() {
        Regime::Elliptic => Ok(carlson_rf(0.0, 1.0 - m.k * m.k, 1.0)),
        Regime::Hyperbolic => Err(SpecFunError::Domain(
            "K(k) requires k < 1; use complete_k_tilde for k > 1".into(),
        )),
    }
}

/// Complete integral `Ktilde(k) = F(arcsin(1/k), k)` for `k > 1`.
pub fn complete_k_tilde(m: &Modulus) -> Result<f64, SpecFunError> {
    match m.regime() {
        Regime::Hyperbolic => {
            let inv = Modulus::new(1.0 / m.k)?;
            Ok(complete_k(&inv)? / m.k)
        }
        Regime::Elliptic => Err(SpecFunError::Domain("Ktilde(k) requires k > 1".into())),
    }
}

/// Complete integral of the second kind `E(k) = E(pi/2, k)`, `k < 1`.
pub fn complete_e(m: &Modulus) -> Result<f64, SpecFunError> {
    match m.regime() {
        Regime::Elliptic => Ok(e_principal(std::f64::consts::FRAC_PI_2, m.k)),
        Regime::Hyperbolic => Err(SpecFunError::Domain("E(k) complete requires k < 1".into())),
    }
}

/// Incomplete elliptic integral of the first kind `F(phi, k)`.
///
/// For `k < 1` the amplitude is unrestricted (quasi-periodic extension
/// `F(phi + pi, k) = F(phi, k) + 2K(k)`); for `k > 1` it must lie in the
/// convergent window `|phi| <= arcsin(1/k)`.
pub fn ellip_f(phi: f64, m: &Modulus) -> Result<f64, SpecFunError> {
    match m.regime() {
        Regime::Elliptic => {
            if m.k == 0.0 {
                return Ok(phi);
            }
            let n = (phi / std::f64::consts::PI).round();
            let r = phi - n * std::f64::consts::PI;
            let kk = complete_k(m)?;
            Ok(2.0 * n * kk + r.signum() * f_principal(r.abs(), m.k))
        }
        Regime::Hyperbolic => {
            let a = m.max_amplitude();
            if phi.abs() > a * (1.0 + 1e-14) + 1e-15 {
                return Err(SpecFunError::Domain(format!(
                    "F(phi, k) with k = {} diverges for |phi| > arcsin(1/k) = {a}; got phi = {phi}",
                    m.k
                )));
            }
            let s = (m.k * phi.sin()).clamp(-1.0, 1.0);
            let theta = s.asin();
            let inv = Modulus::new(1.0 / m.k)?;
            Ok(ellip_f(theta, &inv)? / m.k)
        }
    }
}

/// Incomplete elliptic integral of the second kind `E(phi, k)`.
pub fn ellip_e(phi: f64, m: &Modulus) -> Result<f64, SpecFunError> {
    match m.regime() {
        Regime::Elliptic => {
            if m.k == 0.0 {
                return Ok(phi);
            }
            let n = (phi / std::f64::consts::PI).round();
            let r = phi - n * std::f64::consts::PI;
            let ec = e_principal(std::f64::consts::FRAC_PI_2, m.k);
            Ok(2.0 * n * ec + r.signum() * e_principal(r.abs(), m.k))
        }
        Regime::Hyperbolic => {
            let a = m.max_amplitude();
            if phi.abs() > a * (1.0 + 1e-14) + 1e-15 {
                return Err(SpecFunError::Domain(format!(
                    "E(phi, k) with k = {} is only continued for |phi| <= arcsin(1/k); got {phi}",
                    m.k
                )));
            }
            let s = (m.k * phi.sin()).clamp(-1.0, 1.0);
            let theta = s.asin();
            let inv = Modulus::new(1.0 / m.k)?;
            Ok(m.k * ellip_e(theta, &inv)? - (m.k * m.k - 1.0) / m.k * ellip_f(theta, &inv)?)
        }
    }
}

/// Jacobi amplitude `am(eta, k)`, inverse of `F` continued to all real `eta`.
///
/// Elliptic regime: `am(eta + 2K) = am(eta) + pi`. Hyperbolic regime:
/// `am(eta + 2*Ktilde) = -am(eta)`, with the branch count kept explicit.
pub fn jacobi_am(eta: f64, m: &Modulus) -> Amplitude {
    match m.regime() {
        Regime::Elliptic => {
            if m.k == 0.0 {
                return Amplitude { principal: eta, branch: 0, regime: Regime::Elliptic };
            }
            let kk = complete_k(m).expect("k < 1");
            let n = ((eta + kk) / (2.0 * kk)).floor();
            let r = eta - 2.0 * n * kk; // in [-K, K)
            let phi = invert_f_principal(r, m.k, kk);
            Amplitude { principal: phi, branch: n as i64, regime: Regime::Elliptic }
        }
        Regime::Hyperbolic => {
            let kt = complete_k_tilde(m).expect("k > 1");
            let n = ((eta + kt) / (2.0 * kt)).floor();
            let r = eta - 2.0 * n * kt; // in [-Ktilde, Ktilde)
            let a = m.max_amplitude();
            let phi = invert_f_hyperbolic(r, m, a, kt);
            Amplitude { principal: phi, branch: n as i64, regime: Regime::Hyperbolic }
        }
    }
}

fn invert_f_principal(target: f64, k: f64, kk: f64) -> f64 {
    // F is odd and strictly increasing on [-pi/2, pi/2]
    let guess = target / kk * std::f64::consts::FRAC_PI_2;
    numerics::newton_bracketed(
        |phi| {
            let g = f_principal(phi.abs(), k) * phi.signum() - target;
            let dg = 1.0 / (1.0 - k * k * phi.sin().powi(2)).sqrt();
            (g, dg)
        },
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        guess,
        1e-15,
        100,
    )
}

fn invert_f_hyperbolic(target: f64, m: &Modulus, a: f64, kt: f64) -> f64 {
    let k = m.k;
    let guess = target / kt * a * 0.95;
    numerics::newton_bracketed(
        |phi| {
            let g = ellip_f(phi, m).unwrap_or(if phi > 0.0 { f64::MAX } else { f64::MIN }) - target;
            let q = 1.0 - k * k * phi.sin().powi(2);
            let dg = if q > 0.0 { 1.0 / q.sqrt() } else { f64::MAX };
            (g, dg)
        },
        -a,
        a,
        guess,
        1e-16,
        200,
    )
}
