//! The billiard map on a convex boundary, its rotation number, and the
//! integrable structure of the ellipse: confocal caustics, action-angle
//! charts and closed-form periodic orbits tangent to a caustic.
//!
//! Conventions. A phase point is `(s, sigma)` with `s` the base arclength
//! and `sigma = cos(angle from the tangent)` of the outgoing ray. The chart
//! angle `eta` is normalized to period 1 per caustic: one billiard step
//! advances `eta` by the rotation number `omega = p/q` on elliptic caustics
//! and by `1/2 - omega_tilde` on hyperbolic ones (librations additionally
//! alternate sides, the `pi * i` shift below). Reflection points of a
//! caustic orbit are
//! `phi_i = am(4 K(k) (eta0 + (i-1) omega), k)` in the elliptic case and
//! `phi_i = pi*i + am(4 Ktilde(k) (eta0 + (i-1)(1/2 - omega_tilde)), k)` in
//! the hyperbolic one; both are verified against the reflection law to
//! machine precision by the tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{confocal_conic, Boundary, ConfocalConic, ConicKind, Vec2};
use crate::numerics;
use crate::specfun::{self, Modulus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    #[error("ray-boundary intersection failed to converge at s = {s}, sigma = {sigma}")]
    Solve { s: f64, sigma: f64 },
    #[error("no caustic: {0}")]
    NoCaustic(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Point of the phase cylinder: arclength and tangential momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub s: f64,
    /// `cos` of the angle between the outgoing ray and the tangent, in (-1, 1).
    pub sigma: f64,
}

pub use crate::boundary::ConicKind as CausticKind;

/// A confocal caustic together with its rotation (or libration) number.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CausticParam {
    pub conic: ConfocalConic,
    /// rotation number `omega` (elliptic) or libration number `omega_tilde`
    /// (hyperbolic), both in (0, 1/2)
    pub rot: f64,
}

impl CausticParam {
    pub fn kind(&self) -> CausticKind {
        self.conic.kind
    }

    /// Advance of the unit-normalized chart angle per billiard step.
    pub fn chart_advance(&self) -> f64 {
        match self.conic.kind {
            ConicKind::Elliptic => self.rot,
            ConicKind::Hyperbolic => 0.5 - self.rot,
        }
    }
}

/// Rotation number of an elliptic caustic / libration number of a
/// hyperbolic one, from the closed form `F(phi0, .)/(2K(.))`.
pub fn rotation_number(conic: &ConfocalConic) -> Result<f64, BilliardError> {
    match conic.kind {
        ConicKind::Elliptic => {
            let m = Modulus::new(conic.k).map_err(|e| BilliardError::Domain(e.to_string()))?;
            let num = specfun::ellip_f(conic.phi0, &m).map_err(|e| BilliardError::Domain(e.to_string()))?;
            let den = specfun::complete_k(&m).map_err(|e| BilliardError::Domain(e.to_string()))?;
            Ok(num / (2.0 * den))
        }
        ConicKind::Hyperbolic => {
            let m = Modulus::new(1.0 / conic.k).map_err(|e| BilliardError::Domain(e.to_string()))?;
            let num = specfun::ellip_f(conic.phi0, &m).map_err(|e| BilliardError::Domain(e.to_string()))?;
            let den = specfun::complete_k(&m).map_err(|e| BilliardError::Domain(e.to_string()))?;
            Ok(num / (2.0 * den))
        }
    }
}

/// One application of the billiard map.
pub fn bmap(b: &Boundary, p: PhasePoint) -> Result<PhasePoint, BilliardError> {
    if p.sigma.abs() >= 1.0 {
        return Err(BilliardError::Domain(format!("|sigma| must be < 1, got {}", p.sigma)));
    }
    let t = b.tangent(p.s);
    let n_in = -b.normal(p.s);
    let dir = p.sigma * t + (1.0 - p.sigma * p.sigma).sqrt() * n_in;
    let s_next = next_intersection(b, p.s, dir)?;
    let sigma_next = dir.dot(&b.tangent(s_next));
    Ok(PhasePoint { s: numerics::wrap(s_next, b.base_perimeter()), sigma: sigma_next })
}

/// Forward intersection of the ray from `x(s)` along `dir` with the
/// boundary, as a base arclength in `(s, s + ell)`.
pub fn next_intersection(b: &Boundary, s: f64, dir: Vec2) -> Result<f64, BilliardError> {
    let ell = b.base_perimeter();
    let p = b.point(s);
    let gamma = |u: f64| {
        let d = b.point(u) - p;
        dir.x * d.y - dir.y * d.x
    };
    // the chord splits the boundary into two arcs of constant sign: bracket
    // the single interior sign change and polish
    let eps = 1e-7 * ell;
    let mut m = 128;
    for _attempt in 0..4 {
        let mut prev_u = s + eps;
        let mut prev_g = gamma(prev_u);
        for i in 1..=m {
            let u = s + eps + (ell - 2.0 * eps) * i as f64 / m as f64;
            let g = gamma(u);
            if prev_g == 0.0 {
                return finish_intersection(b, s, dir, prev_u);
            }
            if prev_g * g < 0.0 {
                let root = numerics::brent(gamma, prev_u, u, 1e-14 * ell, 200)
                    .ok_or(BilliardError::Solve { s, sigma: dir.dot(&b.tangent(s)) })?;
                return finish_intersection(b, s, dir, root);
            }
            prev_u = u;
            prev_g = g;
        }
        m *= 4;
    }
    Err(BilliardError::Solve { s, sigma: dir.dot(&b.tangent(s)) })
}

fn finish_intersection(b: &Boundary, s: f64, dir: Vec2, u: f64) -> Result<f64, BilliardError> {
    // Newton polish on the cross function for the last digits
    let p = b.point(s);
    let mut u = u;
    for _ in 0..4 {
        let j = b.jet(u);
        let d = j.point - p;
        let g = dir.x * d.y - dir.y * d.x;
        let dg = dir.x * j.d1.y - dir.y * j.d1.x;
        if dg.abs() > 0.0 {
            u -= g / dg;
        }
    }
    let d = b.point(u) - p;
    if d.dot(&dir) <= 0.0 {
        return Err(BilliardError::Solve { s, sigma: dir.dot(&b.tangent(s)) });
    }
    Ok(u)
}

/// Finite-orbit rotation number estimate from `n` iterations of the lift.
pub fn lift_rotation_number(b: &Boundary, p: PhasePoint, n: usize) -> Result<f64, BilliardError> {
    let ell = b.base_perimeter();
    let mut cur = p;
    let mut lift = 0.0;
    for _ in 0..n {
        let nxt = bmap(b, cur)?;
        lift += numerics::wrap(nxt.s - cur.s, ell);
        cur = nxt;
    }
    Ok(lift / (n as f64 * ell))
}

/// Find the caustic whose rotation (elliptic) or libration (hyperbolic)
/// number equals `p/q`, by bracketed root finding in `lambda`.
pub fn caustic_for_rotation(e: f64, p: u32, q: u32, kind: CausticKind) -> Result<CausticParam, BilliardError> {
    let target = p as f64 / q as f64;
    if !(0.0 < target && target < 0.5) {
        return Err(BilliardError::Domain(format!("need 0 < p/q < 1/2, got {p}/{q}")));
    }
    let b2 = (1.0 - e * e).sqrt();
    let (lo, hi) = match kind {
        CausticKind::Elliptic => (1e-12, b2 * (1.0 - 1e-12)),
        CausticKind::Hyperbolic => {
            if e <= (std::f64::consts::PI * target).cos() {
                return Err(BilliardError::NoCaustic(format!(
                    "libration number {p}/{q} requires e > cos(pi p/q) = {}",
                    (std::f64::consts::PI * target).cos()
                )));
            }
            (b2 * (1.0 + 1e-12), 1.0 - 1e-12)
        }
    };
    let f = |lam: f64| {
        let conic = confocal_conic(e, lam).expect("bracket avoids separatrix");
        rotation_number(&conic).expect("valid conic") - target
    };
    let lam = numerics::brent(f, lo, hi, 1e-16, 300)
        .ok_or_else(|| BilliardError::NoCaustic(format!("no bracket for rotation {p}/{q} at e = {e}")))?;
    let conic = confocal_conic(e, lam).map_err(|er| BilliardError::Domain(er.to_string()))?;
    let rot = rotation_number(&conic)?;
    if (rot - target).abs() > 1e-12 {
        return Err(BilliardError::NoCaustic(format!(
            "rotation residual {} exceeds 1e-12 for {p}/{q} at e = {e}",
            (rot - target).abs()
        )));
    }
    Ok(CausticParam { conic, rot: target })
}

/// Elliptic-polar angles of the `q` reflection points of the caustic orbit
/// with starting phase `eta0` (chart units, period 1).
pub fn caustic_orbit_phis(c: &CausticParam, q: u32, eta0: f64) -> Result<Vec<f64>, BilliardError> {
    let adv = c.chart_advance();
    let winding = adv * q as f64;
    if (winding - winding.round()).abs() > 1e-9 {
        return Err(BilliardError::Domain(format!(
            "chart advance {adv} does not close after q = {q} steps"
        )));
    }
    match c.conic.kind {
        ConicKind::Elliptic => {
            let m = Modulus::new(c.conic.k).map_err(|e| BilliardError::Domain(e.to_string()))?;
            let kk = specfun::complete_k(&m).map_err(|e| BilliardError::Domain(e.to_string()))?;
            Ok((1..=q)
                .map(|i| specfun::jacobi_am(4.0 * kk * (eta0 + (i - 1) as f64 * adv), &m).value())
                .collect())
        }
        ConicKind::Hyperbolic => {
            if q % 2 != 0 {
                return Err(BilliardError::Domain("librations require even period".into()));
            }
            let m = Modulus::new(c.conic.k).map_err(|e| BilliardError::Domain(e.to_string()))?;
            let kt = specfun::complete_k_tilde(&m).map_err(|e| BilliardError::Domain(e.to_string()))?;
            Ok((1..=q)
                .map(|i| {
                    std::f64::consts::PI * i as f64
                        + specfun::jacobi_am(4.0 * kt * (eta0 + (i - 1) as f64 * adv), &m).value()
                })
                .collect())
        }
    }
}

/// Base-arclength coordinates of the caustic orbit.
pub fn caustic_orbit(b: &Boundary, c: &CausticParam, q: u32, eta0: f64) -> Result<Vec<f64>, BilliardError> {
    if !b.deformation.is_empty() {
        return Err(BilliardError::Domain("caustic orbits are defined on the base ellipse".into()));
    }
    let phis = caustic_orbit_phis(c, q, eta0)?;
    let ell = b.base_perimeter();
    Ok(phis
        .into_iter()
        .map(|phi| numerics::wrap(b.base.arclength_of_phi(phi), ell))
        .collect())
}

/// Winding number of the orbit (full turns of `phi` per period).
pub fn orbit_winding(c: &CausticParam, q: u32) -> u32 {
    match c.conic.kind {
        ConicKind::Elliptic => (c.rot * q as f64).round() as u32,
        ConicKind::Hyperbolic => q / 2,
    }
}

/// Largest deviation from the reflection law over the polygon `s`, measured
/// as the difference of tangential components of incoming and outgoing unit
/// chords at each vertex.
pub fn reflection_residual(b: &Boundary, s: &[f64]) -> f64 {
    let q = s.len();
    let mut worst: f64 = 0.0;
    for i in 0..q {
        let p = b.point(s[i]);
        let prev = b.point(s[(i + q - 1) % q]);
        let next = b.point(s[(i + 1) % q]);
        let ein = (p - prev).normalize();
        let eout = (next - p).normalize();
        let t = b.tangent(s[i]);
        worst = worst.max((ein.dot(&t) - eout.dot(&t)).abs());
    }
    worst
}

/// Largest tangency residual of the orbit's chords against the caustic.
pub fn tangency_residual(b: &Boundary, c: &CausticParam, s: &[f64]) -> f64 {
    let q = s.len();
    let mut worst: f64 = 0.0;
    for i in 0..q {
        let p = b.point(s[i]);
        let nxt = b.point(s[(i + 1) % q]);
        let d = (nxt - p).normalize();
        worst = worst.max(crate::boundary::conic_tangency_residual(&c.conic, p, d).abs());
    }
    worst
}

/// Residual of the conjugacy `B(Psi(eta)) = Psi(eta + advance)` over
/// `iters` steps starting at `eta0`, measured in arclength.
pub fn conjugacy_residual(
    b: &Boundary,
    c: &CausticParam,
    eta0: f64,
    iters: u32,
) -> Result<f64, BilliardError> {
    let ell = b.base_perimeter();
    let adv = c.chart_advance();
    let phi_of = |i: u32| -> Result<f64, BilliardError> {
        match c.conic.kind {
            ConicKind::Elliptic => {
                let m = Modulus::new(c.conic.k).map_err(|e| BilliardError::Domain(e.to_string()))?;
                let kk = specfun::complete_k(&m).map_err(|e| BilliardError::Domain(e.to_string()))?;
                Ok(specfun::jacobi_am(4.0 * kk * (eta0 + i as f64 * adv), &m).value())
            }
            ConicKind::Hyperbolic => {
                let m = Modulus::new(c.conic.k).map_err(|e| BilliardError::Domain(e.to_string()))?;
                let kt = specfun::complete_k_tilde(&m).map_err(|e| BilliardError::Domain(e.to_string()))?;
                Ok(std::f64::consts::PI * (i + 1) as f64
                    + specfun::jacobi_am(4.0 * kt * (eta0 + i as f64 * adv), &m).value())
            }
        }
    };
    let s_of = |i: u32| -> Result<f64, BilliardError> {
        Ok(numerics::wrap(b.base.arclength_of_phi(phi_of(i)?), ell))
    };
    let s0 = s_of(0)?;
    let s1 = s_of(1)?;
    let d = (b.point(s1) - b.point(s0)).normalize();
    let mut cur = PhasePoint { s: s0, sigma: d.dot(&b.tangent(s0)) };
    let mut worst: f64 = 0.0;
    for i in 1..=iters {
        cur = bmap(b, cur)?;
        worst = worst.max(numerics::circ_dist(cur.s, s_of(i)?, ell).abs());
    }
    Ok(worst)
}

/// Sample rows `(s, sigma, orbit_id)` of the phase portrait: several orbits
/// iterated from the given initial conditions.
pub fn phase_portrait(
    b: &Boundary,
    seeds: &[PhasePoint],
    iters: usize,
) -> Result<Vec<(f64, f64, usize)>, BilliardError> {
    let mut rows = Vec::with_capacity(seeds.len() * iters);
    for (id, &seed) in seeds.iter().enumerate() {
        let mut cur = seed;
        rows.push((cur.s, cur.sigma, id));
        for _ in 0..iters {
            cur = bmap(b, cur)?;
            rows.push((cur.s, cur.sigma, id));
        }
    }
    Ok(rows)
}

/// Chord length `h(s, s') = |x(s) - x(s')|` and its two partials (the
/// generating function of the map, in base parameter).
pub fn generating_function(b: &Boundary, s: f64, sp: f64) -> (f64, f64, f64) {
    let ja = b.jet(s);
    let jb = b.jet(sp);
    let c = jb.point - ja.point;
    let h = c.norm();
    let u = c / h;
    (h, -u.dot(&ja.d1), u.dot(&jb.d1))
}
