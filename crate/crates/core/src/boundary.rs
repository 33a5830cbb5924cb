//! Boundary geometry: the base ellipse, smooth normal deformation fields and
//! the resulting deformed boundaries.
//!
//! A deformed boundary `Omega = { x0(s) + mu(s) n(s) }` is parametrized by
//! the *base-ellipse arclength* `s`; all derivatives of the curve are exact
//! through third order, which the variational machinery relies on. True
//! arclength quantities (perimeter) are obtained by quadrature.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, Jet3};
use crate::specfun::{self, Modulus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("convexity violated: curvature {kappa} at s = {s}")]
    Convexity { s: f64, kappa: f64 },
}

/// Planar point / vector. Thin alias to keep signatures readable.
pub type Vec2 = nalgebra::Vector2<f64>;

/// The base ellipse `x^2 + y^2/(1-e^2) = 1`, semimajor axis 1, parametrized
/// by `phi` as `(-sin phi, sqrt(1-e^2) cos phi)` and by its own arclength
/// `s(phi) = E(phi, e)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ellipse {
    e: f64,
    b: f64,
    perimeter: f64,
    #[serde(skip, default)]
    phi_table: std::sync::OnceLock<Vec<f64>>,
}

impl PartialEq for Ellipse {
    fn eq(&self, other: &Self) -> bool {
        self.e == other.e
    }
}

impl Ellipse {
    pub fn new(e: f64) -> Result<Ellipse, BoundaryError> {
        if !(0.0..1.0).contains(&e) {
            return Err(BoundaryError::Domain(format!("eccentricity must satisfy 0 <= e < 1, got {e}")));
        }
        let m = Modulus::new(e).map_err(|err| BoundaryError::Domain(err.to_string()))?;
        let quarter = specfun::ellip_e(std::f64::consts::FRAC_PI_2, &m)
            .map_err(|err| BoundaryError::Domain(err.to_string()))?;
        Ok(Ellipse {
            e,
            b: (1.0 - e * e).sqrt(),
            perimeter: 4.0 * quarter,
            phi_table: std::sync::OnceLock::new(),
        })
    }

    pub fn eccentricity(&self) -> f64 {
        self.e
    }

    /// Semiminor axis `b = sqrt(1 - e^2)`.
    pub fn semiminor(&self) -> f64 {
        self.b
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// `|x'(phi)| = sqrt(1 - e^2 sin^2 phi)`, the parametric speed.
    pub fn speed_phi(&self, phi: f64) -> f64 {
        (1.0 - self.e * self.e * phi.sin().powi(2)).sqrt()
    }

    /// Arclength from `phi = 0` (top of the minor axis), monotone in `phi`.
    pub fn arclength_of_phi(&self, phi: f64) -> f64 {
        let m = Modulus::new(self.e).expect("validated");
        specfun::ellip_e(phi, &m).expect("k < 1 unrestricted")
    }

    /// Inverse of [`Self::arclength_of_phi`], Newton with a table seed.
    pub fn phi_of_arclength(&self, s: f64) -> f64 {
        let n_wind = (s / self.perimeter).floor();
        let sr = s - n_wind * self.perimeter;
        let table = self.phi_table.get_or_init(|| {
            let n = 2048;
            (0..=n)
                .map(|i| {
                    let target = self.perimeter * i as f64 / n as f64;
                    self.invert_arclength_slow(target)
                })
                .collect()
        });
        let n = table.len() - 1;
        let idx = ((sr / self.perimeter) * n as f64).floor().clamp(0.0, (n - 1) as f64) as usize;
        let frac = (sr / self.perimeter) * n as f64 - idx as f64;
        let mut phi = table[idx] * (1.0 - frac) + table[idx + 1] * frac;
        for _ in 0..8 {
            let g = self.arclength_of_phi(phi) - sr;
            if g.abs() < 1e-14 {
                break;
            }
            phi -= g / self.speed_phi(phi);
        }
        phi + n_wind * 2.0 * std::f64::consts::PI
    }

    fn invert_arclength_slow(&self, target: f64) -> f64 {
        let mut phi = target / self.perimeter * 2.0 * std::f64::consts::PI;
        for _ in 0..60 {
            let g = self.arclength_of_phi(phi) - target;
            if g.abs() < 1e-15 {
                break;
            }
            phi -= g / self.speed_phi(phi);
        }
        phi
    }

    pub fn point_phi(&self, phi: f64) -> Vec2 {
        Vec2::new(-phi.sin(), self.b * phi.cos())
    }

    /// Unit tangent at parameter `phi` (orientation of increasing `phi`/`s`).
    pub fn tangent_phi(&self, phi: f64) -> Vec2 {
        let v = self.speed_phi(phi);
        Vec2::new(-phi.cos() / v, -self.b * phi.sin() / v)
    }

    /// Outward unit normal at `phi`.
    pub fn normal_phi(&self, phi: f64) -> Vec2 {
        let t = self.tangent_phi(phi);
        Vec2::new(t.y, -t.x)
    }

    /// Curvature `kappa(phi) = b / (1 - e^2 sin^2 phi)^{3/2}` (> 0).
    pub fn curvature_phi(&self, phi: f64) -> f64 {
        self.b / self.speed_phi(phi).powi(3)
    }

    /// Curvature and its first two derivatives with respect to arclength.
    pub fn curvature_jets_phi(&self, phi: f64) -> (f64, f64, f64) {
        let e2 = self.e * self.e;
        let w = self.speed_phi(phi);
        let (s2, c2) = (phi.sin(), phi.cos());
        let kappa = self.b / w.powi(3);
        // d kappa / ds = (d kappa / d phi) / w
        let dk = 3.0 * self.b * e2 * s2 * c2 / w.powi(6);
        let cos2phi = c2 * c2 - s2 * s2;
        let ddk = 3.0 * self.b * e2 * (cos2phi * w * w + 6.0 * e2 * s2 * s2 * c2 * c2) / w.powi(9);
        (kappa, dk, ddk)
    }
}

/// One piece of a deformation field, supported on an arclength interval.
///
/// Pieces evaluate additively; each returns the jet `(mu, mu', mu'', mu''')`
/// with derivatives taken in base arclength.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    /// Local cubic jet `mu = a2/2 (s-s1)^2 + a3/6 (s-s1)^3` on `|s-s1| <= r_core`,
    /// blended per side to a constant shelf on `[r_core, r_mid]`, held until
    /// `r_hold`, then blended to zero on `[r_hold, r_end]`. The shelf sign on
    /// each side follows `sign(a3 (s-s1)^3)`.
    CubicJet {
        s1: f64,
        a2: f64,
        a3: f64,
        shelf: f64,
        r_core: f64,
        r_mid: f64,
        r_hold: f64,
        r_end: f64,
    },
    /// Probe window: the pure cubic tapered to zero over `[r_core, r_end]`
    /// with no shelf (used when calibrating jet response constants).
    ProbeJet { s1: f64, a2: f64, a3: f64, r_core: f64, r_end: f64 },
    /// Nonlocal plateau at depth `-iota`, multiplied by a weight that
    /// vanishes inside per-point collars: weight rises 0 -> 1 over
    /// `[rise_in, rise_out]` away from each protected center.
    Plateau {
        iota: f64,
        /// `(center, rise_in, rise_out)` per protected collar
        collars: Vec<(f64, f64, f64)>,
        /// near-minor-axis homothety: `(factor rho, half-width, blend-width)`,
        /// replaces the plateau by the normal field of a `(1-rho)`-homothety
        homothety: Option<(f64, f64, f64)>,
    },
    /// Constant field (testing convenience).
    Constant { value: f64 },
}

fn side_blend(delta: f64, cubic: Jet3, shelf: f64, r_core: f64, r_mid: f64, r_hold: f64, r_end: f64) -> Jet3 {
    let ad = delta.abs();
    if ad >= r_end {
        return Jet3::ZERO;
    }
    if ad <= r_core {
        return cubic;
    }
    let shelf_jet = Jet3::constant(shelf);
    if ad <= r_mid {
        let w = r_mid - r_core;
        let t = (ad - r_core) / w;
        let mut psi = numerics::smoothstep(t);
        // chain rule in s; |delta|' = sign(delta)
        let sg = delta.signum();
        psi = Jet3 {
            v: psi.v,
            d1: psi.d1 * sg / w,
            d2: psi.d2 / (w * w),
            d3: psi.d3 * sg / (w * w * w),
        };
        return cubic.add(shelf_jet.sub(cubic).mul(psi));
    }
    if ad <= r_hold {
        return shelf_jet;
    }
    let w = r_end - r_hold;
    let t = (ad - r_hold) / w;
    let mut psi = numerics::smoothstep(t);
    let sg = delta.signum();
    psi = Jet3 {
        v: psi.v,
        d1: psi.d1 * sg / w,
        d2: psi.d2 / (w * w),
        d3: psi.d3 * sg / (w * w * w),
    };
    shelf_jet.add(Jet3::constant(0.0).sub(shelf_jet).mul(psi))
}

impl Piece {
    fn eval(&self, base: &Ellipse, s: f64) -> Jet3 {
        match self {
            Piece::Constant { value } => Jet3::constant(*value),
            Piece::CubicJet { s1, a2, a3, shelf, r_core, r_mid, r_hold, r_end } => {
                let d = numerics::circ_dist(s, *s1, base.perimeter());
                if d.abs() >= *r_end {
                    return Jet3::ZERO;
                }
                let cubic = Jet3 {
                    v: 0.5 * a2 * d * d + a3 / 6.0 * d * d * d,
                    d1: a2 * d + 0.5 * a3 * d * d,
                    d2: a2 + a3 * d,
                    d3: *a3,
                };
                let side_shelf = shelf.abs() * (a3 * d).signum();
                side_blend(d, cubic, side_shelf, *r_core, *r_mid, *r_hold, *r_end)
            }
            Piece::ProbeJet { s1, a2, a3, r_core, r_end } => {
                let d = numerics::circ_dist(s, *s1, base.perimeter());
                if d.abs() >= *r_end {
                    return Jet3::ZERO;
                }
                let cubic = Jet3 {
                    v: 0.5 * a2 * d * d + a3 / 6.0 * d * d * d,
                    d1: a2 * d + 0.5 * a3 * d * d,
                    d2: a2 + a3 * d,
                    d3: *a3,
                };
                if d.abs() <= *r_core {
                    return cubic;
                }
                let w = r_end - r_core;
                let t = (d.abs() - r_core) / w;
                let mut psi = numerics::smoothstep(t);
                let sg = d.signum();
                psi = Jet3 {
                    v: psi.v,
                    d1: psi.d1 * sg / w,
                    d2: psi.d2 / (w * w),
                    d3: psi.d3 * sg / (w * w * w),
                };
                cubic.add(Jet3::ZERO.sub(cubic).mul(psi))
            }
            Piece::Plateau { iota, collars, homothety } => {
                let ell = base.perimeter();
                // weight = product over collars of a ramp that is 0 inside
                // the collar and 1 beyond rise_out
                let mut weight = Jet3::constant(1.0);
                for &(c, rise_in, rise_out) in collars {
                    let d = numerics::circ_dist(s, c, ell).abs();
                    if d >= rise_out {
                        continue;
                    }
                    if d <= rise_in {
                        weight = Jet3::ZERO;
                        break;
                    }
                    let w = rise_out - rise_in;
                    let t = (d - rise_in) / w;
                    let mut psi = numerics::smoothstep(t);
                    let sg = numerics::circ_dist(s, c, ell).signum();
                    psi = Jet3 {
                        v: psi.v,
                        d1: psi.d1 * sg / w,
                        d2: psi.d2 / (w * w),
                        d3: psi.d3 * sg / (w * w * w),
                    };
                    weight = weight.mul(psi);
                }
                // depth field: -iota, or the homothety normal field near the
                // minor axis (centers s = 0 and s = ell/2), blended smoothly
                let mut depth = Jet3::constant(-*iota);
                if let Some((rho, half, blend)) = homothety {
                    let d0 = numerics::circ_dist(s, 0.0, ell).abs();
                    let d1 = numerics::circ_dist(s, 0.5 * ell, ell).abs();
                    let d = d0.min(d1);
                    if d < half + blend {
                        let hj = homothety_jet(base, s, *rho);
                        if d <= *half {
                            depth = hj;
                        } else {
                            let t = (d - half) / blend;
                            let mut psi = numerics::smoothstep(t);
                            let sg = if d0 < d1 {
                                numerics::circ_dist(s, 0.0, ell).signum()
                            } else {
                                numerics::circ_dist(s, 0.5 * ell, ell).signum()
                            };
                            psi = Jet3 {
                                v: psi.v,
                                d1: psi.d1 * sg / blend,
                                d2: psi.d2 / (blend * blend),
                                d3: psi.d3 * sg / (blend * blend * blend),
                            };
                            // psi = 0 at the homothety side; 1 at plateau side
                            depth = hj.add(Jet3::constant(-*iota).sub(hj).mul(psi));
                        }
                    }
                }
                weight.mul(depth)
            }
        }
    }

    fn support(&self, base: &Ellipse) -> Option<(f64, f64)> {
        match self {
            Piece::CubicJet { s1, r_end, .. } => Some((*s1 - *r_end, *s1 + *r_end)),
            Piece::ProbeJet { s1, r_end, .. } => Some((*s1 - *r_end, *s1 + *r_end)),
            Piece::Plateau { .. } => None,
            Piece::Constant { .. } => {
                let _ = base;
                None
            }
        }
    }
}

/// First-order normal field of a homothety `(1-rho)` of the base ellipse:
/// `mu_h(s) = -rho * (x . n)(s) = -rho * b / speed(phi)`, with derivatives.
fn homothety_jet(base: &Ellipse, s: f64, rho: f64) -> Jet3 {
    let phi = base.phi_of_arclength(s);
    let e2 = base.eccentricity().powi(2);
    let b = base.semiminor();
    let w = base.speed_phi(phi);
    // w^2 = 1 - e^2 sin^2 phi  =>  2 w w' = -e^2 sin 2phi (derivatives in phi)
    let wp = -e2 * (2.0 * phi).sin() / (2.0 * w);
    let wpp2 = (-2.0 * e2 * (2.0 * phi).cos() - 2.0 * wp * wp) / (2.0 * w);
    let wppp = (4.0 * e2 * (2.0 * phi).sin() - 6.0 * wp * wpp2) / (2.0 * w);
    // g = b/w in phi: g' = -b w'/w^2, g'' = b(2w'^2 - w w'')/w^3,
    // g''' = b(-6w'^3 + 6 w w' w'' - w^2 w''')/w^4
    let g = b / w;
    let g1 = -b * wp / (w * w);
    let g2 = b * (2.0 * wp * wp - w * wpp2) / (w * w * w);
    let g3 = b * (-6.0 * wp * wp * wp + 6.0 * w * wp * wpp2 - w * w * wppp) / (w * w * w * w);
    // chain rule phi -> s with ds/dphi = w
    let f1 = g1 / w;
    let f2 = (g2 - f1 * wp) / (w * w);
    // third derivative via one more chain-rule layer:
    // d/ds f2 = (f2' in phi)/w with f2(phi) as above
    // use exact formula: f''' = (g3 - 3 f2 w w' ... ) -- derive directly:
    // f(s) = g(phi(s)); f' = g'/w; f'' = (g'' - g' w'/w) / w^2
    // f''' = [g''' - 3 g'' w'/w + g'(3 w'^2/w^2 - w''/w)] / w^3
    let f3 = (g3 - 3.0 * g2 * wp / w + g1 * (3.0 * wp * wp / (w * w) - wpp2 / w)) / (w * w * w);
    Jet3 { v: -rho * g, d1: -rho * f1, d2: -rho * f2, d3: -rho * f3 }
}

/// A smooth normal deformation field, the sum of its pieces.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct DeformationField {
    pub pieces: Vec<Piece>,
}

impl DeformationField {
    pub fn empty() -> DeformationField {
        DeformationField { pieces: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn eval(&self, base: &Ellipse, s: f64) -> Jet3 {
        let mut acc = Jet3::ZERO;
        for p in &self.pieces {
            acc = acc.add(p.eval(base, s));
        }
        acc
    }
}

/// A boundary: base ellipse plus (possibly empty) normal deformation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Boundary {
    pub base: Ellipse,
    pub deformation: DeformationField,
    perimeter: f64,
}

/// Full third-order local data of the boundary curve at a base parameter.
#[derive(Debug, Clone, Copy)]
pub struct CurveJet {
    pub point: Vec2,
    /// d x / ds (not unit unless mu = mu' = 0)
    pub d1: Vec2,
    pub d2: Vec2,
    pub d3: Vec2,
}

impl Boundary {
    pub fn ellipse(e: f64) -> Result<Boundary, BoundaryError> {
        let base = Ellipse::new(e)?;
        let perimeter = base.perimeter();
        Ok(Boundary { base, deformation: DeformationField::empty(), perimeter })
    }

    /// Build a deformed boundary; certifies convexity on a dense grid with
    /// refinement near piece supports.
    pub fn deformed(base: Ellipse, deformation: DeformationField) -> Result<Boundary, BoundaryError> {
        let mut b = Boundary { base, deformation, perimeter: 0.0 };
        b.certify_convexity(1 << 14)?;
        b.perimeter = b.compute_perimeter(1e-11)?;
        Ok(b)
    }

    pub fn base_perimeter(&self) -> f64 {
        self.base.perimeter()
    }

    /// True perimeter of the (possibly deformed) curve.
    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    fn compute_perimeter(&self, tol: f64) -> Result<f64, BoundaryError> {
        if self.deformation.is_empty() {
            return Ok(self.base.perimeter());
        }
        let ell = self.base.perimeter();
        let f = |s: f64| self.jet(s).d1.norm();
        let a = numerics::adaptive_gk15(&f, 0.0, ell, tol * ell);
        Ok(a)
    }

    /// Cross-check perimeter with the independent Simpson rule.
    pub fn perimeter_dual_check(&self, tol: f64) -> (f64, f64) {
        let ell = self.base.perimeter();
        let f = |s: f64| self.jet(s).d1.norm();
        let a = numerics::adaptive_gk15(&f, 0.0, ell, tol * ell);
        let b = numerics::adaptive_simpson(&f, 0.0, ell, tol * ell);
        (a, b)
    }

    /// Exact curve jet (point and first three s-derivatives) at base
    /// arclength `s`.
    pub fn jet(&self, s: f64) -> CurveJet {
        let phi = self.base.phi_of_arclength(s);
        let p0 = self.base.point_phi(phi);
        let t = self.base.tangent_phi(phi);
        let n = self.base.normal_phi(phi);
        let (k, dk, ddk) = self.base.curvature_jets_phi(phi);
        if self.deformation.is_empty() {
            return CurveJet {
                point: p0,
                d1: t,
                d2: -k * n,
                d3: -k * k * t - dk * n,
            };
        }
        let mu = self.deformation.eval(&self.base, s);
        // x = x0 + mu n; with t' = -kappa n, n' = kappa t (base arclength)
        let point = p0 + mu.v * n;
        let d1 = (1.0 + mu.v * k) * t + mu.d1 * n;
        let a = 2.0 * mu.d1 * k + mu.v * dk;
        let bcoef = mu.d2 - k * (1.0 + mu.v * k);
        let d2 = a * t + bcoef * n;
        let a_p = 2.0 * mu.d2 * k + 3.0 * mu.d1 * dk + mu.v * ddk;
        let b_p = mu.d3 - dk * (1.0 + mu.v * k) - k * (mu.d1 * k + mu.v * dk);
        let d3 = (a_p + bcoef * k) * t + (b_p - a * k) * n;
        CurveJet { point, d1, d2, d3 }
    }

    pub fn point(&self, s: f64) -> Vec2 {
        self.jet(s).point
    }

    /// Unit tangent at `s`.
    pub fn tangent(&self, s: f64) -> Vec2 {
        let d = self.jet(s).d1;
        d / d.norm()
    }

    /// Outward unit normal at `s`.
    pub fn normal(&self, s: f64) -> Vec2 {
        let t = self.tangent(s);
        Vec2::new(t.y, -t.x)
    }

    /// Parametric speed `|dx/ds|` (1 on the undeformed ellipse).
    pub fn speed(&self, s: f64) -> f64 {
        self.jet(s).d1.norm()
    }

    /// Curvature by `det(x', x'') / |x'|^3`.
    pub fn curvature(&self, s: f64) -> f64 {
        let j = self.jet(s);
        (j.d1.x * j.d2.y - j.d1.y * j.d2.x) / j.d1.norm().powi(3)
    }

    /// Deformation jet `(mu, mu', mu'', mu''')` at `s`.
    pub fn mu_jet(&self, s: f64) -> Jet3 {
        self.deformation.eval(&self.base, s)
    }

    fn certify_convexity(&self, n: usize) -> Result<(), BoundaryError> {
        let ell = self.base.perimeter();
        let check = |s: f64| -> Result<(), BoundaryError> {
            let k = self.curvature(s);
            if !(k > 0.0) {
                return Err(BoundaryError::Convexity { s, kappa: k });
            }
            Ok(())
        };
        for i in 0..n {
            check(ell * i as f64 / n as f64)?;
        }
        // refine near piece supports where curvature varies fastest
        for p in &self.deformation.pieces {
            if let Some((a, b)) = p.support(&self.base) {
                let m = 512;
                for i in 0..=m {
                    check(numerics::wrap(a + (b - a) * i as f64 / m as f64, ell))?;
                }
            }
        }
        Ok(())
    }

    /// Minimum curvature on a grid (diagnostics for deformation budgets).
    pub fn min_curvature(&self, n: usize) -> f64 {
        let ell = self.base.perimeter();
        (0..n)
            .map(|i| self.curvature(ell * i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Total turning number, `(1/2pi) ∮ kappa |x'| ds`; 1 for convex curves.
    pub fn turning_number(&self) -> f64 {
        let ell = self.base.perimeter();
        let f = |s: f64| {
            let j = self.jet(s);
            (j.d1.x * j.d2.y - j.d1.y * j.d2.x) / j.d1.norm_squared()
        };
        numerics::adaptive_gk15(&f, 0.0, ell, 1e-10) / (2.0 * std::f64::consts::PI)
    }
}

/// Classification of a confocal conic section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConicKind {
    Elliptic,
    Hyperbolic,
}

/// Confocal conic `x^2/(1-lambda^2) + y^2/(1-e^2-lambda^2) = 1` data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfocalConic {
    pub e: f64,
    pub lambda: f64,
    pub kind: ConicKind,
    /// caustic modulus `k = e / sqrt(1 - lambda^2)`
    pub k: f64,
    /// amplitude `phi0`: `arcsin(lambda/sqrt(1-e^2))` (elliptic) or
    /// `arcsin(sqrt(1-e^2)/lambda)` (hyperbolic)
    pub phi0: f64,
}

/// Classify the confocal conic with parameter `lambda` inside `E_e`.
pub fn confocal_conic(e: f64, lambda: f64) -> Result<ConfocalConic, BoundaryError> {
    if !(0.0..1.0).contains(&(lambda * lambda)) || lambda < 0.0 {
        return Err(BoundaryError::Domain(format!("need 0 <= lambda^2 < 1, got lambda = {lambda}")));
    }
    let b2 = 1.0 - e * e;
    if (lambda * lambda - b2).abs() < 1e-15 {
        return Err(BoundaryError::Domain("lambda^2 = 1 - e^2 is the separatrix".into()));
    }
    let k = e / (1.0 - lambda * lambda).sqrt();
    if lambda * lambda < b2 {
        Ok(ConfocalConic { e, lambda, kind: ConicKind::Elliptic, k, phi0: (lambda / b2.sqrt()).asin() })
    } else {
        Ok(ConfocalConic { e, lambda, kind: ConicKind::Hyperbolic, k, phi0: (b2.sqrt() / lambda).asin() })
    }
}

/// Signed tangency residual of the line through `p` with direction `d`
/// against the conic; zero iff tangent.
pub fn conic_tangency_residual(conic: &ConfocalConic, p: Vec2, d: Vec2) -> f64 {
    let a2 = 1.0 - conic.lambda * conic.lambda;
    let b2 = 1.0 - conic.e * conic.e - conic.lambda * conic.lambda; // negative for hyperbolae
    let q1 = d.x * d.x / a2 + d.y * d.y / b2;
    let q2 = p.x * p.x / a2 + p.y * p.y / b2 - 1.0;
    let q3 = p.x * d.x / a2 + p.y * d.y / b2;
    q1 * q2 - q3 * q3
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn circle_basics() {
        let b = Boundary::ellipse(0.0).unwrap();
        assert_relative_eq!(b.perimeter(), 2.0 * PI, epsilon = 1e-12);
        let p = b.point(0.0);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-14);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-14);
        for i in 0..17 {
            let s = 2.0 * PI * i as f64 / 17.0;
            assert_relative_eq!(b.point(s).norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(b.curvature(s), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ellipse_curvature_analytic() {
        let e = 0.8;
        let b = Boundary::ellipse(e).unwrap();
        // end of major axis: phi = pi/2, kappa = 1/(1-e^2)
        let s = b.base.arclength_of_phi(PI / 2.0);
        assert_relative_eq!(b.curvature(s), 1.0 / (1.0 - e * e), max_relative = 1e-10);
        // end of minor axis: kappa = b
        assert_relative_eq!(b.curvature(0.0), (1.0 - e * e).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn tangent_is_arclength_derivative() {
        let b = Boundary::ellipse(0.6).unwrap();
        let h = 1e-6;
        for i in 0..13 {
            let s = b.perimeter() * i as f64 / 13.0;
            let fd = (b.point(s + h) - b.point(s - h)) / (2.0 * h);
            let t = b.tangent(s);
            assert_relative_eq!(fd.x, t.x, epsilon = 2e-8);
            assert_relative_eq!(fd.y, t.y, epsilon = 2e-8);
            assert_relative_eq!(t.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(b.normal(s).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normal_points_outward() {
        let b = Boundary::ellipse(0.5).unwrap();
        for i in 0..11 {
            let s = b.perimeter() * i as f64 / 11.0;
            let p = b.point(s);
            let n = b.normal(s);
            // moving along +n must increase the ellipse quadratic form
            let q = |v: Vec2| v.x * v.x + v.y * v.y / (1.0 - 0.25);
            assert!(q(p + 1e-3 * n) > q(p));
        }
    }

    #[test]
    fn constant_inward_deformation_moves_points_inward() {
        let base = Ellipse::new(0.5).unwrap();
        let field = DeformationField { pieces: vec![Piece::Constant { value: -0.01 }] };
        let plain = Boundary::ellipse(0.5).unwrap();
        let b = Boundary::deformed(base, field).unwrap();
        for i in 0..9 {
            let s = plain.perimeter() * i as f64 / 9.0;
            let expect = plain.point(s) - 0.01 * plain.normal(s);
            let got = b.point(s);
            assert_relative_eq!((expect - got).norm(), 0.0, epsilon = 1e-12);
        }
        assert!(b.perimeter() < plain.perimeter());
    }

    #[test]
    fn zero_field_changes_nothing() {
        let base = Ellipse::new(0.37).unwrap();
        let plain = Boundary::ellipse(0.37).unwrap();
        let b = Boundary::deformed(base, DeformationField::empty()).unwrap();
        for i in 0..23 {
            let s = plain.perimeter() * i as f64 / 23.0;
            assert_eq!(plain.point(s), b.point(s));
            assert_eq!(plain.curvature(s), b.curvature(s));
        }
        assert_eq!(plain.perimeter(), b.perimeter());
    }

    #[test]
    fn curve_jets_match_finite_differences() {
        let base = Ellipse::new(0.6).unwrap();
        let ell = base.perimeter();
        let field = DeformationField {
            pieces: vec![Piece::CubicJet {
                s1: 1.0,
                a2: 0.02,
                a3: 0.05,
                shelf: 0.001,
                r_core: 0.2,
                r_mid: 0.35,
                r_hold: 0.5,
                r_end: 0.7,
            }],
        };
        let b = Boundary::deformed(base, field).unwrap();
        let h = 1e-5;
        for i in 0..40 {
            let s = ell * i as f64 / 40.0;
            let j = b.jet(s);
            let fd1 = (b.point(s + h) - b.point(s - h)) / (2.0 * h);
            let fd2 = (b.point(s + h) - 2.0 * b.point(s) + b.point(s - h)) / (h * h);
            let h3 = 1e-3;
            let fd3 = (b.point(s + 2.0 * h3) - 2.0 * b.point(s + h3) + 2.0 * b.point(s - h3)
                - b.point(s - 2.0 * h3))
                / (2.0 * h3 * h3 * h3);
            assert_relative_eq!((j.d1 - fd1).norm(), 0.0, epsilon = 5e-9);
            assert_relative_eq!((j.d2 - fd2).norm(), 0.0, epsilon = 5e-5);
            let d3_tol = 5e-3 * (1.0 + j.d3.norm());
            assert!((j.d3 - fd3).norm() < d3_tol, "d3 mismatch {} at s = {s}", (j.d3 - fd3).norm());
        }
    }

    #[test]
    fn deformed_curvature_against_finite_differences() {
        let base = Ellipse::new(0.45).unwrap();
        let field = DeformationField {
            pieces: vec![Piece::ProbeJet { s1: 2.0, a2: -0.03, a3: 0.1, r_core: 0.15, r_end: 0.5 }],
        };
        let b = Boundary::deformed(base, field).unwrap();
        let h = 1e-4;
        for i in 0..60 {
            let s = b.base_perimeter() * i as f64 / 60.0;
            let p = |s: f64| b.point(s);
            let d1 = (p(s + h) - p(s - h)) / (2.0 * h);
            let d2 = (p(s + h) - 2.0 * p(s) + p(s - h)) / (h * h);
            let fd_kappa = (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3);
            assert_relative_eq!(b.curvature(s), fd_kappa, max_relative = 1e-6, epsilon = 1e-6);
        }
    }

    #[test]
    fn total_turning_is_one() {
        for &e in &[0.0, 0.5, 0.9] {
            let b = Boundary::ellipse(e).unwrap();
            assert_relative_eq!(b.turning_number(), 1.0, epsilon = 1e-8);
        }
        let base = Ellipse::new(0.4).unwrap();
        let field = DeformationField {
            pieces: vec![Piece::Plateau { iota: 1e-3, collars: vec![(1.0, 0.2, 0.5)], homothety: None }],
        };
        let b = Boundary::deformed(base, field).unwrap();
        assert_relative_eq!(b.turning_number(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn perimeter_dual_quadratures_agree() {
        let base = Ellipse::new(0.5).unwrap();
        let field = DeformationField {
            pieces: vec![Piece::Plateau { iota: 5e-4, collars: vec![(2.0, 0.3, 0.6)], homothety: None }],
        };
        let b = Boundary::deformed(base, field).unwrap();
        let (p1, p2) = b.perimeter_dual_check(1e-11);
        assert_relative_eq!(p1, p2, max_relative = 1e-10);
    }

    #[test]
    fn confocal_classification() {
        // e = 0, lambda = sin(pi/4): circle caustic of radius cos(pi/4)
        let c = confocal_conic(0.0, (PI / 4.0).sin()).unwrap();
        assert_eq!(c.kind, ConicKind::Elliptic);
        assert_relative_eq!(c.k, 0.0, epsilon = 1e-15);
        // elliptic caustic semiaxes: sqrt(1-lambda^2) both (circle)
        let r = (1.0 - c.lambda * c.lambda).sqrt();
        assert_relative_eq!(r, (PI / 4.0).cos(), epsilon = 1e-12);
        // e = 0.6, lambda = 0.9: hyperbolic since 0.81 > 0.64
        let c = confocal_conic(0.6, 0.9).unwrap();
        assert_eq!(c.kind, ConicKind::Hyperbolic);
        assert_eq!(confocal_conic(0.6, 0.5).unwrap().kind, ConicKind::Elliptic);
        // lambda^2 = 1 - e^2 is the separatrix
        assert!(confocal_conic(0.6, (1.0f64 - 0.36).sqrt()).is_err());
    }

    #[test]
    fn phi_arclength_round_trip() {
        let e = Ellipse::new(0.77).unwrap();
        for i in 0..50 {
            let s = e.perimeter() * i as f64 / 50.0;
            let phi = e.phi_of_arclength(s);
            assert_relative_eq!(e.arclength_of_phi(phi), s, epsilon = 1e-11);
        }
    }
}
