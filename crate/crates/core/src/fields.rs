//! Closed-form coefficient fields and domain geometry.
//!
//! Operators and set-valued maps depend on spatial data — a scalar right-hand
//! side `f(x)`, a matrix coefficient `a(x)` or shift `M(x)`, boundary data
//! `φ(x)` — and the semicontinuity checks in this crate need more than point
//! values: they need an explicit modulus of continuity. Black-box closures
//! cannot provide one, so coefficients are small closed-form descriptors
//! ([`ScalarField`], [`MatrixField`]) that evaluate pointwise *and* report a
//! Lipschitz bound over a stated radius.
//!
//! The same reasoning applies to domains: the solver and the boundary
//! machinery need a defining function `ρ` with gradient and Hessian, interior
//! tests, boundary sampling, and projection — so [`Domain`] is a closed
//! catalog of shapes rather than an arbitrary predicate.

use serde::{Deserialize, Serialize};

use crate::symcore::SymMat;
use crate::{Error, Result};

/// Dot product of two equal-length slices (callers guarantee lengths).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance.
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A scalar coefficient field `x ↦ f(x)` with a computable Lipschitz bound.
///
/// The catalog covers what the operator families use: constants, affine
/// functions, quadratics, the Euclidean norm, and a piecewise-linear table in
/// one coordinate. Each variant knows its own modulus of continuity, which is
/// what the uniform-continuity checks consume.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    /// `f(x) = value`.
    Constant { value: f64 },
    /// `f(x) = coeffs·x + intercept`.
    Linear { coeffs: Vec<f64>, intercept: f64 },
    /// `f(x) = ½ xᵀ Q x + linear·x + constant`.
    Quadratic {
        q: SymMat,
        linear: Vec<f64>,
        constant: f64,
    },
    /// `f(x) = scale·|x| + offset` (Euclidean norm).
    Norm { scale: f64, offset: f64 },
    /// Piecewise-linear interpolation of `(xs, ys)` in coordinate `axis`,
    /// extended constantly outside the table range.
    Table1d {
        axis: usize,
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

impl ScalarField {
    /// Constant field.
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    /// Evaluates the field at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalarField::Constant { value } => Ok(*value),
            ScalarField::Linear { coeffs, intercept } => {
                if coeffs.len() != x.len() {
                    return Err(Error::Dimension(format!(
                        "linear field expects {} coordinates, got {}",
                        coeffs.len(),
                        x.len()
                    )));
                }
                Ok(dot(coeffs, x) + intercept)
            }
            ScalarField::Quadratic {
                q,
                linear,
                constant,
            } => {
                if q.dim() != x.len() || linear.len() != x.len() {
                    return Err(Error::Dimension(format!(
                        "quadratic field expects {} coordinates, got {}",
                        q.dim(),
                        x.len()
                    )));
                }
                Ok(0.5 * q.quad_form(x)? + dot(linear, x) + constant)
            }
            ScalarField::Norm { scale, offset } => Ok(scale * norm2(x) + offset),
            ScalarField::Table1d { axis, xs, ys } => {
                if *axis >= x.len() {
                    return Err(Error::Dimension(format!(
                        "table field axis {axis} out of range for {} coordinates",
                        x.len()
                    )));
                }
                if xs.len() != ys.len() || xs.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "table field needs at least two matching knots".into(),
                    ));
                }
                let t = x[*axis];
                if t <= xs[0] {
                    return Ok(ys[0]);
                }
                if t >= xs[xs.len() - 1] {
                    return Ok(ys[ys.len() - 1]);
                }
                // Knots are few; a linear scan is simplest and branch-free
                // enough for the sizes the catalog uses.
                let mut i = 0;
                while xs[i + 1] < t {
                    i += 1;
                }
                let w = (t - xs[i]) / (xs[i + 1] - xs[i]);
                Ok(ys[i] + w * (ys[i + 1] - ys[i]))
            }
        }
    }

    /// A Lipschitz constant valid on `{|x| ≤ radius}`.
    ///
    /// This is the declared modulus of continuity: `|f(x) − f(y)| ≤ L·|x−y|`
    /// for `x, y` in the stated ball. For quadratics the bound grows with
    /// the radius; the other variants are globally Lipschitz.
    pub fn lipschitz(&self, radius: f64) -> f64 {
        match self {
            ScalarField::Constant { .. } => 0.0,
            ScalarField::Linear { coeffs, .. } => norm2(coeffs),
            ScalarField::Quadratic { q, linear, .. } => {
                q.opnorm() * radius.abs() + norm2(linear)
            }
            ScalarField::Norm { scale, .. } => scale.abs(),
            ScalarField::Table1d { xs, ys, .. } => {
                let mut l: f64 = 0.0;
                for i in 1..xs.len().min(ys.len()) {
                    let dx = xs[i] - xs[i - 1];
                    if dx > 0.0 {
                        l = l.max(((ys[i] - ys[i - 1]) / dx).abs());
                    }
                }
                l
            }
        }
    }

    /// Coordinate dimension required by the field, when it pins one.
    pub fn dim_hint(&self) -> Option<usize> {
        match self {
            ScalarField::Constant { .. } | ScalarField::Norm { .. } => None,
            ScalarField::Linear { coeffs, .. } => Some(coeffs.len()),
            ScalarField::Quadratic { q, .. } => Some(q.dim()),
            ScalarField::Table1d { axis, .. } => Some(axis + 1),
        }
    }
}

/// A symmetric-matrix coefficient field `x ↦ M(x)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixField {
    /// `M(x) = m` for all `x`.
    Constant { m: SymMat },
    /// Diagonal matrix whose `i`-th diagonal entry is `entries[i](x)`.
    DiagOfScalars { entries: Vec<ScalarField> },
}

impl MatrixField {
    /// Constant field.
    pub fn constant(m: SymMat) -> Self {
        MatrixField::Constant { m }
    }

    /// Matrix dimension produced by the field.
    pub fn dim(&self) -> usize {
        match self {
            MatrixField::Constant { m } => m.dim(),
            MatrixField::DiagOfScalars { entries } => entries.len(),
        }
    }

    /// Evaluates the field at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<SymMat> {
        match self {
            MatrixField::Constant { m } => Ok(*m),
            MatrixField::DiagOfScalars { entries } => {
                let d: Result<Vec<f64>> = entries.iter().map(|f| f.eval(x)).collect();
                SymMat::diag(&d?)
            }
        }
    }

    /// A Lipschitz constant for `x ↦ M(x)` in operator norm on
    /// `{|x| ≤ radius}`.
    pub fn lipschitz(&self, radius: f64) -> f64 {
        match self {
            MatrixField::Constant { .. } => 0.0,
            MatrixField::DiagOfScalars { entries } => entries
                .iter()
                .map(|f| f.lipschitz(radius))
                .fold(0.0, f64::max),
        }
    }
}

/// A bounded open domain `Ω ⊂ ℝᴺ` given by a defining function `ρ`
/// (`ρ < 0` inside, `ρ = 0` on the boundary, `Dρ ≠ 0` at the boundary
/// wherever `ρ` is smooth).
///
/// The box and annulus defining functions are piecewise smooth; gradient and
/// Hessian queries return an error exactly on the non-smooth ties (box edges,
/// the annulus mid-circle), which have measure zero and never coincide with
/// boundary points of interest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    /// Axis-aligned open box `(lo₁,hi₁) × … × (lo_N,hi_N)`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Open ellipsoid `Σ ((xᵢ−cᵢ)/aᵢ)² < 1` with semi-axes `aᵢ`.
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    /// Open annulus `r_inner < |x − c| < r_outer`.
    Annulus {
        center: Vec<f64>,
        r_inner: f64,
        r_outer: f64,
    },
}

impl Domain {
    /// Unit ball centered at the origin.
    pub fn unit_ball(n: usize) -> Self {
        Domain::Ball {
            center: vec![0.0; n],
            radius: 1.0,
        }
    }

    /// Unit box `(0,1)ᴺ`.
    pub fn unit_box(n: usize) -> Self {
        Domain::Box {
            lo: vec![0.0; n],
            hi: vec![1.0; n],
        }
    }

    /// Validates shape parameters; call once when a domain enters from
    /// config or construction.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("domain: {msg}")));
        match self {
            Domain::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("box corners must be nonempty and equal length");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("box needs lo < hi on every axis");
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() {
                    return bad("ball center must be nonempty");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("ball radius must be positive");
                }
            }
            Domain::Ellipsoid { center, semi_axes } => {
                if center.is_empty() || center.len() != semi_axes.len() {
                    return bad("ellipsoid center/semi-axes must match and be nonempty");
                }
                if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return bad("ellipsoid semi-axes must be positive");
                }
            }
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                if center.is_empty() {
                    return bad("annulus center must be nonempty");
                }
                if !(0.0 < *r_inner && r_inner < r_outer && r_outer.is_finite()) {
                    return bad("annulus needs 0 < r_inner < r_outer");
                }
            }
        }
        Ok(())
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::Ellipsoid { center, .. } => center.len(),
            Domain::Annulus { center, .. } => center.len(),
        }
    }

    /// Defining function value at `x` (negative inside, zero on `∂Ω`).
    pub fn rho(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box { lo, hi } => {
                // Signed ∞-norm-style distance to the box faces.
                let mut m = f64::NEG_INFINITY;
                for i in 0..lo.len() {
                    m = m.max(lo[i] - x[i]).max(x[i] - hi[i]);
                }
                m
            }
            Domain::Ball { center, radius } => {
                let r2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                0.5 * (r2 - radius * radius)
            }
            Domain::Ellipsoid { center, semi_axes } => {
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((a, c), ax)| ((a - c) / ax) * ((a - c) / ax))
                    .sum();
                0.5 * (s - 1.0)
            }
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                let outer = 0.5 * (r2 - r_outer * r_outer);
                let inner = 0.5 * (r_inner * r_inner - r2);
                outer.max(inner)
            }
        }
    }

    /// Strict interior test, `ρ(x) < 0`.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        self.rho(x) < 0.0
    }

    /// Closure membership up to `tol` on `ρ`.
    pub fn contains_closure(&self, x: &[f64], tol: f64) -> bool {
        self.rho(x) <= tol
    }

    /// Gradient of the defining function.
    ///
    /// # Errors
    ///
    /// Box and annulus defining functions are piecewise; exactly on a tie
    /// between pieces the gradient is ambiguous and an error is returned.
    pub fn rho_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Domain::Box { lo, hi } => {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0usize;
                let mut sign = 1.0;
                let mut tie = false;
                for i in 0..lo.len() {
                    for (v, s) in [(lo[i] - x[i], -1.0), (x[i] - hi[i], 1.0)] {
                        if v > best + 1e-12 {
                            best = v;
                            arg = i;
                            sign = s;
                            tie = false;
                        } else if (v - best).abs() <= 1e-12 && (arg != i || s != sign) {
                            tie = true;
                        }
                    }
                }
                if tie {
                    return Err(Error::InvalidParameter(
                        "box defining function is not differentiable on edge ties".into(),
                    ));
                }
                let mut g = vec![0.0; lo.len()];
                g[arg] = sign;
                Ok(g)
            }
            Domain::Ball { center, .. } => {
                Ok(x.iter().zip(center).map(|(a, c)| a - c).collect())
            }
            Domain::Ellipsoid { center, semi_axes } => Ok(x
                .iter()
                .zip(center)
                .zip(semi_axes)
                .map(|((a, c), ax)| (a - c) / (ax * ax))
                .collect()),
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                let outer = 0.5 * (r2 - r_outer * r_outer);
                let inner = 0.5 * (r_inner * r_inner - r2);
                if (outer - inner).abs() <= 1e-12 {
                    return Err(Error::InvalidParameter(
                        "annulus defining function is not differentiable on the mid-circle"
                            .into(),
                    ));
                }
                let s = if outer > inner { 1.0 } else { -1.0 };
                Ok(x.iter().zip(center).map(|(a, c)| s * (a - c)).collect())
            }
        }
    }

    /// Hessian of the defining function (piecewise-constant for the catalog
    /// shapes; same tie errors as [`Domain::rho_grad`]).
    pub fn rho_hessian(&self, x: &[f64]) -> Result<SymMat> {
        let n = self.dim();
        match self {
            Domain::Box { .. } => {
                // Validate smoothness at x, then the Hessian of a linear
                // piece is zero.
                self.rho_grad(x)?;
                SymMat::zero(n)
            }
            Domain::Ball { .. } => SymMat::identity(n),
            Domain::Ellipsoid { semi_axes, .. } => {
                let d: Vec<f64> = semi_axes.iter().map(|a| 1.0 / (a * a)).collect();
                SymMat::diag(&d)
            }
            Domain::Annulus { .. } => {
                let g = self.rho_grad(x)?;
                // Active piece has Hessian ±I; recover the sign from the
                // gradient's radial orientation.
                let c = match self {
                    Domain::Annulus { center, .. } => center.clone(),
                    _ => unreachable!(),
                };
                let radial: Vec<f64> = x.iter().zip(&c).map(|(a, cc)| a - cc).collect();
                let s = if dot(&g, &radial) >= 0.0 { 1.0 } else { -1.0 };
                Ok(SymMat::identity(n)?.scale(s))
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the closure.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Ellipsoid { center, semi_axes } => (
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            ),
            Domain::Annulus {
                center, r_outer, ..
            } => (
                center.iter().map(|c| c - r_outer).collect(),
                center.iter().map(|c| c + r_outer).collect(),
            ),
        }
    }

    /// Diameter in the ∞-norm — the scale used by search grids over
    /// point-pair separations.
    pub fn diameter_inf(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    }

    /// A deterministic interior anchor (the center, or the box midpoint; for
    /// the annulus, a point on the mid-circle).
    pub fn anchor(&self) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Domain::Ball { center, .. } | Domain::Ellipsoid { center, .. } => center.clone(),
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let mut p = center.clone();
                p[0] += 0.5 * (r_inner + r_outer);
                p
            }
        }
    }

    /// Euclidean projection of `p` onto `∂Ω` for the shapes where it is
    /// closed-form (box: clamp to the nearest face; ball and annulus:
    /// radial). For ellipsoids the radial point on `∂Ω` is used — exact for
    /// balls, and within the boundary-layer tolerance of the grid machinery
    /// for moderate eccentricity.
    pub fn project_to_boundary(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Domain::Box { lo, hi } => {
                let mut q: Vec<f64> = p
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (a, b))| v.clamp(*a, *b))
                    .collect();
                if self.rho(&q) < 0.0 {
                    // p was inside: push the coordinate closest to a face
                    // onto that face.
                    let mut best = f64::INFINITY;
                    let mut arg = (0usize, 0.0f64);
                    for i in 0..lo.len() {
                        if q[i] - lo[i] < best {
                            best = q[i] - lo[i];
                            arg = (i, lo[i]);
                        }
                        if hi[i] - q[i] < best {
                            best = hi[i] - q[i];
                            arg = (i, hi[i]);
                        }
                    }
                    q[arg.0] = arg.1;
                }
                q
            }
            Domain::Ball { center, radius } => radial_point(center, p, *radius),
            Domain::Ellipsoid { center, semi_axes } => {
                let d: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
                let s: f64 = d
                    .iter()
                    .zip(semi_axes)
                    .map(|(v, a)| (v / a) * (v / a))
                    .sum::<f64>()
                    .sqrt();
                if s <= 1e-30 {
                    let mut q = center.clone();
                    q[0] += semi_axes[0];
                    return q;
                }
                center.iter().zip(&d).map(|(c, v)| c + v / s).collect()
            }
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let r = dist2(p, center);
                let target = if r <= 0.5 * (r_inner + r_outer) {
                    *r_inner
                } else {
                    *r_outer
                };
                radial_point(center, p, target)
            }
        }
    }

    /// `count` deterministic boundary points, spread over `∂Ω`.
    ///
    /// Two-dimensional shapes use uniform angular/perimeter spacing; higher
    /// dimensions use a golden-ratio lattice of directions. Deterministic by
    /// construction — the same call always yields the same points.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(count);
        match self {
            Domain::Box { lo, hi } => {
                // Walk the faces round-robin, sliding the on-face coordinates
                // through a golden-ratio sequence.
                let phi = 0.618_033_988_749_894_9_f64;
                for j in 0..count {
                    let face = j % (2 * n);
                    let axis = face / 2;
                    let side = face % 2;
                    let mut p = vec![0.0; n];
                    let mut t = (j as f64) * phi;
                    for i in 0..n {
                        if i == axis {
                            p[i] = if side == 0 { lo[i] } else { hi[i] };
                        } else {
                            t = (t + phi).fract();
                            p[i] = lo[i] + t * (hi[i] - lo[i]);
                        }
                    }
                    out.push(p);
                }
            }
            Domain::Ball { center, radius } => {
                for j in 0..count {
                    out.push(sphere_point(center, *radius, j, count));
                }
            }
            Domain::Ellipsoid { center, semi_axes } => {
                for j in 0..count {
                    let u = sphere_point(&vec![0.0; n], 1.0, j, count);
                    let p: Vec<f64> = center
                        .iter()
                        .zip(&u)
                        .zip(semi_axes)
                        .map(|((c, v), a)| c + a * v)
                        .collect();
                    out.push(p);
                }
            }
            Domain::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                // Alternate between the two circles.
                for j in 0..count {
                    let r = if j % 2 == 0 { *r_outer } else { *r_inner };
                    out.push(sphere_point(center, r, j / 2, count.div_ceil(2)));
                }
            }
        }
        out
    }
}

/// Point at distance `radius` from `center` along the ray through `p`
/// (falls back to the first axis when `p` coincides with the center).
fn radial_point(center: &[f64], p: &[f64], radius: f64) -> Vec<f64> {
    let d: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
    let r = norm2(&d);
    if r <= 1e-30 {
        let mut q = center.to_vec();
        q[0] += radius;
        return q;
    }
    center.iter().zip(&d).map(|(c, v)| c + radius * v / r).collect()
}

/// `j`-th of `count` well-spread points on the sphere of the given radius:
/// uniform angles in 2-D, a golden-spiral lattice in 3-D, and a golden-ratio
/// angle pair in 4-D.
fn sphere_point(center: &[f64], radius: f64, j: usize, count: usize) -> Vec<f64> {
    let n = center.len();
    let count = count.max(1);
    match n {
        1 => {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            vec![center[0] + s * radius]
        }
        2 => {
            let th = 2.0 * std::f64::consts::PI * (j as f64) / (count as f64);
            vec![
                center[0] + radius * th.cos(),
                center[1] + radius * th.sin(),
            ]
        }
        3 => {
            let phi = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            let z = 1.0 - 2.0 * ((j as f64) + 0.5) / (count as f64);
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = phi * (j as f64);
            vec![
                center[0] + radius * r * th.cos(),
                center[1] + radius * r * th.sin(),
                center[2] + radius * z,
            ]
        }
        _ => {
            // 4-D: torus-style angle pair from two golden-ratio sequences.
            let g1 = 0.618_033_988_749_894_9_f64;
            let g2 = 0.754_877_666_246_692_9_f64;
            let a = 2.0 * std::f64::consts::PI * ((j as f64) * g1).fract();
            let b = 2.0 * std::f64::consts::PI * ((j as f64) * g2).fract();
            let v = [
                a.cos() * b.cos(),
                a.cos() * b.sin(),
                a.sin() * b.cos(),
                a.sin() * b.sin(),
            ];
            let s = norm2(&v).max(1e-12);
            (0..n).map(|i| center[i] + radius * v[i] / s).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_fields_evaluate() {
        let f = ScalarField::constant(2.5);
        assert_eq!(f.eval(&[1.0, 2.0]).unwrap(), 2.5);
        assert_eq!(f.lipschitz(10.0), 0.0);

        let f = ScalarField::Linear {
            coeffs: vec![1.0, -2.0],
            intercept: 0.5,
        };
        assert_eq!(f.eval(&[1.0, 1.0]).unwrap(), -0.5);
        assert!((f.lipschitz(1.0) - 5.0_f64.sqrt()).abs() < 1e-15);

        let f = ScalarField::Norm {
            scale: 2.0,
            offset: 1.0,
        };
        assert_eq!(f.eval(&[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(f.lipschitz(100.0), 2.0);

        // ½ xᵀ [[0,1],[1,0]] x = x₁x₂.
        let f = ScalarField::Quadratic {
            q: SymMat::from_rows([[0.0, 1.0], [1.0, 0.0]]).unwrap(),
            linear: vec![0.0, 0.0],
            constant: 0.0,
        };
        assert_eq!(f.eval(&[2.0, 3.0]).unwrap(), 6.0);

        let f = ScalarField::Table1d {
            axis: 0,
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 2.0, 1.0],
        };
        assert_eq!(f.eval(&[0.5, 9.0]).unwrap(), 1.0);
        assert_eq!(f.eval(&[5.0, 9.0]).unwrap(), 1.0);
        assert_eq!(f.lipschitz(1.0), 2.0);
    }

    #[test]
    fn matrix_fields_evaluate() {
        let m = MatrixField::DiagOfScalars {
            entries: vec![
                ScalarField::Norm {
                    scale: 1.0,
                    offset: 0.0,
                },
                ScalarField::constant(0.0),
            ],
        };
        let at = m.eval(&[0.3, 0.4]).unwrap();
        assert!((at.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(at.get(1, 1), 0.0);
        assert_eq!(m.lipschitz(1.0), 1.0);
    }

    #[test]
    fn ball_geometry() {
        let d = Domain::unit_ball(2);
        d.validate().unwrap();
        assert!(d.is_interior(&[0.5, 0.0]));
        assert!(!d.is_interior(&[1.0, 0.0]));
        assert!((d.rho(&[1.0, 0.0])).abs() < 1e-15);
        assert_eq!(d.rho_grad(&[0.3, -0.4]).unwrap(), vec![0.3, -0.4]);
        let h = d.rho_hessian(&[0.3, -0.4]).unwrap();
        assert_eq!(h.get(0, 0), 1.0);
        assert_eq!(h.get(0, 1), 0.0);
        let p = d.project_to_boundary(&[0.2, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert_eq!(d.diameter_inf(), 2.0);
    }

    #[test]
    fn box_geometry() {
        let d = Domain::unit_box(2);
        d.validate().unwrap();
        assert!(d.is_interior(&[0.5, 0.5]));
        assert!(!d.is_interior(&[0.5, 1.0]));
        assert_eq!(d.rho(&[0.5, 1.25]), 0.25);
        assert_eq!(d.rho_grad(&[0.5, 0.9]).unwrap(), vec![0.0, 1.0]);
        // Clamping projects exterior points onto the nearest face.
        assert_eq!(d.project_to_boundary(&[0.5, 1.25]), vec![0.5, 1.0]);
        // Interior points move to the closest face.
        assert_eq!(d.project_to_boundary(&[0.1, 0.5]), vec![0.0, 0.5]);
        assert_eq!(d.diameter_inf(), 1.0);
    }

    #[test]
    fn annulus_geometry() {
        let d = Domain::Annulus {
            center: vec![0.0, 0.0],
            r_inner: 1.0,
            r_outer: 2.0,
        };
        d.validate().unwrap();
        assert!(d.is_interior(&[1.5, 0.0]));
        assert!(!d.is_interior(&[0.5, 0.0]));
        assert!(!d.is_interior(&[2.5, 0.0]));
        // Inner-boundary defining piece curves away from the annulus.
        let h = d.rho_hessian(&[1.0 + 1e-6, 0.0]).unwrap();
        assert_eq!(h.get(0, 0), -1.0);
        let p = d.project_to_boundary(&[0.9, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_samples_lie_on_boundary() {
        for d in [
            Domain::unit_ball(2),
            Domain::unit_box(2),
            Domain::Ellipsoid {
                center: vec![0.0, 0.0],
                semi_axes: vec![2.0, 1.0],
            },
            Domain::Annulus {
                center: vec![0.0, 0.0],
                r_inner: 1.0,
                r_outer: 2.0,
            },
        ] {
            for p in d.boundary_samples(17) {
                assert!(
                    d.rho(&p).abs() < 1e-9,
                    "sample {p:?} not on boundary of {d:?}"
                );
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let f = ScalarField::Norm {
            scale: 1.0,
            offset: -0.25,
        };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(f, serde_json::from_str(&s).unwrap());

        let d = Domain::Ellipsoid {
            center: vec![0.0, 1.0],
            semi_axes: vec![2.0, 0.5],
        };
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(d, serde_json::from_str(&s).unwrap());
    }
}
