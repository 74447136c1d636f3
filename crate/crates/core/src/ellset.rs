//! Closed matrix sets stable under positive perturbation, their duals and
//! asymptotic cones, and set-valued maps over a spatial domain.
//!
//! The central type is [`EllipticSetSpec`]: a *tagged* description of a
//! closed set `Θ ⊂ S(N)` that is nonempty, proper, and satisfies the
//! positivity property `Θ + {P ⪰ 0} ⊆ Θ`. Sets are closed-form tags rather
//! than black-box predicates because duality is a topological operation:
//! interiors and complements of an opaque predicate cannot be certified,
//! while the catalog kinds admit either exact duals or margin-operated ones.
//!
//! Numerical conventions:
//! * membership is tested up to the spec's tolerance `tol` (default
//!   [`crate::DEFAULT_TOL`]);
//! * interiority is witnessed by an explicit margin: `A − ε·I ∈ Θ` certifies
//!   that `A` lies in the interior with clearance `ε`, by positivity;
//! * the dual set `Θ̃ = [−Θ°]ᶜ` is tested through that margin —
//!   `A ∈ Θ̃` iff `−A` is *not* ε-deep inside `Θ`;
//! * each spec stores two shift witnesses on the identity ray: `t·I ∈ Θ`
//!   for all `t ≥ nonempty_shift`, and `−t·I ∉ Θ` for all
//!   `t ≥ proper_shift` (absent exactly for the constraint-only
//!   [`SetKind::Full`], which is not a proper set).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::branches::OperatorSpec;
use crate::fields::{dist2, dot, norm2, Domain, MatrixField, ScalarField};
use crate::symcore::SymMat;
use crate::{Error, Result, DEFAULT_TOL};

/// Seeded deterministic generator used by every sampler in the crate.
/// Identical seeds give identical sample streams, and a prefix of a longer
/// run equals a shorter run — estimates grow monotonically in sample count.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random symmetric matrix with entries uniform in `[−scale, scale]`
/// (symmetrized on construction).
pub fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Result<SymMat> {
    let mut flat = vec![0.0; n * n];
    for v in flat.iter_mut() {
        *v = rng.gen_range(-1.0..=1.0) * scale;
    }
    SymMat::from_flat(n, &flat)
}

/// Random positive semidefinite matrix `R diag(u) Rᵀ` with `u` uniform in
/// `[0, scale]`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Result<SymMat> {
    let frame = random_rotation(rng, n);
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=scale)).collect();
    rotate_diag(&frame, &d)
}

/// Standard Gaussian sample via Box–Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen_range(0.0..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        if u1 > 1e-300 {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Uniform random unit vector.
pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let r = norm2(&v);
        if r > 1e-9 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// Random orthonormal frame (rows are the frame vectors), by Gram–Schmidt
/// on Gaussian draws.
pub fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        for r in &rows {
            let c = dot(&v, r);
            for i in 0..n {
                v[i] -= c * r[i];
            }
        }
        let nr = norm2(&v);
        if nr > 1e-9 {
            rows.push(v.iter().map(|x| x / nr).collect());
        }
    }
    rows
}

/// Builds `Σ dᵢ vᵢvᵢᵀ` from an orthonormal frame and eigenvalues.
pub fn rotate_diag(frame: &[Vec<f64>], d: &[f64]) -> Result<SymMat> {
    let n = d.len();
    let mut flat = vec![0.0; n * n];
    for (k, v) in frame.iter().enumerate().take(n) {
        for i in 0..n {
            for j in 0..n {
                flat[i * n + j] += d[k] * v[i] * v[j];
            }
        }
    }
    SymMat::from_flat(n, &flat)
}

/// Uniform sample from the closure of `Ω` by rejection from the bounding
/// box.
pub fn sample_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let (lo, hi) = domain.bounding_box();
    for _ in 0..10_000 {
        let p: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| rng.gen_range(*a..=*b))
            .collect();
        if domain.contains_closure(&p, 0.0) {
            return Ok(p);
        }
    }
    Err(Error::SamplerExhausted(
        "could not draw a point inside the domain (degenerate shape?)".into(),
    ))
}

/// The tag describing which closed set a spec denotes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "set", rename_all = "snake_case")]
pub enum SetKind {
    /// Positive semidefinite cone `{λ₁(A) ≥ 0}`.
    Psd,
    /// Its dual `{λ_N(A) ≥ 0}` — matrices with at least one nonnegative
    /// eigenvalue direction.
    DualPsd,
    /// `{λ_k(A) ≥ 0}` (eigenvalues ascending, `k` one-based).
    Pk { k: usize },
    /// Half-space `{A : tr(aA) ≥ c}` with `a ⪰ 0`, `tr(a) > 0`.
    HalfSpaceLinear { a: SymMat, c: f64 },
    /// `base + offset` (Minkowski translate by a single matrix).
    Translate {
        base: Box<EllipticSetSpec>,
        offset: SymMat,
    },
    /// Intersection of two specs (the zero-superlevel set of a min of two
    /// operators has this shape).
    Truncated {
        first: Box<EllipticSetSpec>,
        second: Box<EllipticSetSpec>,
    },
    /// `{A ∈ Φ : F(x, A) ≥ 0}` at a frozen spatial point `x`.
    SublevelBranch {
        op: Box<OperatorSpec>,
        phi: Box<EllipticSetSpec>,
        x: Vec<f64>,
    },
    /// Margin-operated dual of an arbitrary base spec: `A` belongs iff `−A`
    /// is not `margin`-deep inside the base. Exact duals exist for the
    /// catalog kinds; this wrapper covers the rest.
    DualOf {
        base: Box<EllipticSetSpec>,
        margin: f64,
    },
    /// All of `S(N)`. Constraint-only: not a proper set, usable as the
    /// admissibility constraint `Φ` of a branch but not as a branch itself.
    Full,
}

/// A closed, positively-stable matrix set with membership tolerance and
/// stored shift witnesses. See the module docs for the conventions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EllipticSetSpec {
    /// Matrix dimension `N`.
    pub n: usize,
    /// Which set this is.
    pub kind: SetKind,
    /// Membership tolerance.
    pub tol: f64,
    /// `t·I` belongs for every `t ≥ shift_in`.
    shift_in: f64,
    /// `−t·I` is outside for every `t ≥ shift_out`; `None` for
    /// constraint-only kinds (no properness).
    shift_out: Option<f64>,
}

impl EllipticSetSpec {
    /// The positive semidefinite cone in `S(N)`.
    pub fn psd(n: usize) -> Result<Self> {
        SymMat::zero(n)?; // validates n
        Ok(EllipticSetSpec {
            n,
            kind: SetKind::Psd,
            tol: DEFAULT_TOL,
            shift_in: 0.0,
            shift_out: Some(proper_eps(DEFAULT_TOL)),
        })
    }

    /// The dual cone `{λ_N ≥ 0}`.
    pub fn dual_psd(n: usize) -> Result<Self> {
        SymMat::zero(n)?;
        Ok(EllipticSetSpec {
            n,
            kind: SetKind::DualPsd,
            tol: DEFAULT_TOL,
            shift_in: 0.0,
            shift_out: Some(proper_eps(DEFAULT_TOL)),
        })
    }

    /// `{λ_k ≥ 0}`, `k` one-based in ascending eigenvalue order.
    pub fn pk(n: usize, k: usize) -> Result<Self> {
        SymMat::zero(n)?;
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue family index k must be 1..={n}, got {k}"
            )));
        }
        Ok(EllipticSetSpec {
            n,
            kind: SetKind::Pk { k },
            tol: DEFAULT_TOL,
            shift_in: 0.0,
            shift_out: Some(proper_eps(DEFAULT_TOL)),
        })
    }

    /// Half-space `{A : tr(aA) ≥ c}`. Requires `a ⪰ 0` (so the set is
    /// stable under positive perturbations) and `tr(a) > 0` (so it is
    /// proper).
    pub fn half_space(a: SymMat, c: f64) -> Result<Self> {
        let n = a.dim();
        if a.lambda_min() < -1e-12 {
            return Err(Error::InvalidParameter(
                "half-space coefficient must be positive semidefinite".into(),
            ));
        }
        let tr = a.trace();
        if tr <= 1e-12 {
            return Err(Error::InvalidParameter(
                "half-space coefficient must have positive trace".into(),
            ));
        }
        if !c.is_finite() {
            return Err(Error::NonFinite("half-space offset".into()));
        }
        let tol = DEFAULT_TOL;
        Ok(EllipticSetSpec {
            n,
            kind: SetKind::HalfSpaceLinear { a, c },
            tol,
            shift_in: c / tr,
            shift_out: Some((-c + 2.0 * tol) / tr + 1e-12),
        })
    }

    /// `base + offset`.
    pub fn translate(base: EllipticSetSpec, offset: SymMat) -> Result<Self> {
        if base.n != offset.dim() {
            return Err(Error::Dimension(format!(
                "translate offset dimension {} vs set dimension {}",
                offset.dim(),
                base.n
            )));
        }
        let ev = offset.eigs();
        let lam_min = ev.values()[0];
        let lam_max = ev.values()[base.n - 1];
        Ok(EllipticSetSpec {
            n: base.n,
            tol: base.tol,
            shift_in: base.shift_in + lam_max,
            shift_out: base.shift_out.map(|s| s - lam_min),
            kind: SetKind::Translate {
                base: Box::new(base),
                offset,
            },
        })
    }

    /// Intersection of two specs.
    pub fn truncated(first: EllipticSetSpec, second: EllipticSetSpec) -> Result<Self> {
        if first.n != second.n {
            return Err(Error::Dimension(format!(
                "intersection of sets with dimensions {} and {}",
                first.n, second.n
            )));
        }
        let shift_in = first.shift_in.max(second.shift_in);
        let shift_out = match (first.shift_out, second.shift_out) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };
        Ok(EllipticSetSpec {
            n: first.n,
            tol: first.tol.max(second.tol),
            shift_in,
            shift_out,
            kind: SetKind::Truncated {
                first: Box::new(first),
                second: Box::new(second),
            },
        })
    }

    /// `{A ∈ phi : F(x, A) ≥ 0}` at the frozen point `x`.
    ///
    /// Properness must be certifiable: either the constraint `phi` is proper,
    /// or the operator can certify that its values go negative along the
    /// `−t·I` ray at `x`. Otherwise the set may equal all of `S(N)` and
    /// construction is refused.
    pub fn sublevel(op: OperatorSpec, phi: EllipticSetSpec, x: Vec<f64>) -> Result<Self> {
        let n = phi.n;
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "branch point has {} coordinates for {n}×{n} matrices",
                x.len()
            )));
        }
        let zero_shift = op.zero_shift_witness(&x)?;
        let shift_in = phi.shift_in.max(zero_shift);
        let shift_out = match phi.shift_out {
            Some(s) => Some(s),
            None => op.neg_ray_exit(&x)?,
        };
        let shift_out = match shift_out {
            Some(s) => s,
            None => {
                return Err(Error::InvalidParameter(
                    "branch set cannot certify properness: unconstrained operator of even \
                     degree needs a positive-type constraint"
                        .into(),
                ))
            }
        };
        Ok(EllipticSetSpec {
            n,
            tol: phi.tol,
            shift_in,
            shift_out: Some(shift_out),
            kind: SetKind::SublevelBranch {
                op: Box::new(op),
                phi: Box::new(phi),
                x,
            },
        })
    }

    /// Margin-operated dual wrapper. Fails if the base cannot certify
    /// properness (the dual of a non-proper set is empty).
    pub fn dual_of(base: EllipticSetSpec, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter(
                "dual margin must be positive".into(),
            ));
        }
        let base_out = base.shift_out.ok_or_else(|| {
            Error::InvalidParameter(
                "dual of a constraint-only (non-proper) set would be empty".into(),
            )
        })?;
        Ok(EllipticSetSpec {
            n: base.n,
            tol: base.tol,
            shift_in: base_out - margin,
            shift_out: Some(base.shift_in + margin + 2.0 * base.tol + 1e-12),
            kind: SetKind::DualOf {
                base: Box::new(base),
                margin,
            },
        })
    }

    /// All of `S(N)` — constraint-only.
    pub fn full(n: usize) -> Result<Self> {
        SymMat::zero(n)?;
        Ok(EllipticSetSpec {
            n,
            kind: SetKind::Full,
            tol: DEFAULT_TOL,
            shift_in: 0.0,
            shift_out: None,
        })
    }

    /// Replaces the membership tolerance.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Matrix dimension `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `t·I` belongs for every `t` at or above this value.
    pub fn nonempty_shift(&self) -> f64 {
        self.shift_in
    }

    /// `−t·I` is outside for every `t` at or above this value; `None` for
    /// constraint-only kinds.
    pub fn proper_shift(&self) -> Option<f64> {
        self.shift_out
    }

    fn check_dim(&self, a: &SymMat) -> Result<()> {
        if a.dim() != self.n {
            return Err(Error::Dimension(format!(
                "matrix dimension {} vs set dimension {}",
                a.dim(),
                self.n
            )));
        }
        Ok(())
    }

    /// Membership up to the spec tolerance.
    pub fn contains(&self, a: &SymMat) -> Result<bool> {
        self.check_dim(a)?;
        match &self.kind {
            SetKind::Psd => Ok(a.lambda_min() >= -self.tol),
            SetKind::DualPsd => Ok(a.lambda_max() >= -self.tol),
            SetKind::Pk { k } => Ok(a.lambda_k(*k)? >= -self.tol),
            SetKind::HalfSpaceLinear { a: coeff, c } => {
                Ok(coeff.frobenius_dot(a)? >= c - self.tol)
            }
            SetKind::Translate { base, offset } => base.contains(&a.sub(offset)?),
            SetKind::Truncated { first, second } => {
                Ok(first.contains(a)? && second.contains(a)?)
            }
            SetKind::SublevelBranch { op, phi, x } => {
                if !phi.contains(a)? {
                    return Ok(false);
                }
                Ok(op.evaluate(x, a)? >= -self.tol)
            }
            SetKind::DualOf { base, margin } => Ok(!base.interior_contains(&a.neg(), *margin)?),
            SetKind::Full => Ok(true),
        }
    }

    /// Interiority with explicit clearance: true iff `A − eps·I` belongs.
    /// By positive stability this certifies that `A` is interior.
    pub fn interior_contains(&self, a: &SymMat, eps: f64) -> Result<bool> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(
                "interiority margin must be positive".into(),
            ));
        }
        self.contains(&a.add_scaled_identity(-eps))
    }

    /// Dual membership `A ∈ [−Θ°]ᶜ`, tested through the interiority margin:
    /// true iff `−A` is *not* `eps`-deep inside this set.
    pub fn dual_contains(&self, a: &SymMat, eps: f64) -> Result<bool> {
        Ok(!self.interior_contains(&a.neg(), eps)?)
    }

    /// One-sided surrogate for membership in the `eps`-neighborhood: true
    /// iff `A + eps·I` belongs. For positively-stable sets, every matrix
    /// within distance `eps` of the set satisfies this.
    pub fn enlarge_contains(&self, a: &SymMat, eps: f64) -> Result<bool> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(
                "enlargement radius must be positive".into(),
            ));
        }
        self.contains(&a.add_scaled_identity(eps))
    }

    /// Whether this kind has a closed-form dual.
    pub fn has_exact_dual(&self) -> bool {
        match &self.kind {
            SetKind::Psd
            | SetKind::DualPsd
            | SetKind::Pk { .. }
            | SetKind::HalfSpaceLinear { .. }
            | SetKind::DualOf { .. } => true,
            SetKind::Translate { base, .. } => base.has_exact_dual(),
            SetKind::Truncated { .. } | SetKind::SublevelBranch { .. } | SetKind::Full => false,
        }
    }

    /// The dual set `[−Θ°]ᶜ`.
    ///
    /// Catalog kinds get their closed forms (the dual of the PSD cone is
    /// `{λ_N ≥ 0}`, eigenvalue families map `k ↦ N−k+1`, translates flip
    /// sign, half-spaces negate the offset, and the dual of a margin-dual is
    /// its base by reflexivity). Everything else is wrapped in the
    /// margin-operated [`SetKind::DualOf`].
    pub fn dual(&self, margin: f64) -> Result<EllipticSetSpec> {
        match &self.kind {
            SetKind::Psd => EllipticSetSpec::dual_psd(self.n).map(|s| s.with_tol(self.tol)),
            SetKind::DualPsd => EllipticSetSpec::psd(self.n).map(|s| s.with_tol(self.tol)),
            SetKind::Pk { k } => {
                EllipticSetSpec::pk(self.n, self.n - k + 1).map(|s| s.with_tol(self.tol))
            }
            SetKind::HalfSpaceLinear { a, c } => {
                EllipticSetSpec::half_space(*a, -c).map(|s| s.with_tol(self.tol))
            }
            SetKind::Translate { base, offset } => {
                EllipticSetSpec::translate(base.dual(margin)?, offset.neg())
            }
            SetKind::DualOf { base, .. } => Ok((**base).clone()),
            SetKind::Truncated { .. } | SetKind::SublevelBranch { .. } | SetKind::Full => {
                EllipticSetSpec::dual_of(self.clone(), margin)
            }
        }
    }

    /// Operator-norm distance from `A` to the set.
    ///
    /// For positively-stable sets this equals the minimal `t ≥ 0` with
    /// `A + t·I` in the set: any nearer member `B` gives `A − B ⪰ −d·I`, so
    /// `A + d·I = B + (A − B + d·I)` is again a member. Closed forms cover
    /// the spectral kinds; the rest bisect on the identity ray (membership
    /// along it is monotone).
    pub fn dist_opnorm(&self, a: &SymMat) -> Result<f64> {
        self.check_dim(a)?;
        match &self.kind {
            SetKind::Psd => Ok((-a.lambda_min()).max(0.0)),
            SetKind::DualPsd => Ok((-a.lambda_max()).max(0.0)),
            SetKind::Pk { k } => Ok((-a.lambda_k(*k)?).max(0.0)),
            SetKind::HalfSpaceLinear { a: coeff, c } => {
                Ok(((c - coeff.frobenius_dot(a)?) / coeff.trace()).max(0.0))
            }
            SetKind::Translate { base, offset } => base.dist_opnorm(&a.sub(offset)?),
            SetKind::Full => Ok(0.0),
            _ => self.min_shift_bisect(a),
        }
    }

    /// Bisection for the minimal membership shift along `+I`.
    fn min_shift_bisect(&self, a: &SymMat) -> Result<f64> {
        if self.contains(a)? {
            return Ok(0.0);
        }
        let mut hi = self.shift_in.max(0.0) + a.opnorm() + 1.0;
        let mut tries = 0;
        while !self.contains(&a.add_scaled_identity(hi))? {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(Error::SamplerExhausted(
                    "no membership found along the identity ray (set witnesses inconsistent?)"
                        .into(),
                ));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * (1.0 + hi.abs()) {
            let mid = 0.5 * (lo + hi);
            if self.contains(&a.add_scaled_identity(mid))? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Projects a raw draw into the set by the minimal identity shift,
    /// landing on (or within tolerance of) the boundary when the draw was
    /// outside.
    pub fn project_member(&self, raw: &SymMat) -> Result<SymMat> {
        let t = self.dist_opnorm(raw)?;
        Ok(raw.add_scaled_identity(t))
    }
}

/// Sampling parameters for Hausdorff-distance estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HausdorffProbe {
    /// Raw draws live in an operator-norm ball of this radius.
    pub radius: f64,
    /// Number of raw draws (each probes both directions).
    pub samples: usize,
    /// Generator seed.
    pub seed: u64,
}

impl Default for HausdorffProbe {
    fn default() -> Self {
        HausdorffProbe {
            radius: 10.0,
            samples: 2000,
            seed: 0,
        }
    }
}

/// Sampled lower-bound estimate of the Hausdorff distance between two sets,
/// in operator norm.
///
/// Raw draws are projected onto each set along the identity ray; the
/// estimate is the running maximum of each projected member's distance to
/// the *other* set. It is a lower bound of the true sup–inf distance,
/// monotone nondecreasing in the sample count for a fixed seed.
///
/// Unbounded separation is reported as `f64::INFINITY` once the estimate
/// exceeds `radius / 2` — past that point the ball radius, not the sets,
/// limits the estimate.
pub fn hausdorff_estimate(
    s1: &EllipticSetSpec,
    s2: &EllipticSetSpec,
    probe: &HausdorffProbe,
) -> Result<f64> {
    if s1.n != s2.n {
        return Err(Error::Dimension(format!(
            "set dimensions differ: {} vs {}",
            s1.n, s2.n
        )));
    }
    if probe.samples == 0 {
        return Err(Error::InvalidParameter(
            "hausdorff estimate needs at least one sample".into(),
        ));
    }
    if !(probe.radius > 0.0) {
        return Err(Error::InvalidParameter(
            "hausdorff probe radius must be positive".into(),
        ));
    }
    let mut rng = seeded_rng(probe.seed);
    let mut est: f64 = 0.0;
    for _ in 0..probe.samples {
        let raw = random_sym(&mut rng, s1.n, probe.radius)?;
        let in1 = s1.project_member(&raw)?;
        est = est.max(s2.dist_opnorm(&in1)?);
        let in2 = s2.project_member(&raw)?;
        est = est.max(s1.dist_opnorm(&in2)?);
        if est > 0.5 * probe.radius {
            return Ok(f64::INFINITY);
        }
    }
    Ok(est)
}

/// Parameters for the asymptotic-cone membership test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeProbe {
    /// Interior clearances to try (each must be positive).
    pub eps_grid: Vec<f64>,
    /// Upper end of the geometric scale grid.
    pub c_max: f64,
}

impl Default for ConeProbe {
    fn default() -> Self {
        ConeProbe {
            eps_grid: vec![0.1, 0.25, 0.5],
            c_max: 1024.0,
        }
    }
}

/// Tests whether the direction `A` lies in the interior of the set's
/// asymptotic cone: for some clearance `ε` from the grid, the scaled rays
/// `C·(A − εI)` stay in the set for every tested `C` from some point on.
///
/// Scales are a geometric grid `1, 2, 4, …, c_max`; the certificate requires
/// membership on a suffix of at least two scales, so a single accidental
/// hit at the top cannot certify.
pub fn cone_contains(s: &EllipticSetSpec, a: &SymMat, probe: &ConeProbe) -> Result<bool> {
    if probe.eps_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "cone probe needs a nonempty clearance grid".into(),
        ));
    }
    if !(probe.c_max > 1.0) {
        return Err(Error::InvalidParameter(
            "cone probe scale cap must exceed 1".into(),
        ));
    }
    let mut scales = Vec::new();
    let mut c = 1.0;
    while c < probe.c_max {
        scales.push(c);
        c *= 2.0;
    }
    scales.push(probe.c_max);

    for &eps in &probe.eps_grid {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(
                "cone probe clearances must be positive".into(),
            ));
        }
        let dir = a.add_scaled_identity(-eps);
        let mut suffix = 0usize;
        for &cc in scales.iter().rev() {
            if s.contains(&dir.scale(cc))? {
                suffix += 1;
            } else {
                break;
            }
        }
        if suffix >= 2 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// How a constraint set `Φ(x)` is produced for a branch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintRule {
    /// No constraint: all of `S(N)`.
    Full,
    /// The positive semidefinite cone at every point.
    Psd,
    /// `{A : A + m(x) ⪰ 0}` — the admissible set for determinant operators
    /// with a spatial shift.
    ShiftedPsd { m: MatrixField },
    /// A fixed, point-independent set.
    Fixed { set: EllipticSetSpec },
    /// An arbitrary map rule evaluated pointwise (used when a branch's
    /// constraint is itself a nontrivial map).
    Map { rule: Box<MapRule> },
}

impl ConstraintRule {
    /// The constraint set at `x`.
    pub fn at(&self, x: &[f64], n: usize) -> Result<EllipticSetSpec> {
        match self {
            ConstraintRule::Full => EllipticSetSpec::full(n),
            ConstraintRule::Psd => EllipticSetSpec::psd(n),
            ConstraintRule::ShiftedPsd { m } => {
                let shift = m.eval(x)?;
                EllipticSetSpec::translate(EllipticSetSpec::psd(n)?, shift.neg())
            }
            ConstraintRule::Fixed { set } => {
                if set.n != n {
                    return Err(Error::Dimension(format!(
                        "fixed constraint has dimension {}, map needs {n}",
                        set.n
                    )));
                }
                Ok(set.clone())
            }
            ConstraintRule::Map { rule } => rule_at(rule, x, n),
        }
    }

    /// Whether the rule produces the same set at every point.
    pub fn is_constant(&self) -> bool {
        match self {
            ConstraintRule::Full | ConstraintRule::Psd | ConstraintRule::Fixed { .. } => true,
            ConstraintRule::ShiftedPsd { m } => matches!(m, MatrixField::Constant { .. }),
            ConstraintRule::Map { rule } => rule_is_constant(rule),
        }
    }
}

/// Converts a map rule into an equivalent constraint rule (for embedding a
/// general map as the constraint of a branch).
pub fn to_constraint(rule: &MapRule) -> ConstraintRule {
    match rule {
        MapRule::Constant { set } => ConstraintRule::Fixed { set: set.clone() },
        MapRule::Constraint { constraint } => constraint.clone(),
        other => ConstraintRule::Map {
            rule: Box::new(other.clone()),
        },
    }
}

/// How the set at a point is produced for a set-valued map.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MapRule {
    /// The same set at every point.
    Constant { set: EllipticSetSpec },
    /// Branch sets `{A ∈ Φ(x) : F(x, A) ≥ 0}`.
    Branch {
        op: Box<OperatorSpec>,
        phi: ConstraintRule,
    },
    /// Half-spaces `{A : tr(a(x)A) ≥ c(x)}` with spatial coefficients.
    HalfSpace { a: MatrixField, c: ScalarField },
    /// Pointwise dual of another rule.
    DualOfMap { base: Box<MapRule>, margin: f64 },
    /// A constraint rule used directly as a map (e.g. the admissible-set
    /// map `Φ` of a branch, viewed as a set-valued map in its own right).
    Constraint { constraint: ConstraintRule },
}

/// A set-valued map `x ↦ Θ(x)` over the closure of a domain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EllipticMapSpec {
    pub domain: Domain,
    pub rule: MapRule,
}

impl EllipticMapSpec {
    /// Builds and validates a map.
    pub fn new(domain: Domain, rule: MapRule) -> Result<Self> {
        domain.validate()?;
        let map = EllipticMapSpec { domain, rule };
        // Touch the rule once at the anchor so configuration errors surface
        // at construction, not mid-sampling.
        let anchor = map.domain.anchor();
        map.at(&anchor)?;
        Ok(map)
    }

    /// Builds a map directly from a constraint rule (the admissible-set map
    /// `Φ` of a branch, viewed standalone).
    pub fn from_constraint(domain: Domain, rule: ConstraintRule) -> Result<Self> {
        EllipticMapSpec::new(domain, MapRule::Constraint { constraint: rule })
    }

    /// Matrix/space dimension `N`.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The set at `x`.
    pub fn at(&self, x: &[f64]) -> Result<EllipticSetSpec> {
        let n = self.domain.dim();
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, domain has {n}",
                x.len()
            )));
        }
        rule_at(&self.rule, x, n)
    }

    /// The pointwise dual map.
    pub fn dual_map(&self, margin: f64) -> Result<EllipticMapSpec> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter(
                "dual margin must be positive".into(),
            ));
        }
        Ok(EllipticMapSpec {
            domain: self.domain.clone(),
            rule: MapRule::DualOfMap {
                base: Box::new(self.rule.clone()),
                margin,
            },
        })
    }

    /// Whether the rule is point-independent (used to upgrade sampled
    /// semicontinuity verdicts from "up to cap" to unqualified).
    pub fn is_constant(&self) -> bool {
        rule_is_constant(&self.rule)
    }
}

fn rule_is_constant(rule: &MapRule) -> bool {
    match rule {
        MapRule::Constant { .. } => true,
        MapRule::DualOfMap { base, .. } => rule_is_constant(base),
        MapRule::Constraint { constraint } => constraint.is_constant(),
        MapRule::Branch { .. } | MapRule::HalfSpace { .. } => false,
    }
}

fn rule_at(rule: &MapRule, x: &[f64], n: usize) -> Result<EllipticSetSpec> {
    match rule {
        MapRule::Constant { set } => {
            if set.n != n {
                return Err(Error::Dimension(format!(
                    "constant map set has dimension {}, domain has {n}",
                    set.n
                )));
            }
            Ok(set.clone())
        }
        MapRule::Branch { op, phi } => {
            let phi_at = phi.at(x, n)?;
            EllipticSetSpec::sublevel((**op).clone(), phi_at, x.to_vec())
        }
        MapRule::HalfSpace { a, c } => {
            let coeff = a.eval(x)?;
            if coeff.dim() != n {
                return Err(Error::Dimension(format!(
                    "half-space coefficient has dimension {}, domain has {n}",
                    coeff.dim()
                )));
            }
            EllipticSetSpec::half_space(coeff, c.eval(x)?)
        }
        MapRule::DualOfMap { base, margin } => rule_at(base, x, n)?.dual(*margin),
        MapRule::Constraint { constraint } => constraint.at(x, n),
    }
}

/// Sampling parameters for drawing members of a set-valued map's sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSampler {
    /// Number of samples to draw.
    pub samples: usize,
    /// Norm cap for raw draws, before the membership shift. Divergence
    /// failures (coefficients that outrun any uniform modulus) only show up
    /// at large norms, so the cap is the declared reach of the search.
    pub norm_cap: f64,
    /// Generator seed.
    pub seed: u64,
}

impl Default for ThetaSampler {
    fn default() -> Self {
        ThetaSampler {
            samples: 10_000,
            norm_cap: 1e3,
            seed: 0,
        }
    }
}

/// Draws the `i`-th raw symmetric matrix of a capped multi-scale stream:
/// dense draws across log-spaced scales, interleaved with diagonal
/// sign-corner matrices at the cap scale (the extreme rays where divergence
/// failures live) and small-norm draws.
pub fn raw_draw(rng: &mut ChaCha8Rng, i: usize, n: usize, cap: f64) -> Result<SymMat> {
    match i % 4 {
        // Dense draw, log-uniform scale in [cap·1e-5, cap].
        0 | 2 => {
            let u: f64 = rng.gen_range(0.0..=1.0);
            let scale = cap * (10.0f64).powf(-5.0 * (1.0 - u));
            random_sym(rng, n, scale)
        }
        // Diagonal sign corner at a coarse scale ladder.
        1 => {
            let corner = (i / 4) % (1usize << n);
            let level = (i / (4 << n)) % 4;
            let scale = cap * (10.0f64).powi(-(level as i32));
            let d: Vec<f64> = (0..n)
                .map(|b| {
                    if (corner >> b) & 1 == 1 {
                        -scale
                    } else {
                        scale
                    }
                })
                .collect();
            SymMat::diag(&d)
        }
        // Small draw near the origin.
        _ => random_sym(rng, n, cap * 1e-5),
    }
}

/// Outcome of a uniform-semicontinuity check over a set-valued map.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum UuscVerdict {
    /// Holds unconditionally (point-independent maps).
    Pass,
    /// Held on every sample up to the declared norm cap. Sampling cannot
    /// certify beyond the cap, so this is the strongest sampled verdict a
    /// genuinely point-dependent map can earn.
    PassUpToCap,
    /// A violating triple was found.
    Fail,
}

/// A violation of the two-sided inclusion `Θ(x) + εI ⊆ Θ(y)`:
/// `a ∈ Θ(from)` but `a + εI ∉ Θ(to)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UuscWitness {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub a: SymMat,
}

/// Report from [`uusc_check`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UuscReport {
    pub verdict: UuscVerdict,
    pub witness: Option<UuscWitness>,
    pub samples_used: usize,
}

/// Checks uniform upper semicontinuity of a set-valued map at scales
/// `(eps, delta)`: for sampled pairs `x, y` in the closure with
/// `|x − y| < delta` and sampled members `A ∈ Θ(x)`, requires
/// `A + eps·I ∈ Θ(y)` (directions alternate, so both inclusions are
/// exercised).
///
/// Members are drawn as `B + t·I` with `B` a capped raw draw and `t` the
/// minimal membership shift; the cap is declared in the sampler, and the
/// verdict for point-dependent maps is accordingly
/// [`UuscVerdict::PassUpToCap`], never an unqualified pass.
pub fn uusc_check(
    map: &EllipticMapSpec,
    eps: f64,
    delta: f64,
    sampler: &ThetaSampler,
) -> Result<UuscReport> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter(
            "semicontinuity scales eps and delta must be positive".into(),
        ));
    }
    if sampler.samples == 0 {
        return Err(Error::InvalidParameter(
            "semicontinuity check needs at least one sample".into(),
        ));
    }
    let n = map.dim();
    let mut rng = seeded_rng(sampler.seed);
    for i in 0..sampler.samples {
        let x = sample_point(&map.domain, &mut rng)?;
        let y = nearby_point(&map.domain, &x, delta, &mut rng)?;
        let (from, to) = if i % 2 == 0 { (&x, &y) } else { (&y, &x) };
        let s_from = map.at(from)?;
        let s_to = map.at(to)?;
        let raw = raw_draw(&mut rng, i, n, sampler.norm_cap)?;
        let a = s_from.project_member(&raw)?;
        if !s_to.contains(&a.add_scaled_identity(eps))? {
            return Ok(UuscReport {
                verdict: UuscVerdict::Fail,
                witness: Some(UuscWitness {
                    from: from.clone(),
                    to: to.clone(),
                    a,
                }),
                samples_used: i + 1,
            });
        }
    }
    Ok(UuscReport {
        verdict: if map.is_constant() {
            UuscVerdict::Pass
        } else {
            UuscVerdict::PassUpToCap
        },
        witness: None,
        samples_used: sampler.samples,
    })
}

/// A point of the closure within Euclidean distance `delta` of `x`.
fn nearby_point(
    domain: &Domain,
    x: &[f64],
    delta: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    for _ in 0..200 {
        let dir = random_unit(rng, x.len());
        let r = rng.gen_range(0.0..delta * 0.999);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + r * d).collect();
        if domain.contains_closure(&y, 0.0) {
            return Ok(y);
        }
    }
    // Extremely thin domains could defeat rejection; fall back to x itself
    // (a legal pair at distance zero).
    Ok(x.to_vec())
}

/// Membership of `A` in the limit set of a map at a boundary point,
/// evaluated per the uniform-semicontinuity extension: test
/// `A + eps·I ∈ Θ(x_int)` at the nearest of a ladder of interior probes
/// along the inward normal.
///
/// # Errors
///
/// `Precondition` if `x0` is not a boundary point or no inward probe lands
/// in the interior.
pub fn extend_to_closure(
    map: &EllipticMapSpec,
    x0: &[f64],
    a: &SymMat,
    eps: f64,
) -> Result<bool> {
    let scale = map.domain.diameter_inf();
    if map.domain.rho(x0).abs() > 1e-6 * scale.max(1.0) {
        return Err(Error::Precondition(format!(
            "extension point must lie on the boundary (rho = {})",
            map.domain.rho(x0)
        )));
    }
    let g = map
        .domain
        .rho_grad(x0)
        .map_err(|e| Error::Precondition(format!("no inward direction at x0: {e}")))?;
    let gn = norm2(&g);
    if gn <= 1e-12 {
        return Err(Error::Precondition(
            "defining-function gradient vanishes at x0".into(),
        ));
    }
    let mut verdict = None;
    for tau in [1e-6, 1e-4, 1e-2] {
        let step = tau * scale;
        let xi: Vec<f64> = x0
            .iter()
            .zip(&g)
            .map(|(v, gi)| v - step * gi / gn)
            .collect();
        if map.domain.is_interior(&xi) {
            let ok = map.at(&xi)?.enlarge_contains(a, eps)?;
            if verdict.is_none() {
                // Nearest interior probe governs; farther probes are
                // consistency context only.
                verdict = Some(ok);
            }
        }
    }
    verdict.ok_or_else(|| {
        Error::Precondition("no interior probe found along the inward normal".into())
    })
}

/// Convenience: Euclidean separation used by pair samplers.
pub fn pair_distance(x: &[f64], y: &[f64]) -> f64 {
    dist2(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branches::OperatorSpec;
    use crate::fields::ScalarField;

    fn d(a: f64, b: f64) -> SymMat {
        SymMat::diag(&[a, b]).unwrap()
    }

    #[test]
    fn membership_catalog() {
        let psd = EllipticSetSpec::psd(2).unwrap();
        let dual = EllipticSetSpec::dual_psd(2).unwrap();
        assert!(psd.contains(&SymMat::identity(2).unwrap()).unwrap());
        assert!(dual.contains(&d(1.0, -1.0)).unwrap());
        assert!(!psd.contains(&d(1.0, -1.0)).unwrap());
    }

    #[test]
    fn interiority_examples() {
        let psd = EllipticSetSpec::psd(2).unwrap();
        let dual = EllipticSetSpec::dual_psd(2).unwrap();
        assert!(psd
            .interior_contains(&SymMat::identity(2).unwrap(), 0.5)
            .unwrap());
        assert!(!psd.interior_contains(&d(1.0, 0.0), 0.5).unwrap());
        assert!(dual.interior_contains(&d(-5.0, 1.0), 0.5).unwrap());
    }

    #[test]
    fn dual_membership_examples() {
        let psd = EllipticSetSpec::psd(2).unwrap();
        assert!(psd.dual_contains(&d(1.0, -1.0), 1e-6).unwrap());
        assert!(!psd
            .dual_contains(&SymMat::identity(2).unwrap().neg(), 1e-6)
            .unwrap());
    }

    #[test]
    fn dual_of_pk_matches_complementary_index() {
        let n = 3;
        let mut rng = seeded_rng(11);
        for k in 1..=n {
            let pk = EllipticSetSpec::pk(n, k).unwrap();
            for _ in 0..200 {
                let a = random_sym(&mut rng, n, 3.0).unwrap();
                // Skip the margin shell where the sampled dual is undecided.
                if a.lambda_k(n - k + 1).unwrap().abs() < 1e-5 {
                    continue;
                }
                let closed = a.lambda_k(n - k + 1).unwrap() >= 0.0;
                assert_eq!(pk.dual_contains(&a, 1e-6).unwrap(), closed);
                assert_eq!(pk.dual(1e-6).unwrap().contains(&a).unwrap(), closed);
            }
        }
    }

    #[test]
    fn enlargement_examples() {
        let psd = EllipticSetSpec::psd(2).unwrap();
        let dual = EllipticSetSpec::dual_psd(2).unwrap();
        assert!(psd.enlarge_contains(&d(-0.5, -0.5), 1.0).unwrap());
        assert!(!psd.enlarge_contains(&d(-2.0, -2.0), 1.0).unwrap());
        assert!(dual.enlarge_contains(&d(-1.0, -0.5), 0.6).unwrap());
    }

    #[test]
    fn translate_and_halfspace_duals() {
        let psd = EllipticSetSpec::psd(2).unwrap();
        let t = EllipticSetSpec::translate(psd, d(0.3, -0.2)).unwrap();
        let td = t.dual(1e-6).unwrap();
        // dual(base + M) = dual(base) − M, tested pointwise.
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let a = random_sym(&mut rng, 2, 2.0).unwrap();
            let lhs = td.contains(&a).unwrap();
            let rhs = a.add(&d(0.3, -0.2)).unwrap().lambda_max() >= 0.0;
            if (a.add(&d(0.3, -0.2)).unwrap().lambda_max()).abs() > 1e-6 {
                assert_eq!(lhs, rhs);
            }
        }

        let hs = EllipticSetSpec::half_space(d(1.0, 2.0), 0.7).unwrap();
        let hd = hs.dual(1e-6).unwrap();
        match &hd.kind {
            SetKind::HalfSpaceLinear { c, .. } => assert_eq!(*c, -0.7),
            other => panic!("expected half-space dual, got {other:?}"),
        }
    }

    #[test]
    fn shift_witnesses_hold() {
        let specs = vec![
            EllipticSetSpec::psd(2).unwrap(),
            EllipticSetSpec::dual_psd(2).unwrap(),
            EllipticSetSpec::pk(3, 2).unwrap(),
            EllipticSetSpec::half_space(d(1.0, 1.0), 2.0).unwrap(),
            EllipticSetSpec::translate(EllipticSetSpec::psd(2).unwrap(), d(1.0, -3.0)).unwrap(),
        ];
        for s in specs {
            let t0 = s.nonempty_shift();
            for extra in [0.0, 0.5, 4.0] {
                let t = t0 + extra;
                let m = SymMat::scaled_identity(s.n, t).unwrap();
                assert!(s.contains(&m).unwrap(), "tI not in set at t={t}");
            }
            let s0 = s.proper_shift().expect("catalog sets are proper");
            for extra in [0.0, 1.0, 10.0] {
                let t = s0 + extra;
                let m = SymMat::scaled_identity(s.n, -t).unwrap();
                assert!(!s.contains(&m).unwrap(), "-tI in set at t={t}");
            }
        }
    }

    #[test]
    fn hausdorff_examples() {
        let psd = EllipticSetSpec::psd(2).unwrap();
        let probe = HausdorffProbe {
            radius: 10.0,
            samples: 400,
            seed: 5,
        };
        // Projection round trips leave at most eigensolver jitter.
        let est = hausdorff_estimate(&psd, &psd, &probe).unwrap();
        assert!(est <= 1e-12, "estimate {est}");

        let shifted = EllipticSetSpec::translate(
            EllipticSetSpec::psd(2).unwrap(),
            SymMat::scaled_identity(2, 0.7).unwrap(),
        )
        .unwrap();
        let est = hausdorff_estimate(&psd, &shifted, &probe).unwrap();
        assert!((est - 0.7).abs() < 0.05, "estimate {est}");

        let dual = EllipticSetSpec::dual_psd(2).unwrap();
        let est = hausdorff_estimate(&psd, &dual, &probe).unwrap();
        assert!(est.is_infinite(), "estimate {est}");
    }

    #[test]
    fn cone_examples() {
        let probe = ConeProbe::default();
        // Determinant branch at a frozen point: its asymptotic cone is the
        // PSD cone.
        let op = OperatorSpec::monge_ampere(ScalarField::constant(1.0));
        let theta = EllipticSetSpec::sublevel(
            op,
            EllipticSetSpec::psd(2).unwrap(),
            vec![0.25, 0.25],
        )
        .unwrap();
        assert!(cone_contains(&theta, &SymMat::identity(2).unwrap(), &probe).unwrap());
        assert!(!cone_contains(&theta, &d(1.0, 0.0), &probe).unwrap());

        let op = OperatorSpec::kth_eigenvalue(2, ScalarField::constant(5.0)).unwrap();
        let theta_k = EllipticSetSpec::sublevel(
            op,
            EllipticSetSpec::full(2).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!(cone_contains(&theta_k, &d(0.5, 2.0), &probe).unwrap());
    }

    #[test]
    fn project_member_lands_inside() {
        let mut rng = seeded_rng(9);
        let op = OperatorSpec::monge_ampere(ScalarField::Norm {
            scale: 1.0,
            offset: 0.0,
        });
        let theta = EllipticSetSpec::sublevel(
            op,
            EllipticSetSpec::psd(2).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap();
        for i in 0..100 {
            let raw = raw_draw(&mut rng, i, 2, 100.0).unwrap();
            let a = theta.project_member(&raw).unwrap();
            assert!(theta.contains(&a).unwrap());
        }
    }

    #[test]
    fn uusc_constant_map_passes() {
        let map = EllipticMapSpec::new(
            Domain::unit_box(2),
            MapRule::Constant {
                set: EllipticSetSpec::psd(2).unwrap(),
            },
        )
        .unwrap();
        let rep = uusc_check(
            &map,
            0.1,
            0.5,
            &ThetaSampler {
                samples: 300,
                norm_cap: 100.0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(rep.verdict, UuscVerdict::Pass);
    }

    #[test]
    fn uusc_determinant_branch_passes_up_to_cap() {
        let map = EllipticMapSpec::new(
            Domain::unit_box(2),
            MapRule::Branch {
                op: Box::new(OperatorSpec::monge_ampere(ScalarField::Norm {
                    scale: 1.0,
                    offset: 0.0,
                })),
                phi: ConstraintRule::Psd,
            },
        )
        .unwrap();
        let rep = uusc_check(
            &map,
            0.5,
            0.2,
            &ThetaSampler {
                samples: 500,
                norm_cap: 1e3,
                seed: 2,
            },
        )
        .unwrap();
        assert_eq!(rep.verdict, UuscVerdict::PassUpToCap, "{:?}", rep.witness);
    }

    #[test]
    fn uusc_spatial_halfspace_fails_with_witness() {
        // tr(a(x)A) ≥ 0 with a(x) = diag(1+x₁, 1): the admissible matrices
        // grow without bound, so no uniform inclusion margin exists.
        let map = EllipticMapSpec::new(
            Domain::unit_box(2),
            MapRule::HalfSpace {
                a: MatrixField::DiagOfScalars {
                    entries: vec![
                        ScalarField::Linear {
                            coeffs: vec![1.0, 0.0],
                            intercept: 1.0,
                        },
                        ScalarField::constant(1.0),
                    ],
                },
                c: ScalarField::constant(0.0),
            },
        )
        .unwrap();
        let rep = uusc_check(
            &map,
            0.1,
            0.2,
            &ThetaSampler {
                samples: 4000,
                norm_cap: 1e3,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(rep.verdict, UuscVerdict::Fail);
        let w = rep.witness.expect("fail verdicts carry a witness");
        // Replay: the witness violates the inclusion when re-evaluated.
        let s_from = map.at(&w.from).unwrap();
        let s_to = map.at(&w.to).unwrap();
        assert!(s_from.contains(&w.a).unwrap());
        assert!(!s_to.contains(&w.a.add_scaled_identity(0.1)).unwrap());
    }

    #[test]
    fn closure_extension_examples() {
        // Determinant branch with f = |x| on the unit ball: 2I stays in the
        // limit sets at the boundary.
        let map = EllipticMapSpec::new(
            Domain::unit_ball(2),
            MapRule::Branch {
                op: Box::new(OperatorSpec::monge_ampere(ScalarField::Norm {
                    scale: 1.0,
                    offset: 0.0,
                })),
                phi: ConstraintRule::Psd,
            },
        )
        .unwrap();
        let x0 = vec![1.0, 0.0];
        let two_i = SymMat::scaled_identity(2, 2.0).unwrap();
        assert!(extend_to_closure(&map, &x0, &two_i, 0.1).unwrap());

        let psd_map = EllipticMapSpec::new(
            Domain::unit_ball(2),
            MapRule::Constant {
                set: EllipticSetSpec::psd(2).unwrap(),
            },
        )
        .unwrap();
        let neg_i = SymMat::identity(2).unwrap().neg();
        assert!(!extend_to_closure(&psd_map, &x0, &neg_i, 0.1).unwrap());

        let k_map = EllipticMapSpec::new(
            Domain::unit_ball(2),
            MapRule::Branch {
                op: Box::new(
                    OperatorSpec::kth_eigenvalue(1, ScalarField::constant(0.0)).unwrap(),
                ),
                phi: ConstraintRule::Full,
            },
        )
        .unwrap();
        // λ₁-boundary matrix stays in the closed limit set.
        assert!(extend_to_closure(&k_map, &x0, &d(0.0, 3.0), 0.1).unwrap());

        // Interior point is rejected as a precondition failure.
        assert!(matches!(
            extend_to_closure(&map, &[0.0, 0.0], &two_i, 0.1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn dual_of_wrapper_round_trips() {
        let op = OperatorSpec::monge_ampere(ScalarField::constant(1.0));
        let theta = EllipticSetSpec::sublevel(
            op,
            EllipticSetSpec::psd(2).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap();
        let dual = theta.dual(1e-6).unwrap();
        assert!(matches!(dual.kind, SetKind::DualOf { .. }));
        // Reflexivity: the dual of the wrapper is the original spec.
        let back = dual.dual(1e-6).unwrap();
        assert_eq!(back, theta);
        // Dual shift witnesses hold.
        let t = dual.nonempty_shift() + 1.0;
        assert!(dual
            .contains(&SymMat::scaled_identity(2, t).unwrap())
            .unwrap());
        let s = dual.proper_shift().unwrap() + 1.0;
        assert!(!dual
            .contains(&SymMat::scaled_identity(2, -s).unwrap())
            .unwrap());
    }

    #[test]
    fn serde_round_trip() {
        let spec = EllipticSetSpec::translate(
            EllipticSetSpec::pk(3, 2).unwrap(),
            SymMat::diag(&[0.1, -0.2, 0.0]).unwrap(),
        )
        .unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        let back: EllipticSetSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);

        let map = EllipticMapSpec::new(
            Domain::unit_box(2),
            MapRule::Branch {
                op: Box::new(OperatorSpec::monge_ampere(ScalarField::constant(1.0))),
                phi: ConstraintRule::Psd,
            },
        )
        .unwrap();
        let s = serde_json::to_string(&map).unwrap();
        let back: EllipticMapSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(map, back);
    }
}

/// Smallest certified exclusion shift for spectral kinds: just past the
/// membership tolerance.
fn proper_eps(tol: f64) -> f64 {
    2.0 * tol + 1e-12
}
