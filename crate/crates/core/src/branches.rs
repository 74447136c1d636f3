//! Catalog of degenerate-elliptic operators, the branch builder, and the
//! boundary / non-degeneracy probes for branch sets.
//!
//! An operator `F(x, A)` together with an admissible-set map `Φ` selects a
//! *branch*: the set-valued map `Θ(x) = {A ∈ Φ(x) : F(x, A) ≥ 0}`. The
//! builder [`make_branch`] spot-checks the two defining requirements —
//! monotonicity of `F` in `A` along positive perturbations on `Φ(x)`, and
//! nonemptiness of `Θ(x)` — at sampled points, so that a constructed
//! [`BranchSpec`] can be trusted by the set calculus and by the solver.
//!
//! Operator values at the edge of admissibility follow a clamp convention:
//! for determinant roots, eigenvalues within [`ADMISSIBILITY_TOL`] below
//! zero are treated as zero, and anything lower is an admissibility error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ellset::{
    random_psd, random_rotation, raw_draw, rotate_diag, sample_point, seeded_rng, to_constraint,
    EllipticMapSpec, EllipticSetSpec, MapRule, ThetaSampler,
};
use crate::fields::{Domain, MatrixField, ScalarField};
use crate::symcore::SymMat;
use crate::{Error, Result};

/// Eigenvalues of a shifted matrix this far below zero are clamped to zero
/// before a determinant root; anything lower is inadmissible. Deliberately
/// looser than membership tolerances so that matrices lying in an
/// admissible set *up to tolerance* never trip the error path.
pub const ADMISSIBILITY_TOL: f64 = 1e-7;

/// Step tolerance for the boundary bisection along the `−I` ray.
const BOUNDARY_BISECT_TOL: f64 = 1e-10;

/// Operator values above this at a bisected boundary matrix count as a
/// branch-condition violation (the bisection localizes the boundary to
/// [`BOUNDARY_BISECT_TOL`], so true boundary values sit far below this).
const BOUNDARY_VALUE_TOL: f64 = 1e-6;

fn zero_rhs() -> ScalarField {
    ScalarField::constant(0.0)
}

/// A concrete degenerate-elliptic operator `F(x, A)`.
///
/// All coefficient data are closed-form field descriptors so that
/// continuity moduli are available to the condition checkers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `det(A) − f(x)`, meaningful on the positive semidefinite constraint.
    MongeAmpere { f: ScalarField },
    /// `[det(A + m(x))]^{1/N} − f(x)` on the shifted-positive constraint
    /// `{A : A + m(x) ⪰ 0}`.
    PerturbedMa { m: MatrixField, f: ScalarField },
    /// `λ_k(A) − f(x)` (ascending eigenvalues, `k` one-based).
    KthEigenvalue { k: usize, f: ScalarField },
    /// Minimal extremal operator `inf tr(βA)` over `β` with spectrum in
    /// `[lambda_lo, lambda_hi]`, minus `f(x)`. See [`pucci_minus`].
    PucciMinus {
        lambda_lo: f64,
        lambda_hi: f64,
        #[serde(default = "zero_rhs")]
        f: ScalarField,
    },
    /// `tr(a(x) A) − f(x)` with a positive-definite coefficient field.
    LinearTrace { a: MatrixField, f: ScalarField },
    /// Truncated linear operator
    /// `min{tr(a(x)A) − f(x), M⁻_{lambda_lo/2, lambda_hi}(A) + h}`:
    /// the extremal term caps the Hessians a membership certificate can
    /// reach, which is what restores uniform semicontinuity to linear
    /// equations. Build through [`truncated_linear`] so the coefficient
    /// spectrum window is checked.
    TruncatedLinear {
        a: MatrixField,
        f: ScalarField,
        lambda_lo: f64,
        lambda_hi: f64,
        h: f64,
    },
    /// Extremal (Bellman) form of the determinant root:
    /// `inf tr(β(A + m(x)))` over `β ⪰ 0` with `det β = N^{−N}`, which
    /// equals `[det(A + m(x))]^{1/N}` on the admissible cone.
    BellmanMa { m: MatrixField },
}

impl OperatorSpec {
    /// Determinant operator `det(A) − f(x)`.
    pub fn monge_ampere(f: ScalarField) -> OperatorSpec {
        OperatorSpec::MongeAmpere { f }
    }

    /// Shifted determinant-root operator `[det(A + m(x))]^{1/N} − f(x)`.
    pub fn perturbed_ma(m: MatrixField, f: ScalarField) -> OperatorSpec {
        OperatorSpec::PerturbedMa { m, f }
    }

    /// Eigenvalue operator `λ_k(A) − f(x)`; `k` is one-based.
    pub fn kth_eigenvalue(k: usize, f: ScalarField) -> Result<OperatorSpec> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "eigenvalue index k is one-based; 0 is invalid".into(),
            ));
        }
        Ok(OperatorSpec::KthEigenvalue { k, f })
    }

    /// Minimal extremal operator with ellipticity window
    /// `0 < lambda_lo ≤ lambda_hi` and zero right-hand side.
    pub fn pucci_minus(lambda_lo: f64, lambda_hi: f64) -> Result<OperatorSpec> {
        OperatorSpec::pucci_minus_with_rhs(lambda_lo, lambda_hi, zero_rhs())
    }

    /// Minimal extremal operator with an explicit right-hand side.
    pub fn pucci_minus_with_rhs(
        lambda_lo: f64,
        lambda_hi: f64,
        f: ScalarField,
    ) -> Result<OperatorSpec> {
        check_window(lambda_lo, lambda_hi)?;
        Ok(OperatorSpec::PucciMinus {
            lambda_lo,
            lambda_hi,
            f,
        })
    }

    /// Linear operator `tr(a(x)A) − f(x)`.
    pub fn linear_trace(a: MatrixField, f: ScalarField) -> OperatorSpec {
        OperatorSpec::LinearTrace { a, f }
    }

    /// Extremal form of the shifted determinant root.
    pub fn bellman_ma(m: MatrixField) -> OperatorSpec {
        OperatorSpec::BellmanMa { m }
    }

    /// Operator value at `(x, A)`.
    ///
    /// # Errors
    ///
    /// `Admissibility` when a determinant-root operand has an eigenvalue
    /// below `−`[`ADMISSIBILITY_TOL`]; `InvalidParameter`/`Dimension` for
    /// mismatched descriptors.
    pub fn evaluate(&self, x: &[f64], a: &SymMat) -> Result<f64> {
        match self {
            OperatorSpec::MongeAmpere { f } => Ok(a.det() - f.eval(x)?),
            OperatorSpec::PerturbedMa { m, f } => {
                Ok(clamped_root_det(&a.add(&m.eval(x)?)?)? - f.eval(x)?)
            }
            OperatorSpec::KthEigenvalue { k, f } => Ok(a.lambda_k(*k)? - f.eval(x)?),
            OperatorSpec::PucciMinus {
                lambda_lo,
                lambda_hi,
                f,
            } => Ok(pucci_minus(a, *lambda_lo, *lambda_hi) - f.eval(x)?),
            OperatorSpec::LinearTrace { a: coeff, f } => {
                Ok(coeff.eval(x)?.frobenius_dot(a)? - f.eval(x)?)
            }
            OperatorSpec::TruncatedLinear {
                a: coeff,
                f,
                lambda_lo,
                lambda_hi,
                h,
            } => {
                let lin = coeff.eval(x)?.frobenius_dot(a)? - f.eval(x)?;
                let capped = pucci_minus(a, lambda_lo / 2.0, *lambda_hi) + h;
                Ok(lin.min(capped))
            }
            OperatorSpec::BellmanMa { m } => clamped_root_det(&a.add(&m.eval(x)?)?),
        }
    }

    /// A shift `t₀` such that `t·I` is admissible with `F(x, t·I) ≥ 0` for
    /// every `t ≥ t₀` (used to stock nonemptiness witnesses for branch
    /// sets).
    pub(crate) fn zero_shift_witness(&self, x: &[f64]) -> Result<f64> {
        let n = x.len() as f64;
        Ok(match self {
            OperatorSpec::MongeAmpere { f } => f.eval(x)?.max(0.0).powf(1.0 / n),
            OperatorSpec::PerturbedMa { m, f } => {
                f.eval(x)?.max(0.0) - m.eval(x)?.lambda_min()
            }
            OperatorSpec::KthEigenvalue { f, .. } => f.eval(x)?,
            OperatorSpec::PucciMinus { lambda_lo, f, .. } => {
                f.eval(x)?.max(0.0) / (lambda_lo * n)
            }
            OperatorSpec::LinearTrace { a, f } => {
                let tr = a.eval(x)?.trace();
                if tr <= 1e-12 {
                    return Err(Error::InvalidParameter(
                        "linear coefficient must have positive trace".into(),
                    ));
                }
                f.eval(x)? / tr
            }
            OperatorSpec::TruncatedLinear {
                a,
                f,
                lambda_lo,
                h,
                ..
            } => {
                let tr = a.eval(x)?.trace();
                if tr <= 1e-12 {
                    return Err(Error::InvalidParameter(
                        "linear coefficient must have positive trace".into(),
                    ));
                }
                (f.eval(x)? / tr).max(-2.0 * h / (lambda_lo * n))
            }
            OperatorSpec::BellmanMa { m } => -m.eval(x)?.lambda_min(),
        })
    }

    /// A shift `s₀` such that `F(x, −t·I) < 0` (or `−t·I` is inadmissible)
    /// for every `t ≥ s₀`, when derivable from the operator alone. `None`
    /// for determinant-type operators, whose properness must come from a
    /// positive-type constraint.
    pub(crate) fn neg_ray_exit(&self, x: &[f64]) -> Result<Option<f64>> {
        let n = x.len() as f64;
        Ok(match self {
            OperatorSpec::MongeAmpere { .. }
            | OperatorSpec::PerturbedMa { .. }
            | OperatorSpec::BellmanMa { .. } => None,
            OperatorSpec::KthEigenvalue { f, .. } => {
                Some((-f.eval(x)?).max(0.0) + 1e-6)
            }
            OperatorSpec::PucciMinus {
                lambda_hi, f: rhs, ..
            } => Some(((-rhs.eval(x)?).max(0.0) + 1e-6) / (lambda_hi * n) + 1e-6),
            OperatorSpec::LinearTrace { a, f } => {
                let tr = a.eval(x)?.trace();
                if tr <= 1e-12 {
                    None
                } else {
                    Some(((-f.eval(x)?).max(0.0) + 1e-6) / tr + 1e-6)
                }
            }
            OperatorSpec::TruncatedLinear {
                lambda_lo, h, ..
            } => Some(2.0 * (h.max(0.0) + 1e-6) / (lambda_lo * n) + 1e-6),
        })
    }
}

fn check_window(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ellipticity window must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// `[det S]^{1/N}` with the admissibility clamp: eigenvalues in
/// `[−ADMISSIBILITY_TOL, 0)` count as zero; lower ones are an error.
fn clamped_root_det(s: &SymMat) -> Result<f64> {
    let n = s.dim();
    let ev = s.eigs();
    let mut prod = 1.0;
    for &lam in &ev.values()[..n] {
        if lam < -ADMISSIBILITY_TOL {
            return Err(Error::Admissibility(format!(
                "determinant-root operand has eigenvalue {lam} below -{ADMISSIBILITY_TOL}"
            )));
        }
        prod *= lam.max(0.0);
    }
    Ok(prod.powf(1.0 / n as f64))
}

/// Minimal extremal value `inf tr(βA)` over symmetric `β` with spectrum in
/// `[lo, hi]`, `0 < lo ≤ hi`.
///
/// Closed form: `lo·Σ_{λᵢ(A)>0} λᵢ(A) + hi·Σ_{λᵢ(A)<0} λᵢ(A)` — the
/// infimum weights each negative eigenvalue by the *largest* admissible
/// factor. (A tempting eigenvalue-sum rendering with a minus sign in front
/// of the negative part would make the value nonnegative everywhere and is
/// not the infimum; the sampled estimate [`pucci_bellman_estimate`]
/// cross-checks the sign convention here.)
pub fn pucci_minus(a: &SymMat, lo: f64, hi: f64) -> f64 {
    let n = a.dim();
    let ev = a.eigs();
    let mut acc = 0.0;
    for &lam in &ev.values()[..n] {
        acc += if lam > 0.0 { lo * lam } else { hi * lam };
    }
    acc
}

/// Sampled estimate of the extremal value `inf tr(βA)` over `β` with
/// spectrum in `[lo, hi]`: corner spectra (entries at `lo`/`hi`) alternate
/// with uniform spectra, each under a fresh random rotation. The estimate
/// is an upper bound on the true infimum, converging as samples grow; it
/// never consults the closed form, so it is an independent oracle for
/// [`pucci_minus`].
pub fn pucci_bellman_estimate(
    a: &SymMat,
    lo: f64,
    hi: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_window(lo, hi)?;
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "extremal estimate needs at least one sample".into(),
        ));
    }
    let n = a.dim();
    let mut rng = seeded_rng(seed);
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let frame = random_rotation(&mut rng, n);
        let d: Vec<f64> = if i % 2 == 0 {
            let corner = (i / 2) % (1usize << n);
            (0..n)
                .map(|b| if (corner >> b) & 1 == 1 { hi } else { lo })
                .collect()
        } else {
            (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
        };
        let beta = rotate_diag(&frame, &d)?;
        best = best.min(beta.frobenius_dot(a)?);
    }
    Ok(best)
}

/// Sampled upper bound for the extremal determinant-root value
/// `inf tr(β(A+M))` over `β ⪰ 0` with `det β = N^{−N}`; converges to
/// `[det(A+M)]^{1/N}` as samples grow (the arithmetic–geometric mean
/// inequality gives the lower bound exactly, so every sample is above the
/// root).
///
/// # Errors
///
/// `Admissibility` when `A + M` is not positive semidefinite.
pub fn bellman_ma_estimate(a: &SymMat, m: &SymMat, samples: usize, seed: u64) -> Result<f64> {
    let s = a.add(m)?;
    if s.lambda_min() < -ADMISSIBILITY_TOL {
        return Err(Error::Admissibility(
            "extremal determinant estimate needs A + M positive semidefinite".into(),
        ));
    }
    let n = s.dim();
    let nf = n as f64;
    // β = I/N is always admissible (det = N^{−N}) and exact for S ∝ I.
    let mut best = s.trace() / nf;
    let mut rng = seeded_rng(seed);
    for _ in 0..samples {
        let frame = random_rotation(&mut rng, n);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let det: f64 = d.iter().product();
        // Rescale so det β = N^{−N}.
        let c = 1.0 / (nf * det.powf(1.0 / nf));
        let d: Vec<f64> = d.iter().map(|v| v * c).collect();
        let beta = rotate_diag(&frame, &d)?;
        best = best.min(beta.frobenius_dot(&s)?);
    }
    Ok(best)
}

/// Builds a truncated linear operator after checking that the coefficient
/// spectrum stays inside `[lambda_lo, lambda_hi]` at sampled domain points.
pub fn truncated_linear(
    a: MatrixField,
    f: ScalarField,
    lambda_lo: f64,
    lambda_hi: f64,
    h: f64,
    domain: &Domain,
    samples: usize,
    seed: u64,
) -> Result<OperatorSpec> {
    check_window(lambda_lo, lambda_hi)?;
    if !h.is_finite() {
        return Err(Error::NonFinite("truncation level h".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut xs = vec![domain.anchor()];
    for _ in 1..samples.max(2) {
        xs.push(sample_point(domain, &mut rng)?);
    }
    for x in &xs {
        let ax = a.eval(x)?;
        let ev = ax.eigs();
        let lo = ev.values()[0];
        let hi = ev.values()[ax.dim() - 1];
        if lo < lambda_lo - 1e-9 || hi > lambda_hi + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "coefficient spectrum [{lo}, {hi}] leaves [{lambda_lo}, {lambda_hi}] at x = {x:?}"
            )));
        }
    }
    Ok(OperatorSpec::TruncatedLinear {
        a,
        f,
        lambda_lo,
        lambda_hi,
        h,
    })
}

/// An operator together with its admissible-set map, validated as a branch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchSpec {
    /// The operator `F`.
    pub operator: OperatorSpec,
    /// The admissible-set map `Φ`.
    pub constraint: EllipticMapSpec,
}

impl BranchSpec {
    /// The branch's set-valued map `x ↦ {A ∈ Φ(x) : F(x,A) ≥ 0}`.
    pub fn theta(&self) -> EllipticMapSpec {
        EllipticMapSpec {
            domain: self.constraint.domain.clone(),
            rule: MapRule::Branch {
                op: Box::new(self.operator.clone()),
                phi: to_constraint(&self.constraint.rule),
            },
        }
    }

    /// The branch set at `x`.
    pub fn theta_at(&self, x: &[f64]) -> Result<EllipticSetSpec> {
        EllipticSetSpec::sublevel(self.operator.clone(), self.constraint.at(x)?, x.to_vec())
    }

    /// The spatial domain.
    pub fn domain(&self) -> &Domain {
        &self.constraint.domain
    }

    /// Operator value at `(x, A)`.
    pub fn evaluate(&self, x: &[f64], a: &SymMat) -> Result<f64> {
        self.operator.evaluate(x, a)
    }
}

/// Builds a branch with the default spot-check budget.
pub fn make_branch(op: OperatorSpec, phi: EllipticMapSpec) -> Result<BranchSpec> {
    make_branch_with(op, phi, 12, 24, 0xE11B)
}

/// Builds a branch, spot-checking at `points` sampled domain points:
/// the branch set must construct (nonemptiness and properness witnesses),
/// contain its identity-shift witness, and the operator must be monotone
/// under `draws` random positive perturbations on the constraint set.
pub fn make_branch_with(
    op: OperatorSpec,
    phi: EllipticMapSpec,
    points: usize,
    draws: usize,
    seed: u64,
) -> Result<BranchSpec> {
    let n = phi.dim();
    let branch = BranchSpec {
        operator: op,
        constraint: phi,
    };
    let mut rng = seeded_rng(seed);
    let mut xs = vec![branch.constraint.domain.anchor()];
    for _ in 1..points.max(1) {
        xs.push(sample_point(&branch.constraint.domain, &mut rng)?);
    }
    for x in &xs {
        let theta = branch.theta_at(x)?;
        let t = theta.nonempty_shift() + 1.0;
        if !theta.contains(&SymMat::scaled_identity(n, t)?)? {
            return Err(Error::Admissibility(format!(
                "branch set misses its nonemptiness witness {t}·I at x = {x:?}"
            )));
        }
        let phi_x = branch.constraint.at(x)?;
        for j in 0..draws {
            let raw = raw_draw(&mut rng, j, n, 50.0)?;
            let a = phi_x.project_member(&raw)?;
            let p = random_psd(&mut rng, n, 5.0)?;
            let base = branch.operator.evaluate(x, &a)?;
            let bumped = branch.operator.evaluate(x, &a.add(&p)?)?;
            if bumped < base - 1e-7 * (1.0 + base.abs()) {
                return Err(Error::Admissibility(format!(
                    "operator is not monotone on the constraint at x = {x:?}: \
                     value fell from {base} to {bumped} under a positive perturbation"
                )));
            }
        }
    }
    Ok(branch)
}

/// Result of a sampled branch probe (boundary condition or
/// non-degeneracy).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchCheckReport {
    pub pass: bool,
    pub witness: Option<BranchWitness>,
    pub samples_used: usize,
}

/// A matrix at which a branch probe failed, with the offending operator
/// value.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BranchWitness {
    pub x: Vec<f64>,
    pub a: SymMat,
    pub value: f64,
}

/// Checks the branch boundary condition: membership boundaries of `Θ(x)`
/// must lie in `{F ≤ 0}`.
///
/// Boundary matrices are produced by bisecting along the `−I` ray from
/// sampled members (membership along that ray is monotone, and properness
/// guarantees an exit). The probe fails with a witness when the operator
/// value at a bisected boundary matrix exceeds a small positive tolerance —
/// which happens exactly when the constraint set, not the operator's zero
/// locus, forms part of the branch boundary.
pub fn branch_condition_check(
    branch: &BranchSpec,
    sampler: &ThetaSampler,
) -> Result<BranchCheckReport> {
    let n = branch.constraint.dim();
    let mut rng = seeded_rng(sampler.seed);
    for i in 0..sampler.samples.max(1) {
        let x = sample_point(&branch.constraint.domain, &mut rng)?;
        let theta = branch.theta_at(&x)?;
        let raw = raw_draw(&mut rng, i, n, sampler.norm_cap)?;
        let a = theta.project_member(&raw)?;
        let mut t_out = 1e-3;
        let mut doublings = 0;
        while theta.contains(&a.add_scaled_identity(-t_out))? {
            t_out *= 2.0;
            doublings += 1;
            if doublings > 70 {
                return Err(Error::SamplerExhausted(
                    "no exit along the −I ray; branch properness witnesses are inconsistent"
                        .into(),
                ));
            }
        }
        let mut lo = 0.0;
        let mut hi = t_out;
        while hi - lo > BOUNDARY_BISECT_TOL {
            let mid = 0.5 * (lo + hi);
            if theta.contains(&a.add_scaled_identity(-mid))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = a.add_scaled_identity(-lo);
        let value = branch.operator.evaluate(&x, &boundary)?;
        if value > BOUNDARY_VALUE_TOL {
            return Ok(BranchCheckReport {
                pass: false,
                witness: Some(BranchWitness {
                    x,
                    a: boundary,
                    value,
                }),
                samples_used: i + 1,
            });
        }
    }
    Ok(BranchCheckReport {
        pass: true,
        witness: None,
        samples_used: sampler.samples.max(1),
    })
}

/// Checks strict positivity of the operator on the interior of the branch
/// sets: samples members, pushes them `margin`-deep into the interior, and
/// requires `F > 0` there.
pub fn nondegeneracy_check(
    branch: &BranchSpec,
    sampler: &ThetaSampler,
    margin: f64,
) -> Result<BranchCheckReport> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidParameter(
            "interior margin must be positive".into(),
        ));
    }
    let n = branch.constraint.dim();
    let mut rng = seeded_rng(sampler.seed);
    for i in 0..sampler.samples.max(1) {
        let x = sample_point(&branch.constraint.domain, &mut rng)?;
        let theta = branch.theta_at(&x)?;
        let raw = raw_draw(&mut rng, i, n, sampler.norm_cap)?;
        let a = theta.project_member(&raw)?.add_scaled_identity(margin);
        let value = branch.operator.evaluate(&x, &a)?;
        if value <= 0.0 {
            return Ok(BranchCheckReport {
                pass: false,
                witness: Some(BranchWitness { x, a, value }),
                samples_used: i + 1,
            });
        }
    }
    Ok(BranchCheckReport {
        pass: true,
        witness: None,
        samples_used: sampler.samples.max(1),
    })
}
