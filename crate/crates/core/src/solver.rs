//! Perron-style Dirichlet solver for branch equations on lattices.
//!
//! The continuum problem — find `u` with `F(x, D²u) = 0` in the branch sense
//! and `u = φ` on the domain boundary — is discretized with wide-stencil
//! monotone schemes: second differences along integer lattice directions,
//! grouped into orthogonal frames, combined per operator kind so that the
//! nodal value enters nonincreasingly and every neighbour nondecreasingly.
//! [`perron_solve`] then runs nodewise Gauss–Seidel relaxation, assigning each
//! interior node the *largest* value keeping the discrete operator
//! nonnegative — the discrete counterpart of the largest-subsolution
//! construction — until the sweep updates fall below tolerance.
//!
//! Boundary geometry is handled by [`convexity_check`] (is the boundary
//! curved the right way for the branch's cone?) and [`barrier`] (the
//! defining-function barrier `C·(ρ − ε|x−x0|²)` whose Hessian must stay in
//! the branch sets); the solver initializes from a maximum of boundary-point
//! barriers when the domain supports them.
//!
//! Sweeps are sequential and deterministic: nodes update in row-major order,
//! direction alternating per sweep.  Same-colour updates under a red-black
//! colouring would be neighbour-disjoint and could run in parallel without
//! changing the fixed point; this implementation keeps the sequential mode
//! only.

use serde::{Deserialize, Serialize};

use crate::branches::{branch_condition_check, nondegeneracy_check, BranchSpec, OperatorSpec};
use crate::ellset::{
    cone_contains, uusc_check, ConeProbe, EllipticSetSpec, SetKind, ThetaSampler, UuscVerdict,
};
use crate::fields::{Domain, ScalarField};
use crate::symcore::SymMat;
use crate::weaksol::{comparison_harness, GridFunction, Mask};
use crate::{Error, Result};

/// Nodewise scalar solves bisect to this width.
const NODE_BISECT_TOL: f64 = 1e-12;

/// Interior nodes above this count trigger a coarse-grid cascade.
const CASCADE_THRESHOLD: usize = 400;

/// Maximum cascade depth (number of coarser levels).
const CASCADE_DEPTH: usize = 3;

/// Solver parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverParams {
    /// Sweep convergence tolerance: stop when no nodal update exceeds it.
    pub tol: f64,
    /// Sweep budget per grid level.
    pub max_sweeps: usize,
    /// Stencil radius in lattice steps (1 = axis and diagonal frames,
    /// 2 adds the mixed-slope frames; the directional-resolution knob).
    pub stencil_radius: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tol: 1e-8,
            max_sweeps: 4000,
            stencil_radius: 2,
        }
    }
}

/// Results of the three structural checks run when a problem is assembled.
///
/// A failed check does not block the solve — the solver proceeds and the
/// flag travels with the problem so downstream consumers can see what was
/// certified.  (For branches whose boundary-convexity verdict is only
/// pass-up-to-cap the same policy applies: proceed, record.)
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreconditionFlags {
    /// Uniform upper semicontinuity of the branch's set map held on samples.
    pub uusc: bool,
    /// Membership boundaries sit inside the operator's zero locus.
    pub boundary_condition: bool,
    /// The operator is strictly positive on set interiors.
    pub nondegeneracy: bool,
}

/// A Dirichlet problem: branch, boundary data, grid spacing, parameters.
///
/// Assembly runs the semicontinuity, branch-boundary, and nondegeneracy
/// checks with a small sampling budget and records the outcomes in
/// [`PreconditionFlags`]; failures become warnings, not errors.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub branch: BranchSpec,
    pub boundary_data: ScalarField,
    pub h: f64,
    pub params: SolverParams,
    pub flags: PreconditionFlags,
    pub warnings: Vec<String>,
}

impl DirichletProblem {
    /// Assembles a problem and records the structural check flags.
    pub fn new(
        branch: BranchSpec,
        boundary_data: ScalarField,
        h: f64,
        params: SolverParams,
    ) -> Result<DirichletProblem> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        if params.stencil_radius == 0 {
            return Err(Error::InvalidParameter(
                "stencil radius must be at least 1".into(),
            ));
        }
        let anchor = branch.domain().anchor();
        let probe = domain_boundary_probe(branch.domain());
        boundary_data.eval(&probe)?;
        boundary_data.eval(&anchor)?;

        let mut warnings = Vec::new();
        let sampler = ThetaSampler {
            samples: 160,
            norm_cap: 50.0,
            seed: 0xD1A1,
        };
        let uusc = match uusc_check(&branch.theta(), 0.1, 0.05, &sampler) {
            Ok(r) => r.verdict != UuscVerdict::Fail,
            Err(e) => {
                warnings.push(format!("semicontinuity check did not run: {e}"));
                false
            }
        };
        if !uusc {
            warnings.push("semicontinuity check failed; comparison is not certified".into());
        }
        let small = ThetaSampler {
            samples: 16,
            norm_cap: 50.0,
            seed: 0xD1A2,
        };
        let boundary_condition = match branch_condition_check(&branch, &small) {
            Ok(r) => r.pass,
            Err(e) => {
                warnings.push(format!("branch boundary check did not run: {e}"));
                false
            }
        };
        if !boundary_condition {
            warnings.push("branch boundary check failed on a sample".into());
        }
        let nondegeneracy = match nondegeneracy_check(&branch, &small, 1e-3) {
            Ok(r) => r.pass,
            Err(e) => {
                warnings.push(format!("nondegeneracy check did not run: {e}"));
                false
            }
        };
        if !nondegeneracy {
            warnings.push("nondegeneracy check failed on a sample".into());
        }
        Ok(DirichletProblem {
            branch,
            boundary_data,
            h,
            params,
            flags: PreconditionFlags {
                uusc,
                boundary_condition,
                nondegeneracy,
            },
            warnings,
        })
    }
}

/// A boundary sample usable for validating boundary data formulas.
fn domain_boundary_probe(domain: &Domain) -> Vec<f64> {
    domain
        .boundary_samples(1)
        .into_iter()
        .next()
        .unwrap_or_else(|| domain.anchor())
}

/// Orthogonal integer direction frames for the wide stencil.
///
/// The axis frame is always present.  In two dimensions, radius 1 adds the
/// diagonal frame and radius 2 the two mixed-slope frames, for 16 distinct
/// directions counting both signs.  Frames are ordered; ties in minima are
/// broken toward the lowest frame index, so evaluation is deterministic.
#[derive(Debug, Clone)]
pub struct FrameSet {
    frames: Vec<Vec<Vec<i64>>>,
}

impl FrameSet {
    /// Builds the frame catalog for dimension `n` and the given radius.
    pub fn for_dimension(n: usize, radius: usize) -> Result<FrameSet> {
        if n == 0 || n > crate::MAX_DIM {
            return Err(Error::Dimension(format!(
                "frame sets support dimensions 1..={}, got {n}",
                crate::MAX_DIM
            )));
        }
        if radius == 0 {
            return Err(Error::InvalidParameter(
                "stencil radius must be at least 1".into(),
            ));
        }
        let mut frames = Vec::new();
        let axis: Vec<Vec<i64>> = (0..n)
            .map(|i| {
                let mut e = vec![0i64; n];
                e[i] = 1;
                e
            })
            .collect();
        frames.push(axis);
        if n == 2 {
            frames.push(vec![vec![1, 1], vec![1, -1]]);
            if radius >= 2 {
                frames.push(vec![vec![2, 1], vec![1, -2]]);
                frames.push(vec![vec![1, 2], vec![2, -1]]);
            }
        }
        Ok(FrameSet { frames })
    }

    /// The frames, each an orthogonal family of `n` integer directions.
    pub fn frames(&self) -> &[Vec<Vec<i64>>] {
        &self.frames
    }
}

/// Raw second difference `(u(x+hv) − 2u(x) + u(x−hv)) / h²` along an integer
/// direction — an approximation of `vᵀ D²u v`.  Fails with a grid error when
/// either arm leaves the lattice or lands on an outside node.
fn direction_second_difference(u: &GridFunction, idx: usize, v: &[i64]) -> Result<f64> {
    let plus = arm_value(u, idx, v, 1)?;
    let minus = arm_value(u, idx, v, -1)?;
    let h = u.h();
    Ok((plus - 2.0 * u.value(idx) + minus) / (h * h))
}

fn arm_value(u: &GridFunction, idx: usize, v: &[i64], sign: i64) -> Result<f64> {
    let steps: Vec<i64> = v.iter().map(|&c| c * sign).collect();
    match u.shifted(idx, &steps) {
        Some(j) if u.mask(j) != Mask::Outside => Ok(u.value(j)),
        _ => Err(Error::Grid(format!(
            "stencil arm {steps:?} leaves the sampled region at node {:?}",
            u.multi_index(idx)
        ))),
    }
}

/// Normalized second differences per frame direction: entry `i` approximates
/// `êᵢᵀ D²u êᵢ` for the unit direction `êᵢ = eᵢ/|eᵢ|`.
fn frame_differences(u: &GridFunction, idx: usize, frame: &[Vec<f64>]) -> Result<Vec<f64>> {
    let _ = (u, idx, frame);
    unreachable!("replaced by frame_diffs")
}

fn frame_diffs(u: &GridFunction, idx: usize, frame: &[Vec<i64>]) -> Result<Vec<f64>> {
    frame
        .iter()
        .map(|e| {
            let raw = direction_second_difference(u, idx, e)?;
            let norm2: f64 = e.iter().map(|&c| (c * c) as f64).sum();
            Ok(raw / norm2)
        })
        .collect()
}

/// `(Π max(δᵢ,0))^{1/n}` — the clamped geometric mean of frame differences.
fn root_det_plus(deltas: &[f64]) -> f64 {
    let n = deltas.len() as f64;
    let mut prod = 1.0;
    for &d in deltas {
        prod *= d.max(0.0);
    }
    prod.powf(1.0 / n)
}

/// Sum of the negative parts, `Σ min(δᵢ, 0)` — the monotonicity correction
/// added to determinant-type schemes so the output still falls when any
/// direction turns concave.
fn negative_part_sum(deltas: &[f64]) -> f64 {
    deltas.iter().map(|d| d.min(0.0)).sum()
}

/// Evaluates the monotone wide-stencil discretization of the branch operator
/// at an interior node.
///
/// Determinant kinds take an Oberman-style minimum over frames of the
/// clamped geometric mean of (matrix-shifted) second differences plus the
/// negative-part correction; the eigenvalue kind takes the minimum over
/// frames of the k-th smallest difference (directional Courant–Fischer);
/// extremal kinds weight positive and negative parts by the window ends and
/// minimize over frames; trace kinds use the diagonally-dominant splitting
/// with axis and diagonal arms.  The value is nonincreasing in the nodal
/// value and nondecreasing in every neighbour value.
///
/// Frames whose arms leave the sampled region are dropped; the axis frame
/// always survives because boundary nodes cover the full diagonal
/// neighbourhood of the interior.
pub fn discrete_operator(
    branch: &BranchSpec,
    u: &GridFunction,
    idx: usize,
    frames: &FrameSet,
) -> Result<f64> {
    if u.mask(idx) != Mask::Interior {
        return Err(Error::Precondition(
            "the discrete operator is evaluated at interior nodes".into(),
        ));
    }
    let n = u.dim();
    let x = u.node_coords(idx);
    match &branch.operator {
        OperatorSpec::MongeAmpere { f } => {
            let fx = f.eval(&x)?;
            let target = fx.max(0.0).powf(1.0 / n as f64);
            min_over_frames(u, idx, frames, |deltas| {
                root_det_plus(deltas) - target + negative_part_sum(deltas)
            })
        }
        OperatorSpec::PerturbedMa { m, f } => {
            let fx = f.eval(&x)?;
            let mx = m.eval(&x)?;
            shifted_det_scheme(u, idx, frames, &mx, fx)
        }
        OperatorSpec::BellmanMa { m } => {
            let mx = m.eval(&x)?;
            shifted_det_scheme(u, idx, frames, &mx, 0.0)
        }
        OperatorSpec::KthEigenvalue { k, f } => {
            if *k < 1 || *k > n {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalue index {k} outside 1..={n}"
                )));
            }
            let fx = f.eval(&x)?;
            min_over_frames(u, idx, frames, |deltas| {
                let mut sorted = deltas.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                sorted[*k - 1] - fx
            })
        }
        OperatorSpec::PucciMinus {
            lambda_lo,
            lambda_hi,
            f,
        } => {
            let fx = f.eval(&x)?;
            let (lo, hi) = (*lambda_lo, *lambda_hi);
            min_over_frames(u, idx, frames, |deltas| {
                pucci_frame_value(deltas, lo, hi) - fx
            })
        }
        OperatorSpec::LinearTrace { a, f } => {
            let ax = a.eval(&x)?;
            let fx = f.eval(&x)?;
            Ok(trace_scheme(u, idx, &ax)? - fx)
        }
        OperatorSpec::TruncatedLinear {
            a,
            f,
            lambda_lo,
            lambda_hi,
            h,
        } => {
            let ax = a.eval(&x)?;
            let fx = f.eval(&x)?;
            let linear = trace_scheme(u, idx, &ax)? - fx;
            let (lo, hi, cap) = (*lambda_lo, *lambda_hi, *h);
            let extremal = min_over_frames(u, idx, frames, |deltas| {
                pucci_frame_value(deltas, lo / 2.0, hi) + cap
            })?;
            Ok(linear.min(extremal))
        }
    }
}

/// `Σ lo·δ⁺ + hi·δ⁻` over a frame — the extremal-operator weights.
fn pucci_frame_value(deltas: &[f64], lo: f64, hi: f64) -> f64 {
    deltas
        .iter()
        .map(|&d| if d >= 0.0 { lo * d } else { hi * d })
        .sum()
}

/// Minimum of `value(deltas)` over the surviving frames; errors only when
/// every frame loses an arm (impossible for interior nodes, whose axis and
/// diagonal neighbours always carry values).
fn min_over_frames<F: Fn(&[f64]) -> f64>(
    u: &GridFunction,
    idx: usize,
    frames: &FrameSet,
    value: F,
) -> Result<f64> {
    let mut best: Option<f64> = None;
    for frame in frames.frames() {
        let deltas = match frame_diffs(u, idx, frame) {
            Ok(d) => d,
            Err(Error::Grid(_)) => continue,
            Err(e) => return Err(e),
        };
        let v = value(&deltas);
        if best.map_or(true, |b| v < b) {
            best = Some(v);
        }
    }
    best.ok_or_else(|| {
        Error::Grid(format!(
            "no stencil frame fits at node {:?}",
            u.multi_index(idx)
        ))
    })
}

/// Determinant scheme with a matrix shift: frame differences are augmented
/// by the frame-projected shift `êᵀ M ê` before the clamped geometric mean.
fn shifted_det_scheme(
    u: &GridFunction,
    idx: usize,
    frames: &FrameSet,
    m: &SymMat,
    fx: f64,
) -> Result<f64> {
    let n = u.dim() as f64;
    let target = fx.max(0.0);
    let mut best: Option<f64> = None;
    for frame in frames.frames() {
        let deltas = match frame_diffs(u, idx, frame) {
            Ok(d) => d,
            Err(Error::Grid(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut shifted = Vec::with_capacity(deltas.len());
        for (e, d) in frame.iter().zip(&deltas) {
            let norm: f64 = (e.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
            let unit: Vec<f64> = e.iter().map(|&c| c as f64 / norm).collect();
            shifted.push(d + m.quad_form(&unit)?);
        }
        let v = root_det_plus(&shifted) - target + negative_part_sum(&shifted);
        if best.map_or(true, |b| v < b) {
            best = Some(v);
        }
    }
    let _ = n;
    best.ok_or_else(|| {
        Error::Grid(format!(
            "no stencil frame fits at node {:?}",
            u.multi_index(idx)
        ))
    })
}

/// Monotone splitting of `tr(A(x) D²u)`: axis second differences weighted by
/// the diagonal dominance margins plus diagonal-arm second differences
/// weighted by the off-diagonal magnitudes.  Requires the coefficient matrix
/// to be diagonally dominant so all weights are nonnegative.
fn trace_scheme(u: &GridFunction, idx: usize, a: &SymMat) -> Result<f64> {
    let n = u.dim();
    if a.dim() != n {
        return Err(Error::Dimension(format!(
            "coefficient dimension {} vs grid dimension {n}",
            a.dim()
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut off_sum = 0.0;
        for j in 0..n {
            if j != i {
                off_sum += a.get(i, j).abs();
            }
        }
        let coeff = a.get(i, i) - off_sum;
        if coeff < -1e-12 {
            return Err(Error::InvalidParameter(format!(
                "coefficient matrix is not diagonally dominant at row {i}; the monotone splitting needs a_ii ≥ Σ|a_ij|"
            )));
        }
        let mut e = vec![0i64; n];
        e[i] = 1;
        total += coeff.max(0.0) * direction_second_difference(u, idx, &e)?;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let aij = a.get(i, j);
            if aij.abs() < 1e-300 {
                continue;
            }
            let mut e = vec![0i64; n];
            e[i] = 1;
            e[j] = if aij > 0.0 { 1 } else { -1 };
            total += aij.abs() * direction_second_difference(u, idx, &e)?;
        }
    }
    Ok(total)
}

/// Boundary-convexity verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvexityVerdict {
    /// Certified by closed-form interior membership at every sample.
    Pass,
    /// Certified only through the sampled asymptotic-cone probe, which
    /// cannot see past its scale cap.
    PassUpToCap,
    /// Some boundary sample admits no curvature correction.
    Fail,
}

/// Report from [`convexity_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub verdict: ConvexityVerdict,
    /// A boundary point where every correction strength failed.
    pub witness: Option<Vec<f64>>,
}

/// Checks strict boundary convexity of a domain with respect to a cone.
///
/// At each boundary sample `x` the matrices `D²ρ(x) + α·Dρ(x)⊗Dρ(x)` are
/// tested for interior cone membership over the `alpha_grid`; since `Dρ`
/// spans the boundary normal, a hit certifies that the second fundamental
/// form restricted to the tangent space is compatible with the cone.  For
/// catalog cones (spectral and half-space kinds) interior membership is
/// closed-form and the verdict can be a full pass; other kinds fall back to
/// the sampled asymptotic-cone probe and can at best pass up to its scale
/// cap.  A sample where every `α` fails is returned as the witness.
pub fn convexity_check(
    domain: &Domain,
    cone: &EllipticSetSpec,
    boundary_samples: usize,
    alpha_grid: &[f64],
) -> Result<ConvexityReport> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "the correction grid must hold at least one α".into(),
        ));
    }
    domain.validate()?;
    let n = domain.dim();
    if cone.n != n {
        return Err(Error::Dimension(format!(
            "cone dimension {} vs domain dimension {n}",
            cone.n
        )));
    }
    let closed_form = matches!(
        cone.kind,
        SetKind::Psd
            | SetKind::DualPsd
            | SetKind::Pk { .. }
            | SetKind::HalfSpaceLinear { .. }
            | SetKind::Full
    );
    let probe = ConeProbe::default();
    let mut any_capped = false;
    for x in domain.boundary_samples(boundary_samples.max(1)) {
        let d2 = domain.rho_hessian(&x)?;
        let g = domain.rho_grad(&x)?;
        let mut outer = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                outer[i * n + j] = g[i] * g[j];
            }
        }
        let gg = SymMat::from_flat(n, &outer)?;
        let mut found = false;
        for &alpha in alpha_grid {
            if !alpha.is_finite() {
                return Err(Error::InvalidParameter(
                    "correction strengths must be finite".into(),
                ));
            }
            let mut flat = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    flat[i * n + j] = d2.get(i, j) + alpha * gg.get(i, j);
                }
            }
            let m = SymMat::from_flat(n, &flat)?;
            let hit = if closed_form {
                cone.interior_contains(&m, crate::DEFAULT_MARGIN)?
            } else {
                cone_contains(cone, &m, &probe)?
            };
            if hit {
                found = true;
                if !closed_form {
                    any_capped = true;
                }
                break;
            }
        }
        if !found {
            return Ok(ConvexityReport {
                verdict: ConvexityVerdict::Fail,
                witness: Some(x),
            });
        }
    }
    Ok(ConvexityReport {
        verdict: if any_capped {
            ConvexityVerdict::PassUpToCap
        } else {
            ConvexityVerdict::Pass
        },
        witness: None,
    })
}

/// The defining-function barrier `x ↦ base + C·(ρ(x) − ε·|x−x0|²)`.
///
/// `base` is zero for the bare formula and `φ(x0)` when the barrier seeds
/// the Perron initialization.
#[derive(Debug, Clone)]
pub struct BarrierField {
    pub domain: Domain,
    pub x0: Vec<f64>,
    pub c: f64,
    pub eps: f64,
    pub base: f64,
}

impl BarrierField {
    /// Value at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.base + self.c * (self.domain.rho(x) - self.eps * d2)
    }

    /// Analytic Hessian `C·(D²ρ(x) − 2εI)`.
    pub fn hessian(&self, x: &[f64]) -> Result<SymMat> {
        Ok(self
            .domain
            .rho_hessian(x)?
            .add_scaled_identity(-2.0 * self.eps)
            .scale(self.c))
    }
}

/// Interior probe points for barrier admissibility: the anchor plus boundary
/// samples pulled inward at three depths.
fn interior_probes(domain: &Domain) -> Vec<Vec<f64>> {
    let anchor = domain.anchor();
    let mut out = vec![anchor.clone()];
    for b in domain.boundary_samples(8) {
        for t in [0.25, 0.5, 0.75] {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&b)
                .map(|(a, bi)| a + t * (bi - a))
                .collect();
            out.push(x);
        }
    }
    out
}

/// Builds the barrier `C·(ρ − ε|x−x0|²)` for a branch and validates it.
///
/// The strictness parameter must be positive — `ε = 0` loses the strict
/// domination the construction depends on.  The minimal admissible constant
/// is certified by a doubling-and-bisection search over the requirement that
/// the barrier Hessian lie in the branch set at every interior probe; a
/// requested `C` below that threshold is rejected with the threshold named.
pub fn barrier(
    branch: &BranchSpec,
    x0: &[f64],
    c: f64,
    eps: f64,
) -> Result<BarrierField> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(
            "barrier strictness ε must be positive; ε = 0 loses strict domination".into(),
        ));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "barrier constant must be positive, got {c}"
        )));
    }
    let domain = branch.domain().clone();
    if x0.len() != domain.dim() {
        return Err(Error::Dimension(format!(
            "barrier point dimension {} vs domain dimension {}",
            x0.len(),
            domain.dim()
        )));
    }
    let probes = interior_probes(&domain);
    let admissible = |cc: f64| -> Result<bool> {
        for x in &probes {
            let h = domain
                .rho_hessian(x)?
                .add_scaled_identity(-2.0 * eps)
                .scale(cc);
            if !branch.theta_at(x)?.contains(&h)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    // Certify the minimal admissible constant.
    let mut hi = 1e-3;
    let mut doublings = 0;
    while !admissible(hi)? {
        hi *= 2.0;
        doublings += 1;
        if doublings > 50 {
            return Err(Error::InvalidParameter(
                "no admissible barrier constant below 2^40; the barrier Hessian never enters the branch set".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        if admissible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let certified = hi;
    if c < certified * (1.0 - 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "barrier constant {c} is below the certified threshold {certified:.6e}"
        )));
    }
    if !admissible(c)? {
        return Err(Error::InvalidParameter(format!(
            "barrier constant {c} fails the branch-membership probes despite exceeding the certified threshold; the admissibility region is not a ray"
        )));
    }
    Ok(BarrierField {
        domain,
        x0: x0.to_vec(),
        c,
        eps,
        base: 0.0,
    })
}

/// Convergence report from [`perron_solve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Sweeps executed at the finest level.
    pub sweeps: usize,
    /// Maximum nodal update per sweep, in order.
    pub residual_history: Vec<f64>,
    /// Sup-norm of the discrete operator over interior nodes at the end.
    pub final_residual: f64,
    /// Maximum nodal change one extra sweep would make.
    pub fixed_point_gap: f64,
    /// Whether the output dominates the initialization (ordered comparison
    /// against the barrier/cascade seed).
    pub comparison_with_init: Option<bool>,
    /// Structural and numerical warnings gathered along the way.
    pub warnings: Vec<String>,
    /// True when the sweep updates fell below tolerance within budget.
    pub converged: bool,
    /// Number of coarser cascade levels solved below the finest grid.
    pub cascade_depth: usize,
}

/// Solves the Dirichlet problem by monotone Gauss–Seidel relaxation.
///
/// Boundary nodes carry `φ` evaluated at their true boundary projections.
/// Interior nodes start from the maximum of boundary-point barriers (or a
/// coarse-grid solve when the grid is large enough to warrant a cascade) and
/// are repeatedly reassigned the largest value keeping the discrete operator
/// nonnegative, neighbours frozen — nodewise bisection on a monotone scalar
/// function.  Sweeps alternate direction; the solve stops when no nodal
/// update exceeds the tolerance, and reports the residual history, the
/// fixed-point gap, and the ordering against its own initialization.
///
/// Non-convergence within the sweep budget is reported, not hidden: the
/// report carries `converged: false` and the full history.
pub fn perron_solve(p: &DirichletProblem) -> Result<(GridFunction, SolveReport)> {
    solve_level(p, p.h, CASCADE_DEPTH, true)
}

fn solve_level(
    p: &DirichletProblem,
    h: f64,
    cascade_budget: usize,
    top: bool,
) -> Result<(GridFunction, SolveReport)> {
    let domain = p.branch.domain();
    let mut grid = GridFunction::lattice(domain, h)?;
    let mut warnings = p.warnings.clone();

    // Boundary nodes: φ at the true boundary projection of the node.
    for idx in grid.boundary_indices() {
        let x = grid.node_coords(idx);
        let proj = domain.project_to_boundary(&x);
        grid.set_value(idx, p.boundary_data.eval(&proj)?)?;
    }

    // Initialization: cascade from a coarser level when the grid is large,
    // otherwise the barrier maximum.
    let mut cascade_depth = 0usize;
    let mut seeded = false;
    if grid.interior_indices().len() > CASCADE_THRESHOLD && cascade_budget > 0 {
        if let Ok((coarse, crep)) = solve_level(p, 2.0 * h, cascade_budget - 1, false) {
            cascade_depth = crep.cascade_depth + 1;
            warnings.extend(
                crep.warnings
                    .into_iter()
                    .filter(|w| !p.warnings.contains(w)),
            );
            seed_from_coarse(&mut grid, &coarse)?;
            seeded = true;
        }
    }
    if !seeded {
        seed_from_barriers(p, &mut grid, &mut warnings)?;
    }
    let init = grid.clone();

    let frames = FrameSet::for_dimension(grid.dim(), p.params.stencil_radius)?;
    let interior = grid.interior_indices();
    let mut history = Vec::new();
    let mut converged = false;
    let mut sweeps = 0usize;
    for sweep in 0..p.params.max_sweeps {
        sweeps = sweep + 1;
        let mut max_update = 0.0f64;
        let order: Vec<usize> = if sweep % 2 == 0 {
            interior.clone()
        } else {
            interior.iter().rev().cloned().collect()
        };
        for idx in order {
            let old = grid.value(idx);
            let new = node_update(&p.branch, &grid, idx, &frames, &mut warnings)?;
            grid.set_value(idx, new)?;
            max_update = max_update.max((new - old).abs());
        }
        history.push(max_update);
        if max_update < p.params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "sweep updates did not fall below {} within {} sweeps",
            p.params.tol, p.params.max_sweeps
        ));
    }

    let mut final_residual = 0.0f64;
    for &idx in &interior {
        let r = discrete_operator(&p.branch, &grid, idx, &frames)?;
        final_residual = final_residual.max(r.abs());
    }

    // One extra sweep on a scratch copy measures the fixed-point gap.
    let mut scratch = grid.clone();
    let mut gap = 0.0f64;
    for &idx in &interior {
        let old = scratch.value(idx);
        let new = node_update(&p.branch, &scratch, idx, &frames, &mut warnings)?;
        scratch.set_value(idx, new)?;
        gap = gap.max((new - old).abs());
    }

    // Order the output against its own initialization (top level only; the
    // harness also reruns the one-sided weak-solution tests and records
    // them in its own report, which we reduce to the ordering flag here).
    let comparison_with_init = if top {
        match comparison_harness(&init, &grid, &p.branch.theta()) {
            Ok(report) => Some(report.pass),
            Err(Error::Precondition(msg)) => {
                warnings.push(format!(
                    "initialization is not boundary-dominated by the output: {msg}"
                ));
                Some(false)
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    Ok((
        grid,
        SolveReport {
            sweeps,
            residual_history: history,
            final_residual,
            fixed_point_gap: gap,
            comparison_with_init,
            warnings,
            converged,
            cascade_depth,
        },
    ))
}

/// Seeds a fine grid's interior from a coarser solution: coincident coarse
/// nodes inject directly; other nodes average the non-outside coarse nodes
/// of their surrounding coarse cell.  Nodes with no usable coarse neighbour
/// keep their current (barrier floor) value.
fn seed_from_coarse(fine: &mut GridFunction, coarse: &GridFunction) -> Result<()> {
    let n = fine.dim();
    // Floor everything at the boundary minimum first so uncovered nodes
    // start from a sane value.
    let floor = fine
        .boundary_indices()
        .iter()
        .map(|&i| fine.value(i))
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    for idx in fine.interior_indices() {
        fine.set_value(idx, floor)?;
    }
    for idx in fine.interior_indices() {
        let multi = fine.multi_index(idx);
        let mut lo_corner = Vec::with_capacity(n);
        let mut exact = true;
        for &m in &multi {
            lo_corner.push(m / 2);
            if m % 2 != 0 {
                exact = false;
            }
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        let corners = 1usize << n;
        for code in 0..corners {
            let mut cm = lo_corner.clone();
            let mut skip = false;
            for b in 0..n {
                if code & (1 << b) != 0 {
                    if multi[b] % 2 == 0 {
                        skip = true;
                        break;
                    }
                    cm[b] += 1;
                }
            }
            if skip && exact {
                continue;
            }
            if skip {
                continue;
            }
            if cm.iter().zip(coarse.shape()).any(|(&m, &s)| m >= s) {
                continue;
            }
            let cidx = coarse.flat_index(&cm)?;
            if coarse.mask(cidx) != Mask::Outside {
                sum += coarse.value(cidx);
                count += 1;
            }
        }
        if count > 0 {
            fine.set_value(idx, sum / count as f64)?;
        }
    }
    Ok(())
}

/// Seeds the interior from the maximum of boundary-point barriers (balls and
/// ellipsoids) over a constant floor at the boundary minimum.
fn seed_from_barriers(
    p: &DirichletProblem,
    grid: &mut GridFunction,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let domain = p.branch.domain();
    let boundary = grid.boundary_indices();
    let floor = boundary
        .iter()
        .map(|&i| grid.value(i))
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let interior = grid.interior_indices();
    for &idx in &interior {
        grid.set_value(idx, floor)?;
    }
    let smooth = matches!(domain, Domain::Ball { .. } | Domain::Ellipsoid { .. });
    if !smooth {
        return Ok(());
    }
    let eps = 0.1;
    let slack = 1e-6;
    let mut kept = 0usize;
    for x0 in domain.boundary_samples(16) {
        let phi0 = p.boundary_data.eval(&x0)?;
        // Find a constant making the barrier boundary-dominated: at every
        // boundary node the barrier must stay below the assigned data.
        let mut c = 1.0;
        let mut ok = false;
        for _ in 0..=10 {
            let field = BarrierField {
                domain: domain.clone(),
                x0: x0.clone(),
                c,
                eps,
                base: phi0,
            };
            let dominated = boundary.iter().all(|&bi| {
                let xb = grid.node_coords(bi);
                field.eval(&xb) - slack <= grid.value(bi) + 1e-9
            });
            if dominated {
                ok = true;
                break;
            }
            c *= 2.0;
        }
        if !ok {
            continue;
        }
        kept += 1;
        let field = BarrierField {
            domain: domain.clone(),
            x0,
            c,
            eps,
            base: phi0,
        };
        for &idx in &interior {
            let x = grid.node_coords(idx);
            let v = field.eval(&x) - slack;
            if v > grid.value(idx) {
                grid.set_value(idx, v)?;
            }
        }
    }
    if kept == 0 {
        warnings.push(
            "no boundary-point barrier was boundary-dominated; initialized from the constant floor"
                .into(),
        );
    }
    Ok(())
}

/// Assigns the node the largest value keeping the discrete operator
/// nonnegative: bisection on a nonincreasing scalar function over the
/// bracket `[min neighbours − 10, max neighbours + 10]`, widened a few times
/// if the sign change escapes it.
fn node_update(
    branch: &BranchSpec,
    grid: &GridFunction,
    idx: usize,
    frames: &FrameSet,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let mut lo_ref = f64::INFINITY;
    let mut hi_ref = f64::NEG_INFINITY;
    let r = 2i64;
    let n = grid.dim();
    let mut off = vec![-r; n];
    loop {
        if off.iter().any(|&d| d != 0) {
            if let Some(j) = grid.shifted(idx, &off) {
                if grid.mask(j) != Mask::Outside {
                    lo_ref = lo_ref.min(grid.value(j));
                    hi_ref = hi_ref.max(grid.value(j));
                }
            }
        }
        let mut axis = n;
        let mut done = true;
        while axis > 0 {
            axis -= 1;
            if off[axis] < r {
                off[axis] += 1;
                for o in off.iter_mut().skip(axis + 1) {
                    *o = -r;
                }
                done = false;
                break;
            }
        }
        if done {
            break;
        }
    }
    if !lo_ref.is_finite() || !hi_ref.is_finite() {
        return Err(Error::Grid(format!(
            "interior node {:?} has no valued neighbours",
            grid.multi_index(idx)
        )));
    }
    let mut lo = lo_ref - 10.0;
    let mut hi = hi_ref + 10.0;
    let mut scratch = grid.clone();
    let mut eval = |c: f64, s: &mut GridFunction| -> Result<f64> {
        s.set_value(idx, c)?;
        discrete_operator(branch, s, idx, frames)
    };
    let mut widen = 0;
    while eval(lo, &mut scratch)? < 0.0 {
        let w = hi - lo;
        lo -= w;
        widen += 1;
        if widen > 4 {
            warnings.push(format!(
                "operator stays negative below the bracket at node {:?}; keeping the lower end",
                grid.multi_index(idx)
            ));
            return Ok(lo);
        }
    }
    widen = 0;
    while eval(hi, &mut scratch)? >= 0.0 {
        let w = hi - lo;
        hi += w;
        widen += 1;
        if widen > 4 {
            warnings.push(format!(
                "operator stays nonnegative above the bracket at node {:?}; keeping the upper end",
                grid.multi_index(idx)
            ));
            return Ok(hi);
        }
    }
    while hi - lo > NODE_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut scratch)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// One row of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub h: f64,
    pub max_error: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Convergence study over a spacing ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
}

impl ConvergenceStudy {
    /// Writes the table as CSV: `h,max_error,sweeps,converged`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "h,max_error,sweeps,converged")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.h, r.max_error, r.sweeps, r.converged)?;
        }
        Ok(())
    }
}

/// Runs the problem over a ladder of spacings and tabulates errors.
///
/// With an analytic reference, each solve's interior nodes are compared to
/// the formula.  Without one, the finest grid is solved first and coarser
/// solutions are compared at coincident lattice nodes, which requires the
/// ladder spacings to be integer multiples of the finest.
pub fn convergence_study(
    p: &DirichletProblem,
    h_ladder: &[f64],
    reference: Option<&ScalarField>,
) -> Result<ConvergenceStudy> {
    if h_ladder.is_empty() {
        return Err(Error::InvalidParameter(
            "the spacing ladder must hold at least one entry".into(),
        ));
    }
    let mut ladder = h_ladder.to_vec();
    for &h in &ladder {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ladder spacings must be positive, got {h}"
            )));
        }
    }
    ladder.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let finest = *ladder.last().expect("nonempty ladder");

    let solve_at = |h: f64| -> Result<(GridFunction, SolveReport)> {
        let mut q = p.clone();
        q.h = h;
        perron_solve(&q)
    };

    let fine_solution = if reference.is_none() {
        Some(solve_at(finest)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &h in &ladder {
        let (u, rep) = if let (Some((fu, frep)), true) =
            (fine_solution.as_ref(), (h - finest).abs() < 1e-15)
        {
            (fu.clone(), frep.clone())
        } else {
            solve_at(h)?
        };
        let mut err = 0.0f64;
        match reference {
            Some(formula) => {
                for idx in u.interior_indices() {
                    let x = u.node_coords(idx);
                    err = err.max((u.value(idx) - formula.eval(&x)?).abs());
                }
            }
            None => {
                let (fu, _) = fine_solution.as_ref().expect("solved above");
                if (h - finest).abs() < 1e-15 {
                    err = 0.0;
                } else {
                    let ratio = h / finest;
                    if (ratio - ratio.round()).abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "ladder spacing {h} is not an integer multiple of the finest {finest}"
                        )));
                    }
                    let ratio = ratio.round() as usize;
                    let mut compared = 0usize;
                    for idx in u.interior_indices() {
                        let multi = u.multi_index(idx);
                        let fm: Vec<usize> = multi.iter().map(|&m| m * ratio).collect();
                        if fm.iter().zip(fu.shape()).any(|(&m, &s)| m >= s) {
                            continue;
                        }
                        let fidx = fu.flat_index(&fm)?;
                        if fu.mask(fidx) == Mask::Outside {
                            continue;
                        }
                        // Guard against offset lattices: coordinates must agree.
                        let xc = u.node_coords(idx);
                        let xf = fu.node_coords(fidx);
                        if xc
                            .iter()
                            .zip(&xf)
                            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
                        {
                            continue;
                        }
                        err = err.max((u.value(idx) - fu.value(fidx)).abs());
                        compared += 1;
                    }
                    if compared == 0 {
                        return Err(Error::Grid(format!(
                            "no coincident nodes between spacings {h} and {finest}"
                        )));
                    }
                }
            }
        }
        rows.push(StudyRow {
            h,
            max_error: err,
            sweeps: rep.sweeps,
            converged: rep.converged,
        });
    }
    Ok(ConvergenceStudy { rows })
}
