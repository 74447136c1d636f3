//! Grid functions and discrete weak-solution tests.
//!
//! This module discretizes the viscosity-style notion of a set-valued
//! subsolution.  A [`GridFunction`] stores nodal values of `u` on a uniform
//! lattice clipped to a domain; the tests below probe `u` with quadratics the
//! way the continuum definition probes with `C^2` test functions:
//!
//! * [`stencil_hessian`] — central second differences, exact on quadratics;
//! * [`subaffine_check`] — a discrete maximum principle against affine
//!   functions, returning a [`ContactTriple`] when it fails;
//! * [`theta_subharmonic_test`] — quadratic contact from above at a node must
//!   produce a Hessian inside the (slightly enlarged) constraint set there;
//! * [`sup_convolution`] — the quadratic-penalty regularization
//!   `u^eps(x) = max_z u(z) − |x−z|²/eps`;
//! * [`slodkowski_k`] — a large-step second-difference functional whose value
//!   on a smooth quadratic recovers the top eigenvalue of its Hessian;
//! * [`comparison_harness`] — orders a subsolution against a supersolution,
//!   recording the one-sided test results as flags and reporting any interior
//!   ordering violation together with a subaffine witness of the difference.
//!
//! Nodes outside the domain carry the sentinel value [`NEG_SENTINEL`]; all
//! maxima in this module saturate against it, so an outside node can never win
//! a comparison against a finite value.

use std::io::{BufRead, Write};

use crate::ellset::{random_rotation, seeded_rng, EllipticMapSpec};
use crate::fields::Domain;
use crate::symcore::SymMat;
use crate::{Error, Result};

/// Sentinel stored at nodes outside the domain.
///
/// The value is finite (so it survives serialization and CSV round trips
/// bit-exactly) but far below any value a test function reaches; every
/// maximum computed in this module therefore ignores outside nodes
/// automatically.  Arithmetic never propagates the sentinel: routines check
/// the mask before touching a value.
pub const NEG_SENTINEL: f64 = -1e30;

/// Guard below which two nodal values are considered distinct relative to
/// their magnitude.
const REL_TOL: f64 = 1e-9;

/// Node classification on the lattice.
///
/// `Interior` nodes lie strictly inside the domain (`rho < 0`), `Boundary`
/// nodes are non-interior nodes with an interior node among their immediate
/// lattice neighbours (diagonals included), and `Outside` nodes are everything
/// else.  Boundary nodes carry finite values; outside nodes carry
/// [`NEG_SENTINEL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mask {
    Interior,
    Boundary,
    Outside,
}

impl Mask {
    /// Single-letter tag used in the CSV interchange format.
    pub fn letter(self) -> char {
        match self {
            Mask::Interior => 'I',
            Mask::Boundary => 'B',
            Mask::Outside => 'O',
        }
    }

    fn from_letter(c: &str) -> Result<Mask> {
        match c {
            "I" => Ok(Mask::Interior),
            "B" => Ok(Mask::Boundary),
            "O" => Ok(Mask::Outside),
            other => Err(Error::Serialization(format!(
                "unknown mask tag {other:?}; expected I, B, or O"
            ))),
        }
    }
}

/// Nodal values of a scalar function on a uniform lattice clipped to a domain.
///
/// The lattice starts at `lo` with spacing `h > 0` and `shape[i]` nodes along
/// axis `i`, stored row-major (last axis fastest).  Each node carries a
/// [`Mask`]; interior and boundary nodes carry finite values, outside nodes
/// the sentinel [`NEG_SENTINEL`].
///
/// Invariants enforced by the constructors:
/// * `h > 0` and every `shape[i] >= 3`;
/// * at least 3 interior nodes per axis (the span of interior multi-indices
///   along each axis is at least 3), so second differences exist somewhere;
/// * boundary nodes have finite values, outside nodes the sentinel.
#[derive(Debug, Clone)]
pub struct GridFunction {
    lo: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
    mask: Vec<Mask>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Samples `f` on the lattice of spacing `h` covering `domain`.
    ///
    /// Nodes with `rho < 0` become interior; non-interior nodes adjacent
    /// (in the full diagonal neighbourhood) to an interior node become
    /// boundary and are sampled as well; everything else is outside and
    /// stores the sentinel.
    pub fn sample<F: Fn(&[f64]) -> f64>(domain: &Domain, h: f64, f: F) -> Result<GridFunction> {
        let mut g = GridFunction::lattice(domain, h)?;
        for idx in 0..g.len() {
            if g.mask[idx] != Mask::Outside {
                let x = g.node_coords(idx);
                let v = f(&x);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "sampled value at node {x:?} is not finite"
                    )));
                }
                g.values[idx] = v;
            }
        }
        Ok(g)
    }

    /// Builds the masked lattice for `domain` with all sampled values zero.
    pub fn lattice(domain: &Domain, h: f64) -> Result<GridFunction> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive and finite, got {h}"
            )));
        }
        domain.validate()?;
        let (lo, hi) = domain.bounding_box();
        let n = lo.len();
        let mut shape = Vec::with_capacity(n);
        for i in 0..n {
            let steps = ((hi[i] - lo[i]) / h + 1e-9).floor() as usize;
            shape.push(steps + 1);
        }
        let total: usize = shape.iter().product();
        if total > 4_000_000 {
            return Err(Error::Grid(format!(
                "lattice would hold {total} nodes; refusing more than 4000000"
            )));
        }
        let mut mask = vec![Mask::Outside; total];
        // First pass: interior nodes.
        let mut coords = vec![0.0; n];
        let mut multi = vec![0usize; n];
        for (idx, m) in mask.iter_mut().enumerate() {
            unravel(idx, &shape, &mut multi);
            for i in 0..n {
                coords[i] = lo[i] + multi[i] as f64 * h;
            }
            if domain.rho(&coords) < -1e-12 {
                *m = Mask::Interior;
            }
        }
        // Second pass: non-interior nodes with an interior neighbour in the
        // full diagonal neighbourhood become boundary nodes.
        let interior: Vec<bool> = mask.iter().map(|m| *m == Mask::Interior).collect();
        let offsets = neighbourhood_offsets(n);
        for idx in 0..total {
            if mask[idx] == Mask::Interior {
                continue;
            }
            unravel(idx, &shape, &mut multi);
            for off in &offsets {
                if let Some(j) = shifted_index(&multi, off, &shape) {
                    if interior[j] {
                        mask[idx] = Mask::Boundary;
                        break;
                    }
                }
            }
        }
        // Interior span per axis must be at least 3 nodes.
        for axis in 0..n {
            let mut min_m = usize::MAX;
            let mut max_m = 0usize;
            for (idx, m) in mask.iter().enumerate() {
                if *m == Mask::Interior {
                    unravel(idx, &shape, &mut multi);
                    min_m = min_m.min(multi[axis]);
                    max_m = max_m.max(multi[axis]);
                }
            }
            if min_m == usize::MAX || max_m - min_m + 1 < 3 {
                return Err(Error::Grid(format!(
                    "spacing {h} leaves fewer than 3 interior nodes along axis {axis}; refine the grid"
                )));
            }
        }
        let values = mask
            .iter()
            .map(|m| if *m == Mask::Outside { NEG_SENTINEL } else { 0.0 })
            .collect();
        Ok(GridFunction {
            lo,
            h,
            shape,
            mask,
            values,
        })
    }

    /// Space dimension.
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Lattice spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nodes per axis.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Total node count (all masks).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the lattice holds no nodes (never produced by constructors).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mask of the node at flat index `idx`.
    pub fn mask(&self, idx: usize) -> Mask {
        self.mask[idx]
    }

    /// Value at flat index `idx` (the sentinel for outside nodes).
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Overwrites the value at a non-outside node.
    pub fn set_value(&mut self, idx: usize, v: f64) -> Result<()> {
        if self.mask[idx] == Mask::Outside {
            return Err(Error::Grid(
                "cannot assign a value to an outside node".into(),
            ));
        }
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "assigned nodal value must be finite, got {v}"
            )));
        }
        self.values[idx] = v;
        Ok(())
    }

    /// Coordinates of the node at flat index `idx`.
    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let mut multi = vec![0usize; self.dim()];
        unravel(idx, &self.shape, &mut multi);
        multi
            .iter()
            .enumerate()
            .map(|(i, &m)| self.lo[i] + m as f64 * self.h)
            .collect()
    }

    /// Multi-index of the node at flat index `idx`.
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut multi = vec![0usize; self.dim()];
        unravel(idx, &self.shape, &mut multi);
        multi
    }

    /// Flat index of a multi-index.
    pub fn flat_index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "multi-index length {} vs grid dimension {}",
                multi.len(),
                self.dim()
            )));
        }
        let mut idx = 0usize;
        for i in 0..multi.len() {
            if multi[i] >= self.shape[i] {
                return Err(Error::Grid(format!(
                    "multi-index {multi:?} leaves the lattice of shape {:?}",
                    self.shape
                )));
            }
            idx = idx * self.shape[i] + multi[i];
        }
        Ok(idx)
    }

    /// Flat index of the node shifted from `idx` by integer steps per axis,
    /// or `None` when the shift leaves the lattice.
    pub fn shifted(&self, idx: usize, steps: &[i64]) -> Option<usize> {
        let multi = self.multi_index(idx);
        shifted_index(&multi, steps, &self.shape)
    }

    /// Flat indices of all interior nodes, in row-major order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.mask[i] == Mask::Interior)
            .collect()
    }

    /// Flat indices of all boundary nodes, in row-major order.
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.mask[i] == Mask::Boundary)
            .collect()
    }

    /// Largest absolute value over non-outside nodes (0 for none).
    pub fn value_scale(&self) -> f64 {
        let mut s = 0.0f64;
        for i in 0..self.len() {
            if self.mask[i] != Mask::Outside {
                s = s.max(self.values[i].abs());
            }
        }
        s
    }

    /// Returns a copy with every non-outside value mapped through `f`.
    ///
    /// Outside nodes keep the sentinel, so negation and affine shifts never
    /// manufacture a spurious `+1e30`.
    pub fn map_values<F: Fn(&[f64], f64) -> f64>(&self, f: F) -> Result<GridFunction> {
        let mut out = self.clone();
        for idx in 0..out.len() {
            if out.mask[idx] != Mask::Outside {
                let x = out.node_coords(idx);
                let v = f(&x, out.values[idx]);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "mapped nodal value at {x:?} is not finite"
                    )));
                }
                out.values[idx] = v;
            }
        }
        Ok(out)
    }

    /// Checks that `other` lives on the identical lattice with identical mask.
    pub fn same_lattice(&self, other: &GridFunction) -> Result<()> {
        if self.shape != other.shape
            || self.lo != other.lo
            || self.h != other.h
            || self.mask != other.mask
        {
            return Err(Error::Grid(
                "grid functions live on different lattices or masks".into(),
            ));
        }
        Ok(())
    }

    /// Writes the CSV interchange form: header `x1,...,xN,mask,value`, one
    /// row per node over the full lattice in row-major order.
    ///
    /// Values use the shortest digit string that parses back to the same
    /// `f64`, so a write/read round trip is bit-exact for every finite value.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let n = self.dim();
        let mut header = String::new();
        for i in 0..n {
            header.push_str(&format!("x{},", i + 1));
        }
        header.push_str("mask,value");
        writeln!(out, "{header}")?;
        for idx in 0..self.len() {
            let x = self.node_coords(idx);
            let mut row = String::new();
            for xi in &x {
                row.push_str(&format!("{xi},"));
            }
            row.push_str(&format!("{},{}", self.mask[idx].letter(), self.values[idx]));
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// Reads the CSV interchange form written by [`write_csv`].
    ///
    /// The lattice geometry is reconstructed from the coordinate columns and
    /// validated for uniform spacing; values parse bit-exactly.
    pub fn read_csv<R: BufRead>(input: R) -> Result<GridFunction> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Serialization("empty CSV: missing header".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[cols.len() - 2] != "mask" || cols[cols.len() - 1] != "value" {
            return Err(Error::Serialization(format!(
                "malformed CSV header {header:?}; expected x1,...,xN,mask,value"
            )));
        }
        let n = cols.len() - 2;
        for (i, c) in cols[..n].iter().enumerate() {
            let expect = format!("x{}", i + 1);
            if *c != expect {
                return Err(Error::Serialization(format!(
                    "coordinate column {i} is named {c:?}, expected {expect:?}"
                )));
            }
        }
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut masks: Vec<Mask> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != n + 2 {
                return Err(Error::Serialization(format!(
                    "CSV row has {} fields, expected {}",
                    parts.len(),
                    n + 2
                )));
            }
            let mut x = Vec::with_capacity(n);
            for p in &parts[..n] {
                x.push(p.parse::<f64>().map_err(|e| {
                    Error::Serialization(format!("bad coordinate {p:?}: {e}"))
                })?);
            }
            coords.push(x);
            masks.push(Mask::from_letter(parts[n])?);
            values.push(parts[n + 1].parse::<f64>().map_err(|e| {
                Error::Serialization(format!("bad value {:?}: {e}", parts[n + 1]))
            })?);
        }
        if coords.is_empty() {
            return Err(Error::Serialization("CSV holds no node rows".into()));
        }
        // Reconstruct the lattice: per-axis sorted unique coordinates.
        let mut shape = vec![0usize; n];
        let mut lo = vec![0.0f64; n];
        let mut h_candidates: Vec<f64> = Vec::new();
        for axis in 0..n {
            let mut vals: Vec<f64> = coords.iter().map(|c| c[axis]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
            shape[axis] = vals.len();
            lo[axis] = vals[0];
            for w in vals.windows(2) {
                h_candidates.push(w[1] - w[0]);
            }
        }
        let h = h_candidates
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Serialization(
                "cannot reconstruct a positive lattice spacing from CSV coordinates".into(),
            ));
        }
        for d in &h_candidates {
            if ((d / h) - (d / h).round()).abs() > 1e-6 {
                return Err(Error::Serialization(format!(
                    "non-uniform coordinate spacing {d} vs base {h}"
                )));
            }
        }
        let total: usize = shape.iter().product();
        if total != coords.len() {
            return Err(Error::Serialization(format!(
                "CSV holds {} rows but the reconstructed lattice has {total} nodes",
                coords.len()
            )));
        }
        // Validate row-major order against the reconstructed lattice.
        let mut multi = vec![0usize; n];
        for (idx, x) in coords.iter().enumerate() {
            unravel(idx, &shape, &mut multi);
            for i in 0..n {
                let expect = lo[i] + multi[i] as f64 * h;
                if (x[i] - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
                    return Err(Error::Serialization(format!(
                        "row {idx} carries coordinates {x:?}, expected lattice node at axis {i} value {expect}"
                    )));
                }
            }
        }
        for (idx, m) in masks.iter().enumerate() {
            if *m == Mask::Outside && values[idx] != NEG_SENTINEL {
                return Err(Error::Serialization(format!(
                    "outside node at row {idx} carries value {} instead of the sentinel",
                    values[idx]
                )));
            }
            if *m != Mask::Outside && !values[idx].is_finite() {
                return Err(Error::Serialization(format!(
                    "non-outside node at row {idx} carries non-finite value"
                )));
            }
        }
        Ok(GridFunction {
            lo,
            h,
            shape,
            mask: masks,
            values,
        })
    }
}

/// Row-major unravel of `idx` into `multi` for the given shape.
fn unravel(idx: usize, shape: &[usize], multi: &mut [usize]) {
    let mut rem = idx;
    for i in (0..shape.len()).rev() {
        multi[i] = rem % shape[i];
        rem /= shape[i];
    }
}

/// Flat index after an integer shift, or `None` if it leaves the lattice.
fn shifted_index(multi: &[usize], steps: &[i64], shape: &[usize]) -> Option<usize> {
    let mut idx = 0usize;
    for i in 0..multi.len() {
        let m = multi[i] as i64 + steps[i];
        if m < 0 || m >= shape[i] as i64 {
            return None;
        }
        idx = idx * shape[i] + m as usize;
    }
    Some(idx)
}

/// All nonzero offsets in `{-1,0,1}^n` (the diagonal neighbourhood).
fn neighbourhood_offsets(n: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut rem = code;
        let mut off = vec![0i64; n];
        for o in off.iter_mut() {
            *o = (rem % 3) as i64 - 1;
            rem /= 3;
        }
        if off.iter().any(|&d| d != 0) {
            out.push(off);
        }
    }
    out
}

/// Central-difference gradient at a node.
///
/// All axis neighbours must be non-outside; otherwise the stencil has left
/// the region where `u` carries values and the call fails with a grid error.
pub fn stencil_gradient(u: &GridFunction, idx: usize) -> Result<Vec<f64>> {
    let n = u.dim();
    let mut g = vec![0.0; n];
    for (axis, gi) in g.iter_mut().enumerate() {
        let mut steps = vec![0i64; n];
        steps[axis] = 1;
        let plus = reachable_value(u, idx, &steps)?;
        steps[axis] = -1;
        let minus = reachable_value(u, idx, &steps)?;
        *gi = (plus - minus) / (2.0 * u.h());
    }
    Ok(g)
}

/// Value at the node shifted by `steps`, or a grid error when the shift
/// leaves the lattice or lands on an outside node.
fn reachable_value(u: &GridFunction, idx: usize, steps: &[i64]) -> Result<f64> {
    match u.shifted(idx, steps) {
        Some(j) if u.mask(j) != Mask::Outside => Ok(u.value(j)),
        _ => Err(Error::Grid(format!(
            "stencil leaves the sampled region at node {:?} (offset {steps:?})",
            u.multi_index(idx)
        ))),
    }
}

/// Central second-difference Hessian at a node.
///
/// Diagonal entries use the standard three-point second difference; off-
/// diagonal entries the four-point cross difference.  The stencil is exact on
/// quadratic polynomials.  Every node it touches (axis and diagonal
/// neighbours) must be non-outside.
pub fn stencil_hessian(u: &GridFunction, idx: usize) -> Result<SymMat> {
    let n = u.dim();
    let h = u.h();
    let center = u.value(idx);
    if u.mask(idx) == Mask::Outside {
        return Err(Error::Grid(
            "Hessian stencil requested at an outside node".into(),
        ));
    }
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        let mut steps = vec![0i64; n];
        steps[i] = 1;
        let up = reachable_value(u, idx, &steps)?;
        steps[i] = -1;
        let dn = reachable_value(u, idx, &steps)?;
        flat[i * n + i] = (up - 2.0 * center + dn) / (h * h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut steps = vec![0i64; n];
            let mut corner = |si: i64, sj: i64| -> Result<f64> {
                steps[i] = si;
                steps[j] = sj;
                reachable_value(u, idx, &steps)
            };
            let pp = corner(1, 1)?;
            let pm = corner(1, -1)?;
            let mp = corner(-1, 1)?;
            let mm = corner(-1, -1)?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            flat[i * n + j] = v;
            flat[j * n + i] = v;
        }
    }
    SymMat::from_flat(n, &flat)
}

/// Inclusive box of multi-indices (a sub-lattice window).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl NodeBox {
    /// Validates the box against a grid: inside the lattice, at least 3
    /// nodes per axis, and no outside nodes inside the window.
    fn validate(&self, u: &GridFunction) -> Result<()> {
        let n = u.dim();
        if self.lo.len() != n || self.hi.len() != n {
            return Err(Error::Dimension(format!(
                "node box dimension {} vs grid dimension {n}",
                self.lo.len()
            )));
        }
        for i in 0..n {
            if self.hi[i] >= u.shape()[i] || self.lo[i] > self.hi[i] {
                return Err(Error::Grid(format!(
                    "node box axis {i} spans {}..={} outside the lattice",
                    self.lo[i], self.hi[i]
                )));
            }
            if self.hi[i] - self.lo[i] + 1 < 3 {
                return Err(Error::Grid(format!(
                    "node box axis {i} holds fewer than 3 nodes; too small to test"
                )));
            }
        }
        for idx in self.indices(u) {
            if u.mask(idx) == Mask::Outside {
                return Err(Error::Grid(
                    "node box touches outside nodes; shrink it to the sampled region".into(),
                ));
            }
        }
        Ok(())
    }

    /// Flat indices of all nodes in the box, row-major.
    fn indices(&self, u: &GridFunction) -> Vec<usize> {
        let n = u.dim();
        let mut out = Vec::new();
        let mut multi = self.lo.clone();
        loop {
            out.push(u.flat_index(&multi).expect("validated box"));
            let mut axis = n;
            while axis > 0 {
                axis -= 1;
                if multi[axis] < self.hi[axis] {
                    multi[axis] += 1;
                    for i in (axis + 1)..n {
                        multi[i] = self.lo[i];
                    }
                    break;
                }
                if axis == 0 {
                    return out;
                }
            }
        }
    }

    /// True when the multi-index lies on a face of the box.
    fn on_face(&self, multi: &[usize]) -> bool {
        multi
            .iter()
            .enumerate()
            .any(|(i, &m)| m == self.lo[i] || m == self.hi[i])
    }

    /// Splits along every axis with at least 5 nodes into halves sharing the
    /// middle plane; children keep at least 3 nodes per axis.
    fn children(&self) -> Vec<NodeBox> {
        let n = self.lo.len();
        let mut out = Vec::new();
        for axis in 0..n {
            let span = self.hi[axis] - self.lo[axis] + 1;
            if span >= 5 {
                let mid = self.lo[axis] + span / 2;
                let mut a = self.clone();
                a.hi[axis] = mid;
                let mut b = self.clone();
                b.lo[axis] = mid;
                out.push(a);
                out.push(b);
            }
        }
        out
    }

    /// Largest window of non-outside nodes obtained by shrinking the full
    /// lattice symmetrically; `None` when no window of 3+ nodes per axis is
    /// clean.
    pub fn inscribed(u: &GridFunction) -> Option<NodeBox> {
        let n = u.dim();
        let mut lo = vec![0usize; n];
        let mut hi: Vec<usize> = u.shape().iter().map(|s| s - 1).collect();
        loop {
            if (0..n).any(|i| hi[i] < lo[i] || hi[i] - lo[i] + 1 < 3) {
                return None;
            }
            let candidate = NodeBox {
                lo: lo.clone(),
                hi: hi.clone(),
            };
            let clean = candidate
                .indices(u)
                .iter()
                .all(|&idx| u.mask(idx) != Mask::Outside);
            if clean {
                return Some(candidate);
            }
            for i in 0..n {
                lo[i] += 1;
                hi[i] -= 1;
            }
        }
    }
}

/// Affine function `x -> slope·x + intercept`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AffineWitness {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffineWitness {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>() + self.intercept
    }
}

/// Witness of failed subaffinity: a quadratic that dominates `u` near `x0`
/// and touches it there.
///
/// The dominating quadratic is `q(x) = affine(x) + ½ xᵀ·hessian·x`; replaying
/// the triple on the grid function that produced it shows `q >= u` on a
/// lattice ball around `x0` with equality at `x0`, and `eps > 0` records the
/// strength of the strict concavity (`hessian = -2·eps·I`).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ContactTriple {
    pub x0: Vec<f64>,
    pub eps: f64,
    pub affine: AffineWitness,
    pub hessian: SymMat,
}

impl ContactTriple {
    /// Value of the dominating quadratic at `x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let q: f64 = self
            .hessian
            .quad_form(x)
            .expect("witness dimensions are consistent");
        self.affine.eval(x) + 0.5 * q
    }
}

/// Replays a contact triple: the stored quadratic must dominate `u` on the
/// lattice ball of `radius_nodes` steps around `x0` and touch it there.
pub fn contact_replay(u: &GridFunction, triple: &ContactTriple, radius_nodes: usize) -> Result<bool> {
    let n = u.dim();
    if triple.x0.len() != n {
        return Err(Error::Dimension(format!(
            "witness dimension {} vs grid dimension {n}",
            triple.x0.len()
        )));
    }
    // Locate the lattice node nearest the stored contact point.
    let mut multi = Vec::with_capacity(n);
    for i in 0..n {
        let t = (triple.x0[i] - u.lo[i]) / u.h;
        let m = t.round();
        if (t - m).abs() > 1e-6 || m < 0.0 || m as usize >= u.shape()[i] {
            return Err(Error::Grid(format!(
                "contact point {:?} is not a lattice node of this grid",
                triple.x0
            )));
        }
        multi.push(m as usize);
    }
    let idx0 = u.flat_index(&multi)?;
    if u.mask(idx0) == Mask::Outside {
        return Err(Error::Grid("contact point is an outside node".into()));
    }
    let scale = 1.0 + u.value_scale() + triple.quadratic(&triple.x0).abs();
    let tol = REL_TOL * scale;
    if (triple.quadratic(&u.node_coords(idx0)) - u.value(idx0)).abs() > tol {
        return Ok(false);
    }
    let r = radius_nodes as i64;
    let mut ok = true;
    visit_lattice_ball(u, idx0, r, |j, _| {
        let x = u.node_coords(j);
        if triple.quadratic(&x) < u.value(j) - tol {
            ok = false;
        }
    });
    Ok(ok)
}

/// Calls `f(flat_index, multi_offset)` for every non-outside node within
/// `r` lattice steps (Euclidean multi-index distance) of `idx0`.
fn visit_lattice_ball<F: FnMut(usize, &[i64])>(u: &GridFunction, idx0: usize, r: i64, mut f: F) {
    let n = u.dim();
    let mut off = vec![-r; n];
    loop {
        let d2: i64 = off.iter().map(|d| d * d).sum();
        if d2 <= r * r {
            if let Some(j) = u.shifted(idx0, &off) {
                if u.mask(j) != Mask::Outside {
                    f(j, &off);
                }
            }
        }
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if off[axis] < r {
                off[axis] += 1;
                for o in off.iter_mut().skip(axis + 1) {
                    *o = -r;
                }
                break;
            }
        }
    }
}

/// Discrete maximum principle of `u` against affine functions on a window.
///
/// Every dyadic sub-box `K` of `region` (at least 3 nodes per axis) is tested
/// against a dictionary of affine functions: the least-squares fit to `u` on
/// the face nodes of `K`, the planes interpolating `u` at each corner of `K`
/// and its axis-adjacent corners, and the constant planes through the extreme
/// face values.  `u` passes when `max_K (u - a) <= max_{faces K} (u - a) +
/// tol` for every box and every dictionary plane.
///
/// On failure the violating box is converted into a [`ContactTriple`]: a
/// strictly concave quadratic that dominates `u` near an interior node of the
/// box and touches it there.  `None` means the check passed.
pub fn subaffine_check(u: &GridFunction, region: &NodeBox) -> Result<Option<ContactTriple>> {
    region.validate(u)?;
    // Axis splits commute, so the same sub-box is reachable along many split
    // orders; the visited set keeps the family linear in its true size.
    let mut visited: std::collections::HashSet<(Vec<usize>, Vec<usize>)> =
        std::collections::HashSet::new();
    let mut queue = vec![region.clone()];
    while let Some(k) = queue.pop() {
        if !visited.insert((k.lo.clone(), k.hi.clone())) {
            continue;
        }
        if visited.len() > 100_000 {
            return Err(Error::Grid(
                "dyadic box family exceeded 100000 members; region too large".into(),
            ));
        }
        if let Some(t) = test_box(u, &k)? {
            return Ok(Some(t));
        }
        queue.extend(k.children());
    }
    Ok(None)
}

/// Tests one box against the affine dictionary; converts the worst violation
/// into a contact triple.
fn test_box(u: &GridFunction, k: &NodeBox) -> Result<Option<ContactTriple>> {
    let n = u.dim();
    let idxs = k.indices(u);
    let mut face = Vec::new();
    let mut inner = Vec::new();
    for &idx in &idxs {
        if k.on_face(&u.multi_index(idx)) {
            face.push(idx);
        } else {
            inner.push(idx);
        }
    }
    if inner.is_empty() {
        return Ok(None);
    }
    let mut dictionary: Vec<AffineWitness> = Vec::new();
    if let Some(a) = least_squares_affine(u, &face) {
        dictionary.push(a);
    }
    // Corner interpolants: for each corner of K, the plane through its value
    // and the values at the axis-adjacent corners.
    let corners = 1usize << n;
    for code in 0..corners {
        let mut base = vec![0usize; n];
        for i in 0..n {
            base[i] = if code & (1 << i) != 0 { k.hi[i] } else { k.lo[i] };
        }
        let idx_base = u.flat_index(&base)?;
        let v_base = u.value(idx_base);
        let mut slope = vec![0.0; n];
        let xb = u.node_coords(idx_base);
        let mut ok = true;
        for i in 0..n {
            let mut other = base.clone();
            other[i] = if base[i] == k.lo[i] { k.hi[i] } else { k.lo[i] };
            let idx_other = u.flat_index(&other)?;
            let xo = u.node_coords(idx_other);
            let dv = u.value(idx_other) - v_base;
            let dx = xo[i] - xb[i];
            if dx.abs() < 1e-300 {
                ok = false;
                break;
            }
            slope[i] = dv / dx;
        }
        if ok {
            let intercept = v_base - slope.iter().zip(&xb).map(|(s, x)| s * x).sum::<f64>();
            dictionary.push(AffineWitness { slope, intercept });
        }
    }
    // Supporting constants at the extreme face values.
    let face_max = face
        .iter()
        .map(|&i| u.value(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let face_min = face
        .iter()
        .map(|&i| u.value(i))
        .fold(f64::INFINITY, f64::min);
    dictionary.push(AffineWitness {
        slope: vec![0.0; n],
        intercept: face_max,
    });
    dictionary.push(AffineWitness {
        slope: vec![0.0; n],
        intercept: face_min,
    });

    let mut worst: Option<(f64, AffineWitness)> = None;
    for a in &dictionary {
        let gap_face = face
            .iter()
            .map(|&i| u.value(i) - a.eval(&u.node_coords(i)))
            .fold(f64::NEG_INFINITY, f64::max);
        let gap_all = idxs
            .iter()
            .map(|&i| u.value(i) - a.eval(&u.node_coords(i)))
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = 1.0 + gap_face.abs() + gap_all.abs() + u.value_scale();
        let excess = gap_all - gap_face;
        if excess > 1e-7 * scale && worst.as_ref().map_or(true, |(w, _)| excess > *w) {
            worst = Some((excess, a.clone()));
        }
    }
    match worst {
        None => Ok(None),
        Some((_, a)) => Ok(Some(build_contact(u, k, &a))),
    }
}

/// Least-squares affine fit of `u` over the given nodes (normal equations,
/// Gaussian elimination); `None` when the geometry is degenerate.
fn least_squares_affine(u: &GridFunction, nodes: &[usize]) -> Option<AffineWitness> {
    let n = u.dim();
    let m = n + 1;
    let mut ata = vec![0.0f64; m * m];
    let mut atb = vec![0.0f64; m];
    for &idx in nodes {
        let x = u.node_coords(idx);
        let mut row = Vec::with_capacity(m);
        row.extend_from_slice(&x);
        row.push(1.0);
        let v = u.value(idx);
        for i in 0..m {
            atb[i] += row[i] * v;
            for j in 0..m {
                ata[i * m + j] += row[i] * row[j];
            }
        }
    }
    solve_dense(&mut ata, &mut atb, m).map(|sol| AffineWitness {
        slope: sol[..n].to_vec(),
        intercept: sol[n],
    })
}

/// Solves the `m×m` system in place with partial pivoting; `None` when
/// numerically singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let mut piv = col;
        for r in (col + 1)..m {
            if a[r * m + col].abs() > a[piv * m + col].abs() {
                piv = r;
            }
        }
        if a[piv * m + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for j in 0..m {
                a.swap(col * m + j, piv * m + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * m + col];
        for r in (col + 1)..m {
            let f = a[r * m + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..m {
                a[r * m + j] -= f * a[col * m + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut sol = vec![0.0; m];
    for col in (0..m).rev() {
        let mut s = b[col];
        for j in (col + 1)..m {
            s -= a[col * m + j] * sol[j];
        }
        sol[col] = s / a[col * m + col];
    }
    Some(sol)
}

/// Converts a box violation of the affine maximum principle into a strictly
/// concave dominating quadratic with an interior contact node.
///
/// With `v = u - a`, the violation means `max_K v` exceeds the face maximum
/// by a gap `g`.  Centering a paraboloid of curvature `eps = g / (2 R²)` at
/// the interior maximizer pushes every face node strictly below, so the
/// shifted maximizer of `v + eps·|x - x1|²` is interior and the quadratic
/// `a(x) + c - eps·|x - x1|²` dominates `u` on the whole box and touches it
/// at that node.
fn build_contact(u: &GridFunction, k: &NodeBox, a: &AffineWitness) -> ContactTriple {
    let n = u.dim();
    let idxs = k.indices(u);
    let v = |idx: usize| u.value(idx) - a.eval(&u.node_coords(idx));
    let mut best = idxs[0];
    let mut face_max = f64::NEG_INFINITY;
    for &idx in &idxs {
        if v(idx) > v(best) {
            best = idx;
        }
        if k.on_face(&u.multi_index(idx)) {
            face_max = face_max.max(v(idx));
        }
    }
    let g = v(best) - face_max;
    let x1 = u.node_coords(best);
    let r2 = idxs
        .iter()
        .map(|&idx| {
            let x = u.node_coords(idx);
            x.iter().zip(&x1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .fold(0.0f64, f64::max)
        .max(u.h() * u.h());
    let eps = (g / (2.0 * r2)).max(1e-300);
    let phi = |idx: usize| {
        let x = u.node_coords(idx);
        let d2: f64 = x.iter().zip(&x1).map(|(a, b)| (a - b) * (a - b)).sum();
        v(idx) + eps * d2
    };
    let mut contact = best;
    for &idx in &idxs {
        if phi(idx) > phi(contact) {
            contact = idx;
        }
    }
    let c = phi(contact);
    // q(x) = a(x) + c - eps·|x - x1|², rewritten as affine + ½ xᵀ(-2 eps I)x.
    let mut slope = a.slope.clone();
    for i in 0..n {
        slope[i] += 2.0 * eps * x1[i];
    }
    let x1_norm2: f64 = x1.iter().map(|t| t * t).sum();
    let intercept = a.intercept + c - eps * x1_norm2;
    ContactTriple {
        x0: u.node_coords(contact),
        eps,
        affine: AffineWitness { slope, intercept },
        hessian: SymMat::scaled_identity(n, -2.0 * eps)
            .expect("grid dimension is within the supported range"),
    }
}

/// Parameters of the quadratic-contact subharmonicity test.
#[derive(Debug, Clone)]
pub struct SubharmonicParams {
    /// Enlargement added to the constraint set before the membership check
    /// (absorbs the `O(h)` discretization error of the stencil).
    pub shell: f64,
    /// Number of identity shifts `±k·h·I` added to the dictionary.
    pub shift_steps: usize,
    /// Number of seeded random rotations of the stencil Hessian added to the
    /// dictionary.
    pub rotations: usize,
    /// Radius (in lattice steps) of the ball on which contact is checked.
    pub ball_radius_nodes: usize,
    /// Seed for the rotation draws.
    pub seed: u64,
}

impl SubharmonicParams {
    /// Defaults scaled to a lattice spacing: shell `2h`, three identity
    /// shifts, eight rotations, contact ball of three steps.
    pub fn for_spacing(h: f64) -> SubharmonicParams {
        SubharmonicParams {
            shell: 2.0 * h,
            shift_steps: 3,
            rotations: 8,
            ball_radius_nodes: 3,
            seed: 0x5EED,
        }
    }
}

/// Witness of failed subharmonicity at a node: a dictionary Hessian whose
/// quadratic touches `u` from above at the node yet lies outside the
/// enlarged constraint set.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SubharmonicWitness {
    pub x0: Vec<f64>,
    pub hessian: SymMat,
}

/// Quadratic-contact test of `u` against the set map at one interior node.
///
/// A dictionary of candidate Hessians is built from the stencil Hessian
/// `H0`: the shifts `H0 ± k·h·I` and seeded random rotations `R H0 Rᵀ ± h·I`.
/// Each candidate `H` defines the quadratic with the central-difference
/// gradient of `u` at the node; the quadratic is lifted by the vertical shift
/// that makes it touch `u` from above on the lattice ball.  When the contact
/// point is the node itself, viscosity semantics require `H` to lie in the
/// constraint set there, up to the `shell` enlargement; a candidate that
/// touches at the node but escapes the enlarged set is returned as a witness.
///
/// `None` means every touching candidate belongs to the enlarged set.
pub fn theta_subharmonic_test(
    u: &GridFunction,
    map: &EllipticMapSpec,
    idx: usize,
    params: &SubharmonicParams,
) -> Result<Option<SubharmonicWitness>> {
    if u.mask(idx) != Mask::Interior {
        return Err(Error::Precondition(
            "subharmonicity is tested at interior nodes only".into(),
        ));
    }
    if map.dim() != u.dim() {
        return Err(Error::Dimension(format!(
            "map dimension {} vs grid dimension {}",
            map.dim(),
            u.dim()
        )));
    }
    if !(params.shell > 0.0 && params.shell.is_finite()) {
        return Err(Error::InvalidParameter(
            "enlargement shell must be positive".into(),
        ));
    }
    let n = u.dim();
    let h = u.h();
    let x0 = u.node_coords(idx);
    let grad = stencil_gradient(u, idx)?;
    let h0 = stencil_hessian(u, idx)?;
    let theta = map.at(&x0)?;

    let mut dictionary: Vec<SymMat> = vec![h0.clone()];
    for k in 1..=params.shift_steps {
        let t = k as f64 * h;
        dictionary.push(h0.add_scaled_identity(t));
        dictionary.push(h0.add_scaled_identity(-t));
    }
    let mut rng = seeded_rng(params.seed);
    for _ in 0..params.rotations {
        let r = random_rotation(&mut rng, n);
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        s += r[i][p] * h0.get(p, q) * r[j][q];
                    }
                }
                flat[i * n + j] = s;
            }
        }
        let rot = SymMat::from_flat(n, &flat)?;
        dictionary.push(rot.add_scaled_identity(h));
        dictionary.push(rot.add_scaled_identity(-h));
    }

    let radius = params.ball_radius_nodes as i64;
    let scale = 1.0 + u.value_scale() + h0.opnorm();
    for cand in dictionary {
        // Gap u - q with q(x) = u(x0) + g·(x-x0) + ½(x-x0)ᵀ·cand·(x-x0);
        // the vertical shift that creates contact is max of the gap, and the
        // contact sits at the node exactly when the node attains that max.
        let mut max_gap = f64::NEG_INFINITY;
        visit_lattice_ball(u, idx, radius, |j, _| {
            let x = u.node_coords(j);
            let d: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let lin: f64 = grad.iter().zip(&d).map(|(g, t)| g * t).sum();
            let quad = cand.quad_form(&d).expect("dimension verified");
            let gap = u.value(j) - (u.value(idx) + lin + 0.5 * quad);
            if gap > max_gap {
                max_gap = gap;
            }
        });
        let gap_at_node = 0.0; // u(x0) - q(x0) before the vertical shift
        if gap_at_node >= max_gap - REL_TOL * scale {
            // Contact at the node: the candidate must belong to the set.
            if !theta.enlarge_contains(&cand, params.shell)? {
                return Ok(Some(SubharmonicWitness {
                    x0,
                    hessian: cand,
                }));
            }
        }
    }
    Ok(None)
}

/// Quadratic-penalty regularization `u^eps(x) = max_z [u(z) - |x-z|²/eps]`.
///
/// The maximum runs over all non-outside lattice nodes `z`; outside nodes
/// keep the sentinel.  The result dominates `u` pointwise (`z = x` is always
/// admissible) and, for fixed `z`, each candidate is a concave paraboloid in
/// `x`, so second differences of the output along any lattice direction `v`
/// are bounded below by `-2|v|²/eps` — the discrete form of
/// `1/eps`-semiconvexity.
pub fn sup_convolution(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization parameter must be positive, got {eps}"
        )));
    }
    let mut out = u.clone();
    let nodes: Vec<usize> = (0..u.len())
        .filter(|&i| u.mask(i) != Mask::Outside)
        .collect();
    let coords: Vec<Vec<f64>> = nodes.iter().map(|&i| u.node_coords(i)).collect();
    for (xi, &x_idx) in nodes.iter().enumerate() {
        let x = &coords[xi];
        let mut best = f64::NEG_INFINITY;
        for (zi, &z_idx) in nodes.iter().enumerate() {
            let z = &coords[zi];
            let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            let cand = u.value(z_idx) - d2 / eps;
            if cand > best {
                best = cand;
            }
        }
        out.values[x_idx] = best;
    }
    Ok(out)
}

/// Large-step second-difference functional at a node.
///
/// Over primitive integer directions `e` with `|e|² <= 5` and step counts `k`
/// with `k·h·|e|` not exceeding the largest ladder entry, the functional is
/// the maximum of
///
/// ```text
/// 2 · ( u(x + k·h·e) - u(x) - k·h·<Du, e> ) / (k·h·|e|)²
/// ```
///
/// with `Du` the central-difference gradient.  On a quadratic `½ xᵀA x` every
/// term equals the Rayleigh quotient of `A` along `e/|e|`, so the maximum
/// recovers the top eigenvalue within the angular resolution of the
/// direction family (exactly, when an eigenframe direction belongs to the
/// family); on an affine function it is zero; on `¼|x|⁴` at the origin every
/// term is `(k·h·|e|)²/2`, so the maximum stays below `5h²` for the ladder
/// `{h, 2h, 3h}`.  The returned value is the maximum over the whole family —
/// the conservative discrete stand-in for the limsup as the step tends to 0.
pub fn slodkowski_k(u: &GridFunction, idx: usize, eps_ladder: &[f64]) -> Result<f64> {
    if eps_ladder.is_empty() {
        return Err(Error::InvalidParameter(
            "the step ladder must hold at least one entry".into(),
        ));
    }
    for &e in eps_ladder {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ladder entries must be positive and finite, got {e}"
            )));
        }
    }
    if u.mask(idx) != Mask::Interior {
        return Err(Error::Precondition(
            "the functional is evaluated at interior nodes only".into(),
        ));
    }
    let n = u.dim();
    let h = u.h();
    let grad = stencil_gradient(u, idx)?;
    let cap = eps_ladder.iter().cloned().fold(0.0f64, f64::max);
    let mut best = f64::NEG_INFINITY;
    let mut terms = 0usize;
    for e in primitive_directions(n) {
        let e_norm = (e.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
        let mut k = 1i64;
        while (k as f64) * h * e_norm <= cap * (1.0 + 1e-12) {
            let steps: Vec<i64> = e.iter().map(|&c| c * k).collect();
            if let Some(j) = u.shifted(idx, &steps) {
                if u.mask(j) != Mask::Outside {
                    let step_len = k as f64 * h * e_norm;
                    let lin: f64 = grad
                        .iter()
                        .zip(&e)
                        .map(|(g, &c)| g * (k as f64) * h * (c as f64))
                        .sum();
                    let term = 2.0 * (u.value(j) - u.value(idx) - lin) / (step_len * step_len);
                    best = best.max(term);
                    terms += 1;
                }
            }
            k += 1;
        }
    }
    if terms == 0 {
        return Err(Error::Grid(
            "no lattice step of the ladder stays inside the sampled region".into(),
        ));
    }
    Ok(best)
}

/// Primitive integer directions with squared norm at most 5 (both signs).
fn primitive_directions(n: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut v = vec![-2i64; n];
    loop {
        let norm2: i64 = v.iter().map(|c| c * c).sum();
        if norm2 >= 1 && norm2 <= 5 {
            let g = v.iter().fold(0i64, |acc, &c| gcd(acc, c.abs()));
            if g == 1 {
                out.push(v.clone());
            }
        }
        let mut axis = n;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if v[axis] < 2 {
                v[axis] += 1;
                for c in v.iter_mut().skip(axis + 1) {
                    *c = -2;
                }
                break;
            }
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Interior ordering violation found by the comparison harness.
#[derive(Debug, Clone)]
pub struct ComparisonViolation {
    /// Flat index of the violating node.
    pub node: usize,
    /// Coordinates of the violating node.
    pub x: Vec<f64>,
    /// Amount by which the subsolution exceeds the supersolution there.
    pub gap: f64,
    /// Subaffine witness of the difference, when one is extractable.
    pub subaffine: Option<ContactTriple>,
}

/// Outcome of the discrete comparison of a subsolution against a
/// supersolution.
///
/// The two one-sided weak-solution tests are recorded as flags rather than
/// gating the verdict: `u_subharmonic` reports whether `u` passed the
/// quadratic-contact test at every interior node, and `dual_supersolution`
/// whether `-w` passed the same test against the dual map.  `pass` is the
/// interior ordering `u <= w + tol`; a violation carries the worst node and,
/// when available, a subaffine witness of `u - w`.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub u_subharmonic: bool,
    pub dual_supersolution: bool,
    pub pass: bool,
    pub violation: Option<ComparisonViolation>,
}

/// Orders a discrete subsolution `u` against a supersolution `w` on the same
/// lattice.
///
/// Preconditions: the lattices and masks agree, and `u <= w + tol` at every
/// boundary node — a boundary violation is a precondition error, not a
/// comparison verdict.  The subharmonicity of `u` (against `map`) and of
/// `-w` (against the dual map) are then evaluated at every interior node and
/// recorded as flags in the report.  The verdict is the interior ordering;
/// on failure the worst node is returned together with a subaffine witness
/// of `u - w` extracted from the largest clean sub-window, when one exists.
pub fn comparison_harness(
    u: &GridFunction,
    w: &GridFunction,
    map: &EllipticMapSpec,
) -> Result<ComparisonReport> {
    u.same_lattice(w)?;
    if map.dim() != u.dim() {
        return Err(Error::Dimension(format!(
            "map dimension {} vs grid dimension {}",
            map.dim(),
            u.dim()
        )));
    }
    let scale = 1.0 + u.value_scale() + w.value_scale();
    let tol = REL_TOL * scale;
    for idx in u.boundary_indices() {
        if u.value(idx) > w.value(idx) + tol {
            return Err(Error::Precondition(format!(
                "boundary ordering fails at node {:?}: subsolution {} exceeds supersolution {}",
                u.node_coords(idx),
                u.value(idx),
                w.value(idx)
            )));
        }
    }
    let params = SubharmonicParams::for_spacing(u.h());
    let dual = map.dual_map(crate::DEFAULT_MARGIN)?;
    let neg_w = w.map_values(|_, v| -v)?;
    let mut u_ok = true;
    let mut w_ok = true;
    for idx in u.interior_indices() {
        // Nodes whose stencil pokes outside the sampled region are skipped;
        // the tests are one-sided evidence, not a proof obligation there.
        match theta_subharmonic_test(u, map, idx, &params) {
            Ok(Some(_)) => u_ok = false,
            Ok(None) => {}
            Err(Error::Grid(_)) => {}
            Err(e) => return Err(e),
        }
        match theta_subharmonic_test(&neg_w, &dual, idx, &params) {
            Ok(Some(_)) => w_ok = false,
            Ok(None) => {}
            Err(Error::Grid(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mut worst: Option<(usize, f64)> = None;
    for idx in u.interior_indices() {
        let gap = u.value(idx) - w.value(idx);
        if gap > tol && worst.map_or(true, |(_, g)| gap > g) {
            worst = Some((idx, gap));
        }
    }
    match worst {
        None => Ok(ComparisonReport {
            u_subharmonic: u_ok,
            dual_supersolution: w_ok,
            pass: true,
            violation: None,
        }),
        Some((idx, gap)) => {
            // Build u - w on the shared lattice and extract a subaffine
            // witness from the largest clean sub-window, when one exists.
            let mut d = u.clone();
            for i in 0..d.len() {
                if d.mask[i] != Mask::Outside {
                    d.values[i] = u.value(i) - w.value(i);
                }
            }
            let witness = NodeBox::inscribed(&d)
                .and_then(|b| subaffine_check(&d, &b).ok())
                .flatten();
            Ok(ComparisonReport {
                u_subharmonic: u_ok,
                dual_supersolution: w_ok,
                pass: false,
                violation: Some(ComparisonViolation {
                    node: idx,
                    x: u.node_coords(idx),
                    gap,
                    subaffine: witness,
                }),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellset::ConstraintRule;

    fn box2(half: f64) -> Domain {
        Domain::Box {
            lo: vec![-half, -half],
            hi: vec![half, half],
        }
    }

    fn psd_map(domain: Domain) -> EllipticMapSpec {
        EllipticMapSpec::from_constraint(domain, ConstraintRule::Psd).expect("valid map")
    }

    fn node_at(u: &GridFunction, x: &[f64]) -> usize {
        (0..u.len())
            .find(|&i| {
                let c = u.node_coords(i);
                c.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-9)
            })
            .expect("requested node exists")
    }

    #[test]
    fn lattice_masks_separate_interior_boundary_and_outside() {
        let g = GridFunction::lattice(&box2(1.0), 0.25).expect("box lattice");
        assert_eq!(g.shape(), &[9, 9]);
        // Faces (corners included) are boundary, inner nodes interior.
        assert_eq!(g.mask(node_at(&g, &[-1.0, -1.0])), Mask::Boundary);
        assert_eq!(g.mask(node_at(&g, &[1.0, 0.0])), Mask::Boundary);
        assert_eq!(g.mask(node_at(&g, &[0.0, 0.0])), Mask::Interior);
        assert!(g.interior_indices().len() == 49);
        assert!(g
            .boundary_indices()
            .iter()
            .all(|&i| g.value(i).is_finite()));

        let ball = GridFunction::lattice(&Domain::unit_ball(2), 0.2)
            .expect("ball lattice");
        let n_int = ball.interior_indices().len();
        let n_bnd = ball.boundary_indices().len();
        assert!(n_int > 0 && n_bnd > 0);
        // Outside corners of the bounding box carry the sentinel.
        let corner = node_at(&ball, &[-1.0, -1.0]);
        assert_eq!(ball.mask(corner), Mask::Outside);
        assert_eq!(ball.value(corner), NEG_SENTINEL);
    }

    #[test]
    fn lattice_rejects_grids_with_too_few_interior_nodes() {
        let err = GridFunction::lattice(&box2(1.0), 0.9).unwrap_err();
        assert!(matches!(err, Error::Grid(_)));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let u = GridFunction::sample(&Domain::unit_ball(2), 0.25, |x| {
            (x[0] * 1.7).sin() + x[1] * std::f64::consts::PI / 3.0
        })
        .expect("sampled");
        let mut buf: Vec<u8> = Vec::new();
        u.write_csv(&mut buf).expect("write");
        let v = GridFunction::read_csv(std::io::BufReader::new(&buf[..])).expect("read");
        assert_eq!(u.shape(), v.shape());
        assert!((u.h() - v.h()).abs() < 1e-12);
        for i in 0..u.len() {
            assert_eq!(u.mask(i), v.mask(i), "mask differs at node {i}");
            assert!(
                u.value(i).to_bits() == v.value(i).to_bits(),
                "value not bit-exact at node {i}: {} vs {}",
                u.value(i),
                v.value(i)
            );
        }
        // A second round trip through text is byte-identical.
        let mut buf2: Vec<u8> = Vec::new();
        v.write_csv(&mut buf2).expect("write again");
        assert_eq!(buf, buf2);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let bad_header = "a,b,mask,value\n0,0,I,1\n";
        assert!(GridFunction::read_csv(bad_header.as_bytes()).is_err());
        let bad_row = "x1,x2,mask,value\n0,0,I\n";
        assert!(GridFunction::read_csv(bad_row.as_bytes()).is_err());
        let bad_mask = "x1,x2,mask,value\n0,0,Q,1\n";
        assert!(GridFunction::read_csv(bad_mask.as_bytes()).is_err());
    }

    #[test]
    fn stencil_hessian_is_exact_on_quadratics() {
        let dom = box2(1.0);
        let half_sq = GridFunction::sample(&dom, 0.125, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let cross = GridFunction::sample(&dom, 0.125, |x| x[0] * x[1]).expect("sampled");
        let affine = GridFunction::sample(&dom, 0.125, |x| 2.0 * x[0] - 3.0 * x[1] + 0.7)
            .expect("sampled");
        for &idx in half_sq.interior_indices().iter().step_by(7) {
            let h1 = stencil_hessian(&half_sq, idx).expect("interior stencil");
            let h2 = stencil_hessian(&cross, idx).expect("interior stencil");
            let h3 = stencil_hessian(&affine, idx).expect("interior stencil");
            for i in 0..2 {
                for j in 0..2 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    let cr = if i != j { 1.0 } else { 0.0 };
                    assert!((h1.get(i, j) - id).abs() < 1e-12);
                    assert!((h2.get(i, j) - cr).abs() < 1e-12);
                    assert!(h3.get(i, j).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stencil_hessian_fails_when_the_stencil_leaves_the_sampled_region() {
        let ball = GridFunction::sample(&Domain::unit_ball(2), 0.2, |x| {
            x[0] + x[1]
        })
        .expect("sampled");
        // The boundary mask covers the full diagonal neighbourhood of the
        // interior, so interior stencils always close.
        for idx in ball.interior_indices() {
            assert!(stencil_hessian(&ball, idx).is_ok());
        }
        // Boundary nodes have outside neighbours and outside nodes carry no
        // values; both are rejected with a grid error.
        let mut saw_boundary_error = false;
        for idx in ball.boundary_indices() {
            if let Err(Error::Grid(_)) = stencil_hessian(&ball, idx) {
                saw_boundary_error = true;
            }
        }
        assert!(saw_boundary_error, "rim stencils must poke outside");
        let corner = node_at(&ball, &[-1.0, -1.0]);
        assert!(matches!(
            stencil_hessian(&ball, corner),
            Err(Error::Grid(_))
        ));
    }

    #[test]
    fn subaffine_passes_max_of_planes_and_saddle() {
        let dom = box2(1.0);
        let planes = GridFunction::sample(&dom, 0.125, |x| {
            (x[0]).max(-2.0 * x[0] + x[1] + 0.3)
        })
        .expect("sampled");
        let saddle =
            GridFunction::sample(&dom, 0.125, |x| x[0] * x[0] - x[1] * x[1]).expect("sampled");
        let region = NodeBox {
            lo: vec![0, 0],
            hi: vec![16, 16],
        };
        assert!(subaffine_check(&planes, &region).expect("check runs").is_none());
        assert!(subaffine_check(&saddle, &region).expect("check runs").is_none());
    }

    #[test]
    fn subaffine_flags_strict_concavity_and_replay_confirms() {
        let dom = box2(1.0);
        let u = GridFunction::sample(&dom, 0.125, |x| -(x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let region = NodeBox {
            lo: vec![0, 0],
            hi: vec![16, 16],
        };
        let triple = subaffine_check(&u, &region)
            .expect("check runs")
            .expect("strict concavity must be flagged");
        assert!(triple.eps > 0.0);
        // The dominating quadratic curves down with Hessian -2·eps·I.
        assert!((triple.hessian.get(0, 0) + 2.0 * triple.eps).abs() < 1e-15);
        assert!(triple.hessian.get(0, 1).abs() < 1e-15);
        assert!(contact_replay(&u, &triple, 3).expect("replay runs"));
        // Contact happens away from the region faces.
        assert!(triple.x0.iter().all(|c| c.abs() < 1.0));
    }

    #[test]
    fn contact_replay_rejects_forged_witnesses() {
        let dom = box2(1.0);
        let u = GridFunction::sample(&dom, 0.125, |x| -(x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let region = NodeBox {
            lo: vec![0, 0],
            hi: vec![16, 16],
        };
        let triple = subaffine_check(&u, &region)
            .expect("check runs")
            .expect("witness");
        // Lifting the quadratic destroys the contact; lowering it destroys
        // the domination.
        let mut lifted = triple.clone();
        lifted.affine.intercept += 0.1;
        assert!(!contact_replay(&u, &lifted, 3).expect("replay runs"));
        let mut lowered = triple.clone();
        lowered.affine.intercept -= 0.1;
        assert!(!contact_replay(&u, &lowered, 3).expect("replay runs"));
    }

    #[test]
    fn subharmonic_test_accepts_quadratics_inside_the_cone() {
        let dom = box2(1.0);
        let map = psd_map(dom.clone());
        let u = GridFunction::sample(&dom, 0.125, |x| {
            0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1])
        })
        .expect("sampled");
        let params = SubharmonicParams::for_spacing(u.h());
        for &idx in u.interior_indices().iter().step_by(5) {
            let w = theta_subharmonic_test(&u, &map, idx, &params).expect("test runs");
            assert!(w.is_none(), "convex quadratic must pass the cone test");
        }
    }

    #[test]
    fn subharmonic_test_flags_concave_quadratics_on_the_cone() {
        let dom = box2(1.0);
        let map = psd_map(dom.clone());
        let u = GridFunction::sample(&dom, 0.125, |x| -0.5 * (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let params = SubharmonicParams::for_spacing(u.h());
        let centre = node_at(&u, &[0.0, 0.0]);
        let w = theta_subharmonic_test(&u, &map, centre, &params)
            .expect("test runs")
            .expect("concave quadratic must be flagged");
        assert!(w.hessian.lambda_min() < 0.0);
        assert_eq!(w.x0, vec![0.0, 0.0]);
    }

    #[test]
    fn kink_passes_the_dual_cone_test() {
        let dom = box2(1.0);
        let dual_map = EllipticMapSpec::from_constraint(
            dom.clone(),
            ConstraintRule::Fixed {
                set: crate::ellset::EllipticSetSpec::dual_psd(2).expect("dual cone"),
            },
        )
        .expect("valid map");
        let u = GridFunction::sample(&dom, 0.125, |x| x[0].abs()).expect("sampled");
        let params = SubharmonicParams::for_spacing(u.h());
        for idx in u.interior_indices() {
            let w = theta_subharmonic_test(&u, &dual_map, idx, &params).expect("test runs");
            assert!(
                w.is_none(),
                "|x1| is subaffine, so every contact Hessian has a nonnegative eigenvalue"
            );
        }
    }

    #[test]
    fn sup_convolution_dominates_and_matches_affine_closed_form() {
        let dom = box2(1.0);
        let h = 0.05;
        let eps = 0.4;
        let a = [1.0, 0.5];
        let u = GridFunction::sample(&dom, h, |x| a[0] * x[0] + a[1] * x[1]).expect("sampled");
        let ue = sup_convolution(&u, eps).expect("regularized");
        // Domination holds everywhere.
        for i in 0..u.len() {
            if u.mask(i) != Mask::Outside {
                assert!(ue.value(i) >= u.value(i) - 1e-12);
            }
        }
        // The maximizer for an affine slope sits eps·a/2 away from the base
        // point — here (0.2, 0.1), a lattice shift — so the closed-form value
        // a·x + eps·|a|²/4 is attained exactly away from the rim.
        let bonus = eps * (a[0] * a[0] + a[1] * a[1]) / 4.0;
        for i in 0..u.len() {
            let x = u.node_coords(i);
            if u.mask(i) != Mask::Outside && x.iter().all(|c| c.abs() <= 0.5) {
                let expect = a[0] * x[0] + a[1] * x[1] + bonus;
                assert!(
                    (ue.value(i) - expect).abs() < 1e-9,
                    "at {x:?}: {} vs {expect}",
                    ue.value(i)
                );
            }
        }
        // Constants are fixed points.
        let c = GridFunction::sample(&dom, 0.25, |_| 3.25).expect("sampled");
        let ce = sup_convolution(&c, 0.7).expect("regularized");
        for i in 0..c.len() {
            if c.mask(i) != Mask::Outside {
                assert_eq!(ce.value(i), 3.25);
            }
        }
    }

    #[test]
    fn sup_convolution_ladder_is_monotone_in_the_parameter() {
        let dom = box2(1.0);
        let u = GridFunction::sample(&dom, 0.1, |x| (3.0 * x[0]).sin() - x[1] * x[1])
            .expect("sampled");
        let u_small = sup_convolution(&u, 0.2).expect("regularized");
        let u_large = sup_convolution(&u, 0.8).expect("regularized");
        for i in 0..u.len() {
            if u.mask(i) != Mask::Outside {
                assert!(u_large.value(i) >= u_small.value(i) - 1e-12);
                assert!(u_small.value(i) >= u.value(i) - 1e-12);
            }
        }
    }

    #[test]
    fn sup_convolution_second_differences_respect_semiconvexity() {
        let dom = box2(1.0);
        let h = 0.1;
        let eps = 0.4;
        // Directions along which second differences are probed, with squared
        // lattice lengths h²|e|².
        let dirs: [[i64; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];

        // Unconditional bound: second differences of u^eps along step v are
        // at least -2|v|²/eps, whatever the input (here one with curvature
        // too sharp for the stronger bound).
        let sharp = GridFunction::sample(&dom, h, |x| -3.0 * (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let se = sup_convolution(&sharp, eps).expect("regularized");
        for idx in se.interior_indices() {
            for d in &dirs {
                let steps: Vec<i64> = d.to_vec();
                let neg: Vec<i64> = d.iter().map(|c| -c).collect();
                let (p, m) = match (se.shifted(idx, &steps), se.shifted(idx, &neg)) {
                    (Some(p), Some(m))
                        if se.mask(p) != Mask::Outside && se.mask(m) != Mask::Outside =>
                    {
                        (p, m)
                    }
                    _ => continue,
                };
                let v2 = (d[0] * d[0] + d[1] * d[1]) as f64 * h * h;
                let second = se.value(p) + se.value(m) - 2.0 * se.value(idx);
                assert!(
                    second >= -2.0 * v2 / eps - 1e-9,
                    "sharp input violates the unconditional bound at node {idx}"
                );
            }
        }

        // Stronger bound for mild curvature: for inputs whose own second
        // differences exceed -|v|²/eps, shifting the maximizer with the base
        // point shows u^eps + |x|²/(2·eps) has nonnegative second differences
        // on the clip-free interior.
        let mild = GridFunction::sample(&dom, h, |x| -0.3 * (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let me = sup_convolution(&mild, eps).expect("regularized");
        for idx in me.interior_indices() {
            let x = me.node_coords(idx);
            if x.iter().any(|c| c.abs() > 0.5) {
                continue; // stay clear of maximizer clipping at the rim
            }
            for d in &dirs {
                let steps: Vec<i64> = d.to_vec();
                let neg: Vec<i64> = d.iter().map(|c| -c).collect();
                let p = me.shifted(idx, &steps).expect("inside");
                let m = me.shifted(idx, &neg).expect("inside");
                let v2 = (d[0] * d[0] + d[1] * d[1]) as f64 * h * h;
                let second = me.value(p) + me.value(m) - 2.0 * me.value(idx);
                assert!(
                    second + v2 / eps >= -1e-9,
                    "mild input violates the half-parameter bound at {x:?}"
                );
            }
        }
    }

    #[test]
    fn large_step_functional_recovers_top_eigenvalue() {
        let dom = box2(1.0);
        let h = 0.1;
        let ladder = [h, 2.0 * h, 3.0 * h];
        let quad = GridFunction::sample(&dom, h, |x| {
            0.5 * (x[0] * x[0] + 3.0 * x[1] * x[1])
        })
        .expect("sampled");
        let centre = node_at(&quad, &[0.0, 0.0]);
        let k = slodkowski_k(&quad, centre, &ladder).expect("functional");
        assert!((k - 3.0).abs() < 1e-9, "axis eigenframe gives 3, got {k}");

        // Eigenframe along the diagonal, still inside the direction family.
        let rot = GridFunction::sample(&dom, h, |x| {
            let s = (x[0] + x[1]) / std::f64::consts::SQRT_2;
            s * s // Hessian has eigenvalues {2, 0} with eigenvector (1,1)/√2
        })
        .expect("sampled");
        let k = slodkowski_k(&rot, node_at(&rot, &[0.0, 0.0]), &ladder).expect("functional");
        assert!((k - 2.0).abs() < 1e-9, "diagonal eigenframe gives 2, got {k}");

        let affine = GridFunction::sample(&dom, h, |x| 2.0 * x[0] - x[1] + 0.3)
            .expect("sampled");
        let k = slodkowski_k(&affine, node_at(&affine, &[0.0, 0.0]), &ladder)
            .expect("functional");
        assert!(k.abs() < 1e-12, "affine functions give 0, got {k}");

        let quartic = GridFunction::sample(&dom, h, |x| {
            0.25 * (x[0] * x[0] + x[1] * x[1]).powi(2)
        })
        .expect("sampled");
        let k = slodkowski_k(&quartic, node_at(&quartic, &[0.0, 0.0]), &ladder)
            .expect("functional");
        assert!(k > 0.0 && k <= 5.0 * h * h, "flat quartic gives O(h²), got {k}");
    }

    #[test]
    fn large_step_functional_validates_inputs() {
        let dom = box2(1.0);
        let u = GridFunction::sample(&dom, 0.25, |x| x[0]).expect("sampled");
        let centre = node_at(&u, &[0.0, 0.0]);
        assert!(matches!(
            slodkowski_k(&u, centre, &[]),
            Err(Error::InvalidParameter(_))
        ));
        let rim = node_at(&u, &[1.0, 0.0]);
        assert!(matches!(
            slodkowski_k(&u, rim, &[0.25]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn comparison_passes_ordered_pair_and_records_side_flags() {
        let dom = box2(1.0);
        let map = psd_map(dom.clone());
        let u = GridFunction::sample(&dom, 0.25, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let w = u.map_values(|_, v| v + 1.0).expect("lifted");
        let report = comparison_harness(&u, &w, &map).expect("harness runs");
        assert!(report.pass);
        assert!(report.violation.is_none());
        assert!(report.u_subharmonic, "convex quadratic passes the cone test");
        // The lifted convex quadratic is not a supersolution of the cone
        // branch; the harness records that without failing the comparison.
        assert!(!report.dual_supersolution);
    }

    #[test]
    fn comparison_boundary_violation_is_a_precondition_error() {
        let dom = box2(1.0);
        let map = psd_map(dom.clone());
        let u = GridFunction::sample(&dom, 0.25, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let w = u.map_values(|_, v| v - 1.0).expect("lowered");
        match comparison_harness(&u, &w, &map) {
            Err(Error::Precondition(msg)) => {
                assert!(msg.contains("boundary"), "message names the boundary: {msg}")
            }
            other => panic!("expected a precondition error, got {other:?}"),
        }
    }

    #[test]
    fn comparison_detects_interior_crossings_with_a_subaffine_witness() {
        let dom = box2(1.0);
        let map = psd_map(dom.clone());
        let u = GridFunction::sample(&dom, 0.25, |x| 0.5 - (x[0] * x[0] + x[1] * x[1]))
            .expect("sampled");
        let w = GridFunction::sample(&dom, 0.25, |_| 0.0).expect("sampled");
        let report = comparison_harness(&u, &w, &map).expect("harness runs");
        assert!(!report.pass);
        let violation = report.violation.expect("interior crossing reported");
        assert!(violation.gap > 0.4, "worst gap sits at the centre");
        assert!(violation.x.iter().all(|c| c.abs() < 1e-9));
        let triple = violation.subaffine.expect("difference is strictly concave");
        assert!(triple.eps > 0.0);
    }
}
