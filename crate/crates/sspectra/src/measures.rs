//! Discrete atom-cloud models of singular measures and empirical
//! Ahlfors-regularity reports.
//!
//! Every constructor produces a deterministic cloud of weighted atoms: cell
//! centers carrying the cell mass (midpoint quadrature). Surface kinds also
//! carry per-atom orthonormal tangent frames.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

pub const MAX_ATOMS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Circle,
    LipschitzGraph,
    CantorIfs,
    LebesgueCube,
}

impl MeasureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureKind::Circle => "circle",
            MeasureKind::LipschitzGraph => "lipschitz_graph",
            MeasureKind::CantorIfs => "cantor_ifs",
            MeasureKind::LebesgueCube => "lebesgue_cube",
        }
    }
}

/// Weighted atom cloud approximating a compactly supported measure.
#[derive(Clone, Debug)]
pub struct SingularMeasure {
    pub ambient_dim: usize,
    pub kind: MeasureKind,
    /// Intrinsic (surface) dimension d, when the construction has one.
    pub intrinsic_dim: Option<usize>,
    /// Codimension dF = N - d, when d is defined.
    pub codim: Option<usize>,
    /// Characteristic atom spacing.
    pub resolution: f64,
    /// Closed-form regularity exponent of the construction, when known.
    pub alpha_nominal: Option<f64>,
    points: Vec<f64>, // len = atoms * ambient_dim, row-major over the generating grid
    weights: Vec<f64>,
    /// Per-atom orthonormal frames, len = atoms * d * N; surface kinds only.
    tangent_frames: Option<Vec<f64>>,
}

impl SingularMeasure {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Frame vector `k` (of d) at atom `i`, as a slice of length N.
    pub fn tangent_frame(&self, i: usize, k: usize) -> Option<&[f64]> {
        let d = self.intrinsic_dim?;
        let n = self.ambient_dim;
        let frames = self.tangent_frames.as_ref()?;
        let base = (i * d + k) * n;
        Some(&frames[base..base + n])
    }

    pub fn has_tangent_frames(&self) -> bool {
        self.tangent_frames.is_some()
    }

    /// Regularity exponent known from the construction: d for surface kinds,
    /// N for the cube, the IFS exponent for Cantor clouds.
    pub fn known_alpha(&self) -> Option<f64> {
        match self.kind {
            MeasureKind::Circle | MeasureKind::LipschitzGraph => {
                self.intrinsic_dim.map(|d| d as f64)
            }
            MeasureKind::LebesgueCube => Some(self.ambient_dim as f64),
            MeasureKind::CantorIfs => self.alpha_nominal,
        }
    }

    /// General constructor from parts; validates weights, frame shape and
    /// orthonormality.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: MeasureKind,
        ambient_dim: usize,
        intrinsic_dim: Option<usize>,
        resolution: f64,
        alpha_nominal: Option<f64>,
        points: Vec<f64>,
        weights: Vec<f64>,
        tangent_frames: Option<Vec<f64>>,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::invalid("ambient dimension must be at least 1"));
        }
        if points.len() != weights.len() * ambient_dim {
            return Err(Error::invalid("point array length does not match weights"));
        }
        if weights.is_empty() {
            return Err(Error::invalid("measure needs at least one atom"));
        }
        if weights.len() > MAX_ATOMS {
            return Err(Error::invalid(format!(
                "atom count {} exceeds the cap {}",
                weights.len(),
                MAX_ATOMS
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(
                "all weights must be strictly positive and finite",
            ));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("atom coordinates must be finite"));
        }
        if !(resolution > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        if let (Some(d), Some(frames)) = (intrinsic_dim, tangent_frames.as_ref()) {
            if frames.len() != weights.len() * d * ambient_dim {
                return Err(Error::invalid("tangent frame array has wrong shape"));
            }
        }
        let codim = intrinsic_dim.map(|d| ambient_dim - d);
        let m = SingularMeasure {
            ambient_dim,
            kind,
            intrinsic_dim,
            codim,
            resolution,
            alpha_nominal,
            points,
            weights,
            tangent_frames,
        };
        if m.has_tangent_frames() {
            m.check_frames()?;
        }
        Ok(m)
    }

    fn check_frames(&self) -> Result<()> {
        let d = self.intrinsic_dim.unwrap();
        for i in 0..self.len() {
            for a in 0..d {
                let fa = self.tangent_frame(i, a).unwrap();
                for b in a..d {
                    let fb = self.tangent_frame(i, b).unwrap();
                    let dot: f64 = fa.iter().zip(fb.iter()).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    if (dot - want).abs() > 1e-12 {
                        return Err(Error::numerical(format!(
                            "tangent frame at atom {i} is not orthonormal (|<e{a},e{b}> - {want}| = {:.3e})",
                            (dot - want).abs()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Equispaced atoms on a circle of the given radius, each carrying the
    /// arc mass 2*pi*r/n. d = 1, dF = 1.
    pub fn circle(n_atoms: usize, radius: f64) -> Result<Self> {
        if n_atoms < 2 {
            return Err(Error::invalid("circle needs at least 2 atoms"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("circle radius must be positive"));
        }
        if n_atoms > MAX_ATOMS {
            return Err(Error::invalid("atom count exceeds the cap"));
        }
        let h = 2.0 * std::f64::consts::PI * radius / n_atoms as f64;
        let mut points = Vec::with_capacity(2 * n_atoms);
        let mut frames = Vec::with_capacity(2 * n_atoms);
        for i in 0..n_atoms {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / n_atoms as f64;
            points.push(radius * phi.cos());
            points.push(radius * phi.sin());
            frames.push(-phi.sin());
            frames.push(phi.cos());
        }
        SingularMeasure::from_parts(
            MeasureKind::Circle,
            2,
            Some(1),
            h,
            Some(1.0),
            points,
            vec![h; n_atoms],
            Some(frames),
        )
    }

    /// Graph measure of y = phi(x) over a uniform grid, with the area density
    /// det(1 + (grad phi)^T grad phi)^(1/2) from centered finite differences
    /// (one-sided at the boundary).
    pub fn lipschitz_graph(grid: &GridSpec, phi: &PhiTable, max_slope: f64) -> Result<Self> {
        grid.validate()?;
        let d = grid.dim();
        let df = phi.components;
        let cells = grid.cell_count();
        if phi.values.len() != cells * df {
            return Err(Error::invalid("phi table size does not match the grid"));
        }
        if phi.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("phi must be finite everywhere"));
        }
        if cells > MAX_ATOMS {
            return Err(Error::invalid("atom count exceeds the cap"));
        }
        let n = d + df;
        let cell_vol: f64 = (0..d).map(|a| grid.step(a)).product();

        let mut points = Vec::with_capacity(cells * n);
        let mut weights = Vec::with_capacity(cells);
        let mut frames = Vec::with_capacity(cells * d * n);
        let mut max_seen_slope = 0.0f64;

        for cell in 0..cells {
            let idx = grid.unravel(cell);
            // jacobian[f][a] = d phi_f / d x_a
            let mut jac = vec![0.0f64; df * d];
            for a in 0..d {
                let (prev, next, span) = grid.difference_stencil(&idx, a);
                for f in 0..df {
                    let rise = phi.values[next * df + f] - phi.values[prev * df + f];
                    let slope = rise / span;
                    jac[f * d + a] = slope;
                    max_seen_slope = max_seen_slope.max(slope.abs());
                }
            }
            // metric G = I_d + J^T J
            let mut g = vec![0.0f64; d * d];
            for a in 0..d {
                for b in 0..d {
                    let mut acc = if a == b { 1.0 } else { 0.0 };
                    for f in 0..df {
                        acc += jac[f * d + a] * jac[f * d + b];
                    }
                    g[a * d + b] = acc;
                }
            }
            let det = match d {
                1 => g[0],
                2 => g[0] * g[3] - g[1] * g[2],
                _ => return Err(Error::unsupported("graph base dimension above 2")),
            };
            weights.push(cell_vol * det.sqrt());

            for a in 0..d {
                points.push(grid.center(&idx, a));
            }
            for f in 0..df {
                points.push(phi.values[cell * df + f]);
            }

            // lifted coordinate directions, Gram-Schmidt orthonormalized
            let mut basis = vec![0.0f64; d * n];
            for a in 0..d {
                basis[a * n + a] = 1.0;
                for f in 0..df {
                    basis[a * n + d + f] = jac[f * d + a];
                }
            }
            gram_schmidt(&mut basis, d, n)?;
            frames.extend_from_slice(&basis);
        }

        if max_seen_slope > max_slope {
            return Err(Error::invalid(format!(
                "empirical Lipschitz constant {max_seen_slope:.3e} exceeds the bound {max_slope}; input is not Lipschitz at this tolerance"
            )));
        }

        let h = (0..d).map(|a| grid.step(a)).fold(f64::INFINITY, f64::min);
        SingularMeasure::from_parts(
            MeasureKind::LipschitzGraph,
            n,
            Some(d),
            h,
            Some(d as f64),
            points,
            weights,
            Some(frames),
        )
    }

    /// Level-`depth` cell centers of the q-fold product of the two-map
    /// contraction {x -> rho x, x -> rho x + 1 - rho} on [0,1], embedded in
    /// the first q coordinates of R^N. Every atom carries mass 2^(-depth*q).
    pub fn cantor(depth: usize, rho: f64, q: usize, ambient_dim: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::invalid("cantor depth must be at least 1"));
        }
        if !(rho > 0.0 && rho < 0.5) {
            return Err(Error::invalid(
                "contraction ratio must lie in (0, 1/2); rho = 1/2 gives overlapping pieces",
            ));
        }
        if q < 1 || ambient_dim < q {
            return Err(Error::invalid("need 1 <= q <= ambient_dim"));
        }
        let per_axis = 1usize << depth;
        let count = per_axis
            .checked_pow(q as u32)
            .filter(|&c| c <= MAX_ATOMS)
            .ok_or_else(|| Error::invalid("cantor atom count exceeds the cap"))?;

        let mut centers = vec![0.5f64];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(2 * centers.len());
            for &c in &centers {
                next.push(rho * c);
            }
            for &c in &centers {
                next.push(rho * c + 1.0 - rho);
            }
            centers = next;
        }
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut points = Vec::with_capacity(count * ambient_dim);
        let mut idx = vec![0usize; q];
        loop {
            for &i in idx.iter() {
                points.push(centers[i]);
            }
            points.extend(std::iter::repeat_n(0.0, ambient_dim - q));
            // row-major increment (last axis fastest)
            let mut axis = q;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }

        let w = 0.5f64.powi((depth * q) as i32);
        let alpha = q as f64 * std::f64::consts::LN_2 / (1.0 / rho).ln();
        let h = (1.0 - rho) * rho.powi(depth as i32 - 1);
        SingularMeasure::from_parts(
            MeasureKind::CantorIfs,
            ambient_dim,
            None,
            h,
            Some(alpha),
            points,
            vec![w; count],
            None,
        )
    }

    /// Midpoint-rule atoms on the unit cube [0,1]^N with total mass 1.
    pub fn lebesgue_cube(n_per_side: usize, ambient_dim: usize) -> Result<Self> {
        if n_per_side < 1 || ambient_dim < 1 {
            return Err(Error::invalid("need n_per_side >= 1 and N >= 1"));
        }
        let count = n_per_side
            .checked_pow(ambient_dim as u32)
            .filter(|&c| c <= MAX_ATOMS)
            .ok_or_else(|| Error::invalid("cube atom count exceeds the cap"))?;
        let mut points = Vec::with_capacity(count * ambient_dim);
        let mut idx = vec![0usize; ambient_dim];
        loop {
            for &i in idx.iter() {
                points.push((i as f64 + 0.5) / n_per_side as f64);
            }
            let mut axis = ambient_dim;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < n_per_side {
                    break;
                }
                idx[axis] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
        let w = (n_per_side as f64).powi(-(ambient_dim as i32));
        SingularMeasure::from_parts(
            MeasureKind::LebesgueCube,
            ambient_dim,
            Some(ambient_dim),
            1.0 / n_per_side as f64,
            Some(ambient_dim as f64),
            points,
            vec![w; count],
            None,
        )
    }

    /// Mass of the open ball B(X_center, r).
    pub fn ball_mass(&self, center: usize, r: f64) -> f64 {
        let c = self.point(center);
        let n = self.ambient_dim;
        let mut mass = 0.0;
        for i in 0..self.len() {
            let p = &self.points[i * n..(i + 1) * n];
            let d2: f64 = p.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < r * r {
                mass += self.weights[i];
            }
        }
        mass
    }

    /// Support diameter estimated over a deterministic stride sample of
    /// centers against the full cloud.
    pub fn diameter_estimate(&self) -> f64 {
        let sample = stride_indices(self.len(), 512);
        let n = self.ambient_dim;
        let mut diam: f64 = 0.0;
        for &s in &sample {
            let ps = self.point(s);
            for i in 0..self.len() {
                let p = &self.points[i * n..(i + 1) * n];
                let d2: f64 = p
                    .iter()
                    .zip(ps.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                diam = diam.max(d2);
            }
        }
        diam.sqrt()
    }

    /// Median nearest-neighbor spacing over a stride sample.
    pub fn spacing_estimate(&self) -> f64 {
        let sample = stride_indices(self.len(), 512);
        let n = self.ambient_dim;
        let mut mins = Vec::with_capacity(sample.len());
        for &s in &sample {
            let ps = self.point(s);
            let mut best = f64::INFINITY;
            for i in 0..self.len() {
                if i == s {
                    continue;
                }
                let p = &self.points[i * n..(i + 1) * n];
                let d2: f64 = p
                    .iter()
                    .zip(ps.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 > 0.0 {
                    best = best.min(d2);
                }
            }
            if best.is_finite() {
                mins.push(best.sqrt());
            }
        }
        median(&mut mins)
    }

    /// JSON document per the measure schema; round-trips bit-exactly.
    pub fn to_json(&self) -> serde_json::Value {
        let atoms: Vec<serde_json::Value> = (0..self.len())
            .map(|i| json!({"x": self.point(i), "w": self.weight(i)}))
            .collect();
        let frames: serde_json::Value = match &self.tangent_frames {
            Some(f) => {
                let d = self.intrinsic_dim.unwrap();
                let n = self.ambient_dim;
                let per_atom: Vec<serde_json::Value> = (0..self.len())
                    .map(|i| {
                        let vecs: Vec<&[f64]> = (0..d)
                            .map(|k| &f[(i * d + k) * n..(i * d + k + 1) * n])
                            .collect();
                        json!(vecs)
                    })
                    .collect();
                json!(per_atom)
            }
            None => serde_json::Value::Null,
        };
        json!({
            "ambient_dim": self.ambient_dim,
            "kind": self.kind.as_str(),
            "d": self.intrinsic_dim,
            "dF": self.codim,
            "resolution": self.resolution,
            "alpha_nominal": self.alpha_nominal,
            "atoms": atoms,
            "tangent_frames": frames,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::invalid("measure JSON must be an object"))?;
        let ambient_dim =
            obj.get("ambient_dim")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| Error::invalid("missing ambient_dim"))? as usize;
        let kind = match obj.get("kind").and_then(|x| x.as_str()) {
            Some("circle") => MeasureKind::Circle,
            Some("lipschitz_graph") => MeasureKind::LipschitzGraph,
            Some("cantor_ifs") => MeasureKind::CantorIfs,
            Some("lebesgue_cube") => MeasureKind::LebesgueCube,
            other => return Err(Error::invalid(format!("unknown measure kind {other:?}"))),
        };
        let intrinsic_dim = obj.get("d").and_then(|x| x.as_u64()).map(|x| x as usize);
        let resolution = obj
            .get("resolution")
            .and_then(|x| x.as_f64())
            .ok_or_else(|| Error::invalid("missing resolution"))?;
        let alpha_nominal = obj.get("alpha_nominal").and_then(|x| x.as_f64());
        let atoms = obj
            .get("atoms")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::invalid("missing atoms"))?;
        let mut points = Vec::with_capacity(atoms.len() * ambient_dim);
        let mut weights = Vec::with_capacity(atoms.len());
        for a in atoms {
            let xs = a
                .get("x")
                .and_then(|x| x.as_array())
                .ok_or_else(|| Error::invalid("atom missing x"))?;
            if xs.len() != ambient_dim {
                return Err(Error::invalid("atom coordinate arity mismatch"));
            }
            for x in xs {
                points.push(x.as_f64().ok_or_else(|| Error::invalid("bad coordinate"))?);
            }
            weights.push(
                a.get("w")
                    .and_then(|x| x.as_f64())
                    .ok_or_else(|| Error::invalid("atom missing w"))?,
            );
        }
        let tangent_frames = match obj.get("tangent_frames") {
            Some(serde_json::Value::Array(per_atom)) => {
                let mut flat = Vec::new();
                for frame in per_atom {
                    let vecs = frame
                        .as_array()
                        .ok_or_else(|| Error::invalid("bad frame"))?;
                    for vec in vecs {
                        let comps = vec
                            .as_array()
                            .ok_or_else(|| Error::invalid("bad frame vector"))?;
                        for c in comps {
                            flat.push(
                                c.as_f64()
                                    .ok_or_else(|| Error::invalid("bad frame entry"))?,
                            );
                        }
                    }
                }
                Some(flat)
            }
            _ => None,
        };
        SingularMeasure::from_parts(
            kind,
            ambient_dim,
            intrinsic_dim,
            resolution,
            alpha_nominal,
            points,
            weights,
            tangent_frames,
        )
    }
}

/// Uniform grid over a box, cell centers as quadrature nodes.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn line(origin: f64, length: f64, cells: usize) -> Self {
        GridSpec {
            origin: vec![origin],
            lengths: vec![length],
            cells: vec![cells],
        }
    }

    pub fn square(cells_per_side: usize) -> Self {
        GridSpec {
            origin: vec![0.0, 0.0],
            lengths: vec![1.0, 1.0],
            cells: vec![cells_per_side, cells_per_side],
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.cells.len();
        if d == 0 || d > 2 {
            return Err(Error::unsupported("grid dimension must be 1 or 2"));
        }
        if self.origin.len() != d || self.lengths.len() != d {
            return Err(Error::invalid("grid arrays must share one dimension"));
        }
        if self.cells.contains(&0) || self.lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid(
                "grid must have positive extent and cell counts",
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn step(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    fn center(&self, idx: &[usize], axis: usize) -> f64 {
        self.origin[axis] + (idx[axis] as f64 + 0.5) * self.step(axis)
    }

    /// Multi-index of a row-major cell id (axis 0 slowest).
    fn unravel(&self, mut cell: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        for axis in (0..d).rev() {
            idx[axis] = cell % self.cells[axis];
            cell /= self.cells[axis];
        }
        idx
    }

    fn ravel(&self, idx: &[usize]) -> usize {
        let mut cell = 0usize;
        for (&count, &i) in self.cells.iter().zip(idx.iter()) {
            cell = cell * count + i;
        }
        cell
    }

    /// Cell ids and parameter span of the finite-difference stencil along an
    /// axis: centered in the interior, one-sided at the boundary.
    fn difference_stencil(&self, idx: &[usize], axis: usize) -> (usize, usize, f64) {
        let c = self.cells[axis];
        let i = idx[axis];
        let (lo, hi) = if i == 0 {
            (0, 1.min(c - 1))
        } else if i + 1 == c {
            (i - 1, i)
        } else {
            (i - 1, i + 1)
        };
        let mut a = idx.to_vec();
        let mut b = idx.to_vec();
        a[axis] = lo;
        b[axis] = hi;
        let span = (hi - lo) as f64 * self.step(axis);
        (
            self.ravel(&a),
            self.ravel(&b),
            if span > 0.0 { span } else { 1.0 },
        )
    }
}

/// Table of graph values phi: one row of `components` values per grid cell,
/// row-major over the grid.
#[derive(Clone, Debug)]
pub struct PhiTable {
    pub components: usize,
    pub values: Vec<f64>,
}

impl PhiTable {
    pub fn from_fn(grid: &GridSpec, components: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let cells = grid.cell_count();
        let mut values = Vec::with_capacity(cells * components);
        for cell in 0..cells {
            let idx = grid.unravel(cell);
            let x: Vec<f64> = (0..grid.dim()).map(|a| grid.center(&idx, a)).collect();
            let y = f(&x);
            assert_eq!(y.len(), components);
            values.extend_from_slice(&y);
        }
        PhiTable { components, values }
    }
}

fn gram_schmidt(basis: &mut [f64], d: usize, n: usize) -> Result<()> {
    for a in 0..d {
        for b in 0..a {
            let dot: f64 = (0..n).map(|i| basis[a * n + i] * basis[b * n + i]).sum();
            for i in 0..n {
                basis[a * n + i] -= dot * basis[b * n + i];
            }
        }
        let norm: f64 = (0..n)
            .map(|i| basis[a * n + i] * basis[a * n + i])
            .sum::<f64>()
            .sqrt();
        if norm < 1e-14 {
            return Err(Error::numerical("degenerate tangent frame"));
        }
        for i in 0..n {
            basis[a * n + i] /= norm;
        }
    }
    Ok(())
}

pub(crate) fn stride_indices(len: usize, cap: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let stride = len.div_ceil(cap);
    (0..len).step_by(stride.max(1)).take(cap).collect()
}

fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassVerdict {
    PPlus,
    PMinus,
    PTwoSided,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusRow {
    pub radius: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

/// Empirical Ahlfors-regularity report over a dyadic radius ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureClassReport {
    /// Least-squares estimate of the regularity exponent (mean of per-center
    /// slopes of log mass vs log radius).
    pub alpha_hat: f64,
    /// Exponent the envelopes and verdict were computed at: the tested alpha
    /// when one was supplied, otherwise alpha_hat.
    pub alpha_used: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub per_radius: Vec<RadiusRow>,
    pub verdict: ClassVerdict,
    pub diameter: f64,
    pub n_centers_used: usize,
}

/// Envelope slopes steeper than this (in log-log) mark a one-sided bound as
/// failing: the constant would drift across scales instead of stabilizing.
const VERDICT_SLOPE_TOL: f64 = 0.25;

/// Ball-count regularity report: dyadic radii diam/2^k restricted to
/// [4h, diam), at most `n_radii` of them (the smallest kept), masses sampled
/// over a deterministic stride of `n_centers` atom indices.
pub fn measure_class_report(
    m: &SingularMeasure,
    alpha_test: Option<f64>,
    n_centers: usize,
    n_radii: usize,
) -> Result<MeasureClassReport> {
    class_report_with_floor(m, alpha_test, n_centers, n_radii, 4.0)
}

/// Same report with a configurable spacing floor (radii >= floor_mult * h);
/// the public report pins the floor at 4h, below which discretization noise
/// dominates.
pub(crate) fn class_report_with_floor(
    m: &SingularMeasure,
    alpha_test: Option<f64>,
    n_centers: usize,
    n_radii: usize,
    floor_mult: f64,
) -> Result<MeasureClassReport> {
    if n_centers == 0 || n_centers > m.len() {
        return Err(Error::invalid("n_centers must be in 1..=atom count"));
    }
    if n_radii < 3 {
        return Err(Error::invalid("need at least 3 radii"));
    }
    let diam = m.diameter_estimate();
    let h = m.spacing_estimate();
    let mut ladder = Vec::new();
    for k in 1..=60 {
        let r = diam * 0.5f64.powi(k);
        if r < floor_mult * h {
            break;
        }
        ladder.push(r);
    }
    if ladder.len() < 3 {
        return Err(Error::invalid(format!(
            "insufficient resolution: only {} usable radii between {floor_mult}h = {:.3e} and diam = {:.3e}",
            ladder.len(),
            floor_mult * h,
            diam
        )));
    }
    if ladder.len() > n_radii {
        ladder.drain(..ladder.len() - n_radii);
    }
    ladder.reverse(); // ascending radii

    let centers = stride_indices(m.len(), n_centers);
    let nr = ladder.len();
    let mut masses = vec![0.0f64; centers.len() * nr];
    for (ci, &c) in centers.iter().enumerate() {
        for (ri, &r) in ladder.iter().enumerate() {
            masses[ci * nr + ri] = m.ball_mass(c, r);
        }
    }

    // per-center slopes
    let mut slopes = Vec::new();
    for ci in 0..centers.len() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (ri, &r) in ladder.iter().enumerate() {
            let mass = masses[ci * nr + ri];
            if mass > 0.0 {
                xs.push(r.ln());
                ys.push(mass.ln());
            }
        }
        if xs.len() >= 3 {
            slopes.push(ls_slope(&xs, &ys));
        }
    }
    if slopes.is_empty() {
        return Err(Error::numerical("no center had enough nonempty balls"));
    }
    let alpha_hat = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let alpha_used = alpha_test.unwrap_or(alpha_hat);

    let mut per_radius = Vec::with_capacity(nr);
    let mut a_hat = f64::NEG_INFINITY;
    let mut b_hat = f64::INFINITY;
    for (ri, &r) in ladder.iter().enumerate() {
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for ci in 0..centers.len() {
            let mass = masses[ci * nr + ri];
            if mass > 0.0 {
                let ratio = mass / r.powf(alpha_used);
                mn = mn.min(ratio);
                mx = mx.max(ratio);
                sum += ratio;
                cnt += 1;
            }
        }
        if cnt == 0 {
            continue;
        }
        a_hat = a_hat.max(mx);
        b_hat = b_hat.min(mn);
        per_radius.push(RadiusRow {
            radius: r,
            min_ratio: mn,
            max_ratio: mx,
            mean_ratio: sum / cnt as f64,
        });
    }

    // scale-stability of the envelopes decides the verdict
    let xs: Vec<f64> = per_radius.iter().map(|row| row.radius.ln()).collect();
    let ymax: Vec<f64> = per_radius.iter().map(|row| row.max_ratio.ln()).collect();
    let ymin: Vec<f64> = per_radius.iter().map(|row| row.min_ratio.ln()).collect();
    let slope_max = ls_slope(&xs, &ymax);
    let slope_min = ls_slope(&xs, &ymin);
    let plus_ok = slope_max >= -VERDICT_SLOPE_TOL && a_hat.is_finite();
    let minus_ok = slope_min <= VERDICT_SLOPE_TOL && b_hat > 0.0;
    let verdict = match (plus_ok, minus_ok) {
        (true, true) => ClassVerdict::PTwoSided,
        (true, false) => ClassVerdict::PPlus,
        (false, true) => ClassVerdict::PMinus,
        (false, false) => ClassVerdict::None,
    };

    Ok(MeasureClassReport {
        alpha_hat,
        alpha_used,
        a_hat,
        b_hat,
        per_radius,
        verdict,
        diameter: diam,
        n_centers_used: centers.len(),
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}
