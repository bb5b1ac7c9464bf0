//! Plane frame front-end.
//!
//! A [`FrameModel`] holds Euler–Bernoulli frame elements whose cross-section
//! area is the design variable `x` and whose moment of inertia is a cubic
//! polynomial `I(x)` without constant term. The stiffness matrix is then
//! `K(x) = Σₑ (x K⁽¹⁾ + x² K⁽²⁾ + x³ K⁽³⁾)` with every coefficient PSD, and
//! loads are affine in `x` (self-weight).
//!
//! Two optimisation problems are supported:
//!
//! * compliance: `min γ` s.t. `[[K, −f], [−fᵀ, γ]] ⪰ 0`, weight `≤ w̄`;
//! * weight: `min w(x)` s.t. `[[K, −f], [−fᵀ, γ̄]] ⪰ 0`.
//!
//! Before relaxation every variable is mapped affinely onto `[−1, 1]` and
//! the PMI rows are equilibrated by a diagonal congruence, see
//! [`build_pop`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arrowcore::{
    build_interface_layout, constructive_certificate, decompose_lmi, intersections, ArrowStructure,
};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, pinv};
use crate::momentsos::{
    build, candidate_point, flatness, solve_relaxation, Hierarchy, Pop, Relaxation, RelaxationOptions, FLATNESS_RANK_TOL,
};
use crate::polymat::{BasisKind, PolyMatrix, Polynomial};
use crate::rankproj::{eliminate, project_lmi, space_bases, RANK_TOL};
use crate::sdpcore::{Backend, Status};

/// Tolerance of the image-membership test `f ∈ Im K`.
pub const IMAGE_TOL: f64 = 1e-8;

/// Cross-section law `I(x)` in terms of the area `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    /// `I(x) = c₁x + c₂x² + c₃x³`.
    Polynomial { coeffs: [f64; 3] },
    /// Thin-walled section scaled by one wall thickness `t` at fixed aspect
    /// ratios: `A = a·t²`, `I = b·t⁴`, hence `I(x) = (b/a²)·x²`.
    ThinWalled { area_factor: f64, inertia_factor: f64 },
}

impl Section {
    pub fn inertia_coeffs(&self) -> [f64; 3] {
        match *self {
            Section::Polynomial { coeffs } => coeffs,
            Section::ThinWalled { area_factor, inertia_factor } => {
                [0.0, inertia_factor / (area_factor * area_factor), 0.0]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub nodes: [usize; 2],
    #[serde(rename = "E")]
    pub e: f64,
    pub rho: f64,
    pub section: String,
}

/// Fixed components `(u_x, u_y, θ)` of a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub node: usize,
    pub fix: [bool; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalLoad {
    pub node: usize,
    pub force: [f64; 3],
}

/// Line load in global components per unit length: `w = constant + per_area·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributedLoad {
    pub element: usize,
    #[serde(default)]
    pub constant: [f64; 2],
    #[serde(default)]
    pub per_area: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Loads {
    #[serde(default)]
    pub nodal: Vec<NodalLoad>,
    #[serde(default)]
    pub distributed: Vec<DistributedLoad>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    /// Minimise compliance subject to `w(x) ≤ weight_bound`.
    Compliance { weight_bound: f64 },
    /// Minimise weight subject to compliance `≤ compliance_bound`.
    Weight { compliance_bound: f64 },
}

/// Plane frame with grouped design variables and a subdomain partition.
/// Node, element and group indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameModel {
    #[serde(default)]
    pub name: String,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Element>,
    pub sections: BTreeMap<String, Section>,
    #[serde(default)]
    pub supports: Vec<Support>,
    #[serde(default)]
    pub loads: Loads,
    /// Elements sharing one cross-section variable; empty means one group
    /// per element.
    #[serde(default)]
    pub groups: Vec<Vec<usize>>,
    /// Element lists of the subdomains; empty means a single subdomain.
    #[serde(default)]
    pub partition: Vec<Vec<usize>>,
    pub problem: ProblemKind,
}

impl FrameModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: FrameModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let nn = self.nodes.len();
        for (i, el) in self.elements.iter().enumerate() {
            if el.nodes[0] >= nn || el.nodes[1] >= nn {
                return Err(Error::Model(format!("element {i} references a missing node")));
            }
            if !(el.e > 0.0) || !(el.rho > 0.0) {
                return Err(Error::Model(format!("element {i}: E and rho must be positive")));
            }
            let sec = self
                .sections
                .get(&el.section)
                .ok_or_else(|| Error::Model(format!("element {i}: unknown section '{}'", el.section)))?;
            if sec.inertia_coeffs().iter().any(|&c| c < 0.0 || !c.is_finite()) {
                return Err(Error::Model(format!("section '{}' has a negative inertia coefficient", el.section)));
            }
            if self.length(i) <= 0.0 {
                return Err(Error::ZeroLength(i));
            }
        }
        for s in &self.supports {
            if s.node >= nn {
                return Err(Error::Model(format!("support at missing node {}", s.node)));
            }
        }
        for l in &self.loads.nodal {
            if l.node >= nn {
                return Err(Error::Model(format!("load at missing node {}", l.node)));
            }
        }
        for l in &self.loads.distributed {
            if l.element >= self.elements.len() {
                return Err(Error::Model(format!("line load on missing element {}", l.element)));
            }
        }
        if !self.groups.is_empty() {
            check_cover(&self.groups, self.elements.len()).map_err(|e| Error::Model(format!("groups: {e}")))?;
        }
        if !self.partition.is_empty() {
            check_cover(&self.partition, self.elements.len()).map_err(Error::PartitionInvalid)?;
        }
        match self.problem {
            ProblemKind::Compliance { weight_bound } if !(weight_bound > 0.0) => {
                Err(Error::Model("weight bound must be positive".into()))
            }
            ProblemKind::Weight { compliance_bound } if !(compliance_bound > 0.0) => {
                Err(Error::Model("compliance bound must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn length(&self, e: usize) -> f64 {
        let [a, b] = self.elements[e].nodes;
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    pub fn n_groups(&self) -> usize {
        if self.groups.is_empty() {
            self.elements.len()
        } else {
            self.groups.len()
        }
    }

    /// Group variable of every element.
    pub fn group_of(&self) -> Vec<usize> {
        if self.groups.is_empty() {
            return (0..self.elements.len()).collect();
        }
        let mut g = vec![0; self.elements.len()];
        for (k, els) in self.groups.iter().enumerate() {
            for &e in els {
                g[e] = k;
            }
        }
        g
    }

    /// `Σ_{e∈g} ℓₑρₑ` per group, so that `w(x) = Σ_g W_g x_g`.
    pub fn group_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_groups()];
        for (e, g) in self.group_of().into_iter().enumerate() {
            w[g] += self.length(e) * self.elements[e].rho;
        }
        w
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        self.group_weights().iter().zip(x).map(|(w, x)| w * x).sum()
    }

    /// Free dof number of each `(node, component)`.
    pub fn dof_map(&self) -> Vec<[Option<usize>; 3]> {
        let mut fixed = vec![[false; 3]; self.nodes.len()];
        for s in &self.supports {
            for c in 0..3 {
                fixed[s.node][c] |= s.fix[c];
            }
        }
        let mut next = 0;
        fixed
            .iter()
            .map(|f| {
                let mut out = [None; 3];
                for c in 0..3 {
                    if !f[c] {
                        out[c] = Some(next);
                        next += 1;
                    }
                }
                out
            })
            .collect()
    }

    pub fn n_dof(&self) -> usize {
        self.dof_map().iter().flatten().filter(|d| d.is_some()).count()
    }

    /// Free dofs of the six element end displacements.
    pub fn element_dofs(&self, e: usize) -> [Option<usize>; 6] {
        let map = self.dof_map();
        let [a, b] = self.elements[e].nodes;
        [map[a][0], map[a][1], map[a][2], map[b][0], map[b][1], map[b][2]]
    }

    /// Direction cosines `(c, s)`.
    fn direction(&self, e: usize) -> (f64, f64) {
        let [a, b] = self.elements[e].nodes;
        let l = self.length(e);
        ((self.nodes[b][0] - self.nodes[a][0]) / l, (self.nodes[b][1] - self.nodes[a][1]) / l)
    }

    /// Global 6×6 coefficient matrices `[K⁽¹⁾, K⁽²⁾, K⁽³⁾]` of an element.
    pub fn element_coefficients(&self, e: usize) -> Result<[DMatrix<f64>; 3]> {
        let el = &self.elements[e];
        let l = self.length(e);
        if l <= 0.0 {
            return Err(Error::ZeroLength(e));
        }
        let ic = self.sections[&el.section].inertia_coeffs();
        let (c, s) = self.direction(e);
        let mut t = DMatrix::zeros(6, 6);
        for k in [0, 3] {
            t[(k, k)] = c;
            t[(k, k + 1)] = s;
            t[(k + 1, k)] = -s;
            t[(k + 1, k + 1)] = c;
            t[(k + 2, k + 2)] = 1.0;
        }
        let axial = {
            let mut m = DMatrix::zeros(6, 6);
            let k = el.e / l;
            m[(0, 0)] = k;
            m[(3, 3)] = k;
            m[(0, 3)] = -k;
            m[(3, 0)] = -k;
            m
        };
        let bending = {
            let idx = [1, 2, 4, 5];
            let (l2, l3) = (l * l, l * l * l);
            let kb = [
                [12.0 / l3, 6.0 / l2, -12.0 / l3, 6.0 / l2],
                [6.0 / l2, 4.0 / l, -6.0 / l2, 2.0 / l],
                [-12.0 / l3, -6.0 / l2, 12.0 / l3, -6.0 / l2],
                [6.0 / l2, 2.0 / l, -6.0 / l2, 4.0 / l],
            ];
            let mut m = DMatrix::zeros(6, 6);
            for i in 0..4 {
                for j in 0..4 {
                    m[(idx[i], idx[j])] = el.e * kb[i][j];
                }
            }
            m
        };
        let local = [&axial + &bending * ic[0], &bending * ic[1], &bending * ic[2]];
        let out = local.map(|k| t.transpose() * k * &t);
        for (i, k) in out.iter().enumerate() {
            let lam = min_eigenvalue(k);
            if lam < -1e-10 * (1.0 + k.amax()) {
                return Err(Error::Model(format!("element {e}: K^({}) has eigenvalue {lam:.3e}", i + 1)));
            }
        }
        Ok(out)
    }

    /// Element stiffness over its six end displacements as a polynomial
    /// matrix in `nvars` variables, area variable `var`.
    pub fn element_stiffness(&self, e: usize, nvars: usize, var: usize) -> Result<PolyMatrix> {
        let coeffs = self.element_coefficients(e)?;
        let mut out = PolyMatrix::symmetric(6, nvars);
        for i in 0..6 {
            for j in i..6 {
                let mut p = Polynomial::zero(nvars);
                let mut xk = Polynomial::constant(nvars, 1.0);
                for k in &coeffs {
                    xk = &xk * &Polynomial::var(nvars, var);
                    p = &p + &xk.scale(k[(i, j)]);
                }
                if !p.is_zero() {
                    out.set(i, j, p);
                }
            }
        }
        Ok(out)
    }

    /// Consistent nodal forces of the line loads on element `e`, as
    /// `(constant, per-area)` 6-vectors in global components.
    pub fn element_load(&self, e: usize) -> (DVector<f64>, DVector<f64>) {
        let l = self.length(e);
        let (c, s) = self.direction(e);
        let mut f0 = DVector::zeros(6);
        let mut f1 = DVector::zeros(6);
        for dl in self.loads.distributed.iter().filter(|d| d.element == e) {
            for (w, f) in [(dl.constant, &mut f0), (dl.per_area, &mut f1)] {
                let wa = c * w[0] + s * w[1];
                let wt = -s * w[0] + c * w[1];
                let local = [wa * l / 2.0, wt * l / 2.0, wt * l * l / 12.0, wa * l / 2.0, wt * l / 2.0, -wt * l * l / 12.0];
                for k in [0, 3] {
                    f[k] += c * local[k] - s * local[k + 1];
                    f[k + 1] += s * local[k] + c * local[k + 1];
                    f[k + 2] += local[k + 2];
                }
            }
        }
        (f0, f1)
    }

    /// `K(x)` over the free dofs and `f(x)` as an `n_dof × 1` matrix, in
    /// `nvars` variables with group `g` mapped to variable `g`.
    pub fn assemble(&self, nvars: usize) -> Result<(PolyMatrix, PolyMatrix)> {
        self.validate()?;
        let n = self.n_dof();
        let all: Vec<usize> = (0..self.elements.len()).collect();
        let k = self.assemble_part(&all, nvars)?;
        let f = self.load_vector(nvars);
        let k1 = k.eval(&vec![1.0; nvars])?;
        if n == 0 || min_eigenvalue(&k1) <= 1e-12 * k1.amax() {
            return Err(Error::MechanismDetected);
        }
        Ok((k, f))
    }

    /// Stiffness contribution of a set of elements.
    pub fn assemble_part(&self, elements: &[usize], nvars: usize) -> Result<PolyMatrix> {
        let n = self.n_dof();
        let groups = self.group_of();
        let mut k = PolyMatrix::symmetric(n, nvars);
        for &e in elements {
            let ke = self.element_stiffness(e, nvars, groups[e])?;
            let dofs = self.element_dofs(e);
            for i in 0..6 {
                for j in 0..6 {
                    if let (Some(a), Some(b)) = (dofs[i], dofs[j]) {
                        if a > b {
                            continue;
                        }
                        // a == b only for i == j, so every free pair is added once
                        if let Some(p) = ke.get(i, j) {
                            k.add_at(a, b, p);
                        }
                    }
                }
            }
        }
        Ok(k)
    }

    /// Load vector as an `n_dof × 1` polynomial matrix.
    pub fn load_vector(&self, nvars: usize) -> PolyMatrix {
        let map = self.dof_map();
        let groups = self.group_of();
        let mut f = PolyMatrix::zeros(self.n_dof(), 1, nvars);
        for l in &self.loads.nodal {
            for c in 0..3 {
                if let Some(d) = map[l.node][c] {
                    if l.force[c] != 0.0 {
                        f.add_at(d, 0, &Polynomial::constant(nvars, l.force[c]));
                    }
                }
            }
        }
        for e in 0..self.elements.len() {
            let (f0, f1) = self.element_load(e);
            let dofs = self.element_dofs(e);
            for i in 0..6 {
                if let Some(d) = dofs[i] {
                    let mut p = Polynomial::constant(nvars, f0[i]);
                    p.add_term(crate::polymat::Monomial::var(nvars, groups[e]), f1[i]);
                    if !p.is_zero() {
                        f.add_at(d, 0, &p);
                    }
                }
            }
        }
        f
    }

    /// Numeric `K(x)` and `f(x)` for group areas `x`.
    pub fn stiffness_and_load(&self, x: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let ng = self.n_groups();
        if x.len() != ng {
            return Err(Error::Dimension(format!("expected {ng} group areas, got {}", x.len())));
        }
        let k = self.assemble_part(&(0..self.elements.len()).collect::<Vec<_>>(), ng)?.eval(x)?;
        let f = self.load_vector(ng).eval(x)?;
        Ok((k, f.column(0).into_owned()))
    }

    /// Compliance `fᵀK†f` together with the displacement `u = K†f`.
    pub fn compliance(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        let (k, f) = self.stiffness_and_load(x)?;
        let u = pinv(&k, 1e-12) * &f;
        let res = (&k * &u - &f).norm();
        if res > IMAGE_TOL * (1.0 + f.norm()) {
            return Err(Error::InfeasibleCandidate(format!("load not in the range of K (residual {res:.3e})")));
        }
        Ok((f.dot(&u), u))
    }

    /// Compliance and its gradient `∂c/∂x_g = 2 ∂fᵀ/∂x_g u − uᵀ ∂K/∂x_g u`.
    pub fn compliance_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (c, u) = self.compliance(x)?;
        let groups = self.group_of();
        let mut grad = vec![0.0; self.n_groups()];
        for e in 0..self.elements.len() {
            let g = groups[e];
            let xe = x[g];
            let [k1, k2, k3] = self.element_coefficients(e)?;
            let dk = k1 + k2 * (2.0 * xe) + k3 * (3.0 * xe * xe);
            let (_, df) = self.element_load(e);
            let dofs = self.element_dofs(e);
            let ue: Vec<f64> = dofs.iter().map(|d| d.map_or(0.0, |d| u[d])).collect();
            let mut val = 0.0;
            for i in 0..6 {
                val += 2.0 * df[i] * ue[i];
                for j in 0..6 {
                    val -= ue[i] * dk[(i, j)] * ue[j];
                }
            }
            grad[g] += val;
        }
        Ok((c, grad))
    }

    /// Free dofs touched by each subdomain.
    pub fn index_sets(&self, parts: &[Vec<usize>]) -> Vec<Vec<usize>> {
        parts
            .iter()
            .map(|els| {
                let mut s: Vec<usize> = els.iter().flat_map(|&e| self.element_dofs(e)).flatten().collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }

    /// The model's partition, or one subdomain with every element.
    pub fn effective_partition(&self) -> Vec<Vec<usize>> {
        if self.partition.is_empty() {
            vec![(0..self.elements.len()).collect()]
        } else {
            self.partition.clone()
        }
    }
}

fn check_cover(sets: &[Vec<usize>], n: usize) -> std::result::Result<(), String> {
    let mut seen = vec![false; n];
    for s in sets {
        if s.is_empty() {
            return Err("empty set".into());
        }
        for &e in s {
            if e >= n {
                return Err(format!("element {e} does not exist"));
            }
            if seen[e] {
                return Err(format!("element {e} listed twice"));
            }
            seen[e] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(e) => Err(format!("element {e} not covered")),
        None => Ok(()),
    }
}

/// Arrow structure of `[[K, −f], [−fᵀ, Γ]]` for the given subdomains, in
/// unscaled variables (`x` per group, then `γ` for the compliance kind).
pub fn partition(model: &FrameModel, parts: &[Vec<usize>]) -> Result<ArrowStructure> {
    check_cover(parts, model.elements.len()).map_err(Error::PartitionInvalid)?;
    let ng = model.n_groups();
    let nvars = match model.problem {
        ProblemKind::Compliance { .. } => ng + 1,
        ProblemKind::Weight { .. } => ng,
    };
    let index_sets = model.index_sets(parts);
    if index_sets.iter().any(|s| s.is_empty()) {
        return Err(Error::PartitionInvalid("a subdomain touches no free dof".into()));
    }
    let a_blocks = parts.iter().map(|els| model.assemble_part(els, nvars)).collect::<Result<Vec<_>>>()?;
    let b = model.load_vector(nvars).scale(-1.0);
    let mut gamma = PolyMatrix::symmetric(1, nvars);
    gamma.set(
        0,
        0,
        match model.problem {
            ProblemKind::Compliance { .. } => Polynomial::var(nvars, ng),
            ProblemKind::Weight { compliance_bound } => Polynomial::constant(nvars, compliance_bound),
        },
    );
    ArrowStructure::with_default_split(index_sets, a_blocks, &b, gamma)
}

/// Affine variable map and row equilibration applied by [`build_pop`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// Upper bound of each group area: `x_g = x̄_g (s_g + 1)/2`.
    pub x_bar: Vec<f64>,
    /// Compliance box `γ = γ_ub (s_γ + 1)/2` (compliance kind only).
    pub gamma_ub: Option<f64>,
    /// Diagonal of the congruence applied to the PMI.
    pub row_scale: Vec<f64>,
    /// Weight budget: `w̄` or the weight of the reference design.
    pub weight_bound: f64,
}

impl Scaling {
    /// Group areas of a scaled point.
    pub fn unscale(&self, s: &[f64]) -> Vec<f64> {
        self.x_bar.iter().zip(s).map(|(xb, s)| xb * (s + 1.0) / 2.0).collect()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        self.x_bar.iter().zip(x).map(|(xb, x)| 2.0 * x / xb - 1.0).collect()
    }
}

/// Scaled polynomial problem of a frame together with its scaling record.
#[derive(Clone, Debug)]
pub struct StructuralPop {
    pub kind: ProblemKind,
    pub pop: Pop,
    pub scaling: Scaling,
    /// Unscaled arrow structure (for statics reports).
    pub raw: ArrowStructure,
}

/// Design with all group areas equal, made feasible with an active
/// weight (compliance kind) or compliance (weight kind) constraint.
pub fn uniform_design(model: &FrameModel) -> Result<UpperBound> {
    upper_bound(model, &vec![1.0; model.n_groups()])
}

/// Reference design of the compactification: the uniform design improved
/// by [`local_search`].
fn reference_design(model: &FrameModel) -> Result<UpperBound> {
    let start = uniform_design(model)?;
    local_search(model, &start.x, LOCAL_SEARCH_ITERATIONS)
}

/// Iterations of the optimality-criteria search used by [`build_pop`].
pub const LOCAL_SEARCH_ITERATIONS: usize = 300;

/// Optimality-criteria search from a candidate design.
///
/// Each step multiplies `x_g` by `(−∂c/∂x_g / W_g)^{1/2}` within a move
/// limit of 20 % and repairs the result with [`upper_bound`]; the best
/// repaired design is returned, so the result is never worse than the
/// repaired start.
pub fn local_search(model: &FrameModel, start: &[f64], iterations: usize) -> Result<UpperBound> {
    let mut best = upper_bound(model, start)?;
    let mut x = best.x.clone();
    let w = model.group_weights();
    for _ in 0..iterations {
        let (_, grad) = model.compliance_gradient(&x)?;
        let ratios: Vec<f64> = grad.iter().zip(&w).map(|(g, w)| (-g).max(0.0) / w).collect();
        let mean = ratios.iter().zip(&x).map(|(r, x)| r * x).sum::<f64>() / x.iter().sum::<f64>();
        if !(mean > 0.0) {
            break;
        }
        let xmax = x.iter().cloned().fold(0.0, f64::max);
        let next: Vec<f64> = x
            .iter()
            .zip(&ratios)
            .map(|(xi, r)| (xi * (r / mean).sqrt().clamp(0.8, 1.25)).max(1e-9 * xmax))
            .collect();
        let Ok(cand) = upper_bound(model, &next) else { break };
        let improvement = best.value - cand.value;
        x = cand.x.clone();
        if improvement > 0.0 {
            best = cand;
            if improvement < 1e-12 * best.value {
                break;
            }
        }
    }
    Ok(best)
}

/// Multiplier `t` with compliance of `t·x` equal to `target`.
fn bisect_scale(model: &FrameModel, x: &[f64], target: f64) -> Result<f64> {
    let comp = |t: f64| -> Result<f64> {
        let xs: Vec<f64> = x.iter().map(|v| v * t).collect();
        model.compliance(&xs).map(|c| c.0)
    };
    let mut hi = 1.0;
    let mut guard = 0;
    while comp(hi)? > target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InfeasibleCandidate("compliance bound unreachable by scaling".into()));
        }
    }
    let mut lo = hi / 2.0;
    guard = 0;
    while lo > 0.0 && comp(lo).map_or(true, |c| c <= target) {
        lo /= 2.0;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match comp(mid) {
            Ok(c) if c <= target => hi = mid,
            _ => lo = mid,
        }
        if (hi - lo) <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Builds the scaled problem: variables `s ∈ [−1, 1]` per group (and `s_γ`
/// for the compliance kind), box constraints `1 − s² ≥ 0`, the weight
/// constraint and the equilibrated arrow PMI over the model's partition.
///
/// For the compliance kind `x̄_g = w̄/W_g` and `γ_ub` is the compliance of
/// the uniform design of weight `w̄`. For the weight kind the budget is the
/// weight of the uniform design with compliance `γ̄`, found by bisection.
pub fn build_pop(model: &FrameModel) -> Result<StructuralPop> {
    build_pop_with_budget(model, None)
}

/// [`build_pop`] with the weight-kind budget taken from a known feasible
/// design instead of the uniform one. A smaller budget shrinks the boxes
/// and tightens the relaxation; it must not be below the optimal weight.
pub fn build_pop_with_budget(model: &FrameModel, budget: Option<f64>) -> Result<StructuralPop> {
    model.validate()?;
    let parts = model.effective_partition();
    let raw = partition(model, &parts)?;
    let ng = model.n_groups();
    let nvars = raw.nvars();
    let wg = model.group_weights();
    let reference = reference_design(model)?.value;
    let (weight_bound, gamma_ub) = match model.problem {
        ProblemKind::Compliance { weight_bound } => (weight_bound, Some(reference)),
        ProblemKind::Weight { .. } => (budget.unwrap_or(reference), None),
    };
    let x_bar: Vec<f64> = wg.iter().map(|w| weight_bound / w).collect();
    let mut a = x_bar.iter().map(|xb| xb / 2.0).collect::<Vec<_>>();
    let mut b = a.clone();
    if let Some(g) = gamma_ub {
        a.push(g / 2.0);
        b.push(g / 2.0);
    }
    let sub = |m: &PolyMatrix| m.affine_substitute(&a, &b);
    let a_blocks: Vec<PolyMatrix> = raw.a_blocks.iter().map(sub).collect();
    let b_blocks: Vec<PolyMatrix> = raw.b_blocks.iter().map(sub).collect();
    let gamma = sub(&raw.gamma);

    let centre = vec![0.0; nvars];
    let a_sum = a_blocks.iter().try_fold(PolyMatrix::symmetric(raw.n, nvars), |acc, x| acc.add(x))?;
    let a0 = a_sum.eval(&centre)?;
    let g0 = gamma.eval(&centre)?;
    let inv_sqrt = |v: f64| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 };
    let row_scale: Vec<f64> = (0..raw.n).map(|i| inv_sqrt(a0[(i, i)])).chain([inv_sqrt(g0[(0, 0)])]).collect();
    let dn = DMatrix::from_diagonal(&DVector::from_row_slice(&row_scale[..raw.n]));
    let dm = DMatrix::from_element(1, 1, row_scale[raw.n]);
    let arrow = ArrowStructure::new(
        raw.index_sets.clone(),
        a_blocks.iter().map(|m| m.congruence(&dn)).collect(),
        b_blocks.iter().map(|m| m.sandwich(&dn, &dm)).collect(),
        gamma.congruence(&dm),
    )?;

    let objective = match model.problem {
        ProblemKind::Compliance { .. } => {
            let g = gamma_ub.expect("compliance kind");
            Polynomial::affine(g / 2.0, &unit(nvars, ng, g / 2.0))
        }
        ProblemKind::Weight { .. } => {
            let coeffs: Vec<f64> = (0..nvars).map(|i| wg[i] * x_bar[i] / 2.0).collect();
            Polynomial::affine(coeffs.iter().sum(), &coeffs)
        }
    };
    let mut pop = Pop::new(objective);
    pop.var_names = (0..ng).map(|g| format!("s{}", g + 1)).collect();
    if gamma_ub.is_some() {
        pop.var_names.push("s_gamma".into());
    }
    for i in 0..nvars {
        let si = Polynomial::var(nvars, i);
        pop.scalar_constraints.push(&Polynomial::constant(nvars, 1.0) - &(&si * &si));
    }
    // w(x) ≤ w̄ becomes 1 − Σ_g (s_g + 1)/2 ≥ 0 after scaling.
    let coeffs: Vec<f64> = (0..nvars).map(|i| if i < ng { -0.5 } else { 0.0 }).collect();
    pop.scalar_constraints.push(Polynomial::affine(1.0 - 0.5 * ng as f64, &coeffs));
    pop.arrow = Some(arrow);
    Ok(StructuralPop {
        kind: model.problem,
        pop,
        scaling: Scaling { x_bar, gamma_ub, row_scale, weight_bound },
        raw,
    })
}

fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[i] = v;
    out
}

/// A feasible design and its objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub x: Vec<f64>,
    pub value: f64,
    pub weight: f64,
    pub compliance: f64,
}

/// Repairs a candidate design into a feasible one.
///
/// Compliance kind: `x̂` is scaled so that the weight constraint is active.
/// Weight kind: the multiplier on `x̂` is bisected until the compliance
/// equals `γ̄`.
pub fn upper_bound(model: &FrameModel, candidate: &[f64]) -> Result<UpperBound> {
    let xh: Vec<f64> = candidate.iter().map(|v| v.max(0.0)).collect();
    let w = model.weight(&xh);
    if !(w > 0.0) {
        return Err(Error::InfeasibleCandidate("candidate has zero weight".into()));
    }
    match model.problem {
        ProblemKind::Compliance { weight_bound } => {
            let x: Vec<f64> = xh.iter().map(|v| v * weight_bound / w).collect();
            let (c, _) = model.compliance(&x)?;
            Ok(UpperBound { value: c, weight: model.weight(&x), compliance: c, x })
        }
        ProblemKind::Weight { compliance_bound } => {
            let t = bisect_scale(model, &xh, compliance_bound)?;
            let x: Vec<f64> = xh.iter().map(|v| v * t).collect();
            let (c, _) = model.compliance(&x)?;
            let wt = model.weight(&x);
            Ok(UpperBound { value: wt, weight: wt, compliance: c, x })
        }
    }
}

/// Relative optimality gap `ub/lb − 1`.
pub fn gap(lb: f64, ub: f64) -> Result<f64> {
    if !(lb > 0.0) {
        return Err(Error::NonpositiveLowerBound(lb));
    }
    Ok(ub / lb - 1.0)
}

/// Rigid-body balance of one subdomain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub part: usize,
    /// `"→"`, `"↑"` or `"↻"`.
    pub label: String,
    /// Rigid-body mode over the subdomain's free dofs (global numbering).
    pub mode: Vec<(usize, f64)>,
    /// `vᵀ(Bₖ + ΠₖD)`: must vanish for the interface forces to balance.
    pub residual: f64,
    /// `vᵀAₖ(x)v`, a check that `v` is a mode of the subdomain.
    pub energy: f64,
}

/// Interface forces `D` of a design and the rigid-body balances of every
/// subdomain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceReport {
    /// Rows of `D` in interface order.
    pub forces: Vec<f64>,
    pub balances: Vec<Balance>,
}

/// Rigid-body modes admitted by the supports of a subdomain.
pub fn rigid_modes(model: &FrameModel, elements: &[usize]) -> Vec<(String, Vec<(usize, f64)>)> {
    let map = model.dof_map();
    let mut nodes: Vec<usize> = elements.iter().flat_map(|&e| model.elements[e].nodes).collect();
    let pivot = nodes[0];
    nodes.sort_unstable();
    nodes.dedup();
    let origin = model.nodes[pivot];
    // Columns: translation x, translation y, rotation about the pivot node.
    let comp = |node: usize, c: usize| -> [f64; 3] {
        let p = model.nodes[node];
        match c {
            0 => [1.0, 0.0, -(p[1] - origin[1])],
            1 => [0.0, 1.0, p[0] - origin[0]],
            _ => [0.0, 0.0, 1.0],
        }
    };
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for &nd in &nodes {
        for c in 0..3 {
            if map[nd][c].is_none() {
                rows.push(comp(nd, c));
            }
        }
    }
    let fixed = DMatrix::from_fn(rows.len().max(1), 3, |i, j| rows.get(i).map_or(0.0, |r| r[j]));
    let null = crate::linalg::null_space(&fixed, 1e-10);
    let mut chosen: Vec<(String, DVector<f64>)> = Vec::new();
    let in_null = |v: &DVector<f64>| (&fixed * v).norm() < 1e-10;
    for (label, e) in [("→", 0), ("↑", 1), ("↻", 2)] {
        let mut v = DVector::zeros(3);
        v[e] = 1.0;
        if in_null(&v) {
            chosen.push((label.to_string(), v));
        }
    }
    if chosen.len() < null.ncols() {
        // The remaining mode is a rotation about a support point.
        for j in 0..null.ncols() {
            let v = null.column(j).into_owned();
            let mut resid = v.clone();
            for (_, c) in &chosen {
                resid -= c * c.dot(&v);
            }
            if resid.norm() > 1e-8 {
                let v = &resid / resid[2].abs().max(resid.norm() * 1e-3).copysign(resid[2]);
                chosen.push(("↻".to_string(), v));
                break;
            }
        }
    }
    chosen
        .into_iter()
        .map(|(label, coef)| {
            let mut mode = Vec::new();
            for &nd in &nodes {
                for c in 0..3 {
                    if let Some(d) = map[nd][c] {
                        let r = comp(nd, c);
                        let v = r[0] * coef[0] + r[1] * coef[1] + r[2] * coef[2];
                        if v.abs() > 1e-14 {
                            mode.push((d, v));
                        }
                    }
                }
            }
            (label, mode)
        })
        .collect()
}

/// Interface forces at design `x` (group areas) and the balance of every
/// rigid-body mode of every subdomain.
pub fn interface_forces_report(model: &FrameModel, parts: &[Vec<usize>], x: &[f64]) -> Result<InterfaceReport> {
    let s = partition(model, parts)?;
    let (c, _) = model.compliance(x)?;
    let mut point = x.to_vec();
    if let ProblemKind::Compliance { .. } = model.problem {
        point.push(c * (1.0 + 1e-6) + 1e-12);
    }
    let num = s.evaluate(&point)?;
    let cert = constructive_certificate(&s, &point)?;
    let layout = build_interface_layout(&s.index_sets);
    let mut balances = Vec::new();
    for (k, els) in parts.iter().enumerate() {
        let mut col = num.b[k].clone();
        let local = &layout.pi[k] * &cert.d;
        for (row, &g) in s.index_sets[k].iter().enumerate() {
            col[(g, 0)] += local[(row, 0)];
        }
        for (label, mode) in rigid_modes(model, els) {
            let residual: f64 = mode.iter().map(|&(d, v)| v * col[(d, 0)]).sum();
            let mut energy = 0.0;
            for &(i, vi) in &mode {
                for &(j, vj) in &mode {
                    energy += vi * num.a[k][(i, j)] * vj;
                }
            }
            balances.push(Balance { part: k, label, mode, residual, energy });
        }
    }
    Ok(InterfaceReport { forces: cert.d.column(0).iter().copied().collect(), balances })
}

/// Hierarchy variant of a run: the four combinations of arrow
/// decomposition and basis, plus the projection switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMode {
    pub r: u32,
    pub ad: bool,
    pub nmt: bool,
    pub project: bool,
}

impl RunMode {
    pub fn new(r: u32, ad: bool, nmt: bool) -> Self {
        RunMode { r, ad, nmt, project: true }
    }

    /// Column label in the `mSOS[+NMT][+AD]` convention.
    pub fn label(&self) -> String {
        let mut s = String::from("mSOS");
        if self.nmt {
            s.push_str("+NMT");
        }
        if self.ad {
            s.push_str("+AD");
        }
        s
    }

    /// All four hierarchies at order `r`.
    pub fn all(r: u32) -> [RunMode; 4] {
        [RunMode::new(r, false, false), RunMode::new(r, true, false), RunMode::new(r, false, true), RunMode::new(r, true, true)]
    }
}

/// One table row of a solved frame relaxation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub problem: String,
    pub mode: String,
    pub r: u32,
    pub ad: bool,
    pub nmt: bool,
    pub project: bool,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    pub gap: Option<f64>,
    pub n_vars: usize,
    pub block_sizes: Vec<usize>,
    pub size_summary: String,
    pub status: Status,
    pub iterations: usize,
    pub rank_r: usize,
    pub rank_lower: usize,
    pub flat: bool,
    /// Group areas of the upper-bound design.
    pub design: Vec<f64>,
    /// Wall time in seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

impl FrameReport {
    /// Status flag in the table convention: `+` marks solver trouble.
    pub fn flag(&self) -> &'static str {
        match self.status {
            Status::Optimal | Status::NearOptimal => "",
            _ => "+",
        }
    }

    /// Header matching [`csv_row`](Self::csv_row).
    pub const CSV_HEADER: &'static str = "problem,mode,r,lb,ub,gap,n,sizes,status,iterations,time_s";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6e}"));
        format!(
            "{},{},{},{:.6e},{},{},{},\"{}\",{},{},{:.3}",
            self.problem,
            self.mode,
            self.r,
            self.lower_bound,
            opt(self.upper_bound),
            opt(self.gap),
            self.n_vars,
            self.size_summary,
            self.status,
            self.iterations,
            self.wall_time
        )
    }

    /// Human-readable row.
    pub fn table_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3e}"));
        format!(
            "{:<14} {:<13} r={} lb={}{:.3e} ub={} eps={} n={} size={} t={:.2}s",
            self.problem,
            self.mode,
            self.r,
            self.flag(),
            self.lower_bound,
            opt(self.upper_bound),
            opt(self.gap),
            self.n_vars,
            self.size_summary,
            self.wall_time
        )
    }
}

/// Builds the relaxation of a frame problem for a mode.
pub fn build_relaxation(sp: &StructuralPop, mode: &RunMode) -> Result<Relaxation> {
    let kind = if mode.nmt { BasisKind::Nmt } else { BasisKind::Standard };
    let opts = RelaxationOptions::new(mode.r).basis(kind).projection(mode.project);
    let hierarchy = if mode.ad { Hierarchy::ArrowPosterior } else { Hierarchy::Standard };
    build(&sp.pop, &opts, hierarchy)
}

/// Builds, solves and post-processes one relaxation: lower bound, repaired
/// and locally improved upper bound, gap and flatness ranks.
pub fn run(model: &FrameModel, mode: &RunMode, backend: &Backend) -> Result<FrameReport> {
    if mode.r == 0 {
        return Err(Error::DegreeOverflow { r: 0, r_min: 1 });
    }
    let start = std::time::Instant::now();
    let sp = build_pop(model)?;
    let rel = build_relaxation(&sp, mode)?;
    let out = solve_relaxation(&rel, backend)?;
    let ng = model.n_groups();
    let s = candidate_point(&out.moments, sp.pop.nvars, None)?;
    let s: Vec<f64> = s[..ng].iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let ub = upper_bound(model, &sp.scaling.unscale(&s))
        .and_then(|u| local_search(model, &u.x, LOCAL_SEARCH_ITERATIONS))
        .ok();
    let lb = out.lower_bound;
    let fl = flatness(&out.moments, sp.pop.nvars, mode.r, rel.r_g, rel.basis, FLATNESS_RANK_TOL)?;
    Ok(FrameReport {
        problem: model.name.clone(),
        mode: mode.label(),
        r: mode.r,
        ad: mode.ad,
        nmt: mode.nmt,
        project: mode.project,
        lower_bound: lb,
        upper_bound: ub.as_ref().map(|u| u.value),
        gap: ub.as_ref().and_then(|u| gap(lb, u.value).ok()),
        n_vars: rel.n_vars(),
        block_sizes: rel.block_sizes(),
        size_summary: rel.size_summary(),
        status: out.solution.status,
        iterations: out.solution.iterations,
        rank_r: fl.rank_r,
        rank_lower: fl.rank_lower,
        flat: fl.flat,
        design: ub.map(|u| u.x).unwrap_or_default(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Diagnostics of the arrow decomposition of a frame problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub index_sets: Vec<Vec<usize>>,
    /// Pairs `(k, l, shared indices)` with `k < l`.
    pub intersections: Vec<(usize, usize, Vec<usize>)>,
    /// Rows of the stacked interface matrix.
    pub n_interface: usize,
    /// Free interface rows left after elimination.
    pub q: usize,
    /// Interface rows expressed through the free ones.
    pub eliminated_rows: Vec<usize>,
    pub ranks: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub projected_sizes: Vec<usize>,
}

/// Decomposes the stiffness PMI of a model and runs the elimination and
/// projection steps on it.
pub fn decomposition_report(model: &FrameModel) -> Result<DecompositionReport> {
    let raw = partition(model, &model.effective_partition())?;
    let dec = decompose_lmi(&raw);
    let bases = space_bases(&dec, RANK_TOL);
    let elim = eliminate(&dec, &bases, RANK_TOL)?;
    let projected = project_lmi(&dec, &bases, &elim)?;
    let free: Vec<usize> = (0..elim.q)
        .filter_map(|j| (0..elim.basis.nrows()).find(|&i| (elim.basis[(i, j)] - 1.0).abs() < 1e-12))
        .collect();
    Ok(DecompositionReport {
        problem: model.name.clone(),
        n: raw.n,
        m: raw.m,
        intersections: intersections(&raw.index_sets),
        index_sets: raw.index_sets.clone(),
        n_interface: dec.layout.n_i,
        q: elim.q,
        eliminated_rows: (0..dec.layout.n_i).filter(|i| !free.contains(i)).collect(),
        ranks: bases.ranks(),
        block_sizes: dec.blocks.iter().map(|b| b.size(raw.m)).collect(),
        projected_sizes: projected.iter().map(|b| b.size(raw.m)).collect(),
    })
}

/// Built-in models.
pub mod builtin {
    use super::*;

    /// Half of a double-hinged steel beam, 5 m long, split into `n_e` equal
    /// elements. Units are kN and m; the I-section has `A = 18t²`,
    /// `I = 246t⁴`. The line load is `1 kN/m` plus self-weight
    /// `ρ g x` with `ρ = 7850 kg/m³`, `g = 9.82 m/s²`.
    pub fn beam(n_e: usize) -> FrameModel {
        assert!(n_e >= 1);
        let len = 5.0;
        let nodes = (0..=n_e).map(|i| [len * i as f64 / n_e as f64, 0.0]).collect();
        let elements = (0..n_e)
            .map(|i| Element { nodes: [i, i + 1], e: 210e6, rho: 7850.0, section: "I".into() })
            .collect();
        let self_weight = 7850.0 * 9.82 / 1000.0;
        let distributed = (0..n_e)
            .map(|e| DistributedLoad { element: e, constant: [0.0, -1.0], per_area: [0.0, -self_weight] })
            .collect();
        let mut partition = vec![(0..n_e.min(2)).collect::<Vec<_>>()];
        partition.extend((2..n_e).map(|e| vec![e]));
        FrameModel {
            name: format!("beam-{n_e}"),
            nodes,
            elements,
            sections: [("I".to_string(), Section::ThinWalled { area_factor: 18.0, inertia_factor: 246.0 })].into(),
            supports: vec![
                Support { node: 0, fix: [true, true, false] },
                Support { node: n_e, fix: [true, false, true] },
            ],
            loads: Loads { nodal: vec![], distributed },
            groups: vec![],
            partition,
            problem: ProblemKind::Compliance { weight_bound: 785.0 },
        }
    }

    /// Three-storey, 24-element modular frame with nine section groups,
    /// clamped at both bottom nodes, minimising weight for compliance 5000.
    pub fn frame24() -> FrameModel {
        let nodes = vec![
            [0.0, 0.0],
            [1.5, 0.0],
            [0.0, 1.0],
            [1.5, 1.0],
            [0.0, 2.0],
            [1.5, 2.0],
            [0.0, 3.0],
            [1.5, 3.0],
            [0.75, 1.0],
            [0.75, 2.0],
            [0.75, 3.0],
            [0.75, 0.5],
            [0.75, 1.5],
            [0.75, 2.5],
        ];
        let (a, b, c, d, e, f, g, h, i, j, k, l, m, n) = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13);
        let conn: [(usize, usize, &str); 24] = [
            (a, c, "H"),
            (c, e, "H"),
            (e, g, "H"),
            (b, d, "H"),
            (d, f, "H"),
            (f, h, "H"),
            (c, i, "I"),
            (i, d, "I"),
            (e, j, "I"),
            (j, f, "I"),
            (g, k, "I"),
            (k, h, "I"),
            (a, l, "O"),
            (l, d, "O"),
            (b, l, "O"),
            (l, c, "O"),
            (c, m, "O"),
            (m, f, "O"),
            (d, m, "O"),
            (m, e, "O"),
            (e, n, "O"),
            (n, h, "O"),
            (f, n, "O"),
            (n, g, "O"),
        ];
        let elements = conn
            .iter()
            .map(|&(p, q, s)| Element { nodes: [p, q], e: 1.0, rho: 1.0, section: s.into() })
            .collect();
        let sections = [
            ("H".to_string(), Section::ThinWalled { area_factor: 28.0, inertia_factor: 1348.0 / 3.0 }),
            ("I".to_string(), Section::ThinWalled { area_factor: 38.0, inertia_factor: 6878.0 / 3.0 }),
            (
                "O".to_string(),
                Section::ThinWalled {
                    area_factor: 9.0 * std::f64::consts::PI,
                    inertia_factor: 92.25 * std::f64::consts::PI,
                },
            ),
        ]
        .into();
        let nodal = vec![
            NodalLoad { node: c, force: [1.0, 0.0, 0.0] },
            NodalLoad { node: e, force: [1.0, 0.0, 0.0] },
            NodalLoad { node: g, force: [0.5, 0.0, 0.0] },
            NodalLoad { node: i, force: [0.0, -1.0, 0.0] },
            NodalLoad { node: j, force: [0.0, -1.0, 0.0] },
            NodalLoad { node: k, force: [0.0, -1.0, 0.0] },
        ];
        let groups = vec![
            vec![0, 3],
            vec![1, 4],
            vec![2, 5],
            vec![6, 7],
            vec![8, 9],
            vec![10, 11],
            vec![12, 13, 14, 15],
            vec![16, 17, 18, 19],
            vec![20, 21, 22, 23],
        ];
        let partition = vec![
            vec![0, 3, 6, 7, 12, 13, 14, 15],
            vec![1, 4, 8, 9, 16, 17, 18, 19],
            vec![2, 5, 10, 11, 20, 21, 22, 23],
        ];
        FrameModel {
            name: "frame24".into(),
            nodes,
            elements,
            sections,
            supports: vec![Support { node: a, fix: [true; 3] }, Support { node: b, fix: [true; 3] }],
            loads: Loads { nodal, distributed: vec![] },
            groups,
            partition,
            problem: ProblemKind::Compliance { weight_bound: 1.0 },
        }
        .with_problem(ProblemKind::Weight { compliance_bound: 5000.0 })
    }

    /// Three collinear elements of lengths `ℓ₁, ℓ₂, ℓ₃`, pinned at the left
    /// end and clamped at the right end, with `E = 1`, `I(x) = x³`, a force
    /// `−q₁` on `u_y(b)` and `q₂` on `u_y(c)`; one subdomain per element.
    pub fn three_element(lengths: [f64; 3], q: [f64; 2]) -> FrameModel {
        let x1 = lengths[0];
        let x2 = x1 + lengths[1];
        let x3 = x2 + lengths[2];
        FrameModel {
            name: "three-element".into(),
            nodes: vec![[0.0, 0.0], [x1, 0.0], [x2, 0.0], [x3, 0.0]],
            elements: (0..3)
                .map(|i| Element { nodes: [i, i + 1], e: 1.0, rho: 1.0, section: "cubic".into() })
                .collect(),
            sections: [("cubic".to_string(), Section::Polynomial { coeffs: [0.0, 0.0, 1.0] })].into(),
            supports: vec![Support { node: 0, fix: [true, true, false] }, Support { node: 3, fix: [true; 3] }],
            loads: Loads {
                nodal: vec![
                    NodalLoad { node: 1, force: [0.0, -q[0], 0.0] },
                    NodalLoad { node: 2, force: [0.0, q[1], 0.0] },
                ],
                distributed: vec![],
            },
            groups: vec![],
            partition: vec![vec![0], vec![1], vec![2]],
            problem: ProblemKind::Compliance { weight_bound: 1.0 },
        }
    }

    /// Looks up a built-in by name: `beam:<n_e>`, `frame24`, `three-element`.
    pub fn by_name(name: &str) -> Result<FrameModel> {
        if let Some(n) = name.strip_prefix("beam:").or_else(|| name.strip_prefix("beam-")) {
            let n_e: usize = n.parse().map_err(|_| Error::Model(format!("bad element count in '{name}'")))?;
            if n_e == 0 {
                return Err(Error::Model("a beam needs at least one element".into()));
            }
            return Ok(beam(n_e));
        }
        match name {
            "frame24" => Ok(frame24()),
            "three-element" => Ok(three_element([1.0, 1.0, 1.0], [1.0, 1.0])),
            _ => Err(Error::Model(format!("unknown built-in problem '{name}'"))),
        }
    }
}

impl FrameModel {
    pub fn with_problem(mut self, problem: ProblemKind) -> Self {
        self.problem = problem;
        self
    }
}
