//! Local structure equations at a single jump site.
//!
//! A site is the conditional picture at one jump time: the children of the
//! pre-jump atom with their probabilities, the driver increment `w_k`, the
//! information tilt `nu_k = φ^T ΔN` and the drift value `delta_k = ΔD`. The
//! coefficient vectors of the drift and of `D` only ever enter contracted
//! against `w_k`, so the scalars `nu_k`, `delta_k` carry all identifiable data.
//!
//! Accessible sites solve `M ξ = Σ p (delta + nu) w` with
//! `M = Σ (1+nu) p (w - w̄)(w - w̄)^T`; inaccessible sites solve
//! `Σ (1+nu) q w w^T ξ = Σ q (delta + nu) w`. Both go through
//! [`restricted_inverse`] with `G = Σ p w w^T` and `J = G^+ M`.

use thiserror::Error as ThisError;

use crate::linalg::{is_psd, min_norm_solve, project_onto_columns, Matrix};
use crate::scalar::{dot, min_of, sum, Scalar};

/// One child of a jump site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteChild<S> {
    /// `p_k` (accessible) or `q_k` (inaccessible).
    pub prob: S,
    pub w: Vec<S>,
    pub nu: S,
    pub delta: S,
}

impl<S: Scalar> SiteChild<S> {
    fn charged(&self) -> bool {
        self.prob.definitely_pos()
    }

    fn tilt(&self) -> S {
        S::one() + self.nu.clone()
    }
}

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum KernelError<S: Scalar> {
    #[error("invalid site: {0}")]
    InvalidSite(String),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive semidefinite")]
    NotPsd,
    #[error("child {child} has negative tilt 1 + nu = {value}")]
    NegativeTilt { child: usize, value: S },
    #[error("coercivity fails: {0}")]
    CoercivityFailure(String),
    #[error("J does not act invertibly on the range of G")]
    SingularOnV,
}

fn validate_children<S: Scalar>(d: usize, children: &[SiteChild<S>]) -> Result<(), KernelError<S>> {
    let bad = |m: String| Err(KernelError::InvalidSite(m));
    if children.is_empty() {
        return bad("a site needs at least one child".into());
    }
    for (k, c) in children.iter().enumerate() {
        if c.w.len() != d {
            return bad(format!("child {k}: w has length {}, expected {d}", c.w.len()));
        }
        if c.prob.definitely_neg() {
            return bad(format!("child {k}: negative probability {}", c.prob.render()));
        }
        if c.charged() && !c.delta.strictly_less(&S::one()) {
            return bad(format!("child {k}: delta = {} violates the jump bound delta < 1", c.delta.render()));
        }
    }
    let total = sum(children.iter().map(|c| c.prob.clone()));
    if !total.approx_eq(&S::one()) {
        return bad(format!("probabilities sum to {}", total.render()));
    }
    Ok(())
}

fn weighted_sum<S: Scalar>(children: &[SiteChild<S>], d: usize, weight: impl Fn(&SiteChild<S>) -> S) -> Vec<S> {
    let mut acc = vec![S::zero(); d];
    for c in children {
        let a = weight(c);
        for (x, wi) in acc.iter_mut().zip(&c.w) {
            *x = x.clone() + a.clone() * wi.clone();
        }
    }
    acc
}

fn outer_sum<S: Scalar>(d: usize, terms: impl Iterator<Item = (S, Vec<S>)>) -> Matrix<S> {
    let mut m: Matrix<S> = Matrix::zeros(d, d);
    for (a, v) in terms {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = m[(i, j)].clone() + a.clone() * v[i].clone() * v[j].clone();
            }
        }
    }
    m
}

/// Jump site at a predictable time.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessibleSite<S> {
    d: usize,
    children: Vec<SiteChild<S>>,
}

impl<S: Scalar> AccessibleSite<S> {
    /// Checks `Σp = 1`, `Σ p w = 0`, `Σ p nu = 0`, `Σ p delta = 0` and `delta < 1` on charged children.
    pub fn new(d: usize, children: Vec<SiteChild<S>>) -> Result<Self, KernelError<S>> {
        validate_children(d, &children)?;
        let mean_w = weighted_sum(&children, d, |c| c.prob.clone());
        if mean_w.iter().any(|x| !x.near_zero()) {
            return Err(KernelError::InvalidSite("driver increments are not centred (Σ p w ≠ 0)".into()));
        }
        for (name, f) in [("nu", (|c: &SiteChild<S>| c.nu.clone()) as fn(&SiteChild<S>) -> S), ("delta", |c| c.delta.clone())] {
            let m = sum(children.iter().map(|c| c.prob.clone() * f(c)));
            if !m.near_zero() {
                return Err(KernelError::InvalidSite(format!("Σ p {name} = {} is not zero", m.render())));
            }
        }
        Ok(AccessibleSite { d, children })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn children(&self) -> &[SiteChild<S>] {
        &self.children
    }

    /// `w̄ = Σ (1+nu) p w`, the driver's mean under the tilted law.
    pub fn tilted_mean(&self) -> Vec<S> {
        weighted_sum(&self.children, self.d, |c| c.tilt() * c.prob.clone())
    }

    /// Smallest `1 + nu` over charged children.
    pub fn u(&self) -> S {
        min_of(self.children.iter().filter(|c| c.charged()).map(SiteChild::tilt)).unwrap_or_else(S::one)
    }

    /// `Σ p (delta + nu) w`.
    pub fn rhs(&self) -> Vec<S> {
        weighted_sum(&self.children, self.d, |c| c.prob.clone() * (c.delta.clone() + c.nu.clone()))
    }
}

/// Jump site at a totally inaccessible time.
#[derive(Debug, Clone, PartialEq)]
pub struct InaccessibleSite<S> {
    d: usize,
    children: Vec<SiteChild<S>>,
}

impl<S: Scalar> InaccessibleSite<S> {
    /// Checks `Σq = 1`, `1 + Σ q nu > 0` and `delta < 1` on charged children.
    pub fn new(d: usize, children: Vec<SiteChild<S>>) -> Result<Self, KernelError<S>> {
        validate_children(d, &children)?;
        let site = InaccessibleSite { d, children };
        if !site.mass().definitely_pos() {
            return Err(KernelError::InvalidSite(format!("1 + Σ q nu = {} is not positive", site.mass().render())));
        }
        Ok(site)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn children(&self) -> &[SiteChild<S>] {
        &self.children
    }

    /// `1 + Σ q nu`.
    pub fn mass(&self) -> S {
        S::one() + sum(self.children.iter().map(|c| c.prob.clone() * c.nu.clone()))
    }

    pub fn u(&self) -> S {
        min_of(self.children.iter().filter(|c| c.charged()).map(SiteChild::tilt)).unwrap_or_else(S::one)
    }

    /// `Σ q (delta + nu) w`.
    pub fn rhs(&self) -> Vec<S> {
        weighted_sum(&self.children, self.d, |c| c.prob.clone() * (c.delta.clone() + c.nu.clone()))
    }
}

/// Either kind of site.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpSite<S> {
    Accessible(AccessibleSite<S>),
    Inaccessible(InaccessibleSite<S>),
}

impl<S: Scalar> JumpSite<S> {
    pub fn d(&self) -> usize {
        match self {
            JumpSite::Accessible(s) => s.d,
            JumpSite::Inaccessible(s) => s.d,
        }
    }

    pub fn children(&self) -> &[SiteChild<S>] {
        match self {
            JumpSite::Accessible(s) => &s.children,
            JumpSite::Inaccessible(s) => &s.children,
        }
    }

    pub fn u(&self) -> S {
        match self {
            JumpSite::Accessible(s) => s.u(),
            JumpSite::Inaccessible(s) => s.u(),
        }
    }

    pub fn is_accessible(&self) -> bool {
        matches!(self, JumpSite::Accessible(_))
    }
}

/// Output of a generalized-inverse solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdSolve<S> {
    pub solution: Vec<S>,
    pub feasible: bool,
    /// Part of the right-hand side outside the solvable range; zero when feasible.
    pub residual: Vec<S>,
    /// The `eps` the coercivity inequality was verified with.
    pub coercivity: Option<S>,
    /// Squared sides of `||J* v||_G <= (1/eps) ||v||_G`, as `(eps^2 (x|Gx), (v|Gv))`.
    pub bound: Option<(S, S)>,
}

impl<S: Scalar> PsdSolve<S> {
    fn infeasible(d: usize, residual: Vec<S>) -> Self {
        PsdSolve { solution: vec![S::zero(); d], feasible: false, residual, coercivity: None, bound: None }
    }

    fn zero(d: usize) -> Self {
        PsdSolve { solution: vec![S::zero(); d], feasible: true, residual: vec![S::zero(); d], coercivity: None, bound: None }
    }
}

fn check_psd<S: Scalar>(g: &Matrix<S>) -> Result<(), KernelError<S>> {
    if !g.is_symmetric() {
        return Err(KernelError::NotSymmetric);
    }
    if !is_psd(g) {
        return Err(KernelError::NotPsd);
    }
    Ok(())
}

/// Orthogonal projection of `v` onto the range of a symmetric PSD `g`.
pub fn project_psd<S: Scalar>(g: &Matrix<S>, v: &[S]) -> Result<Vec<S>, KernelError<S>> {
    check_psd(g)?;
    Ok(project_onto_columns(g, v))
}

/// `J* p_G v`, where `J*` inverts `J` on `V = range(G)`.
///
/// Requires `J V ⊆ V` and `(x|GJx) >= eps (x|Gx)` on `V`; the latter is checked
/// as positive semidefiniteness of the compressed symmetric form on a basis of `V`.
pub fn restricted_inverse<S: Scalar>(
    g: &Matrix<S>,
    j: &Matrix<S>,
    v: &[S],
    eps: &S,
) -> Result<PsdSolve<S>, KernelError<S>> {
    check_psd(g)?;
    let d = g.rows();
    if !eps.definitely_pos() {
        return Err(KernelError::CoercivityFailure(format!("eps = {} is not positive", eps.render())));
    }
    // Columns of the projector onto range(G) span V and, unlike the columns of
    // G itself, do not inherit its conditioning.
    let proj_cols: Vec<Vec<S>> = (0..d)
        .map(|c| project_onto_columns(g, &(0..d).map(|i| if i == c { S::one() } else { S::zero() }).collect::<Vec<_>>()))
        .collect();
    let proj = Matrix::from_fn(d, d, |i, c| proj_cols[c][i].clone());
    let basis_idx = proj.column_basis();
    let basis = Matrix::from_fn(d, basis_idx.len(), |i, c| proj[(i, basis_idx[c])].clone());
    if basis.cols() == 0 {
        return Ok(PsdSolve { coercivity: Some(eps.clone()), bound: Some((S::zero(), S::zero())), ..PsdSolve::zero(d) });
    }
    let jb = j.mul(&basis);
    for c in 0..jb.cols() {
        let col = jb.col(c);
        let proj = project_onto_columns(g, &col);
        if col.iter().zip(&proj).any(|(a, b)| !a.approx_eq(b)) {
            return Err(KernelError::SingularOnV);
        }
    }
    let gj = g.mul(j);
    let two = S::from_int(2);
    let sym = Matrix::from_fn(d, d, |a, b| (gj[(a, b)].clone() + gj[(b, a)].clone()) / two.clone());
    let form = basis.transpose().mul(&sym.sub(&g.scale(eps))).mul(&basis);
    if !is_psd(&form) {
        return Err(KernelError::CoercivityFailure(format!("(x|GJx) >= {} (x|Gx) fails on range(G)", eps.render())));
    }
    let target = project_onto_columns(g, v);
    let alpha = min_norm_solve(&jb, &target).map_err(|_| KernelError::SingularOnV)?;
    let x = basis.mul_vec(&alpha);
    let lhs = eps.clone() * eps.clone() * g.bilinear(&x, &x);
    let rhs = g.bilinear(v, v);
    if !lhs.less_eq(&rhs) {
        return Err(KernelError::CoercivityFailure(format!(
            "norm bound fails: {} > {}",
            lhs.render(),
            rhs.render()
        )));
    }
    Ok(PsdSolve {
        solution: x,
        feasible: true,
        residual: vec![S::zero(); d],
        coercivity: Some(eps.clone()),
        bound: Some((lhs, rhs)),
    })
}

/// `Σ p w w^T` (or `Σ q w w^T`).
pub fn gram_f<S: Scalar>(site: &JumpSite<S>) -> Matrix<S> {
    outer_sum(site.d(), site.children().iter().map(|c| (c.prob.clone(), c.w.clone())))
}

fn check_tilts<S: Scalar>(children: &[SiteChild<S>]) -> Result<(), KernelError<S>> {
    match children.iter().enumerate().find(|(_, c)| c.charged() && c.tilt().definitely_neg()) {
        Some((k, c)) => Err(KernelError::NegativeTilt { child: k, value: c.tilt() }),
        None => Ok(()),
    }
}

/// `Σ (1+nu) p (w - w̄)(w - w̄)^T`.
pub fn gram_g_accessible<S: Scalar>(site: &AccessibleSite<S>) -> Result<Matrix<S>, KernelError<S>> {
    check_tilts(&site.children)?;
    let wbar = site.tilted_mean();
    Ok(outer_sum(
        site.d,
        site.children.iter().map(|c| {
            let centred = c.w.iter().zip(&wbar).map(|(a, b)| a.clone() - b.clone()).collect();
            (c.tilt() * c.prob.clone(), centred)
        }),
    ))
}

/// `Σ (1+nu) q w w^T`, the `G`-Gram matrix scaled by `1 + Σ q nu`.
pub fn gram_g_inaccessible<S: Scalar>(site: &InaccessibleSite<S>) -> Result<Matrix<S>, KernelError<S>> {
    check_tilts(&site.children)?;
    Ok(outer_sum(site.d, site.children.iter().map(|c| (c.tilt() * c.prob.clone(), c.w.clone()))))
}

/// Solves `M ξ = r` through `restricted_inverse(G, G^+ M, G^+ r, u)`.
///
/// Feasibility is decided before coercivity so that a degenerate insider site
/// reports its residual rather than a failed inequality.
fn solve_site<S: Scalar>(g: &Matrix<S>, m: &Matrix<S>, r: &[S], u: &S) -> Result<PsdSolve<S>, KernelError<S>> {
    let d = g.rows();
    if let Err(e) = min_norm_solve(m, r) {
        return Ok(PsdSolve::infeasible(d, e.residual));
    }
    if m.is_zero() {
        return Ok(PsdSolve::zero(d));
    }
    if !is_psd(&m.sub(&g.scale(u))) {
        return Err(KernelError::CoercivityFailure(format!("M >= {} G fails", u.render())));
    }
    let pinv_cols = |mat: &Matrix<S>| -> Result<Matrix<S>, KernelError<S>> {
        let mut out = Matrix::zeros(d, mat.cols());
        for c in 0..mat.cols() {
            let col = min_norm_solve(g, &mat.col(c)).map_err(|_| KernelError::SingularOnV)?;
            for (i, x) in col.into_iter().enumerate() {
                out[(i, c)] = x;
            }
        }
        Ok(out)
    };
    let j = pinv_cols(m)?;
    let v = min_norm_solve(g, r).map_err(|_| KernelError::SingularOnV)?;
    restricted_inverse(g, &j, &v, u)
}

/// Driver-level structure equation at a predictable jump time.
pub fn xi_accessible<S: Scalar>(site: &AccessibleSite<S>) -> Result<PsdSolve<S>, KernelError<S>> {
    let m = gram_g_accessible(site)?;
    let g = gram_f(&JumpSite::Accessible(site.clone()));
    solve_site(&g, &m, &site.rhs(), &site.u())
}

/// Driver-level structure equation at a totally inaccessible jump time.
pub fn xi_inaccessible<S: Scalar>(site: &InaccessibleSite<S>) -> Result<PsdSolve<S>, KernelError<S>> {
    let m = gram_g_inaccessible(site)?;
    let g = gram_f(&JumpSite::Inaccessible(site.clone()));
    solve_site(&g, &m, &site.rhs(), &site.u())
}

pub fn solve_xi<S: Scalar>(site: &JumpSite<S>) -> Result<PsdSolve<S>, KernelError<S>> {
    match site {
        JumpSite::Accessible(s) => xi_accessible(s),
        JumpSite::Inaccessible(s) => xi_inaccessible(s),
    }
}

/// Per-child jump data.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildBound<S> {
    pub child: usize,
    /// `ξ^T (w_k - w̄)` (accessible) or `ξ^T w_k` (inaccessible).
    pub jump: S,
    /// Left side of the checked identity.
    pub lhs: S,
    /// Right side of the checked identity.
    pub rhs: S,
    pub identity_ok: bool,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpBoundReport<S> {
    pub ok: bool,
    pub children: Vec<ChildBound<S>>,
}

/// Accessible: `(ξ^T(w_k - w̄) - 1)(1+nu_k)p_k = (delta_k - 1)p_k` and `ξ^T(w_k - w̄) < 1`.
/// Inaccessible: `ξ^T w_k = (delta_k + nu_k)/(1 + nu_k) < 1`, skipped where `q_k w_k = 0`.
pub fn check_jump_bound<S: Scalar>(site: &JumpSite<S>, xi: &[S]) -> JumpBoundReport<S> {
    let mut children = Vec::new();
    match site {
        JumpSite::Accessible(s) => {
            let wbar = s.tilted_mean();
            for (k, c) in s.children.iter().enumerate().filter(|(_, c)| c.charged()) {
                let centred: Vec<S> = c.w.iter().zip(&wbar).map(|(a, b)| a.clone() - b.clone()).collect();
                let jump = dot(xi, &centred);
                let lhs = (jump.clone() - S::one()) * c.tilt() * c.prob.clone();
                let rhs = (c.delta.clone() - S::one()) * c.prob.clone();
                let identity_ok = lhs.approx_eq(&rhs);
                let bound_ok = jump.strictly_less(&S::one());
                children.push(ChildBound { child: k, jump, lhs, rhs, identity_ok, bound_ok });
            }
        }
        JumpSite::Inaccessible(s) => {
            for (k, c) in s.children.iter().enumerate() {
                if !c.charged() || c.w.iter().all(|x| x.near_zero()) {
                    continue;
                }
                let jump = dot(xi, &c.w);
                let rhs = (c.delta.clone() + c.nu.clone()) / c.tilt();
                let identity_ok = jump.approx_eq(&rhs);
                let bound_ok = jump.strictly_less(&S::one());
                children.push(ChildBound { child: k, lhs: jump.clone(), jump, rhs, identity_ok, bound_ok });
            }
        }
    }
    let ok = children.iter().all(|c| c.identity_ok && c.bound_ok);
    JumpBoundReport { ok, children }
}

/// `G-Gram >= u · F-Gram` as quadratic forms.
pub fn check_coercivity<S: Scalar>(site: &JumpSite<S>, u: &S) -> bool {
    let m = match site {
        JumpSite::Accessible(s) => gram_g_accessible(s),
        JumpSite::Inaccessible(s) => gram_g_inaccessible(s),
    };
    match m {
        Ok(m) => is_psd(&m.sub(&gram_f(site).scale(u))),
        Err(_) => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBound<S> {
    pub lhs: S,
    pub rhs: S,
    pub ok: bool,
}

/// `Σ (1+nu) p (ξ^T(w - w̄))^2 <= (1/u) Σ p (delta + nu)^2` (with `w̄ = 0` for inaccessible sites).
pub fn energy_bound<S: Scalar>(site: &JumpSite<S>, xi: &[S], u: &S) -> EnergyBound<S> {
    let wbar = match site {
        JumpSite::Accessible(s) => s.tilted_mean(),
        JumpSite::Inaccessible(s) => vec![S::zero(); s.d],
    };
    let cs = site.children();
    let lhs = sum(cs.iter().map(|c| {
        let centred: Vec<S> = c.w.iter().zip(&wbar).map(|(a, b)| a.clone() - b.clone()).collect();
        let j = dot(xi, &centred);
        c.tilt() * c.prob.clone() * j.clone() * j
    }));
    let rhs = sum(cs.iter().map(|c| {
        let a = c.delta.clone() + c.nu.clone();
        c.prob.clone() * a.clone() * a
    })) / u.clone();
    let ok = u.definitely_pos() && lhs.less_eq(&rhs);
    EnergyBound { lhs, rhs, ok }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport<S> {
    /// Density of each child under the tilted law.
    pub densities: Vec<S>,
    pub total: S,
    pub ok: bool,
}

/// Accessible: `1 + nu_k >= 0` and `Σ (1+nu) p = 1`.
/// Inaccessible: `(1+nu_k) q_k / (1 + Σ q nu)` is a probability vector.
pub fn verify_density<S: Scalar>(site: &JumpSite<S>) -> DensityReport<S> {
    let (densities, total): (Vec<S>, S) = match site {
        JumpSite::Accessible(s) => {
            let dens: Vec<S> = s.children.iter().map(SiteChild::tilt).collect();
            let total = sum(s.children.iter().zip(&dens).map(|(c, d)| d.clone() * c.prob.clone()));
            (dens, total)
        }
        JumpSite::Inaccessible(s) => {
            let mass = s.mass();
            let dens: Vec<S> = s.children.iter().map(|c| c.tilt() * c.prob.clone() / mass.clone()).collect();
            let total = sum(dens.iter().cloned());
            (dens, total)
        }
    };
    let nonneg = site.children().iter().zip(&densities).all(|(c, d)| !c.charged() || !d.definitely_neg());
    let ok = nonneg && total.approx_eq(&S::one());
    DensityReport { densities, total, ok }
}

/// Everything the kernel computes for one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteReport<S: Scalar> {
    pub u: S,
    pub gram_f: Matrix<S>,
    pub gram_g: Option<Matrix<S>>,
    pub xi: Result<PsdSolve<S>, KernelError<S>>,
    pub density: DensityReport<S>,
    pub coercivity: bool,
    pub jump_bound: Option<JumpBoundReport<S>>,
    pub energy: Option<EnergyBound<S>>,
}

impl<S: Scalar> SiteReport<S> {
    /// All checks passed on a feasible solve.
    pub fn all_ok(&self) -> bool {
        matches!(&self.xi, Ok(x) if x.feasible)
            && self.density.ok
            && self.coercivity
            && self.jump_bound.as_ref().is_some_and(|j| j.ok)
            && self.energy.as_ref().is_some_and(|e| e.ok)
    }
}

/// Runs the solver and every site-level check.
pub fn analyze_site<S: Scalar>(site: &JumpSite<S>) -> SiteReport<S> {
    let u = site.u();
    let gram_g = match site {
        JumpSite::Accessible(s) => gram_g_accessible(s).ok(),
        JumpSite::Inaccessible(s) => gram_g_inaccessible(s).ok(),
    };
    let xi = solve_xi(site);
    let (jump_bound, energy) = match &xi {
        Ok(x) if x.feasible => (Some(check_jump_bound(site, &x.solution)), Some(energy_bound(site, &x.solution, &u))),
        _ => (None, None),
    };
    SiteReport {
        gram_f: gram_f(site),
        gram_g,
        density: verify_density(site),
        coercivity: check_coercivity(site, &u),
        xi,
        jump_bound,
        energy,
        u,
    }
}
