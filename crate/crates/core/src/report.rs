//! Runs a scenario end to end and renders the result as JSON or text.
//!
//! JSON output is deterministic: keys are sorted, no timings are recorded,
//! exact values are `"p/q"` strings and float values are JSON numbers.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::calculus::{is_martingale, pred_bracket};
use crate::enlarge::{check_positivity, solve_phi, verify_g_compensator, DriftGauge, GaugeError};
use crate::error::Error;
use crate::jumpkernel::{JumpSite, KernelError, SiteReport};
use crate::linalg::Matrix;
use crate::mrp::{check_mrp, synthesize_driver, Driver};
use crate::scalar::{max_of, min_of, Scalar};
use crate::scenario::Scenario;
use crate::space::{EnlargementPair, Filtration, SampleSpace};
use crate::viability::{
    solve_structure_f, solve_structure_g, verify_deflator, Assumption, Market, SolveOptions, Status, StructureSolution, Verdict,
    Witness,
};

/// One named pass/fail line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Option<String>,
}

impl Check {
    fn new(name: &str, outcome: Result<(), String>) -> Self {
        let (pass, detail) = match outcome {
            Ok(()) => (true, None),
            Err(d) => (false, Some(d)),
        };
        Check { name: name.to_string(), pass, detail }
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "pass": self.pass, "witness": self.detail })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalyzeOptions {
    pub parallel: bool,
    /// Solve the sites even when support or positivity fails.
    pub bypass_gate: bool,
}

/// The outcome of [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis<S: Scalar> {
    pub name: String,
    pub space: SampleSpace<S>,
    pub base: Filtration,
    pub expanded: Filtration,
    pub verdict: Verdict<S>,
    pub gauge: Option<DriftGauge<S>>,
    pub f_solution: Option<StructureSolution<S>>,
    pub checks: Vec<Check>,
}

fn num<S: Scalar>(x: &S) -> Value {
    if S::EXACT {
        Value::String(x.render())
    } else {
        serde_json::Number::from_f64(x.to_f64()).map_or(Value::Null, Value::Number)
    }
}

fn nums<S: Scalar>(xs: &[S]) -> Value {
    Value::Array(xs.iter().map(num).collect())
}

fn matrix<S: Scalar>(m: &Matrix<S>) -> Value {
    Value::Array(m.to_rows().iter().map(|r| nums(r)).collect())
}

fn render_vec<S: Scalar>(v: &[S]) -> String {
    format!("[{}]", v.iter().map(Scalar::render).collect::<Vec<_>>().join(", "))
}

fn range<'a, S: Scalar + 'a>(xs: impl Iterator<Item = &'a S> + Clone) -> Value {
    match (min_of(xs.clone().cloned()), max_of(xs.cloned())) {
        (Some(lo), Some(hi)) => json!({ "min": num(&lo), "max": num(&hi) }),
        _ => Value::Null,
    }
}

/// Runs every stage on a scenario. `Err` means the input is structurally unusable.
pub fn analyze<S: Scalar>(sc: &Scenario<S>, opts: &AnalyzeOptions) -> Result<Analysis<S>, Error> {
    let space = &sc.space;
    let f = &sc.base;
    let market = Market::new(space.clone(), f.clone(), sc.price.clone())?;
    if sc.price.horizon() != f.horizon() {
        return Err(Error::Invalid("price horizon differs from the filtration".into()));
    }
    let driver = match &sc.driver {
        Some(w) => Driver::new(w.clone(), f, space)?,
        None => synthesize_driver(f, space)?,
    };
    let pair = EnlargementPair::new(space.clone(), f.clone(), sc.expanded.clone())?;
    let mut checks = Vec::new();

    checks.push(Check::new(
        "representation property in F",
        check_mrp(f, &driver, space).map_err(|w| {
            format!("t={}, atom {}: {} children but driver rank {}", w.time, w.atom, w.multiplicity, w.rank)
        }),
    ));
    let f_solution = match solve_structure_f(&market, &driver) {
        Ok(s) => {
            checks.push(Check::new("structure condition in F", Ok(())));
            let deflator_ok = verify_deflator(&s.deflator, &market, f, &[])?.map_err(|w| {
                format!("{} at t={}, atom {}: residual {}", w.subject, w.time, w.atom, render_vec(&w.residual))
            });
            checks.push(Check::new("deflator in F", deflator_ok));
            Some(s)
        }
        Err(w) => {
            checks.push(Check::new("structure condition in F", Err(w.to_string())));
            None
        }
    };
    if let Some(d) = &sc.claimed_d {
        checks.push(Check::new("claimed D solves the structure condition in F", claimed_d(&market, d)));
    }

    let n = sc.gauge.clone().unwrap_or_else(|| driver.process().clone());
    let gauge = match solve_phi(&pair, &n, &driver) {
        Ok(g) => g,
        Err(GaugeError::Structural(e)) => return Err(e),
        Err(GaugeError::Infeasible(w)) => {
            let detail = format!("no φ at t={}, G-atom {}: residual {}", w.time, w.atom, render_vec(&w.residual));
            checks.push(Check::new("drift gauge", Err(detail.clone())));
            let verdict = Verdict {
                status: Status::AssumptionViolated,
                witness: Some(Witness::AssumptionFailed { assumption: Assumption::DriftGauge, detail }),
                solution: None,
            };
            return Ok(Analysis {
                name: sc.name.clone(),
                space: space.clone(),
                base: f.clone(),
                expanded: sc.expanded.clone(),
                verdict,
                gauge: None,
                f_solution,
                checks,
            });
        }
    };
    checks.push(Check::new("drift gauge", Ok(())));
    let comp = verify_g_compensator(&sc.price, &pair, &gauge)?.map_err(|w| {
        format!(
            "outcome {}, t={}: G side {} vs formula {}",
            space.label(w.outcome),
            w.time,
            render_vec(&w.g_side),
            render_vec(&w.f_side)
        )
    });
    checks.push(Check::new("G-compensator of S from the gauge", comp));
    checks.push(Check::new(
        "support condition",
        crate::enlarge::check_support_condition(&pair)
            .map_err(|w| format!("t={}: F-child {} of F-atom {} misses G-atom {}", w.time, w.child, w.f_atom, w.g_atom)),
    ));
    checks.push(Check::new(
        "positivity of 1 + φᵀΔN",
        check_positivity(&pair, &gauge)
            .map_err(|w| format!("value {} at t={}, G-atom {}, F-child {}", w.value.render(), w.time, w.g_atom, w.child)),
    ));

    let solve_opts = SolveOptions { bypass_gate: opts.bypass_gate, parallel: opts.parallel, strategies: Vec::new() };
    let verdict = solve_structure_g(&market, &pair, &gauge, &driver, &solve_opts)?;
    if let Some(sol) = &verdict.solution {
        let bad = |pred: &dyn Fn(&crate::viability::SiteRecord<S>) -> bool| {
            sol.sites.iter().find(|r| !pred(r)).map_or(Ok(()), |r| Err(format!("t={}, G-atom {}", r.time, r.g_atom)))
        };
        checks.push(Check::new("jump identity at sites", bad(&|r| r.jump.ok)));
        checks.push(Check::new("energy bound at sites", bad(&|r| r.energy.ok)));
        checks.push(Check::new("density at sites", bad(&|r| r.density_ok)));
    }
    checks.push(Check::new(
        "structure condition in G",
        match (&verdict.status, &verdict.witness) {
            (Status::Viable, _) => Ok(()),
            (_, Some(w)) => Err(w.to_string()),
            (s, None) => Err(s.name().to_string()),
        },
    ));
    Ok(Analysis {
        name: sc.name.clone(),
        space: space.clone(),
        base: f.clone(),
        expanded: sc.expanded.clone(),
        verdict,
        gauge: Some(gauge),
        f_solution,
        checks,
    })
}

fn claimed_d<S: Scalar>(market: &Market<S>, d: &crate::space::Process<S>) -> Result<(), String> {
    let (f, space) = (market.filtration(), market.space());
    if d.dim() != 1 || !d.same_grid(market.price()) {
        return Err("D must be scalar on the price grid".into());
    }
    if !is_martingale(d, f, space) {
        return Err("D is not an F-martingale".into());
    }
    let pb = pred_bracket(market.martingale_part(), d, f, space).map_err(|e| e.to_string())?;
    if !pb.approx_eq(market.drift_part()) {
        return Err(format!("<M, D> misses the drift by {}", pb.max_abs_diff(market.drift_part()).render()));
    }
    for t in 1..=d.horizon() {
        for o in 0..d.outcomes() {
            let j = d.increment(o, t).remove(0);
            if !j.strictly_less(&S::one()) {
                return Err(format!("jump {} >= 1 at t={t}, outcome {}", j.render(), space.label(o)));
            }
        }
    }
    Ok(())
}

impl<S: Scalar> Analysis<S> {
    pub fn status(&self) -> Status {
        self.verdict.status
    }

    fn atom_labels(&self, part: &crate::space::Partition, atom: usize) -> Value {
        Value::Array(part.atom(atom).iter().map(|&o| Value::String(self.space.label(o).to_string())).collect())
    }

    fn witness_json(&self, w: &Witness<S>) -> Value {
        let mut v = match w {
            Witness::Inconsistent { time, atom, residual } => json!({
                "kind": "inconsistent", "time": time, "atom": atom,
                "outcomes": self.atom_labels(self.base.at(time - 1), *atom), "residual": nums(residual),
            }),
            Witness::JumpBound { outcome, time, jump } => json!({
                "kind": "jump-bound", "time": time, "outcome": self.space.label(*outcome), "jump": num(jump),
            }),
            Witness::AssumptionFailed { assumption, detail } => json!({
                "kind": "assumption", "assumption": assumption.name(), "detail": detail,
            }),
            Witness::SiteInfeasible { time, atom, residual } => json!({
                "kind": "site-infeasible", "time": time, "g_atom": atom,
                "outcomes": self.atom_labels(self.expanded.at(time - 1), *atom), "residual": nums(residual),
            }),
            Witness::SiteFailure { time, atom, detail } => json!({
                "kind": "site-failure", "time": time, "g_atom": atom,
                "outcomes": self.atom_labels(self.expanded.at(time - 1), *atom), "detail": detail,
            }),
            Witness::Verification { check, detail } => json!({ "kind": "verification", "check": check, "detail": detail }),
        };
        v["message"] = Value::String(w.to_string());
        v
    }

    fn gauge_json(&self) -> Value {
        let Some(g) = &self.gauge else { return Value::Null };
        let horizon = g.phi.horizon();
        let phi: Vec<S> =
            (1..=horizon).flat_map(|t| (0..g.phi.outcomes()).flat_map(move |o| g.phi.at(o, t).to_vec())).collect();
        let u: Vec<S> = (1..=horizon).flat_map(|t| (0..g.u.outcomes()).map(move |o| g.u.value(o, t).clone())).collect();
        json!({
            "phi": range(phi.iter()),
            "u": range(u.iter()),
            "support_ok": g.support_ok,
            "u_positive": g.u_positive,
        })
    }

    fn f_json(&self) -> Value {
        let Some(s) = &self.f_solution else { return Value::Null };
        let mut coefficients = Vec::new();
        for t in 1..=self.base.horizon() {
            for (a, atom) in self.base.at(t - 1).atoms().iter().enumerate() {
                coefficients.push(json!({
                    "time": t, "atom": a, "outcomes": self.atom_labels(self.base.at(t - 1), a),
                    "value": nums(s.coefficients.at(atom[0], t)),
                }));
            }
        }
        json!({
            "coefficients": coefficients,
            "deflator": range(s.deflator.values().iter()),
            "deflator_at_horizon": self.terminal(&s.deflator),
        })
    }

    fn terminal(&self, p: &crate::space::Process<S>) -> Value {
        let h = p.horizon();
        let mut m = serde_json::Map::new();
        for o in 0..p.outcomes() {
            m.insert(self.space.label(o).to_string(), num(p.value(o, h)));
        }
        Value::Object(m)
    }

    fn solution_json(&self) -> Value {
        let Some(s) = &self.verdict.solution else { return Value::Null };
        let sites: Vec<Value> = s
            .sites
            .iter()
            .map(|r| {
                json!({
                    "time": r.time,
                    "g_atom": r.g_atom,
                    "outcomes": self.atom_labels(self.expanded.at(r.time - 1), r.g_atom),
                    "xi": nums(&r.xi.solution),
                    "u": num(&r.site.u()),
                    "jumps": Value::Array(r.jump.children.iter().map(|c| num(&c.jump)).collect()),
                    "energy": { "lhs": num(&r.energy.lhs), "rhs": num(&r.energy.rhs), "ok": r.energy.ok },
                })
            })
            .collect();
        let jumps: Vec<S> = (1..=s.martingale.horizon())
            .flat_map(|t| (0..s.martingale.outcomes()).flat_map(move |o| s.martingale.increment(o, t)))
            .collect();
        json!({
            "sites": sites,
            "jumps": range(jumps.iter()),
            "deflator": range(s.deflator.values().iter()),
            "deflator_at_horizon": self.terminal(&s.deflator),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "scenario": self.name,
            "mode": S::MODE,
            "verdict": {
                "status": self.verdict.status.name(),
                "witness": self.verdict.witness.as_ref().map(|w| self.witness_json(w)),
            },
            "checks": self.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "gauge": self.gauge_json(),
            "structure_f": self.f_json(),
            "solution": self.solution_json(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} ({} mode)", self.name, S::MODE);
        let _ = writeln!(out, "verdict: {}", self.verdict.status.name());
        if let Some(w) = &self.verdict.witness {
            let _ = writeln!(out, "  witness: {w}");
        }
        let _ = writeln!(out, "checks:");
        for c in &self.checks {
            let _ = write!(out, "  [{}] {}", if c.pass { "pass" } else { "FAIL" }, c.name);
            if let Some(d) = &c.detail {
                let _ = write!(out, ": {d}");
            }
            out.push('\n');
        }
        if let Some(g) = &self.gauge {
            let u_min = min_of((1..=g.u.horizon()).flat_map(|t| (0..g.u.outcomes()).map(move |o| g.u.value(o, t).clone())));
            if let Some(u) = u_min {
                let _ = writeln!(out, "gauge: min u = {}", u.render());
            }
        }
        if let Some(s) = &self.verdict.solution {
            let _ = writeln!(out, "sites:");
            for r in &s.sites {
                let labels: Vec<&str> =
                    self.expanded.at(r.time - 1).atom(r.g_atom).iter().map(|&o| self.space.label(o)).collect();
                let _ = writeln!(
                    out,
                    "  t={} G-atom {} {{{}}}: xi = {}",
                    r.time,
                    r.g_atom,
                    labels.join(","),
                    render_vec(&r.xi.solution)
                );
            }
            let h = s.deflator.horizon();
            let _ = writeln!(out, "deflator at t={h}:");
            for o in 0..s.deflator.outcomes() {
                let _ = writeln!(out, "  {}: {}", self.space.label(o), s.deflator.value(o, h).render());
            }
        }
        out
    }
}

/// A kernel run on one jump site.
#[derive(Debug, Clone)]
pub struct KernelAnalysis<S: Scalar> {
    pub site: JumpSite<S>,
    pub report: SiteReport<S>,
}

impl<S: Scalar> KernelAnalysis<S> {
    pub fn new(site: JumpSite<S>) -> Self {
        let report = crate::jumpkernel::analyze_site(&site);
        KernelAnalysis { site, report }
    }

    /// `Viable` when every check passes, `AssumptionViolated` when coercivity or the tilt
    /// fails, `NonViable` when the solve is infeasible or a bound is violated.
    pub fn status(&self) -> Status {
        match &self.report.xi {
            Err(KernelError::CoercivityFailure(_)) | Err(KernelError::NegativeTilt { .. }) => Status::AssumptionViolated,
            _ if self.report.all_ok() => Status::Viable,
            _ => Status::NonViable,
        }
    }

    pub fn to_json(&self) -> Value {
        let r = &self.report;
        let xi = match &r.xi {
            Ok(x) => json!({
                "feasible": x.feasible,
                "solution": nums(&x.solution),
                "residual": nums(&x.residual),
                "coercivity": x.coercivity.as_ref().map(num),
                "bound_squared": x.bound.as_ref().map(|(a, b)| json!({ "lhs": num(a), "rhs": num(b) })),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        json!({
            "kind": if self.site.is_accessible() { "accessible" } else { "inaccessible" },
            "mode": S::MODE,
            "status": self.status().name(),
            "d": self.site.d(),
            "u": num(&r.u),
            "gram_f": matrix(&r.gram_f),
            "gram_g": r.gram_g.as_ref().map(matrix),
            "xi": xi,
            "coercivity": r.coercivity,
            "density": { "values": nums(&r.density.densities), "total": num(&r.density.total), "ok": r.density.ok },
            "jump_bound": r.jump_bound.as_ref().map(|j| json!({
                "ok": j.ok,
                "children": j.children.iter().map(|c| json!({
                    "child": c.child, "jump": num(&c.jump), "lhs": num(&c.lhs), "rhs": num(&c.rhs),
                    "identity_ok": c.identity_ok, "bound_ok": c.bound_ok,
                })).collect::<Vec<_>>(),
            })),
            "energy": r.energy.as_ref().map(|e| json!({ "lhs": num(&e.lhs), "rhs": num(&e.rhs), "ok": e.ok })),
        })
    }

    pub fn to_text(&self) -> String {
        let r = &self.report;
        let mut out = String::new();
        let kind = if self.site.is_accessible() { "accessible" } else { "inaccessible" };
        let _ = writeln!(out, "{kind} site, d = {} ({} mode)", self.site.d(), S::MODE);
        let _ = writeln!(out, "status: {}", self.status().name());
        let _ = writeln!(out, "u = {}", r.u.render());
        match &r.xi {
            Ok(x) if x.feasible => {
                let _ = writeln!(out, "xi = {}", render_vec(&x.solution));
            }
            Ok(x) => {
                let _ = writeln!(out, "infeasible, residual {}", render_vec(&x.residual));
            }
            Err(e) => {
                let _ = writeln!(out, "solver error: {e}");
            }
        }
        let _ = writeln!(out, "coercivity: {}", if r.coercivity { "ok" } else { "fails" });
        let _ = writeln!(out, "density: total {} ({})", r.density.total.render(), if r.density.ok { "ok" } else { "fails" });
        if let Some(j) = &r.jump_bound {
            for c in &j.children {
                let _ = writeln!(
                    out,
                    "  child {}: jump {} (identity {}, bound {})",
                    c.child,
                    c.jump.render(),
                    if c.identity_ok { "ok" } else { "fails" },
                    if c.bound_ok { "ok" } else { "fails" }
                );
            }
        }
        if let Some(e) = &r.energy {
            let _ = writeln!(out, "energy: {} <= {} ({})", e.lhs.render(), e.rhs.render(), if e.ok { "ok" } else { "fails" });
        }
        out
    }
}
