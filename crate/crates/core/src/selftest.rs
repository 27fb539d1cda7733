//! Built-in battery: worked fixtures plus seeded random properties.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::calculus::{bracket, compensator, integrate, is_martingale, stoch_exp};
use crate::enlarge::{drift, gauge_drift, solve_phi};
use crate::fixtures::{self, Fixture};
use crate::jumpkernel::{analyze_site, gram_g_accessible, gram_g_inaccessible, JumpSite};
use crate::mrp::Driver;
use crate::random;
use crate::report::{analyze, AnalyzeOptions, Check};
use crate::scalar::{Rational, Scalar};
use crate::scenario::{Scenario, Settings};
use crate::space::{EnlargementPair, Process};
use crate::viability::{solve_structure_f, Status, Witness};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Random cases per property.
    pub cases: usize,
    /// Swap in an overdrifted market that must be reported as a failure.
    pub inject_fault: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { seed: 2024, cases: 40, inject_fault: false }
    }
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub mode: &'static str,
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "mode": self.mode,
            "passed": self.passed(),
            "checks": self.checks.iter().map(|c| json!({ "name": c.name, "pass": c.pass, "witness": c.detail })).collect::<Vec<_>>(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "selftest ({} mode)", self.mode);
        for c in &self.checks {
            let _ = write!(out, "  [{}] {}", if c.pass { "pass" } else { "FAIL" }, c.name);
            if let Some(d) = &c.detail {
                let _ = write!(out, ": {d}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{}", if self.passed() { "all checks passed" } else { "selftest FAILED" });
        out
    }
}

fn check(name: &str, outcome: Result<(), String>) -> Check {
    let (pass, detail) = match outcome {
        Ok(()) => (true, None),
        Err(d) => (false, Some(d)),
    };
    Check { name: name.to_string(), pass, detail }
}

fn expect_close<S: Scalar>(what: &str, got: &S, want: (i64, i64)) -> Result<(), String> {
    let want = S::from_frac(want.0, want.1);
    if got.approx_eq(&want) {
        Ok(())
    } else {
        Err(format!("{what}: got {}, expected {}", got.render(), want.render()))
    }
}

fn scenario_of<S: Scalar>(fx: Fixture<S>) -> Scenario<S> {
    Scenario {
        name: fx.name.to_string(),
        space: fx.space,
        base: fx.filtration,
        expanded: fx.expanded,
        price: fx.price,
        driver: Some(fx.driver),
        gauge: None,
        claimed_d: None,
        settings: Settings::default(),
    }
}

fn driver_of<S: Scalar>(fx: &Fixture<S>) -> Result<Driver<S>, String> {
    Driver::new(fx.driver.clone(), &fx.filtration, &fx.space).map_err(|e| e.to_string())
}

fn b1_market<S: Scalar>(inject_fault: bool) -> Result<(), String> {
    let mut fx = fixtures::b1::<S>();
    if inject_fault {
        let steep = Process::from_increments(2, 1, 1, |_| vec![S::one()], |o, _| {
            vec![if o == 0 { S::from_frac(1, 4) } else { S::from_frac(1, 20) }]
        });
        fx = fx.with_price(steep);
    }
    let sol = match solve_structure_f(&fx.market(), &driver_of(&fx)?) {
        Ok(s) => s,
        Err(Witness::JumpBound { outcome, time, jump }) => {
            return Err(format!(
                "structure condition fails: jump bound ΔD < 1 violated at t={time}, outcome {} (ΔD = {})",
                fx.space.label(outcome),
                jump.render()
            ))
        }
        Err(w) => return Err(w.to_string()),
    };
    expect_close("coefficient", &sol.coefficients.value(0, 1).clone(), (1, 5))?;
    expect_close("deflator on u", sol.deflator.value(0, 1), (4, 5))?;
    expect_close("deflator on d", sol.deflator.value(1, 1), (6, 5))
}

fn b2n_viable<S: Scalar>() -> Result<(), String> {
    let a = analyze(&scenario_of(fixtures::b2n::<S>()), &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    if a.status() != Status::Viable {
        return Err(format!("status {}", a.status().name()));
    }
    let sol = a.verdict.solution.as_ref().ok_or("no solution")?;
    expect_close("coefficient at t=1 on the first outcome", sol.coefficients.value(0, 1), (5, 4))
}

fn b2i_gated<S: Scalar>() -> Result<(), String> {
    let sc = scenario_of(fixtures::b2i::<S>());
    let a = analyze(&sc, &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    match &a.verdict.witness {
        Some(Witness::AssumptionFailed { assumption, .. }) if assumption.name() == "support" => {}
        other => return Err(format!("expected the support assumption to fail, got {other:?}")),
    }
    let bypass = analyze(&sc, &AnalyzeOptions { bypass_gate: true, parallel: false }).map_err(|e| e.to_string())?;
    match &bypass.verdict.witness {
        Some(Witness::SiteInfeasible { time: 1, atom: 0, residual }) => expect_close("residual", &residual[0], (6, 5)),
        other => Err(format!("expected an infeasible site, got {other:?}")),
    }
}

fn k1_kernel<S: Scalar>() -> Result<(), String> {
    let r = analyze_site(&JumpSite::Inaccessible(fixtures::k1_site::<S>()));
    let xi = r.xi.as_ref().map_err(|e| e.to_string())?;
    expect_close("xi_1", &xi.solution[0], (8, 15))?;
    expect_close("xi_2", &xi.solution[1], (-4, 5))?;
    if !r.all_ok() {
        return Err("site checks fail".into());
    }
    Ok(())
}

fn calculus_identities<S: Scalar>(opts: &SelftestOptions) -> Result<(), String> {
    let mut g = random::rng(opts.seed);
    let fx = fixtures::b2::<S>();
    let (f, space) = (&fx.filtration, &fx.space);
    let e = |e: crate::Error| e.to_string();
    for case in 0..opts.cases {
        let x: Process<S> = random::adapted_process(&mut g, f);
        let y: Process<S> = random::adapted_process(&mut g, f);
        let xy = Process::from_fn(x.outcomes(), x.horizon(), 1, |o, t| {
            vec![x.value(o, t).clone() * y.value(o, t).clone() - x.value(o, 0).clone() * y.value(o, 0).clone()]
        });
        let parts = integrate(&x.lagged(), &y)
            .and_then(|a| a.add(&integrate(&y.lagged(), &x)?))
            .and_then(|a| a.add(&bracket(&x, &y)?))
            .map_err(e)?;
        if !xy.approx_eq(&parts) {
            return Err(format!("case {case}: integration by parts fails"));
        }
        let centred = x.minus_initial().sub(&compensator(&x, f, space).map_err(e)?).map_err(e)?;
        if !is_martingale(&centred, f, space) {
            return Err(format!("case {case}: X - X_0 - compensator is not a martingale"));
        }
        let (dx, dy) = (x.minus_initial().scale(&S::from_frac(1, 8)), y.minus_initial().scale(&S::from_frac(1, 8)));
        let lhs = stoch_exp(&dx).map_err(e)?.process.mul_scalar_process(&stoch_exp(&dy).map_err(e)?.process).map_err(e)?;
        let sum = dx.add(&dy).and_then(|s| s.add(&bracket(&dx, &dy)?)).map_err(e)?;
        if !lhs.approx_eq(&stoch_exp(&sum).map_err(e)?.process) {
            return Err(format!("case {case}: product of stochastic exponentials fails"));
        }
    }
    Ok(())
}

fn drift_identity<S: Scalar>(opts: &SelftestOptions) -> Result<(), String> {
    let mut g = random::rng(opts.seed ^ 0x5eed);
    let fx = fixtures::b2n::<S>();
    let pair = fx.pair();
    let w = driver_of(&fx)?;
    let gauge = solve_phi(&pair, w.process(), &w).map_err(|e| format!("{e}"))?;
    for case in 0..opts.cases {
        let x = random::martingale(&mut g, &fx.filtration, &w);
        let lhs = drift(&x, &pair).map_err(|e| e.to_string())?;
        let rhs = gauge_drift(&gauge, &x, &fx.filtration, &fx.space).map_err(|e| e.to_string())?;
        if !lhs.approx_eq(&rhs) {
            return Err(format!("case {case}: drift differs from the gauge formula by {}", lhs.max_abs_diff(&rhs).render()));
        }
    }
    Ok(())
}

fn random_sites<S: Scalar>(opts: &SelftestOptions) -> Result<(), String> {
    let mut g = random::rng(opts.seed ^ 0x517e);
    for case in 0..opts.cases * 2 {
        let site = if case % 2 == 0 {
            JumpSite::Accessible(random::accessible_site::<S>(&mut g, 3))
        } else {
            JumpSite::Inaccessible(random::inaccessible_site::<S>(&mut g, 3))
        };
        let r = analyze_site(&site);
        let Ok(xi) = &r.xi else { continue };
        if !xi.feasible {
            continue;
        }
        let gram = match &site {
            JumpSite::Accessible(s) => gram_g_accessible(s),
            JumpSite::Inaccessible(s) => gram_g_inaccessible(s),
        }
        .map_err(|e| format!("case {case}: {e}"))?;
        let rhs = match &site {
            JumpSite::Accessible(s) => s.rhs(),
            JumpSite::Inaccessible(s) => s.rhs(),
        };
        let got = gram.mul_vec(&xi.solution);
        if got.iter().zip(&rhs).any(|(a, b)| !a.approx_eq(b)) {
            return Err(format!("case {case}: the solution does not solve the tilted Gram system"));
        }
        if !r.jump_bound.as_ref().is_some_and(|j| j.children.iter().all(|c| c.identity_ok)) {
            return Err(format!("case {case}: jump identity fails"));
        }
        if r.coercivity && !r.energy.as_ref().is_some_and(|e| e.ok) {
            return Err(format!("case {case}: energy bound fails under coercivity"));
        }
    }
    Ok(())
}

fn random_markets<S: Scalar>(opts: &SelftestOptions) -> Result<(), String> {
    let mut g = random::rng(opts.seed ^ 0x3a7);
    for case in 0..opts.cases.div_ceil(8) {
        let fx = random::viable_market::<S>(&mut g, 3);
        let f_sol = solve_structure_f(&fx.market(), &driver_of(&fx)?).map_err(|w| format!("case {case}: {w}"))?;
        let a = analyze(&scenario_of(fx), &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
        let Some(sol) = a.verdict.solution.as_ref() else {
            return Err(format!("case {case}: identity enlargement is {}", a.status().name()));
        };
        if !sol.martingale.approx_eq(&f_sol.martingale) {
            return Err(format!("case {case}: identity enlargement does not reproduce D"));
        }
    }
    Ok(())
}

/// Runs the battery with backend `S`.
pub fn run<S: Scalar>(opts: &SelftestOptions) -> SelftestReport {
    let mut checks = vec![
        check(
            if opts.inject_fault { "coin market (overdrifted, injected fault)" } else { "coin market" },
            b1_market::<S>(opts.inject_fault),
        ),
        check("two-step market with noise is viable", b2n_viable::<S>()),
        check("insider enlargement is rejected", b2i_gated::<S>()),
        check("inaccessible jump site", k1_kernel::<S>()),
        check("calculus identities on random processes", calculus_identities::<S>(opts)),
        check("drift formula on random martingales", drift_identity::<S>(opts)),
        check("random jump sites", random_sites::<S>(opts)),
        check("random viable markets", random_markets::<S>(opts)),
    ];
    if !S::EXACT {
        checks.push(mode_agreement());
    }
    SelftestReport { mode: S::MODE, checks }
}

/// Values from the fixture suite that both backends must agree on.
fn fixture_values<S: Scalar>() -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    let b1 = fixtures::b1::<S>();
    let sol = solve_structure_f(&b1.market(), &driver_of(&b1)?).map_err(|w| w.to_string())?;
    out.extend(sol.deflator.values().iter().map(Scalar::to_f64));
    let a = analyze(&scenario_of(fixtures::b2n::<S>()), &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    let sol = a.verdict.solution.ok_or("b2n has no solution")?;
    out.extend(sol.coefficients.values().iter().map(Scalar::to_f64));
    out.extend(sol.martingale.values().iter().map(Scalar::to_f64));
    out.extend(sol.deflator.values().iter().map(Scalar::to_f64));
    let fx = fixtures::b2n::<S>();
    let pair: EnlargementPair<S> = fx.pair();
    let w = driver_of(&fx)?;
    let gauge = solve_phi(&pair, w.process(), &w).map_err(|e| format!("{e}"))?;
    out.extend(gauge.phi.values().iter().map(Scalar::to_f64));
    out.extend(gauge.u.values().iter().map(Scalar::to_f64));
    let k1 = analyze_site(&JumpSite::Inaccessible(fixtures::k1_site::<S>()));
    out.extend(k1.xi.map_err(|e| e.to_string())?.solution.iter().map(Scalar::to_f64));
    Ok(out)
}

/// Exact and float backends agree on the fixture suite to within `1e-9`.
pub fn mode_agreement() -> Check {
    let outcome = (|| {
        let exact = fixture_values::<Rational>()?;
        let float = fixture_values::<f64>()?;
        if exact.len() != float.len() {
            return Err(format!("{} exact values vs {} float values", exact.len(), float.len()));
        }
        match exact.iter().zip(&float).enumerate().find(|(_, (a, b))| (*a - *b).abs() > 1e-9) {
            Some((i, (a, b))) => Err(format!("value {i}: exact {a} vs float {b}")),
            None => Ok(()),
        }
    })();
    check("exact and float modes agree on the fixtures", outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_in_both_modes() {
        let opts = SelftestOptions { cases: 8, ..SelftestOptions::default() };
        let exact = run::<Rational>(&opts);
        assert!(exact.passed(), "{}", exact.to_text());
        let float = run::<f64>(&opts);
        assert!(float.passed(), "{}", float.to_text());
    }

    #[test]
    fn injected_fault_is_reported() {
        let opts = SelftestOptions { cases: 2, inject_fault: true, ..SelftestOptions::default() };
        let r = run::<Rational>(&opts);
        assert!(!r.passed());
        let text = r.to_text();
        assert!(text.contains("jump bound ΔD < 1"), "{text}");
    }
}
