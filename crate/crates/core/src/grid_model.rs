//! Static grid data: buses, branches, generators and per-period profiles.
//!
//! Powers are in MW unless a case has been through [`to_per_unit`]. Bus and
//! generator ids are 1-based and contiguous, so `id - 1` is the slice index.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// S_B in MVA.
    pub system_base: f64,
    /// Hz.
    pub nominal_freq: f64,
    pub period_hours: f64,
    pub n_periods: usize,
    /// Hz/s magnitude.
    pub rocof_limit: f64,
    /// Uniform damping-to-inertia ratio d_i/m_i, 1/s.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub name: String,
    pub load_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Per unit on the system base.
    pub susceptance_b: f64,
    /// MW.
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    #[serde(rename = "rated_power_SB")]
    pub rated_power_sb: f64,
    #[serde(rename = "inertia_H")]
    pub inertia_h: f64,
    pub damping_d: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_hr: f64,
    pub reserve_cap: f64,
    pub cost_var: f64,
    pub cost_noload: f64,
    pub cost_startup: f64,
    pub cost_reserve: f64,
    #[serde(default)]
    pub initial_on: bool,
    #[serde(default)]
    pub initial_output: f64,
}

impl Generator {
    /// H·S_B in MW·s.
    pub fn kinetic_energy(&self) -> f64 {
        self.inertia_h * self.rated_power_sb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResProfile {
    pub bus: usize,
    pub mw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub system: SystemParams,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// System demand per period; bus demand is `load_fraction` times this.
    pub load_profile: Vec<f64>,
    #[serde(default)]
    pub res_profile: Vec<ResProfile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub record: String,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.record, self.rule, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed case file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid case: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("system base must be positive, got {0}")]
    ZeroBase(f64),
}

pub fn load_case(path: &Path) -> Result<GridCase, CaseError> {
    let text = std::fs::read_to_string(path)?;
    parse_case(&text)
}

pub fn parse_case(text: &str) -> Result<GridCase, CaseError> {
    let case: GridCase = serde_json::from_str(text)?;
    let violations = validate(&case);
    if violations.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Invalid(violations))
    }
}

pub fn case_to_string(case: &GridCase) -> String {
    let mut s = serde_json::to_string_pretty(case).expect("case serialises");
    s.push('\n');
    s
}

pub fn write_case(case: &GridCase, path: &Path) -> Result<(), CaseError> {
    std::fs::write(path, case_to_string(case))?;
    Ok(())
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, record: impl FnOnce() -> String, rule: &'static str, message: impl FnOnce() -> String) {
        if !ok {
            self.0.push(Violation {
                record: record(),
                rule,
                message: message(),
            });
        }
    }
}

/// Returns every broken rule; an empty list means the case is usable.
pub fn validate(case: &GridCase) -> Vec<Violation> {
    let mut c = Checker(Vec::new());
    let sys = &case.system;
    let nb = case.buses.len();
    let np = sys.n_periods;

    c.check(sys.system_base > 0.0, || "system".into(), "system_base_positive", || format!("system_base = {}", sys.system_base));
    c.check(sys.nominal_freq > 0.0, || "system".into(), "nominal_freq_positive", || format!("nominal_freq = {}", sys.nominal_freq));
    c.check(sys.period_hours > 0.0, || "system".into(), "period_hours_positive", || format!("period_hours = {}", sys.period_hours));
    c.check(np >= 1, || "system".into(), "n_periods_positive", || "n_periods must be at least 1".into());
    c.check(sys.rocof_limit > 0.0, || "system".into(), "rocof_limit_positive", || format!("rocof_limit = {}", sys.rocof_limit));
    c.check(sys.gamma >= 0.0 && sys.gamma.is_finite(), || "system".into(), "gamma_nonnegative", || format!("gamma = {}", sys.gamma));

    c.check(nb > 0, || "buses".into(), "buses_present", || "case has no buses".into());
    for (i, b) in case.buses.iter().enumerate() {
        c.check(b.id == i + 1, || format!("bus {}", b.id), "bus_ids_contiguous", || format!("expected id {}", i + 1));
        c.check(b.load_fraction >= 0.0, || format!("bus {}", b.id), "load_fraction_nonnegative", || format!("load_fraction = {}", b.load_fraction));
    }
    let fsum: f64 = case.buses.iter().map(|b| b.load_fraction).sum();
    c.check((fsum - 1.0).abs() <= 1e-6, || "buses".into(), "load_fraction_sum", || format!("load fractions sum to {fsum}"));

    let bus_ok = |id: usize| id >= 1 && id <= nb;
    let mut branch_ids = BTreeSet::new();
    for br in &case.branches {
        let rec = || format!("branch {}", br.id);
        c.check(branch_ids.insert(br.id), rec, "branch_ids_unique", || "duplicate branch id".into());
        c.check(bus_ok(br.from_bus), rec, "branch_bus_exists", || format!("from_bus {} of {nb}", br.from_bus));
        c.check(bus_ok(br.to_bus), rec, "branch_bus_exists", || format!("to_bus {} of {nb}", br.to_bus));
        c.check(br.from_bus != br.to_bus, rec, "branch_distinct_ends", || format!("both ends at bus {}", br.from_bus));
        c.check(br.susceptance_b > 0.0, rec, "susceptance_positive", || format!("susceptance_b = {}", br.susceptance_b));
        c.check(br.flow_limit > 0.0, rec, "flow_limit_positive", || format!("flow_limit = {}", br.flow_limit));
    }

    for (i, g) in case.generators.iter().enumerate() {
        let rec = || format!("generator {}", g.id);
        c.check(g.id == i + 1, rec, "generator_ids_contiguous", || format!("expected id {}", i + 1));
        c.check(bus_ok(g.bus), rec, "generator_bus_exists", || format!("bus {} of {nb}", g.bus));
        c.check(g.p_min >= 0.0, rec, "p_min_nonnegative", || format!("p_min = {}", g.p_min));
        c.check(g.p_min <= g.p_max, rec, "p_min_le_p_max", || format!("p_min {} > p_max {}", g.p_min, g.p_max));
        c.check(g.inertia_h > 0.0, rec, "inertia_positive", || format!("inertia_H = {}", g.inertia_h));
        c.check(g.rated_power_sb > 0.0, rec, "rated_power_positive", || format!("rated_power_SB = {}", g.rated_power_sb));
        c.check(g.damping_d >= 0.0, rec, "damping_nonnegative", || format!("damping_d = {}", g.damping_d));
        c.check(g.ramp_hr >= 0.0, rec, "ramp_nonnegative", || format!("ramp_hr = {}", g.ramp_hr));
        c.check(g.reserve_cap >= 0.0, rec, "reserve_cap_nonnegative", || format!("reserve_cap = {}", g.reserve_cap));
        let costs = [g.cost_var, g.cost_noload, g.cost_startup, g.cost_reserve];
        c.check(costs.iter().all(|&x| x >= 0.0), rec, "costs_nonnegative", || format!("costs {costs:?}"));
        let io = g.initial_output;
        c.check(
            io == 0.0 || (io >= g.p_min && io <= g.p_max),
            rec,
            "initial_output_range",
            || format!("initial_output {io} outside {{0}} ∪ [{}, {}]", g.p_min, g.p_max),
        );
        c.check(!(g.initial_on && io == 0.0 && g.p_min > 0.0), rec, "initial_output_range", || "unit starts on below p_min".into());
        c.check(g.initial_on || io == 0.0, rec, "initial_output_range", || "unit starts off with non-zero output".into());
    }

    c.check(case.load_profile.len() == np, || "load_profile".into(), "profile_length", || format!("{} entries for {np} periods", case.load_profile.len()));
    c.check(case.load_profile.iter().all(|&d| d >= 0.0 && d.is_finite()), || "load_profile".into(), "profile_nonnegative", || "negative or non-finite demand".into());
    for (k, r) in case.res_profile.iter().enumerate() {
        let rec = || format!("res_profile {} (bus {})", k + 1, r.bus);
        c.check(bus_ok(r.bus), rec, "res_bus_exists", || format!("bus {} of {nb}", r.bus));
        c.check(r.mw.len() == np, rec, "profile_length", || format!("{} entries for {np} periods", r.mw.len()));
        c.check(r.mw.iter().all(|&x| x >= 0.0 && x.is_finite()), rec, "profile_nonnegative", || "negative or non-finite injection".into());
    }

    if nb > 0 {
        let components = connected_components(case);
        c.check(components == 1, || "network".into(), "connected", || format!("network has {components} components"));
    }
    c.0
}

/// Number of connected components, ignoring branches with dangling ends.
pub fn connected_components(case: &GridCase) -> usize {
    let n = case.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for br in &case.branches {
        if br.from_bus == 0 || br.to_bus == 0 || br.from_bus > n || br.to_bus > n {
            continue;
        }
        let a = find(&mut parent, br.from_bus - 1);
        let b = find(&mut parent, br.to_bus - 1);
        parent[a] = b;
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

fn scale_powers(case: &GridCase, f: f64) -> GridCase {
    let mut out = case.clone();
    for br in &mut out.branches {
        br.flow_limit *= f;
    }
    for g in &mut out.generators {
        g.rated_power_sb *= f;
        g.p_min *= f;
        g.p_max *= f;
        g.ramp_hr *= f;
        g.reserve_cap *= f;
        g.initial_output *= f;
        // Money per energy unit scales inversely so costs stay in $.
        g.cost_var /= f;
        g.cost_reserve /= f;
    }
    for d in &mut out.load_profile {
        *d *= f;
    }
    for r in &mut out.res_profile {
        for x in &mut r.mw {
            *x *= f;
        }
    }
    out
}

/// Divides every power quantity by the system base and sets the base to 1.
pub fn to_per_unit(case: &GridCase) -> Result<GridCase, CaseError> {
    let base = case.system.system_base;
    if !(base > 0.0) {
        return Err(CaseError::ZeroBase(base));
    }
    let mut out = scale_powers(case, 1.0 / base);
    out.system.system_base = 1.0;
    Ok(out)
}

/// Inverse of [`to_per_unit`].
pub fn from_per_unit(case: &GridCase, base: f64) -> Result<GridCase, CaseError> {
    if !(base > 0.0) {
        return Err(CaseError::ZeroBase(base));
    }
    let mut out = scale_powers(case, base);
    out.system.system_base = base;
    Ok(out)
}

impl GridCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_gens(&self) -> usize {
        self.generators.len()
    }

    pub fn n_periods(&self) -> usize {
        self.system.n_periods
    }

    pub fn bus_load(&self, bus_idx: usize, t: usize) -> f64 {
        self.buses[bus_idx].load_fraction * self.load_profile[t]
    }

    pub fn bus_res(&self, bus_idx: usize, t: usize) -> f64 {
        self.res_profile
            .iter()
            .filter(|r| r.bus == bus_idx + 1)
            .map(|r| r.mw[t])
            .sum()
    }

    pub fn total_res(&self, t: usize) -> f64 {
        self.res_profile.iter().map(|r| r.mw[t]).sum()
    }

    pub fn net_load(&self, t: usize) -> f64 {
        self.load_profile[t] - self.total_res(t)
    }

    /// argmin over periods of demand minus renewables; earliest on ties.
    pub fn lowest_netload_period(&self) -> usize {
        (0..self.n_periods())
            .min_by(|&a, &b| self.net_load(a).total_cmp(&self.net_load(b)))
            .unwrap_or(0)
    }

    /// Indices of generators located at bus index `bus_idx`.
    pub fn gens_at_bus(&self, bus_idx: usize) -> Vec<usize> {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.bus == bus_idx + 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sorted bus indices hosting at least one generator.
    pub fn generator_buses(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.generators.iter().map(|g| g.bus - 1).collect();
        set.into_iter().collect()
    }

    /// m_i = 2·H_i·S_Bi / (S_B·2π·f_n), in p.u.·s².
    pub fn inertia_coefficient(&self, gen_idx: usize) -> f64 {
        let g = &self.generators[gen_idx];
        2.0 * g.inertia_h * g.rated_power_sb
            / (self.system.system_base * 2.0 * std::f64::consts::PI * self.system.nominal_freq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_bus() -> GridCase {
        GridCase {
            system: SystemParams {
                system_base: 100.0,
                nominal_freq: 60.0,
                period_hours: 1.0,
                n_periods: 1,
                rocof_limit: 0.5,
                gamma: 0.5,
            },
            buses: vec![
                Bus { id: 1, name: "a".into(), load_fraction: 0.0 },
                Bus { id: 2, name: "b".into(), load_fraction: 1.0 },
            ],
            branches: vec![Branch { id: 1, from_bus: 1, to_bus: 2, susceptance_b: 5.0, flow_limit: 100.0 }],
            generators: vec![Generator {
                id: 1,
                bus: 1,
                rated_power_sb: 120.0,
                inertia_h: 4.0,
                damping_d: 0.0,
                p_min: 20.0,
                p_max: 100.0,
                ramp_hr: 50.0,
                reserve_cap: 30.0,
                cost_var: 20.0,
                cost_noload: 100.0,
                cost_startup: 500.0,
                cost_reserve: 5.0,
                initial_on: false,
                initial_output: 0.0,
            }],
            load_profile: vec![50.0],
            res_profile: vec![],
        }
    }

    #[test]
    fn valid_case_has_no_violations() {
        assert!(validate(&two_bus()).is_empty());
    }

    #[test]
    fn inverted_bounds_cite_generator() {
        let mut c = two_bus();
        c.generators[0].p_min = 150.0;
        c.generators[0].initial_output = 0.0;
        let v = validate(&c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].record, "generator 1");
        assert_eq!(v[0].rule, "p_min_le_p_max");
    }

    #[test]
    fn disconnected_graph_is_one_violation() {
        let mut c = two_bus();
        c.buses.push(Bus { id: 3, name: "c".into(), load_fraction: 0.0 });
        c.buses.push(Bus { id: 4, name: "d".into(), load_fraction: 0.0 });
        c.branches.push(Branch { id: 2, from_bus: 3, to_bus: 4, susceptance_b: 1.0, flow_limit: 10.0 });
        let v = validate(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "connected");
    }

    #[test]
    fn dangling_branch_named() {
        let mut c = two_bus();
        c.branches[0].to_bus = 99;
        let err = parse_case(&case_to_string(&c)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("branch 1"), "{msg}");
        assert!(msg.contains("99"), "{msg}");
    }

    #[test]
    fn per_unit_conversion() {
        let c = two_bus();
        let pu = to_per_unit(&c).unwrap();
        assert_eq!(pu.generators[0].p_max, 1.0);
        assert_eq!(pu.load_profile[0], 0.5);
        assert_eq!(to_per_unit(&pu).unwrap(), pu);
        let back = from_per_unit(&pu, 100.0).unwrap();
        assert!((back.generators[0].p_min - 20.0).abs() <= 1e-12 * 20.0);
        assert!((back.generators[0].cost_var - 20.0).abs() <= 1e-12 * 20.0);
        let mut zero = c.clone();
        zero.system.system_base = 0.0;
        assert!(matches!(to_per_unit(&zero), Err(CaseError::ZeroBase(_))));
    }

    #[test]
    fn inertia_coefficient_definition() {
        let c = two_bus();
        let m = c.inertia_coefficient(0);
        let expect = 2.0 * 4.0 * 120.0 / (100.0 * 2.0 * std::f64::consts::PI * 60.0);
        assert_eq!(m, expect);
    }
}
