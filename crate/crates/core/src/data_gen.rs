//! Model-based training data: scenario sampling, dispatch pools from the
//! frequency-free and frequency-constrained SCUC variants, simulation-based
//! labelling, filtering, splitting and CSV persistence.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rcuc_milp::{SolveStatus, Solver};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freq_dynamics::{contingency_rocof, DynamicsError, DynamicsOptions};
use crate::grid_model::GridCase;
use crate::rocof_net::{build_features, LabeledDataset, NetError, SampleMeta};
use crate::uc_milp::{build_variant, solve_model, LocationalFactors, ModelVariant, Schedule, UcError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("scenario {scenario}, {variant}: {source}")]
    Solve {
        scenario: usize,
        variant: ModelVariant,
        #[source]
        source: UcError,
    },
    #[error("period {period} has {committed} committed unit(s); a G-1 event needs at least two")]
    Degenerate { period: usize, committed: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Feature(#[from] NetError),
    #[error("dataset line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("dataset header: expected column `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_scenarios: usize,
    pub mean_shift_range: [f64; 2],
    pub relative_sigma: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_scenarios: 60,
            mean_shift_range: [-0.2, 0.2],
            relative_sigma: 0.03,
            seed: 2023,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let [lo, hi] = self.mean_shift_range;
        if !(lo > -1.0 && hi < 1.0 && lo <= hi) {
            return Err(DataError::Invalid(format!("mean shift range [{lo}, {hi}] must lie inside (-1, 1)")));
        }
        if !(self.relative_sigma >= 0.0) {
            return Err(DataError::Invalid(format!("relative sigma {} must be ≥ 0", self.relative_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub load_shift: f64,
    pub res_shift: f64,
    pub load_profile: Vec<f64>,
    /// Same order as the case's `res_profile`.
    pub res_mw: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn apply(&self, case: &GridCase) -> GridCase {
        let mut c = case.clone();
        c.load_profile = self.load_profile.clone();
        for (r, mw) in c.res_profile.iter_mut().zip(&self.res_mw) {
            r.mw = mw.clone();
        }
        c
    }
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Independent uniform mean shifts for load and renewables, then per-period
/// Gaussian noise relative to the shifted value; negatives clipped to 0.
pub fn sample_scenarios(case: &GridCase, config: &ScenarioConfig) -> Result<Vec<Scenario>, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let [lo, hi] = config.mean_shift_range;
    let sigma = config.relative_sigma;
    let noisy = |rng: &mut ChaCha8Rng, base: f64, shift: f64| -> f64 {
        let mean = base * (1.0 + shift);
        let z: f64 = StandardNormal.sample(rng);
        (mean * (1.0 + sigma * z)).max(0.0)
    };
    let mut out = Vec::with_capacity(config.n_scenarios);
    for id in 0..config.n_scenarios {
        let load_shift = draw(&mut rng, lo, hi);
        let res_shift = draw(&mut rng, lo, hi);
        let load_profile = case.load_profile.iter().map(|&d| noisy(&mut rng, d, load_shift)).collect();
        let res_mw = case
            .res_profile
            .iter()
            .map(|r| r.mw.iter().map(|&w| noisy(&mut rng, w, res_shift)).collect())
            .collect();
        out.push(Scenario { id, load_shift, res_shift, load_profile, res_mw });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub scenario: usize,
    pub variant: ModelVariant,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub schedule: Option<Schedule>,
}

/// Solves every scenario under T, ERC and LRC. Infeasible or unsolved pairs
/// are kept with `schedule: None` and logged.
pub fn generate_dispatch_pool(
    case: &GridCase,
    scenarios: &[Scenario],
    factors: &LocationalFactors,
    solver: &Solver,
) -> Result<Vec<PoolEntry>, DataError> {
    let mut pool = Vec::with_capacity(3 * scenarios.len());
    for sc in scenarios {
        let sc_case = sc.apply(case);
        for variant in ModelVariant::FREQUENCY_FREE {
            let wrap = |source| DataError::Solve { scenario: sc.id, variant, source };
            let model = build_variant(&sc_case, variant, Some(factors)).map_err(wrap)?;
            let out = solve_model(&model, &sc_case, solver).map_err(wrap)?;
            if out.status == SolveStatus::Error {
                return Err(wrap(UcError::Invalid(format!("solver error: {}", out.diagnostics.join("; ")))));
            }
            if out.schedule.is_none() {
                log::warn!("scenario {} {variant}: {}; skipped", sc.id, out.status);
            }
            log::info!("scenario {} {variant}: {} {:?}", sc.id, out.status, out.objective);
            pool.push(PoolEntry {
                scenario: sc.id,
                variant,
                status: out.status,
                objective: out.objective,
                schedule: out.schedule,
            });
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Hz/s; NaN when the simulation produced no number.
    pub label: f64,
    pub meta: SampleMeta,
    pub divergent: bool,
    /// Largest pre-event |θ_from − θ_to| over branches, rad.
    pub angle_spread: f64,
}

/// Index of the largest dispatch, lowest id on ties.
pub fn largest_unit(u: &[bool], p: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for g in (0..p.len()).filter(|&g| u[g]) {
        if best.is_none_or(|b| p[g] > p[b]) {
            best = Some(g);
        }
    }
    best
}

/// Trips the largest committed unit of `period` (0-based) and labels the
/// operating point with the simulated highest locational RoCoF.
pub fn label(
    case: &GridCase,
    schedule: &Schedule,
    period: usize,
    scenario: usize,
    variant: ModelVariant,
    options: &DynamicsOptions,
) -> Result<Sample, DataError> {
    let u = schedule.commitment(period);
    let p = schedule.dispatch(period);
    let committed = u.iter().filter(|&&x| x).count();
    if committed < 2 {
        return Err(DataError::Degenerate { period: period + 1, committed });
    }
    let g = largest_unit(&u, &p).expect("committed units exist");
    let base = case.system.system_base;
    let p_pu: Vec<f64> = p.iter().map(|x| x / base).collect();
    let features = build_features(&u, &p_pu)?;
    let angle_spread = case
        .branches
        .iter()
        .map(|b| (schedule.theta[b.from_bus - 1][period] - schedule.theta[b.to_bus - 1][period]).abs())
        .fold(0.0, f64::max);
    let (label, divergent) = match contingency_rocof(case, &u, &p, period, &[g], options) {
        Ok((report, _)) => (report.highest_rocof, false),
        Err(DynamicsError::Divergent(_) | DynamicsError::NoEquilibrium(_)) => (f64::NAN, true),
        Err(e) => return Err(e.into()),
    };
    Ok(Sample {
        features,
        label,
        meta: SampleMeta { scenario, variant, period: period + 1, event_gen: g + 1, event_mw: p[g] },
        divergent,
        angle_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RejectionReport {
    pub input: usize,
    pub retained: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl RejectionReport {
    pub fn add(&mut self, reason: &str) {
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }

    pub fn dropped(&self) -> usize {
        self.reasons.values().sum()
    }
}

impl fmt::Display for RejectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input {}", self.input)?;
        writeln!(f, "retained {}", self.retained)?;
        for (k, v) in &self.reasons {
            writeln!(f, "rejected {k} {v}")?;
        }
        Ok(())
    }
}

pub fn filter_invalid(samples: Vec<Sample>) -> (Vec<Sample>, RejectionReport) {
    let mut report = RejectionReport { input: samples.len(), ..Default::default() };
    let mut kept = Vec::with_capacity(samples.len());
    for s in samples {
        if s.divergent || !s.label.is_finite() || s.label <= 0.0 {
            report.add("divergent");
        } else if s.angle_spread > FRAC_PI_2 {
            report.add("angle_spread");
        } else {
            kept.push(s);
        }
    }
    report.retained = kept.len();
    (kept, report)
}

pub fn to_dataset(n_gens: usize, samples: &[Sample]) -> LabeledDataset {
    let mut d = LabeledDataset::new(n_gens);
    for s in samples {
        d.push(s.features.clone(), s.label, s.meta.clone());
    }
    d
}

/// Seeded shuffle, then the first `round(train_fraction·n)` go to training.
pub fn split(data: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset), DataError> {
    if data.len() < 2 {
        return Err(DataError::Invalid("need at least two samples to split".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Invalid(format!("train fraction {train_fraction} must be in (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((data.len() as f64 * train_fraction).round() as usize).clamp(1, data.len() - 1);
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

pub fn dataset_header(n_gens: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(3 * n_gens + 6);
    for prefix in ["u", "w", "p"] {
        h.extend((1..=n_gens).map(|g| format!("{prefix}_{g}")));
    }
    h.extend(["rocof", "scenario", "variant", "period", "event_gen", "event_mw"].map(String::from));
    h
}

pub fn write_dataset_to<W: Write>(data: &LabeledDataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header(data.n_gens))?;
    for ((x, y), m) in data.features.iter().zip(&data.labels).zip(&data.meta) {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        rec.push(m.scenario.to_string());
        rec.push(m.variant.as_str().to_string());
        rec.push(m.period.to_string());
        rec.push(m.event_gen.to_string());
        rec.push(m.event_mw.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(data: &LabeledDataset, path: &Path) -> Result<(), DataError> {
    write_dataset_to(data, std::fs::File::create(path)?)
}

pub fn read_dataset_from<R: Read>(reader: R) -> Result<LabeledDataset, DataError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let extra = 6;
    if header.len() < extra + 3 || (header.len() - extra) % 3 != 0 {
        return Err(DataError::Header {
            expected: "u_1..u_N, w_1..w_N, p_1..p_N, rocof, scenario, variant, period, event_gen, event_mw".into(),
            found: header.join(","),
        });
    }
    let n = (header.len() - extra) / 3;
    for (want, got) in dataset_header(n).iter().zip(&header) {
        if want != got {
            return Err(DataError::Header { expected: want.clone(), found: got.clone() });
        }
    }
    let mut data = LabeledDataset::new(n);
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let row = |message: String| DataError::Row { line, message };
        let num = |i: usize| -> Result<f64, DataError> {
            rec[i].parse::<f64>().map_err(|_| row(format!("column `{}`: bad number `{}`", header[i], &rec[i])))
        };
        let int = |i: usize| -> Result<usize, DataError> {
            rec[i].parse::<usize>().map_err(|_| row(format!("column `{}`: bad integer `{}`", header[i], &rec[i])))
        };
        let x: Vec<f64> = (0..3 * n).map(num).collect::<Result<_, _>>()?;
        for g in 0..n {
            if x[g] != 0.0 && x[g] != 1.0 {
                return Err(row(format!("column `u_{}` must be 0 or 1, found {}", g + 1, x[g])));
            }
        }
        let label = num(3 * n)?;
        if !label.is_finite() || label <= 0.0 {
            return Err(row(format!("rocof must be finite and positive, found {label}")));
        }
        let variant = ModelVariant::parse(&rec[3 * n + 2]).ok_or_else(|| row(format!("unknown variant `{}`", &rec[3 * n + 2])))?;
        let meta = SampleMeta {
            scenario: int(3 * n + 1)?,
            variant,
            period: int(3 * n + 3)?,
            event_gen: int(3 * n + 4)?,
            event_mw: num(3 * n + 5)?,
        };
        data.push(x, label, meta);
    }
    Ok(data)
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset, DataError> {
    read_dataset_from(std::fs::File::open(path)?)
}

/// Per-period labelling of every schedule in the pool, ordered by
/// (scenario, variant, period).
pub fn label_pool(
    case: &GridCase,
    scenarios: &[Scenario],
    pool: &[PoolEntry],
    options: &DynamicsOptions,
) -> Result<(Vec<Sample>, RejectionReport), DataError> {
    let mut samples = Vec::new();
    let mut degenerate = 0;
    for entry in pool {
        let Some(schedule) = &entry.schedule else { continue };
        let sc = scenarios
            .iter()
            .find(|s| s.id == entry.scenario)
            .ok_or_else(|| DataError::Invalid(format!("scenario {} not found", entry.scenario)))?;
        let sc_case = sc.apply(case);
        for t in 0..sc_case.n_periods() {
            match label(&sc_case, schedule, t, entry.scenario, entry.variant, options) {
                Ok(s) => samples.push(s),
                Err(DataError::Degenerate { .. }) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
    }
    let (kept, mut report) = filter_invalid(samples);
    report.input += degenerate;
    if degenerate > 0 {
        report.reasons.insert("single_unit".into(), degenerate);
    }
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_cases::two_unit;

    fn sample(label: f64, divergent: bool, spread: f64) -> Sample {
        Sample {
            features: vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.5],
            label,
            meta: SampleMeta { scenario: 0, variant: ModelVariant::T, period: 1, event_gen: 1, event_mw: 100.0 },
            divergent,
            angle_spread: spread,
        }
    }

    #[test]
    fn degenerate_scenarios_reproduce_base() {
        let mut case = two_unit(80.0);
        case.res_profile.push(crate::grid_model::ResProfile { bus: 2, mw: vec![10.0] });
        let cfg = ScenarioConfig { n_scenarios: 3, mean_shift_range: [0.0, 0.0], relative_sigma: 0.0, seed: 1 };
        for s in sample_scenarios(&case, &cfg).unwrap() {
            assert_eq!(s.apply(&case), case);
        }
        let up = ScenarioConfig { mean_shift_range: [0.2, 0.2], ..cfg };
        let s = &sample_scenarios(&case, &up).unwrap()[0];
        assert!((s.load_profile[0] - 96.0).abs() < 1e-12);
        assert!(sample_scenarios(&case, &ScenarioConfig { mean_shift_range: [-1.5, 0.0], ..up }).is_err());
    }

    #[test]
    fn filter_bookkeeping() {
        let clean = vec![sample(0.4, false, 0.1), sample(0.3, false, 0.2)];
        let (kept, rep) = filter_invalid(clean.clone());
        assert_eq!(kept, clean);
        assert_eq!(rep.dropped(), 0);
        let mixed = vec![sample(0.4, false, 0.1), sample(f64::NAN, false, 0.1), sample(0.2, true, 0.1), sample(0.3, false, 2.0)];
        let (kept, rep) = filter_invalid(mixed);
        assert_eq!(kept.len(), 1);
        assert_eq!(rep.reasons["divergent"], 2);
        assert_eq!(rep.reasons["angle_spread"], 1);
        assert_eq!(rep.dropped() + rep.retained, rep.input);
    }

    #[test]
    fn csv_schema_checks() {
        let d = to_dataset(2, &[sample(0.4123456789012345, false, 0.0)]);
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf).unwrap();
        assert_eq!(read_dataset_from(buf.as_slice()).unwrap(), d);
        let text = String::from_utf8(buf).unwrap();
        let renamed = text.replacen("w_2", "x_2", 1);
        match read_dataset_from(renamed.as_bytes()) {
            Err(DataError::Header { expected, .. }) => assert_eq!(expected, "w_2"),
            other => panic!("{other:?}"),
        }
        let half = text.replacen("\n1,", "\n0.5,", 1);
        let err = read_dataset_from(half.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("u_1") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn split_partitions() {
        let samples: Vec<Sample> = (0..10).map(|i| sample(0.1 + i as f64, false, 0.0)).collect();
        let d = to_dataset(2, &samples);
        let (a, b) = split(&d, 0.8, 5).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, _) = split(&d, 0.8, 5).unwrap();
        assert_eq!(a, a2);
        let mut all: Vec<f64> = a.labels.iter().chain(&b.labels).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.labels);
    }
}
