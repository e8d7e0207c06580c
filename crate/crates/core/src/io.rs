//! Case files, results files and CSV output.
//!
//! Units throughout: MW for power, MWh for energy, $/MWh for prices, hours
//! for durations and $ for money.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{BenefitReport, Comparison, LoadShape, SolveSummary, SolvedRun};
use crate::model::{
    validate_case, Case, Horizon, LegacyBid, Mode, PshUnit, Reservoir, ThermalUnit, ValidatedCase,
    ValidationError,
};

/// Version written by [`save_case`] and accepted by [`load_case`].
pub const CASE_FILE_VERSION: u32 = 1;
/// Version of results and scenario files.
pub const RESULTS_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{field}`: {message}")]
    SchemaViolation { field: String, message: String },
    #[error("unsupported file version {found}, expected {expected}")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

impl IoError {
    /// Short machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::ParseError { .. } => "parse",
            IoError::SchemaViolation { .. } => "schema",
            IoError::UnsupportedVersion { .. } => "version",
            IoError::Validation(_) => "validation",
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// On-disk case document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub version: u32,
    pub horizon: Horizon,
    pub psh_units: Vec<PshUnit>,
    pub reservoirs: Vec<Reservoir>,
    pub thermal_units: Vec<ThermalUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legacy_bids: Option<Vec<LegacyBid>>,
}

impl From<Case> for CaseFile {
    fn from(c: Case) -> Self {
        CaseFile {
            version: CASE_FILE_VERSION,
            horizon: c.horizon,
            psh_units: c.psh_units,
            reservoirs: c.reservoirs,
            thermal_units: c.thermal_units,
            legacy_bids: c.legacy_bids,
        }
    }
}

impl From<CaseFile> for Case {
    fn from(f: CaseFile) -> Self {
        Case {
            psh_units: f.psh_units,
            reservoirs: f.reservoirs,
            thermal_units: f.thermal_units,
            horizon: f.horizon,
            legacy_bids: f.legacy_bids,
        }
    }
}

/// Deserialize JSON, separating syntax errors from type and field errors.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, IoError> {
    if text.trim().is_empty() {
        return Err(IoError::ParseError {
            line: 1,
            column: 1,
            message: "empty document".into(),
        });
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => IoError::SchemaViolation {
                field: path,
                message: inner.to_string(),
            },
            _ => IoError::ParseError {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            },
        }
    })?;
    Ok(value)
}

pub fn parse_case(text: &str) -> Result<ValidatedCase, IoError> {
    let file: CaseFile = from_json(text)?;
    if file.version != CASE_FILE_VERSION {
        return Err(IoError::UnsupportedVersion {
            found: file.version,
            expected: CASE_FILE_VERSION,
        });
    }
    Ok(validate_case(file.into())?)
}

pub fn load_case(path: impl AsRef<Path>) -> Result<ValidatedCase, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_case(&text)
}

pub fn case_to_json(case: &Case) -> String {
    serde_json::to_string_pretty(&CaseFile::from(case.clone())).expect("case serializes")
}

pub fn save_case(case: &Case, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, case_to_json(case) + "\n").map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRow {
    pub interval: usize,
    pub unit: String,
    pub mode: Mode,
    /// MW
    pub q_gen: f64,
    /// MW
    pub q_pump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocRow {
    /// Boundary index: 0 is the start of the horizon, T its end.
    pub interval: usize,
    pub reservoir: String,
    /// MWh
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceRow {
    pub interval: usize,
    /// $/MWh
    pub lmp: f64,
}

/// One solved model in tabular form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    /// `legacy` or `proposed`.
    pub model_tag: String,
    pub solver: SolveSummary,
    /// $
    pub thermal_cost: f64,
    pub dt_hours: f64,
    /// MW per interval
    pub net_load: Vec<f64>,
    pub schedule: Vec<ScheduleRow>,
    pub soc: Vec<SocRow>,
    pub prices: Vec<PriceRow>,
    pub prices_degenerate: bool,
}

impl From<&SolvedRun> for RunRecord {
    fn from(run: &SolvedRun) -> Self {
        let s = &run.schedule;
        let mut schedule = Vec::new();
        for t in 0..s.n_intervals() {
            for u in &s.psh {
                schedule.push(ScheduleRow {
                    interval: t,
                    unit: u.id.clone(),
                    mode: u.mode[t],
                    q_gen: u.q_gen[t],
                    q_pump: u.q_pump[t],
                });
            }
        }
        let mut soc = Vec::new();
        for t in 0..=s.n_intervals() {
            for r in &s.soc {
                soc.push(SocRow {
                    interval: t,
                    reservoir: r.reservoir_id.clone(),
                    e: r.e[t],
                });
            }
        }
        RunRecord {
            model_tag: run.model.as_str().to_string(),
            solver: run.solve.clone(),
            thermal_cost: run.thermal_cost,
            dt_hours: s.dt_hours,
            net_load: s.net_load.clone(),
            schedule,
            soc,
            prices: run
                .prices
                .lmp
                .iter()
                .enumerate()
                .map(|(interval, &lmp)| PriceRow { interval, lmp })
                .collect(),
            prices_degenerate: run.prices.degenerate,
        }
    }
}

impl RunRecord {
    pub fn n_intervals(&self) -> usize {
        self.net_load.len()
    }

    /// Net PSH injection (generation minus pumping) in MW per interval.
    pub fn psh_net(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_intervals()];
        for row in &self.schedule {
            out[row.interval] += row.q_gen - row.q_pump;
        }
        out
    }

    /// Stored energy summed over reservoirs at each interval boundary.
    pub fn total_soc(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_intervals() + 1];
        for row in &self.soc {
            out[row.interval] += row.e;
        }
        out
    }
}

/// Outcome of one generated net-load scenario in a batch comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOutcome {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<LoadShape>,
    pub net_load: Vec<f64>,
    pub report: BenefitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsFile {
    pub version: u32,
    pub runs: Vec<RunRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benefit: Option<BenefitReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioOutcome>,
}

impl ResultsFile {
    pub fn single(run: &SolvedRun) -> Self {
        ResultsFile {
            version: RESULTS_FILE_VERSION,
            runs: vec![run.into()],
            benefit: None,
            scenarios: Vec::new(),
        }
    }

    pub fn comparison(c: &Comparison) -> Self {
        ResultsFile {
            version: RESULTS_FILE_VERSION,
            runs: vec![(&c.legacy).into(), (&c.proposed).into()],
            benefit: Some(c.report.clone()),
            scenarios: Vec::new(),
        }
    }
}

pub fn results_to_json(results: &ResultsFile) -> String {
    serde_json::to_string_pretty(results).expect("results serialize")
}

pub fn save_results(results: &ResultsFile, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, results_to_json(results) + "\n").map_err(|e| io_err(path, e))
}

pub fn parse_results(text: &str) -> Result<ResultsFile, IoError> {
    let r: ResultsFile = from_json(text)?;
    if r.version != RESULTS_FILE_VERSION {
        return Err(IoError::UnsupportedVersion {
            found: r.version,
            expected: RESULTS_FILE_VERSION,
        });
    }
    Ok(r)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ResultsFile, IoError> {
    let path = path.as_ref();
    parse_results(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

/// Net-load profiles to run through a batch comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub scenarios: Vec<NamedLoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLoad {
    pub label: String,
    /// MW per interval
    pub net_load: Vec<f64>,
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioFile, IoError> {
    let path = path.as_ref();
    let f: ScenarioFile = from_json(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)?;
    if f.version != RESULTS_FILE_VERSION {
        return Err(IoError::UnsupportedVersion {
            found: f.version,
            expected: RESULTS_FILE_VERSION,
        });
    }
    Ok(f)
}

#[derive(Serialize)]
struct PlotRow<'a> {
    t: usize,
    net_load_mw: f64,
    psh_net_mw: f64,
    lmp: f64,
    soc_mwh: f64,
    model_tag: &'a str,
}

const PLOT_HEADER: [&str; 6] = [
    "t",
    "net_load_mw",
    "psh_net_mw",
    "lmp",
    "soc_mwh",
    "model_tag",
];

/// Tidy plot table, one row per run and interval. `soc_mwh` is the stored
/// energy (all reservoirs) at the end of the interval.
pub fn plot_data_csv(results: &ResultsFile) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(PLOT_HEADER).expect("in-memory write");
    for run in &results.runs {
        let net = run.psh_net();
        let soc = run.total_soc();
        for t in 0..run.n_intervals() {
            w.serialize(PlotRow {
                t,
                net_load_mw: run.net_load[t],
                psh_net_mw: net[t],
                lmp: run.prices.get(t).map_or(f64::NAN, |p| p.lmp),
                soc_mwh: soc[t + 1],
                model_tag: &run.model_tag,
            })
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn emit_plot_data(results: &ResultsFile, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, plot_data_csv(results)).map_err(|e| io_err(path, e))
}

/// Two-column `t,lmp` table.
pub fn price_csv(lmp: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "lmp"]).expect("in-memory write");
    for (t, p) in lmp.iter().enumerate() {
        w.serialize((t, p)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_unit_system;

    const BUNDLED: &str = include_str!("../cases/two_unit.json");

    #[test]
    fn bundled_case_loads() {
        let case = parse_case(BUNDLED).unwrap();
        assert_eq!(case.psh_units.len(), 2);
        assert_eq!(case.reservoirs[0].e_initial, 2600.0);
        assert_eq!(case.psh_units[0].q_pump_min, 200.0);
        assert_eq!(case.horizon.n_intervals, 24);
        assert!(case.legacy_bids.is_some());
    }

    #[test]
    fn text_where_number_required() {
        let text = BUNDLED.replacen("\"eta_pump\": 0.9", "\"eta_pump\": \"0.9\"", 1);
        assert_ne!(text, BUNDLED);
        match parse_case(&text) {
            Err(IoError::SchemaViolation { field, .. }) => {
                assert_eq!(field, "psh_units[0].eta_pump")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = BUNDLED.replacen("\"version\": 1", "\"version\": 1, \"colour\": \"red\"", 1);
        assert!(matches!(
            parse_case(&text),
            Err(IoError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn empty_and_truncated() {
        assert!(matches!(parse_case(""), Err(IoError::ParseError { .. })));
        assert!(matches!(
            parse_case("  \n"),
            Err(IoError::ParseError { .. })
        ));
        assert!(matches!(
            parse_case(&BUNDLED[..40]),
            Err(IoError::ParseError { .. })
        ));
    }

    #[test]
    fn wrong_version() {
        let text = BUNDLED.replacen("\"version\": 1", "\"version\": 7", 1);
        assert_eq!(
            parse_case(&text).unwrap_err(),
            IoError::UnsupportedVersion {
                found: 7,
                expected: 1
            }
        );
    }

    #[test]
    fn invalid_case_reports_field() {
        let text = BUNDLED.replacen("\"eta_pump\": 0.9", "\"eta_pump\": 1.5", 1);
        match parse_case(&text) {
            Err(IoError::Validation(v)) => {
                assert!(v.0.iter().any(|x| x.field().contains("eta_pump")))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("case.json");
        let case = two_unit_system(vec![500.5, 0.1 + 0.2, 1e-300]);
        save_case(&case, &path).unwrap();
        assert_eq!(load_case(&path).unwrap().case(), &case);
        assert!(matches!(
            load_case(dir.path().join("missing.json")),
            Err(IoError::Io { .. })
        ));
    }

    #[test]
    fn price_table() {
        assert_eq!(price_csv(&[15.0, 20.5]), "t,lmp\n0,15.0\n1,20.5\n");
    }

    #[test]
    fn plot_header_without_runs() {
        let r = ResultsFile {
            version: 1,
            runs: Vec::new(),
            benefit: None,
            scenarios: Vec::new(),
        };
        assert_eq!(
            plot_data_csv(&r),
            "t,net_load_mw,psh_net_mw,lmp,soc_mwh,model_tag\n"
        );
    }
}
