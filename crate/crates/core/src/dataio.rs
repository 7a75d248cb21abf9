//! Job-training data ingestion, balance summaries, and the ATT analysis
//! panel.
//!
//! Files are delimited text with a header row, comma- or whitespace-split.
//! Column names are mapped through a schema so differently named exports of
//! the same data load without editing the file. Earnings stay in raw dollars
//! internally; only the summary display divides the 1974/75 earnings by a
//! thousand, following the usual presentation of these data.

use crate::estimators::{Estimand, EffectEstimate, ObservationalSample};
use crate::dgp::PsForm;
use crate::mcharness::{estimate_scores, method_point, MethodKind, MethodSpec, PsSource};
use crate::numeric::special::student_t_two_sided;
use crate::propensity::{fit_logistic, DesignMatrix, FitOptions, PropensityError};
use crate::resampling::{bootstrap, BootstrapError, CiMethod};
use crate::kernels::KernelSpec;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Covariate columns in the fixed order used for estimation and summaries.
pub const NSW_COVARIATES: [&str; 10] = [
    "age", "educ", "black", "hispanic", "married", "nodegr", "re74", "re75", "u74", "u75",
];

/// One person-record of the job-training data.
#[derive(Debug, Clone, PartialEq)]
pub struct NswRecord {
    pub treat: bool,
    pub age: u32,
    pub educ: u32,
    pub black: bool,
    pub hispanic: bool,
    pub married: bool,
    pub nodegr: bool,
    pub re74: f64,
    pub re75: f64,
    pub u74: bool,
    pub u75: bool,
    pub re78: f64,
}

/// Maps the canonical field names onto the column names of a concrete file.
#[derive(Debug, Clone, PartialEq)]
pub struct NswSchema {
    pub treat: String,
    pub age: String,
    pub educ: String,
    pub black: String,
    pub hispanic: String,
    pub married: String,
    pub nodegr: String,
    pub re74: String,
    pub re75: String,
    pub u74: String,
    pub u75: String,
    pub re78: String,
}

impl Default for NswSchema {
    fn default() -> Self {
        NswSchema {
            treat: "treat".into(),
            age: "age".into(),
            educ: "educ".into(),
            black: "black".into(),
            hispanic: "hispanic".into(),
            married: "married".into(),
            nodegr: "nodegr".into(),
            re74: "re74".into(),
            re75: "re75".into(),
            u74: "u74".into(),
            u75: "u75".into(),
            re78: "re78".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} has no data rows")]
    Empty { path: String },
    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    BadCell { row: usize, column: String, value: String },
    #[error("welch test needs both samples of size >= 2 with variation in at least one")]
    DegenerateTest,
}

/// A loaded file: raw records, the estimation sample (outcome = 1978
/// earnings, ten covariates in [`NSW_COVARIATES`] order), and the rows where
/// a zero-earnings indicator contradicts the earnings column. Violations are
/// reported, never repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct NswData {
    pub records: Vec<NswRecord>,
    pub sample: ObservationalSample<f64>,
    /// 1-based data row numbers with u74/re74 or u75/re75 inconsistency.
    pub indicator_violations: Vec<usize>,
}

pub fn load_nsw(path: &Path, schema: &NswSchema) -> Result<NswData, DataError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: shown.clone(), source })?;
    parse_nsw(&text, schema, &shown)
}

/// Parse delimited text with a header; rows are numbered from 1 excluding
/// the header, matching how error messages refer to them.
fn parse_nsw(text: &str, schema: &NswSchema, path: &str) -> Result<NswData, DataError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| DataError::Empty { path: path.to_string() })?;
    let comma = header.contains(',');
    let split = |line: &str| -> Vec<String> {
        if comma {
            line.split(',').map(|f| f.trim().to_string()).collect()
        } else {
            line.split_whitespace().map(str::to_string).collect()
        }
    };

    let names = split(header);
    let find = |wanted: &str| -> Result<usize, DataError> {
        names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(wanted))
            .ok_or_else(|| DataError::MissingColumn {
                column: wanted.to_string(),
                path: path.to_string(),
            })
    };
    let col_treat = find(&schema.treat)?;
    let col_age = find(&schema.age)?;
    let col_educ = find(&schema.educ)?;
    let col_black = find(&schema.black)?;
    let col_hispanic = find(&schema.hispanic)?;
    let col_married = find(&schema.married)?;
    let col_nodegr = find(&schema.nodegr)?;
    let col_re74 = find(&schema.re74)?;
    let col_re75 = find(&schema.re75)?;
    let col_u74 = find(&schema.u74)?;
    let col_u75 = find(&schema.u75)?;
    let col_re78 = find(&schema.re78)?;

    let mut records = Vec::new();
    let mut violations = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let fields = split(line);
        let cell = |col: usize, name: &str| -> Result<&str, DataError> {
            fields.get(col).map(String::as_str).ok_or_else(|| DataError::BadCell {
                row,
                column: name.to_string(),
                value: "<missing>".to_string(),
            })
        };
        let flag = |col: usize, name: &str| -> Result<bool, DataError> {
            match cell(col, name)? {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(DataError::BadCell {
                    row,
                    column: name.to_string(),
                    value: other.to_string(),
                }),
            }
        };
        let count = |col: usize, name: &str| -> Result<u32, DataError> {
            let raw = cell(col, name)?;
            raw.parse::<u32>().map_err(|_| DataError::BadCell {
                row,
                column: name.to_string(),
                value: raw.to_string(),
            })
        };
        let dollars = |col: usize, name: &str| -> Result<f64, DataError> {
            let raw = cell(col, name)?;
            match raw.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
                _ => Err(DataError::BadCell {
                    row,
                    column: name.to_string(),
                    value: raw.to_string(),
                }),
            }
        };

        let record = NswRecord {
            treat: flag(col_treat, &schema.treat)?,
            age: count(col_age, &schema.age)?,
            educ: count(col_educ, &schema.educ)?,
            black: flag(col_black, &schema.black)?,
            hispanic: flag(col_hispanic, &schema.hispanic)?,
            married: flag(col_married, &schema.married)?,
            nodegr: flag(col_nodegr, &schema.nodegr)?,
            re74: dollars(col_re74, &schema.re74)?,
            re75: dollars(col_re75, &schema.re75)?,
            u74: flag(col_u74, &schema.u74)?,
            u75: flag(col_u75, &schema.u75)?,
            re78: dollars(col_re78, &schema.re78)?,
        };
        if record.u74 != (record.re74 == 0.0) || record.u75 != (record.re75 == 0.0) {
            violations.push(row);
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(DataError::Empty { path: path.to_string() });
    }

    Ok(NswData {
        sample: sample_from_records(&records),
        records,
        indicator_violations: violations,
    })
}

fn sample_from_records(records: &[NswRecord]) -> ObservationalSample<f64> {
    let n = records.len();
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * NSW_COVARIATES.len());
    for r in records {
        y.push(r.re78);
        w.push(r.treat);
        x.extend_from_slice(&[
            r.age as f64,
            r.educ as f64,
            r.black as u8 as f64,
            r.hispanic as u8 as f64,
            r.married as u8 as f64,
            r.nodegr as u8 as f64,
            r.re74,
            r.re75,
            r.u74 as u8 as f64,
            r.u75 as u8 as f64,
        ]);
    }
    ObservationalSample::new(y, w, x, NSW_COVARIATES.len())
}

/// Canonical comma-delimited serialization; floats use the shortest exact
/// representation so a reload reproduces the parsed fields bit for bit.
pub fn write_nsw(records: &[NswRecord]) -> String {
    let mut out = String::new();
    out.push_str("treat,age,educ,black,hispanic,married,nodegr,re74,re75,u74,u75,re78\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.treat as u8,
            r.age,
            r.educ,
            r.black as u8,
            r.hispanic as u8,
            r.married as u8,
            r.nodegr as u8,
            r.re74,
            r.re75,
            r.u74 as u8,
            r.u75 as u8,
            r.re78,
        );
    }
    out
}

/// Welch's unequal-variance two-sample test with Satterthwaite degrees of
/// freedom and a two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, DataError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(DataError::DegenerateTest);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return Err(DataError::DegenerateTest);
    }
    let (qa, qb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2)
        / (qa.powi(2) / (a.len() - 1) as f64 + qb.powi(2) / (b.len() - 1) as f64);
    let p = student_t_two_sided(t, df);
    Ok(WelchTest { t, df, p })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Balance summary for one covariate: group means and standard deviations
/// plus the Welch p-value for equal means. `display_scale` is 1000 for the
/// earnings columns, which the tables print in thousands.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSummary {
    pub name: &'static str,
    pub treated_mean: f64,
    pub treated_sd: f64,
    pub control_mean: f64,
    pub control_sd: f64,
    pub p_value: f64,
    pub display_scale: f64,
}

/// Per-covariate treated-versus-control balance within one sample.
pub fn summarize_covariates(sample: &ObservationalSample<f64>) -> Vec<CovariateSummary> {
    const DISPLAY: [(&str, f64); 10] = [
        ("Age", 1.0),
        ("Educ", 1.0),
        ("Black", 1.0),
        ("Hispanic", 1.0),
        ("Married", 1.0),
        ("Nodegr", 1.0),
        ("Re74", 1000.0),
        ("Re75", 1000.0),
        ("U74", 1.0),
        ("U75", 1.0),
    ];
    assert_eq!(sample.dim(), DISPLAY.len(), "summary expects the ten-column layout");
    DISPLAY
        .iter()
        .enumerate()
        .map(|(j, &(name, display_scale))| {
            let mut treated = Vec::with_capacity(sample.n_treated());
            let mut control = Vec::with_capacity(sample.n_control());
            for i in 0..sample.len() {
                let v = sample.covariates(i)[j];
                if sample.w()[i] {
                    treated.push(v);
                } else {
                    control.push(v);
                }
            }
            let (tm, tv) = mean_var(&treated);
            let (cm, cv) = mean_var(&control);
            let p_value = welch_t_test(&treated, &control).map(|t| t.p).unwrap_or(f64::NAN);
            CovariateSummary {
                name,
                treated_mean: tm,
                treated_sd: tv.sqrt(),
                control_mean: cm,
                control_sd: cv.sqrt(),
                p_value,
                display_scale,
            }
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("propensity model failed on the full sample: {0}")]
    Propensity(#[from] PropensityError),
    #[error("method `{label}` failed: {source}")]
    Bootstrap {
        label: String,
        #[source]
        source: BootstrapError,
    },
    #[error("method `{label}` could not produce a point estimate")]
    PointFailed { label: String },
}

/// One labeled row of the ATT analysis table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub label: String,
    pub estimate: EffectEstimate<f64>,
}

/// The five-method ATT panel reported for these data: kernel matching at
/// bandwidth `h`, the two single-neighbor matching baselines, IPW, and
/// doubly robust, all on estimated scores, all with normal-approximation
/// intervals from bootstrap standard errors.
pub fn nsw_att_panel(h: f64) -> Vec<MethodSpec> {
    let spec = |label: &str, kind| MethodSpec {
        label: label.to_string(),
        estimand: Estimand::Att,
        kind,
        ci: CiMethod::NormalApprox,
    };
    vec![
        spec(
            "Proposed",
            MethodKind::KernelMatch {
                kernel: KernelSpec::gaussian(h),
                ps: PsSource::Estimated,
            },
        ),
        spec("Covariates", MethodKind::NnCovariates { k: 1 }),
        spec("Estimated PS", MethodKind::NnPscore { k: 1, ps: PsSource::Estimated }),
        spec("IPW", MethodKind::Ipw { ps: PsSource::Estimated }),
        spec("DR", MethodKind::DoublyRobust { ps: PsSource::Estimated }),
    ]
}

/// Run a method panel on one real sample with unit-resampling bootstrap
/// standard errors and intervals. Every method is bootstrapped from the same
/// seed, so methods see identical resample index streams. `bootstrap_b = 0`
/// returns points only.
pub fn analyze_att(
    sample: &ObservationalSample<f64>,
    methods: &[MethodSpec],
    bootstrap_b: usize,
    seed: u64,
) -> Result<Vec<AnalysisRow>, AnalysisError> {
    analyze_att_design(sample, methods, bootstrap_b, seed, None)
}

/// Like [`analyze_att`] but with the propensity design restricted to the
/// given covariate columns (the intercept stays). `None` keeps the default
/// design of every column; the full column list reproduces it exactly.
pub fn analyze_att_design(
    sample: &ObservationalSample<f64>,
    methods: &[MethodSpec],
    bootstrap_b: usize,
    seed: u64,
    ps_columns: Option<&[usize]>,
) -> Result<Vec<AnalysisRow>, AnalysisError> {
    if let Some(cols) = ps_columns {
        assert!(!cols.is_empty(), "propensity design needs at least one column");
        assert!(
            cols.iter().all(|&c| c < sample.dim()),
            "propensity design column out of range"
        );
    }
    assert!(
        methods.iter().all(|m| !matches!(
            m.kind,
            MethodKind::KernelMatch { ps: PsSource::True, .. }
                | MethodKind::NnPscore { ps: PsSource::True, .. }
                | MethodKind::Ipw { ps: PsSource::True }
                | MethodKind::DoublyRobust { ps: PsSource::True }
        )),
        "real data has no true propensity scores"
    );
    methods
        .iter()
        .map(|spec| {
            let evaluate = |s: &ObservationalSample<f64>| {
                let est = match ps_columns {
                    None => estimate_scores(s, std::slice::from_ref(spec), PsForm::Linear),
                    Some(cols) if !matches!(spec.kind, MethodKind::NnCovariates { .. }) => {
                        subset_scores(s, cols)
                    }
                    Some(_) => None,
                };
                method_point(spec, s, &[], est.as_deref())
            };
            if bootstrap_b == 0 {
                let point = evaluate(sample).ok_or_else(|| AnalysisError::PointFailed {
                    label: spec.label.clone(),
                })?;
                return Ok(AnalysisRow {
                    label: spec.label.clone(),
                    estimate: EffectEstimate::point_only(
                        spec.estimand,
                        method_tag(&spec.kind),
                        point,
                    ),
                });
            }
            let boot = bootstrap(sample, evaluate, bootstrap_b, spec.ci, 0.95, seed)
                .map_err(|source| AnalysisError::Bootstrap {
                    label: spec.label.clone(),
                    source,
                })?;
            let estimate = EffectEstimate::point_only(
                spec.estimand,
                method_tag(&spec.kind),
                boot.point,
            )
            .with_interval(boot.se, boot.ci.0, boot.ci.1);
            Ok(AnalysisRow { label: spec.label.clone(), estimate })
        })
        .collect()
}

/// Logistic scores from an intercept plus the selected covariate columns.
fn subset_scores(s: &ObservationalSample<f64>, cols: &[usize]) -> Option<Vec<f64>> {
    let (n, d) = (s.len(), s.dim());
    let x = s.x();
    let mut sub = Vec::with_capacity(n * cols.len());
    for i in 0..n {
        for &c in cols {
            sub.push(x[i * d + c]);
        }
    }
    let design = DesignMatrix::with_intercept(n, cols.len(), &sub);
    fit_logistic(&design, s.w(), FitOptions::default()).ok().map(|fit| fit.scores)
}

fn method_tag(kind: &MethodKind) -> crate::estimators::Method {
    use crate::estimators::Method;
    match kind {
        MethodKind::KernelMatch { .. } => Method::KernelMatch,
        MethodKind::NnCovariates { .. } => Method::NnCovariates,
        MethodKind::NnPscore { .. } => Method::NnPscore,
        MethodKind::Ipw { .. } => Method::Ipw,
        MethodKind::DoublyRobust { .. } => Method::DoublyRobust,
    }
}
