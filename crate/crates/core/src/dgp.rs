//! Synthetic designs for the simulation studies.
//!
//! Five benchmark settings, a misspecification design, and an overlap design.
//! Every generator is a pure function of (spec, seed): draws come from the
//! ChaCha8 counter stream in a fixed per-unit order (covariates, then the
//! treatment uniform, then error terms), so regeneration is bit-identical
//! across platforms and thread counts. Treatment is assigned by comparing one
//! uniform draw against the scenario's logistic score, which is also returned
//! exactly as `true_scores`.

use crate::estimators::ObservationalSample;
use crate::propensity::sigmoid;
use crate::seeding::stream_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Exact average effect in the first setting (linear outcome contrasts with
/// mean-zero covariates).
pub const S1_TRUE_ATE: f64 = 5.0;
/// Effect on the treated in the first setting: the contrast 5 + 2x1 + 4x2
/// averaged under the assignment probability, by 2-d quadrature.
pub const S1_TRUE_ATT: f64 = 5.388414528624568;
/// Setting two has effect 5 - 20x1 while assignment depends only on x2, so
/// ATE and ATT coincide at 5.
pub const S2_TRUE_ATE: f64 = 5.0;
pub const S2_TRUE_ATT: f64 = 5.0;
/// Settings three and four add the treatment indicator to the outcome, so
/// both estimands are exactly 1.
pub const S3_S4_TRUE_EFFECT: f64 = 1.0;
/// E[sin(2 + X1 + X2/2) - sin(1 + X1 + X2/2)] for standard normal X1 and a
/// fair Bernoulli X2; closed form exp(-1/2)(sin 2 + sin 2.5 - sin 1 - sin 1.5)/2.
pub const S5_TRUE_ATE: f64 = -0.10044038563949326;
/// Same contrast reweighted by the setting-five assignment probability,
/// by nested quadrature over the three covariates.
pub const S5_TRUE_ATT: f64 = -0.20475605080614964;
/// The misspecification design assumes a constant unit effect.
pub const MISSPEC_TRUE_EFFECT: f64 = 1.0;

/// Which design the downstream propensity fit should use for the
/// misspecification study. Generation itself is identical for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsForm {
    /// Fit on the four covariates as drawn.
    Linear,
    /// Fit on the covariates plus all pairwise products.
    LinearPlusInteractions,
}

impl std::str::FromStr for PsForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(PsForm::Linear),
            "interactions" | "linear-plus-interactions" | "linear+interactions" => {
                Ok(PsForm::LinearPlusInteractions)
            }
            other => Err(format!("unknown propensity form `{other}`")),
        }
    }
}

/// Coefficient blocks for the overlap design: assignment index alpha + beta'z
/// and one outcome regression per arm (intercept first). The blocks are
/// inputs so they can be refit externally on real data; `att_benchmark` is
/// carried through as metadata rather than derived from the blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCoeffs {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub delta0: Vec<f64>,
    pub delta1: Vec<f64>,
    pub att_benchmark: f64,
}

/// Row pool the overlap design resamples covariates from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariatePool {
    values: Vec<f64>,
    rows: usize,
    d: usize,
}

impl CovariatePool {
    pub fn new(values: Vec<f64>, rows: usize, d: usize) -> Self {
        assert!(rows > 0 && d > 0, "covariate pool must be non-empty");
        assert_eq!(values.len(), rows * d, "pool storage does not match rows x d");
        CovariatePool { values, rows, d }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    S1,
    S2,
    S3,
    S4,
    S5,
    Misspec { ps_form: PsForm },
    Overlap { coeffs: OverlapCoeffs, pool: CovariatePool, scale: f64 },
}

impl ScenarioKind {
    /// Parse one of the five basic setting ids (`s1`..`s5`), case-insensitive.
    /// The misspecification and overlap designs need parameter blocks and are
    /// constructed explicitly.
    pub fn from_id(id: &str) -> Option<ScenarioKind> {
        match id.to_ascii_lowercase().as_str() {
            "s1" => Some(ScenarioKind::S1),
            "s2" => Some(ScenarioKind::S2),
            "s3" => Some(ScenarioKind::S3),
            "s4" => Some(ScenarioKind::S4),
            "s5" => Some(ScenarioKind::S5),
            _ => None,
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioKind::S1 => write!(f, "s1"),
            ScenarioKind::S2 => write!(f, "s2"),
            ScenarioKind::S3 => write!(f, "s3"),
            ScenarioKind::S4 => write!(f, "s4"),
            ScenarioKind::S5 => write!(f, "s5"),
            ScenarioKind::Misspec { ps_form: PsForm::Linear } => write!(f, "misspec(linear)"),
            ScenarioKind::Misspec { ps_form: PsForm::LinearPlusInteractions } => {
                write!(f, "misspec(interactions)")
            }
            ScenarioKind::Overlap { scale, .. } => write!(f, "overlap(scale={scale})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, n: usize, seed: u64) -> Self {
        assert!(n >= 20, "scenario sample size must be at least 20, got {n}");
        if let ScenarioKind::Overlap { scale, .. } = &kind {
            assert!(
                *scale == 1.0 || *scale == 0.2,
                "overlap scale must be 1 (bad) or 1/5 (good), got {scale}"
            );
        }
        ScenarioSpec { kind, n, seed }
    }
}

/// One drawn data set together with the quantities the generator knows
/// exactly: the assignment probabilities at the drawn covariates and the
/// scenario's estimand values (oracle-computed where no closed form exists).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub sample: ObservationalSample<f64>,
    pub true_scores: Vec<f64>,
    pub true_ate: f64,
    pub true_att: f64,
}

pub fn generate(spec: &ScenarioSpec) -> GeneratedData {
    generate_seeded(spec, spec.seed)
}

/// Generate with an overriding seed; the Monte Carlo driver uses this to run
/// one spec under many derived seeds without cloning parameter blocks.
pub fn generate_seeded(spec: &ScenarioSpec, seed: u64) -> GeneratedData {
    let mut rng = stream_rng(seed, 0);
    match &spec.kind {
        ScenarioKind::S1 => draw_s1(spec.n, &mut rng),
        ScenarioKind::S2 => draw_s2(spec.n, &mut rng),
        ScenarioKind::S3 => draw_s3(spec.n, &mut rng),
        ScenarioKind::S4 => draw_s4(spec.n, &mut rng),
        ScenarioKind::S5 => draw_s5(spec.n, &mut rng),
        ScenarioKind::Misspec { ps_form } => generate_misspec(spec.n, seed, *ps_form),
        ScenarioKind::Overlap { coeffs, pool, scale } => {
            generate_overlap(coeffs, pool, *scale, spec.n, seed)
        }
    }
}

struct Builder {
    y: Vec<f64>,
    w: Vec<bool>,
    x: Vec<f64>,
    scores: Vec<f64>,
}

impl Builder {
    fn with_capacity(n: usize, d: usize) -> Self {
        Builder {
            y: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            x: Vec::with_capacity(n * d),
            scores: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, xrow: &[f64], score: f64, treated: bool, y: f64) {
        self.x.extend_from_slice(xrow);
        self.scores.push(score);
        self.w.push(treated);
        self.y.push(y);
    }

    fn finish(self, d: usize, true_ate: f64, true_att: f64) -> GeneratedData {
        GeneratedData {
            sample: ObservationalSample::new(self.y, self.w, self.x, d),
            true_scores: self.scores,
            true_ate,
            true_att,
        }
    }
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn draw_s1(n: usize, rng: &mut ChaCha8Rng) -> GeneratedData {
    let mut b = Builder::with_capacity(n, 2);
    for _ in 0..n {
        let x1 = rng.random::<f64>() - 0.5;
        let x2 = rng.random::<f64>() - 0.5;
        let p = sigmoid(x1 + 2.0 * x2);
        let treated = rng.random::<f64>() < p;
        let e0 = std_normal(rng);
        let e1 = std_normal(rng);
        let y0 = 3.0 * x1 - 3.0 * x2 + e0;
        let y1 = 5.0 + 5.0 * x1 + x2 + e1;
        b.push(&[x1, x2], p, treated, if treated { y1 } else { y0 });
    }
    b.finish(2, S1_TRUE_ATE, S1_TRUE_ATT)
}

fn draw_s2(n: usize, rng: &mut ChaCha8Rng) -> GeneratedData {
    let mut b = Builder::with_capacity(n, 2);
    for _ in 0..n {
        let x1 = rng.random::<f64>() - 0.5;
        let x2 = rng.random::<f64>() - 0.5;
        let p = sigmoid(2.0 * x2);
        let treated = rng.random::<f64>() < p;
        let e0 = std_normal(rng);
        let e1 = std_normal(rng);
        let y0 = 10.0 * x1 + e0;
        let y1 = 5.0 - 10.0 * x1 + e1;
        b.push(&[x1, x2], p, treated, if treated { y1 } else { y0 });
    }
    b.finish(2, S2_TRUE_ATE, S2_TRUE_ATT)
}

/// Lower Cholesky draw of the block covariance (1/3)[[1,-1],[-1,2]] applied
/// to each of the two independent pairs.
fn draw_block_normal(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let s = 3f64.sqrt().recip();
    let z1 = std_normal(rng);
    let z2 = std_normal(rng);
    let z3 = std_normal(rng);
    let z4 = std_normal(rng);
    [z1 * s, (z2 - z1) * s, z3 * s, (z4 - z3) * s]
}

fn draw_s3(n: usize, rng: &mut ChaCha8Rng) -> GeneratedData {
    let mut b = Builder::with_capacity(n, 4);
    for _ in 0..n {
        let x = draw_block_normal(rng);
        let p = sigmoid(x[0] - 3.0 * x[1] + 2.0 * x[2] + x[3]);
        let treated = rng.random::<f64>() < p;
        let e = std_normal(rng);
        let t = x.iter().sum::<f64>();
        let m = 0.4
            + 0.25 * (8.0 * t - 5.0).sin()
            + 0.4 * (-16.0 * (4.0 * t - 2.5).powi(2)).exp();
        let y = m + if treated { 1.0 } else { 0.0 } + e;
        b.push(&x, p, treated, y);
    }
    b.finish(4, S3_S4_TRUE_EFFECT, S3_S4_TRUE_EFFECT)
}

fn draw_s4(n: usize, rng: &mut ChaCha8Rng) -> GeneratedData {
    let mut b = Builder::with_capacity(n, 4);
    for _ in 0..n {
        let x = draw_block_normal(rng);
        let t = x.iter().sum::<f64>();
        let p = sigmoid(t);
        let treated = rng.random::<f64>() < p;
        let e = std_normal(rng);
        let m = 0.15 + 0.7 * sigmoid(2f64.sqrt() * t);
        let y = m + if treated { 1.0 } else { 0.0 } + e;
        b.push(&x, p, treated, y);
    }
    b.finish(4, S3_S4_TRUE_EFFECT, S3_S4_TRUE_EFFECT)
}

fn draw_s5(n: usize, rng: &mut ChaCha8Rng) -> GeneratedData {
    let mut b = Builder::with_capacity(n, 3);
    for _ in 0..n {
        let x1 = std_normal(rng);
        let x2 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let x3 = std_normal(rng);
        let p = sigmoid(2.0 * x1 + x2 - 3.0 * x3 + 3.0);
        let treated = rng.random::<f64>() < p;
        let e0 = std_normal(rng);
        let e1 = std_normal(rng);
        let y0 = (1.0 + x1 + 0.5 * x2).sin() + e0;
        let y1 = (2.0 + x1 + 0.5 * x2).sin() + e1;
        b.push(&[x1, x2, x3], p, treated, if treated { y1 } else { y0 });
    }
    b.finish(3, S5_TRUE_ATE, S5_TRUE_ATT)
}

/// Misspecification design: linear outcome in the covariate sum Z, latent
/// assignment Z - U with standard logistic U, constant unit effect. The
/// `ps_form` flag travels with the scenario and only changes the fitted design
/// (see [`interaction_expand`]), never the drawn data.
pub fn generate_misspec(n: usize, seed: u64, _ps_form: PsForm) -> GeneratedData {
    let mut rng = stream_rng(seed, 0);
    let mut b = Builder::with_capacity(n, 4);
    for _ in 0..n {
        let x = draw_block_normal(&mut rng);
        let z = x.iter().sum::<f64>();
        // Pr(Z - U > 0) for standard logistic U is the logistic cdf at Z.
        let p = sigmoid(z);
        let treated = rng.random::<f64>() < p;
        let e = std_normal(&mut rng);
        let y0 = z + e;
        let y = y0 + if treated { 1.0 } else { 0.0 };
        b.push(&x, p, treated, y);
    }
    b.finish(4, MISSPEC_TRUE_EFFECT, MISSPEC_TRUE_EFFECT)
}

/// Append all pairwise products to a row-major covariate matrix, returning
/// the widened matrix and its column count.
pub fn interaction_expand(x: &[f64], n: usize, d: usize) -> (Vec<f64>, usize) {
    assert_eq!(x.len(), n * d, "matrix storage does not match n x d");
    let wide = d + d * (d - 1) / 2;
    let mut out = Vec::with_capacity(n * wide);
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        out.extend_from_slice(row);
        for a in 0..d {
            for b in a + 1..d {
                out.push(row[a] * row[b]);
            }
        }
    }
    (out, wide)
}

/// Overlap design: covariate rows resampled from a pool, latent assignment
/// scale * (alpha + beta'z) - U, and one linear outcome regression per arm
/// with independent standard normal errors. Scale 1 leaves the fitted index
/// at full strength (bad overlap); 1/5 compresses the scores toward 1/2
/// (good overlap). `true_att` is the benchmark carried in the coefficient
/// block; `true_ate` averages the regression contrast over the pool.
pub fn generate_overlap(
    coeffs: &OverlapCoeffs,
    pool: &CovariatePool,
    scale: f64,
    n: usize,
    seed: u64,
) -> GeneratedData {
    let d = pool.dim();
    assert!(scale.is_finite(), "overlap scale must be finite");
    assert_eq!(coeffs.beta.len(), d, "assignment block does not match pool width");
    assert_eq!(coeffs.delta0.len(), d + 1, "control outcome block needs an intercept plus {d} slopes");
    assert_eq!(coeffs.delta1.len(), d + 1, "treated outcome block needs an intercept plus {d} slopes");

    let mut rng = stream_rng(seed, 0);
    let mut b = Builder::with_capacity(n, d);
    for _ in 0..n {
        let z = pool.row(rng.random_range(0..pool.rows()));
        let index = scale * (coeffs.alpha + dot(&coeffs.beta, z));
        let p = sigmoid(index);
        let treated = rng.random::<f64>() < p;
        let e0 = std_normal(&mut rng);
        let e1 = std_normal(&mut rng);
        let y0 = coeffs.delta0[0] + dot(&coeffs.delta0[1..], z) + e0;
        let y1 = coeffs.delta1[0] + dot(&coeffs.delta1[1..], z) + e1;
        b.push(z, p, treated, if treated { y1 } else { y0 });
    }

    let mut contrast = 0.0;
    for i in 0..pool.rows() {
        let z = pool.row(i);
        contrast += coeffs.delta1[0] - coeffs.delta0[0]
            + dot(&coeffs.delta1[1..], z)
            - dot(&coeffs.delta0[1..], z);
    }
    let true_ate = contrast / pool.rows() as f64;
    b.finish(d, true_ate, coeffs.att_benchmark)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Packaged default coefficient block for data-free overlap runs: a constant
/// shift of 2 between the arm regressions, so both estimands equal 2 exactly.
/// The index coefficients are strong enough that scale 1 separates the arms
/// badly while scale 1/5 keeps them comparable.
pub fn default_overlap_coeffs() -> OverlapCoeffs {
    let delta0 = vec![1.0, 2.0, -1.0, 0.5, 3.0];
    let mut delta1 = delta0.clone();
    delta1[0] += 2.0;
    OverlapCoeffs {
        alpha: 0.3,
        beta: vec![4.8, -3.2, 6.0, 3.6],
        delta0,
        delta1,
        att_benchmark: 2.0,
    }
}

/// Synthetic covariate pool for the packaged overlap default: two correlated
/// normals (correlation 0.3), an indicator, and a standardized chi-square to
/// give the assignment index a skewed tail.
pub fn synthetic_overlap_pool(rows: usize, seed: u64) -> CovariatePool {
    assert!(rows > 0, "pool needs at least one row");
    let mut rng = stream_rng(seed, 0);
    let mut values = Vec::with_capacity(rows * 4);
    for _ in 0..rows {
        let z1 = std_normal(&mut rng);
        let z2 = std_normal(&mut rng);
        let v1 = z1;
        let v2 = 0.3 * z1 + (1.0 - 0.09f64).sqrt() * z2;
        let v3 = if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 };
        let chi: f64 = (0..4).map(|_| std_normal(&mut rng).powi(2)).sum();
        let v4 = (chi - 4.0) / 8f64.sqrt();
        values.extend_from_slice(&[v1, v2, v3, v4]);
    }
    CovariatePool::new(values, rows, 4)
}
