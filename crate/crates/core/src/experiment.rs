//! Rate experiments: sweep `δ`, pick `N`, perturb, reconstruct, measure.

use std::io::{Read, Write};
use std::path::PathBuf;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::metrics::{
    decompose_with, DerivativeReference, ErrorReport, LqNorm, MetricSpec, DEFAULT_GRID_SIZE,
    DEFAULT_NODES_PER_PANEL, DEFAULT_PANELS,
};
use crate::noise::{check_delta, perturb, NoiseSpec};
use crate::rates::{
    linear_fit, log_log_fit, propagation_exponent, theoretical_exponent, truncation_exponent,
    ErrorComponent, LinearFit, RateFit, RateModel, Regressor,
};
use crate::series::{edge_function, edge_tail_mass, LegendreSeries, WienerParams};
use crate::truncation::{coefficient_count, DerivativePlan};

/// Minimum ratio between the truth degree and the largest truncation level.
pub const TRUTH_OVERSAMPLING: usize = 4;

/// Default noise levels: 7 points log-spaced from 1e−2 to 1e−8.
pub fn default_delta_list() -> Vec<f64> {
    (2..=8).map(|e| 10f64.powi(-e)).collect()
}

/// Full description of a rate experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub wiener: WienerParams,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Truth degree `K`. Defaults to `4 · max N` for the edge-function truth.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub truth_degree: Option<usize>,
    #[serde(default = "default_order")]
    pub r: usize,
    pub p: Exponent,
    #[serde(default = "default_q_list")]
    pub q_list: Vec<Exponent>,
    #[serde(default = "default_delta_list")]
    pub delta_list: Vec<f64>,
    #[serde(rename = "C_N", default = "default_c_n")]
    pub c_n: f64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub truth: TruthConfig,
    #[serde(default)]
    pub metric: Discretization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_eps() -> f64 {
    0.01
}

fn default_order() -> usize {
    1
}

fn default_c_n() -> f64 {
    1.0
}

fn default_q_list() -> Vec<Exponent> {
    vec![Exponent::TWO, Exponent::INFINITY]
}

/// Where the noise comes from in each row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NoiseConfig {
    /// `f^δ = f`; useful for exactness checks.
    None,
    /// Random direction; row `i` uses a stream derived from `(seed, i)`.
    Random { seed: u64 },
    Adversarial {
        #[serde(default)]
        indices: IndexSelection,
    },
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::Adversarial {
            indices: IndexSelection::Top,
        }
    }
}

/// Index set for adversarial noise. JSON: `"top"`, `"all"`, or a list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SelectionRepr", into = "SelectionRepr")]
pub enum IndexSelection {
    /// `{N}`, the top retained index of each row.
    #[default]
    Top,
    /// Every stored index `0..=K`.
    All,
    Explicit(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SelectionRepr {
    Name(String),
    List(Vec<usize>),
}

impl TryFrom<SelectionRepr> for IndexSelection {
    type Error = Error;

    fn try_from(repr: SelectionRepr) -> Result<Self> {
        match repr {
            SelectionRepr::Name(name) => match name.as_str() {
                "top" => Ok(IndexSelection::Top),
                "all" => Ok(IndexSelection::All),
                other => Err(Error::invalid(format!("unknown index selection {other:?}"))),
            },
            SelectionRepr::List(list) => Ok(IndexSelection::Explicit(list)),
        }
    }
}

impl From<IndexSelection> for SelectionRepr {
    fn from(sel: IndexSelection) -> Self {
        match sel {
            IndexSelection::Top => SelectionRepr::Name("top".into()),
            IndexSelection::All => SelectionRepr::Name("all".into()),
            IndexSelection::Explicit(list) => SelectionRepr::List(list),
        }
    }
}

/// The exact function of the experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TruthConfig {
    /// [`edge_function`] of the configured class.
    #[default]
    Edge,
    /// An explicit coefficient vector (e.g. a polynomial of known degree).
    Series { coeffs: Vec<f64> },
}

/// Discretization of the output norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Discretization {
    pub grid_size: usize,
    pub panels: usize,
    pub nodes_per_panel: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            grid_size: DEFAULT_GRID_SIZE,
            panels: DEFAULT_PANELS,
            nodes_per_panel: DEFAULT_NODES_PER_PANEL,
        }
    }
}

impl Discretization {
    fn metric(&self, q: Exponent) -> Result<MetricSpec> {
        let spec = MetricSpec {
            q,
            grid_size: self.grid_size,
            panels: self.panels,
            nodes_per_panel: self.nodes_per_panel,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl ExperimentConfig {
    /// Configuration with defaults for everything but the class and noise index.
    pub fn new(wiener: WienerParams, p: Exponent) -> Self {
        ExperimentConfig {
            wiener,
            eps: default_eps(),
            truth_degree: None,
            r: default_order(),
            p,
            q_list: default_q_list(),
            delta_list: default_delta_list(),
            c_n: default_c_n(),
            noise: NoiseConfig::default(),
            truth: TruthConfig::default(),
            metric: Discretization::default(),
            output: None,
        }
    }

    pub fn model(&self) -> RateModel {
        RateModel {
            mu: self.wiener.mu,
            s: self.wiener.s,
            p: self.p,
            r: self.r,
        }
    }

    fn plan(&self) -> Result<DerivativePlan> {
        DerivativePlan::rule(self.r, self.c_n)
    }

    fn resolve(&self, delta: f64) -> Result<DerivativePlan> {
        self.plan()?
            .resolve(delta, self.wiener.mu, self.p, self.wiener.s)
            .map_err(|e| Error::at_delta(delta, e))
    }

    /// Checks every invariant and returns the resolved truth degree.
    pub fn validate(&self) -> Result<usize> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("edge margin eps must be positive, got {}", self.eps)));
        }
        self.plan()?;
        if self.q_list.is_empty() {
            return Err(Error::invalid("q_list is empty"));
        }
        for &q in &self.q_list {
            theoretical_exponent(self.wiener.mu, self.wiener.s, self.p, q, self.r)?;
        }
        if self.delta_list.is_empty() {
            return Err(Error::invalid("delta_list is empty"));
        }
        for &d in &self.delta_list {
            check_delta(d)?;
        }
        if self.delta_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("delta_list must be strictly decreasing"));
        }
        self.discretization_check()?;

        let mut n_max = 0;
        for &d in &self.delta_list {
            n_max = n_max.max(self.resolve(d)?.n().expect("resolved"));
        }
        self.truth_degree_for(n_max)
    }

    fn discretization_check(&self) -> Result<()> {
        for &q in &self.q_list {
            self.metric.metric(q)?;
        }
        Ok(())
    }

    fn truth_degree_for(&self, n_max: usize) -> Result<usize> {
        let k = match &self.truth {
            TruthConfig::Edge => {
                let needed = TRUTH_OVERSAMPLING * n_max;
                match self.truth_degree {
                    Some(k) if k < needed => {
                        return Err(Error::invalid(format!(
                            "truth degree K = {k} must be at least {TRUTH_OVERSAMPLING} x max N = {needed}"
                        )))
                    }
                    Some(k) => k,
                    None => needed,
                }
            }
            TruthConfig::Series { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::invalid("truth series is empty"));
                }
                let k = coeffs.len() - 1;
                if let Some(given) = self.truth_degree.filter(|&g| g != k) {
                    return Err(Error::invalid(format!(
                        "K = {given} disagrees with the {}-term truth series",
                        coeffs.len()
                    )));
                }
                k
            }
        };
        if let NoiseConfig::Adversarial {
            indices: IndexSelection::Explicit(list),
        } = &self.noise
        {
            if list.is_empty() {
                return Err(Error::invalid("adversarial index set is empty"));
            }
            if let Some(&bad) = list.iter().find(|&&i| i > k) {
                return Err(Error::invalid(format!("adversarial index {bad} exceeds K = {k}")));
            }
        }
        Ok(k)
    }

    fn truth_series(&self, k: usize) -> Result<LegendreSeries> {
        match &self.truth {
            TruthConfig::Edge => edge_function(self.wiener, self.eps, k),
            TruthConfig::Series { coeffs } => LegendreSeries::new(coeffs.clone()),
        }
    }
}

/// One row: a noise level, its truncation level, and the errors per metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub count: usize,
    /// One report per entry of the table's `q_list`, in order.
    pub reports: Vec<ErrorReport>,
}

/// Result table of [`run_experiment`], rows ordered by decreasing `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    /// Parameters fixing the theoretical exponents; absent for tables read
    /// back from CSV.
    pub model: Option<RateModel>,
    pub q_list: Vec<Exponent>,
    /// Truth degree used.
    #[serde(rename = "K")]
    pub truth_degree: usize,
    /// Weighted mass an infinite continuation of the edge truth would carry
    /// beyond `K`; `None` for explicit truths.
    pub omitted_tail_mass: Option<f64>,
    pub rows: Vec<ExperimentRow>,
}

/// Noise for one row, given its resolved truncation level.
struct RowNoise<'a> {
    config: &'a ExperimentConfig,
    k: usize,
}

impl RowNoise<'_> {
    fn spec(&self, delta: f64, n: usize, row: usize) -> Result<Option<NoiseSpec>> {
        let p = self.config.p;
        match &self.config.noise {
            NoiseConfig::None => Ok(None),
            NoiseConfig::Random { seed } => {
                NoiseSpec::random(p, delta, row_seed(*seed, row), Some(self.k)).map(Some)
            }
            NoiseConfig::Adversarial { indices } => {
                let indices = match indices {
                    IndexSelection::Top => vec![n],
                    IndexSelection::All => (0..=self.k).collect(),
                    IndexSelection::Explicit(list) => list.clone(),
                };
                NoiseSpec::adversarial(p, delta, indices).map(Some)
            }
        }
    }
}

/// Seed for row `row`, from an independent ChaCha stream of `seed`.
fn row_seed(seed: u64, row: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng.next_u64()
}

/// Shared per-experiment state.
struct Pipeline<'a> {
    truth: LegendreSeries,
    reference: LegendreSeries,
    noise: RowNoise<'a>,
}

impl Pipeline<'_> {
    /// Reports for one `(δ, plan)` pair against each norm.
    fn measure(
        &self,
        delta: f64,
        plan: &DerivativePlan,
        row: usize,
        norms: &[LqNorm],
    ) -> Result<Vec<ErrorReport>> {
        let n = plan.n().expect("resolved plan");
        let (exact, noisy) = match self.noise.spec(delta, n, row)? {
            None => (self.truth.clone(), self.truth.clone()),
            Some(spec) => {
                let noisy = perturb(&self.truth, &spec)?.perturbed;
                // perturb may extend past K when noise indices exceed the truth.
                let mut exact = self.truth.clone().into_coeffs();
                exact.resize(noisy.len(), 0.0);
                (LegendreSeries::new(exact)?, noisy)
            }
        };
        norms
            .iter()
            .map(|norm| {
                decompose_with(
                    &exact,
                    &noisy,
                    plan,
                    DerivativeReference::Series(&self.reference),
                    norm,
                    delta,
                )
            })
            .collect()
    }
}

fn pipeline(config: &ExperimentConfig, k: usize) -> Result<Pipeline<'_>> {
    let truth = config.truth_series(k)?;
    let reference = truth.differentiate_n(config.r)?;
    Ok(Pipeline {
        truth,
        reference,
        noise: RowNoise { config, k },
    })
}

fn omitted_tail(config: &ExperimentConfig, k: usize) -> Result<Option<f64>> {
    match config.truth {
        TruthConfig::Edge => edge_tail_mass(config.wiener, config.eps, k).map(Some),
        TruthConfig::Series { .. } => Ok(None),
    }
}

/// Runs the full `δ` sweep. Rows are computed in parallel; the output is
/// independent of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    let k = config.validate()?;
    let pipeline = pipeline(config, k)?;
    let norms = config
        .q_list
        .iter()
        .map(|&q| LqNorm::new(&config.metric.metric(q)?))
        .collect::<Result<Vec<_>>>()?;

    let rows = config
        .delta_list
        .par_iter()
        .enumerate()
        .map(|(row, &delta)| {
            let plan = config.resolve(delta)?;
            let reports = pipeline
                .measure(delta, &plan, row, &norms)
                .map_err(|e| Error::at_delta(delta, e))?;
            Ok(ExperimentRow {
                delta,
                n: plan.n().expect("resolved"),
                count: coefficient_count(&plan)?,
                reports,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ExperimentTable {
        model: Some(config.model()),
        q_list: config.q_list.clone(),
        truth_degree: k,
        omitted_tail_mass: omitted_tail(config, k)?,
        rows,
    })
}

impl ExperimentTable {
    fn q_index(&self, q: Exponent) -> Result<usize> {
        self.q_list
            .iter()
            .position(|&x| x == q)
            .ok_or_else(|| Error::invalid(format!("table has no column for q = {q}")))
    }

    /// `(δ, report)` pairs for metric `q`.
    pub fn column(&self, q: Exponent) -> Result<Vec<(f64, &ErrorReport)>> {
        let i = self.q_index(q)?;
        Ok(self.rows.iter().map(|row| (row.delta, &row.reports[i])).collect())
    }

    /// Writes the table as CSV: `delta,N,count`, then
    /// `truncation_q<q>,propagation_q<q>,total_q<q>` for each metric.
    /// Reals carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["delta".to_string(), "N".into(), "count".into()];
        for q in &self.q_list {
            for part in ["truncation", "propagation", "total"] {
                header.push(format!("{part}_q{}", q.label()));
            }
        }
        out.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![fmt_real(row.delta), row.n.to_string(), row.count.to_string()];
            for rep in &row.reports {
                record.push(fmt_real(rep.truncation_error));
                record.push(fmt_real(rep.propagation_error));
                record.push(fmt_real(rep.total_error));
            }
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ASCII"))
    }

    /// Reads a table written by [`ExperimentTable::write_csv`]. The model
    /// parameters are not part of the CSV and come back as `None`; `r` in
    /// the reports is set to 0 for the same reason.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        if header.len() < 3 || (header.len() - 3) % 3 != 0 || &header[0] != "delta" {
            return Err(Error::invalid("unexpected results CSV header"));
        }
        let mut q_list = Vec::new();
        for chunk in 0..(header.len() - 3) / 3 {
            let name = &header[3 + 3 * chunk];
            let label = name
                .strip_prefix("truncation_q")
                .ok_or_else(|| Error::invalid(format!("unexpected column {name:?}")))?;
            q_list.push(label.parse::<Exponent>()?);
        }
        let mut rows = Vec::new();
        for record in input.records() {
            let record = record?;
            let real = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad number {:?}", &record[i])))
            };
            let int = |i: usize| -> Result<usize> {
                record[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad integer {:?}", &record[i])))
            };
            let delta = real(0)?;
            let n = int(1)?;
            let reports = q_list
                .iter()
                .enumerate()
                .map(|(j, &q)| {
                    Ok(ErrorReport {
                        truncation_error: real(3 + 3 * j)?,
                        propagation_error: real(4 + 3 * j)?,
                        total_error: real(5 + 3 * j)?,
                        q,
                        r: 0,
                        n,
                        delta,
                        parseval_discrepancy: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ExperimentRow {
                delta,
                n,
                count: int(2)?,
                reports,
            });
        }
        Ok(ExperimentTable {
            model: None,
            q_list,
            truth_degree: 0,
            omitted_tail_mass: None,
            rows,
        })
    }
}

/// `{:.16e}`: 17 significant digits, round-trips every `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Fits `log10(total_error)` against `log10(δ)` for metric `q`.
pub fn fit_rate(table: &ExperimentTable, q: Exponent) -> Result<RateFit> {
    let column = table.column(q)?;
    if column.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 rows, table has {}",
            column.len()
        )));
    }
    if column.iter().all(|(_, rep)| rep.total_error == 0.0) {
        return Err(Error::DegenerateFit("noiseless table, nothing to fit".into()));
    }
    let deltas: Vec<f64> = column.iter().map(|(d, _)| *d).collect();
    let errors: Vec<f64> = column.iter().map(|(_, rep)| rep.total_error).collect();
    let fit = log_log_fit(&deltas, &errors)?;
    let theoretical = table
        .model
        .map(|m| theoretical_exponent(m.mu, m.s, m.p, q, m.r))
        .transpose()?;
    Ok(RateFit::from_fit(
        fit,
        theoretical,
        q,
        ErrorComponent::Total,
        Regressor::Delta,
    ))
}

/// Slope of `log10 N` against `log10(1/δ)` over the table rows.
pub fn coefficient_count_fit(table: &ExperimentTable) -> Result<LinearFit> {
    let x: Vec<f64> = table.rows.iter().map(|r| (1.0 / r.delta).log10()).collect();
    let y: Vec<f64> = table.rows.iter().map(|r| (r.n as f64).log10()).collect();
    linear_fit(&x, &y)
}

/// Truncation and propagation fits in one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentFits {
    pub truncation: RateFit,
    pub propagation: RateFit,
}

/// Result of [`component_scaling`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentScaling {
    pub delta: f64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    /// Uniform metric (`q = ∞`).
    pub sup: ComponentFits,
    pub l2: ComponentFits,
    /// `[sup, l2]` reports for each `N`.
    pub reports: Vec<[ErrorReport; 2]>,
}

/// Sweeps `N` at fixed `δ` and fits each error component against `N` in the
/// uniform and `L_2` metrics, next to the predicted component exponents.
pub fn component_scaling(
    config: &ExperimentConfig,
    fixed_delta: f64,
    n_list: &[usize],
) -> Result<ComponentScaling> {
    check_delta(fixed_delta)?;
    if n_list.len() < 2 {
        return Err(Error::invalid("component scaling needs at least two truncation levels"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("N_list must be strictly increasing"));
    }
    if n_list[0] < config.r + 1 {
        return Err(Error::invalid(format!("every N must be at least r + 1 = {}", config.r + 1)));
    }
    let n_max = *n_list.last().expect("non-empty");
    let k = config.truth_degree_for(n_max)?;
    let pipeline = pipeline(config, k)?;
    let sup = LqNorm::new(&config.metric.metric(Exponent::INFINITY)?)?;
    let l2 = LqNorm::new(&config.metric.metric(Exponent::TWO)?)?;
    let norms = [sup, l2];

    let reports = n_list
        .par_iter()
        .enumerate()
        .map(|(row, &n)| {
            let plan = DerivativePlan::fixed(config.r, n)?;
            let mut reps = pipeline.measure(fixed_delta, &plan, row, &norms)?.into_iter();
            let a = reps.next().expect("sup report");
            let b = reps.next().expect("l2 report");
            Ok([a, b])
        })
        .collect::<Result<Vec<_>>>()?;

    let levels: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let fits = |slot: usize, q: Exponent| -> Result<ComponentFits> {
        let trunc: Vec<f64> = reports.iter().map(|r| r[slot].truncation_error).collect();
        let prop: Vec<f64> = reports.iter().map(|r| r[slot].propagation_error).collect();
        let m = config.model();
        Ok(ComponentFits {
            truncation: RateFit::from_fit(
                log_log_fit(&levels, &trunc)?,
                Some(truncation_exponent(m.mu, m.s, q, m.r)),
                q,
                ErrorComponent::Truncation,
                Regressor::TruncationLevel,
            ),
            propagation: RateFit::from_fit(
                log_log_fit(&levels, &prop)?,
                Some(propagation_exponent(m.p, q, m.r)),
                q,
                ErrorComponent::Propagation,
                Regressor::TruncationLevel,
            ),
        })
    };

    Ok(ComponentScaling {
        delta: fixed_delta,
        n_list: n_list.to_vec(),
        sup: fits(0, Exponent::INFINITY)?,
        l2: fits(1, Exponent::TWO)?,
        reports,
    })
}
