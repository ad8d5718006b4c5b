//! Subject-level trial data: CSV ingestion, validation, tertile
//! discretization and region partitioning.
//!
//! Storage is columnar. Region labels are interned; each subject stores the
//! index of its label.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment indicator T ∈ {−1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Treatment,
    Control,
}

impl Arm {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Arm::Treatment => 1.0,
            Arm::Control => -1.0,
        }
    }

    pub fn from_sign(t: i32) -> Option<Arm> {
        match t {
            1 => Some(Arm::Treatment),
            -1 => Some(Arm::Control),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    Continuous,
    Binary,
    Survival { tau: f64 },
}

impl Endpoint {
    pub fn is_survival(&self) -> bool {
        matches!(self, Endpoint::Survival { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub outcome: f64,
    pub event_status: Option<bool>,
    pub treatment: Arm,
    pub region: String,
    pub covariates: Vec<f64>,
}

/// Where tertile cut points are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileScope {
    /// One set of cuts from the pooled all-region sample.
    #[default]
    Pooled,
    /// Separate cuts within each region.
    PerRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CutPoints {
    Pooled(Vec<(f64, f64)>),
    /// Indexed by region, then covariate.
    PerRegion(Vec<Vec<(f64, f64)>>),
}

#[derive(Debug, Clone)]
pub struct TrialDataset {
    endpoint: Endpoint,
    covariate_names: Vec<String>,
    pi1: f64,
    outcome: Vec<f64>,
    status: Option<Vec<bool>>,
    treatment: Vec<Arm>,
    region: Vec<u32>,
    region_labels: Vec<String>,
    /// One column per covariate.
    covariates: Vec<Vec<f64>>,
    cut_points: Option<CutPoints>,
    notes: Vec<String>,
}

impl TrialDataset {
    pub fn from_records(
        records: Vec<SubjectRecord>,
        endpoint: Endpoint,
        covariate_names: Vec<String>,
        pi1: f64,
    ) -> Result<Self> {
        let p = covariate_names.len();
        let mut builder = DatasetBuilder::new(endpoint, covariate_names, pi1)?;
        for (i, r) in records.into_iter().enumerate() {
            if r.covariates.len() != p {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has {} covariates, expected {p}",
                    r.covariates.len()
                )));
            }
            builder.push(r.outcome, r.event_status, r.treatment, &r.region, &r.covariates)?;
        }
        builder.finish()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn endpoint(&self) -> Endpoint {
        self.endpoint
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    #[inline]
    pub fn outcomes(&self) -> &[f64] {
        &self.outcome
    }

    pub fn status(&self) -> Option<&[bool]> {
        self.status.as_deref()
    }

    #[inline]
    pub fn treatments(&self) -> &[Arm] {
        &self.treatment
    }

    #[inline]
    pub fn covariate(&self, s: usize) -> &[f64] {
        &self.covariates[s]
    }

    pub fn region_labels(&self) -> &[String] {
        &self.region_labels
    }

    pub fn region_of(&self, i: usize) -> &str {
        &self.region_labels[self.region[i] as usize]
    }

    pub fn is_discretized(&self) -> bool {
        self.cut_points.is_some()
    }

    pub fn cut_points(&self) -> Option<&CutPoints> {
        self.cut_points.as_ref()
    }

    /// Discretized level of covariate `s` for subject `i`.
    #[inline]
    pub fn level(&self, s: usize, i: usize) -> usize {
        self.covariates[s][i] as usize
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn record(&self, i: usize) -> SubjectRecord {
        SubjectRecord {
            outcome: self.outcome[i],
            event_status: self.status.as_ref().map(|s| s[i]),
            treatment: self.treatment[i],
            region: self.region_of(i).to_string(),
            covariates: self.covariates.iter().map(|c| c[i]).collect(),
        }
    }

    /// Copy with the outcome column replaced and the endpoint changed.
    pub fn with_outcomes(&self, outcome: Vec<f64>, endpoint: Endpoint) -> Result<Self> {
        if outcome.len() != self.n() {
            return Err(Error::InvalidArgument("outcome length differs from dataset".into()));
        }
        let mut out = self.clone();
        out.outcome = outcome;
        out.endpoint = endpoint;
        if !endpoint.is_survival() {
            out.status = None;
        }
        Ok(out)
    }

    pub fn with_pi1(mut self, pi1: f64) -> Result<Self> {
        check_pi1(pi1)?;
        self.pi1 = pi1;
        Ok(self)
    }

    pub(crate) fn push_note(&mut self, note: String) {
        log::warn!("{note}");
        self.notes.push(note);
    }
}

fn check_pi1(pi1: f64) -> Result<()> {
    if pi1 > 0.0 && pi1 < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "randomization probability must lie in (0, 1), got {pi1}"
        )))
    }
}

/// Incremental constructor used by the CSV loader and the simulator.
#[derive(Debug)]
pub struct DatasetBuilder {
    ds: TrialDataset,
}

impl DatasetBuilder {
    pub fn new(endpoint: Endpoint, covariate_names: Vec<String>, pi1: f64) -> Result<Self> {
        check_pi1(pi1)?;
        if let Endpoint::Survival { tau } = endpoint {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
            }
        }
        let p = covariate_names.len();
        Ok(DatasetBuilder {
            ds: TrialDataset {
                endpoint,
                covariate_names,
                pi1,
                outcome: Vec::new(),
                status: endpoint.is_survival().then(Vec::new),
                treatment: Vec::new(),
                region: Vec::new(),
                region_labels: Vec::new(),
                covariates: vec![Vec::new(); p],
                cut_points: None,
                notes: Vec::new(),
            },
        })
    }

    pub fn with_capacity(mut self, n: usize) -> Self {
        self.ds.outcome.reserve(n);
        self.ds.treatment.reserve(n);
        self.ds.region.reserve(n);
        for c in &mut self.ds.covariates {
            c.reserve(n);
        }
        if let Some(s) = &mut self.ds.status {
            s.reserve(n);
        }
        self
    }

    pub fn push(
        &mut self,
        outcome: f64,
        event_status: Option<bool>,
        treatment: Arm,
        region: &str,
        covariates: &[f64],
    ) -> Result<()> {
        let ds = &mut self.ds;
        let row = ds.outcome.len();
        if !outcome.is_finite() || covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("subject record"));
        }
        match ds.endpoint {
            Endpoint::Binary if outcome != 0.0 && outcome != 1.0 => {
                return Err(Error::InvalidArgument(format!(
                    "record {row}: binary outcome must be 0 or 1, got {outcome}"
                )))
            }
            Endpoint::Survival { .. } => {
                if outcome < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "record {row}: survival time must be non-negative, got {outcome}"
                    )));
                }
                match (event_status, ds.status.as_mut()) {
                    (Some(flag), Some(col)) => col.push(flag),
                    _ => return Err(Error::MissingColumn("status".into())),
                }
            }
            _ => {}
        }
        let rid = match ds.region_labels.iter().position(|l| l == region) {
            Some(k) => k,
            None => {
                ds.region_labels.push(region.to_string());
                ds.region_labels.len() - 1
            }
        };
        ds.outcome.push(outcome);
        ds.treatment.push(treatment);
        ds.region.push(rid as u32);
        for (col, &v) in ds.covariates.iter_mut().zip(covariates) {
            col.push(v);
        }
        Ok(())
    }

    pub fn finish(self) -> Result<TrialDataset> {
        Ok(self.ds)
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Loads a trial CSV.
///
/// Continuous and binary files use the header `y,t,region,x1,...,xp`;
/// survival files use `time,status,t,region,x1,...,xp`. A treatment column
/// coded 0/1 is remapped to −1/+1 with a note on the dataset.
pub fn load_csv(path: impl AsRef<Path>, endpoint: Endpoint, pi1: f64) -> Result<TrialDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, endpoint, pi1)
}

pub fn read_csv<R: Read>(reader: R, endpoint: Endpoint, pi1: f64) -> Result<TrialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (y_col, status_col) = match endpoint {
        Endpoint::Survival { .. } => (find("time")?, Some(find("status")?)),
        _ => (find("y")?, None),
    };
    let t_col = find("t")?;
    let region_col = find("region")?;
    let reserved: Vec<usize> = [Some(y_col), status_col, Some(t_col), Some(region_col)]
        .into_iter()
        .flatten()
        .collect();
    let cov_cols: Vec<usize> = (0..headers.len()).filter(|j| !reserved.contains(j)).collect();
    let covariate_names: Vec<String> = cov_cols.iter().map(|&j| headers[j].clone()).collect();

    struct Raw {
        y: f64,
        status: Option<bool>,
        t: i32,
        region: String,
        x: Vec<f64>,
    }
    let number = |row: usize, col: usize, cell: &str| -> Result<f64> {
        cell.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::BadCell {
                row,
                column: headers[col].clone(),
                message: format!("cannot parse \"{cell}\" as a number"),
            })
    };

    let mut raw = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let y = number(row, y_col, cell(y_col))?;
        let status = match status_col {
            Some(j) => match cell(j) {
                "1" => Some(true),
                "0" => Some(false),
                other => {
                    return Err(Error::BadCell {
                        row,
                        column: headers[j].clone(),
                        message: format!("status must be 0 or 1, got \"{other}\""),
                    })
                }
            },
            None => None,
        };
        let tv = number(row, t_col, cell(t_col))?;
        if tv.fract() != 0.0 || !(-1.0..=1.0).contains(&tv) {
            return Err(Error::BadCell {
                row,
                column: headers[t_col].clone(),
                message: format!("treatment must be -1/1 (or 0/1), got {tv}"),
            });
        }
        let region = cell(region_col).to_string();
        if region.is_empty() {
            return Err(Error::BadCell {
                row,
                column: headers[region_col].clone(),
                message: "empty region label".into(),
            });
        }
        let x = cov_cols
            .iter()
            .map(|&j| number(row, j, cell(j)))
            .collect::<Result<Vec<_>>>()?;
        raw.push(Raw {
            y,
            status,
            t: tv as i32,
            region,
            x,
        });
    }

    let has_zero = raw.iter().any(|r| r.t == 0);
    let has_minus = raw.iter().any(|r| r.t == -1);
    if has_zero && has_minus {
        let row = raw.iter().position(|r| r.t == 0).unwrap() + 1;
        return Err(Error::BadCell {
            row,
            column: headers[t_col].clone(),
            message: "treatment mixes 0 and -1 codings".into(),
        });
    }

    let mut builder = DatasetBuilder::new(endpoint, covariate_names, pi1)?.with_capacity(raw.len());
    for (k, r) in raw.iter().enumerate() {
        let t = if has_zero && r.t == 0 { -1 } else { r.t };
        let arm = Arm::from_sign(t).expect("validated treatment code");
        builder.push(r.y, r.status, arm, &r.region, &r.x).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::BadCell {
                row: k + 1,
                column: headers[y_col].clone(),
                message: msg,
            },
            other => other,
        })?;
    }
    let mut ds = builder.finish()?;
    if has_zero {
        ds.push_note("treatment coded 0/1; mapped 0 -> -1 and 1 -> +1".into());
    }
    Ok(ds)
}

/// Writes the dataset in the loader's schema with shortest round-trip decimals.
pub fn write_csv<W: Write>(data: &TrialDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::new();
    if data.endpoint.is_survival() {
        header.push("time".into());
        header.push("status".into());
    } else {
        header.push("y".into());
    }
    header.push("t".into());
    header.push("region".into());
    header.extend(data.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(data.outcome[i].to_string());
        if let Some(s) = &data.status {
            row.push(if s[i] { "1" } else { "0" }.into());
        }
        row.push(if data.treatment[i] == Arm::Treatment { "1" } else { "-1" }.into());
        row.push(data.region_of(i).to_string());
        for c in &data.covariates {
            row.push(c[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

pub const LOWER_TERTILE: f64 = 0.33;
pub const UPPER_TERTILE: f64 = 0.66;

/// Inverted-cdf empirical quantile: the order statistic at ⌈np⌉.
pub fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let k = ((n as f64 * prob).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

#[inline]
fn level_of(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if v <= lo {
        0.0
    } else if v <= hi {
        1.0
    } else {
        2.0
    }
}

/// Cut points for one covariate sample. Covariates with at most three
/// distinct values are cut at their own distinct values so each keeps its
/// categories.
fn tertile_cuts(values: &[f64], name: &str) -> Result<((f64, f64), Option<String>)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct: BTreeSet<u64> = sorted.iter().map(|v| v.to_bits()).collect();
    match distinct.len() {
        0 => Err(Error::TooFewObservations { needed: 1, got: 0 }),
        1 => Err(Error::ConstantCovariate(name.to_string())),
        2 | 3 => {
            let mut u: Vec<f64> = sorted.clone();
            u.dedup();
            let note = format!(
                "covariate \"{name}\" has {} distinct values; kept as categories",
                u.len()
            );
            Ok(((u[0], u[1]), Some(note)))
        }
        _ => Ok((
            (
                empirical_quantile(&sorted, LOWER_TERTILE),
                empirical_quantile(&sorted, UPPER_TERTILE),
            ),
            None,
        )),
    }
}

/// Replaces every covariate by its tertile level 0, 1 or 2 using pooled cuts.
pub fn discretize_covariates(data: &TrialDataset) -> Result<TrialDataset> {
    discretize_covariates_with(data, QuantileScope::Pooled)
}

pub fn discretize_covariates_with(data: &TrialDataset, scope: QuantileScope) -> Result<TrialDataset> {
    if data.is_discretized() {
        return Err(Error::AlreadyDiscretized);
    }
    let mut out = data.clone();
    let mut notes = Vec::new();
    match scope {
        QuantileScope::Pooled => {
            let mut cuts = Vec::with_capacity(data.p());
            for (s, col) in out.covariates.iter_mut().enumerate() {
                let (c, note) = tertile_cuts(col, &data.covariate_names[s])?;
                notes.extend(note);
                col.iter_mut().for_each(|v| *v = level_of(*v, c));
                cuts.push(c);
            }
            out.cut_points = Some(CutPoints::Pooled(cuts));
        }
        QuantileScope::PerRegion => {
            let nreg = data.region_labels.len();
            let mut all = vec![Vec::with_capacity(data.p()); nreg];
            for (s, col) in out.covariates.iter_mut().enumerate() {
                for (g, cuts) in all.iter_mut().enumerate() {
                    let members: Vec<usize> =
                        (0..data.n()).filter(|&i| data.region[i] as usize == g).collect();
                    let vals: Vec<f64> = members.iter().map(|&i| col[i]).collect();
                    let name = format!("{} [{}]", data.covariate_names[s], data.region_labels[g]);
                    let (c, note) = tertile_cuts(&vals, &name)?;
                    notes.extend(note);
                    for &i in &members {
                        col[i] = level_of(col[i], c);
                    }
                    cuts.push(c);
                }
            }
            out.cut_points = Some(CutPoints::PerRegion(all));
        }
    }
    for n in notes {
        out.push_note(n);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionPartition {
    pub region_of_interest: String,
    pub in_region: Vec<usize>,
    pub complement: Vec<usize>,
    pub n_r: usize,
    pub n_minus_r: usize,
    pub rho_r: f64,
    /// Membership flag per subject, aligned with the dataset.
    #[serde(skip)]
    pub is_member: Vec<bool>,
}

/// Splits subjects into region `r` and its pooled complement.
pub fn partition_by_region(data: &TrialDataset, r: &str) -> Result<RegionPartition> {
    let rid = data
        .region_labels
        .iter()
        .position(|l| l == r)
        .ok_or_else(|| Error::UnknownRegion(r.to_string()))? as u32;
    let is_member: Vec<bool> = data.region.iter().map(|&g| g == rid).collect();
    let (mut in_region, mut complement) = (Vec::new(), Vec::new());
    for (i, &m) in is_member.iter().enumerate() {
        if m {
            in_region.push(i);
        } else {
            complement.push(i);
        }
    }
    if complement.is_empty() {
        return Err(Error::DegeneratePartition(format!(
            "region \"{r}\" contains every subject; complement is empty"
        )));
    }
    for (set, label) in [(&in_region, "region"), (&complement, "complement")] {
        let treated = set.iter().filter(|&&i| data.treatment[i] == Arm::Treatment).count();
        let control = set.len() - treated;
        if treated < 2 || control < 2 {
            return Err(Error::DegeneratePartition(format!(
                "{label} of \"{r}\" has {treated} treated and {control} control subjects; need at least 2 per arm"
            )));
        }
    }
    let n = data.n();
    let n_r = in_region.len();
    Ok(RegionPartition {
        region_of_interest: r.to_string(),
        n_minus_r: complement.len(),
        rho_r: n_r as f64 / n as f64,
        n_r,
        in_region,
        complement,
        is_member,
    })
}
