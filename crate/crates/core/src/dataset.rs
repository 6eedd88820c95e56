//! From joined county records to the labeled learning dataset: cumulative
//! to daily conversion, window means, death-ratio deltas, labels, scaling,
//! and the descriptive statistics the report artifacts are built from.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};

use crate::error::Error;
use crate::ingest::CountyRecord;

/// Feature order used everywhere a sample becomes a vector: dataset.csv
/// columns, scaler slots, and learner inputs all agree on this order.
pub const FEATURE_NAMES: [&str; 8] = [
    "population",
    "median_income",
    "education_level",
    "mask_never",
    "mask_rarely",
    "mask_sometimes",
    "mask_frequently",
    "mask_always",
];

/// State order dates and the window width. The order date itself belongs to
/// the after-window: the order is in force on its effective date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionSpec {
    pub order_dates: BTreeMap<String, NaiveDate>,
    pub window_days: u32,
}

impl InterventionSpec {
    pub fn new(order_dates: BTreeMap<String, NaiveDate>, window_days: u32) -> Result<Self, Error> {
        if window_days == 0 {
            return Err(Error::Config("window_days must be at least 1".to_string()));
        }
        Ok(InterventionSpec {
            order_dates,
            window_days,
        })
    }

    pub fn order_date(&self, state: &str) -> Result<NaiveDate, Error> {
        self.order_dates
            .get(state)
            .copied()
            .ok_or_else(|| Error::Config(format!("no order date configured for state {state}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    Decrease,
    Increase,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Decrease => "decrease",
            Label::Increase => "increase",
        }
    }

    /// Increase is the positive class everywhere a boolean is needed.
    pub fn is_increase(self) -> bool {
        matches!(self, Label::Increase)
    }
}

/// Sign classification of a delta before the no-change drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaClass {
    Decrease,
    Increase,
    NoChange,
}

/// One labeled county: the 8 features in source units, the death-ratio
/// delta in percentage points, and the sign label. Zero-delta counties
/// never reach this type.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub fips: String,
    pub features: [f64; 8],
    pub dr_delta: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub decrease: usize,
    pub increase: usize,
    pub no_change: usize,
}

/// Everything build_labeled_dataset produces: the retained samples, the
/// class tally, and the delta for every joined county (map emission keeps
/// the zero-delta counties).
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub samples: Vec<LabeledSample>,
    pub class_counts: ClassCounts,
    pub all_deltas: Vec<(String, f64)>,
}

/// Converts a cumulative series to daily increments. Negative increments
/// (source corrections) clip to 0 and are counted, preserving auditability;
/// prefix sums of the output reconstruct the input wherever nothing was
/// clipped.
pub fn daily_from_cumulative(cumulative: &[u64]) -> Result<(Vec<u64>, usize), Error> {
    if cumulative.len() < 2 {
        return Err(Error::TooShort);
    }
    let mut daily = Vec::with_capacity(cumulative.len() - 1);
    let mut anomalies = 0;
    for w in cumulative.windows(2) {
        if w[1] >= w[0] {
            daily.push(w[1] - w[0]);
        } else {
            daily.push(0);
            anomalies += 1;
        }
    }
    Ok((daily, anomalies))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSide {
    Before,
    After,
}

fn window_bounds(anchor: NaiveDate, side: WindowSide, window_days: u32) -> (NaiveDate, NaiveDate) {
    let days = u64::from(window_days);
    match side {
        // The window_days days ending the day before the anchor.
        WindowSide::Before => (
            anchor - Days::new(days),
            anchor - Days::new(1),
        ),
        // The anchor day and the window_days - 1 days after it.
        WindowSide::After => (anchor, anchor + Days::new(days - 1)),
    }
}

/// Mean of `daily` over one window. `daily_start` is the date of
/// `daily[0]`. The whole window must be covered by the series.
pub fn window_mean(
    daily: &[u64],
    daily_start: NaiveDate,
    anchor: NaiveDate,
    side: WindowSide,
    window_days: u32,
) -> Result<f64, Error> {
    let (lo, hi) = window_bounds(anchor, side, window_days);
    let last = daily_start + Days::new(daily.len() as u64 - 1);
    if lo < daily_start || hi > last {
        let missing = if lo < daily_start && hi > last {
            format!("{lo}..{hi}")
        } else if lo < daily_start {
            format!("{lo}..{}", (daily_start - Days::new(1)).min(hi))
        } else {
            format!("{}..{hi}", (last + Days::new(1)).max(lo))
        };
        return Err(Error::WindowOutOfRange { missing });
    }
    let start_idx = (lo - daily_start).num_days() as usize;
    let sum: u64 = daily[start_idx..start_idx + window_days as usize].iter().sum();
    Ok(sum as f64 / f64::from(window_days))
}

/// Death-ratio delta for one county around its state's order date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeathRatioDelta {
    pub ratio_before: f64,
    pub ratio_after: f64,
    pub delta: f64,
    pub case_anomalies: usize,
    pub death_anomalies: usize,
}

/// ratio = 100 x (mean daily deaths) / (mean daily cases) per window, with
/// a zero-cases window defining ratio 0; delta = after - before.
pub fn death_ratio_delta(
    record: &CountyRecord,
    intervention: &InterventionSpec,
) -> Result<DeathRatioDelta, Error> {
    let anchor = intervention.order_date(&record.series.state)?;
    let (daily_cases, case_anomalies) = daily_from_cumulative(&record.series.cumulative_cases)?;
    let (daily_deaths, death_anomalies) = daily_from_cumulative(&record.series.cumulative_deaths)?;
    // daily[i] lands on dates[i + 1]: it is the increment observed that day.
    let daily_start = record.series.dates[1];
    let w = intervention.window_days;

    let ratio = |side: WindowSide| -> Result<f64, Error> {
        let mc = window_mean(&daily_cases, daily_start, anchor, side, w)?;
        let md = window_mean(&daily_deaths, daily_start, anchor, side, w)?;
        Ok(if mc == 0.0 { 0.0 } else { 100.0 * md / mc })
    };

    let ratio_before = ratio(WindowSide::Before)?;
    let ratio_after = ratio(WindowSide::After)?;
    Ok(DeathRatioDelta {
        ratio_before,
        ratio_after,
        delta: ratio_after - ratio_before,
        case_anomalies,
        death_anomalies,
    })
}

pub fn label_from_delta(dr_delta: f64) -> DeltaClass {
    debug_assert!(dr_delta.is_finite());
    if dr_delta < 0.0 {
        DeltaClass::Decrease
    } else if dr_delta > 0.0 {
        DeltaClass::Increase
    } else {
        DeltaClass::NoChange
    }
}

fn features_of(record: &CountyRecord) -> [f64; 8] {
    let c = &record.covariates;
    [
        c.population as f64,
        c.median_income,
        c.education_level,
        c.mask_never,
        c.mask_rarely,
        c.mask_sometimes,
        c.mask_frequently,
        c.mask_always,
    ]
}

/// Labels every joined county and drops the zero-delta ones from the
/// sample list (they stay in the class tally and the delta list).
/// Samples keep the records' FIPS ordering.
pub fn build_labeled_dataset(
    records: &[CountyRecord],
    intervention: &InterventionSpec,
) -> Result<DatasetBuild, Error> {
    let mut samples = Vec::new();
    let mut counts = ClassCounts::default();
    let mut all_deltas = Vec::with_capacity(records.len());
    for record in records {
        let dr = death_ratio_delta(record, intervention)?;
        all_deltas.push((record.series.fips.clone(), dr.delta));
        match label_from_delta(dr.delta) {
            DeltaClass::NoChange => counts.no_change += 1,
            DeltaClass::Decrease => {
                counts.decrease += 1;
                samples.push(LabeledSample {
                    fips: record.series.fips.clone(),
                    features: features_of(record),
                    dr_delta: dr.delta,
                    label: Label::Decrease,
                });
            }
            DeltaClass::Increase => {
                counts.increase += 1;
                samples.push(LabeledSample {
                    fips: record.series.fips.clone(),
                    features: features_of(record),
                    dr_delta: dr.delta,
                    label: Label::Increase,
                });
            }
        }
    }
    Ok(DatasetBuild {
        samples,
        class_counts: counts,
        all_deltas,
    })
}

/// Min-max parameters for the features plus the max-abs parameter for the
/// output, fitted on the training set only. Transforms never clamp, so
/// out-of-range test values land outside [0, 1] by design.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub output_max_abs: f64,
}

impl ScalerParams {
    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// A feature with max == min maps everything to 0.
    pub fn degenerate(&self, feature: usize) -> bool {
        self.maxs[feature] <= self.mins[feature]
    }

    pub fn fit_matrix(rows: &[Vec<f64>]) -> Result<ScalerParams, Error> {
        let first = rows.first().ok_or(Error::EmptyFit)?;
        let p = first.len();
        let mut mins = vec![f64::INFINITY; p];
        let mut maxs = vec![f64::NEG_INFINITY; p];
        for row in rows {
            if row.len() != p {
                return Err(Error::WidthMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                mins[j] = mins[j].min(*v);
                maxs[j] = maxs[j].max(*v);
            }
        }
        Ok(ScalerParams {
            mins,
            maxs,
            output_max_abs: 0.0,
        })
    }

    pub fn transform_matrix(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, Error> {
        let p = self.n_features();
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != p {
                return Err(Error::WidthMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            let mut scaled = Vec::with_capacity(p);
            for j in 0..p {
                if self.degenerate(j) {
                    scaled.push(0.0);
                } else {
                    scaled.push((row[j] - self.mins[j]) / (self.maxs[j] - self.mins[j]));
                }
            }
            out.push(scaled);
        }
        Ok(out)
    }

    pub fn transform_output(&self, dr_delta: f64) -> f64 {
        if self.output_max_abs <= 0.0 {
            0.0
        } else {
            dr_delta / self.output_max_abs
        }
    }
}

/// Fits feature min-max and output max-abs on a training subset.
pub fn fit_scaler(samples: &[LabeledSample]) -> Result<ScalerParams, Error> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.to_vec()).collect();
    let mut params = ScalerParams::fit_matrix(&rows)?;
    params.output_max_abs = samples
        .iter()
        .map(|s| s.dr_delta.abs())
        .fold(0.0, f64::max);
    Ok(params)
}

/// Applies fitted parameters: scaled feature matrix plus scaled deltas.
/// Labels are untouched; they derive from the raw delta sign.
pub fn apply_scaler(
    params: &ScalerParams,
    samples: &[LabeledSample],
) -> Result<(Vec<Vec<f64>>, Vec<f64>), Error> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.features.to_vec()).collect();
    let x = params.transform_matrix(&rows)?;
    let y = samples
        .iter()
        .map(|s| params.transform_output(s.dr_delta))
        .collect();
    Ok((x, y))
}

/// Standard product-moment correlation.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64, Error> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: 2,
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// One state's aggregate row: ratios over state-summed series, the rounded
/// percent change, and the change in mean daily cases/deaths.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSummaryRow {
    pub state: String,
    pub ratio_before: f64,
    pub ratio_after: f64,
    /// 100 x (after - before) / before, rounded to the nearest integer.
    pub pct_change: i64,
    pub cases_change: f64,
    pub deaths_change: f64,
}

/// State-level before/after ratios from state-aggregated (summed) daily
/// series. Statewide totals, not means of county ratios.
pub fn state_summary(
    records: &[CountyRecord],
    intervention: &InterventionSpec,
) -> Result<Vec<StateSummaryRow>, Error> {
    // per state: [cases_before, cases_after, deaths_before, deaths_after]
    let mut sums: BTreeMap<String, [f64; 4]> = BTreeMap::new();
    let w = intervention.window_days;
    for record in records {
        let anchor = intervention.order_date(&record.series.state)?;
        let (daily_cases, _) = daily_from_cumulative(&record.series.cumulative_cases)?;
        let (daily_deaths, _) = daily_from_cumulative(&record.series.cumulative_deaths)?;
        let daily_start = record.series.dates[1];
        let entry = sums.entry(record.series.state.clone()).or_default();
        entry[0] += window_mean(&daily_cases, daily_start, anchor, WindowSide::Before, w)?;
        entry[1] += window_mean(&daily_cases, daily_start, anchor, WindowSide::After, w)?;
        entry[2] += window_mean(&daily_deaths, daily_start, anchor, WindowSide::Before, w)?;
        entry[3] += window_mean(&daily_deaths, daily_start, anchor, WindowSide::After, w)?;
    }

    let mut rows = Vec::with_capacity(sums.len());
    for (state, [cb, ca, db, da]) in sums {
        let ratio_before = if cb == 0.0 { 0.0 } else { 100.0 * db / cb };
        let ratio_after = if ca == 0.0 { 0.0 } else { 100.0 * da / ca };
        if ratio_before == 0.0 {
            return Err(Error::ZeroBaseline { state });
        }
        let pct = 100.0 * (ratio_after - ratio_before) / ratio_before;
        rows.push(StateSummaryRow {
            state,
            ratio_before,
            ratio_after,
            pct_change: pct.round() as i64,
            cases_change: ca - cb,
            deaths_change: da - db,
        });
    }
    Ok(rows)
}

/// count/mean/std/min/quartiles/max for the 8 features and the delta.
/// std uses the n-1 convention; a single sample reports std 0 and sets
/// `std_flagged`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescribeTable {
    pub columns: Vec<&'static str>,
    pub count: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub q25: Vec<f64>,
    pub q50: Vec<f64>,
    pub q75: Vec<f64>,
    pub max: Vec<f64>,
    pub std_flagged: bool,
}

impl DescribeTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }
}

/// Linear interpolation between closest ranks on a sorted column.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn describe_dataset(samples: &[LabeledSample]) -> Result<DescribeTable, Error> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len();
    let mut columns: Vec<&'static str> = FEATURE_NAMES.to_vec();
    columns.push("dr_delta");

    let column_values = |c: usize| -> Vec<f64> {
        samples
            .iter()
            .map(|s| if c < 8 { s.features[c] } else { s.dr_delta })
            .collect()
    };

    let mut table = DescribeTable {
        columns,
        count: n,
        mean: Vec::new(),
        std: Vec::new(),
        min: Vec::new(),
        q25: Vec::new(),
        q50: Vec::new(),
        q75: Vec::new(),
        max: Vec::new(),
        std_flagged: n < 2,
    };

    for c in 0..9 {
        let vals = column_values(c);
        let mean = vals.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n as f64 - 1.0)).sqrt()
        };
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics input"));
        table.mean.push(mean);
        table.std.push(std);
        table.min.push(sorted[0]);
        table.q25.push(quantile_sorted(&sorted, 0.25));
        table.q50.push(quantile_sorted(&sorted, 0.50));
        table.q75.push(quantile_sorted(&sorted, 0.75));
        table.max.push(sorted[n - 1]);
    }
    Ok(table)
}

/// Per-label feature means. Both labels must be present.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub decrease: [f64; 8],
    pub increase: [f64; 8],
}

pub fn group_means(samples: &[LabeledSample]) -> Result<GroupMeans, Error> {
    let mut acc = [[0.0f64; 8]; 2];
    let mut cnt = [0usize; 2];
    for s in samples {
        let g = match s.label {
            Label::Decrease => 0,
            Label::Increase => 1,
        };
        cnt[g] += 1;
        for j in 0..8 {
            acc[g][j] += s.features[j];
        }
    }
    for (g, label) in [(0, Label::Decrease), (1, Label::Increase)] {
        if cnt[g] == 0 {
            return Err(Error::MissingLabel {
                label: label.name().to_string(),
            });
        }
        for j in 0..8 {
            acc[g][j] /= cnt[g] as f64;
        }
    }
    Ok(GroupMeans {
        decrease: acc[0],
        increase: acc[1],
    })
}
