//! Evaluation: error metrics, stratified breakdowns, the popularity
//! robustness gap, deterministic train/val/test splitting, and cross-run
//! aggregation.
//!
//! Every mean is a sequential sum in a canonical order (records sorted by
//! id), so shuffling the inputs cannot change any reported number.

use crate::error::Error;
use crate::record::{BuildingRecord, Renovation, Split, StyleTaxonomy};
use crate::seed::sub_seed;
use crate::Result;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Mean absolute error in years. Empty input has no defined value.
pub fn mae(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    for (y, y_hat) in pairs {
        acc += (y - y_hat).abs();
    }
    Some(acc / pairs.len() as f64)
}

/// Percentage of predictions within `k` years of the truth, boundary
/// included.
pub fn interval_accuracy(pairs: &[(f64, f64)], k: f64) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let hits = pairs.iter().filter(|(y, y_hat)| (y - y_hat).abs() <= k).count();
    Some(100.0 * hits as f64 / pairs.len() as f64)
}

/// Percentage of correctly classified coarse periods.
pub fn cls_accuracy(pairs: &[(usize, usize)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let hits = pairs.iter().filter(|(a, b)| a == b).count();
    Some(100.0 * hits as f64 / pairs.len() as f64)
}

/// Page-view bin, right-open at 100, 1 000, 10 000, and 100 000.
pub fn popularity_bin(pageviews: u64) -> usize {
    match pageviews {
        0..=99 => 0,
        100..=999 => 1,
        1_000..=9_999 => 2,
        10_000..=99_999 => 3,
        _ => 4,
    }
}

pub const POPULARITY_BIN_LABELS: [&str; 5] =
    ["<100", "100-1k", "1k-10k", "10k-100k", ">=100k"];

/// Reporting-period bin for breakdown tables. Right-open except the last,
/// which accepts its end year.
pub fn analysis_period_bin(year: i32) -> Result<usize> {
    const EDGES: [i32; 8] = [1000, 1150, 1400, 1600, 1800, 1900, 1950, 2024];
    if year < EDGES[0] || year > EDGES[7] {
        return Err(Error::YearOutOfRange {
            year,
            min: EDGES[0],
            max: EDGES[7],
        });
    }
    if year == EDGES[7] {
        return Ok(6);
    }
    Ok(EDGES[1..].iter().position(|e| year < *e).unwrap())
}

pub const PERIOD_BIN_LABELS: [&str; 7] = [
    "1000-1150",
    "1150-1400",
    "1400-1600",
    "1600-1800",
    "1800-1900",
    "1900-1950",
    "1950-2024",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DensityClass {
    Rural,
    SemiUrban,
    Urban,
}

impl DensityClass {
    pub fn name(&self) -> &'static str {
        match self {
            DensityClass::Rural => "rural",
            DensityClass::SemiUrban => "semi_urban",
            DensityClass::Urban => "urban",
        }
    }
}

/// Population-density class: below 300 rural, 300 to 1500 inclusive
/// semi-urban, above urban.
pub fn density_class(density: f64) -> Result<DensityClass> {
    if !density.is_finite() {
        return Err(Error::NonFiniteValue {
            context: "population density".into(),
        });
    }
    Ok(if density < 300.0 {
        DensityClass::Rural
    } else if density <= 1500.0 {
        DensityClass::SemiUrban
    } else {
        DensityClass::Urban
    })
}

/// Prediction file row as the evaluator reads it. Extra fields in the file
/// are ignored. A missing coarse period is derived from the year estimate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictedYear {
    pub id: String,
    pub year_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_period: Option<String>,
}

/// One record joined with its prediction and all its strata.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined {
    pub id: String,
    pub year: i32,
    pub year_hat: f64,
    pub gt_period: usize,
    pub pred_period: usize,
    pub analysis_bin: usize,
    pub pop_bin: usize,
    pub density: Option<DensityClass>,
    pub renovation: Renovation,
}

/// Match every record with exactly one prediction and resolve all bin
/// memberships. The result is sorted by id. Records outside the reporting
/// range or predictions for unknown ids are errors, never silent drops.
pub fn join_predictions(
    records: &[BuildingRecord],
    preds: &[PredictedYear],
    taxonomy: &StyleTaxonomy,
) -> Result<Vec<Joined>> {
    let mut by_id: HashMap<&str, &PredictedYear> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(&p.id, p).is_some() {
            return Err(Error::DuplicateId { id: p.id.clone() });
        }
    }
    let mut known: HashSet<&str> = HashSet::with_capacity(records.len());
    for r in records {
        if !known.insert(&r.id) {
            return Err(Error::DuplicateId { id: r.id.clone() });
        }
    }
    let mut joined = Vec::with_capacity(records.len());
    for r in records {
        let p = by_id.get(r.id.as_str()).ok_or_else(|| Error::UnknownId {
            id: r.id.clone(),
            context: "no prediction for this record".into(),
        })?;
        if !p.year_hat.is_finite() {
            return Err(Error::NonFiniteValue {
                context: format!("predicted year for {}", r.id),
            });
        }
        let pred_period = match &p.coarse_period {
            Some(name) => {
                let idx = taxonomy
                    .periods()
                    .iter()
                    .position(|pp| pp.name == *name)
                    .ok_or_else(|| Error::UnknownId {
                        id: name.clone(),
                        context: "coarse period name".into(),
                    })?;
                idx
            }
            None => {
                let snapped = p.year_hat.round().clamp(
                    f64::from(taxonomy.first_year()),
                    f64::from(taxonomy.last_year()),
                ) as i32;
                taxonomy.period_of_year(snapped)?
            }
        };
        joined.push(Joined {
            id: r.id.clone(),
            year: r.year,
            year_hat: p.year_hat,
            gt_period: taxonomy.period_of_year(r.year)?,
            pred_period,
            analysis_bin: analysis_period_bin(r.year)?,
            pop_bin: popularity_bin(r.pageviews),
            density: r.density.map(density_class).transpose()?,
            renovation: r.renovation,
        });
    }
    for p in preds {
        if !known.contains(p.id.as_str()) {
            return Err(Error::UnknownId {
                id: p.id.clone(),
                context: "prediction for unknown record".into(),
            });
        }
    }
    joined.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(joined)
}

/// Metrics over one cell. `n` is always present; means are absent for an
/// empty cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metrics {
    pub n: usize,
    pub mae: Option<f64>,
    pub ia5: Option<f64>,
    pub ia20: Option<f64>,
    pub ia50: Option<f64>,
    pub ia100: Option<f64>,
    pub cls_acc: Option<f64>,
}

fn metrics_for(joined: &[Joined], keep: impl Fn(&Joined) -> bool) -> Metrics {
    let year_pairs: Vec<(f64, f64)> = joined
        .iter()
        .filter(|j| keep(j))
        .map(|j| (f64::from(j.year), j.year_hat))
        .collect();
    let period_pairs: Vec<(usize, usize)> = joined
        .iter()
        .filter(|j| keep(j))
        .map(|j| (j.gt_period, j.pred_period))
        .collect();
    Metrics {
        n: year_pairs.len(),
        mae: mae(&year_pairs),
        ia5: interval_accuracy(&year_pairs, 5.0),
        ia20: interval_accuracy(&year_pairs, 20.0),
        ia50: interval_accuracy(&year_pairs, 50.0),
        ia100: interval_accuracy(&year_pairs, 100.0),
        cls_acc: cls_accuracy(&period_pairs),
    }
}

/// Everything one evaluation run reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub overall: Metrics,
    /// Indexed by page-view bin, least popular first.
    pub by_popularity: Vec<Metrics>,
    /// Within-5-years accuracy of the most popular bin minus the least
    /// popular bin; absent whenever either bin is empty.
    pub popularity_gain: Option<f64>,
    /// Indexed by reporting-period bin, earliest first.
    pub by_period: Vec<Metrics>,
    pub by_density: BTreeMap<String, Metrics>,
    pub by_renovation: BTreeMap<String, Metrics>,
    /// Records with unknown renovation status, left out of the renovation
    /// breakdown only.
    pub excluded_renovation_unknown: usize,
    /// Records with no density value, left out of the density breakdown
    /// only.
    pub excluded_density_missing: usize,
}

/// Compute the full report from joined pairs.
pub fn evaluate_joined(joined: &[Joined], seed: u64) -> EvalReport {
    let overall = metrics_for(joined, |_| true);
    let by_popularity: Vec<Metrics> = (0..POPULARITY_BIN_LABELS.len())
        .map(|b| metrics_for(joined, |j| j.pop_bin == b))
        .collect();
    let popularity_gain = match (&by_popularity[4].ia5, &by_popularity[0].ia5) {
        (Some(most), Some(least)) => Some(most - least),
        _ => None,
    };
    let by_period = (0..PERIOD_BIN_LABELS.len())
        .map(|b| metrics_for(joined, |j| j.analysis_bin == b))
        .collect();
    let mut by_density = BTreeMap::new();
    for class in [DensityClass::Rural, DensityClass::SemiUrban, DensityClass::Urban] {
        by_density.insert(
            class.name().to_string(),
            metrics_for(joined, |j| j.density == Some(class)),
        );
    }
    let mut by_renovation = BTreeMap::new();
    for (name, status) in [
        ("never", Renovation::Never),
        ("renovated", Renovation::Renovated),
        ("rebuilt", Renovation::Rebuilt),
    ] {
        by_renovation.insert(
            name.to_string(),
            metrics_for(joined, |j| j.renovation == status),
        );
    }
    EvalReport {
        seed,
        overall,
        by_popularity,
        popularity_gain,
        by_period,
        by_density,
        by_renovation,
        excluded_renovation_unknown: joined
            .iter()
            .filter(|j| j.renovation == Renovation::Unknown)
            .count(),
        excluded_density_missing: joined.iter().filter(|j| j.density.is_none()).count(),
    }
}

/// Join then evaluate.
pub fn evaluate(
    records: &[BuildingRecord],
    preds: &[PredictedYear],
    taxonomy: &StyleTaxonomy,
    seed: u64,
) -> Result<EvalReport> {
    Ok(evaluate_joined(&join_predictions(records, preds, taxonomy)?, seed))
}

/// CSV scatter data, one row per joined pair in id order.
pub fn scatter_csv(joined: &[Joined]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ctx = |e: csv::Error| Error::InvalidConfig(format!("scatter serialization: {e}"));
    w.write_record(["id", "pred_year", "gt_year"]).map_err(ctx)?;
    for j in joined {
        w.write_record([
            j.id.as_str(),
            &format!("{}", j.year_hat),
            &format!("{}", j.year),
        ])
        .map_err(ctx)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("scatter serialization: {e}")))
}

fn fmt_opt(v: &Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "-".into(),
    }
}

fn metrics_line(label: &str, m: &Metrics) -> String {
    format!(
        "{label:<22} n={:<6} mae={:<8} ia5={:<7} ia20={:<7} ia50={:<7} ia100={:<7} cls={}\n",
        m.n,
        fmt_opt(&m.mae),
        fmt_opt(&m.ia5),
        fmt_opt(&m.ia20),
        fmt_opt(&m.ia50),
        fmt_opt(&m.ia100),
        fmt_opt(&m.cls_acc),
    )
}

/// Human-readable rendering of a report.
pub fn render_report(r: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("seed: {}\n", r.seed));
    out.push_str(&metrics_line("overall", &r.overall));
    out.push_str("\nby page views\n");
    for (label, m) in POPULARITY_BIN_LABELS.iter().zip(&r.by_popularity) {
        out.push_str(&metrics_line(&format!("  views {label}"), m));
    }
    out.push_str(&format!(
        "  ia5 gain (most vs least popular): {}\n",
        fmt_opt(&r.popularity_gain)
    ));
    out.push_str("\nby period\n");
    for (label, m) in PERIOD_BIN_LABELS.iter().zip(&r.by_period) {
        out.push_str(&metrics_line(&format!("  {label}"), m));
    }
    out.push_str("\nby density\n");
    for (name, m) in &r.by_density {
        out.push_str(&metrics_line(&format!("  {name}"), m));
    }
    out.push_str("\nby renovation\n");
    for (name, m) in &r.by_renovation {
        out.push_str(&metrics_line(&format!("  {name}"), m));
    }
    out.push_str(&format!(
        "\nexcluded: renovation_unknown={} density_missing={}\n",
        r.excluded_renovation_unknown, r.excluded_density_missing
    ));
    out
}

/// Deterministic stratified split. Strata are (decade, continent); members
/// are shuffled within their stratum and cut 60/20/20 with largest-remainder
/// rounding, so per-stratum counts are within one of the exact fractions.
/// Returns one assignment per input record, in input order.
pub fn stratified_split(records: &[BuildingRecord], master_seed: u64) -> Result<Vec<Split>> {
    if records.is_empty() {
        return Err(Error::Empty {
            context: "split input".into(),
        });
    }
    let mut strata: BTreeMap<(i32, &'static str), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata
            .entry((r.year.div_euclid(10) * 10, r.continent.name()))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(master_seed, "split"));
    let mut out = vec![Split::Train; records.len()];
    for members in strata.values_mut() {
        members.sort_by(|a, b| records[*a].id.cmp(&records[*b].id));
        members.shuffle(&mut rng);
        let n = members.len();
        // Integer largest-remainder apportionment of 60/20/20.
        let weights = [6usize, 2, 2];
        let mut counts = [0usize; 3];
        let mut rems = [0usize; 3];
        for (k, w) in weights.iter().enumerate() {
            counts[k] = n * w / 10;
            rems[k] = n * w % 10;
        }
        let mut leftover = n - counts.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|a, b| rems[*b].cmp(&rems[*a]).then(a.cmp(b)));
        for k in order {
            if leftover == 0 {
                break;
            }
            counts[k] += 1;
            leftover -= 1;
        }
        let splits = [Split::Train, Split::Val, Split::Test];
        let mut cursor = 0;
        for (k, count) in counts.iter().enumerate() {
            for &idx in &members[cursor..cursor + count] {
                out[idx] = splits[k];
            }
            cursor += count;
        }
    }
    Ok(out)
}

/// Mean and sample standard deviation of one metric across runs. The
/// deviation needs at least two values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AggregateCell {
    pub n: usize,
    pub mean: f64,
    pub std: Option<f64>,
}

fn aggregate_cell(values: &[f64]) -> Option<AggregateCell> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mut acc = 0.0;
    for v in values {
        acc += v;
    }
    let mean = acc / n as f64;
    let std = if n >= 2 {
        let mut ss = 0.0;
        for v in values {
            ss += (v - mean) * (v - mean);
        }
        Some((ss / (n - 1) as f64).sqrt())
    } else {
        None
    };
    Some(AggregateCell { n, mean, std })
}

/// Cross-run summary of the headline metrics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AggregateReport {
    pub runs: usize,
    pub mae: Option<AggregateCell>,
    pub ia5: Option<AggregateCell>,
    pub ia20: Option<AggregateCell>,
    pub ia50: Option<AggregateCell>,
    pub ia100: Option<AggregateCell>,
    pub cls_acc: Option<AggregateCell>,
    pub popularity_gain: Option<AggregateCell>,
}

/// Aggregate the overall block of several reports. A metric missing from a
/// run is skipped for that metric only.
pub fn aggregate_reports(reports: &[EvalReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::Empty {
            context: "report aggregation".into(),
        });
    }
    let collect = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Vec<f64> {
        reports.iter().filter_map(|r| f(r)).collect()
    };
    Ok(AggregateReport {
        runs: reports.len(),
        mae: aggregate_cell(&collect(&|r| r.overall.mae)),
        ia5: aggregate_cell(&collect(&|r| r.overall.ia5)),
        ia20: aggregate_cell(&collect(&|r| r.overall.ia20)),
        ia50: aggregate_cell(&collect(&|r| r.overall.ia50)),
        ia100: aggregate_cell(&collect(&|r| r.overall.ia100)),
        cls_acc: aggregate_cell(&collect(&|r| r.overall.cls_acc)),
        popularity_gain: aggregate_cell(&collect(&|r| r.popularity_gain)),
    })
}

fn agg_line(label: &str, c: &Option<AggregateCell>) -> String {
    match c {
        Some(c) => match c.std {
            Some(s) => format!("{label:<18} {:.2} +/- {:.2}  (n={})\n", c.mean, s, c.n),
            None => format!("{label:<18} {:.2}  (n={})\n", c.mean, c.n),
        },
        None => format!("{label:<18} -\n"),
    }
}

pub fn render_aggregate(a: &AggregateReport) -> String {
    let mut out = format!("runs: {}\n", a.runs);
    out.push_str(&agg_line("mae", &a.mae));
    out.push_str(&agg_line("ia5", &a.ia5));
    out.push_str(&agg_line("ia20", &a.ia20));
    out.push_str(&agg_line("ia50", &a.ia50));
    out.push_str(&agg_line("ia100", &a.ia100));
    out.push_str(&agg_line("cls_acc", &a.cls_acc));
    out.push_str(&agg_line("popularity_gain", &a.popularity_gain));
    out
}
