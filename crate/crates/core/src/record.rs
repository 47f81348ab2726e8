//! Building records, the style-period taxonomy, and the visual reason bank.
//!
//! Manifests are JSON Lines, one record per line. Optional fields (`lat`,
//! `lon`, `density`, `split`) are omitted when absent rather than written as
//! null. Validation reports every problem it finds instead of stopping at the
//! first.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Continent {
    Africa,
    Americas,
    Asia,
    Australia,
    Europe,
}

impl Continent {
    pub const ALL: [Continent; 5] = [
        Continent::Africa,
        Continent::Americas,
        Continent::Asia,
        Continent::Australia,
        Continent::Europe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Continent::Africa => "Africa",
            Continent::Americas => "Americas",
            Continent::Asia => "Asia",
            Continent::Australia => "Australia",
            Continent::Europe => "Europe",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Renovation {
    Never,
    Renovated,
    Rebuilt,
    /// No renovation information on record. Excluded from the renovation
    /// breakdown at evaluation time, never silently dropped elsewhere.
    #[default]
    Unknown,
}

impl fmt::Display for Renovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Renovation::Never => "Never",
            Renovation::Renovated => "Renovated",
            Renovation::Rebuilt => "Rebuilt",
            Renovation::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "Train",
            Split::Val => "Val",
            Split::Test => "Test",
        };
        f.write_str(s)
    }
}

/// One building. `lat`/`lon` are either both present or both absent; that is
/// enforced by [`validate_manifest`], not by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub id: String,
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    pub continent: Continent,
    pub pageviews: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default)]
    pub renovation: Renovation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl BuildingRecord {
    /// GPS pair when both coordinates are present.
    pub fn gps(&self) -> Option<(f64, f64)> {
        match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => Some((lat, lon)),
            _ => None,
        }
    }
}

/// One architectural style period. The interval is right-open: a year equal
/// to `end` belongs to the next period, except that the final period of a
/// taxonomy also accepts `year == end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylePeriod {
    pub name: String,
    pub start: i32,
    pub end: i32,
}

impl StylePeriod {
    pub fn new(name: &str, start: i32, end: i32) -> Self {
        StylePeriod {
            name: name.to_string(),
            start,
            end,
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.start as f64 + self.end as f64) / 2.0
    }
}

/// Ordered, contiguous list of style periods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleTaxonomy {
    periods: Vec<StylePeriod>,
}

impl StyleTaxonomy {
    /// Periods must be sorted by start, strictly increasing, and contiguous
    /// (each period's end is the next period's start).
    pub fn new(periods: Vec<StylePeriod>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::InvalidTaxonomy("no periods".into()));
        }
        for p in &periods {
            if p.start >= p.end {
                return Err(Error::InvalidTaxonomy(format!(
                    "period {:?} has start {} >= end {}",
                    p.name, p.start, p.end
                )));
            }
        }
        for w in periods.windows(2) {
            if w[0].end != w[1].start {
                return Err(Error::InvalidTaxonomy(format!(
                    "periods {:?} and {:?} do not share a boundary ({} vs {})",
                    w[0].name, w[1].name, w[0].end, w[1].start
                )));
            }
        }
        Ok(StyleTaxonomy { periods })
    }

    /// The seven-period taxonomy used throughout: Roman through Contemporary,
    /// with the open-ended final period pinned at 2024.
    pub fn default_seven() -> Self {
        StyleTaxonomy::new(vec![
            StylePeriod::new("Roman", 800, 1150),
            StylePeriod::new("Gothic", 1150, 1400),
            StylePeriod::new("Renaissance", 1400, 1600),
            StylePeriod::new("Baroque", 1600, 1750),
            StylePeriod::new("Neoclassical", 1750, 1850),
            StylePeriod::new("Modern", 1850, 1950),
            StylePeriod::new("Contemporary", 1950, 2024),
        ])
        .expect("builtin taxonomy is valid")
    }

    pub fn periods(&self) -> &[StylePeriod] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn first_year(&self) -> i32 {
        self.periods[0].start
    }

    pub fn last_year(&self) -> i32 {
        self.periods[self.periods.len() - 1].end
    }

    /// Index of the period containing `year`. Boundary years belong to the
    /// later period; the final period additionally accepts its own end year.
    pub fn period_of_year(&self, year: i32) -> Result<usize> {
        let (min, max) = (self.first_year(), self.last_year());
        if year < min || year > max {
            return Err(Error::YearOutOfRange { year, min, max });
        }
        if year == max {
            return Ok(self.periods.len() - 1);
        }
        for (i, p) in self.periods.iter().enumerate() {
            if year >= p.start && year < p.end {
                return Ok(i);
            }
        }
        unreachable!("contiguous periods cover [{min}, {max}]")
    }

    /// Period midpoints, the anchor years of the ordinal head.
    pub fn midpoints(&self) -> Vec<f64> {
        self.periods.iter().map(StylePeriod::midpoint).collect()
    }
}

/// One prompt-bearing subcategory of a visual reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subcategory {
    pub label: String,
    pub prompt_text: String,
}

/// A visual reason (e.g. roof type) with its subcategories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reason {
    pub name: String,
    pub subcategories: Vec<Subcategory>,
}

/// Ordered bank of visual reasons. Order is load-bearing: the similarity
/// vector and checkpoints freeze it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonBank {
    pub reasons: Vec<Reason>,
}

impl ReasonBank {
    /// The builtin roof-type reason: seven subcategories with their prompts.
    pub fn roof_default() -> Self {
        let sub = |label: &str, prompt: &str| Subcategory {
            label: label.to_string(),
            prompt_text: prompt.to_string(),
        };
        ReasonBank {
            reasons: vec![Reason {
                name: "roof".to_string(),
                subcategories: vec![
                    sub(
                        "spire",
                        "A sharply pointed roof emphasizing verticality and ornate detailing.",
                    ),
                    sub(
                        "dome",
                        "A smoothly curved roof suggesting grandeur and centrality.",
                    ),
                    sub(
                        "flat roof",
                        "A completely horizontal surface with an unobstructed and minimalist design.",
                    ),
                    sub(
                        "sloped roof",
                        "A roof with a noticeable and functional inclination for water drainage and dynamic appearance.",
                    ),
                    sub(
                        "gabled roof",
                        "A traditional peaked roof with a triangular profile that exudes symmetry.",
                    ),
                    sub(
                        "mansard roof",
                        "A dual-pitched roof offering both elegance and additional living space.",
                    ),
                    sub(
                        "butterfly roof",
                        "An inverted roof design that creates a V-shaped, modern, and unconventional look.",
                    ),
                ],
            }],
        }
    }

    /// At least one reason; every reason has at least two subcategories;
    /// reason names and per-reason labels are unique.
    pub fn validate(&self) -> Result<()> {
        if self.reasons.is_empty() {
            return Err(Error::InvalidBank("no reasons".into()));
        }
        let mut names = HashSet::new();
        for r in &self.reasons {
            if !names.insert(r.name.as_str()) {
                return Err(Error::InvalidBank(format!("duplicate reason {:?}", r.name)));
            }
            if r.subcategories.len() < 2 {
                return Err(Error::InvalidBank(format!(
                    "reason {:?} has {} subcategories, need at least 2",
                    r.name,
                    r.subcategories.len()
                )));
            }
            let mut labels = HashSet::new();
            for s in &r.subcategories {
                if !labels.insert(s.label.as_str()) {
                    return Err(Error::InvalidBank(format!(
                        "reason {:?} has duplicate subcategory {:?}",
                        r.name, s.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_subcategories(&self) -> usize {
        self.reasons.iter().map(|r| r.subcategories.len()).sum()
    }

    /// Per-reason subcategory counts, in bank order.
    pub fn sizes(&self) -> Vec<usize> {
        self.reasons.iter().map(|r| r.subcategories.len()).collect()
    }

    /// Flattened `reason/label` keys in bank order. These are the row ids
    /// expected in a reason embedding file.
    pub fn flat_keys(&self) -> Vec<String> {
        self.reasons
            .iter()
            .flat_map(|r| {
                r.subcategories
                    .iter()
                    .map(move |s| format!("{}/{}", r.name, s.label))
            })
            .collect()
    }
}

/// Inclusive year range a manifest is validated against. Wider than the
/// evaluation protocol's span on purpose: ingestion should not reject data the
/// analysis tables merely cannot bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearRange {
    pub min: i32,
    pub max: i32,
}

impl Default for YearRange {
    fn default() -> Self {
        YearRange { min: 800, max: 2100 }
    }
}

/// Everything [`validate_manifest`] found. `issues` is exhaustive, not
/// first-error.
#[derive(Debug)]
pub struct ValidationReport {
    pub records: usize,
    pub missing_gps: usize,
    pub issues: Vec<Error>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} records, {} without GPS, {} issue(s)",
            self.records,
            self.missing_gps,
            self.issues.len()
        )?;
        for e in &self.issues {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

/// Check ids, ranges, and GPS pair completeness across a whole manifest.
pub fn validate_manifest(records: &[BuildingRecord], years: YearRange) -> ValidationReport {
    let mut seen = HashSet::new();
    let mut issues = Vec::new();
    let mut missing_gps = 0;
    for (i, r) in records.iter().enumerate() {
        if r.id.is_empty() {
            issues.push(Error::Empty {
                context: format!("id of record at line {}", i + 1),
            });
        } else if !seen.insert(r.id.clone()) {
            issues.push(Error::DuplicateId { id: r.id.clone() });
        }
        if r.year < years.min || r.year > years.max {
            issues.push(Error::FieldOutOfRange {
                id: r.id.clone(),
                field: "year",
                value: r.year as f64,
                min: years.min as f64,
                max: years.max as f64,
            });
        }
        match (r.lat, r.lon) {
            (Some(lat), _) if !(-90.0..=90.0).contains(&lat) => {
                issues.push(Error::FieldOutOfRange {
                    id: r.id.clone(),
                    field: "lat",
                    value: lat,
                    min: -90.0,
                    max: 90.0,
                });
            }
            _ => {}
        }
        match (r.lat, r.lon) {
            (_, Some(lon)) if !(-180.0..=180.0).contains(&lon) => {
                issues.push(Error::FieldOutOfRange {
                    id: r.id.clone(),
                    field: "lon",
                    value: lon,
                    min: -180.0,
                    max: 180.0,
                });
            }
            _ => {}
        }
        match (r.lat, r.lon) {
            (Some(_), None) | (None, Some(_)) => {
                issues.push(Error::InvalidConfig(format!(
                    "record {:?}: lat and lon must be present together",
                    r.id
                )));
            }
            (None, None) => missing_gps += 1,
            _ => {}
        }
        if let Some(d) = r.density {
            if !d.is_finite() || d < 0.0 {
                issues.push(Error::FieldOutOfRange {
                    id: r.id.clone(),
                    field: "density",
                    value: d,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
    }
    ValidationReport {
        records: records.len(),
        missing_gps,
        issues,
    }
}

/// Read a JSON Lines manifest. Blank lines are skipped; parse errors carry the
/// 1-based line number.
pub fn read_manifest(path: &Path) -> Result<Vec<BuildingRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: BuildingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Write a manifest as JSON Lines in record order.
pub fn write_manifest(path: &Path, records: &[BuildingRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serialization cannot fail");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}
