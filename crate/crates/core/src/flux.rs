//! Carbon-flux vintages and the budget imbalance.
//!
//! A vintage is one annual release of the global flux table. Releases
//! revise history, so a new release is always a new [`Vintage`]; nothing
//! here mutates a parsed vintage.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fmt;

/// First year of every Global Carbon Budget release.
pub const FIRST_YEAR: i32 = 1959;

const REQUIRED_COLUMNS: [&str; 6] = ["year", "e_ff", "e_luc", "g_atm", "s_ocn", "s_lnd"];
const CEMENT_COLUMN: &str = "s_cem";

/// One year of global fluxes, in GtC/yr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxRecord {
    pub year: i32,
    /// Fossil-fuel and cement emissions.
    pub e_ff: f64,
    /// Land-use-change emissions.
    pub e_luc: f64,
    /// Atmospheric growth.
    pub g_atm: f64,
    /// Ocean sink.
    pub s_ocn: f64,
    /// Land sink. May be negative in extreme years.
    pub s_lnd: f64,
    /// Cement-carbonation sink, zero for releases without one.
    pub s_cem: f64,
}

impl FluxRecord {
    /// Budget imbalance for this year. The cement-carbonation sink is
    /// netted out of fossil emissions rather than carried as its own term.
    pub fn budget_imbalance(&self) -> f64 {
        (self.e_ff - self.s_cem) + self.e_luc - self.g_atm - self.s_ocn - self.s_lnd
    }

    fn fluxes(&self) -> [f64; 6] {
        [
            self.e_ff, self.e_luc, self.g_atm, self.s_ocn, self.s_lnd, self.s_cem,
        ]
    }
}

/// A labelled release of consecutive annual flux records starting in 1959.
#[derive(Debug, Clone, PartialEq)]
pub struct Vintage {
    label: String,
    records: Vec<FluxRecord>,
}

impl Vintage {
    /// Validates and wraps `records`.
    pub fn new(label: impl Into<String>, records: Vec<FluxRecord>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyData)?;
        if first.year != FIRST_YEAR {
            return Err(Error::InvalidStartYear {
                expected: FIRST_YEAR,
                found: first.year,
            });
        }
        for pair in records.windows(2) {
            if pair[1].year != pair[0].year + 1 {
                return Err(Error::NonConsecutiveYears {
                    previous: pair[0].year,
                    next: pair[1].year,
                });
            }
        }
        for (row, rec) in records.iter().enumerate() {
            if let Some(bad) = rec.fluxes().iter().find(|v| !v.is_finite()) {
                return Err(Error::MalformedNumber {
                    row: row + 1,
                    column: "flux".into(),
                    value: bad.to_string(),
                });
            }
        }
        Ok(Self {
            label: label.into(),
            records,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn records(&self) -> &[FluxRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_year(&self) -> i32 {
        self.records[0].year
    }

    pub fn last_year(&self) -> i32 {
        self.records[self.records.len() - 1].year
    }

    /// Keeps the first `n` years, as an earlier release without revisions
    /// would have reported them.
    pub fn truncated(&self, n: usize, label: impl Into<String>) -> Result<Self> {
        if n == 0 || n > self.records.len() {
            return Err(Error::WindowMismatch {
                expected: n,
                got: self.records.len(),
            });
        }
        Vintage::new(label, self.records[..n].to_vec())
    }
}

/// Budget imbalance series derived from one vintage.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetImbalanceSeries {
    pub label: String,
    pub years: Vec<i32>,
    pub values: Vec<f64>,
}

impl BudgetImbalanceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn budget_imbalance(v: &Vintage) -> BudgetImbalanceSeries {
    BudgetImbalanceSeries {
        label: v.label.clone(),
        years: v.records.iter().map(|r| r.year).collect(),
        values: v.records.iter().map(FluxRecord::budget_imbalance).collect(),
    }
}

/// Parses the comma-separated vintage format.
///
/// Columns are located by header name; `s_cem` is optional and defaults
/// to zero. Unknown columns are ignored.
pub fn parse_vintage<R: Read>(raw: R, label: &str) -> Result<Vintage> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(raw);
    let headers = reader.headers()?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);

    let mut required = [0usize; 6];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = index_of(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let cement = index_of(CEMENT_COLUMN);

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let field = |idx: usize, name: &str| -> Result<&str> {
            row.get(idx).ok_or_else(|| Error::MalformedNumber {
                row: row_no,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let number = |idx: usize, name: &str| -> Result<f64> {
            let text = field(idx, name)?;
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::MalformedNumber {
                    row: row_no,
                    column: name.to_string(),
                    value: text.to_string(),
                }),
            }
        };
        let year_text = field(required[0], "year")?;
        let year = year_text.parse::<i32>().map_err(|_| Error::MalformedNumber {
            row: row_no,
            column: "year".into(),
            value: year_text.to_string(),
        })?;
        records.push(FluxRecord {
            year,
            e_ff: number(required[1], "e_ff")?,
            e_luc: number(required[2], "e_luc")?,
            g_atm: number(required[3], "g_atm")?,
            s_ocn: number(required[4], "s_ocn")?,
            s_lnd: number(required[5], "s_lnd")?,
            s_cem: match cement {
                Some(idx) => number(idx, CEMENT_COLUMN)?,
                None => 0.0,
            },
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    Vintage::new(label, records)
}

/// Reads a vintage from disk, labelling it with the file stem.
pub fn read_vintage_file(path: &std::path::Path) -> Result<Vintage> {
    let file = std::fs::File::open(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_vintage(std::io::BufReader::new(file), &label)
}

/// Writes `v` in the canonical format, always including `s_cem`.
pub fn serialize_vintage<W: Write>(v: &Vintage, mut out: W) -> Result<()> {
    writeln!(out, "year,e_ff,e_luc,g_atm,s_ocn,s_lnd,s_cem")?;
    for r in &v.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.year,
            fmt::csv(r.e_ff),
            fmt::csv(r.e_luc),
            fmt::csv(r.g_atm),
            fmt::csv(r.s_ocn),
            fmt::csv(r.s_lnd),
            fmt::csv(r.s_cem)
        )?;
    }
    Ok(())
}
