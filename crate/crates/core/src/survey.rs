//! Hashed survey data: what a field team actually holds.
//!
//! A [`HashedSample`] is the referral forest over opaque subject keys, one
//! code per subject and each subject's list of reported codes. Simulations
//! produce one keyed by vertex id; survey files produce one keyed by row.
//! Every hashed estimator only looks at codes and interview order, so the
//! two views give identical results.
//!
//! # Survey file
//!
//! ```text
//! # rds-survey v1 m=3125 p=25 s=6 c=3 n0=500
//! subject_code,recruiter_row,report_codes
//! 1702,,88;2400;3011
//! 95,0,
//! ```
//!
//! Rows are subjects in interview order. `recruiter_row` is the 0-based row
//! of the subject's recruiter (blank for seeds) and must refer to an
//! earlier row. `report_codes` is a `;`-separated list. Header keys other
//! than `m` are optional.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::hashing::{HashAssignment, HashError};
use crate::multiset::Multiset;
use crate::rds::{RdsError, RdsForest, ReportMultiset};

pub const SURVEY_VERSION: &str = "rds-survey v1";
const COLUMNS: &str = "subject_code,recruiter_row,report_codes";

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("survey contains no subjects")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {row}: code {code} outside 1..={m}")]
    CodeOutOfRange { row: usize, code: u32, m: u32 },
    #[error("record {row}: {count} reports exceeds the limit p={p}")]
    TooManyReports { row: usize, count: usize, p: usize },
    #[error("record {row}: recruiter row {recruiter} is not an earlier record")]
    BadRecruiter { row: usize, recruiter: usize },
    #[error("hash space size m is missing (give it in the header or on the command line)")]
    MissingSpace,
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Rds(#[from] RdsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One interviewed subject as recorded in the field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyRecord {
    pub subject_code: u32,
    pub recruiter_row: Option<usize>,
    pub report_codes: Vec<u32>,
}

/// Parameters carried in the survey header line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurveyHeader {
    pub m: Option<u32>,
    pub p: Option<usize>,
    pub s: Option<usize>,
    pub c: Option<usize>,
    pub n0: Option<usize>,
    pub telefunken_digits: Option<usize>,
}

impl SurveyHeader {
    fn line(&self) -> String {
        let mut out = format!("# {SURVEY_VERSION}");
        let fields = [
            ("m", self.m.map(|v| v as usize)),
            ("p", self.p),
            ("s", self.s),
            ("c", self.c),
            ("n0", self.n0),
            ("d", self.telefunken_digits),
        ];
        for (key, value) in fields {
            if let Some(v) = value {
                out.push_str(&format!(" {key}={v}"));
            }
        }
        out
    }

    fn parse(comment: &str, line: usize) -> Result<Self, SurveyError> {
        let mut header = Self::default();
        let bad = |message: String| SurveyError::Parse { line, message };
        for tok in comment.split_whitespace() {
            let Some((key, value)) = tok.split_once('=') else {
                continue;
            };
            let num: usize = value
                .parse()
                .map_err(|_| bad(format!("bad header value {tok:?}")))?;
            match key {
                "m" => {
                    header.m =
                        Some(u32::try_from(num).map_err(|_| bad(format!("m too large: {num}")))?)
                }
                "p" => header.p = Some(num),
                "s" => header.s = Some(num),
                "c" => header.c = Some(num),
                "n0" => header.n0 = Some(num),
                "d" => header.telefunken_digits = Some(num),
                _ => {}
            }
        }
        Ok(header)
    }
}

/// Read survey records and the header. Validation against `m` and `p`
/// happens in [`HashedSample::from_records`].
pub fn read_survey<R: BufRead>(
    mut input: R,
) -> Result<(SurveyHeader, Vec<SurveyRecord>), SurveyError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut header = SurveyHeader::default();
    for (idx, line) in text.lines().enumerate() {
        if let Some(comment) = line.trim().strip_prefix('#') {
            if comment.trim_start().starts_with("rds-survey") {
                header = SurveyHeader::parse(comment, idx + 1)?;
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| SurveyError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| SurveyError::Parse { line, message };
        if row.iter().collect::<Vec<_>>().join(",") == COLUMNS {
            continue;
        }
        if row.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", row.len())));
        }
        let subject_code = row[0]
            .parse::<u32>()
            .map_err(|_| bad(format!("bad subject code {:?}", &row[0])))?;
        let recruiter_row = match &row[1] {
            "" => None,
            r => Some(
                r.parse::<usize>()
                    .map_err(|_| bad(format!("bad recruiter row {r:?}")))?,
            ),
        };
        let report_codes = row[2]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| bad(format!("bad report code {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        records.push(SurveyRecord {
            subject_code,
            recruiter_row,
            report_codes,
        });
    }
    Ok((header, records))
}

pub fn write_survey<W: Write>(
    mut out: W,
    header: &SurveyHeader,
    records: &[SurveyRecord],
) -> std::io::Result<()> {
    writeln!(out, "{}", header.line())?;
    writeln!(out, "{COLUMNS}")?;
    for r in records {
        let recruiter = r.recruiter_row.map(|x| x.to_string()).unwrap_or_default();
        let reports: Vec<String> = r.report_codes.iter().map(u32::to_string).collect();
        writeln!(
            out,
            "{},{},{}",
            r.subject_code,
            recruiter,
            reports.join(";")
        )?;
    }
    Ok(())
}

/// Hashed view of one capture/recapture sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedSample {
    forest: RdsForest,
    subject_codes: BTreeMap<usize, u32>,
    report_codes: BTreeMap<usize, Vec<u32>>,
    m: u32,
}

impl HashedSample {
    /// Hash a simulated sample; keys stay vertex ids.
    pub fn from_simulation(
        forest: &RdsForest,
        reports: &ReportMultiset,
        psi: &HashAssignment,
    ) -> Result<Self, HashError> {
        let mut subject_codes = BTreeMap::new();
        let mut report_codes = BTreeMap::new();
        for &v in forest.subjects() {
            subject_codes.insert(v, psi.code(v).ok_or(HashError::Unassigned(v))?);
            report_codes.insert(v, psi.apply_list(reports.reported_by(v))?);
        }
        Ok(Self {
            forest: forest.clone(),
            subject_codes,
            report_codes,
            m: psi.space(),
        })
    }

    /// Validate survey records and key subjects by row.
    pub fn from_records(
        records: &[SurveyRecord],
        m: u32,
        p: Option<usize>,
    ) -> Result<Self, SurveyError> {
        if records.is_empty() {
            return Err(SurveyError::Empty);
        }
        if m == 0 {
            return Err(HashError::EmptyHashSpace.into());
        }
        let check = |row: usize, code: u32| {
            if (1..=m).contains(&code) {
                Ok(())
            } else {
                Err(SurveyError::CodeOutOfRange { row, code, m })
            }
        };
        let mut subject_codes = BTreeMap::new();
        let mut report_codes = BTreeMap::new();
        for (row, r) in records.iter().enumerate() {
            check(row, r.subject_code)?;
            for &code in &r.report_codes {
                check(row, code)?;
            }
            if let Some(p) = p {
                if r.report_codes.len() > p {
                    return Err(SurveyError::TooManyReports {
                        row,
                        count: r.report_codes.len(),
                        p,
                    });
                }
            }
            if let Some(rec) = r.recruiter_row {
                if rec >= row {
                    return Err(SurveyError::BadRecruiter {
                        row,
                        recruiter: rec,
                    });
                }
            }
            subject_codes.insert(row, r.subject_code);
            report_codes.insert(row, r.report_codes.clone());
        }
        let forest = RdsForest::from_parts(
            records
                .iter()
                .enumerate()
                .map(|(row, r)| (row, r.recruiter_row)),
        )?;
        Ok(Self {
            forest,
            subject_codes,
            report_codes,
            m,
        })
    }

    /// Records in interview order with recruiters as row references.
    pub fn to_records(&self) -> Vec<SurveyRecord> {
        let subjects = self.forest.subjects();
        subjects
            .iter()
            .map(|&v| SurveyRecord {
                subject_code: self.subject_codes[&v],
                recruiter_row: self
                    .forest
                    .recruiter_of(v)
                    .and_then(|r| self.forest.position(r)),
                report_codes: self.report_codes[&v].clone(),
            })
            .collect()
    }

    pub fn forest(&self) -> &RdsForest {
        &self.forest
    }

    /// Hash space size.
    pub fn space(&self) -> u32 {
        self.m
    }

    /// `ψS`.
    pub fn psi_subjects(&self) -> Multiset<u32> {
        self.subject_codes.values().copied().collect()
    }

    /// `ψrS`.
    pub fn psi_reports(&self) -> Multiset<u32> {
        self.report_codes.values().flatten().copied().collect()
    }

    /// Codes of the given subjects.
    pub fn psi_of(&self, subjects: &[usize]) -> Multiset<u32> {
        subjects.iter().map(|v| self.subject_codes[v]).collect()
    }

    /// Reports recorded by the given subjects, amalgamated.
    pub fn psi_reports_of(&self, subjects: &[usize]) -> Multiset<u32> {
        subjects
            .iter()
            .flat_map(|v| self.report_codes[v].iter().copied())
            .collect()
    }
}
