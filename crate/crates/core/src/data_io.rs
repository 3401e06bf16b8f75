//! Price-history ingestion and the on-disk interchange formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::ScenarioSet;

pub const SCENARIO_MAGIC: [u8; 4] = *b"CHSC";
pub const SCENARIO_VERSION: u32 = 1;

/// Largest magnitude below which every integer is exactly representable.
const MAX_EXACT_INT: u128 = 1 << 53;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceHistory {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
    pub source: String,
}

impl PriceHistory {
    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    fn slice(&self, start: usize, end: usize, tag: &str) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            closes: self.closes[start..end].to_vec(),
            source: format!("{}[{tag}]", self.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvColumns {
    pub date: String,
    pub close: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            date: "date".into(),
            close: "close".into(),
        }
    }
}

pub fn ingest_csv(path: &Path, columns: &CsvColumns) -> Result<PriceHistory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_csv(file, columns, &path.display().to_string())
}

/// Rows are numbered from 1 for the first data line after the header.
pub fn read_price_csv<R: Read>(reader: R, columns: &CsvColumns, source: &str) -> Result<PriceHistory> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Format(format!("missing column `{name}` in {source}")))
    };
    let date_idx = find(&columns.date)?;
    let close_idx = find(&columns.close)?;

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut closes = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |idx: usize| {
            record.get(idx).ok_or_else(|| Error::Row {
                row,
                reason: "too few fields".into(),
            })
        };
        let raw_date = field(date_idx)?;
        let date = parse_date(raw_date).ok_or_else(|| Error::Row {
            row,
            reason: format!("unparseable date `{raw_date}`"),
        })?;
        let raw_close = field(close_idx)?;
        let close: f64 = raw_close.parse().map_err(|_| Error::Row {
            row,
            reason: format!("unparseable price `{raw_close}`"),
        })?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(Error::Row {
                row,
                reason: format!("price {close} must be positive"),
            });
        }
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::Row {
                    row,
                    reason: format!("date {date} does not follow {prev}; input must be strictly increasing"),
                });
            }
        }
        dates.push(date);
        closes.push(close);
    }
    if closes.is_empty() {
        return Err(Error::InsufficientData {
            what: "price rows",
            needed: 1,
            got: 0,
        });
    }
    Ok(PriceHistory {
        dates,
        closes,
        source: source.to_string(),
    })
}

/// ISO-8601 calendar date, optionally followed by a time part.
fn parse_date(s: &str) -> Option<NaiveDate> {
    let day = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub calibration_len: usize,
    pub test_len: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            calibration_len: 3000,
            test_len: 3000,
        }
    }
}

/// First `calibration_len` rows, then the next `test_len` rows.
pub fn split_history(history: &PriceHistory, spec: SplitSpec) -> Result<(PriceHistory, PriceHistory)> {
    let needed = spec.calibration_len + spec.test_len;
    if needed > history.len() {
        return Err(Error::InsufficientData {
            what: "history rows for the calibration/test split",
            needed,
            got: history.len(),
        });
    }
    let c = spec.calibration_len;
    Ok((history.slice(0, c, "calibration"), history.slice(c, needed, "test")))
}

pub fn write_scenarios<W: Write>(set: &ScenarioSet, mut w: W) -> Result<()> {
    let tag = set.model_tag.as_bytes();
    let mut header = Vec::with_capacity(40 + tag.len());
    header.extend_from_slice(&SCENARIO_MAGIC);
    header.extend_from_slice(&SCENARIO_VERSION.to_le_bytes());
    header.extend_from_slice(&(set.n_paths() as u64).to_le_bytes());
    header.extend_from_slice(&(set.path_len() as u64).to_le_bytes());
    header.extend_from_slice(&set.seed.to_le_bytes());
    header.extend_from_slice(&(tag.len() as u64).to_le_bytes());
    header.extend_from_slice(tag);
    let io = |e| Error::io("<scenario stream>", e);
    w.write_all(&header).map_err(io)?;
    let mut buf = Vec::with_capacity(8 * set.path_len().max(1));
    for row in set.paths() {
        buf.clear();
        for p in row {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_scenarios<R: Read>(mut r: R) -> Result<ScenarioSet> {
    let mut fixed = [0u8; 40];
    r.read_exact(&mut fixed)
        .map_err(|e| Error::Format(format!("scenario header truncated: {e}")))?;
    if fixed[..4] != SCENARIO_MAGIC {
        return Err(Error::Format("bad scenario magic (expected CHSC)".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(fixed[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
    if version != SCENARIO_VERSION {
        return Err(Error::Format(format!("unsupported scenario version {version}")));
    }
    let (m, len, seed, tag_len) = (u64_at(8), u64_at(16), u64_at(24), u64_at(32));
    if tag_len > 4096 {
        return Err(Error::Format(format!("model tag length {tag_len} is implausible")));
    }
    let mut tag = vec![0u8; tag_len as usize];
    r.read_exact(&mut tag)
        .map_err(|e| Error::Format(format!("scenario model tag truncated: {e}")))?;
    let tag = String::from_utf8(tag).map_err(|_| Error::Format("model tag is not UTF-8".into()))?;
    let count = m
        .checked_mul(len)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::Format(format!("scenario dimensions {m} x {len} overflow")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<scenario stream>", e))?;
    if bytes.len() != count {
        return Err(Error::Format(format!(
            "scenario body has {} bytes, header implies {count}",
            bytes.len()
        )));
    }
    let prices = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScenarioSet::from_flat(prices, m as usize, len as usize, seed, tag)
}

pub fn save_scenarios(set: &ScenarioSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_scenarios(set, BufWriter::new(file))
}

pub fn load_scenarios(path: &Path) -> Result<ScenarioSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scenarios(BufReader::new(file))
}

/// One path per row, no header. Values use the shortest exact representation.
pub fn write_scenarios_csv<W: Write>(set: &ScenarioSet, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in set.paths() {
        wtr.write_record(row.iter().map(|p| format!("{p:?}")))?;
    }
    wtr.flush().map_err(|e| Error::io("<scenario csv>", e))
}

pub fn read_scenarios_csv<R: Read>(r: R, seed: u64, model_tag: &str) -> Result<ScenarioSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Row {
                    row: i + 1,
                    reason: format!("unparseable price `{f}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    ScenarioSet::from_rows(rows, seed, model_tag)
}

/// Rejects numeric literals that overflow float64, nonzero literals that
/// underflow to 0, and integers outside the u64/i64 range.
pub fn check_json_numbers(text: &str) -> Result<()> {
    scan_json_numbers(text, false)
}

/// Like [`check_json_numbers`], for documents whose numbers are all float64:
/// integers beyond 2^53 are also rejected.
pub fn check_json_floats(text: &str) -> Result<()> {
    scan_json_numbers(text, true)
}

fn scan_json_numbers(text: &str, floats_only: bool) -> Result<()> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut in_string = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            match b {
                b'\\' => i += 1,
                b'"' => in_string = false,
                _ => {}
            }
            i += 1;
            continue;
        }
        if b == b'"' {
            in_string = true;
            i += 1;
            continue;
        }
        if b == b'-' || b.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && matches!(bytes[i], b'0'..=b'9' | b'-' | b'+' | b'.' | b'e' | b'E') {
                i += 1;
            }
            check_number(&text[start..i], floats_only)?;
            continue;
        }
        i += 1;
    }
    Ok(())
}

fn check_number(lit: &str, floats_only: bool) -> Result<()> {
    let x: f64 = lit
        .parse()
        .map_err(|_| Error::Format(format!("invalid JSON number `{lit}`")))?;
    if !x.is_finite() {
        return Err(Error::Format(format!("JSON number `{lit}` overflows float64")));
    }
    let mantissa = lit.split(['e', 'E']).next().unwrap_or(lit);
    if x == 0.0 && mantissa.bytes().any(|b| (b'1'..=b'9').contains(&b)) {
        return Err(Error::Format(format!("JSON number `{lit}` underflows float64")));
    }
    let integral = !lit.contains(['.', 'e', 'E']);
    let limit = if floats_only { MAX_EXACT_INT } else { u64::MAX as u128 };
    if integral
        && lit
            .parse::<i128>()
            .map_or(true, |n| n.unsigned_abs() > limit || n < i64::MIN as i128)
    {
        return Err(Error::Format(format!("JSON integer `{lit}` is not exact in float64")));
    }
    Ok(())
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    check_json_numbers(text)?;
    Ok(serde_json::from_str(text)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(value)?).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(crate::calibration::hex(&Sha256::digest(bytes)))
}

/// Flat key/value configuration covering every tunable default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub burn_in: usize,
    pub tail_fraction: f64,
    pub max_lag: usize,
    pub w_hill: f64,
    pub w_vol: f64,
    pub w_acf: f64,
    pub w_acf_sq: f64,
    pub vol_window: usize,
    pub replications: usize,
    pub paths_per_replication: usize,
    pub steps_per_path: usize,
    pub gsl_symbols: usize,
    pub gsl_max_word_len: usize,
    pub gsl_scenarios: usize,
    pub date_column: String,
    pub close_column: String,
    pub calibration_len: usize,
    pub test_len: usize,
    pub maturity_days: usize,
    pub scenario_window: usize,
    pub initial_price: f64,
    pub rate: f64,
    pub es_confidence: f64,
    pub cost_levels: Vec<f64>,
    pub training_paths: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            burn_in: 250,
            tail_fraction: 0.05,
            max_lag: 20,
            w_hill: 1.0,
            w_vol: 1.0,
            w_acf: 1.0,
            w_acf_sq: 1.0,
            vol_window: 30,
            replications: 3,
            paths_per_replication: 16,
            steps_per_path: 3000,
            gsl_symbols: 5,
            gsl_max_word_len: 6,
            gsl_scenarios: 100,
            date_column: "date".into(),
            close_column: "close".into(),
            calibration_len: 3000,
            test_len: 3000,
            maturity_days: 30,
            scenario_window: 30,
            initial_price: 100.0,
            rate: 0.0,
            es_confidence: 0.95,
            cost_levels: crate::hedging::DEFAULT_COST_LEVELS.to_vec(),
            training_paths: 50_000,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn facts(&self) -> crate::stylized_facts::FactsConfig {
        crate::stylized_facts::FactsConfig {
            tail_fraction: self.tail_fraction,
            max_lag: self.max_lag,
        }
    }

    pub fn weights(&self) -> crate::stylized_facts::DistanceWeights {
        crate::stylized_facts::DistanceWeights {
            w_hill: self.w_hill,
            w_vol: self.w_vol,
            w_acf: self.w_acf,
            w_acf_sq: self.w_acf_sq,
        }
    }

    pub fn gsl(&self) -> crate::validation::GslDivConfig {
        crate::validation::GslDivConfig::uniform(self.gsl_symbols, self.gsl_max_word_len)
    }

    pub fn columns(&self) -> CsvColumns {
        CsvColumns {
            date: self.date_column.clone(),
            close: self.close_column.clone(),
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            calibration_len: self.calibration_len,
            test_len: self.test_len,
        }
    }
}
