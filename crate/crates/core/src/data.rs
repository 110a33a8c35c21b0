//! Pool snapshot and price files.
//!
//! Both come as CSV with a header row or as a JSON array of objects with the
//! same field names; the format follows the file extension (`.json` or
//! anything else for CSV).
//!
//! ```text
//! token_a,token_b,reserve_a,reserve_b,fee_rate
//! X,Y,100,200,0.003
//! ```
//!
//! ```text
//! token,usd_price
//! X,2
//! ```
//!
//! Loading is all-or-nothing: every malformed record is reported with its
//! line number and no partial result is returned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amm::{Pool, TokenId, DEFAULT_FEE_RATE};
use crate::error::{Error, RecordError, Result};
use crate::strategies::PriceTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Vec<Pool>> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_snapshot(&text, Format::from_path(path)).map_err(|errors| parse_error(path, errors))
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceTable> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_prices(&text, Format::from_path(path)).map_err(|errors| parse_error(path, errors))
}

pub fn write_snapshot(path: impl AsRef<Path>, pools: &[Pool]) -> Result<()> {
    let path = path.as_ref();
    write(path, &snapshot_to_string(pools, Format::from_path(path)))
}

pub fn write_prices(path: impl AsRef<Path>, prices: &PriceTable) -> Result<()> {
    let path = path.as_ref();
    write(path, &prices_to_string(prices, Format::from_path(path)))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_owned(), source })
}

fn parse_error(path: &Path, errors: Vec<RecordError>) -> Error {
    Error::Parse { path: PathBuf::from(path), errors }
}

fn record_error(line: u64, message: impl Into<String>) -> RecordError {
    RecordError { line, message: message.into() }
}

/// Parse snapshot text. For JSON, the reported line is the record's
/// 1-based position in the array.
pub fn parse_snapshot(text: &str, format: Format) -> std::result::Result<Vec<Pool>, Vec<RecordError>> {
    let (rows, mut errors) = rows(text, format, &["token_a", "token_b", "reserve_a", "reserve_b"], &["fee_rate"])?;
    let mut pools = Vec::with_capacity(rows.len());
    for row in rows {
        match pool_from_row(&row) {
            Ok(p) => pools.push(p),
            Err(message) => errors.push(record_error(row.line, message)),
        }
    }
    finish(pools, errors)
}

pub fn parse_prices(text: &str, format: Format) -> std::result::Result<PriceTable, Vec<RecordError>> {
    let (rows, mut errors) = rows(text, format, &["token", "usd_price"], &[])?;
    let mut table = PriceTable::new();
    let mut seen: BTreeMap<TokenId, u64> = BTreeMap::new();
    for row in rows {
        let parsed = token(&row.fields[0], "token").and_then(|t| {
            let price = number(&row.fields[1], "usd_price")?;
            if price < 0.0 {
                return Err(format!("usd_price must be nonnegative, got {price}"));
            }
            Ok((t, price))
        });
        match parsed {
            Ok((t, price)) => {
                if let Some(first) = seen.get(&t) {
                    errors.push(record_error(row.line, format!("duplicate price for {t} (first on line {first})")));
                    continue;
                }
                seen.insert(t.clone(), row.line);
                table.insert(t, price).expect("validated above");
            }
            Err(message) => errors.push(record_error(row.line, message)),
        }
    }
    finish(table, errors)
}

fn finish<T>(value: T, mut errors: Vec<RecordError>) -> std::result::Result<T, Vec<RecordError>> {
    if errors.is_empty() {
        return Ok(value);
    }
    errors.sort_by_key(|e| e.line);
    Err(errors)
}

/// Well-formed rows and per-record structural errors; `Err` only when the
/// file as a whole is unreadable.
type Rows = (Vec<Row>, Vec<RecordError>);

fn rows(text: &str, format: Format, required: &[&str], optional: &[&str]) -> std::result::Result<Rows, Vec<RecordError>> {
    match format {
        Format::Csv => csv_rows(text, required, optional),
        Format::Json => json_rows(text, required, optional),
    }
}

/// One record as raw text fields in the requested column order; missing
/// optional fields are empty.
struct Row {
    line: u64,
    fields: Vec<String>,
}

fn csv_rows(text: &str, required: &[&str], optional: &[&str]) -> std::result::Result<Rows, Vec<RecordError>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| vec![record_error(1, e.to_string())])?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut columns = Vec::new();
    for name in required {
        match column(name) {
            Some(i) => columns.push(Some(i)),
            None => return Err(vec![record_error(1, format!("missing column {name}"))]),
        }
    }
    columns.extend(optional.iter().map(|name| column(name)));

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(record_error(line, e.to_string()));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            errors.push(record_error(line, format!("expected {} fields, found {}", headers.len(), record.len())));
            continue;
        }
        let fields = columns.iter().map(|c| c.and_then(|i| record.get(i)).unwrap_or("").to_string()).collect();
        rows.push(Row { line, fields });
    }
    Ok((rows, errors))
}

fn json_rows(text: &str, required: &[&str], optional: &[&str]) -> std::result::Result<Rows, Vec<RecordError>> {
    let values: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_str(text).map_err(|e| vec![record_error(e.line() as u64, e.to_string())])?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, object) in values.iter().enumerate() {
        let line = i as u64 + 1;
        let mut fields = Vec::new();
        let mut missing = None;
        for (k, name) in required.iter().chain(optional).enumerate() {
            match object.get(*name) {
                Some(serde_json::Value::String(s)) => fields.push(s.trim().to_string()),
                Some(serde_json::Value::Number(n)) => fields.push(n.to_string()),
                Some(serde_json::Value::Null) | None if k >= required.len() => fields.push(String::new()),
                Some(other) => {
                    missing = Some(format!("{name} has unsupported value {other}"));
                    break;
                }
                None => {
                    missing = Some(format!("missing field {name}"));
                    break;
                }
            }
        }
        match missing {
            Some(message) => errors.push(record_error(line, message)),
            None => rows.push(Row { line, fields }),
        }
    }
    Ok((rows, errors))
}

fn token(field: &str, name: &str) -> std::result::Result<TokenId, String> {
    TokenId::new(field).map_err(|_| format!("{name} is empty"))
}

/// Plain decimal or scientific notation; no thousands separators, no
/// infinities or NaN.
fn number(field: &str, name: &str) -> std::result::Result<f64, String> {
    let ok = !field.is_empty() && field.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    match field.parse::<f64>() {
        Ok(v) if ok && v.is_finite() => Ok(v),
        _ => Err(format!("{name} is not a finite decimal number: {field:?}")),
    }
}

fn pool_from_row(row: &Row) -> std::result::Result<Pool, String> {
    let f = &row.fields;
    let a = token(&f[0], "token_a")?;
    let b = token(&f[1], "token_b")?;
    let ra = number(&f[2], "reserve_a")?;
    let rb = number(&f[3], "reserve_b")?;
    let fee = if f[4].is_empty() { DEFAULT_FEE_RATE } else { number(&f[4], "fee_rate")? };
    if ra <= 0.0 || rb <= 0.0 {
        return Err(format!("reserves must be positive, got {ra} and {rb}"));
    }
    Pool::new(a, b, ra, rb, fee).map_err(|e| e.to_string())
}

/// Serialize pools; reserves use the shortest representation that parses
/// back to the same bits.
pub fn snapshot_to_string(pools: &[Pool], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("token_a,token_b,reserve_a,reserve_b,fee_rate\n");
            for p in pools {
                writeln!(out, "{},{},{},{},{}", p.token_a(), p.token_b(), p.reserve_a(), p.reserve_b(), p.fee_rate()).unwrap();
            }
        }
        Format::Json => {
            let rows: Vec<_> = pools
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "token_a": p.token_a().as_str(),
                        "token_b": p.token_b().as_str(),
                        "reserve_a": p.reserve_a(),
                        "reserve_b": p.reserve_b(),
                        "fee_rate": p.fee_rate(),
                    })
                })
                .collect();
            out = serde_json::to_string_pretty(&rows).expect("plain values serialize");
            out.push('\n');
        }
    }
    out
}

pub fn prices_to_string(prices: &PriceTable, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("token,usd_price\n");
            for (t, p) in prices.iter() {
                writeln!(out, "{t},{p}").unwrap();
            }
        }
        Format::Json => {
            let rows: Vec<_> =
                prices.iter().map(|(t, p)| serde_json::json!({ "token": t.as_str(), "usd_price": p })).collect();
            out = serde_json::to_string_pretty(&rows).expect("plain values serialize");
            out.push('\n');
        }
    }
    out
}

/// Random market of `tokens` tokens and `pools` distinct pairs, seeded.
///
/// Prices are log-uniform in [0.01, 1000] USD and pool TVL log-uniform in
/// [10k, 10M] USD, split evenly between the sides and then skewed by up to
/// ±3% so that some loops carry arbitrage. The pool graph contains a
/// spanning tree so every token is reachable.
pub fn synthetic_market(tokens: usize, pools: usize, seed: u64) -> Result<(Vec<Pool>, PriceTable)> {
    let max_pairs = tokens * tokens.saturating_sub(1) / 2;
    if tokens < 2 || pools + 1 < tokens || pools > max_pairs {
        return Err(Error::InvalidPool(format!("cannot place {pools} pools on {tokens} tokens")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<TokenId> = (0..tokens).map(|i| TokenId::new(format!("TK{i:03}")).expect("non-empty")).collect();
    let prices: PriceTable = names.iter().map(|t| (t.clone(), 10f64.powf(rng.gen_range(-2.0..3.0)))).collect();

    let mut pairs = BTreeSet::new();
    let mut order: Vec<usize> = (0..tokens).collect();
    order.shuffle(&mut rng);
    for k in 1..tokens {
        let parent = order[rng.gen_range(0..k)];
        pairs.insert(sorted_pair(order[k], parent));
    }
    let mut all: Vec<(usize, usize)> =
        (0..tokens).flat_map(|i| (i + 1..tokens).map(move |j| (i, j))).filter(|p| !pairs.contains(p)).collect();
    all.shuffle(&mut rng);
    pairs.extend(all.into_iter().take(pools - pairs.len()));

    let mut out = Vec::with_capacity(pools);
    for (i, j) in pairs {
        let (pa, pb) = (prices.get(&names[i]).unwrap(), prices.get(&names[j]).unwrap());
        let tvl = 10f64.powf(rng.gen_range(4.0..7.0));
        let skew = 1.0 + rng.gen_range(-0.03..0.03);
        let ra = tvl / 2.0 / pa * skew;
        let rb = tvl / 2.0 / pb / skew;
        out.push(Pool::new(names[i].clone(), names[j].clone(), ra, rb, DEFAULT_FEE_RATE)?);
    }
    Ok((out, prices))
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fee_column_is_optional() {
        let text = "token_a,token_b,reserve_a,reserve_b\nX,Y,100,200\n";
        let pools = parse_snapshot(text, Format::Csv).unwrap();
        assert_eq!(pools[0].fee_rate(), DEFAULT_FEE_RATE);
        let text = "token_a,token_b,reserve_a,reserve_b,fee_rate\nX,Y,100,200,\nY,Z,1,2,0.01\n";
        let pools = parse_snapshot(text, Format::Csv).unwrap();
        assert_eq!(pools[0].fee_rate(), DEFAULT_FEE_RATE);
        assert_eq!(pools[1].fee_rate(), 0.01);
    }

    #[test]
    fn every_bad_line_is_reported() {
        let text = "token_a,token_b,reserve_a,reserve_b\nX,Y,0,200\nX,X,1,2\nA,B,1,000,2\nA,B,1e3,nan\nC,D,5,6\n";
        let errors = parse_snapshot(text, Format::Csv).unwrap_err();
        let lines: Vec<u64> = errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 5]);
        assert!(errors[0].message.contains("positive"));
    }

    #[test]
    fn thousands_separators_are_rejected() {
        assert!(number("1,000", "x").is_err());
        assert!(number("1 000", "x").is_err());
        assert!(number("inf", "x").is_err());
        assert_eq!(number("1.5e3", "x").unwrap(), 1500.0);
    }

    #[test]
    fn missing_column_is_reported_on_the_header() {
        let errors = parse_snapshot("token_a,token_b,reserve_a\nX,Y,1\n", Format::Csv).unwrap_err();
        assert_eq!(errors[0].line, 1);
        assert!(errors[0].message.contains("reserve_b"));
    }

    #[test]
    fn json_records() {
        let text = r#"[{"token_a":"X","token_b":"Y","reserve_a":100,"reserve_b":"200"},
                       {"token_a":"Y","token_b":"Z","reserve_a":1,"reserve_b":2,"fee_rate":0.01}]"#;
        let pools = parse_snapshot(text, Format::Json).unwrap();
        assert_eq!(pools.len(), 2);
        assert_eq!(pools[0].reserve_b(), 200.0);
        let errors = parse_snapshot(r#"[{"token_a":"X","token_b":"Y","reserve_a":1}]"#, Format::Json).unwrap_err();
        assert_eq!(errors[0].line, 1);
    }

    #[test]
    fn prices_reject_duplicates_and_negatives() {
        let errors = parse_prices("token,usd_price\nX,2\nY,-1\nX,3\n", Format::Csv).unwrap_err();
        assert_eq!(errors.len(), 2);
        assert_eq!(errors[0].line, 3);
        assert!(errors[1].message.contains("duplicate") && errors[1].message.contains("line 2"));
    }

    #[test]
    fn synthetic_market_shape() {
        let (pools, prices) = synthetic_market(51, 208, 1).unwrap();
        assert_eq!(pools.len(), 208);
        assert_eq!(prices.len(), 51);
        let pairs: BTreeSet<_> = pools.iter().map(|p| (p.token_a().clone(), p.token_b().clone())).collect();
        assert_eq!(pairs.len(), 208);
        assert_eq!(synthetic_market(51, 208, 1).unwrap().0, pools);
        assert!(synthetic_market(4, 7, 1).is_err());
    }
}
