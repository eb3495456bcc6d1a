//! Option-chain ingestion: forward and discount factor from put-call parity,
//! then implied total variance slices.
//!
//! Input is delimited text with a header row and columns
//! `expiry,strike,kind,bid,ask` plus an optional `spot` column. Expiries are
//! ISO dates, `kind` is `call` or `put`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{implied_total_vol, price, MoneyVol, OptionKind};
use crate::calibration::MarketSlice;
use crate::error::{Error, Result};
use crate::svi::{svi, SviParams};

/// Discount factors above this value are treated as corrupt data.
pub const MAX_PLAUSIBLE_DISCOUNT: f64 = 1.1;
pub const DAYS_PER_YEAR: f64 = 365.25;
const REQUIRED_COLUMNS: [&str; 5] = ["expiry", "strike", "kind", "bid", "ask"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub expiry: NaiveDate,
    pub strike: f64,
    pub kind: OptionKind,
    pub bid: f64,
    pub ask: f64,
}

impl OptionQuote {
    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::Domain(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.bid >= 0.0 && self.bid.is_finite()) {
            return Err(Error::Domain(format!("bid must be non-negative, got {}", self.bid)));
        }
        if !(self.ask >= self.bid && self.ask.is_finite()) {
            return Err(Error::Domain(format!("ask {} below bid {}", self.ask, self.bid)));
        }
        Ok(())
    }
}

/// Quotes of a single expiry, sorted by strike then kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    pub expiry: NaiveDate,
    pub spot: Option<f64>,
    pub quotes: Vec<OptionQuote>,
}

impl OptionChain {
    /// Builds a chain, rejecting invalid quotes and duplicate (strike, kind)
    /// pairs.
    pub fn new(expiry: NaiveDate, spot: Option<f64>, mut quotes: Vec<OptionQuote>) -> Result<Self> {
        for q in &quotes {
            q.validate()?;
            if q.expiry != expiry {
                return Err(Error::Domain(format!("quote expiry {} differs from chain expiry {expiry}", q.expiry)));
            }
        }
        quotes.sort_by(|a, b| a.strike.total_cmp(&b.strike).then((a.kind as u8).cmp(&(b.kind as u8))));
        if let Some(w) = quotes.windows(2).find(|w| w[0].strike == w[1].strike && w[0].kind == w[1].kind) {
            return Err(Error::Domain(format!("duplicate {:?} quote at strike {}", w[0].kind, w[0].strike)));
        }
        Ok(Self { expiry, spot, quotes })
    }

    /// Call and put quotes per strike, ascending.
    pub fn by_strike(&self) -> Vec<(f64, Option<OptionQuote>, Option<OptionQuote>)> {
        let mut map: BTreeMap<u64, (f64, Option<OptionQuote>, Option<OptionQuote>)> = BTreeMap::new();
        for q in &self.quotes {
            // positive floats order like their bit patterns
            let e = map.entry(q.strike.to_bits()).or_insert((q.strike, None, None));
            match q.kind {
                OptionKind::Call => e.1 = Some(*q),
                OptionKind::Put => e.2 = Some(*q),
            }
        }
        map.into_values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardDiscount {
    pub forward: f64,
    pub discount: f64,
    pub residual_rmse: f64,
}

/// Regresses mid call minus mid put on the strike: `C - P = DF * F - DF * K`.
///
/// Every strike quoted on both sides enters the regression; the residual
/// RMSE is reported so that poor fits can be spotted.
pub fn infer_forward_discount(chain: &OptionChain) -> Result<ForwardDiscount> {
    let points: Vec<(f64, f64)> = chain
        .by_strike()
        .into_iter()
        .filter_map(|(k, c, p)| Some((k, c?.mid() - p?.mid())))
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientPairs(points.len()));
    }
    let n = points.len() as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - x_mean).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - x_mean) * (p.1 - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let discount = -slope;
    if !(discount > 0.0) {
        return Err(Error::NonPositiveDiscount(discount));
    }
    if discount > MAX_PLAUSIBLE_DISCOUNT {
        return Err(Error::ImplausibleDiscount(discount));
    }
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(ForwardDiscount { forward: intercept / discount, discount, residual_rmse: (sse / n).sqrt() })
}

/// A quote left out of a slice, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedQuote {
    pub strike: f64,
    pub kind: OptionKind,
    pub reason: String,
}

/// Slice built from a chain, with the quotes that could not be used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolSlice {
    pub slice: MarketSlice,
    pub skipped: Vec<SkippedQuote>,
}

fn invert(k: f64, price: f64, kind: OptionKind) -> std::result::Result<f64, String> {
    implied_total_vol(k, price, kind).map(|theta| theta * theta).map_err(|e| e.to_string())
}

/// Implied total variances of the out-of-the-money quote at each strike
/// (calls at or above the forward, puts below), falling back to the other
/// side when the preferred one is missing.
///
/// Prices are divided by `DF * F` before inversion. A strike is skipped,
/// with a recorded reason, when its bid, mid or ask cannot be inverted.
pub fn build_vol_slice(chain: &OptionChain, fd: &ForwardDiscount, t: f64) -> Result<VolSlice> {
    if !(fd.forward > 0.0 && fd.discount > 0.0) {
        return Err(Error::Domain(format!("invalid forward {} / discount {}", fd.forward, fd.discount)));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("maturity must be positive, got {t}")));
    }
    let scale = fd.discount * fd.forward;
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut skipped = Vec::new();
    for (strike, call, put) in chain.by_strike() {
        let (preferred, other) = if strike >= fd.forward { (call, put) } else { (put, call) };
        let Some(q) = preferred.or(other) else { continue };
        let k = (strike / fd.forward).ln();
        let mut skip = |reason: String| skipped.push(SkippedQuote { strike, kind: q.kind, reason });
        if q.bid <= 0.0 {
            skip("zero bid".into());
            continue;
        }
        let inverted = invert(k, q.bid / scale, q.kind).and_then(|wb| {
            let wm = invert(k, q.mid() / scale, q.kind)?;
            let wa = invert(k, q.ask / scale, q.kind)?;
            Ok((wb, wm, wa))
        });
        match inverted {
            Ok((wb, wm, wa)) => rows.push((k, wb, wm, wa)),
            Err(reason) => skip(reason),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptySlice(format!("no invertible quote for expiry {}", chain.expiry)));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let slice = MarketSlice {
        k: rows.iter().map(|r| r.0).collect(),
        w_mid: rows.iter().map(|r| r.2).collect(),
        w_bid: Some(rows.iter().map(|r| r.1).collect()),
        w_ask: Some(rows.iter().map(|r| r.3).collect()),
        t,
    };
    slice.validate()?;
    Ok(VolSlice { slice, skipped })
}

/// Year fraction between two dates on an actual/365.25 basis.
pub fn year_fraction(valuation: NaiveDate, expiry: NaiveDate) -> Result<f64> {
    let days = (expiry - valuation).num_days();
    if days <= 0 {
        return Err(Error::Domain(format!("expiry {expiry} is not after valuation date {valuation}")));
    }
    Ok(days as f64 / DAYS_PER_YEAR)
}

/// A data row that was not loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub column: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub chains: Vec<OptionChain>,
    pub rejects: Vec<RejectedRow>,
}

impl LoadReport {
    pub fn quote_count(&self) -> usize {
        self.chains.iter().map(|c| c.quotes.len()).sum()
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    expiry: String,
    strike: String,
    kind: String,
    bid: String,
    ask: String,
    #[serde(default)]
    spot: Option<String>,
}

fn parse_number(s: &str, column: &str) -> std::result::Result<f64, (String, String)> {
    s.trim().parse::<f64>().map_err(|e| (column.to_string(), format!("'{s}': {e}")))
}

fn parse_row(raw: &RawRow) -> std::result::Result<(OptionQuote, Option<f64>), (String, String)> {
    let expiry = NaiveDate::parse_from_str(raw.expiry.trim(), "%Y-%m-%d")
        .map_err(|e| ("expiry".to_string(), format!("'{}': {e}", raw.expiry)))?;
    let kind = match raw.kind.trim().to_ascii_lowercase().as_str() {
        "call" | "c" => OptionKind::Call,
        "put" | "p" => OptionKind::Put,
        other => return Err(("kind".into(), format!("unknown option kind '{other}'"))),
    };
    let quote = OptionQuote {
        expiry,
        strike: parse_number(&raw.strike, "strike")?,
        kind,
        bid: parse_number(&raw.bid, "bid")?,
        ask: parse_number(&raw.ask, "ask")?,
    };
    if let Err(e) = quote.validate() {
        let column = if !(quote.strike > 0.0) {
            "strike"
        } else if !(quote.bid >= 0.0) {
            "bid"
        } else {
            "ask"
        };
        return Err((column.into(), e.to_string()));
    }
    let spot = match raw.spot.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(s) => Some(parse_number(s, "spot")?),
    };
    Ok((quote, spot))
}

/// Reads quotes and groups them into chains by expiry.
///
/// Rows with unparsable or invalid values and duplicate (expiry, strike,
/// kind) rows are collected in `rejects`. A missing required column or a
/// structurally broken file is a `Parse` error.
pub fn load_chain<R: Read>(reader: R) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    if headers.is_empty() {
        return Ok(LoadReport { chains: Vec::new(), rejects: Vec::new() });
    }
    for col in REQUIRED_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse { row: 0, column: col.into(), message: "missing required column".into() });
        }
    }

    let mut rejects = Vec::new();
    let mut by_expiry: BTreeMap<NaiveDate, (Option<f64>, Vec<OptionQuote>)> = BTreeMap::new();
    for (i, record) in rdr.deserialize::<RawRow>().enumerate() {
        let row = i + 1;
        let raw = record.map_err(|e| csv_error(&e))?;
        let (quote, spot) = match parse_row(&raw) {
            Ok(v) => v,
            Err((column, reason)) => {
                rejects.push(RejectedRow { row, column: Some(column), reason });
                continue;
            }
        };
        let entry = by_expiry.entry(quote.expiry).or_insert((None, Vec::new()));
        if entry.1.iter().any(|q| q.strike == quote.strike && q.kind == quote.kind) {
            rejects.push(RejectedRow { row, column: None, reason: "duplicate strike and kind".into() });
            continue;
        }
        entry.0 = entry.0.or(spot);
        entry.1.push(quote);
    }
    let chains = by_expiry
        .into_iter()
        .map(|(expiry, (spot, quotes))| OptionChain::new(expiry, spot, quotes))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadReport { chains, rejects })
}

pub fn load_chain_file(path: impl AsRef<Path>) -> Result<LoadReport> {
    load_chain(std::fs::File::open(path)?)
}

fn csv_error(e: &csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { row, column: String::new(), message: e.to_string() }
}

/// Writes quotes in the input format read by [`load_chain`].
pub fn write_chain<W: std::io::Write>(chains: &[OptionChain], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["expiry", "strike", "kind", "bid", "ask", "spot"]).map_err(io)?;
    for c in chains {
        for q in &c.quotes {
            let kind = match q.kind {
                OptionKind::Call => "call",
                OptionKind::Put => "put",
            };
            let spot = c.spot.map_or_else(String::new, |s| s.to_string());
            w.write_record([
                q.expiry.to_string(),
                q.strike.to_string(),
                kind.to_string(),
                q.bid.to_string(),
                q.ask.to_string(),
                spot,
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Call and put quotes priced off an SVI smile, with `bid = ask` at the
/// model price: `DF * F * C(k, sqrt(w(k)))` for each strike.
pub fn synthetic_chain(
    params: &SviParams,
    forward: f64,
    discount: f64,
    strikes: &[f64],
    expiry: NaiveDate,
) -> Result<OptionChain> {
    let mut quotes = Vec::with_capacity(2 * strikes.len());
    for &strike in strikes {
        let k = (strike / forward).ln();
        let mv = MoneyVol::new(k, svi(params, k).sqrt())?;
        for kind in [OptionKind::Call, OptionKind::Put] {
            let p = discount * forward * price(mv, kind);
            quotes.push(OptionQuote { expiry, strike, kind, bid: p, ask: p });
        }
    }
    OptionChain::new(expiry, None, quotes)
}

/// Slice file contents: the slice plus the forward and discount it was
/// built with. Plain [`MarketSlice`] documents load as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_rmse: Option<f64>,
    #[serde(flatten)]
    pub slice: MarketSlice,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedQuote>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn flat(theta: f64) -> SviParams {
        SviParams { a: theta * theta, b: 0.0, rho: 0.0, m: 0.0, sigma: 0.1 }
    }

    fn strikes() -> Vec<f64> {
        (0..21).map(|i| 60.0 + 4.0 * i as f64).collect()
    }

    #[test]
    fn parity_exact_chain_recovers_forward_and_discount() {
        let chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &strikes(), date("2025-06-20")).unwrap();
        let fd = infer_forward_discount(&chain).unwrap();
        assert_abs_diff_eq!(fd.forward, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fd.discount, 0.99, epsilon = 1e-12);
        assert!(fd.residual_rmse < 1e-12);
    }

    #[test]
    fn noisy_mids_stay_close() {
        let mut chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &strikes(), date("2025-06-20")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in &mut chain.quotes {
            let e = rng.gen_range(-0.01..0.01);
            q.bid += e;
            q.ask += e;
        }
        let fd = infer_forward_discount(&chain).unwrap();
        assert!((fd.forward - 100.0).abs() < 0.1);
        assert!((fd.discount - 0.99).abs() < 1e-3);
        // difference of two U(-0.01, 0.01) has standard deviation 0.0082
        assert!(fd.residual_rmse > 0.002 && fd.residual_rmse < 0.02, "{}", fd.residual_rmse);
    }

    #[test]
    fn single_strike_is_not_enough() {
        let chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &[100.0], date("2025-06-20")).unwrap();
        assert_eq!(infer_forward_discount(&chain), Err(Error::InsufficientPairs(1)));
    }

    #[test]
    fn corrupt_parity_is_rejected() {
        let mut chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &[90.0, 110.0], date("2025-06-20")).unwrap();
        for q in &mut chain.quotes {
            if q.kind == OptionKind::Put {
                q.bid *= 50.0;
                q.ask *= 50.0;
            }
        }
        assert!(matches!(infer_forward_discount(&chain), Err(Error::ImplausibleDiscount(_))));
        for q in &mut chain.quotes {
            if q.kind == OptionKind::Put && q.strike == 90.0 {
                q.bid = 1000.0;
                q.ask = 1000.0;
            }
        }
        assert!(matches!(infer_forward_discount(&chain), Err(Error::NonPositiveDiscount(_))));
    }

    #[test]
    fn flat_smile_gives_flat_variance() {
        let chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &strikes(), date("2025-06-20")).unwrap();
        let fd = ForwardDiscount { forward: 100.0, discount: 0.99, residual_rmse: 0.0 };
        let vs = build_vol_slice(&chain, &fd, 1.0).unwrap();
        assert_eq!(vs.slice.len(), 21);
        assert!(vs.skipped.is_empty());
        for w in &vs.slice.w_mid {
            assert_abs_diff_eq!(*w, 0.04, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_bid_is_skipped_and_recorded() {
        let mut chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &strikes(), date("2025-06-20")).unwrap();
        let q = chain.quotes.iter_mut().find(|q| q.strike == 140.0 && q.kind == OptionKind::Call).unwrap();
        q.bid = 0.0;
        let fd = ForwardDiscount { forward: 100.0, discount: 0.99, residual_rmse: 0.0 };
        let vs = build_vol_slice(&chain, &fd, 1.0).unwrap();
        assert_eq!(vs.slice.len(), 20);
        assert_eq!(vs.skipped.len(), 1);
        assert_eq!(vs.skipped[0].strike, 140.0);
        assert_eq!(vs.skipped[0].reason, "zero bid");
    }

    #[test]
    fn bid_ask_order_is_preserved() {
        let mut chain = synthetic_chain(&flat(0.25), 100.0, 0.98, &strikes(), date("2025-06-20")).unwrap();
        for q in &mut chain.quotes {
            q.ask *= 1.02;
            q.bid *= 0.98;
        }
        let fd = ForwardDiscount { forward: 100.0, discount: 0.98, residual_rmse: 0.0 };
        let vs = build_vol_slice(&chain, &fd, 1.0).unwrap();
        let s = &vs.slice;
        let (bid, ask) = (s.w_bid.as_ref().unwrap(), s.w_ask.as_ref().unwrap());
        for i in 0..s.len() {
            assert!(bid[i] <= s.w_mid[i] && s.w_mid[i] <= ask[i]);
        }
    }

    #[test]
    fn no_usable_quote_is_an_empty_slice() {
        let mut chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &[90.0, 110.0], date("2025-06-20")).unwrap();
        chain.quotes.iter_mut().for_each(|q| q.bid = 0.0);
        let fd = ForwardDiscount { forward: 100.0, discount: 0.99, residual_rmse: 0.0 };
        assert!(matches!(build_vol_slice(&chain, &fd, 1.0), Err(Error::EmptySlice(_))));
    }

    #[test]
    fn loads_and_rejects_rows() {
        let text = "expiry,strike,kind,bid,ask,spot\n\
                    2025-06-20,90,call,11.0,11.2,100\n\
                    2025-06-20,90,put,1.0,1.1,\n\
                    2025-06-20,110,call,1.2,1.0,\n\
                    2025-06-20,110,put,abc,10.1,\n\
                    2025-09-19,100,call,5.0,5.2,\n\
                    2025-09-19,100,call,5.0,5.2,\n\
                    2025-13-01,100,put,5.0,5.2,\n";
        let rep = load_chain(text.as_bytes()).unwrap();
        assert_eq!(rep.chains.len(), 2);
        assert_eq!(rep.quote_count(), 3);
        assert_eq!(rep.chains[0].spot, Some(100.0));
        let rows: Vec<usize> = rep.rejects.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![3, 4, 6, 7]);
        assert_eq!(rep.rejects[0].column.as_deref(), Some("ask"));
        assert_eq!(rep.rejects[1].column.as_deref(), Some("bid"));
        assert_eq!(rep.rejects[3].column.as_deref(), Some("expiry"));
    }

    #[test]
    fn empty_input_has_no_chains() {
        let rep = load_chain("".as_bytes()).unwrap();
        assert!(rep.chains.is_empty() && rep.rejects.is_empty());
        let rep = load_chain("expiry,strike,kind,bid,ask\n".as_bytes()).unwrap();
        assert!(rep.chains.is_empty());
    }

    #[test]
    fn missing_column_is_a_parse_error() {
        let err = load_chain("expiry,strike,bid,ask\n2025-06-20,90,1,2\n".as_bytes()).unwrap_err();
        assert_eq!(err, Error::Parse { row: 0, column: "kind".into(), message: "missing required column".into() });
    }

    #[test]
    fn written_chains_load_back() {
        let chain = synthetic_chain(&flat(0.2), 100.0, 0.99, &strikes(), date("2025-06-20")).unwrap();
        let mut buf = Vec::new();
        write_chain(std::slice::from_ref(&chain), &mut buf).unwrap();
        let rep = load_chain(buf.as_slice()).unwrap();
        assert_eq!(rep.chains, vec![chain]);
    }

    #[test]
    fn year_fraction_basis() {
        assert_abs_diff_eq!(year_fraction(date("2025-01-01"), date("2026-01-01")).unwrap(), 365.0 / 365.25);
        assert!(year_fraction(date("2025-01-01"), date("2025-01-01")).is_err());
    }
}
