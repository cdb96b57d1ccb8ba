//! Result rows, contribution-graph rows, and their canonical CSV forms.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stacking::StackingMode;

/// One evaluation outcome: a single (parameter point, partition seed,
/// repeat, client, mode) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub regime: String,
    pub params: String,
    pub partition_seed: u64,
    pub repeat: u64,
    pub client_id: u32,
    pub mode: StackingMode,
    pub n_private_rows: usize,
    pub private_ba: f64,
    pub meta_ba: f64,
    pub gain: f64,
    pub self_importance: f64,
    pub importance: f64,
    /// Fraction of class-1 rows in the client's private data.
    pub label_balance: f64,
    /// Mean Jaccard similarity of this client's feature set against all
    /// others; only set for the vertical regime.
    pub jaccard_mean: Option<f64>,
}

/// One contribution edge from a per-(point, seed, repeat, mode) graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRow {
    pub regime: String,
    pub params: String,
    pub partition_seed: u64,
    pub repeat: u64,
    pub mode: StackingMode,
    pub from: u32,
    pub to: u32,
    pub weight: f64,
    /// Jaccard similarity of the endpoint clients' raw feature sets.
    pub jaccard: f64,
}

pub const RESULTS_HEADER: &[&str] = &[
    "regime",
    "params",
    "partition_seed",
    "repeat",
    "client_id",
    "mode",
    "n_private_rows",
    "private_ba",
    "meta_ba",
    "gain",
    "self_importance",
    "importance",
    "label_balance",
    "jaccard_mean",
];

pub const GRAPHS_HEADER: &[&str] = &[
    "regime",
    "params",
    "partition_seed",
    "repeat",
    "mode",
    "from",
    "to",
    "weight",
    "jaccard",
];

/// Print a real with 6 significant digits, shortest form (no trailing
/// zeros). Idempotent under parse-and-reprint.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let s = if (-4..6).contains(&exponent) {
        let decimals = (5 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        let s = format!("{x:.5e}");
        // trim mantissa zeros: "2.50000e-7" -> "2.5e-7"
        let (mantissa, exp) = s.split_once('e').expect("exponential form");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        return format!("{mantissa}e{exp}");
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn sort_key(r: &ResultRow) -> (String, String, u64, u64, u32, String) {
    (
        r.regime.clone(),
        r.params.clone(),
        r.partition_seed,
        r.repeat,
        r.client_id,
        r.mode.to_string(),
    )
}

/// Write rows as CSV with the fixed header, sorted by key fields. The
/// output is a canonical form: parsing and re-writing is byte-identical.
pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by_key(|r| sort_key(r));
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(RESULTS_HEADER)
        .map_err(|e| Error::Csv(e.to_string()))?;
    for r in sorted {
        w.write_record([
            r.regime.as_str(),
            r.params.as_str(),
            &r.partition_seed.to_string(),
            &r.repeat.to_string(),
            &r.client_id.to_string(),
            &r.mode.to_string(),
            &r.n_private_rows.to_string(),
            &format_g6(r.private_ba),
            &format_g6(r.meta_ba),
            &format_g6(r.gain),
            &format_g6(r.self_importance),
            &format_g6(r.importance),
            &format_g6(r.label_balance),
            &r.jaccard_mean.map(format_g6).unwrap_or_default(),
        ])
        .map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if headers.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::ResultsFormat {
            line: 1,
            message: "unexpected results header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let line = i + 2;
        let field = |j: usize| -> &str { record.get(j).unwrap_or("") };
        let parse_f = |j: usize| -> Result<f64> {
            field(j).parse().map_err(|_| Error::ResultsFormat {
                line,
                message: format!("bad float in column {}", RESULTS_HEADER[j]),
            })
        };
        let parse_u = |j: usize| -> Result<u64> {
            field(j).parse().map_err(|_| Error::ResultsFormat {
                line,
                message: format!("bad integer in column {}", RESULTS_HEADER[j]),
            })
        };
        out.push(ResultRow {
            regime: field(0).to_string(),
            params: field(1).to_string(),
            partition_seed: parse_u(2)?,
            repeat: parse_u(3)?,
            client_id: parse_u(4)? as u32,
            mode: field(5).parse()?,
            n_private_rows: parse_u(6)? as usize,
            private_ba: parse_f(7)?,
            meta_ba: parse_f(8)?,
            gain: parse_f(9)?,
            self_importance: parse_f(10)?,
            importance: parse_f(11)?,
            label_balance: parse_f(12)?,
            jaccard_mean: if field(13).is_empty() {
                None
            } else {
                Some(parse_f(13)?)
            },
        });
    }
    Ok(out)
}

/// Write contribution edges, sorted, with the fixed header.
pub fn write_graphs(rows: &[GraphRow], path: impl AsRef<Path>) -> Result<()> {
    let mut sorted: Vec<&GraphRow> = rows.iter().collect();
    sorted.sort_by_key(|g| {
        (
            g.regime.clone(),
            g.params.clone(),
            g.partition_seed,
            g.repeat,
            g.mode.to_string(),
            g.from,
            g.to,
        )
    });
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(GRAPHS_HEADER)
        .map_err(|e| Error::Csv(e.to_string()))?;
    for g in sorted {
        w.write_record([
            g.regime.as_str(),
            g.params.as_str(),
            &g.partition_seed.to_string(),
            &g.repeat.to_string(),
            &g.mode.to_string(),
            &g.from.to_string(),
            &g.to.to_string(),
            &format_g6(g.weight),
            &format_g6(g.jaccard),
        ])
        .map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graphs(path: impl AsRef<Path>) -> Result<Vec<GraphRow>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?;
    if headers.iter().ne(GRAPHS_HEADER.iter().copied()) {
        return Err(Error::ResultsFormat {
            line: 1,
            message: "unexpected graphs header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let line = i + 2;
        let field = |j: usize| -> &str { record.get(j).unwrap_or("") };
        let bad = |what: &str| Error::ResultsFormat {
            line,
            message: what.to_string(),
        };
        out.push(GraphRow {
            regime: field(0).to_string(),
            params: field(1).to_string(),
            partition_seed: field(2).parse().map_err(|_| bad("bad partition_seed"))?,
            repeat: field(3).parse().map_err(|_| bad("bad repeat"))?,
            mode: field(4).parse()?,
            from: field(5).parse().map_err(|_| bad("bad from"))?,
            to: field(6).parse().map_err(|_| bad("bad to"))?,
            weight: field(7).parse().map_err(|_| bad("bad weight"))?,
            jaccard: field(8).parse().map_err(|_| bad("bad jaccard"))?,
        });
    }
    Ok(out)
}
