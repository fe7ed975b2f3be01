//! Delimited-text readers and writers for the dataset classes.
//!
//! All tables are comma separated with a header row. Count grids carry unit
//! ids in the header and one row per time point; event tables use the fixed
//! columns `time,x,y,type,eps_t,eps_s,tile` plus numeric mark columns; the
//! space-time grid uses `start,stop,tile,area` plus covariate columns.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::{EventHistory, EventRecord, StGrid, StGridRow};
use crate::error::{Error, Result};

/// A parsed counts (or generic numeric grid) table.
#[derive(Debug, Clone)]
pub struct CountsTable {
    pub unit_ids: Vec<String>,
    pub values: Array2<f64>,
}

fn reader_from(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("{what}: cannot parse \"{field}\" as a number")))
}

/// Parse a time-by-unit numeric grid with unit ids in the header.
pub fn parse_counts_table(text: &str) -> Result<CountsTable> {
    let mut rdr = reader_from(text);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let unit_ids: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if unit_ids.is_empty() {
        return Err(Error::parse(1, "empty header"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != unit_ids.len() {
            return Err(Error::parse(
                line,
                format!("{} fields, expected {}", rec.len(), unit_ids.len()),
            ));
        }
        let mut row = Vec::with_capacity(unit_ids.len());
        for field in rec.iter() {
            row.push(parse_f64(field, line, "count")?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Invalid("counts table has no data rows".into()));
    }
    let values = Array2::from_shape_fn((rows.len(), unit_ids.len()), |(t, i)| rows[t][i]);
    Ok(CountsTable { unit_ids, values })
}

/// Serialize a counts grid (inverse of [`parse_counts_table`]).
pub fn write_counts_table(unit_ids: &[String], values: &Array2<f64>) -> String {
    let mut out = String::new();
    out.push_str(&unit_ids.join(","));
    out.push('\n');
    for t in 0..values.nrows() {
        let row: Vec<String> = (0..values.ncols())
            .map(|i| format_num(values[[t, i]]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn format_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

const EVENT_CORE_COLS: [&str; 7] = ["time", "x", "y", "type", "eps_t", "eps_s", "tile"];

/// Parse an events table; non-core numeric columns become marks.
pub fn parse_events_table(text: &str) -> Result<Vec<EventRecord>> {
    let mut rdr = reader_from(text);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let mut core_idx = [usize::MAX; 7];
    for (k, want) in EVENT_CORE_COLS.iter().enumerate() {
        core_idx[k] = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| Error::parse(1, format!("events table misses column {want}")))?;
    }
    let mark_cols: Vec<(usize, String)> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| !EVENT_CORE_COLS.contains(&n.as_str()))
        .map(|(i, n)| (i, n.clone()))
        .collect();
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != names.len() {
            return Err(Error::parse(
                line,
                format!("{} fields, expected {}", rec.len(), names.len()),
            ));
        }
        let get = |i: usize| rec.get(i).unwrap_or("");
        let mut marks = BTreeMap::new();
        for (i, name) in &mark_cols {
            marks.insert(name.clone(), parse_f64(get(*i), line, name)?);
        }
        out.push(EventRecord {
            time: parse_f64(get(core_idx[0]), line, "time")?,
            loc: [
                parse_f64(get(core_idx[1]), line, "x")?,
                parse_f64(get(core_idx[2]), line, "y")?,
            ],
            event_type: get(core_idx[3]).to_string(),
            eps_t: parse_f64(get(core_idx[4]), line, "eps_t")?,
            eps_s: parse_f64(get(core_idx[5]), line, "eps_s")?,
            tile: get(core_idx[6]).to_string(),
            marks,
        });
    }
    Ok(out)
}

/// Serialize events (inverse of [`parse_events_table`]).
pub fn write_events_table(records: &[EventRecord]) -> String {
    let mark_names: Vec<String> = records
        .first()
        .map(|r| r.marks.keys().cloned().collect())
        .unwrap_or_default();
    let mut out = String::new();
    out.push_str("time,x,y,type,eps_t,eps_s,tile");
    for m in &mark_names {
        out.push(',');
        out.push_str(m);
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            r.time, r.loc[0], r.loc[1], r.event_type, r.eps_t, r.eps_s, r.tile
        ));
        for m in &mark_names {
            out.push(',');
            out.push_str(&format_num(*r.marks.get(m).unwrap_or(&f64::NAN)));
        }
        out.push('\n');
    }
    out
}

/// Parse the space-time covariate grid.
pub fn parse_stgrid_table(text: &str) -> Result<StGrid> {
    let mut rdr = reader_from(text);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let core = ["start", "stop", "tile", "area"];
    let mut core_idx = [usize::MAX; 4];
    for (k, want) in core.iter().enumerate() {
        core_idx[k] = names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| Error::parse(1, format!("stgrid table misses column {want}")))?;
    }
    let cov_cols: Vec<(usize, String)> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| !core.contains(&n.as_str()))
        .map(|(i, n)| (i, n.clone()))
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let mut covariates = BTreeMap::new();
        for (i, name) in &cov_cols {
            covariates.insert(name.clone(), parse_f64(get(*i), line, name)?);
        }
        rows.push(StGridRow {
            start: parse_f64(get(core_idx[0]), line, "start")?,
            stop: parse_f64(get(core_idx[1]), line, "stop")?,
            tile: get(core_idx[2]).to_string(),
            area: parse_f64(get(core_idx[3]), line, "area")?,
            covariates,
        });
    }
    StGrid::from_rows(rows)
}

/// Parse an edge list ("idA,idB" per line) into a boolean adjacency matrix
/// over `unit_ids`.
pub fn parse_adjacency(text: &str, unit_ids: &[String]) -> Result<Array2<bool>> {
    let n = unit_ids.len();
    let index: BTreeMap<&str, usize> = unit_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut adj = Array2::from_elem((n, n), false);
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split(',');
        let a = parts
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::parse(line, "expected \"idA,idB\""))?;
        let b = parts
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::parse(line, "expected \"idA,idB\""))?;
        if parts.next().is_some() {
            return Err(Error::parse(line, "expected exactly two ids"));
        }
        let ia = *index
            .get(a)
            .ok_or_else(|| Error::parse(line, format!("unknown unit id \"{a}\"")))?;
        let ib = *index
            .get(b)
            .ok_or_else(|| Error::parse(line, format!("unknown unit id \"{b}\"")))?;
        if ia == ib {
            return Err(Error::parse(line, format!("self edge for \"{a}\"")));
        }
        adj[[ia, ib]] = true;
        adj[[ib, ia]] = true;
    }
    Ok(adj)
}

const HISTORY_CORE_COLS: [&str; 11] = [
    "block", "start", "stop", "id", "x", "y", "atRiskY", "event", "Revent", "tI", "tR",
];

/// Serialize an event history as a long table with one row per
/// (block, individual).
pub fn write_event_history_table(h: &EventHistory) -> String {
    let mut out = String::new();
    out.push_str("block,start,stop,id,x,y,atRiskY,event,Revent,tI,tR");
    for name in &h.epi_term_names {
        out.push(',');
        out.push_str(name);
    }
    for name in &h.endemic_cov_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let fmt_opt = |t: Option<f64>| t.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
    for (b, &(start, stop)) in h.blocks.iter().enumerate() {
        for i in 0..h.n_individuals() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                b + 1,
                start,
                stop,
                h.ids[i],
                h.coords[i][0],
                h.coords[i][1],
                h.at_risk[[b, i]],
                u8::from(h.infection_event[b] == Some(i)),
                u8::from(h.removal_event[b] == Some(i)),
                fmt_opt(h.t_inf[i]),
                fmt_opt(h.t_rem[i]),
            ));
            for term in &h.epi_terms {
                out.push(',');
                out.push_str(&format_num(term[[b, i]]));
            }
            for c in 0..h.endemic_cov_names.len() {
                out.push(',');
                out.push_str(&format_num(h.endemic_covs[[i, c]]));
            }
            out.push('\n');
        }
    }
    out
}

/// Parse an event history table written by [`write_event_history_table`]
/// (or exported from elsewhere with the same columns).
///
/// Extra columns become epidemic-term grids; the model spec decides which of
/// them act as epidemic or endemic terms at fit time.
pub fn parse_event_history_table(text: &str) -> Result<EventHistory> {
    let mut rdr = reader_from(text);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let find = |want: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| n == want)
            .ok_or_else(|| Error::parse(1, format!("history table misses column {want}")))
    };
    let c_block = find("block")?;
    let c_start = find("start")?;
    let c_stop = find("stop")?;
    let c_id = find("id")?;
    let c_x = find("x")?;
    let c_y = find("y")?;
    let c_atrisk = find("atRiskY")?;
    let c_event = find("event")?;
    let c_revent = find("Revent")?;
    let c_ti = names.iter().position(|n| n == "tI");
    let c_tr = names.iter().position(|n| n == "tR");
    let term_cols: Vec<(usize, String)> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| !HISTORY_CORE_COLS.contains(&n.as_str()))
        .map(|(i, n)| (i, n.clone()))
        .collect();

    struct Row {
        block: usize,
        start: f64,
        stop: f64,
        id: String,
        xy: [f64; 2],
        at_risk: u8,
        event: bool,
        revent: bool,
        t_inf: Option<f64>,
        t_rem: Option<f64>,
        terms: Vec<f64>,
    }
    let parse_opt = |field: &str, line: usize| -> Result<Option<f64>> {
        if field == "NA" || field.is_empty() {
            Ok(None)
        } else {
            parse_f64(field, line, "event time").map(Some)
        }
    };
    let mut rows: Vec<Row> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let block = parse_f64(get(c_block), line, "block")? as usize;
        if block == 0 {
            return Err(Error::parse(line, "block indices are 1-based"));
        }
        let mut terms = Vec::with_capacity(term_cols.len());
        for (i, name) in &term_cols {
            terms.push(parse_f64(get(*i), line, name)?);
        }
        rows.push(Row {
            block: block - 1,
            start: parse_f64(get(c_start), line, "start")?,
            stop: parse_f64(get(c_stop), line, "stop")?,
            id: get(c_id).to_string(),
            xy: [
                parse_f64(get(c_x), line, "x")?,
                parse_f64(get(c_y), line, "y")?,
            ],
            at_risk: parse_f64(get(c_atrisk), line, "atRiskY")? as u8,
            event: parse_f64(get(c_event), line, "event")? != 0.0,
            revent: parse_f64(get(c_revent), line, "Revent")? != 0.0,
            t_inf: c_ti.map(|i| parse_opt(get(i), line)).transpose()?.flatten(),
            t_rem: c_tr.map(|i| parse_opt(get(i), line)).transpose()?.flatten(),
            terms,
        });
    }
    if rows.is_empty() {
        return Err(Error::Invalid("history table has no data rows".into()));
    }
    let mut ids: Vec<String> = Vec::new();
    for r in &rows {
        if !ids.contains(&r.id) {
            ids.push(r.id.clone());
        }
    }
    let n_blocks = rows.iter().map(|r| r.block).max().unwrap() + 1;
    let n = ids.len();
    if rows.len() != n_blocks * n {
        return Err(Error::Invalid(format!(
            "history table is not a full grid: {} rows for {} blocks x {} individuals",
            rows.len(),
            n_blocks,
            n
        )));
    }
    let id_index: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut blocks = vec![(f64::NAN, f64::NAN); n_blocks];
    let mut coords = vec![[f64::NAN, f64::NAN]; n];
    let mut at_risk = Array2::<u8>::zeros((n_blocks, n));
    let mut infection_event: Vec<Option<usize>> = vec![None; n_blocks];
    let mut removal_event: Vec<Option<usize>> = vec![None; n_blocks];
    let mut epi_terms = vec![Array2::<f64>::zeros((n_blocks, n)); term_cols.len()];
    let mut t_inf: Vec<Option<f64>> = vec![None; n];
    let mut t_rem: Vec<Option<f64>> = vec![None; n];
    for r in &rows {
        let i = id_index[r.id.as_str()];
        blocks[r.block] = (r.start, r.stop);
        coords[i] = r.xy;
        at_risk[[r.block, i]] = r.at_risk;
        if r.event {
            if infection_event[r.block].is_some() {
                return Err(Error::Invalid(format!(
                    "more than one infection event in block {}",
                    r.block + 1
                )));
            }
            infection_event[r.block] = Some(i);
            if t_inf[i].is_none() {
                t_inf[i] = Some(r.stop);
            }
        }
        if r.revent {
            if removal_event[r.block].is_some() {
                return Err(Error::Invalid(format!(
                    "more than one removal event in block {}",
                    r.block + 1
                )));
            }
            removal_event[r.block] = Some(i);
            if t_rem[i].is_none() {
                t_rem[i] = Some(r.stop);
            }
        }
        if r.t_inf.is_some() {
            t_inf[i] = r.t_inf;
        }
        if r.t_rem.is_some() {
            t_rem[i] = r.t_rem;
        }
        for (k, v) in r.terms.iter().enumerate() {
            epi_terms[k][[r.block, i]] = *v;
        }
    }
    for (b, w) in blocks.windows(2).enumerate() {
        if (w[0].1 - w[1].0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "history blocks {} and {} are not consecutive",
                b + 1,
                b + 2
            )));
        }
    }
    let t0 = blocks.first().unwrap().0;
    let t_end = blocks.last().unwrap().1;
    Ok(EventHistory {
        ids,
        coords,
        blocks,
        at_risk,
        infection_event,
        removal_event,
        epi_term_names: term_cols.iter().map(|(_, n)| n.clone()).collect(),
        epi_terms,
        endemic_cov_names: vec![],
        endemic_covs: Array2::zeros((n, 0)),
        t0,
        t_end,
        t_inf,
        t_rem,
        basis: vec![],
        pair_covs: vec![],
        covariates: vec![BTreeMap::new(); n],
    })
}

/// Long-format score serialization: unit,time,score,value.
pub fn write_scores_long(
    unit_ids: &[String],
    times: &[usize],
    scores: &[(String, Array2<f64>)],
) -> String {
    let mut out = String::from("unit,time,score,value\n");
    for (name, grid) in scores {
        for (ti, &t) in times.iter().enumerate() {
            for (ui, unit) in unit_ids.iter().enumerate() {
                out.push_str(&format!("{unit},{t},{name},{}\n", grid[[ti, ui]]));
            }
        }
    }
    out
}
