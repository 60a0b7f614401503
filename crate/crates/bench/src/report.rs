//! Result rows and their CSV / Markdown rendering.

use crate::config::{Backend, Format, Problem};
use crate::error::{BenchError, Result};

const RPCA_HEADER: [&str; 8] = ["m", "method", "rel_err", "rank_hat", "e_l0", "iters", "time_s", "matvecs"];
const MC_HEADER: [&str; 9] = ["m", "r", "s_dr", "s_m2", "algorithm", "time_s", "iters", "rel_err", "matvecs"];
const CONVERGED: &str = "converged";
const SPEEDUP: &str = "speedup=";

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaRow {
    pub m: usize,
    pub method: String,
    pub rel_err: f64,
    pub rank_hat: usize,
    pub e_l0: usize,
    pub iters: usize,
    pub time_s: f64,
    pub matvecs: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub m: usize,
    pub r: usize,
    pub s_dr: f64,
    /// Sampling density `s / m²`.
    pub s_m2: f64,
    pub algorithm: String,
    pub time_s: f64,
    pub iters: usize,
    pub rel_err: f64,
    pub matvecs: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportRow {
    Rpca(RpcaRow),
    Mc(McRow),
}

impl ReportRow {
    pub fn problem(&self) -> Problem {
        match self {
            Self::Rpca(_) => Problem::Rpca,
            Self::Mc(_) => Problem::Mc,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Self::Rpca(r) => r.converged,
            Self::Mc(r) => r.converged,
        }
    }

    pub fn time_s(&self) -> f64 {
        match self {
            Self::Rpca(r) => r.time_s,
            Self::Mc(r) => r.time_s,
        }
    }

    fn method(&self) -> &str {
        match self {
            Self::Rpca(r) => &r.method,
            Self::Mc(r) => &r.algorithm,
        }
    }

    /// Rows with equal keys come from the same instance.
    fn scenario_key(&self) -> String {
        match self {
            Self::Rpca(r) => format!("{}", r.m),
            Self::Mc(r) => format!("{} {} {}", r.m, r.r, r.s_dr),
        }
    }

    fn fields(&self) -> Vec<String> {
        match self {
            Self::Rpca(r) => vec![
                r.m.to_string(),
                r.method.clone(),
                format_sci(r.rel_err),
                r.rank_hat.to_string(),
                r.e_l0.to_string(),
                r.iters.to_string(),
                format_time(r.time_s),
                r.matvecs.to_string(),
            ],
            Self::Mc(r) => vec![
                r.m.to_string(),
                r.r.to_string(),
                r.s_dr.to_string(),
                format!("{:.3}", r.s_m2),
                r.algorithm.clone(),
                format_time(r.time_s),
                r.iters.to_string(),
                format_sci(r.rel_err),
                r.matvecs.to_string(),
            ],
        }
    }
}

/// Three significant digits with a signed three-digit exponent, `5.27e-006`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:03}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn format_time(t: f64) -> String {
    format!("{t:.2}")
}

/// `baseline_time / blws_time` for every scenario that has both rows, in
/// order of first appearance.
pub fn speedups(rows: &[ReportRow]) -> Vec<f64> {
    let mut keys: Vec<String> = Vec::new();
    for row in rows {
        let key = row.scenario_key();
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .filter_map(|key| {
            let time_of = |backend: Backend| {
                rows.iter()
                    .find(|r| {
                        r.scenario_key() == *key && Backend::from_method(r.problem(), r.method()) == Some(backend)
                    })
                    .map(ReportRow::time_s)
            };
            Some(time_of(Backend::Lanczos)? / time_of(Backend::Blws)?)
        })
        .collect()
}

fn header(problem: Problem, with_flag: bool) -> Vec<&'static str> {
    let mut h: Vec<&str> = match problem {
        Problem::Rpca => RPCA_HEADER.to_vec(),
        Problem::Mc => MC_HEADER.to_vec(),
    };
    if with_flag {
        h.push(CONVERGED);
    }
    h
}

/// Renders `rows` as one table followed by a `speedup=` line per scenario
/// run with both the baseline and the block Lanczos backend.
///
/// A `converged` column is added when some row did not converge.
pub fn emit_table(rows: &[ReportRow], format: Format) -> Result<String> {
    let first = rows.first().ok_or_else(|| BenchError::Report("no rows to emit".into()))?;
    let problem = first.problem();
    if rows.iter().any(|r| r.problem() != problem) {
        return Err(BenchError::Report("rows mix robust PCA and completion results".into()));
    }
    let with_flag = rows.iter().any(|r| !r.converged());
    let header = header(problem, with_flag);
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut f = r.fields();
            if with_flag {
                f.push(r.converged().to_string());
            }
            f
        })
        .collect();

    let mut out = match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| BenchError::Report(e.to_string());
            w.write_record(&header).map_err(io)?;
            for rec in &records {
                w.write_record(rec).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| BenchError::Report(e.to_string()))?;
            String::from_utf8(bytes).expect("csv output is utf-8")
        }
        Format::Markdown => {
            let mut s = format!("| {} |\n", header.join(" | "));
            s.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for rec in &records {
                s.push_str(&format!("| {} |\n", rec.join(" | ")));
            }
            s
        }
    };
    for ratio in speedups(rows) {
        out.push_str(&format!("{SPEEDUP}{ratio:.2}\n"));
    }
    Ok(out)
}

/// Reads back a CSV table written by [`emit_table`]; `speedup=` lines are
/// skipped.
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let body: String = text.lines().filter(|l| !l.starts_with(SPEEDUP)).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let bad = |msg: String| BenchError::Report(msg);
    let head: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_owned).collect();
    let problem = if head.iter().take(RPCA_HEADER.len()).eq(RPCA_HEADER.iter()) {
        Problem::Rpca
    } else if head.iter().take(MC_HEADER.len()).eq(MC_HEADER.iter()) {
        Problem::Mc
    } else {
        return Err(bad(format!("unknown header {head:?}")));
    };
    let width = header(problem, false).len();
    let with_flag = match head.len() - width {
        0 => false,
        1 if head[width] == CONVERGED => true,
        _ => return Err(bad(format!("unknown header {head:?}"))),
    };

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("short record {rec:?}")));
        let num = |i: usize| -> Result<f64> { field(i)?.parse().map_err(|_| bad(format!("bad number in {rec:?}"))) };
        let int = |i: usize| -> Result<u64> { field(i)?.parse().map_err(|_| bad(format!("bad count in {rec:?}"))) };
        let converged = if with_flag { field(width)?.parse().map_err(|_| bad(format!("bad flag in {rec:?}")))? } else { true };
        rows.push(match problem {
            Problem::Rpca => ReportRow::Rpca(RpcaRow {
                m: int(0)? as usize,
                method: field(1)?.to_owned(),
                rel_err: num(2)?,
                rank_hat: int(3)? as usize,
                e_l0: int(4)? as usize,
                iters: int(5)? as usize,
                time_s: num(6)?,
                matvecs: int(7)?,
                converged,
            }),
            Problem::Mc => ReportRow::Mc(McRow {
                m: int(0)? as usize,
                r: int(1)? as usize,
                s_dr: num(2)?,
                s_m2: num(3)?,
                algorithm: field(4)?.to_owned(),
                time_s: num(5)?,
                iters: int(6)? as usize,
                rel_err: num(7)?,
                matvecs: int(8)?,
                converged,
            }),
        });
    }
    Ok(rows)
}
