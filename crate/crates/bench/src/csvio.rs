//! CSV output and the flat key=value experiment-config format.

use std::io::Write;

use longdomain_core::field::FullGridField;

use crate::experiment::{ExperimentConfig, GridSpec, M2History, Method, ResultRow};
use crate::rhs::Case;
use crate::BenchError;

pub const RESULT_HEADER: &str = "case,method,rhs,ell,param,l0,rel_l2_error,h,hprime,runtime_ms,status";

fn opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write result rows with the canonical header. Values use shortest
/// round-trip float formatting, so re-parsing reproduces them exactly.
pub fn write_results<W: Write>(rows: &[ResultRow], mut w: W) -> Result<(), BenchError> {
    writeln!(w, "{RESULT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.case.as_str(),
            r.method.as_str(),
            r.rhs,
            r.ell,
            opt_usize(r.param),
            opt_f64(r.l0),
            opt_f64(r.rel_l2_error),
            r.h,
            r.hprime,
            r.runtime_ms,
            r.status
        )?;
    }
    Ok(())
}

/// History CSV for the enrichment method: one row per outer rank.
pub fn write_history<W: Write>(histories: &[M2History], mut w: W) -> Result<(), BenchError> {
    writeln!(w, "case,rhs,ell,m,inner_iters,rel_error")?;
    for h in histories {
        for &(m, inner, err) in &h.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                h.case.as_str(),
                h.rhs,
                h.ell,
                m,
                inner,
                opt_f64(err)
            )?;
        }
    }
    Ok(())
}

/// Full-grid field export for plotting: one row per node with its spatial
/// coordinates (`x1,x2,value` on the planar cylinder, `x1,x2,x3,value` on
/// the L-shape domain).
pub fn write_field<W: Write>(field: &FullGridField, mut w: W) -> Result<(), BenchError> {
    let gcs = field.gridcs();
    let two_d = gcs.dim() == 1;
    if two_d {
        writeln!(w, "x1,x2,value")?;
    } else {
        writeln!(w, "x1,x2,x3,value")?;
    }
    for (i, &x1) in field.grid1().nodes().iter().enumerate() {
        for (k, c) in gcs.coords().iter().enumerate() {
            if two_d {
                writeln!(w, "{},{},{}", x1, c[0], field.at(i, k))?;
            } else {
                writeln!(w, "{},{},{},{}", x1, c[0], c[1], field.at(i, k))?;
            }
        }
    }
    Ok(())
}

fn parse_f64_list(v: &str) -> Result<Vec<f64>, BenchError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| BenchError::Parse(format!("bad number '{s}'")))
        })
        .collect()
}

fn parse_usize_list(v: &str) -> Result<Vec<usize>, BenchError> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| BenchError::Parse(format!("bad integer '{s}'")))
        })
        .collect()
}

/// Parse the flat `key=value` config format (one pair per line, `#` starts
/// a comment). Recognized keys: `case`, `method`, `rhs`, `ell`, `param`,
/// `l0`, `method_hprime`, `method_min_cells`, `method_max_h`,
/// `reference_hprime`, `reference_min_cells`, `m2_init`
/// (`previous`/`profile`), `m2_inner_tol`, `m2_inner_max`. Lists are comma
/// separated.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, BenchError> {
    let mut case = None;
    let mut method = None;
    let mut rhs: Vec<String> = Vec::new();
    let mut ells: Vec<f64> = Vec::new();
    let mut params: Vec<usize> = Vec::new();
    let mut l0s: Vec<f64> = Vec::new();
    let mut method_hprime = None;
    let mut method_min_cells = 0usize;
    let mut method_max_h = None;
    let mut reference_hprime: Option<f64> = None;
    let mut reference_min_cells = 0usize;
    let mut als = longdomain_core::als::AlsOptions::default();
    let mut m3_margin = 0.05;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            BenchError::Parse(format!("line {}: expected key=value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "case" => case = Some(Case::parse(value)?),
            "method" => method = Some(Method::parse(value)?),
            "rhs" => rhs = value.split(',').map(|s| s.trim().to_owned()).collect(),
            "ell" => ells = parse_f64_list(value)?,
            "param" => params = parse_usize_list(value)?,
            "l0" => l0s = parse_f64_list(value)?,
            "method_hprime" => method_hprime = Some(parse_f64_list(value)?[0]),
            "method_min_cells" => {
                method_min_cells = parse_usize_list(value)?[0];
            }
            "method_max_h" => method_max_h = Some(parse_f64_list(value)?[0]),
            "reference_hprime" => reference_hprime = Some(parse_f64_list(value)?[0]),
            "reference_min_cells" => {
                reference_min_cells = parse_usize_list(value)?[0];
            }
            "m2_init" => {
                als.init = match value {
                    "previous" => longdomain_core::als::InnerInit::PreviousTerm,
                    "profile" => longdomain_core::als::InnerInit::Method1Profile,
                    other => {
                        return Err(BenchError::Parse(format!("unknown m2_init '{other}'")))
                    }
                };
            }
            "m2_inner_tol" => als.inner_tol = parse_f64_list(value)?[0],
            "m2_inner_max" => als.inner_max = parse_usize_list(value)?[0],
            "m3_margin" => m3_margin = parse_f64_list(value)?[0],
            other => {
                return Err(BenchError::Parse(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    let case = case.ok_or_else(|| BenchError::Parse("missing 'case'".into()))?;
    let method = method.ok_or_else(|| BenchError::Parse("missing 'method'".into()))?;
    if rhs.is_empty() {
        return Err(BenchError::Parse("missing 'rhs'".into()));
    }
    if ells.is_empty() {
        return Err(BenchError::Parse("missing 'ell'".into()));
    }
    let defaults = GridSpec::default_for(case);
    let method_grid = GridSpec {
        hprime: method_hprime.unwrap_or(defaults.hprime),
        min_interval_cells: if method_hprime.is_some() {
            method_min_cells
        } else {
            defaults.min_interval_cells
        },
        max_interval_h: method_max_h,
    };
    let reference_grid = reference_hprime.map(|hp| GridSpec {
        hprime: hp,
        min_interval_cells: reference_min_cells,
        max_interval_h: None,
    });
    Ok(ExperimentConfig {
        case,
        method,
        rhs,
        ells,
        params,
        l0s,
        method_grid,
        reference_grid,
        als,
        m3_margin,
    })
}
