//! Plain-text point clouds and point sets.
//!
//! One point per line, coordinates separated by whitespace, `#` starts a
//! comment. A cloud file may carry a `# dim=N` directive; a line then holds
//! either `N` coordinates or `N` coordinates followed by a non-negative
//! weight (weights are normalized to sum to one). Without the directive
//! every column is a coordinate.
//!
//! Point-set files start with a `# qsw-pointset` line followed by
//! `key=value` directives (`construction`, `dim`, `L`, `config`, `seed`,
//! `randomization`, `jittered`). Values are written with 17 significant
//! digits so that files round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qsw_core::ot1d::PointCloud;
use qsw_core::sphere::{CacheKey, Construction, SpherePointSet, SphereRandomization};

use crate::error::{CliError, ParseError, Result};

const POINTSET_MAGIC: &str = "# qsw-pointset";

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, row: &[f64]) {
    for (j, x) in row.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*x));
    }
    out.push('\n');
}

/// Data lines with their 1-based line numbers, comments stripped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

/// `key=value` pairs from comment lines.
fn directives(text: &str) -> impl Iterator<Item = (usize, &str, &str)> {
    text.lines().enumerate().flat_map(|(i, line)| {
        let comment = line.trim_start().strip_prefix('#').unwrap_or("");
        comment.split_whitespace().filter_map(move |tok| tok.split_once('=').map(|(k, v)| (i + 1, k, v)))
    })
}

fn parse_row(line: usize, body: &str) -> Result<Vec<f64>, ParseError> {
    body.split_whitespace()
        .map(|tok| match tok.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(_) => Err(ParseError::line(line, format!("non-finite value `{tok}`"))),
            Err(_) => Err(ParseError::line(line, format!("cannot parse `{tok}` as a number"))),
        })
        .collect()
}

pub fn parse_cloud(text: &str) -> Result<PointCloud, ParseError> {
    let mut dim = None;
    for (line, key, value) in directives(text) {
        if key == "dim" {
            let d = value.parse::<usize>().ok().filter(|&d| d > 0);
            dim = Some(d.ok_or_else(|| ParseError::line(line, format!("bad dimension `{value}`")))?);
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut columns = None;
    let mut last_line = 0;
    for (line, body) in data_lines(text) {
        last_line = line;
        let row = parse_row(line, body)?;
        let want = *columns.get_or_insert(row.len());
        if row.len() != want {
            return Err(ParseError::line(line, format!("expected {want} columns, found {}", row.len())));
        }
        let d = dim.unwrap_or(want);
        if want == d + 1 {
            let w = row[d];
            if w < 0.0 {
                return Err(ParseError::line(line, format!("negative weight {w}")));
            }
            weights.push(w);
        } else if want != d {
            return Err(ParseError::line(line, format!("expected {d} or {} columns for dim={d}, found {want}", d + 1)));
        }
        points.extend_from_slice(&row[..d]);
    }
    let Some(cols) = columns else {
        return Err(ParseError::line(last_line.max(1), "no points"));
    };
    let d = dim.unwrap_or(cols);
    if weights.is_empty() {
        return PointCloud::new(d, points).map_err(|e| ParseError::line(last_line, e.to_string()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(ParseError::line(last_line, "weights sum to zero"));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    PointCloud::weighted(d, points, weights).map_err(|e| ParseError::line(last_line, e.to_string()))
}

pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = format!("# dim={}\n", cloud.dim());
    match cloud.explicit_weights() {
        None => cloud.rows().for_each(|r| push_row(&mut out, r)),
        Some(w) => {
            for (r, &wi) in cloud.rows().zip(w) {
                let mut row = r.to_vec();
                row.push(wi);
                push_row(&mut out, &row);
            }
        }
    }
    out
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_cloud(&text).map_err(|e| CliError::parse(path, e))
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_text(path, &format_cloud(cloud))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn randomization_name(r: SphereRandomization) -> &'static str {
    match r {
        SphereRandomization::None => "none",
        SphereRandomization::PushforwardScramble => "scramble",
        SphereRandomization::PushforwardShift => "shift",
        SphereRandomization::RandomRotation => "rotation",
    }
}

fn randomization_from_name(s: &str) -> Option<SphereRandomization> {
    Some(match s {
        "none" => SphereRandomization::None,
        "scramble" => SphereRandomization::PushforwardScramble,
        "shift" => SphereRandomization::PushforwardShift,
        "rotation" => SphereRandomization::RandomRotation,
        _ => return None,
    })
}

/// Point-set file; `config_hash` is the optimizer fingerprint of the cache key.
pub fn format_pointset(set: &SpherePointSet, config_hash: u64) -> String {
    let mut out = String::from(POINTSET_MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "# construction={} dim={} L={} config={config_hash:016x}",
        set.construction.name(),
        set.dim(),
        set.len()
    );
    let _ = write!(out, "# randomization={} jittered={}", randomization_name(set.randomization), set.jittered);
    if let Some(seed) = set.seed {
        let _ = write!(out, " seed={seed}");
    }
    out.push('\n');
    set.rows().for_each(|r| push_row(&mut out, r));
    out
}

/// Parsed point set and the `config` hash recorded in its header.
pub fn parse_pointset(text: &str) -> Result<(SpherePointSet, u64), ParseError> {
    if text.lines().next().map(str::trim) != Some(POINTSET_MAGIC) {
        return Err(ParseError::line(1, format!("missing `{POINTSET_MAGIC}` header")));
    }
    let (mut construction, mut dim, mut len, mut hash) = (None, None, None, 0u64);
    let (mut randomization, mut jittered, mut seed) = (SphereRandomization::None, false, None);
    for (line, key, value) in directives(text) {
        let bad = || ParseError::line(line, format!("bad value `{value}` for `{key}`"));
        match key {
            "construction" => construction = Some(Construction::from_name(value).ok_or_else(bad)?),
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
            "L" => len = Some(value.parse::<usize>().map_err(|_| bad())?),
            "config" => hash = u64::from_str_radix(value, 16).map_err(|_| bad())?,
            "randomization" => randomization = randomization_from_name(value).ok_or_else(bad)?,
            "jittered" => jittered = value.parse::<bool>().map_err(|_| bad())?,
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
            _ => {}
        }
    }
    let missing = |what: &str| ParseError::line(2, format!("header lacks `{what}=`"));
    let construction = construction.ok_or_else(|| missing("construction"))?;
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let len = len.ok_or_else(|| missing("L"))?;
    let mut rows = Vec::with_capacity(len * dim);
    let mut count = 0;
    let mut last_line = 2;
    for (line, body) in data_lines(text) {
        last_line = line;
        let row = parse_row(line, body)?;
        if row.len() != dim {
            return Err(ParseError::line(line, format!("expected {dim} columns, found {}", row.len())));
        }
        rows.extend(row);
        count += 1;
    }
    if count != len {
        return Err(ParseError::line(last_line, format!("header says L={len} but found {count} rows")));
    }
    let mut set =
        SpherePointSet::from_rows(dim, rows, construction).map_err(|e| ParseError::line(last_line, e.to_string()))?;
    set.randomization = randomization;
    set.jittered = jittered;
    set.seed = seed;
    Ok((set, hash))
}

pub fn read_pointset(path: &Path) -> Result<SpherePointSet> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_pointset(&text).map(|(s, _)| s).map_err(|e| CliError::parse(path, e))
}

/// Whether a parsed point set belongs to `key`.
pub fn matches_key(set: &SpherePointSet, hash: u64, key: &CacheKey) -> bool {
    set.construction == key.construction && set.dim() == key.dim && set.len() == key.len && hash == key.config_hash
}
