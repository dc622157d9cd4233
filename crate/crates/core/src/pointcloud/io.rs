//! Text point-cloud formats.
//!
//! `xyz-text`: one point per line, whitespace separated,
//! `x y z [r g b] [nx ny nz] [label]` with the same arity on every row.
//! Lines starting with `#` and blank lines are skipped. Accepted arities are
//! 3, 4, 6, 7, 9 and 10; three extra columns are read as color, six as
//! color followed by normals.
//!
//! `ply-ascii`: the `vertex` element must carry `x`, `y`, `z`; optional
//! `red`/`green`/`blue` (integer types are scaled by 1/255), `nx`/`ny`/`nz`
//! and `label` (or `class`) properties are picked up. Binary PLY is rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    XyzText,
    PlyAscii,
}

impl CloudFormat {
    /// Guesses the format from a file extension (`.ply` vs anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::XyzText,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz-text" | "xyz" => Ok(CloudFormat::XyzText),
            "ply-ascii" | "ply" => Ok(CloudFormat::PlyAscii),
            other => Err(Error::invalid(format!("unknown cloud format {other:?}"))),
        }
    }
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match format {
        CloudFormat::XyzText => parse_xyz(&text, path),
        CloudFormat::PlyAscii => parse_ply(&text, path),
    }
}

/// Writes the valid points of `cloud` as xyz-text with six decimals.
///
/// A single constant-1.0 feature channel is omitted (it is what loading adds
/// back); otherwise the cloud must have 3 or 6 feature channels.
pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_xyz(cloud)?)?;
    Ok(())
}

pub fn format_xyz(cloud: &PointCloud) -> Result<String> {
    let f = cloud.feature_dim();
    let constant = f == 1 && cloud.valid_indices().all(|i| cloud.features().get(i, 0) == 1.0);
    let write_features = match f {
        _ if constant => false,
        3 | 6 => true,
        _ => {
            return Err(Error::Unsupported(format!(
                "xyz-text stores 0, 3 or 6 feature columns, cloud has {f}"
            )))
        }
    };

    let mut header = String::from("# x y z");
    if write_features {
        header.push_str(" r g b");
        if f == 6 {
            header.push_str(" nx ny nz");
        }
    }
    if cloud.labels().is_some() {
        header.push_str(" label");
    }

    let mut out = header;
    out.push('\n');
    for i in cloud.valid_indices() {
        let p = cloud.positions()[i];
        let _ = write!(out, "{:.6} {:.6} {:.6}", p[0], p[1], p[2]);
        if write_features {
            for v in cloud.features().row(i) {
                let _ = write!(out, " {v:.6}");
            }
        }
        if let Some(labels) = cloud.labels() {
            let _ = write!(out, " {}", labels[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_label(token: &str, path: &Path, line: usize) -> Result<usize> {
    if let Ok(v) = token.parse::<usize>() {
        return Ok(v);
    }
    match token.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 => Ok(v as usize),
        _ => Err(parse_err(path, line, format!("invalid label {token:?}"))),
    }
}

fn parse_real(token: &str, path: &Path, line: usize) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(path, line, format!("invalid number {token:?}"))),
    }
}

pub(crate) fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut arity = None;
    let mut positions = Vec::new();
    let mut features = Vec::new();
    let mut labels = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let n = tokens.len();
        match arity {
            None => {
                if !matches!(n, 3 | 4 | 6 | 7 | 9 | 10) {
                    return Err(parse_err(path, line, format!("unsupported row arity {n}")));
                }
                arity = Some(n);
            }
            Some(a) if a != n => {
                return Err(parse_err(
                    path,
                    line,
                    format!("row has {n} columns, previous rows have {a}"),
                ))
            }
            _ => {}
        }
        let has_label = n % 3 == 1;
        let value_cols = if has_label { n - 1 } else { n };
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = parse_real(tokens[a], path, line)?;
        }
        positions.push(p);
        for t in &tokens[3..value_cols] {
            features.push(parse_real(t, path, line)?);
        }
        if has_label {
            labels.push(parse_label(tokens[n - 1], path, line)?);
        }
    }

    let Some(arity) = arity else {
        return Err(Error::EmptyInput(format!("{} has no points", path.display())));
    };
    let n = positions.len();
    let f = if arity % 3 == 1 { arity - 4 } else { arity - 3 };
    let features = if f == 0 {
        Matrix::filled(n, 1, 1.0)
    } else {
        Matrix::from_vec(n, f, features)?
    };
    let labels = (arity % 3 == 1).then_some(labels);
    PointCloud::new(positions, features, labels, vec![true; n])
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

#[derive(Debug)]
struct PlyProperty {
    name: String,
    integer: bool,
    list: bool,
}

fn is_integer_type(t: &str) -> bool {
    matches!(
        t,
        "char"
            | "uchar"
            | "short"
            | "ushort"
            | "int"
            | "uint"
            | "int8"
            | "uint8"
            | "int16"
            | "uint16"
            | "int32"
            | "uint32"
    )
}

pub(crate) fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((line, _)) => return Err(parse_err(path, line, "missing `ply` magic")),
        None => return Err(Error::EmptyInput(format!("{} is empty", path.display()))),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (line, l) in lines.by_ref() {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => saw_format = true,
            ["format", kind, _] => {
                return Err(Error::Unsupported(format!(
                    "PLY format {kind} (only ascii is supported)"
                )))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("bad element count {count:?}")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line, "property before element"))?;
                el.properties.push(PlyProperty {
                    name: name.to_string(),
                    integer: true,
                    list: true,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line, "property before element"))?;
                el.properties.push(PlyProperty {
                    name: name.to_string(),
                    integer: is_integer_type(ty),
                    list: false,
                });
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(path, line, format!("unrecognized header line {l:?}"))),
        }
    }
    if !saw_format || !header_done {
        return Err(parse_err(path, 1, "incomplete PLY header"));
    }

    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(path, 1, "no vertex element"))?;
    let vertex = &elements[vertex_pos];
    if vertex.properties.iter().any(|p| p.list) {
        return Err(Error::Unsupported("list properties on vertices".into()));
    }
    let col = |name: &str| vertex.properties.iter().position(|p| p.name == name);
    let (Some(cx), Some(cy), Some(cz)) = (col("x"), col("y"), col("z")) else {
        return Err(parse_err(path, 1, "vertex element lacks x/y/z"));
    };
    let rgb = match (col("red"), col("green"), col("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let normals = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let label_col = col("label").or_else(|| col("class"));

    let mut data = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with("comment"));
    // Skip elements stored before the vertices.
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            data.next()
                .ok_or_else(|| parse_err(path, 0, format!("truncated {} element", el.name)))?;
        }
    }

    let n = vertex.count;
    if n == 0 {
        return Err(Error::EmptyInput(format!("{} has no vertices", path.display())));
    }
    let f = rgb.map_or(0, |_| 3) + normals.map_or(0, |_| 3);
    let mut positions = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * f.max(1));
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, l) = data
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("expected {n} vertices")))?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() != vertex.properties.len() {
            return Err(parse_err(
                path,
                line,
                format!(
                    "vertex row has {} values, header declares {}",
                    tokens.len(),
                    vertex.properties.len()
                ),
            ));
        }
        let value = |c: usize| parse_real(tokens[c], path, line);
        positions.push([value(cx)?, value(cy)?, value(cz)?]);
        if let Some(cols) = rgb {
            for c in cols {
                let scale = if vertex.properties[c].integer {
                    1.0 / 255.0
                } else {
                    1.0
                };
                features.push(value(c)? * scale);
            }
        }
        if let Some(cols) = normals {
            for c in cols {
                features.push(value(c)?);
            }
        }
        if let Some(c) = label_col {
            labels.push(parse_label(tokens[c], path, line)?);
        }
    }

    let features = if f == 0 {
        Matrix::filled(n, 1, 1.0)
    } else {
        Matrix::from_vec(n, f, features)?
    };
    PointCloud::new(positions, features, label_col.map(|_| labels), vec![true; n])
}

/// Writes an ascii PLY with float positions and uchar colors per point.
pub fn format_ply_colored(positions: &[[f64; 3]], colors: &[[u8; 3]]) -> Result<String> {
    if positions.len() != colors.len() {
        return Err(Error::shape(format!(
            "{} positions but {} colors",
            positions.len(),
            colors.len()
        )));
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", positions.len());
    out.push_str(
        "property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for (p, c) in positions.iter().zip(colors) {
        let _ = writeln!(
            out,
            "{:.6} {:.6} {:.6} {} {} {}",
            p[0], p[1], p[2], c[0], c[1], c[2]
        );
    }
    Ok(out)
}
