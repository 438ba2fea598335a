//! ARFF, the attribute-relation file format served by OpenML.

use fairens_core::data::{Column, ColumnKind, Dataset, Value};

use crate::error::{FairensError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeType {
    Numeric,
    Nominal(Vec<String>),
    String,
    Date,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arff {
    pub relation: String,
    pub attributes: Vec<(String, AttributeType)>,
    pub rows: Vec<Vec<Value>>,
}

fn err(line: usize, message: impl Into<String>) -> FairensError {
    FairensError::Arff {
        line,
        message: message.into(),
    }
}

/// Splits on `sep` outside single or double quotes, unquoting and
/// unescaping each token.
fn split_quoted(s: &str, sep: char, line: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut quoted = false;
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match (quote, c) {
            (Some(_), '\\') => {
                if let Some(n) = chars.next() {
                    cur.push(n);
                }
            }
            (Some(q), c) if c == q => quote = None,
            (Some(_), c) => cur.push(c),
            (None, '\'' | '"') if cur.trim().is_empty() => {
                cur.clear();
                quote = Some(c);
                quoted = true;
            }
            (None, c) if c == sep => {
                out.push(finish(&mut cur, &mut quoted));
            }
            (None, c) => cur.push(c),
        }
    }
    if quote.is_some() {
        return Err(err(line, "unterminated quote"));
    }
    out.push(finish(&mut cur, &mut quoted));
    Ok(out)
}

fn finish(cur: &mut String, quoted: &mut bool) -> String {
    let token = if *quoted {
        cur.clone()
    } else {
        cur.trim().to_string()
    };
    cur.clear();
    *quoted = false;
    token
}

/// Name token at the start of `rest` (possibly quoted) and the remainder.
fn take_name(rest: &str, line: usize) -> Result<(String, &str)> {
    let rest = rest.trim_start();
    let first = rest
        .chars()
        .next()
        .ok_or_else(|| err(line, "missing attribute name"))?;
    if first == '\'' || first == '"' {
        let end = rest[1..]
            .find(first)
            .ok_or_else(|| err(line, "unterminated attribute name"))?
            + 1;
        Ok((rest[1..end].to_string(), &rest[end + 1..]))
    } else {
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        Ok((rest[..end].to_string(), &rest[end..]))
    }
}

fn parse_type(spec: &str, line: usize) -> Result<AttributeType> {
    let spec = spec.trim();
    if let Some(body) = spec.strip_prefix('{') {
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| err(line, "unterminated nominal specification"))?;
        let levels = split_quoted(body, ',', line)?
            .into_iter()
            .filter(|l| !l.is_empty())
            .collect();
        return Ok(AttributeType::Nominal(levels));
    }
    let word = spec
        .split_whitespace()
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    match word.as_str() {
        "numeric" | "real" | "integer" => Ok(AttributeType::Numeric),
        "string" => Ok(AttributeType::String),
        "date" => Ok(AttributeType::Date),
        other => Err(err(line, format!("unsupported attribute type `{other}`"))),
    }
}

pub fn parse_arff(text: &str) -> Result<Arff> {
    let mut relation = String::new();
    let mut attributes = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = t.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                relation = take_name(&t["@relation".len()..], line)?.0;
            } else if lower.starts_with("@attribute") {
                let (name, rest) = take_name(&t["@attribute".len()..], line)?;
                attributes.push((name, parse_type(rest, line)?));
            } else if lower.starts_with("@data") {
                in_data = true;
            } else {
                return Err(err(line, format!("unexpected header line `{t}`")));
            }
            continue;
        }
        if t.starts_with('{') {
            return Err(err(line, "sparse ARFF rows are not supported"));
        }
        let tokens = split_quoted(t, ',', line)?;
        if tokens.len() != attributes.len() {
            return Err(err(
                line,
                format!(
                    "{} values for {} attributes",
                    tokens.len(),
                    attributes.len()
                ),
            ));
        }
        let row = tokens
            .into_iter()
            .zip(&attributes)
            .map(|(tok, (name, ty))| {
                if tok == "?" {
                    return Ok(Value::Missing);
                }
                match ty {
                    AttributeType::Numeric => tok
                        .parse::<f64>()
                        .map(Value::Num)
                        .map_err(|_| err(line, format!("`{tok}` is not numeric in `{name}`"))),
                    AttributeType::Nominal(levels) if !levels.contains(&tok) => {
                        Err(err(line, format!("`{tok}` is not a level of `{name}`")))
                    }
                    _ => Ok(Value::Str(tok)),
                }
            })
            .collect::<Result<Vec<Value>>>()?;
        rows.push(row);
    }
    if !in_data {
        return Err(err(text.lines().count(), "no @data section"));
    }
    Ok(Arff {
        relation,
        attributes,
        rows,
    })
}

impl Arff {
    /// Table with `label` (default: the last attribute) as the label column.
    pub fn to_dataset(&self, label: Option<&str>) -> Result<Dataset> {
        let label_at = match label {
            Some(l) => self
                .attributes
                .iter()
                .position(|(n, _)| n == l)
                .ok_or_else(|| FairensError::Config(format!("label attribute `{l}` not found")))?,
            None => self
                .attributes
                .len()
                .checked_sub(1)
                .ok_or_else(|| FairensError::Config("ARFF file has no attributes".into()))?,
        };
        let labels = self.rows.iter().map(|r| r[label_at].clone()).collect();
        let columns = self
            .attributes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != label_at)
            .map(|(j, (name, ty))| Column {
                name: name.clone(),
                kind: match ty {
                    AttributeType::Numeric => ColumnKind::Numeric,
                    _ => ColumnKind::Categorical,
                },
                values: self.rows.iter().map(|r| r[j].clone()).collect(),
            })
            .collect();
        Ok(Dataset::new(columns, labels, None)?)
    }
}
