//! SVG and DOT output for one snapshot.
//!
//! Node radius is `2 + size_scale · m`, where `m` is the chosen measure in
//! percent. Net connectedness can be negative, so for it `m` is shifted by
//! the most negative net value of the snapshot. The view box depends on node
//! positions only, so changing a measure never moves other nodes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use spillnet::rolling::NetworkSnapshot;
use spillnet::FirmMeta;

use crate::error::{CliError, CliResult};

pub const MIN_RADIUS: f64 = 2.0;

/// Per-ticker attribute columns used for colouring.
pub type Attributes = BTreeMap<String, BTreeMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColorBy {
    Region,
    StateOwned,
    Column(String),
}

impl ColorBy {
    fn column(&self) -> &str {
        match self {
            ColorBy::Region => "region",
            ColorBy::StateOwned => "state_owned",
            ColorBy::Column(c) => c,
        }
    }
}

impl FromStr for ColorBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "region" => Ok(ColorBy::Region),
            "state_owned" | "ownership" => Ok(ColorBy::StateOwned),
            _ => match s.strip_prefix("column:") {
                Some(c) if !c.is_empty() => Ok(ColorBy::Column(c.to_string())),
                _ => Err(format!(
                    "expected `region`, `state_owned` or `column:<name>`, got `{s}`"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeBy {
    To,
    From,
    Net,
    Uniform,
}

impl FromStr for SizeBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "to" => Ok(SizeBy::To),
            "from" => Ok(SizeBy::From),
            "net" => Ok(SizeBy::Net),
            "uniform" => Ok(SizeBy::Uniform),
            _ => Err(format!("expected to, from, net or uniform, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub color_by: ColorBy,
    pub size_by: SizeBy,
    pub size_scale: f64,
    pub label_nodes: bool,
    /// Category → colour, on top of the built-in palettes.
    pub palette: BTreeMap<String, String>,
    pub draw_edges: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            color_by: ColorBy::Region,
            size_by: SizeBy::To,
            size_scale: 0.1,
            label_nodes: false,
            palette: BTreeMap::new(),
            draw_edges: false,
        }
    }
}

pub fn default_palette(color_by: &ColorBy) -> BTreeMap<String, String> {
    let pairs: &[(&str, &str)] = match color_by {
        ColorBy::Region => &[
            ("north", "#1f77b4"),
            ("south", "#ff7f0e"),
            ("east", "#2ca02c"),
            ("northeast", "#d62728"),
            ("northwest", "#9467bd"),
            ("southwest", "#8c564b"),
        ],
        ColorBy::StateOwned => &[("true", "#d62728"), ("false", "#1f77b4")],
        ColorBy::Column(_) => &[],
    };
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Parses `cat=colour,cat=colour`.
pub fn parse_palette(s: &str) -> CliResult<BTreeMap<String, String>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
                Ok((k.trim().to_string(), v.trim().to_string()))
            }
            _ => Err(CliError::validation(format!(
                "palette entry `{pair}` is not `category=colour`"
            ))),
        })
        .collect()
}

pub fn attributes_from_meta(meta: &[FirmMeta]) -> Attributes {
    meta.iter()
        .map(|m| {
            let mut a = BTreeMap::new();
            a.insert("name".into(), m.name.clone());
            a.insert("region".into(), m.region.to_string());
            a.insert("state_owned".into(), m.state_owned.to_string());
            a.insert("share_class".into(), format!("{:?}", m.share_class));
            if let Some(p) = &m.parent_ticker {
                a.insert("parent_ticker".into(), p.clone());
            }
            (m.ticker.clone(), a)
        })
        .collect()
}

/// Every column of a metadata CSV, keyed by its `ticker` column.
pub fn attributes_from_csv<R: std::io::Read>(reader: R) -> CliResult<Attributes> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let ticker = headers
        .iter()
        .position(|h| h == "ticker")
        .ok_or_else(|| CliError::validation("metadata has no `ticker` column"))?;
    let mut out = Attributes::new();
    for record in csv.records() {
        let record = record?;
        let row = headers
            .iter()
            .zip(record.iter())
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        out.insert(record[ticker].to_string(), row);
    }
    Ok(out)
}

fn normalise_category(color_by: &ColorBy, raw: &str) -> String {
    match color_by {
        ColorBy::StateOwned => match raw.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => "true".into(),
            "false" | "0" | "no" => "false".into(),
            other => other.into(),
        },
        ColorBy::Region => raw.to_ascii_lowercase(),
        ColorBy::Column(_) => raw.to_string(),
    }
}

/// Category of each firm, in table order.
pub fn categories(
    snapshot: &NetworkSnapshot,
    attrs: &Attributes,
    color_by: &ColorBy,
) -> CliResult<Vec<String>> {
    let column = color_by.column();
    snapshot
        .table
        .firms
        .iter()
        .map(|t| {
            let raw = attrs
                .get(t)
                .ok_or_else(|| CliError::validation(format!("no metadata for firm `{t}`")))?
                .get(column)
                .ok_or_else(|| CliError::validation(format!("metadata has no column `{column}`")))?;
            Ok(normalise_category(color_by, raw))
        })
        .collect()
}

/// Node radii in table order.
pub fn radii(snapshot: &NetworkSnapshot, size_by: SizeBy, size_scale: f64) -> (Vec<f64>, f64) {
    let t = &snapshot.table;
    let (values, offset): (Vec<f64>, f64) = match size_by {
        SizeBy::To => (t.to_others.to_vec(), 0.0),
        SizeBy::From => (t.from_others.to_vec(), 0.0),
        SizeBy::Net => {
            let min = t.net.iter().copied().fold(0.0, f64::min);
            (t.net.to_vec(), -min)
        }
        SizeBy::Uniform => (vec![1.0; t.n_firms()], 0.0),
    };
    (
        values
            .iter()
            .map(|m| MIN_RADIUS + size_scale * (m + offset))
            .collect(),
        offset,
    )
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn size_label(size_by: SizeBy) -> &'static str {
    match size_by {
        SizeBy::To => "to_others",
        SizeBy::From => "from_others",
        SizeBy::Net => "net",
        SizeBy::Uniform => "1",
    }
}

pub struct Rendered {
    pub svg: String,
    pub dot: String,
}

pub fn render(snapshot: &NetworkSnapshot, attrs: &Attributes, spec: &RenderSpec) -> CliResult<Rendered> {
    if !(spec.size_scale > 0.0 && spec.size_scale.is_finite()) {
        return Err(CliError::validation(format!(
            "size_scale must be > 0, got {}",
            spec.size_scale
        )));
    }
    let cats = categories(snapshot, attrs, &spec.color_by)?;
    let mut palette = default_palette(&spec.color_by);
    palette.extend(spec.palette.clone());
    let missing: std::collections::BTreeSet<&String> =
        cats.iter().filter(|c| !palette.contains_key(*c)).collect();
    if !missing.is_empty() {
        let list: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
        return Err(CliError::validation(format!(
            "palette has no colour for categor{} {}",
            if list.len() == 1 { "y" } else { "ies" },
            list.join(", ")
        )));
    }
    let (r, offset) = radii(snapshot, spec.size_by, spec.size_scale);
    let fills: Vec<&str> = cats.iter().map(|c| palette[c].as_str()).collect();
    Ok(Rendered {
        svg: svg(snapshot, spec, &r, offset, &fills),
        dot: dot(snapshot, &r, &fills),
    })
}

fn svg(snapshot: &NetworkSnapshot, spec: &RenderSpec, r: &[f64], offset: f64, fills: &[&str]) -> String {
    let pos = &snapshot.positions;
    let (mut x0, mut y0, mut x1, mut y1) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pos {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    if pos.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 0.0, 0.0);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0) + 10.0;
    let (vx, vy, vw, vh) = (x0 - pad, y0 - pad, x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(s, "<!-- spillnet network {}", snapshot.date);
    let shift = if offset > 0.0 {
        format!(" + {offset:.4}")
    } else {
        String::new()
    };
    let _ = writeln!(
        s,
        "     radius = {MIN_RADIUS} + {} * ({}{shift})",
        spec.size_scale,
        size_label(spec.size_by)
    );
    let _ = writeln!(s, "     fill by {} -->", spec.color_by.column());
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{vx:.4} {vy:.4} {vw:.4} {vh:.4}\">"
    );
    if spec.draw_edges {
        s.push_str("<g class=\"edges\" stroke=\"#888888\" fill=\"none\">\n");
        let d = &snapshot.table.d;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if i != j && d[[i, j]] > 0.0 {
                    let _ = writeln!(
                        s,
                        "<line x1=\"{:.4}\" y1=\"{:.4}\" x2=\"{:.4}\" y2=\"{:.4}\" stroke-width=\"{:.4}\"/>",
                        pos[j][0],
                        pos[j][1],
                        pos[i][0],
                        pos[i][1],
                        d[[i, j]] / 100.0 * 5.0
                    );
                }
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("<g class=\"nodes\" stroke=\"#333333\" stroke-width=\"0.5\">\n");
    for (k, firm) in snapshot.table.firms.iter().enumerate() {
        let _ = writeln!(
            s,
            "<circle id=\"{}\" cx=\"{:.4}\" cy=\"{:.4}\" r=\"{:.4}\" fill=\"{}\"/>",
            escape(firm),
            pos[k][0],
            pos[k][1],
            r[k],
            escape(fills[k])
        );
    }
    s.push_str("</g>\n");
    if spec.label_nodes {
        s.push_str(
            "<g class=\"labels\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"middle\" dominant-baseline=\"central\">\n",
        );
        for (k, firm) in snapshot.table.firms.iter().enumerate() {
            let _ = writeln!(
                s,
                "<text x=\"{:.4}\" y=\"{:.4}\">{}</text>",
                pos[k][0],
                pos[k][1],
                escape(firm)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn dot(snapshot: &NetworkSnapshot, r: &[f64], fills: &[&str]) -> String {
    let t = &snapshot.table;
    let q = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", snapshot.date);
    s.push_str("  node [shape=circle, style=filled];\n");
    for (k, firm) in t.firms.iter().enumerate() {
        let p = snapshot.positions[k];
        let _ = writeln!(
            s,
            "  \"{}\" [pos=\"{},{}!\", width={}, fillcolor=\"{}\", to={}, from={}, net={}];",
            q(firm),
            p[0],
            p[1],
            2.0 * r[k] / 72.0,
            q(fills[k]),
            t.to_others[k],
            t.from_others[k],
            t.net[k]
        );
    }
    for i in 0..t.n_firms() {
        for j in 0..t.n_firms() {
            if i != j {
                let _ = writeln!(
                    s,
                    "  \"{}\" -> \"{}\" [weight={}];",
                    q(&t.firms[j]),
                    q(&t.firms[i]),
                    t.d[[i, j]]
                );
            }
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_options() {
        assert_eq!("region".parse::<ColorBy>().unwrap(), ColorBy::Region);
        assert_eq!(
            "column:sector".parse::<ColorBy>().unwrap(),
            ColorBy::Column("sector".into())
        );
        assert!("column:".parse::<ColorBy>().is_err());
        assert_eq!("net".parse::<SizeBy>().unwrap(), SizeBy::Net);
        let p = parse_palette("a=#fff, b=red").unwrap();
        assert_eq!(p["b"], "red");
        assert!(parse_palette("a").is_err());
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("A&B<\"x\">"), "A&amp;B&lt;&quot;x&quot;&gt;");
    }
}
