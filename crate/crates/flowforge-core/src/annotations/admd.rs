//! ADMD XML annotation parsing — the only annotation source that carries
//! temporal criteria.
//!
//! Canonical shape:
//!
//! ```xml
//! <anomalies>
//!   <anomaly id="a1" label="anomalous" taxonomy="ptmpHTTP" heuristic="503"
//!            distance="-0.7" nb_detectors="4">
//!     <interval from="2011-01-12T00:00:00Z" to="2011-01-12T00:01:00Z"/>
//!     <filter src_ip="10.0.0.1" dst_port="80" protocol="6"/>
//!   </anomaly>
//! </anomalies>
//! ```
//!
//! `id` and `label` are required; the other metadata attributes default
//! like empty CSV cells do. Every filter inherits the anomaly's interval
//! as an inclusive window. An anomaly without an interval yields
//! window-less filters and bumps a warning counter instead of failing.

use std::collections::HashSet;
use std::path::Path;

use chrono::DateTime;
use roxmltree::{Document, Node};

use crate::{Error, Result};

use super::{AnomalyFilter, AnomalyRecord, Label, TimeWindow, DEFAULT_HEURISTIC, DEFAULT_TAXONOMY};

/// Parse result: the records plus counters for tolerated irregularities.
#[derive(Clone, Debug, Default)]
pub struct ParsedAdmd {
    pub anomalies: Vec<AnomalyRecord>,
    /// Anomalies lacking an `interval` element; their filters carry no
    /// window.
    pub missing_interval: u32,
}

/// Parse an ADMD XML file.
pub fn parse_admd(path: impl AsRef<Path>) -> Result<ParsedAdmd> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let doc = Document::parse(&text).map_err(|e| {
        Error::Parse(format!("{}:{}: {e}", path.display(), e.pos().row))
    })?;
    let at = |node: &Node| doc.text_pos_at(node.range().start).row;
    let root = doc.root_element();
    if root.tag_name().name() != "anomalies" {
        return Err(Error::Parse(format!(
            "{}: root element is <{}>, expected <anomalies>",
            path.display(),
            root.tag_name().name()
        )));
    }

    let mut out = ParsedAdmd::default();
    let mut seen_ids = HashSet::new();
    for anomaly in root.children().filter(|n| n.is_element()) {
        let line = at(&anomaly);
        if anomaly.tag_name().name() != "anomaly" {
            return Err(Error::Parse(format!(
                "{}:{line}: unexpected element <{}>",
                path.display(),
                anomaly.tag_name().name()
            )));
        }
        let ctx = |what: &str, detail: String| {
            Error::Parse(format!("{}:{line}: {what}: {detail}", path.display()))
        };
        let anomaly_id = anomaly
            .attribute("id")
            .ok_or_else(|| ctx("anomaly", "missing id attribute".into()))?
            .to_string();
        if !seen_ids.insert(anomaly_id.clone()) {
            return Err(Error::Validation(format!(
                "{}:{line}: duplicate anomaly id {anomaly_id:?}",
                path.display()
            )));
        }
        let label = Label::parse(
            anomaly
                .attribute("label")
                .ok_or_else(|| ctx("anomaly", "missing label attribute".into()))?,
        )
        .map_err(|e| ctx("label", e.to_string()))?;
        let taxonomy = anomaly
            .attribute("taxonomy")
            .unwrap_or(DEFAULT_TAXONOMY)
            .to_string();
        let heuristic = match anomaly.attribute("heuristic") {
            None => DEFAULT_HEURISTIC,
            Some(t) => t.parse().map_err(|e: std::num::ParseIntError| {
                ctx("heuristic", e.to_string())
            })?,
        };
        let distance: f64 = match anomaly.attribute("distance") {
            None => 0.0,
            Some(t) => t.parse().map_err(|e: std::num::ParseFloatError| {
                ctx("distance", e.to_string())
            })?,
        };
        let nb_detectors: u32 = match anomaly.attribute("nb_detectors") {
            None => 0,
            Some(t) => t.parse().map_err(|e: std::num::ParseIntError| {
                ctx("nb_detectors", e.to_string())
            })?,
        };

        let mut window = None;
        let mut filters = vec![];
        for child in anomaly.children().filter(|n| n.is_element()) {
            let child_line = at(&child);
            let cctx = |what: &str, detail: String| {
                Error::Parse(format!("{}:{child_line}: {what}: {detail}", path.display()))
            };
            match child.tag_name().name() {
                "interval" => {
                    if window.is_some() {
                        return Err(Error::Validation(format!(
                            "{}:{child_line}: anomaly {anomaly_id:?} has more than one interval",
                            path.display()
                        )));
                    }
                    let from = parse_time(&child, "from").map_err(|e| cctx("interval", e))?;
                    let to = parse_time(&child, "to").map_err(|e| cctx("interval", e))?;
                    window = Some(TimeWindow::new(from, to).map_err(|e| {
                        Error::Validation(format!("{}:{child_line}: {e}", path.display()))
                    })?);
                }
                "filter" => {
                    filters.push((child_line, parse_filter(&child, &cctx)?));
                }
                other => {
                    return Err(Error::Parse(format!(
                        "{}:{child_line}: unexpected element <{other}>",
                        path.display()
                    )))
                }
            }
        }
        if window.is_none() {
            out.missing_interval += 1;
        }
        if filters.is_empty() {
            return Err(Error::Validation(format!(
                "{}:{line}: anomaly {anomaly_id:?} carries no filters",
                path.display()
            )));
        }
        let filters = filters
            .into_iter()
            .map(|(child_line, mut f)| {
                f.window = window;
                f.validate().map_err(|e| {
                    Error::Validation(format!("{}:{child_line}: {e}", path.display()))
                })?;
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        out.anomalies.push(AnomalyRecord {
            anomaly_id,
            label,
            taxonomy,
            heuristic,
            distance,
            nb_detectors,
            filters,
        });
    }
    Ok(out)
}

fn parse_time(node: &Node, attr: &str) -> std::result::Result<i64, String> {
    let raw = node
        .attribute(attr)
        .ok_or_else(|| format!("missing {attr:?} attribute"))?;
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.timestamp_micros())
        .map_err(|e| format!("{attr}={raw:?}: {e}"))
}

fn parse_filter(
    node: &Node,
    ctx: &dyn Fn(&str, String) -> Error,
) -> Result<AnomalyFilter> {
    fn opt<T: std::str::FromStr>(
        node: &Node,
        attr: &str,
        ctx: &dyn Fn(&str, String) -> Error,
    ) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match node.attribute(attr) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e: T::Err| ctx(attr, e.to_string())),
        }
    }
    for a in node.attributes() {
        if !matches!(
            a.name(),
            "src_ip" | "dst_ip" | "src_port" | "dst_port" | "protocol"
        ) {
            return Err(ctx("filter", format!("unknown attribute {:?}", a.name())));
        }
    }
    Ok(AnomalyFilter {
        src_ip: opt(node, "src_ip", ctx)?,
        dst_ip: opt(node, "dst_ip", ctx)?,
        src_port: opt(node, "src_port", ctx)?,
        dst_port: opt(node, "dst_port", ctx)?,
        protocol: opt(node, "protocol", ctx)?,
        window: None,
    })
}
