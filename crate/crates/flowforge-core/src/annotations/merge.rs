//! Merging CSV and ADMD annotation lists into one per-day table.
//!
//! Records are keyed by `anomaly_id`. When an anomaly appears in both
//! sources its metadata is taken from the CSV side (the tabular export is
//! the richer metadata carrier; the rule is arbitrary but deterministic
//! and documented), filters are unioned, and a windowed filter displaces
//! any window-less filter with the same 5-tuple expression. Conflicting
//! labels are an error rather than a silent pick.

use std::collections::HashMap;

use chrono::NaiveDate;

use crate::{Error, Result};

use super::{AnomalyFilter, AnomalyRecord, DayAnnotations};

/// Merge per-source record lists (either may be empty) for one day.
pub fn merge_annotations(
    date: NaiveDate,
    csv: Vec<AnomalyRecord>,
    admd: Vec<AnomalyRecord>,
    source_files: Vec<String>,
) -> Result<DayAnnotations> {
    let mut order: Vec<String> = vec![];
    let mut by_id: HashMap<String, AnomalyRecord> = HashMap::new();

    for rec in csv {
        rec.validate()?;
        if by_id.contains_key(&rec.anomaly_id) {
            return Err(Error::Validation(format!(
                "duplicate anomaly id {:?} within the CSV source",
                rec.anomaly_id
            )));
        }
        order.push(rec.anomaly_id.clone());
        by_id.insert(rec.anomaly_id.clone(), rec);
    }

    for rec in admd {
        rec.validate()?;
        match by_id.get_mut(&rec.anomaly_id) {
            None => {
                order.push(rec.anomaly_id.clone());
                by_id.insert(rec.anomaly_id.clone(), rec);
            }
            Some(existing) => {
                if existing.label != rec.label {
                    return Err(Error::Consistency(format!(
                        "anomaly {:?} labeled {:?} in one source and {:?} in the other",
                        rec.anomaly_id,
                        existing.label.as_str(),
                        rec.label.as_str()
                    )));
                }
                existing.filters = merge_filters(&existing.filters, &rec.filters);
            }
        }
    }

    let anomalies = order
        .into_iter()
        .map(|id| by_id.remove(&id).expect("id recorded at insert"))
        .collect();
    Ok(DayAnnotations {
        date,
        anomalies,
        source_files,
    })
}

/// Union of filters where windowed entries displace window-less entries
/// with the same 5-tuple expression and exact duplicates collapse.
/// `first` filters keep their relative order, then surviving `second`
/// filters follow in theirs.
fn merge_filters(first: &[AnomalyFilter], second: &[AnomalyFilter]) -> Vec<AnomalyFilter> {
    let combined: Vec<&AnomalyFilter> = first.iter().chain(second).collect();
    let mut out: Vec<AnomalyFilter> = vec![];
    for f in &combined {
        if out.contains(f) {
            continue; // exact duplicate
        }
        let windowed_twin_exists = f.window.is_none()
            && combined
                .iter()
                .any(|g| g.window.is_some() && g.expression() == f.expression());
        if !windowed_twin_exists {
            out.push((*f).clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{Label, TimeWindow};

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 1, 12).unwrap()
    }

    fn rec(id: &str, label: Label, filters: Vec<AnomalyFilter>) -> AnomalyRecord {
        AnomalyRecord {
            anomaly_id: id.into(),
            label,
            taxonomy: "unknown".into(),
            heuristic: 999,
            distance: 0.0,
            nb_detectors: 0,
            filters,
        }
    }

    fn f(dst_port: u16, window: Option<TimeWindow>) -> AnomalyFilter {
        AnomalyFilter {
            dst_port: Some(dst_port),
            window,
            ..Default::default()
        }
    }

    #[test]
    fn csv_only_anomaly_passes_through() {
        let day = merge_annotations(
            date(),
            vec![rec("a1", Label::Notice, vec![f(80, None)])],
            vec![],
            vec!["day.csv".into()],
        )
        .unwrap();
        assert_eq!(day.anomalies.len(), 1);
        assert_eq!(day.anomalies[0].filters[0].window, None);
    }

    #[test]
    fn windowed_filter_displaces_windowless_duplicate() {
        let w = TimeWindow::new(100, 200).unwrap();
        let day = merge_annotations(
            date(),
            vec![rec("a1", Label::Anomalous, vec![f(80, None), f(22, None)])],
            vec![rec("a1", Label::Anomalous, vec![f(80, Some(w))])],
            vec![],
        )
        .unwrap();
        let filters = &day.anomalies[0].filters;
        assert_eq!(filters.len(), 2);
        assert!(filters.contains(&f(80, Some(w))));
        assert!(filters.contains(&f(22, None)));
        assert!(!filters.contains(&f(80, None)));
    }

    #[test]
    fn disjoint_id_sets_union() {
        let day = merge_annotations(
            date(),
            vec![
                rec("c1", Label::Notice, vec![f(1, None)]),
                rec("c2", Label::Notice, vec![f(2, None)]),
            ],
            vec![
                rec("x1", Label::Notice, vec![f(3, None)]),
                rec("x2", Label::Notice, vec![f(4, None)]),
                rec("x3", Label::Notice, vec![f(5, None)]),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(day.anomalies.len(), 5);
        let ids: Vec<_> = day.anomalies.iter().map(|a| a.anomaly_id.as_str()).collect();
        assert_eq!(ids, ["c1", "c2", "x1", "x2", "x3"]);
    }

    #[test]
    fn label_conflict_is_an_error() {
        let err = merge_annotations(
            date(),
            vec![rec("a1", Label::Anomalous, vec![f(80, None)])],
            vec![rec("a1", Label::Notice, vec![f(80, None)])],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err.category(), "consistency");
        assert!(err.to_string().contains("anomalous"), "{err}");
        assert!(err.to_string().contains("notice"), "{err}");
    }

    #[test]
    fn merge_is_idempotent_through_the_views() {
        let w1 = TimeWindow::new(100, 200).unwrap();
        let w2 = TimeWindow::new(300, 400).unwrap();
        let merged = merge_annotations(
            date(),
            vec![
                rec("a1", Label::Anomalous, vec![f(80, None), f(22, None)]),
                rec("a2", Label::Suspicious, vec![f(53, None)]),
            ],
            vec![
                rec("a1", Label::Anomalous, vec![f(80, Some(w1)), f(80, Some(w2))]),
                rec("a3", Label::Notice, vec![f(99, Some(w1))]),
            ],
            vec![],
        )
        .unwrap();
        let again = merge_annotations(
            date(),
            merged.csv_view(),
            merged.admd_view(),
            merged.source_files.clone(),
        )
        .unwrap();
        assert_eq!(again, merged);
    }

    #[test]
    fn no_filter_loss_except_displaced_duplicates() {
        let w = TimeWindow::new(0, 10).unwrap();
        let csv_filters = vec![f(1, None), f(2, None)];
        let admd_filters = vec![f(2, Some(w)), f(3, Some(w))];
        let day = merge_annotations(
            date(),
            vec![rec("a", Label::Notice, csv_filters.clone())],
            vec![rec("a", Label::Notice, admd_filters.clone())],
            vec![],
        )
        .unwrap();
        let out = &day.anomalies[0].filters;
        for input in csv_filters.iter().chain(&admd_filters) {
            let displaced = input.window.is_none()
                && admd_filters.iter().any(|g| g.expression() == input.expression());
            assert_eq!(out.contains(input), !displaced, "filter {input:?}");
        }
    }
}
