//! Aggregation of questionnaire responses per view kind.

use serde::{Deserialize, Serialize};

use super::{ResponseRecord, StudyError, ViewKind, MAX_EXPOSURE_MS};

pub const TABLE_HEADER: [&str; 4] = ["Screen Type", "Avg. Time (s)", "Purchase Yes (%)", "Purchase No (%)"];

/// Counts of Likert answers 1 through 5.
pub type LikertDistribution = [usize; 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewReport {
    pub view_kind: ViewKind,
    pub n: usize,
    pub mean_duration_s: f64,
    pub stddev_duration_s: f64,
    pub purchase_yes_pct: f64,
    pub purchase_no_pct: f64,
    pub satisfaction: LikertDistribution,
    pub confidence: LikertDistribution,
    pub relevance: LikertDistribution,
    pub ease: LikertDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    /// One entry per view kind with at least one response, in the order
    /// unranked, ranked, summary.
    pub views: Vec<ViewReport>,
    pub total_responses: usize,
}

impl ViewKind {
    /// Row label used in the time and purchase table.
    pub fn screen_label(self) -> &'static str {
        match self {
            ViewKind::Unranked => "Unranked Reviews",
            ViewKind::Ranked => "Ranked Reviews",
            ViewKind::Summary => "Summary View",
        }
    }
}

/// Exposure duration in seconds, capped at one hour.
pub fn duration_s(record: &ResponseRecord) -> f64 {
    let ms = record.exposure.t_end_ms.saturating_sub(record.exposure.t_start_ms).min(MAX_EXPOSURE_MS);
    ms as f64 / 1000.0
}

fn bump(dist: &mut LikertDistribution, value: u8) {
    dist[usize::from(value.clamp(1, 5)) - 1] += 1;
}

/// Exact per-view counts, mean and population standard deviation of
/// durations, and purchase percentages.
pub fn aggregate_report<'a>(responses: impl IntoIterator<Item = &'a ResponseRecord>) -> Result<StudyReport, StudyError> {
    let responses: Vec<&ResponseRecord> = responses.into_iter().collect();
    if responses.is_empty() {
        return Err(StudyError::NoData);
    }
    let mut views = Vec::new();
    for kind in ViewKind::ALL {
        let rows: Vec<&&ResponseRecord> = responses.iter().filter(|r| r.exposure.view_kind == kind).collect();
        if rows.is_empty() {
            continue;
        }
        let n = rows.len();
        let durations: Vec<f64> = rows.iter().map(|r| duration_s(r)).collect();
        let mean = durations.iter().sum::<f64>() / n as f64;
        let variance = durations.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        let yes = rows.iter().filter(|r| r.response.purchase).count();
        let mut report = ViewReport {
            view_kind: kind,
            n,
            mean_duration_s: mean,
            stddev_duration_s: variance.sqrt(),
            purchase_yes_pct: 100.0 * yes as f64 / n as f64,
            purchase_no_pct: 100.0 * (n - yes) as f64 / n as f64,
            satisfaction: [0; 5],
            confidence: [0; 5],
            relevance: [0; 5],
            ease: [0; 5],
        };
        for r in &rows {
            bump(&mut report.satisfaction, r.response.satisfaction);
            bump(&mut report.confidence, r.response.confidence);
            bump(&mut report.relevance, r.response.relevance);
            bump(&mut report.ease, r.response.ease);
        }
        views.push(report);
    }
    Ok(StudyReport { views, total_responses: responses.len() })
}

impl StudyReport {
    pub fn view(&self, kind: ViewKind) -> Option<&ViewReport> {
        self.views.iter().find(|v| v.view_kind == kind)
    }

    /// Time and purchase table as CSV, one decimal place.
    pub fn to_csv(&self) -> String {
        let mut out = TABLE_HEADER.join(",");
        out.push('\n');
        for v in &self.views {
            out.push_str(&format!(
                "{},{:.1},{:.1},{:.1}\n",
                v.view_kind.screen_label(),
                v.mean_duration_s,
                v.purchase_yes_pct,
                v.purchase_no_pct
            ));
        }
        out
    }

    /// Fixed-width rendering of the same table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<18} {:>13} {:>16} {:>15}\n",
            TABLE_HEADER[0], TABLE_HEADER[1], TABLE_HEADER[2], TABLE_HEADER[3]
        );
        for v in &self.views {
            out.push_str(&format!(
                "{:<18} {:>13.1} {:>16.1} {:>15.1}\n",
                v.view_kind.screen_label(),
                v.mean_duration_s,
                v.purchase_yes_pct,
                v.purchase_no_pct
            ));
        }
        out
    }
}
