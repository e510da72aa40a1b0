//! Realism metrics for generated streams against a reference log.

mod emd;
mod report;
mod svg;

pub use emd::{emd_1d, emd_proportions, emd_samples, proportions};
pub use report::{
    coherence_of_records, coherence_report, distribution_report, invalid_set_rate, observed_split, qq_points, topk_accuracy, CoherenceReport,
    DistributionEmd, Distributions, EvalReport, Observed, ReportSummary, Summary, TrialReport, GROUND_METRIC, MAX_TAUS,
};
pub use svg::{histogram_svg, qq_svg};

/// JSON schema of a serialized [`EvalReport`].
pub const REPORT_SCHEMA: &str = include_str!("../../resources/eval_report.schema.json");

#[cfg(test)]
mod tests;
