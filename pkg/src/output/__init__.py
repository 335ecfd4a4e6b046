"""Run artifacts and summaries."""

from src.output.reports import ExperimentSummary, ReportWriter, RunReport, TreeMeta

__all__ = ["ExperimentSummary", "ReportWriter", "RunReport", "TreeMeta"]
