from sempe.services.bench.generator import BenchSpecError, generate, ideal_paths, secret_names
from sempe.services.bench.report import CSV_COLUMNS, report, results_frame, summary_table, write_csv, write_plotdata

__all__ = [
    "BenchSpecError",
    "CSV_COLUMNS",
    "generate",
    "ideal_paths",
    "report",
    "results_frame",
    "secret_names",
    "summary_table",
    "write_csv",
    "write_plotdata",
]
