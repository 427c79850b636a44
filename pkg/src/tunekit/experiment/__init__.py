"""Run store, reports and the command line."""

from .store import LoadResult, RunRecord, RunStore, append_run, load_runs, read_runs

__all__ = ["LoadResult", "RunRecord", "RunStore", "append_run", "load_runs", "read_runs"]
