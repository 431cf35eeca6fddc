"""Micro-benchmark tasks: parse, filter, statistical, predictive, IO and visualization."""

from .catalog import AUXILIARY, CATALOG, TASK_CODES, CatalogEntry, create_task, entry

__all__ = ["AUXILIARY", "CATALOG", "TASK_CODES", "CatalogEntry", "create_task", "entry"]
