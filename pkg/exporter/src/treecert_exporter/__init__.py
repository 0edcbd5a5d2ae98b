"""Export scikit-learn tree ensembles to the treecert model format."""

from .export import (
    EquivalenceReport,
    ExportConfig,
    ExportError,
    check_equivalence,
    export_model,
)

__all__ = [
    "EquivalenceReport",
    "ExportConfig",
    "ExportError",
    "check_equivalence",
    "export_model",
]
