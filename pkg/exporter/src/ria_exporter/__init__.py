"""Patch-feature exporter: frozen vision transformer -> RIAF feature files."""

__version__ = "0.1.0"

from ria_exporter.export import ExportConfig, export_images, load_backbone

__all__ = ["__version__", "ExportConfig", "export_images", "load_backbone"]
