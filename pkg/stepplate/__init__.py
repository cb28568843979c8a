"""Free vibration of stepped circular and annular FG Mindlin plates."""
from stepplate.assembly_eigensolver import ModeResult, find_frequencies, mode_fields, mode_table
from stepplate.material_model import MaterialPair, PlateConfig, SegmentGeometry

__all__ = [
    "MaterialPair",
    "ModeResult",
    "PlateConfig",
    "SegmentGeometry",
    "find_frequencies",
    "mode_fields",
    "mode_table",
]
