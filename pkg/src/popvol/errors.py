"""Exception types shared across the pipeline.

Every error raised by the library derives from PipelineError so the CLI can
turn any module failure into a one-line diagnostic and a nonzero exit code.
"""


class PipelineError(Exception):
    """Base class for all popvol errors."""


class AsciiGridError(PipelineError):
    """Malformed ASCII grid input. Carries the 1-based line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class GeorefMismatchError(PipelineError):
    """Two grids do not share dimensions, origin, or cell size."""


class FootprintError(PipelineError):
    """Invalid footprint geometry or footprint file contents."""


class EmptySelectionError(FootprintError):
    """A footprint selected no raster cells."""

    def __init__(self, footprint_id):
        super().__init__(f"footprint {footprint_id!r} selects no raster cells")
        self.footprint_id = footprint_id


class InsufficientCoverageError(FootprintError):
    """Too few valid raster cells under a footprint to extract a height."""

    def __init__(self, footprint_id, valid_cells, min_cells):
        super().__init__(
            f"footprint {footprint_id!r} has {valid_cells} valid cells, "
            f"needs at least {min_cells}"
        )
        self.footprint_id = footprint_id
        self.valid_cells = valid_cells
        self.min_cells = min_cells


class ConfigError(PipelineError):
    """Invalid or incomplete configuration."""


class OsmParseError(PipelineError):
    """Malformed OSM XML input."""


class SceneError(PipelineError):
    """Invalid synthetic scene definition."""


class ReportMismatchError(PipelineError):
    """Estimated and ground-truth type labels do not line up."""
