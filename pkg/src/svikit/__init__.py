"""svikit: assemble and run a street-view perception survey.

The toolkit covers the whole path from open street-view imagery to a
running crowd-rating service: tile-based metadata discovery and resumable
photo downloads, road center-line detection in equirectangular panoramas,
4:3 crop planning, contrast/tone quality filtering, grid-based spatial
sampling, a session-cookie rating API, and anonymized export with
hexagonal spatial aggregation.
"""

__version__ = "0.1.0"


class SvikitError(Exception):
    """Base class for errors raised by svikit modules."""
