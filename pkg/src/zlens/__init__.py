"""zlens: zone-level placement, tracing, and contract analysis for ZNS SSDs.

Core pieces: a ZNS zone state-machine simulator for fixture generation,
extent-to-zone mapping with fragmentation statistics, an F2FS metadata
parser (superblock/checkpoint/NAT), per-zone trace aggregation, checkers
for the zone-interface contracts (request scale, locality, grouping by
death time, uniform lifetime), cross-layer timelines, and deterministic
SVG/CSV report rendering.
"""

__version__ = "0.1.0"

from .geometry import ZoneGeometry, addr_to_zone, load_geometry  # noqa: F401
