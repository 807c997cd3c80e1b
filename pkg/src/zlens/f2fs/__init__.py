"""F2FS on-disk metadata: superblock/checkpoint/NAT parsing, segment
hotness handling, and a fixture image generator.

Supported subset: 4KiB blocks, 2MiB segments, classic checkpoint bitmap
layout. Parsing is read-only.
"""

from .image import (  # noqa: F401
    Checkpoint,
    InodeLocation,
    NatEntry,
    Superblock,
    locate_inode,
    parse_checkpoint,
    parse_superblock,
    read_nat_entry,
)
from .segments import (  # noqa: F401
    HOTNESS_CLASSES,
    SegmentRecord,
    SegmapReport,
    imap_csv,
    load_segment_info,
    segmap,
    segmap_file_csv,
    segmap_segment_csv,
)
from .fixture import build_fixture_image  # noqa: F401
