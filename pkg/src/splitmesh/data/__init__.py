from .datasets import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    load_csv,
    load_tensor_dir,
    normalize,
    synth,
)
from .partition import (
    PartitionAssignment,
    SplitRatio,
    batch_allocation,
    largest_remainder,
    parse_ratio,
    partition,
    round_schedule,
)
from .tensorfile import decode_nt, encode_nt, pgm_to_nt, read_nt, write_nt

__all__ = [
    "CLASSIFICATION", "REGRESSION", "Dataset", "PartitionAssignment", "SplitRatio",
    "batch_allocation", "decode_nt", "encode_nt", "largest_remainder", "load_csv",
    "load_tensor_dir", "normalize", "parse_ratio", "partition", "pgm_to_nt", "read_nt",
    "round_schedule", "synth", "write_nt",
]
