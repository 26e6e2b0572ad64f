"""Lossy compression of numerical flow records and the utility cost of it.

Codecs: scalar quantization, PCA and K-means vector quantization, each
followed by gzip. Utility is measured as per-AS domain classification F1.
"""
from .codecs import CodecConfig, compress_group, decompress_group
from .container import CompressedArtifact, compression_ratio, entropy_estimate
from .flow_model import FlowDataError, FlowTable, Schema, SplitSpec, load_csv
from .forest import ForestConfig
from .synthetic import SyntheticSpec, generate_synthetic
from .utility_eval import utility_pipeline

__version__ = "0.1.0"

__all__ = ["CodecConfig", "CompressedArtifact", "FlowDataError", "FlowTable", "ForestConfig",
           "Schema", "SplitSpec", "SyntheticSpec", "compress_group", "compression_ratio",
           "decompress_group", "entropy_estimate", "generate_synthetic", "load_csv",
           "utility_pipeline"]
