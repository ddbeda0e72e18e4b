"""Bit mapper optimization for spatially-coupled LDPC and GLDPC codes with PM-QAM."""
from .channel import build_constellation, channel_profile
from .scldpc import build_base_matrix, lift
from .bch import construct as construct_bch
from .scgldpc import sample_graph
from .bitmapper import baseline_mapper, optimize

__all__ = ["build_constellation", "channel_profile", "build_base_matrix", "lift", "construct_bch",
           "sample_graph", "baseline_mapper", "optimize"]
