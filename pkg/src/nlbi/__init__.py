"""Exact k-NN search under the Earth Mover's Distance, pruned by normal lower bounds."""

from .distributions import (CorpusSpec, DatasetError, DiscreteDistribution, exact_emd,
                            generate_synthetic, load_dataset, write_dataset)
from .dominance import BoundingRegion, Dominance, build_bounding_region, build_quadtree, dominates
from .index import NormalIndex
from .normal_bound import NormalSummary, SubIntervalGrid, emd_lb, emd_normal, normal_cdf_area
from .oracle import oracle_emd_1d, oracle_error_extrema, oracle_knn
from .projection import ProjectionVector, project, projection_emd, select_projections
from .query import QueryResult, QueryStats, batch_query, knn

__all__ = [
    "BoundingRegion", "CorpusSpec", "DatasetError", "DiscreteDistribution", "Dominance",
    "NormalIndex", "NormalSummary", "ProjectionVector", "QueryResult", "QueryStats",
    "SubIntervalGrid", "batch_query", "build_bounding_region", "build_quadtree", "dominates",
    "emd_lb", "emd_normal", "exact_emd", "generate_synthetic", "knn", "load_dataset",
    "normal_cdf_area", "oracle_emd_1d", "oracle_error_extrema", "oracle_knn", "project",
    "projection_emd", "select_projections", "write_dataset",
]
