"""Empirical match counting: exact backtracking, dense enumeration, color
coding, the star shortcut and Monte-Carlo validation."""

from .backtrack import BudgetExceeded, MatchResult, count_matches, has_match, search_order
from .colorcoding import ColorCodingEstimate, color_coding_count, required_iterations
from .dense import count_dense, expected_matches_given_graph
from .montecarlo import MCEstimate, monte_carlo_expected_matches
from .structure import disjoint_copies, ell_indistinguishability, star_match_count, star_query

__all__ = [
    "BudgetExceeded",
    "ColorCodingEstimate",
    "MCEstimate",
    "MatchResult",
    "color_coding_count",
    "count_dense",
    "count_matches",
    "disjoint_copies",
    "ell_indistinguishability",
    "expected_matches_given_graph",
    "has_match",
    "monte_carlo_expected_matches",
    "required_iterations",
    "search_order",
    "star_match_count",
    "star_query",
]
