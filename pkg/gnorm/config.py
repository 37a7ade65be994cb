import math
from functools import lru_cache

from lxml.builder import ElementMaker  # type: ignore

from gnorm import filecache


@lru_cache(maxsize=None)
def get_presentation_cache() -> filecache.PresentationCache:
    return filecache.PresentationCache()


# Presentations and balls

BALL_CAP: int = 2_000_000

SUPPORT_CAP: int = 500_000

# Certification

DENOMINATOR_CAP: int = 2**32

SNAP_DENOMINATOR_CAP: int = 2**10

CLIP_DELTA: float = 1e-9

CLIP_RETRIES: int = 3

DEFAULT_DIGITS: int = 15

# Semidefinite solver

SDP_SCHUR_BYTES: int = 2**31

SDP_ROW_CAP: int = math.isqrt(SDP_SCHUR_BYTES // 8)

SOLVER_TOLERANCE: float = 1e-8

SOLVER_MAX_ITERATIONS: int = 100

UNBOUNDED_DUAL_THRESHOLD: float = 1e8

# Lower bound engines

COMPRESSION_ITERATIONS: int = 200

REPRESENTATION_ITERATIONS: int = 500

RAYLEIGH_TOLERANCE: float = 1e-12

REPRESENTATION_SLACK: float = 1e-8

UNITARY_TOLERANCE: float = 1e-10

CONTRACTION_CLIP: float = 1 - 1e-12

ASCENT_STEPS: int = 60

# Decisions

INVERTIBILITY_TOLERANCE: float = 1e-3

WORD_SEARCH_STEPS: int = 100_000

WORD_SEARCH_DEPTH: int = 4

WORD_SEARCH_DEGREE: int = 5

QUOTIENT_DEGREE_CAP: int = 8

# Reports

GNORM_NS: str = "https://gnorm.readthedocs.io/NS/report"

GNORM_PREFIX: str = "gn"

REPORT_NSS = {
    GNORM_PREFIX: GNORM_NS,
}

GN = ElementMaker(namespace=GNORM_NS, nsmap=REPORT_NSS)
