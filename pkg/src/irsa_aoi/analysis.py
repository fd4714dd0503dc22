"""Closed-form performance expressions for framed and unframed random access.

Everything here is exact arithmetic on the model parameters: throughput and
channel load, the moments of the inter-delivery and waiting-time variables,
the average network age of information for both protocols, and the asymptotic
density-evolution threshold used as a cross-check where no finite-length
closed form for the packet loss rate exists.
"""

import math
from dataclasses import dataclass

from .model import DegreeDistribution, edge_perspective, mean_degree

__all__ = [
    "DivergenceError",
    "AoiBreakdown",
    "ZMoments",
    "ThresholdResult",
    "sa_throughput",
    "irsa_load",
    "nu_from_throughput",
    "z_moments",
    "x_pmf",
    "mean_wait",
    "aoi_irsa",
    "aoi_sa",
    "sa_optimal_aoi",
    "density_evolution_threshold",
]


class DivergenceError(ValueError):
    """The requested quantity diverges (no deliveries ever happen).

    Raised instead of returning infinity so that parameter sweeps can tell
    "diverges" apart from "very large".
    """


def pow1m(pa: float, k: int) -> float:
    """(1 - pa)**k computed as exp(k*log1p(-pa)).

    Stays accurate for pa ~ 1e-5 with k ~ 1e4, where naive powering loses
    precision.  k <= 1 and pa = 1 take their exact values.
    """
    if k == 0:
        return 1.0
    if pa >= 1.0:
        return 0.0
    if k == 1:
        return 1.0 - pa
    return math.exp(k * math.log1p(-pa))


def one_minus_pow1m(pa: float, k: int) -> float:
    """1 - (1 - pa)**k via expm1, full precision near both endpoints.

    At k = 1 this is exactly pa, which keeps the m = 1 algebraic collapses of
    the closed forms exact in floating point.
    """
    if k == 0:
        return 0.0
    if pa >= 1.0:
        return 1.0
    if k == 1:
        return pa
    return -math.expm1(k * math.log1p(-pa))


@dataclass(frozen=True)
class AoiBreakdown:
    """Additive decomposition of the framed-access network age (slots).

    total is computed as (frame_term + inter_update_term) + wait_term, in that
    order, so the sum identity holds exactly in floating point.
    """

    frame_term: float
    inter_update_term: float
    wait_term: float
    total: float


@dataclass(frozen=True)
class ZMoments:
    """First two moments of the geometric frame count between deliveries."""

    mean: float
    second_moment: float
    nu: float


@dataclass(frozen=True)
class ThresholdResult:
    """Asymptotic decoding threshold (load per slot) found by bisection.

    ``converged`` is False when even the returned load did not drive the
    fixed-point residual below the target within the iteration cap; for
    distributions with degree-1 mass this is the expected outcome and the
    threshold is reported as 0.
    """

    g_star: float
    iterations_used: int
    converged: bool


def sa_throughput(n: int, pa: float) -> float:
    """Decoded packets per slot for immediate single-copy access.

    A slot delivers iff exactly one of the n users activates:
    n * pa * (1-pa)**(n-1).
    """
    _check_n(n)
    _check_pa(pa)
    return n * pa * pow1m(pa, n - 1)


def irsa_load(n: int, m: int, pa: float) -> float:
    """Average transmitting users per slot: n*(1-(1-pa)**m)/m.

    A user transmits in a frame iff it activated at least once during the
    previous m slots.  At m = 1 this reduces to n*pa.
    """
    _check_n(n)
    _check_m(m)
    _check_pa(pa)
    return n * one_minus_pow1m(pa, m) / m


def nu_from_throughput(n: int, m: int, s: float) -> float:
    """Per-frame delivery probability for one user: s*m/n.

    Raises ValueError when s*m/n > 1 (more than one success per user per
    frame is impossible, so the supplied throughput is inconsistent).
    """
    _check_n(n)
    _check_m(m)
    if s < 0.0:
        raise ValueError(f"throughput must be nonnegative, got {s!r}")
    nu = s * m / n
    if nu > 1.0:
        raise ValueError(f"inconsistent throughput: s*m/n = {nu!r} exceeds 1")
    return nu


def z_moments(nu: float) -> ZMoments:
    """Moments of the geometric(nu) number of frames between deliveries."""
    if nu <= 0.0:
        raise DivergenceError("nu = 0: no deliveries, inter-delivery time diverges")
    if nu > 1.0:
        raise ValueError(f"nu must lie in (0, 1], got {nu!r}")
    return ZMoments(mean=1.0 / nu, second_moment=(2.0 - nu) / (nu * nu), nu=nu)


def x_pmf(m: int, pa: float, k: int) -> float:
    """Truncated-geometric pmf of the pre-transmission wait.

    k counts slots from the generation of the update that will be delivered to
    the start of its transmission frame; the node activated for the last time
    k slots before the frame boundary:

        P{X = k} = pa*(1-pa)**(k-1) / (1 - (1-pa)**m),   k in [1, m].
    """
    _check_m(m)
    _check_pa(pa)
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k!r}")
    return pa * pow1m(pa, k - 1) / one_minus_pow1m(pa, m)


def mean_wait(m: int, pa: float) -> float:
    """Expected pre-transmission wait in slots.

    Closed form of the truncated-geometric mean:
        E[X] = 1/pa - m*(1-pa)**m / (1 - (1-pa)**m),
    which lies in [1, m] and collapses to 1 at m = 1 or pa = 1.
    """
    _check_m(m)
    _check_pa(pa)
    if m == 1:
        return 1.0  # algebraic collapse; the general path is only ulp-exact
    return 1.0 / pa - m * pow1m(pa, m) / one_minus_pow1m(pa, m)


def aoi_irsa(n: int, m: int, pa: float, s: float) -> AoiBreakdown:
    """Exact average network age for framed replica access, in slots.

    Three additive components: half a frame of decoding delay (m/2), the mean
    span between deliveries (n/s), and the mean wait between update generation
    and the start of its transmission frame (E[X]).
    """
    if s <= 0.0:
        raise DivergenceError("throughput 0: age diverges")
    nu_from_throughput(n, m, s)  # raises on inconsistent throughput
    frame_term = m / 2.0
    inter = n / s
    wait = mean_wait(m, pa)
    return AoiBreakdown(
        frame_term=frame_term,
        inter_update_term=inter,
        wait_term=wait,
        total=(frame_term + inter) + wait,
    )


def aoi_sa(n: int, s: float) -> float:
    """Average network age for immediate single-copy access: 1/2 + n/s.

    Exactly one slot below the framed expression evaluated at m = 1: the
    unframed protocol transmits in the generation slot itself instead of
    deferring to the next frame boundary.
    """
    _check_n(n)
    if s <= 0.0:
        raise DivergenceError("throughput 0: age diverges")
    return 0.5 + n / s


def sa_optimal_aoi(n: int) -> tuple[float, float]:
    """Activation probability and age at the single-copy optimum.

    Throughput is maximised at pa = 1/n, giving
        1/2 + n*(1 - 1/n)**(1-n)
    (~ 1/2 + n*e for large n, but the exact form is just as cheap).  n = 1
    takes the limit value 3/2 (the 0**0 = 1 convention).
    """
    _check_n(n)
    if n == 1:
        return 1.0, 1.5
    pa_star = 1.0 / n
    aoi_star = 0.5 + n * math.exp((1 - n) * math.log1p(-pa_star))
    return pa_star, aoi_star


def density_evolution_threshold(
    lam: DegreeDistribution,
    tol: float,
    max_iter: int = 10_000,
    q_target: float = 1e-9,
) -> ThresholdResult:
    """Largest load per slot at which asymptotic peeling drives losses to zero.

    Runs the scalar fixed-point recursion

        q_{i+1} = lambda_edge(1 - exp(-g * mean_degree * q_i)),  q_0 = 1,

    where lambda_edge is the edge-perspective polynomial, and bisects on g
    (width ``tol``) for the largest value whose iteration reaches
    q < ``q_target`` within ``max_iter`` steps.  A probe that hits the cap
    counts as non-converging; near the exact threshold the recursion slows
    down critically, so the reported value can sit below the true threshold
    by roughly the probe resolution even for tiny ``tol``.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    avg = mean_degree(lam)
    edge = edge_perspective(lam)
    powers = [(d - 1, w) for d, w in sorted(edge.items())]

    def probe(g: float) -> tuple[bool, int]:
        q = 1.0
        for i in range(max_iter):
            p = 1.0 - math.exp(-g * avg * q)
            q = sum(w * p**e for e, w in powers)
            if q < q_target:
                return True, i + 1
        return False, max_iter

    iterations = 0
    ok_lo, used = probe(0.0)
    iterations += used
    if not ok_lo:
        # Degree-1 mass keeps a positive fixed point at any load.
        return ThresholdResult(g_star=0.0, iterations_used=iterations, converged=False)
    lo, hi = 0.0, 1.0
    ok_hi, used = probe(hi)
    iterations += used
    if ok_hi:
        return ThresholdResult(g_star=hi, iterations_used=iterations, converged=True)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, used = probe(mid)
        iterations += used
        if ok:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(g_star=lo, iterations_used=iterations, converged=True)


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")


def _check_m(m: int) -> None:
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")


def _check_pa(pa: float) -> None:
    if not (0.0 < pa <= 1.0):
        raise ValueError(f"pa must lie in (0, 1], got {pa!r}")
