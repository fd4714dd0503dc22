"""Domain types shared by the analysis, decoder, simulation and CLI layers.

A system is described by a population size ``n``, a frame length ``m`` (slots),
a per-slot activation probability ``pa`` and a replica-count distribution.
Slotted ALOHA is represented as the degenerate framed configuration with
``m = 1`` and every transmitter sending a single copy.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

__all__ = [
    "DegreeDistribution",
    "Protocol",
    "SystemConfig",
    "ValidationReport",
    "validate_config",
    "mean_degree",
    "edge_perspective",
    "parse_lambda",
    "format_lambda",
    "parse_config_text",
    "load_config",
    "sa_config",
    "irsa_config",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DegreeDistribution:
    """Replica-count pmf: ``coeffs[d]`` is the probability of sending d copies.

    Stored sparsely (practical distributions have a handful of terms; the
    reference choice is the single term at degree 3). Construction only checks
    structure (integer degrees >= 1); probabilistic soundness is reported by
    :func:`validate_config` / :meth:`violations` so that malformed inputs can
    be diagnosed instead of rejected at parse time.
    """

    coeffs: tuple[tuple[int, float], ...]

    def __init__(self, coeffs: Mapping[int, float]):
        items = []
        for deg, prob in coeffs.items():
            if not isinstance(deg, (int, np.integer)) or isinstance(deg, bool):
                raise TypeError(f"degree {deg!r} is not an integer")
            if deg < 1:
                raise ValueError(f"degree {deg} < 1")
            items.append((int(deg), float(prob)))
        items.sort()
        if len({d for d, _ in items}) != len(items):
            raise ValueError("duplicate degree")
        object.__setattr__(self, "coeffs", tuple(items))

    @property
    def max_degree(self) -> int:
        """Largest degree with positive mass (0 for an empty distribution)."""
        positive = [d for d, p in self.coeffs if p > 0.0]
        return max(positive) if positive else 0

    def as_dict(self) -> dict[int, float]:
        return dict(self.coeffs)

    def violations(self) -> list[str]:
        out = []
        total = 0.0
        for deg, prob in self.coeffs:
            if prob < 0.0:
                out.append(f"lambda: negative probability {prob!r} at degree {deg}")
            total += prob
        if abs(total - 1.0) > _SUM_TOL:
            out.append(f"lambda: probabilities sum to {total!r}, not 1")
        if self.max_degree < 1:
            out.append("lambda: no degree has positive probability")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def sampling_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(degrees, cdf) over positive-mass terms, for inverse-cdf sampling."""
        degs = np.array([d for d, p in self.coeffs if p > 0.0], dtype=np.int64)
        probs = np.array([p for _, p in self.coeffs if p > 0.0], dtype=np.float64)
        return degs, np.cumsum(probs)


class Protocol(Enum):
    SA = "sa"
    IRSA = "irsa"


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one access-protocol scenario.

    ``lam`` is the replica distribution (named ``lambda`` in config files and
    CLI flags; the Python keyword forces the shorter field name).
    """

    n: int
    m: int
    pa: float
    lam: DegreeDistribution
    protocol: Protocol


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = field(default=())


_POINT_MASS_AT_1 = ((1, 1.0),)


def validate_config(cfg: SystemConfig) -> ValidationReport:
    """Check every type invariant; reports violations instead of raising."""
    v: list[str] = []
    if not isinstance(cfg.n, (int, np.integer)) or cfg.n < 1:
        v.append(f"n must be a positive integer, got {cfg.n!r}")
    if not isinstance(cfg.m, (int, np.integer)) or cfg.m < 1:
        v.append(f"m must be a positive integer, got {cfg.m!r}")
    # pa = 0 would make every age diverge (no updates are ever generated), so
    # it is rejected here rather than special-cased downstream.
    if not (0.0 < cfg.pa <= 1.0):
        v.append(f"pa must lie in (0, 1], got {cfg.pa!r}")
    v.extend(cfg.lam.violations())
    if cfg.protocol is Protocol.IRSA:
        if isinstance(cfg.m, (int, np.integer)) and cfg.lam.max_degree > cfg.m:
            v.append(
                f"L > m: maximum degree {cfg.lam.max_degree} does not fit in "
                f"{cfg.m} slots (replicas occupy distinct slots)"
            )
    elif cfg.protocol is Protocol.SA:
        if cfg.m != 1:
            v.append(f"SA requires m = 1, got m = {cfg.m!r}")
        effective = tuple((d, p) for d, p in cfg.lam.coeffs if p > 0.0)
        if effective != _POINT_MASS_AT_1:
            v.append("SA requires a single copy per transmission (lambda = 1:1.0)")
    else:
        v.append(f"unknown protocol {cfg.protocol!r}")
    return ValidationReport(ok=not v, violations=tuple(v))


def require_valid(cfg: SystemConfig, protocol: Protocol | None = None) -> None:
    """Raise ValueError when cfg is invalid or uses the wrong protocol."""
    report = validate_config(cfg)
    if not report.ok:
        raise ValueError("invalid config: " + "; ".join(report.violations))
    if protocol is not None and cfg.protocol is not protocol:
        raise ValueError(f"expected protocol {protocol.value}, got {cfg.protocol.value}")


def mean_degree(lam: DegreeDistribution) -> float:
    """Average number of replicas per transmission."""
    _require_lambda(lam)
    return sum(d * p for d, p in lam.coeffs)


def edge_perspective(lam: DegreeDistribution) -> dict[int, float]:
    """Edge-perspective weights: fraction of replicas owned by degree-d users.

    Returns ``{d: d * coeffs[d] / mean_degree}``.  As a polynomial in x the
    degree-d entry is the coefficient of ``x**(d-1)``; the weights sum to 1.
    """
    _require_lambda(lam)
    mean = mean_degree(lam)
    return {d: d * p / mean for d, p in lam.coeffs if p > 0.0}


def _require_lambda(lam: DegreeDistribution) -> None:
    bad = lam.violations()
    if bad:
        raise ValueError("invalid degree distribution: " + "; ".join(bad))


def sa_config(n: int, pa: float) -> SystemConfig:
    return SystemConfig(n=n, m=1, pa=pa, lam=DegreeDistribution({1: 1.0}), protocol=Protocol.SA)


def irsa_config(n: int, m: int, pa: float, lam: DegreeDistribution) -> SystemConfig:
    return SystemConfig(n=n, m=m, pa=pa, lam=lam, protocol=Protocol.IRSA)


# --- textual formats -------------------------------------------------------
#
# lambda grammar (single source of truth for config files and CLI flags):
#     pairs  := pair (SEP pair)*
#     pair   := DEGREE ':' PROBABILITY
# with SEP = ',' on input. CSV output uses ';' so that fields never need
# quoting.

def parse_lambda(text: str) -> DegreeDistribution:
    coeffs: dict[int, float] = {}
    body = text.strip()
    if not body:
        raise ValueError("empty lambda string")
    for token in body.replace(";", ",").split(","):
        token = token.strip()
        if not token:
            raise ValueError(f"empty term in lambda spec {text!r}")
        deg_s, sep, prob_s = token.partition(":")
        if not sep:
            raise ValueError(f"lambda term {token!r} is not of the form degree:prob")
        try:
            deg = int(deg_s)
            prob = float(prob_s)
        except ValueError as exc:
            raise ValueError(f"bad lambda term {token!r}: {exc}") from None
        if deg in coeffs:
            raise ValueError(f"degree {deg} listed twice in lambda spec")
        coeffs[deg] = prob
    return DegreeDistribution(coeffs)


def format_lambda(lam: DegreeDistribution, sep: str = ",") -> str:
    return sep.join(f"{d}:{p!r}" for d, p in lam.coeffs if p != 0.0)


def parse_config_text(text: str) -> SystemConfig:
    """Parse the flat key-value config document.

    Recognised keys: n, m, pa, protocol, lambda. Lines starting with '#' and
    blank lines are ignored.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip().lower()
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val.strip()
    missing = {"n", "m", "pa", "protocol", "lambda"} - values.keys()
    if missing:
        raise ValueError(f"missing config keys: {', '.join(sorted(missing))}")
    unknown = values.keys() - {"n", "m", "pa", "protocol", "lambda"}
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        protocol = Protocol(values["protocol"].lower())
    except ValueError:
        raise ValueError(f"unknown protocol {values['protocol']!r}") from None
    try:
        n = int(values["n"])
        m = int(values["m"])
        pa = float(values["pa"])
    except ValueError as exc:
        raise ValueError(f"bad numeric field: {exc}") from None
    return SystemConfig(n=n, m=m, pa=pa, lam=parse_lambda(values["lambda"]), protocol=protocol)


def format_config_text(cfg: SystemConfig) -> str:
    return (
        f"n = {cfg.n}\n"
        f"m = {cfg.m}\n"
        f"pa = {cfg.pa!r}\n"
        f"protocol = {cfg.protocol.value}\n"
        f"lambda = {format_lambda(cfg.lam)}\n"
    )


def load_config(path) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
