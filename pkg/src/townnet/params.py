"""Model parameters: defaults, validation, JSON config loading.

All knobs of the generator live in one frozen ModelParams object so that a
parameter set can be hashed, copied for perturbation studies, and dumped next
to results. Layer L1 (households) is configured through the household size
distribution rather than a LayerParams entry; its transmission exponent is 0
by construction.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path


class LayerKind(enum.IntEnum):
    HOUSEHOLD = 1
    BLUE_COLLAR = 2
    WHITE_COLLAR = 3
    SCHOOL = 4
    FRIENDSHIP = 5
    SERVICE = 6
    RANDOM = 7

    @property
    def label(self) -> str:
        return f"L{int(self)}"

    @classmethod
    def from_label(cls, label: str) -> "LayerKind":
        """Accepts both "L5" style labels and layer names like "friendship"."""
        s = label.strip().upper().replace("-", "_").replace(" ", "_")
        if s in cls.__members__:
            return cls[s]
        if s.startswith("L"):
            try:
                v = int(s[1:])
            except ValueError:
                v = 0
            if 1 <= v <= 7:
                return cls(v)
        raise ValueError(f"bad layer {label!r}, expected L1..L7 or a layer name")


# Container layers partition a population share into cliques; star layers
# attach per-vertex contacts.
CONTAINER_LAYERS = (LayerKind.BLUE_COLLAR, LayerKind.WHITE_COLLAR, LayerKind.SCHOOL)
STAR_LAYERS = (LayerKind.FRIENDSHIP, LayerKind.SERVICE, LayerKind.RANDOM)

# Friendship and random contacts are mutual: the sampled count is the
# vertex's total contact budget, of which it initiates half (the other half
# arrives from peers). Service contacts are one-sided: mu is the number of
# customers a service worker meets, and customers do not initiate.
MUTUAL_STAR_LAYERS = frozenset((LayerKind.FRIENDSHIP, LayerKind.RANDOM))


@dataclass(frozen=True)
class HouseholdParams:
    """Skew-normal household size distribution (rounded, clamped >= 1)."""

    alpha: float = 3.96
    xi: float = 1.22
    omega: float = 1.75


@dataclass(frozen=True)
class LayerParams:
    """One contact layer.

    gamma_ratio: population fraction assigned to the layer (container layers
        and the service-worker pool); None for layers open to everyone.
    mu, sigma: Normal parameters for container capacity or per-vertex
        connection count, in persons.
    mu_d, sigma_d: Normal parameters for ring displacement; None inherits
        the global mu0/sigma0.
    beta_exponent: transmission weight is beta ** beta_exponent.
    """

    mu: float
    sigma: float
    beta_exponent: int
    gamma_ratio: float | None = None
    mu_d: float | None = None
    sigma_d: float | None = None


@dataclass(frozen=True)
class ModelParams:
    n_households: int = 10000
    teachers_per_class: int = 3
    mu0: float = 0.0
    sigma0: float = 1000.0
    household: HouseholdParams = field(default_factory=HouseholdParams)
    layers: dict[LayerKind, LayerParams] = field(default_factory=dict)

    def displacement(self, kind: LayerKind) -> tuple[float, float]:
        """Resolve (mu_d, sigma_d) for a layer, falling back to mu0/sigma0."""
        lp = self.layers[kind]
        mu_d = self.mu0 if lp.mu_d is None else lp.mu_d
        sigma_d = self.sigma0 if lp.sigma_d is None else lp.sigma_d
        return mu_d, sigma_d

    def fingerprint(self) -> str:
        """Stable hash of the full parameter set, for provenance metadata."""
        payload = asdict(self)
        payload["layers"] = {k.label: v for k, v in sorted(payload["layers"].items())}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def default_params() -> ModelParams:
    layers = {
        LayerKind.BLUE_COLLAR: LayerParams(gamma_ratio=0.21, mu=7.6, sigma=3.0, beta_exponent=1),
        LayerKind.WHITE_COLLAR: LayerParams(gamma_ratio=0.27, mu=7.6, sigma=3.0, beta_exponent=1),
        LayerKind.SCHOOL: LayerParams(gamma_ratio=0.247, mu=19.6, sigma=3.0, beta_exponent=1),
        LayerKind.FRIENDSHIP: LayerParams(gamma_ratio=None, mu=12.3, sigma=5.0, beta_exponent=1),
        LayerKind.SERVICE: LayerParams(gamma_ratio=0.15, mu=50.0, sigma=20.0, beta_exponent=2),
        LayerKind.RANDOM: LayerParams(gamma_ratio=None, mu=50.0, sigma=20.0, beta_exponent=3),
    }
    return ModelParams(layers=layers)


def validate(p: ModelParams) -> list[str]:
    """Return all constraint violations as "path: message" strings.

    Empty list means the parameter set is usable.
    """
    errs: list[str] = []
    if p.n_households < 1:
        errs.append(f"n_households: must be >= 1, got {p.n_households}")
    if p.teachers_per_class < 0:
        errs.append(f"teachers_per_class: must be >= 0, got {p.teachers_per_class}")
    if p.sigma0 < 0:
        errs.append(f"sigma0: must be >= 0, got {p.sigma0}")
    if p.household.omega <= 0:
        errs.append(f"household.omega: must be > 0, got {p.household.omega}")

    for kind, lp in sorted(p.layers.items()):
        path = f"layers.{kind.label}"
        if lp.sigma < 0:
            errs.append(f"{path}.sigma: must be >= 0, got {lp.sigma}")
        if lp.sigma_d is not None and lp.sigma_d < 0:
            errs.append(f"{path}.sigma_d: must be >= 0, got {lp.sigma_d}")
        if lp.beta_exponent not in (0, 1, 2, 3):
            errs.append(f"{path}.beta_exponent: must be in {{0,1,2,3}}, got {lp.beta_exponent}")
        if lp.gamma_ratio is not None and not 0.0 <= lp.gamma_ratio <= 1.0:
            errs.append(f"{path}.gamma_ratio: must be in [0, 1], got {lp.gamma_ratio}")

    def gamma(kind: LayerKind) -> float | None:
        lp = p.layers.get(kind)
        return None if lp is None else lp.gamma_ratio

    pop_shares = [gamma(k) for k in CONTAINER_LAYERS]
    known = [g for g in pop_shares if g is not None]
    if sum(known) > 1.0 + 1e-12:
        errs.append(
            "layers.L2.gamma_ratio + layers.L3.gamma_ratio + layers.L4.gamma_ratio: "
            f"role shares must sum to <= 1, got {sum(known)}"
        )
    g_service = gamma(LayerKind.SERVICE)
    g_blue = gamma(LayerKind.BLUE_COLLAR)
    if g_service is not None and g_blue is not None and g_service > g_blue + 1e-12:
        errs.append(
            "layers.L6.gamma_ratio: service workers are drawn from blue-collar workers, "
            f"so the ratio must be <= layers.L2.gamma_ratio ({g_blue}), got {g_service}"
        )
    return errs


_HOUSEHOLD_KEYS = {"alpha", "xi", "omega"}
_LAYER_KEYS = {"gamma_ratio", "mu", "sigma", "mu_d", "sigma_d", "beta_exponent"}
_TOP_KEYS = {"n_households", "teachers_per_class", "mu0", "sigma0", "household", "layers"}


def _merge_layer(base: LayerParams, overrides: dict, path: str) -> LayerParams:
    unknown = set(overrides) - _LAYER_KEYS
    if unknown:
        raise ValueError(f"unknown key(s) {sorted(unknown)} at {path}")
    fields = {
        "gamma_ratio": base.gamma_ratio,
        "mu": base.mu,
        "sigma": base.sigma,
        "mu_d": base.mu_d,
        "sigma_d": base.sigma_d,
        "beta_exponent": base.beta_exponent,
    }
    fields.update(overrides)
    return LayerParams(**fields)


def load_params(source: str | Path | dict | None = None) -> ModelParams:
    """Build a ModelParams from a JSON file path or a dict of overrides.

    Absent keys keep their defaults; unknown keys are an error (silent typos
    in experiment configs are worse than a crash). The result is validated
    and a ValueError carrying every violation is raised if anything is off.
    """
    if source is None:
        cfg: dict = {}
    elif isinstance(source, dict):
        cfg = source
    else:
        cfg = json.loads(Path(source).read_text())
        if not isinstance(cfg, dict):
            raise ValueError(f"config root must be a JSON object, got {type(cfg).__name__}")

    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown key(s) {sorted(unknown)} at top level")

    base = default_params()
    hh = base.household
    if "household" in cfg:
        sub = cfg["household"]
        bad = set(sub) - _HOUSEHOLD_KEYS
        if bad:
            raise ValueError(f"unknown key(s) {sorted(bad)} at household")
        hh = HouseholdParams(
            alpha=sub.get("alpha", hh.alpha),
            xi=sub.get("xi", hh.xi),
            omega=sub.get("omega", hh.omega),
        )

    layers = dict(base.layers)
    if "layers" in cfg:
        for label, sub in cfg["layers"].items():
            kind = LayerKind.from_label(label)
            if kind == LayerKind.HOUSEHOLD:
                raise ValueError("layers.L1: household layer is configured via 'household'")
            layers[kind] = _merge_layer(layers[kind], sub, f"layers.{kind.label}")

    p = ModelParams(
        n_households=cfg.get("n_households", base.n_households),
        teachers_per_class=cfg.get("teachers_per_class", base.teachers_per_class),
        mu0=cfg.get("mu0", base.mu0),
        sigma0=cfg.get("sigma0", base.sigma0),
        household=hh,
        layers=layers,
    )
    errs = validate(p)
    if errs:
        raise ValueError("invalid parameters:\n  " + "\n  ".join(errs))
    return p
