"""Layered town network construction.

The population lives on a ring of N integer positions. Households occupy
consecutive position ranges; every other layer places interactions near a
vertex's home position via Gaussian displacement. Container layers partition
the ring into capacity-weighted intervals and clique-connect whoever lands in
the same interval; star layers draw per-vertex contact counts and connect
each vertex to displaced peers.

Generation is phase-deterministic: every phase consumes its own numbered
stream of the master seed, so the subnetwork on any subset of layers is
byte-identical whether or not the remaining layers were generated. The
experiment harness leans on that: attribute tables slice one full network
into cumulative layer prefixes, and scenario sweeps reuse one network across
the whole transmission-rate grid.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import (
    CONTAINER_LAYERS,
    MUTUAL_STAR_LAYERS,
    LayerKind,
    ModelParams,
    validate,
)
from .sampling import displace, round_half_away, rng_stream, sample_count, sample_skew_normal

log = logging.getLogger(__name__)

ALL_LAYERS = tuple(LayerKind)

# Stream slot per generation phase. Fixed numbering is load-bearing: it makes
# phases independent of which layers are active.
_SLOT_HOUSEHOLDS = 0
_SLOT_ROLES = 1
_SLOT_CAPACITY = {LayerKind.BLUE_COLLAR: 2, LayerKind.WHITE_COLLAR: 4, LayerKind.SCHOOL: 6}
_SLOT_PLACEMENT = {LayerKind.BLUE_COLLAR: 3, LayerKind.WHITE_COLLAR: 5, LayerKind.SCHOOL: 7}
_SLOT_STAR = {LayerKind.FRIENDSHIP: 8, LayerKind.SERVICE: 9, LayerKind.RANDOM: 10}

ROLE_NONE, ROLE_BLUE, ROLE_WHITE, ROLE_STUDENT = 0, 1, 2, 3
_ROLE_OF_LAYER = {
    LayerKind.BLUE_COLLAR: ROLE_BLUE,
    LayerKind.WHITE_COLLAR: ROLE_WHITE,
    LayerKind.SCHOOL: ROLE_STUDENT,
}


@dataclass
class ContainerLayer:
    """Containers of one layer: ring intervals plus realized membership."""

    kind: LayerKind
    bounds: np.ndarray      # K+1 floats, bounds[0] = 0, bounds[-1] = n
    capacities: np.ndarray  # K nominal capacities (persons)
    member_concat: np.ndarray  # members sorted by (container, vertex id)
    starts: np.ndarray      # K+1 offsets into member_concat

    @property
    def count(self) -> int:
        return len(self.capacities)

    def members(self, k: int) -> np.ndarray:
        return self.member_concat[self.starts[k]:self.starts[k + 1]]

    def occupancies(self) -> np.ndarray:
        return np.diff(self.starts)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.bounds[:-1] + self.bounds[1:])


@dataclass
class TownNetwork:
    n: int
    params: ModelParams
    master_seed: int
    active: tuple[LayerKind, ...]
    house_bounds: np.ndarray  # N_H+1 vertex offsets; house h is [b[h], b[h+1])
    role: np.ndarray          # int8 per vertex
    service_workers: np.ndarray  # sorted vertex ids, subset of blue-collar
    containers: dict[LayerKind, ContainerLayer]
    school_teachers: list[np.ndarray]  # per school container, may be empty
    edges: dict[LayerKind, tuple[np.ndarray, np.ndarray]]  # canonical u < v

    def layer_exponent(self, kind: LayerKind) -> int:
        if kind == LayerKind.HOUSEHOLD:
            return 0
        return self.params.layers[kind].beta_exponent

    def edge_counts(self) -> dict[str, int]:
        return {k.label: int(self.edges[k][0].size) for k in self.active}


def compute_boundaries(capacities: np.ndarray, n: int) -> np.ndarray:
    """Capacity-proportional interval bounds over [0, n].

    B_0 = 0 and B_k = B_{k-1} + c_k / sum(c) * n; the last bound is pinned to
    exactly n so that every ring position falls into some interval.
    """
    c = np.asarray(capacities, dtype=np.float64)
    bounds = np.concatenate([[0.0], np.cumsum(c) / c.sum() * n])
    bounds[-1] = n
    return bounds


def locate(bounds: np.ndarray, positions) -> np.ndarray:
    """Index of the interval containing each position (right-open intervals)."""
    return np.searchsorted(bounds, np.asarray(positions), side="right") - 1


def _clique_edges(member_concat: np.ndarray, starts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All within-group pairs, given concatenated sorted members and offsets.

    Groups are processed in batches of equal size so the pair expansion stays
    vectorized; members ascend within each group, so u < v holds for free.
    """
    sizes = np.diff(starts)
    us, vs = [], []
    for s in np.unique(sizes):
        if s < 2:
            continue
        iu, ju = np.triu_indices(int(s), 1)
        st = starts[:-1][sizes == s]
        us.append(member_concat[(st[:, None] + iu[None, :]).ravel()])
        vs.append(member_concat[(st[:, None] + ju[None, :]).ravel()])
    if not us:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy()
    return np.concatenate(us), np.concatenate(vs)


def build_households(rng: np.random.Generator, p: ModelParams):
    """Household sizes, vertex ranges, and within-house cliques.

    Sizes are skew-normal draws rounded half away from zero and clamped to a
    minimum of 1; vertices are numbered consecutively house by house, so a
    house occupies the ring interval given by its own size.
    """
    hh = p.household
    raw = sample_skew_normal(rng, hh.alpha, hh.xi, hh.omega, p.n_households)
    sizes = np.maximum(round_half_away(raw), 1).astype(np.int64)
    house_bounds = np.concatenate([[0], np.cumsum(sizes)])
    n = int(house_bounds[-1])
    u, v = _clique_edges(np.arange(n, dtype=np.int64), house_bounds)
    return sizes, house_bounds, n, (u, v)


def assign_roles(rng: np.random.Generator, p: ModelParams, n: int):
    """Independent role draws per vertex, plus the service-worker subset.

    Role shares come from the container layers' gamma ratios; whoever falls
    outside all three shares stays unassigned (retired, unemployed, too
    young). Service workers are sampled from blue-collar workers.
    """
    def share(kind: LayerKind) -> float:
        lp = p.layers.get(kind)
        return 0.0 if lp is None or lp.gamma_ratio is None else lp.gamma_ratio

    g_blue = share(LayerKind.BLUE_COLLAR)
    g_white = share(LayerKind.WHITE_COLLAR)
    g_student = share(LayerKind.SCHOOL)

    u = rng.random(n)
    role = np.full(n, ROLE_NONE, dtype=np.int8)
    role[u < g_blue] = ROLE_BLUE
    role[(u >= g_blue) & (u < g_blue + g_white)] = ROLE_WHITE
    role[(u >= g_blue + g_white) & (u < g_blue + g_white + g_student)] = ROLE_STUDENT

    blue = np.flatnonzero(role == ROLE_BLUE)
    want = int(round_half_away(share(LayerKind.SERVICE) * n))
    # validate() bounds the ratios, not the realized counts; the clamp only
    # matters on tiny populations.
    want = min(want, blue.size)
    service = np.sort(rng.choice(blue, size=want, replace=False)) if want else np.empty(0, np.int64)
    return role, service.astype(np.int64)


def _draw_capacities(rng: np.random.Generator, mu: float, sigma: float, target: int) -> np.ndarray:
    """Capacity draws until the cumulative total reaches `target` (>= 1 draw)."""
    caps: list[np.ndarray] = []
    total = 0
    while True:
        chunk = sample_count(rng, mu, sigma, 256, floor=1)
        cum = total + np.cumsum(chunk)
        hit = np.flatnonzero(cum >= target)
        if hit.size:
            caps.append(chunk[: hit[0] + 1])
            break
        caps.append(chunk)
        total = int(cum[-1])
    return np.concatenate(caps)


def build_container_layer(cap_rng, place_rng, p: ModelParams, kind: LayerKind,
                          members: np.ndarray, n: int):
    """Partition the ring into containers and clique-connect the members.

    Capacities are drawn until they cover the layer's population share of the
    ring; each member is displaced from home and joins the container whose
    interval contains the landing position. Realized occupancy is stochastic,
    capacity only shapes the interval widths.
    """
    lp = p.layers[kind]
    target = int(round_half_away((lp.gamma_ratio or 0.0) * n))
    caps = _draw_capacities(cap_rng, lp.mu, lp.sigma, target)
    bounds = compute_boundaries(caps, n)

    mu_d, sigma_d = p.displacement(kind)
    loc = displace(members, place_rng.normal(mu_d, sigma_d, members.size), n)
    cidx = locate(bounds, loc)

    order = np.argsort(cidx, kind="stable")
    member_concat = members[order]
    occupancy = np.bincount(cidx, minlength=len(caps))
    starts = np.concatenate([[0], np.cumsum(occupancy)])
    layer = ContainerLayer(kind, bounds, caps, member_concat, starts)
    return layer, _clique_edges(member_concat, starts)


def assign_teachers(p: ModelParams, work_layers: list[ContainerLayer],
                    schools: ContainerLayer, n: int):
    """Attach teachers from work containers to school containers.

    Every school takes `teachers_per_class` employees from the nearest work
    container (ring geodesic between interval midpoints) that still has that
    many unassigned employees; each employee teaches at most one school.
    Teachers are clique-connected to the students and to each other. When no
    single container can cover a school, the remainder is pulled from the
    nearest containers with anyone left, which only happens on degenerate
    parameter sets.
    """
    t_need = p.teachers_per_class
    assignments: list[np.ndarray] = []
    us, vs = [], []
    if t_need == 0 or schools.count == 0:
        return [np.empty(0, np.int64) for _ in range(schools.count)], (
            np.empty(0, np.int64), np.empty(0, np.int64))

    mids = np.concatenate([wl.midpoints() for wl in work_layers]) if work_layers else np.empty(0)
    pools = [wl.members(k) for wl in work_layers for k in range(wl.count)]
    pool_sizes = np.array([pl.size for pl in pools], dtype=np.int64)
    taken = np.zeros(len(pools), dtype=np.int64)  # employees consumed per pool

    for s in range(schools.count):
        students = schools.members(s)
        smid = 0.5 * (schools.bounds[s] + schools.bounds[s + 1])
        teachers: list[int] = []
        if len(pools):
            d = np.abs(mids - smid)
            np.minimum(d, n - d, out=d)
            # stable argsort breaks distance ties by pool order (L2 before L3,
            # then container index)
            order = np.argsort(d, kind="stable")
            remaining = pool_sizes - taken
            chosen = -1
            for k in order:
                if remaining[k] >= t_need:
                    chosen = int(k)
                    break
            if chosen >= 0:
                lo = taken[chosen]
                teachers = list(pools[chosen][lo:lo + t_need])
                taken[chosen] += t_need
            else:
                for k in order:
                    if len(teachers) == t_need:
                        break
                    grab = min(t_need - len(teachers), int(remaining[k]))
                    if grab > 0:
                        lo = taken[k]
                        teachers.extend(pools[k][lo:lo + grab])
                        taken[k] += grab
                        remaining[k] -= grab
                if len(teachers) < t_need:
                    log.warning("school %d short of teachers: %d of %d assigned",
                                s, len(teachers), t_need)
        tarr = np.array(sorted(teachers), dtype=np.int64)
        assignments.append(tarr)
        if tarr.size:
            # teacher-student and teacher-teacher edges join the class clique
            tu = np.repeat(tarr, students.size)
            sv = np.tile(students, tarr.size)
            us.append(np.minimum(tu, sv))
            vs.append(np.maximum(tu, sv))
            if tarr.size >= 2:
                iu, ju = np.triu_indices(tarr.size, 1)
                us.append(tarr[iu])
                vs.append(tarr[ju])

    if us:
        return assignments, (np.concatenate(us), np.concatenate(vs))
    return assignments, (np.empty(0, np.int64), np.empty(0, np.int64))


def build_star_layer(rng: np.random.Generator, p: ModelParams, kind: LayerKind,
                     eligible: np.ndarray, n: int):
    """Per-vertex displaced contacts; self loops and repeats are discarded.

    For mutual layers (friendship, random encounters) the configured mu is a
    vertex's total contact budget, so each vertex initiates half of it and
    receives the other half from peers. Service contacts are initiated
    entirely by the service worker. Collisions are dropped without
    resampling, which under-delivers a vanishing fraction of contacts at
    realistic displacement scales.
    """
    lp = p.layers[kind]
    mu, sigma = lp.mu, lp.sigma
    if kind in MUTUAL_STAR_LAYERS:
        mu, sigma = 0.5 * mu, 0.5 * sigma
    if eligible.size == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy()

    counts = sample_count(rng, mu, sigma, eligible.size, floor=0)
    centers = np.repeat(eligible, counts)
    mu_d, sigma_d = p.displacement(kind)
    peers = displace(centers, rng.normal(mu_d, sigma_d, centers.size), n)

    a = np.minimum(centers, peers)
    b = np.maximum(centers, peers)
    keep = a != b
    a, b = a[keep], b[keep]
    # first occurrence wins; later duplicates are the discarded collisions
    _, first = np.unique(a * n + b, return_index=True)
    return a[first], b[first]


def generate(p: ModelParams, master_seed: int,
             active: tuple[LayerKind, ...] | None = None) -> TownNetwork:
    """Generate the network on the given layers (the household layer is mandatory)."""
    errs = validate(p)
    if errs:
        raise ValueError("invalid parameters:\n  " + "\n  ".join(errs))
    active = ALL_LAYERS if active is None else tuple(sorted(set(active)))
    if LayerKind.HOUSEHOLD not in active:
        raise ValueError("the household layer (L1) is required in every network")

    edges: dict[LayerKind, tuple[np.ndarray, np.ndarray]] = {}
    _, house_bounds, n, edges[LayerKind.HOUSEHOLD] = build_households(
        rng_stream(master_seed, _SLOT_HOUSEHOLDS), p)
    role, service = assign_roles(rng_stream(master_seed, _SLOT_ROLES), p, n)

    containers: dict[LayerKind, ContainerLayer] = {}
    for kind in CONTAINER_LAYERS:
        if kind not in active:
            continue
        members = np.flatnonzero(role == _ROLE_OF_LAYER[kind]).astype(np.int64)
        containers[kind], edges[kind] = build_container_layer(
            rng_stream(master_seed, _SLOT_CAPACITY[kind]),
            rng_stream(master_seed, _SLOT_PLACEMENT[kind]),
            p, kind, members, n)

    school_teachers: list[np.ndarray] = []
    if LayerKind.SCHOOL in active:
        work = [containers[k] for k in (LayerKind.BLUE_COLLAR, LayerKind.WHITE_COLLAR)
                if k in containers]
        school_teachers, (tu, tv) = assign_teachers(p, work, containers[LayerKind.SCHOOL], n)
        su, sv = edges[LayerKind.SCHOOL]
        edges[LayerKind.SCHOOL] = (np.concatenate([su, tu]), np.concatenate([sv, tv]))

    star_eligible = {
        LayerKind.FRIENDSHIP: np.arange(n, dtype=np.int64),
        LayerKind.SERVICE: service,
        LayerKind.RANDOM: np.arange(n, dtype=np.int64),
    }
    for kind in _SLOT_STAR:
        if kind in active:
            edges[kind] = build_star_layer(
                rng_stream(master_seed, _SLOT_STAR[kind]), p, kind,
                star_eligible[kind], n)

    return TownNetwork(n=n, params=p, master_seed=master_seed, active=active,
                       house_bounds=house_bounds, role=role, service_workers=service,
                       containers=containers, school_teachers=school_teachers,
                       edges=edges)


@dataclass
class UnionStructure:
    """Beta-independent union of the active layers.

    Cross-layer duplicates collapse to the smallest beta exponent (strongest
    interaction wins). Stored both as unique undirected edges and as a CSR
    adjacency over directed arcs; transmission weights for a concrete beta
    are a lookup away, so one structure serves a whole beta grid.
    """

    n: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_exp: np.ndarray   # int8, per undirected edge
    indptr: np.ndarray     # n+1
    indices: np.ndarray    # directed targets, grouped by source
    arc_exp: np.ndarray    # int8, aligned with indices

    @property
    def edge_count(self) -> int:
        return int(self.edge_u.size)

    def weights(self, beta: float) -> np.ndarray:
        """Per-arc transmission rates beta ** exponent."""
        pows = np.power(float(beta), np.arange(4, dtype=np.float64))
        return pows[self.arc_exp]

    def edge_weights(self, beta: float) -> np.ndarray:
        pows = np.power(float(beta), np.arange(4, dtype=np.float64))
        return pows[self.edge_exp]


def union_structure(net: TownNetwork,
                    layers: tuple[LayerKind, ...] | None = None) -> UnionStructure:
    """Union of the given layers (default: all active ones).

    Restricting to a subset of the active layers yields exactly the network
    that would have been generated with only those layers, because every
    phase draws from its own stream.
    """
    n = net.n
    if layers is None:
        layers = net.active
    else:
        missing = [k.label for k in layers if k not in net.active]
        if missing:
            raise ValueError(f"layers {missing} were not generated")
    parts_u, parts_v, parts_e = [], [], []
    for kind in layers:
        u, v = net.edges[kind]
        if u.size:
            parts_u.append(u)
            parts_v.append(v)
            parts_e.append(np.full(u.size, net.layer_exponent(kind), dtype=np.int8))
    if not parts_u:
        z = np.empty(0, dtype=np.int64)
        return UnionStructure(n, z, z.copy(), np.empty(0, np.int8),
                              np.zeros(n + 1, np.int64), z.copy(), np.empty(0, np.int8))

    u = np.concatenate(parts_u)
    v = np.concatenate(parts_v)
    e = np.concatenate(parts_e)
    key = u * n + v
    order = np.lexsort((e, key))
    key_s, e_s = key[order], e[order]
    first = np.ones(key_s.size, dtype=bool)
    first[1:] = key_s[1:] != key_s[:-1]
    eu = (key_s[first] // n).astype(np.int64)
    ev = (key_s[first] % n).astype(np.int64)
    ee = e_s[first]

    src = np.concatenate([eu, ev])
    dst = np.concatenate([ev, eu])
    aexp = np.concatenate([ee, ee])
    order = np.lexsort((dst, src))
    src, dst, aexp = src[order], dst[order], aexp[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return UnionStructure(n, eu, ev, ee, indptr, dst, aexp)


def write_edges_csv(net: TownNetwork, path: str | Path) -> None:
    """Edge list as layer,u,v,beta_exponent rows plus a JSON sidecar.

    Rows are sorted by (layer, u, v) so repeated exports of the same network
    are byte-identical.
    """
    path = Path(path)
    with path.open("w") as fh:
        fh.write("layer,u,v,beta_exponent\n")
        for kind in net.active:
            u, v = net.edges[kind]
            exp = net.layer_exponent(kind)
            order = np.lexsort((v, u))
            for uu, vv in zip(u[order], v[order]):
                fh.write(f"{kind.label},{uu},{vv},{exp}\n")
    meta = {
        "n": net.n,
        "n_households": net.params.n_households,
        "master_seed": net.master_seed,
        "active_layers": [k.label for k in net.active],
        "edge_counts": net.edge_counts(),
        "params_fingerprint": net.params.fingerprint(),
        "role_counts": {
            "blue_collar": int(np.sum(net.role == ROLE_BLUE)),
            "white_collar": int(np.sum(net.role == ROLE_WHITE)),
            "student": int(np.sum(net.role == ROLE_STUDENT)),
            "service_worker": int(net.service_workers.size),
        },
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
