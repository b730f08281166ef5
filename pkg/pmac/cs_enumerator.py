"""
Pure equilibria of the channel-selection game.

Each player puts its whole budget on one channel, so a profile is a
vector of K channel indices and the game has S^K profiles. Profiles are
numbered mixed-radix, little-endian (player 1 fastest):

    index = sum_k c_k * S^k        (c_k 0-based)

Two profiles are neighbors when exactly one player's channel differs.
Orienting every neighbor pair toward the larger potential gives a directed
graph whose sinks are exactly the pure equilibria.
"""
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.special import comb

from pmac.config import Enumeration
from pmac.errors import CapExceededError, SolverError, StructuralError
from pmac.model import CsProfile, GainMatrix, GameConfig, NeEntry, NeReport, cs_to_power, utilities
from pmac.sim_utils.cache import cached_call, create_lru_cache
from pmac.sim_utils.io import atomic_write_bytes, file_lock
from pmac.sim_utils.logging import LogOnce, log_event

_LN2 = np.log(2.0)
_log_once = LogOnce(period_sec=60)

_decode_cache = create_lru_cache(Enumeration.decode_cache_size)
_decode_lock = threading.Lock()


# =============================================================================
# Profile codec
# =============================================================================

class ProfileCodec:
    """Bijection between CsProfiles and vertex indices 0 .. S^K - 1."""

    def __init__(self, num_players: int, num_channels: int):
        if num_players < 1 or num_channels < 1:
            raise StructuralError(f"need K >= 1 and S >= 1, got K={num_players}, S={num_channels}")
        self.num_players = num_players
        self.num_channels = num_channels
        self.size = num_channels ** num_players

    @classmethod
    def for_config(cls, config: GameConfig) -> "ProfileCodec":
        return cls(config.num_players, config.num_channels)

    def encode(self, profile: CsProfile) -> int:
        if len(profile) != self.num_players:
            raise StructuralError(f"profile has {len(profile)} choices for K={self.num_players}")
        index = 0
        for c in reversed(profile.choices):
            if not 0 <= c < self.num_channels:
                raise StructuralError(f"channel {c} out of range for S={self.num_channels}")
            index = index * self.num_channels + c
        return index

    def decode(self, index: int) -> CsProfile:
        if not 0 <= index < self.size:
            raise StructuralError(f"vertex index {index} out of range [0, {self.size})")
        choices = []
        for _ in range(self.num_players):
            index, c = divmod(index, self.num_channels)
            choices.append(c)
        return CsProfile(tuple(choices))

    def decode_block(self, start: int, stop: int) -> np.ndarray:
        """Choices of profiles start .. stop-1 as a read-only (n, K) int array."""
        key = (self.num_players, self.num_channels, start, stop)
        with _decode_lock:
            return cached_call(_decode_cache, key, lambda: self._decode_block(start, stop))

    def _decode_block(self, start: int, stop: int) -> np.ndarray:
        radix = self.num_channels ** np.arange(self.num_players, dtype=np.int64)
        idx = np.arange(start, stop, dtype=np.int64)
        block = (idx[:, None] // radix[None, :]) % self.num_channels
        block.flags.writeable = False
        return block

    def neighbors(self, index: int) -> list[int]:
        """The K(S-1) profiles reachable by one player switching channel."""
        profile = self.decode(index)
        out = []
        for k, c in enumerate(profile.choices):
            step = self.num_channels ** k
            out.extend(index + (s - c) * step for s in range(self.num_channels) if s != c)
        return out


def _enforce_cap(size: int, cap: int, what: str = "profiles") -> None:
    if size > cap:
        log_event("cs_enumerator", "cap_exceeded", {"size": size, "cap": cap, "what": what}, "warning")
        raise CapExceededError(size, cap, what)


def _ranges(size: int, chunk: int) -> list[tuple[int, int]]:
    return [(start, min(start + chunk, size)) for start in range(0, size, chunk)]


def _channel_totals(choices: np.ndarray, received: np.ndarray, config: GameConfig) -> np.ndarray:
    """sigma^2_s plus the received power on s, per profile row."""
    rows = np.arange(choices.shape[0])
    totals = np.tile(config.noise_powers, (choices.shape[0], 1))
    for k in range(choices.shape[1]):
        totals[rows, choices[:, k]] += received[:, k]
    return totals


# =============================================================================
# Exhaustive enumeration
# =============================================================================

@dataclass(frozen=True, eq=False)
class _RangeScan:
    ne_indices: np.ndarray
    near_ties: int
    best_index: int
    best_phi: float


def _scan_range(codec: ProfileCodec, g: np.ndarray, config: GameConfig, tie_tolerance: float,
                bounds: tuple[int, int]) -> _RangeScan:
    start, stop = bounds
    choices = codec.decode_block(start, stop)
    n, num_players = choices.shape
    rows = np.arange(n)
    p = config.max_power
    b = config.fractions

    received = g[np.arange(num_players)[None, :], choices] * p[None, :]
    totals = _channel_totals(choices, received, config)
    phi = (np.log(totals) / _LN2) @ b

    is_ne = np.ones(n, dtype=bool)
    near_ties = 0
    for k in range(num_players):
        c = choices[:, k]
        own_total = totals[rows, c]
        current = b[c] * np.log1p(received[:, k] / (own_total - received[:, k])) / _LN2
        # Moving to s' adds p_k g_{k,s'} on top of the full current total of s'.
        moved = b[None, :] * np.log1p(p[k] * g[k][None, :] / totals) / _LN2
        gain = moved - current[:, None]
        gain[rows, c] = -np.inf
        is_ne &= ~np.any(gain > tie_tolerance, axis=1)
        near_ties += int(np.count_nonzero(np.abs(gain) <= tie_tolerance))

    best = int(np.argmax(phi))
    return _RangeScan(
        ne_indices=start + np.flatnonzero(is_ne),
        near_ties=near_ties,
        best_index=start + best,
        best_phi=float(phi[best]),
    )


def _entry(profile: CsProfile, gains: GainMatrix, config: GameConfig, label: str,
           phi: float | None = None) -> NeEntry:
    power = cs_to_power(profile, config)
    u = utilities(power, gains, config)
    if phi is None:
        received = power.powers * gains.gains
        phi = float(config.fractions @ (np.log(config.noise_powers + received.sum(axis=0)) / _LN2))
    return NeEntry(profile=profile, potential=float(phi), utilities=tuple(float(v) for v in u),
                   nse=float(np.sum(u)), label=label)


def enumerate_cs_ne(gains: GainMatrix, config: GameConfig, tie_tolerance: float = 0.0,
                    cap: int | None = None, workers: int | None = None) -> NeReport:
    """
    Every pure equilibrium of the channel-selection game, by exhaustive search.

    A profile is an equilibrium when no player gains more than
    `tie_tolerance` by switching channel alone. Deviation gains are computed
    from cached per-channel totals, so each check touches two channel sums.

    Args:
        gains: Channel gains
        config: Game configuration
        tie_tolerance: Smallest utility gain that counts as an improvement
        cap: Largest S^K accepted (default: Enumeration.max_profiles)
        workers: Threads scanning disjoint index ranges (default: Enumeration.workers)

    Returns:
        NeReport in vertex-index order; the potential maximizer is labeled
        "potential-max" and all others "local"

    Raises:
        CapExceededError: S^K above the cap
    """
    gains.check(config)
    if tie_tolerance < 0:
        raise StructuralError(f"tie_tolerance must be >= 0, got {tie_tolerance}")
    codec = ProfileCodec.for_config(config)
    _enforce_cap(codec.size, Enumeration.max_profiles if cap is None else cap)
    workers = Enumeration.workers if workers is None else workers

    scan = partial(_scan_range, codec, gains.gains, config, tie_tolerance)
    ranges = _ranges(codec.size, Enumeration.chunk_size)
    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scans = list(pool.map(scan, ranges))
    else:
        scans = [scan(r) for r in ranges]

    ne_indices = np.concatenate([s.ne_indices for s in scans]).tolist()
    near_ties = sum(s.near_ties for s in scans)
    best = max(scans, key=lambda s: s.best_phi)

    entries = tuple(
        _entry(codec.decode(i), gains, config, "potential-max" if i == best.best_index else "local")
        for i in ne_indices
    )
    if best.best_index not in ne_indices:
        log_event("cs_enumerator", "argmax_not_equilibrium",
                  {"index": best.best_index, "phi": best.best_phi}, "error")
    if near_ties:
        _log_once.warning("cs_enumerator", "ties", "deviation gains within tie tolerance",
                          near_ties=near_ties, tolerance=tie_tolerance)

    bound = ne_upper_bound(config.num_players, config.num_channels).L_max
    log_event("cs_enumerator", "enumerated",
              {"K": config.num_players, "S": config.num_channels, "count": len(entries),
               "profiles": codec.size, "near_ties": near_ties}, "debug")
    return NeReport(equilibria=entries, bound=bound, exhaustive=True,
                    profiles_checked=codec.size, near_ties=near_ties)


def potential_values(gains: GainMatrix, config: GameConfig, cap: int | None = None) -> np.ndarray:
    """Potential of every profile, in vertex-index order."""
    gains.check(config)
    codec = ProfileCodec.for_config(config)
    _enforce_cap(codec.size, Enumeration.max_profiles if cap is None else cap)
    g = gains.gains
    out = np.empty(codec.size)
    for start, stop in _ranges(codec.size, Enumeration.chunk_size):
        choices = codec.decode_block(start, stop)
        received = g[np.arange(config.num_players)[None, :], choices] * config.max_power[None, :]
        out[start:stop] = (np.log(_channel_totals(choices, received, config)) / _LN2) @ config.fractions
    return out


# =============================================================================
# Best-response graph
# =============================================================================

def _neighbor_pairs(codec: ProfileCodec) -> tuple[np.ndarray, np.ndarray]:
    """All (i, j) with j a one-player deviation of i, each unordered pair listed twice."""
    choices = codec.decode_block(0, codec.size)
    idx = np.arange(codec.size, dtype=np.int64)
    src, dst = [], []
    for k in range(codec.num_players):
        step = codec.num_channels ** k
        for shift in range(1, codec.num_channels):
            target = (choices[:, k] + shift) % codec.num_channels
            src.append(idx)
            dst.append(idx + (target - choices[:, k]) * step)
    if not src:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(src), np.concatenate(dst)


@dataclass(frozen=True, eq=False)
class CsGraph:
    """Deviation graph with edges oriented toward strictly larger potential.

    Attributes:
        codec: Vertex index <-> profile mapping
        phi: Potential per vertex
        orientation: Directed graph; edge i -> j iff j neighbors i and phi[j] > phi[i]
    """
    codec: ProfileCodec
    phi: np.ndarray
    orientation: nx.DiGraph

    @property
    def num_vertices(self) -> int:
        return self.codec.size

    def neighbors(self, index: int) -> list[int]:
        return self.codec.neighbors(index)

    def adjacency_graph(self) -> nx.Graph:
        """Undirected deviation graph (every vertex has K(S-1) neighbors)."""
        src, dst = _neighbor_pairs(self.codec)
        keep = src < dst
        graph = nx.Graph()
        graph.add_nodes_from(range(self.num_vertices))
        graph.add_edges_from(zip(src[keep].tolist(), dst[keep].tolist()))
        return graph

    def sinks(self) -> list[int]:
        return sorted(n for n, d in self.orientation.out_degree() if d == 0)

    def sink_profiles(self) -> list[CsProfile]:
        return [self.codec.decode(i) for i in self.sinks()]

    def write_edge_list(self, path: Path | str) -> Path:
        """One "i j" line per directed edge, sorted."""
        lines = [f"{i} {j}\n" for i, j in sorted(self.orientation.edges())]
        path = Path(path)
        with file_lock(path):
            atomic_write_bytes(path, "".join(lines).encode())
        return path

    def write_vertex_table(self, path: Path | str) -> Path:
        """One "index: (c_1,...,c_K) phi=value" line per vertex, 1-based channels."""
        lines = [f"{i}: {self.codec.decode(i)} phi={self.phi[i]:.12g}\n" for i in range(self.num_vertices)]
        path = Path(path)
        with file_lock(path):
            atomic_write_bytes(path, "".join(lines).encode())
        return path


def orient_by_potential(codec: ProfileCodec, phi: np.ndarray) -> CsGraph:
    """Orient the deviation graph of `codec` by an arbitrary potential vector."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (codec.size,):
        raise StructuralError(f"need {codec.size} potential values, got shape {phi.shape}")
    src, dst = _neighbor_pairs(codec)
    up = phi[dst] > phi[src]
    orientation = nx.DiGraph()
    orientation.add_nodes_from(range(codec.size))
    orientation.add_edges_from(zip(src[up].tolist(), dst[up].tolist()))
    phi = phi.copy()
    phi.flags.writeable = False
    return CsGraph(codec=codec, phi=phi, orientation=orientation)


def build_cs_graph(gains: GainMatrix, config: GameConfig, cap: int | None = None) -> CsGraph:
    """Materialize the oriented deviation graph (capped at Enumeration.max_graph_vertices)."""
    gains.check(config)
    codec = ProfileCodec.for_config(config)
    _enforce_cap(codec.size, Enumeration.max_graph_vertices if cap is None else cap, "graph vertices")
    return orient_by_potential(codec, potential_values(gains, config, cap=codec.size))


# =============================================================================
# Best responses and descent
# =============================================================================

def best_channel(gains: GainMatrix, config: GameConfig, k: int, profile: CsProfile) -> int:
    """Channel maximizing player k's utility with the others fixed (lowest index on ties)."""
    gains.check(config)
    profile.check(config)
    if not 0 <= k < config.num_players:
        raise StructuralError(f"player index {k} out of range for K={config.num_players}")
    others = np.array(profile.choices)
    received = gains.gains[np.arange(config.num_players), others] * config.max_power
    totals = config.noise_powers + np.bincount(others, weights=received, minlength=config.num_channels)
    totals[others[k]] -= received[k]
    values = config.fractions * np.log1p(config.max_power[k] * gains.gains[k] / totals)
    return int(np.argmax(values))


@dataclass(frozen=True)
class DescentResult:
    profile: CsProfile
    sweeps: int
    moves: int
    converged: bool


def br_descent_cs(gains: GainMatrix, config: GameConfig, rng: np.random.Generator | None = None,
                  initial: CsProfile | None = None, max_sweeps: int | None = None,
                  tie_tolerance: float = 0.0) -> DescentResult:
    """
    Round-robin best responses until no player wants to move.

    Every accepted move raises the potential, so the walk ends at a sink of
    the oriented deviation graph, i.e. at a pure equilibrium.

    Args:
        gains: Channel gains
        config: Game configuration
        rng: Draws the random start when `initial` is None
        initial: Starting profile
        max_sweeps: Sweep cap (default: Enumeration.br_max_sweeps)
        tie_tolerance: Minimum utility gain for a move
    """
    gains.check(config)
    if initial is None:
        if rng is None:
            raise StructuralError("br_descent_cs needs an rng or an initial profile")
        choices = rng.integers(0, config.num_channels, size=config.num_players)
    else:
        initial.check(config)
        choices = np.array(initial.choices)
    max_sweeps = Enumeration.br_max_sweeps if max_sweeps is None else max_sweeps

    g = gains.gains
    p = config.max_power
    b = config.fractions
    players = np.arange(config.num_players)
    moves = 0
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        received = g[players, choices] * p
        totals = config.noise_powers + np.bincount(choices, weights=received, minlength=config.num_channels)
        moved = False
        for k in players:
            c = choices[k]
            without = totals.copy()
            without[c] -= received[k]
            values = b * np.log1p(p[k] * g[k] / without)
            target = int(np.argmax(values))
            if target != c and values[target] - values[c] > tie_tolerance * _LN2:
                totals[c] -= received[k]
                choices[k] = target
                received[k] = p[k] * g[k, target]
                totals[target] += received[k]
                moves += 1
                moved = True
        if not moved:
            converged = True
            break

    if not converged:
        log_event("cs_enumerator", "descent_not_converged", {"sweeps": sweeps, "moves": moves}, "warning")
    return DescentResult(profile=CsProfile(tuple(int(c) for c in choices)),
                         sweeps=sweeps, moves=moves, converged=converged)


def sample_cs_ne(gains: GainMatrix, config: GameConfig, rng: np.random.Generator,
                 starts: int | None = None, max_sweeps: int | None = None,
                 tie_tolerance: float = 0.0) -> NeReport:
    """
    Equilibria reached by best-response descent from random starts.

    Used when S^K is too large to enumerate; the report is marked
    non-exhaustive and its best entry is labeled "sampled-max".
    """
    gains.check(config)
    starts = Enumeration.sample_starts if starts is None else starts
    found: dict[CsProfile, None] = {}
    for _ in range(starts):
        result = br_descent_cs(gains, config, rng, max_sweeps=max_sweeps, tie_tolerance=tie_tolerance)
        if result.converged:
            found.setdefault(result.profile)
    if not found:
        raise SolverError(f"best-response descent did not converge from any of {starts} starts")

    entries = [_entry(profile, gains, config, "sampled") for profile in found]
    top = max(range(len(entries)), key=lambda i: entries[i].potential)
    entries[top] = NeEntry(entries[top].profile, entries[top].potential, entries[top].utilities,
                           entries[top].nse, "sampled-max")
    bound = ne_upper_bound(config.num_players, config.num_channels).L_max
    return NeReport(equilibria=tuple(entries), bound=bound, exhaustive=False,
                    profiles_checked=len(found))


# =============================================================================
# Counting
# =============================================================================

@dataclass(frozen=True)
class NeBound:
    """Upper bound on the number of pure equilibria."""
    L_max: int


def ne_upper_bound(num_players: int, num_channels: int) -> NeBound:
    """L = 1 + (S-1) * sum over even i in [2, K] of C(K, i)."""
    if num_players < 1 or num_channels < 1:
        raise StructuralError(f"need K >= 1 and S >= 1, got K={num_players}, S={num_channels}")
    even_sum = sum(int(comb(num_players, i, exact=True)) for i in range(2, num_players + 1, 2))
    return NeBound(L_max=1 + (num_channels - 1) * even_sum)


def ne_fraction_estimate(num_players: int, num_channels: int) -> float:
    """Large-K approximation (S-1)(2/S)^K of the bound divided by S^K."""
    if num_players < 1 or num_channels < 2:
        raise StructuralError(f"need K >= 1 and S >= 2, got K={num_players}, S={num_channels}")
    return (num_channels - 1) * (2.0 / num_channels) ** num_players


def profile_distance(a: CsProfile, b: CsProfile) -> int:
    """Number of players whose channels differ (shortest path in the deviation graph)."""
    if len(a) != len(b):
        raise StructuralError(f"profiles have different lengths: {len(a)} vs {len(b)}")
    return sum(x != y for x, y in zip(a.choices, b.choices))
