"""Zero-temperature heat-bath (Glauber) dynamics on (Z/L)^2, event driven.

In the literal dynamics every site carries a rate-1 clock; at a ring the
spin takes the majority value of its four neighbours, or a fair coin on a
2-2 tie.  A site with h disagreeing neighbours therefore flips at rate 1
if h >= 3, at rate 1/2 if h == 2, and never if h <= 1.  Thinning the
clocks accordingly gives a rejection-free chain with the same law: only
sites with h >= 2 are kept in the active sets, the waiting time is
exponential with the total rate, and the flipping site is drawn in
proportion to its rate class.  Each event touches five sites, so its cost
does not depend on the droplet size.

Spins outside the simulation window are pinned at +1.  This does not
change the law provided the window contains the bounding box of the
initial droplet: a site outside that box has at most one "-" neighbour
and can never flip.

Positions are in plane units: site (i, j) sits at (i/L, j/L).
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from numba import njit

from .geometry import CellRegion, Region

MIN_L = 16
DEFAULT_MARGIN = 8
BLOCK = 1 << 16
LOG_BLOCK = 1 << 14


class SimulationTimeout(RuntimeError):
    """The droplet outlived the safety cap on microscopic time."""

    def __init__(self, message, lattice):
        super().__init__(message)
        self.lattice = lattice


class MonotonicityError(AssertionError):
    pass


class RngStream:
    """Counter-based random stream (Philox) keyed by (seed, stream id).

    Uniforms are produced in blocks; the simulation kernels consume them
    from ``buf`` starting at ``pos``.
    """

    def __init__(self, seed: int, stream: int = 0, block: int = BLOCK):
        self.seed = int(seed)
        self.stream = int(stream)
        self.block = block
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self.buf = np.empty(0)
        self.pos = 0
        self.drawn = 0

    def refill(self) -> None:
        tail = self.buf[self.pos:]
        self.buf = np.concatenate((tail, self._gen.random(self.block)))
        self.pos = 0
        self.drawn += self.block

    def uniform(self) -> float:
        if self.pos >= len(self.buf):
            self.refill()
        u = self.buf[self.pos]
        self.pos += 1
        return float(u)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


# ------------------------------------------------------------------ kernels


@njit(cache=True, inline="always")
def _disagree(spins, x, stride):
    s = spins[x]
    return ((spins[x + 1] != s) + (spins[x - 1] != s)
            + (spins[x + stride] != s) + (spins[x - stride] != s))


@njit(cache=True)
def _reclassify(x, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride):
    if fixed[x]:
        return
    h = _disagree(spins, x, stride)
    c = 3 if h >= 3 else (2 if h == 2 else 0)
    old = cls[x]
    if c == old:
        return
    if old == 2:
        i = pos2[x]
        last = items2[cnt[0] - 1]
        items2[i] = last
        pos2[last] = i
        pos2[x] = -1
        cnt[0] -= 1
    elif old == 3:
        i = pos3[x]
        last = items3[cnt[1] - 1]
        items3[i] = last
        pos3[last] = i
        pos3[x] = -1
        cnt[1] -= 1
    if c == 2:
        pos2[x] = cnt[0]
        items2[cnt[0]] = x
        cnt[0] += 1
    elif c == 3:
        pos3[x] = cnt[1]
        items3[cnt[1]] = x
        cnt[1] += 1
    cls[x] = c


@njit(cache=True)
def _flip(x, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride):
    spins[x] = -spins[x]
    cnt[2] += -1 if spins[x] > 0 else 1
    _reclassify(x, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride)
    _reclassify(x + 1, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride)
    _reclassify(x - 1, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride)
    _reclassify(x + stride, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride)
    _reclassify(x - stride, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride)


@njit(cache=True)
def _advance_kernel(spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride,
                    buf, bpos, t, until, last_flip, log_t, log_x, log_n):
    """Run events until ``until``.  Returns (t, bpos, last_flip, status).

    status 0: reached ``until`` (or no active site left)
    status 1: uniform buffer exhausted, refill and call again
    status 2: event log full, flush and call again
    """
    nb = buf.shape[0]
    logging = log_t.shape[0] > 0
    while True:
        rate = cnt[1] + 0.5 * cnt[0]
        if rate == 0.0:
            return until, bpos, last_flip, 0
        if bpos + 2 > nb:
            return t, bpos, last_flip, 1
        u1 = buf[bpos]
        u2 = buf[bpos + 1]
        bpos += 2
        t_next = t - math.log(1.0 - u1) / rate
        if t_next > until:
            return until, bpos, last_flip, 0
        t = t_next
        v = u2 * rate
        if v < cnt[1]:
            x = items3[int(v)]
        else:
            k = int((v - cnt[1]) * 2.0)
            if k >= cnt[0]:
                k = cnt[0] - 1
            x = items2[k]
        _flip(x, spins, fixed, cls, items2, pos2, items3, pos3, cnt, stride)
        last_flip = t
        if logging:
            n = log_n[0]
            log_t[n] = t
            log_x[n] = x * 2 + (1 if spins[x] > 0 else 0)
            log_n[0] = n + 1
            if n + 1 == log_t.shape[0]:
                return t, bpos, last_flip, 2


@njit(cache=True)
def _union_update(x, cls_a, cls_b, fixed, uitems, upos, ucnt):
    if fixed[x]:
        return
    inside = cls_a[x] != 0 or cls_b[x] != 0
    if inside and upos[x] < 0:
        upos[x] = ucnt[0]
        uitems[ucnt[0]] = x
        ucnt[0] += 1
    elif not inside and upos[x] >= 0:
        i = upos[x]
        last = uitems[ucnt[0] - 1]
        uitems[i] = last
        upos[last] = i
        upos[x] = -1
        ucnt[0] -= 1


@njit(cache=True)
def _heat_bath_value(spins, x, stride, u):
    s = spins[x + 1] + spins[x - 1] + spins[x + stride] + spins[x - stride]
    if s > 0:
        return 1
    if s < 0:
        return -1
    return -1 if u < 0.5 else 1


@njit(cache=True)
def _coupled_kernel(sa, ca, a2, pa2, a3, pa3, cnta,
                    sb, cb, b2, pb2, b3, pb3, cntb,
                    fixed, uitems, upos, ucnt, stride,
                    buf, bpos, t, until, check):
    """Shared-clock coupling of two heat-bath systems; returns (t, bpos, status, violations)."""
    nb = buf.shape[0]
    violations = 0
    while True:
        rate = float(ucnt[0])
        if rate == 0.0:
            return until, bpos, 0, violations
        if bpos + 3 > nb:
            return t, bpos, 1, violations
        u1 = buf[bpos]
        u2 = buf[bpos + 1]
        u3 = buf[bpos + 2]
        bpos += 3
        t_next = t - math.log(1.0 - u1) / rate
        if t_next > until:
            return until, bpos, 0, violations
        t = t_next
        k = int(u2 * rate)
        if k >= ucnt[0]:
            k = ucnt[0] - 1
        x = uitems[k]
        if _heat_bath_value(sa, x, stride, u3) != sa[x]:
            _flip(x, sa, fixed, ca, a2, pa2, a3, pa3, cnta, stride)
        if _heat_bath_value(sb, x, stride, u3) != sb[x]:
            _flip(x, sb, fixed, cb, b2, pb2, b3, pb3, cntb, stride)
        _union_update(x, ca, cb, fixed, uitems, upos, ucnt)
        _union_update(x + 1, ca, cb, fixed, uitems, upos, ucnt)
        _union_update(x - 1, ca, cb, fixed, uitems, upos, ucnt)
        _union_update(x + stride, ca, cb, fixed, uitems, upos, ucnt)
        _union_update(x - stride, ca, cb, fixed, uitems, upos, ucnt)
        if check and sa[x] < sb[x]:
            violations += 1


# ------------------------------------------------------------------ lattice


class SpinLattice:
    """Spins on a rectangular window of (Z/L)^2, surrounded by pinned +1 spins.

    ``origin`` is the lattice index (i, j) of the window's lower-left site
    and ``shape`` its size in sites.  Internally the window is stored with
    a one-site ring of pinned spins, flattened row-major.
    """

    def __init__(self, L: int, origin: tuple[int, int], spins: np.ndarray, t: float = 0.0):
        if L < MIN_L:
            raise ValueError(f"L must be at least {MIN_L}, got {L}")
        spins = np.asarray(spins)
        if spins.ndim != 2 or not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be a 2D array of +-1")
        self.L = int(L)
        self.origin = (int(origin[0]), int(origin[1]))
        self.shape = spins.shape
        nx, ny = spins.shape
        self.stride = ny + 2
        full = np.ones((nx + 2, ny + 2), dtype=np.int8)
        full[1:-1, 1:-1] = spins
        self.spins = full.ravel()
        fixed = np.ones((nx + 2, ny + 2), dtype=np.bool_)
        fixed[1:-1, 1:-1] = False
        self.fixed = fixed.ravel()
        self.t = float(t)
        self.last_flip = 0.0
        self._build_active()

    def _build_active(self) -> None:
        size = self.spins.size
        self.cls = np.zeros(size, dtype=np.int8)
        self.items2 = np.zeros(size, dtype=np.int64)
        self.items3 = np.zeros(size, dtype=np.int64)
        self.pos2 = np.full(size, -1, dtype=np.int64)
        self.pos3 = np.full(size, -1, dtype=np.int64)
        h = self.disagreements()
        cls = np.where(h >= 3, 3, np.where(h == 2, 2, 0)).astype(np.int8)
        cls[self.fixed] = 0
        self.cls[:] = cls
        s2 = np.nonzero(cls == 2)[0]
        s3 = np.nonzero(cls == 3)[0]
        self.items2[: len(s2)] = s2
        self.items3[: len(s3)] = s3
        self.pos2[s2] = np.arange(len(s2))
        self.pos3[s3] = np.arange(len(s3))
        self.cnt = np.array([len(s2), len(s3), int(np.count_nonzero(self.spins < 0))], dtype=np.int64)

    def disagreements(self) -> np.ndarray:
        """Number of disagreeing neighbours of every stored site (full rescan)."""
        s = self.spins.reshape(self.shape[0] + 2, self.shape[1] + 2)
        h = np.zeros(s.shape, dtype=np.int64)
        c = s[1:-1, 1:-1]
        h[1:-1, 1:-1] = ((s[2:, 1:-1] != c).astype(int) + (s[:-2, 1:-1] != c)
                         + (s[1:-1, 2:] != c) + (s[1:-1, :-2] != c))
        return h.ravel()

    @classmethod
    def from_region(cls, L: int, region: Region, margin: int = DEFAULT_MARGIN) -> "SpinLattice":
        return init_from_region(L, region, margin)

    @classmethod
    def from_window(cls, L: int, spins, origin=(0, 0)) -> "SpinLattice":
        return cls(L, origin, np.asarray(spins, dtype=np.int8))

    def copy(self) -> "SpinLattice":
        new = object.__new__(SpinLattice)
        new.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()})
        return new

    @property
    def window(self) -> np.ndarray:
        """Spins of the window (a copy), indexed [i - origin_i, j - origin_j]."""
        return self.spins.reshape(self.shape[0] + 2, self.shape[1] + 2)[1:-1, 1:-1].copy()

    @property
    def n_minus(self) -> int:
        return int(self.cnt[2])

    @property
    def total_rate(self) -> float:
        return float(self.cnt[1] + 0.5 * self.cnt[0])

    @property
    def active_counts(self) -> tuple[int, int]:
        """(#sites flipping at rate 1/2, #sites flipping at rate 1)."""
        return int(self.cnt[0]), int(self.cnt[1])

    def classification(self) -> np.ndarray:
        """Rate class of every stored site as maintained incrementally (0, 2 or 3)."""
        return self.cls.copy()

    def rescan_classification(self) -> np.ndarray:
        h = self.disagreements()
        c = np.where(h >= 3, 3, np.where(h == 2, 2, 0)).astype(np.int8)
        c[self.fixed] = 0
        return c

    def site_index(self, flat: int) -> tuple[int, int]:
        a, b = divmod(int(flat), self.stride)
        return self.origin[0] + a - 1, self.origin[1] + b - 1

    def minus_sites(self) -> np.ndarray:
        w = self.window
        ii, jj = np.nonzero(w < 0)
        return np.column_stack((ii + self.origin[0], jj + self.origin[1])).astype(np.int64)

    def droplet(self) -> CellRegion:
        return droplet(self)

    def __repr__(self):
        return f"SpinLattice(L={self.L}, window={self.shape}, minus={self.n_minus}, t={self.t:.6g})"


def init_from_region(L: int, region: Region, margin: int = DEFAULT_MARGIN,
                     bbox=None) -> SpinLattice:
    """Spins -1 exactly at lattice sites inside the region, +1 elsewhere.

    The window covers ``bbox`` (default: the region's bounding box) plus
    ``margin`` sites.  Pass a common ``bbox`` to build lattices that can
    be coupled.
    """
    if L < MIN_L:
        raise ValueError(f"L must be at least {MIN_L}, got {L}")
    b = region.bbox() if bbox is None else bbox
    if b is None:
        return SpinLattice(L, (0, 0), np.ones((1, 1), dtype=np.int8))
    i0 = math.floor(b[0] * L) - margin
    j0 = math.floor(b[1] * L) - margin
    i1 = math.ceil(b[2] * L) + margin
    j1 = math.ceil(b[3] * L) + margin
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    inside = region.contains(ii / L, jj / L)
    spins = np.where(inside, -1, 1).astype(np.int8)
    return SpinLattice(L, (i0, j0), spins)


def droplet(lattice: SpinLattice) -> CellRegion:
    """Union of the closed 1/L-cells centered at the -1 sites."""
    return CellRegion(lattice.L, lattice.minus_sites())


def advance(lattice: SpinLattice, rng: RngStream, until: float, event_log=None) -> SpinLattice:
    """Run the dynamics in place up to microscopic time ``until``.

    ``event_log``, if given, is a writable text stream receiving one
    ``t i,j old new`` line per flip.
    """
    if until < lattice.t:
        raise ValueError(f"cannot advance backwards from t={lattice.t} to {until}")
    if event_log is not None:
        log_t = np.zeros(LOG_BLOCK)
        log_x = np.zeros(LOG_BLOCK, dtype=np.int64)
    else:
        log_t = np.zeros(0)
        log_x = np.zeros(0, dtype=np.int64)
    log_n = np.zeros(1, dtype=np.int64)
    t = lattice.t
    while True:
        t, rng.pos, last, status = _advance_kernel(
            lattice.spins, lattice.fixed, lattice.cls, lattice.items2, lattice.pos2,
            lattice.items3, lattice.pos3, lattice.cnt, lattice.stride,
            rng.buf, rng.pos, t, float(until), lattice.last_flip, log_t, log_x, log_n,
        )
        lattice.last_flip = last
        if event_log is not None and (status == 2 or status == 0) and log_n[0]:
            _flush_log(lattice, event_log, log_t, log_x, int(log_n[0]))
            log_n[0] = 0
        if status == 0:
            break
        if status == 1:
            rng.refill()
    lattice.t = t
    return lattice


def _flush_log(lattice, stream, log_t, log_x, n):
    # log_x packs the flat site index and the new spin as 2 * x + (new > 0)
    out = []
    for t, code in zip(log_t[:n], log_x[:n]):
        x, up = divmod(int(code), 2)
        new = 1 if up else -1
        i, j = lattice.site_index(x)
        out.append(f"{float(t)!r} {i},{j} {-new} {new}\n")
    stream.write("".join(out))


def death_time(lattice: SpinLattice, rng: RngStream, cap: float | None = None, event_log=None) -> float:
    """Run until every spin is +1 and return the time of the last flip.

    The default safety cap is ten times the deterministic extinction time
    L^2 * Area / 2 of the initial droplet, plus 100 time units so that
    single-site droplets are not cut off.
    """
    if lattice.n_minus == 0:
        return lattice.last_flip if lattice.t > 0 else 0.0
    if cap is None:
        cap = lattice.t + 10.0 * lattice.n_minus / 2.0 + 100.0
    advance(lattice, rng, cap, event_log=event_log)
    if lattice.n_minus > 0:
        raise SimulationTimeout(f"droplet still has {lattice.n_minus} sites at t={cap:.6g}", lattice)
    return lattice.last_flip


def ordered(lower: SpinLattice, upper: SpinLattice) -> bool:
    """True when the droplet of ``lower`` is contained in the droplet of ``upper``.

    In spin terms every -1 of ``lower`` is a -1 of ``upper``, i.e.
    ``lower.spins >= upper.spins`` sitewise.
    """
    return bool(np.all(lower.spins >= upper.spins))


def coupled_advance(lower: SpinLattice, upper: SpinLattice, rng: RngStream, until: float,
                    check: bool = True) -> tuple[SpinLattice, SpinLattice]:
    """Advance two ordered lattices with shared clocks and shared tie-breaking coins.

    Every site that is unstable in either system carries a rate-1 clock;
    at a ring both systems apply the heat-bath rule with the same uniform.
    The rule is monotone in the neighbourhood, so droplet inclusion
    (see ``ordered``) is preserved.  With ``check`` the order is verified after
    every event and a violation raises ``MonotonicityError``.
    """
    if lower.L != upper.L or lower.origin != upper.origin or lower.shape != upper.shape:
        raise ValueError("coupled lattices must share L and the simulation window")
    if not ordered(lower, upper):
        raise ValueError("coupled_advance requires the lower droplet to lie inside the upper one")
    if until < lower.t or until < upper.t:
        raise ValueError("cannot advance backwards")
    size = lower.spins.size
    uitems = np.zeros(size, dtype=np.int64)
    upos = np.full(size, -1, dtype=np.int64)
    members = np.nonzero((lower.cls != 0) | (upper.cls != 0))[0]
    uitems[: len(members)] = members
    upos[members] = np.arange(len(members))
    ucnt = np.array([len(members)], dtype=np.int64)
    t = max(lower.t, upper.t)
    total_violations = 0
    while True:
        t, rng.pos, status, viol = _coupled_kernel(
            lower.spins, lower.cls, lower.items2, lower.pos2, lower.items3, lower.pos3, lower.cnt,
            upper.spins, upper.cls, upper.items2, upper.pos2, upper.items3, upper.pos3, upper.cnt,
            lower.fixed, uitems, upos, ucnt, lower.stride, rng.buf, rng.pos, t, float(until), check,
        )
        total_violations += viol
        if status == 0:
            break
        rng.refill()
    lower.t = upper.t = t
    if check and total_violations:
        raise MonotonicityError(f"order violated at {total_violations} events")
    return lower, upper


def write_event_log(path, lattice: SpinLattice, rng: RngStream, until: float) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        advance(lattice, rng, until, event_log=fh)
    return path
