"""State vectors over the composite register ``ancilla (x) links (x) fermion modes``.

Index convention (mixed radix): fermion modes are least significant (radix 2,
mode ``i`` is bit ``i``), then links (radix N, link 0 least significant), then
the ancillas (radix N, most significant).  Viewed as a C-ordered tensor the
axes are therefore ``ancillas..., link L-1, ..., link 0, mode F-1, ..., mode 0``.

Fermions are encoded by a Jordan-Wigner map over the mode order,
``c_i = Z_0 ... Z_{i-1} s^-_i`` with ``Z = 1 - 2n``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from . import algebra
from .errors import (
    DimMismatch,
    DuplicateTarget,
    LayoutMismatch,
    NoAncilla,
    OutOfRange,
    SameMode,
    TooLarge,
)

MAX_DIM = 2**27

SNAPSHOT_MAGIC = b"Z2SV"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIII8x")


class Slot(NamedTuple):
    kind: str  # "ancilla" | "link" | "mode"
    index: int


def ancilla_slot(j: int = 0) -> Slot:
    return Slot("ancilla", j)


def link_slot(l: int) -> Slot:
    return Slot("link", l)


def mode_slot(i: int) -> Slot:
    return Slot("mode", i)


@dataclass(frozen=True)
class RegisterLayout:
    N: int
    num_links: int
    num_modes: int
    ancilla_count: int = 1

    def __post_init__(self):
        algebra.delta(self.N)
        if min(self.num_links, self.num_modes, self.ancilla_count) < 0:
            raise ValueError("register sizes must be non-negative")
        if self.dim > MAX_DIM:
            raise TooLarge(f"register dimension {self.dim} exceeds guard {MAX_DIM}")

    @property
    def dim(self) -> int:
        return self.N ** (self.ancilla_count + self.num_links) * 2**self.num_modes

    @property
    def physical_dim(self) -> int:
        return self.N**self.num_links * 2**self.num_modes

    @property
    def fermion_dim(self) -> int:
        return 2**self.num_modes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.ancilla_count + self.num_links) + (2,) * self.num_modes

    def without_ancilla(self) -> RegisterLayout:
        return RegisterLayout(self.N, self.num_links, self.num_modes, 0)

    def slot_dim(self, slot: Slot) -> int:
        self.axis(slot)
        return 2 if slot.kind == "mode" else self.N

    def axis(self, slot: Slot) -> int:
        kind, i = slot
        A, L, F = self.ancilla_count, self.num_links, self.num_modes
        if kind == "ancilla":
            if not 0 <= i < A:
                raise NoAncilla(f"ancilla {i} not present (ancilla_count={A})")
            return A - 1 - i
        if kind == "link":
            if not 0 <= i < L:
                raise OutOfRange(f"link {i} out of range [0, {L})")
            return A + L - 1 - i
        if kind == "mode":
            if not 0 <= i < F:
                raise OutOfRange(f"mode {i} out of range [0, {F})")
            return A + L + F - 1 - i
        raise ValueError(f"unknown slot kind {kind!r}")

    def encode(self, ancilla=0, link_values: Sequence[int] = (), occupations: Sequence[int] = ()) -> int:
        ancillas = [ancilla] * self.ancilla_count if np.isscalar(ancilla) else list(ancilla)
        if len(ancillas) != self.ancilla_count:
            raise OutOfRange(f"expected {self.ancilla_count} ancilla values, got {len(ancillas)}")
        link_values = list(link_values) or [0] * self.num_links
        occupations = list(occupations) or [0] * self.num_modes
        if len(link_values) != self.num_links or len(occupations) != self.num_modes:
            raise OutOfRange("wrong number of link values or occupations")
        for v in (*ancillas, *link_values):
            if not 0 <= v < self.N:
                raise OutOfRange(f"qudit value {v} outside [0, {self.N})")
        for n in occupations:
            if n not in (0, 1):
                raise OutOfRange(f"occupation {n} is not 0 or 1")
        idx = sum(n << i for i, n in enumerate(occupations))
        stride = self.fermion_dim
        for v in (*link_values, *ancillas):
            idx += v * stride
            stride *= self.N
        return idx


class StateVector:
    """Dense complex amplitudes over a :class:`RegisterLayout`.

    Single-writer: the ``apply_*`` functions mutate ``amplitudes`` in place.
    """

    def __init__(self, layout: RegisterLayout, amplitudes=None):
        self.layout = layout
        if amplitudes is None:
            amplitudes = np.zeros(layout.dim, dtype=complex)
        amplitudes = np.ascontiguousarray(amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != layout.dim:
            raise DimMismatch(f"{amplitudes.size} amplitudes for dimension {layout.dim}")
        self.amplitudes = amplitudes

    def __repr__(self):
        return f"StateVector({self.layout}, norm={self.norm():.6g})"

    def copy(self) -> StateVector:
        return StateVector(self.layout, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Writable view with one axis per register slot."""
        return self.amplitudes.reshape(self.layout.shape)

    def fermion_view(self) -> np.ndarray:
        """Writable view of shape ``(rest, 2**num_modes)``."""
        return self.amplitudes.reshape(-1, self.layout.fermion_dim)

    def vdot(self, other: StateVector) -> complex:
        _check_same_layout(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _check_same_layout(a: StateVector, b: StateVector) -> None:
    if a.layout != b.layout:
        raise DimMismatch(f"layouts differ: {a.layout} vs {b.layout}")


def basis_state(layout: RegisterLayout, ancilla=0, link_values=(), occupations=()) -> StateVector:
    s = StateVector(layout)
    s.amplitudes[layout.encode(ancilla, link_values, occupations)] = 1.0
    return s


def product_state(layout: RegisterLayout, physical: np.ndarray, ancilla_states=None) -> StateVector:
    """``ancilla_states[-1] (x) ... (x) ancilla_states[0] (x) physical``.

    Ancillas default to the uniform state.
    """
    physical = np.asarray(physical, dtype=complex).reshape(-1)
    if physical.size != layout.physical_dim:
        raise DimMismatch(f"physical part has {physical.size} entries, expected {layout.physical_dim}")
    if ancilla_states is None:
        ancilla_states = [algebra.ancilla_in_state(layout.N)] * layout.ancilla_count
    amp = physical
    for a in ancilla_states:
        amp = np.kron(a, amp)
    return StateVector(layout, amp)


def random_state(layout: RegisterLayout, rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return StateVector(layout, v / np.linalg.norm(v))


def apply_qudit_gate(s: StateVector, targets: Sequence[Slot], gate: np.ndarray) -> None:
    """Apply ``gate`` to ``targets`` (first target = most significant gate factor)."""
    layout = s.layout
    targets = [Slot(*t) for t in targets]
    if len(set(targets)) != len(targets):
        raise DuplicateTarget(f"targets repeat: {targets}")
    axes = [layout.axis(t) for t in targets]
    gdim = int(np.prod([layout.slot_dim(t) for t in targets]))
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (gdim, gdim):
        raise DimMismatch(f"gate of shape {gate.shape} on targets of total dimension {gdim}")
    t = s.tensor()
    k = len(axes)
    moved = np.moveaxis(t, axes, range(k))
    res = (gate @ moved.reshape(gdim, -1)).reshape(moved.shape)
    t[...] = np.moveaxis(res, range(k), axes)


_CONFIG_CACHE: dict[int, np.ndarray] = {}


def _configs(num_modes: int) -> np.ndarray:
    if num_modes not in _CONFIG_CACHE:
        _CONFIG_CACHE[num_modes] = np.arange(2**num_modes, dtype=np.int64)
    return _CONFIG_CACHE[num_modes]


def occupation(num_modes: int, i: int) -> np.ndarray:
    """Occupation of mode ``i`` for every fermion configuration."""
    return (_configs(num_modes) >> i) & 1


def _between_mask(i: int, j: int) -> int:
    lo, hi = min(i, j), max(i, j)
    return ((1 << hi) - 1) & ~((1 << (lo + 1)) - 1)


def jw_sign(num_modes: int, i: int, j: int) -> np.ndarray:
    """Jordan-Wigner string sign ``(-1)^(# occupied modes strictly between i and j)``."""
    parity = np.bitwise_count(_configs(num_modes) & _between_mask(i, j)) & 1
    return 1 - 2 * parity.astype(np.int64)


def fermion_hop(view: np.ndarray, i: int, j: int, num_modes: int) -> np.ndarray:
    """Return ``c_i^dagger c_j`` applied along the last (fermion) axis of ``view``."""
    if i == j:
        raise SameMode("hopping needs two distinct modes")
    f = _configs(num_modes)
    src = f[(((f >> j) & 1) == 1) & (((f >> i) & 1) == 0)]
    dst = src ^ ((1 << i) | (1 << j))
    out = np.zeros_like(view)
    out[..., dst] = view[..., src] * jw_sign(num_modes, i, j)[src]
    return out


def apply_fermionic_exponential(s: StateVector, i: int, j: int, theta: float) -> None:
    """``exp(-i theta (c_i^dagger c_j + c_j^dagger c_i))``, exact 2x2 rotation per block."""
    if i == j:
        raise SameMode("hopping needs two distinct modes")
    F = s.layout.num_modes
    for m in (i, j):
        s.layout.axis(mode_slot(m))
    f = _configs(F)
    a = f[(((f >> i) & 1) == 1) & (((f >> j) & 1) == 0)]
    b = a ^ ((1 << i) | (1 << j))
    sgn = jw_sign(F, i, j)[a]
    v = s.fermion_view()
    va, vb = v[:, a].copy(), v[:, b].copy()
    c, sn = np.cos(theta), np.sin(theta)
    v[:, a] = c * va - 1j * sn * sgn * vb
    v[:, b] = c * vb - 1j * sn * sgn * va


def apply_number_phase(s: StateVector, i: int, phi: float) -> None:
    """Multiply amplitudes with mode ``i`` occupied by ``exp(-i phi)``."""
    s.layout.axis(mode_slot(i))
    occ = occupation(s.layout.num_modes, i).astype(bool)
    v = s.fermion_view()
    v[:, occ] *= np.exp(-1j * phi)


def apply_controlled_fermion_log(s: StateVector, i: int, ancilla_op: np.ndarray, ancilla: int = 0) -> None:
    """Apply ``exp(n_i (x) A)`` for an anti-Hermitian ancilla operator ``A``.

    Identity when mode ``i`` is empty, ``expm(A)`` on the ancilla when it is
    occupied.  ``A = -log(Qt^dagger)`` gives the matter-side entangler's
    adjoint and ``A = log(Qt^dagger)`` the entangler itself.
    """
    if s.layout.ancilla_count == 0:
        raise NoAncilla("controlled fermion log needs an ancilla")
    N = s.layout.N
    ancilla_op = np.asarray(ancilla_op, dtype=complex)
    if ancilla_op.shape != (N, N):
        raise DimMismatch(f"ancilla operator must be {N}x{N}")
    gate = scipy.linalg.block_diag(np.eye(N), scipy.linalg.expm(ancilla_op))
    apply_qudit_gate(s, [mode_slot(i), ancilla_slot(ancilla)], gate)


def fidelity_up_to_phase(a: StateVector, b: StateVector) -> float:
    _check_same_layout(a, b)
    na, nb = a.norm(), b.norm()
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) / (na * nb))


def reduced_ancilla_density(s: StateVector, ancilla: int = 0) -> np.ndarray:
    ax = s.layout.axis(ancilla_slot(ancilla))
    m = np.moveaxis(s.tensor(), ax, 0).reshape(s.layout.N, -1)
    return m @ m.conj().T


def ancilla_return_check(s: StateVector, ancilla: int = 0) -> float:
    """``1 - <in|rho_anc|in>`` for the normalised state; 0 iff the ancilla is back in ``|in>``."""
    rho = reduced_ancilla_density(s, ancilla) / s.norm() ** 2
    v = algebra.ancilla_in_state(s.layout.N)
    return float(max(0.0, 1.0 - np.real(v.conj() @ rho @ v)))


def physical_part(s: StateVector, ancilla_states=None) -> np.ndarray:
    """Project the ancillas onto ``ancilla_states`` (default uniform) and return the physical amplitudes."""
    N = s.layout.N
    if ancilla_states is None:
        ancilla_states = [algebra.ancilla_in_state(N)] * s.layout.ancilla_count
    amp = s.amplitudes
    for a in reversed(ancilla_states):
        amp = np.asarray(a).conj() @ amp.reshape(N, -1)
    return amp


def check_layout(s: StateVector, layout: RegisterLayout) -> None:
    if s.layout.without_ancilla() != layout.without_ancilla():
        raise LayoutMismatch(f"state layout {s.layout} does not match {layout}")


def save_snapshot(s: StateVector, path) -> None:
    """Binary dump: 32-byte header then little-endian complex128 amplitudes."""
    L = s.layout
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, L.N, L.num_links, L.num_modes, L.ancilla_count)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(s.amplitudes.astype("<c16").tobytes())


def load_snapshot(path) -> StateVector:
    data = Path(path).read_bytes()
    magic, version, N, links, modes, anc = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    layout = RegisterLayout(N, links, modes, anc)
    amp = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    return StateVector(layout, amp.astype(complex))
