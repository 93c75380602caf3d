"""Dense N-partite pure states, named state families, partial traces and entropies.

A state is a flat complex amplitude vector over an ordered list of tensor
factors. Factor 0 is the most significant digit of the mixed-radix index.
Every factor belongs to exactly one party; a party may own several factors.

Entropies are in ebits (log base 2).
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionLimitError, IsometryError, NumericError, StateError

MAX_TOTAL_DIM = 2**22
MAX_MATRIX_DIM = 2**12
MAX_TABLE_UNITS = 16

NORM_TOL = 1e-6
HERMITIAN_TOL = 1e-9
EIG_ZERO = 1e-12
EIG_NEGATIVE = -1e-9


def default_party_names(n: int) -> tuple[str, ...]:
    if n <= 26:
        return tuple(chr(ord("A") + i) for i in range(n))
    return tuple(f"P{i}" for i in range(n))


@dataclass(frozen=True, eq=False)
class StateTensor:
    """Normalized pure state with factor ownership.

    Attributes:
        factor_dims: dimension of each tensor factor, factor 0 most significant.
        owner: party index owning each factor.
        amplitudes: read-only complex vector of length prod(factor_dims).
        party_names: display name of each party.
    """

    factor_dims: tuple[int, ...]
    owner: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)
    party_names: tuple[str, ...]

    @property
    def num_parties(self) -> int:
        return len(self.party_names)

    @property
    def num_factors(self) -> int:
        return len(self.factor_dims)

    @property
    def total_dim(self) -> int:
        return int(self.amplitudes.shape[0])

    def party_factors(self, party: int) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.owner) if p == party)

    def party_dim(self, party: int) -> int:
        return math.prod(self.factor_dims[i] for i in self.party_factors(party))

    def party_index(self, name: str) -> int:
        try:
            return self.party_names.index(name)
        except ValueError:
            raise StateError(f"unknown party {name!r}") from None

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per factor."""
        return self.amplitudes.reshape(self.factor_dims)


def make_state(
    factor_dims: Sequence[int],
    owner: Sequence[int] | Mapping[int, int],
    amplitudes: Iterable[complex],
    *,
    party_names: Sequence[str] | None = None,
    renormalize: bool = False,
    max_total_dim: int = MAX_TOTAL_DIM,
) -> StateTensor:
    """Validate inputs and build a :class:`StateTensor`.

    ``owner`` maps factor index to party index, either as a sequence or a mapping.
    Norm deviations above ``NORM_TOL`` are rejected unless ``renormalize`` is set.
    """
    dims = tuple(int(d) for d in factor_dims)
    if not dims:
        raise StateError("state needs at least one factor")
    if any(d < 2 for d in dims):
        raise StateError(f"factor dimensions must be >= 2, got {dims}")
    total = math.prod(dims)
    if total > max_total_dim:
        raise DimensionLimitError(f"total dimension {total} exceeds cap {max_total_dim}")

    if isinstance(owner, Mapping):
        if set(owner) != set(range(len(dims))):
            raise StateError("owner map must cover every factor exactly once")
        own = tuple(int(owner[i]) for i in range(len(dims)))
    else:
        own = tuple(int(p) for p in owner)
    if len(own) != len(dims):
        raise StateError(f"owner has {len(own)} entries for {len(dims)} factors")
    if any(p < 0 for p in own):
        raise StateError("party indices must be nonnegative")

    n_parties = len(party_names) if party_names is not None else max(own) + 1
    names = tuple(party_names) if party_names is not None else default_party_names(n_parties)
    if len(set(names)) != len(names):
        raise StateError(f"duplicate party names {names}")
    if any(p >= n_parties for p in own):
        raise StateError("owner references a party beyond the party list")
    for p in range(n_parties):
        if p not in own:
            raise StateError(f"party {names[p]} owns no factor")

    amps = np.array(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                    dtype=np.complex128).reshape(-1)
    if amps.shape[0] != total:
        raise StateError(f"expected {total} amplitudes, got {amps.shape[0]}")
    if not np.all(np.isfinite(amps)):
        raise StateError("amplitudes must be finite")
    norm = float(np.linalg.norm(amps))
    if norm == 0.0:
        raise StateError("zero norm")
    if renormalize:
        amps = amps / norm
    elif abs(norm - 1.0) > NORM_TOL:
        raise StateError(f"norm {norm:.12g} deviates from 1 by more than {NORM_TOL}")
    amps.setflags(write=False)
    return StateTensor(dims, own, amps, names)


# ---------------------------------------------------------------------------
# Named families
# ---------------------------------------------------------------------------


def ghz(n: int, k: int = 2, *, max_total_dim: int = MAX_TOTAL_DIM) -> StateTensor:
    """``n``-party cat state with ``k``-level subsystems."""
    if n < 2 or k < 2:
        raise StateError(f"ghz needs N >= 2 and k >= 2, got N={n}, k={k}")
    return schmidt_state(n, [math.sqrt(1.0 / k)] * k, max_total_dim=max_total_dim)


def schmidt_state(n: int, coeffs: Sequence[float], *,
                  max_total_dim: int = MAX_TOTAL_DIM) -> StateTensor:
    """``sum_i a_i |i>^{(x) n}`` with real nonnegative coefficients."""
    a = np.asarray(coeffs, dtype=float)
    if n < 2:
        raise StateError(f"schmidt state needs N >= 2, got {n}")
    if a.ndim != 1 or a.size < 2:
        raise StateError("need at least two Schmidt coefficients (local dimension >= 2)")
    if np.any(a < 0):
        raise StateError("Schmidt coefficients must be nonnegative")
    if not np.any(a > 0):
        raise StateError("need at least one nonzero Schmidt coefficient")
    if abs(float(np.sum(a**2)) - 1.0) > 1e-9:
        raise StateError(f"Schmidt coefficients not normalized: sum a^2 = {np.sum(a**2):.12g}")
    k = a.size
    if n * math.log2(k) > math.log2(max_total_dim) + 1e-9:
        raise DimensionLimitError(f"{n} parties of dimension {k} exceed the cap {max_total_dim}")
    dims = (k,) * n
    amps = np.zeros(k**n, dtype=np.complex128)
    stride = sum(k**j for j in range(n))  # index of |i i ... i> is i * stride
    amps[np.arange(k) * stride] = a
    return make_state(dims, range(n), amps, max_total_dim=max_total_dim)


def epr(party_a: int = 0, party_b: int = 1, n_parties: int = 2) -> StateTensor:
    return pair_graph_state(n_parties, [(party_a, party_b)])


def pair_graph_state(
    n: int,
    pairs: Sequence[tuple[int, int]],
    *,
    party_names: Sequence[str] | None = None,
    max_total_dim: int = MAX_TOTAL_DIM,
) -> StateTensor:
    """Tensor product of one EPR pair per entry of ``pairs``.

    Each party's factors are contiguous; within a party they follow the order
    of ``pairs``.
    """
    if not pairs:
        raise StateError("need at least one pair")
    ends: list[int] = []
    for i, j in pairs:
        if i == j:
            raise StateError(f"self-pair ({i},{j})")
        if not (0 <= i < n and 0 <= j < n):
            raise StateError(f"pair ({i},{j}) references a party outside 0..{n - 1}")
        ends.extend((i, j))
    if len(ends) > math.log2(max_total_dim) + 1e-9:
        raise DimensionLimitError(f"{len(pairs)} pairs exceed the cap {max_total_dim}")
    bell = np.array([1.0, 0.0, 0.0, 1.0], dtype=np.complex128) * math.sqrt(0.5)
    psi = np.ones(1, dtype=np.complex128)
    for _ in pairs:
        psi = np.kron(psi, bell)
    # group pair ends by party (stable)
    order = sorted(range(len(ends)), key=lambda f: ends[f])
    psi = np.transpose(psi.reshape((2,) * len(ends)), order).reshape(-1)
    owner = [ends[f] for f in order]
    return make_state((2,) * len(ends), owner, psi, party_names=party_names,
                      max_total_dim=max_total_dim)


def toast(n: int, *, max_total_dim: int = MAX_TOTAL_DIM) -> StateTensor:
    """One EPR pair between every pair of ``n`` parties."""
    if n < 2:
        raise StateError(f"toast needs N >= 2, got {n}")
    if n * (n - 1) > math.log2(max_total_dim) + 1e-9:
        raise DimensionLimitError(f"toast({n}) needs 2^{n * (n - 1)} amplitudes, cap is {max_total_dim}")
    return pair_graph_state(n, list(itertools.combinations(range(n), 2)),
                            max_total_dim=max_total_dim)


# (a, b, c) labels of the eight 3-Toast terms with each party's two qubits
# merged into one 4-level digit (first qubit most significant).
_TOAST3_SUPPORT = tuple(
    (2 * x + y, 2 * x + z, 2 * y + z) for x in (0, 1) for y in (0, 1) for z in (0, 1)
)


def epsilon_toast(eps: float) -> StateTensor:
    """``sqrt(1-eps)|3-Toast> + sqrt(eps)|4,4,4>`` on three 5-level parties."""
    # eps = 1 is accepted as the degenerate product state |4,4,4>
    if not 0.0 <= eps <= 1.0:
        raise StateError(f"eps must lie in [0, 1], got {eps}")
    amps = np.zeros(125, dtype=np.complex128)
    w = math.sqrt((1.0 - eps) / 8.0)
    for a, b, c in _TOAST3_SUPPORT:
        amps[25 * a + 5 * b + c] = w
    amps[124] += math.sqrt(eps)
    return make_state((5, 5, 5), (0, 1, 2), amps)


def random_state(
    factor_dims: Sequence[int],
    owner: Sequence[int] | Mapping[int, int],
    seed: int,
    *,
    party_names: Sequence[str] | None = None,
) -> StateTensor:
    """Gaussian random amplitudes, normalized (Haar-distributed on the sphere)."""
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    total = math.prod(int(d) for d in factor_dims)
    v = rng.standard_normal(total) + 1j * rng.standard_normal(total)
    return make_state(factor_dims, owner, v, party_names=party_names, renormalize=True)


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def permute_factors(state: StateTensor, order: Sequence[int]) -> StateTensor:
    """Reorder factors: new factor ``i`` is old factor ``order[i]``."""
    order = list(order)
    if sorted(order) != list(range(state.num_factors)):
        raise StateError(f"{order} is not a permutation of the factors")
    psi = np.transpose(state.tensor(), order).reshape(-1)
    return make_state([state.factor_dims[i] for i in order], [state.owner[i] for i in order],
                      psi, party_names=state.party_names)


def group_by_party(state: StateTensor) -> StateTensor:
    """Stable reorder so each party's factors are contiguous, parties ascending."""
    order = sorted(range(state.num_factors), key=lambda f: state.owner[f])
    return state if order == list(range(state.num_factors)) else permute_factors(state, order)


def tensor_product(left: StateTensor, right: StateTensor, *,
                   max_total_dim: int = MAX_TOTAL_DIM) -> StateTensor:
    """Kronecker product; parties with equal names are merged."""
    names = list(left.party_names)
    for nm in right.party_names:
        if nm not in names:
            names.append(nm)
    remap = [names.index(nm) for nm in right.party_names]
    total = left.total_dim * right.total_dim
    if total > max_total_dim:
        raise DimensionLimitError(f"total dimension {total} exceeds cap {max_total_dim}")
    return make_state(left.factor_dims + right.factor_dims,
                      left.owner + tuple(remap[p] for p in right.owner),
                      np.kron(left.amplitudes, right.amplitudes),
                      party_names=names, max_total_dim=max_total_dim)


# ---------------------------------------------------------------------------
# Density matrices and entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = self.entries
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NumericError(f"density matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise NumericError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > HERMITIAN_TOL:
            raise NumericError(f"density matrix trace {np.trace(m).real:.12g} != 1")

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])


def _split_matrix(state: StateTensor, keep: Sequence[int]) -> np.ndarray:
    keep = sorted(set(keep))
    if any(not 0 <= f < state.num_factors for f in keep):
        raise StateError(f"factor subset {keep} out of range")
    rest = [f for f in range(state.num_factors) if f not in keep]
    dk = math.prod(state.factor_dims[f] for f in keep)
    psi = np.transpose(state.tensor(), keep + rest)
    return psi.reshape(dk, -1)


def reduced_density(state: StateTensor, factors: Iterable[int], *,
                    max_dim: int = MAX_MATRIX_DIM) -> DensityMatrix:
    """Partial trace keeping ``factors`` (kept factors in ascending index order)."""
    keep = sorted(set(factors))
    if not keep:
        raise StateError("factor subset must be nonempty")
    dk = math.prod(state.factor_dims[f] for f in keep)
    if dk > max_dim:
        raise DimensionLimitError(f"reduced density matrix of dimension {dk} exceeds cap {max_dim}")
    m = _split_matrix(state, keep)
    return DensityMatrix(m @ m.conj().T)


def entropy_from_eigenvalues(eigs: np.ndarray) -> float:
    if eigs.size and float(np.min(eigs)) < EIG_NEGATIVE:
        raise NumericError(f"negative eigenvalue {np.min(eigs):.3e} in density matrix")
    lam = eigs[eigs > EIG_ZERO]
    s = float(-np.sum(lam * np.log2(lam)))
    return max(s, 0.0)


def _eigvalsh(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc


def von_neumann_entropy(dm: DensityMatrix) -> float:
    """``-sum lambda log2 lambda`` over the spectrum, in ebits."""
    return entropy_from_eigenvalues(_eigvalsh(dm.entries))


def subset_entropy(state: StateTensor, factors: Iterable[int], *,
                   max_dim: int = MAX_MATRIX_DIM) -> float:
    """Entropy of the reduced state on ``factors``.

    Diagonalizes whichever side of the cut is smaller; both share the nonzero
    spectrum because the global state is pure.
    """
    keep = sorted(set(factors))
    if not keep or len(keep) == state.num_factors:
        return 0.0
    m = _split_matrix(state, keep)
    if m.shape[0] > m.shape[1]:
        m = m.T
    if m.shape[0] > max_dim:
        raise DimensionLimitError(f"cut needs a {m.shape[0]}-dimensional matrix, cap is {max_dim}")
    return entropy_from_eigenvalues(_eigvalsh(m @ m.conj().T))


@dataclass(frozen=True, eq=False)
class CutEntropyTable:
    """Entropy of every subset of a list of units (groups of factors).

    Subsets are bitmasks over ``units``; bit ``i`` selects ``units[i]``.
    """

    units: tuple[tuple[int, ...], ...]
    unit_names: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.units)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.units)) - 1

    def mask_of(self, units: Iterable[int]) -> int:
        m = 0
        for u in units:
            m |= 1 << u
        return m

    def __getitem__(self, key: int | Iterable[int]) -> float:
        mask = key if isinstance(key, (int, np.integer)) else self.mask_of(key)
        return float(self.values[mask])

    def factors_of(self, mask: int) -> tuple[int, ...]:
        return tuple(sorted(f for i, u in enumerate(self.units) if mask >> i & 1 for f in u))

    def names_of(self, mask: int) -> tuple[str, ...]:
        return tuple(self.unit_names[i] for i in range(self.size) if mask >> i & 1)

    def items(self):
        for mask in range(1, self.full_mask):
            yield self.names_of(mask), float(self.values[mask])


def party_units(state: StateTensor) -> tuple[tuple[tuple[int, ...], ...], tuple[str, ...]]:
    units = tuple(state.party_factors(p) for p in range(state.num_parties))
    return units, state.party_names


def factor_units(state: StateTensor) -> tuple[tuple[tuple[int, ...], ...], tuple[str, ...]]:
    counts = [0] * state.num_parties
    names = []
    for p in state.owner:
        counts[p] += 1
        names.append(f"{state.party_names[p]}{counts[p]}")
    return tuple((f,) for f in range(state.num_factors)), tuple(names)


def cut_entropy_table(
    state: StateTensor,
    granularity: str | Sequence[Sequence[int]] = "party",
    *,
    unit_names: Sequence[str] | None = None,
    max_units: int = MAX_TABLE_UNITS,
    max_dim: int = MAX_MATRIX_DIM,
    workers: int = 1,
) -> CutEntropyTable:
    """Entropy for every subset of units.

    ``granularity`` is ``"party"``, ``"factor"`` (alias ``"cell"``) or an
    explicit list of factor groups. Each complementary pair is computed once.
    """
    if granularity == "party":
        units, names = party_units(state)
    elif granularity in ("factor", "cell"):
        units, names = factor_units(state)
    elif isinstance(granularity, str):
        raise ValueError(f"unknown granularity {granularity!r}")
    else:
        units = tuple(tuple(int(f) for f in u) for u in granularity)
        names = tuple(unit_names) if unit_names is not None else tuple(f"u{i}" for i in range(len(units)))
        flat = sorted(f for u in units for f in u)
        if flat != list(range(state.num_factors)):
            raise StateError("units must partition the factors")
    n = len(units)
    if n > max_units:
        raise DimensionLimitError(f"{n} units exceeds the table limit of {max_units}")

    full = (1 << n) - 1
    # masks without the top unit; the complement of each carries it
    masks = list(range(1, 1 << (n - 1))) if n > 1 else []

    def one(mask: int) -> float:
        fs = [f for i, u in enumerate(units) if mask >> i & 1 for f in u]
        return subset_entropy(state, fs, max_dim=max_dim)

    if workers > 1 and len(masks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, masks))
    else:
        results = [one(m) for m in masks]
    values = np.zeros(1 << n)
    for m, s in zip(masks, results):
        values[m] = s
        values[full ^ m] = s
    values.setflags(write=False)
    return CutEntropyTable(units, tuple(names), values)


# ---------------------------------------------------------------------------
# Local isometries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IsometrySpec:
    """Local isometry ``V`` (D x d) on one party: ``|k> -> sum_r V[r, k] |r>``.

    The output index ``r`` is mixed radix over ``output_factor_dims``.
    """

    party: int
    input_dim: int
    output_factor_dims: tuple[int, ...]
    columns: np.ndarray = field(repr=False)

    def __post_init__(self):
        d, out = int(self.input_dim), tuple(int(x) for x in self.output_factor_dims)
        object.__setattr__(self, "output_factor_dims", out)
        if not out or any(x < 2 for x in out):
            raise IsometryError(f"output factor dims must be >= 2, got {out}")
        big_d = math.prod(out)
        if big_d < d:
            raise IsometryError(f"output dimension {big_d} smaller than input dimension {d}")
        v = np.asarray(self.columns, dtype=np.complex128)
        if v.shape != (big_d, d):
            raise IsometryError(f"isometry matrix shape {v.shape} != ({big_d}, {d})")
        if np.max(np.abs(v.conj().T @ v - np.eye(d))) > HERMITIAN_TOL:
            raise IsometryError("columns are not orthonormal")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "columns", v)

    @property
    def output_dim(self) -> int:
        return math.prod(self.output_factor_dims)


def identity_isometry(state: StateTensor, party: int) -> IsometrySpec:
    dims = tuple(state.factor_dims[f] for f in state.party_factors(party))
    d = math.prod(dims)
    return IsometrySpec(party, d, dims, np.eye(d))


def ancilla_embedding_5to8(party: int) -> IsometrySpec:
    """Map a 5-level system into three qubits (R1 R2 R3, R1 most significant).

    0 -> 000, 1 -> 010, 2 -> 100, 3 -> 110, 4 -> 001.
    """
    v = np.zeros((8, 5))
    for k, r in enumerate((0b000, 0b010, 0b100, 0b110, 0b001)):
        v[r, k] = 1.0
    return IsometrySpec(party, 5, (2, 2, 2), v)


def random_isometry(party: int, input_dim: int, output_factor_dims: Sequence[int],
                    seed: int) -> IsometrySpec:
    rng = np.random.default_rng(seed)
    big_d = math.prod(output_factor_dims)
    z = rng.standard_normal((big_d, input_dim)) + 1j * rng.standard_normal((big_d, input_dim))
    q, _ = np.linalg.qr(z)
    return IsometrySpec(party, input_dim, tuple(output_factor_dims), q)


def apply_isometry(state: StateTensor, spec: IsometrySpec, *,
                   max_total_dim: int = MAX_TOTAL_DIM) -> StateTensor:
    """Replace ``spec.party``'s factors by ``spec.output_factor_dims``.

    The new factors take the place of the party's first factor; other factors
    keep their relative order.
    """
    if not 0 <= spec.party < state.num_parties:
        raise IsometryError(f"party {spec.party} out of range")
    mine = list(state.party_factors(spec.party))
    d = math.prod(state.factor_dims[f] for f in mine)
    if d != spec.input_dim:
        raise IsometryError(
            f"party {state.party_names[spec.party]} has dimension {d}, isometry expects {spec.input_dim}")
    others = [f for f in range(state.num_factors) if f not in mine]
    total = spec.output_dim * (state.total_dim // d)
    if total > max_total_dim:
        raise DimensionLimitError(f"total dimension {total} exceeds cap {max_total_dim}")

    m = np.transpose(state.tensor(), mine + others).reshape(d, -1)
    out = spec.columns @ m
    k = len(spec.output_factor_dims)
    rest_dims = [state.factor_dims[f] for f in others]
    t = out.reshape(list(spec.output_factor_dims) + rest_dims)

    # current axis order: new factors then others; target: others with new
    # factors spliced in where the party's first factor was
    pos = sum(1 for f in others if f < mine[0])
    axes = list(range(k, k + pos)) + list(range(k)) + list(range(k + pos, k + len(others)))
    t = np.transpose(t, axes)
    dims = rest_dims[:pos] + list(spec.output_factor_dims) + rest_dims[pos:]
    own = ([state.owner[f] for f in others[:pos]] + [spec.party] * k
           + [state.owner[f] for f in others[pos:]])
    return make_state(dims, own, t.reshape(-1), party_names=state.party_names,
                      max_total_dim=max_total_dim)
