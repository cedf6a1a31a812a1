"""Problem Hamiltonians (diagonal in the computational basis).

Five families are supported:

``SK``      Sherrington-Kirkpatrick spin glass with Gaussian couplings and fields
``REM``     random energy model, i.i.d. Gaussian energy per basis state
``SSK``     SK energy table under a random permutation of basis states
``REMGC``   REM energies sorted and laid along the binary-reflected Gray code
``SEARCH``  ``-|m><m|`` for a single marked state ``m``

Random numbers
--------------
Every instance is a pure function of ``(model, n, seed, omega, mu)`` (plus
``permutation_seed`` for SSK).  The stream is numpy's ``PCG64(seed)``; raw
64-bit words ``r`` are turned into uniforms ``u = ((r >> 11) + 0.5) / 2**53``
and normal deviates ``mu + omega * ndtri(u)``.  Draw order:

* SK: ``A[j, k]`` for all ordered pairs ``j != k`` in row-major order, then
  ``h[0..n-1]``.  The stored couplings are ``J = (A + A.T) / 2``, so the
  Hamiltonian ``-1/2 sum_{j!=k} J_jk Z_j Z_k - sum_j h_j Z_j`` sees every
  ordered coupling as an independent ``N(mu, omega^2)`` draw.
* REM: ``F[0..N-1]`` in basis order.
* SEARCH: the marked state is the top ``n`` bits of the first raw word.
* SSK: Fisher-Yates with ``j = floor(u * (i + 1))`` for ``i = N-1 .. 1`` on the
  stream of ``PCG64(permutation_seed)``; ``permutation_seed == 0`` means the
  identity permutation.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import erfinv, ndtri

from . import kernels
from .core import check_full_space, gray_code
from .errors import SpecError

FORMAT_VERSION = 1
PRNG_NAME = "pcg64-ndtri-v1"
SK_TAIL_FACTOR = 0.887
DEFAULT_OMEGA = {"SK": 5.0, "SSK": 5.0, "REM": 1.0, "REMGC": 1.0, "SEARCH": 1.0}
MAX_TABLE_QUBITS = 24

_MASK64 = (1 << 64) - 1


class Model(str, enum.Enum):
    SK = "SK"
    REM = "REM"
    SSK = "SSK"
    REMGC = "REMGC"
    SEARCH = "SEARCH"

    @classmethod
    def parse(cls, value) -> "Model":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise SpecError(f"unknown model {value!r}") from None


# ---------------------------------------------------------------------------
# seeds and deviates
# ---------------------------------------------------------------------------


def splitmix64(z: int) -> int:
    z = (int(z) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def instance_seed(master: int, n: int, index: int) -> int:
    """Seed of instance ``index`` at size ``n`` in an ensemble with ``master`` seed."""
    return splitmix64(splitmix64(splitmix64(master) ^ n) ^ index)


def derived_permutation_seed(seed: int) -> int:
    s = splitmix64(seed ^ 0x53534B)
    return s or 1


def _raw(seed: int, count: int) -> np.ndarray:
    return np.random.PCG64(seed).random_raw(count).astype(np.uint64)


def _uniforms(raw: np.ndarray) -> np.ndarray:
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def normal_draws(seed: int, count: int, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    return mu + sigma * ndtri(_uniforms(_raw(seed, count)))


def random_permutation(seed: int, dim: int) -> np.ndarray:
    perm = np.arange(dim)
    if seed == 0:
        return perm
    u = _uniforms(_raw(seed, max(dim - 1, 0)))
    targets = np.floor(u * np.arange(dim, 1, -1)).astype(np.int64)
    for i, j in zip(range(dim - 1, 0, -1), targets):
        perm[i], perm[j] = perm[j], perm[i]
    return perm


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    model: Model
    n: int
    seed: int | None
    omega: float
    mu: float = 0.0
    couplings: np.ndarray | None = None
    fields: np.ndarray | None = None
    marked: int | None = None
    permutation_seed: int | None = None
    table: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @cached_property
    def energies(self) -> np.ndarray:
        out = full_energy_table(self)
        out.setflags(write=False)
        return out

    @cached_property
    def ground_index(self) -> int:
        return int(np.argmin(self.energies))

    @cached_property
    def permutation(self) -> np.ndarray:
        if self.model is not Model.SSK:
            raise SpecError("only SSK instances carry a permutation")
        return random_permutation(self.permutation_seed, self.dim)

    def spread(self) -> float:
        e = self.energies
        return float(e.max() - e.min())

    def with_table(self, table) -> "ProblemInstance":
        """Copy with an explicit energy table (no seed provenance)."""
        table = np.asarray(table, dtype=float)
        if table.shape != (self.dim,):
            raise SpecError("energy table has the wrong length")
        return replace(self, seed=None, couplings=None, fields=None, table=table)


def generate(model, n: int, seed: int, omega: float | None = None, mu: float = 0.0,
             marked: int | None = None, permutation_seed: int | None = None) -> ProblemInstance:
    """Build one instance; deterministic in all arguments."""
    model = Model.parse(model)
    if n < 1 or (model in (Model.SK, Model.SSK) and n < 2):
        raise SpecError(f"n={n} is not supported for {model.value}")
    if omega is None:
        omega = DEFAULT_OMEGA[model.value]
    if not omega > 0:
        raise SpecError("omega must be positive")
    seed = int(seed) & _MASK64
    if model in (Model.SK, Model.SSK):
        raw = normal_draws(seed, n * (n - 1) + n, mu, omega)
        a = np.zeros((n, n))
        a[~np.eye(n, dtype=bool)] = raw[: n * (n - 1)]
        inst = ProblemInstance(Model.SK, n, seed, float(omega), float(mu),
                               couplings=0.5 * (a + a.T), fields=raw[n * (n - 1):].copy())
        if model is Model.SSK:
            pseed = derived_permutation_seed(seed) if permutation_seed is None else permutation_seed
            inst = scramble(inst, pseed)
        return inst
    if model in (Model.REM, Model.REMGC):
        check_full_space(n, MAX_TABLE_QUBITS)
        inst = ProblemInstance(Model.REM, n, seed, float(omega), float(mu))
        return gray_order(inst) if model is Model.REMGC else inst
    if marked is None:
        marked = int(_raw(seed, 1)[0]) >> (64 - n)
    if not 0 <= marked < (1 << n):
        raise SpecError("marked state out of range")
    return ProblemInstance(Model.SEARCH, n, seed, float(omega), 0.0, marked=int(marked))


def sk_from_couplings(couplings, fields, omega: float = 1.0) -> ProblemInstance:
    """SK instance with explicitly given (symmetrised, zero-diagonal) couplings."""
    j = np.asarray(couplings, dtype=float)
    h = np.asarray(fields, dtype=float)
    n = h.shape[0]
    if j.shape != (n, n):
        raise SpecError("couplings must be n x n")
    j = 0.5 * (j + j.T)
    np.fill_diagonal(j, 0.0)
    return ProblemInstance(Model.SK, n, None, float(omega), couplings=j, fields=h)


def table_instance(model, table, omega: float = 1.0) -> ProblemInstance:
    """Instance defined only through its energy table (REM-like)."""
    table = np.asarray(table, dtype=float)
    n = int(round(math.log2(table.shape[0])))
    if table.ndim != 1 or table.shape[0] != 1 << n:
        raise SpecError("energy table length must be a power of two")
    return ProblemInstance(Model.parse(model), n, None, float(omega), table=table)


def _spins_of(x: int, n: int) -> np.ndarray:
    return 1.0 - 2.0 * ((int(x) >> np.arange(n)) & 1)


def energy_of(inst: ProblemInstance, x: int) -> float:
    """Diagonal entry ``<x|H_P|x>`` evaluated directly (no table)."""
    if not 0 <= x < inst.dim:
        raise SpecError(f"basis index {x} outside [0, {inst.dim})")
    if inst.table is not None:
        return float(inst.table[x])
    if inst.model is Model.SK:
        s = _spins_of(x, inst.n)
        return float(-0.5 * s @ inst.couplings @ s - inst.fields @ s)
    if inst.model is Model.SSK:
        base = replace(inst, model=Model.SK, permutation_seed=None)
        return energy_of(base, int(inst.permutation[x]))
    if inst.model is Model.SEARCH:
        return -1.0 if x == inst.marked else 0.0
    return float(full_energy_table(inst)[x])


def direct_energy_table(inst: ProblemInstance) -> np.ndarray:
    """Reference table built from :func:`energy_of`, one state at a time."""
    return np.array([energy_of(inst, x) for x in range(inst.dim)])


def full_energy_table(inst: ProblemInstance) -> np.ndarray:
    n = inst.n
    check_full_space(n, MAX_TABLE_QUBITS)
    if inst.table is not None:
        return np.array(inst.table, dtype=float)
    if inst.model is Model.SK:
        return kernels.sk_energy_table(inst.couplings, inst.fields, n, np.empty(1 << n))
    if inst.model is Model.SSK:
        base = kernels.sk_energy_table(inst.couplings, inst.fields, n, np.empty(1 << n))
        return base[inst.permutation]
    if inst.model is Model.REM:
        return normal_draws(inst.seed, 1 << n, inst.mu, inst.omega)
    if inst.model is Model.REMGC:
        base = normal_draws(inst.seed, 1 << n, inst.mu, inst.omega)
        return _gray_layout(base)
    table = np.zeros(1 << n)
    table[inst.marked] = -1.0
    return table


def _gray_layout(energies: np.ndarray) -> np.ndarray:
    out = np.empty_like(energies)
    out[gray_code(np.arange(energies.shape[0]))] = np.sort(energies)
    return out


def scramble(inst: ProblemInstance, permutation_seed: int) -> ProblemInstance:
    """SSK: the SK table read through a random permutation of basis states."""
    if inst.model is not Model.SK:
        raise SpecError("scramble expects an SK instance")
    return replace(inst, model=Model.SSK, permutation_seed=int(permutation_seed))


def gray_order(inst: ProblemInstance) -> ProblemInstance:
    """REMGC: ``E[gray_code(j)] = sorted(E)[j]``."""
    if inst.model is not Model.REM:
        raise SpecError("gray_order expects a REM instance")
    if inst.table is not None:
        return replace(inst, model=Model.REMGC, table=_gray_layout(inst.table))
    return replace(inst, model=Model.REMGC)


def spectrum_stats(model, n: int, omega: float) -> tuple[float, float]:
    """Energy standard deviation and the normal-tail estimate of the mean spread.

    For SK the spread estimate includes the empirical tail factor 0.887.
    """
    model = Model.parse(model)
    if model is Model.REM:
        sigma = float(omega)
    elif model is Model.SK:
        sigma = 0.5 * omega * math.sqrt(n * (n + 3))
    else:
        raise SpecError("spectrum_stats is defined for SK and REM only")
    spread = -(2.0 ** 1.5) * sigma * float(erfinv(2.0 ** -n - 1.0))
    if model is Model.SK:
        spread *= SK_TAIL_FACTOR
    return sigma, spread


# ---------------------------------------------------------------------------
# archive files
# ---------------------------------------------------------------------------


def to_json(inst: ProblemInstance) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "prng": PRNG_NAME,
        "model": inst.model.value,
        "n": inst.n,
        "seed": inst.seed,
        "omega": inst.omega,
        "mu": inst.mu,
    }
    if inst.couplings is not None:
        iu = np.triu_indices(inst.n, 1)
        doc["couplings"] = inst.couplings[iu].tolist()
        doc["fields"] = inst.fields.tolist()
    if inst.marked is not None:
        doc["marked"] = inst.marked
    if inst.permutation_seed is not None:
        doc["permutation_seed"] = inst.permutation_seed
    if inst.table is not None:
        doc["energies"] = inst.table.tolist()
    return doc


def from_json(doc: dict) -> ProblemInstance:
    if doc.get("format_version") != FORMAT_VERSION:
        raise SpecError(f"unsupported format_version {doc.get('format_version')!r}")
    model = Model.parse(doc["model"])
    n = int(doc["n"])
    seed = doc.get("seed")
    common = dict(omega=float(doc["omega"]), mu=float(doc.get("mu", 0.0)))
    if "energies" in doc:
        return ProblemInstance(model, n, seed, table=np.asarray(doc["energies"], float), **common)
    if model in (Model.SK, Model.SSK):
        j = np.zeros((n, n))
        j[np.triu_indices(n, 1)] = doc["couplings"]
        j = j + j.T
        return ProblemInstance(model, n, seed, couplings=j, fields=np.asarray(doc["fields"], float),
                               permutation_seed=doc.get("permutation_seed"), **common)
    if model is Model.SEARCH:
        return ProblemInstance(model, n, seed, marked=int(doc["marked"]), **common)
    if seed is None:
        raise SpecError("REM archives need a seed")
    return ProblemInstance(model, n, int(seed), **common)


def save(inst: ProblemInstance, path) -> None:
    Path(path).write_text(json.dumps(to_json(inst), indent=1), encoding="utf-8")


def load(path) -> ProblemInstance:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read instance file {path}: {exc}") from exc
    return from_json(doc)
