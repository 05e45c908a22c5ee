"""Shared brute-force oracles and random instance factories."""

import itertools
import math

import numpy as np
import pytest

from decoherent_histories_cli.impl.engine.histories import HistoryGrid, evolve_family, validate_family
from decoherent_histories_cli.impl.engine.operators import (Evolution, Operator,
                                                            StateVector, ket_projector)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: performance contract, deselect with -m 'not slow'")


# -------------------------------------------------------------------------
# ORACLES

def expm_series(matrix: np.ndarray, terms: int = 30) -> np.ndarray:
    """exp(A) by scaling, truncated Taylor series and repeated squaring"""
    norm = np.max(np.sum(np.abs(matrix), axis=1))
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    scaled = matrix / (2 ** squarings)
    result = np.eye(matrix.shape[0], dtype=complex)
    term = np.eye(matrix.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def explicit_functional(grid: HistoryGrid, psi: StateVector) -> np.ndarray:
    """D from explicit class operator matrices, one history at a time"""
    histories = list(itertools.product(*(range(s) for s in grid.shape)))
    branches = []
    for alpha in histories:
        c = np.eye(grid.dim, dtype=complex)
        for family, a in zip(grid.families, alpha):
            c = family.members[a].matrix @ c
        branches.append(c @ psi.amplitudes)
    d = np.zeros((len(histories), len(histories)), dtype=complex)
    for i, u in enumerate(branches):
        for j, v in enumerate(branches):
            d[i, j] = np.vdot(u, v)
    return d


def index_sum_partial_trace(rho: np.ndarray, factors, keep) -> np.ndarray:
    """partial trace by explicit summation over multi-indices, kept factors in the order given"""
    kept_dims = [factors[k] for k in keep]
    kept_dim = int(np.prod(kept_dims)) if kept_dims else 1
    out = np.zeros((kept_dim, kept_dim), dtype=complex)
    all_indices = list(itertools.product(*(range(f) for f in factors)))
    flat = {idx: n for n, idx in enumerate(all_indices)}
    for i in all_indices:
        for j in all_indices:
            if any(i[k] != j[k] for k in range(len(factors)) if k not in keep):
                continue
            row = int(np.ravel_multi_index([i[k] for k in keep], kept_dims)) if keep else 0
            col = int(np.ravel_multi_index([j[k] for k in keep], kept_dims)) if keep else 0
            out[row, col] += rho[flat[i], flat[j]]
    return out


def bell_number(n: int) -> int:
    """Bell numbers through the Bell triangle"""
    row = [1]
    for _ in range(n - 1):
        new = [row[-1]]
        for value in row:
            new.append(new[-1] + value)
        row = new
    return row[-1]


# -------------------------------------------------------------------------
# RANDOM INSTANCES

def random_hermitian(rng, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_unitary(rng, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, dim: int) -> StateVector:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector(v / np.linalg.norm(v), normalized=True)


def random_family_members(rng, dim: int, members: int, rotated: bool = True):
    blocks = np.array_split(rng.permutation(dim), members)
    if rotated:
        q = random_unitary(rng, dim)
        return [ket_projector(q[:, block]) for block in blocks]
    return [Operator(support=np.isin(np.arange(dim), block)) for block in blocks]


def random_grid(rng, dim: int, n_times: int, members: int = 2, spacing=None, evolution=None,
                rotated: bool = True, heisenberg_given: bool = False):
    """random grid whose family times are equally spaced unless `spacing` is a list of steps"""
    if evolution is None:
        evolution = Evolution(Operator(random_hermitian(rng, dim)))
    if spacing is None:
        step = float(rng.uniform(0.2, 1.5))
        times = [step * (k + 1) for k in range(n_times)]
    else:
        times = list(np.cumsum(spacing))
    families = []
    for k, t in enumerate(times):
        members0 = random_family_members(rng, dim, members, rotated)
        if heisenberg_given:
            families.append(validate_family([evolution.heisenberg(m, t) for m in members0], t, name='f{}'.format(k)))
        else:
            families.append(evolve_family(members0, evolution, t, name='f{}'.format(k)))
    return HistoryGrid(families, evolution)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def seeded_instance(seed: int, max_dim: int = 16, max_times: int = 4, max_histories: int = 64, min_times: int = 1,
                    **grid_args):
    """one reproducible random grid and state per seed, sizes drawn within the caps"""
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, max_dim + 1))
    n_times = int(rng.integers(min_times, max_times + 1))
    widest = 2
    while widest + 1 <= dim and (widest + 1) ** n_times <= max_histories:
        widest += 1
    members = int(rng.integers(2, widest + 1))
    grid = random_grid(rng, dim, n_times, members=members, **grid_args)
    return grid, random_state(rng, dim), rng
