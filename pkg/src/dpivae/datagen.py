"""Synthetic datasets: factor sampling, full-physics responses and noise.

Factors and observations are kept as column-stacked arrays rather than lists
of per-record objects; ``GenerativeFactors[i]`` and ``Dataset[i]`` still give
a single record when needed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cases import CaseSpec, NoiseSpec, get_case
from .errors import ConfigurationError, DomainError, GenerationError, NumericError, SizeError

__all__ = [
    "NoiseSpec",
    "GenerativeFactors",
    "Dataset",
    "sample_generative_factors",
    "generate_observations",
    "make_dataset",
    "split_dataset",
    "quadrant_split",
    "quadrant_of",
]

FORMAT_VERSION = 1
_ROLES = (("s_x", "physics"), ("s_c", "domain"), ("s_y", "class"), ("s_u", "unknown"))


def _empty(n, k):
    return np.zeros((n, k))


@dataclass
class GenerativeFactors:
    """Ground-truth factors of n records, one (n, k) array per role."""

    case_id: str
    s_x: np.ndarray
    s_c: np.ndarray
    s_y: np.ndarray
    s_u: np.ndarray

    def __post_init__(self):
        lengths = {len(a) for a in (self.s_x, self.s_c, self.s_y, self.s_u)}
        if len(lengths) > 1:
            raise SizeError("factor arrays have unequal lengths")

    def __len__(self):
        return len(self.s_x)

    def __getitem__(self, idx):
        if np.isscalar(idx):
            return tuple(getattr(self, a)[idx] for a, _ in _ROLES)
        return self.subset(idx)

    def subset(self, idx) -> "GenerativeFactors":
        return GenerativeFactors(self.case_id, *(getattr(self, a)[idx] for a, _ in _ROLES))

    def column(self, name) -> np.ndarray:
        """Values of one named factor."""
        case = get_case(self.case_id)
        for attr, role in _ROLES:
            names = case.names(role)
            if name in names:
                return getattr(self, attr)[:, names.index(name)]
        raise ConfigurationError(f"case {self.case_id!r} has no generative factor {name!r}")

    def as_matrix(self):
        """All factors side by side with their names, in case-table order."""
        case = get_case(self.case_id)
        names = [f.name for f in case.factors]
        return np.column_stack([self.column(n) for n in names]) if len(self) else _empty(0, len(names)), names


@dataclass
class Dataset:
    case_id: str
    x: np.ndarray
    c: np.ndarray
    y: np.ndarray
    factors: GenerativeFactors
    seed: int | None = None
    noise: NoiseSpec | None = None

    def __post_init__(self):
        if not len(self.x) == len(self.c) == len(self.y) == len(self.factors):
            raise SizeError("records and factors must have equal length")

    def __len__(self):
        return len(self.x)

    def __getitem__(self, idx):
        if np.isscalar(idx):
            return self.x[idx], self.c[idx], self.y[idx]
        return self.subset(idx)

    def subset(self, idx) -> "Dataset":
        return Dataset(
            self.case_id, self.x[idx], self.c[idx], self.y[idx], self.factors.subset(idx), self.seed, self.noise
        )

    # -- persistence -------------------------------------------------------

    def columns(self):
        case = get_case(self.case_id)
        cols = [f"x_{i}" for i in range(self.x.shape[1])]
        cols += [f"c_{n}" for n in case.names("domain")]
        cols += [f"y_{n}" for n in case.names("class")]
        for attr, role in _ROLES:
            cols += [f"{attr}_{n}" for n in case.names(role)]
        return cols

    def to_csv(self, path):
        """Write ``path`` (CSV) and ``path.json`` (metadata sidecar)."""
        path = Path(path)
        case = get_case(self.case_id)
        blocks = [self.x, self.c, self.y] + [getattr(self.factors, a) for a, _ in _ROLES]
        table = np.hstack(blocks)
        cols = self.columns()
        np.savetxt(path, table, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
        units = {f"x_{i}": case.response_unit for i in range(self.x.shape[1])}
        for f in case.factors:
            for prefix in {"physics": ["s_x"], "domain": ["c", "s_c"], "class": ["y", "s_y"], "unknown": ["s_u"]}[
                f.role
            ]:
                units[f"{prefix}_{f.name}"] = f.unit
        meta = {
            "format_version": FORMAT_VERSION,
            "case_id": self.case_id,
            "seed": self.seed,
            "noise": asdict(self.noise) if self.noise else None,
            "n_records": len(self),
            "columns": cols,
            "units": units,
        }
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2))
        return path

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        meta = json.loads(Path(str(path) + ".json").read_text())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(f"unsupported dataset format in {path}")
        case = get_case(meta["case_id"])
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if table.shape[0] != meta["n_records"] or table.shape[1] != len(meta["columns"]):
            raise SizeError(f"{path}: table shape {table.shape} disagrees with metadata")
        widths = [case.d_x, case.d_c, case.d_y] + [len(case.names(r)) for _, r in _ROLES]
        parts = np.split(table, np.cumsum(widths)[:-1], axis=1)
        noise = NoiseSpec(**meta["noise"]) if meta["noise"] else None
        return cls(meta["case_id"], parts[0], parts[1], parts[2], GenerativeFactors(meta["case_id"], *parts[3:]),
                   meta["seed"], noise)


def sample_generative_factors(case_id, n, rng_seed) -> GenerativeFactors:
    """n independent draws from the case's (uniform) ground-truth distribution."""
    case = get_case(case_id)
    if n < 0:
        raise SizeError("n must be non-negative")
    rng = np.random.default_rng(rng_seed)
    lows = np.array([f.low for f in case.factors])
    highs = np.array([f.high for f in case.factors])
    draws = rng.uniform(lows, highs, size=(n, len(case.factors)))
    out = {}
    for attr, role in _ROLES:
        cols = [i for i, f in enumerate(case.factors) if f.role == role]
        out[attr] = draws[:, cols]
    return GenerativeFactors(case.case_id, **out)


def clean_responses(case: CaseSpec, factors: GenerativeFactors, simulator=None) -> np.ndarray:
    """Noise-free responses h_x(s) for every record.

    ``simulator`` replaces the case's full model, e.g. by a trained surrogate
    (called with the four factor arrays, returning (n, d_x)).
    """
    if simulator is not None:
        out = np.asarray(simulator(factors.s_x, factors.s_c, factors.s_y, factors.s_u), dtype=float)
        bad = np.flatnonzero(~np.all(np.isfinite(out), axis=1))
        if bad.size:
            raise GenerationError(f"surrogate produced non-finite response for record {bad[0]}", index=int(bad[0]))
        return out
    if case.case_id == "oscillator":
        # closed form vectorises over records
        try:
            return case.full_response(factors.s_x.T, factors.s_c.T, factors.s_y.T, factors.s_u.T)
        except (DomainError, NumericError):
            pass  # fall through to locate the failing record
    out = np.empty((len(factors), case.d_x))
    for i in range(len(factors)):
        try:
            out[i] = case.full_response(factors.s_x[i], factors.s_c[i], factors.s_y[i], factors.s_u[i])
        except (DomainError, NumericError) as exc:
            raise GenerationError(f"full model failed for record {i}: {exc}", index=i) from exc
        if not np.all(np.isfinite(out[i])):
            raise GenerationError(f"full model returned non-finite response for record {i}", index=i)
    return out


def generate_observations(case_id, factors: GenerativeFactors, noise: NoiseSpec | None = None, rng_seed=0,
                          simulator=None) -> Dataset:
    """Noisy observation triplets (x, c, y) for the given factors.

    Domain and class observables are the factors plus noise; unknown
    confounders are kept in ``factors`` only.
    """
    case = get_case(case_id)
    if len(factors) == 0:
        raise SizeError("factors must be non-empty")
    if factors.case_id != case.case_id:
        raise ConfigurationError(f"factors belong to case {factors.case_id!r}, not {case.case_id!r}")
    noise = noise or case.noise
    rng = np.random.default_rng(rng_seed)
    x = clean_responses(case, factors, simulator)
    n = len(factors)
    x = x + noise.sigma_x * rng.standard_normal(x.shape)
    c = factors.s_c + noise.sigma_c * rng.standard_normal((n, factors.s_c.shape[1]))
    y = factors.s_y + noise.sigma_y * rng.standard_normal((n, factors.s_y.shape[1]))
    return Dataset(case.case_id, x, c, y, factors, rng_seed, noise)


def make_dataset(case_id, n, seed, noise: NoiseSpec | None = None, simulator=None) -> Dataset:
    """Factors and observations from one seed (single stream, split afterwards)."""
    ss = np.random.SeedSequence(seed)
    s_fac, s_obs = ss.spawn(2)
    factors = sample_generative_factors(case_id, n, s_fac)
    ds = generate_observations(case_id, factors, noise, s_obs, simulator)
    ds.seed = seed
    return ds


def split_dataset(d: Dataset, n_train, n_val, n_test):
    """Contiguous, disjoint (train, val, test) splits from the front of ``d``."""
    sizes = (n_train, n_val, n_test)
    if min(sizes) < 0:
        raise SizeError("split sizes must be non-negative")
    if sum(sizes) > len(d):
        raise SizeError(f"split sizes {sizes} exceed dataset length {len(d)}")
    edges = np.cumsum((0,) + sizes)
    return tuple(d.subset(slice(edges[i], edges[i + 1])) for i in range(3))


def quadrant_of(factors: GenerativeFactors) -> np.ndarray:
    """Quarter index 0..3 on the first two physics factors (bit0: first, bit1: second above midpoint)."""
    case = get_case(factors.case_id)
    phys = case.by_role("physics")
    if len(phys) < 2:
        raise ConfigurationError(f"case {case.case_id!r} has fewer than two physics factors")
    hi0 = factors.s_x[:, 0] > phys[0].midpoint
    hi1 = factors.s_x[:, 1] > phys[1].midpoint
    return hi0.astype(int) + 2 * hi1.astype(int)


def quadrant_split(factors: GenerativeFactors, mode, quadrant_index):
    """(train indices, test indices) for the interpolation/extrapolation protocol."""
    if quadrant_index not in (0, 1, 2, 3):
        raise ConfigurationError(f"quadrant_index must be in 0..3, got {quadrant_index}")
    if mode not in ("interpolation", "extrapolation"):
        raise ConfigurationError(f"unknown split mode {mode!r}")
    q = quadrant_of(factors)
    inside = q == quadrant_index
    idx = np.arange(len(factors))
    if mode == "interpolation":
        return idx[~inside], idx[inside]
    return idx[inside], idx[~inside]
