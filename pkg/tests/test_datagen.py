"""Factor sampling, noisy observation synthesis, splits and persistence."""

import hashlib

import numpy as np
import pytest

from dpivae.cases import NoiseSpec, get_case
from dpivae.datagen import (
    Dataset,
    GenerativeFactors,
    clean_responses,
    generate_observations,
    make_dataset,
    quadrant_of,
    quadrant_split,
    sample_generative_factors,
    split_dataset,
)
from dpivae.errors import ConfigurationError, DomainError, GenerationError, SizeError

ZERO = NoiseSpec(0.0, 0.0, 0.0)


def frozen(case_id, n, values=None):
    """n copies of one factor record (range midpoints unless given)."""
    case = get_case(case_id)
    vals = {f.name: f.midpoint for f in case.factors}
    vals.update(values or {})
    parts = [np.tile([vals[k] for k in case.names(r)], (n, 1)).reshape(n, -1)
             for r in ("physics", "domain", "class", "unknown")]
    return GenerativeFactors(case_id, *parts)


def test_beam_factor_ranges():
    f = sample_generative_factors("beam", 3, 0)
    assert len(f) == 3
    ranges = {"E": (2.5, 4.5), "x_F": (0.3, 0.7), "log_kv": (6, 8), "T": (-11, 5)}
    for name, (lo, hi) in ranges.items():
        col = f.column(name)
        assert np.all((col >= lo) & (col <= hi))


def test_empty_draw():
    f = sample_generative_factors("beam", 0, 0)
    assert len(f) == 0
    m, names = f.as_matrix()
    assert m.shape == (0, 4) and len(names) == 4


def test_oscillator_mass_mean():
    m = sample_generative_factors("oscillator", 10_000, 1).column("m")
    assert abs(m.mean() - 1.5) <= 0.02


@pytest.mark.parametrize("case_id", ["beam", "oscillator", "bridge"])
def test_coverage_inside_supports(case_id):
    f = sample_generative_factors(case_id, 5000, 2)
    for fac in get_case(case_id).factors:
        col = f.column(fac.name)
        assert col.min() >= fac.low and col.max() <= fac.high
        # and the draws actually spread over the support
        assert col.max() - col.min() > 0.95 * (fac.high - fac.low)


def test_unknown_case():
    with pytest.raises(ConfigurationError):
        sample_generative_factors("truss", 3, 0)
    with pytest.raises(ConfigurationError):
        make_dataset("truss", 3, 0)


@pytest.mark.parametrize("case_id,d_x", [("beam", 32), ("oscillator", 64), ("bridge", 64)])
def test_observation_shapes(case_id, d_x):
    d = make_dataset(case_id, 5, 0)
    case = get_case(case_id)
    assert d.x.shape == (5, d_x)
    assert d.c.shape == (5, case.d_c) and d.y.shape == (5, case.d_y)


def test_unknown_confounders_not_observed():
    d = make_dataset("oscillator", 4, 0, ZERO)
    assert d.c.shape[1] == 1 and d.y.shape[1] == 1  # T and zeta only; x0 is hidden
    assert d.factors.s_u.shape == (4, 1)
    np.testing.assert_array_equal(d.c, d.factors.s_c)
    np.testing.assert_array_equal(d.y, d.factors.s_y)


@pytest.mark.parametrize("case_id", ["beam", "oscillator", "bridge"])
def test_zero_noise_is_full_physics(case_id):
    f = sample_generative_factors(case_id, 4, 3)
    d = generate_observations(case_id, f, ZERO, 0)
    case = get_case(case_id)
    for i in range(4):
        np.testing.assert_array_equal(d.x[i], case.full_response(*(a[i] for a in (f.s_x, f.s_c, f.s_y, f.s_u))))


def _digest(d):
    h = hashlib.sha256()
    for a in (d.x, d.c, d.y, *d.factors.as_matrix()[:1]):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def test_determinism_bitwise():
    a = make_dataset("beam", 64, 11)
    b = make_dataset("beam", 64, 11)
    c = make_dataset("beam", 64, 12)
    assert _digest(a) == _digest(b)
    assert _digest(a) != _digest(c)


@pytest.mark.parametrize("case_id", ["beam", "oscillator"])
def test_noise_calibration(case_id):
    case = get_case(case_id)
    f = frozen(case_id, 10_000)
    d = generate_observations(case_id, f, rng_seed=5)
    sd = d.x.std(axis=0, ddof=1)
    np.testing.assert_allclose(sd, case.noise.sigma_x, rtol=0.03)
    np.testing.assert_allclose(d.c.std(axis=0, ddof=1), case.noise.sigma_c, rtol=0.03)


def test_generation_error_names_record():
    f = sample_generative_factors("beam", 5, 0)
    f.s_x[3, 0] = -1.0  # negative stiffness is outside the model's domain
    with pytest.raises(GenerationError) as info:
        generate_observations("beam", f, rng_seed=0)
    assert info.value.index == 3 and "record 3" in str(info.value)


def test_surrogate_simulator_errors_name_record():
    f = sample_generative_factors("oscillator", 4, 0)

    def sim(s_x, s_c, s_y, s_u):
        out = np.zeros((len(s_x), 64))
        out[2, 5] = np.nan
        return out

    with pytest.raises(GenerationError) as info:
        generate_observations("oscillator", f, simulator=sim)
    assert info.value.index == 2


def test_generate_rejects_empty_and_mismatched():
    with pytest.raises(SizeError):
        generate_observations("beam", sample_generative_factors("beam", 0, 0))
    with pytest.raises(ConfigurationError):
        generate_observations("bridge", sample_generative_factors("beam", 2, 0))


def test_noise_spec_non_negative():
    with pytest.raises(DomainError):
        NoiseSpec(-0.1, 0.0, 0.0)


# -- splits ----------------------------------------------------------------


def test_standard_split_sizes_and_pairing():
    d = make_dataset("oscillator", 2048, 0)
    tr, va, te = split_dataset(d, 1024, 512, 512)
    assert (len(tr), len(va), len(te)) == (1024, 512, 512)
    np.testing.assert_array_equal(np.vstack([tr.x, va.x, te.x]), d.x)
    np.testing.assert_array_equal(va.factors.s_x, d.factors.s_x[1024:1536])


def test_degenerate_and_partial_splits():
    d = make_dataset("oscillator", 3, 0)
    tr, va, te = split_dataset(d, 3, 0, 0)
    assert (len(tr), len(va), len(te)) == (3, 0, 0)
    d = make_dataset("oscillator", 10, 0)
    parts = split_dataset(d, 2, 3, 1)
    np.testing.assert_array_equal(np.vstack([p.x for p in parts]), d.x[:6])
    with pytest.raises(SizeError):
        split_dataset(d, 8, 2, 1)
    with pytest.raises(SizeError):
        split_dataset(d, -1, 2, 1)


def test_quadrant_labels():
    f = frozen("bridge", 4)
    f.s_x[:, 0] = [9.5, 10.5, 9.5, 10.5]
    f.s_x[:, 1] = [9.5, 9.5, 10.5, 10.5]
    np.testing.assert_array_equal(quadrant_of(f), [0, 1, 2, 3])


@pytest.mark.parametrize("q", [0, 1, 2, 3])
def test_quadrant_split_modes(q):
    f = sample_generative_factors("bridge", 2000, 4)
    lab = quadrant_of(f)
    tr, te = quadrant_split(f, "interpolation", q)
    assert np.all(lab[te] == q) and np.all(lab[tr] != q)
    assert set(tr) | set(te) == set(range(2000)) and not set(tr) & set(te)
    tr, te = quadrant_split(f, "extrapolation", q)
    assert np.all(lab[tr] == q) and np.all(lab[te] != q)


def test_quadrant_split_errors():
    f = sample_generative_factors("bridge", 10, 0)
    with pytest.raises(ConfigurationError):
        quadrant_split(f, "interpolation", 4)
    with pytest.raises(ConfigurationError):
        quadrant_split(f, "sideways", 0)
    with pytest.raises(ConfigurationError):
        quadrant_of(sample_generative_factors("oscillator", 10, 0))


# -- persistence -------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    d = make_dataset("bridge", 6, 3)
    path = tmp_path / "bridge.csv"
    d.to_csv(path)
    e = Dataset.from_csv(path)
    assert e.case_id == "bridge" and e.seed == 3 and e.noise == d.noise
    for a, b in ((d.x, e.x), (d.c, e.c), (d.y, e.y), (d.factors.s_u, e.factors.s_u)):
        np.testing.assert_array_equal(a, b)
    import json

    meta = json.loads((tmp_path / "bridge.csv.json").read_text())
    assert meta["units"]["s_x_log_kv1"] == get_case("bridge").factor("log_kv1").unit
    assert len(meta["columns"]) == 64 + 2 + 3 + 8  # x, c, y, then all 8 factors


def test_csv_shape_mismatch_detected(tmp_path):
    d = make_dataset("beam", 4, 0)
    path = tmp_path / "beam.csv"
    d.to_csv(path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(SizeError):
        Dataset.from_csv(path)


def test_clean_responses_use_simulator_override():
    case = get_case("beam")
    f = sample_generative_factors("beam", 3, 0)
    out = clean_responses(case, f, simulator=lambda *parts: np.ones((3, 32)))
    assert np.all(out == 1)
