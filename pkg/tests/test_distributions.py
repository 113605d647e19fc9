import json

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import random_distribution
from nlbi.distributions import (CorpusSpec, DatasetError, DiscreteDistribution, cluster_labels,
                                exact_emd, generate_synthetic, load_dataset, write_dataset)


def linprog_emd(p, q):
    """Transportation LP solved by HiGHS: an independent route to the EMD."""
    n, m = p.n, q.n
    cost = np.linalg.norm(p.bins[:, None, :] - q.bins[None, :, :], axis=2).ravel()
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        a_eq[n + j, j::m] = 1
    res = linprog(cost, A_eq=a_eq, b_eq=np.concatenate([p.weights, q.weights]),
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution(0, [[0.0]], [0.9])
    with pytest.raises(ValueError):
        DiscreteDistribution(0, [[0.0], [1.0]], [1.2, -0.2])
    with pytest.raises(ValueError):
        DiscreteDistribution(0, np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        DiscreteDistribution(-1, [[0.0]], [1.0])
    with pytest.raises(ValueError):
        DiscreteDistribution(0, [[0.0], [1.0]], [1.0])


def test_duplicate_bins_merged():
    p = DiscreteDistribution(3, [[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]], [0.25, 0.5, 0.25])
    assert p.n == 2
    assert dict(zip(map(tuple, p.bins.tolist()), p.weights.tolist())) == {(0.0, 0.0): 0.5, (1.0, 2.0): 0.5}
    with pytest.raises(ValueError):
        p.weights[0] = 1.0


def test_exact_emd_worked_examples():
    p = DiscreteDistribution(0, [[0.0], [1.0]], [1.0, 0.0])
    q = DiscreteDistribution(1, [[0.0], [1.0]], [0.0, 1.0])
    assert exact_emd(p, q) == pytest.approx(1.0, abs=1e-12)
    p = DiscreteDistribution(0, [[0.0], [1.0], [3.0]], [0.5, 0.5, 0.0])
    q = DiscreteDistribution(1, [[0.0], [1.0], [3.0]], [0.0, 0.5, 0.5])
    assert exact_emd(p, q) == pytest.approx(1.5, abs=1e-12)
    assert exact_emd(p, p) == 0.0


def test_exact_emd_point_mass_is_mean_distance():
    p = DiscreteDistribution(0, [[0.0, 0.0]], [1.0])
    q = DiscreteDistribution(1, [[3.0, 4.0], [0.0, 1.0]], [0.5, 0.5])
    assert exact_emd(p, q) == pytest.approx(0.5 * 5 + 0.5 * 1, abs=1e-12)


def test_exact_emd_dimension_mismatch():
    with pytest.raises(ValueError):
        exact_emd(DiscreteDistribution(0, [[0.0]], [1.0]), DiscreteDistribution(1, [[0.0, 1.0]], [1.0]))


@pytest.mark.parametrize("seed", range(15))
def test_exact_emd_matches_linprog(seed):
    rng = np.random.default_rng(seed)
    p = random_distribution(rng, rng.integers(1, 12), d=2, oid=0)
    q = random_distribution(rng, rng.integers(1, 12), d=2, oid=1)
    assert exact_emd(p, q) == pytest.approx(linprog_emd(p, q), abs=1e-9)


def test_flow_certificate(rng):
    p = random_distribution(rng, 9, d=3)
    q = random_distribution(rng, 7, d=3, oid=1)
    res = exact_emd(p, q, return_flow=True)
    f = res.flow
    assert f.min() >= 0
    assert np.allclose(f.sum(axis=1), p.weights, atol=1e-9)
    assert np.allclose(f.sum(axis=0), q.weights, atol=1e-9)
    assert abs(f.sum() - 1) < 1e-9
    assert abs(np.sum(f * res.cost) - res.distance) < 1e-9
    assert np.allclose(np.diag(np.linalg.norm(p.bins[:, None] - p.bins[None], axis=2)), 0)


def test_metric_properties(rng):
    for _ in range(20):
        p, q, r = (random_distribution(rng, rng.integers(1, 10), oid=i) for i in range(3))
        assert exact_emd(p, p) == pytest.approx(0, abs=1e-12)
        assert abs(exact_emd(p, q) - exact_emd(q, p)) <= 1e-9
        assert exact_emd(p, r) <= exact_emd(p, q) + exact_emd(q, r) + 1e-9


def test_one_dimensional_emd_is_cdf_area(rng):
    for _ in range(20):
        p = random_distribution(rng, 6, d=1)
        q = random_distribution(rng, 5, d=1, oid=1)
        grid = np.union1d(p.bins[:, 0], q.bins[:, 0])
        cp = np.array([p.weights[p.bins[:, 0] <= t].sum() for t in grid])
        cq = np.array([q.weights[q.bins[:, 0] <= t].sum() for t in grid])
        area = np.sum(np.abs(cp - cq)[:-1] * np.diff(grid))
        assert exact_emd(p, q) == pytest.approx(area, abs=1e-9)


def test_load_tab_and_json(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text(
        "# comment\n"
        "0\t2\t1\t0.5,0.5\t1.0\n"
        '{"id": 1, "bins": [[0, 0], [1, 1]], "weights": [0.25, 0.75]}\n'
        "\n"
        "2\t2\t2\t0,0;0,0\t0.5,0.5\n")
    data = load_dataset(path)
    assert [p.id for p in data] == [0, 1, 2]
    assert data[0].n == 1 and data[2].n == 1


def test_load_rejects_bad_weights_unless_renormalized(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("0\t1\t2\t0;1\t0.4,0.4\n")
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(path)
    (p,) = load_dataset(path, renormalize=True)
    assert np.allclose(p.weights, [0.5, 0.5])


@pytest.mark.parametrize("text, message", [
    ("0\t2\t1\t0.5\t1.0\n", "arity"),
    ("0\t1\t2\t0;1\t1.0\n", "declared n"),
    ("0\t1\t1\tx\t1.0\n", "unparseable"),
    ("0\t1\t1\t0\n", "5 tab"),
    ("0\t1\t1\t0\t1\n0\t1\t1\t0\t1\n", "duplicate id"),
    ("0\t1\t1\t0\t-1\n", "negative"),
    ("{bad json\n", "JSON"),
])
def test_load_errors_name_the_line(tmp_path, text, message):
    path = tmp_path / "d.tsv"
    path.write_text("# header\n" + text)
    with pytest.raises(DatasetError, match=message) as info:
        load_dataset(path)
    assert info.value.line in (2, 3)


def test_load_rejects_mixed_dimensions(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("0\t1\t1\t0\t1\n1\t2\t1\t0,0\t1\n")
    with pytest.raises(DatasetError, match="mixed"):
        load_dataset(path)


def test_write_load_round_trip(tmp_path):
    data = generate_synthetic(CorpusSpec(50, bins=9, dim=3, layout="scatter", clusters=3), 4)
    path = tmp_path / "d.tsv"
    write_dataset(path, data)
    back = load_dataset(path)
    for a, b in zip(data, back):
        assert a.id == b.id
        assert np.array_equal(a.bins, b.bins)
        assert np.allclose(a.weights, b.weights, atol=1e-15)


def test_generator_determinism_and_shapes():
    spec = CorpusSpec(30, bins=16, clusters=4, layout="grid")
    a = generate_synthetic(spec, 1)
    b = generate_synthetic(spec, 1)
    c = generate_synthetic(spec, 2)
    assert all(np.array_equal(x.weights, y.weights) for x, y in zip(a, b))
    assert any(not np.array_equal(x.weights, y.weights) for x, y in zip(a, c))
    (single,) = generate_synthetic(CorpusSpec(1, bins=1), 0)
    assert single.n == 1 and single.weights[0] == 1.0
    for bad in (CorpusSpec(0), CorpusSpec(5, bins=0), CorpusSpec(5, layout="ring")):
        with pytest.raises(ValueError):
            generate_synthetic(bad, 0)


def test_min_weight_drops_tiny_bins():
    data = generate_synthetic(CorpusSpec(20, bins=64, layout="grid", min_weight=0.01), 3)
    assert all(p.weights.min() >= 0.005 for p in data)
    assert any(p.n < 64 for p in data)


def test_clusters_are_tighter_than_between():
    spec = CorpusSpec(60, bins=16, clusters=3, layout="grid", spread=0.1)
    data = generate_synthetic(spec, 5)
    labels = cluster_labels(spec)
    within, between = [], []
    for i in range(0, 60, 3):
        for j in range(i + 1, 60, 4):
            (within if labels[i] == labels[j] else between).append(exact_emd(data[i], data[j]))
    assert np.mean(within) < np.mean(between)


def test_json_reader_accepts_generated_records(tmp_path):
    data = generate_synthetic(CorpusSpec(3, bins=4, layout="scatter"), 0)
    path = tmp_path / "d.jsonl"
    path.write_text("".join(json.dumps({"id": p.id, "bins": p.bins.tolist(),
                                        "weights": p.weights.tolist()}) + "\n" for p in data))
    assert [p.id for p in load_dataset(path)] == [0, 1, 2]
