"""Edit distance, similarity graph, components, and greedy split assignment."""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppiaffinity import (
    Complex,
    Dataset,
    DatasetValidationError,
    assign_splits,
    build_similarity_graph,
    complex_distance,
    compute_distance_matrix,
    connected_components,
    levenshtein,
    load_split,
    make_split,
    save_split,
)
from ppiaffinity.splitter import (
    DistanceMatrix,
    load_distance_matrix,
    save_distance_matrix,
)

from conftest import family_dataset


def lev_oracle(a: str, b: str) -> int:
    """Quadratic full-table dynamic program, kept deliberately naive."""
    la, lb = len(a), len(b)
    table = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la + 1):
        table[i][0] = i
    for j in range(lb + 1):
        table[0][j] = j
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1, table[i][j - 1] + 1, table[i - 1][j - 1] + cost
            )
    return table[la][lb]


short_strings = st.text(alphabet="ACDGT", max_size=30)


class TestLevenshtein:
    def test_insertions(self):
        assert levenshtein("", "abc") == 3

    def test_identity(self):
        assert levenshtein("PEPTIDE", "PEPTIDE") == 0

    def test_kitten_sitting(self):
        assert levenshtein("kitten", "sitting") == 3

    @given(short_strings, short_strings)
    def test_matches_oracle_and_symmetry(self, a, b):
        d = levenshtein(a, b)
        assert d == lev_oracle(a, b)
        assert d == levenshtein(b, a)

    @given(short_strings, short_strings, short_strings)
    @settings(max_examples=60)
    def test_triangle_inequality(self, a, b, c):
        assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


def cpx(cid, chains, pmid="PM1", pkd=7.0):
    return Complex(id=cid, chains=chains, pkd=pkd, pmid=pmid)


class TestComplexDistance:
    def test_identical_multisets(self):
        a = cpx("a", ["ACDE", "GGGG"])
        b = cpx("b", ["GGGG", "ACDE"])
        assert complex_distance(a, b) == 0.0
        assert complex_distance(b, a) == 0.0

    def test_asymmetry(self):
        a = cpx("a", ["AAAA"])
        b = cpx("b", ["AAAA", "CCCC"])
        assert complex_distance(a, b) == 0.0
        assert complex_distance(b, a) == 2.0

    def test_mean_of_minima(self):
        a = cpx("a", ["AC", "GG"])
        b = cpx("b", ["AC"])
        assert complex_distance(a, b) == pytest.approx(1.0)

    def test_self_distance_zero(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            chains = [
                "".join("ACDG"[k] for k in rng.integers(0, 4, size=rng.integers(1, 12)))
                for _ in range(rng.integers(1, 4))
            ]
            c = cpx("a", chains)
            assert complex_distance(c, c) == 0.0

    def test_empty_chains_error(self):
        a = cpx("a", ["AC"])
        bad = Complex(id="b", chains=[], pkd=7.0, pmid="PM1")
        with pytest.raises(ValueError):
            complex_distance(a, bad)
        with pytest.raises(ValueError):
            complex_distance(bad, a)


class TestDistanceMatrix:
    def test_matches_direct_distances(self):
        ds = family_dataset(seed=1, n_families=4, members_per_family=2, chain_length=12)
        matrix = compute_distance_matrix(ds)
        by_id = ds.by_id()
        for i, ida in enumerate(matrix.ids):
            for j, idb in enumerate(matrix.ids):
                expected = 0.0 if i == j else complex_distance(by_id[ida], by_id[idb])
                assert matrix.values[i, j] == pytest.approx(expected, abs=1e-4)

    def test_cache_roundtrip_bitwise(self, tmp_path):
        ds = family_dataset(seed=2, n_families=3, members_per_family=2, chain_length=10)
        matrix = compute_distance_matrix(ds)
        path = tmp_path / "cache.f4"
        save_distance_matrix(matrix, path)
        loaded = load_distance_matrix(path)
        assert loaded.ids == matrix.ids
        assert np.array_equal(loaded.values, matrix.values)

    def test_cache_reused(self, tmp_path):
        ds = family_dataset(seed=3, n_families=3, members_per_family=2, chain_length=10)
        first = compute_distance_matrix(ds, cache_dir=tmp_path)
        cache_files = list(tmp_path.glob("distmat_*.f4"))
        assert len(cache_files) == 1
        again = compute_distance_matrix(ds, cache_dir=tmp_path)
        assert np.array_equal(first.values, again.values)

    def test_validation(self):
        with pytest.raises(DatasetValidationError):
            DistanceMatrix(ids=["a", "b"], values=np.zeros((3, 3)))
        with pytest.raises(DatasetValidationError):
            DistanceMatrix(ids=["a", "b"], values=np.array([[0.0, -1.0], [1.0, 0.0]]))
        with pytest.raises(DatasetValidationError):
            DistanceMatrix(ids=["a", "b"], values=np.array([[1.0, 2.0], [2.0, 0.0]]))


class TestSimilarityGraph:
    def test_identical_pair_any_tau(self):
        ds = Dataset([cpx("a", ["ACDE"]), cpx("b", ["ACDE"])], name="t")
        graph = build_similarity_graph(ds, tau=0.0)
        assert graph["a"] == {"b"} and graph["b"] == {"a"}

    def test_tau_zero_distinct_edgeless(self):
        ds = Dataset(
            [cpx("a", ["ACDE"]), cpx("b", ["GGGG"]), cpx("c", ["KLMN"])], name="t"
        )
        graph = build_similarity_graph(ds, tau=0.0)
        assert all(not neighbors for neighbors in graph.values())

    def test_either_direction_rule(self):
        # D(a,b)=15, D(b,a)=25: the ordered-pair scan still adds the edge
        matrix = DistanceMatrix(
            ids=["a", "b"], values=np.array([[0.0, 15.0], [25.0, 0.0]])
        )
        ds = Dataset([cpx("a", ["ACDE"]), cpx("b", ["GGGG"])], name="t")
        graph = build_similarity_graph(ds, tau=20.0, matrix=matrix)
        assert graph["a"] == {"b"}

    def test_either_direction_rule_real_chains(self):
        a = cpx("a", ["A" * 10])
        b = cpx("b", ["A" * 10, "C" * 30])
        ds = Dataset([a, b], name="t")
        assert complex_distance(a, b) == 0.0
        assert complex_distance(b, a) == 15.0
        graph = build_similarity_graph(ds, tau=10.0)
        assert graph["a"] == {"b"}

    def test_negative_tau_rejected(self):
        ds = Dataset([cpx("a", ["ACDE"])], name="t")
        with pytest.raises(ValueError):
            build_similarity_graph(ds, tau=-1.0)


def bfs_components(graph):
    seen = set()
    comps = set()
    for start in graph:
        if start in seen:
            continue
        frontier = [start]
        comp = set()
        while frontier:
            v = frontier.pop()
            if v in comp:
                continue
            comp.add(v)
            frontier.extend(graph[v])
        seen |= comp
        comps.add(frozenset(comp))
    return comps


def random_graph(rng, n, p):
    ids = [f"v{k:03d}" for k in range(n)]
    graph = {v: set() for v in ids}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                graph[ids[i]].add(ids[j])
                graph[ids[j]].add(ids[i])
    return graph


class TestConnectedComponents:
    def test_edgeless(self):
        graph = {f"v{k}": set() for k in range(5)}
        comps = connected_components(graph)
        assert sorted(map(tuple, comps)) == [(f"v{k}",) for k in range(5)]

    def test_path_plus_isolated(self):
        graph = {"a": {"b"}, "b": {"a", "c"}, "c": {"b"}, "d": set()}
        comps = connected_components(graph)
        assert {frozenset(c) for c in comps} == {frozenset("abc"), frozenset("d")}

    def test_against_bfs_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            graph = random_graph(rng, 30, 0.08)
            comps = connected_components(graph)
            assert {frozenset(c) for c in comps} == bfs_components(graph)

    def test_members_sorted_components_ordered(self):
        graph = {"z": {"a"}, "a": {"z"}, "m": set()}
        comps = connected_components(graph)
        assert comps == [["a", "z"], ["m"]]


class TestAssignSplits:
    def test_ten_singletons(self):
        comps = [[f"v{k}"] for k in range(10)]
        split = assign_splits(comps, n_total=10, r=0.4, cap_factor=1.2)
        assert len(split.test) == 4
        assert len(split.train) == 6

    def test_single_giant_component(self):
        comps = [[f"v{k}" for k in range(10)]]
        split = assign_splits(comps, n_total=10, r=0.4, cap_factor=1.2)
        assert split.test == []
        assert len(split.train) == 10

    def test_sized_6_3_1_trace(self):
        comps = [
            [f"a{k}" for k in range(6)],
            [f"b{k}" for k in range(3)],
            ["c0"],
        ]
        split = assign_splits(comps, n_total=10, r=0.4, cap_factor=1.2)
        # the 6-component overshoots the 4.8 cap; 3 then 1 are accepted
        assert len(split.test) == 4
        assert set(split.test) == {"b0", "b1", "b2", "c0"}

    def test_empty_components_error(self):
        with pytest.raises(DatasetValidationError):
            assign_splits([], n_total=0, r=0.4, cap_factor=1.2)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            assign_splits([["a"]], 1, r=0.0, cap_factor=1.2)
        with pytest.raises(ValueError):
            assign_splits([["a"]], 1, r=0.4, cap_factor=0.5)

    def test_partition_properties(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            sizes = rng.integers(1, 9, size=rng.integers(1, 12))
            comps, k = [], 0
            for s in sizes:
                comps.append([f"v{k + m:03d}" for m in range(s)])
                k += s
            n = int(sizes.sum())
            r, cap = 0.4, 1.2
            split = assign_splits(comps, n, r=r, cap_factor=cap)
            assert len(split.test) <= cap * r * n
            ids = sorted(split.train + split.test)
            assert ids == sorted(cid for c in comps for cid in c)
            assert not (set(split.train) & set(split.test))


class TestMakeSplit:
    def test_identical_complexes_stay_together(self):
        ds = Dataset([cpx("a", ["ACDEGG"]), cpx("b", ["ACDEGG"])], name="t")
        split = make_split(ds, tau=0.0, r=0.4, val_fraction=0.0)
        together = (set(split.train) == {"a", "b"}) or (set(split.test) == {"a", "b"})
        assert together

    def test_everything_connected_means_no_test(self):
        ds = family_dataset(seed=4, n_families=3, members_per_family=3, chain_length=12)
        split = make_split(ds, tau=1e6, r=0.4, val_fraction=0.0)
        assert split.test == []
        assert sorted(split.train) == sorted(ds.ids())

    def test_no_leakage_on_family_fixture(self):
        # chains must be well longer than tau or every pair trivially connects
        ds = family_dataset(seed=5, n_families=12, members_per_family=4, chain_length=45)
        tau = 20.0
        split = make_split(ds, tau=tau, r=0.4, cap_factor=1.2, val_fraction=0.15)
        by_id = ds.by_id()
        split.validate()
        assert split.test and split.train
        groups = [split.train, split.validation, split.test]
        for ga in groups:
            for gb in groups:
                if ga is gb:
                    continue
                for x in ga:
                    for y in gb:
                        assert complex_distance(by_id[x], by_id[y]) > tau

    def test_min_cross_distance_metadata(self):
        ds = family_dataset(seed=6, n_families=8, members_per_family=3, chain_length=25)
        tau = 20.0
        split = make_split(ds, tau=tau, val_fraction=0.15)
        assert split.min_cross_split_distance is not None
        assert split.min_cross_split_distance > tau

    def test_validation_carved_from_train(self):
        ds = family_dataset(seed=7, n_families=10, members_per_family=3, chain_length=45)
        with_val = make_split(ds, tau=20.0, val_fraction=0.3)
        without = make_split(ds, tau=20.0, val_fraction=0.0)
        assert without.validation == []
        assert set(with_val.train) | set(with_val.validation) == set(without.train)
        assert with_val.test == without.test
        assert with_val.validation

    def test_val_fraction_range(self):
        ds = family_dataset(seed=8, n_families=2, members_per_family=2, chain_length=10)
        with pytest.raises(ValueError):
            make_split(ds, tau=20.0, val_fraction=1.0)

    def test_deterministic_serialization(self, tmp_path):
        ds = family_dataset(seed=9, n_families=6, members_per_family=3, chain_length=15)
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        save_split(make_split(ds, tau=20.0), a)
        save_split(make_split(ds, tau=20.0), b)
        assert a.read_bytes() == b.read_bytes()

    def test_split_json_roundtrip(self, tmp_path):
        ds = family_dataset(seed=10, n_families=5, members_per_family=2, chain_length=15)
        split = make_split(ds, tau=20.0)
        path = tmp_path / "split.json"
        save_split(split, path)
        loaded = load_split(path)
        assert loaded.train == split.train
        assert loaded.validation == split.validation
        assert loaded.test == split.test
        assert loaded.params.tau == split.params.tau
        doc = json.loads(path.read_text())
        assert set(doc) == {
            "params",
            "train",
            "validation",
            "test",
            "components",
            "min_cross_split_distance",
        }
