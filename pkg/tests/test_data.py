import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dnmf.data import (
    FORMAT_MATRIX, N_CATEGORIES, MutationCatalog, generate_synthetic, load_catalog, make_split_plan,
    mutation_categories, save_catalog,
)
from dnmf.errors import ConfigurationError, DataError
from dnmf.matrix import matrix_cost


def write_csv(path, labels, samples, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["category", *samples])
        for lab, row in zip(labels, values):
            w.writerow([lab, *row])


def test_categories():
    cats = mutation_categories()
    assert len(cats) == N_CATEGORIES == len(set(cats))
    assert cats[0] == "A[C>A]A" and cats[-1] == "T[T>G]T"


class TestLoad:
    def test_well_formed(self, tmp_path, rng):
        values = rng.integers(0, 50, (96, 3))
        write_csv(tmp_path / "c.csv", mutation_categories(), ["s1", "s2", "s3"], values)
        cat = load_catalog(tmp_path / "c.csv")
        assert cat.shape == (96, 3) and cat.sample_ids == ["s1", "s2", "s3"]
        np.testing.assert_array_equal(cat.counts, values)
        assert cat.W is None and cat.H is None

    def test_negative_cell_named(self, tmp_path):
        values = np.ones((96, 2))
        values[4, 1] = -2
        write_csv(tmp_path / "c.csv", mutation_categories(), ["a", "b"], values)
        with pytest.raises(DataError, match=r"line 6, column 3.*negative"):
            load_catalog(tmp_path / "c.csv")

    def test_wrong_row_count(self, tmp_path):
        write_csv(tmp_path / "c.csv", mutation_categories()[:95], ["a"], np.ones((95, 1)))
        with pytest.raises(DataError, match="96"):
            load_catalog(tmp_path / "c.csv")
        assert load_catalog(tmp_path / "c.csv", FORMAT_MATRIX).shape == (95, 1)

    def test_parse_error_location(self, tmp_path):
        (tmp_path / "c.csv").write_text("category,a,b\nX,1,2\nY,3,oops\n")
        with pytest.raises(DataError, match=r"line 3, column 3"):
            load_catalog(tmp_path / "c.csv", FORMAT_MATRIX)

    def test_ragged_row(self, tmp_path):
        (tmp_path / "c.csv").write_text("category,a,b\nX,1\n")
        with pytest.raises(DataError, match="line 2"):
            load_catalog(tmp_path / "c.csv", FORMAT_MATRIX)

    def test_duplicate_labels(self, tmp_path):
        (tmp_path / "c.csv").write_text("category,a\nX,1\nX,2\n")
        with pytest.raises(DataError, match="duplicate"):
            load_catalog(tmp_path / "c.csv", FORMAT_MATRIX)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_catalog(tmp_path / "c.csv", "vcf")

    def test_missing_explicit_sidecar(self, tmp_path):
        (tmp_path / "c.csv").write_text("category,a\nX,1\n")
        with pytest.raises(FileNotFoundError):
            load_catalog(tmp_path / "c.csv", FORMAT_MATRIX, h_path=tmp_path / "nope.csv")

    def test_sidecar_mismatch(self, tmp_path):
        cat = generate_synthetic(2, 4, seed=0)
        paths = save_catalog(cat, tmp_path / "c.csv")
        h_path = paths[2]
        text = h_path.read_text().splitlines()
        text[0] = text[0].replace("S1", "ZZ")
        h_path.write_text("\n".join(text) + "\n")
        with pytest.raises(DataError, match="sample ids"):
            load_catalog(tmp_path / "c.csv")


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        cat = generate_synthetic(3, 7, seed=5, noise="poisson")
        save_catalog(cat, tmp_path / "c.csv")
        back = load_catalog(tmp_path / "c.csv")
        np.testing.assert_array_equal(back.counts, cat.counts)
        np.testing.assert_array_equal(back.W, cat.W)
        np.testing.assert_array_equal(back.H, cat.H)
        assert back.labels == cat.labels and back.signature_ids == cat.signature_ids
        assert back.metadata == json.loads(json.dumps(cat.metadata))

    def test_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            (tmp_path / d).mkdir()
            save_catalog(generate_synthetic(3, 10, seed=7), tmp_path / d / "c.csv")
        for name in ("c.csv", "c.W.csv", "c.H.csv", "c.meta.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestSynthetic:
    def test_noise_free_exact(self):
        cat = generate_synthetic(4, 30, seed=0)
        assert matrix_cost(cat.counts, cat.W, cat.H) == pytest.approx(0.0, abs=1e-12)

    def test_columns_sum_to_one(self):
        cat = generate_synthetic(6, 20, seed=3)
        np.testing.assert_allclose(cat.W.sum(axis=0), 1.0, atol=1e-12)

    def test_poisson_integer(self):
        cat = generate_synthetic(4, 30, seed=0, noise="poisson")
        np.testing.assert_array_equal(cat.counts, np.round(cat.counts))

    def test_real_data_scale(self):
        cat = generate_synthetic(12, 560, seed=0)
        assert cat.shape == (96, 560) and cat.H.shape == (12, 560)
        assert cat.labels == mutation_categories()

    def test_mean_mutations(self):
        cat = generate_synthetic(5, 2000, seed=0, mutations_per_sample=500.0)
        assert cat.counts.sum(axis=0).mean() == pytest.approx(500.0, rel=0.05)

    def test_metadata(self):
        cat = generate_synthetic(2, 5, seed=9, noise="poisson")
        assert cat.metadata["seed"] == 9 and cat.metadata["noise"] == "poisson"

    @pytest.mark.parametrize("kwargs", [dict(k=0, n=5), dict(k=6, n=5), dict(k=2, n=5, noise="gauss"),
                                        dict(k=2, n=5, alpha=0.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            generate_synthetic(**kwargs)

    def test_subset(self):
        cat = generate_synthetic(2, 6, seed=0)
        sub = cat.subset([1, 4])
        assert sub.sample_ids == ["S2", "S5"]
        np.testing.assert_array_equal(sub.H, cat.H[:, [1, 4]])
        assert isinstance(sub, MutationCatalog)


class TestSplitPlan:
    @given(st.integers(5, 200), st.integers(2, 5), st.integers(0, 1000))
    def test_partition(self, n, folds, seed):
        plan = make_split_plan(n, folds, seed)
        tests = np.concatenate(plan.test_indices)
        np.testing.assert_array_equal(np.sort(tests), np.arange(n))
        for fold in range(folds):
            train, test = plan.split(fold)
            assert not set(train) & set(test)
            assert len(train) + len(test) == n
            assert abs(len(test) - n / folds) < 1

    def test_seed_changes_folds_not_union(self):
        a, b = make_split_plan(50, 5, 0), make_split_plan(50, 5, 1)
        assert any(not np.array_equal(x, y) for x, y in zip(a.test_indices, b.test_indices))
        np.testing.assert_array_equal(np.sort(np.concatenate(a.test_indices)),
                                      np.sort(np.concatenate(b.test_indices)))

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            make_split_plan(10, 1)
        with pytest.raises(ConfigurationError):
            make_split_plan(3, 5)
