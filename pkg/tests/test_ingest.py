"""Dataset parsing, unit conversion, and exclusion handling."""

import math

import pytest
from hypothesis import given, strategies as st

from ppiaffinity import (
    DatasetValidationError,
    DataWarning,
    ParseError,
    apply_exclusions,
    default_exclusions_path,
    kd_to_pkd,
    load_exclusions,
    parse_dataset,
)
from ppiaffinity.ingest import Complex, Dataset, placeholder_pmid


CSV_HEADER = "id,chains,pkd,kd_molar,pmid\n"


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestKdToPkd:
    def test_nanomolar(self):
        assert kd_to_pkd(1e-9) == 9.0

    def test_one_molar(self):
        assert kd_to_pkd(1.0) == 0.0

    def test_micromolar(self):
        # high-precision oracle: -log10(3.2e-6)
        assert kd_to_pkd(3.2e-6) == pytest.approx(5.494850021680094, abs=1e-12)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            kd_to_pkd(bad)

    @given(st.floats(min_value=0.0, max_value=15.0, allow_nan=False))
    def test_roundtrip(self, p):
        assert kd_to_pkd(10.0 ** (-p)) == pytest.approx(p, abs=1e-12)


class TestParseCsv:
    def test_two_rows(self, tmp_path):
        path = write(
            tmp_path,
            CSV_HEADER
            + "1ao7,ACDEF;GHIKL,9.0,,PM1\n"
            + "1bd2,MNPQR,,1e-6,PM2\n",
        )
        ds = parse_dataset(path, format="csv")
        assert len(ds) == 2
        assert ds.complexes[0].chains == ["ACDEF", "GHIKL"]
        assert ds.complexes[1].pkd == pytest.approx(6.0)
        assert ds.complexes[1].pmid == "PM2"

    def test_duplicate_id_names_both_rows(self, tmp_path):
        rows = [
            "a1,ACD,7.0,,PM1",
            "1ao7,ACD,7.0,,PM1",
            "a3,ACD,7.0,,PM1",
            "a4,ACD,7.0,,PM1",
            "a5,ACD,7.0,,PM1",
            "1ao7,ACD,7.0,,PM1",
        ]
        path = write(tmp_path, CSV_HEADER + "\n".join(rows) + "\n")
        with pytest.raises(DatasetValidationError) as err:
            parse_dataset(path)
        message = str(err.value)
        assert "1ao7" in message
        assert "3" in message and "7" in message

    def test_invalid_residue_named(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACDB,7.0,,PM1\n")
        with pytest.raises(ParseError) as err:
            parse_dataset(path)
        assert "'B'" in str(err.value)

    def test_lowercase_uppercased(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,acdef,7.0,,PM1\n")
        ds = parse_dataset(path)
        assert ds.complexes[0].chains == ["ACDEF"]

    def test_x_residue_accepted(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACXDE,7.0,,PM1\n")
        assert parse_dataset(path).complexes[0].chains == ["ACXDE"]

    def test_agreeing_pkd_and_kd(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,9.0,1e-9,PM1\n")
        assert parse_dataset(path).complexes[0].pkd == 9.0

    def test_disagreeing_pkd_and_kd_rejected(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,9.1,1e-9,PM1\n")
        with pytest.raises(ParseError) as err:
            parse_dataset(path)
        assert "disagree" in str(err.value)

    def test_neither_affinity_column(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,,,PM1\n")
        with pytest.raises(ParseError):
            parse_dataset(path)

    def test_missing_pmid_placeholder(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,7.0,,\n")
        assert parse_dataset(path).complexes[0].pmid == placeholder_pmid("x1")

    def test_out_of_range_pkd_warns(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,25.0,,PM1\n")
        with pytest.warns(DataWarning):
            ds = parse_dataset(path)
        assert ds.complexes[0].pkd == 25.0

    def test_missing_required_column(self, tmp_path):
        path = write(tmp_path, "id,chains,pkd,pmid\nx1,ACD,7.0,PM1\n")
        with pytest.raises(ParseError) as err:
            parse_dataset(path)
        assert "kd_molar" in str(err.value)

    def test_extra_columns_become_tags(self, tmp_path):
        path = write(
            tmp_path,
            "id,chains,pkd,kd_molar,pmid,source\nx1,ACD,7.0,,PM1,tcr3d\n",
        )
        assert parse_dataset(path).complexes[0].tags == {"source": "tcr3d"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_dataset(tmp_path / "nope.csv")

    def test_deterministic(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,7.0,,PM1\nx2,GHI,8.0,,PM2\n")
        assert parse_dataset(path) == parse_dataset(path)


class TestParseJsonl:
    def test_basic(self, tmp_path):
        path = write(
            tmp_path,
            '{"id": "x1", "chains": ["ACD", "EFG"], "pkd": 7.0, "pmid": "PM1"}\n'
            '{"id": "x2", "chains": ["HIK"], "kd_molar": 1e-8, "pmid": "PM2"}\n',
            name="data.jsonl",
        )
        ds = parse_dataset(path)  # format inferred from suffix
        assert len(ds) == 2
        assert ds.complexes[0].chains == ["ACD", "EFG"]
        assert ds.complexes[1].pkd == pytest.approx(8.0)

    def test_bad_json_line_numbered(self, tmp_path):
        path = write(
            tmp_path,
            '{"id": "x1", "chains": ["ACD"], "pkd": 7.0, "pmid": "PM1"}\n{oops\n',
            name="data.jsonl",
        )
        with pytest.raises(ParseError) as err:
            parse_dataset(path, format="jsonl")
        assert err.value.line == 2

    def test_extra_keys_become_tags(self, tmp_path):
        path = write(
            tmp_path,
            '{"id": "x1", "chains": ["ACD"], "pkd": 7.0, "pmid": "PM1", "db": "ppb"}\n',
            name="data.jsonl",
        )
        assert parse_dataset(path).complexes[0].tags == {"db": "ppb"}

    def test_unknown_format(self, tmp_path):
        path = write(tmp_path, CSV_HEADER + "x1,ACD,7.0,,PM1\n")
        with pytest.raises(ValueError):
            parse_dataset(path, format="parquet")


def _toy_dataset(ids):
    return Dataset(
        complexes=[
            Complex(id=cid, chains=["ACD"], pkd=7.0, pmid="PM1") for cid in ids
        ],
        name="toy",
    )


class TestExclusions:
    def test_removes_listed(self):
        ds = apply_exclusions(_toy_dataset(["a", "b", "c"]), ["b"])
        assert ds.ids() == ["a", "c"]

    def test_empty_list_identity(self):
        ds = apply_exclusions(_toy_dataset(["a"]), [])
        assert ds.ids() == ["a"]

    def test_missing_id_warns(self):
        with pytest.warns(DataWarning, match="'z'"):
            ds = apply_exclusions(_toy_dataset(["a"]), ["z"])
        assert ds.ids() == ["a"]

    def test_preserves_survivor_order(self):
        ids = [f"x{k}" for k in range(20)]
        ds = apply_exclusions(_toy_dataset(ids), ["x3", "x11"])
        survivors = [cid for cid in ids if cid not in ("x3", "x11")]
        assert ds.ids() == survivors

    def test_never_removes_more_than_listed(self):
        ds = apply_exclusions(_toy_dataset(["a", "b", "c", "d"]), ["b", "d"])
        assert len(ds) == 2

    def test_exclusion_file_parsing(self, tmp_path):
        path = write(tmp_path, "# comment\n9eji\n9ejg  # trailing\n\n9ejh\n", name="ex.txt")
        assert load_exclusions(path) == ["9eji", "9ejg", "9ejh"]

    def test_bundled_default_list(self):
        assert load_exclusions(default_exclusions_path()) == ["9eji", "9ejg", "9ejh"]
