"""
Catalog loading and validation.
"""
import copy
import json

import pytest

from nilreg.catalog import get_group, load_catalog
from nilreg.errors import CatalogInconsistencyError, CatalogLookupError


def _write(tmp_path, payload):
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestShippedCatalog:
    """The catalog that ships with the package."""

    def test_expected_groups(self, catalog):
        for name in ("Z1", "Z2", "Z3", "Z4", "N3", "N4", "N4_a12zero", "H5", "N3xN3"):
            assert name in catalog.names(), f"{name} missing from {catalog.names()}"

    def test_content_hash_is_sha256(self, catalog):
        assert len(catalog.content_hash) == 64
        int(catalog.content_hash, 16)

    def test_group_shortcut(self):
        assert get_group("N3").fset == ("a", "b")

    def test_letters_start_with_identity(self, n3):
        names = [letter.name for letter in n3.letters()]
        assert names == ["e", "a", "b", "a^-1", "b^-1"]

    def test_n3xn3_declares_three_central_candidates(self, catalog):
        spec = catalog.group("N3xN3")
        assert [c.element_name for c in spec.central_candidates] == ["c1", "c2", "c12"]
        assert spec.center_rank == 2


class TestLookups:
    """Lookup failures carry the available names."""

    def test_unknown_group(self, catalog):
        with pytest.raises(CatalogLookupError) as exc:
            catalog.group("N7")
        assert "N3" in exc.value.context["available"]

    def test_unknown_subgroup(self, n3):
        with pytest.raises(CatalogLookupError):
            n3.subgroup("missing")

    def test_unknown_witness(self, n3):
        with pytest.raises(CatalogLookupError):
            n3.witness("missing")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CatalogLookupError):
            load_catalog(tmp_path / "nope.json")


class TestInvalidCatalogs:
    """Malformed catalogs are rejected as a whole."""

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CatalogInconsistencyError):
            load_catalog(path)

    def test_duplicate_group(self, tmp_path, raw_catalog):
        payload = copy.deepcopy(raw_catalog)
        payload["groups"].append(copy.deepcopy(payload["groups"][0]))
        with pytest.raises(CatalogInconsistencyError):
            load_catalog(_write(tmp_path, payload))

    def test_dangling_stabilizer(self, tmp_path, raw_catalog):
        payload = copy.deepcopy(raw_catalog)
        n3 = next(g for g in payload["groups"] if g["name"] == "N3")
        n3["witnesses"][0]["stabilizer"] = "no_such_subgroup"
        with pytest.raises(CatalogInconsistencyError) as exc:
            load_catalog(_write(tmp_path, payload))
        assert "N3" in exc.value.message

    def test_bad_diagonal(self, tmp_path, raw_catalog):
        payload = copy.deepcopy(raw_catalog)
        z1 = next(g for g in payload["groups"] if g["name"] == "Z1")
        z1["generators"][0]["matrices"] = [[[2, 1], [0, 1]]]
        with pytest.raises(CatalogInconsistencyError):
            load_catalog(_write(tmp_path, payload))

    def test_hash_tracks_content(self, tmp_path, raw_catalog, catalog):
        payload = copy.deepcopy(raw_catalog)
        payload["version"] = payload["version"] + "-modified"
        assert load_catalog(_write(tmp_path, payload)).content_hash != catalog.content_hash
