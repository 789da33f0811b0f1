import pytest
import ujson

from equity_tune.data.ingest import ingest_jsonl
from equity_tune.fairness.schema import AttributeSchema
from equity_tune.util.exceptions import DataError

SCHEMA = AttributeSchema(
    attributes=["gender", "age"],
    groups={"gender": ["male", "female"], "age": ["young", "old"]},
)


def _record(i, **changes):
    row = {
        "id": f"r{i}",
        "features": [0.1 * i, 0.2, 0.3],
        "attributes": {
            "gender": ["male", "female"][i % 2],
            "age": ["young", "old"][i % 2],
        },
        "reference": [6, 7, 1],
        "labels": [i % 3],
    }
    row.update(changes)
    return row


def _write(path, rows):
    path.write_text("".join(ujson.dumps(r) + "\n" for r in rows))
    return path


class TestIngestJsonl:
    def test_single_record(self, tmp_path):
        path = _write(tmp_path / "one.jsonl", [_record(0)])
        dataset, dropped = ingest_jsonl(path, SCHEMA, vocab_size=10, feature_dim=3)
        assert dropped == 0
        assert len(dataset) == 1
        sample = dataset.samples[0]
        assert sample.id == "r0"
        assert sample.attributes == {"gender": "male", "age": "young"}
        assert dataset.schema.frequencies["gender"] == {"male": 1, "female": 0}

    def test_drops_records_missing_attributes(self, tmp_path):
        rows = [_record(i) for i in range(10)]
        rows[3]["attributes"] = {"gender": "male"}
        rows[7]["attributes"] = {"gender": None, "age": "old"}
        path = _write(tmp_path / "ten.jsonl", rows)
        dataset, dropped = ingest_jsonl(path, SCHEMA, vocab_size=10)
        assert (len(dataset), dropped) == (8, 2)
        assert "r3" not in [s.id for s in dataset.samples]

    def test_too_many_dropped(self, tmp_path):
        rows = [_record(i) for i in range(10)]
        for row in rows[:6]:
            row["attributes"] = {}
        with pytest.raises(DataError):
            ingest_jsonl(_write(tmp_path / "d.jsonl", rows), SCHEMA, vocab_size=10)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(DataError, match="no records"):
            ingest_jsonl(path, SCHEMA, vocab_size=10)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rows = [ujson.dumps(_record(0)), ujson.dumps(_record(1)), "{oops"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(DataError, match="bad.jsonl:3"):
            ingest_jsonl(path, SCHEMA, vocab_size=10)

    @pytest.mark.parametrize(
        "changes",
        [
            {"attributes": {"gender": "other", "age": "old"}},
            {"reference": []},
            {"reference": [6, 10]},
            {"reference": [6, -1]},
            {"features": [0.1, 0.2]},
        ],
    )
    def test_invalid_record(self, tmp_path, changes):
        path = _write(tmp_path / "r.jsonl", [_record(0), _record(1, **changes)])
        with pytest.raises(DataError, match="r.jsonl:2"):
            ingest_jsonl(path, SCHEMA, vocab_size=10, feature_dim=3)

    @pytest.mark.parametrize(
        "changes",
        [
            {"attributes": ["x"]},
            {"attributes": "male"},
            {"features": ["a", 0.2, 0.3]},
            {"features": [None, 0.2, 0.3]},
            {"features": 5},
            {"features": "123"},
            {"features": {"a": 1.0}},
            {"reference": 5},
            {"reference": [6, 1.5]},
        ],
    )
    def test_malformed_record_names_line(self, tmp_path, changes):
        path = _write(tmp_path / "rows.jsonl", [_record(0), _record(1, **changes)])
        with pytest.raises(DataError, match="rows.jsonl:2"):
            ingest_jsonl(path, SCHEMA, vocab_size=10)

    def test_missing_field(self, tmp_path):
        row = _record(0)
        del row["reference"]
        with pytest.raises(DataError, match="missing field reference"):
            ingest_jsonl(_write(tmp_path / "m.jsonl", [row]), SCHEMA, vocab_size=10)

    def test_default_ids(self, tmp_path):
        row = _record(0)
        del row["id"]
        path = _write(tmp_path / "n.jsonl", [row])
        dataset, _ = ingest_jsonl(path, SCHEMA, vocab_size=10)
        assert dataset.samples[0].id == "line1"
