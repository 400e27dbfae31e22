"""File formats: logits JSONL, image containers, profiles, costs, outcomes."""

import json

import numpy as np
import pytest
from PIL import Image

from mood import (
    CalibrationProfile,
    CodecId,
    DetectionOutcome,
    ExitCostModel,
    InputError,
    MagicError,
    ParseError,
    ScoreFunctionId,
    SchemaError,
    TruncatedError,
)
from mood.datastore import (
    LogitsFileHeader,
    read_cost_model,
    read_images,
    read_logits,
    read_outcomes,
    read_profile,
    write_cost_model,
    write_image_container,
    write_logits,
    write_outcomes,
    write_profile,
)

from conftest import constant_image, noise_image, record_of


class TestLogitsFile:
    def _write(self, path, records, k=2, c=3):
        write_logits(path, LogitsFileHeader(k=k, num_classes=c, model_tag="t"), records)

    def test_round_trip(self, tmp_path, rng):
        recs = [record_of(rng.normal(size=(2, 3)) * 100, sample_id=f"s{i}",
                          label=i % 3)
                for i in range(4)]
        path = tmp_path / "logits.jsonl"
        self._write(path, recs)
        header, stream = read_logits(path)
        back = list(stream)
        assert header.k == 2 and header.num_classes == 3 and header.model_tag == "t"
        assert [r.sample_id for r in back] == [r.sample_id for r in recs]
        assert [r.label for r in back] == [r.label for r in recs]
        for a, b in zip(back, recs):
            assert np.array_equal(a.logits, b.logits)

    def test_header_and_count(self, tmp_path):
        path = tmp_path / "logits.jsonl"
        recs = [record_of([[0.0, 0.0, 0.0]] * 2, sample_id=str(i)) for i in range(3)]
        self._write(path, recs)
        header, stream = read_logits(path)
        assert len(list(stream)) == 3

    def test_shape_mismatch_names_record(self, tmp_path):
        path = tmp_path / "logits.jsonl"
        lines = [
            '{"k":5,"num_classes":2,"model_tag":""}',
            '{"id":"a","label":null,"logits":[[0,0],[0,0],[0,0],[0,0],[0,0]]}',
            '{"id":"b","label":null,"logits":[[0,0],[0,0],[0,0],[0,0]]}',
        ]
        path.write_text("\n".join(lines) + "\n")
        header, stream = read_logits(path)
        with pytest.raises(SchemaError, match="line 3"):
            list(stream)

    def test_malformed_line_names_line(self, tmp_path):
        path = tmp_path / "logits.jsonl"
        path.write_text('{"k":1,"num_classes":1,"model_tag":""}\n{oops\n')
        header, stream = read_logits(path)
        with pytest.raises(ParseError, match="line 2"):
            list(stream)

    def test_empty_file_is_header_error(self, tmp_path):
        path = tmp_path / "logits.jsonl"
        path.write_text("")
        with pytest.raises(ParseError):
            read_logits(path)

    def test_header_missing_fields(self, tmp_path):
        path = tmp_path / "logits.jsonl"
        path.write_text('{"k":1}\n')
        with pytest.raises(SchemaError):
            read_logits(path)

    def test_nonfinite_logits_rejected(self, tmp_path):
        path = tmp_path / "logits.jsonl"
        path.write_text('{"k":1,"num_classes":1,"model_tag":""}\n'
                        '{"id":"a","label":null,"logits":[[NaN]]}\n')
        header, stream = read_logits(path)
        with pytest.raises(SchemaError, match="line 2"):
            list(stream)

    def test_full_precision_round_trip(self, tmp_path):
        values = [[np.pi, np.e, 1.0 / 3.0]]
        rec = record_of(values, sample_id="x")
        path = tmp_path / "logits.jsonl"
        self._write(path, [rec], k=1, c=3)
        _, stream = read_logits(path)
        assert np.array_equal(next(iter(stream)).logits, np.asarray(values))


class TestImageContainer:
    def test_round_trip_and_index_ids(self, tmp_path, rng):
        imgs = [constant_image(7, size=4), noise_image(rng, size=3),
                constant_image(0, size=2, channels=1)]
        path = tmp_path / "imgs.bin"
        write_image_container(path, imgs)
        back = list(read_images(path))
        assert [sid for sid, _ in back] == ["0", "1", "2"]
        for (_, a), b in zip(back, imgs):
            assert a == b

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "imgs.bin"
        path.write_bytes(b"WRONGMAG" + bytes(16))
        with pytest.raises(MagicError):
            list(read_images(path))

    def test_truncated_payload(self, tmp_path, rng):
        path = tmp_path / "imgs.bin"
        write_image_container(path, [noise_image(rng, size=8)])
        data = path.read_bytes()
        path.write_bytes(data[:-5])
        with pytest.raises(TruncatedError):
            list(read_images(path))

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "imgs.bin"
        path.write_bytes(b"MOODIMG1" + b"\x01\x00")
        with pytest.raises(TruncatedError):
            list(read_images(path))

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "imgs.bin"
        write_image_container(path, [constant_image(1, size=2)])
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(SchemaError):
            list(read_images(path))


class TestPngDirectory:
    def test_lexicographic_stems(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
        for name in ("b.png", "a.png", "c.png"):
            Image.fromarray(arr, "RGB").save(tmp_path / name)
        ids = [sid for sid, _ in read_images(tmp_path)]
        assert ids == ["a", "b", "c"]

    def test_pixels_survive_decode(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(6, 4, 3), dtype=np.uint8)
        Image.fromarray(arr, "RGB").save(tmp_path / "x.png")
        [(sid, img)] = list(read_images(tmp_path))
        assert sid == "x"
        assert np.array_equal(img.to_array(), arr)

    def test_grayscale_kept_single_channel(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(6, 4), dtype=np.uint8)
        Image.fromarray(arr, "L").save(tmp_path / "g.png")
        [(_, img)] = list(read_images(tmp_path))
        assert img.channels == 1

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(InputError):
            list(read_images(tmp_path))

    def test_undecodable_png(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"\x89PNG\r\n\x1a\njunk")
        from mood import DecodeError
        with pytest.raises(DecodeError):
            list(read_images(tmp_path))


def make_profile(score_fn=None):
    return CalibrationProfile(
        k=3,
        num_classes=7,
        energy_means=(1.0 / 3.0, -2.25, np.pi),
        l_max_bits=25376,
        gamma=-0.1234567890123456789,
        codec=CodecId.DEFLATE_PNG,
        score_fn=score_fn or ScoreFunctionId.adjusted_energy(),
        target_tpr=0.95,
        created_from=100,
    )


class TestProfileFile:
    def test_round_trip_identity(self, tmp_path):
        prof = make_profile()
        path = tmp_path / "profile.json"
        write_profile(prof, path)
        assert read_profile(path) == prof

    def test_round_trip_with_odin_temperature(self, tmp_path):
        prof = make_profile(ScoreFunctionId.odin(1000.0))
        path = tmp_path / "profile.json"
        write_profile(prof, path)
        back = read_profile(path)
        assert back == prof
        assert back.score_fn.temperature == 1000.0

    def test_field_names_match_schema(self, tmp_path):
        path = tmp_path / "profile.json"
        write_profile(make_profile(), path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"k", "num_classes", "energy_means", "l_max_bits",
                            "gamma", "codec", "score_fn", "target_tpr",
                            "created_from"}

    def test_missing_gamma_is_schema_error(self, tmp_path):
        path = tmp_path / "profile.json"
        write_profile(make_profile(), path)
        doc = json.loads(path.read_text())
        del doc["gamma"]
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="gamma"):
            read_profile(path)

    def test_wrong_energy_means_length_is_schema_error(self, tmp_path):
        path = tmp_path / "profile.json"
        write_profile(make_profile(), path)
        doc = json.loads(path.read_text())
        doc["energy_means"] = doc["energy_means"][:2]
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            read_profile(path)

    def test_write_is_byte_deterministic(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_profile(make_profile(), p1)
        write_profile(make_profile(), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestCostModelFile:
    def test_round_trip(self, tmp_path):
        costs = ExitCostModel((0.267e8, 0.516e8, 0.689e8, 0.884e8, 1.051e8))
        path = tmp_path / "costs.json"
        write_cost_model(costs, path)
        assert read_cost_model(path) == costs

    def test_non_increasing_rejected(self, tmp_path):
        path = tmp_path / "costs.json"
        path.write_text('{"k": 2, "cumulative_flops": [2.0, 1.0]}')
        with pytest.raises(SchemaError):
            read_cost_model(path)

    def test_length_mismatch_rejected(self, tmp_path):
        path = tmp_path / "costs.json"
        path.write_text('{"k": 3, "cumulative_flops": [1.0, 2.0]}')
        with pytest.raises(SchemaError):
            read_cost_model(path)


class TestOutcomesFile:
    def test_round_trip(self, tmp_path):
        outs = [
            DetectionOutcome("a", "in", 2, 1.5, 4, 200.0),
            DetectionOutcome("b", "out", 1, -0.25, None, 100.0),
        ]
        path = tmp_path / "outcomes.jsonl"
        write_outcomes(path, outs)
        assert read_outcomes(path) == outs

    def test_json_field_names(self, tmp_path):
        path = tmp_path / "outcomes.jsonl"
        write_outcomes(path, [DetectionOutcome("a", "in", 1, 0.5, 2, 10.0)])
        row = json.loads(path.read_text().strip())
        assert set(row) == {"id", "decision", "exit", "score", "pred", "flops"}

    def test_full_precision_scores(self, tmp_path):
        score = -0.123456789012345678
        path = tmp_path / "outcomes.jsonl"
        write_outcomes(path, [DetectionOutcome("a", "out", 1, score, None, 1.0)])
        assert read_outcomes(path)[0].score == score
