import json
import math
import os
import pathlib
import struct

import pytest

import lgsel

DATA = pathlib.Path(os.environ.get("LGSEL_TEST_DATA_DIR", pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"))


def pool_of(*token_lists):
    return lgsel.CandidatePool([lgsel.Candidate(f"c{i}", f"c{i}", list(t)) for i, t in enumerate(token_lists)])


def test_two_token_arithmetic():
    values = [0.0] * 8
    values[2], values[5] = 1.0, 3.0
    frame = lgsel.LogitFrame(values)
    cand = lgsel.Candidate("x", "x", [2, 5])
    assert lgsel.aggregate(frame, cand, lgsel.Method.first()) == 1.0
    assert lgsel.aggregate(frame, cand, lgsel.Method.average()) == 2.0
    assert lgsel.aggregate(frame, cand, lgsel.Method.sum()) == 4.0
    assert lgsel.aggregate(frame, cand, lgsel.Method.kth(2)) == 3.0


def test_softmax_and_ranking():
    frame = lgsel.LogitFrame([math.log(2.0), 0.0])
    pool = pool_of([0], [1])
    scores = lgsel.score_pool(frame, pool, lgsel.Method.first())
    assert scores.probabilities[0] == pytest.approx(2 / 3, abs=1e-7)
    assert lgsel.top_k(scores, pool, 1).ids() == ["c0"]


def test_errors_are_value_errors():
    frame = lgsel.LogitFrame([0.0, float("nan")])
    with pytest.raises(lgsel.LgselError, match="non-finite"):
        lgsel.validate_frame(frame)
    with pytest.raises(ValueError, match="kth-out-of-range"):
        lgsel.aggregate(lgsel.LogitFrame([0.0, 1.0]), lgsel.Candidate("x", "x", [1]), lgsel.Method.kth(2))


def test_lgts_matches_struct_layout(tmp_path):
    values = [1.0, -2.5, 0.0]
    raw = b"LGTS" + struct.pack("<HHII", 1, 0, 3, 9) + struct.pack("<3f", *values)
    frame = lgsel.decode_lgts(raw)
    assert frame.values == values and frame.step == 9
    assert lgsel.encode_lgts(frame) == raw
    (tmp_path / "f.lgts").write_bytes(raw)
    assert lgsel.read_frame_file(tmp_path / "f.lgts").values == values


def test_pool_build_save_load(tmp_path):
    cands = tmp_path / "c.jsonl"
    cands.write_text('{"id":"a","text":"race track"}\n{"id":"b","text":"populated areas"}\n')
    pool = lgsel.build_pool_reference(cands)
    lgsel.save_pool(pool, tmp_path / "p.jsonl")
    assert lgsel.load_pool(tmp_path / "p.jsonl") == pool
    masks = tmp_path / "m.jsonl"
    masks.write_text('{"id":"a","positions":[2]}\n')
    assert lgsel.attach_masks(pool, masks).candidates[0].mask == [2]


def test_extract_choice():
    pool = lgsel.CandidatePool(
        [lgsel.Candidate(i, t, [n]) for n, (i, t) in enumerate(zip("abcde", ["race track", "populated areas", "the desert", "apartment", "roadblock"]))]
    )
    assert lgsel.extract_choice("The answer is (B) populated areas.", pool) == "b"
    assert lgsel.extract_choice("B", pool) == "b"
    assert lgsel.extract_choice("nothing here", pool) is None


def test_stub_eval_and_decode_eval(tmp_path):
    report = lgsel.run_decode_eval(DATA / "decode_dataset.jsonl", DATA / "decode_outputs.jsonl")
    assert report["value"] == pytest.approx(0.7)
    first = lgsel.load_dataset_and_eval(DATA / "decode_dataset.jsonl", "average", seed=5)
    again = lgsel.load_dataset_and_eval(DATA / "decode_dataset.jsonl", "average", seed=5, workers=3)
    assert first["count"] == 10 and first["metric"] == "accuracy"
    assert first["value"] == again["value"]


def test_stub_frames_are_deterministic():
    a = lgsel.StubProvider(100, 1).get_frame("q", step=2)
    b = lgsel.StubProvider(100, 1).get_frame("q", step=2)
    assert a == b
    assert a.values != lgsel.StubProvider(100, 1).get_frame("q", step=3).values
