"""Decoding-free candidate selection: rank candidate pools from one step of logits."""

from ._lgsel import (  # noqa: F401
    Candidate,
    CandidatePool,
    LgselError,
    LogitFrame,
    Method,
    Ranking,
    RankEntry,
    ScoreVector,
    StubProvider,
    aggregate,
    attach_masks,
    build_pool_reference,
    decode_lgts,
    encode_lgts,
    extract_choice,
    head_letters,
    load_dataset_and_eval,
    load_pool,
    read_frame_file,
    run_decode_eval,
    save_pool,
    score_pool,
    score_pool_naive,
    top_k,
    validate_frame,
    validate_pool,
    write_lgts,
)

__all__ = [name for name in dir() if not name.startswith("_")]
