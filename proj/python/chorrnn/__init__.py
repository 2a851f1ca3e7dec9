"""Python interface to the chorrnn C++ core."""

from ._chorrnn import (
    DataError,
    Model,
    MotionSequence,
    NumericalError,
    SessionError,
    SessionStore,
    ShapeError,
    animation_json,
    branch_direction,
    compare_heads,
    gradcheck,
    mdn,
    naive_extrapolate,
    param_count,
    read_corpus,
    read_sequence,
    rollout,
    run_cli,
    synth_branching,
    synth_lissajous,
    train,
    variance_profile,
    write_sequence,
)

__all__ = [
    "DataError",
    "Model",
    "MotionSequence",
    "NumericalError",
    "SessionError",
    "SessionStore",
    "ShapeError",
    "animation_json",
    "branch_direction",
    "compare_heads",
    "gradcheck",
    "mdn",
    "naive_extrapolate",
    "param_count",
    "read_corpus",
    "read_sequence",
    "rollout",
    "run_cli",
    "synth_branching",
    "synth_lissajous",
    "train",
    "variance_profile",
    "write_sequence",
]
