"""Python bindings for the flatnet inference core."""

from ._flatnet import (
    DegenerateInputError,
    FormatError,
    IoError,
    NetworkSpec,
    ValidationError,
    auc,
    conv_valid,
    decode_weights,
    emit_source,
    emit_source_from_file,
    encode_weights,
    forward,
    image_to_input,
    lenet5_spec,
    maxpool_2x2,
    normalize_scale,
    predict,
    read_weights,
    sanitize_identifier,
    softmax,
    sum_product,
    write_weights,
)

__all__ = [
    "DegenerateInputError",
    "FormatError",
    "IoError",
    "NetworkSpec",
    "ValidationError",
    "auc",
    "conv_valid",
    "decode_weights",
    "emit_source",
    "emit_source_from_file",
    "encode_weights",
    "forward",
    "image_to_input",
    "lenet5_spec",
    "maxpool_2x2",
    "normalize_scale",
    "predict",
    "read_weights",
    "sanitize_identifier",
    "softmax",
    "sum_product",
    "write_weights",
]
