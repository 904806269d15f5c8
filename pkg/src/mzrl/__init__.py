"""Modified zero-run-length coding for QKD bit sifting.

Submodules: ``theory`` (closed forms), ``optimizer`` (alphabet-size solvers),
``codec`` and ``container`` (encoder, decoder, file format), ``wire`` and
``sifter`` (two-party session simulator), ``recommend`` and ``sweep``.
"""

__version__ = "0.1.0"

from .codec import CorruptStreamError, Decoder, Encoder, decode_codeword, encode_bits
from .container import CodewordStream, decode_stream, encode_stream
from .optimizer import OptimizerResult, locate_minimum, solve_constrained, solve_unconstrained
from .sifter import ProtocolError, SiftingReport, run_session, simulate_session
from .theory import (
    CodeParams,
    DomainError,
    KeyBudget,
    LinkBudget,
    binary_entropy,
    count_rate,
    expected_codelength,
    key_consumption,
)

__all__ = [
    "CodeParams", "CodewordStream", "CorruptStreamError", "Decoder", "DomainError",
    "Encoder", "KeyBudget", "LinkBudget", "OptimizerResult", "ProtocolError",
    "SiftingReport", "binary_entropy", "count_rate", "decode_codeword", "decode_stream",
    "encode_bits", "encode_stream", "expected_codelength", "key_consumption",
    "locate_minimum", "run_session", "simulate_session", "solve_constrained",
    "solve_unconstrained",
]
