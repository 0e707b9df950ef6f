"""rngaudit: randomness tests plus a three-level audit of their p-values."""

from ._version import __version__
from .bitstream import (
    BitSource,
    ConfigError,
    FileSource,
    GeneratorSpec,
    InsufficientInputError,
    MtSource,
    MtState,
    Sha1Source,
    make_source,
    mt_next_word,
    parse_generator,
    sha1_block,
    stream_seed32,
)
from .harness import (
    Categorization,
    HarnessReport,
    InapplicableTestError,
    TESTS,
    TwoLevelResult,
    build_categories,
    level2_count,
    level3_gof,
    run_three_level,
    run_two_level,
    uniformity_gof,
)
from .nist import TestDescriptor, TestOutcome, WalkSummary

__all__ = [
    "__version__",
    "BitSource",
    "Categorization",
    "ConfigError",
    "FileSource",
    "GeneratorSpec",
    "HarnessReport",
    "InapplicableTestError",
    "InsufficientInputError",
    "MtSource",
    "MtState",
    "Sha1Source",
    "TESTS",
    "TestDescriptor",
    "TestOutcome",
    "TwoLevelResult",
    "WalkSummary",
    "build_categories",
    "level2_count",
    "level3_gof",
    "make_source",
    "mt_next_word",
    "parse_generator",
    "run_three_level",
    "run_two_level",
    "sha1_block",
    "stream_seed32",
    "uniformity_gof",
]
