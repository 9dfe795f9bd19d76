"""Evolving quantum circuits with gene expression programming.

Subpackages split along the natural seams: a fitness-agnostic evolution
engine, an arithmetic-regression testbed for it, a statevector simulator
with a circuit/gene bridge, Pauli-sum Hamiltonians and graph problems,
exhaustive oracles for small instances, and the fitness/optimizer layer
that ties them together. The command line entry point lives in
``gepcirc.cli``.
"""

from gepcirc.engine import (
    ConfigError,
    EvolutionConfig,
    EvolutionResult,
    FitnessEvaluationError,
    Gene,
    GenerationStats,
    PrimitiveSet,
    decode,
    run_evolution,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EvolutionConfig",
    "EvolutionResult",
    "FitnessEvaluationError",
    "Gene",
    "GenerationStats",
    "PrimitiveSet",
    "decode",
    "run_evolution",
    "__version__",
]
