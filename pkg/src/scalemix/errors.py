"""Exception types shared across the package."""


class ScalemixError(Exception):
    """Base class for all package-specific errors."""


class NotDecomposable(ScalemixError):
    """Graph does not admit a perfect elimination ordering."""


class NoLegalMove(ScalemixError):
    """No single-edge perturbation preserves decomposability."""


class IllegalMovePair(ScalemixError):
    """Two graphs do not differ by exactly one edge, or one is not decomposable."""


class InvalidParams(ScalemixError):
    """Distribution parameters outside the admissible region."""


class NonPositiveInput(ScalemixError):
    """Argument must be strictly positive."""


class NonPdScale(ScalemixError):
    """Scale matrix is not symmetric positive definite."""


class NonPositiveScale(ScalemixError):
    """Margin scale must be strictly positive."""


class IllConditionedBlock(ScalemixError):
    """Clique/separator block too ill-conditioned for reliable determinants."""


class TooFewSamples(ScalemixError):
    """Not enough observations for the requested diagnostic."""


class EmptySampleSet(ScalemixError):
    """Summary requested from zero posterior samples."""


class DimensionMismatch(ScalemixError):
    """Matrix dimensions disagree."""


class NotDiagonallyDominant(ScalemixError):
    """Banded precision parameters violate diagonal dominance."""


class NotPositiveDefinite(ScalemixError):
    """Matrix modification breaks positive definiteness."""


class ParseError(ScalemixError):
    """Malformed input file; message carries row/column context."""


class ConstantColumn(ScalemixError):
    """Data column has zero variance."""


class SchemaMismatch(ScalemixError):
    """Data contents disagree with the declared column schema."""


class ChainError(ScalemixError):
    """MCMC failure, wrapped with the sweep index where it occurred."""
