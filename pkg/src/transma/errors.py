"""Exception hierarchy.

``InputError`` subclasses describe bad user input (CLI exit code 2);
``ContractError`` subclasses describe violated internal contracts such as
shape or vocabulary mismatches (CLI exit code 3).
"""


class TransmaError(Exception):
    """Base class for all package errors."""


class InputError(TransmaError, ValueError):
    pass


class ContractError(TransmaError):
    pass


# SMILES
class SmilesError(InputError):
    pass


class IllegalCharacter(SmilesError):
    pass


class UnbalancedBracket(SmilesError):
    pass


class UnclosedRing(SmilesError):
    pass


class UnclosedBranch(SmilesError):
    pass


class ValenceUnsupported(SmilesError):
    pass


# fingerprints / similarity
class WidthMismatch(ContractError, ValueError):
    pass


# splitting
class DegenerateSplit(InputError):
    pass


class SingularDegree(InputError):
    pass


# tensors and models
class ShapeMismatch(ContractError, ValueError):
    pass


class MissingGrad(ContractError):
    pass


class UnknownToken(ContractError, KeyError):
    pass


class VocabMismatch(ContractError):
    pass


class AlignmentMismatch(ContractError):
    pass


class UntrainedScaler(ContractError):
    pass


class BatchTooSmall(ContractError, ValueError):
    pass


class EmptyBatch(ContractError, ValueError):
    pass


class CheckpointError(ContractError):
    pass


# datasets
class DuplicateId(InputError):
    pass


class BadNumber(InputError):
    pass


class UnparseableSmiles(InputError):
    pass


class ConfigError(InputError):
    pass
