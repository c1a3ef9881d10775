"""Exception hierarchy.

Every declared failure mode derives from :class:`FunQGError`, so callers (and
the command line) can catch one type and report a stable ``code``.
"""


class FunQGError(Exception):
    code = "FunQGError"


class SmilesError(FunQGError, ValueError):
    """A SMILES string could not be read; ``position`` is a 0-based offset."""

    code = "SmilesError"

    def __init__(self, message, position=None, smiles=None):
        self.position = position
        self.smiles = smiles
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class UnknownCharacter(SmilesError):
    code = "UnknownCharacter"


class UnterminatedBracket(SmilesError):
    code = "UnterminatedBracket"


class UnterminatedBranch(SmilesError):
    code = "UnterminatedBranch"


class BadRingDigit(SmilesError):
    code = "BadRingDigit"


class UnclosedRing(SmilesError):
    code = "UnclosedRing"


class DanglingBond(SmilesError):
    code = "DanglingBond"


class ValenceImpossible(SmilesError):
    code = "ValenceImpossible"


class UnsupportedFeature(SmilesError):
    code = "UnsupportedFeature"


class EmptyMolecule(FunQGError, ValueError):
    code = "EmptyMolecule"


class OverlappingFGs(FunQGError, ValueError):
    code = "OverlappingFGs"


class FGNotComponent(FunQGError, RuntimeError):
    code = "FGNotComponent"


class EmptyDataset(FunQGError, ValueError):
    code = "EmptyDataset"


class DegenerateSplit(FunQGError, ValueError):
    code = "DegenerateSplit"


class ShapeMismatch(FunQGError, ValueError):
    code = "ShapeMismatch"


class NonFiniteValue(FunQGError, FloatingPointError):
    code = "NonFiniteValue"


class NonFiniteLoss(NonFiniteValue):
    code = "NonFiniteLoss"


class AllMasked(FunQGError, ValueError):
    code = "AllMasked"


class SingleClass(FunQGError, ValueError):
    code = "SingleClass"


class EmptyGraph(FunQGError, ValueError):
    code = "EmptyGraph"


class MissingColumn(FunQGError, KeyError):
    code = "MissingColumn"

    def __str__(self):
        return str(self.args[0]) if self.args else self.code


class ManifestMismatch(FunQGError, ValueError):
    code = "ManifestMismatch"
