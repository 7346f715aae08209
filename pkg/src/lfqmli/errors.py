"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`LfqaError`.  The CLI
maps :class:`InputError` to exit code 2 and :class:`NumericError` to exit
code 3, printing the class name as a machine-parsable tag.
"""


class LfqaError(Exception):
    exit_code = 1

    @property
    def tag(self) -> str:
        return type(self).__name__


class InputError(LfqaError, ValueError):
    exit_code = 2


class NumericError(LfqaError, ArithmeticError):
    exit_code = 3


# light-field ingestion / slicing
class MissingView(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class DecodeError(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


# feature extraction
class EmptyBlock(InputError):
    pass


class TooSmallMli(InputError):
    pass


class TooSmallImage(InputError):
    pass


class EmptySequence(InputError):
    pass


class TooFewValues(InputError):
    pass


# regression / evaluation
class EmptyTrainingSet(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class DegenerateInput(InputError):
    pass


class TooFewSamples(InputError):
    pass


class DidNotConverge(NumericError):
    pass


# files
class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicatePath(InputError):
    pass


class NonFiniteMos(InputError):
    pass


class PathMismatch(InputError):
    pass


class FormatVersionError(InputError):
    pass
