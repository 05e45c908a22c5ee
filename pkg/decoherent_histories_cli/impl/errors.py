from typing import List, Optional, Sequence, Tuple


# -------------------------------------------------------------------------
# VIOLATION RECORD

class Violation:
    """one failed structural check: what kind, which members, by how much"""

    def __init__(self, kind: str, members: Tuple[int, ...] = (), deviation: float = 0.0, detail: str = ''):
        self.kind = kind
        self.members = tuple(members)
        self.deviation = float(deviation)
        self.detail = detail

    def __repr__(self):
        return "Violation(kind={!r}, members={!r}, deviation={:.3e})".format(
            self.kind, self.members, self.deviation)

    def describe(self) -> str:
        where = ''
        if self.members:
            where = ' members ' + ','.join(str(m) for m in self.members)
        text = "{}{}: deviation {:.3e}".format(self.kind, where, self.deviation)
        if self.detail:
            text += " ({})".format(self.detail)
        return text


# -------------------------------------------------------------------------
# EXCEPTIONS

class HistoriesError(Exception):
    """base of every error raised by the engine and the cli"""


class ValidationError(HistoriesError):
    """raise this when an input fails a structural or schema check"""

    def __init__(self, message: str, violations: Optional[Sequence[Violation]] = None):
        super().__init__(message)
        self.violations: List[Violation] = list(violations or [])


class NotHermitianError(ValidationError):
    def __init__(self, max_asymmetry: float, tolerance: float):
        super().__init__("operator is not hermitian: max |A - A^dag| = {:.3e} > {:.1e}".format(
            max_asymmetry, tolerance),
                         [Violation('hermitian', deviation=max_asymmetry)])
        self.max_asymmetry = max_asymmetry


class NotProjectorError(ValidationError):
    def __init__(self, deviation: float, tolerance: float):
        super().__init__("operator is not a projector: max |P^2 - P| = {:.3e} > {:.1e}".format(
            deviation, tolerance),
                         [Violation('idempotent', deviation=deviation)])


class SignatureMismatchError(ValidationError):
    """raise this when a factor signature does not match a dimension"""


class InvalidFamilyError(ValidationError):
    """raise this when a projector family breaks completeness or orthogonality"""


class HistoryIndexError(ValidationError):
    """raise this when a history index lies outside the grid's index space"""


class UnequalSpacingError(ValidationError):
    """raise this when the schrodinger chain is asked for unequal time steps"""


class PartitionError(ValidationError):
    """raise this when a coarse graining is not disjoint and covering"""


class ConfigError(ValidationError):
    def __init__(self, field: str, message: str):
        super().__init__("{}: {}".format(field, message))
        self.field = field


class HistoryCapExceededError(HistoriesError):
    def __init__(self, count: int, cap: int):
        super().__init__(
            "{} histories exceed the cap of {}; coarse-grain the families or raise --max-histories".format(
                count, cap))
        self.count = count
        self.cap = cap


class CertificationRefused(HistoriesError):
    """raise this when an operation needs a decoherent set and did not get one"""

    def __init__(self, max_offdiag: float, epsilon: float, what: str = 'history set'):
        super().__init__("{} is not decoherent: max |D_ab| = {:.3e} > epsilon = {:.1e}".format(
            what, max_offdiag, epsilon))
        self.max_offdiag = max_offdiag
        self.epsilon = epsilon


class NullConditionError(HistoriesError):
    def __init__(self, probability: float, threshold: float):
        super().__init__("conditioning on an event of probability {:.3e} <= {:.1e}".format(
            probability, threshold))
        self.probability = probability
        self.threshold = threshold
