"""Exception types shared across the package."""


class StlftcError(Exception):
    pass


class UnknownPredicate(StlftcError):
    def __init__(self, name):
        super().__init__(f"unknown predicate {name!r}")
        self.name = name


class FormulaSyntaxError(StlftcError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class WindowError(StlftcError):
    pass


class NotFlattenable(StlftcError):
    pass


class OutOfDomain(StlftcError):
    pass


class LatticeMismatch(StlftcError):
    pass


class UnsupportedFastPath(StlftcError):
    pass


class NotBoxRepresentable(StlftcError):
    pass


class HorizonTooShort(StlftcError):
    pass


class TableMissing(StlftcError):
    def __init__(self, t, index_set):
        super().__init__(f"no table entry at t={t} for index set {sorted(index_set)}")
        self.t = t
        self.index_set = index_set


class NonBoxFragment(StlftcError):
    pass


class DomainError(StlftcError):
    pass


class ScenarioError(StlftcError):
    pass
