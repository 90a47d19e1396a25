from pydiapir.exceptions import PyDiapirException


class SolverBreakdown(PyDiapirException):
    pass


class NoConvergence(PyDiapirException):
    pass
