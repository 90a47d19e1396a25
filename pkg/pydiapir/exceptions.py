class PyDiapirException(Exception):
    # partial diagnostics series, attached by sla.run when a run aborts
    diagnostics = None


class SingularTensor(PyDiapirException):
    pass


class ElementInverted(PyDiapirException):
    def __init__(self, message, element=None, step=None):
        super().__init__(message)
        self.element = element
        self.step = step


class InvalidGeometry(PyDiapirException):
    pass


class ParseError(PyDiapirException):
    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.line = line
        self.key = key


class ValidationError(PyDiapirException):
    pass


class IoError(PyDiapirException):
    pass
