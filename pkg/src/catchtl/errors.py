"""Package-level exception types.

ValidationError covers bad inputs (datasets, configs, CSV schemas) and maps
to CLI exit code 2; FitError covers sampler failures (non-finite initial
posterior, incompatible transfer sources) and maps to exit code 3.
"""


class CatchtlError(Exception):
    pass


class ValidationError(CatchtlError):
    pass


class FitError(CatchtlError):
    pass
