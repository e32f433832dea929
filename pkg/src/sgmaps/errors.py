class SGMapError(Exception):
    """Base class for failures raised by this package."""


class AmbiguousClassification(SGMapError):
    """A point is within tolerance of, or negative on, more than one boundary polynomial."""

    def __init__(self, indices, point=None):
        self.indices = tuple(int(i) for i in indices)
        self.point = None if point is None else [float(v) for v in point]
        super().__init__(f"ambiguous classification: polynomials {self.indices} at {self.point}")


class ConstructionError(SGMapError):
    pass


class SamplingError(SGMapError):
    pass


class MeshError(SGMapError):
    pass


class NonGenericSweep(SGMapError):
    pass


class NotSupported(SGMapError):
    pass


class ConvergenceError(SGMapError):
    pass
