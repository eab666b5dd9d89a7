"""Exception hierarchy shared by all modules.

Every error carries a stable machine-readable ``code`` and the name of the
module it originates from, so the CLI can report it as JSON.
"""


class ChainGraphError(Exception):
    module = "chaingraph"
    code = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_json(self):
        out = {"module": self.module, "code": self.code, "message": str(self)}
        out.update(self.details)
        return out


class GraphError(ChainGraphError):
    module = "graph"
    code = "invalid_graph"


class ParseError(GraphError):
    code = "parse_error"

    def __init__(self, message, line=None, **details):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, line=line, **details)


class SemiDirectedCycleError(GraphError):
    code = "semi_directed_cycle"

    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = " ".join(str(v) for v in self.cycle)
        super().__init__(f"graph has a semi-directed cycle: {path}", cycle=self.cycle)


class CapExceededError(GraphError):
    code = "cap_exceeded"


class TableError(ChainGraphError):
    module = "tables"
    code = "invalid_table"


class ZeroProbabilityError(TableError):
    code = "zero_probability"


class ParameterRegionError(ChainGraphError):
    """Raised when Moebius coordinates invert to a non-positive probability."""

    module = "moebius"
    code = "outside_parameter_region"


class SamplerError(ChainGraphError):
    module = "moebius"
    code = "sampler_failure"


class FitError(ChainGraphError):
    module = "mle"
    code = "fit_failure"


class ProbeError(ChainGraphError):
    module = "probes"
    code = "precondition_violated"
