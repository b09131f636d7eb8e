# -*- coding: utf-8 -*-


class LipRetractError(Exception):
    """
    Base Exception for all Lipschitz Retraction Lab errors
    """
    pass


class PreconditionError(LipRetractError):
    """
    Raised when an operation is invoked outside of its domain,
    for example a block index out of range or a point outside
    of the compact a map is defined on
    """
    pass


class SamplingError(LipRetractError):
    """
    Raised when a sampler cannot produce usable samples, such as
    persistent coincident pairs or a finite difference step that
    underflows
    """
    pass


class NetConstructionError(LipRetractError):
    """
    Raised when an epsilon net fails its sandwich audit or is
    requested beyond desk scale dimensions

    :param message: description of failure
    :type message: str
    :param witness: point violating the audit, if any
    """
    def __init__(self, message, witness=None):
        super(NetConstructionError, self).__init__(message)
        self.witness = witness


class RetractionAuditError(LipRetractError):
    """
    Raised when a candidate retraction moves a point of the compact

    :param message: description of failure
    :type message: str
    :param witness: point of the compact that was moved
    :param displacement: distance the point was moved
    :type displacement: float
    """
    def __init__(self, message, witness=None, displacement=None):
        super(RetractionAuditError, self).__init__(message)
        self.witness = witness
        self.displacement = displacement


class SchemaError(LipRetractError):
    """
    Raised when an experiment configuration violates the schema
    """
    pass
