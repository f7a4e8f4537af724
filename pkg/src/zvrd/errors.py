"""Exception taxonomy shared by every module.

ConfigurationError covers bad user-supplied parameters and capability
mismatches (CLI exit code 2), ContractError covers violated call
contracts such as shape or timestep mismatches (also exit code 2), and
NumericalFailure flags non-finite state mid-run (exit code 3).
"""


class ZvrdError(Exception):
    pass


class ConfigurationError(ZvrdError):
    pass


class ContractError(ZvrdError):
    pass


class NumericalFailure(ZvrdError):
    pass
