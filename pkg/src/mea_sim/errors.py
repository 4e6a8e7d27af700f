"""Exception types shared across the simulator."""


class MeaSimError(Exception):
    """Base class for simulator errors."""


class InvalidArgument(MeaSimError, ValueError):
    pass


class SamplingFailure(MeaSimError, RuntimeError):
    pass


class BinInfeasible(SamplingFailure):
    """No placement reached the requested hotspot SINR bin within the rejection budget."""

    def __init__(self, gamma_db: float, tries: int):
        super().__init__(f"gamma bin {gamma_db:+g} dB infeasible: no placement accepted after {tries} tries")
        self.gamma_db = gamma_db
        self.tries = tries


class ConfigError(MeaSimError, ValueError):
    """Bad configuration; the message names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
