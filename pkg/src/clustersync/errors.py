"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ClusterSyncError(Exception):
    """Base class for every error raised by this package."""


class NetworkValidationError(ClusterSyncError, ValueError):
    pass


class NonZeroRowSum(NetworkValidationError):
    def __init__(self, row: int, total: float):
        self.row = row
        self.total = total
        super().__init__(f"row {row} of G sums to {total:.12g}, expected 0")


class NonPositiveDefiniteC(NetworkValidationError):
    def __init__(self, cluster: int, min_eig: float | None = None):
        self.cluster = cluster
        self.min_eig = min_eig
        detail = "" if min_eig is None else f" (min eigenvalue {min_eig:.6g})"
        super().__init__(f"C of cluster {cluster} is not symmetric positive definite{detail}")


class BadPartition(NetworkValidationError):
    pass


class ClassA1Violation(NetworkValidationError):
    def __init__(self, block: tuple[int, int], entry: tuple[int, int], message: str):
        self.block = block
        self.entry = entry
        super().__init__(f"diagonal block {block}, entry {entry}: {message}")


class ClassA2Violation(NetworkValidationError):
    def __init__(self, block: tuple[int, int], row: int, total: float):
        self.block = block
        self.row = row
        self.total = total
        super().__init__(f"off-diagonal block {block}, row {row} sums to {total:.12g}, expected 0")


class OutOfRange(ClusterSyncError, IndexError):
    pass


class UnknownActivation(ClusterSyncError, ValueError):
    pass


class OutOfCoverage(ClusterSyncError, ValueError):
    def __init__(self, t: float, lo: float, hi: float):
        self.t = t
        super().__init__(f"time {t:.12g} outside history coverage [{lo:.12g}, {hi:.12g}]")


class MisalignedImpulse(ClusterSyncError, ValueError):
    pass


class RhoTooLarge(ClusterSyncError, ValueError):
    pass


class NoPreviousPass(ClusterSyncError, RuntimeError):
    pass


class SingularE(ClusterSyncError, ValueError):
    pass


class ConfigError(ClusterSyncError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ValidationError(ConfigError):
    pass
