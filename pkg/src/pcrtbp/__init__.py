"""Numerical laboratory for collision and infinity manifolds of the PCRTBP."""

from .backend import BACKEND
from .constants import KAPPA

__version__ = "0.1.0"


def __getattr__(name):
    # the submodules import kernels and scipy; keep package import light
    if name in (
        "charts",
        "closedform",
        "fields",
        "flow",
        "localmap",
        "manifolds",
        "melnikov",
        "search",
        "cli",
        "config",
    ):
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(name)


from .fields import FieldId  # noqa: E402

__all__ = ["BACKEND", "KAPPA", "FieldId", "__version__"]
