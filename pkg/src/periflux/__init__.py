"""Periodic flux-driven flow in wavy pipes and channels."""

__version__ = "0.1.0"

_LAZY = {
    "EigenBasis": "estimators",
    "PeriodicStokesFlow": "estimators",
    "PeriodicNavierStokesFlow": "estimators",
}

__all__ = sorted(_LAZY)


# resolved on first access so that the CLI can pin BLAS threads before numpy loads
def __getattr__(name):
    if name in _LAZY:
        from importlib import import_module

        return getattr(import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
