"""Kernel backend selection.

The compiled ``_core`` extension is used when importable.  Setting
``PGDGLM_BACKEND=python`` forces the pure-Python kernels; setting it to
``cython`` makes a missing extension an import error instead of a silent
fallback.
"""
import importlib
import os

from . import _pure


def load(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for auto)."""
    if name is None:
        name = os.environ.get("PGDGLM_BACKEND", "auto").lower()
    if name not in ("auto", "cython", "python"):
        raise ValueError(f"unknown kernel backend {name!r}; expected auto, cython or python")
    if name == "python":
        return _pure
    try:
        return importlib.import_module("pgdglm._core")
    except ImportError:
        if name == "cython":
            raise
        return _pure


def available():
    names = ["python"]
    try:
        importlib.import_module("pgdglm._core")
    except ImportError:
        return names
    return ["cython"] + names


kernels = load()
