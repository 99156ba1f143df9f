"""Fundamental solution of a linearised coagulation equation with a
Wiener-Hopf factorised symbol, a direct solver to check it against, and fluxes."""
from __future__ import annotations

from importlib import metadata

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:
    __version__ = "0.1.0"
