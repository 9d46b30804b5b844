"""Loaders for the measured values shipped in ``sagnacsim/data``."""
from __future__ import annotations

import json
from importlib import resources

from .inequalities import bb_grid_from_table, leggett_pairs_from_table, read_correlation_table
from .quantum_core import density_matrix_from_json, nearest_physical

# Wootters tangles of the Table A.1 states, in temperature order
TABLE_A1_TANGLES = (0.020, 0.122, 0.351, 0.628, 0.843, 0.894, 0.758)
TABLE_I_TANGLE = 0.905


def data_path(name):
    return resources.files("sagnacsim") / "data" / name


def _rho(obj, physical):
    raw = density_matrix_from_json(obj, validate=False)
    return nearest_physical(raw) if physical else raw


def table_I(physical=True):
    """Density matrix at optimal overlap. ``physical=False`` gives the raw rounded table."""
    with data_path("table_I.json").open() as fh:
        return _rho(json.load(fh), physical)


def table_A1(physical=True):
    """Density matrices keyed by HH-crystal temperature (float, degC), ascending."""
    with data_path("table_A1.json").open() as fh:
        raw = json.load(fh)
    return {float(k): _rho(v, physical) for k, v in sorted(raw.items(), key=lambda kv: float(kv[0]))}


def table_A2():
    """3x4 grid of beautiful Bell correlations."""
    with resources.as_file(data_path("table_A2.csv")) as p:
        return bb_grid_from_table(read_correlation_table(p))


def table_A3():
    """Three (E, E') Leggett pairs measured at phi = 40 deg."""
    with resources.as_file(data_path("table_A3.csv")) as p:
        return leggett_pairs_from_table(read_correlation_table(p))
