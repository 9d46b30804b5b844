"""Leggett L3 against the separation angle phi for the simulated source,
the perfect state and the nonlocal hidden-variable bound."""
import math

import numpy as np

from sagnacsim import fixtures
from sagnacsim.analyzer import DetectorConfig
from sagnacsim.inequalities import evaluate_leggett, leggett_bound, leggett_L3
from sagnacsim.source_model import SourceConfig, calibrate_purity_weight, source_state

rho = source_state(SourceConfig(purity_weight=calibrate_purity_weight(0.905)))
det = DetectorConfig()

print(" phi   L3 (sim)         bound    perfect")
for k, deg in enumerate(np.arange(10, 91, 10)):
    phi = math.radians(deg)
    r = evaluate_leggett(rho, phi, det=det, duration=40.0, seed=[2026, k])
    flag = "*" if r.L3 > r.bound else " "
    print(f" {deg:3.0f}   {r.L3:.4f} +- {r.dL3:.4f} {flag} {leggett_bound(phi):.4f}   {2 * math.cos(phi / 2):.4f}")

m = leggett_L3(fixtures.table_A3(), math.radians(40))
print(f"\nmeasured at 40 deg: {m.L3:.4f} +- {m.dL3:.4f} against bound {m.bound:.4f}")
print("* marks a violation")
