"""Walk through the source model: crystal spectra, their overlap, and the
resulting two-photon state as the HH crystal is detuned."""
import numpy as np

from sagnacsim.quantum_core import PHI_PLUS, fidelity, tangle
from sagnacsim.source_model import (
    CrystalConfig,
    SourceConfig,
    calibrate_purity_weight,
    overlap_from_temperatures,
    signal_spectrum,
    source_state,
)

hh, vv = CrystalConfig(role="HH"), CrystalConfig(role="VV")
vv_temp = 165.70

print("VV crystal peak at", round(signal_spectrum(vv, vv_temp).peak_wavelength(), 3), "nm")

v = calibrate_purity_weight(0.905)
print(f"white-noise weight fitted to tangle 0.905 at full overlap: v = {v:.4f}\n")

print(" T_HH (C)   overlap   tangle   F(Phi+)")
for t in np.arange(163.70, 167.75, 0.5):
    o = overlap_from_temperatures(hh, vv, t, vv_temp)
    rho = source_state(SourceConfig(overlap=o, purity_weight=v))
    print(f"  {t:7.2f}   {o:7.4f}   {tangle(rho):6.4f}   {fidelity(rho, PHI_PLUS):6.4f}")
