"""Autocorrelation and ranging with designed pilots.

Run: python3 demos/sensing.py
"""

import numpy as np

from cfisac import manifold, sensing
from cfisac import sysmodel as sm


def main():
    cfg = sm.SystemConfig(L=40, K=20, tau=64)
    rng = np.random.default_rng(0)
    beta = sm.drop_network(cfg, rng)
    F = manifold.design_pilots(beta, cfg.rho_p, cfg.tau, rng, manifold.DesignConfig(n_starts=1)).F
    x = sensing.time_domain_pilot(F, 0)

    per = sensing.acf(x, "periodic")
    aper = sensing.acf(x, "aperiodic")
    side = np.abs(aper.values[aper.lags != 0]).max() / aper.r0
    print(f"periodic sidelobes / r0: {np.abs(per.values[per.lags != 0]).max() / per.r0:.1e}")
    print(f"aperiodic peak sidelobe: {20 * np.log10(side):.1f} dB")

    scene = sensing.RangeScene([8.0, 19.0], 20.0, x)
    prof = sensing.range_profile(scene, rng)
    print(f"range bin width {scene.resolution_m} m; strongest bins at {prof.peaks(2)} m")
    for r, db in zip(prof.range_m[:6], prof.magnitude_dB[:6]):
        print(f"  {r:5.1f} m  {db:6.1f} dB")


if __name__ == "__main__":
    main()
