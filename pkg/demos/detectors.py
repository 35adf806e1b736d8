"""BER of the four uplink detectors on a small network.

Run: python3 demos/detectors.py
"""

from cfisac import detection
from cfisac import sysmodel as sm


def main():
    cfg = sm.SystemConfig(L=40, K=20, tau=10)
    scen = detection.BerScenario(cfg, snr_db=(0.0, 10.0, 20.0), n_drops=5, symbols_per_drop=100)
    records = detection.ber_experiment(detection.DETECTORS, scen)
    print(f"{'SNR dB':>7} " + " ".join(f"{d:>8}" for d in detection.DETECTORS))
    for snr in scen.snr_db:
        row = {r.scheme: r.ber for r in records if r.snr_db == snr}
        print(f"{snr:7.1f} " + " ".join(f"{row[d]:8.4f}" for d in detection.DETECTORS))


if __name__ == "__main__":
    main()
