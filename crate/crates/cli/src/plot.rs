//! Plotting script templates written next to the data. They only read the
//! CSV files; nothing is rendered by the tool itself.

pub const SCAN_SCRIPT: &str = r##"#!/usr/bin/env python3
# Template: reads the scan output in the parent directory and draws
# EE(θ), the Schmidt spectrum and the transfer-matrix spectrum.
# Usage: python plot_scan.py [CHI]
import sys
import pandas as pd
import matplotlib.pyplot as plt

scan = pd.read_csv("../scan.csv", comment="#")
spec = pd.read_csv("spectrum.csv", comment="#")
trans = pd.read_csv("transfer.csv", comment="#")
chi = int(sys.argv[1]) if len(sys.argv) > 1 else int(scan["chi"].max())

fig, ax = plt.subplots(1, 3, figsize=(14, 4))
for (c, solver), g in scan.groupby(["chi", "solver"]):
    ax[0].plot(g["theta"], g["ee"], ".-", label=f"chi={c} {solver}")
ax[0].set_xlabel("theta (rad)")
ax[0].set_ylabel("EE (nats)")
ax[0].legend()

s = spec[spec["chi"] == chi]
for i, g in s.groupby("index"):
    ax[1].plot(g["theta"], g["probability"], ".", ms=2)
ax[1].set_yscale("log")
ax[1].set_xlabel("theta (rad)")
ax[1].set_ylabel("Schmidt weight")

t = trans[trans["chi"] == chi]
ax[2].scatter(t["theta"], t["re"], s=3)
ax[2].set_xlabel("theta (rad)")
ax[2].set_ylabel("Re transfer eigenvalue")
fig.tight_layout()
fig.savefig("scan.png", dpi=150)
"##;

pub const FINITE_SCRIPT: &str = r##"#!/usr/bin/env python3
# Template: the two leading finite-chain eigenvalues and their branches.
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("finite.csv", comment="#")
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
for n, g in df.groupby("n"):
    ax[0].plot(g["theta"], g["gap"], ".-", label=f"n={n}")
    ax[1].plot(g["theta"], g["ee0"], ".-", label=f"psi0 n={n}")
    ax[1].plot(g["theta"], g["ee1"], "x--", label=f"psi1 n={n}")
ax[0].set_xlabel("theta (rad)")
ax[0].set_ylabel("|e0| - |e1|")
ax[1].set_xlabel("theta (rad)")
ax[1].set_ylabel("mid-chain EE (nats)")
for a in ax:
    a.legend()
fig.tight_layout()
fig.savefig("finite.png", dpi=150)
"##;
