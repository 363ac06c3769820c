"""Generate the committed FCIDUMP fixtures and reference values.

Run once from the repository root:

    python3 tools/gen_fixtures.py

Requires pyscf. Writes fixtures/*.fcidump, fixtures/manifest.toml and
fixtures/reference.json.
"""
import json
import os

import numpy as np
from pyscf import fci, gto, mp, scf
from pyscf.tools import fcidump

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")


def chain(n, r):
    return "; ".join(f"H 0 0 {i * r:.6f}" for i in range(n))


def beh2(y):
    return f"Be 0 {y:.6f} 0; H 1 0 0; H -1 0 0"


def rhf(atom, dm0=None):
    mol = gto.M(atom=atom, basis="sto-3g", unit="A", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.conv_tol_grad = 1e-9
    mf.kernel(dm0=dm0)
    return mf


def beh2_rhf(y):
    # Follow the RHF solution continuously from y = 0 and keep whichever of
    # the continued and the default-guess solutions is lower in energy.
    dm = None
    for yy in np.arange(0.0, y + 1e-9, 0.05):
        dm = rhf(beh2(yy), dm).make_rdm1()
    cont = rhf(beh2(y), dm)
    direct = rhf(beh2(y))
    return cont if cont.e_tot <= direct.e_tot else direct


def record(label, system, param, mf, nroots):
    path = os.path.join(OUT, f"{label}.fcidump")
    fcidump.from_scf(mf, path, tol=1e-15)
    pt = mp.MP2(mf)
    e_mp2, _ = pt.kernel()
    solver = fci.FCI(mf)
    solver.nroots = nroots
    solver.conv_tol = 1e-12
    e, c = solver.kernel()
    e = np.atleast_1d(e)
    c = c if isinstance(c, list) else [c]
    overlaps = [float(abs(ci[0, 0])) for ci in c]
    print(label, mf.e_tot, e_mp2, e[0], np.round(overlaps, 3))
    return {
        "label": label,
        "system": system,
        "geometry_parameter": param,
        "fcidump": f"{label}.fcidump",
        "e_nuc": float(mf.energy_nuc()),
        "e_hf": float(mf.e_tot),
        "mo_energy": [float(x) for x in mf.mo_energy],
        "e_mp2_corr": float(e_mp2),
        "fci_energies": [float(x) for x in e],
        "fci_hf_overlaps": overlaps,
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    refs = []
    refs.append(record("h2_0.7414", "H2", 0.7414, rhf(chain(2, 0.7414)), 2))
    refs.append(record("h4_1.0", "H4", 1.0, rhf(chain(4, 1.0)), 2))
    for r in [0.6, 0.8, 1.2, 1.6, 2.0, 2.4]:
        refs.append(record(f"h6_{r}", "H6", r, rhf(chain(6, r)), 2))
    for r in [0.8, 1.6, 2.4]:
        refs.append(record(f"h8_{r}", "H8", r, rhf(chain(8, r)), 2))
    refs.append(record("h10_1.0", "H10", 1.0, rhf(chain(10, 1.0)), 1))
    for y in [0.0, 1.0, 1.75, 2.4]:
        refs.append(record(f"beh2_{y}", "BeH2", y, beh2_rhf(y), 4))

    with open(os.path.join(OUT, "reference.json"), "w") as f:
        json.dump(refs, f, indent=1)
        f.write("\n")

    with open(os.path.join(OUT, "manifest.toml"), "w") as f:
        f.write("# Fixture geometries: label -> FCIDUMP path (relative to this file).\n")
        f.write("# Core energy (nuclear repulsion) is embedded in each FCIDUMP.\n\n")
        for r in refs:
            unit = "angstrom"
            f.write("[[entry]]\n")
            f.write(f'label = "{r["label"]}"\n')
            f.write(f'system = "{r["system"]}"\n')
            f.write(f'geometry_parameter = {r["geometry_parameter"]}\n')
            f.write(f'unit = "{unit}"\n')
            f.write(f'fcidump = "{r["fcidump"]}"\n\n')


if __name__ == "__main__":
    main()
