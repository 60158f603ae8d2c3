"""
Bound states: Jost zeros against a finite-difference oracle
===========================================================

Eigenvalues -kappa^2 are zeros of det J(i kappa).  An independent check
discretizes the operator on [0, L] with a ghost-point Robin closure and
Richardson-extrapolates two mesh widths.
"""

import sys
from pathlib import Path

import mpmath as mp
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from corpus import corpus  # noqa: E402

from halfline_jost import spectrum  # noqa: E402

# For V = -5 exp(-x) with Dirichlet data the Jost function at k = i kappa
# is proportional to J_{2 kappa}(2 sqrt 5): a third, purely special-function
# answer.
bessel = float(mp.findroot(lambda s: mp.besselj(2 * s, 2 * mp.sqrt(5)), 0.74))
print(f"Bessel zero: kappa = {bessel:.12f}\n")

print(f"{'potential':<24}{'det J zeros':<34}{'FD (Richardson)':<34}{'L':>6}")
for name, V, pair in corpus():
    res = spectrum.find_eigenvalues(V, pair)
    fd = spectrum.fd_oracle_spectrum(V, pair)
    jz = ", ".join(f"{k:.10f}x{m}" for k, m in res.eigen)
    fz = ", ".join(f"{k:.10f}" for k in np.sort(fd.kappas)[::-1])
    print(f"{name:<24}{jz:<34}{fz:<34}{fd.L:>6.0f}")

# The contour count around the scanned segment flags missed zeros: a scan
# with too few points is refined until the counts agree.
name, V, pair = corpus()[-1]
res = spectrum.find_eigenvalues(V, pair, scan_points=12, max_refinements=6)
print(f"\n{name}: scan history (points, roots, with multiplicity) {res.diagnostics['scan_history']}")
print("contour count:", res.diagnostics["contour_count"])
