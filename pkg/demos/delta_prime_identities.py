"""
Trace identities for the delta-prime vertex
===========================================

Three free half-lines meet at a vertex with the delta-prime condition
psi_1' = psi_2' = psi_3' and psi_1 + psi_2 + psi_3 = a psi_1'.  With no
potential the Jost determinant is k^2 (3 - iak) in closed form, so every
quantity in the identities can be checked by hand.
"""

import math

import numpy as np

from halfline_jost import bc, series, solve, spectrum, trace
from halfline_jost.potential import PotentialModel

V = PotentialModel.zero(3)

# The boundary reduction sees one mixed channel and two Neumann channels;
# a = 0 turns the mixed channel into a Dirichlet one.
for a in (-1.0, 0.0, 2.0):
    d = bc.reduce_to_diagonal(bc.delta_prime(a))
    print(f"a = {a:+.1f}: n_D={d.n_D} n_M={d.n_M} n_N={d.n_N} theta={np.round(d.theta, 6)}")

# det J(k) from the solver against the closed form
pair = bc.delta_prime(-1.0)
ks = np.array([0.5, 1 + 1j, 2j, 3j])
print("\ndet J(k) vs k^2 (3 + ik):")
for k, dj in zip(ks, solve.det_jost(V, pair, ks)):
    print(f"  k = {k:>8}: {dj:.12f}   closed form {k ** 2 * (3 + 1j * k):.12f}")

# The zero at k = 3i is the single eigenvalue -9.  J(0) = B has rank one,
# so two half-bound states sit at the threshold.
res = spectrum.compute_spectrum(V, pair)
print("\nspectrum:", res.to_report())

# High-energy coefficients: ln h = ln(1 - 6z/a) with z = 1/(2ik)
t = series.coefficient_tables(V, pair, N=6)
print("\ne_l      :", np.round(t.e.real, 10))
print("-(6/a)^l/l:", [-(6 / -1.0) ** l / l for l in range(1, 7)])

# The identities themselves, q = 1..4.  For q = 1 the integral is
# (1/pi) int ln|1 + 3i/(ak)| dk = 3/(2|a|) by the closed-form quadrature.
for a in (-1.0, -0.5, 1.0, 2.0):
    rep = trace.full_report(V, bc.delta_prime(a), q_max=4)
    print(f"\na = {a:+.1f}")
    for row in rep.rows:
        print(f"  q={row.q}  eigen_sum={row.eigen_sum:+.10f}  integral={row.integral:+.10f}  "
              f"rhs={row.rhs:+.10f}  rel_residual={row.rel_residual:.1e}")
    if a < 0:
        print(f"  closed form for q=1: ({3 / abs(a)}, {3 / (2 * abs(a))}, {3 / (2 * abs(a))})")

# The branch of ln h is anchored at large k and carried inward; at k = 1
# with a = 2 it is the principal value of ln(1 + 1.5i).
t2 = series.coefficient_tables(V, bc.delta_prime(2.0), N=4)
prof = trace.log_h_on_grid(V, bc.delta_prime(2.0), t2, [1.0])
print("\nln h(1), a=2:", prof.lnh_plus[0], " expected", complex(0.5 * math.log(13 / 4), math.atan(1.5)))
