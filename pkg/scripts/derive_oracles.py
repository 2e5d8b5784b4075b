"""Independent oracles for the frozen values in the test suite.

Nothing here imports the package: every number comes from a plain midpoint
grid count or from scipy quadrature, so the tests compare two unrelated
computations. Run ``python3 scripts/derive_oracles.py`` to regenerate.
"""
import json

import numpy as np
from scipy import integrate


def cusp_residual_grid(m, r, k=4096):
    """Midpoint count of ``B(0, r) ∩ {|y| <= |x|^(m-1)}`` on a k x k grid."""
    h = 2 * r / k
    axis = -r + (np.arange(k) + 0.5) * h
    total = 0
    for start in range(0, k, 256):
        x = axis[start:start + 256, None]
        y = axis[None, :]
        inside = x * x + y * y < r * r
        total += int(np.count_nonzero(inside & (np.abs(y) <= np.abs(x) ** (m - 1))))
    return total * h * h


def cusp_residual_quad(m, r):
    """``4 ∫_0^r min(x^(m-1), sqrt(r^2 - x^2)) dx`` by adaptive quadrature."""
    f = lambda x: min(x ** (m - 1), np.sqrt(max(r * r - x * x, 0.0)))
    val, _ = integrate.quad(f, 0.0, r, limit=200, epsabs=1e-16, epsrel=1e-13)
    return 4 * val


def half_disc_quotient():
    return float(np.pi / 2)


def main():
    out = {"cusp_residual_r0.1": {}, "cusp_quotient_r2^-8": {}}
    for m in (2.5, 3.0, 4.0, 6.0):
        g = cusp_residual_grid(m, 0.1)
        qd = cusp_residual_quad(m, 0.1)
        out["cusp_residual_r0.1"][str(m)] = {"grid_4096": g, "quad": qd}
        r = 2.0 ** -8
        out["cusp_quotient_r2^-8"][str(m)] = cusp_residual_quad(m, r) / r ** m
    out["half_disc_quotient"] = half_disc_quotient()
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
