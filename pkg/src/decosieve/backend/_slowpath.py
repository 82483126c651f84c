"""Pure-numpy reference implementation of the hot kernels.

This module defines the backend contract; the compiled twin must match it
to rounding. Both right-hand sides work in the interaction picture, where
the free oscillator evolution is a phase mask and the integrator only sees
the (weak-coupling-small) dissipative part.

``channel_rhs``: one dissipator evaluation for the channel-resolved
equation. ``S`` holds the coupling unitaries per quadrature node, ``ms``
and ``ns`` the running memory integrals (already carrying their own phase
history), ``ph`` the vector exp(+i*E*t/hbar). For each channel j,

    St_j = S_j * Phi,   C_j = (ms_j * Phi) @ rho - rho @ (ns_j * Phi)

with Phi = outer(ph, conj(ph)), and the result is

    -1/2 * (Y + Y^dag),   Y = sum_j [St_j, C_j].

``qbm_rhs``: one evaluation of the coefficient-form equation. ``xt`` and
``pt`` are the interaction-picture quadratures at the current stage time;
the four scalar weights are supplied by the caller (h_w and g_w carry the
Hamiltonian-like and friction coefficients, d_w and f_w the two diffusion
coefficients, signs included):

    out = -i*h_w*[x^2, rho] + 2i*g_w*[x, {p, rho}]
          - d_w*[x, [x, rho]] + f_w*[x, [p, rho]].
"""

import numpy as np

NAME = "python"


def channel_rhs(S, ms, ns, ph, rho):
    phi = ph[:, None] * ph.conj()[None, :]
    st = S * phi
    c = (ms * phi) @ rho - rho @ (ns * phi)
    d = rho.shape[0]
    # sum_j St_j @ C_j as one (d, J*d) @ (J*d, d) product
    y = st.transpose(1, 0, 2).reshape(d, -1) @ c.reshape(-1, d)
    y -= c.transpose(1, 0, 2).reshape(d, -1) @ st.reshape(-1, d)
    return -0.5 * (y + y.conj().T)


def qbm_rhs(xt, pt, rho, h_w, g_w, d_w, f_w):
    x2 = xt @ xt
    out = (-1j * h_w) * (x2 @ rho - rho @ x2)
    pr = pt @ rho + rho @ pt
    out += (2j * g_w) * (xt @ pr - pr @ xt)
    c1 = xt @ rho - rho @ xt
    out -= d_w * (xt @ c1 - c1 @ xt)
    c2 = pt @ rho - rho @ pt
    out += f_w * (xt @ c2 - c2 @ xt)
    return out
