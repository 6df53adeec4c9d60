"""Backend dispatch for the hot numerical kernels.

The compiled extension (srforms._ckern) is used when present; otherwise the
vectorized numpy implementation takes over.  Setting the environment
variable ``SRFORMS_PURE=1`` forces the pure-python backend.
"""

import os

from . import _kernels_py

if os.environ.get("SRFORMS_PURE") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckern as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` in {None, 'compiled', 'python'}.

    ``None`` gives the active default.  Requesting 'compiled' when the
    extension is missing raises ImportError.
    """
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _ckern

        return _ckern
    raise ValueError(f"unknown backend {name!r}")


def rk4_heisenberg(p0, v0, lam, step, nsteps, record_every=1):
    return _impl.rk4_heisenberg(p0, v0, lam, step, nsteps, record_every)


def rk4_sphere3(p0, v0, lam, step, nsteps, record_every=1):
    return _impl.rk4_sphere3(p0, v0, lam, step, nsteps, record_every)


def radial_parity(u, tris, sample_bin, bin_tri_idx, bin_tri_off):
    return _impl.radial_parity(u, tris, sample_bin, bin_tri_idx, bin_tri_off)
