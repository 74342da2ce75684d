"""Kernel backend selection: compiled Cython extension if available,
NumPy fallback otherwise.  Set ENTROLEVEL_NO_EXT=1 to force the fallback.
"""
import os

from . import _py

if os.environ.get("ENTROLEVEL_NO_EXT"):
    _impl = _py
    backend_name = "numpy"
else:
    try:
        from . import _fast as _impl
        backend_name = "compiled"
    except ImportError:
        _impl = _py
        backend_name = "numpy"

hpoly = _impl.hpoly
piece_index = _impl.piece_index
aux_surrogates = _impl.aux_surrogates
numpy_backend = _py
