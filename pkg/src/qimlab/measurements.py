"""Sensing ensembles and intensity data.

Two measurement models are supported:

* ``explicit`` ensembles hold a dense ``(m, n)`` matrix of sensing rows.
  Real rows have i.i.d. standard normal entries; complex rows have
  independent real/imaginary parts of variance 1/2 each, so that
  ``E|a_k . u|^2 = ||u||^2`` for unit ``u``.
* ``cdp`` ensembles apply L random octanary masks followed by an
  (unnormalized) discrete Fourier transform, giving ``m = L * n``
  measurements in ``O(L n log n)``.

The octanary mask alphabet is the standard one from the Wirtinger-Flow
literature: a uniform draw from ``{1, -1, i, -i}`` times an amplitude that
is ``sqrt(2)/2`` with probability 4/5 and ``sqrt(3)`` with probability 1/5
(unit second moment, so CDP intensities have the same mean scale as the
Gaussian model).

Ensembles are immutable after construction (array buffers are marked
read-only) and all forward/adjoint maps are pure, so instances are safe to
share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, ZeroDimension, ZeroSignal
from .rng import stream

_MAGIC = b"QIMLENS1"

_OCTANARY_PHASES = np.array([1.0, -1.0, 1.0j, -1.0j], dtype=np.complex128)


@dataclass(frozen=True)
class SensingEnsemble:
    """A fixed set of sensing vectors, explicit or implicit.

    Attributes
    ----------
    kind : {"explicit", "cdp"}
    field : {"real", "complex"}
        Field of the signals the ensemble is meant to measure.  CDP
        measurements are always complex-valued regardless of the signal
        field.
    n, m : int
        Signal dimension and number of measurements (``m = L * n`` for
        CDP).
    seed : int
        Seed the ensemble was drawn from (bookkeeping only).
    rows : ndarray, optional
        ``(m, n)`` sensing matrix for the explicit kind.
    masks : ndarray, optional
        ``(L, n)`` octanary masks for the CDP kind.
    """

    kind: str
    field: str
    n: int
    m: int
    seed: int
    rows: Optional[np.ndarray] = None
    masks: Optional[np.ndarray] = dc_field(default=None, repr=False)

    @property
    def L(self) -> int:
        return 0 if self.masks is None else self.masks.shape[0]

    @property
    def is_complex(self) -> bool:
        return self.kind == "cdp" or self.field == "complex"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def gen_gaussian_ensemble(n: int, m: int, field: str = "real", seed: int = 0) -> SensingEnsemble:
    """Draw an explicit Gaussian ensemble of ``m`` rows in dimension ``n``."""
    if n < 1 or m < 1:
        raise ZeroDimension(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if field not in ("real", "complex"):
        raise ValueError(f"unknown field {field!r}")
    g = stream(seed, 0)
    if field == "real":
        rows = g.standard_normal((m, n))
    else:
        rows = np.sqrt(0.5) * (g.standard_normal((m, n)) + 1j * g.standard_normal((m, n)))
    return SensingEnsemble("explicit", field, n, m, int(seed), rows=_freeze(rows))


def octanary_symbols(g: np.random.Generator, size) -> np.ndarray:
    """Draw octanary mask symbols: uniform quarter phases times a two-point amplitude."""
    phase = _OCTANARY_PHASES[g.integers(0, 4, size=size)]
    amp = np.where(g.random(size=size) < 0.8, np.sqrt(2.0) / 2.0, np.sqrt(3.0))
    return phase * amp


def gen_cdp_ensemble(n: int, L: int, seed: int = 0, field: str = "complex") -> SensingEnsemble:
    """Draw a coded-diffraction ensemble with ``L`` octanary masks (``m = L * n``)."""
    if n < 1 or L < 1:
        raise ZeroDimension(f"need n >= 1 and L >= 1, got n={n}, L={L}")
    if field not in ("real", "complex"):
        raise ValueError(f"unknown field {field!r}")
    g = stream(seed, 1)
    masks = octanary_symbols(g, (L, n))
    return SensingEnsemble("cdp", field, n, L * n, int(seed), masks=_freeze(masks))


def cdp_from_masks(masks: np.ndarray, field: str = "complex", seed: int = 0) -> SensingEnsemble:
    """Build a CDP ensemble from explicit masks (test hook, e.g. all-ones masks)."""
    masks = np.asarray(masks, dtype=np.complex128)
    if masks.ndim != 2 or masks.shape[0] < 1 or masks.shape[1] < 1:
        raise ZeroDimension("masks must be a nonempty (L, n) array")
    L, n = masks.shape
    return SensingEnsemble("cdp", field, n, L * n, int(seed), masks=_freeze(masks.copy()))


def _check_dim(E: SensingEnsemble, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    if u.ndim != 1 or u.shape[0] != E.n:
        raise DimensionMismatch(f"expected a vector of length {E.n}, got shape {u.shape}")
    return u


def forward_map(E: SensingEnsemble, u: np.ndarray) -> np.ndarray:
    """Apply the linear measurement map, returning the m inner products ``a_k . u``."""
    u = _check_dim(E, u)
    if E.kind == "explicit":
        return E.rows @ u
    return np.fft.fft(E.masks * u, axis=1).ravel()


def adjoint_map(E: SensingEnsemble, v: np.ndarray) -> np.ndarray:
    """Apply the adjoint of :func:`forward_map` (conjugate transpose)."""
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != E.m:
        raise DimensionMismatch(f"expected a vector of length {E.m}, got shape {v.shape}")
    if E.kind == "explicit":
        return E.rows.conj().T @ v
    blocks = v.reshape(E.L, E.n)
    # F^H w = n * ifft(w) for the unnormalized DFT used in forward_map.
    return np.sum(np.conj(E.masks) * (E.n * np.fft.ifft(blocks, axis=1)), axis=0)


def cdp_dense_matrix(E: SensingEnsemble) -> np.ndarray:
    """Materialize the (m, n) matrix of a CDP ensemble (small n only; test oracle)."""
    if E.kind != "cdp":
        raise ValueError("dense materialization is for cdp ensembles")
    n = E.n
    F = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    return np.vstack([F * mask[np.newaxis, :] for mask in E.masks])


@dataclass(frozen=True)
class IntensityData:
    """Squared-magnitude measurements, with the noisy-model bookkeeping.

    ``y`` always holds the (clamped) squared amplitudes.  For data produced
    by :func:`add_amplitude_noise`, ``amplitudes`` records the noisy
    amplitudes before clamping, ``eta`` the realized noise vector, and
    ``clamp_count`` how many amplitudes went negative and were clamped to 0
    before squaring.
    """

    y: np.ndarray
    amplitudes: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    clamp_count: int = 0
    target_snr_db: Optional[float] = None


def intensities(E: SensingEnsemble, x: np.ndarray) -> IntensityData:
    """Noiseless intensity data ``y_k = |a_k . x|^2``."""
    z = forward_map(E, x)
    if np.iscomplexobj(z):
        y = z.real * z.real + z.imag * z.imag
    else:
        y = z * z
    return IntensityData(y=_freeze(y))


def add_amplitude_noise(E: SensingEnsemble, x: np.ndarray, target_snr_db: float,
                        seed: int = 0) -> IntensityData:
    """Additive Gaussian noise on the amplitudes ``|a_k . x|``, at an exact SNR.

    The noise is rescaled so that ``10 log10(sum|a_k.x|^2 / ||eta||^2)``
    equals ``target_snr_db`` exactly.  Noisy amplitudes are clamped at 0
    before squaring; the clamp count is recorded.  ``target_snr_db = inf``
    is the noiseless sentinel.
    """
    x = _check_dim(E, x)
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ZeroSignal("amplitude noise requires a nonzero signal")
    if np.isinf(target_snr_db) and target_snr_db > 0:
        return intensities(E, x)
    if not np.isfinite(target_snr_db):
        raise ValueError("target_snr_db must be finite or +inf")
    clean = intensities(E, x).y
    b = np.sqrt(clean)
    g = stream(seed, 2)
    eta = g.standard_normal(E.m)
    eta *= np.sqrt(clean.sum()) / (np.linalg.norm(eta) * 10.0 ** (target_snr_db / 20.0))
    noisy = b + eta
    clamp_count = int(np.count_nonzero(noisy < 0.0))
    y = np.maximum(noisy, 0.0) ** 2
    return IntensityData(y=_freeze(y), amplitudes=_freeze(noisy), eta=_freeze(eta),
                         clamp_count=clamp_count, target_snr_db=float(target_snr_db))


def realized_snr_db(data: IntensityData, clean_y: np.ndarray) -> float:
    """Recompute the SNR from the stored noise vector."""
    if data.eta is None:
        return float("inf")
    return float(10.0 * np.log10(clean_y.sum() / np.sum(data.eta ** 2)))


# ---------------------------------------------------------------------------
# serialization: binary container with a JSON header
# ---------------------------------------------------------------------------

def save_ensemble(E: SensingEnsemble, path) -> None:
    """Write an ensemble to a binary container with a JSON header."""
    arrays = []
    payload = b""
    for name in ("rows", "masks"):
        a = getattr(E, name)
        if a is not None:
            a = np.ascontiguousarray(a)
            arrays.append({"name": name, "dtype": str(a.dtype), "shape": list(a.shape)})
            payload += a.tobytes()
    header = {
        "kind": E.kind, "field": E.field, "n": E.n, "m": E.m, "seed": E.seed,
        "arrays": arrays,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.uint64(len(blob)).tobytes())
        fh.write(blob)
        fh.write(payload)


def load_ensemble(path) -> SensingEnsemble:
    """Read an ensemble written by :func:`save_ensemble`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not an ensemble container: bad magic {magic!r}")
        (hlen,) = np.frombuffer(fh.read(8), dtype=np.uint64)
        header = json.loads(fh.read(int(hlen)).decode("utf-8"))
        fields = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"]))
            a = np.frombuffer(fh.read(count * dtype.itemsize), dtype=dtype).reshape(spec["shape"])
            fields[spec["name"]] = _freeze(a.copy())
    return SensingEnsemble(header["kind"], header["field"], header["n"], header["m"],
                           header["seed"], rows=fields.get("rows"), masks=fields.get("masks"))
