"""Soft-magnetic material model and loss coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

MU0 = 4e-7 * math.pi
NU0 = 1.0 / MU0


class BHCurve:
    """Monotone B-H characteristic with a C1 reluctivity ``nu(B^2)``.

    ``nu = H/B`` is sampled at ``s = B^2`` and joined with a monotone cubic
    Hermite interpolant (Fritsch-Carlson slopes).  Beyond the last sample the
    curve continues with slope ``mu0`` in ``B(H)``, i.e.
    ``nu(s) = nu0 + c / sqrt(s)`` with ``c = H_n - B_n / mu0``, and the end
    slope of the spline is set to match that tail so ``nu`` stays C1.
    """

    def __init__(self, h, b, name: str = ""):
        h = np.asarray(h, dtype=float)
        b = np.asarray(b, dtype=float)
        if h.ndim != 1 or h.shape != b.shape or len(h) < 3:
            raise ValueError("B-H table needs matching 1-D columns with >= 3 rows")
        if h[0] != 0.0 or b[0] != 0.0:
            raise ValueError("B-H table must start at (0, 0)")
        if np.any(np.diff(h) <= 0) or np.any(np.diff(b) <= 0):
            raise ValueError("H and B must be strictly increasing")
        self.name = name
        self.h = h
        self.b = b
        nu = h[1:] / b[1:]
        self.knots = np.concatenate([[0.0], b[1:] ** 2])
        self.values = np.concatenate([[nu[0]], nu])
        self.tail = h[-1] - b[-1] / MU0
        end_slope = -0.5 * self.tail * self.knots[-1] ** -1.5
        self.slopes = _fritsch_carlson(self.knots, self.values, end_slope)
        self._coef = _hermite_coefficients(self.knots, self.values, self.slopes)
        dx = np.diff(self.knots)
        c = self._coef
        seg = c[:, 0] * dx + c[:, 1] * dx ** 2 / 2 + c[:, 2] * dx ** 3 / 3 + c[:, 3] * dx ** 4 / 4
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._check_monotone()

    @classmethod
    def from_file(cls, path, name: str | None = None) -> "BHCurve":
        """Two-column text file ``H B`` per line; ``#`` starts a comment."""
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(v) for v in line.replace(",", " ").split()[:2]])
        data = np.array(rows)
        return cls(data[:, 0], data[:, 1], name=name or Path(path).stem)

    @classmethod
    def m19(cls) -> "BHCurve":
        with resources.as_file(resources.files("tpsrm") / "data" / "m19_bh.txt") as p:
            return cls.from_file(p, name="m19")

    @classmethod
    def linear(cls, mu_r: float) -> "LinearMaterial":
        return LinearMaterial(mu_r)

    # -- evaluation -------------------------------------------------------
    def reluctivity(self, b_squared):
        """Return ``(nu, dnu/d(B^2))`` for an array of squared flux densities."""
        s = np.asarray(b_squared, dtype=float)
        nu = np.empty_like(s)
        dnu = np.empty_like(s)
        inside = s <= self.knots[-1]
        if np.any(inside):
            si = s[inside]
            k = np.clip(np.searchsorted(self.knots, si, side="right") - 1, 0, len(self.knots) - 2)
            t = si - self.knots[k]
            c = self._coef[k]
            nu[inside] = c[:, 0] + t * (c[:, 1] + t * (c[:, 2] + t * c[:, 3]))
            dnu[inside] = c[:, 1] + t * (2 * c[:, 2] + 3 * t * c[:, 3])
        out = ~inside
        if np.any(out):
            so = s[out]
            nu[out] = NU0 + self.tail / np.sqrt(so)
            dnu[out] = -0.5 * self.tail * so ** -1.5
        return nu, dnu

    def h_of_b(self, b):
        b = np.asarray(b, dtype=float)
        nu, _ = self.reluctivity(b * b)
        return nu * b

    def energy_density(self, b_squared):
        """Stored energy density ``int_0^B H db = 1/2 int_0^{B^2} nu ds`` in J/m^3."""
        s = np.asarray(b_squared, dtype=float)
        out = np.empty_like(s)
        inside = s <= self.knots[-1]
        if np.any(inside):
            si = s[inside]
            k = np.clip(np.searchsorted(self.knots, si, side="right") - 1, 0, len(self.knots) - 2)
            t = si - self.knots[k]
            c = self._coef[k]
            part = t * (c[:, 0] + t * (c[:, 1] / 2 + t * (c[:, 2] / 3 + t * c[:, 3] / 4)))
            out[inside] = 0.5 * (self._cum[k] + part)
        o = ~inside
        if np.any(o):
            sn = self.knots[-1]
            so = s[o]
            tail = NU0 * (so - sn) + 2 * self.tail * (np.sqrt(so) - math.sqrt(sn))
            out[o] = 0.5 * (self._cum[-1] + tail)
        return out

    def coenergy_density(self, b_squared):
        """``int_0^H B dh = B*H - w(B)`` in J/m^3."""
        s = np.asarray(b_squared, dtype=float)
        nu, _ = self.reluctivity(s)
        return nu * s - self.energy_density(s)

    @property
    def initial_reluctivity(self) -> float:
        return float(self.values[0])

    def _check_monotone(self):
        b = np.linspace(0.0, 1.5 * self.b[-1], 4000)[1:]
        nu, dnu = self.reluctivity(b * b)
        dh_db = nu + 2 * b * b * dnu
        if np.any(dh_db <= 0):
            bad = b[np.argmin(dh_db)]
            raise ValueError(f"interpolated B-H curve loses monotonicity near B = {bad:.3f} T")


class LinearMaterial:
    """Constant-permeability stand-in with the :class:`BHCurve` interface."""

    def __init__(self, mu_r: float):
        self.mu_r = float(mu_r)
        self.nu = NU0 / self.mu_r
        self.name = f"linear(mu_r={mu_r:g})"

    def reluctivity(self, b_squared):
        s = np.asarray(b_squared, dtype=float)
        return np.full_like(s, self.nu), np.zeros_like(s)

    def energy_density(self, b_squared):
        return 0.5 * self.nu * np.asarray(b_squared, dtype=float)

    def coenergy_density(self, b_squared):
        return self.energy_density(b_squared)

    @property
    def initial_reluctivity(self) -> float:
        return self.nu


def _fritsch_carlson(x, y, end_slope):
    h = np.diff(x)
    d = np.diff(y) / h
    m = np.empty_like(y)
    m[0] = d[0]
    m[-1] = end_slope
    for k in range(1, len(y) - 1):
        if d[k - 1] * d[k] <= 0:
            m[k] = 0.0
        else:
            w1 = 2 * h[k] + h[k - 1]
            w2 = h[k] + 2 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k])
    return m


def _hermite_coefficients(x, y, m):
    # y(t) = c0 + c1 t + c2 t^2 + c3 t^3 on [x_k, x_k+1], t = x - x_k
    h = np.diff(x)
    d = np.diff(y) / h
    c0 = y[:-1]
    c1 = m[:-1]
    c2 = (3 * d - 2 * m[:-1] - m[1:]) / h
    c3 = (m[:-1] + m[1:] - 2 * d) / h ** 2
    return np.c_[c0, c1, c2, c3]


@dataclass(frozen=True)
class LossModel:
    """Two-term Steinmetz core loss plus copper loss.

    Defaults are generic M-19 class coefficients (per unit volume) and the
    phase resistance implied by the published 8/14 copper loss.
    """

    steinmetz_kh: float = 136.0        # W s / T^beta / m^3
    steinmetz_beta: float = 1.9
    eddy_ke: float = 0.94              # W s^2 / T^2 / m^3
    copper_resistance_per_phase_ohm: float = 0.406
    iron_density_kg_m3: float = 7650.0

    def __post_init__(self):
        for name in ("steinmetz_kh", "steinmetz_beta", "eddy_ke",
                     "copper_resistance_per_phase_ohm", "iron_density_kg_m3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def copper_loss(self, rms_current_per_phase, n_phases: int = 2) -> float:
        return n_phases * self.copper_resistance_per_phase_ohm * float(rms_current_per_phase) ** 2

    def core_loss(self, b_peak, frequency_hz: float, volumes_m3) -> float:
        """Per-element Steinmetz loss summed over elements, in watts."""
        b = np.asarray(b_peak, dtype=float)
        v = np.asarray(volumes_m3, dtype=float)
        f = float(frequency_hz)
        density = self.steinmetz_kh * f * b ** self.steinmetz_beta + self.eddy_ke * f * f * b * b
        return float(np.sum(v * density))

    def core_loss_from_snapshots(self, b_samples, angles_elec_deg, frequency_hz, volumes_m3):
        """Core loss from field snapshots spread uniformly over one electrical period.

        ``b_samples`` has shape ``(n_samples, n_elements, 2)`` or
        ``(n_samples, n_elements)`` (magnitudes).  Partial periods are refused.
        """
        b = np.asarray(b_samples, dtype=float)
        ang = np.asarray(angles_elec_deg, dtype=float)
        if len(ang) != b.shape[0]:
            raise ValueError("one angle per snapshot required")
        require_full_period(ang)
        return self.core_loss(peak_flux_density(b), frequency_hz, volumes_m3)


def peak_flux_density(b_samples) -> np.ndarray:
    b = np.asarray(b_samples, dtype=float)
    mag = np.hypot(b[..., 0], b[..., 1]) if b.ndim == 3 else np.abs(b)
    return mag.max(axis=0)


def require_full_period(angles_elec_deg, tol: float = 1e-6) -> None:
    ang = np.asarray(angles_elec_deg, dtype=float)
    n = len(ang)
    if n < 2:
        raise ValueError("a full electrical period needs at least two snapshots")
    rel = np.sort(np.mod(ang - ang[0], 360.0))
    expected = np.arange(n) * 360.0 / n
    if not np.allclose(rel, expected, atol=tol):
        raise ValueError(
            f"snapshots do not tile one electrical period uniformly "
            f"(span {rel[-1]:.3f} deg with {n} samples)"
        )
