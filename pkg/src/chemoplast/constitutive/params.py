"""Material parameters and degradation-model variants."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np


class MaterialError(ValueError):
    """Raised for inadmissible material data or degraded moduli."""


class DegradationModel(enum.Enum):
    MODEL_I = "I"
    MODEL_II = "II"
    LINEAR_ELASTIC = "elastic"
    PERFECT_PLASTIC = "perfect"

    @classmethod
    def parse(cls, value: "str | DegradationModel") -> "DegradationModel":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        aliases = {
            "1": "I", "i": "I", "model_i": "I", "modeli": "I",
            "2": "II", "ii": "II", "model_ii": "II", "modelii": "II",
            "linear_elastic": "elastic", "linearelastic": "elastic",
            "perfect_plastic": "perfect", "perfectplastic": "perfect",
        }
        key = aliases.get(key.lower(), key)
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown degradation model {value!r}")

    @property
    def code(self) -> int:
        return _MODEL_CODES[self]


_MODEL_CODES = {
    DegradationModel.MODEL_I: 0,
    DegradationModel.MODEL_II: 1,
    DegradationModel.LINEAR_ELASTIC: 2,
    DegradationModel.PERFECT_PLASTIC: 3,
}


def youngs_modulus(lam: float, mu: float) -> float:
    return mu * (3.0 * lam + 2.0 * mu) / (lam + mu)


@dataclass(frozen=True)
class MaterialParams:
    """Elastic, hardening, coupling and diffusivity constants (SI units).

    Either ``H`` or ``Et`` may be given; the missing one is derived from
    ``Et = H / (1 + H/E)`` with ``E`` computed from the virgin Lame pair.
    ``kappa0`` defaults to ``sigma0 / E``.
    """

    lambda0: float = 1.94e10
    mu0: float = 2.92e10
    lambda1: float = -8.5e8
    mu1: float = -8.5e8
    c_ref: float = 0.05
    sigma0: float = 243e6
    H: float | None = None
    Et: float | None = 2.171e9
    n_w: float = 5.0
    zeta: float = -0.3
    kappa0: float | None = None
    rho_b: tuple[float, float] = (0.0, 0.0)
    d1: float = 50.0
    d2: float = 1.0
    theta: float = math.pi / 3.0
    eta_T: float = 1.0
    eta_S: float = 1.0
    E_ref: float = 1e-3
    phi_T: float = 1.2
    phi_S: float = 1.2
    m_source: float = 0.0

    def __post_init__(self) -> None:
        E = youngs_modulus(self.lambda0, self.mu0)
        if self.H is None and self.Et is None:
            raise MaterialError("one of H or Et is required")
        if self.H is None:
            if not 0.0 <= self.Et < E:
                raise MaterialError(f"Et={self.Et} must lie in [0, E={E})")
            object.__setattr__(self, "H", self.Et / (1.0 - self.Et / E))
        elif self.Et is None:
            object.__setattr__(self, "Et", self.H / (1.0 + self.H / E))
        elif abs(self.H / (1.0 + self.H / E) - self.Et) > 1e-9 * max(abs(self.Et), 1.0):
            raise MaterialError("H and Et are both given but inconsistent")
        if self.kappa0 is None:
            object.__setattr__(self, "kappa0", self.sigma0 / E)
        object.__setattr__(self, "rho_b", tuple(float(v) for v in self.rho_b))
        self.validate()

    @property
    def E0(self) -> float:
        return youngs_modulus(self.lambda0, self.mu0)

    @property
    def nu0(self) -> float:
        return self.lambda0 / (2.0 * (self.lambda0 + self.mu0))

    def validate(self) -> None:
        checks = [
            (self.mu0 > 0, "mu0 must be positive"),
            (3 * self.lambda0 + 2 * self.mu0 > 0, "3*lambda0 + 2*mu0 must be positive"),
            (self.H >= 0, "H must be non-negative"),
            (self.n_w >= 1, "n_w must be >= 1"),
            (self.c_ref > 0, "c_ref must be positive"),
            (self.sigma0 > 0, "sigma0 must be positive"),
            (self.kappa0 > 0, "kappa0 must be positive"),
            (self.d1 > 0 and self.d2 > 0, "principal diffusivities must be positive"),
            (self.eta_T >= 0 and self.eta_S >= 0, "eta_T, eta_S must be non-negative"),
            (self.phi_T > 0 and self.phi_S > 0, "phi_T, phi_S must be positive"),
            (self.E_ref != 0, "E_ref must be non-zero"),
        ]
        for ok, msg in checks:
            if not ok:
                raise MaterialError(msg)

    def check_concentration_range(self, c_max: float) -> None:
        """Model I moduli must stay admissible for c in [0, c_max]."""
        for c in (0.0, c_max):
            lame_params(c, self)

    def with_updates(self, **kw) -> "MaterialParams":
        # H/Et are coupled: drop the derived one when the other is overridden
        if "Et" in kw and "H" not in kw:
            kw["H"] = None
        elif "H" in kw and "Et" not in kw:
            kw["Et"] = None
        if ("lambda0" in kw or "mu0" in kw or "sigma0" in kw) and "kappa0" not in kw:
            kw["kappa0"] = None
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho_b"] = list(self.rho_b)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise MaterialError(f"unknown material keys: {sorted(unknown)}")
        return cls(**data)

    def kernel_vector(self) -> np.ndarray:
        """Flat parameter vector consumed by the stress-update kernels."""
        return np.array(
            [
                self.lambda0, self.mu0, self.lambda1, self.mu1, self.c_ref,
                self.sigma0, self.H, self.n_w, self.zeta, self.kappa0,
            ],
            dtype=np.float64,
        )


def lame_params(c: float, mat: MaterialParams) -> tuple[float, float]:
    """Concentration-dependent Lame pair ``(lambda, mu)``.

    Raises :class:`MaterialError` when the degraded shear or bulk modulus is
    not positive, which means ``c`` left its admissible range.
    """
    if not math.isfinite(c):
        raise MaterialError(f"concentration {c} is not finite")
    s = c / mat.c_ref
    lam = mat.lambda0 + mat.lambda1 * s
    mu = mat.mu0 + mat.mu1 * s
    if mu <= 0 or 3.0 * lam + 2.0 * mu <= 0:
        raise MaterialError(
            f"non-physical degraded moduli at c={c}: lambda={lam:.4g}, mu={mu:.4g}"
        )
    return lam, mu

