"""Run configuration: flat ``key = value`` files with dotted section prefixes.

Example::

    # cube cavity, desk resolution
    box.lengths = pi, pi, pi
    grid.modes = 16
    phys.gamma = 1.4
    ic.preset = small_data
    time.T = 2.0
    time.dt = 0.01

Blank lines and ``#`` comments are ignored.  Every key must be known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

PRESETS = ("rest", "small_data", "spin_up", "manufactured_decay")
STUDY_MODES = ("single", "continuation_eps", "continuation_delta", "refine_dt", "refine_N",
               "weak_vs_strong")


class ConfigError(ValueError):
    pass


def _num(text: str) -> float:
    t = text.strip().lower()
    if t in ("pi", "+pi"):
        return math.pi
    if t.endswith("pi") and t[:-2].strip():
        return float(t[:-2].strip().rstrip("*")) * math.pi
    return float(t)


def _triple(text: str) -> Tuple[float, float, float]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) == 1:
        v = _num(parts[0])
        return (v, v, v)
    if len(parts) != 3:
        raise ValueError("expected one value or three comma-separated values")
    return tuple(_num(p) for p in parts)


def _int_triple(text: str) -> Tuple[int, int, int]:
    vals = _triple(text)
    if any(v != int(v) for v in vals):
        raise ValueError("expected integers")
    return tuple(int(v) for v in vals)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(_num(p) for p in text.replace(";", ",").split(",") if p.strip())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(p) for p in text.replace(";", ",").split(",") if p.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean (true/false)")


def _str(text: str) -> str:
    return text.strip()


def _inertia(text: str) -> Tuple[float, ...]:
    vals = _floats(text)
    if len(vals) not in (1, 3, 6, 9):
        raise ValueError("inertia needs 1 (isotropic), 3 (diagonal), 6 (xx,yy,zz,xy,xz,yz) "
                         "or 9 values")
    return vals


# key -> (attribute, parser, default, help)
KEYS: Dict[str, Tuple[str, Callable[[str], Any], Any, str]] = {
    "box.lengths": ("lengths", _triple, (math.pi,) * 3, "cavity edge lengths"),
    "grid.modes": ("modes", _int_triple, (16, 16, 16), "modes per axis (grid points)"),
    "grid.dealias": ("dealias", _bool, True, "2/3-rule filtering of products"),
    "phys.a": ("a", _num, 1.0, "pressure constant in p = a rho^gamma"),
    "phys.gamma": ("gamma", _num, 1.4, "adiabatic exponent, > 1"),
    "phys.mu": ("mu", _num, 0.1, "shear viscosity, > 0"),
    "phys.lam": ("lam", _num, 0.0, "bulk viscosity, >= 0"),
    "reg.eps": ("eps", _num, 0.0, "artificial density diffusion"),
    "reg.delta": ("delta", _num, 0.0, "artificial pressure coefficient"),
    "reg.beta": ("beta", _num, 5.0, "artificial pressure exponent, > max(gamma, 4)"),
    "rigid.m_B": ("m_B", _num, 1.0, "body mass"),
    "rigid.I_c": ("I_c", _inertia, (1.0,), "body inertia tensor"),
    "ic.preset": ("preset", _str, "small_data", "|".join(PRESETS)),
    "ic.rho_bar": ("rho_bar", _num, 1.0, "mean density"),
    "ic.amplitude": ("amplitude", _num, 1e-2, "perturbation amplitude"),
    "ic.kmax": ("kmax", int, 2, "highest perturbed mode index"),
    "ic.omega0": ("omega0", _triple, (0.0, 0.0, 0.0), "initial angular velocity"),
    "ic.seed": ("seed", int, 0, "seed of the perturbation generator"),
    "time.T": ("T", _num, 1.0, "horizon"),
    "time.dt": ("dt", _num, None, "fixed step; empty means cfl-based"),
    "time.cfl": ("cfl", _num, 0.4, "CFL number used when dt is not given"),
    "time.stride": ("stride", int, 1, "output every stride steps"),
    "time.picard_max": ("picard_max", int, 2, "fixed-point sweeps per step"),
    "time.picard_tol": ("picard_tol", _num, 1e-10, "relative update tolerance"),
    "time.rule": ("rule", _str, "backward_euler", "backward_euler|trapezoidal"),
    "time.imex": ("imex", _bool, True, "implicit diffusion"),
    "time.order": ("order", lambda s: tuple(p.strip() for p in s.split(",") if p.strip()),
                   ("continuity", "induction", "momentum"), "sub-step ordering"),
    "time.enforce_constraint": ("enforce_constraint", _bool, False,
                                "reset xi from the momentum constraint after each step"),
    "out.dir": ("out_dir", _str, "out", "output directory"),
    "out.vtk_stride": ("vtk_stride", int, 0, "VTK dump every n output rows (0: first and last)"),
    "study.mode": ("mode", _str, "single", "|".join(STUDY_MODES)),
    "study.levels": ("levels", _floats, (1e-2, 1e-3, 1e-4), "continuation parameter values"),
    "study.refine": ("refine", _ints, (1, 2, 4), "dt divisors or mode counts for refinement"),
    "study.reference_modes": ("reference_modes", int, 24, "reference resolution"),
}


@dataclass
class RunConfig:
    lengths: Tuple[float, float, float] = (math.pi,) * 3
    modes: Tuple[int, int, int] = (16, 16, 16)
    dealias: bool = True
    a: float = 1.0
    gamma: float = 1.4
    mu: float = 0.1
    lam: float = 0.0
    eps: float = 0.0
    delta: float = 0.0
    beta: float = 5.0
    m_B: float = 1.0
    I_c: Tuple[float, ...] = (1.0,)
    preset: str = "small_data"
    rho_bar: float = 1.0
    amplitude: float = 1e-2
    kmax: int = 2
    omega0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    seed: int = 0
    T: float = 1.0
    dt: Optional[float] = None
    cfl: float = 0.4
    stride: int = 1
    picard_max: int = 2
    picard_tol: float = 1e-10
    rule: str = "backward_euler"
    imex: bool = True
    order: Tuple[str, ...] = ("continuity", "induction", "momentum")
    enforce_constraint: bool = False
    out_dir: str = "out"
    vtk_stride: int = 0
    mode: str = "single"
    levels: Tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    refine: Tuple[int, ...] = (1, 2, 4)
    reference_modes: int = 24

    def inertia_matrix(self) -> np.ndarray:
        v = self.I_c
        if len(v) == 1:
            return v[0] * np.eye(3)
        if len(v) == 3:
            return np.diag(v)
        if len(v) == 6:
            xx, yy, zz, xy, xz, yz = v
            return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
        return np.array(v, dtype=float).reshape(3, 3)

    def validate(self) -> "RunConfig":
        checks = [
            ("phys.gamma", self.gamma > 1, "gamma > 1"),
            ("phys.a", self.a > 0, "a > 0"),
            ("phys.mu", self.mu > 0, "mu > 0"),
            ("phys.lam", self.lam >= 0, "lam >= 0"),
            ("reg.eps", self.eps >= 0, "eps >= 0"),
            ("reg.delta", self.delta >= 0, "delta >= 0"),
            ("reg.beta", self.delta == 0 or self.beta > max(self.gamma, 4.0),
             f"beta > max{{gamma, 4}} = {max(self.gamma, 4.0):g} when delta > 0"),
            ("box.lengths", all(L > 0 for L in self.lengths), "positive lengths"),
            ("grid.modes", all(n >= 2 for n in self.modes), "at least 2 modes per axis"),
            ("rigid.m_B", self.m_B > 0, "m_B > 0"),
            ("ic.rho_bar", self.rho_bar > 0, "rho_bar > 0"),
            ("ic.preset", self.preset in PRESETS, "one of " + ", ".join(PRESETS)),
            ("ic.kmax", self.kmax >= 1, "kmax >= 1"),
            ("time.T", self.T > 0, "horizon > 0"),
            ("time.dt", self.dt is None or self.dt > 0, "dt > 0"),
            ("time.cfl", 0 < self.cfl <= 1, "0 < cfl <= 1"),
            ("time.stride", self.stride >= 1, "stride >= 1"),
            ("time.picard_max", self.picard_max >= 1, "picard_max >= 1"),
            ("time.rule", self.rule in ("backward_euler", "trapezoidal"),
             "backward_euler or trapezoidal"),
            ("time.order", sorted(self.order) == ["continuity", "induction", "momentum"],
             "a permutation of continuity, induction, momentum"),
            ("study.mode", self.mode in STUDY_MODES, "one of " + ", ".join(STUDY_MODES)),
        ]
        for name, ok, need in checks:
            if not ok:
                raise ConfigError(f"{name}: constraint violated, need {need}")
        I = self.inertia_matrix()
        if not np.allclose(I, I.T) or np.linalg.eigvalsh(0.5 * (I + I.T)).min() <= 0:
            raise ConfigError("rigid.I_c: constraint violated, need symmetric positive definite")
        return self

    def with_(self, **kw) -> "RunConfig":
        from dataclasses import replace
        return replace(self, **kw).validate()

    def as_dict(self) -> Dict[str, Any]:
        out = {}
        for key, (attr, _, _, _) in KEYS.items():
            val = getattr(self, attr)
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        attr, parser, _, _ = KEYS[key]
        if key == "time.dt" and val == "":
            values[attr] = None
            continue
        try:
            values[attr] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values).validate()


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def describe_keys() -> str:
    lines = []
    for key, (_, _, default, text) in KEYS.items():
        d = ",".join(str(x) for x in default) if isinstance(default, tuple) else default
        lines.append(f"  {key:<24} {text} (default: {d})")
    return "\n".join(lines)
