"""Series CSV, legacy VTK field dumps and binary checkpoints."""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np

from .basis import BoxCavity, SpectralResolution, build_bases
from .kinematics import RotationState
from .state import (FluidState, PhysParams, RegParams, RigidParams, RigidState, SystemState)

CSV_COLUMNS = ("t,F,kinetic,magnetic,internal,dissipation,balance_residual,mass_drift,divb_max,"
               "P_norm,M_norm,M_drift,Q_orth_err,xi_x,xi_y,xi_z,omega_x,omega_y,omega_z,"
               "min_rho,rel_energy").split(",")
CSV_HEADER = ",".join(CSV_COLUMNS)
CHECKPOINT_MAGIC = b"CAVMHD1"


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def format_row(row: Mapping[str, Optional[float]]) -> str:
    unknown = set(row) - set(CSV_COLUMNS)
    if unknown:
        raise KeyError(f"unknown CSV columns {sorted(unknown)}")
    return ",".join(_fmt(row.get(c)) for c in CSV_COLUMNS)


class SeriesWriter:
    """Appends rows and flushes after each one so a crash leaves only complete rows."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"cannot open {self.path}: {exc}") from exc
        self._fh.write(CSV_HEADER + "\n")
        self._fh.flush()

    def write(self, row: Mapping[str, Optional[float]]):
        self._fh.write(format_row(row) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path, rows: Iterable[Mapping[str, Optional[float]]]) -> Path:
    with SeriesWriter(path) as w:
        for r in rows:
            w.write(r)
    return Path(path)


def read_csv(path) -> List[Dict[str, Optional[float]]]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        out = []
        for line in fh:
            vals = line.rstrip("\n").split(",")
            out.append({h: (float(v) if v else None) for h, v in zip(header, vals)})
    return out


def write_vtk(path, state: SystemState, title: str = "cavity MHD fields") -> Path:
    """Legacy ASCII STRUCTURED_POINTS with point data rho, u, b on the collocation grid."""
    basis = state.basis
    nx, ny, nz = basis.shape
    rho = state.rho_nodal()
    u = state.u_nodal()
    b = state.b_nodal()
    origin = [basis.x1d[i][0] for i in range(3)]
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {nx} {ny} {nz}",
             "ORIGIN " + " ".join(repr(float(o)) for o in origin),
             "SPACING " + " ".join(repr(float(h)) for h in basis.spacing),
             f"POINT_DATA {nx * ny * nz}", "SCALARS rho double 1", "LOOKUP_TABLE default"]
    # VTK orders points with x fastest
    lines += [repr(float(v)) for v in np.transpose(rho, (2, 1, 0)).ravel()]
    for name, f in (("u", u), ("b", b)):
        lines.append(f"VECTORS {name} double")
        arr = np.transpose(f, (3, 2, 1, 0)).reshape(-1, 3)
        lines += [" ".join(repr(float(c)) for c in row) for row in arr]
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return Path(path)


def read_vtk_scalar(path, name: str = "rho") -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    dims = next(l for l in text if l.startswith("DIMENSIONS")).split()[1:]
    n = int(np.prod([int(d) for d in dims]))
    i = next(k for k, l in enumerate(text) if l.startswith(f"SCALARS {name}"))
    vals = np.array([float(v) for v in text[i + 2:i + 2 + n]])
    nx, ny, nz = (int(d) for d in dims)
    return vals.reshape(nz, ny, nx).transpose(2, 1, 0)


# ---------------------------------------------------------------- checkpoints
BLOCKS = ("rho", "v", "b", "omega", "xi", "Q", "t")


def write_checkpoint(path, state: SystemState, metadata: Optional[Dict] = None) -> Path:
    """``CAVMHD1\\n``, a little-endian u64 header length, a JSON header, then
    little-endian float64 blocks in the order rho, v, b, omega, xi, Q, t."""
    basis = state.basis
    blocks = {
        "rho": state.fluid.rho, "v": state.fluid.v, "b": state.fluid.b,
        "omega": np.asarray(state.rigid.omega, float), "xi": np.asarray(state.rigid.xi, float),
        "Q": state.rotation.Q, "t": np.array([state.t]),
    }
    header = {
        "modes": list(basis.shape), "lengths": list(basis.box.lengths),
        "dealias": basis.res.dealias,
        "phys": {"a": state.phys.a, "gamma": state.phys.gamma, "mu": state.phys.mu,
                 "lam": state.phys.lam},
        "reg": {"eps": state.reg.eps, "delta": state.reg.delta, "beta": state.reg.beta},
        "rigid": {"m_B": state.rigid_params.m_B, "I_c": state.rigid_params.I_c.tolist(),
                  "m_F": state.rigid_params.m_F},
        "blocks": [[k, list(np.shape(blocks[k]))] for k in BLOCKS],
        "metadata": metadata or {},
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n")
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        for k in BLOCKS:
            fh.write(np.ascontiguousarray(blocks[k], dtype="<f8").tobytes())
    os.replace(tmp, path)
    return path


def read_checkpoint(path):
    """Return ``(state, header)``."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint (magic {magic!r})")
        (n,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(n).decode("utf-8"))
        data = {}
        for name, shape in header["blocks"]:
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated block {name}")
            data[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
    basis = build_bases(BoxCavity(tuple(header["lengths"])),
                        SpectralResolution(tuple(header["modes"]), header["dealias"]))
    ph, rg, ri = header["phys"], header["reg"], header["rigid"]
    state = SystemState(
        basis,
        FluidState(data["rho"], data["v"], data["b"]),
        RigidState(data["omega"], data["xi"]),
        RotationState(data["Q"], float(data["t"][0])),
        PhysParams(**ph), RegParams(**rg),
        RigidParams(ri["m_B"], np.array(ri["I_c"]), ri["m_F"]),
        float(data["t"][0]),
    )
    return state, header
