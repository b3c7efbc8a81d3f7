"""Box cavity, collocation grid and the trigonometric tensor bases.

Every field lives on a midpoint grid ``s_j = (j + 1/2) L / N`` per axis
(``x = s - L/2`` in body coordinates, so the cavity is centred on the
body's centre of mass).  Along each axis a field is read either as a
cosine series (parity ``"C"``, modes ``k = 0..N-1``) or as a sine series
(parity ``"S"``, modes ``k = 1..N-1``; slot 0 is kept and always zero, the
Nyquist mode ``k = N`` is dropped).  Sharing the index ``k`` between both
parities makes modal differentiation a pure multiplication by ``kappa_k``.

Bases
-----
velocity  : every component sine in every axis (homogeneous Dirichlet).
density   : cosine in every axis (homogeneous Neumann).
magnetic  : component ``i`` sine along axis ``i``, cosine along the others,
            with ``sum_i kappa_i a_i = 0`` per wavevector.  This family has
            ``b.n = 0`` and ``(curl b) x n = 0`` on all six faces.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Tuple

import numpy as np
from scipy import fft as sfft

Parity = Tuple[str, str, str]

SCALAR: Parity = ("C", "C", "C")
VELOCITY: Parity = ("S", "S", "S")
MAGNETIC: Tuple[Parity, Parity, Parity] = (
    ("S", "C", "C"),
    ("C", "S", "C"),
    ("C", "C", "S"),
)
# parity of the components of curl b (and of the electric field it pairs with)
CURL: Tuple[Parity, Parity, Parity] = (
    ("C", "S", "S"),
    ("S", "C", "S"),
    ("S", "S", "C"),
)


def flip(parity: Parity, axis: int) -> Parity:
    p = list(parity)
    p[axis] = "S" if p[axis] == "C" else "C"
    return tuple(p)


def dealias_cutoff(n: int) -> int:
    """Largest retained index for the 2/3 rule on an ``n``-point grid.

    Products of two retained modes alias to ``2n - (k1 + k2)``; keeping
    ``3K < 2n`` guarantees those aliases land above ``K``.
    """
    return (2 * n - 1) // 3


@dataclass(frozen=True)
class BoxCavity:
    lengths: Tuple[float, float, float]

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        if len(lengths) != 3:
            raise ValueError("box needs exactly three lengths")
        if not all(np.isfinite(v) and v > 0 for v in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "lengths", lengths)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(np.square(self.lengths))))


@dataclass(frozen=True)
class SpectralResolution:
    modes: Tuple[int, int, int]
    dealias: bool = True

    def __post_init__(self):
        modes = tuple(int(n) for n in self.modes)
        if len(modes) != 3:
            raise ValueError("resolution needs exactly three mode counts")
        if any(n < 2 for n in modes):
            raise ValueError(f"need at least 2 modes per axis, got {modes}")
        object.__setattr__(self, "modes", modes)


def _fwd_1d(f: np.ndarray, parity: str, axis: int) -> np.ndarray:
    n = f.shape[axis]
    if parity == "C":
        c = sfft.dct(f, type=2, axis=axis) / n
        idx = [slice(None)] * f.ndim
        idx[axis] = 0
        c[tuple(idx)] *= 0.5
        return c
    out = sfft.dst(f, type=2, axis=axis) / n
    # DST output index j holds mode j+1; shift so slot k holds mode k
    out = np.roll(out, 1, axis=axis)
    idx = [slice(None)] * f.ndim
    idx[axis] = 0
    out[tuple(idx)] = 0.0
    return out


def _inv_1d(c: np.ndarray, parity: str, axis: int) -> np.ndarray:
    n = c.shape[axis]
    if parity == "C":
        y = c * n
        idx = [slice(None)] * c.ndim
        idx[axis] = 0
        y[tuple(idx)] *= 2.0
        return sfft.idct(y, type=2, axis=axis)
    y = np.roll(c * n, -1, axis=axis)
    idx = [slice(None)] * c.ndim
    idx[axis] = n - 1
    y[tuple(idx)] = 0.0
    return sfft.idst(y, type=2, axis=axis)


class BasisSet:
    """Grid, wavevectors, masks, weights and transforms for one box/resolution.

    Instances are treated as immutable after construction.
    """

    def __init__(self, box: BoxCavity, res: SpectralResolution):
        self.box = box
        self.res = res
        self.shape = res.modes
        self.lengths = np.asarray(box.lengths)
        self.spacing = self.lengths / np.asarray(self.shape)
        self.cell_volume = float(np.prod(self.spacing))

        self.s1d = [(np.arange(n) + 0.5) * h for n, h in zip(self.shape, self.spacing)]
        self.x1d = [s - L / 2 for s, L in zip(self.s1d, self.lengths)]
        self.k1d = [np.arange(n) for n in self.shape]
        self.kappa1d = [k * np.pi / L for k, L in zip(self.k1d, self.lengths)]

        X = np.meshgrid(*self.x1d, indexing="ij")
        self.x = np.stack(X)
        self.x.setflags(write=False)
        kap = np.meshgrid(*self.kappa1d, indexing="ij")
        self.kappa = np.stack(kap)
        self.kappa.setflags(write=False)
        self.kappa2 = np.sum(self.kappa**2, axis=0)
        kidx = np.stack(np.meshgrid(*self.k1d, indexing="ij"))
        self.kidx = kidx

        self.cutoff = tuple(dealias_cutoff(n) for n in self.shape)
        keep = [k <= K for k, K in zip(self.k1d, self.cutoff)]
        self.dealias_mask = np.ix_(*keep)
        self._keep = np.einsum("i,j,k->ijk", *[m.astype(float) for m in keep]).astype(bool)

        pos = kidx >= 1
        self.velocity_mask = np.broadcast_to(np.all(pos, axis=0), (3,) + self.shape).copy()
        self.magnetic_mask = pos.copy()  # component i present iff k_i >= 1
        self.density_mask = np.ones(self.shape, dtype=bool)
        # modes that carry unknowns: everything below the filter cutoff
        self.active = self._keep.copy() if res.dealias else np.ones(self.shape, dtype=bool)
        self.velocity_active = self.velocity_mask & self.active

    # ------------------------------------------------------------ counts
    @property
    def n_velocity(self) -> int:
        return int(self.velocity_mask.sum())

    @property
    def n_density(self) -> int:
        return int(self.density_mask.sum())

    @cached_property
    def magnetic_dofs(self) -> np.ndarray:
        """Solenoidal degrees of freedom per wavevector."""
        m = self.magnetic_mask.sum(axis=0)
        return np.maximum(m - 1, 0)

    @property
    def n_magnetic(self) -> int:
        return int(self.magnetic_dofs.sum())

    # ------------------------------------------------------------ weights
    def weights(self, parity: Parity) -> np.ndarray:
        """L2 norms squared of the basis functions of a given parity."""
        w = []
        for p, k, L in zip(parity, self.k1d, self.lengths):
            if p == "C":
                w.append(np.where(k == 0, L, L / 2))
            else:
                w.append(np.where(k == 0, 0.0, L / 2))
        return np.einsum("i,j,k->ijk", *w)

    @cached_property
    def velocity_weights(self) -> np.ndarray:
        return self.weights(VELOCITY)

    @cached_property
    def magnetic_weights(self) -> np.ndarray:
        return np.stack([self.weights(p) for p in MAGNETIC])

    # ------------------------------------------------------------ transforms
    def forward(self, f: np.ndarray, parity: Parity) -> np.ndarray:
        """Nodal values -> modal coefficients (grid-quadrature projection)."""
        f = np.asarray(f, dtype=float)
        if f.shape[-3:] != self.shape:
            raise ValueError(f"nodal shape {f.shape} does not match grid {self.shape}")
        off = f.ndim - 3
        c = f
        for ax, p in enumerate(parity):
            c = _fwd_1d(c, p, off + ax)
        return c

    def inverse(self, c: np.ndarray, parity: Parity) -> np.ndarray:
        """Modal coefficients -> nodal values on the collocation grid."""
        c = np.asarray(c, dtype=float)
        if c.shape[-3:] != self.shape:
            raise ValueError(f"modal shape {c.shape} does not match basis {self.shape}")
        off = c.ndim - 3
        f = c
        for ax, p in enumerate(parity):
            f = _inv_1d(f, p, off + ax)
        return f

    def forward_vector(self, f: np.ndarray, parities: Sequence[Parity]) -> np.ndarray:
        return np.stack([self.forward(f[i], p) for i, p in enumerate(parities)])

    def inverse_vector(self, c: np.ndarray, parities: Sequence[Parity]) -> np.ndarray:
        return np.stack([self.inverse(c[i], p) for i, p in enumerate(parities)])

    def dealias(self, c: np.ndarray) -> np.ndarray:
        """Zero every coefficient with an index above the 2/3 cutoff."""
        if not self.res.dealias:
            return np.array(c, dtype=float, copy=True)
        return np.where(self._keep, c, 0.0)

    # ------------------------------------------------------------ derivatives
    def dmodal(self, c: np.ndarray, parity: Parity, axis: int) -> Tuple[np.ndarray, Parity]:
        """Exact derivative of a trigonometric expansion along one axis."""
        kap = self.kappa[axis]
        if parity[axis] == "C":
            return -kap * c, flip(parity, axis)
        return kap * c, flip(parity, axis)

    def dnodal(self, f: np.ndarray, axis: int, parity: str) -> np.ndarray:
        """Derivative of nodal data along ``axis`` using the 1-D interpolant of
        the given parity; other axes are left untouched."""
        off = f.ndim - 3
        ax = off + axis
        c = _fwd_1d(np.asarray(f, dtype=float), parity, ax)
        shape = [1] * f.ndim
        shape[ax] = -1
        kap = self.kappa1d[axis].reshape(shape)
        if parity == "C":
            return _inv_1d(-kap * c, "S", ax)
        return _inv_1d(kap * c, "C", ax)

    # ------------------------------------------------------------ quadrature
    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Midpoint-grid quadrature over the cavity (last three axes)."""
        return np.sum(f, axis=(-3, -2, -1)) * self.cell_volume

    # ------------------------------------------------------------ evaluation
    def evaluate(self, c: np.ndarray, parity: Parity, x1: np.ndarray, x2: np.ndarray,
                 x3: np.ndarray) -> np.ndarray:
        """Evaluate an expansion on the tensor grid ``x1 x x2 x x3`` (body
        coordinates, arbitrary points, including the faces)."""
        mats = []
        for p, xs, kap, L in zip(parity, (x1, x2, x3), self.kappa1d, self.lengths):
            s = np.atleast_1d(np.asarray(xs, dtype=float)) + L / 2
            arg = np.outer(s, kap)
            mats.append(np.cos(arg) if p == "C" else np.sin(arg))
        return np.einsum("...abc,ia,jb,kc->...ijk", c, *mats)


def build_bases(box: BoxCavity, res: SpectralResolution) -> BasisSet:
    return BasisSet(box, res)


def magnetic_constraint_matrix(basis: BasisSet, k: Sequence[int]) -> np.ndarray:
    """1 x m matrix ``a -> kappa.a`` restricted to the components present at ``k``."""
    k = tuple(int(v) for v in k)
    kap = np.array([basis.kappa1d[i][k[i]] for i in range(3)])
    present = [i for i in range(3) if k[i] >= 1]
    return kap[present].reshape(1, -1)
