"""Level-set descent driven by the nodal sensitivity field.

Each iteration rotates the normalized level-set vector toward the
normalized descent field by spherical linear interpolation (which preserves
the L2 norm), optionally smooths the interior values by one-ring averaging,
renormalizes, and accepts the step if the cost decreased, halving the
rotation fraction otherwise.  No distinction between shape and topological
updates is needed: the descent field already encodes both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .fem import ProblemParams, assemble, objective, solve_adjoint, solve_state
from .levelset import classify_nodes, interface_segments
from .mesh import Mesh
from .sensitivity import SensitivityField, ts_derivative

__all__ = [
    "DegenerateAngle",
    "OptimizerConfig",
    "History",
    "unit_mass_matrix",
    "l2_inner",
    "l2_norm",
    "slerp_update",
    "smooth",
    "step",
    "run",
]


class DegenerateAngle(ArithmeticError):
    """Level set and descent field are (anti-)parallel in L2."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Loop settings.

    Each iteration walks the rotation fraction down a geometric ladder from
    ``kappa_init`` and accepts the best candidate seen; the ladder stops
    ``patience`` candidates after the running best stops improving (once a
    decrease exists) or at ``kappa_min``.
    """

    max_iter: int = 800
    kappa_init: float = 1.0
    kappa_min: float = 1e-9
    kappa_shrink: float = 0.5
    patience: int = 2
    smoothing: bool = True
    theta_tol: float = 1e-8
    snapshot_cadence: int = 100    # 0 disables snapshots

    def __post_init__(self):
        if not (0.0 < self.kappa_min < self.kappa_init <= 1.0):
            raise ValueError("need 0 < kappa_min < kappa_init <= 1")
        if not (0.0 < self.kappa_shrink < 1.0):
            raise ValueError("need 0 < kappa_shrink < 1")


@dataclass
class History:
    """Per-iteration record of the optimization run.

    Row 0 describes the initial design (kappa and theta are zero there).
    ``slerp_norm_dev`` tracks how far the pre-smoothing update drifted from
    norm preservation; ``stalled`` flags iterations whose line search found
    no decrease (the design is then kept unchanged).
    """

    iteration: list = field(default_factory=list)
    j: list = field(default_factory=list)
    norm_g: list = field(default_factory=list)
    kappa: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    n_tminus: list = field(default_factory=list)
    n_tplus: list = field(default_factory=list)
    n_shape: list = field(default_factory=list)
    slerp_norm_dev: list = field(default_factory=list)
    stalled: list = field(default_factory=list)

    def append(self, iteration, j, norm_g, kappa, theta, counts,
               norm_dev=0.0, stalled=False) -> None:
        self.iteration.append(iteration)
        self.j.append(j)
        self.norm_g.append(norm_g)
        self.kappa.append(kappa)
        self.theta.append(theta)
        self.n_tminus.append(counts[0])
        self.n_tplus.append(counts[1])
        self.n_shape.append(counts[2])
        self.slerp_norm_dev.append(norm_dev)
        self.stalled.append(stalled)

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write("iter,J,normG,kappa,theta,nTminus,nTplus,nS\n")
            for i in range(len(self.iteration)):
                fh.write(f"{self.iteration[i]},{self.j[i]:.17g},"
                         f"{self.norm_g[i]:.17g},{self.kappa[i]:.17g},"
                         f"{self.theta[i]:.17g},{self.n_tminus[i]},"
                         f"{self.n_tplus[i]},{self.n_shape[i]}\n")


def unit_mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """P1 mass matrix with unit coefficient over the whole domain."""
    pts = mesh.nodes[mesh.elements]
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    local = (np.ones((3, 3)) + np.eye(3)) / 24.0
    vals = local[None, :, :] * det[:, None, None]
    n = len(mesh.elements)
    rows = np.broadcast_to(mesh.elements[:, :, None], (n, 3, 3)).ravel()
    cols = np.broadcast_to(mesh.elements[:, None, :], (n, 3, 3)).ravel()
    return sp.coo_matrix((vals.ravel(), (rows, cols)),
                         shape=(mesh.num_nodes, mesh.num_nodes)).tocsr()


def l2_inner(m0, phi: np.ndarray, psi: np.ndarray) -> float:
    """L2 inner product over the domain; accepts the mesh or a prebuilt
    unit mass matrix."""
    if isinstance(m0, Mesh):
        m0 = unit_mass_matrix(m0)
    return float(phi @ (m0 @ psi))


def l2_norm(m0, phi: np.ndarray) -> float:
    if isinstance(m0, Mesh):
        m0 = unit_mass_matrix(m0)
    return math.sqrt(max(float(phi @ (m0 @ phi)), 0.0))


def slerp_update(phi: np.ndarray, g: np.ndarray, kappa: float,
                 m0: sp.csr_matrix, theta_tol: float = 1e-8):
    """Rotate ``phi`` toward the normalized field ``g`` by the fraction
    ``kappa`` of their L2 angle.

    Returns ``(phi_new, theta)``.  If the two are already aligned the input
    is returned unchanged; anti-alignment leaves no rotation plane and
    raises :class:`DegenerateAngle`.
    """
    norm_phi = l2_norm(m0, phi)
    norm_g = l2_norm(m0, g)
    if norm_phi == 0.0 or norm_g == 0.0:
        raise DegenerateAngle("zero-norm argument")
    cos_theta = l2_inner(m0, phi / norm_phi, g / norm_g)
    theta = math.acos(min(1.0, max(-1.0, cos_theta)))
    if theta < theta_tol:
        return phi.copy(), theta
    if theta > math.pi - theta_tol:
        raise DegenerateAngle("level set anti-parallel to the descent field")
    s = math.sin(theta)
    phi_new = (math.sin((1.0 - kappa) * theta) * phi
               + math.sin(kappa * theta) * (g / norm_g)) / s
    return phi_new, theta


def smooth(mesh: Mesh, psi: np.ndarray) -> np.ndarray:
    """One-ring average on interior nodes of ``psi``'s own sign partition;
    interface nodes are left untouched."""
    labels = classify_nodes(mesh, psi).labels
    out = np.array(psi, dtype=float)
    for k in np.flatnonzero(labels != 0):
        ring = mesh.one_ring[k]
        out[k] = psi[ring].sum() / len(ring)
    return out


@dataclass
class _Evaluation:
    j: float
    u: np.ndarray
    p: np.ndarray
    field: SensitivityField
    norm_g: float


def _evaluate(mesh, phi, params, m0) -> _Evaluation:
    system = assemble(mesh, phi, params)
    u = solve_state(system)
    p = solve_adjoint(system, u, params)
    fld = ts_derivative(mesh, phi, u, p, params)
    return _Evaluation(j=float(objective(mesh, phi, u, params, system=system)),
                       u=u, p=p, field=fld, norm_g=l2_norm(m0, fld.g))


def _cost_only(mesh, phi, params) -> float:
    system = assemble(mesh, phi, params)
    u = solve_state(system)
    return float(objective(mesh, phi, u, params, system=system))


def _line_search(mesh, params, config, m0, phi, ev):
    """Walk the rotation fraction down a geometric ladder and return the
    best improving candidate ``(j, phi, kappa, theta, norm_dev)``, or None
    if no candidate decreases the cost."""
    kappa = config.kappa_init
    best = None
    since_best = 0
    while kappa >= config.kappa_min:
        psi, theta = slerp_update(phi, ev.field.g, kappa, m0,
                                  config.theta_tol)
        if theta < config.theta_tol:
            break  # aligned with the descent field: no rotation possible
        norm_dev = abs(l2_norm(m0, psi) - l2_norm(m0, phi))
        psi_hat = smooth(mesh, psi) if config.smoothing else psi
        candidate = psi_hat / l2_norm(m0, psi_hat)
        j_cand = _cost_only(mesh, candidate, params)
        if best is None or j_cand < best[0]:
            best = (j_cand, candidate, kappa, theta, norm_dev)
            since_best = 0
        else:
            since_best += 1
        if best[0] < ev.j and since_best >= config.patience:
            break
        kappa *= config.kappa_shrink
    if best is None or best[0] >= ev.j:
        return None
    return best


def step(mesh: Mesh, params: ProblemParams, phi: np.ndarray,
         config: OptimizerConfig = OptimizerConfig(),
         m0=None) -> tuple[np.ndarray, dict]:
    """One accepted iteration from a normalized level set.

    Returns the next iterate and a record with the accepted cost, rotation
    fraction and angle; a stalled search returns the input unchanged with
    ``stalled=True``.
    """
    if m0 is None:
        m0 = unit_mass_matrix(mesh)
    phi = np.asarray(phi, dtype=float)
    phi = phi / l2_norm(m0, phi)
    ev = _evaluate(mesh, phi, params, m0)
    if ev.norm_g <= 1e-14:
        return phi, {"j": ev.j, "kappa": 0.0, "theta": 0.0,
                     "stalled": False, "converged": True}
    best = _line_search(mesh, params, config, m0, phi, ev)
    if best is None:
        return phi, {"j": ev.j, "kappa": 0.0, "theta": 0.0,
                     "stalled": True, "converged": False}
    j_new, phi_new, kappa, theta, _ = best
    return phi_new, {"j": j_new, "kappa": kappa, "theta": theta,
                     "stalled": False, "converged": False}


def run(mesh: Mesh, params: ProblemParams,
        config: OptimizerConfig = OptimizerConfig(),
        phi0: Optional[np.ndarray] = None,
        output_dir: Optional[str] = None,
        on_snapshot: Optional[Callable] = None,
        history: Optional[History] = None) -> tuple[History, np.ndarray]:
    """Run the descent loop; returns the history and the final level set.

    The default start is the empty design (constant positive level set,
    normalized).  Snapshots are written every ``snapshot_cadence``
    iterations when ``output_dir`` is given.  A caller-supplied ``history``
    is filled in place, so partial progress survives a solver failure.
    """
    m0 = unit_mass_matrix(mesh)
    if phi0 is None:
        ones = np.ones(mesh.num_nodes)
        phi = ones / l2_norm(m0, ones)
    else:
        phi = np.asarray(phi0, dtype=float)
        norm = l2_norm(m0, phi)
        if norm == 0.0:
            raise ValueError("initial level set has zero norm")
        phi = phi / norm

    history = History() if history is None else history
    ev = _evaluate(mesh, phi, params, m0)
    history.append(0, ev.j, ev.norm_g, 0.0, 0.0,
                   ev.field.classification.counts())
    _maybe_snapshot(mesh, phi, ev, 0, config, output_dir, on_snapshot,
                    uhat=params.uhat)

    for it in range(1, config.max_iter + 1):
        if ev.norm_g <= 1e-14:
            break  # locally optimal: every admissible move increases the cost
        best = _line_search(mesh, params, config, m0, phi, ev)
        if best is None:
            # No decrease found anywhere on the ladder: keep the current
            # design so the cost stays monotone.
            history.append(it, ev.j, ev.norm_g, 0.0, 0.0,
                           ev.field.classification.counts(), 0.0, True)
            continue
        j_new, phi, kappa_used, theta, norm_dev = best
        ev = _evaluate(mesh, phi, params, m0)
        history.append(it, ev.j, ev.norm_g, kappa_used, theta,
                       ev.field.classification.counts(), norm_dev, False)
        _maybe_snapshot(mesh, phi, ev, it, config, output_dir, on_snapshot,
                        uhat=params.uhat)

    _maybe_snapshot(mesh, phi, ev, len(history.iteration) - 1, config,
                    output_dir, on_snapshot, final=True, uhat=params.uhat)
    return history, phi


def _maybe_snapshot(mesh, phi, ev, iteration, config, output_dir,
                    on_snapshot, final=False, uhat=None) -> None:
    due = final or (config.snapshot_cadence
                    and iteration % config.snapshot_cadence == 0)
    if not due:
        return
    if on_snapshot is not None:
        on_snapshot(mesh, phi, ev, iteration, final)
    if output_dir is None:
        return
    from .vtkio import write_interface_vtk, write_vtk
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = "final" if final else f"{iteration:05d}"
    fields = {
        "phi": phi, "u": ev.u, "p": ev.p,
        "dJ": ev.field.dj, "G": ev.field.g,
        "nodeclass": ev.field.labels.astype(float),
    }
    if uhat is not None:
        fields["uhat"] = uhat
    write_vtk(out / f"snapshot_{name}.vtk", mesh, fields)
    if final:
        write_interface_vtk(out / "interface_final.vtk",
                            interface_segments(mesh, phi))
