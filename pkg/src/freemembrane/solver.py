"""Electromechanical equilibrium, pull-in / pull-out detection and sweeps.

Equilibrium solves ``K u - f_es(u) - f_contact(u) - f_ext = 0`` by Newton
iteration with penalty contact. Nodes over an electrode meet the dielectric
face ``gap`` below the flat membrane; ohmic bump nodes stop at ``stop_height``.
Other nodes have nothing underneath them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .beam import MIDPOINT_SHAPE, DeflectionField, _solve, assemble, element_dofs, pinned_dofs
from .device import (
    EXTERNAL,
    INTERNAL,
    DeviceSpec,
    Mesh,
    ValidatedSpec,
    build_mesh,
    electrode_mask,
    validate_spec,
    with_ratio,
)
from .electrostatic import EPS0, ActuationState, ElectrodeMap, effective_gap
from .errors import (
    FreeMembraneError,
    NeverReleases,
    NoConvergence,
    NoPullInBelowVmax,
    OutOfRange,
    ZeroGap,
)

log = logging.getLogger(__name__)

_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverSettings:
    newton_tol: float = 1e-9
    max_newton_iters: int = 80
    v_step: float = 0.05
    bisect_tol: float = 1e-3
    penalty_stiffness: float = 1e4
    n_elements: int = 200
    max_step_fraction: float = 0.2  # Newton step cap, as a fraction of the gap
    jump_fraction: float = 0.1      # displacement jump flagged as pull-in, fraction of gap
    snap_fraction: float = 0.01     # jump left across a bisected contact onset that marks a snap
    fringing: bool = False

    def __post_init__(self):
        for name in ("newton_tol", "max_newton_iters", "v_step", "bisect_tol",
                     "penalty_stiffness", "n_elements", "max_step_fraction", "jump_fraction",
                     "snap_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.bisect_tol < self.v_step:
            raise ValueError("bisect_tol must be smaller than v_step")


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    deflection: DeflectionField
    contact_nodes: frozenset
    contact_forces: dict          # node -> compressive contact force (N)
    pin_reactions: tuple          # upward force exerted by each pillar (N)
    converged: bool
    iterations: int
    residual: float               # relative residual norm
    state: ActuationState
    adhesive_forces: dict = field(default_factory=dict)  # node -> tension held by adhesion (N)
    min_eigenvalue: float | None = None
    stop_contacts: frozenset = frozenset()  # contacted nodes that are ohmic bumps

    @property
    def collapsed(self) -> bool:
        """True when the membrane rests on the dielectric somewhere (not only on bumps)."""
        return bool(self.contact_nodes - self.stop_contacts)

    @property
    def peak(self) -> float:
        return self.deflection.peak()

    @property
    def has_contact(self) -> bool:
        return bool(self.contact_nodes)

    @property
    def lift_off(self) -> bool:
        """True when a pillar would have to pull the membrane down."""
        return min(self.pin_reactions) < 0


@dataclass(frozen=True, eq=False)
class PullInResult:
    v_pullin: float
    bracket: tuple
    deflection_at_onset: DeflectionField | None
    peak_displacement: float
    onset: object = None
    collapsed: object = None


@dataclass(frozen=True, eq=False)
class PullOutResult:
    v_pullout: float
    bracket: tuple
    released: object = None
    last_contacted: object = None


# ---------------------------------------------------------------------------
# Coupled beam model
# ---------------------------------------------------------------------------

class CoupledModel:
    """Precomputed stiffness, electrode and contact data for one mesh.

    Equilibria are found by minimising the total potential energy (strain,
    electrostatic co-energy, penalty contact, external work) with a modified
    Newton method: the Hessian is shifted until positive definite and steps are
    backtracked on the energy. Converged points are therefore stable states.
    """

    def __init__(self, mesh: Mesh, settings: SolverSettings = SolverSettings()):
        self.mesh = mesh
        self.settings = settings
        self.device = mesh.device
        self.gap = mesh.device.gap
        self.K = assemble(mesh)
        self._absK = abs(self.K)
        self.pins = pinned_dofs(mesh)
        self.free = np.setdiff1d(np.arange(mesh.n_dofs), self.pins)
        self.emap = ElectrodeMap(mesh)
        self.dofs = element_dofs(mesh)
        le = mesh.lengths
        # gradient of the midpoint-sampled energy: q * le * N(1/2)
        self._n = MIDPOINT_SHAPE[None, :] * np.column_stack([np.ones_like(le), le, np.ones_like(le), le])
        self._b = le[:, None] * self._n
        self._jr = np.repeat(self.dofs, 4, axis=1).ravel()
        self._jc = np.tile(self.dofs, (1, 4)).ravel()
        # contact surfaces: the dielectric face under electrode nodes, the bump stops,
        # nothing elsewhere
        self.surface = np.where(mesh.node_zone >= 0, self.gap, np.inf)
        self.bump_nodes = np.array(mesh.contact_nodes, dtype=int)
        if len(self.bump_nodes):
            self.surface[self.bump_nodes] = mesh.device.contacts.stop_height
        self.surface[list(mesh.pillar_nodes)] = np.inf
        self._bump_set = frozenset(int(i) for i in self.bump_nodes)
        # rotation residuals carry N*m; scale to N for the convergence norm
        scale = np.ones(mesh.n_dofs)
        scale[1::2] = 1.0 / float(np.mean(le))
        self._rscale = scale

    # -- pieces of the residual ------------------------------------------------

    def electrostatic(self, state: ActuationState, u: np.ndarray):
        """Nodal electrostatic force and per-element stiffness-loss blocks."""
        prof = self.emap.evaluate(state, u, clamp=True, fringing=self.settings.fringing)
        f = np.zeros(self.mesh.n_dofs)
        np.add.at(f, self.dofs, prof.q[:, None] * self._b)
        blocks = prof.dq[:, None, None] * self._b[:, :, None] * self._n[:, None, :]
        return f, blocks

    def penetration(self, u: np.ndarray) -> np.ndarray:
        return -u[0::2] - self.surface

    def _residual(self, state, u, f_ext, adh, stuck):
        k_pen = self.settings.penalty_stiffness
        f_es, blocks = self.electrostatic(state, u)
        pen = self.penetration(u)
        active = (pen > 0) | stuck
        f_c = np.zeros(self.mesh.n_dofs)
        f_c[0::2] = np.where(active, k_pen * pen, 0.0)
        F = f_es + f_c + f_ext
        return self.K @ u - F, F, blocks, active

    def energy(self, state, u, f_ext, stuck) -> float:
        pen = self.penetration(u)
        active = (pen > 0) | stuck
        e_c = 0.5 * self.settings.penalty_stiffness * float(np.sum(np.where(active, pen, 0.0) ** 2))
        e_es = self.emap.energy(state, u, fringing=self.settings.fringing)
        return 0.5 * float(u @ (self.K @ u)) - float(f_ext @ u) + e_es + e_c

    # -- solver ----------------------------------------------------------------

    def solve(self, state: ActuationState, initial: DeflectionField | np.ndarray | None = None,
              f_ext: np.ndarray | None = None, adhesion: float | np.ndarray = 0.0,
              sticky: Iterable[int] = (), with_eigen: bool = False,
              max_iters: int | None = None) -> EquilibriumResult:
        """Equilibrium from ``initial`` (flat when omitted).

        ``max_iters`` overrides the Newton budget for slow snap-through solves.

        ``sticky`` nodes start adhered: they hold tension up to ``adhesion`` (N,
        ohmic bump nodes only) and let go for good once it is exceeded.
        """
        n = self.mesh.n_dofs
        if initial is None:
            u = np.zeros(n)
        else:
            u = np.array(initial.u if isinstance(initial, DeflectionField) else initial, dtype=float)
        u[self.pins] = 0.0
        f_ext = np.zeros(n) if f_ext is None else np.asarray(f_ext, dtype=float)
        adh = np.zeros(self.mesh.n_nodes)
        if len(self.bump_nodes):
            adh[self.bump_nodes] = adhesion if np.isscalar(adhesion) else np.asarray(adhesion)
        stuck = np.zeros(self.mesh.n_nodes, dtype=bool)
        stuck[list(sticky)] = True
        stuck &= adh > 0

        total_it = 0
        while True:
            u, converged, it, rel, active = self._minimise(state, u, f_ext, stuck, max_iters)
            total_it += it
            k_pen = self.settings.penalty_stiffness
            tension = -k_pen * self.penetration(u)
            over = stuck & (tension > adh)
            if not converged or not np.any(over):
                break
            # release the most overloaded adhered node and re-solve
            excess = np.where(over, tension - adh, -np.inf)
            stuck[int(np.argmax(excess))] = False
        _, _, blocks, active = self._residual(state, u, f_ext, adh, stuck)
        return self._result(state, u, f_ext, converged, total_it, rel, active, with_eigen)

    def _minimise(self, state, u, f_ext, stuck, max_iters=None):
        s = self.settings
        n_max = s.max_newton_iters if max_iters is None else int(max_iters)
        max_step = s.max_step_fraction * self.gap
        rel = np.inf
        prev_active = None
        adh_dummy = None
        R, F, blocks, active = self._residual(state, u, f_ext, adh_dummy, stuck)
        energy = self.energy(state, u, f_ext, stuck)
        it = 0
        converged = False
        for it in range(n_max + 1):
            Rs = (R * self._rscale)[self.free]
            f_norm = np.linalg.norm((F * self._rscale)[self.free])
            # K is ill-conditioned (~n^4): allow the round-off floor of evaluating K u
            floor = _ROUNDOFF * np.linalg.norm((self._absK @ np.abs(u)) * self._rscale)
            r_norm = np.linalg.norm(Rs)
            rel = r_norm / f_norm if f_norm > 0 else (0.0 if r_norm == 0 else np.inf)
            same_set = prev_active is not None and np.array_equal(active, prev_active)
            if r_norm <= s.newton_tol * f_norm + floor and (same_set or it == 0):
                converged = True
                break
            if it == n_max:
                break
            prev_active = active
            H = self._tangent(blocks, active)[self.free][:, self.free]
            du, shifted = _modified_newton_step(H, -R[self.free])
            if du is None:
                break
            full = np.zeros(self.mesh.n_dofs)
            full[self.free] = du
            step = np.max(np.abs(full[0::2]))
            alpha = min(1.0, max_step / step) if step > 0 else 1.0
            slope = float(R[self.free] @ du)
            accepted = False
            for _ in range(30):
                trial = u + alpha * full
                e_trial = self.energy(state, trial, f_ext, stuck)
                if e_trial <= energy + 1e-4 * alpha * slope:
                    accepted = True
                    break
                if not shifted:
                    # near convergence the energy change drowns in round-off
                    out = self._residual(state, trial, f_ext, adh_dummy, stuck)
                    if np.linalg.norm((out[0] * self._rscale)[self.free]) < (1 - 1e-4 * alpha) * r_norm:
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted:
                break
            u = trial
            energy = e_trial
            R, F, blocks, active = self._residual(state, u, f_ext, adh_dummy, stuck)
        return u, converged, it, rel, active

    def _tangent(self, blocks, active) -> sp.csr_matrix:
        J = sp.coo_matrix((blocks.ravel(), (self._jr, self._jc)), shape=self.K.shape)
        pen = np.zeros(self.mesh.n_dofs)
        pen[0::2] = np.where(active, self.settings.penalty_stiffness, 0.0)
        return (self.K - J + sp.diags(pen)).tocsr()

    def min_eigenvalue(self, state: ActuationState, u: np.ndarray) -> float:
        """Smallest eigenvalue of the Jacobi-scaled tangent on free DOFs.

        Only its sign is meaningful (scaling is a congruence).
        """
        _, blocks = self.electrostatic(state, u)
        active = self.penetration(u) > 0
        A = self._tangent(blocks, active)[self.free][:, self.free]
        ab, _ = _scaled_band(A)
        return float(sla.eigvals_banded(ab, lower=True, select="i", select_range=(0, 0))[0])

    def _result(self, state, u, f_ext, converged, it, rel, active, with_eigen):
        k_pen = self.settings.penalty_stiffness
        pen = self.penetration(u)
        forces = {}
        adhesive = {}
        for i in np.flatnonzero(active):
            fc = float(k_pen * pen[i])
            if fc >= 0:
                forces[int(i)] = fc
            else:
                adhesive[int(i)] = -fc
        f_es, _ = self.electrostatic(state, u)
        f_c = np.zeros(self.mesh.n_dofs)
        f_c[0::2] = np.where(active, k_pen * pen, 0.0)
        r = self.K @ u - f_es - f_c - f_ext
        reactions = tuple(float(r[d]) for d in self.pins)
        lam = self.min_eigenvalue(state, u) if with_eigen else None
        res = EquilibriumResult(
            deflection=DeflectionField(u.copy(), self.mesh),
            contact_nodes=frozenset(forces) | frozenset(adhesive),
            contact_forces=forces,
            pin_reactions=reactions,
            converged=converged,
            iterations=it,
            residual=float(rel),
            state=state,
            adhesive_forces=adhesive,
            min_eigenvalue=lam,
            stop_contacts=(frozenset(forces) | frozenset(adhesive)) & self._bump_set,
        )
        if converged and res.lift_off:
            log.warning("pillar reaction is negative (membrane would lift off a pillar): %s", reactions)
        return res

    # -- helpers -----------------------------------------------------------------

    def contacted_guess(self, kind: str, depth: float = 1.02) -> DeflectionField:
        """Linear deflection under a uniform pull on the ``kind`` electrodes, scaled so
        those electrodes reach ``depth * gap``: a start point on the collapsed branch."""
        mask = np.isin(self.emap.kind, [kind])
        q = np.where(mask, -self.mesh.width, 0.0)
        f = np.zeros(self.mesh.n_dofs)
        np.add.at(f, self.dofs, (q * self.mesh.lengths / 12.0)[:, None]
                  * np.column_stack([6 * np.ones_like(q), self.mesh.lengths, 6 * np.ones_like(q), -self.mesh.lengths]))
        u = np.zeros(self.mesh.n_dofs)
        u[self.free] = _solve(self.K[self.free][:, self.free], f[self.free])
        nodes = electrode_mask(self.mesh, [kind])
        scale = depth * self.gap / np.max(-u[0::2][nodes])
        return DeflectionField(u * scale, self.mesh)


_BW = 3  # half-bandwidth of the beam matrices (2 DOFs per node, 2-node elements)


def _scaled_band(A: sp.spmatrix):
    d = A.diagonal()
    scale = 1.0 / np.sqrt(np.abs(d))
    S = sp.diags(scale)
    As = (S @ A @ S).tocsr()
    m = As.shape[0]
    ab = np.zeros((_BW + 1, m))
    for k in range(_BW + 1):
        diag = As.diagonal(-k)
        ab[k, :len(diag)] = diag
    return ab, scale


def _modified_newton_step(H: sp.spmatrix, rhs: np.ndarray):
    """Solve ``(H + tau D) x = rhs`` with the smallest tau in a ladder that makes
    the Jacobi-scaled matrix positive definite. Returns (x, shifted)."""
    H = 0.5 * (H + H.T)
    ab, scale = _scaled_band(H)
    for tau in (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0):
        shifted_ab = ab.copy()
        shifted_ab[0] += tau
        try:
            c = sla.cholesky_banded(shifted_ab, lower=True)
        except np.linalg.LinAlgError:
            continue
        x = sla.cho_solve_banded((c, True), scale * rhs)
        return scale * x, tau > 0
    return None, True


def make_model(device: DeviceSpec | ValidatedSpec, settings: SolverSettings = SolverSettings(),
               mesh: Mesh | None = None) -> CoupledModel:
    if mesh is None:
        mesh = build_mesh(validate_spec(device), settings.n_elements)
    return CoupledModel(mesh, settings)


def equilibrium(device, mesh: Mesh | None, state: ActuationState, settings: SolverSettings = SolverSettings(),
                initial: DeflectionField | None = None, **kwargs) -> EquilibriumResult:
    """Single equilibrium point. Non-convergence is reported via ``converged``."""
    return make_model(device, settings, mesh).solve(state, initial, **kwargs)


# ---------------------------------------------------------------------------
# Voltage continuation on a single parameter
# ---------------------------------------------------------------------------

class _BeamBranch:
    """Adapter: equilibrium as a function of one electrode group's voltage."""

    def __init__(self, model: CoupledModel, kind: str, base: ActuationState, **solve_kw):
        self.model = model
        self.kind = kind
        self.base = base
        self.gap = model.gap
        self.solve_kw = solve_kw

    def solve(self, v: float, start=None, eigen: bool = True):
        init = None if start is None else (start.deflection if hasattr(start, "deflection") else start)
        return self.model.solve(self.base.with_voltage(self.kind, v), init, with_eigen=eigen, **self.solve_kw)

    def collapsed_start(self):
        return self.model.contacted_guess(self.kind)

    @staticmethod
    def jump(a, b) -> float:
        return float(np.max(np.abs(a.deflection.w - b.deflection.w)))


def _unstable(br, r, ref, settings) -> bool:
    # a bump touching down smoothly is a stable state; landing on the dielectric is not
    if not r.converged or r.collapsed:
        return True
    if r.min_eigenvalue is not None and r.min_eigenvalue <= 0:
        return True
    return br.jump(r, ref) > settings.jump_fraction * br.gap


def _touchdown(r, ref) -> bool:
    return r.has_contact and not ref.has_contact


def _scan_pullin(br, v_max: float, settings: SolverSettings, v_start: float = 0.0):
    prev = br.solve(v_start, None)
    if _unstable(br, prev, prev, settings):
        raise NoConvergence("no stable equilibrium at the scan start", voltage=v_start)
    v_prev = v_start
    n_steps = int(np.floor((v_max - v_start) / settings.v_step + 1e-9))
    grid = [v_start + settings.v_step * k for k in range(1, n_steps + 1)]
    if not grid or grid[-1] < v_max - 1e-12:
        grid.append(v_max)

    def event(r, ref):
        return _unstable(br, r, ref, settings) or _touchdown(r, ref)

    for v in grid:
        r = br.solve(v, prev)
        if not event(r, prev):
            prev, v_prev = r, v
            continue
        lo, hi, lo_res, hi_res = v_prev, v, prev, r
        while hi - lo > settings.bisect_tol:
            mid = 0.5 * (lo + hi)
            r = br.solve(mid, lo_res)
            if event(r, lo_res):
                hi, hi_res = mid, r
            else:
                lo, lo_res = mid, r
        # a steep but stable approach to the fold can trip the jump test on the
        # coarse grid; only a bracket that stays unstable when narrowed counts.
        # A bump touching down is a snap when the jump survives the narrowing.
        if _unstable(br, hi_res, lo_res, settings):
            return lo, hi, lo_res, hi_res
        if _touchdown(hi_res, lo_res) and br.jump(hi_res, lo_res) > settings.snap_fraction * br.gap:
            return lo, hi, lo_res, hi_res
        prev, v_prev = hi_res, hi
    raise NoPullInBelowVmax(f"no pull-in below {v_max} V", v_max=v_max)


def _post_collapse(br, v: float, onset):
    """Equilibrium on the collapsed branch at ``v``: warm-started from a
    configuration resting on the electrodes, else from the onset state."""
    r = br.solve(v, br.collapsed_start(), eigen=False)
    if r.converged and r.has_contact:
        return r
    r2 = br.solve(v, onset, eigen=False)
    return r2 if r2.converged else r


def find_pullin(device, electrodes: str = INTERNAL, v_max: float = 20.0,
                settings: SolverSettings = SolverSettings(), base: ActuationState = ActuationState(),
                mesh: Mesh | None = None, model: CoupledModel | None = None) -> PullInResult:
    """Pull-in voltage of one electrode group by ascending scan plus bisection."""
    model = model or make_model(device, settings, mesh)
    settings = model.settings
    br = _BeamBranch(model, electrodes, base)
    lo, hi, lo_res, hi_res = _scan_pullin(br, v_max, settings)
    collapsed = _post_collapse(br, hi, lo_res)
    return PullInResult(
        v_pullin=0.5 * (lo + hi),
        bracket=(lo, hi),
        deflection_at_onset=lo_res.deflection,
        peak_displacement=lo_res.peak,
        onset=lo_res,
        collapsed=collapsed,
    )


def _scan_pullout(br, start, v_start: float, settings: SolverSettings):
    prev, v_prev = start, v_start
    n_steps = int(np.floor(v_start / settings.v_step + 1e-9))
    grid = [v_start - settings.v_step * k for k in range(1, n_steps + 1)]
    if not grid or grid[-1] > 1e-12:
        grid.append(0.0)

    # a state resting on the dielectric is released once it leaves the dielectric;
    # one that snapped onto the bumps only once every contact opens
    on_floor = start.collapsed

    def released(v, frm):
        r = br.solve(v, frm, eigen=False)
        if not r.converged:
            r = br.solve(v, None, eigen=False)
        held = r.collapsed if on_floor else r.has_contact
        return (r.converged and not held), r

    hit = None
    for v in grid:
        ok, r = released(v, prev)
        if ok:
            hit = (v, r)
            break
        if r.converged:
            prev, v_prev = r, v
    if hit is None:
        raise NeverReleases("membrane stays in contact down to 0 V", contact_nodes=len(prev.contact_nodes))
    lo, hi = hit[0], v_prev
    lo_res, hi_res = hit[1], prev
    while hi - lo > settings.bisect_tol:
        mid = 0.5 * (lo + hi)
        ok, r = released(mid, hi_res)
        if ok:
            lo, lo_res = mid, r
        else:
            hi, hi_res = mid, r
    return lo, hi, lo_res, hi_res


def find_pullout(device, electrodes: str = INTERNAL, settings: SolverSettings = SolverSettings(),
                 v_start: float | None = None, base: ActuationState = ActuationState(),
                 mesh: Mesh | None = None, model: CoupledModel | None = None,
                 adhesion: float = 0.0) -> PullOutResult:
    """Release voltage by descending scan from the collapsed branch.

    Without ``v_start`` the scan begins just above the computed pull-in voltage.
    """
    model = model or make_model(device, settings, mesh)
    settings = model.settings
    br = _BeamBranch(model, electrodes, base)
    if v_start is None:
        pi = find_pullin(None, electrodes, 50.0, settings, base, model=model)
        v_start = pi.bracket[1]
        start = pi.collapsed
    else:
        start = _post_collapse(br, v_start, br.collapsed_start())
    if not (start.converged and start.has_contact):
        raise NoConvergence("no contacted equilibrium at the pull-out start voltage", voltage=v_start)
    if adhesion:
        br.solve_kw = {"adhesion": adhesion, "sticky": model.mesh.contact_nodes}
    lo, hi, lo_res, hi_res = _scan_pullout(br, start, v_start, settings)
    return PullOutResult(v_pullout=0.5 * (lo + hi), bracket=(lo, hi), released=lo_res, last_contacted=hi_res)


@dataclass(frozen=True)
class CVPoint:
    voltage: float
    peak_displacement: float
    contact_fraction: float
    converged: bool = True


def contact_fraction(res: EquilibriumResult) -> float:
    mesh = res.deflection.mesh
    if not res.contact_nodes:
        return 0.0
    trib = mesh.tributary_lengths()
    return float(trib[sorted(res.contact_nodes)].sum() / mesh.device.geometry.length)


def trace_cv_curve(device, electrodes: str, v_grid: Sequence[float], settings: SolverSettings = SolverSettings(),
                   base: ActuationState = ActuationState(), mesh: Mesh | None = None,
                   model: CoupledModel | None = None, results: list | None = None) -> list[CVPoint]:
    """Warm-started path following along an ascending voltage grid.

    Points beyond pull-in land on the collapsed branch: when the warm start
    fails or jumps across the fold, the solve restarts from a configuration
    resting on the electrodes.
    """
    v_grid = list(v_grid)
    if not v_grid:
        return []
    if any(b < a for a, b in zip(v_grid, v_grid[1:])):
        raise ValueError("v_grid must be ascending")
    model = model or make_model(device, settings, mesh)
    settings = model.settings
    br = _BeamBranch(model, electrodes, base)
    out = []
    prev = None
    for v in v_grid:
        on_branch = prev is not None and not prev.collapsed
        if on_branch:
            # coarse grids are walked in v_step increments so the warm start stays on the open branch
            for vs in np.arange(out[-1].voltage + settings.v_step, v - 0.5 * settings.v_step, settings.v_step):
                rs = br.solve(float(vs), prev, eigen=False)
                if not rs.converged or rs.collapsed:
                    break
                prev = rs
        r = br.solve(v, prev, eigen=on_branch)
        crossed = on_branch and _unstable(br, r, prev, settings)
        if not r.converged or crossed:
            # past the fold: continue on the branch resting on the electrodes
            r2 = br.solve(v, br.collapsed_start(), eigen=False)
            if r2.converged and r2.has_contact:
                r = r2
        if not r.converged:
            raise NoConvergence(f"no equilibrium at {v} V", voltage=v)
        out.append(CVPoint(float(v), r.peak, contact_fraction(r)))
        if results is not None:
            results.append(r)
        prev = r
    return out


@dataclass(frozen=True)
class RatioRow:
    ratio: float
    v_pullin: float
    peak_displacement: float
    onset_displacement: float
    error: str = ""


def _ratio_point(template, ratio, settings, v_max):
    try:
        dev = with_ratio(template.spec if isinstance(template, ValidatedSpec) else template, ratio)
        pi = find_pullin(dev, EXTERNAL, v_max, settings)
        up = float(np.max(pi.collapsed.deflection.w))
        return RatioRow(ratio, pi.v_pullin, up, float(np.max(pi.onset.deflection.w)))
    except FreeMembraneError as exc:
        return RatioRow(ratio, float("nan"), float("nan"), float("nan"), exc.code)


def sweep_ratio(device_template, ratios: Sequence[float], settings: SolverSettings = SolverSettings(),
                v_max: float = 30.0, max_workers: int | None = None) -> list[RatioRow]:
    """External pull-in voltage and upward center lift of the collapsed state per S/L ratio.

    Rows come back in input order; failed ratios carry an error code.
    """
    for r in ratios:
        if not 0 < r < 0.5:
            raise OutOfRange(f"ratio must be in (0, 0.5), got {r}")

    def point(r):
        return _ratio_point(device_template, r, settings, v_max)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            return list(pool.map(point, ratios))
    return [point(r) for r in ratios]


# ---------------------------------------------------------------------------
# Single-DOF reference actuator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LumpedResult:
    x: float  # downward displacement (m)
    converged: bool
    has_contact: bool
    min_eigenvalue: float
    iterations: int

    @property
    def peak(self) -> float:
        return -self.x

    @property
    def collapsed(self) -> bool:
        return self.has_contact


class LumpedActuator:
    """Rigid plate on a linear spring above a fixed electrode.

    Serves as a closed-form check of the pull-in machinery shared with the beam
    model: ``V_pi = sqrt(8 k g^3 / (27 eps0 A))`` at ``x = g/3``.
    """

    def __init__(self, k: float, area: float, gap: float, t_d: float = 0.0, eps_r: float = 1.0,
                 settings: SolverSettings = SolverSettings()):
        self.k, self.area, self.gap = k, area, gap
        self.t_over_eps = effective_gap(0.0, t_d, eps_r)
        self.settings = settings

    def closed_form_pullin(self) -> float:
        g = self.gap + self.t_over_eps
        return float(np.sqrt(8 * self.k * g ** 3 / (27 * EPS0 * self.area)))

    def solve(self, v: float, start=None, eigen: bool = True) -> LumpedResult:
        s = self.settings
        x = 0.0 if start is None else float(getattr(start, "x", start))
        k_pen = s.penalty_stiffness
        c = EPS0 * self.area * v * v / 2.0
        for it in range(s.max_newton_iters + 1):
            g_e = max(self.gap - x, 0.0) + self.t_over_eps
            if g_e <= 0:
                raise ZeroGap("closed gap without dielectric; the lumped force is singular")
            fe = c / g_e ** 2
            dfe = 2 * fe / g_e if self.gap - x > 0 else 0.0
            pen = x - self.gap
            fc = k_pen * pen if pen > 0 else 0.0
            kc = k_pen if pen > 0 else 0.0
            R = self.k * x + fc - fe
            ref = max(abs(fe), abs(self.k * x), 1e-30)
            if abs(R) <= s.newton_tol * ref or (fe == 0 and x == 0):
                kt = self.k + kc - dfe
                return LumpedResult(x, True, pen > 0, kt, it)
            kt = self.k + kc - dfe
            if kt == 0:
                break
            dx = -R / kt
            dx = float(np.clip(dx, -s.max_step_fraction * self.gap, s.max_step_fraction * self.gap))
            x += dx
        return LumpedResult(x, False, x > self.gap, -1.0, it)

    def collapsed_start(self):
        return 1.02 * self.gap

    @staticmethod
    def jump(a, b) -> float:
        return abs(a.x - b.x)

    def find_pullin(self, v_max: float) -> PullInResult:
        lo, hi, lo_res, hi_res = _scan_pullin(self, v_max, self.settings)
        return PullInResult(0.5 * (lo + hi), (lo, hi), None, lo_res.peak, lo_res, hi_res)

    def find_pullout(self, v_start: float) -> PullOutResult:
        start = self.solve(v_start, self.collapsed_start())
        lo, hi, lo_res, hi_res = _scan_pullout(self, start, v_start, self.settings)
        return PullOutResult(0.5 * (lo + hi), (lo, hi), lo_res, hi_res)
