"""Energy-constrained midpoint steps and the crossing state machine.

Every step solves the implicit midpoint relation

    zbar = z_k + (lam/2) J Hcal_z(zbar) + (mu/2) J psi_z(zbar)

together with ``Hcal(zbar) = 0`` and, on regularized crossing steps,
``psi(zbar) = psi_k``; then ``z_{k+1} = 2 zbar - z_k``.  ``lam`` is the time
step when ``mu = 0``.

Time direction is a parameter throughout (``direction=+1`` searches
``lam >= 0``, ``direction=-1`` searches ``lam <= 0``); reverse integration is
the same machine with the sign flipped.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .core import Branch, EventKind, ExtendedState, StepResult, Trajectory, J_times, _as_vector, apply_J
from .singularity import psi, psi_grad
from .systems import DomainError, SystemDefinition, _vec, extended_grad, extended_H, extended_hess

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_MAX_EXPANSIONS = 64


class SolverError(RuntimeError):
    """Base class for step failures."""


class NoConvergence(SolverError):
    def __init__(self, iterations: int, residual: float, what: str = "iteration"):
        super().__init__(f"{what} did not converge after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class NoRoot(SolverError):
    pass


class BracketLost(SolverError):
    pass


class DegenerateJacobian(SolverError):
    pass


class CrossingMode(str, enum.Enum):
    AUTO = "Auto"
    FORCE_GHOST = "ForceGhost"
    FORCE_REGULARIZED = "ForceRegularized"


@dataclass(frozen=True)
class SolverConfig:
    inner_tol: float = 1e-13
    inner_max_iter: int = 50
    outer_tol: float = 1e-12
    outer_max_iter: int = 100
    bracket_expansion: float = 1.6
    psi_k: float = 0.0
    h0_offset: float = 1e-3
    crossing_mode: CrossingMode = CrossingMode.AUTO
    lambda_seed: float = 0.1

    def __post_init__(self):
        if min(self.inner_tol, self.outer_tol, self.h0_offset, self.lambda_seed) <= 0:
            raise ValueError("tolerances, h0_offset and lambda_seed must be positive")
        if self.inner_tol > self.outer_tol:
            raise ValueError("inner_tol must not exceed outer_tol")
        if self.bracket_expansion <= 1:
            raise ValueError("bracket_expansion must exceed 1")
        if self.inner_max_iter < 1 or self.outer_max_iter < 1:
            raise ValueError("iteration caps must be positive")
        object.__setattr__(self, "crossing_mode", CrossingMode(self.crossing_mode))

    @property
    def dead_band(self) -> float:
        return 10.0 * self.outer_tol


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


# ------------------------------------------------------------- inner solve


def _solve_mid(sys, z, lam, mu, cfg, guess=None):
    if lam == 0.0 and mu == 0.0:
        return z.copy(), 0
    x = z + 0.5 * lam * apply_J(extended_grad(sys, z)) if guess is None else guess.copy()
    eye = np.eye(z.size)
    polished = False
    res = np.inf
    for it in range(cfg.inner_max_iter + 1):
        r = x - z - 0.5 * lam * apply_J(extended_grad(sys, x))
        if mu != 0.0:
            r -= 0.5 * mu * apply_J(psi_grad(sys, x).grad)
        res = float(np.max(np.abs(r)))
        if not np.isfinite(res):
            break
        if res <= cfg.inner_tol:
            if polished or res == 0.0:
                return x, it
            polished = True
        # the mu * J psi_zz term is left out of the Jacobian (fixed-point part)
        M = eye - 0.5 * lam * J_times(extended_hess(sys, x))
        x = x - np.linalg.solve(M, r)
    raise NoConvergence(cfg.inner_max_iter, res, "midpoint Newton")


def solve_midpoint_state(sys: SystemDefinition, z_k, lam: float, mu: float = 0.0,
                         cfg: SolverConfig | None = None) -> ExtendedState:
    """Midpoint ``zbar(lam, mu, z_k)`` of the implicit step relation."""
    cfg = cfg or SolverConfig()
    if not (np.isfinite(lam) and np.isfinite(mu)):
        raise ValueError("lam and mu must be finite")
    zbar, _ = _solve_mid(sys, _vec(sys, z_k).astype(float), float(lam), float(mu), cfg)
    return ExtendedState.from_vector(zbar)


def residual_H(sys: SystemDefinition, z_k, lam: float, cfg: SolverConfig | None = None) -> float:
    """``Hcal(zbar(lam, z_k))``."""
    return extended_H(sys, solve_midpoint_state(sys, z_k, lam, 0.0, cfg))


def residual_product(sys: SystemDefinition, z_k, lam: float, cfg: SolverConfig | None = None) -> float:
    """``psi(zbar) * Hcal(zbar)`` with ``zbar = zbar(lam, z_k)``."""
    zb = solve_midpoint_state(sys, z_k, lam, 0.0, cfg)
    return psi(sys, zb) * extended_H(sys, zb)


# ------------------------------------------------------------- step solver


class _Probe:
    """Evaluations of ``Hcal`` and ``psi - psi_k`` along ``lam -> zbar(lam, z_k)``."""

    def __init__(self, sys, z, cfg):
        self.sys, self.z, self.cfg = sys, z, cfg
        self._last = None

    def zbar(self, lam, mu=0.0):
        guess = None
        if self._last is not None and mu == 0.0:
            lam0, zb0 = self._last
            if abs(lam - lam0) <= 0.5 * abs(lam0):
                guess = zb0 + (lam - lam0) / lam0 * (zb0 - self.z) if lam0 != 0 else None
        zb, _ = _solve_mid(self.sys, self.z, lam, mu, self.cfg, guess)
        if mu == 0.0:
            self._last = (lam, zb)
        return zb

    def both(self, lam):
        zb = self.zbar(lam)
        return zb, extended_H(self.sys, zb), psi(self.sys, zb) - self.cfg.psi_k

    def H(self, lam):
        return extended_H(self.sys, self.zbar(lam))

    def phi(self, lam):
        return psi(self.sys, self.zbar(lam)) - self.cfg.psi_k


def _brent(f, a, b, fa=None, fb=None):
    return brentq(f, a, b, xtol=1e-300, rtol=4.0 * _EPS, maxiter=400)


def _newton(f, x0, cfg):
    """Scalar Newton with a forward-difference slope (step 1e-7 max(1,|x|)).

    Stops once the step is at roundoff or the residual stops shrinking after
    the step has become tiny.
    """
    x = float(x0)
    fx = f(x)
    for it in range(cfg.outer_max_iter):
        if fx == 0.0:
            return x
        h = 1e-7 * max(1.0, abs(x))
        slope = (f(x + h) - fx) / h
        if slope == 0.0 or not np.isfinite(slope):
            break
        step = fx / slope
        x -= step
        f_old, fx = fx, f(x)
        if abs(step) <= 8.0 * _EPS * max(abs(x), 1e-300):
            return x
        if abs(step) <= 1e-9 * max(abs(x), 1e-300) and abs(fx) >= 0.5 * abs(f_old):
            return x
    raise NoConvergence(cfg.outer_max_iter, abs(fx), "outer Newton")


def _scan(probe: _Probe, start: float, direction: int, scale: float, use_psi: bool):
    """Locate the first sign change of ``Hcal`` (and of ``psi - psi_k`` when
    ``use_psi``) along ``lam = start + direction * d``, ``d >= 0``.

    Returns ``(a, b, factor)`` with ``factor`` either ``"H"`` or ``"psi"``.
    """
    cfg = probe.cfg
    d0 = abs(scale) / 8.0
    a = start
    _, Ha, Pa = probe.both(a)
    for j in range(_MAX_EXPANSIONS):
        b = start + direction * d0 * cfg.bracket_expansion**j
        try:
            _, Hb, Pb = probe.both(b)
        except (SolverError, DomainError, np.linalg.LinAlgError):
            break
        cH = _sign(Ha) * _sign(Hb) <= 0
        cP = use_psi and _sign(Pa) * _sign(Pb) <= 0
        if cH or cP:
            for _ in range(60):
                if not (cH and cP):
                    break
                m = 0.5 * (a + b)
                _, Hm, Pm = probe.both(m)
                if _sign(Ha) * _sign(Hm) <= 0 or (use_psi and _sign(Pa) * _sign(Pm) <= 0):
                    b, Hb, Pb = m, Hm, Pm
                else:
                    a, Ha, Pa = m, Hm, Pm
                cH = _sign(Ha) * _sign(Hb) <= 0
                cP = use_psi and _sign(Pa) * _sign(Pb) <= 0
            return a, b, ("H" if cH else "psi")
        a, Ha, Pa = b, Hb, Pb
    raise NoRoot(f"no sign change within {_MAX_EXPANSIONS} expansions from lam={start:g}")


def _first_root(probe, start, direction, scale, use_psi):
    a, b, factor = _scan(probe, start, direction, scale, use_psi)
    f = probe.H if factor == "H" else probe.phi
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a, factor
    if fb == 0.0:
        return b, factor
    if _sign(fa) == _sign(fb):
        # re-evaluation from a different warm start moved a roundoff-level value
        end, fend = (a, fa) if abs(fa) <= abs(fb) else (b, fb)
        if abs(fend) <= probe.cfg.outer_tol:
            return end, factor
        raise BracketLost(f"bracket [{a:g}, {b:g}] lost its sign change")
    return _brent(f, a, b), factor


def _make_step(sys, z, zbar, lam, mu, branch) -> StepResult:
    z_end = 2.0 * zbar - z
    return StepResult(
        z_start=ExtendedState.from_vector(z),
        z_end=ExtendedState.from_vector(z_end),
        z_mid=ExtendedState.from_vector(zbar),
        lam=float(lam),
        mu=float(mu),
        branch=branch,
        psi_mid=psi(sys, zbar),
        h_mid=extended_H(sys, zbar),
    )


def _solve_product(sys, z, lam_guess, cfg, direction):
    """First root ``lam`` (in ``direction``) of ``psi(zbar) Hcal(zbar)``.

    Newton seeded at ``lam_guess`` is accepted when it lands on the energy
    factor near the seed with no sign change of either factor at half the
    step; otherwise a sign-change search picks the first root.
    """
    probe = _Probe(sys, z, cfg)
    db = cfg.dead_band
    h0 = extended_H(sys, z)
    p0 = psi(sys, z) - cfg.psi_k
    seed = direction * abs(lam_guess) if lam_guess else direction * cfg.lambda_seed
    try:
        lam = _newton(lambda l: _product(probe, l), seed, cfg)
        ok = direction * lam > db and abs(lam - seed) <= 0.5 * abs(seed)
        if ok:
            _, Hm, Pm = probe.both(lam)
            ok = abs(Hm) <= cfg.outer_tol and _sign(Pm) == _sign(p0)
        if ok:
            _, Hh, Ph = probe.both(0.5 * lam)
            ok = _sign(Hh) == _sign(h0) and _sign(Ph) == _sign(p0)
        if ok:
            return lam, "H", probe
    except (SolverError, DomainError, np.linalg.LinAlgError):
        pass
    lam, factor = _first_root(probe, direction * db, direction, seed, use_psi=True)
    return lam, factor, probe


def _product(probe, lam):
    zb, H, P = probe.both(lam)
    return H * P


def step_normal(sys: SystemDefinition, z_k, lambda_guess: float | None = None,
                cfg: SolverConfig | None = None, direction: int = 1) -> StepResult:
    """Step from the first root of ``psi(zbar) Hcal(zbar) = 0`` beyond the dead
    band.  If that root belongs to the psi factor the returned step has
    ``|h_mid| > outer_tol``; callers treat it as a detected crossing."""
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    lam, factor, probe = _solve_product(sys, z, lambda_guess, cfg, direction)
    return _make_step(sys, z, probe.zbar(lam), lam, 0.0, Branch.NORMAL)


def detect_crossing(sys: SystemDefinition, step: StepResult, psi_k: float = 0.0) -> bool:
    """True when ``psi - psi_k`` at the two vertices of ``step`` has opposite
    signs (or vanishes)."""
    a = psi(sys, step.z_start) - psi_k
    b = psi(sys, step.z_end) - psi_k
    return a * b <= 0.0


def find_lambda_psi(sys: SystemDefinition, z_k, cfg: SolverConfig | None = None,
                    scale: float | None = None):
    """Nearest ``lam`` (either sign) with ``psi(zbar(lam, z_k)) = psi_k``."""
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    probe = _Probe(sys, z, cfg)
    if psi(sys, z) - cfg.psi_k == 0.0:
        return 0.0, ExtendedState.from_vector(z)
    scale = abs(scale) if scale else cfg.lambda_seed
    best = None
    for direction in (1, -1):
        try:
            a, b, _ = _scan_psi(probe, direction, scale)
        except NoRoot:
            continue
        if best is None or abs(a) < abs(best[0]):
            best = (a, b)
    if best is None:
        raise NoRoot("psi(zbar(lam)) has no sign change in the search interval")
    a, b = best
    fa, fb = probe.phi(a), probe.phi(b)
    lam = a if fa == 0.0 else b if fb == 0.0 else _brent(probe.phi, a, b)
    zb = probe.zbar(lam)
    return float(lam), ExtendedState.from_vector(zb)


def _scan_psi(probe, direction, scale):
    cfg = probe.cfg
    d0 = scale / 8.0
    a, Pa = 0.0, psi(probe.sys, probe.z) - cfg.psi_k
    for j in range(_MAX_EXPANSIONS):
        b = direction * d0 * cfg.bracket_expansion**j
        try:
            Pb = probe.phi(b)
        except (SolverError, DomainError, np.linalg.LinAlgError):
            break
        if _sign(Pa) * _sign(Pb) <= 0:
            return a, b, "psi"
        a, Pa = b, Pb
    raise NoRoot("no psi sign change")


def step_bracketed(sys: SystemDefinition, z_k, lambda_psi: float,
                   cfg: SolverConfig | None = None) -> StepResult:
    """Energy root inside ``[0, lambda_psi]`` by bracketed root finding."""
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    for attempt in range(2):
        probe = _Probe(sys, z, cfg)
        h0 = extended_H(sys, z)
        if h0 == 0.0:
            return _make_step(sys, z, z.copy(), 0.0, 0.0, Branch.BRACKETED)
        h1 = probe.H(lambda_psi)
        if h0 * h1 <= 0.0:
            lam = lambda_psi if h1 == 0.0 else _brent(probe.H, 0.0, lambda_psi)
            return _make_step(sys, z, probe.zbar(lam), lam, 0.0, Branch.BRACKETED)
        cfg = replace(cfg, inner_tol=cfg.inner_tol * 1e-2)
    raise BracketLost(f"Hcal has no sign change on [0, {lambda_psi:g}]")


def step_ghost(sys: SystemDefinition, z_k, cfg: SolverConfig | None = None,
               direction: int = 1, scale: float | None = None) -> StepResult:
    """Energy root beyond the psi root: the step jumps across psi = 0 with
    ``mu = 0``.  Such segments are not time reversible."""
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    scale = scale or cfg.lambda_seed
    lam_psi, _ = find_lambda_psi(sys, z, cfg, scale)
    probe = _Probe(sys, z, cfg)
    start = lam_psi if direction * lam_psi > 0 else 0.0
    lam, _ = _first_root(probe, start + direction * cfg.dead_band, direction, scale, use_psi=False)
    return _make_step(sys, z, probe.zbar(lam), lam, 0.0, Branch.GHOST)


def _solve_lam_mu(sys, z, lam0, cfg):
    probe = _Probe(sys, z, cfg)
    guess = {"zb": None}

    def F(x):
        zb, _ = _solve_mid(sys, z, x[0], x[1], cfg, guess["zb"])
        return np.array([extended_H(sys, zb), psi(sys, zb) - cfg.psi_k]), zb

    x = np.array([lam0, 0.0])
    Fx, zb = F(x)
    guess["zb"] = zb
    res = float(np.max(np.abs(Fx)))
    for it in range(cfg.outer_max_iter):
        Jm = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(x[j])) if j == 0 else 1e-7 * max(abs(x[0]), abs(x[1]), 1e-3)
            e = np.zeros(2)
            e[j] = h
            Jm[:, j] = (F(x + e)[0] - F(x - e)[0]) / (2.0 * h)
        scale_ = np.max(np.abs(Jm), axis=0)
        if not np.all(np.isfinite(Jm)) or np.any(scale_ == 0) or \
                np.linalg.cond(Jm / scale_) > 1e12:
            raise DegenerateJacobian("Hcal_z and psi_z are (nearly) linearly dependent at zbar")
        step = np.linalg.solve(Jm, Fx)
        x = x - step
        Fx, zb = F(x)
        guess["zb"] = zb
        res_old, res = res, float(np.max(np.abs(Fx)))
        ref = max(abs(x[0]), abs(x[1]), 1e-300)
        at_roundoff = np.max(np.abs(step)) <= 8 * _EPS * ref
        stalled = np.max(np.abs(step)) <= 1e-9 * ref and res >= 0.5 * res_old
        if res <= cfg.outer_tol and (at_roundoff or stalled or res == 0.0):
            return x[0], x[1], zb
    raise NoConvergence(cfg.outer_max_iter, float(np.max(np.abs(Fx))), "regularized (lam, mu) Newton")


def step_regularized(sys: SystemDefinition, z_k, cfg: SolverConfig | None = None,
                     direction: int = 1, lambda_psi: float | None = None,
                     scale: float | None = None, follow_up: bool = True):
    """Crossing step with the psi constraint active, plus its follow-up step.

    The first step solves ``Hcal(zbar) = 0, psi(zbar) = psi_k`` for
    ``(lam, mu)`` seeded at ``(lambda_psi, 0)``.  The follow-up solves
    ``Hcal(zbar) = 0`` with ``mu = 0`` for the first root beyond
    ``max(0, lambda_psi')`` where ``lambda_psi'`` is measured from the new vertex.
    """
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    scale = scale or cfg.lambda_seed
    if lambda_psi is None:
        lambda_psi, _ = find_lambda_psi(sys, z, cfg, scale)
    lam, mu, zb = _solve_lam_mu(sys, z, lambda_psi, cfg)
    first = _make_step(sys, z, zb, lam, mu, Branch.REGULARIZED)
    if not follow_up:
        return first, None
    second = step_after_crossing(sys, first.z_end.z, cfg, direction, scale)
    return first, second


def step_after_crossing(sys, z_k, cfg=None, direction=1, scale=None) -> StepResult:
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    scale = scale or cfg.lambda_seed
    try:
        lam_psi, _ = find_lambda_psi(sys, z, cfg, scale)
    except NoRoot:
        lam_psi = 0.0
    start = max(0.0, direction * lam_psi) * direction
    probe = _Probe(sys, z, cfg)
    lam, _ = _first_root(probe, start + direction * cfg.dead_band, direction, scale, use_psi=False)
    return _make_step(sys, z, probe.zbar(lam), lam, 0.0, Branch.POST_CROSS)


def step_post_cross(sys: SystemDefinition, z_k, cfg: SolverConfig | None = None,
                    direction: int = 1, scale: float | None = None) -> StepResult:
    """First energy root with ``direction * lam > 0`` (no product equation)."""
    cfg = cfg or SolverConfig()
    z = _vec(sys, z_k).astype(float)
    probe = _Probe(sys, z, cfg)
    lam, _ = _first_root(probe, direction * cfg.dead_band, direction, scale or cfg.lambda_seed,
                         use_psi=False)
    return _make_step(sys, z, probe.zbar(lam), lam, 0.0, Branch.POST_CROSS)


# ------------------------------------------------------------ state machine


class IntegrationError(SolverError):
    """A branch failed; ``trajectory`` holds the steps completed so far."""

    def __init__(self, cause: Exception, trajectory: Trajectory, step_index: int, phase: str):
        super().__init__(f"step {step_index} ({phase}): {cause}")
        self.cause = cause
        self.trajectory = trajectory
        self.step_index = step_index
        self.phase = phase


def prepare_initial_state(sys: SystemDefinition, z0, cfg: SolverConfig) -> np.ndarray:
    """Perturb ``prho`` when ``Hcal(z0) = 0`` exactly so the first step is not
    of zero length.  The offset takes the sign of ``psi(z0)`` since a real
    step needs ``Hcal(z_k)`` and ``psi`` of equal sign."""
    z = _vec(sys, z0).astype(float)
    if extended_H(sys, z) == 0.0:
        z[-1] += (1.0 if psi(sys, z) >= 0 else -1.0) * cfg.h0_offset
    return z


def mu_sign_ok(mu: float, direction: int = 1) -> bool:
    """KKT sign convention: ``mu <= 0`` forward in time, ``mu >= 0`` backward."""
    return direction * mu <= 0.0


class _Machine:
    def __init__(self, sys, cfg, direction):
        self.sys, self.cfg, self.s = sys, cfg, direction
        self.traj = Trajectory()
        self.scale = cfg.lambda_seed

    def phi(self, z):
        return psi(self.sys, z) - self.cfg.psi_k

    def H(self, z):
        return extended_H(self.sys, z)

    def accept(self, step: StepResult):
        if self.s * step.lam < 0:
            self.traj.log(EventKind.NEGATIVE_LAMBDA)
        if step.branch == Branch.REGULARIZED and step.mu == 0.0 and step.psi_mid - self.cfg.psi_k == 0.0:
            self.traj.log(EventKind.DEGENERATE_CROSSING)
        self.traj.steps.append(step)
        if step.lam != 0.0 and step.branch != Branch.REGULARIZED:
            self.scale = abs(step.lam)
        return step.z_end.z

    def room(self, N):
        return len(self.traj.steps) < N

    def run(self, z, N):
        sys, cfg, s = self.sys, self.cfg, self.s
        traj = self.traj
        while self.room(N):
            # Normal stepping until the product equation or the vertices signal psi = 0
            trial = step_normal(sys, z, self.scale, cfg, s)
            crossed = abs(trial.h_mid) > cfg.outer_tol or detect_crossing(sys, trial, cfg.psi_k)
            if not crossed:
                z = self.accept(trial)
                continue
            traj.log(EventKind.CROSSING_DETECTED)
            z = self.cross(z, N)
        return traj

    def cross(self, z, N):
        sys, cfg, s = self.sys, self.cfg, self.s
        traj = self.traj
        lam_psi, zpsi = find_lambda_psi(sys, z, cfg, self.scale)
        while s * lam_psi >= 0 and self.H(z) * self.H(zpsi.z) <= 0 and self.room(N):
            traj.log(EventKind.BRACKET_FOUND)
            z = self.accept(step_bracketed(sys, z, lam_psi, cfg))
            lam_psi, zpsi = find_lambda_psi(sys, z, cfg, self.scale)
        if not self.room(N):
            return z
        mode = cfg.crossing_mode
        done = False
        if mode != CrossingMode.FORCE_GHOST:
            try:
                first, _ = step_regularized(sys, z, cfg, s, lambda_psi=lam_psi, scale=self.scale,
                                            follow_up=False)
            except (NoConvergence, DegenerateJacobian, DomainError, np.linalg.LinAlgError) as exc:
                if mode == CrossingMode.FORCE_REGULARIZED:
                    raise
                log.info("regularized crossing failed (%s); using ghost branch", exc)
            else:
                traj.log(EventKind.REGULARIZED_BRANCH)
                if not mu_sign_ok(first.mu, s):
                    traj.log(EventKind.KKT_SIGN_MISMATCH)
                    log.warning("multiplier %g has the wrong sign for direction %+d", first.mu, s)
                z = self.accept(first)
                if self.room(N):
                    z = self.accept(step_after_crossing(sys, z, cfg, s, self.scale))
                done = True
        if not done:
            steps = traj.steps
            # the ghost block only acts when the last two vertices share an energy sign;
            # otherwise control passes straight to the post-crossing solve
            if steps and self.H(steps[-1].z_start.z) * self.H(z) > 0:
                last = steps.pop()
                z = last.z_start.z
                traj.log(EventKind.GHOST_REWIND)
                traj.log(EventKind.GHOST_BRANCH)
                z = self.accept(step_ghost(sys, z, cfg, s, self.scale))
        if self.room(N):
            z = self.accept(step_post_cross(sys, z, cfg, s, self.scale))
        return z


def _integrate(sys, z0, num_steps, cfg, direction):
    cfg = cfg or SolverConfig()
    if num_steps < 0:
        raise ValueError("num_steps must be non-negative")
    z = prepare_initial_state(sys, z0, cfg)
    if psi(sys, z) == cfg.psi_k:
        raise ValueError("initial state lies on the singular set psi = psi_k")
    m = _Machine(sys, cfg, direction)
    m.traj.initial = ExtendedState.from_vector(z)
    try:
        if num_steps:
            m.run(z, num_steps)
    except (SolverError, DomainError, np.linalg.LinAlgError) as exc:
        raise IntegrationError(exc, m.traj, len(m.traj.steps), type(exc).__name__) from exc
    return m.traj


def integrate(sys: SystemDefinition, z0, num_steps: int, cfg: SolverConfig | None = None) -> Trajectory:
    """Forward trajectory of ``num_steps`` segments from ``z0``."""
    return _integrate(sys, z0, num_steps, cfg, 1)


def integrate_reverse(sys: SystemDefinition, zN, num_steps: int, cfg: SolverConfig | None = None) -> Trajectory:
    """Backward trajectory: the same machine with ``lam <= 0`` searches."""
    return _integrate(sys, zN, num_steps, cfg, -1)
