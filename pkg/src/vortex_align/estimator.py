"""Few-shot estimation of receiver misalignment from cross-modal phases.

Pipeline: extract the cross-modal phase at a handful of antennas, build a
weighted circular-distance loss against the tilt model, search a coarse
(theta, phi, gamma) grid, refine the most promising cells with a bounded
simplex, and arbitrate the refined candidates (together with their
half-turn azimuth twins) by a joint phase-misfit / corrected-power score.

Two structural facts shape the design:

* The cross-modal phase u~ = 0.5 * angle[ sum_k (y_i y_j*)^2 ] determines
  (l_i - l_j) * (delta_m + gamma) only modulo pi: squaring removes the sign
  of the Bessel amplitudes but halves the usable phase range.  All phase
  comparisons therefore happen on the doubled angle, |e^{2i u~} -
  e^{2i (l_i-l_j)(delta_m + gamma)}|^2, which is exactly the distance
  between the squared products and is insensitive to the per-antenna sign.
* The phase loss alone cannot settle phi against phi + pi (gamma absorbs
  the half turn), and at noisy, weakly-conditioned poses it grows spurious
  minima; the corrected matched power over the ring supplies the missing
  evidence, so candidate selection and the final arbitration combine both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import jv

from .channel import SampleTensor, bessel_j, delta, rho, wavenumber
from .geometry import Scenario

# Amplitudes below this floor mean the measurement carries no usable power.
_POWER_FLOOR = 1e-150

# Accumulator magnitudes below this are treated as exactly zero power.
_ACCUMULATOR_FLOOR = 1e-300

_DIAMETRIC_TOL = 1e-9

_WEIGHT_FLOOR = 1e-12
# The candidate power probes saturate quickly with frequency diversity; cap
# the subcarriers used there so their cost does not scale with P.
_POWER_GRID_MAX_SUBCARRIERS = 4

# Candidate cells refined to the end: the strongest by corrected power plus
# the lowest-loss cells, each list kept spatially diverse by the minimum
# cell (Chebyshev) separation below.
_POWER_CANDIDATES = 4
_LOSS_CANDIDATES = 4
_SHORTLIST_SPACING = 3



class MissingSamplesError(KeyError):
    """Tensor does not cover a requested (antenna, mode, subcarrier) index."""


class ZeroPowerError(ValueError):
    """Cross-modal accumulator vanished; phase undefined."""


class DegenerateGeometryError(ValueError):
    """Estimation configuration violates its geometric invariants."""


class NoPowerError(ValueError):
    """All selected antennas are below the measurable power floor."""


class InfeasibleSelectionError(ValueError):
    """No antenna subset satisfies the diametric-pair constraint."""


@dataclass(frozen=True)
class EstimationConfig:
    """Knobs of the estimation pipeline.

    ``antennas`` and ``modes`` are the subsets used in the fit; subcarriers
    are given as frequencies present in the measurement tensor.
    """

    modes: tuple[int, ...]
    antennas: tuple[int, ...]
    subcarriers_hz: tuple[float, ...]
    weighting: str = "amplitude"
    grid_deg: tuple[float, float, float] = (3.0, 3.0, 3.0)
    refine_tol: float = 1e-10
    refine_max_iter: int = 200

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(int(l) for l in self.modes))
        object.__setattr__(self, "antennas", tuple(int(m) for m in self.antennas))
        object.__setattr__(
            self, "subcarriers_hz", tuple(float(f) for f in self.subcarriers_hz)
        )
        if len(set(self.modes)) != len(self.modes):
            raise ValueError("modes must be distinct")
        if self.weighting not in ("uniform", "amplitude", "amplitude-squared"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if any(g <= 0 for g in self.grid_deg):
            raise ValueError("grid resolutions must be > 0")


@dataclass
class CrossModalPhaseSet:
    """Measured cross-modal phases keyed by (antenna, (l_i, l_j)).

    ``amplitudes`` holds the mean |y| per antenna for weighting,
    ``mode_amplitudes`` the mean |y| per (antenna, mode) for variance
    estimates, and ``azimuths`` the in-plane element azimuth per antenna.
    """

    phases: dict[tuple[int, tuple[int, int]], float]
    amplitudes: dict[int, float]
    azimuths: dict[int, float]
    mode_amplitudes: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class MisalignmentEstimate:
    """Estimated (theta, phi, gamma) with fit diagnostics."""

    theta: float
    phi: float
    gamma: float
    residual: float
    ambiguity_resolved: bool
    diagnostics: dict = field(default_factory=dict)


def cross_modal_phase(
    tensor: SampleTensor, m: int, l_i: int, l_j: int, subcarriers_hz
) -> float:
    """Average cross-modal phase at antenna ``m`` for the mode pair (l_i, l_j).

    Returns 0.5 * angle[ sum_k (y_{m,l_i,k} * conj(y_{m,l_j,k}))^2 ], in
    (-pi/2, pi/2]; the value estimates (l_i - l_j)(delta_m + gamma) mod pi.
    """
    if m not in tensor.antennas:
        raise MissingSamplesError(f"antenna {m} not in tensor")
    try:
        li = tensor.mode_index(l_i)
        lj = tensor.mode_index(l_j)
        ks = [tensor.subcarrier_index(f) for f in np.atleast_1d(subcarriers_hz)]
    except KeyError as exc:
        raise MissingSamplesError(str(exc)) from None
    prod = tensor.values[m, li, ks] * np.conj(tensor.values[m, lj, ks])
    acc = np.sum(prod**2)
    if abs(acc) < _ACCUMULATOR_FLOOR:
        raise ZeroPowerError(
            f"cross-modal accumulator vanished at antenna {m}, pair ({l_i},{l_j})"
        )
    return float(0.5 * np.angle(acc))


def cross_modal_phase_set(
    tensor: SampleTensor, config: EstimationConfig
) -> CrossModalPhaseSet:
    """All cross-modal phases and antenna amplitudes needed by the loss."""
    n_rx = len(tensor.antennas)
    pairs = _mode_pairs(config.modes)
    mode_idx = [tensor.mode_index(l) for l in config.modes]
    k_idx = [tensor.subcarrier_index(f) for f in config.subcarriers_hz]
    phases: dict[tuple[int, tuple[int, int]], float] = {}
    amplitudes: dict[int, float] = {}
    azimuths: dict[int, float] = {}
    mode_amplitudes: dict[tuple[int, int], float] = {}
    for m in config.antennas:
        block = tensor.values[np.ix_([m], mode_idx, k_idx)][0]
        amplitudes[m] = float(np.mean(np.abs(block)))
        azimuths[m] = 2.0 * np.pi * m / n_rx
        for l, row in zip(config.modes, block):
            mode_amplitudes[(m, l)] = float(np.mean(np.abs(row)))
        for li, lj in pairs:
            phases[(m, (li, lj))] = cross_modal_phase(
                tensor, m, li, lj, config.subcarriers_hz
            )
    return CrossModalPhaseSet(
        phases=phases,
        amplitudes=amplitudes,
        azimuths=azimuths,
        mode_amplitudes=mode_amplitudes,
    )


def _mode_pairs(modes) -> list[tuple[int, int]]:
    """All ordered pairs (l_i, l_j) with l_i > l_j, each unordered pair once."""
    srt = sorted(modes)
    return [
        (srt[b], srt[a]) for a in range(len(srt)) for b in range(a + 1, len(srt))
    ]


def weight(amplitudes, scheme: str = "amplitude") -> np.ndarray:
    """Per-antenna weights: a positive, non-decreasing function of amplitude.

    ``uniform`` gives 1 everywhere; ``amplitude`` normalizes by the mean
    amplitude; ``amplitude-squared`` by the mean squared amplitude.  Outputs
    are floored at a tiny positive value so zero-power antennas cannot zero
    out a loss term entirely.
    """
    amps = np.asarray(amplitudes, dtype=float)
    if np.any(amps < 0):
        raise ValueError("amplitudes must be >= 0")
    if scheme == "uniform":
        out = np.ones_like(amps)
    elif scheme == "amplitude":
        mean = amps.mean()
        out = amps / mean if mean > 0 else np.ones_like(amps)
    elif scheme == "amplitude-squared":
        mean = (amps**2).mean()
        out = amps**2 / mean if mean > 0 else np.ones_like(amps)
    else:
        raise ValueError(f"unknown weighting scheme {scheme!r}")
    return np.maximum(out, _WEIGHT_FLOOR)


def loss(
    theta: float,
    phi: float,
    gamma: float,
    phases: CrossModalPhaseSet,
    weights,
) -> float:
    """Weighted circular distance between measured and modeled phases.

    ``weights`` maps antenna index to its positive weight.  Comparison is on
    the doubled phases (see module docstring), so per-term values range in
    [0, 4 * lambda_m].
    """
    total = 0.0
    for (m, (li, lj)), u in phases.phases.items():
        model = (li - lj) * (delta(theta, phi, phases.azimuths[m]) + gamma)
        total += weights[m] * abs(np.exp(2j * u) - np.exp(2j * model)) ** 2
    return float(total)


def select_antennas(n_rx: int, q: int) -> list[int]:
    """Maximally spread subset of ``q`` of ``n_rx`` ring elements.

    Starts from an evenly spread base set, then repeatedly advances the
    later index of any diametrically opposed pair by one position until no
    pair sits exactly half a turn apart.  When the ring cannot host ``q``
    elements without a diametric pair (q > n_rx/2 on an even ring) the
    evenly spread base set is returned unrepaired; the redundancy of q > 3
    keeps the fit overdetermined regardless.
    """
    if n_rx < 3 or q < 3:
        raise InfeasibleSelectionError(
            f"need at least 3 of at least 3 antennas, got q={q}, n_rx={n_rx}"
        )
    if q > n_rx:
        raise InfeasibleSelectionError(f"q={q} exceeds the {n_rx}-element ring")
    step = math.ceil(n_rx / q)
    if (q - 1) * step <= n_rx - 1:
        base = [j * step for j in range(q)]
    else:
        base = [(j * n_rx) // q for j in range(q)]
    if n_rx % 2 == 0 and q > n_rx // 2:
        # Diametric partners duplicate the cross-modal phase (it depends on
        # the element azimuth modulo pi), so fill the distinct half-ring
        # first and only then reuse opposite elements.
        half = n_rx // 2
        extras = [half + (j * half) // (q - half) for j in range(q - half)]
        return list(range(half)) + extras

    def first_diametric(sel):
        for a in range(len(sel)):
            for b in range(a + 1, len(sel)):
                gap = abs(
                    np.angle(np.exp(2j * np.pi * (sel[a] - sel[b]) / n_rx))
                )
                if abs(gap - np.pi) < _DIAMETRIC_TOL:
                    return b
        return None

    selected = list(base)
    for _ in range(n_rx * q):
        pos = first_diametric(selected)
        if pos is None:
            return selected
        nxt = (selected[pos] + 1) % n_rx
        while nxt in selected:
            nxt = (nxt + 1) % n_rx
        selected[pos] = nxt
    return base


def select_modes(scenario: Scenario) -> tuple[int, int]:
    """Symmetric mode pair (-l, +l) with the strongest aligned-case gain.

    Scans integer l >= 1 up to the ring sampling limit and maximizes
    |J_l(k a_r a_t / r)| at the carrier.
    """
    k = wavenumber(scenario.carrier_hz)
    x = k * scenario.rx.radius_m * scenario.tx.radius_m / scenario.pose.distance_m
    l_max = max(scenario.rx.n_elements // 2 - 1, 1)
    best = max(range(1, l_max + 1), key=lambda l: abs(bessel_j(l, x)))
    return (-best, best)


def _validate_config(tensor: SampleTensor, config: EstimationConfig) -> None:
    n_rx = len(tensor.antennas)
    if len(config.antennas) < 3:
        raise DegenerateGeometryError("at least 3 antennas are required")
    if len(config.modes) < 2:
        raise DegenerateGeometryError("at least 2 modes are required")
    if len(config.subcarriers_hz) < 1:
        raise DegenerateGeometryError("at least 1 subcarrier is required")
    # A diametric pair collapses the minimal Q=3 system to dependent
    # equations; with more antennas the redundancy absorbs it.
    if len(config.antennas) == 3:
        for a in range(len(config.antennas)):
            for b in range(a + 1, len(config.antennas)):
                diff = config.antennas[a] - config.antennas[b]
                gap = abs(np.angle(np.exp(2j * np.pi * diff / n_rx)))
                if abs(gap - np.pi) < _DIAMETRIC_TOL:
                    raise DegenerateGeometryError(
                        f"antennas {config.antennas[a]} and {config.antennas[b]} "
                        "are diametrically opposed"
                    )


@lru_cache(maxsize=8)
def _grid_tables(
    grid_deg: tuple[float, float, float],
    azimuths: tuple[float, ...],
    pair_dl: tuple[int, ...],
):
    """Precompute the (theta, phi) grids and per-term model phase factors."""
    g_th, g_ph, g_ga = (np.deg2rad(g) for g in grid_deg)
    thetas = np.arange(0.0, np.pi / 2 - 1e-12, g_th)
    phis = -np.pi + g_ph * np.arange(1, int(round(2 * np.pi / g_ph)) + 1)
    gammas = -np.pi + g_ga * np.arange(1, int(round(2 * np.pi / g_ga)) + 1)
    az = np.asarray(azimuths)
    dl = np.asarray(pair_dl)
    # delta grid: (n_theta, n_phi, n_terms)
    d = delta(
        thetas[:, None, None], phis[None, :, None], az[None, None, :]
    )
    model = np.exp(-2j * d * dl[None, None, :])
    return thetas, phis, gammas, model


def _coarse_candidates(
    phases: CrossModalPhaseSet,
    weights: dict[int, float],
    config: EstimationConfig,
    tensor: SampleTensor,
    scenario: Scenario,
) -> list[tuple[float, float, float, float]]:
    """Coarse search: candidate cells from both the loss and the power map.

    The phase-only loss develops spurious near-global minima at noisy,
    weakly-conditioned poses (small elevations), while the corrected-power
    map (the criterion that later settles the half-turn ambiguity, and
    independent of gamma) is robust there but blurrier.  Candidates are the
    spatially diverse best cells of each map; the refined solutions are
    arbitrated jointly afterwards.  Gamma per cell is read off the loss
    along its own axis.  Returns (theta, phi, gamma, loss) tuples.
    """
    terms = [(m, pair, val) for (m, pair), val in phases.phases.items()]
    azimuths = tuple(phases.azimuths[m] for m, _pair, _val in terms)
    pair_dl = tuple(li - lj for _m, (li, lj), _val in terms)
    lam = np.array([weights[m] for m, _pair, _val in terms])
    u = np.array([val for _m, _pair, val in terms])

    thetas, phis, gammas, model = _grid_tables(
        tuple(config.grid_deg), azimuths, pair_dl
    )
    # Group the gamma dependence: per distinct delta-l the model picks up
    # exp(-2i dl gamma), so the loss over the gamma axis is a short Fourier sum.
    coef = lam * np.exp(2j * u)
    dl_arr = np.asarray(pair_dl)
    total = float(2.0 * lam.sum())
    corr = np.zeros((len(thetas), len(phis), len(gammas)))
    for dl in sorted(set(pair_dl)):
        sel = dl_arr == dl
        c = np.einsum("xyt,t->xy", model[:, :, sel], coef[sel])
        corr += np.real(c[:, :, None] * np.exp(-2j * dl * gammas)[None, None, :])
    losses = total - 2.0 * corr

    loss_by_cell = losses.min(axis=2)
    n_phi = len(phis)

    def diverse_walk(ranking: np.ndarray, count: int) -> list[tuple[int, int]]:
        kept: list[tuple[int, int]] = []
        for flat in ranking:
            it, ip = int(flat) // n_phi, int(flat) % n_phi
            ok = True
            for jt, jp in kept:
                dphi = min(abs(ip - jp), n_phi - abs(ip - jp))
                if max(abs(it - jt), dphi) < _SHORTLIST_SPACING:
                    ok = False
                    break
            if ok:
                kept.append((it, ip))
                if len(kept) >= count:
                    break
        return kept

    th_mesh, ph_mesh = np.meshgrid(thetas, phis, indexing="ij")
    power_map = _matched_power_cells(
        tensor,
        scenario,
        config,
        th_mesh.ravel(),
        ph_mesh.ravel(),
        np.zeros(th_mesh.size),
        antennas=config.antennas,
        max_subcarriers=_POWER_GRID_MAX_SUBCARRIERS,
    )
    cells = diverse_walk(np.argsort(-power_map, kind="stable"), _POWER_CANDIDATES)
    for cell in diverse_walk(
        np.argsort(loss_by_cell.ravel(), kind="stable"), _LOSS_CANDIDATES
    ):
        if cell not in cells:
            cells.append(cell)
    out = []
    for it, ip in cells:
        ig = int(np.argmin(losses[it, ip, :]))
        out.append(
            (
                float(thetas[it]),
                float(phis[ip]),
                float(gammas[ig]),
                float(losses[it, ip, ig]),
            )
        )
    return out


def _matched_power_cells(
    tensor: SampleTensor,
    scenario: Scenario,
    config: EstimationConfig,
    theta: np.ndarray,
    phi: np.ndarray,
    gamma: np.ndarray,
    antennas=None,
    max_subcarriers: int | None = None,
    normalized: bool = False,
) -> np.ndarray:
    """Corrected matched power for a batch of candidate angle triples.

    Models the power probe a receiver makes after applying a candidate
    correction mask and mode-matched combining over the ring (``antennas``
    None means the full ring; pass a subset to restrict it).  With
    ``normalized`` the matched energy |<g, y>|^2 / |g|^2 is returned, which
    is the signal power the candidate model explains.
    """
    rx = scenario.rx
    ants = np.asarray(tensor.antennas if antennas is None else antennas)
    phi_m = 2.0 * np.pi * ants / rx.n_elements
    th = theta[:, None]
    ph = phi[:, None]
    d_m = delta(th, ph, phi_m[None, :])
    rho_m = rho(th, ph, phi_m[None, :])
    r = scenario.pose.distance_m
    mode_idx = [tensor.mode_index(l) for l in config.modes]
    subs = config.subcarriers_hz
    if max_subcarriers is not None and len(subs) > max_subcarriers:
        picks = np.linspace(0, len(subs) - 1, max_subcarriers).astype(int)
        subs = tuple(subs[i] for i in picks)
    power = np.zeros(theta.shape[0])
    for f in subs:
        k = wavenumber(f)
        # Includes the candidate mask: conj of the tilt-induced spatial phase.
        spatial = np.exp(1j * k * rx.radius_m * np.sin(th) * np.cos(ph - phi_m))
        ki = tensor.subcarrier_index(f)
        for l, li in zip(config.modes, mode_idx):
            profile = (
                spatial
                * np.exp(1j * l * (d_m + gamma[:, None]))
                * jv(l, k * rx.radius_m * scenario.tx.radius_m * rho_m / r)
            )
            combined = np.conj(profile) @ tensor.values[ants, li, ki]
            if normalized:
                norm = np.sum(np.abs(profile) ** 2, axis=1)
                power += np.abs(combined) ** 2 / np.maximum(norm, 1e-300)
            else:
                power += np.abs(combined) ** 2
    return power


def _phase_misfit_nll(
    phases: CrossModalPhaseSet,
    config: EstimationConfig,
    theta: float,
    phi: float,
    gamma: float,
) -> float:
    """Cross-modal phase misfit in (scaled) log-likelihood units.

    Each term is weighted by the inverse of its phase variance, which the
    measured per-mode amplitudes determine up to the common noise level;
    the same common factor scales the matched-power deficit, so the two
    can be summed into one candidate score.
    """
    p_count = len(config.subcarriers_hz)
    total = 0.0
    for (m, (li, lj)), u in phases.phases.items():
        a_i = max(phases.mode_amplitudes[(m, li)], _WEIGHT_FLOOR)
        a_j = max(phases.mode_amplitudes[(m, lj)], _WEIGHT_FLOOR)
        c_t = p_count * (a_i**2 * a_j**2) / (16.0 * (a_i**2 + a_j**2))
        model = (li - lj) * (delta(theta, phi, phases.azimuths[m]) + gamma)
        total += c_t * abs(np.exp(2j * u) - np.exp(2j * model)) ** 2
    return float(total)


def _refine_cell(
    cell: tuple[float, float, float, float],
    objective,
    config: EstimationConfig,
) -> tuple[np.ndarray, float, int]:
    """Bounded simplex descent within one grid cell's trust region.

    Refinement is local by design: the loss valley trades phi against gamma
    almost freely at weakly-conditioned poses, so the simplex is confined to
    a one-cell box around the coarse candidate.
    """
    theta0, phi0, gamma0, _ = cell
    g_th, g_ph, g_ga = (np.deg2rad(g) for g in config.grid_deg)
    x0 = np.array([theta0, phi0, gamma0])
    lower = [max(0.0, theta0 - g_th), phi0 - g_ph, gamma0 - 2.0 * g_ga]
    upper = [
        min(np.pi / 2 - 1e-12, theta0 + g_th),
        phi0 + g_ph,
        gamma0 + 2.0 * g_ga,
    ]
    steps = [0.45 * g_th, 0.45 * g_ph, 0.45 * g_ga]
    simplex = [x0]
    for i in range(3):
        vertex = x0.copy()
        vertex[i] = vertex[i] + steps[i]
        if vertex[i] > upper[i]:
            vertex[i] = x0[i] - steps[i]
        simplex.append(vertex)
    result = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=list(zip(lower, upper)),
        options={
            "initial_simplex": np.vstack(simplex),
            "fatol": config.refine_tol,
            "xatol": 1e-9,
            "maxiter": config.refine_max_iter,
            "maxfev": 20 * config.refine_max_iter,
        },
    )
    return np.asarray(result.x), float(result.fun), int(result.nit)


def estimate(
    tensor: SampleTensor, scenario: Scenario, config: EstimationConfig
) -> MisalignmentEstimate:
    """Estimate (theta, phi, gamma) from a few-shot measurement tensor.

    Coarse grid search over the enforced ranges, bounded simplex refinement
    of the most promising cells, then one joint arbitration over the refined
    solutions and their half-turn azimuth twins that combines the phase
    misfit with the corrected received power.
    """
    _validate_config(tensor, config)
    mode_idx = [tensor.mode_index(l) for l in config.modes]
    k_idx = [tensor.subcarrier_index(f) for f in config.subcarriers_hz]
    amps = np.mean(
        np.abs(tensor.values[np.ix_(list(config.antennas), mode_idx, k_idx)]),
        axis=(1, 2),
    )
    if np.all(amps < _POWER_FLOOR):
        raise NoPowerError("all selected antennas are below the power floor")
    phases = cross_modal_phase_set(tensor, config)
    lam = weight(amps, config.weighting)
    weights = dict(zip(config.antennas, lam))

    cells = _coarse_candidates(phases, weights, config, tensor, scenario)

    # Vectorized twin of loss() over the fixed term set, for the refiner.
    terms = [(m, pair, val) for (m, pair), val in phases.phases.items()]
    t_az = np.array([phases.azimuths[m] for m, _pair, _val in terms])
    t_dl = np.array([li - lj for _m, (li, lj), _val in terms])
    t_lam = np.array([weights[m] for m, _pair, _val in terms])
    t_target = np.exp(2j * np.array([val for _m, _pair, val in terms]))

    def objective(x: np.ndarray) -> float:
        model = np.exp(2j * t_dl * (delta(x[0], x[1], t_az) + x[2]))
        return float(np.sum(t_lam * np.abs(t_target - model) ** 2))

    refined = [_refine_cell(cell, objective, config) for cell in cells]

    # The loss cannot distinguish phi from phi + pi (with gamma shifted by
    # -pi), so every refined candidate enters the pool together with its
    # half-turn twin (identical loss by symmetry).  One joint likelihood
    # score then arbitrates: the cross-modal phase misfit (inverse-variance
    # weighted, which the measured amplitudes supply) plus the corrected
    # matched-power deficit; both scale with 1/noise, so the noise level
    # cancels from the ranking and the twin comparison is exactly the
    # higher-corrected-power rule.
    pool: list[tuple[np.ndarray, float, int, int]] = []
    for idx, (x, f, n) in enumerate(refined):
        twin = np.array(
            [
                x[0],
                float(np.angle(np.exp(1j * (x[1] + np.pi)))),
                float(np.angle(np.exp(1j * (x[2] - np.pi)))),
            ]
        )
        pool.append((np.asarray(x), f, n, idx))
        pool.append((twin, f, n, idx))
    pool_x = np.array([x for x, _f, _n, _i in pool])
    powers = _matched_power_cells(
        tensor,
        scenario,
        config,
        pool_x[:, 0],
        pool_x[:, 1],
        pool_x[:, 2],
        antennas=None,
        max_subcarriers=_POWER_GRID_MAX_SUBCARRIERS,
        normalized=True,
    )
    misfits = np.array(
        [_phase_misfit_nll(phases, config, x[0], x[1], x[2]) for x, _f, _n, _i in pool]
    )
    scores = misfits + (powers.max() - powers)
    best = int(np.argmin(scores))
    x_hat, residual, n_iter, cell_idx = pool[best]
    theta_hat = float(np.clip(x_hat[0], 0.0, np.pi / 2 - 1e-12))
    phi_hat = float(np.angle(np.exp(1j * x_hat[1])))
    gamma_hat = float(np.angle(np.exp(1j * x_hat[2])))
    twin_idx = best + 1 if best % 2 == 0 else best - 1

    return MisalignmentEstimate(
        theta=theta_hat,
        phi=phi_hat,
        gamma=gamma_hat,
        residual=residual,
        ambiguity_resolved=True,
        diagnostics={
            "grid_theta": cells[cell_idx][0],
            "grid_phi": cells[cell_idx][1],
            "grid_gamma": cells[cell_idx][2],
            "grid_loss": cells[cell_idx][3],
            "refine_iterations": n_iter,
            "corrected_power_kept": float(powers[best]),
            "corrected_power_rejected": float(powers[twin_idx]),
        },
    )
