"""Particle-filter tracking with a collaborative sparse appearance model.

Per frame: propose particles from a six-parameter Gaussian motion model,
weight each candidate patch by the product of a discriminative score
(holistic templates vs background) and a generative score (local 8x8
blocks with occlusion masking), take the MAP particle, and update the
template set when confidence and occlusion gates allow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import (
    BadBlocking,
    EmptyDictionary,
    InitOutOfBounds,
    LikelihoodsUnset,
    TooFewFrames,
)
from .ingest import CANONICAL_SIZE, Frame, FrameSequence, Patch, frame_difference, unit_columns, warp_patch
from .sparse import SolverParams

STATE_FIELDS = ("l_x", "l_y", "theta", "s", "alpha", "phi")


@dataclass
class AffineState:
    """Six-parameter target state: translation, rotation, scale, aspect, skew."""

    l_x: float
    l_y: float
    theta: float = 0.0
    s: float = 1.0
    alpha: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("affine state must be finite")
        if self.s <= 0 or self.alpha <= 0:
            raise ValueError("scale and aspect ratio must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.l_x, self.l_y, self.theta, self.s, self.alpha, self.phi])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "AffineState":
        return cls(*(float(v) for v in arr))


@dataclass
class MotionModelParams:
    """Per-parameter Gaussian std-devs, ordered like STATE_FIELDS."""

    sigma: np.ndarray = field(
        default_factory=lambda: np.array([4.0, 4.0, 0.02, 0.01, 0.002, 0.001])
    )

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.sigma.shape != (6,) or np.any(self.sigma < 0):
            raise ValueError("sigma must be 6 non-negative reals")


@dataclass
class ParticleSet:
    """N candidate states with proposal densities and (later) likelihoods."""

    states: np.ndarray  # (N, 6), columns ordered like STATE_FIELDS
    motion_priors: np.ndarray  # (N,)
    likelihoods: np.ndarray | None = None
    occlusions: np.ndarray | None = None
    prev_state: AffineState | None = None
    frame_index: int = -1

    def __len__(self) -> int:
        return self.states.shape[0]

    def state(self, i: int) -> AffineState:
        return AffineState.from_array(self.states[i])


@dataclass
class TemplateSet:
    """Holistic template dictionary plus per-position local block dictionary.

    Slot 0 holds the first-frame template and is never replaced. The local
    dictionary is organized per block position: shape (P, b*b, m). The
    normalized holistic/negative matrices are derived caches, rebuilt
    whenever a TemplateSet is constructed.
    """

    holistic: list[Patch]
    negatives: list[Patch]
    ages: np.ndarray
    block: int = 8
    local_dict: np.ndarray = None
    local_grams: np.ndarray = None
    local_has_content: np.ndarray = None
    holistic_dict: np.ndarray = None
    holistic_gram: np.ndarray = None
    negative_dict: np.ndarray = None
    negative_gram: np.ndarray = None

    def __post_init__(self):
        self.ages = np.asarray(self.ages, dtype=np.int64)
        self.local_dict = build_local_dict(self.holistic, self.block)
        self.local_grams = np.einsum("pij,pik->pjk", self.local_dict, self.local_dict)
        self.local_has_content = np.any(self.local_dict != 0.0, axis=(1, 2))
        self.holistic_dict = unit_columns(
            np.stack([h.reshape(-1) for h in self.holistic], axis=1)
        )
        self.holistic_gram = self.holistic_dict.T @ self.holistic_dict
        if self.negatives:
            self.negative_dict = unit_columns(
                np.stack([g.reshape(-1) for g in self.negatives], axis=1)
            )
            self.negative_gram = self.negative_dict.T @ self.negative_dict

    @property
    def m(self) -> int:
        return len(self.holistic)


@dataclass
class TrackResult:
    state: AffineState
    confidence: float
    occlusion_fraction: float
    frame_index: int
    degenerate: bool = False


@dataclass
class TrackerConfig:
    """Knobs of the tracking loop; defaults match the documented config."""

    n_particles: int = 600
    motion: MotionModelParams = field(default_factory=MotionModelParams)
    n_templates: int = 10
    template_size: int = CANONICAL_SIZE
    block: int = 8
    sigma_c: float = 0.1
    eps_occ: float = 0.15
    tau_update: float = 0.3
    occ_gate: float = 0.3
    ring_scale: float = 1.5
    observe: str = "raw"  # or "difference"
    seed: int = 0
    lambda1: float = 0.01  # holistic coding penalty
    solver_tol: float = 1e-8
    solver_max_iter: int = 500


# local block coding runs unregularized so an exactly representable block
# reports zero residual
_LOCAL_LAMBDA = 0.0
_LOCAL_TOL = 1e-10
_LOCAL_MAX_ITER = 200


def _vec_unit(patch: Patch) -> np.ndarray:
    v = np.asarray(patch, dtype=np.float64).reshape(-1)
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 0 else v


def _blocks(patch: Patch, b: int) -> np.ndarray:
    h, w = patch.shape
    if h % b or w % b:
        raise BadBlocking(f"patch {h}x{w} not divisible into {b}x{b} blocks")
    grid = patch.reshape(h // b, b, w // b, b).swapaxes(1, 2)
    return grid.reshape(-1, b * b)  # raster order over block positions


def build_local_dict(holistic: list[Patch], b: int) -> np.ndarray:
    """(P, b*b, m) dictionary: position p holds the normalized p-th block
    of every holistic template."""
    per_template = [_blocks(h, b) for h in holistic]  # each (P, b*b)
    P = per_template[0].shape[0]
    out = np.empty((P, b * b, len(holistic)))
    for j, blocks in enumerate(per_template):
        for p in range(P):
            out[p, :, j] = _vec_unit(blocks[p])
    return out


def make_template_set(
    frame: Frame, state: AffineState, config: TrackerConfig | None = None
) -> TemplateSet:
    """Initial template set: m copies of the first-frame patch plus ring
    negatives around the initial state."""
    cfg = config or TrackerConfig()
    size = cfg.template_size
    first = warp_patch(frame, state, size, size)
    holistic = [first.copy() for _ in range(cfg.n_templates)]
    negatives = _ring_negatives(frame, state, cfg)
    return TemplateSet(
        holistic=holistic,
        negatives=negatives,
        ages=np.zeros(cfg.n_templates, dtype=np.int64),
        block=cfg.block,
    )


def _ring_negatives(frame: Frame, state: AffineState, cfg: TrackerConfig) -> list[Patch]:
    radius = cfg.ring_scale * CANONICAL_SIZE * state.s
    negs = []
    for angle in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        shifted = replace(
            state,
            l_x=state.l_x + radius * math.cos(angle),
            l_y=state.l_y + radius * math.sin(angle),
        )
        negs.append(warp_patch(frame, shifted, cfg.template_size, cfg.template_size))
    return negs


# ---------------------------------------------------------------------------
# proposal
# ---------------------------------------------------------------------------

def propose_particles(
    prev: AffineState, motion: MotionModelParams, n: int, rng_seed: int
) -> ParticleSet:
    """Gaussian perturbation of each parameter; draws are consumed
    particle-major, parameter-minor, so the set is seed-reproducible."""
    if n < 1:
        raise ValueError("need at least one particle")
    rng = np.random.default_rng(rng_seed)
    draws = rng.standard_normal((n, 6))
    mean = prev.as_array()
    sigma = motion.sigma
    states = mean + draws * sigma
    states[:, 3] = np.maximum(states[:, 3], 1e-3)
    states[:, 4] = np.maximum(states[:, 4], 1e-3)

    # product of the six densities; sigma=0 components contribute factor 1
    priors = np.ones(n)
    for j in range(6):
        if sigma[j] > 0:
            z = (states[:, j] - mean[j]) / sigma[j]
            priors *= np.exp(-0.5 * z * z) / (sigma[j] * math.sqrt(2.0 * math.pi))
    return ParticleSet(states=states, motion_priors=priors, prev_state=prev)


# ---------------------------------------------------------------------------
# collaborative observation model
# ---------------------------------------------------------------------------

def discriminative_score(eps_pos: float, eps_neg: float, sigma_c: float) -> float:
    """exp(-(eps_pos - eps_neg)/sigma_c), clamped to [0, 1e6]."""
    return float(np.clip(np.exp(-(eps_pos - eps_neg) / sigma_c), 0.0, 1e6))


def _coding_residual(dictionary: np.ndarray, gram: np.ndarray, y: np.ndarray,
                     lambda1: float, tol: float, max_iter: int) -> float:
    c = dictionary.T @ y
    _gamma, resid_sq, _sweeps = _kernels.cd_nn_lasso_gram(
        gram, c, float(y @ y), float(lambda1), float(tol), int(max_iter)
    )
    return float(np.sqrt(resid_sq))


def discriminative_confidence(
    candidate: Patch,
    templates: TemplateSet,
    params=None,
    sigma_c: float = 0.1,
) -> float:
    """Holistic reconstruction-error contrast between target and background
    dictionaries."""
    if params is None:
        params = SolverParams()
    if not templates.holistic or not templates.negatives:
        raise EmptyDictionary("need non-empty positive and negative dictionaries")
    y = _vec_unit(candidate)
    eps_pos = _coding_residual(
        templates.holistic_dict, templates.holistic_gram, y,
        params.lambda1, params.tol, params.max_iter,
    )
    eps_neg = _coding_residual(
        templates.negative_dict, templates.negative_gram, y,
        params.lambda1, params.tol, params.max_iter,
    )
    return discriminative_score(eps_pos, eps_neg, sigma_c)


def generative_confidence(
    candidate: Patch, templates: TemplateSet, eps_occ: float = 0.15
) -> tuple[float, np.ndarray]:
    """Blockwise local coding; returns (score, occlusion mask grid).

    A block is occluded when its coding residual exceeds eps_occ; the
    score averages (1 - residual/eps_occ) over unoccluded blocks, divided
    by the total block count.
    """
    b = templates.block
    blocks = _blocks(np.asarray(candidate, dtype=np.float64), b)
    P = blocks.shape[0]
    if P != templates.local_dict.shape[0]:
        raise BadBlocking(
            f"candidate has {P} blocks, local dictionary expects {templates.local_dict.shape[0]}"
        )
    residuals = _kernels.block_residuals(
        templates.local_grams, templates.local_dict, np.ascontiguousarray(blocks),
        _LOCAL_LAMBDA, _LOCAL_TOL, _LOCAL_MAX_ITER,
    )
    # an empty candidate block where the templates have content is a
    # blacked-out region: count it occluded (empty-vs-empty agrees)
    empty = np.linalg.norm(blocks, axis=1) == 0.0
    residuals = np.where(empty & templates.local_has_content, 1.0, residuals)
    occluded = residuals > eps_occ
    score = float(np.sum((1.0 - residuals / eps_occ)[~occluded]) / P)
    h, w = candidate.shape
    return score, occluded.reshape(h // b, w // b)


def observation_likelihood(
    candidate: Patch,
    templates: TemplateSet,
    params=None,
    sigma_c: float = 0.1,
    eps_occ: float = 0.15,
) -> float:
    """Collaborative likelihood H_d * H_g."""
    h_d = discriminative_confidence(candidate, templates, params, sigma_c=sigma_c)
    h_g, _mask = generative_confidence(candidate, templates, eps_occ=eps_occ)
    return h_d * h_g


# ---------------------------------------------------------------------------
# MAP selection and template update
# ---------------------------------------------------------------------------

def map_estimate(particles: ParticleSet) -> TrackResult:
    """Particle maximizing likelihood * motion prior; ties go to the
    lowest index. Confidence is the winner's share of total weight."""
    if particles.likelihoods is None:
        raise LikelihoodsUnset("weight the particles before MAP estimation")
    weights = particles.likelihoods * particles.motion_priors
    total = float(weights.sum())
    if total <= 0.0:
        prev = particles.prev_state or particles.state(0)
        return TrackResult(
            state=replace(prev),
            confidence=0.0,
            occlusion_fraction=0.0,
            frame_index=particles.frame_index,
            degenerate=True,
        )
    winner = int(np.argmax(weights))
    occ = float(particles.occlusions[winner]) if particles.occlusions is not None else 0.0
    return TrackResult(
        state=particles.state(winner),
        confidence=float(weights[winner] / total),
        occlusion_fraction=occ,
        frame_index=particles.frame_index,
    )


def update_templates(
    templates: TemplateSet,
    result: TrackResult,
    result_patch: Patch,
    frame: Frame,
    config: TrackerConfig | None = None,
) -> TemplateSet:
    """Occlusion-gated replacement of the oldest non-anchor slot, with a
    refresh of the ring negatives; slot 0 is never touched."""
    cfg = config or TrackerConfig()
    if result.confidence < cfg.tau_update or result.occlusion_fraction > cfg.occ_gate:
        return templates
    ages = templates.ages.copy()
    slot = 1 + int(np.argmin(ages[1:]))  # oldest replaceable, ties -> lowest
    holistic = [h.copy() for h in templates.holistic]
    holistic[slot] = np.asarray(result_patch, dtype=np.float64).copy()
    ages[slot] = result.frame_index
    negatives = _ring_negatives(frame, result.state, cfg)
    return TemplateSet(
        holistic=holistic,
        negatives=negatives,
        ages=ages,
        block=templates.block,
    )


# ---------------------------------------------------------------------------
# sequence loop
# ---------------------------------------------------------------------------

def _observation_frame(seq: FrameSequence, t: int, observe: str) -> Frame:
    if observe == "difference":
        return frame_difference(seq.frames[t - 1], seq.frames[t])
    return seq.frames[t]


def track_sequence(
    seq: FrameSequence, init: AffineState, config: TrackerConfig | None = None
) -> list[TrackResult]:
    """Track from frame 1 onward; fully deterministic given config.seed."""
    cfg = config or TrackerConfig()
    if len(seq) < 2:
        raise TooFewFrames("need at least two frames to track")
    h, w = seq.shape
    if not (0 <= init.l_x < w and 0 <= init.l_y < h):
        raise InitOutOfBounds(f"init center ({init.l_x}, {init.l_y}) outside {h}x{w}")
    solver = SolverParams(lambda1=cfg.lambda1, max_iter=cfg.solver_max_iter, tol=cfg.solver_tol)
    size = cfg.template_size

    first = _observation_frame(seq, 1, cfg.observe) if cfg.observe == "difference" else seq.frames[0]
    templates = make_template_set(first, init, cfg)

    prev = init
    results: list[TrackResult] = []
    for t in range(1, len(seq)):
        obs = _observation_frame(seq, t, cfg.observe)
        particles = propose_particles(prev, cfg.motion, cfg.n_particles, cfg.seed * 1_000_003 + t)
        particles.frame_index = t
        n = len(particles)
        likes = np.empty(n)
        occs = np.empty(n)
        for i in range(n):
            cand = warp_patch(obs, particles.state(i), size, size)
            h_d = discriminative_confidence(cand, templates, solver, sigma_c=cfg.sigma_c)
            h_g, mask = generative_confidence(cand, templates, eps_occ=cfg.eps_occ)
            likes[i] = h_d * h_g
            occs[i] = float(mask.mean())
        particles.likelihoods = likes
        particles.occlusions = occs
        result = map_estimate(particles)
        patch = warp_patch(obs, result.state, size, size)
        templates = update_templates(templates, result, patch, obs, cfg)
        prev = result.state
        results.append(result)
    return results
