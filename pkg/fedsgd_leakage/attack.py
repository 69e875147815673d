"""
Malicious-server attack: crafted parameters, parallel hyperplane search and
batch reconstruction.

Every first-layer row is the same direction w, so neuron i with bias b is
active exactly for the inputs whose boundary bias -w.x lies below b. The
classifier layer has identical columns and a huge bias, which makes the
softmax uniform and each sample's bias derivative independent of b. Sweeping
biases therefore splits the batch into nested activating sets, and the
difference between two consecutive sets isolates the inputs between them.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data import FeatureBounds
from .exceptions import ProtocolError, ValidationError
from .federation import ClientConfig, FederatedClient
from .model import GradientReport, Layer, ModelParams
from .numerics import SeededRng
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

WEIGHT_MODES = ("standard", "local_steps_robust", "noise_robust")
COMPARISON_EXACT = "exact"
COMPARISON_PROJECTION = "projection"

CLASSIFIER_BIAS = 1e25
ATTACK_WEIGHT_STD = 0.1         # variance 1e-2
HIDDEN_WEIGHT_STD = 1e-3        # variance 1e-6
HIDDEN_BIAS_SCALE = 1e-3
ROBUST_JITTER_STD = 1e-2        # variance 1e-4
LOCAL_STEPS_LEVELS = (1e5, 1e5 - 1e-2)
NOISE_LEVELS = (1e5, 1e5 - 1e3)
MIN_CLASS_GAP = 1e-8
H_FLOOR_PER_SAMPLE = 1e-30
ROBUST_FLOOR_FRACTION = 0.05
UPPER_PADDING = 2.0
LABEL_AMBIGUITY = 1e-8
RESOLUTION_ULPS = 64

CRAFT_STREAM = 21


@dataclass
class AttackConfig:
    """Settings of the hyperplane attack."""

    neurons: int
    class_count: int
    rounds: int
    feature_bounds: FeatureBounds
    weight_mode: str = "standard"
    g_equal_tol: float = 1e-9
    residual_tol: float = 1e-4
    epsilon: float = 0.0
    hidden_widths: Tuple[int, ...] = ()
    rng_seed: int = 0
    jump_tol: float = 1e-6
    h_floor: Optional[float] = None
    max_redraws: int = 1000

    def __post_init__(self):
        ValidationUtils.validate_positive_int(self.neurons, "neurons")
        ValidationUtils.validate_positive_int(self.rounds, "rounds")
        ValidationUtils.validate_positive_int(self.class_count, "class_count")
        if self.class_count < 2:
            raise ValidationError("The attack needs at least 2 classes")
        ValidationUtils.validate_choice(self.weight_mode, WEIGHT_MODES, "weight_mode")
        ValidationUtils.validate_non_negative(self.epsilon, "epsilon")
        ValidationUtils.validate_positive(self.g_equal_tol, "g_equal_tol")
        ValidationUtils.validate_positive(self.residual_tol, "residual_tol")
        ValidationUtils.validate_positive(self.jump_tol, "jump_tol")
        self.hidden_widths = tuple(int(m) for m in self.hidden_widths)
        for width in self.hidden_widths:
            ValidationUtils.validate_positive_int(width, "hidden width")

    @property
    def comparison_mode(self) -> str:
        return COMPARISON_EXACT if self.weight_mode == "standard" else COMPARISON_PROJECTION


@dataclass(eq=False)
class Strip:
    """
    One neuron-round observation.

    ``p`` is the weight gradient dW_i and ``h`` the bias gradient db_i, so
    g = p / h is the weighted mean of the activating inputs. When the bias
    derivatives of the activating set cancel, g is left at zero and only p
    carries the observation.
    """

    g: np.ndarray
    h: float
    bias: float
    p: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.p is None:
            self.p = self.h * self.g


@dataclass
class SearchState:
    """
    Live search intervals plus the strips that bound them.

    ``strips`` keeps the lowest and highest strip of every run of equal
    observations; ``representatives`` keeps one strip per distinct
    activating set in ascending bias order. ``floor_bias`` is the highest
    bias known to activate nothing (None disables floor tracking).
    ``sample_count`` caps the number of gaps, and reaching it means every
    gap holds exactly one input. ``noise_floor`` is the change in an
    observation that projection mode still treats as equal.
    """

    intervals: List[Tuple[float, float]] = field(default_factory=list)
    strips: List[Strip] = field(default_factory=list)
    epsilon: float = 0.0
    floor_bias: Optional[float] = None
    collisions: int = 0
    representatives: List[Strip] = field(default_factory=list)
    mode: str = COMPARISON_EXACT
    g_equal_tol: float = 1e-9
    residual_tol: float = 1e-4
    noise_floor: float = 0.0
    sample_count: Optional[int] = None
    settled: int = 0
    isolated: bool = False

    @property
    def finished(self) -> bool:
        return not self.intervals


@dataclass
class ReconstructionResult:
    """Inputs recovered from a converged search."""

    recovered_inputs: np.ndarray
    recovered_labels: List[Optional[int]]
    per_input_strip_bias: List[float]
    per_input_bias_grad: List[float]
    rounds_used: int = 0
    collisions: int = 0
    batch_size_estimate: int = 0
    search_collisions: int = 0
    unresolved_intervals: int = 0
    isolation_round: Optional[int] = None
    sample_count: Optional[int] = None

    def __post_init__(self):
        if self.sample_count and self.count > self.sample_count:
            raise ValidationError(
                f"Recovered {self.count} inputs from an update of {self.sample_count} samples"
            )

    @property
    def count(self) -> int:
        return self.recovered_inputs.shape[0]


def _classes_distinct(v: np.ndarray) -> bool:
    if np.min(np.abs(v - np.mean(v))) < MIN_CLASS_GAP:
        return False
    return bool(np.min(np.diff(np.sort(v))) >= MIN_CLASS_GAP)


def draw_classifier_column(
    rng: SeededRng,
    class_count: int,
    weight_mode: str = "standard",
    max_redraws: int = 1000
) -> np.ndarray:
    """
    Draw the shared classifier column v, redrawing until all classes are
    pairwise distinct and none sits at mean(v).
    """
    C = class_count
    for attempt in range(max_redraws):
        if weight_mode == "standard":
            v = rng.normal(0.0, ATTACK_WEIGHT_STD, C)
        else:
            high, low = LOCAL_STEPS_LEVELS if weight_mode == "local_steps_robust" else NOISE_LEVELS
            half = (C + 1) // 2
            v = np.concatenate([np.full(half, high), np.full(C - half, low)])
            v = v + rng.normal(0.0, ROBUST_JITTER_STD, C)
        if _classes_distinct(v):
            if attempt:
                logger.debug(f"Classifier column accepted after {attempt} redraws")
            return v
    raise ValidationError(f"Could not draw a classifier column with distinct classes in {max_redraws} attempts")


def _draw_direction(rng: SeededRng, d: int, weight_mode: str) -> np.ndarray:
    if weight_mode == "local_steps_robust":
        w = rng.uniform(1.0, 2.0, d)
        w[1::2] *= -1.0
        return w
    return rng.normal(0.0, ATTACK_WEIGHT_STD, d)


def _draw_hidden_column(rng: SeededRng, width: int, max_redraws: int) -> np.ndarray:
    for _ in range(max_redraws):
        u = rng.normal(0.0, HIDDEN_WEIGHT_STD, width)
        if np.any(u > 0):
            return u
    raise ValidationError(f"Could not draw a hidden column with a positive entry in {max_redraws} attempts")


def craft_malicious_params(d: int, cfg: AttackConfig, dtype=np.float64) -> ModelParams:
    """
    Build the parameters the server sends every round.

    Args:
        d: Input dimension
        cfg: Attack configuration (mode, widths, seed)
        dtype: Floating type of the returned arrays

    Returns:
        ModelParams with identical first-layer rows, identical classifier
        columns, classifier biases of 1e25 and zero first-layer biases (the
        attack overwrites them each round). Hidden layers, if any, have
        identical columns u and biases 1e-3 * u.
    """
    ValidationUtils.validate_positive_int(d, "d")
    rng = SeededRng(cfg.rng_seed).derive(CRAFT_STREAM)
    N = cfg.neurons

    w = _draw_direction(rng, d, cfg.weight_mode)
    layers = [Layer(np.tile(w, (N, 1)).astype(dtype), np.zeros(N, dtype=dtype))]

    width = N
    for hidden in cfg.hidden_widths:
        u = _draw_hidden_column(rng, hidden, cfg.max_redraws)
        layers.append(Layer(np.tile(u[:, None], (1, width)).astype(dtype), (HIDDEN_BIAS_SCALE * u).astype(dtype)))
        width = hidden

    v = draw_classifier_column(rng, cfg.class_count, cfg.weight_mode, cfg.max_redraws)
    layers.append(Layer(
        np.tile(v[:, None], (1, width)).astype(dtype),
        np.full(cfg.class_count, CLASSIFIER_BIAS, dtype=dtype)
    ))
    return ModelParams(layers, cfg.class_count)


def class_bias_gradients(params: ModelParams) -> np.ndarray:
    """
    Per-sample first-layer bias derivative for each class under crafted params.

    Equals gain * (mean(v) - v), where v is the shared classifier column and
    gain is the product over hidden layers of the sum of positive entries of
    their shared column.
    """
    v = params.layers[-1].weights[:, 0].astype(np.float64)
    gain = 1.0
    for layer in params.layers[1:-1]:
        u = layer.weights[:, 0].astype(np.float64)
        gain *= float(np.sum(np.maximum(u, 0.0)))
    return gain * (np.mean(v) - v)


def initial_interval(w: np.ndarray, feature_bounds: FeatureBounds) -> Tuple[float, float]:
    """
    Range containing every possible boundary bias -w.x over the feature box.

    Returns:
        (low, high) with low = -max w.x and high = -min w.x
    """
    w = np.asarray(w, dtype=np.float64)
    ValidationUtils.validate_dimension_match(feature_bounds.dimension, w.shape[0], "feature bounds")
    positive = w > 0
    max_proj = float(np.sum(np.where(positive, w * feature_bounds.highs, w * feature_bounds.lows)))
    min_proj = float(np.sum(np.where(positive, w * feature_bounds.lows, w * feature_bounds.highs)))
    return -max_proj + 0.0, -min_proj + 0.0


def update_hyperplanes(state: SearchState, N: int) -> np.ndarray:
    """
    Spread N bias values over the live intervals.

    Intervals are served longest first. With M intervals, the N mod M longest
    get floor(N / M) + 1 equispaced interior points and the rest get
    floor(N / M). When M > N, the N longest get their midpoint and the others
    wait for a later round.

    Returns:
        Ascending array of exactly N biases

    Raises:
        ValidationError: If there is no live interval
    """
    ValidationUtils.validate_positive_int(N, "N")
    if not state.intervals:
        raise ValidationError("update_hyperplanes needs at least one live interval")

    ordered = sorted(state.intervals, key=lambda iv: (-(iv[1] - iv[0]), iv[0]))
    M = len(ordered)
    if M > N:
        counts = [1] * N
        ordered = ordered[:N]
    else:
        q, r = divmod(N, M)
        counts = [q + 1 if k < r else q for k in range(M)]

    biases = []
    for (low, high), count in zip(ordered, counts):
        step = (high - low) / (count + 1)
        biases.extend(low + i * step for i in range(1, count + 1))
    return np.sort(np.asarray(biases, dtype=np.float64))


def _max_abs(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def _activity(p: np.ndarray, h: float) -> float:
    return max(abs(h), _max_abs(p))


def compute_observations(report: GradientReport, biases: np.ndarray, h_floor: float = 0.0) -> List[Strip]:
    """
    Turn first-layer gradients into strips.

    A neuron is active when its bias gradient or any weight-gradient entry
    exceeds h_floor in magnitude. The weight gradient alone keeps activating
    sets whose bias derivatives cancel.
    """
    dW, db = report.layers[0]
    strips = []
    for i in range(len(biases)):
        p = dW[i].astype(np.float64)
        h = float(db[i])
        if _activity(p, h) > h_floor:
            g = p / h if abs(h) > h_floor else np.zeros_like(p)
            strips.append(Strip(g, h, float(biases[i]), p))
    return strips


def empty_biases(report: GradientReport, biases: np.ndarray, h_floor: float = 0.0) -> List[float]:
    """Biases whose neuron produced no strip."""
    dW, db = report.layers[0]
    return [
        float(biases[i]) for i in range(len(biases))
        if _activity(dW[i].astype(np.float64), float(db[i])) <= h_floor
    ]


def _unit(values: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(values))
    return values / norm if norm > 0 else values


def strips_equal(
    a: Strip,
    b: Strip,
    mode: str = COMPARISON_EXACT,
    g_equal_tol: float = 1e-9,
    residual_tol: float = 1e-4,
    noise_floor: float = 0.0
) -> bool:
    """
    Decide whether two strips come from the same activating set.

    Exact mode compares the weight gradients p in relative max-norm and h
    against g_equal_tol * max(1, |a.h|); comparing p rather than g keeps the
    test valid when h cancels. Projection mode treats changes no larger than
    noise_floor in both p and h as equal, and otherwise projects the
    higher-bias g onto the other one and tests the Euclidean residual
    against residual_tol (unit p vectors stand in for g when h is within
    the floor).
    """
    if mode == COMPARISON_PROJECTION:
        if noise_floor > 0 and abs(a.h - b.h) <= noise_floor and _max_abs(a.p - b.p) <= noise_floor:
            return True
        upper, lower = (a, b) if a.bias >= b.bias else (b, a)
        if abs(upper.h) > noise_floor and abs(lower.h) > noise_floor:
            top, base = upper.g, lower.g
        else:
            top, base = _unit(upper.p), _unit(lower.p)
        denom = float(np.dot(base, base))
        if denom == 0.0:
            residual = float(np.linalg.norm(top))
        else:
            coef = float(np.dot(top, base)) / denom
            residual = float(np.linalg.norm(top - coef * base))
        return residual < residual_tol

    scale = max(_max_abs(a.p), _max_abs(b.p))
    p_close = scale == 0.0 or _max_abs(a.p - b.p) <= g_equal_tol * scale
    h_close = abs(a.h - b.h) <= g_equal_tol * max(1.0, abs(a.h))
    return p_close and h_close


def _resolvable(low: float, high: float) -> bool:
    magnitude = max(abs(low), abs(high), np.finfo(np.float64).tiny)
    return high - low > RESOLUTION_ULPS * np.spacing(magnitude)


def jump_size(lower: Optional[Strip], upper: Strip) -> float:
    """Size of the change from ``lower`` (None for the empty set) to ``upper``."""
    if lower is None:
        return _activity(upper.p, upper.h)
    return _activity(upper.p - lower.p, upper.h - lower.h)


def _merge_weakest(runs: List[List[Strip]], limit: int, has_floor: bool) -> List[List[Strip]]:
    # Every gap holds at least one of ``limit`` inputs, so surplus gaps are
    # noise; join the runs across the smallest jumps until the count fits.
    inner = max(limit - 1 if has_floor else limit, 0)
    if len(runs) - 1 <= inner:
        return runs
    jumps = np.asarray([jump_size(lower[1], upper[0]) for lower, upper in zip(runs, runs[1:])])
    keep = set(int(k) for k in np.argsort(-jumps, kind="stable")[:inner])
    merged = [list(runs[0])]
    for k, run in enumerate(runs[1:]):
        if k in keep:
            merged.append(list(run))
        else:
            merged[-1][1] = run[1]
    return merged


def update_search_state(
    state: SearchState,
    new_strips: Sequence[Strip],
    empty: Sequence[float] = ()
) -> SearchState:
    """
    Merge a round's strips into the search state.

    Strips are sorted by bias and grouped into runs of equal observations.
    Between two adjacent runs, and between the floor and the lowest run,
    lies at least one boundary, so that gap becomes a live interval. A gap
    narrower than epsilon is closed as a collision and one below the float
    resolution is closed as settled. When the sample count is known the
    gaps are capped at it, and once they reach it every gap holds exactly
    one input and the search is over.

    Args:
        state: Current state
        new_strips: Strips observed this round
        empty: Biases that activated nothing this round; those below every
            strip raise the floor

    Returns:
        New SearchState
    """
    merged = sorted(list(state.strips) + list(new_strips), key=lambda s: s.bias)
    strips: List[Strip] = []
    for strip in merged:
        if strips and strip.bias == strips[-1].bias:
            continue
        strips.append(strip)

    floor = state.floor_bias
    if floor is not None and empty:
        lowest = strips[0].bias if strips else math.inf
        below = [b for b in empty if b < lowest]
        if below:
            floor = max(floor, max(below))

    runs: List[List[Strip]] = []
    for strip in strips:
        if runs and strips_equal(
            runs[-1][1], strip, state.mode, state.g_equal_tol, state.residual_tol, state.noise_floor
        ):
            runs[-1][1] = strip
        else:
            runs.append([strip, strip])
    if state.sample_count:
        runs = _merge_weakest(runs, state.sample_count, floor is not None)

    retained = []
    for first, last in runs:
        retained.append(first)
        if last is not first:
            retained.append(last)

    gaps: List[Tuple[float, float]] = []
    if floor is not None and runs:
        gaps.append((floor, runs[0][0].bias))
    for (_, lower_last), (upper_first, _) in zip(runs, runs[1:]):
        gaps.append((lower_last.bias, upper_first.bias))

    isolated = bool(state.sample_count) and len(gaps) == state.sample_count
    intervals = []
    collisions = 0
    settled = 0
    for low, high in gaps:
        if isolated:
            settled += 1
        elif high - low < state.epsilon:
            collisions += 1
        elif not _resolvable(low, high):
            settled += 1
        else:
            intervals.append((low, high))

    return SearchState(
        intervals=intervals,
        strips=retained,
        epsilon=state.epsilon,
        floor_bias=floor,
        collisions=collisions,
        representatives=[last for _, last in runs],
        mode=state.mode,
        g_equal_tol=state.g_equal_tol,
        residual_tol=state.residual_tol,
        noise_floor=state.noise_floor,
        sample_count=state.sample_count,
        settled=settled,
        isolated=isolated,
    )


def _nearest_class(h_sample: float, class_values: np.ndarray) -> Optional[int]:
    distances = np.abs(h_sample - class_values)
    order = np.argsort(distances, kind="stable")
    if order.shape[0] > 1 and distances[order[1]] - distances[order[0]] < LABEL_AMBIGUITY:
        return None
    return int(order[0])


def infer_label(h_sample: float, v: np.ndarray, gain: float = 1.0) -> Optional[int]:
    """
    Label whose predicted bias derivative gain * (mean(v) - v_c) is closest.

    Returns:
        Class index, or None when the two best classes are within 1e-8
    """
    v = np.asarray(v, dtype=np.float64)
    return _nearest_class(h_sample, gain * (np.mean(v) - v))


def alpha_coefficients(per_sample_h: Sequence[float]) -> np.ndarray:
    """
    Mixing weights of inputs sorted by boundary bias.

    Entry [j, k] is the weight of input j in the observation of the strip
    whose activating set is inputs 0..k: h_j / sum_{i<=k} h_i for j <= k,
    zero above the diagonal.
    """
    h = np.asarray(per_sample_h, dtype=np.float64)
    m = h.shape[0]
    alphas = np.zeros((m, m))
    running = 0.0
    for k in range(m):
        running += h[k]
        alphas[:k + 1, k] = h[:k + 1] / running
    return alphas


def reconstruct_batch(
    strips: Sequence[Strip],
    n: Optional[int] = None,
    class_values: Optional[np.ndarray] = None,
    h_floor: float = 0.0,
    check_jumps: bool = True,
    jump_tol: float = 1e-6,
    sample_count: Optional[int] = None
) -> ReconstructionResult:
    """
    Recover inputs from strips that each add one input to the previous set.

    For consecutive strips k and k+1 the new input is
    (p_{k+1} - p_k) / (h_{k+1} - h_k), the same quantity as
    (g_{k+1} - sum_j alpha_{j,k+1} x_j) / alpha_{k+1,k+1} without summing
    over the recovered inputs. Its per-sample bias derivative is
    n (h_{k+1} - h_k).

    Args:
        strips: One strip per distinct activating set
        n: Batch size; defaults to the number of strips
        class_values: Per-class bias derivatives, used for label inference
            and (with check_jumps) to flag strips that added several inputs
        h_floor: Threshold below which alpha_{k+1,k+1} * sum|h| counts as zero
        check_jumps: Flag jumps that match no single class
        jump_tol: Relative tolerance of the class match
        sample_count: Samples behind the update; at most this many inputs
            (n when unset) are returned, keeping the largest jumps

    Returns:
        ReconstructionResult; flagged strips are counted in ``collisions``
        and their contribution is carried into the next step
    """
    ordered = sorted(strips, key=lambda s: s.bias)
    if not ordered:
        return ReconstructionResult(np.zeros((0, 0)), [], [], [], batch_size_estimate=n or 0)

    n_eff = n if n else len(ordered)
    d = ordered[0].p.shape[0]
    total_h = sum(abs(s.h) for s in ordered)
    alpha_floor = h_floor / total_h if total_h > 0 else 0.0
    scale = float(np.max(np.abs(class_values))) if class_values is not None else 0.0

    candidates = []
    flagged = 0
    previous: Optional[Strip] = None
    for strip in ordered:
        prev_p = previous.p if previous is not None else np.zeros(d)
        prev_h = previous.h if previous is not None else 0.0
        jump = strip.h - prev_h
        alpha_new = jump / strip.h if strip.h != 0.0 else math.inf
        h_sample = n_eff * jump

        # A matching jump may still hold several inputs whose class values
        # add up to one class; the match only rules out the others.
        single = True
        if check_jumps and class_values is not None:
            single = float(np.min(np.abs(h_sample - class_values))) <= jump_tol * scale

        if jump == 0.0 or abs(alpha_new) < alpha_floor or not single:
            flagged += 1
        else:
            candidates.append((
                jump_size(previous, strip),
                (strip.p - prev_p) / jump,
                _nearest_class(h_sample, class_values) if class_values is not None else None,
                strip.bias,
                h_sample,
            ))
        previous = strip

    limit = sample_count or n
    if limit and len(candidates) > limit:
        keep = sorted(np.argsort([-c[0] for c in candidates], kind="stable")[:limit])
        flagged += len(candidates) - limit
        candidates = [candidates[k] for k in keep]

    recovered = np.vstack([c[1] for c in candidates]) if candidates else np.zeros((0, d))
    return ReconstructionResult(
        recovered_inputs=recovered,
        recovered_labels=[c[2] for c in candidates],
        per_input_strip_bias=[c[3] for c in candidates],
        per_input_bias_grad=[c[4] for c in candidates],
        collisions=flagged,
        batch_size_estimate=n_eff,
        sample_count=limit or None,
    )


def round_bound(width: float, N: int, n: int, epsilon: float) -> int:
    """
    Rounds needed to shrink every live interval below epsilon.

    Evaluates ceil(log_{floor(N/n)+1}(width / (N * epsilon))) + 1, never
    less than 1.

    Raises:
        ValidationError: If epsilon <= 0 or N < n
    """
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    ValidationUtils.validate_positive_int(n, "n")
    ValidationUtils.validate_positive_int(N, "N")
    if N < n:
        raise ValidationError(f"round_bound needs N >= n, got N={N}, n={n}")
    ValidationUtils.validate_positive(width, "width")

    base = N // n + 1
    ratio = width / (N * epsilon)
    if ratio <= 1.0:
        return 1
    exponent = math.log(ratio) / math.log(base)
    return max(1, math.ceil(exponent - 1e-9) + 1)


def epsilon_for_confidence(delta_min: float, n: int, confidence: float) -> float:
    """
    Projection gap that separates all pairs with probability >= 1 - confidence.

    Args:
        delta_min: Minimum pairwise distance between inputs (for a standard
            normal direction; scale it by the direction's std otherwise)
        n: Batch size
        confidence: Failure probability, in (0, 1)

    Returns:
        sqrt(2 pi) * delta_min * confidence / n^2
    """
    ValidationUtils.validate_positive(delta_min, "delta_min")
    ValidationUtils.validate_positive_int(n, "n")
    ValidationUtils.validate_open_unit(confidence, "confidence")
    return math.sqrt(2.0 * math.pi) * delta_min * confidence / (n * n)


def count_unisolated(state: SearchState, boundaries: np.ndarray) -> int:
    """
    Number of true boundary biases sharing a gap with another boundary.

    Uses ground-truth boundaries (simulator privilege). Zero means every
    input sits alone between two retained observations.
    """
    edges = []
    if state.floor_bias is not None:
        edges.append(state.floor_bias)
    edges.extend(s.bias for s in state.strips)
    edges = np.asarray(sorted(edges))
    if edges.size == 0:
        return int(np.asarray(boundaries).size)
    slots = np.searchsorted(edges, np.asarray(boundaries), side="right")
    _, counts = np.unique(slots, return_counts=True)
    return int(np.sum(counts[counts > 1]))


def resolve_h_floor(cfg: AttackConfig, class_values: np.ndarray, batch_size: Optional[int]) -> float:
    """
    Threshold on max(|db_i|, max|dW_i|) that separates an active neuron
    from an empty one.

    Noise-robust crafting makes every class value large, so the floor there
    is a fixed fraction of the smallest per-sample bias derivative and sits
    well above the gradient noise.
    """
    if cfg.h_floor is not None:
        return cfg.h_floor
    n = batch_size or 1
    floor = H_FLOOR_PER_SAMPLE * n
    if cfg.weight_mode == "noise_robust" and batch_size:
        floor = max(floor, ROBUST_FLOOR_FRACTION * float(np.min(np.abs(class_values))) / n)
    return floor


class HyperplaneAttack:
    """
    Drives the full attack against one client.

    Crafts the parameters once, then each round spreads N biases over the
    live intervals, collects the client's update, and refines the search
    until no interval is left or the round budget is spent.
    """

    def __init__(self, cfg: AttackConfig, logger: Optional[logging.Logger] = None, dtype=np.float64):
        """
        Initialize HyperplaneAttack.

        Args:
            cfg: Attack configuration
            logger: Optional logger instance
            dtype: Floating type of the crafted parameters
        """
        self.cfg = cfg
        self.logger = logger if logger else logging.getLogger(__name__)
        self.dtype = dtype
        self.history: List[dict] = []
        self.params: Optional[ModelParams] = None

    def run(self, client_config: ClientConfig, track_isolation: bool = False) -> ReconstructionResult:
        """
        Attack a client and reconstruct its batch.

        Args:
            client_config: Victim client
            track_isolation: Record the first round after which every true
                input is isolated (reads the client's data)

        Returns:
            ReconstructionResult

        Raises:
            ValidationError: If the config does not fit the client's data
            ProtocolError: If a response does not mirror the model sent
        """
        cfg = self.cfg
        d = client_config.batch.dimension
        ValidationUtils.validate_dimension_match(cfg.feature_bounds.dimension, d, "feature bounds")

        params = craft_malicious_params(d, cfg, self.dtype)
        self.params = params
        w = params.layers[0].weights[0].astype(np.float64)
        low, high = initial_interval(w, cfg.feature_bounds)
        width = high - low
        upper = high + (UPPER_PADDING * width / cfg.neurons if width > 0 else 1.0)

        class_values = class_bias_gradients(params)
        exact = cfg.comparison_mode == COMPARISON_EXACT
        state = SearchState(
            intervals=[(low, upper)],
            epsilon=cfg.epsilon,
            floor_bias=low,
            mode=cfg.comparison_mode,
            g_equal_tol=cfg.g_equal_tol,
            residual_tol=cfg.residual_tol,
        )
        boundaries = -(client_config.batch.inputs @ w) if track_isolation else None
        isolation_round = None

        client = FederatedClient(client_config, self.logger)
        self.logger.info(
            f"Hyperplane attack: N={cfg.neurons}, T={cfg.rounds}, mode={cfg.weight_mode}, "
            f"search range [{low:.6g}, {upper:.6g}]"
        )

        batch_size = None
        sample_count = None
        h_floor = resolve_h_floor(cfg, class_values, None)
        rounds = 0
        for round_index in range(cfg.rounds):
            if state.finished:
                break
            biases = update_hyperplanes(state, cfg.neurons)
            round_params = params.with_first_layer_biases(biases)
            response = client.respond(round_params)
            if not response.matches(round_params):
                raise ProtocolError(
                    f"Round {round_index}: client update shapes do not mirror the model sent"
                )

            if response.batch_size and batch_size is None:
                batch_size = response.batch_size
                sample_count = response.sample_count or batch_size
                state.sample_count = sample_count
            h_floor = resolve_h_floor(cfg, class_values, batch_size)
            if not exact:
                state.noise_floor = h_floor

            strips = compute_observations(response.update, biases, h_floor)
            state = update_search_state(state, strips, empty_biases(response.update, biases, h_floor))
            rounds += 1

            if boundaries is not None and isolation_round is None and count_unisolated(state, boundaries) == 0:
                isolation_round = rounds
            self.history.append({
                "round": rounds,
                "strips": len(strips),
                "intervals": len(state.intervals),
                "distinct_sets": len(state.representatives),
                "collisions": state.collisions,
                "settled": state.settled,
            })
            self.logger.debug(
                f"Round {rounds}: {len(strips)} strips, {len(state.representatives)} distinct sets, "
                f"{len(state.intervals)} live intervals, {state.collisions} narrow gaps"
            )

        result = reconstruct_batch(
            state.representatives,
            n=batch_size,
            class_values=class_values,
            h_floor=h_floor,
            check_jumps=exact and batch_size is not None and sample_count == batch_size,
            jump_tol=cfg.jump_tol,
            sample_count=sample_count,
        )
        result.rounds_used = rounds
        result.search_collisions = state.collisions
        result.unresolved_intervals = len(state.intervals)
        result.isolation_round = isolation_round
        self.logger.info(
            f"Attack finished after {rounds} rounds: {result.count} inputs recovered, "
            f"{result.collisions} flagged strips, {result.unresolved_intervals} open intervals"
        )
        return result


def run_attack(
    client: ClientConfig,
    cfg: AttackConfig,
    logger: Optional[logging.Logger] = None,
    dtype=np.float64
) -> ReconstructionResult:
    """Run the hyperplane attack end to end."""
    return HyperplaneAttack(cfg, logger, dtype).run(client)
