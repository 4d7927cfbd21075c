"""Learnable-location sparse DCT adapter and its alternating trainer.

A weight update is parameterised as ``alpha * C.T @ S(a, round(l)) @ D``: ``B``
coefficients ``a`` placed at continuous locations ``l`` that are rounded in the
forward pass. Coefficient gradients and central-difference location gradients
are both read off one matrix ``Z = dct2(dL/dDeltaW)``.

Locations are stored in index units (0 .. p-1). A learning rate quoted for
locations rescaled to [0, 1] converts as ``lr_index = lr_unit * grid_size``.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from localab._validation import check_matrix
from localab.transforms import SparseSpectrum, dct2, get_basis, idct2_sparse

logger = logging.getLogger(__name__)

ALTERNATING = "alternating"
COEFFICIENTS_ONLY = "coefficients-only"


class DivergenceError(RuntimeError):
    """Training loss exceeded the divergence threshold."""


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def round_locations(l, dims):
    """Nearest grid cell of each continuous location, clamped into the grid."""
    l = np.asarray(l, dtype=float).reshape(-1, 2)
    p, q = dims
    r = round_half_away(l)
    rows = np.clip(r[:, 0], 0, p - 1)
    cols = np.clip(r[:, 1], 0, q - 1)
    return np.stack([rows, cols], axis=1).astype(np.int64)


@dataclass
class LocaParam:
    """Coefficients ``a`` (B,), continuous locations ``l`` (B, 2), scale ``alpha``."""

    a: np.ndarray
    l: np.ndarray
    alpha: float = 1.0
    dims: tuple = (1, 1)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1).copy()
        self.l = np.asarray(self.l, dtype=float).reshape(-1, 2).copy()
        self.dims = (int(self.dims[0]), int(self.dims[1]))
        if len(self.a) != len(self.l):
            raise ValueError(f"{len(self.a)} coefficients but {len(self.l)} locations")

    @classmethod
    def init(cls, n_components, dims, alpha=1.0, rng=None):
        """Zero coefficients at locations drawn uniformly over the grid."""
        rng = np.random.default_rng(rng)
        p, q = dims
        l = np.column_stack([rng.uniform(0, p - 1, n_components),
                             rng.uniform(0, q - 1, n_components)])
        return cls(np.zeros(n_components), l, alpha, dims)

    @property
    def basis(self):
        return get_basis(*self.dims)

    def __len__(self):
        return len(self.a)

    def rounded(self):
        return round_locations(self.l, self.dims)

    def spectrum(self):
        return SparseSpectrum(self.a, self.rounded(), self.dims)

    def copy(self):
        return replace(self, a=self.a.copy(), l=self.l.copy())


def materialize(param):
    """Dense update ``alpha * C.T @ S(a, round(l)) @ D``."""
    return param.alpha * idct2_sparse(param.spectrum(), param.basis)


def upstream_to_Z(dL_dDeltaW, basis):
    """DCT of the upstream gradient; ``alpha * Z[i, j]`` is ``dL/dS[i, j]``."""
    G = check_matrix(dL_dDeltaW, "dL_dDeltaW")
    if G.shape != basis.shape:
        raise ValueError(f"gradient shape {G.shape} does not match basis {basis.shape}")
    return dct2(G, basis)


def coeff_gradient(param, Z):
    """``alpha * Z`` read at each rounded location."""
    loc = param.rounded()
    return param.alpha * Z[loc[:, 0], loc[:, 1]]


def _neighbour_steps(idx, n):
    """Forward / backward neighbours and their spacing (one-sided at the edges)."""
    up = np.minimum(idx + 1, n - 1)
    down = np.maximum(idx - 1, 0)
    return up, down, np.maximum(up - down, 1)


def location_gradient(param, Z):
    """Central-difference estimate of ``dL/dl``, shape (B, 2).

    Along the first axis ``alpha * a_n * (Z[i+1, j] - Z[i-1, j]) / 2``; at a
    grid edge the one-sided difference is used instead. Grids of extent 1
    give zero gradient along that axis.
    """
    p, q = param.dims
    loc = param.rounded()
    i, j = loc[:, 0], loc[:, 1]
    scale = param.alpha * param.a
    up, down, span = _neighbour_steps(i, p)
    g1 = np.where(up > down, (Z[up, j] - Z[down, j]) / span, 0.0)
    right, left, span = _neighbour_steps(j, q)
    g2 = np.where(right > left, (Z[i, right] - Z[i, left]) / span, 0.0)
    return np.column_stack([scale * g1, scale * g2])


def sgd_step(values, grads, lr):
    """Plain gradient descent, no weight decay."""
    values = np.asarray(values, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if values.shape != grads.shape:
        raise ValueError(f"shape mismatch: values {values.shape} vs grads {grads.shape}")
    return values - lr * grads


@dataclass(frozen=True)
class AltSchedule:
    """Alternating schedule.

    For step ``t <= B_s`` the coefficients are updated when
    ``t mod (B_a + B_l) < B_a`` and the locations otherwise; after ``B_s`` only
    coefficients move, up to ``T`` steps in total.
    """

    B_a: int = 10
    B_l: int = 20
    B_s: int = 2000
    T: int = 3000
    lr_a: float = 0.02
    lr_l: float = 0.05

    def __post_init__(self):
        if self.B_a < 1 or self.B_l < 1:
            raise ValueError("B_a and B_l must be >= 1")
        if not 0 <= self.B_s <= self.T:
            raise ValueError(f"need 0 <= B_s <= T, got B_s={self.B_s}, T={self.T}")

    @property
    def period(self):
        return self.B_a + self.B_l

    def phase(self, t):
        return ALTERNATING if t <= self.B_s else COEFFICIENTS_ONLY

    def updates_locations(self, t):
        return t <= self.B_s and t % self.period >= self.B_a


TOY_SCHEDULE = AltSchedule(B_a=10, B_l=10, B_s=2000, T=3000, lr_a=0.02, lr_l=0.05)


@dataclass
class TrainerState:
    param: LocaParam
    step: int = 0
    phase: str = ALTERNATING
    losses: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final_loss: float = float("nan")

    @property
    def loss_curve(self):
        return np.array([loss for _, loss, _ in self.losses])


def _forward(H, left, base, dW):
    return H @ (base + dW).T @ left.T


def train_loca(X, Y, param, schedule, left=None, right=None, base=None,
               divergence_factor=1e6, snapshot_every=None):
    """Alternating training of ``param`` on the mean-squared error of the model

    ``y = left @ (base + dW) @ right @ x`` for every row ``x`` of ``X``.

    Returns a :class:`TrainerState`. ``param`` is copied, not modified.
    """
    param = param.copy()
    p, q = param.dims
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    left = np.eye(p) if left is None else np.asarray(left, dtype=float)
    right = np.eye(q) if right is None else np.asarray(right, dtype=float)
    base = np.zeros((p, q)) if base is None else np.asarray(base, dtype=float)
    H = X @ right.T
    basis = param.basis
    n_out = Y.size
    every = schedule.period if snapshot_every is None else snapshot_every
    state = TrainerState(param)
    state.snapshots.append((0, param.l.copy(), param.rounded()))

    initial = None
    for t in range(1, schedule.T + 1):
        dW = materialize(param)
        resid = _forward(H, left, base, dW) - Y
        loss = float(np.mean(resid ** 2))
        if initial is None:
            initial = max(loss, np.finfo(float).tiny)
        if not np.isfinite(loss) or loss > divergence_factor * initial:
            raise DivergenceError(f"loss {loss:.3e} at step {t} exceeds "
                                  f"{divergence_factor:g} x initial {initial:.3e}")
        phase = schedule.phase(t)
        state.losses.append((t, loss, phase))
        G = left.T @ (2.0 / n_out * resid).T @ H
        Z = upstream_to_Z(G, basis)
        if schedule.updates_locations(t):
            l = sgd_step(param.l, location_gradient(param, Z), schedule.lr_l)
            # keep continuous locations on the grid so edge gradients stay meaningful
            param.l = np.clip(l, 0.0, [p - 1, q - 1])
        else:
            param.a = sgd_step(param.a, coeff_gradient(param, Z), schedule.lr_a)
        state.step = t
        state.phase = phase
        if t % every == 0:
            state.snapshots.append((t, param.l.copy(), param.rounded()))
    resid = _forward(H, left, base, materialize(param)) - Y
    state.final_loss = float(np.mean(resid ** 2))
    if state.snapshots[-1][0] != state.step:
        state.snapshots.append((state.step, param.l.copy(), param.rounded()))
    return state


# -- toy regression task ---------------------------------------------------------

@dataclass
class ToyTaskSpec:
    """Three-layer linear regression ``y = W3 @ idct(F2) @ W1 @ x``.

    Both ``N(0, 20)`` (inputs) and ``N(0, 0.2)`` (weights) are read as
    variances.
    """

    X: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)
    W1: np.ndarray = field(repr=False)
    W3: np.ndarray = field(repr=False)
    true_coefficients: np.ndarray
    true_locations: np.ndarray
    seed: int = 0
    schedule: AltSchedule = TOY_SCHEDULE

    @property
    def dims(self):
        return (self.W1.shape[0], self.W1.shape[0])

    @property
    def n_components(self):
        return len(self.true_coefficients)


def _full_rank_gaussian(rng, n, std):
    while True:
        M = rng.normal(0.0, std, (n, n))
        if np.linalg.matrix_rank(M) == n:
            return M


def build_toy_task(seed, n_samples=5000, dim=6, n_components=3,
                   input_var=20.0, weight_var=0.2):
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, np.sqrt(input_var), (n_samples, dim))
    W1 = _full_rank_gaussian(rng, dim, np.sqrt(weight_var))
    W3 = _full_rank_gaussian(rng, dim, np.sqrt(weight_var))
    cells = rng.choice(dim * dim, size=n_components, replace=False)
    locations = np.column_stack(np.unravel_index(cells, (dim, dim))).astype(np.int64)
    coefficients = rng.normal(0.0, np.sqrt(weight_var), n_components)
    W2 = idct2_sparse(SparseSpectrum(coefficients, locations, (dim, dim)))
    Y = X @ (W3 @ W2 @ W1).T
    return ToyTaskSpec(X, Y, W1, W3, coefficients, locations, seed)


def alternating_train(task, schedule=None, rng=None, param=None, alpha=1.0):
    """Run the alternating trainer on a toy task.

    Locations start uniformly over the grid (drawn from ``rng``) with zero
    coefficients unless ``param`` is supplied.
    """
    schedule = task.schedule if schedule is None else schedule
    if param is None:
        param = LocaParam.init(task.n_components, task.dims, alpha, rng)
    return train_loca(task.X, task.Y, param, schedule, left=task.W3, right=task.W1)


def recovered_locations(state, task):
    """Whether the rounded learned locations equal the ground-truth set."""
    learned = {tuple(x) for x in state.param.rounded().tolist()}
    truth = {tuple(x) for x in task.true_locations.tolist()}
    return learned == truth


# -- checkpoint file ------------------------------------------------------------------

CHECKPOINT_FORMAT = "loca-checkpoint-v1"


def save_checkpoint(path, param, step=0, phase=ALTERNATING):
    """Write a plain-text ``key=value`` checkpoint.

    Keys: ``format``, ``p``, ``q``, ``alpha``, ``step``, ``phase``, ``a``
    (comma-separated) and ``l`` (comma-separated ``row:col`` pairs). Floats are
    written with ``repr`` so they round-trip exactly.
    """
    lines = [
        f"format={CHECKPOINT_FORMAT}",
        f"p={param.dims[0]}",
        f"q={param.dims[1]}",
        f"alpha={param.alpha!r}",
        f"step={int(step)}",
        f"phase={phase}",
        "a=" + ",".join(repr(float(v)) for v in param.a),
        "l=" + ",".join(f"{float(r)!r}:{float(c)!r}" for r, c in param.l),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Read a checkpoint; returns ``(param, step, phase)``."""
    record = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed checkpoint line: {line!r}")
            record[key.strip()] = value.strip()
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {record.get('format')!r}")
    a = [float(v) for v in record["a"].split(",")] if record["a"] else []
    l = [tuple(float(x) for x in pair.split(":")) for pair in record["l"].split(",")] \
        if record["l"] else np.zeros((0, 2))
    param = LocaParam(a, l, float(record["alpha"]), (int(record["p"]), int(record["q"])))
    return param, int(record["step"]), record["phase"]


# -- estimator -------------------------------------------------------------------------

class LocaRegressor(RegressorMixin, BaseEstimator):
    """Linear regressor whose weight update is a learnable-location sparse DCT.

    Fits ``y = left @ (base + dW) @ right @ x`` with ``dW`` parameterised by
    ``n_components`` DCT coefficients at learnable locations, trained with the
    alternating coefficient / location schedule on the full batch.

    Parameters
    ----------
    n_components : int
        Number of frequency components ``B``.
    alpha : float
        Scale applied to the inverse DCT.
    lr_coef, lr_loc : float
        Learning rates for coefficients and (index-unit) locations.
    coef_steps, loc_steps : int
        Steps per coefficient / location phase of one cycle.
    alt_steps : int
        Steps during which locations may move; ``max_steps`` in total.
    left, right, base : array-like or None
        Fixed outer maps and base weight; identity / zero when omitted.
    init_locations : array-like of shape (n_components, 2) or None
        Starting locations; uniform over the grid when omitted.
    random_state : int, Generator or None
    """

    def __init__(self, n_components=3, alpha=1.0, lr_coef=0.02, lr_loc=0.05,
                 coef_steps=10, loc_steps=10, alt_steps=2000, max_steps=3000,
                 left=None, right=None, base=None, init_locations=None,
                 random_state=None):
        self.n_components = n_components
        self.alpha = alpha
        self.lr_coef = lr_coef
        self.lr_loc = lr_loc
        self.coef_steps = coef_steps
        self.loc_steps = loc_steps
        self.alt_steps = alt_steps
        self.max_steps = max_steps
        self.left = left
        self.right = right
        self.base = base
        self.init_locations = init_locations
        self.random_state = random_state

    def _dims(self, n_features, n_targets):
        p = n_targets if self.left is None else np.shape(self.left)[1]
        q = n_features if self.right is None else np.shape(self.right)[0]
        return p, q

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        y2 = y.reshape(len(y), -1)
        self.n_features_in_ = X.shape[1]
        self._y_1d = y.ndim == 1
        dims = self._dims(X.shape[1], y2.shape[1])
        left = np.eye(y2.shape[1]) if self.left is None else np.asarray(self.left, float)
        right = np.eye(X.shape[1]) if self.right is None else np.asarray(self.right, float)
        if left.shape != (y2.shape[1], dims[0]) or right.shape != (dims[1], X.shape[1]):
            raise ValueError("left/right shapes do not match the data")
        rng = np.random.default_rng(self.random_state)
        if self.init_locations is None:
            param = LocaParam.init(self.n_components, dims, self.alpha, rng)
        else:
            l = np.asarray(self.init_locations, dtype=float).reshape(-1, 2)
            param = LocaParam(np.zeros(len(l)), l, self.alpha, dims)
        schedule = AltSchedule(self.coef_steps, self.loc_steps, self.alt_steps,
                               self.max_steps, self.lr_coef, self.lr_loc)
        self.state_ = train_loca(X, y2, param, schedule, left=left, right=right,
                                 base=self.base)
        self._left, self._right = left, right
        self._base = np.zeros(dims) if self.base is None else np.asarray(self.base, float)
        self.coef_ = self.state_.param.a
        self.locations_ = self.state_.param.l
        self.delta_ = materialize(self.state_.param)
        self.loss_curve_ = self.state_.loss_curve
        return self

    def predict(self, X):
        check_is_fitted(self, "delta_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        pred = _forward(X @ self._right.T, self._left, self._base, self.delta_)
        return pred.ravel() if self._y_1d else pred
