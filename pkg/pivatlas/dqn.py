"""
Deep Q-learning pivot agent: a small fully connected network scoring
(matrix, pivot) pairs, trained with experience replay and a target
network on uniformly sampled patterns.

The matrix is always seen in a fixed n x n frame; smaller matrices
left over after elimination steps sit in the top left corner.
"""

from collections import deque
from logging import getLogger
from struct import calcsize, pack, unpack
from typing import (
    Deque,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from .bitmatrix import (
    BitMatrix,
    CostModel,
    Pivot,
    PivotError,
    eliminate,
    fill_in,
    free_pivots,
    step_cost,
)
from .strategies import (
    Kind,
    Strategy,
    TieBreak,
    episode_costs,
    sample_matrices,
)

__all__ = (
    "HyperParams",
    "Learner",
    "QNetwork",
    "ReplayBuffer",
    "Transition",
    "WeightFileError",
    "agent_strategy",
    "backward",
    "encode",
    "epsilon_greedy_action",
    "evaluate_agent",
    "forward",
    "greedy_action",
    "load_weights",
    "play",
    "save_weights",
    "sgd_step",
    "train",
)

log = getLogger("pivatlas.dqn")

MAGIC = b"PIVDQN01"
HEADER = "<8sBBB"

Gradient = List[np.ndarray]


class WeightFileError(ValueError):
    pass


class HyperParams(NamedTuple):
    n: int = 4
    episodes: int = 40000
    epsilon_start: float = 0.5
    epsilon_end: float = 0.1
    epsilon_decay_fraction: float = 0.5
    gamma: float = 1.0
    learning_rate: float = 0.001
    momentum: float = 0.0
    batch_size: int = 50
    replay_capacity: int = 10000
    target_sync_period: int = 500
    include_fillin_feature: bool = False
    auto_free_pivots: bool = False
    curve_window: int = 1000
    seed: int = 0

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "HyperParams":
        """From string values, as found in a config section"""
        kwargs = {}
        for key, text in mapping.items():
            if key not in cls._fields:
                raise ValueError(f"Unknown hyperparameter {key!r}")
            default = cls._field_defaults[key]
            if isinstance(default, bool):
                kwargs[key] = text.lower() in ("1", "yes", "true", "on")
            else:
                kwargs[key] = type(default)(text)
        return cls(**kwargs).validated()

    def validated(self) -> "HyperParams":
        if not 0 < self.gamma <= 1:
            raise ValueError(f"Discount {self.gamma} not in (0, 1]")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0 <= eps <= 1:
                raise ValueError(f"Exploration rate {eps} not in [0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError(
                f"Batch {self.batch_size} does not fit"
                f" replay buffer of {self.replay_capacity}"
            )
        return self

    def epsilon(self, episode: int) -> float:
        """Linear decay over the first part of training, then constant"""
        span = self.episodes * self.epsilon_decay_fraction
        if span <= 0 or episode >= span:
            return self.epsilon_end
        return self.epsilon_start + (
            self.epsilon_end - self.epsilon_start
        ) * (episode / span)


def feature_size(n: int, include_fillin: bool) -> int:
    return n * (n + 2) + int(include_fillin)


class QNetwork:
    """Layers [d_in, n(n+2), n(n+2), 1], relu on the hidden ones"""

    def __init__(
        self,
        frame: int,
        include_fillin: bool,
        weights: List[np.ndarray],
        biases: List[np.ndarray],
    ) -> None:
        self.frame = frame
        self.include_fillin = include_fillin
        self.weights = weights
        self.biases = biases
        self.velocity: Optional[Gradient] = None

    @classmethod
    def create(
        cls,
        frame: int,
        include_fillin: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> "QNetwork":
        """Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases"""
        if rng is None:
            rng = np.random.default_rng(0)
        hidden = frame * (frame + 2)
        dims = [feature_size(frame, include_fillin), hidden, hidden, 1]
        weights = []
        for d_in, d_out in zip(dims, dims[1:]):
            limit = np.sqrt(6.0 / (d_in + d_out))
            weights.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        biases = [np.zeros(d) for d in dims[1:]]
        return cls(frame, include_fillin, weights, biases)

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}(frame={self.frame},"
            f" fillin={self.include_fillin}, dims={self.dims})"
        )

    def __eq__(self, other: object) -> bool:
        if isinstance(other, QNetwork):
            return (
                self.frame == other.frame
                and self.include_fillin == other.include_fillin
                and self.dims == other.dims
                and all(
                    np.array_equal(a, b)
                    for a, b in zip(self.params(), other.params())
                )
            )
        return NotImplemented

    @property
    def dims(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> List[np.ndarray]:
        """[W0, b0, W1, b1, ...], the arrays themselves, not copies"""
        return [a for wb in zip(self.weights, self.biases) for a in wb]

    def copy(self) -> "QNetwork":
        return QNetwork(
            self.frame,
            self.include_fillin,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


def encode(
    m: BitMatrix, p: Pivot, n: int, include_fillin: bool = False
) -> np.ndarray:
    """
    n*n entry indicators (row major, in the n x n frame), one-hot pivot
    row, one-hot pivot column, and optionally the fill-in of the pivot.
    """
    if m.n_rows > n or m.n_cols > n:
        raise PivotError(f"{m.n_rows}x{m.n_cols} matrix exceeds frame {n}")
    fill = fill_in(m, p)
    x = np.zeros(feature_size(n, include_fillin))
    for i, j in m.nonzeros():
        x[i * n + j] = 1.0
    x[n * n + p.row] = 1.0
    x[n * n + n + p.col] = 1.0
    if include_fillin:
        x[-1] = float(fill)
    return x


def encode_all(
    net: QNetwork, m: BitMatrix, pivots: Sequence[Pivot]
) -> np.ndarray:
    return np.array(
        [encode(m, p, net.frame, net.include_fillin) for p in pivots]
    ).reshape(len(pivots), -1)


def _layers(net: QNetwork, x: np.ndarray) -> List[np.ndarray]:
    """Outputs of every layer, input included, for a (B, d_in) batch"""
    if x.shape[-1] != net.dims[0]:
        raise ValueError(
            f"Input of size {x.shape[-1]}, expected {net.dims[0]}"
        )
    outs = [x]
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = np.dot(outs[-1], w) + b
        outs.append(z if k == last else np.maximum(z, 0.0))
    return outs


def forward(net: QNetwork, x: np.ndarray) -> np.ndarray:
    """Q-values: a (B,) array for a (B, d_in) batch, a 0-d one for a vector"""
    x = np.asarray(x, dtype=np.float64)
    q = _layers(net, np.atleast_2d(x))[-1][:, 0]
    return q if x.ndim == 2 else q[0]


def loss(net: QNetwork, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((forward(net, x) - y) ** 2))


def backward(net: QNetwork, x: np.ndarray, y: np.ndarray) -> Gradient:
    """Gradient of mean((Q(x) - y)^2), in the order of net.params()"""
    outs = _layers(net, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    delta = 2.0 * (outs[-1] - y) / len(y)
    grads: Gradient = []
    for k in reversed(range(len(net.weights))):
        grads[:0] = [np.dot(outs[k].T, delta), delta.sum(axis=0)]
        if k:
            delta = np.dot(delta, net.weights[k].T)
            delta[outs[k] <= 0] = 0.0
    return grads


def sgd_step(
    net: QNetwork, grads: Gradient, lr: float, momentum: float = 0.0
) -> None:
    params = net.params()
    if len(grads) != len(params):
        raise ValueError(f"{len(grads)} gradients for {len(params)} params")
    if momentum:
        if net.velocity is None:
            net.velocity = [np.zeros_like(a) for a in params]
        for v, g in zip(net.velocity, grads):
            v *= momentum
            v -= lr * g
        grads = [-v for v in net.velocity]
        lr = 1.0
    for a, g in zip(params, grads):
        if a.shape != g.shape:
            raise ValueError(f"Gradient {g.shape} for parameter {a.shape}")
        a -= lr * g


def greedy_action(net: QNetwork, m: BitMatrix) -> Pivot:
    """Highest Q-value, the lexicographically first one on ties"""
    pivots = list(m.nonzeros())
    if not pivots:
        raise PivotError("No action on a zero matrix")
    if len(pivots) == 1:
        return pivots[0]
    q = forward(net, encode_all(net, m, pivots))
    return pivots[int(np.argmax(q))]


def epsilon_greedy_action(
    net: QNetwork, m: BitMatrix, epsilon: float, rng: np.random.Generator
) -> Pivot:
    if rng.random() < epsilon:
        pivots = list(m.nonzeros())
        if not pivots:
            raise PivotError("No action on a zero matrix")
        return pivots[int(rng.integers(len(pivots)))]
    return greedy_action(net, m)


class Transition(NamedTuple):
    state: BitMatrix
    action: Pivot
    reward: int
    next_state: Optional[BitMatrix]  # None when terminal


class ReplayBuffer:
    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.items: Deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.items)

    def push(self, t: Transition) -> None:
        self.items.append(t)

    def sample(self, size: int, rng: np.random.Generator) -> List[Transition]:
        idx = rng.choice(len(self.items), size=size, replace=False)
        return [self.items[int(i)] for i in idx]


def targets(
    target: QNetwork, batch: Sequence[Transition], gamma: float
) -> np.ndarray:
    """r, plus gamma * max Q of the next state unless it is terminal"""
    y = np.array([t.reward for t in batch], dtype=np.float64)
    live = [k for k, t in enumerate(batch) if t.next_state is not None]
    if live:
        xs = []
        starts = []
        for k in live:
            nxt = batch[k].next_state
            assert nxt is not None
            starts.append(sum(len(x) for x in xs))
            xs.append(encode_all(target, nxt, list(nxt.nonzeros())))
        q = forward(target, np.concatenate(xs))
        y[live] += gamma * np.maximum.reduceat(q, starts)
    return y


def _learn(
    net: QNetwork,
    target: QNetwork,
    batch: Sequence[Transition],
    hp: HyperParams,
) -> None:
    x = np.array(
        [
            encode(t.state, t.action, net.frame, net.include_fillin)
            for t in batch
        ]
    )
    grads = backward(net, x, targets(target, batch, hp.gamma))
    sgd_step(net, grads, hp.learning_rate, hp.momentum)


def _skip_free(m: BitMatrix) -> BitMatrix:
    while not m.is_zero:
        free = free_pivots(m)
        if not free:
            break
        m = eliminate(m, free[0])
    return m


def play(
    net: QNetwork,
    m: BitMatrix,
    model: CostModel,
    epsilon: float,
    rng: np.random.Generator,
    auto_free_pivots: bool = False,
) -> Iterator[Transition]:
    """
    Transitions of one episode from m, acting epsilon-greedily on the
    current state of net. The rewards add up to minus the episode cost.
    """
    while True:
        if auto_free_pivots:
            m = _skip_free(m)
        if m.is_zero:
            return
        p = epsilon_greedy_action(net, m, epsilon, rng)
        nxt = eliminate(m, p)
        reward = -step_cost(m, p, model)
        yield Transition(m, p, reward, None if nxt.is_zero else nxt)
        m = nxt


class Learner:
    """Online network, its target copy and the replay buffer"""

    def __init__(self, net: QNetwork, hp: HyperParams) -> None:
        self.net = net
        self.target = net.copy()
        self.hp = hp
        self.buffer = ReplayBuffer(hp.replay_capacity)
        self.updates = 0

    def observe(self, t: Transition, rng: np.random.Generator) -> None:
        """Store t, then learn from a batch once there are enough"""
        self.buffer.push(t)
        if len(self.buffer) < self.hp.batch_size:
            return
        batch = self.buffer.sample(self.hp.batch_size, rng)
        _learn(self.net, self.target, batch, self.hp)
        self.updates += 1
        if self.updates % self.hp.target_sync_period == 0:
            self.target = self.net.copy()


class CurvePoint(NamedTuple):
    episode: int
    mean_cost: float
    epsilon: float


def train(
    hp: HyperParams, model: CostModel
) -> Tuple[QNetwork, List[CurvePoint]]:
    """
    One generator seeded from hp.seed drives, in this order: network
    initialisation, then per episode the sampled matrix, and per step
    the exploration draw and the replay batch.
    """
    hp = hp.validated()
    n = hp.n
    rng = np.random.default_rng(hp.seed)
    learner = Learner(QNetwork.create(n, hp.include_fillin_feature, rng), hp)
    curve: List[CurvePoint] = []
    window: List[int] = []
    for episode in range(hp.episodes):
        eps = hp.epsilon(episode)
        m = BitMatrix.from_rows(n, rng.integers(0, 1 << n, size=n).tolist())
        cost = 0
        for t in play(learner.net, m, model, eps, rng, hp.auto_free_pivots):
            cost -= t.reward
            learner.observe(t, rng)
        window.append(cost)
        if len(window) >= hp.curve_window:
            point = CurvePoint(episode + 1, sum(window) / len(window), eps)
            curve.append(point)
            log.info("Episode %d: mean cost %.4f, epsilon %.3f", *point)
            window = []
    if window:
        mean = sum(window) / len(window)
        eps = hp.epsilon(hp.episodes - 1)
        curve.append(CurvePoint(hp.episodes, mean, eps))
    return learner.net, curve


class GreedyAgent:
    def __init__(self, net: QNetwork) -> None:
        self.net = net

    def __call__(self, m: BitMatrix) -> Pivot:
        return greedy_action(self.net, m)


def agent_strategy(net: QNetwork) -> Strategy:
    return Strategy(Kind.AGENT, agent=GreedyAgent(net))


def improvement(agent_mean: float, markowitz_mean: float) -> float:
    if markowitz_mean == 0:
        return 0.0
    return 100 * (1 - agent_mean / markowitz_mean)


def evaluate_agent(
    net: QNetwork,
    n: int,
    model: CostModel,
    sample_size: int,
    seed: int,
    workers: int = 1,
) -> Tuple[float, float]:
    """
    Mean greedy episode cost and improvement in percent over Markowitz
    with uniform tie breaking, on the same sampled matrices.
    """
    if n > net.frame:
        raise WeightFileError(f"Network for frame {net.frame} used on {n}")
    matrices = sample_matrices(n, sample_size, seed)
    agent = episode_costs(agent_strategy(net), matrices, model, seed, workers)
    markowitz = episode_costs(
        Strategy(Kind.MARKOWITZ, TieBreak.UNIFORM),
        matrices,
        model,
        seed,
        workers,
    )
    agent_mean = sum(agent) / len(agent) if agent else 0.0
    mk_mean = sum(markowitz) / len(markowitz) if markowitz else 0.0
    return agent_mean, improvement(agent_mean, mk_mean)


def save_weights(net: QNetwork, path: str) -> None:
    dims = net.dims
    with open(path, "wb") as fl:
        fl.write(
            pack(
                HEADER,
                MAGIC,
                net.frame,
                int(net.include_fillin),
                len(net.weights),
            )
        )
        fl.write(pack(f"<{len(dims)}I", *dims))
        for a in net.weights + net.biases:
            fl.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_weights(path: str, frame: Optional[int] = None) -> QNetwork:
    """Load a network, rejecting it if `frame` is given and differs"""
    with open(path, "rb") as fl:
        data = fl.read()
    hsize = calcsize(HEADER)
    if len(data) < hsize:
        raise WeightFileError(f"{path}: truncated header")
    magic, fsize, flag, nlayers = unpack(HEADER, data[:hsize])
    if magic != MAGIC:
        raise WeightFileError(f"{path}: bad magic {magic!r}")
    if frame is not None and fsize != frame:
        raise WeightFileError(f"{path}: frame size {fsize}, need {frame}")
    dsize = calcsize(f"<{nlayers + 1}I")
    if len(data) < hsize + dsize:
        raise WeightFileError(f"{path}: truncated layer sizes")
    dims = list(unpack(f"<{nlayers + 1}I", data[hsize : hsize + dsize]))
    if dims[0] != feature_size(fsize, bool(flag)) or dims[-1] != 1:
        raise WeightFileError(
            f"{path}: layer sizes {dims} do not fit frame {fsize}"
        )
    shapes = list(zip(dims, dims[1:])) + [(d,) for d in dims[1:]]
    total = sum(int(np.prod(s)) for s in shapes)
    if len(data) != hsize + dsize + 8 * total:
        raise WeightFileError(
            f"{path}: {len(data)} bytes, expected {hsize + dsize + 8 * total}"
        )
    arrays = []
    offset = hsize + dsize
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(
            np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += 8 * count
    return QNetwork(fsize, bool(flag), arrays[:nlayers], arrays[nlayers:])
