"""NPLIC surrogate: a one-hidden-layer ReLU network mapping PLIC features to C.

Feature rows follow the input layouts

    2d-single    (alpha0, theta)
    3d-single    (alpha0, phi, theta)
    2d-combined  (alpha0, theta, m)
    3d-combined  (alpha0, phi, theta, m)

and are mapped affinely onto [-1, 1] before the first layer.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from nplic._validation import check_features, check_targets
from nplic.geometry import SIGN_CONVENTION, MeshType, normal_to_angles, unit_normal

log = logging.getLogger(__name__)

FORMAT_TAG = "nplic-model"
FORMAT_VERSION = "v1"
SUPPORTED_VERSIONS = (FORMAT_VERSION,)

LAYOUTS = {
    "2d-single": ("alpha0", "theta"),
    "3d-single": ("alpha0", "phi", "theta"),
    "2d-combined": ("alpha0", "theta", "m"),
    "3d-combined": ("alpha0", "phi", "theta", "m"),
}
# (offset, factor): scaled = (raw - offset) * factor
_SCALING = {
    "alpha0": (0.5, 2.0),
    "theta": (0.5 * math.pi, 2.0 / math.pi),
    "phi": (math.pi, 1.0 / math.pi),
    "m": (0.5, 2.0),
}


class ModelFormatError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


def layout_for(meshes):
    """Input layout covering one mesh type or a simplex/rectangle pair."""
    meshes = [MeshType.parse(m) for m in meshes]
    dims = {m.dim for m in meshes}
    if len(dims) != 1:
        raise ValueError("a network covers meshes of a single dimension")
    kind = "combined" if len(meshes) > 1 else "single"
    return f"{dims.pop()}d-{kind}"


@dataclass(frozen=True)
class NetworkConfig:
    layout: str
    hidden_units: int
    meshes: tuple
    sign_convention: str = SIGN_CONVENTION

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}; expected one of {sorted(LAYOUTS)}")
        if self.hidden_units < 0:
            raise ValueError("hidden_units must be non-negative")
        object.__setattr__(self, "meshes", tuple(MeshType.parse(m) for m in self.meshes))
        if layout_for(self.meshes) != self.layout:
            raise ValueError(f"layout {self.layout} does not match meshes {[m.value for m in self.meshes]}")

    @classmethod
    def for_meshes(cls, meshes, hidden_units=48):
        if isinstance(meshes, (str, MeshType)):
            meshes = [meshes]
        meshes = tuple(MeshType.parse(m) for m in meshes)
        return cls(layout_for(meshes), hidden_units, meshes)

    @property
    def features(self):
        return LAYOUTS[self.layout]

    @property
    def n_inputs(self):
        return len(self.features)

    @property
    def scaling(self):
        return np.array([_SCALING[f] for f in self.features])


@dataclass(eq=False)
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    config: NetworkConfig
    scaling: np.ndarray
    provenance: dict = field(default_factory=dict)

    def params(self):
        return [self.W1, self.b1, self.W2, np.array([self.b2])]

    def copy(self):
        return copy.deepcopy(self)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 8192
    max_epochs: int = 100_000
    val_tolerance: float = 5e-5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "max_epochs", "val_tolerance", "adam_eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TrainHistory:
    train_mse: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    stop_reason: str = ""
    best_epoch: int = -1

    def __len__(self):
        return len(self.train_mse)


def init_model(config, seed):
    """Fan-in uniform init: weights and biases of a layer ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Matches the default initialisation of a PyTorch ``nn.Linear`` layer.
    Random hidden biases spread the ReLU kinks over the input domain instead
    of pinning them all to the origin.
    """
    rng = np.random.default_rng(seed)
    d, n = config.n_inputs, config.hidden_units
    lim1 = 1.0 / math.sqrt(d)
    lim2 = 1.0 / math.sqrt(n) if n else 0.0
    W1 = rng.uniform(-lim1, lim1, size=(n, d))
    b1 = rng.uniform(-lim1, lim1, size=n)
    W2 = rng.uniform(-lim2, lim2, size=(1, n))
    b2 = float(rng.uniform(-lim2, lim2)) if n else 0.0
    return MlpModel(
        W1=W1,
        b1=b1,
        W2=W2,
        b2=b2,
        config=config,
        scaling=config.scaling.copy(),
        provenance={"seed": seed, "epochs_run": 0, "final_val_mse": float("nan")},
    )


def scale_inputs(model, X):
    return (X - model.scaling[:, 0]) * model.scaling[:, 1]


def forward(model, X):
    """Predicted C for each row of raw (unscaled) features."""
    X = check_features(X, model.config.n_inputs)
    h = np.maximum(scale_inputs(model, X) @ model.W1.T + model.b1, 0.0)
    return h @ model.W2[0] + model.b2


def loss_and_grads(params, Xs, y):
    """Mean squared error and its exact gradients for scaled inputs ``Xs``."""
    W1, b1, W2, b2 = params
    z = Xs @ W1.T
    z += b1
    active = z > 0.0
    h = np.maximum(z, 0.0, out=z)
    r = h @ W2[0]
    r += b2[0] - y
    loss = float(r @ r) / len(y)
    g_out = (2.0 / len(y)) * r
    g_W2 = (g_out @ h)[None, :]
    g_b2 = np.array([g_out.sum()])
    g_z = np.multiply(active, W2[0], out=h)
    g_z *= g_out[:, None]
    g_W1 = g_z.T @ Xs
    g_b1 = g_z.sum(axis=0)
    return loss, [g_W1, g_b1, g_W2, g_b2]


class Adam:
    """Bias-corrected Adam updating a list of arrays in place."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def dataset_features(ds, layout):
    cols = {"alpha0": ds.alpha0, "theta": ds.theta, "phi": ds.phi, "m": ds.m.astype(float)}
    return np.column_stack([cols[f] for f in LAYOUTS[layout]])


def _mse(model, X, y):
    r = forward(model, X) - y
    return float(r @ r) / len(y)


def fit_arrays(model, X, y, X_val, y_val, tc):
    """Adam on minibatch MSE; returns the best-validation weights and history."""
    X = check_features(X, model.config.n_inputs)
    y = check_targets(y, len(X))
    X_val = check_features(X_val, model.config.n_inputs)
    y_val = check_targets(y_val, len(X_val))
    if not len(X) or not len(X_val):
        raise ValueError("training and validation partitions must be nonempty")
    model = model.copy()
    Xs = scale_inputs(model, X)
    params = [model.W1, model.b1, model.W2, np.array([model.b2])]
    opt = Adam(params, tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps)
    hist = TrainHistory()
    best = (math.inf, None)
    n = len(y)
    for epoch in range(int(tc.max_epochs)):
        total = 0.0
        if n <= tc.batch_size:
            batches = [(Xs, y)]
        else:
            order = np.random.default_rng([tc.seed, epoch]).permutation(n)
            batches = (
                (Xs[idx], y[idx])
                for idx in (order[s:s + tc.batch_size] for s in range(0, n, tc.batch_size))
            )
        for xb, yb in batches:
            loss, grads = loss_and_grads(params, xb, yb)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            total += loss * len(yb)
            opt.step(params, grads)
        model.b2 = float(params[3][0])
        val = _mse(model, X_val, y_val)
        if not math.isfinite(val):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        hist.train_mse.append(total / n)
        hist.val_mse.append(val)
        if val < best[0]:
            best = (val, [p.copy() for p in params])
            hist.best_epoch = epoch
        if val < tc.val_tolerance:
            hist.stop_reason = "tolerance"
            break
    else:
        hist.stop_reason = "max_epochs"
    W1, b1, W2, b2 = best[1]
    out = MlpModel(W1, b1, W2, float(b2[0]), model.config, model.scaling.copy())
    out.provenance = {"seed": tc.seed, "epochs_run": len(hist), "final_val_mse": best[0]}
    return out, hist


def train(model, split, tc):
    """Train on ``split.train``, stopping on ``split.validation`` MSE."""
    layout = model.config.layout
    return fit_arrays(
        model,
        dataset_features(split.train, layout), split.train.c,
        dataset_features(split.validation, layout), split.validation.c,
        tc,
    )


def evaluate(model, test):
    """``(mse, mae)`` of the model's C against the dataset labels."""
    if not len(test):
        raise ValueError("test dataset is empty")
    r = forward(model, dataset_features(test, model.config.layout)) - test.c
    return float(np.mean(r * r)), float(np.mean(np.abs(r)))


def predict_scatter(model, test, n_points=100, seed=0):
    """``(C_predicted, C_true)`` pairs for a seeded random subsample."""
    if not len(test):
        raise ValueError("test dataset is empty")
    k = min(n_points, len(test)) if n_points else len(test)
    idx = np.sort(np.random.default_rng(seed).choice(len(test), size=k, replace=False))
    pred = forward(model, dataset_features(test, model.config.layout)[idx])
    return np.column_stack([pred, test.c[idx]])


def query_features(mesh_type, normals, alphas, layout):
    """Feature rows for raw (normal, alpha0) queries on canonical cells."""
    mt = MeshType.parse(mesh_type)
    normals = unit_normal(np.atleast_2d(normals), mt.dim)
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    cols = {"alpha0": alphas, "m": np.full(len(alphas), float(mt.is_simplex))}
    if mt.dim == 2:
        cols["theta"] = normal_to_angles(normals)
    else:
        cols["theta"], cols["phi"] = normal_to_angles(normals)
        # phi is arbitrary on the poles; pick one inside the sampled range
        cols["phi"] = np.where(cols["phi"] == 2.0 * np.pi, np.pi, cols["phi"])
    return np.column_stack([cols[f] for f in LAYOUTS[layout]])


class ModelBank:
    """Trained models keyed by the mesh types they cover."""

    def __init__(self, models=()):
        self._by_mesh = {}
        for model in models:
            self.add(model)

    def add(self, model):
        for mt in model.config.meshes:
            self._by_mesh[mt] = model
        return self

    def __contains__(self, mesh_type):
        return MeshType.parse(mesh_type) in self._by_mesh

    def __getitem__(self, mesh_type):
        mt = MeshType.parse(mesh_type)
        try:
            return self._by_mesh[mt]
        except KeyError:
            have = ", ".join(m.value for m in self._by_mesh) or "none"
            raise KeyError(f"no model for {mt.value} (bank covers: {have})") from None


def nplic_solve_batch(model, mesh_type, normals, alphas):
    """Surrogate C for many canonical-cell queries.

    Normals outside the sampled angle range (n_y < 0, and in 3D also the
    half-plane n_y = 0, n_x > 0) are answered through the complement
    ``C(n, a) = -C(-n, 1 - a)``. Fractions of exactly 0 or 1 return the
    bracket ends without evaluating the network.
    """
    mt = MeshType.parse(mesh_type)
    if mt not in model.config.meshes:
        raise KeyError(f"model covers {[m.value for m in model.config.meshes]}, not {mt.value}")
    normals = unit_normal(np.atleast_2d(normals), mt.dim)
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    if np.any((alphas < 0.0) | (alphas > 1.0)):
        raise ValueError("alpha0 values must lie in [0, 1]")
    flip = normals[:, 1] < 0.0
    if mt.dim == 3:
        flip |= (normals[:, 1] == 0.0) & (normals[:, 0] > 0.0)
    q_normals = np.where(flip[:, None], -normals, normals)
    q_alphas = np.where(flip, 1.0 - alphas, alphas)
    c = forward(model, query_features(mt, q_normals, q_alphas, model.config.layout))
    c = np.where(flip, -c, c)
    if mt is MeshType.SQUARE or mt is MeshType.CUBE:
        proj_lo = np.minimum(normals, 0.0).sum(axis=1)
        proj_hi = np.maximum(normals, 0.0).sum(axis=1)
    else:
        proj_lo = np.minimum(normals.min(axis=1), 0.0)
        proj_hi = np.maximum(normals.max(axis=1), 0.0)
    c = np.where(alphas == 0.0, -proj_lo, c)
    return np.where(alphas == 1.0, -proj_hi, c)


def nplic_solve(bank, mesh_type, n, alpha0):
    model = bank[mesh_type] if isinstance(bank, ModelBank) else bank
    return float(nplic_solve_batch(model, mesh_type, np.asarray(n, dtype=float)[None, :], [alpha0])[0])


def _fmt(values):
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def format_model(model):
    cfg = model.config
    prov = model.provenance
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        f"layout={cfg.layout} d={cfg.n_inputs} N={cfg.hidden_units} "
        f"meshes={'+'.join(m.value for m in cfg.meshes)} sign={cfg.sign_convention}",
        _fmt(model.scaling),
        f"seed={prov.get('seed', '')} epochs_run={prov.get('epochs_run', 0)} "
        f"final_val_mse={format(float(prov.get('final_val_mse', float('nan'))), '.17g')}",
    ]
    lines += [_fmt(row) for row in model.W1]
    lines += [_fmt(model.b1), _fmt(model.W2), _fmt([model.b2])]
    return "\n".join(lines) + "\n"


def save_model(model, path):
    Path(path).write_bytes(format_model(model).encode("utf-8"))


def _kv(line, lineno):
    out = {}
    for tok in line.split():
        k, sep, v = tok.partition("=")
        if not sep:
            raise ModelFormatError(f"line {lineno}: expected key=value, got {tok!r}")
        out[k] = v
    return out


def _floats(line, count, lineno):
    try:
        vals = [float(t) for t in line.split()]
    except ValueError as exc:
        raise ModelFormatError(f"line {lineno}: {exc}") from None
    if len(vals) != count:
        raise ModelFormatError(f"line {lineno}: expected {count} values, got {len(vals)}")
    return np.array(vals)


def parse_model(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith(FORMAT_TAG + " "):
        raise ModelFormatError(f"line 1: expected '{FORMAT_TAG} <version>' header")
    version = lines[0].split()[1]
    if version not in SUPPORTED_VERSIONS:
        raise ModelFormatError(f"unsupported model version {version!r}; supported: {', '.join(SUPPORTED_VERSIONS)}")
    if len(lines) < 4:
        raise ModelFormatError("truncated model file: missing header lines")
    cfg_kv = _kv(lines[1], 2)
    try:
        d, n = int(cfg_kv["d"]), int(cfg_kv["N"])
        config = NetworkConfig(cfg_kv["layout"], n, tuple(cfg_kv["meshes"].split("+")), cfg_kv["sign"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"line 2: bad config ({exc})") from None
    if config.n_inputs != d:
        raise ModelFormatError(f"line 2: d={d} does not match layout {config.layout}")
    if config.sign_convention != SIGN_CONVENTION:
        raise ModelFormatError(f"line 2: unsupported sign convention {config.sign_convention!r}")
    scaling = _floats(lines[2], 2 * d, 3).reshape(d, 2)
    prov_kv = _kv(lines[3], 4)
    try:
        provenance = {
            "seed": int(prov_kv["seed"]) if prov_kv.get("seed", "") != "" else None,
            "epochs_run": int(prov_kv["epochs_run"]),
            "final_val_mse": float(prov_kv["final_val_mse"]),
        }
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"line 4: bad provenance ({exc})") from None
    expected = 4 + n + 3
    if len(lines) != expected:
        raise ModelFormatError(f"truncated or oversized model file: {len(lines)} lines, expected {expected}")
    W1 = np.array([_floats(lines[4 + i], d, 5 + i) for i in range(n)]).reshape(n, d)
    b1 = _floats(lines[4 + n], n, 5 + n)
    W2 = _floats(lines[5 + n], n, 6 + n)[None, :]
    b2 = float(_floats(lines[6 + n], 1, 7 + n)[0])
    model = MlpModel(W1, b1, W2, b2, config, scaling, provenance)
    if not all(np.all(np.isfinite(p)) for p in model.params()):
        raise ModelFormatError("model parameters must be finite")
    return model


def load_model(path):
    return parse_model(Path(path).read_bytes().decode("utf-8"))


class NPLICRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around the NPLIC network.

    ``fit(X, y, eval_set=(X_val, y_val))`` trains on feature rows laid out
    for ``meshes``; without ``eval_set`` the training data doubles as the
    validation data.
    """

    def __init__(self, meshes="square", hidden_units=48, learning_rate=1e-4, batch_size=8192,
                 max_epochs=100_000, tol=5e-5, random_state=0):
        self.meshes = meshes
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.tol = tol
        self.random_state = random_state

    def _config(self):
        return NetworkConfig.for_meshes(self.meshes, self.hidden_units)

    def fit(self, X, y, eval_set=None):
        config = self._config()
        X = check_features(X, config.n_inputs)
        y = check_targets(y, len(X))
        X_val, y_val = eval_set if eval_set is not None else (X, y)
        tc = TrainConfig(self.learning_rate, self.batch_size, self.max_epochs, self.tol, self.random_state)
        self.model_, self.history_ = fit_arrays(init_model(config, self.random_state), X, y, X_val, y_val, tc)
        self.n_features_in_ = config.n_inputs
        return self

    @classmethod
    def from_model(cls, model):
        meshes = [m.value for m in model.config.meshes]
        est = cls(meshes=meshes[0] if len(meshes) == 1 else meshes, hidden_units=model.config.hidden_units)
        est.model_ = model
        est.history_ = None
        est.n_features_in_ = model.config.n_inputs
        return est

    def predict(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, X)

    def solve(self, mesh_type, normals, alphas):
        """C for raw (normal, alpha0) queries on the canonical cell."""
        check_is_fitted(self, "model_")
        return nplic_solve_batch(self.model_, mesh_type, normals, alphas)
