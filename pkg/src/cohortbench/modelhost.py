"""Uniform model abstraction: three native reference models plus a client
for external adapter processes speaking the newline-delimited-JSON wire
protocol.

Native models (no ML dependency, fully deterministic):

* ``native_majority`` — predicts the training positive rate as a constant
  probability (soft output keeps calibration metrics meaningful);
* ``native_logreg``   — L2-regularized logistic regression trained by
  full-batch gradient descent: weights initialized to zero, fixed epoch
  count, fixed learning rate, bias unregularized;
* ``native_knn``      — k nearest neighbours (Euclidean, default k=5),
  distance ties broken by the lower training-row index, probability =
  positive neighbours / k.

Wire protocol (bit-exact, one JSON object per line over the child's
stdin/stdout)::

    -> {"cmd": "handshake", "version": 1}          <- {"ok": true}
    -> {"cmd": "fit", "seed": S, "X": [[...]], "y": [...]}
                                                   <- {"ok": true}
    -> {"cmd": "predict_proba", "X": [[...]]}      <- {"ok": true, "proba": [...]}
    -> {"cmd": "importance_supported?"}            <- {"ok": true, "supported": false}
    -> {"cmd": "shutdown"}                         <- {"ok": true}

Any failure reply is {"ok": false, "error": "text"}. One reply line per
request line; anything else is a protocol violation. The child's stderr is
captured to a log file.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field

import numpy as np

from .metrics import ProbPrediction

log = logging.getLogger(__name__)

NATIVE_KINDS = ("native_majority", "native_logreg", "native_knn")
KINDS = NATIVE_KINDS + ("external",)

PROTOCOL_VERSION = 1
DEFAULT_FIT_TIMEOUT = 60.0
DEFAULT_PREDICT_TIMEOUT = 30.0

_NATIVE_PARAMS = {
    "native_majority": frozenset(),
    "native_logreg": frozenset({"learning_rate", "epochs", "l2"}),
    "native_knn": frozenset({"k_neighbors"}),
}


class ModelError(RuntimeError):
    """Fit or predict failed for model-inherent reasons."""


class ProtocolError(ModelError):
    """An external adapter violated the wire protocol."""


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    kind: str
    params: dict = field(default_factory=dict)
    command: str | None = None
    fit_timeout: float = DEFAULT_FIT_TIMEOUT
    predict_timeout: float = DEFAULT_PREDICT_TIMEOUT

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be nonempty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "external":
            if not self.command:
                raise ValueError("external models need a spawn command")
        else:
            unknown = set(self.params) - _NATIVE_PARAMS[self.kind]
            if unknown:
                raise ValueError(f"{self.kind} got unknown params {sorted(unknown)}")


# --------------------------------------------------------------------------
# native models
# --------------------------------------------------------------------------


class _Majority:
    def __init__(self, y: np.ndarray):
        self.prior = float(np.mean(y))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.prior)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss + (l2/2)·||w||², with its analytic gradient.

    The bias is not regularized. Exposed at module level so the gradient
    can be checked against finite differences.
    """
    z = X @ w + b
    # mean(log(1 + e^z) - y z), computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    p = _sigmoid(z)
    residual = p - y
    grad_w = X.T @ residual / X.shape[0] + l2 * w
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


class _LogReg:
    def __init__(self, X: np.ndarray, y: np.ndarray, params: dict):
        lr = float(params.get("learning_rate", 0.5))
        epochs = int(params.get("epochs", 400))
        l2 = float(params.get("l2", 1e-3))
        if lr <= 0 or epochs < 1 or l2 < 0:
            raise ValueError("learning_rate > 0, epochs >= 1, l2 >= 0 required")
        w = np.zeros(X.shape[1])
        b = 0.0
        yf = y.astype(float)
        for _ in range(epochs):
            loss, grad_w, grad_b = logreg_loss_and_grad(w, b, X, yf, l2)
            if not np.isfinite(loss):
                raise ModelError("logistic regression diverged (non-finite loss)")
            w -= lr * grad_w
            b -= lr * grad_b
        self.w, self.b = w, b

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ self.w + self.b)


class _Knn:
    def __init__(self, X: np.ndarray, y: np.ndarray, params: dict):
        self.k = int(params.get("k_neighbors", 5))
        if self.k < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.k > X.shape[0]:
            raise ModelError(f"k_neighbors={self.k} exceeds training size {X.shape[0]}")
        self.X = X.copy()
        self.y = y.astype(float).copy()

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        # squared Euclidean keeps the same ordering and exact ties
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            + np.sum(self.X * self.X, axis=1)[None, :]
            - 2.0 * (X @ self.X.T)
        )
        n_train = self.X.shape[0]
        train_idx = np.arange(n_train)
        probs = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            order = np.lexsort((train_idx, d2[i]))  # distance, then index
            probs[i] = float(np.mean(self.y[order[: self.k]]))
        return probs


# --------------------------------------------------------------------------
# external adapter client
# --------------------------------------------------------------------------


class AdapterClient:
    """One child process speaking the wire protocol, one request in flight."""

    def __init__(self, spec: ModelSpec, stderr_path: str | None = None):
        self.spec = spec
        if stderr_path is None:
            fd, stderr_path = tempfile.mkstemp(prefix=f"adapter_{spec.model_id}_", suffix=".log")
            os.close(fd)
        self.stderr_path = stderr_path
        self._stderr_fh = open(stderr_path, "ab")
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                shlex.split(spec.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr_fh,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            self._stderr_fh.close()
            raise ModelError(f"{spec.model_id}: failed to spawn adapter: {exc}") from exc
        self._replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._request({"cmd": "handshake", "version": PROTOCOL_VERSION}, timeout=spec.fit_timeout)

    def _read_loop(self):
        for line in self._proc.stdout:
            self._replies.put(line)
        self._replies.put(None)  # EOF marker

    def _request(self, message: dict, timeout: float) -> dict:
        with self._lock:
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise ProtocolError(
                    f"{self.spec.model_id}: adapter pipe closed (stderr: {self.stderr_path})"
                ) from exc
            try:
                line = self._replies.get(timeout=timeout)
            except queue.Empty:
                raise ProtocolError(
                    f"{self.spec.model_id}: no reply to {message['cmd']!r} "
                    f"within {timeout:.0f}s (stderr: {self.stderr_path})"
                ) from None
        if line is None:
            raise ProtocolError(
                f"{self.spec.model_id}: adapter closed its output during "
                f"{message['cmd']!r} (stderr: {self.stderr_path})"
            )
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(
                f"{self.spec.model_id}: malformed reply line {line!r:.120}"
            ) from exc
        if not isinstance(reply, dict) or "ok" not in reply:
            raise ProtocolError(f"{self.spec.model_id}: reply missing 'ok' field")
        if not reply["ok"]:
            raise ModelError(
                f"{self.spec.model_id}: adapter error: {reply.get('error', '(no message)')}"
            )
        return reply

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int):
        self._request(
            {"cmd": "fit", "seed": int(seed), "X": X.tolist(), "y": [int(v) for v in y]},
            timeout=self.spec.fit_timeout,
        )

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        reply = self._request(
            {"cmd": "predict_proba", "X": X.tolist()}, timeout=self.spec.predict_timeout
        )
        proba = reply.get("proba")
        if not isinstance(proba, list) or len(proba) != X.shape[0]:
            got = len(proba) if isinstance(proba, list) else type(proba).__name__
            raise ProtocolError(
                f"{self.spec.model_id}: predict reply length mismatch "
                f"(expected {X.shape[0]}, got {got})"
            )
        out = np.empty(len(proba))
        for i, p in enumerate(proba):
            if not isinstance(p, (int, float)) or not np.isfinite(p) or not 0.0 <= p <= 1.0:
                raise ProtocolError(
                    f"{self.spec.model_id}: sample {i}: probability {p!r} out of range"
                )
            out[i] = float(p)
        return out

    def supports_importance(self) -> bool:
        try:
            reply = self._request({"cmd": "importance_supported?"}, timeout=self.spec.predict_timeout)
        except ModelError:
            return False
        return bool(reply.get("supported", False))

    def shutdown(self):
        if self._proc.poll() is None:
            try:
                self._request({"cmd": "shutdown"}, timeout=5.0)
            except ModelError:
                pass  # best effort; we are tearing down regardless
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                log.warning("%s: adapter ignored shutdown; killing", self.spec.model_id)
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
        self._stderr_fh.close()


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


class ModelHandle:
    """A fitted model bound to one training set at a time."""

    def __init__(self, spec: ModelSpec, impl, n_features: int):
        self.spec = spec
        self._impl = impl
        self._n_features = n_features

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self._n_features:
            raise ValueError(
                f"expected an n x {self._n_features} matrix, got shape {X.shape}"
            )
        probs = self._impl.predict_proba(X)
        if probs.shape != (X.shape[0],) or not np.all(np.isfinite(probs)):
            raise ModelError(f"{self.spec.model_id}: bad probability vector from model")
        return probs

    def refit(self, X, y, seed: int) -> "ModelHandle":
        """Rebind this handle to a new training set (externals reuse the
        same child process; a refit replaces the adapter's model)."""
        X, y = _check_training_data(X, y)
        self._n_features = X.shape[1]
        if isinstance(self._impl, AdapterClient):
            self._impl.fit(X, y, seed)
        else:
            self._impl = _fit_native(self.spec, X, y)
        return self


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X_train must be a nonempty matrix")
    if y.shape != (X.shape[0],):
        raise ValueError("y_train length must match X_train rows")
    if len(set(y.tolist())) < 2:
        raise ModelError("training data must contain both classes")
    return X, y


def _fit_native(spec: ModelSpec, X: np.ndarray, y: np.ndarray):
    if spec.kind == "native_majority":
        return _Majority(y)
    if spec.kind == "native_logreg":
        return _LogReg(X, y, spec.params)
    return _Knn(X, y, spec.params)


def fit(spec: ModelSpec, X_train, y_train, seed: int, stderr_path: str | None = None) -> ModelHandle:
    """Train a model (spawning and handshaking an adapter if external)."""
    X, y = _check_training_data(X_train, y_train)
    if spec.kind == "external":
        client = AdapterClient(spec, stderr_path=stderr_path)
        try:
            client.fit(X, y, seed)
        except ModelError:
            client.shutdown()
            raise
        return ModelHandle(spec, client, X.shape[1])
    return ModelHandle(spec, _fit_native(spec, X, y), X.shape[1])


def predict_proba(h: ModelHandle, X) -> ProbPrediction:
    """Positive-class probabilities for a matrix, as a ProbPrediction."""
    return ProbPrediction(h.predict_proba(X))


def shutdown(h: ModelHandle) -> None:
    """Terminate an external session; no-op for native models."""
    if isinstance(h._impl, AdapterClient):
        h._impl.shutdown()
