"""Minimal dense-network substrate in float64 numpy.

Forward evaluation, exact reverse-mode gradients and an Adam optimizer for
small MLPs. Every policy/value/embedding head in the package is built from
these primitives; there is deliberately no general autodiff graph, just
fixed-topology MLPs with a configurable output transform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NONLINEARITIES = ("tanh", "relu")
OUTPUT_TRANSFORMS = ("identity", "softmax", "sigmoid", "l2_normalize")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetworkSpec:
    """Shape of a dense network: ``sizes[0]`` inputs, one affine layer per
    subsequent entry, ``hidden`` nonlinearity between layers and an output
    transform on the last layer."""

    sizes: tuple[int, ...]
    hidden: str = "tanh"
    output: str = "identity"

    def __post_init__(self):
        if len(self.sizes) < 2:
            raise ValueError("spec needs an input size and at least one layer")
        if any(s <= 0 for s in self.sizes):
            raise ValueError(f"layer sizes must be positive: {self.sizes}")
        if self.hidden not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.hidden!r}")
        if self.output not in OUTPUT_TRANSFORMS:
            raise ValueError(f"unknown output transform {self.output!r}")

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]


@dataclass
class ParamSet:
    """Weights/biases of one network plus its Adam accumulators."""

    spec: NetworkSpec
    weights: list[np.ndarray]  # each (out, in)
    biases: list[np.ndarray]  # each (out,)
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def copy(self) -> "ParamSet":
        return ParamSet(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            m_w=[a.copy() for a in self.m_w],
            v_w=[a.copy() for a in self.v_w],
            m_b=[a.copy() for a in self.m_b],
            v_b=[a.copy() for a in self.v_b],
            step=self.step,
        )

    def allclose(self, other: "ParamSet", atol: float = 0.0) -> bool:
        return all(
            np.allclose(a, b, rtol=0.0, atol=atol)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )


@dataclass
class Gradients:
    """Parameter gradients mirroring a ParamSet's weights/biases lists."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            weights=[w * factor for w in self.weights],
            biases=[b * factor for b in self.biases],
        )

    def add_(self, other: "Gradients") -> "Gradients":
        for a, b in zip(self.weights, other.weights):
            a += b
        for a, b in zip(self.biases, other.biases):
            a += b
        return self

    def arrays(self) -> list[np.ndarray]:
        return self.weights + self.biases

    @staticmethod
    def zeros_like(params: ParamSet) -> "Gradients":
        return Gradients(
            weights=[np.zeros_like(w) for w in params.weights],
            biases=[np.zeros_like(b) for b in params.biases],
        )


def init_params(spec: NetworkSpec, seed: int) -> ParamSet:
    """Scaled-uniform fan-in init: W ~ U(+-1/sqrt(fan_in)), biases zero."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.sizes[:-1], spec.sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    params = ParamSet(spec=spec, weights=weights, biases=biases)
    params.m_w = [np.zeros_like(w) for w in weights]
    params.v_w = [np.zeros_like(w) for w in weights]
    params.m_b = [np.zeros_like(b) for b in biases]
    params.v_b = [np.zeros_like(b) for b in biases]
    return params


def zero_last_layer(params: ParamSet) -> ParamSet:
    """Zero the final affine layer so the initial output is constant."""
    params.weights[-1][:] = 0.0
    params.biases[-1][:] = 0.0
    return params


def _apply_output(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "softmax":
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    if kind == "sigmoid":
        return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))
    if kind == "l2_normalize":
        norm = np.linalg.norm(z, axis=-1, keepdims=True)
        return z / np.maximum(norm, 1e-30)
    raise ValueError(kind)


def forward(params: ParamSet, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Evaluate the network on a single vector or a batch of rows.

    Returns the transformed output and an activation cache consumed by
    :func:`backward`. Softmax outputs sum to 1, l2_normalize outputs have
    unit Euclidean norm.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite input to forward")
    if a.shape[-1] != params.spec.in_dim:
        raise ValueError(f"input width {a.shape[-1]} != spec {params.spec.in_dim}")

    activations = [a]  # input to each affine layer
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        if i < n_layers - 1:
            a = np.tanh(z) if params.spec.hidden == "tanh" else np.maximum(z, 0.0)
        else:
            a = z
        activations.append(a)

    out = _apply_output(a, params.spec.output)
    cache = {"activations": activations, "pre_transform": a, "output": out, "single": single}
    return (out[0] if single else out), cache


def backward(
    params: ParamSet, cache: dict, output_gradient: np.ndarray
) -> tuple[Gradients, np.ndarray]:
    """Exact reverse-mode gradients for the computation recorded in *cache*.

    ``output_gradient`` is dLoss/dOutput (same shape as the forward output);
    returns parameter gradients summed over the batch and the gradient with
    respect to the input.
    """
    g = np.asarray(output_gradient, dtype=np.float64)
    single = cache["single"]
    if single:
        g = g[None, :]
    out = cache["output"]
    if g.shape != out.shape:
        raise ValueError(f"output_gradient shape {g.shape} != output {out.shape}")

    kind = params.spec.output
    if kind == "identity":
        gz = g
    elif kind == "softmax":
        gz = out * (g - (out * g).sum(axis=-1, keepdims=True))
    elif kind == "sigmoid":
        gz = g * out * (1.0 - out)
    else:  # l2_normalize
        z = cache["pre_transform"]
        norm = np.maximum(np.linalg.norm(z, axis=-1, keepdims=True), 1e-30)
        gz = (g - out * (out * g).sum(axis=-1, keepdims=True)) / norm

    return backward_from_preactivation(params, cache, gz, single_handled=True)


def backward_from_preactivation(
    params: ParamSet, cache: dict, preact_gradient: np.ndarray, single_handled: bool = False
) -> tuple[Gradients, np.ndarray]:
    """Backpropagate from dLoss/d(final pre-transform values).

    Loss code that differentiates through softmax/sigmoid analytically
    (log-prob and entropy terms) enters here, skipping the output-transform
    jacobian for numerical robustness.
    """
    gz = np.asarray(preact_gradient, dtype=np.float64)
    single = cache["single"]
    if single and not single_handled:
        gz = gz[None, :]
    elif single and single_handled and gz.ndim == 1:
        gz = gz[None, :]

    activations = cache["activations"]
    grads_w: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * len(params.biases)  # type: ignore[list-item]

    for i in range(len(params.weights) - 1, -1, -1):
        a_in = activations[i]
        grads_w[i] = gz.T @ a_in
        grads_b[i] = gz.sum(axis=0)
        ga = gz @ params.weights[i]
        if i > 0:
            hidden_out = activations[i]
            if params.spec.hidden == "tanh":
                gz = ga * (1.0 - hidden_out**2)
            else:
                gz = ga * (hidden_out > 0.0)
        else:
            gz = ga

    input_grad = gz[0] if single else gz
    return Gradients(weights=grads_w, biases=grads_b), input_grad


def global_norm(grad_sets: list[Gradients]) -> float:
    total = 0.0
    for g in grad_sets:
        for arr in g.arrays():
            total += float(np.sum(arr**2))
    return float(np.sqrt(total))


def clip_by_global_norm(grad_sets: list[Gradients], max_norm: float) -> float:
    """Scale all gradients in place so the joint norm is at most max_norm."""
    norm = global_norm(grad_sets)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for g in grad_sets:
            for arr in g.arrays():
                arr *= factor
    return norm


def adam_step(params: ParamSet, gradients: Gradients, learning_rate: float) -> ParamSet:
    """One Adam update with bias correction; mutates and returns *params*."""
    for arr in gradients.arrays():
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite gradients in adam_step")
    params.step += 1
    t = params.step
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for p, g, m, v in (
        *zip(params.weights, gradients.weights, params.m_w, params.v_w),
        *zip(params.biases, gradients.biases, params.m_b, params.v_b),
    ):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g**2
        p -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return params
