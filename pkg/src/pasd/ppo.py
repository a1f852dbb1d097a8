"""Clipped-surrogate policy optimization primitives.

Analytic logits-level gradients for categorical and Bernoulli policies
(probability ratio clipping), squared-error value regression, generalized
advantage estimation, and the linear schedules used during training. The
hierarchical trainer and the flat self-play trainer are both assembled from
these pieces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import Gradients, ParamSet, backward_from_preactivation, forward

_TINY = 1e-300


def linear_schedule(start: float, end: float, t: float, total: float) -> float:
    """Linear interpolation from start at t=0 to end at t=total, clamped."""
    if total <= 0:
        return end
    frac = min(max(t / total, 0.0), 1.0)
    # convex form hits both endpoints exactly in floating point
    return (1.0 - frac) * start + frac * end


def mixing_schedule(t: float, total: float, start: float = 1.0, end: float = 0.05) -> float:
    return linear_schedule(start, end, t, total)


def entropy_schedule(t: float, total: float, start: float = 0.01, end: float = 0.0) -> float:
    return linear_schedule(start, end, t, total)


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    bootstrap_value: float,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> np.ndarray:
    """Generalized advantage estimates via the reverse recursion
    A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    T = rewards.shape[0]
    next_values = np.append(values[1:], bootstrap_value)
    deltas = rewards + gamma * next_values * (1.0 - dones) - values
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        running = deltas[t] + gamma * lam * (1.0 - dones[t]) * running
        adv[t] = running
    return adv


def normalize_advantages(adv: np.ndarray, center: bool = True) -> np.ndarray:
    adv = np.asarray(adv, dtype=float)
    if adv.size == 0:
        return adv
    if center:
        adv = adv - adv.mean()
    return adv / (adv.std() + 1e-8)


@dataclass
class PolicyStats:
    loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float


def categorical_policy_terms(
    params: ParamSet,
    inputs: np.ndarray,
    actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
    entropy_coef: float = 0.0,
) -> tuple[Gradients, PolicyStats]:
    """Gradients of the clipped surrogate (plus entropy bonus) for a softmax
    policy head, computed directly at the logits:
    d logp(a)/dz = onehot(a) - p and the ratio term contributes only where
    the unclipped branch attains the min."""
    probs, cache = forward(params, inputs)
    m = inputs.shape[0]
    rows = np.arange(m)
    p_a = np.maximum(probs[rows, actions], _TINY)
    logp_new = np.log(p_a)
    ratio = np.exp(logp_new - logp_old)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    loss = -float(np.minimum(surr1, surr2).mean())
    active = surr1 <= surr2

    g_logp = np.where(active, -advantages * ratio, 0.0) / m
    logits_grad = g_logp[:, None] * (-probs)
    logits_grad[rows, actions] += g_logp

    logp_full = np.log(np.maximum(probs, _TINY))
    per_sample_entropy = -(probs * logp_full).sum(axis=1)
    entropy = float(per_sample_entropy.mean())
    if entropy_coef != 0.0:
        # loss includes -coef * mean entropy; dH/dz_j = -p_j*(log p_j + H)
        d_entropy = -probs * (logp_full + per_sample_entropy[:, None])
        logits_grad -= (entropy_coef / m) * d_entropy

    grads, _ = backward_from_preactivation(params, cache, logits_grad)
    stats = PolicyStats(
        loss=loss,
        entropy=entropy,
        clip_fraction=float((np.abs(ratio - 1.0) > clip_eps).mean()),
        approx_kl=float((logp_old - logp_new).mean()),
    )
    return grads, stats


def bernoulli_policy_terms(
    params: ParamSet,
    inputs: np.ndarray,
    outcomes: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
    entropy_coef: float = 0.0,
) -> tuple[Gradients, PolicyStats]:
    """Clipped surrogate for a sigmoid (Bernoulli) head; the chosen outcome's
    log-probability has logit gradient (b - sigma). The entropy bonus keeps
    the head from saturating while advantages are noisy."""
    sigma, cache = forward(params, inputs)
    sigma = sigma[:, 0]
    m = inputs.shape[0]
    b = np.asarray(outcomes, dtype=float)
    p_b = np.clip(np.where(b > 0.5, sigma, 1.0 - sigma), _TINY, 1.0)
    logp_new = np.log(p_b)
    ratio = np.exp(logp_new - logp_old)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    loss = -float(np.minimum(surr1, surr2).mean())
    active = surr1 <= surr2

    g_logp = np.where(active, -advantages * ratio, 0.0) / m
    logits_grad = (g_logp * (b - sigma))[:, None]

    p_clip = np.clip(sigma, 1e-12, 1 - 1e-12)
    entropy = float(
        (-(p_clip * np.log(p_clip) + (1 - p_clip) * np.log(1 - p_clip))).mean()
    )
    if entropy_coef:
        # dH/dlogit = p(1-p) log((1-p)/p); the loss subtracts coef * H
        dh = p_clip * (1.0 - p_clip) * (np.log1p(-p_clip) - np.log(p_clip))
        logits_grad = logits_grad - (entropy_coef / m) * dh[:, None]

    grads, _ = backward_from_preactivation(params, cache, logits_grad)
    stats = PolicyStats(
        loss=loss,
        entropy=entropy,
        clip_fraction=float((np.abs(ratio - 1.0) > clip_eps).mean()),
        approx_kl=float((logp_old - logp_new).mean()),
    )
    return grads, stats


def value_terms(
    params: ParamSet,
    inputs: np.ndarray,
    targets: np.ndarray,
    coef: float = 0.5,
) -> tuple[Gradients, float]:
    """Gradients of coef * 0.5 * mean squared value error."""
    v, cache = forward(params, inputs)
    v = v[:, 0]
    m = inputs.shape[0]
    err = v - np.asarray(targets, dtype=float)
    loss = float(coef * 0.5 * np.mean(err**2))
    grads, _ = backward_from_preactivation(params, cache, (coef * err / m)[:, None])
    return grads, loss


def minibatch_slices(n: int, n_minibatches: int, rng: np.random.Generator):
    """Shuffle indices and split into ``n_minibatches`` nearly equal groups
    (empty groups possible when n < n_minibatches)."""
    perm = rng.permutation(n)
    return [np.asarray(part, dtype=int) for part in np.array_split(perm, n_minibatches)]
