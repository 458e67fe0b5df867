"""Registry of differentiable primitives and a finite-difference referee.

Each :class:`Primitive` bundles a forward function, its hand-derived
pullback, and a sampler of random valid inputs.  :func:`gradcheck_all`
compares the pullback against central differences of a random scalar
probe ``<g, f(x)>``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import ball
from . import uncertainty as unc
from ._kernels import pairwise_distance, pairwise_distance_backward
from .config import TrainConfig
from .errors import StepTooSmall, UnknownPrimitive
from .head import HeadParams, head_backward, head_forward
from .losses import contrastive_loss, loss_step, triplet_loss

CURVATURES = (0.05, 0.1, 0.3)
DEFAULT_STEP = 1e-5
DEFAULT_THRESHOLD = 1e-4
# coordinates where both gradients are smaller than this are not compared
GRAD_FLOOR = 1e-8


@dataclass(frozen=True)
class Primitive:
    name: str
    forward: Callable  # forward(inputs, params) -> array or float
    vjp: Callable  # vjp(inputs, params, cotangent) -> tuple of arrays, one per input
    sample: Callable  # sample(rng, c) -> (inputs, params)


@dataclass(frozen=True)
class GradCheckReport:
    primitive: str
    max_rel_error: tuple  # one entry per differentiable input
    threshold: float
    cases: int

    @property
    def worst(self) -> float:
        return max(self.max_rel_error) if self.max_rel_error else 0.0

    @property
    def passed(self) -> bool:
        return self.worst <= self.threshold


# -- samplers ------------------------------------------------------------------


def _points(rng, c, n, dim, lo=0.05, hi=0.9):
    """Random points with ``sqrt(c)||x||`` uniform in ``[lo, hi]`` times the clipped radius."""
    dirs = rng.standard_normal((n, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    frac = rng.uniform(lo, hi, size=(n, 1))
    return dirs * frac * ball.max_norm(c)


def _points_at_origin_distance(rng, c, n, dim, lo, hi):
    dirs = rng.standard_normal((n, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    target = rng.uniform(lo, hi, size=(n, 1))
    s = np.sqrt(c)
    return dirs * np.tanh(s * target / 2.0) / s


def _loss_embeddings(rng, c, B, dim):
    """Mix of moderate-uncertainty and floored-uncertainty points, away from kinks."""
    k = B // 2
    inner = _points_at_origin_distance(rng, c, k, dim, 0.1, 0.85)
    outer = _points_at_origin_distance(rng, c, B - k, dim, 1.3, 4.0)
    emb = np.concatenate([inner, outer])
    return emb[rng.permutation(B)]


def _labels(P, K):
    return np.repeat(np.arange(P), K)


def _triplet_sample_ok(emb, labels, c, mode, margin, mining):
    d = pairwise_distance(emb, emb, c)
    same = labels[:, None] == labels[None, :]
    pos = same & ~np.eye(len(labels), dtype=bool)
    alphas = unc.adaptive_margin(emb, c) if mode == "adaptive" else np.full(len(labels), margin)
    for a in range(len(labels)):
        dp = np.sort(d[a, pos[a]])
        dn = np.sort(d[a, ~same[a]])
        if mining == "batch-hard":
            if (dp.size > 1 and dp[-1] - dp[-2] < 1e-3) or (dn.size > 1 and dn[1] - dn[0] < 1e-3):
                return False
            m = np.array([dp[-1] - dn[0] + alphas[a]])
        else:
            m = dp[:, None] - dn[None, :] + alphas[a]
        if np.any(np.abs(m) < 1e-3):
            return False
    return True


def _triplet_sampler(mode, mining):
    def sample(rng, c):
        labels = _labels(3, 2)
        while True:
            emb = _loss_embeddings(rng, c, 6, 4)
            if _triplet_sample_ok(emb, labels, c, mode, 0.3, mining):
                return (emb,), {"labels": labels, "c": c}

    return sample


def _head_sampler(loss):
    def sample(rng, c):
        labels = _labels(3, 2)
        cap = ball.max_norm(c)
        while True:
            feats = rng.standard_normal((6, 5))
            W = rng.standard_normal((4, 5)) * 0.4 * cap / np.sqrt(5)
            b = rng.standard_normal(4) * 0.1 * cap
            z_norm = np.linalg.norm(feats @ W.T + b, axis=1) / cap
            if np.any(np.abs(z_norm - 1.0) < 0.02):
                continue
            cfg = TrainConfig(loss=loss, mode="adaptive", curvature=c, scale=0.3)
            params = {"features": feats, "labels": labels, "c": c, "config": cfg}
            if loss == "triplet":
                emb = head_forward(feats, HeadParams(W, b, c))
                if not _triplet_sample_ok(emb, labels, c, "adaptive", 0.3, "batch-hard"):
                    continue
            return (W, b), params

    return sample


# -- registry ------------------------------------------------------------------


def _contrastive(mode):
    def fwd(inputs, p):
        return contrastive_loss(inputs[0], p["labels"], p["c"], mode=mode, scale=p["scale"], tau=p["tau"]).loss

    def vjp(inputs, p, g):
        out = contrastive_loss(inputs[0], p["labels"], p["c"], mode=mode, scale=p["scale"], tau=p["tau"])
        return (np.asarray(g) * out.grad,)

    def sample(rng, c):
        emb = _loss_embeddings(rng, c, 6, 4)
        return (emb,), {"labels": _labels(3, 2), "c": c, "scale": rng.uniform(0.1, 0.5), "tau": 0.2}

    return fwd, vjp, sample


def _triplet(mode, mining):
    def fwd(inputs, p):
        return triplet_loss(inputs[0], p["labels"], p["c"], mode=mode, margin=0.3, mining=mining).loss

    def vjp(inputs, p, g):
        out = triplet_loss(inputs[0], p["labels"], p["c"], mode=mode, margin=0.3, mining=mining)
        return (np.asarray(g) * out.grad,)

    return fwd, vjp, _triplet_sampler(mode, mining)


def _head_chain(loss):
    def fwd(inputs, p):
        W, b = inputs
        return loss_step(p["features"], p["labels"], HeadParams(W, b, p["c"]), p["config"]).loss.loss

    def vjp(inputs, p, g):
        W, b = inputs
        out = loss_step(p["features"], p["labels"], HeadParams(W, b, p["c"]), p["config"])
        return (np.asarray(g) * out.grad_W, np.asarray(g) * out.grad_b)

    return fwd, vjp, _head_sampler(loss)


def _build_registry() -> dict:
    reg = {}

    def add(name, fwd, vjp, sample):
        reg[name] = Primitive(name, fwd, vjp, sample)

    add(
        "mobius_add",
        lambda x, p: ball.mobius_add(x[0], x[1], p["c"]),
        lambda x, p, g: ball.mobius_add_vjp(x[0], x[1], p["c"], g),
        lambda rng, c: ((_points(rng, c, 3, 4), _points(rng, c, 3, 4)), {"c": c}),
    )
    add(
        "hyp_distance",
        lambda x, p: ball.hyp_distance(x[0], x[1], p["c"]),
        lambda x, p, g: ball.hyp_distance_vjp(x[0], x[1], p["c"], g),
        lambda rng, c: ((_points(rng, c, 3, 4), _points(rng, c, 3, 4)), {"c": c}),
    )
    add(
        "pairwise_distance",
        lambda x, p: pairwise_distance(x[0], x[1], p["c"]),
        lambda x, p, g: pairwise_distance_backward(x[0], x[1], p["c"], g),
        lambda rng, c: ((_points(rng, c, 3, 4), _points(rng, c, 4, 4)), {"c": c}),
    )
    add(
        "exp_map_0",
        lambda x, p: ball.exp_map_0(x[0], p["c"]),
        lambda x, p, g: (ball.exp_map_0_vjp(x[0], p["c"], g),),
        lambda rng, c: ((rng.standard_normal((4, 4)) * rng.uniform(0.0, 0.75, (4, 1)),), {"c": c}),
    )
    add(
        "log_map_0",
        lambda x, p: ball.log_map_0(x[0], p["c"]),
        lambda x, p, g: (ball.log_map_0_vjp(x[0], p["c"], g),),
        lambda rng, c: ((_points(rng, c, 4, 4),), {"c": c}),
    )

    def _proj_sample(rng, c):
        dirs = rng.standard_normal((4, 4))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        frac = np.where(rng.random((4, 1)) < 0.5, rng.uniform(0.2, 0.8, (4, 1)), rng.uniform(1.2, 3.0, (4, 1)))
        return (dirs * frac * ball.max_norm(c),), {"c": c}

    add(
        "project_to_ball",
        lambda x, p: ball.project_to_ball(x[0], p["c"]),
        lambda x, p, g: (ball.project_to_ball_vjp(x[0], p["c"], g),),
        _proj_sample,
    )
    add(
        "linear",
        lambda x, p: x[1] @ x[0].T + x[2],
        lambda x, p, g: (g.T @ x[1], g @ x[0], g.sum(axis=0)),
        lambda rng, c: (
            (rng.standard_normal((3, 5)), rng.standard_normal((4, 5)), rng.standard_normal(3)),
            {"c": c},
        ),
    )
    add(
        "uncertainty",
        lambda x, p: unc.clamped_uncertainty(x[0], p["c"]),
        lambda x, p, g: (unc.clamped_uncertainty_vjp(x[0], p["c"], g),),
        lambda rng, c: ((_loss_embeddings(rng, c, 6, 4),), {"c": c}),
    )
    add(
        "adaptive_tau",
        lambda x, p: unc.adaptive_tau(x[0], p["c"], p["scale"]),
        lambda x, p, g: (unc.adaptive_tau_vjp(x[0], p["c"], p["scale"], g),),
        lambda rng, c: ((_loss_embeddings(rng, c, 6, 4),), {"c": c, "scale": rng.uniform(0.1, 0.5)}),
    )
    add(
        "adaptive_margin",
        lambda x, p: unc.adaptive_margin(x[0], p["c"]),
        lambda x, p, g: (unc.adaptive_margin_vjp(x[0], p["c"], g),),
        lambda rng, c: ((_loss_embeddings(rng, c, 6, 4),), {"c": c}),
    )
    for mode in ("adaptive", "fixed"):
        add(f"contrastive_loss[{mode}]", *_contrastive(mode))
    for mode, mining in (("adaptive", "batch-hard"), ("fixed", "batch-hard"), ("adaptive", "batch-all")):
        add(f"triplet_loss[{mode},{mining}]", *_triplet(mode, mining))
    for loss in ("contrastive", "triplet"):
        add(f"head_chain[{loss}]", *_head_chain(loss))
    return dict(sorted(reg.items()))


REGISTRY = _build_registry()


def get_primitive(name: str, registry=None) -> Primitive:
    registry = REGISTRY if registry is None else registry
    try:
        return registry[name]
    except KeyError:
        raise UnknownPrimitive(f"unknown primitive {name!r}; known: {', '.join(registry)}") from None


def vjp(name: str, inputs, cotangent, params=None, registry=None):
    prim = get_primitive(name, registry)
    return tuple(prim.vjp(tuple(inputs), params or {}, cotangent))


# -- finite differences --------------------------------------------------------


def finite_diff(f, inputs, step: float = DEFAULT_STEP, params=None, probe=None, registry=None):
    """Central-difference gradients of a scalar function of ``inputs``.

    ``f`` is a primitive name or a callable taking the input tuple.  For
    vector-valued primitives pass ``probe``; the scalar checked is
    ``sum(probe * f(inputs))``.
    """
    if step < 1e-10:
        raise StepTooSmall(f"finite-difference step {step} is below 1e-10")
    if isinstance(f, str):
        prim = get_primitive(f, registry)
        p = params or {}

        def fn(xs):
            return prim.forward(xs, p)

    else:
        fn = f

    def scalar(xs):
        out = np.asarray(fn(xs), dtype=np.float64)
        return float(np.sum(out * probe)) if probe is not None else float(out)

    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    grads = []
    for k, x in enumerate(inputs):
        g = np.zeros_like(x)
        flat = x.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = scalar(tuple(inputs))
            flat[i] = orig - step
            down = scalar(tuple(inputs))
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return tuple(grads)


def relative_error(analytic, numeric, floor: float = GRAD_FLOOR) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.abs(a), np.abs(n))
    keep = scale >= floor
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(a[keep] - n[keep]) / scale[keep]))


def check_case(prim: Primitive, inputs, params, rng, step: float = DEFAULT_STEP) -> tuple:
    out = np.asarray(prim.forward(inputs, params), dtype=np.float64)
    probe = rng.standard_normal(out.shape)
    analytic = prim.vjp(inputs, params, probe)
    numeric = finite_diff(lambda xs: prim.forward(xs, params), inputs, step, probe=probe)
    return tuple(relative_error(a, n) for a, n in zip(analytic, numeric))


def gradcheck(name: str, seed: int = 42, configs: int = 10, curvatures=CURVATURES,
              threshold: float = DEFAULT_THRESHOLD, step: float = DEFAULT_STEP, registry=None) -> GradCheckReport:
    prim = get_primitive(name, registry)
    rng = np.random.Generator(np.random.Philox([seed, sorted((registry or REGISTRY)).index(name)]))
    worst = None
    for c in curvatures:
        for _ in range(configs):
            inputs, params = prim.sample(rng, c)
            errs = check_case(prim, inputs, params, rng, step)
            worst = errs if worst is None else tuple(max(a, b) for a, b in zip(worst, errs))
    return GradCheckReport(name, worst or (), threshold, configs * len(curvatures))


def gradcheck_all(seed: int = 42, configs: int = 10, curvatures=CURVATURES,
                  threshold: float = DEFAULT_THRESHOLD, step: float = DEFAULT_STEP, registry=None) -> list:
    """One report per registered primitive, sorted by name; failures are reported, not raised."""
    registry = REGISTRY if registry is None else registry
    return [
        gradcheck(name, seed, configs, curvatures, threshold, step, registry)
        for name in sorted(registry)
    ]


def format_reports(reports) -> str:
    width = max((len(r.primitive) for r in reports), default=9)
    lines = [f"{'primitive':<{width}}  {'cases':>5}  {'max rel err':>11}  status"]
    for r in reports:
        status = "ok" if r.passed else "FAIL"
        lines.append(f"{r.primitive:<{width}}  {r.cases:>5}  {r.worst:>11.3e}  {status}")
    return "\n".join(lines)


def with_corrupted(name: str, factor: float = 1.01, registry=None) -> dict:
    """Copy of the registry whose ``name`` pullback is scaled by ``factor`` (test fixture)."""
    registry = dict(REGISTRY if registry is None else registry)
    prim = registry[name]

    def bad_vjp(inputs, params, g):
        return tuple(factor * a for a in prim.vjp(inputs, params, g))

    registry[name] = replace(prim, vjp=bad_vjp)
    return registry
