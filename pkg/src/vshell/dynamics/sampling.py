"""Rejection sampling of f0 in the reduced measure 4π² dr dw dL."""

from __future__ import annotations

import logging

import numpy as np

from ..ensemble import ParticleEnsemble
from ..errors import InvalidArgument, SamplingFailure
from ..steady_state import ShellModel

__all__ = ["sample_shell", "sampling_box", "chunk_generator"]

log = logging.getLogger(__name__)

CHUNK = 1 << 18
MIN_ACCEPTANCE = 1e-4
ENVELOPE_MARGIN = 1.05


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    """Independent Philox stream for candidate block ``chunk``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))


def sampling_box(model: ShellModel, resolution: int = 4001):
    """(w_max, L_max, f_max) bounding f0 over [R1, R2] x [-w_max, w_max] x [L0, L_max]."""
    p = model.params
    r = np.linspace(model.R1, model.R2, resolution)
    g = np.maximum(model.bracket_at(r), 0.0)
    g_max = float(g.max())
    if not g_max > 0.0:
        raise SamplingFailure("bracket is nonpositive on the support")
    w_max = np.sqrt(2.0 * g_max)
    L_max = p.L0 + 2.0 * float(np.max(r * r * g))
    # max over w, L at fixed r sits at w = 0, λ = 2r²g l/(k+l)
    s = p.k + p.l
    peak = p.A * (g * p.k / s) ** p.k * (2.0 * r * r * g * p.l / s) ** p.l
    return w_max, L_max, ENVELOPE_MARGIN * float(peak.max())


def sample_shell(model: ShellModel, count: int, seed: int) -> ParticleEnsemble:
    if int(count) != count or count < 1:
        raise InvalidArgument(f"count must be a positive integer, got {count}")
    if int(seed) != seed or seed < 0:
        raise InvalidArgument(f"seed must be a nonnegative integer, got {seed}")
    count, seed = int(count), int(seed)
    p = model.params
    w_max, L_max, f_max = sampling_box(model)
    parts = []
    accepted = trials = chunk = 0
    while accepted < count:
        rng = chunk_generator(seed, chunk)
        r = rng.uniform(model.R1, model.R2, CHUNK)
        w = rng.uniform(-w_max, w_max, CHUNK)
        L = rng.uniform(p.L0, L_max, CHUNK)
        u = rng.uniform(0.0, f_max, CHUNK)
        f = model.f0(r, w, L)
        if np.any(f > f_max):
            raise SamplingFailure("f0 exceeds the rejection envelope")
        keep = (u < f) & (L > p.L0)
        parts.append((r[keep], w[keep], L[keep], f[keep]))
        accepted += int(keep.sum())
        trials += CHUNK
        chunk += 1
        if trials >= 4 * CHUNK and accepted < MIN_ACCEPTANCE * trials:
            raise SamplingFailure(f"acceptance rate {accepted / trials:.2e} below {MIN_ACCEPTANCE:g}")
    r, w, L, f = (np.concatenate(a)[:count] for a in zip(*parts))
    log.info("sampled %d particles, acceptance %.3g", count, accepted / trials)
    weight = np.full(count, model.mass / count)
    return ParticleEnsemble(r, w, L, weight, f, float(model.mass), seed, p)
