"""Velocity models and classifier-free guidance plumbing.

Two desk-scale implementations stand in for a UNet. `AnalyticLinearModel`
computes a closed-form map whose output can be hand-checked with a direct
matrix multiply; `SeededMockModel` hashes (seed, generation id, timestep,
conditioning) into pseudo-random outputs that are reproducible across
runs and independent per sample. Both declare a per-call busy-work cost
so benchmark runs can attribute wall time to model calls.

Per-sample independence is a hard requirement here: the engine dispatcher
splits batches apart and re-concatenates outputs, which is only exact when
row i of the output depends on nothing but row i of the input.
"""

from __future__ import annotations

import hashlib
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StateError
from .timing import busy_wait_us
from .velocity import LatentBatch

_MIX_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_C1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_C2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class Conditioning:
    """Conditioning vector plus guidance controls.

    `row_embeddings` is populated by `apply_cfg` when it doubles a batch:
    row i of the doubled batch reads its own embedding from row i here,
    which is how the unconditional and conditional halves see different
    context through a single model call.
    """

    embedding: np.ndarray
    guidance_scale: float = 1.0
    negative_embedding: np.ndarray | None = None
    row_embeddings: np.ndarray | None = None

    @property
    def embed_dim(self) -> int:
        return len(self.embedding)

    def embedding_for_row(self, row: int) -> np.ndarray:
        if self.row_embeddings is not None:
            return self.row_embeddings[row]
        return self.embedding


def make_conditioning(
    embedding: np.ndarray,
    guidance_scale: float = 1.0,
    negative_embedding: np.ndarray | None = None,
) -> Conditioning:
    if guidance_scale < 0.0:
        raise ParameterError(f"guidance_scale must be >= 0, got {guidance_scale}")
    emb = np.asarray(embedding, dtype=np.float64)
    neg = None if negative_embedding is None else np.asarray(
        negative_embedding, dtype=np.float64
    )
    if neg is not None and neg.shape != emb.shape:
        raise ParameterError(
            f"negative embedding length {neg.shape} != embedding length {emb.shape}"
        )
    return Conditioning(embedding=emb, guidance_scale=guidance_scale, negative_embedding=neg)


@dataclass(frozen=True)
class ModelOutput:
    """Primary prediction plus optional secondary outputs.

    `aux` carries extra per-sample matrices for models that return tuples;
    the engine dispatcher must concatenate these field-wise when it
    decomposes a batch.
    """

    epsilon: np.ndarray
    aux: list[np.ndarray] | None = None


class VelocityModel(ABC):
    """Maps (latents, timesteps, conditioning) to a noise prediction.

    Subclasses implement `_compute`; `forward` wraps it with validation
    and the declared busy-work cost. Output row i must depend only on
    input row i. Models are immutable after construction and safe to call
    from multiple threads.
    """

    dim: int
    embed_dim: int
    cost_us: float

    def __init__(self, dim: int, embed_dim: int, cost_us: float = 0.0):
        if dim < 1 or embed_dim < 1:
            raise ParameterError("dim and embed_dim must be >= 1")
        if cost_us < 0.0:
            raise ParameterError(f"cost_us must be >= 0, got {cost_us}")
        self.dim = dim
        self.embed_dim = embed_dim
        self.cost_us = cost_us

    def forward(self, batch: LatentBatch, cond: Conditioning) -> ModelOutput:
        self._check(batch, cond)
        busy_wait_us(self.cost_us)
        return self._compute(batch, cond)

    def _check(self, batch: LatentBatch, cond: Conditioning) -> None:
        if batch.batch_size == 0:
            raise ParameterError("batch must be non-empty")
        if batch.dim != self.dim:
            raise ParameterError(
                f"latent dim {batch.dim} != model dim {self.dim}"
            )
        if cond.embed_dim != self.embed_dim:
            raise ParameterError(
                f"embedding length {cond.embed_dim} != model embed_dim {self.embed_dim}"
            )
        if cond.row_embeddings is not None and len(cond.row_embeddings) != batch.batch_size:
            raise ParameterError(
                f"{len(cond.row_embeddings)} row embeddings for batch of "
                f"{batch.batch_size}"
            )

    @abstractmethod
    def _compute(self, batch: LatentBatch, cond: Conditioning) -> ModelOutput:
        """Pure computation, no cost injection. Called by forward and by
        the compiled engine (which accounts its own simulated cost)."""


class AnalyticLinearModel(VelocityModel):
    """Closed-form model: eps_i = A @ x_i + t_i * b.

    Conditioning is accepted but does not enter the map, so the output is
    checkable by hand. Rows are computed one at a time: a whole-batch
    matmul could round differently than the same rows pushed through
    one-sample calls, and dispatcher tests require bit-identical results
    across batch decompositions.

    `aux_scales` adds one secondary output per entry, each a per-sample
    scalar multiple of eps.
    """

    def __init__(
        self,
        dim: int = 16,
        embed_dim: int = 8,
        cost_us: float = 0.0,
        a_matrix: np.ndarray | None = None,
        b_vector: np.ndarray | None = None,
        aux_scales: tuple[float, ...] = (),
    ):
        super().__init__(dim=dim, embed_dim=embed_dim, cost_us=cost_us)
        if a_matrix is None:
            a_matrix = 0.1 * np.eye(dim)
        if b_vector is None:
            b_vector = 0.05 * np.ones(dim)
        self.a_matrix = np.asarray(a_matrix, dtype=np.float64)
        self.b_vector = np.asarray(b_vector, dtype=np.float64)
        if self.a_matrix.shape != (dim, dim):
            raise ParameterError(
                f"a_matrix shape {self.a_matrix.shape} != ({dim}, {dim})"
            )
        if self.b_vector.shape != (dim,):
            raise ParameterError(f"b_vector shape {self.b_vector.shape} != ({dim},)")
        self.aux_scales = aux_scales

    def _compute(self, batch: LatentBatch, cond: Conditioning) -> ModelOutput:
        rows = [
            self.a_matrix @ batch.data[i] + batch.timesteps[i] * self.b_vector
            for i in range(batch.batch_size)
        ]
        eps = np.stack(rows, axis=0)
        aux = None
        if self.aux_scales:
            aux = [scale * eps for scale in self.aux_scales]
        return ModelOutput(epsilon=eps, aux=aux)


def _splitmix_row(key: np.uint64, dim: int) -> np.ndarray:
    """Expand one 64-bit row key into `dim` floats in [-1, 1)."""
    j = np.arange(dim, dtype=np.uint64)
    z = key ^ (j * _MIX_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * _MIX_C1
    z = (z ^ (z >> np.uint64(27))) * _MIX_C2
    z = z ^ (z >> np.uint64(31))
    unit = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return 2.0 * unit - 1.0


class SeededMockModel(VelocityModel):
    """Deterministic stand-in producing hash-derived outputs in [-1, 1).

    Row i is a pure function of (model seed, generation id, timestep
    quantized to nanosecond resolution, that row's conditioning embedding)
    and ignores the latent values entirely, which keeps goldens stable
    under any algebraically-equivalent reordering of the stepping math.
    Including the embedding makes guidance visible: the unconditional and
    conditional halves of a CFG-doubled batch hash differently, so the
    combined output actually depends on the guidance scale.
    """

    def __init__(
        self,
        dim: int = 16,
        embed_dim: int = 8,
        cost_us: float = 0.0,
        seed: int = 0,
        aux_scales: tuple[float, ...] = (),
    ):
        super().__init__(dim=dim, embed_dim=embed_dim, cost_us=cost_us)
        self.seed = int(seed)
        self.aux_scales = aux_scales

    def _row_key(self, gen_id: int, t: float, embedding: np.ndarray) -> np.uint64:
        tq = int(round(t * 1e9))
        h = hashlib.blake2b(digest_size=8)
        h.update(struct.pack("<qqq", self.seed, int(gen_id), tq))
        h.update(np.ascontiguousarray(embedding, dtype=np.float64).tobytes())
        return np.uint64(int.from_bytes(h.digest(), "little"))

    def _compute(self, batch: LatentBatch, cond: Conditioning) -> ModelOutput:
        rows = []
        for i in range(batch.batch_size):
            key = self._row_key(
                int(batch.ids[i]), float(batch.timesteps[i]), cond.embedding_for_row(i)
            )
            rows.append(_splitmix_row(key, self.dim))
        eps = np.stack(rows, axis=0)
        aux = None
        if self.aux_scales:
            aux = [scale * eps for scale in self.aux_scales]
        return ModelOutput(epsilon=eps, aux=aux)


def apply_cfg(
    batch: LatentBatch, cond: Conditioning
) -> tuple[LatentBatch, Conditioning]:
    """Double a batch into [unconditional; conditional] halves.

    Identity when guidance_scale == 1. Otherwise the first B rows carry
    the negative embedding (zeros when none was given) and the last B the
    positive one, with timesteps and ids repeated so either half steps
    identically.
    """
    w = cond.guidance_scale
    if w == 1.0:
        return batch, cond
    b = batch.batch_size
    neg = cond.negative_embedding
    if neg is None:
        neg = np.zeros_like(cond.embedding)
    row_emb = np.concatenate(
        [np.tile(neg, (b, 1)), np.tile(cond.embedding, (b, 1))], axis=0
    )
    doubled = LatentBatch(
        data=np.concatenate([batch.data, batch.data], axis=0),
        timesteps=np.concatenate([batch.timesteps, batch.timesteps]),
        ids=np.concatenate([batch.ids, batch.ids]),
    )
    paired = Conditioning(
        embedding=cond.embedding,
        guidance_scale=w,
        negative_embedding=cond.negative_embedding,
        row_embeddings=row_emb,
    )
    return doubled, paired


def handle_cfg(out: ModelOutput, w: float) -> ModelOutput:
    """Collapse a CFG-doubled output back to original batch size.

    Combines halves as eps_u + w * (eps_c - eps_u), per sample, with any
    aux outputs combined the same way. Callers invoke this only when
    guidance is active; an odd row count means the halves cannot pair up.
    """
    rows = out.epsilon.shape[0]
    if rows % 2 != 0:
        raise StateError(f"guided output has odd row count {rows}; halves cannot pair")
    half = rows // 2

    def combine(mat: np.ndarray) -> np.ndarray:
        uncond = mat[:half]
        condi = mat[half:]
        return uncond + w * (condi - uncond)

    aux = None if out.aux is None else [combine(a) for a in out.aux]
    return ModelOutput(epsilon=combine(out.epsilon), aux=aux)
