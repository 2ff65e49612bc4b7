"""Transformer building blocks on top of :mod:`aumol.autodiff`."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError


class Module:
    """Container whose Tensor attributes are parameters.

    Parameters are discovered in attribute insertion order, recursing into
    sub-modules and lists of sub-modules, which gives stable dotted names.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator[Module]:
        yield self
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def requires_grad_(self, flag: bool) -> Module:
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def xavier_uniform(rng: np.random.Generator, d_out: int, d_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, size=(d_out, d_in))


class Linear(Module):
    """``y = x @ W.T + b`` with ``W`` of shape ``(d_out, d_in)``."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Tensor(xavier_uniform(rng, d_out, d_in), requires_grad=True)
        self.bias = Tensor(np.zeros(d_out), requires_grad=True) if bias else None

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"Linear expects width {self.d_in}, got input {x.shape}")
        y = x @ self.weight.T
        return y if self.bias is None else y + self.bias


class LoraAdapter(Module):
    """Low-rank delta ``scale * B @ A``; ``B`` starts at zero so the delta is a no-op."""

    def __init__(self, d_in: int, d_out: int, rank: int, lora_alpha: float, rng: np.random.Generator):
        if rank < 1:
            raise ValueError(f"LoRA rank must be >= 1, got {rank}")
        self.A = Tensor(rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(rank, d_in)), requires_grad=True)
        self.B = Tensor(np.zeros((d_out, rank)), requires_grad=True)
        self._scale = lora_alpha / rank

    @property
    def rank(self) -> int:
        return self.A.shape[0]

    @property
    def scale(self) -> float:
        return self._scale


def lora_forward(x: Tensor, weight: Tensor, adapter: LoraAdapter, bias: Tensor | None = None) -> Tensor:
    """``x @ W.T + scale * (x @ A.T) @ B.T`` (plus bias)."""
    if x.shape[-1] != weight.shape[1] or adapter.A.shape[1] != weight.shape[1]:
        raise ShapeError(f"lora_forward: input {x.shape}, weight {weight.shape}, A {adapter.A.shape}")
    if adapter.B.shape[0] != weight.shape[0]:
        raise ShapeError(f"lora_forward: B {adapter.B.shape} does not match weight {weight.shape}")
    y = x @ weight.T
    if bias is not None:
        y = y + bias
    return y + ((x @ adapter.A.T) @ adapter.B.T) * adapter.scale


class LoraLinear(Linear):
    """Linear layer carrying a LoRA adapter; ``lora_enabled`` toggles the delta path."""

    def __init__(self, d_in, d_out, rng, bias=True, rank=4, lora_alpha=8.0):
        super().__init__(d_in, d_out, rng, bias)
        self.lora = LoraAdapter(d_in, d_out, rank, lora_alpha, rng)
        self._lora_enabled = True

    @property
    def lora_enabled(self) -> bool:
        return self._lora_enabled

    @lora_enabled.setter
    def lora_enabled(self, flag: bool) -> None:
        self._lora_enabled = bool(flag)

    def __call__(self, x: Tensor) -> Tensor:
        if not self._lora_enabled:
            return super().__call__(x)
        return lora_forward(x, self.weight, self.lora, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = Tensor(np.ones(d), requires_grad=True)
        self.bias = Tensor(np.zeros(d), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias)


def sinusoidal_table(max_len: int, d_model: int) -> np.ndarray:
    """``sin(p / 10000^(2i/d))`` in even columns, ``cos`` of the same angle in odd ones."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    two_i = np.arange(0, d_model, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, two_i / d_model)
    table = np.zeros((max_len, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return table


class PositionalEncoding(Module):
    """Sinusoidally initialised, trainable position table."""

    def __init__(self, max_len: int, d_model: int, trainable: bool = True):
        self.table = Tensor(sinusoidal_table(max_len, d_model), requires_grad=trainable)

    @property
    def max_len(self) -> int:
        return self.table.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        t = x.shape[-2]
        if t > self.max_len:
            raise ShapeError(f"sequence of length {t} exceeds position table of {self.max_len}")
        return x + self.table[:t]


def sinusoidal_positions(max_len: int, d_model: int) -> PositionalEncoding:
    return PositionalEncoding(max_len, d_model)


def causal_mask(t: int) -> np.ndarray:
    return np.tril(np.ones((t, t), dtype=bool))


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention; ``lora_rank`` adds adapters on W_q and W_v."""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator,
                 lora_rank: int | None = None, lora_alpha: float = 8.0):
        if d_model % n_heads:
            raise ShapeError(f"d_model={d_model} is not divisible by n_heads={n_heads}")
        self._n_heads = n_heads
        if lora_rank:
            self.q = LoraLinear(d_model, d_model, rng, bias=False, rank=lora_rank, lora_alpha=lora_alpha)
        else:
            self.q = Linear(d_model, d_model, rng, bias=False)
        self.k = Linear(d_model, d_model, rng, bias=False)
        if lora_rank:
            self.v = LoraLinear(d_model, d_model, rng, bias=False, rank=lora_rank, lora_alpha=lora_alpha)
        else:
            self.v = Linear(d_model, d_model, rng, bias=False)
        self.o = Linear(d_model, d_model, rng, bias=False)

    @property
    def n_heads(self) -> int:
        return self._n_heads

    def attention_weights(self, x: Tensor, causal: bool) -> Tensor:
        q, k, _ = self._heads(x)
        return self._probs(q, k, causal)

    def _split(self, y: Tensor) -> Tensor:
        b, t, d = y.shape
        return y.reshape(b, t, self._n_heads, d // self._n_heads).transpose(0, 2, 1, 3)

    def _heads(self, x: Tensor):
        return self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))

    def _probs(self, q: Tensor, k: Tensor, causal: bool) -> Tensor:
        d_head = q.shape[-1]
        scores = (q @ k.T) * (1.0 / np.sqrt(d_head))
        mask = causal_mask(q.shape[-2]) if causal else None
        return ad.softmax(scores, axis=-1, mask=mask)

    def __call__(self, x: Tensor, causal: bool = False) -> Tensor:
        squeeze = x.ndim == 2
        if squeeze:
            x = x.reshape(1, *x.shape)
        if x.ndim != 3 or x.shape[-1] != self.o.d_in:
            raise ShapeError(f"attention expects (T, {self.o.d_in}) or (B, T, {self.o.d_in}), got {x.shape}")
        q, k, v = self._heads(x)
        ctx = self._probs(q, k, causal) @ v
        b, h, t, dh = ctx.shape
        out = self.o(ctx.transpose(0, 2, 1, 3).reshape(b, t, h * dh))
        return out.reshape(t, h * dh) if squeeze else out


def multi_head_attention(x: Tensor, params: MultiHeadAttention, causal: bool = False) -> Tensor:
    return params(x, causal)


class FeedForward(Module):
    def __init__(self, d_model: int, rng: np.random.Generator, hidden: int | None = None):
        self.up = Linear(d_model, hidden or 4 * d_model, rng)
        self.down = Linear(hidden or 4 * d_model, d_model, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.down(ad.relu(self.up(x)))


class TransformerBlock(Module):
    """Pre-norm block: ``x + Attn(LN(x))`` followed by ``+ FFN(LN(.))``."""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator, causal: bool = False,
                 lora_rank: int | None = None, lora_alpha: float = 8.0):
        self._causal = causal
        self.ln1 = LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, n_heads, rng, lora_rank, lora_alpha)
        self.ln2 = LayerNorm(d_model)
        self.ffn = FeedForward(d_model, rng)

    @property
    def causal(self) -> bool:
        return self._causal

    def __call__(self, x: Tensor, causal: bool | None = None) -> Tensor:
        causal = self._causal if causal is None else causal
        x = x + self.attn(self.ln1(x), causal)
        return x + self.ffn(self.ln2(x))


def transformer_block(x: Tensor, params: TransformerBlock, causal: bool) -> Tensor:
    return params(x, causal)
