"""Audio encoder + adaptation layer + decoder-only LM, wired into one model."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, ShapeError
from .frontend import AudioBuffer, LogMelFeatures, SAMPLE_RATE, StftConfig, featurize, resample
from .losses import LossBreakdown, alignment_terms, match_lengths, output_loss, total_loss, weighted_total
from .nn import LayerNorm, Linear, Module, PositionalEncoding, TransformerBlock

DEFAULT_ALPHABET = " abcdefghijklmnopqrstuvwxyz0123456789'-.,:?"
DEFAULT_PROMPT = "transcribe:"
log = logging.getLogger(__name__)

ADAPTER_VARIANTS = ("full", "single_fc", "no_relu")
COMPONENTS = ("adapter", "encoder", "decoder", "decoder_lora")


@dataclass(frozen=True)
class ModelConfig:
    n_mels: int = 80
    d_enc: int = 64
    enc_layers: int = 2
    d_hidden_adapter: int = 32
    d_llm: int = 48
    dec_layers: int = 2
    n_heads: int = 4
    max_audio_frames: int = 100
    max_text_len: int = 24
    adapter_variant: str = "full"
    downsample_factor: int = 2
    lora_rank: int = 4
    lora_alpha: float = 8.0
    alphabet: str = DEFAULT_ALPHABET
    prompt: str = DEFAULT_PROMPT
    seed: int = 0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for name in ("n_mels", "d_enc", "enc_layers", "d_hidden_adapter", "d_llm", "dec_layers",
                     "n_heads", "max_audio_frames", "max_text_len", "downsample_factor", "lora_rank"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                out.append(f"model.{name} must be an integer >= 1 (got {value!r})")
        if self.adapter_variant not in ADAPTER_VARIANTS:
            out.append(f"model.adapter_variant must be one of {ADAPTER_VARIANTS} (got {self.adapter_variant!r})")
        for name in ("d_enc", "d_llm"):
            value = getattr(self, name)
            if isinstance(value, int) and isinstance(self.n_heads, int) and self.n_heads >= 1 and value % self.n_heads:
                out.append(f"model.{name}={value} is not divisible by n_heads={self.n_heads}")
        if len(set(self.alphabet)) != len(self.alphabet):
            out.append("model.alphabet contains repeated characters")
        missing = sorted(set(self.prompt) - set(self.alphabet))
        if missing:
            out.append(f"model.prompt uses characters outside the alphabet: {missing}")
        return out

    @property
    def vocab_size(self) -> int:
        return len(Vocabulary.SPECIALS) + len(self.alphabet)

    @property
    def audio_tokens(self) -> int:
        return self.max_audio_frames // self.downsample_factor

    @property
    def max_positions(self) -> int:
        # audio | prompt | BOS + transcript + EOS
        return self.audio_tokens + len(self.prompt) + self.max_text_len + 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ModelConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model keys: {unknown}")
        return cls(**data)

    @classmethod
    def full_scale(cls) -> ModelConfig:
        """Dimensions of the reference system; documented, far too large to build here."""
        return cls(d_enc=1280, enc_layers=32, d_hidden_adapter=2048, d_llm=4096, dec_layers=32,
                   n_heads=16, max_audio_frames=3000, max_text_len=448)


class Vocabulary:
    """Character vocabulary with PAD/BOS/EOS/UNK at ids 0-3."""

    SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")
    PAD, BOS, EOS, UNK = range(4)

    def __init__(self, alphabet: str = DEFAULT_ALPHABET):
        self.alphabet = alphabet
        self.tokens = list(self.SPECIALS) + list(alphabet)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(ch, self.UNK) for ch in text]

    def decode(self, ids: Sequence[int]) -> str:
        chars = []
        for i in ids:
            i = int(i)
            if i == self.EOS:
                break
            if i >= len(self.SPECIALS):
                chars.append(self.tokens[i])
        return "".join(chars)


@dataclass
class DecoderInput:
    """Concatenated decoder sequence plus next-token labels at target positions."""

    embeddings: Tensor
    labels: np.ndarray
    mask: np.ndarray
    target_start: int = field(default=0)

    @property
    def length(self) -> int:
        return self.embeddings.shape[-2]


def _as_batch_features(features) -> np.ndarray:
    if isinstance(features, LogMelFeatures):
        features = features.values
    if isinstance(features, (list, tuple)):
        features = np.stack([f.values if isinstance(f, LogMelFeatures) else f for f in features])
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"features must be (n_mels, frames) or (batch, n_mels, frames), got {arr.shape}")
    return arr


class AudioEncoder(Module):
    """Input projection, trainable positions, non-causal blocks, final norm, strided mean-pool."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self._cfg = cfg
        self.proj = Linear(cfg.n_mels, cfg.d_enc, rng)
        self.pos = PositionalEncoding(cfg.max_audio_frames, cfg.d_enc)
        self.blocks = [TransformerBlock(cfg.d_enc, cfg.n_heads, rng, causal=False) for _ in range(cfg.enc_layers)]
        self.ln = LayerNorm(cfg.d_enc)

    def __call__(self, features) -> Tensor:
        cfg = self._cfg
        if isinstance(features, Tensor):
            # differentiable path, used for end-to-end gradient checks
            x = features.reshape(1, *features.shape) if features.ndim == 2 else features
            if x.ndim != 3:
                raise ShapeError(f"features must be (n_mels, frames) or (batch, n_mels, frames), got {x.shape}")
            frames_first = ad.swapaxes(x, 1, 2)
        else:
            x = _as_batch_features(features)
            frames_first = Tensor(np.swapaxes(x, 1, 2))
        if x.shape[1] != cfg.n_mels:
            raise ShapeError(f"expected {cfg.n_mels} Mel bins, got features {x.shape}")
        if x.shape[2] > cfg.max_audio_frames:
            raise ContractError(f"{x.shape[2]} frames exceed max_audio_frames={cfg.max_audio_frames}")
        h = self.pos(self.proj(frames_first))
        for block in self.blocks:
            h = block(h)
        h = self.ln(h)
        k = cfg.downsample_factor
        b, t, d = h.shape
        if t < k:
            raise ContractError(f"{t} frames cannot be pooled by factor {k}")
        keep = (t // k) * k
        if keep != t:
            h = h[:, :keep]
        return h.reshape(b, t // k, k, d).mean(axis=2)


class Adapter(Module):
    """Maps encoder states into the decoder embedding space, one time step at a time."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self._variant = cfg.adapter_variant
        if cfg.adapter_variant == "single_fc":
            self.fc1 = Linear(cfg.d_enc, cfg.d_llm, rng)
        else:
            self.fc1 = Linear(cfg.d_enc, cfg.d_hidden_adapter, rng)
            self.fc2 = Linear(cfg.d_hidden_adapter, cfg.d_llm, rng)
        self.ln = LayerNorm(cfg.d_llm)

    @property
    def variant(self) -> str:
        return self._variant

    def __call__(self, x: Tensor) -> Tensor:
        h = self.fc1(x)
        if self._variant == "full":
            h = self.fc2(ad.relu(h))
        elif self._variant == "no_relu":
            h = self.fc2(h)
        return self.ln(h)


def adapt(audio_repr: Tensor, params: Adapter) -> Tensor:
    return params(audio_repr)


class Decoder(Module):
    """Causal LM over embeddings; LoRA adapters sit on every W_q and W_v."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.embed = Tensor(rng.normal(0.0, 1.0, size=(cfg.vocab_size, cfg.d_llm)), requires_grad=True)
        self.pos = PositionalEncoding(cfg.max_positions, cfg.d_llm)
        self.blocks = [
            TransformerBlock(cfg.d_llm, cfg.n_heads, rng, causal=True,
                             lora_rank=cfg.lora_rank, lora_alpha=cfg.lora_alpha)
            for _ in range(cfg.dec_layers)
        ]
        self.ln = LayerNorm(cfg.d_llm)
        self.head = Linear(cfg.d_llm, cfg.vocab_size, rng, bias=False)

    def lora_layers(self):
        for block in self.blocks:
            yield block.attn.q
            yield block.attn.v

    def set_lora_enabled(self, flag: bool) -> None:
        for layer in self.lora_layers():
            layer.lora_enabled = flag

    def __call__(self, embeddings: Tensor) -> Tensor:
        h = self.pos(embeddings)
        for block in self.blocks:
            h = block(h)
        return self.head(self.ln(h))


@dataclass
class ForwardResult:
    logits: Tensor
    decoder_input: DecoderInput
    e_t: Tensor
    output_loss: Tensor
    alignment_loss: Tensor


class AuMolModel(Module):
    def __init__(self, cfg: ModelConfig | None = None):
        cfg = cfg or ModelConfig()
        self._cfg = cfg
        self._vocab = Vocabulary(cfg.alphabet)
        rng = np.random.default_rng(cfg.seed)
        self.encoder = AudioEncoder(cfg, rng)
        self.adapter = Adapter(cfg, rng)
        self.decoder = Decoder(cfg, rng)
        self._prompt_ids = self._vocab.encode(cfg.prompt)

    @property
    def config(self) -> ModelConfig:
        return self._cfg

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    # -- parameter groups ------------------------------------------------
    def component_parameters(self, component: str) -> dict[str, Tensor]:
        if component not in COMPONENTS:
            raise ConfigError(f"unknown component {component!r}; expected one of {COMPONENTS}")
        out = {}
        for name, p in self.named_parameters():
            top = name.split(".", 1)[0]
            is_lora = ".lora." in name
            if component == "decoder_lora":
                keep = top == "decoder" and is_lora
            elif component == "decoder":
                keep = top == "decoder" and not is_lora
            else:
                keep = top == component
            if keep:
                out[name] = p
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ConfigError(f"parameter sets differ (missing {missing[:5]}, unexpected {extra[:5]})")
        for name, p in params.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ConfigError(f"{name}: checkpoint shape {arr.shape} != model shape {p.shape}")
            p.data = np.array(arr, dtype=np.float64)

    # -- pipeline stages -------------------------------------------------
    def encode_audio(self, features) -> Tensor:
        return self.encoder(features)

    def adapt(self, audio_repr: Tensor) -> Tensor:
        return self.adapter(audio_repr)

    def embed_tokens(self, ids) -> Tensor:
        return ad.embedding_lookup(self.decoder.embed, ids)

    def build_decoder_input(self, audio: Tensor, prompt_ids: Sequence[int] | None,
                            target_ids) -> DecoderInput:
        """``[audio | embed(prompt) | embed(BOS + target)]`` with labels over the target.

        ``target_ids`` is one id sequence (with unbatched ``audio``) or one per
        batch row; the caller terminates each with EOS. The label at position
        ``p`` is the token at ``p + 1``, defined only for BOS and all target
        tokens but the last. Batched targets are right-padded with PAD.
        """
        squeeze = audio.ndim == 2
        if squeeze:
            audio = audio.reshape(1, *audio.shape)
            target_ids = [list(target_ids)]
        b, t_audio, d = audio.shape
        if len(target_ids) != b:
            raise ShapeError(f"{len(target_ids)} targets for a batch of {b}")
        prompt = list(self._prompt_ids if prompt_ids is None else prompt_ids)
        longest = max(len(t) for t in target_ids)
        if longest < 1:
            raise ContractError("every target needs at least one token")
        total = t_audio + len(prompt) + 1 + longest
        if total > self._cfg.max_positions:
            raise ContractError(f"decoder input of {total} positions exceeds max_positions={self._cfg.max_positions}")
        ids = np.full((b, len(prompt) + 1 + longest), Vocabulary.PAD, dtype=np.int64)
        labels = np.zeros((b, total), dtype=np.int64)
        mask = np.zeros((b, total), dtype=bool)
        start = t_audio + len(prompt)
        for row, target in enumerate(target_ids):
            seq = prompt + [Vocabulary.BOS] + list(target)
            ids[row, : len(seq)] = seq
            n = len(target)
            labels[row, start : start + n] = target
            mask[row, start : start + n] = True
        text = self.embed_tokens(ids)
        combined = ad.concat([audio, text], axis=1)
        if squeeze:
            combined = combined.reshape(total, d)
            labels, mask = labels[0], mask[0]
        return DecoderInput(combined, labels, mask, start)

    def decoder_forward(self, combined: Tensor) -> Tensor:
        squeeze = combined.ndim == 2
        x = combined.reshape(1, *combined.shape) if squeeze else combined
        logits = self.decoder(x)
        return logits.reshape(*logits.shape[1:]) if squeeze else logits

    # -- training objective ------------------------------------------------
    def text_targets(self, transcripts: Sequence[str]) -> list[list[int]]:
        targets = []
        for text in transcripts:
            ids = self._vocab.encode(text)
            if len(ids) > self._cfg.max_text_len:
                raise ContractError(f"transcript longer than max_text_len={self._cfg.max_text_len}: {text!r}")
            targets.append(ids)
        return targets

    def alignment_targets(self, transcripts: Sequence[str]) -> list[np.ndarray]:
        """Constant e_u: decoder input embeddings of each transcript's tokens."""
        table = self.decoder.embed.data
        return [table[np.asarray(ids or [Vocabulary.EOS])] for ids in self.text_targets(transcripts)]

    def forward(self, features, transcripts: Sequence[str]) -> ForwardResult:
        e_t = self.adapt(self.encode_audio(features))
        if e_t.shape[0] != len(transcripts):
            raise ShapeError(f"{e_t.shape[0]} feature rows for {len(transcripts)} transcripts")
        targets = [ids + [Vocabulary.EOS] for ids in self.text_targets(transcripts)]
        dec_in = self.build_decoder_input(e_t, None, targets)
        logits = self.decoder_forward(dec_in.embeddings)
        out = output_loss(logits.reshape(-1, logits.shape[-1]), dec_in.labels.reshape(-1), dec_in.mask.reshape(-1))
        align = None
        for i, e_u in enumerate(self.alignment_targets(transcripts)):
            a, u = match_lengths(e_t[i], e_u)
            terms = alignment_terms(a, u)
            log.debug("alignment[%d]: l1 mean %.6g, l1 sum %.6g, cosine term %.6g, zero-norm steps %d",
                      i, terms.l1_mean, terms.l1_sum, terms.cosine_term, terms.degenerate_steps)
            align = terms.loss if align is None else align + terms.loss
        align = align * (1.0 / len(transcripts))
        return ForwardResult(logits, dec_in, e_t, out, align)

    def loss(self, features, transcripts: Sequence[str], alpha: float = 1.0) -> tuple[Tensor, LossBreakdown]:
        res = self.forward(features, transcripts)
        total = weighted_total(res.output_loss, res.alignment_loss, alpha)
        return total, total_loss(res.output_loss, res.alignment_loss, alpha)

    # -- inference -----------------------------------------------------------
    def greedy_decode(self, features) -> list[str]:
        """Argmax decoding from BOS until EOS or ``max_text_len`` tokens, batched."""
        with ad.no_grad():
            e_t = self.adapt(self.encode_audio(features))
            b = e_t.shape[0]
            prompt = self.embed_tokens(np.array(self._prompt_ids + [Vocabulary.BOS], dtype=np.int64))
            prefix = ad.concat([e_t, Tensor(np.broadcast_to(prompt.data, (b, *prompt.shape)))], axis=1)
            generated = np.zeros((b, 0), dtype=np.int64)
            done = np.zeros(b, dtype=bool)
            for _ in range(self._cfg.max_text_len + 1):
                seq = prefix if generated.shape[1] == 0 else ad.concat([prefix, self.embed_tokens(generated)], axis=1)
                logits = self.decoder(seq).data[:, -1]
                nxt = np.where(done, Vocabulary.EOS, logits.argmax(axis=-1))
                generated = np.concatenate([generated, nxt[:, None]], axis=1)
                done |= nxt == Vocabulary.EOS
                if done.all():
                    break
        return [self._vocab.decode(row[: self._cfg.max_text_len]) for row in generated]

    def transcribe(self, audio: AudioBuffer, stft: StftConfig | None = None) -> str:
        audio = resample(audio, SAMPLE_RATE)
        feats = featurize(audio, stft, target_frames=self._cfg.max_audio_frames)
        return self.greedy_decode(feats.values)[0]


def greedy_transcribe(audio: AudioBuffer, model: AuMolModel, prompt: str | None = None) -> str:
    if prompt is not None and prompt != model.config.prompt:
        raise ConfigError(f"model was built for prompt {model.config.prompt!r}, got {prompt!r}")
    return model.transcribe(audio)
