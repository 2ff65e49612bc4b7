import dataclasses

import numpy as np
import pytest

from aumol import autodiff as ad
from aumol.autodiff import Tensor, finite_diff_check
from aumol.errors import ConfigError, ContractError
from aumol.frontend import AudioBuffer
from aumol.model import (
    ADAPTER_VARIANTS, AuMolModel, ModelConfig, Vocabulary, adapt, greedy_transcribe,
)


@pytest.fixture(scope="module")
def toy():
    return AuMolModel(ModelConfig())


def test_full_scale_dimensions():
    cfg = ModelConfig.full_scale()
    assert (cfg.n_mels, cfg.max_audio_frames) == (80, 3000)
    assert (cfg.d_hidden_adapter, cfg.d_llm) == (2048, 4096)


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(d_llm=0)
    with pytest.raises(ConfigError):
        ModelConfig(adapter_variant="deep")
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({**ModelConfig().to_dict(), "mystery": 1})
    assert ModelConfig.from_dict(ModelConfig().to_dict()) == ModelConfig()


def test_vocabulary():
    vocab = Vocabulary()
    specials = {vocab.PAD, vocab.BOS, vocab.EOS, vocab.UNK}
    assert len(specials) == 4
    assert sorted(vocab.index.values()) == list(range(len(vocab)))
    ids = vocab.encode("take 2 mg")
    assert vocab.decode(ids + [vocab.EOS, 5, 6]) == "take 2 mg"
    assert vocab.encode("~") == [vocab.UNK]


def test_encoder_output_shape(toy):
    out = toy.encode_audio(np.zeros((80, 100)))
    assert out.shape == (1, 50, 64)


def test_encoder_is_position_sensitive(toy):
    x = np.random.default_rng(0).normal(size=(80, 100))
    y = x.copy()
    y[:, [3, 4]] = y[:, [4, 3]]
    assert not np.allclose(toy.encode_audio(x).data, toy.encode_audio(y).data)


def test_encoder_rejects_long_input(toy):
    with pytest.raises(ContractError):
        toy.encode_audio(np.zeros((80, 101)))


@pytest.mark.parametrize("variant", ADAPTER_VARIANTS)
def test_adapter_variants(variant):
    model = AuMolModel(ModelConfig(adapter_variant=variant))
    x = Tensor(np.random.default_rng(1).normal(size=(7, 64)))
    out = adapt(x, model.adapter)
    assert out.shape == (7, 48)
    names = {n for n, _ in model.adapter.named_parameters()}
    assert ("fc2.weight" in names) == (variant != "single_fc")


def test_no_relu_adapter_is_affine_before_norm():
    model = AuMolModel(ModelConfig(adapter_variant="no_relu"))
    a = model.adapter
    x = np.random.default_rng(2).normal(size=(3, 64))
    pre = (x @ a.fc1.weight.data.T + a.fc1.bias.data) @ a.fc2.weight.data.T + a.fc2.bias.data
    mu, var = pre.mean(-1, keepdims=True), pre.var(-1, keepdims=True)
    expected = (pre - mu) / np.sqrt(var + 1e-5) * a.ln.gain.data + a.ln.bias.data
    assert np.allclose(a(Tensor(x)).data, expected)


def test_adapter_zero_input_gives_zero():
    model = AuMolModel(ModelConfig())
    for p in (model.adapter.fc1.bias, model.adapter.fc2.bias, model.adapter.ln.bias):
        p.data[:] = 0
    assert not model.adapt(Tensor(np.zeros((4, 64)))).data.any()


def test_adapter_gradient(tiny_config):
    for variant in ADAPTER_VARIANTS:
        model = AuMolModel(dataclasses.replace(tiny_config, adapter_variant=variant))
        x = Tensor(np.random.default_rng(3).normal(size=(3, tiny_config.d_enc)), requires_grad=True)
        params = [x] + model.adapter.parameters()

        def f(*_):
            out = model.adapt(x)
            return out.mean() + (out * out).mean()

        assert finite_diff_check(f, params) < 1e-6, variant


def test_decoder_input_layout(toy):
    audio = Tensor(np.zeros((50, 48)))
    dec = toy.build_decoder_input(audio, [5, 6, 7, 8, 9], [10, 11, 12, 13, 14, 15, Vocabulary.EOS])
    assert dec.length == 63
    assert dec.mask.sum() == 7
    assert np.array_equal(np.flatnonzero(dec.mask), np.arange(55, 62))
    assert np.array_equal(dec.labels[dec.mask], [10, 11, 12, 13, 14, 15, Vocabulary.EOS])
    # BOS embedding sits right after the prompt
    assert np.array_equal(dec.embeddings.data[55], toy.decoder.embed.data[Vocabulary.BOS])


def test_decoder_input_empty_prompt(toy):
    audio = Tensor(np.ones((50, 48)))
    dec = toy.build_decoder_input(audio, [], [20, Vocabulary.EOS])
    assert dec.length == 50 + 1 + 2
    assert np.array_equal(dec.embeddings.data[:50], audio.data)
    assert np.array_equal(dec.embeddings.data[50], toy.decoder.embed.data[Vocabulary.BOS])


def test_decoder_input_overflow(toy):
    with pytest.raises(ContractError):
        toy.build_decoder_input(Tensor(np.zeros((50, 48))), None, list(range(4, 40)))


def test_masked_logits_do_not_affect_output_loss(toy):
    from aumol.losses import output_loss

    dec = toy.build_decoder_input(Tensor(np.zeros((50, 48))), None, [10, 11, Vocabulary.EOS])
    logits = toy.decoder_forward(dec.embeddings).data
    base = output_loss(Tensor(logits), dec.labels, dec.mask).data
    logits[~dec.mask] = 0.0
    assert output_loss(Tensor(logits), dec.labels, dec.mask).data == base


def test_decoder_logits_and_cross_modal_flow(toy):
    rng = np.random.default_rng(4)
    audio = rng.normal(size=(50, 48))
    target = [10, 11, 12, Vocabulary.EOS]
    dec = toy.build_decoder_input(Tensor(audio), None, target)
    logits = toy.decoder_forward(dec.embeddings).data
    assert logits.shape == (dec.length, toy.config.vocab_size)
    audio[7] += 1.0
    moved = toy.decoder_forward(toy.build_decoder_input(Tensor(audio), None, target).embeddings).data
    assert np.abs(moved[dec.mask] - logits[dec.mask]).max() > 0


def test_text_positions_are_causal(toy):
    audio = Tensor(np.random.default_rng(5).normal(size=(50, 48)))
    a = toy.build_decoder_input(audio, None, [10, 11, 12, 13])
    b = toy.build_decoder_input(audio, None, [10, 11, 20, 21])
    la, lb = toy.decoder_forward(a.embeddings).data, toy.decoder_forward(b.embeddings).data
    k = a.target_start
    # positions up to and including the one that reads token 11 see identical inputs
    assert np.array_equal(la[: k + 3], lb[: k + 3])
    assert not np.allclose(la[k + 3], lb[k + 3])


def test_modalities_share_width(toy):
    e_t = toy.adapt(toy.encode_audio(np.zeros((80, 100))))
    assert e_t.shape[-1] == toy.decoder.embed.shape[1] == toy.config.d_llm


def test_end_to_end_gradient_wrt_features(tiny_model, tiny_config):
    rng = np.random.default_rng(6)
    feats = Tensor(rng.normal(size=(tiny_config.n_mels, tiny_config.max_audio_frames)), requires_grad=True)
    err = finite_diff_check(lambda f: tiny_model.loss(f, ["ab c"], 1.0)[0], feats)
    assert err < 1e-4


def test_greedy_transcribe_terminates_and_is_deterministic(toy):
    audio = AudioBuffer(np.random.default_rng(7).normal(0, 0.1, 16000), 16000)
    first = greedy_transcribe(audio, toy)
    assert isinstance(first, str) and len(first) <= toy.config.max_text_len
    assert greedy_transcribe(audio, AuMolModel(ModelConfig())) == first
    with pytest.raises(ConfigError):
        greedy_transcribe(audio, toy, prompt="other")


def test_batched_decode_matches_single(toy):
    feats = np.random.default_rng(8).normal(size=(3, 80, 100))
    batch = toy.greedy_decode(feats)
    assert batch == [toy.greedy_decode(f)[0] for f in feats]


def test_lora_at_init_leaves_decoder_identical(toy):
    x = Tensor(np.random.default_rng(9).normal(size=(1, 20, 48)))
    with ad.no_grad():
        on = toy.decoder(x).data
        toy.decoder.set_lora_enabled(False)
        off = toy.decoder(x).data
        toy.decoder.set_lora_enabled(True)
    assert np.array_equal(on, off)


def test_component_groups_partition_parameters(toy):
    names = [n for n, _ in toy.named_parameters()]
    groups = {c: set(toy.component_parameters(c)) for c in ("adapter", "encoder", "decoder", "decoder_lora")}
    union = set().union(*groups.values())
    assert union == set(names)
    assert sum(len(g) for g in groups.values()) == len(names)
    assert all(".lora." in n for n in groups["decoder_lora"])
    assert len(groups["decoder_lora"]) == 2 * 2 * toy.config.dec_layers
    with pytest.raises(ConfigError):
        toy.component_parameters("everything")
