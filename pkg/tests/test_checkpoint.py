import struct

import numpy as np
import pytest

from trn.checkpoint import checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint
from trn.data import FormatError
from trn.models import MODEL_KINDS, TrnConfig, build_model


def model(kind="trn", seed=0):
    return build_model(TrnConfig(feature_dim=3, num_actions=2, hidden_dim=4, decoder_steps=2, score_embed_dim=3, model=kind), seed=seed)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_byte_round_trip(kind, tmp_path):
    m = model(kind)
    buf = checkpoint_to_bytes(m)
    back = checkpoint_from_bytes(buf)
    assert back.config == m.config and type(back) is type(m)
    assert checkpoint_to_bytes(back) == buf
    p = tmp_path / "m.trn"
    save_checkpoint(m, p)
    assert checkpoint_to_bytes(load_checkpoint(p)) == buf


def test_loaded_params_are_float32_values():
    m = model()
    back = checkpoint_from_bytes(checkpoint_to_bytes(m))
    for k, v in m.params.items():
        np.testing.assert_array_equal(back.params[k], v.astype(np.float32).astype(np.float64))


def test_every_truncation_is_a_format_error():
    buf = checkpoint_to_bytes(model("lstm"))
    for cut in range(len(buf)):
        with pytest.raises(FormatError):
            checkpoint_from_bytes(buf[:cut])


def test_bad_magic_version_trailing():
    buf = checkpoint_to_bytes(model())
    with pytest.raises(FormatError, match="TRN1"):
        checkpoint_from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(FormatError, match="version"):
        checkpoint_from_bytes(buf[:4] + struct.pack("<I", 7) + buf[8:])
    with pytest.raises(FormatError, match="trailing"):
        checkpoint_from_bytes(buf + b"\x00")


def test_garbage_config_header():
    text = b"model = nonsense\n"
    buf = b"TRN1" + struct.pack("<II", 1, len(text)) + text + struct.pack("<I", 0)
    with pytest.raises(FormatError, match="config"):
        checkpoint_from_bytes(buf)


def test_block_from_another_model_rejected():
    trn, lstm = checkpoint_to_bytes(model("trn")), checkpoint_to_bytes(model("lstm"))
    cfg_end = 12 + struct.unpack_from("<I", trn, 8)[0]
    lstm_cfg_end = 12 + struct.unpack_from("<I", lstm, 8)[0]
    with pytest.raises(FormatError, match="unexpected|missing"):
        checkpoint_from_bytes(trn[:cfg_end] + lstm[lstm_cfg_end:])
    with pytest.raises(FormatError, match="unexpected|missing"):
        checkpoint_from_bytes(lstm[:lstm_cfg_end] + trn[cfg_end:])


def test_random_byte_flips_never_crash():
    buf = checkpoint_to_bytes(model())
    rng = np.random.default_rng(0)
    for _ in range(300):
        bad = bytearray(buf)
        pos = int(rng.integers(0, len(buf)))
        bad[pos] ^= int(rng.integers(1, 256))
        try:
            checkpoint_from_bytes(bytes(bad))
        except FormatError:
            pass


def test_missing_block():
    buf = bytearray(checkpoint_to_bytes(model("framewise")))
    cfg_end = 12 + struct.unpack_from("<I", buf, 8)[0]
    n = struct.unpack_from("<I", buf, cfg_end)[0]
    buf[cfg_end : cfg_end + 4] = struct.pack("<I", n - 1)
    # the dropped count leaves the last block as trailing bytes, after the missing check
    with pytest.raises(FormatError, match="missing"):
        checkpoint_from_bytes(bytes(buf))


def test_nonfinite_block_rejected():
    m = model("lstm")
    m.params["classifier.b"][0] = np.inf
    with pytest.raises(FormatError, match="non-finite"):
        checkpoint_from_bytes(checkpoint_to_bytes(m))
