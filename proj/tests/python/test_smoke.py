import math
import os
import pathlib

import numpy as np
import pytest

import sfdlm

DATA_DIR = pathlib.Path(os.environ.get("SFDLM_DATA_DIR", pathlib.Path(__file__).parents[2] / "data"))
CORPUS = DATA_DIR / "corpus.txt"


def quick_config(out_dir):
    return {
        "corpus": str(CORPUS),
        "output_dir": str(out_dir),
        "seq_len": 16,
        "embed_dim": 8,
        "unet_levels": 1,
        "blocks_per_level": 1,
        "ssm_state_dim": 2,
        "ssm_kernel_len": 4,
        "fourier_hidden": 16,
        "diffusion_steps": 4,
        "batch_size": 4,
        "total_steps": 4,
        "warmup_steps": 2,
        "checkpoint_interval": 2,
        "eval_interval": 2,
        "eval_max_windows": 4,
        "window_stride": 64,
        "seed": 3,
    }


def test_schedule_and_closed_form():
    assert sfdlm.linear_schedule(3, 0.1, 0.3) == pytest.approx([0.1, 0.2, 0.3])
    a = sfdlm.marginal_survival([0.5, 0.5], 2)
    assert a == 0.25
    assert sfdlm.match_probability(a, 4) == pytest.approx(0.4375, abs=1e-12)


def test_forward_step_rate_and_determinism():
    x = [0] * 50000
    y = sfdlm.forward_step(x, 0.2, 10, seed=1)
    assert y == sfdlm.forward_step(x, 0.2, 10, seed=1)
    mismatch = sum(v != 0 for v in y) / len(y)
    expected = 0.2 * (1 - 1 / 10)
    assert abs(mismatch - expected) < 3 * math.sqrt(expected * (1 - expected) / len(y))
    assert sfdlm.forward_step(x[:10], 0.0, 10) == x[:10]


def test_ssm_kernel_single_state():
    a_raw = np.array([[math.atanh(0.5 / 0.999)]])
    k = sfdlm.ssm_kernel(a_raw, np.array([[2.0]]), np.array([[3.0]]), np.array([1.0]), 4)
    assert k.shape == (1, 4)
    np.testing.assert_allclose(k[0], [7.0, 3.0, 1.5, 0.75], atol=1e-12)


def test_vocab_round_trip():
    v = sfdlm.Vocab.from_corpus("hello world")
    assert len(v) == 8
    assert v.decode(v.encode("low hold")) == "low hold"
    with pytest.raises(sfdlm.InputError):
        v.encode("xyz")


def test_train_generate_inpaint(tmp_path):
    code, log = sfdlm.train(quick_config(tmp_path))
    assert code == 0, log
    ck = sfdlm.Checkpoint.load(str(tmp_path / "checkpoint.bin"))
    assert ck.global_step == 4
    assert ck.seq_len == 16 and ck.num_steps == 4

    first = (tmp_path / "metrics.csv").read_text().splitlines()[1].split(",")
    assert float(first[2]) == pytest.approx(math.log(ck.vocab_size), abs=1e-9)

    logits = ck.logits([0] * 16, 0)
    assert logits.shape == (16, ck.vocab_size)

    a = ck.generate(seed=9)
    assert a == ck.generate(seed=9)
    assert len(a["trace"]) == 5 and len(a["tokens"]) == 16

    prompt = ck.vocab.encode("the quick brown ")
    mask = [i < 8 for i in range(16)]
    r = ck.inpaint(prompt, mask, seed=2)
    assert all(state[:8] == "the quic" for state in r["trace"])


def test_errors(tmp_path):
    cfg = quick_config(tmp_path)
    cfg["corpus"] = str(tmp_path / "missing.txt")
    code, log = sfdlm.train(cfg)
    assert code == 2 and "missing.txt" in log
    with pytest.raises(sfdlm.InputError):
        sfdlm.train({"no_such_key": 1})
    with pytest.raises(sfdlm.InputError):
        sfdlm.Checkpoint.load(str(tmp_path / "nope.bin"))


def test_noise_sim_and_grad_check():
    code, csv = sfdlm.noise_sim({"diffusion_steps": 2, "betas": [0.5, 0.5]}, samples=20000, vocab_size=4)
    assert code == 0
    assert float(csv.splitlines()[2].split(",")[3]) == pytest.approx(0.4375, abs=1e-12)
    code, report = sfdlm.grad_check()
    assert code == 0, report
    assert "grad-check:" in report
