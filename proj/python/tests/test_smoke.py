# Copyright 2026 The ncpdrive Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import ncpdrive


def test_variants():
    assert ncpdrive.variants() == [
        "cnn",
        "cnn-ncp",
        "cnn-dncp-v1",
        "cnn-dncp-v2",
        "cnn-dncp-v3",
        "cnn-dncp-v4",
    ]


def test_preprocess_white_frame():
    x = ncpdrive.preprocess(np.full((160, 320, 3), 255, dtype=np.uint8))
    assert x.shape == (66, 200, 3)
    assert x.dtype == np.float32
    chroma = np.float32(128 / 127.5 - 1)
    assert np.all(x[..., 0] == 1.0)
    assert np.all(x[..., 1:] == chroma)


def test_synth_is_deterministic():
    a, sa = ncpdrive.synth("sunny", 4, seed=3)
    b, sb = ncpdrive.synth("sunny", 4, seed=3)
    assert a.shape == (4, 160, 320, 3)
    assert np.array_equal(a, b)
    assert np.array_equal(sa, sb)


def test_model_state_and_reset():
    model = ncpdrive.Model("cnn-ncp", seed=1)
    frames, _ = ncpdrive.synth("cloudy", 1, seed=2)
    x = ncpdrive.preprocess(frames[0])[None]
    first = model.infer(x)
    second = model.infer(x)
    assert first.shape == (1,)
    assert first[0] != second[0]
    model.reset()
    assert model.infer(x)[0] == first[0]


def test_checkpoint_round_trip(tmp_path):
    model = ncpdrive.Model("cnn-dncp-v2", seed=5)
    path = tmp_path / "m.ncpd"
    model.save(path)
    back = ncpdrive.Model.load(path)
    assert back.variant == "cnn-dncp-v2"
    assert back.to_bytes() == model.to_bytes()
    assert back.wiring_text() == model.wiring_text() != ""


def test_run_rejects_unknown_key():
    with pytest.raises(ncpdrive.ConfigError):
        ncpdrive.run("synth", {"no_such_key": 1})


def test_run_synth_and_train(tmp_path):
    data = tmp_path / "data"
    rc, _ = ncpdrive.run("synth", {"frames": 24, "seed": 1, "out": data})
    assert rc == 0
    rc, log = ncpdrive.run(
        "train",
        {"model": "cnn", "data": data, "epochs": 1, "segment": 12, "out": tmp_path / "run"},
    )
    assert rc == 0
    assert (tmp_path / "run" / "model.ncpd").exists()
