import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from splitmesh.errors import EmptyModel, ShapeMismatch, TooShallow, UnknownPreset
from splitmesh.model import (PRESETS, SCALES, ModelSpec, hidden_groups, init_networks, join_plan, plan_hash,
                             preset, split_model, validate_model)
from splitmesh.nn import Activation, Conv2D, Dense, Flatten, MaxPool2D, Network
from splitmesh.nn.losses import LossKind
from splitmesh.rng import SplitMix64

GOLDEN = json.loads((Path(__file__).parent / "golden" / "reference_models.json").read_text())


def test_covid_trace_ends_scalar():
    spec, _ = preset("covid", "paper")
    shapes = validate_model(spec)
    assert spec.input_shape == (1, 64, 64)
    assert shapes[-1] == (1,)


def test_mismatched_in_features():
    spec = ModelSpec([Dense(5), Dense(10, in_features=4), Dense(1)], (3,))
    with pytest.raises(ShapeMismatch, match="layer 1"):
        validate_model(spec)


def test_empty_model():
    with pytest.raises(EmptyModel):
        validate_model(ModelSpec([], (3,)))


def test_too_shallow():
    with pytest.raises(TooShallow):
        split_model(ModelSpec([Dense(1), Activation("sigmoid")], (3,)))


def test_non_scalar_output_rejected():
    with pytest.raises(ShapeMismatch):
        validate_model(ModelSpec([Dense(2)], (3,)))


@pytest.mark.parametrize("name,client,server", [("covid", 1, 4), ("mura", 1, 19), ("cholesterol", 1, 2)])
@pytest.mark.parametrize("scale", SCALES)
def test_split_counts(name, client, server, scale):
    spec, _ = preset(name, scale)
    plan = split_model(spec)
    assert len(hidden_groups(plan.client_segment.layers)) == client
    assert len(hidden_groups(plan.server_segment.layers)) == server
    assert join_plan(plan) == spec.layers


@pytest.mark.parametrize("name", PRESETS)
def test_golden_table(name):
    g = GOLDEN[name]
    spec, tc = preset(name, "paper")
    assert tc.epochs == g["epochs"]
    assert tc.batch_size == g["batch_size"]
    assert tc.loss.value == g["loss"] == spec.loss.value
    assert list(spec.input_shape) == g["input_size"]
    acts = {l.fn for l in spec.layers if isinstance(l, Activation)}
    hidden_acts = {l.fn for grp in hidden_groups(spec.layers)[:-1] for l in grp if isinstance(l, Activation)}
    assert hidden_acts == {g["activation"]}
    assert acts <= {g["activation"], "sigmoid"}
    assert len(hidden_groups(spec.layers)) == g["hidden_groups"]


def test_mura_server_has_vgg19_weight_layers():
    spec, _ = preset("mura", "paper")
    server = split_model(spec).server_segment.layers
    assert sum(isinstance(l, Conv2D) for l in server) == GOLDEN["mura"]["server_conv"]
    assert sum(isinstance(l, Dense) for l in server) == GOLDEN["mura"]["server_dense"]


def test_preset_examples():
    assert preset("covid", "paper")[1].batch_size == 64
    spec, tc = preset("cholesterol", "paper")
    assert tc.loss is LossKind.MSE
    assert all(l.fn == "leaky_relu" for l in spec.layers if isinstance(l, Activation))
    with pytest.raises(UnknownPreset):
        preset("nope")
    with pytest.raises(UnknownPreset):
        preset("covid", "huge")


@pytest.mark.parametrize("name", PRESETS)
def test_json_round_trip(name):
    spec, _ = preset(name, "desk")
    again = ModelSpec.from_json(spec.to_json())
    assert again == spec
    assert plan_hash(again) == plan_hash(spec)


layer_lists = st.lists(st.sampled_from([Dense(3), Dense(2), Activation("sigmoid"),
                                        Activation("leaky_relu", 0.2)]), min_size=0, max_size=6)


@given(layer_lists, layer_lists)
def test_split_join_identity(a, b):
    layers = [Dense(4)] + a + [Dense(5)] + b + [Dense(1)]
    plan = split_model(ModelSpec(layers, (3,), LossKind.MSE))
    assert join_plan(plan) == tuple(layers)
    assert len(hidden_groups(plan.client_segment.layers)) == 1


@pytest.mark.parametrize("name", PRESETS)
def test_split_forward_equals_unsplit(name):
    spec, _ = preset(name, "desk")
    plan = split_model(spec)
    client, server = init_networks(plan, 11)
    full = Network.build(spec.layers, spec.input_shape, SplitMix64(11))
    x = SplitMix64(5).normal_array(4 * int(np.prod(spec.input_shape))).reshape((4,) + spec.input_shape)
    y_split = server.forward(client.forward(x)[0])[0]
    y_full = full.forward(x)[0]
    assert y_split.tobytes() == y_full.tobytes()


def test_image_group_is_conv_act_pool():
    spec, _ = preset("covid", "desk")
    first = hidden_groups(spec.layers)[0]
    assert [type(l) for l in first] == [Conv2D, Activation, MaxPool2D]
    assert sum(isinstance(l, Flatten) for l in spec.layers) == 1
