import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import golden_doc
from wavepipe import generate, make_config, parse_action_list, serialize_action_list
from wavepipe.core import Action, ActionKind, ConfigError, ParseError, Payload, Scheme


class TestMakeConfig:
    def test_hanayo_two_waves_has_sixteen_stages(self):
        assert make_config("hanayo", 4, 4, 2, 1).S == 16

    def test_single_worker(self):
        assert make_config("gpipe", 1, 1, 1, 1).S == 1

    def test_chimera_rejects_odd_devices(self):
        with pytest.raises(ConfigError, match="P must be even"):
            make_config("chimera", 3, 4)

    def test_rejects_odd_microbatches_for_bidirectional(self):
        with pytest.raises(ConfigError, match="B must be even"):
            make_config("chimera-wave", 4, 5)

    def test_rejects_underfilled_pipeline(self):
        with pytest.raises(ConfigError):
            make_config("dapple", 4, 3)

    def test_rejects_waves_for_classic_schemes(self):
        with pytest.raises(ConfigError):
            make_config("gpipe", 4, 4, 2)

    @pytest.mark.parametrize("bad", [0, -1])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ConfigError):
            make_config("gpipe", bad, 4)

    def test_stage_counts(self):
        assert make_config("chimera", 4, 4).S == 4
        assert make_config("dapple", 8, 8).S == 8
        assert make_config("hanayo", 8, 8, 4).S == 64

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError, match="unknown scheme"):
            make_config("pipedream", 4, 4)

    def test_aliases(self):
        assert Scheme.parse("1F1B") is Scheme.DAPPLE
        assert Scheme.parse("chimera_wave") is Scheme.CHIMERA_WAVE

    def test_chimera_halves(self):
        cfg = make_config("chimera", 4, 6)
        assert [cfg.group_of(b) for b in range(6)] == [0, 0, 0, 1, 1, 1]
        assert [cfg.local_index(b) for b in range(6)] == [0, 1, 2, 0, 1, 2]


def test_action_rejects_peer_on_compute():
    with pytest.raises(ValueError):
        Action(ActionKind.FORWARD, 0, 0, 0, peer=1)


def test_action_requires_peer_on_comm():
    with pytest.raises(ValueError):
        Action(ActionKind.SEND, 0, 0, 0, payload=Payload.ACTIVATION)


class TestSerialization:
    def test_round_trip_gpipe(self):
        alist = generate("gpipe", 2, 2)
        again = parse_action_list(serialize_action_list(alist))
        assert again == alist

    @settings(max_examples=25, deadline=None)
    @given(st.sampled_from(["gpipe", "dapple", "chimera", "chimera-wave", "hanayo"]),
           st.sampled_from([2, 4]), st.integers(1, 2), st.integers(1, 3))
    def test_round_trip_generated(self, scheme, P, mult, W):
        if scheme not in ("hanayo", "chimera-wave"):
            W = 1
        alist = generate(scheme, P, P * mult, W)
        blob = serialize_action_list(alist)
        assert parse_action_list(blob) == alist
        assert serialize_action_list(parse_action_list(blob)) == blob

    def test_fractions_survive(self):
        alist = generate("hanayo", 2, 2, 2)
        again = parse_action_list(serialize_action_list(alist))
        assert again.placement.slices(0)[0].fraction == Fraction(1, 4)

    def test_peer_out_of_range(self):
        doc = golden_doc("gpipe_P2_B2")
        send = next(a for a in doc["actions"][0] if a["kind"] == "send")
        send["peer"] = 2
        with pytest.raises(ParseError, match="peer rank out of range") as err:
            parse_action_list(json.dumps(doc))
        assert "/actions/0/" in str(err.value)

    def test_unknown_kind(self):
        doc = golden_doc("gpipe_P2_B2")
        doc["actions"][1][0]["kind"] = "allreduce"
        with pytest.raises(ParseError, match="kind"):
            parse_action_list(json.dumps(doc))

    def test_missing_field(self):
        doc = golden_doc("gpipe_P2_B2")
        del doc["actions"][0][0]["slice_index"]
        with pytest.raises(ParseError, match="slice_index"):
            parse_action_list(json.dumps(doc))

    def test_unknown_field(self):
        doc = golden_doc("gpipe_P2_B2")
        doc["actions"][0][0]["color"] = "green"
        with pytest.raises(ParseError, match="color"):
            parse_action_list(json.dumps(doc))

    def test_missing_optimizer_step_fails_on_load(self):
        doc = golden_doc("gpipe_P2_B2")
        assert doc["actions"][0][-1]["kind"] == "optimizer_step"
        doc["actions"][0].pop()
        with pytest.raises(ParseError, match="missing flush"):
            parse_action_list(json.dumps(doc))

    def test_truncated(self):
        blob = serialize_action_list(generate("gpipe", 2, 2))
        with pytest.raises(ParseError, match="invalid JSON"):
            parse_action_list(blob[:50])

    def test_field_order_is_not_significant(self):
        doc = golden_doc("gpipe_P2_B2")
        shuffled = {k: doc[k] for k in reversed(list(doc))}
        assert parse_action_list(json.dumps(shuffled)) == parse_action_list(json.dumps(doc))
