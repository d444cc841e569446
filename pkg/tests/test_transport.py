import math
import threading

import numpy as np
import pytest

from phasebc import protocol as proto
from phasebc import transport as tp
from phasebc.codestates import CodeParams, build_sigma
from phasebc.fock import helstrom_success
from phasebc.security import pcb_bound


def make_params(**kw):
    defaults = dict(energy=1.0, M=8, k=4)
    defaults.update(kw)
    return proto.ProtocolParams(**defaults)


class TestWireFormat:
    def sample_messages(self):
        return [
            tp.WireMessage("HELLO", "s", {"role": "alice", "energy": 1.0,
                                          "modulation": 8, "repetitions": 2,
                                          "epsilon": 0.01, "tau": 1.0}),
            tp.WireMessage("COMMIT", "s", {"amplitudes": [[0.1, -0.2], [1.0, 0.0]]}),
            tp.WireMessage("OPEN", "s", {"bit": 1, "phases": [3, 7]}),
            tp.WireMessage("VERDICT", "s", {"accepted": False, "counts": [0, 2]}),
            tp.WireMessage("ABORT", "s", {"reason": "x"}),
        ]

    def test_round_trip_every_kind(self):
        for msg in self.sample_messages():
            assert tp.decode_line(tp.encode(msg)) == msg

    def test_unknown_kind(self):
        with pytest.raises(tp.DecodeError):
            tp.decode_line(b'{"kind": "NOPE", "session": "s"}\n')

    def test_non_object_line(self):
        with pytest.raises(tp.DecodeError):
            tp.decode_line(b"[1, 2]\n")
        with pytest.raises(tp.DecodeError):
            tp.decode_line(b'{"kind": "HELLO"}\n')  # missing session id

    def test_malformed_line_offset(self):
        first = tp.encode(self.sample_messages()[0])
        data = first + b"{broken\n"
        with pytest.raises(tp.DecodeError) as err:
            tp.decode_stream(data)
        assert err.value.offset == len(first)

    def test_amplitudes_bit_exact(self):
        rng = np.random.default_rng(0)
        amps = rng.normal(size=12) + 1j * rng.normal(size=12)
        msg = tp.WireMessage("COMMIT", "s",
                             {"amplitudes": [[a.real, a.imag] for a in amps]})
        back = tp.decode_line(tp.encode(msg))
        decoded = np.array([complex(re, im) for re, im in back.body["amplitudes"]])
        assert np.array_equal(decoded, amps)

    def test_stream_round_trip(self):
        msgs = self.sample_messages()
        data = b"".join(tp.encode(m) for m in msgs)
        assert tp.decode_stream(data) == msgs

    def test_float_round_trip_fuzz(self):
        import struct

        rng = np.random.default_rng(13)
        values = np.concatenate([
            rng.normal(size=300),
            np.exp(rng.uniform(-700, 700, size=300)) * rng.choice([-1, 1], 300),
            np.array([0.0, -0.0, 5e-324, -5e-324, 1.7976931348623157e308,
                      2.2250738585072014e-308]),
        ])
        msg = tp.WireMessage("COMMIT", "s",
                             {"amplitudes": [[float(v), 0.0] for v in values]})
        back = tp.decode_line(tp.encode(msg))
        for original, (re, _) in zip(values, back.body["amplitudes"]):
            a = struct.pack("<d", float(original))
            b = struct.pack("<d", float(re))
            assert a == b, original


class TestSessions:
    def test_honest_loopback_accepts(self):
        t = tp.run_session(proto.HonestAlice(0), tp.HonestBob(), make_params(), seed=1)
        assert t.verdict.accepted and not t.aborted
        assert [m.kind for m in t.messages] == ["HELLO", "HELLO", "COMMIT",
                                                "OPEN", "VERDICT"]

    def test_tcp_equals_loopback(self):
        for seed in (0, 1, 2):
            a = tp.run_session(proto.HonestAlice(1), tp.HonestBob(), make_params(),
                               seed=seed)
            b = tp.run_session(proto.HonestAlice(1), tp.HonestBob(), make_params(),
                               seed=seed, transport="tcp")
            assert a.to_bytes() == b.to_bytes()

    def test_replay_byte_identical(self):
        a = tp.run_session(proto.CheatOpenAlice(0), tp.HonestBob(), make_params(),
                           seed=9)
        b = tp.run_session(proto.CheatOpenAlice(0), tp.HonestBob(), make_params(),
                           seed=9)
        assert a.to_bytes() == b.to_bytes()

    def test_transcript_decodes_to_messages(self):
        t = tp.run_session(proto.HonestAlice(0), tp.HonestBob(), make_params(), seed=4)
        assert tuple(tp.decode_stream(t.to_bytes())) == t.messages

    def test_parameter_mismatch_aborts(self):
        t = tp.run_session(proto.HonestAlice(0), tp.HonestBob(), make_params(),
                           seed=1, bob_params=make_params(k=5))
        assert t.aborted and t.verdict is None
        assert "parameter mismatch" in t.abort_reason
        assert [m.kind for m in t.messages] == ["HELLO", "ABORT"]

    def test_lossy_channel_still_accepts(self):
        # pre-compensation keeps residuals at rounding scale, counts stay zero
        params = make_params(tau=0.5)
        channel = tp.ChannelModel(tau=0.5)
        for seed in range(20):
            t = tp.run_session(proto.HonestAlice(0), tp.HonestBob(), params,
                               channel=channel, seed=seed)
            assert t.verdict.accepted

    def test_default_channel_follows_params_tau(self):
        params = make_params(tau=0.25)
        for seed in range(10):
            t = tp.run_session(proto.HonestAlice(1), tp.HonestBob(), params,
                               seed=seed)
            assert t.verdict.accepted
        commit = next(m for m in t.messages if m.kind == "COMMIT")
        received = np.array([complex(re, im) for re, im in
                             commit.body["amplitudes"]])
        assert np.abs(np.abs(received) ** 2 - params.energy).max() < 1e-12

    def test_serve_connect_sockets(self):
        params = make_params()
        results = {}

        # race-free enough for a test: grab a free port, then listen on it
        import socket as socketlib

        srv = socketlib.create_server(("127.0.0.1", 0))
        port = srv.getsockname()[1]
        srv.close()

        def serve_on_port():
            results["bob"] = tp.serve_single_session("127.0.0.1", port,
                                                     tp.HonestBob(), params, seed=3)

        thread = threading.Thread(target=serve_on_port)
        thread.start()
        import time

        alice_t = None
        for _ in range(50):  # wait for the listener to come up
            try:
                alice_t = tp.connect_single_session("127.0.0.1", port,
                                                    proto.HonestAlice(0),
                                                    params, seed=3)
                break
            except OSError:
                time.sleep(0.1)
        thread.join(10.0)
        assert alice_t is not None and alice_t.verdict.accepted
        assert results["bob"].to_bytes() == alice_t.to_bytes()


class TestStateMachine:
    def bob(self, params=None):
        return tp.BobSession(tp.HonestBob(), params or make_params(),
                             tp.ChannelModel(), np.random.default_rng(0), "s")

    def test_out_of_order_aborts(self):
        bob = self.bob()
        replies = bob.handle(tp.WireMessage("OPEN", "s", {"bit": 0, "phases": [0]}))
        assert len(replies) == 1 and replies[0].kind == "ABORT"
        assert "protocol-state error" in replies[0].body["reason"]

    def test_abort_is_terminal(self):
        bob = self.bob()
        bob.handle(tp.WireMessage("OPEN", "s", {"bit": 0, "phases": [0]}))
        with pytest.raises(tp.ProtocolStateError):
            bob.handle(tp.WireMessage("HELLO", "s", {}))

    def test_session_id_mismatch(self):
        bob = self.bob()
        replies = bob.handle(tp.WireMessage("HELLO", "other", {}))
        assert replies[0].kind == "ABORT"

    def feed_to_open_state(self, bob, k=4):
        hello = tp.WireMessage("HELLO", "s", tp._params_body(make_params(k=k), "alice"))
        bob.handle(hello)
        amps = [[1.0, 0.0]] * k
        bob.handle(tp.WireMessage("COMMIT", "s", {"amplitudes": amps}))

    def test_malformed_commit_body_aborts(self):
        bob = self.bob()
        bob.handle(tp.WireMessage("HELLO", "s",
                                  tp._params_body(make_params(), "alice")))
        replies = bob.handle(tp.WireMessage("COMMIT", "s", {"nope": 1}))
        assert replies[0].kind == "ABORT"
        assert "malformed COMMIT" in replies[0].body["reason"]

    def test_out_of_range_phase_aborts(self):
        bob = self.bob()
        self.feed_to_open_state(bob)
        replies = bob.handle(tp.WireMessage("OPEN", "s",
                                            {"bit": 0, "phases": [0, 1, 2, 99]}))
        assert replies[0].kind == "ABORT"
        assert "malformed reveal" in replies[0].body["reason"]

    def test_missing_open_keys_abort(self):
        bob = self.bob()
        self.feed_to_open_state(bob)
        replies = bob.handle(tp.WireMessage("OPEN", "s", {"bit": 0}))
        assert replies[0].kind == "ABORT"
        assert "malformed OPEN" in replies[0].body["reason"]

    def test_random_message_sequences_never_crash(self):
        # any valid-kind garbage either advances the session or aborts it
        rng = np.random.default_rng(99)
        bodies = [
            {}, {"bit": 7}, {"amplitudes": "zzz"}, {"phases": [1, 2]},
            {"amplitudes": [[1.0, 0.0]]}, {"accepted": True},
            {"reason": "fuzz"}, {"counts": [0]},
            tp._params_body(make_params(), "alice"),
        ]
        for trial in range(300):
            bob = self.bob()
            alice = tp.AliceSession(proto.HonestAlice(0), make_params(),
                                    tp.ChannelModel(), np.random.default_rng(trial),
                                    "s")
            alice.start()
            for session in (bob, alice):
                while not session.done:
                    kind = tp.KINDS[rng.integers(0, len(tp.KINDS))]
                    body = bodies[rng.integers(0, len(bodies))]
                    replies = session.handle(tp.WireMessage(kind, "s", dict(body)))
                    assert all(isinstance(r, tp.WireMessage) for r in replies)
                with pytest.raises(tp.ProtocolStateError):
                    session.handle(tp.WireMessage("ABORT", "s", {}))

    def test_alice_rejects_unexpected_kind(self):
        alice = tp.AliceSession(proto.HonestAlice(0), make_params(),
                                tp.ChannelModel(), np.random.default_rng(0), "s")
        alice.start()
        replies = alice.handle(tp.WireMessage("VERDICT", "s",
                                              {"accepted": True, "counts": []}))
        assert replies[0].kind == "ABORT"
        with pytest.raises(tp.ProtocolStateError):
            alice.handle(tp.WireMessage("HELLO", "s", {}))


class TestSealing:
    def test_honest_strategy_gets_sealed_payload_only(self):
        seen = {}

        class Probe(tp.HonestBob):
            def observe_commit(self, payload, params, rng):
                seen["payload"] = payload

        tp.run_session(proto.HonestAlice(0), Probe(), make_params(), seed=0)
        payload = seen["payload"]
        assert payload.sealed
        public = [n for n in dir(payload) if not n.startswith("_")]
        assert sorted(public) == ["count_after_displacement", "sealed"]

    def test_honest_strategy_never_offered_raw_amplitudes(self):
        with pytest.raises(tp.ProtocolStateError):
            tp.run_session(proto.HonestAlice(0), tp.HonestBob(), make_params(),
                           channel=tp.ChannelModel(adversarial_bob=True), seed=0)


class TestAdversarialBob:
    def test_helstrom_guess_rate_below_bound(self):
        code = CodeParams.from_energy(1.0, 8)
        params = make_params(M=8, k=1)
        bob = tp.HelstromBob(code)
        alice = proto.RandomBitAlice()
        channel = tp.ChannelModel(adversarial_bob=True)
        n = 10 ** 4
        hits = 0
        for i in range(n):
            t = tp.run_session(alice, bob, params, channel=channel, seed=(50, i),
                               session_id=f"s{i}")
            opened = next(m for m in t.messages if m.kind == "OPEN")
            hits += int(bob.guesses[-1] == opened.body["bit"])
        rate = hits / n
        sigma = math.sqrt(0.25 / n)
        optimum = helstrom_success(build_sigma(0, code), build_sigma(1, code))
        assert rate <= 0.5 + pcb_bound(1.0, 8, 1) / 2.0 + 3.0 * sigma
        assert abs(rate - optimum) <= 5.0 * sigma


class TestChannelModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            tp.ChannelModel(tau=0.0)
        with pytest.raises(ValueError):
            tp.ChannelModel(tau=1.5)


class TestFullSessionAttackLaw:
    def test_cheat_open_sessions_match_pca(self):
        # end-to-end sessions, not the vectorized sampler
        from phasebc.security import pca_exact

        params = make_params(M=4, k=10)
        p = pca_exact(params.energy, params.k, params.M)
        n = 10 ** 5
        hits = 0
        alice = proto.CheatOpenAlice(0)
        for i in range(n):
            t = tp.run_protocol(alice, params, seed=(31, i), session_id=f"c{i}")
            hits += int(t.verdict.accepted)
        sigma = math.sqrt(max(p * (1 - p), 1.0 / n) / n)
        assert abs(hits / n - p) <= 3.0 * sigma
