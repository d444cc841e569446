"""Wire schema and two-party session runner.

Messages are single JSON objects, one per line, with a kind tag; floats
are printed with 17 significant digits so decoding reproduces them bit
for bit.  The same endpoint state machines run either over an in-process
loopback or over a TCP stream, and both log the session's messages in
wire order, so transcripts are byte-identical across backends for equal
seeds.

The commitment payload travels on the wire (this is a simulation), but
the receiving endpoint hands its strategy a sealed object whose only
public operation is displace-and-count.  Raw amplitudes reach a receiver
strategy only when the channel model is explicitly marked adversarial,
which exists to validate the concealment bound empirically.
"""

from __future__ import annotations

import json
import math
import socket
import threading
from dataclasses import dataclass

import numpy as np

from . import protocol as proto
from .codestates import CodeParams, build_sigma
from .fock import coherent_vector

KINDS = ("HELLO", "COMMIT", "OPEN", "VERDICT", "ABORT")


class DecodeError(Exception):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ProtocolStateError(Exception):
    """A message arrived that the session state machine cannot accept."""


@dataclass(frozen=True)
class WireMessage:
    kind: str
    session_id: str
    body: dict

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")


@dataclass(frozen=True)
class ChannelModel:
    """Link transmittivity plus the adversarial-receiver switch.

    Only the session runner constructs one of these; strategies never see
    it, mirroring a provider-secured line.
    """

    tau: float = 1.0
    adversarial_bob: bool = False

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"transmittivity must lie in (0,1], got {self.tau}")


def _format_value(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite float in message")
        if x == 0.0:
            # format() drops the sign of -0.0 and json reads bare 0 as int
            return "-0.0" if math.copysign(1.0, x) < 0 else "0.0"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_format_value(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}:{_format_value(v)}" for k, v in obj.items())
        return "{" + ",".join(items) + "}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def format_document(doc) -> str:
    """One structure as a single JSON text, floats at 17 significant digits."""
    return _format_value(doc)


def encode(message: WireMessage) -> bytes:
    doc = {"kind": message.kind, "session": message.session_id}
    doc.update(message.body)
    return (format_document(doc) + "\n").encode("utf-8")


def decode_line(line: bytes, offset: int = 0) -> WireMessage:
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"malformed message line: {exc}", offset) from exc
    if not isinstance(doc, dict):
        raise DecodeError("message is not an object", offset)
    kind = doc.pop("kind", None)
    session = doc.pop("session", None)
    if kind not in KINDS:
        raise DecodeError(f"unknown kind tag {kind!r}", offset)
    if not isinstance(session, str):
        raise DecodeError("missing session id", offset)
    return WireMessage(kind, session, doc)


def decode_stream(data: bytes) -> list[WireMessage]:
    messages = []
    offset = 0
    for line in data.split(b"\n"):
        if line:
            messages.append(decode_line(line, offset))
        offset += len(line) + 1
    return messages


@dataclass(frozen=True)
class SessionTranscript:
    session_id: str
    messages: tuple[WireMessage, ...]
    verdict: proto.Verdict | None
    aborted: bool = False
    abort_reason: str = ""

    def to_bytes(self) -> bytes:
        return b"".join(encode(m) for m in self.messages)


def _params_body(params: proto.ProtocolParams, role: str) -> dict:
    return {
        "role": role,
        "energy": params.energy,
        "modulation": params.M,
        "repetitions": params.k,
        "epsilon": params.epsilon,
        "tau": params.tau,
    }


def _params_match(body: dict, params: proto.ProtocolParams) -> bool:
    return (
        body.get("energy") == params.energy
        and body.get("modulation") == params.M
        and body.get("repetitions") == params.k
        and body.get("epsilon") == params.epsilon
        and body.get("tau") == params.tau
    )


class BobStrategy:
    """Receiver behavior; the honest one only ever displaces and counts."""

    name = "honest"

    def observe_commit(self, payload: proto.QuantumPayload,
                       params: proto.ProtocolParams,
                       rng: np.random.Generator) -> None:
        pass

    def observe_raw_amplitudes(self, amplitudes: np.ndarray,
                               params: proto.ProtocolParams,
                               rng: np.random.Generator) -> None:
        raise ProtocolStateError("honest receiver must not see raw amplitudes")

    def verify(self, payload, revealed, params, rng) -> proto.Verdict:
        return proto.bob_verify(payload, revealed, params, rng)


class HonestBob(BobStrategy):
    pass


class HelstromBob(BobStrategy):
    """Adversarial receiver guessing the bit from the commitment alone.

    Applies the optimal two-state measurement for sigma_0 vs sigma_1 to
    the single received mode (k = 1 only).  Guesses are appended to
    .guesses so a caller can tally them against the opened bits.
    """

    name = "helstrom"

    def __init__(self, code_params: CodeParams):
        sigma0 = build_sigma(0, code_params).matrix
        sigma1 = build_sigma(1, code_params).matrix
        vals, vecs = np.linalg.eigh(sigma0 - sigma1)
        plus = vecs[:, vals > 0]
        self._projector = plus @ plus.conj().T
        self._cutoff = code_params.cutoff
        self.guesses: list[int] = []

    def observe_raw_amplitudes(self, amplitudes, params, rng):
        if amplitudes.size != 1:
            raise ValueError("Helstrom receiver handles single-mode sessions only")
        v = coherent_vector(complex(amplitudes[0]), self._cutoff).amps
        p_zero = float(np.real(np.vdot(v, self._projector @ v)))
        self.guesses.append(0 if rng.random() < p_zero else 1)


class AliceSession:
    """Sender state machine; drives the session."""

    def __init__(self, strategy: proto.AliceStrategy, params: proto.ProtocolParams,
                 channel: ChannelModel, rng: np.random.Generator, session_id: str):
        self.strategy = strategy
        self.params = params
        self.channel = channel
        self.rng = rng
        self.session_id = session_id
        self.state = "init"
        self.verdict: proto.Verdict | None = None
        self.abort_reason = ""
        self.commitment: proto.Commitment | None = None

    def _msg(self, kind: str, body: dict) -> WireMessage:
        return WireMessage(kind, self.session_id, body)

    def _abort(self, reason: str) -> list[WireMessage]:
        self.state = "aborted"
        self.abort_reason = reason
        return [self._msg("ABORT", {"reason": reason})]

    @property
    def done(self) -> bool:
        return self.state in ("done", "aborted")

    def start(self) -> list[WireMessage]:
        if self.state != "init":
            raise ProtocolStateError("session already started")
        self.state = "wait_hello"
        return [self._msg("HELLO", _params_body(self.params, "alice"))]

    def handle(self, message: WireMessage) -> list[WireMessage]:
        if self.done:
            raise ProtocolStateError("session is terminal")
        if message.session_id != self.session_id:
            return self._abort("session id mismatch")
        if message.kind == "ABORT":
            self.state = "aborted"
            self.abort_reason = str(message.body.get("reason", ""))
            return []
        if self.state == "wait_hello":
            if message.kind != "HELLO":
                return self._abort(f"expected HELLO, got {message.kind}")
            if not _params_match(message.body, self.params):
                return self._abort("parameter mismatch in HELLO")
            bit = self.strategy.commitment_bit(self.params, self.rng)
            self.commitment, payload = proto.commit(bit, self.params, self.rng)
            received = proto.scale_payload(payload, math.sqrt(self.channel.tau))
            amps = proto._raw_amplitudes(received)
            revealed_b, revealed_m = self.strategy.reveal(self.commitment)
            self.state = "wait_verdict"
            return [
                self._msg("COMMIT", {
                    "amplitudes": [[a.real, a.imag] for a in amps],
                }),
                self._msg("OPEN", {"bit": revealed_b, "phases": list(revealed_m)}),
            ]
        if self.state == "wait_verdict":
            if message.kind != "VERDICT":
                return self._abort(f"expected VERDICT, got {message.kind}")
            try:
                self.verdict = proto.Verdict(bool(message.body["accepted"]),
                                             tuple(message.body["counts"]))
            except (KeyError, TypeError, ValueError):
                return self._abort("malformed VERDICT body")
            self.state = "done"
            return []
        raise ProtocolStateError(f"unhandled state {self.state}")


class BobSession:
    """Receiver state machine; responds to the sender's messages."""

    def __init__(self, strategy: BobStrategy, params: proto.ProtocolParams,
                 channel: ChannelModel, rng: np.random.Generator, session_id: str):
        self.strategy = strategy
        self.params = params
        self.channel = channel
        self.rng = rng
        self.session_id = session_id
        self.state = "wait_hello"
        self.verdict: proto.Verdict | None = None
        self.abort_reason = ""
        self._payload: proto.QuantumPayload | None = None

    def _msg(self, kind: str, body: dict) -> WireMessage:
        return WireMessage(kind, self.session_id, body)

    def _abort(self, reason: str) -> list[WireMessage]:
        self.state = "aborted"
        self.abort_reason = reason
        return [self._msg("ABORT", {"reason": reason})]

    @property
    def done(self) -> bool:
        return self.state in ("done", "aborted")

    def handle(self, message: WireMessage) -> list[WireMessage]:
        if self.done:
            raise ProtocolStateError("session is terminal")
        if message.session_id != self.session_id:
            return self._abort("session id mismatch")
        if message.kind == "ABORT":
            self.state = "aborted"
            self.abort_reason = str(message.body.get("reason", ""))
            return []
        if message.kind != {"wait_hello": "HELLO", "wait_commit": "COMMIT",
                            "wait_open": "OPEN"}[self.state]:
            return self._abort(
                f"protocol-state error: {message.kind} arrived in state {self.state}"
            )
        if self.state == "wait_hello":
            if not _params_match(message.body, self.params):
                return self._abort("parameter mismatch in HELLO")
            self.state = "wait_commit"
            return [self._msg("HELLO", _params_body(self.params, "bob"))]
        if self.state == "wait_commit":
            try:
                pairs = message.body["amplitudes"]
                amps = np.array([complex(re, im) for re, im in pairs])
            except (KeyError, TypeError, ValueError):
                return self._abort("malformed COMMIT body")
            if amps.size != self.params.k:
                return self._abort("payload length mismatch")
            self._payload = proto.QuantumPayload(amps)
            if self.channel.adversarial_bob:
                self.strategy.observe_raw_amplitudes(amps, self.params, self.rng)
            else:
                self.strategy.observe_commit(self._payload, self.params, self.rng)
            self.state = "wait_open"
            return []
        try:
            revealed = (int(message.body["bit"]), tuple(message.body["phases"]))
        except (KeyError, TypeError, ValueError):
            return self._abort("malformed OPEN body")
        try:
            self.verdict = self.strategy.verify(self._payload, revealed,
                                                self.params, self.rng)
        except proto.ProtocolAbort as exc:
            return self._abort(str(exc))
        self.state = "done"
        return [self._msg("VERDICT", {
            "accepted": self.verdict.accepted,
            "counts": list(self.verdict.counts),
        })]


def _spawn_rngs(seed) -> tuple[np.random.Generator, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def _finish(alice: AliceSession, bob: BobSession, log: list[WireMessage],
            session_id: str) -> SessionTranscript:
    aborted = alice.state == "aborted" or bob.state == "aborted"
    reason = alice.abort_reason or bob.abort_reason
    return SessionTranscript(session_id, tuple(log), bob.verdict or alice.verdict,
                             aborted, reason)


def run_session(alice_strategy: proto.AliceStrategy, bob_strategy: BobStrategy,
                params: proto.ProtocolParams, channel: ChannelModel | None = None,
                seed=0, session_id: str = "session-0",
                transport: str = "loopback",
                bob_params: proto.ProtocolParams | None = None) -> SessionTranscript:
    """Run one full session and return its transcript.

    transport="loopback" pumps the two state machines in process;
    transport="tcp" runs the receiver on a localhost socket in a thread.
    Transcripts are identical between the two for equal seeds.  The
    default channel matches the transmittivity the sender pre-compensates
    for.
    """
    channel = channel or ChannelModel(tau=params.tau)
    alice_rng, bob_rng = _spawn_rngs(seed)
    alice = AliceSession(alice_strategy, params, channel, alice_rng, session_id)
    bob = BobSession(bob_strategy, bob_params or params, channel, bob_rng, session_id)
    if transport == "loopback":
        return _run_loopback(alice, bob, session_id)
    if transport == "tcp":
        return _run_tcp(alice, bob, session_id)
    raise ValueError(f"unknown transport {transport!r}")


def run_protocol(alice_strategy: proto.AliceStrategy, params: proto.ProtocolParams,
                 seed=0, bob_strategy: BobStrategy | None = None,
                 channel: ChannelModel | None = None,
                 session_id: str = "session-0") -> SessionTranscript:
    """Loopback session with an honest receiver by default."""
    return run_session(alice_strategy, bob_strategy or HonestBob(), params,
                       channel, seed, session_id, transport="loopback")


def _run_loopback(alice: AliceSession, bob: BobSession,
                  session_id: str) -> SessionTranscript:
    log: list[WireMessage] = []
    to_bob = list(alice.start())
    log.extend(to_bob)
    while to_bob and not (alice.done and bob.done):
        to_alice: list[WireMessage] = []
        for msg in to_bob:
            if bob.done:
                break
            replies = bob.handle(msg)
            log.extend(replies)
            to_alice.extend(replies)
        to_bob = []
        for msg in to_alice:
            if alice.done:
                break
            replies = alice.handle(msg)
            log.extend(replies)
            to_bob.extend(replies)
    return _finish(alice, bob, log, session_id)


class _LineStream:
    def __init__(self, sock: socket.socket):
        sock.settimeout(30.0)
        self._rfile = sock.makefile("rb")
        self._wfile = sock.makefile("wb")

    def send(self, data: bytes) -> None:
        self._wfile.write(data)
        self._wfile.flush()

    def recv(self) -> bytes:
        line = self._rfile.readline()
        if not line:
            raise ProtocolStateError("stream closed mid-session")
        return line


def _drive_responder(session: BobSession, stream: _LineStream) -> list[WireMessage]:
    log: list[WireMessage] = []
    while not session.done:
        msg = decode_line(stream.recv())
        log.append(msg)
        for reply in session.handle(msg):
            stream.send(encode(reply))
            log.append(reply)
    return log


def _drive_initiator(session: AliceSession, stream: _LineStream) -> list[WireMessage]:
    log: list[WireMessage] = []
    for msg in session.start():
        stream.send(encode(msg))
        log.append(msg)
    while not session.done:
        msg = decode_line(stream.recv())
        log.append(msg)
        for reply in session.handle(msg):
            stream.send(encode(reply))
            log.append(reply)
    return log


def _run_tcp(alice: AliceSession, bob: BobSession,
             session_id: str) -> SessionTranscript:
    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]
    failures: list[BaseException] = []

    def serve():
        try:
            conn, _ = server.accept()
            with conn:
                _drive_responder(bob, _LineStream(conn))
        except BaseException as exc:  # surfaced after join
            failures.append(exc)

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    try:
        with socket.create_connection(("127.0.0.1", port), timeout=30.0) as sock:
            log = _drive_initiator(alice, _LineStream(sock))
        thread.join(timeout=30.0)
    finally:
        server.close()
    if failures:
        raise failures[0]
    return _finish(alice, bob, log, session_id)


def serve_single_session(host: str, port: int, bob_strategy: BobStrategy,
                         params: proto.ProtocolParams,
                         channel: ChannelModel | None = None,
                         seed=0, session_id: str = "session-0") -> SessionTranscript:
    """Accept one TCP session as the receiver (CLI --listen mode)."""
    channel = channel or ChannelModel(tau=params.tau)
    _, bob_rng = _spawn_rngs(seed)
    bob = BobSession(bob_strategy, params, channel, bob_rng, session_id)
    server = socket.create_server((host, port))
    try:
        conn, _ = server.accept()
        with conn:
            log = _drive_responder(bob, _LineStream(conn))
    finally:
        server.close()
    return SessionTranscript(session_id, tuple(log), bob.verdict,
                             bob.state == "aborted", bob.abort_reason)


def connect_single_session(host: str, port: int, alice_strategy: proto.AliceStrategy,
                           params: proto.ProtocolParams,
                           channel: ChannelModel | None = None,
                           seed=0, session_id: str = "session-0") -> SessionTranscript:
    """Run the sender against a listening receiver (CLI --connect mode)."""
    channel = channel or ChannelModel(tau=params.tau)
    alice_rng, _ = _spawn_rngs(seed)
    alice = AliceSession(alice_strategy, params, channel, alice_rng, session_id)
    with socket.create_connection((host, port), timeout=30.0) as sock:
        log = _drive_initiator(alice, _LineStream(sock))
    return SessionTranscript(session_id, tuple(log), alice.verdict,
                             alice.state == "aborted", alice.abort_reason)
