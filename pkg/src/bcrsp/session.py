"""Three-party choreography with an auditable classical transcript.

Alice, Bob, and Charlie advance through the protocol as explicit steps of
a single deterministic event loop; every outcome announcement crosses a
simulated lossless ordered channel and lands in the transcript. Charlie
may decline to help, in which case the session aborts before any of his
measurements and the senders' leftover qudits carry no information about
the targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import StateVector, measure, states_equal
from .protocol import (
    CorrectionRule,
    OutcomeTuple,
    PhaseVector,
    ProtocolResult,
    _measurement_bases,
    _split_product_pair,
    apply_corrections,
    channel_state,
    equatorial_state,
    mod_add,
)

TRANSCRIPT_SCHEMA_VERSION = 1


class PartyId(Enum):
    ALICE = "alice"
    BOB = "bob"
    CHARLIE = "charlie"


class SessionStatus(Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    ABORTED = "aborted"


@dataclass(frozen=True)
class ClassicalMessage:
    """One outcome announcement: which measurement, which result index."""

    sender: PartyId
    receiver: PartyId
    step: int
    kind: str
    basis_label: str
    outcome_index: int


class Session:
    """One protocol execution driven by repeated advance() calls.

    Step 1 performs the senders' measurements and four announcements,
    step 2 the controller's measurements and four announcements (or the
    abort), step 3 the local corrections. The same measurement primitives
    as the bare engine are used, so equal seeds give bitwise-equal states.
    """

    def __init__(
        self,
        alice: PhaseVector,
        bob: PhaseVector,
        n: int,
        charlie_consents: bool,
        seed=None,
    ):
        if alice.dim != n or bob.dim != n:
            raise ValueError(
                f"phase vectors have dims {alice.dim}/{bob.dim}, session dim is {n}"
            )
        self.n = n
        self.alice = alice
        self.bob = bob
        self.charlie_consents = bool(charlie_consents)
        self._rng = np.random.default_rng(seed)
        self._bases = _measurement_bases(alice, bob, n)
        self.state: StateVector = channel_state(n)
        self.status = SessionStatus.RUNNING
        self.step = 0
        self.transcript: list[ClassicalMessage] = []
        self.outcomes: dict[str, int] = {}
        self.corrections: Optional[CorrectionRule] = None
        self.a1_before: Optional[StateVector] = None
        self.b2_before: Optional[StateVector] = None
        self.alice_final: Optional[StateVector] = None
        self.bob_final: Optional[StateVector] = None
        self.recovered: Optional[tuple[bool, bool]] = None

    # -- step bodies --------------------------------------------------

    def _announce(self, sender: PartyId, receiver: PartyId, label: str, index: int):
        self.transcript.append(
            ClassicalMessage(
                sender=sender,
                receiver=receiver,
                step=self.step,
                kind="outcome",
                basis_label=label,
                outcome_index=index,
            )
        )

    def _step_senders(self):
        # serialized A2-then-B1; the projectors act on disjoint qudits so
        # the order is unobservable
        l, self.state = measure(self.state, self._bases["l"], 3, self._rng)
        nn, self.state = measure(self.state, self._bases["n"], 1, self._rng)
        self.outcomes["l"] = l
        self.outcomes["n"] = nn
        self._announce(PartyId.ALICE, PartyId.BOB, "A2", l)
        self._announce(PartyId.ALICE, PartyId.CHARLIE, "A2", l)
        self._announce(PartyId.BOB, PartyId.ALICE, "B1", nn)
        self._announce(PartyId.BOB, PartyId.CHARLIE, "B1", nn)

    def _step_controller(self):
        if not self.charlie_consents:
            self.status = SessionStatus.ABORTED
            return
        m, self.state = measure(self.state, self._bases["m"], 1, self._rng)
        k, self.state = measure(self.state, self._bases["k"], 2, self._rng)
        self.outcomes["m"] = m
        self.outcomes["k"] = k
        self._announce(PartyId.CHARLIE, PartyId.ALICE, "C1", m)
        self._announce(PartyId.CHARLIE, PartyId.ALICE, "C2", k)
        self._announce(PartyId.CHARLIE, PartyId.BOB, "C1", m)
        self._announce(PartyId.CHARLIE, PartyId.BOB, "C2", k)

    def _step_corrections(self):
        oc = self.outcome_tuple()
        self.corrections = CorrectionRule(
            a1_index=mod_add(oc.m, oc.n, self.n),
            b2_index=mod_add(oc.k, oc.l, self.n),
        )
        self.a1_before, self.b2_before = _split_product_pair(self.state)
        self.state = apply_corrections(
            self.state, self.corrections.a1_index, self.corrections.b2_index, self.n
        )
        self.alice_final, self.bob_final = _split_product_pair(self.state)
        self.recovered = (
            states_equal(self.alice_final, equatorial_state(self.bob)),
            states_equal(self.bob_final, equatorial_state(self.alice)),
        )
        self.status = SessionStatus.COMPLETED

    # -- public surface -----------------------------------------------

    def advance(self) -> SessionStatus:
        """Execute the next protocol step; raises on a terminal session."""
        if self.status is not SessionStatus.RUNNING:
            raise RuntimeError(f"session is already {self.status.value}")
        self.step += 1
        if self.step == 1:
            self._step_senders()
        elif self.step == 2:
            self._step_controller()
        elif self.step == 3:
            self._step_corrections()
        return self.status

    def run_to_completion(self) -> SessionStatus:
        while self.status is SessionStatus.RUNNING:
            self.advance()
        return self.status

    def outcome_tuple(self) -> OutcomeTuple:
        return OutcomeTuple(
            l=self.outcomes["l"],
            n=self.outcomes["n"],
            m=self.outcomes.get("m", 0),
            k=self.outcomes.get("k", 0),
        )

    def result(self) -> ProtocolResult:
        """Completed session repackaged like a bare engine run."""
        if self.status is not SessionStatus.COMPLETED:
            raise RuntimeError("session did not complete")
        oc = self.outcome_tuple()
        assert self.corrections is not None
        return ProtocolResult(
            outcome=oc,
            probability=1.0 / self.n**4,
            corrections=self.corrections,
            a1_before=self.a1_before,
            b2_before=self.b2_before,
            alice_final=self.alice_final,
            bob_final=self.bob_final,
            recovered=self.recovered,
        )


def new_session(
    alice: PhaseVector,
    bob: PhaseVector,
    n: int,
    charlie_consents: bool = True,
    seed=None,
) -> Session:
    return Session(alice, bob, n, charlie_consents, seed)


def export_transcript(session: Session) -> str:
    """Stable JSON serialization of a terminal session's transcript."""
    if session.status is SessionStatus.RUNNING:
        raise RuntimeError("cannot export the transcript of a running session")
    doc = {
        "version": TRANSCRIPT_SCHEMA_VERSION,
        "dimension": session.n,
        "status": session.status.value,
        "messages": [
            {
                "from": msg.sender.value,
                "to": msg.receiver.value,
                "step": msg.step,
                "kind": msg.kind,
                "basis_label": msg.basis_label,
                "outcome_index": msg.outcome_index,
            }
            for msg in session.transcript
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class TranscriptDocument:
    version: int
    dimension: int
    status: SessionStatus
    messages: tuple[ClassicalMessage, ...]


def import_transcript(serialized: str) -> TranscriptDocument:
    """Inverse of export_transcript; round-trips field by field."""
    doc = json.loads(serialized)
    if doc.get("version") != TRANSCRIPT_SCHEMA_VERSION:
        raise ValueError(f"unsupported transcript version {doc.get('version')!r}")
    messages = tuple(
        ClassicalMessage(
            sender=PartyId(m["from"]),
            receiver=PartyId(m["to"]),
            step=int(m["step"]),
            kind=m["kind"],
            basis_label=m["basis_label"],
            outcome_index=int(m["outcome_index"]),
        )
        for m in doc["messages"]
    )
    return TranscriptDocument(
        version=int(doc["version"]),
        dimension=int(doc["dimension"]),
        status=SessionStatus(doc["status"]),
        messages=messages,
    )
