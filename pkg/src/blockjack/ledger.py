"""Permissioned consortium ledger for prefix ownership.

World state is the live prefix -> record table; every committed change
is also sealed into a hash-chained block log, so the history stays
tamper-evident.  Writes need endorsement from at least half of the
consortium members; reads go straight to world state.

Timing is simulated, not measured: every mutating call is billed the
full request + endorsement + distribution latency of the cost model,
and verification is billed the request leg only, so elapsed simulated
time reflects how expensive each pipeline is rather than host speed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .types import RouterId, check_asn

DOC_TYPE = "prefix-ownership"
HASH_ALGORITHM = "sha256"
GENESIS_PREV_HASH = "0" * 64

KIND_REGISTER = "register"
KIND_UPDATE_STATUS = "update_status"

REASON_CONFLICT = "conflict"
REASON_NOT_FOUND = "not-found"
REASON_CREDENTIAL_MISMATCH = "credential-mismatch"
REASON_CONSENSUS_FAILURE = "consensus-failure"


class LedgerError(Exception):
    """Misuse of the ledger API (not a chaincode denial)."""


class CredentialError(LedgerError):
    """Unknown, forged, or otherwise unusable credential."""


class VerificationSignal(str, Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class LedgerRecord:
    """The four-column ownership row held in world state."""

    prefix: str
    asn: int
    doc_type: str = DOC_TYPE
    active: bool = True

    def to_dict(self) -> dict:
        return {"prefix": self.prefix, "asn": self.asn,
                "doc_type": self.doc_type, "active": self.active}


@dataclass(frozen=True)
class Credential:
    """Opaque bearer token bound to a subject (and its ASN, for routers)."""

    subject: str
    asn: Optional[int]
    secret: str
    issued_by: str


@dataclass(frozen=True)
class Transaction:
    kind: str
    record: LedgerRecord
    submitter: str
    submitter_asn: Optional[int]
    endorsements: tuple[str, ...]
    submitted_at: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "record": self.record.to_dict(),
            "submitter": self.submitter,
            "submitter_asn": self.submitter_asn,
            "endorsements": list(self.endorsements),
            "submitted_at": self.submitted_at,
        }


@dataclass
class Block:
    index: int
    prev_hash: str
    transactions: list[Transaction]
    hash: str = ""

    def body(self) -> dict:
        return {
            "index": self.index,
            "prev_hash": self.prev_hash,
            "transactions": [tx.to_dict() for tx in self.transactions],
        }

    def compute_hash(self) -> str:
        return digest(self.body())

    def seal(self) -> "Block":
        self.hash = self.compute_hash()
        return self


def canonical_bytes(obj) -> bytes:
    """Field-ordered, length-prefixed serialization used for hashing."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return len(payload).to_bytes(8, "big") + payload


def digest(obj) -> str:
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()


@dataclass
class WorldState:
    """Current prefix -> record view, derivable from the block log."""

    records: dict[str, LedgerRecord] = field(default_factory=dict)
    version: int = 0

    def get(self, prefix: str) -> Optional[LedgerRecord]:
        return self.records.get(prefix)

    def apply(self, tx: Transaction):
        if tx.kind == KIND_REGISTER:
            self.records[tx.record.prefix] = replace(tx.record, active=True)
        elif tx.kind == KIND_UPDATE_STATUS:
            current = self.records[tx.record.prefix]
            self.records[tx.record.prefix] = replace(current, active=tx.record.active)
        else:
            raise LedgerError(f"unknown transaction kind: {tx.kind}")

    def to_dict(self) -> dict:
        return {prefix: self.records[prefix].to_dict()
                for prefix in sorted(self.records)}


@dataclass(frozen=True)
class ChaincodeVerdict:
    approved: bool
    reason: Optional[str] = None


def chaincode_evaluate(tx: Transaction, state: WorldState) -> ChaincodeVerdict:
    """The deterministic contract every member runs before endorsing.

    Registration passes on a free prefix or when re-activating an
    inactive record of the same owner; a status update passes only
    against an existing record of the same owner.  Never mutates state.
    """
    if tx.submitter_asn != tx.record.asn:
        return ChaincodeVerdict(False, REASON_CREDENTIAL_MISMATCH)
    existing = state.get(tx.record.prefix)
    if tx.kind == KIND_REGISTER:
        if existing is None:
            return ChaincodeVerdict(True)
        if not existing.active and existing.asn == tx.record.asn:
            return ChaincodeVerdict(True)  # re-activation path
        return ChaincodeVerdict(False, REASON_CONFLICT)
    if tx.kind == KIND_UPDATE_STATUS:
        if existing is None:
            return ChaincodeVerdict(False, REASON_NOT_FOUND)
        if existing.asn != tx.record.asn:
            return ChaincodeVerdict(False, REASON_CREDENTIAL_MISMATCH)
        return ChaincodeVerdict(True)
    return ChaincodeVerdict(False, REASON_CONFLICT)


@dataclass(frozen=True)
class CostModel:
    """Latency model for the authorization pipeline.

    Authorizing one prefix costs the request latency, one endorsement
    latency per required endorsement, and one distribution latency per
    member receiving the new world state.
    """

    request_latency: float
    endorse_latency: float
    distribute_latency: float
    member_count: int

    def __post_init__(self):
        for name in ("request_latency", "endorse_latency", "distribute_latency"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.member_count < 1:
            raise ValueError("member_count must be >= 1")

    @property
    def endorsements_required(self) -> int:
        return math.ceil(self.member_count / 2)

    def authorization_cost(self) -> float:
        return (self.request_latency
                + self.endorsements_required * self.endorse_latency
                + self.member_count * self.distribute_latency)

    def verification_cost(self) -> float:
        # reads skip consensus entirely; only the request leg is paid
        return self.request_latency


# Two-member preset tuned so one authorization takes ~2.15 simulated
# seconds and one verification ~0.09, the reference throughput shape.
CALIBRATED_COST = CostModel(request_latency=0.09, endorse_latency=1.00,
                            distribute_latency=0.53, member_count=2)


def estimate_authorization_cost(model: CostModel) -> float:
    """Simulated seconds to authorize one prefix under the model."""
    return model.authorization_cost()


class CertificateAuthority:
    """Issues and validates admin and router credentials."""

    def __init__(self, name: str = "blockjack-ca"):
        self.name = name
        self._issued: dict[str, Credential] = {}
        self._minted = 0

    def _mint(self, subject: str, asn: Optional[int]) -> Credential:
        if subject in self._issued:
            raise CredentialError(f"subject already enrolled: {subject}")
        self._minted += 1
        secret = hashlib.sha256(
            f"{self.name}|{subject}|{self._minted}".encode()).hexdigest()
        cred = Credential(subject=subject, asn=asn, secret=secret,
                          issued_by=self.name)
        self._issued[subject] = cred
        return cred

    def enroll_admin(self, name: str) -> Credential:
        return self._mint(name, None)

    def register_router(self, router_id: RouterId, admin: Credential) -> Credential:
        if not self.is_valid(admin) or admin.asn is not None:
            raise CredentialError("router registration requires a valid admin credential")
        return self._mint(str(router_id), router_id.asn)

    def is_valid(self, cred: Credential) -> bool:
        known = self._issued.get(cred.subject)
        return known is not None and known.secret == cred.secret \
            and known.issued_by == self.name


@dataclass(frozen=True)
class CommitResult:
    block_index: int
    completed_at: float


@dataclass(frozen=True)
class Denial:
    reason: str
    completed_at: float


@dataclass(frozen=True)
class VerifyResult:
    signal: VerificationSignal
    completed_at: float


class ConsortiumMember:
    """One consortium peer holding its own world-state replica."""

    def __init__(self, member_id: str):
        self.member_id = member_id
        self.state = WorldState()

    def endorse(self, tx: Transaction) -> bool:
        return chaincode_evaluate(tx, self.state).approved


class ConsortiumLedger:
    """The ordering point: endorsement, block commit, and queries.

    All mutations are serialized through this object; concurrent
    submitters must queue in arrival order.
    """

    def __init__(self, cost_model: CostModel = CALIBRATED_COST,
                 ca: Optional[CertificateAuthority] = None):
        self.cost_model = cost_model
        self.ca = ca or CertificateAuthority()
        self.members = [ConsortiumMember(f"member-{i}")
                        for i in range(cost_model.member_count)]
        self.world_state = WorldState()
        genesis = Block(index=0, prev_hash=GENESIS_PREV_HASH, transactions=[])
        self.blocks: list[Block] = [genesis.seal()]
        self.stats = {"credentialed_requests": 0, "commits": 0, "denials": 0,
                      "verifies": 0}

    # -- identity ---------------------------------------------------------

    def enroll_admin(self, name: str) -> Credential:
        return self.ca.enroll_admin(name)

    def register_router(self, router_id: RouterId, admin: Credential) -> Credential:
        return self.ca.register_router(router_id, admin)

    def _require_credential(self, cred: Credential):
        if not self.ca.is_valid(cred):
            raise CredentialError(f"invalid credential for {cred.subject!r}")
        self.stats["credentialed_requests"] += 1

    # -- writes -----------------------------------------------------------

    def submit_authorization(self, prefix: str, asn: int, cred: Credential,
                             now: float = 0.0) -> CommitResult | Denial:
        check_asn(asn)
        record = LedgerRecord(prefix=str(prefix), asn=asn, active=True)
        return self._submit(KIND_REGISTER, record, cred, now)

    def submit_status_update(self, prefix: str, asn: int, active: bool,
                             cred: Credential, now: float = 0.0) -> CommitResult | Denial:
        check_asn(asn)
        record = LedgerRecord(prefix=str(prefix), asn=asn, active=active)
        return self._submit(KIND_UPDATE_STATUS, record, cred, now)

    def _submit(self, kind: str, record: LedgerRecord, cred: Credential,
                now: float) -> CommitResult | Denial:
        self._require_credential(cred)
        draft = Transaction(kind=kind, record=record, submitter=cred.subject,
                            submitter_asn=cred.asn, endorsements=(),
                            submitted_at=now)
        approvals = tuple(sorted(m.member_id for m in self.members
                                 if m.endorse(draft)))
        model = self.cost_model
        if len(approvals) < model.endorsements_required:
            # cost of a refused round: request plus the endorsement fan-out
            when = now + model.request_latency \
                + model.endorsements_required * model.endorse_latency
            verdict = chaincode_evaluate(draft, self.world_state)
            reason = verdict.reason if not verdict.approved else REASON_CONSENSUS_FAILURE
            self.stats["denials"] += 1
            return Denial(reason=reason, completed_at=when)
        tx = replace(draft, endorsements=approvals)
        block = Block(index=len(self.blocks), prev_hash=self.blocks[-1].hash,
                      transactions=[tx]).seal()
        self.blocks.append(block)
        self.world_state.apply(tx)
        self.world_state.version += 1
        for member in self.members:  # distribute the new world state
            member.state.apply(tx)
            member.state.version = self.world_state.version
        self.stats["commits"] += 1
        return CommitResult(block_index=block.index,
                            completed_at=now + model.authorization_cost())

    # -- reads ------------------------------------------------------------

    def query_verify(self, prefix: str, asn: int, cred: Credential,
                     now: float = 0.0) -> VerifyResult:
        """Answer valid/invalid/unknown from world state; no consensus."""
        self._require_credential(cred)
        check_asn(asn)
        self.stats["verifies"] += 1
        when = now + self.cost_model.verification_cost()
        record = self.world_state.get(str(prefix))
        if record is None or not record.active:
            return VerifyResult(VerificationSignal.UNKNOWN, when)
        if record.asn == asn:
            return VerifyResult(VerificationSignal.VALID, when)
        return VerifyResult(VerificationSignal.INVALID, when)

    # -- integrity ---------------------------------------------------------

    def verify_chain(self) -> Optional[int]:
        """Recheck every hash and link; None if intact, else first broken index."""
        for i, block in enumerate(self.blocks):
            if block.index != i:
                return i
            if i == 0:
                if block.prev_hash != GENESIS_PREV_HASH or block.transactions:
                    return 0
            elif block.prev_hash != self.blocks[i - 1].hash:
                return i
            if block.hash != block.compute_hash():
                return i
        return None

    @property
    def chain_length(self) -> int:
        return len(self.blocks)

    # -- export/import -------------------------------------------------------

    def dump(self) -> dict:
        return {
            "hash_algorithm": HASH_ALGORITHM,
            "member_count": self.cost_model.member_count,
            "version": self.world_state.version,
            "world_state": self.world_state.to_dict(),
            "blocks": [dict(b.body(), hash=b.hash) for b in self.blocks],
        }

    def to_json(self) -> str:
        return json.dumps(self.dump(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def load(cls, doc: dict, cost_model: CostModel = CALIBRATED_COST,
             ca: Optional[CertificateAuthority] = None) -> "ConsortiumLedger":
        """Rebuild a ledger from a dump; refuses a broken chain."""
        ledger = cls(cost_model=cost_model, ca=ca)
        ledger.blocks = []
        for raw in doc["blocks"]:
            txs = [Transaction(kind=t["kind"],
                               record=LedgerRecord(**t["record"]),
                               submitter=t["submitter"],
                               submitter_asn=t["submitter_asn"],
                               endorsements=tuple(t["endorsements"]),
                               submitted_at=t["submitted_at"])
                   for t in raw["transactions"]]
            ledger.blocks.append(Block(index=raw["index"], prev_hash=raw["prev_hash"],
                                       transactions=txs, hash=raw["hash"]))
        broken = ledger.verify_chain()
        if broken is not None:
            raise LedgerError(f"refusing to load broken chain at block {broken}")
        state = WorldState({p: LedgerRecord(**r) for p, r in doc["world_state"].items()},
                           version=doc["version"])
        ledger.world_state = state
        for member in ledger.members:
            member.state = WorldState(dict(state.records), version=state.version)
        return ledger
