"""FILE-like client interface to a voting farm.

User-module code follows the same shape on every node (the farm is
configured SPMD-style): open a handle, add every member, run, then
exchange control requests and poll for status.

    vf = vf_open(runtime, "default")
    vf_add(vf, node=1, ident=1)
    vf_add(vf, node=2, ident=2)
    vf_add(vf, node=3, ident=3)
    yield from vf_run(vf, proc)
    yield from vf_control(vf, proc, input=encode_scalar(5.0))
    while True:
        status = yield from vf_get(vf, proc, timeout=2 * dt)
        if status.code is not VfStatusCode.VF_REFUSED:
            break
    yield from vf_close(vf, proc, timeout=2 * dt)

All blocking calls are generators meant to be delegated to with
``yield from`` inside a fabric process.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Generator, Optional

from . import wire
from .core import (
    FarmDescriptor,
    ValidationError,
    VfStatus,
    VfStatusCode,
    VotingFarmError,
    validate_descriptor,
)
from .fabric import Endpoint, Proc, Recv, Send, TIMEOUT


class AlreadyRunning(VotingFarmError):
    pass


class NotRunning(VotingFarmError):
    pass


class InvalidatedHandle(VotingFarmError):
    pass


class SpmdIncoherence(VotingFarmError):
    """Nodes disagreed on the farm descriptor during activation."""


class ValidationFailed(ValidationError):
    pass


@dataclass
class FarmHandle:
    """Client-side state for one farm, private to one user module."""

    runtime: Any  # FarmRuntime; typed loosely to keep import edges one-way
    metric_name: str
    descriptor: FarmDescriptor = field(default_factory=FarmDescriptor)
    running: bool = False
    invalidated: bool = False
    outputs: list[dict] = field(default_factory=list)
    statuses: list[VfStatus] = field(default_factory=list)
    last_error: Optional[str] = None

    def _check_open(self) -> None:
        if self.invalidated:
            raise InvalidatedHandle("handle was closed")


def vf_open(runtime: Any, metric_name: str = "default") -> FarmHandle:
    """Create an empty farm handle bound to a metric."""
    return FarmHandle(runtime=runtime, metric_name=metric_name)


def vf_add(handle: FarmHandle, node: int, ident: int) -> None:
    """Append one (node, ident) member to the descriptor."""
    handle._check_open()
    if handle.running:
        raise AlreadyRunning("cannot add members after vf_run")
    handle.descriptor.add(node, ident)


def vf_run(handle: FarmHandle, proc: Proc) -> Generator:
    """Validate and activate the farm.

    Every node calls this with an identical descriptor; the runtime
    cross-checks the copies and spawns the member voter local to this
    node, wiring its links.  Nodes that host no member still take part
    in the check.
    """
    handle._check_open()
    if handle.running:
        raise AlreadyRunning("vf_run called twice")
    try:
        validate_descriptor(handle.descriptor)
    except ValidationError as exc:
        raise ValidationFailed(str(exc)) from exc
    handle.runtime.activate(handle, proc)
    handle.running = True
    return
    yield  # pragma: no cover - keeps this a generator for uniform call style


def vf_control(
    handle: FarmHandle,
    proc: Proc,
    *,
    input: Optional[bytes] = None,
    algorithm: Optional[str] = None,
    epsilon: Optional[float] = None,
    scaling_factor: Optional[float] = None,
    tie_break: Optional[str] = None,
    output_node: Optional[int] = None,
    close: bool = False,
    reset: bool = False,
) -> Generator:
    """Send control requests to the local voter.

    Requests are delivered in a fixed order: parameter updates first,
    then output redirection, then an input value (which starts a
    session), then close/reset.  Parameter updates are acknowledged
    only when refused, matching the polling loop's tolerance for
    interleaved VF_REFUSED replies.
    """
    handle._check_open()
    if not handle.running:
        raise NotRunning("farm is not running")
    voter = handle.runtime.local_voter_endpoint(proc.endpoint.node)
    if voter is None:
        handle.last_error = "no local voter"
        return
    if any(v is not None for v in (algorithm, epsilon, scaling_factor, tie_break)):
        fields: dict[str, Any] = {"req": "algorithm"}
        if algorithm is not None:
            fields["kind"] = algorithm
        if epsilon is not None:
            fields["epsilon"] = epsilon
        if scaling_factor is not None:
            fields["scaling_factor"] = scaling_factor
        if tie_break is not None:
            fields["tie_break"] = tie_break
        yield Send(voter, wire.encode(wire.K_CONTROL, fields))
    if output_node is not None:
        yield Send(voter, wire.encode(wire.K_CONTROL, {"req": "output", "node": output_node}))
    if input is not None:
        yield Send(voter, wire.encode(wire.K_INPUT, {"valid": True}, input))
    if reset:
        yield Send(voter, wire.encode(wire.K_CONTROL, {"req": "reset"}))
    if close:
        yield Send(voter, wire.encode(wire.K_CONTROL, {"req": "close"}))


def vf_get(handle: FarmHandle, proc: Proc, timeout: int) -> Generator:
    """Return the next status reply, or VF_NONE after the timeout.

    Voted-output messages arriving in between are buffered on the
    handle (handle.outputs) without consuming the wait budget beyond
    the time they took to arrive.
    """
    handle._check_open()
    if handle.statuses:
        return handle.statuses.pop(0)
    deadline = proc.now + timeout
    while True:
        remaining = deadline - proc.now
        if remaining < 0:
            return VfStatus(VfStatusCode.VF_NONE, "timeout")
        got = yield Recv(remaining)
        if got is TIMEOUT:
            return VfStatus(VfStatusCode.VF_NONE, "timeout")
        sender, raw = got
        try:
            frame = wire.decode(raw)
        except wire.FrameError:
            continue
        if frame.kind == wire.K_OUTPUT:
            handle.outputs.append(
                {
                    "session": frame.get("session"),
                    "source": frame.get("member"),
                    "payload": frame.payload,
                }
            )
            continue
        if frame.kind == wire.K_STATUS:
            return VfStatus(
                VfStatusCode(frame.get("status")),
                frame.get("detail", ""),
                frame.get("session", -1),
            )


def vf_close(handle: FarmHandle, proc: Proc, timeout: int) -> Generator:
    """Tear the local voter down.

    Succeeds only between sessions: a close during an active session is
    answered VF_REFUSED and leaves the handle usable.  After a
    successful close the handle is invalidated and further calls raise.
    """
    handle._check_open()
    if not handle.running:
        raise NotRunning("farm is not running")
    yield from vf_control(handle, proc, close=True)
    deadline = proc.now + timeout
    unrelated: list[VfStatus] = []
    result: VfStatus
    while True:
        budget = deadline - proc.now
        if budget < 0:
            result = VfStatus(VfStatusCode.VF_NONE, "timeout")
            break
        status = yield from vf_get(handle, proc, budget)
        if status.code is VfStatusCode.VF_DONE and status.detail == "closed":
            handle.invalidated = True
            handle.running = False
            result = status
            break
        if status.code in (VfStatusCode.VF_REFUSED, VfStatusCode.VF_NONE):
            result = status
            break
        unrelated.append(status)  # e.g. a session completion racing the close
    handle.statuses[:0] = unrelated
    return result
