"""Experiment configuration: JSON documents, ``--set`` overrides and validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from byzgd.adversaries import AdversaryKind, Omniscient, adversary_to_dict, parse_adversary
from byzgd.core import ConstraintBox, NoiseModel, Problem, synthesize_problem
from byzgd.filters import FilterKind
from byzgd.scheduler import DelayModel
from byzgd.server import ScheduleKind, StepSchedule

DEFAULT_HORIZON = 50
DEFAULT_SEED = 0
DEFAULT_HALF_WIDTH = 100.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: Problem
    byzantine_ids: tuple
    adversary: AdversaryKind
    filter: FilterKind
    schedule: StepSchedule
    delays: DelayModel
    w0: np.ndarray
    horizon: int
    seed: int
    output: Optional[str]
    document: dict  # the resolved JSON document this config was built from


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"paper_sec10"``."""
    stem = name[:-5] if name.endswith(".json") else name
    path = resources.files("byzgd") / "configs" / f"{stem}.json"
    return Path(str(path))


def bundled_config_names() -> list[str]:
    folder = resources.files("byzgd") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def read_document(path) -> dict:
    """Parse a JSON config file; a bare bundled name like ``paper_sec10`` also works."""
    p = Path(path)
    if not p.exists() and not p.parent.parts:
        candidate = bundled_config_path(str(path))
        if candidate.exists():
            p = candidate
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise ConfigError(
            f"{p}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}\n  {line}"
        ) from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be a JSON object")
    return doc


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides) -> dict:
    """Return a copy of ``doc`` with ``key.sub=value`` assignments applied.

    Values are parsed as JSON when possible, otherwise kept as strings.
    """
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form KEY=VALUE")
            key, raw = item.split("=", 1)
            value = _parse_value(raw)
        else:
            key, value = item
        set_path(doc, key.strip(), value)
    return doc


def set_path(doc: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    node = doc
    for part in parts[:-1]:
        nxt = node.get(part)
        if isinstance(nxt, str):
            nxt = {"kind": nxt}
        if not isinstance(nxt, dict):
            nxt = {}
        node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def _box_from(spec: dict, d: int) -> ConstraintBox:
    box = spec.get("box")
    if box is None:
        return ConstraintBox.cube(d, float(spec.get("half_width", DEFAULT_HALF_WIDTH)))
    if isinstance(box, (int, float)):
        return ConstraintBox.cube(d, float(box))
    return ConstraintBox(np.asarray(box["lo"], float), np.asarray(box["hi"], float))


def _noise_from(spec, seed: int) -> NoiseModel:
    if spec is None or spec is False:
        return NoiseModel()
    if isinstance(spec, (int, float)):
        return NoiseModel(float(spec), seed)
    xi = spec.get("xi")
    return NoiseModel(None if xi is None else float(xi), int(spec.get("seed", seed)))


def _problem_from(doc: dict, f: int, seed: int) -> Problem:
    spec = doc.get("problem")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'problem' object")
    noise = _noise_from(doc.get("noise"), seed)
    if "synthetic" in spec:
        syn = spec["synthetic"]
        rng = np.random.default_rng([int(syn.get("seed", seed)), 5])
        n, d, rows = int(syn["n"]), int(syn["d"]), int(syn.get("rows", 1))
        blocks = [rng.standard_normal((rows, d)) for _ in range(n)]
        w_star = np.asarray(syn["w_star"], float) if "w_star" in syn else rng.standard_normal(d)
    elif "x_blocks" in spec:
        blocks = [np.asarray(b, float) for b in spec["x_blocks"]]
        w_star = np.asarray(spec["w_star"], float)
    elif "x" in spec:
        blocks = [np.asarray([row], float) for row in spec["x"]]
        w_star = np.asarray(spec["w_star"], float)
    else:
        raise ConfigError("problem needs 'x' (one row per agent), 'x_blocks' or 'synthetic'")
    box = _box_from(spec, w_star.shape[0])
    return synthesize_problem(blocks, w_star, noise, f, box)


def _byzantine_from(doc: dict, n: int, f: int, seed: int) -> tuple:
    if "byzantine_random" in doc:
        k = int(doc["byzantine_random"])
        if not 0 <= k <= n:
            raise ConfigError(f"cannot pick {k} Byzantine agents out of {n}")
        ids = np.random.default_rng([seed, 4]).choice(n, size=k, replace=False).tolist()
    else:
        ids = list(doc.get("byzantine_ids", []))
    ids = [int(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"byzantine_ids has duplicates: {ids}")
    if any(not 0 <= i < n for i in ids):
        raise ConfigError(f"byzantine_ids must lie in [0, {n}), got {ids}")
    if len(ids) > f:
        raise ConfigError(f"{len(ids)} Byzantine agents exceed the declared f = {f}")
    return tuple(sorted(ids))


def _schedule_from(spec) -> StepSchedule:
    if spec is None:
        return StepSchedule()
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = ScheduleKind(str(spec.get("kind", "diminishing")).lower())
    c = float(spec.get("c", 10.0))
    eta = spec.get("eta")
    return StepSchedule(kind, c, None if eta is None else float(eta))


def _delays_from(spec, seed: int) -> DelayModel:
    if spec is None:
        return DelayModel()
    periods = spec.get("periods")
    limit = spec.get("outdatedness_limit")
    return DelayModel(
        t_o=int(spec.get("t_o", 0)),
        pattern=str(spec.get("pattern", "synchronous")).lower(),
        delivery_prob=float(spec.get("p", 0.7)),
        periods=None if periods is None else tuple(periods),
        seed=int(spec.get("seed", seed)),
        outdatedness_limit=None if limit is None else int(limit),
    )


def from_document(doc: dict) -> RunConfig:
    """Validate ``doc`` and resolve all defaults.

    Raises:
        ConfigError: naming the violated requirement.
    """
    try:
        seed = int(doc.get("seed", DEFAULT_SEED))
        f = int(doc.get("f", 0))
        problem = _problem_from(doc, f, seed)
        byz = _byzantine_from(doc, problem.n, f, seed)
        adversary = parse_adversary(doc.get("adversary", {"kind": "omniscient"}))
        kind = FilterKind.parse(doc.get("filter", "norm"))
        schedule = _schedule_from(doc.get("schedule"))
        delays = _delays_from(doc.get("delays"), seed)
        horizon = int(doc.get("horizon", DEFAULT_HORIZON))
        w0 = np.asarray(doc["w0"], float) if doc.get("w0") is not None else problem.box.center
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, KeyError):
            raise ConfigError(f"missing config field {exc}") from None
        raise ConfigError(str(exc)) from None
    if horizon < 0:
        raise ConfigError("horizon must be non-negative")
    if w0.shape != (problem.d,):
        raise ConfigError(f"w0 must have length {problem.d}")
    if not problem.box.contains(w0):
        raise ConfigError("w0 lies outside the constraint box")
    if not delays.is_synchronous and not schedule.is_monotone:
        raise ConfigError("asynchronous runs need a non-increasing step schedule")
    if schedule.kind is ScheduleKind.LINEAR_RATE:
        try:
            schedule.resolve(problem)
        except ValueError as exc:
            raise ConfigError(f"linear-rate step size unavailable: {exc}") from None
    if isinstance(adversary, Omniscient) and byz and problem.n - len(byz) < f + 1:
        raise ConfigError("omniscient adversary needs at least f+1 honest agents")

    resolved = copy.deepcopy(doc)
    resolved.update(
        seed=seed,
        f=f,
        horizon=horizon,
        w0=w0.tolist(),
        filter=kind.value,
        adversary=adversary_to_dict(adversary),
        byzantine_ids=list(byz),
    )
    resolved.pop("byzantine_random", None)
    return RunConfig(
        problem=problem,
        byzantine_ids=byz,
        adversary=adversary,
        filter=kind,
        schedule=schedule,
        delays=delays,
        w0=w0,
        horizon=horizon,
        seed=seed,
        output=doc.get("output"),
        document=resolved,
    )


def load_config(path, overrides=(), seed: Optional[int] = None) -> RunConfig:
    doc = apply_overrides(read_document(path), overrides)
    if seed is not None:
        doc["seed"] = int(seed)
    return from_document(doc)
