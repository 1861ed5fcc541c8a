"""Configuration files and built-in presets for the command-line tool."""

from __future__ import annotations

import json
import os
from importlib import resources

import jsonschema

from ..errors import BudgetwiseError, InfeasibleError
from ..model import GroupDist, ProblemInstance, SourceSpec
from ..simkit import METHODS, THEORY, ExperimentConfig, default_budgets, get_setting, make_target
from ..simkit.settings import SETTINGS

SEED_ENV = "BUDGETWISE_SEED"
DEFAULT_SEED = 20240601
TASK_ALIASES = {"mean": "population_mean", "groups": "group_means", "classification": "classification"}
TARGET_KINDS = ("uniform", "increasing", "pyramid")


class ConfigError(Exception):
    """Invalid configuration; the message names the offending line or field."""


def _schema():
    text = resources.files("budgetwise.cli").joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _field(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def validate(doc: dict) -> dict:
    validator = jsonschema.Draft202012Validator(_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        raise ConfigError(f"field {_field(err.absolute_path)}: {err.message}")
    if "sources" not in doc and doc.get("setting") not in SETTINGS:
        raise ConfigError(f"field setting: {doc.get('setting')!r} is not built in; provide 'sources'")
    return doc


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("line 1: top level must be a JSON object")
    return validate(doc)


def _sources(doc: dict) -> tuple[SourceSpec, ...]:
    if "sources" not in doc:
        return get_setting(doc["setting"]).sources
    sources = []
    for m, src in enumerate(doc["sources"]):
        try:
            sources.append(SourceSpec(GroupDist(src["probs"]), src["cost"]))
        except BudgetwiseError as exc:
            raise ConfigError(f"field sources[{m}].probs: {exc}") from None
    return tuple(sources)


def _target(doc: dict, k: int, override: str | None = None) -> tuple[GroupDist, str]:
    if override is not None:
        return make_target(override, k), override
    entry = doc["target"]
    if "kind" in entry:
        return make_target(entry["kind"], k), entry["kind"]
    try:
        target = GroupDist(entry["probs"])
    except BudgetwiseError as exc:
        raise ConfigError(f"field target.probs: {exc}") from None
    return target, "explicit"


def build_problem(doc: dict, budget: float | None = None, target_kind: str | None = None) -> tuple[ProblemInstance, str]:
    """Problem instance from a validated config; InfeasibleError passes through."""
    sources = _sources(doc)
    ks = {s.dist.k for s in sources}
    if len(ks) != 1:
        raise ConfigError(f"field sources: sources disagree on the number of groups ({sorted(ks)})")
    k = ks.pop()
    target, kind = _target(doc, k, target_kind)
    if target.k != k:
        raise ConfigError(f"field target.probs: has {target.k} groups, sources have {k}")
    if budget is None:
        budgets = doc.get("budgets")
        budget = doc.get("budget", budgets[-1] if budgets else None)
    if budget is None:
        raise ConfigError("field budget: required")
    try:
        return ProblemInstance(sources, target, budget), kind
    except InfeasibleError:
        raise
    except BudgetwiseError as exc:
        raise ConfigError(str(exc)) from None


def resolve_seed(seed: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"environment {SEED_ENV}: {env!r} is not an integer") from None


def build_experiment(doc: dict, replications: int | None = None) -> tuple[ExperimentConfig, list[str]]:
    if "budgets" in doc:
        budgets = tuple(doc["budgets"])
    elif "budget" in doc:
        budgets = (doc["budget"],)
    else:
        budgets = default_budgets()
    problem, kind = build_problem(doc, budget=budgets[-1])
    try:
        config = ExperimentConfig(
            problem=problem,
            budgets=budgets,
            replications=replications or doc.get("replications", 100),
            seed=resolve_seed(doc.get("seed", DEFAULT_SEED)),
            task=doc.get("task", "population_mean"),
            target_kind=kind,
            setting=doc.get("setting", "custom"),
            sigma2=doc.get("sigma2", 5.0),
            feature_dim=doc.get("feature_dim", 20),
            mc_samples=doc.get("mc_samples", 20_000),
        )
    except ValueError as exc:
        raise ConfigError(f"field budgets: {exc}") from None
    methods = doc.get("methods", list(METHODS) + [THEORY])
    return config, methods


def preset_names() -> list[str]:
    return [f"{s}-{t}-{task}" for s in SETTINGS for t in TARGET_KINDS for task in TASK_ALIASES]


def preset(name: str) -> dict:
    """Config document for ``{setting}-{target}-{mean|groups|classification}``."""
    parts = name.split("-")
    if len(parts) != 3 or parts[0] not in SETTINGS or parts[1] not in TARGET_KINDS or parts[2] not in TASK_ALIASES:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    setting, target, task = parts
    return validate({
        "setting": setting,
        "target": {"kind": target},
        "budgets": list(default_budgets()),
        "task": TASK_ALIASES[task],
        "replications": 100,
        "seed": DEFAULT_SEED,
        "methods": list(METHODS) + [THEORY],
        "sigma2": 5.0,
        "feature_dim": 20,
    })
