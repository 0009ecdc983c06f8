"""
Scenario files.

A scenario is an INI-style text file:

    [scenario]          seed, horizon_days, sample_every, signature_scheme, market_share
    [thresholds]        <keyword> = tau   (and ``default = tau``)
    [journal:<name>]    journal parameters, review_fee, min_join_fee, keywords
    [agents:<group>]    role (author|reviewer), count, wallet, keywords, policy parameters,
                        optional ``journal = <name>`` for initial board members
    [shock:<name>]      day, group, fraction of the group's reviewers that withdraw

Unknown sections and fields are errors, reported with file, line and field.
"""
import configparser
import logging
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from src.protocol.errors import ScenarioError
from src.simulation.policies import AgentPolicy

logger = logging.getLogger(__name__)

SCENARIO_DEFAULTS = {
    'seed': 0,
    'horizon_days': 100,
    'sample_every': 10,
    'signature_scheme': 'hmac-test',
    'market_share': 0.5,
}

JOURNAL_DEFAULTS = {
    'f_j': Fraction(1, 5),
    'a_j': False,
    't_j': 30,
    'n_j': 3,
    'r_j': Fraction(1, 2),
    'p_j': Fraction(1, 2),
    'm_j': Fraction(2, 3),
    'review_fee': 1_000_000,
    'min_join_fee': 0,
    'keywords': (),
}

ROLES = ("author", "reviewer")


@dataclass(frozen=True)
class JournalSpec:
    name: str
    params: dict
    review_fee: int
    min_join_fee: int
    keywords: tuple


@dataclass(frozen=True)
class AgentGroup:
    name: str
    role: str
    count: int
    wallet: int
    keywords: tuple
    policy: AgentPolicy
    journal: str | None = None


@dataclass(frozen=True)
class Shock:
    name: str
    day: int
    group: str
    fraction: float


@dataclass(frozen=True)
class Scenario:
    seed: int = SCENARIO_DEFAULTS['seed']
    horizon_days: int = SCENARIO_DEFAULTS['horizon_days']
    sample_every: int = SCENARIO_DEFAULTS['sample_every']
    signature_scheme: str = SCENARIO_DEFAULTS['signature_scheme']
    market_share: float = SCENARIO_DEFAULTS['market_share']
    thresholds: dict = field(default_factory=dict)
    default_threshold: float | None = None
    journals: tuple = ()
    groups: tuple = ()
    shocks: tuple = ()
    source: str = "<scenario>"

    @property
    def agent_count(self):
        return sum(g.count for g in self.groups)


def _line_of(text, section, key=None):
    """Line number of a section header, or of a key inside it."""
    in_section = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped == f"[{section}]"
            if in_section and key is None:
                return lineno
            continue
        if in_section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return lineno
    return None


class _Reader:
    def __init__(self, parser, text, source):
        self.parser = parser
        self.text = text
        self.source = source

    def error(self, message, section, key=None, value=None):
        context = {"file": self.source, "line": _line_of(self.text, section, key), "section": section}
        if key is not None:
            context["field"] = key
        if value is not None:
            context["value"] = value
        return ScenarioError(message, **context)

    def items(self, section, allowed):
        values = dict(self.parser.items(section))
        for key in values:
            if key not in allowed:
                raise self.error("unknown field", section, key)
        return values

    def convert(self, section, key, raw, kind):
        try:
            if kind is bool:
                lowered = raw.strip().lower()
                if lowered not in ("true", "false", "yes", "no", "1", "0"):
                    raise ValueError(raw)
                return lowered in ("true", "yes", "1")
            if kind is tuple:
                return tuple(sorted({k.strip() for k in raw.split(",") if k.strip()}))
            if kind is Fraction:
                return Fraction(raw.strip())
            return kind(raw.strip())
        except ValueError:
            raise self.error("invalid value", section, key, raw) from None


def _typed(reader, section, values, defaults):
    result = dict(defaults)
    for key, raw in values.items():
        default = defaults[key]
        kind = type(default) if default is not None else str
        result[key] = reader.convert(section, key, raw, kind)
    return result


def parse_scenario(text, source="<scenario>"):
    """
    Parse and validate scenario text.

    Args:
        text: Scenario file content
        source: File name used in diagnostics

    Returns:
        Scenario
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ScenarioError(f"malformed scenario: {exc.message}", file=source, line=line) from None

    reader = _Reader(parser, text, source)
    scenario = Scenario(source=source)
    journals, groups, shocks = [], [], []

    for section in parser.sections():
        kind, _, name = section.partition(":")
        if kind == "scenario":
            values = _typed(reader, section, reader.items(section, SCENARIO_DEFAULTS), SCENARIO_DEFAULTS)
            scenario = replace(scenario, **values)
        elif kind == "thresholds":
            thresholds = {}
            for key, raw in parser.items(section):
                tau = reader.convert(section, key, raw, float)
                if not 1 <= tau <= 5:
                    raise reader.error("field threshold must lie in [1, 5]", section, key, raw)
                if key == "default":
                    scenario = replace(scenario, default_threshold=tau)
                else:
                    thresholds[key] = tau
            scenario = replace(scenario, thresholds=thresholds)
        elif kind == "journal" and name:
            values = _typed(reader, section, reader.items(section, JOURNAL_DEFAULTS), JOURNAL_DEFAULTS)
            params = {k: values[k] for k in ("f_j", "a_j", "t_j", "n_j", "r_j", "p_j", "m_j")}
            journals.append(JournalSpec(name, params, values["review_fee"], values["min_join_fee"], values["keywords"]))
        elif kind == "agents" and name:
            groups.append(_parse_group(reader, section, name))
        elif kind == "shock" and name:
            values = reader.items(section, ("day", "group", "fraction"))
            for required in ("day", "group", "fraction"):
                if required not in values:
                    raise reader.error("missing field", section, required)
            fraction = reader.convert(section, "fraction", values["fraction"], float)
            if not 0 <= fraction <= 1:
                raise reader.error("fraction must lie in [0, 1]", section, "fraction", values["fraction"])
            shocks.append(Shock(name, reader.convert(section, "day", values["day"], int), values["group"].strip(), fraction))
        else:
            raise reader.error("unknown section", section)

    scenario = replace(scenario, journals=tuple(journals), groups=tuple(groups), shocks=tuple(shocks))
    return validate_scenario(scenario, reader)


def _parse_group(reader, section, name):
    policy_fields = {f.name: f.default for f in fields(AgentPolicy)}
    allowed = {"role": "", "count": 0, "wallet": 0, "keywords": (), "journal": ""} | policy_fields
    values = reader.items(section, allowed)
    if values.get("role", "").strip() not in ROLES:
        raise reader.error("role must be author or reviewer", section, "role", values.get("role"))
    typed = _typed(reader, section, {k: v for k, v in values.items() if k != "role"}, allowed)
    policy = AgentPolicy(**{k: typed[k] for k in policy_fields})
    if typed["count"] < 0 or typed["wallet"] < 0:
        raise reader.error("count and wallet must be non-negative", section)
    return AgentGroup(
        name=name,
        role=values["role"].strip(),
        count=typed["count"],
        wallet=typed["wallet"],
        keywords=typed["keywords"],
        policy=policy,
        journal=typed["journal"] or None,
    )


def validate_scenario(scenario, reader=None):
    def fail(message, section, key=None, value=None):
        if reader is not None:
            return reader.error(message, section, key, value)
        return ScenarioError(message, file=scenario.source, section=section, field=key)

    if scenario.horizon_days < 0:
        raise fail("horizon_days must be non-negative", "scenario", "horizon_days", scenario.horizon_days)
    if scenario.sample_every < 1:
        raise fail("sample_every must be at least 1", "scenario", "sample_every", scenario.sample_every)
    if not 0 <= scenario.market_share <= 1:
        raise fail("market_share must lie in [0, 1]", "scenario", "market_share", scenario.market_share)

    journal_names = {j.name for j in scenario.journals}
    group_names = {g.name for g in scenario.groups}
    for group in scenario.groups:
        if group.journal is not None and group.journal not in journal_names:
            raise fail("unknown journal", f"agents:{group.name}", "journal", group.journal)
        if group.journal is not None and group.role != "reviewer":
            raise fail("only reviewers sit on boards", f"agents:{group.name}", "journal", group.journal)
    for journal in scenario.journals:
        board = sum(g.count for g in scenario.groups if g.journal == journal.name)
        if board == 0:
            raise fail("journal has no board members", f"journal:{journal.name}")
        if board < journal.params["n_j"]:
            raise fail("board is smaller than n_j", f"journal:{journal.name}", "n_j", journal.params["n_j"])
    for shock in scenario.shocks:
        if shock.group not in group_names:
            raise fail("unknown group", f"shock:{shock.name}", "group", shock.group)
    return scenario


def load_scenario(path):
    """Read and parse a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("cannot read scenario file", file=str(path)) from exc
    scenario = parse_scenario(text, source=str(path))
    logger.info("Loaded scenario %s: %d agents, %d journals", path, scenario.agent_count, len(scenario.journals))
    return scenario
