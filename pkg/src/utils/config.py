"""Runtime configuration: defaults, config file and environment overrides."""
import configparser
import logging
import os
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from src.protocol.errors import ConfigError

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "PRINCIPIA_DATA_DIR"

# Protocol and engine defaults
PROTOCOL_DEFAULTS = {
    # Market
    'theta_report': 3.0,          # minimum mean report score to collect R_i (inclusive)
    'default_threshold': 3.0,     # field acceptance threshold tau (strict)
    'market_reviewers': 3,        # reviewers per market submission
    'initial_rs': 1.0,            # RS is initially equal for everyone
    'rs_mode': 'additive',        # 'additive' or 'ema'
    'rs_ema_weight': 0.5,         # weight of the new report mean in ema mode
    'fair_bid_factor': Fraction(11, 10),
    'learn_keywords': True,       # reviewers pick up keywords of reviewed papers
    'market_review_days': 30,     # unsettled matches expire and refund after this

    # Journal governance
    'proposal_expiry_days': 14,   # pending join bids expire and refund

    # Reputation
    'damping': 0.5,
    'tolerance': 1e-9,
    'max_iterations': 1000,
    'citation_window_days': None, # None = all-time
    'default_user_score': 1.0,

    # Identity
    'signature_scheme': 'ed25519',
}

# Rules that change state transitions; frozen into the genesis event
RULE_KEYS = (
    'theta_report', 'default_threshold', 'market_reviewers', 'initial_rs',
    'rs_mode', 'rs_ema_weight', 'learn_keywords', 'market_review_days', 'proposal_expiry_days',
)


@dataclass(frozen=True)
class Config:
    data_dir: Path = Path("principia-data")
    thresholds: dict = field(default_factory=dict)
    theta_report: float = PROTOCOL_DEFAULTS['theta_report']
    default_threshold: float = PROTOCOL_DEFAULTS['default_threshold']
    market_reviewers: int = PROTOCOL_DEFAULTS['market_reviewers']
    initial_rs: float = PROTOCOL_DEFAULTS['initial_rs']
    rs_mode: str = PROTOCOL_DEFAULTS['rs_mode']
    rs_ema_weight: float = PROTOCOL_DEFAULTS['rs_ema_weight']
    fair_bid_factor: Fraction = PROTOCOL_DEFAULTS['fair_bid_factor']
    learn_keywords: bool = PROTOCOL_DEFAULTS['learn_keywords']
    market_review_days: int = PROTOCOL_DEFAULTS['market_review_days']
    proposal_expiry_days: int = PROTOCOL_DEFAULTS['proposal_expiry_days']
    damping: float = PROTOCOL_DEFAULTS['damping']
    tolerance: float = PROTOCOL_DEFAULTS['tolerance']
    max_iterations: int = PROTOCOL_DEFAULTS['max_iterations']
    citation_window_days: int | None = PROTOCOL_DEFAULTS['citation_window_days']
    default_user_score: float = PROTOCOL_DEFAULTS['default_user_score']
    signature_scheme: str = PROTOCOL_DEFAULTS['signature_scheme']
    seed: int | None = None

    @property
    def ledger_path(self):
        return Path(self.data_dir) / "ledger.bin"

    @property
    def blob_dir(self):
        return Path(self.data_dir) / "blobs"

    @property
    def keys_dir(self):
        return Path(self.data_dir) / "keys"

    @property
    def salt_path(self):
        return Path(self.data_dir) / "ledger.salt"

    def rules(self):
        """The subset of settings frozen into a ledger's genesis event."""
        rules = {key: getattr(self, key) for key in RULE_KEYS}
        rules['thresholds'] = dict(self.thresholds)
        return rules

    def describe(self):
        """Key/value pairs echoed into run summaries."""
        pairs = [("data_dir", str(self.data_dir)), ("ledger_path", str(self.ledger_path)),
                 ("blob_dir", str(self.blob_dir))]
        for f in fields(self):
            if f.name in ("data_dir", "thresholds"):
                continue
            pairs.append((f.name, str(getattr(self, f.name))))
        for name in sorted(self.thresholds):
            pairs.append((f"threshold.{name}", str(self.thresholds[name])))
        return pairs


def _coerce(name, raw, current):
    """Convert a config-file string to the type of the default value."""
    try:
        if name == "citation_window_days":
            return None if raw.strip().lower() in ("", "none", "all") else int(raw)
        if name == "seed":
            return None if raw.strip().lower() in ("", "none") else int(raw)
        if isinstance(current, bool):
            if raw.strip().lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return raw.strip().lower() in ("true", "yes", "1")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, Fraction):
            return Fraction(raw.strip())
        if isinstance(current, Path):
            return Path(raw.strip())
        return raw.strip()
    except ValueError:
        raise ConfigError("invalid value", field=name, value=raw) from None


def apply_sections(config, parser, source="<config>"):
    """Overlay the [principia] and [thresholds] sections of a parsed file."""
    updates = {}
    known = {f.name: f for f in fields(Config)}
    if parser.has_section("principia"):
        for name, raw in parser.items("principia"):
            if name not in known or name == "thresholds":
                raise ConfigError("unknown setting", file=source, section="principia", field=name)
            updates[name] = _coerce(name, raw, getattr(config, name))
    if parser.has_section("thresholds"):
        thresholds = dict(config.thresholds)
        for name, raw in parser.items("thresholds"):
            value = _coerce(name, raw, 0.0)
            if name == "default":
                updates["default_threshold"] = value
            else:
                thresholds[name] = value
        updates["thresholds"] = thresholds
    return replace(config, **updates)


def validate(config):
    for name, tau in list(config.thresholds.items()) + [("default", config.default_threshold)]:
        if not 1 <= tau <= 5:
            raise ConfigError("field threshold must lie in [1, 5]", field=name, value=tau)
    if not 1 <= config.theta_report <= 5:
        raise ConfigError("theta_report must lie in [1, 5]", value=config.theta_report)
    if config.rs_mode not in ("additive", "ema"):
        raise ConfigError("rs_mode must be 'additive' or 'ema'", value=config.rs_mode)
    if config.market_reviewers < 3:
        raise ConfigError("the market needs at least 3 reviewers per paper", value=config.market_reviewers)
    if config.market_review_days < 1:
        raise ConfigError("market_review_days must be at least 1", value=config.market_review_days)
    if not 0 < config.damping <= 1:
        raise ConfigError("damping must lie in (0, 1]", value=config.damping)
    return config


def load_config(path=None, data_dir=None, seed=None):
    """
    Resolve the configuration: defaults < config file < environment < arguments.

    Args:
        path: Optional config file in the declarative scenario format
        data_dir: Data directory from the command line
        seed: RNG seed override

    Returns:
        Config
    """
    config = Config()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as handle:
                parser.read_file(handle)
        except OSError as exc:
            raise ConfigError("cannot read config file", file=path) from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file: {exc}", file=path) from exc
        config = apply_sections(config, parser, str(path))

    if os.environ.get(DATA_DIR_ENV):
        config = replace(config, data_dir=Path(os.environ[DATA_DIR_ENV]))
    if data_dir is not None:
        config = replace(config, data_dir=Path(data_dir))
    if seed is not None:
        config = replace(config, seed=seed)

    logger.debug("Configuration resolved: %s", config.describe())
    return validate(config)
