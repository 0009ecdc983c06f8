"""principia command line: protocol operations, scenario runs and ledger tools."""
import logging
import secrets
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from src.analysis.reputation import compute_reputation
from src.data.loader import load_scenario
from src.protocol.errors import InvalidKey, PrincipiaError, UnknownEntity
from src.protocol.identity import (
    DEFAULT_SCHEME,
    SCHEMES,
    ContentHash,
    PersonId,
    derive_seed,
    keygen,
)
from src.protocol.client import ProtocolClient
from src.protocol.journal import BoardChange, JournalParams, ParamChange, lineage
from src.protocol.ledger import LedgerStore, head_summary, read_events, replay, write_events
from src.protocol.market import public_record, suggest_fair_bid
from src.protocol.review import public_view
from src.protocol.state import Rules, journal_account, person_account
from src.simulation.engine import Simulation
from src.utils.config import DATA_DIR_ENV, load_config
from src.utils.export import export_to_json, export_to_tsv, generate_report_text, summary_block

logger = logging.getLogger("principia")


@dataclass
class Session:
    """Per-invocation settings shared by every subcommand."""

    config: object
    day: int | None
    dry_run: bool

    @property
    def keys_dir(self):
        return self.config.keys_dir

    def key_path(self, name):
        return Path(self.keys_dir) / f"{name}.key"

    def load_key(self, name):
        path = self.key_path(name)
        if not path.exists():
            raise InvalidKey("no local key with this name", name=name)
        scheme, secret_hex = path.read_text(encoding="utf-8").split()
        return keygen(bytes.fromhex(secret_hex), scheme)

    def save_key(self, name, key):
        path = self.key_path(name)
        if path.exists():
            raise InvalidKey("a local key with this name already exists", name=name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"{key.scheme} {key.secret.hex()}\n", encoding="utf-8")
        path.chmod(0o600)

    def person(self, text):
        """A local key name or a full 64-hex fingerprint."""
        if self.key_path(text).exists():
            return self.load_key(text).person_id
        try:
            return PersonId.from_hex(text)
        except ValueError:
            raise InvalidKey("not a key name or person fingerprint", value=text) from None

    def client(self, store):
        client = ProtocolClient(store.ledger, append=store.append, dry_run=self.dry_run)
        if self.day is not None:
            client.day = self.day
        return client


def resolve_hash(text, candidates, what):
    """Full hex hash or a unique prefix of one of ``candidates``."""
    text = text.lower()
    matches = [c for c in candidates if c.hex.startswith(text)]
    if len(matches) == 1:
        return matches[0]
    if not matches and len(text) == 64:
        try:
            return ContentHash.from_hex(text)
        except ValueError:
            pass
    raise UnknownEntity(f"unknown or ambiguous {what}", prefix=text, matches=len(matches))


def parse_hashes(values, param_hint):
    """Full hex content hashes given on the command line."""
    try:
        return [ContentHash.from_hex(value) for value in values]
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint=param_hint) from None


def open_store(session):
    return LedgerStore(session.config.data_dir)


def require_genesis(store):
    if len(store.ledger) == 0:
        raise UnknownEntity("ledger is not initialised; run 'principia init' first")


class PrincipiaGroup(click.Group):
    """Maps domain errors to exit code 1 with a machine-parseable prefix."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except PrincipiaError as exc:
            click.echo(f"ERROR {exc.code}: {exc}", err=True)
            ctx.exit(1)


def appended(store, events_before):
    events = store.ledger.events[events_before:]
    for event in events:
        click.echo(f"#{event.seq} {event.kind.value} {event.hash.hex}")


@click.group(cls=PrincipiaGroup)
@click.option("--data-dir", envvar=DATA_DIR_ENV, type=click.Path(file_okay=False), help="Ledger data directory")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Config file")
@click.option("--seed", type=int, help="RNG seed override")
@click.option("--day", type=int, help="Simulated day stamped on new events (default: last ledger day)")
@click.option("--dry-run", is_flag=True, help="Validate without appending")
@click.option("-v", "--verbose", count=True, help="More log output (repeatable)")
@click.pass_context
def cli(ctx, data_dir, config_path, seed, day, dry_run, verbose):
    """Decentralized peer review: journals, review rounds, market and reputation."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = Session(config=load_config(config_path, data_dir, seed), day=day, dry_run=dry_run)


# Identity and money

@cli.command()
@click.argument("name")
@click.option("--scheme", type=click.Choice(sorted(SCHEMES)), default=DEFAULT_SCHEME)
@click.option("--seed-label", help="Derive the key deterministically from this label")
@click.pass_obj
def keygen_cmd(session, name, scheme, seed_label):
    """Create a local key pair and print its fingerprint."""
    if seed_label is not None:
        seed = derive_seed(seed_label)
    elif session.config.seed is not None:
        seed = derive_seed(f"{session.config.seed}/{name}")
    else:
        seed = secrets.token_bytes(32)
    key = keygen(seed, scheme)
    session.save_key(name, key)
    click.echo(key.person_id.hex)


cli.add_command(keygen_cmd, name="keygen")


@cli.command()
@click.argument("registrar")
@click.pass_obj
def init(session, registrar):
    """Write the genesis event with REGISTRAR as the key registrar."""
    key = session.load_key(registrar)
    with LedgerStore(session.config.data_dir) as store:
        if len(store.ledger):
            raise PrincipiaError("ledger already initialised", events=len(store.ledger))
        client = ProtocolClient(store.ledger, append=store.append, dry_run=session.dry_run)
        client.genesis(key, Rules.from_config(session.config), day=session.day or 0)
        appended(store, 0)


@cli.command()
@click.argument("name")
@click.option("--as", "actor", required=True, help="Registrar (to validate) or NAME itself")
@click.option("--validated", is_flag=True, help="Institutional validation (registrar only)")
@click.pass_obj
def register(session, name, actor, validated):
    """Register the public key of local key NAME."""
    key = session.load_key(name)
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).register_key(session.load_key(actor), key.public, key.scheme, validated)
        appended(store, before)


@cli.command()
@click.argument("person")
@click.argument("amount", type=int)
@click.option("--as", "actor", required=True)
@click.pass_obj
def mint(session, person, amount, actor):
    """Create AMOUNT micro-credits in PERSON's wallet (registrar only)."""
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).mint(session.load_key(actor), session.person(person), amount)
        appended(store, before)


@cli.command()
@click.argument("person")
@click.pass_obj
def balance(session, person):
    """Print a person's wallet balance."""
    with open_store(session) as store:
        click.echo(store.ledger.state.balance(person_account(session.person(person))))


# Journals

@cli.group(cls=PrincipiaGroup)
def journal():
    """Journal governance."""


def _journal(store, text):
    return resolve_hash(text, store.ledger.state.journals, "journal")


@journal.command("create")
@click.option("--as", "actor", required=True)
@click.option("--founder", "founders", multiple=True, help="Further founders (local key names)")
@click.option("--params", "params_text", default="", help="e.g. f_j=1/5,n_j=3,a_j=true")
@click.pass_obj
def journal_create(session, actor, founders, params_text):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        params = JournalParams.parse(params_text)
        journal_id = session.client(store).create_journal(
            session.load_key(actor), [session.load_key(f) for f in founders], params
        )
        appended(store, before)
        click.echo(journal_id.hex)


@journal.command("modify")
@click.argument("journal_id")
@click.option("--as", "actor", required=True)
@click.option("--add", multiple=True)
@click.option("--remove", multiple=True)
@click.option("--params", "params_text", default=None)
@click.option("--approve", multiple=True, help="Approving board members (local key names)")
@click.pass_obj
def journal_modify(session, journal_id, actor, add, remove, params_text, approve):
    with open_store(session) as store:
        require_genesis(store)
        jid = _journal(store, journal_id)
        if params_text is not None:
            change = ParamChange(JournalParams.parse(params_text, store.ledger.state.journal(jid).params))
        else:
            change = BoardChange(
                add=frozenset(session.person(p) for p in add),
                remove=frozenset(session.person(p) for p in remove),
            )
        before = len(store.ledger)
        new_id = session.client(store).modify_journal(
            session.load_key(actor), jid, change, [session.load_key(a) for a in approve]
        )
        appended(store, before)
        if new_id is not None:
            click.echo(new_id.hex)


@journal.command("join")
@click.argument("journal_id")
@click.option("--as", "actor", required=True)
@click.option("--bid", type=int, required=True, help="Joining fee in micro-credits")
@click.pass_obj
def journal_join(session, journal_id, actor, bid):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).join_bid(session.load_key(actor), _journal(store, journal_id), bid)
        appended(store, before)


@journal.command("decide-join")
@click.argument("journal_id")
@click.option("--as", "actor", required=True)
@click.option("--approve", multiple=True)
@click.pass_obj
def journal_decide_join(session, journal_id, actor, approve):
    with open_store(session) as store:
        require_genesis(store)
        jid = _journal(store, journal_id)
        if jid not in store.ledger.state.pending_joins:
            raise UnknownEntity("no pending join bid", journal=jid.hex[:12])
        before = len(store.ledger)
        new_id = session.client(store).decide_join(
            session.load_key(actor), jid, [session.load_key(a) for a in approve]
        )
        appended(store, before)
        click.echo(new_id.hex if new_id is not None else "refunded")


@journal.command("spend")
@click.argument("journal_id")
@click.argument("amount", type=int)
@click.argument("recipient")
@click.option("--as", "actor", required=True)
@click.option("--approve", multiple=True)
@click.pass_obj
def journal_spend(session, journal_id, amount, recipient, actor, approve):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).spend(
            session.load_key(actor), _journal(store, journal_id), amount, session.person(recipient),
            [session.load_key(a) for a in approve],
        )
        appended(store, before)


@journal.command("transfer")
@click.argument("ancestor")
@click.argument("descendant")
@click.option("--as", "actor", required=True)
@click.option("--approve", multiple=True)
@click.pass_obj
def journal_transfer(session, ancestor, descendant, actor, approve):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).transfer(
            session.load_key(actor), _journal(store, ancestor), _journal(store, descendant),
            [session.load_key(a) for a in approve],
        )
        appended(store, before)


@journal.command("show")
@click.argument("journal_id", required=False)
@click.pass_obj
def journal_show(session, journal_id):
    """List journals, or show one journal with its lineage."""
    with open_store(session) as store:
        state = store.ledger.state
        if journal_id is None:
            rows = [
                {
                    "journal": j.id.hex,
                    "current": state.is_current(j.id),
                    "board": len(j.board),
                    "balance": state.balance(journal_account(j.id)),
                    "created_at": j.created_at,
                }
                for j in sorted(state.journals.values(), key=lambda j: (j.created_at, j.id))
            ]
            click.echo(export_to_tsv(rows) if rows else "", nl=False)
            return
        j = state.journal(_journal(store, journal_id))
        record = {
            "journal": j.id.hex,
            "ancestor": j.ancestor.hex if j.ancestor else None,
            "current": state.is_current(j.id),
            "board": [p.hex for p in j.board],
            "params": j.params.to_body(),
            "balance": state.balance(journal_account(j.id)),
            "lineage": [jid.hex for jid in lineage(state, j.id)],
        }
        click.echo(export_to_json(record))


# Papers

@cli.group(cls=PrincipiaGroup)
def paper():
    """Paper publication and review bids."""


@paper.command("publish")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--as", "actor", required=True)
@click.option("--author", "authors", multiple=True, help="Co-authors (local key names)")
@click.option("--keyword", "keywords", multiple=True)
@click.option("--cite", "cites", multiple=True, help="Cited paper hashes")
@click.pass_obj
def paper_publish(session, path, actor, authors, keywords, cites):
    with open_store(session) as store:
        require_genesis(store)
        paper_hash = store.blobs.put(Path(path).read_bytes())
        cited = parse_hashes(cites, "--cite")
        actor_key = session.load_key(actor)
        before = len(store.ledger)
        session.client(store).publish_paper(
            actor_key, paper_hash, [actor_key] + [session.load_key(a) for a in authors], keywords, cited
        )
        appended(store, before)
        click.echo(paper_hash.hex)


@paper.command("bid")
@click.argument("paper_hash")
@click.option("--journal", "journal_id", required=True)
@click.option("--fee", type=int, required=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def paper_bid(session, paper_hash, journal_id, fee, actor):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        round_id = session.client(store).review_bid(
            session.load_key(actor),
            resolve_hash(paper_hash, store.ledger.state.papers, "paper"),
            _journal(store, journal_id),
            fee,
        )
        appended(store, before)
        click.echo(round_id.hex)


@paper.command("cite")
@click.argument("paper_hash")
@click.option("--cite", "cites", multiple=True, required=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def paper_cite(session, paper_hash, cites, actor):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).declare_citations(
            session.load_key(actor),
            resolve_hash(paper_hash, store.ledger.state.papers, "paper"),
            parse_hashes(cites, "--cite"),
        )
        appended(store, before)


# Review rounds

@cli.group(cls=PrincipiaGroup)
def review():
    """Journal review rounds."""


def _round(store, text):
    return resolve_hash(text, store.ledger.state.rounds, "round")


def _round_step(session, round_text, actor, step, *args):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        step(session.client(store), session.load_key(actor), _round(store, round_text), *args)
        appended(store, before)


@review.command("accept")
@click.argument("round_id")
@click.option("--as", "actor", required=True)
@click.option("--approve", multiple=True)
@click.option("--confirm", help="Paying author confirming the round (local key name)")
@click.pass_obj
def review_accept(session, round_id, actor, approve, confirm):
    approvers = [session.load_key(a) for a in approve]
    confirm_key = session.load_key(confirm) if confirm else None
    _round_step(session, round_id, actor, ProtocolClient.accept_for_review, approvers, confirm_key)


@review.command("assign")
@click.argument("round_id")
@click.option("--as", "actor", required=True)
@click.pass_obj
def review_assign(session, round_id, actor):
    _round_step(session, round_id, actor, ProtocolClient.assign_reviewers)


@review.command("submit")
@click.argument("round_id")
@click.option("--score", type=int, required=True)
@click.option("--report", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def review_submit(session, round_id, score, report, actor):
    with open_store(session) as store:
        require_genesis(store)
        report_hash = store.blobs.put(Path(report).read_bytes())
        before = len(store.ledger)
        session.client(store).submit_review(session.load_key(actor), _round(store, round_id), score, report_hash)
        appended(store, before)


@review.command("decide")
@click.argument("round_id")
@click.option("--as", "actor", required=True)
@click.pass_obj
def review_decide(session, round_id, actor):
    _round_step(session, round_id, actor, ProtocolClient.decide)


@review.command("final-version")
@click.argument("round_id")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--as", "actor", required=True)
@click.pass_obj
def review_final_version(session, round_id, path, actor):
    with open_store(session) as store:
        require_genesis(store)
        version = store.blobs.put(Path(path).read_bytes())
        before = len(store.ledger)
        session.client(store).final_version(session.load_key(actor), _round(store, round_id), version)
        appended(store, before)


@review.command("vote")
@click.argument("round_id")
@click.option("--approve/--reject", required=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def review_vote(session, round_id, approve, actor):
    _round_step(session, round_id, actor, ProtocolClient.final_vote, approve)


@review.command("settle")
@click.argument("round_id")
@click.option("--as", "actor", required=True)
@click.pass_obj
def review_settle(session, round_id, actor):
    _round_step(session, round_id, actor, ProtocolClient.settle_round)


@cli.group(cls=PrincipiaGroup, name="round")
def round_group():
    """Inspect review rounds."""


@round_group.command("show")
@click.argument("round_id")
@click.pass_obj
def round_show(session, round_id):
    with open_store(session) as store:
        state = store.ledger.state
        click.echo(export_to_json(public_view(state, state.round(_round(store, round_id)))))


# Market

@cli.group(cls=PrincipiaGroup)
def market():
    """Minimal review market."""


def _submission(store, text):
    return resolve_hash(text, store.ledger.state.submissions, "submission")


@market.command("ask")
@click.option("--fee", type=int, required=True, help="Review fee R_i")
@click.option("--keyword", "keywords", multiple=True, required=True)
@click.option("--capacity", type=int, default=3, show_default=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_ask(session, fee, keywords, capacity, actor):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).market_ask(session.load_key(actor), fee, keywords, capacity)
        appended(store, before)


@market.command("submit")
@click.argument("paper_hash")
@click.option("--bid", type=int, required=True, help="Review bid R_p")
@click.option("--keyword", "keywords", multiple=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_submit(session, paper_hash, bid, keywords, actor):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        submission_id = session.client(store).market_submit(
            session.load_key(actor), resolve_hash(paper_hash, store.ledger.state.papers, "paper"), bid, keywords
        )
        appended(store, before)
        click.echo(submission_id.hex)


@market.command("sweep")
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_sweep(session, actor):
    """Match every queued submission that a feasible pool can serve."""
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        matched = session.client(store).market_sweep(session.load_key(actor))
        appended(store, before)
        click.echo(f"matched {len(matched)}")


@market.command("review")
@click.argument("submission_id")
@click.option("--score", type=int, required=True)
@click.option("--report", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_review(session, submission_id, score, report, actor):
    with open_store(session) as store:
        require_genesis(store)
        report_hash = store.blobs.put(Path(report).read_bytes())
        before = len(store.ledger)
        session.client(store).market_review(
            session.load_key(actor), _submission(store, submission_id), score, report_hash
        )
        appended(store, before)


@market.command("rate")
@click.argument("submission_id")
@click.option("--score", "scores", multiple=True, required=True, help="PERSON=SCORE for each other reviewer")
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_rate(session, submission_id, scores, actor):
    parsed = {}
    for item in scores:
        person, sep, value = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected PERSON=SCORE, got {item!r}", param_hint="--score")
        try:
            parsed[session.person(person)] = int(value)
        except ValueError:
            raise click.BadParameter(f"score must be an integer, got {value!r}", param_hint="--score") from None
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).market_rate(session.load_key(actor), _submission(store, submission_id), parsed)
        appended(store, before)


@market.command("settle")
@click.argument("submission_id")
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_settle(session, submission_id, actor):
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).market_settle(session.load_key(actor), _submission(store, submission_id))
        appended(store, before)


@market.command("withdraw")
@click.argument("submission_id")
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_withdraw(session, submission_id, actor):
    """Withdraw a queued submission, or close one whose review period ran out."""
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).market_withdraw(session.load_key(actor), _submission(store, submission_id))
        appended(store, before)


@market.command("bid")
@click.argument("submission_id")
@click.option("--journal", "journal_id", required=True)
@click.option("--offer", type=int, required=True)
@click.option("--as", "actor", required=True)
@click.pass_obj
def market_bid(session, submission_id, journal_id, offer, actor):
    """Record a journal's bid to publish a certified paper."""
    with open_store(session) as store:
        require_genesis(store)
        before = len(store.ledger)
        session.client(store).market_journal_bid(
            session.load_key(actor), _submission(store, submission_id), _journal(store, journal_id), offer
        )
        appended(store, before)


@market.command("show")
@click.argument("submission_id")
@click.pass_obj
def market_show(session, submission_id):
    with open_store(session) as store:
        state = store.ledger.state
        click.echo(export_to_json(public_record(state, state.submission(_submission(store, submission_id)))))


@market.command("suggest")
@click.option("--keyword", "keywords", multiple=True, required=True)
@click.option("--exclude", multiple=True, help="Persons to leave out (the authors)")
@click.pass_obj
def market_suggest(session, keywords, exclude):
    """Suggest a fair bid R_p for a paper with these keywords."""
    with open_store(session) as store:
        state = store.ledger.state
        click.echo(suggest_fair_bid(
            state.profiles,
            keywords,
            session.config.fair_bid_factor,
            exclude=frozenset(session.person(p) for p in exclude),
            n=state.rules.market_reviewers,
        ))


# Reports and ledger tools

@cli.group(cls=PrincipiaGroup)
def reputation():
    """Journal, user and board scores."""


@reputation.command("report")
@click.option("--at-day", type=int, help="Evaluate as of this day")
@click.pass_obj
def reputation_report(session, at_day):
    with open_store(session) as store:
        result = compute_reputation(store.ledger.state, session.config, at_day)
        click.echo(generate_report_text(
            "reputation",
            {
                "at_day": store.ledger.state.day if at_day is None else at_day,
                "iterations": result.iterations,
                "residual": result.residual,
                "converged": result.converged,
            },
            {"journals": result.journal_table(), "persons": result.person_table()},
        ), nl=False)


@cli.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--metrics", "metrics_path", type=click.Path(dir_okay=False), help="Also write metrics TSV here")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Write the run's ledger to this directory")
@click.option("--check-invariants", is_flag=True, help="Check protocol invariants after every event")
@click.pass_obj
def simulate(session, scenario, metrics_path, out_dir, check_invariants):
    """Run a scenario file; prints metrics and a run summary."""
    result = Simulation(load_scenario(scenario), session.config, check_invariants).run()
    if metrics_path:
        export_to_tsv(result.metrics, metrics_path)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_events(out / "ledger.bin", result.ledger.events)
        (out / "ledger.salt").write_bytes(result.ledger.state.salt)
        (out / "ledger.txt").write_text("\n".join(result.ledger.lines()) + "\n", encoding="utf-8")
    click.echo(export_to_tsv(result.metrics), nl=False)
    click.echo(summary_block("run summary", result.summary), nl=False)


@cli.command("replay")
@click.option("--verify", is_flag=True, help="Also check money conservation event by event")
@click.pass_obj
def replay_cmd(session, verify):
    """Replay the ledger from disk and print its head and state digest."""
    data_dir = Path(session.config.data_dir)
    salt_path = session.config.salt_path
    salt = salt_path.read_bytes() if salt_path.exists() else b""
    ledger = replay(read_events(session.config.ledger_path), salt, check_conservation=verify)
    pairs = list(head_summary(ledger).items())
    if verify:
        pairs.append(("verified", "ok"))
    click.echo(summary_block(f"replay {data_dir}", pairs), nl=False)


@cli.command("export")
@click.option("--format", "fmt", type=click.Choice(["tabular", "text", "json"]), default="tabular", show_default=True)
@click.option("--what", type=click.Choice(["events", "balances", "rounds", "submissions"]), default="events",
              show_default=True)
@click.pass_obj
def export_cmd(session, fmt, what):
    """Export ledger contents."""
    with open_store(session) as store:
        ledger = store.ledger
        state = ledger.state
        if fmt == "text":
            click.echo("\n".join(ledger.lines()))
            return
        if what == "events":
            rows = [
                {"seq": e.seq, "day": e.timestamp, "kind": e.kind.value, "actor": e.actor.hex, "hash": e.hash.hex}
                for e in ledger.events
            ]
        elif what == "balances":
            rows = [{"account": a, "balance": b} for a, b in sorted(state.balances.items())]
        elif what == "rounds":
            rows = [public_view(state, r) for r in state.rounds.values()]
        else:
            rows = [public_record(state, s) for s in state.submissions.values()]
        if fmt == "json":
            click.echo(export_to_json(rows))
        elif rows:
            if what in ("rounds", "submissions"):
                rows = [{k: v for k, v in row.items() if not isinstance(v, (dict, list))} for row in rows]
            click.echo(export_to_tsv(rows), nl=False)


def main():
    cli(prog_name="principia")


if __name__ == "__main__":
    main()
