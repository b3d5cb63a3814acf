"""revctl: operator CLI. Serve the API, seed captures, run mining, write
reports, simulate payment streams, and train or evaluate the fraud scorer.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import secrets as _secrets
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from .agent import (
    ALERT_THRESHOLD,
    Birgent,
    CODE_TTL_HOURS,
    LabeledExample,
    FeatureVector,
    ann_train,
    evaluate,
    load_model,
    save_model,
    zero_model,
)
from .domain import RevsysError
from .miner import (
    NoEarningsRecords,
    TierRateGuide,
    default_rate_guide,
    load_rate_guide,
    report_from_pool,
    run_extraction,
)
from .pool import DataPool
from .service import (
    ApiError,
    FileSpoolNotifier,
    SESSION_TTL_MINUTES,
    create_app,
    ingest_capture_csv,
)
from .simulate import (
    SimulationSpec,
    load_labeled_csv,
    read_spool_file,
    run_simulation,
)


class ConfigInvalid(RevsysError):
    code = "ConfigInvalid"


@dataclass(frozen=True)
class Config:
    pool_path: str
    host: str = "127.0.0.1"
    port: int = 8000
    admin_username: str = "admin"
    admin_password: str = "change-me"
    session_ttl_minutes: int = SESSION_TTL_MINUTES
    static_dir: str = ""
    threshold: float = ALERT_THRESHOLD
    secret_path: str = "mac-secret.key"
    model_path: str = ""
    code_ttl_hours: int = CODE_TTL_HOURS
    rate_guide_path: str = ""
    spool_path: str = "notify.jsonl"

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"


def load_config(path: str | Path) -> Config:
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    p = Path(path)
    if not p.exists():
        raise ConfigInvalid(f"config file not found: {p}")
    try:
        doc = tomllib.loads(p.read_text(encoding="utf-8"))
    except Exception as exc:
        raise ConfigInvalid(f"config does not parse as TOML: {exc}")
    pool = doc.get("pool", {})
    svc = doc.get("service", {})
    agent = doc.get("agent", {})
    miner = doc.get("miner", {})
    notify = doc.get("notify", {})
    if "path" not in pool:
        raise ConfigInvalid("config needs [pool] path")
    base = p.parent

    def _resolve(raw: str) -> str:
        return str((base / raw).resolve()) if raw and not Path(raw).is_absolute() else raw

    try:
        return Config(
            pool_path=_resolve(str(pool["path"])),
            host=str(svc.get("host", "127.0.0.1")),
            port=int(svc.get("port", 8000)),
            admin_username=str(svc.get("admin_username", "admin")),
            admin_password=str(svc.get("admin_password", "change-me")),
            session_ttl_minutes=int(svc.get("session_ttl_minutes", SESSION_TTL_MINUTES)),
            static_dir=_resolve(str(svc.get("static_dir", ""))),
            threshold=float(agent.get("threshold", ALERT_THRESHOLD)),
            secret_path=_resolve(str(agent.get("secret_path", "mac-secret.key"))),
            model_path=_resolve(str(agent.get("model_path", ""))),
            code_ttl_hours=int(agent.get("code_ttl_hours", CODE_TTL_HOURS)),
            rate_guide_path=_resolve(str(miner.get("rate_guide_path", ""))),
            spool_path=_resolve(str(notify.get("spool_path", "notify.jsonl"))),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad config value: {exc}")


def _guide_from(config: Config) -> TierRateGuide:
    if config.rate_guide_path:
        return load_rate_guide(config.rate_guide_path)
    return default_rate_guide()


def _open_pool(config: Config) -> DataPool:
    Path(config.pool_path).mkdir(parents=True, exist_ok=True)
    return DataPool(config.pool_path)


def _load_secret(config: Config) -> bytes:
    p = Path(config.secret_path)
    if not p.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(_secrets.token_bytes(32))
    return p.read_bytes()


def _fail(message: str) -> None:
    click.echo(message, err=True)
    sys.exit(1)


@click.group()
def main():
    """Revenue collection operations console."""


@main.command()
@click.option("--config", "config_path", default="rev.toml", show_default=True,
              help="TOML config file.")
def serve(config_path: str):
    """Run the HTTP workflow service until interrupted."""
    import uvicorn

    try:
        config = load_config(config_path)
        pool = _open_pool(config)
        model = load_model(config.model_path) if config.model_path else zero_model()
        agent = Birgent(pool, _load_secret(config), model=model,
                        alert_threshold=config.threshold,
                        code_ttl_hours=config.code_ttl_hours)
        static_dir = config.static_dir or None
        if static_dir and not Path(static_dir).is_dir():
            raise ConfigInvalid(f"static_dir is not a directory: {static_dir}")
        app = create_app(
            pool, agent, FileSpoolNotifier(config.spool_path),
            guide=_guide_from(config),
            admin_username=config.admin_username,
            admin_password=config.admin_password,
            session_ttl_minutes=config.session_ttl_minutes,
            static_dir=static_dir,
        )
        app.router.add_event_handler("shutdown", pool.checkpoint)
    except RevsysError as exc:
        _fail(str(exc))
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        if isinstance(exc, SystemExit) and not exc.code:
            return
        _fail(f"cannot serve on {config.base_url}: {exc}")
    finally:
        pool.close()


@main.command()
@click.option("--config", "config_path", default="rev.toml", show_default=True)
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
def seed(config_path: str, csv_path: str):
    """Ingest a capture CSV straight into the pool."""
    try:
        config = load_config(config_path)
        with _open_pool(config) as pool:
            text = Path(csv_path).read_text(encoding="utf-8")
            stored, rejected = ingest_capture_csv(pool, text, actor="SEED")
            pool.checkpoint()
    except ApiError as exc:  # bad CSV header surfaces as the ingest API error
        _fail(str(exc.body.get("detail", exc)))
    except RevsysError as exc:
        _fail(str(exc))
    click.echo(f"stored {len(stored)} rows, rejected {len(rejected)}")
    for item in rejected:
        click.echo(f"  row {item['row']}: {item['reason']}", err=True)


@main.command()
@click.option("--config", "config_path", default="rev.toml", show_default=True)
def mine(config_path: str):
    """Cleanse, tier, and assess everything in the pool."""
    try:
        config = load_config(config_path)
        with _open_pool(config) as pool:
            report = run_extraction(pool, _guide_from(config), actor="CLI")
            pool.checkpoint()
    except NoEarningsRecords as exc:
        _fail(str(exc))  # the verbatim no-earnings screen message
    except RevsysError as exc:
        _fail(str(exc))
    click.echo(report.status_message)
    click.echo(f"run {report.run_id}: {len(report.entries)} businesses assessed, "
               f"total tax {report.total_tax_kobo} kobo")


@main.command()
@click.option("--config", "config_path", default="rev.toml", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def report(config_path: str, out_path: str):
    """Write the current per-business assessment CSV."""
    try:
        config = load_config(config_path)
        with _open_pool(config) as pool:
            csv_text = report_from_pool(pool)
    except RevsysError as exc:
        _fail(str(exc))
    Path(out_path).write_text(csv_text, encoding="utf-8")
    click.echo(f"wrote {out_path} ({len(csv_text.splitlines()) - 1} rows)")


@main.command()
@click.option("--config", "config_path", default="rev.toml", show_default=True)
@click.option("--n", "n_taxpayers", default=40, show_default=True)
@click.option("--months", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--honest", default=0.6, show_default=True)
@click.option("--suppression", default=0.15, show_default=True)
@click.option("--stolen", default=0.1, show_default=True)
@click.option("--replay", default=0.1, show_default=True)
@click.option("--fabricated", default=0.05, show_default=True)
@click.option("--ground-truth", "ground_truth_path", default="ground_truth.csv",
              show_default=True)
@click.option("--labeled", "labeled_path", default="labeled.csv", show_default=True)
@click.option("--base-url", default="", help="Override the service URL from config.")
def simulate(config_path: str, n_taxpayers: int, months: int, seed: int,
             honest: float, suppression: float, stolen: float, replay: float,
             fabricated: float, ground_truth_path: str, labeled_path: str,
             base_url: str):
    """Drive a seeded honest/fraud payment mix through a running service."""
    try:
        config = load_config(config_path)
        spec = SimulationSpec(
            n_taxpayers=n_taxpayers, months=months, seed=seed,
            fraud_mix={"honest": honest, "suppression": suppression,
                       "stolen_code": stolen, "replay": replay,
                       "fabricated_code": fabricated},
        )
        result = run_simulation(
            spec,
            admin_username=config.admin_username,
            admin_password=config.admin_password,
            spool_reader=lambda: read_spool_file(config.spool_path),
            base_url=base_url or config.base_url,
            ground_truth_path=ground_truth_path,
            labeled_path=labeled_path,
        )
    except RevsysError as exc:
        _fail(str(exc))
    click.echo(f"behaviors: {result.counts}")
    click.echo(f"transactions: {len(result.rows)}, fraud alerts: {result.alerts}")
    click.echo(f"wrote {ground_truth_path} and {labeled_path}")


@main.command()
@click.option("--examples", "examples_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--epochs", default=1500, show_default=True)
@click.option("--lr", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train(examples_path: str, model_path: str, epochs: int, lr: float, seed: int):
    """Fit the fraud scorer on a labeled feature file."""
    try:
        data = [LabeledExample(FeatureVector(*feats), label)
                for feats, label in load_labeled_csv(examples_path)]
        model = ann_train(data, epochs=epochs, learning_rate=lr, seed=seed)
        save_model(model, model_path)
        metrics = evaluate(model, data)
    except (RevsysError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {model_path} (version {model.version})")
    click.echo(f"train-set precision={metrics['precision']:.3f} "
               f"recall={metrics['recall']:.3f} auc={metrics['auc']:.3f}")


@main.command("eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--examples", "examples_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=ALERT_THRESHOLD, show_default=True)
def eval_cmd(model_path: str, examples_path: str, threshold: float):
    """Score a labeled feature file and print the metrics."""
    try:
        model = load_model(model_path)
        data = [LabeledExample(FeatureVector(*feats), label)
                for feats, label in load_labeled_csv(examples_path)]
        metrics = evaluate(model, data, threshold=threshold)
    except (RevsysError, ValueError) as exc:
        _fail(str(exc))
    click.echo(f"precision={metrics['precision']:.3f}")
    click.echo(f"recall={metrics['recall']:.3f}")
    click.echo(f"auc={metrics['auc']:.3f}")


if __name__ == "__main__":
    main()
