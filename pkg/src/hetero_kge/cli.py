"""Command-line interface.

Four subcommands cover the pipeline: ``build-kg`` assembles and splits a
graph bundle, ``train`` learns embeddings into a checkpoint directory,
``eval`` ranks a held-out split, ``export-embeddings`` writes entity
vectors for downstream consumers.

A run-configuration file (``--config``) supplies defaults: ``key = value``
lines under ``[subcommand]`` section headers, where keys are the long
option names.  The ``[train]`` section additionally accepts every
training-configuration field (for knobs that have no dedicated flag).
Command-line flags override file values; unknown sections or keys fail
fast.

Exit codes: 0 on success, 2 for configuration/data problems, 3 when
training diverges numerically.  ``HETERO_KGE_LOG`` sets the log level.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
import os
import sys

import click
import numpy as np

from .errors import KGEError, NumericError, ConfigError, ResolutionError
from .estimator import export_embeddings
from .evaluator import TIE_MODES, evaluate
from .graph import (
    KnowledgeGraph,
    augment_with_pseudo_nodes,
    derive_atc_hierarchy,
    format_stats,
    load_bundle,
    load_entity_types,
    load_item_table,
    load_schema,
    load_triples,
    save_bundle,
    split_triples,
)
from .scoring import FAMILIES, ScoringModel
from .table import load_checkpoint, read_vector_file
from .trainer import LOSSES, METHODS, TrainingConfig, train

log = logging.getLogger("hetero_kge")

LOG_ENV_VAR = "HETERO_KGE_LOG"


def _setup_logging():
    level_name = os.environ.get(LOG_ENV_VAR, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        raise ConfigError(f"{LOG_ENV_VAR} must be a logging level name, got {level_name!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# -- run-configuration files ---------------------------------------------------

# Training knobs that have no dedicated flag; settable via [train] in a
# config file.  Every other TrainingConfig field maps to a command option.
_TRAIN_FILE_ONLY = (
    "n_negatives", "negative_side", "exclude_known_positives",
    "gamma_init", "epsilon_init", "adagrad_eps", "checkpoint_every",
)
_TRAIN_EXTRA_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainingConfig)
                       if f.name in _TRAIN_FILE_ONLY}
_EVAL_EXTRA_FIELDS = {"ties": str, "ks": str, "filtered": bool}


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"config key {key!r} expects a boolean, got {raw!r}")


def load_run_config(path) -> dict[str, dict[str, str]]:
    """Parse `key = value` sections into {section: {key: raw string}}."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _apply_run_config(ctx: click.Context, path):
    """Turn file sections into click default maps, validating every key."""
    sections = load_run_config(path)
    commands = ctx.command.commands
    default_map: dict[str, dict] = {}
    for section, items in sections.items():
        if section not in commands:
            raise ConfigError(
                f"config section [{section}] does not name a subcommand "
                f"(expected one of {sorted(commands)})"
            )
        params = {p.name: p for p in commands[section].params}
        flag_alias = {}
        for p in commands[section].params:
            for opt in getattr(p, "opts", ()):
                if opt.startswith("--"):
                    flag_alias[opt[2:]] = p.name
        section_map: dict[str, str] = {}
        for key, raw in items.items():
            name = flag_alias.get(key, key.replace("-", "_"))
            if name in params:
                section_map[name] = raw
            elif section == "train" and name in _TRAIN_EXTRA_FIELDS:
                section_map[name] = raw
            elif section == "eval" and name in _EVAL_EXTRA_FIELDS:
                section_map[name] = raw
            else:
                raise ConfigError(f"unknown key {key!r} in config section [{section}]")
        default_map[section] = section_map
    ctx.default_map = default_map


def _extra_settings(ctx: click.Context, allowed: dict[str, type]) -> dict:
    """File-only settings for the current command, coerced to field types."""
    section = (ctx.default_map or {})
    known_params = {p.name for p in ctx.command.params}
    out = {}
    for key, raw in section.items():
        if key in known_params or key not in allowed:
            continue
        target = allowed[key]
        if target in (bool, "bool"):
            out[key] = _parse_bool(str(raw), key)
        elif target in (int, "int"):
            out[key] = int(raw)
        elif target in (float, "float"):
            out[key] = float(raw)
        else:
            out[key] = str(raw)
    return out


# -- command plumbing ------------------------------------------------------


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(body):
    try:
        body()
    except NumericError as exc:
        _fail(str(exc), 3)
    except (KGEError, OSError, ValueError) as exc:
        _fail(str(exc), 2)


def _parse_ratios(raw: str):
    parts = [p.strip() for p in str(raw).split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--ratios expects three comma-separated numbers, got {raw!r}")
    return tuple(float(p) for p in parts)


def _load_anchor_file(path):
    if path is None:
        return None
    return read_vector_file(path)


def _load_id_filter(path) -> list[str]:
    ids = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                ids.append(line)
    return ids


def _checkpoint_model(bundle_dir, ckpt_dir):
    kg = load_bundle(bundle_dir)
    table, manifest = load_checkpoint(ckpt_dir)
    if table.n_entities != kg.n_entities or table.n_relations != kg.n_relations:
        raise ConfigError(
            f"checkpoint shape ({table.n_entities} entities, {table.n_relations} relations) "
            f"does not match the bundle ({kg.n_entities}, {kg.n_relations})"
        )
    return kg, ScoringModel(table.family, table), manifest


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Run-configuration file supplying option defaults.")
@click.pass_context
def main(ctx, config_path):
    """Knowledge-graph embeddings over typed biomedical entities."""
    try:
        _setup_logging()
        if config_path:
            _apply_run_config(ctx, config_path)
    except KGEError as exc:
        _fail(str(exc), 2)


@main.command("build-kg")
@click.option("--entities", "entities_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="TSV of entity_id<TAB>type.")
@click.option("--triples", "triples_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="TSV of head<TAB>relation<TAB>tail.")
@click.option("--schema", "schema_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="TSV of relation<TAB>head_type<TAB>tail_type<TAB>sym|asym.")
@click.option("--items", "items_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Optional TSV of entity<TAB>field<TAB>text_key pseudo-node items.")
@click.option("--ratios", default="0.9,0.05,0.05", show_default=True,
              help="Train,valid,test fractions; must sum to 1.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def build_kg(entities_path, triples_path, schema_path, items_path, ratios, seed, out_dir):
    """Assemble, split and save a knowledge-graph bundle."""

    def body():
        registry = load_entity_types(entities_path)
        schema = load_schema(schema_path)
        triples = load_triples(triples_path, registry, schema)
        ratio_triple = _parse_ratios(ratios)
        tr, va, te = split_triples(triples, ratio_triple, seed)

        atc_codes = [registry.ids[i] for i in registry.entities_of_type("atc")]
        if atc_codes:
            derived = derive_atc_hierarchy(atc_codes, registry, schema)
            have = set(map(tuple, np.concatenate([tr, va, te]).tolist()))
            fresh = np.asarray([row for row in derived.tolist() if tuple(row) not in have],
                               dtype=np.int64).reshape(-1, 3)
            tr = np.concatenate([tr, fresh])
            log.info("derived %d hierarchy triples (%d new)", len(derived), len(fresh))

        kg = KnowledgeGraph(registry, schema, tr, va, te)
        if items_path:
            kg = augment_with_pseudo_nodes(kg, load_item_table(items_path))
        stats = format_stats(kg)
        save_bundle(kg, out_dir, extra_manifest={
            "seed": seed,
            "ratios": list(ratio_triple),
            "augmented": bool(items_path),
        })
        with open(os.path.join(out_dir, "stats.txt"), "w", encoding="utf-8") as fh:
            fh.write(stats)
        click.echo(stats, nl=False)
        click.echo(f"bundle written to {out_dir}")

    _guarded(body)


@main.command("train")
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.option("--model", type=click.Choice(FAMILIES), default="distmult", show_default=True)
@click.option("--dim", default=768, show_default=True, type=int)
@click.option("--loss", type=click.Choice(LOSSES), default="default", show_default=True)
@click.option("--method", type=click.Choice(METHODS), default="none", show_default=True)
@click.option("--vectors", "vectors_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Anchor vector file for init/align/augment methods.")
@click.option("--lambda", "lambda_l2", default=9e-9, show_default=True, type=float,
              help="L2 strength over batch-touched rows.")
@click.option("--lambda-align", default=1e-6, show_default=True, type=float,
              help="Alignment strength toward anchor vectors (align method).")
@click.option("--margin", default=1.0, show_default=True, type=float)
@click.option("--lr", default=0.25, show_default=True, type=float)
@click.option("--batch", default=4096, show_default=True, type=int)
@click.option("--epochs", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threads", default=1, show_default=True, type=int,
              help="Reserved for evaluation; training runs single-threaded "
                   "so results are bit-reproducible.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.pass_context
def train_cmd(ctx, bundle, model, dim, loss, method, vectors_path, lambda_l2,
              lambda_align, margin, lr, batch, epochs, seed, threads, out_dir):
    """Train embeddings on a bundle's train split."""

    def body():
        if threads and threads > 1:
            log.info("training runs single-threaded for reproducibility; --threads ignored")
        extras = _extra_settings(ctx, _TRAIN_EXTRA_FIELDS)
        config = TrainingConfig(
            family=model, dim=dim, loss=loss, method=method,
            lambda_l2=lambda_l2, lambda_align=lambda_align, margin=margin,
            learning_rate=lr, batch_size=batch, epochs=epochs, seed=seed,
            **extras,
        )
        kg = load_bundle(bundle)
        anchors = _load_anchor_file(vectors_path)
        if method in ("init", "align") and anchors is None:
            raise ConfigError(f"method {method!r} requires --vectors")
        result = train(kg, config, anchors=anchors, out_dir=out_dir)
        last = result.loss_log[-1][2] if result.loss_log else float("nan")
        click.echo(
            f"trained {config.family} d={config.dim} for epochs "
            f"{result.start_epoch}..{result.end_epoch} "
            f"({result.steps} steps, last loss {last:.6g}); checkpoint in {out_dir}"
        )

    _guarded(body)


@main.command("eval")
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.argument("checkpoint", type=click.Path(exists=True, file_okay=False))
@click.argument("split", required=False, default="test")
@click.option("--threads", default=0, show_default=True, type=int,
              help="Worker threads for ranking; 0 or 1 is serial.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Also write the report as TSV.")
@click.pass_context
def eval_cmd(ctx, bundle, checkpoint, split, threads, out_path):
    """Rank a held-out split and print per-relation and overall metrics."""

    def body():
        extras = _extra_settings(ctx, _EVAL_EXTRA_FIELDS)
        ties = extras.get("ties", "pessimistic")
        if ties not in TIE_MODES:
            raise ConfigError(f"ties must be one of {TIE_MODES}, got {ties!r}")
        ks = tuple(int(k) for k in str(extras.get("ks", "1,3,10")).split(","))
        filtered = extras.get("filtered", True)
        kg, model, _ = _checkpoint_model(bundle, checkpoint)
        report = evaluate(model, kg, split=split, ks=ks, ties=ties,
                          filtered=filtered, threads=threads)
        click.echo(report.format_table(), nl=False)
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(report.to_tsv())
            click.echo(f"report written to {out_path}")

    _guarded(body)


@main.command("export-embeddings")
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.argument("checkpoint", type=click.Path(exists=True, file_okay=False))
@click.option("--entities", "filter_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Only export ids listed in this file (one per line).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def export_cmd(bundle, checkpoint, filter_path, out_path):
    """Write entity embeddings as a vector file."""

    def body():
        kg, model, _ = _checkpoint_model(bundle, checkpoint)
        entity_ids = _load_id_filter(filter_path) if filter_path else None
        count = export_embeddings(model.table, kg, out_path, entity_ids)
        click.echo(f"exported {count} embeddings to {out_path}")

    _guarded(body)


if __name__ == "__main__":
    main()
