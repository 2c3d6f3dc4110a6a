"""Command-line surface: build-supervision, make-query, train, rewrite,
evaluate, inspect-matrix.

Configuration comes from a key = value file (``#`` comments) plus flag
overrides; flags win. Exit codes: 0 success, 1 user error, 2 internal
invariant violation. Set IURKIT_LOG to control log verbosity.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import click

from .datamodel import (DataFormat, Dialogue, TokenizeMode, Utterance,
                        build_input_sequence, load_dialogues)
from .metrics import evaluate as evaluate_corpus
from .querygen import (DependencyParse, PronounLexicon, QueryTemplate,
                       build_query, read_conllu)
from .rewrite import rewrite as rewrite_one
from .scoring import (AdamState, ModelParams, TrainConfig, TrainExample,
                      build_vocab, init_model, load_model, read_ctxvec,
                      save_model, train, with_imported_vectors)
from .supervision import (SupervisionReport, aggregate_report,
                          build_edit_matrix, diff_spans, lcs_align)

log = logging.getLogger("iurkit")

_TRUE = {"1", "true", "yes", "on"}


@dataclass
class RunConfig:
    data: str = ""
    lexicon: str = ""
    parses: str = ""
    model: str = "model.iurkit"
    out: str = "out"
    format: str = "jsonl"  # jsonl | tsv
    lang: str = "en"       # zh | en; picks tokenizer + default lexicon
    d_model: int = 32
    d_head: int = 16
    heads: int = 1
    mixer: bool = False
    lr: float = 1e-5
    batch_size: int = 16
    epochs: int = 1
    theta: float = 0.1  # presets: 0.1 (short-context), 0.05 (long-context)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    unify: bool = True
    query_mode: str = "lexicon"  # lexicon | gold (gold uses training targets)
    workers: int = 1

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        cfg = cls()
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            cfg.set(key, value.strip("\"'"))
        return cfg

    def set(self, key: str, value: str) -> None:
        spec = {f.name: f.type for f in fields(self)}
        if key not in spec:
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(self, key)
        if isinstance(current, bool):
            setattr(self, key, value.lower() in _TRUE)
        elif isinstance(current, int):
            setattr(self, key, int(value))
        elif isinstance(current, float):
            setattr(self, key, float(value))
        else:
            setattr(self, key, value)

    @property
    def tokenize_mode(self) -> TokenizeMode:
        return TokenizeMode.CHAR_CJK if self.lang == "zh" else TokenizeMode.WHITESPACE_PUNCT

    @property
    def data_format(self) -> DataFormat:
        return DataFormat.CANONICAL_JSONL if self.format == "jsonl" else DataFormat.TAB_SEPARATED

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.lr, batch_size=self.batch_size,
                           epochs=self.epochs, theta=self.theta, seed=self.seed,
                           beta1=self.beta1, beta2=self.beta2, eps=self.eps)

    def load_lexicon(self) -> PronounLexicon:
        if self.lexicon:
            return PronounLexicon.from_file(self.lexicon, self.tokenize_mode)
        return PronounLexicon.default(self.lang)

    def load_parses(self) -> list[DependencyParse]:
        return read_conllu(self.parses) if self.parses else []


class UserError(click.ClickException):
    pass


def _load_config(config_path: Optional[str], **overrides) -> RunConfig:
    cfg = RunConfig.from_file(config_path) if config_path else RunConfig()
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _gold_replace_intervals(dialogue: Dialogue) -> list[tuple[int, int]]:
    if dialogue.rewritten is None:
        return []
    alignment = lcs_align(dialogue.incomplete.tokens, dialogue.rewritten.tokens)
    spans, _ = diff_spans(dialogue.incomplete, dialogue.rewritten, alignment)
    return [s.anchor[1] for s in spans if s.anchor[0] == "replace"]


def _query_for(dialogue: Dialogue, idx: int, lexicon: PronounLexicon,
               parses: list[DependencyParse], cfg: RunConfig,
               use_gold: bool) -> QueryTemplate:
    parse = parses[idx] if idx < len(parses) else None
    gold = _gold_replace_intervals(dialogue) if use_gold else None
    if use_gold and not gold:
        gold = None  # fall back to the lexicon, then ellipsis detection
    try:
        return build_query(dialogue.incomplete, lexicon, parse, cfg.unify,
                           gold_replace_intervals=gold)
    except ValueError as exc:
        raise UserError(f"example {dialogue.example_id!r}: {exc}") from exc


def _prepare(cfg: RunConfig, need_gold: bool) -> list[TrainExample]:
    dialogues = load_dialogues(cfg.data, cfg.data_format)
    lexicon = cfg.load_lexicon()
    parses = cfg.load_parses()
    use_gold = need_gold and cfg.query_mode == "gold"
    examples = []
    for idx, dlg in enumerate(dialogues):
        if need_gold and dlg.rewritten is None:
            raise UserError(f"example {dlg.example_id!r} has no gold rewritten utterance")
        query = _query_for(dlg, idx, lexicon, parses, cfg, use_gold)
        inp = build_input_sequence(query, dlg)
        if need_gold:
            gold, _ = build_edit_matrix(dlg, inp)
        else:
            gold = None
        examples.append(TrainExample(input=inp, gold=gold,
                                     example_id=dlg.example_id, dialogue=dlg))
    return examples


def config_option(fn):
    return click.option("--config", "config_path", type=click.Path(exists=True),
                        default=None, help="key = value configuration file")(fn)


@click.group()
def cli():
    """Incomplete-utterance rewriting toolkit."""
    logging.basicConfig(level=os.environ.get("IURKIT_LOG", "WARNING").upper())


@cli.command("build-supervision")
@config_option
@click.option("--data", default=None, type=click.Path(exists=True))
@click.option("--out", default=None, help="output directory")
def cmd_build_supervision(config_path, data, out):
    """Write per-example edit matrices and an aggregate report."""
    cfg = _load_config(config_path, data=data, out=out)
    examples = _prepare(cfg, need_gold=True)
    out_dir = Path(cfg.out)
    (out_dir / "matrices").mkdir(parents=True, exist_ok=True)
    reports: list[SupervisionReport] = []
    for ex in examples:
        matrix, report = build_edit_matrix(ex.dialogue, ex.input)
        (out_dir / "matrices" / f"{ex.example_id}.json").write_text(
            matrix.to_json(), encoding="utf-8")
        reports.append(report)
    agg = aggregate_report(reports)
    (out_dir / "report.json").write_text(json.dumps(agg, ensure_ascii=False),
                                         encoding="utf-8")
    click.echo(f"full={agg['full']} partial={agg['partial']} failed={agg['failed']}")
    if agg["full"] == 0:
        raise UserError("no fully-expressible example in the corpus")


@cli.command("make-query")
@config_option
@click.option("--data", default=None, type=click.Path(exists=True))
@click.option("--out", "out_path", default="-", help="output JSONL ('-' = stdout)")
@click.option("--unify/--no-unify", default=None)
def cmd_make_query(config_path, data, out_path, unify):
    """Emit each example's fused query template for inspection."""
    cfg = _load_config(config_path, data=data, unify=unify)
    dialogues = load_dialogues(cfg.data, cfg.data_format)
    lexicon = cfg.load_lexicon()
    parses = cfg.load_parses()
    sep = "" if cfg.lang == "zh" else " "
    sink = sys.stdout if out_path == "-" else open(out_path, "w", encoding="utf-8")
    try:
        for idx, dlg in enumerate(dialogues):
            query = _query_for(dlg, idx, lexicon, parses, cfg, use_gold=False)
            rec = {"id": dlg.example_id,
                   "incomplete": dlg.incomplete.text(sep),
                   "query": query.text(sep),
                   "kind": query.kind_summary.value}
            sink.write(json.dumps(rec, ensure_ascii=False) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()


@cli.command("train")
@config_option
@click.option("--data", default=None, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None)
@click.option("--seed", default=None, type=int)
@click.option("--epochs", default=None, type=int)
@click.option("--resume", is_flag=True, help="continue from a saved checkpoint")
def cmd_train(config_path, data, model_path, seed, epochs, resume):
    """Train the scoring network and persist the model + a JSON log."""
    cfg = _load_config(config_path, data=data, model=model_path, seed=seed,
                       epochs=epochs)
    dataset = _prepare(cfg, need_gold=True)
    if resume:
        model, opt_state = load_model(cfg.model)
        if opt_state is None:
            raise UserError(f"{cfg.model}: checkpoint carries no optimizer state")
        start_epoch = opt_state.epochs_done
    else:
        vocab = build_vocab(ex.input for ex in dataset)
        model = init_model(vocab, cfg.d_model, cfg.d_head, cfg.heads,
                           seed=cfg.seed, mixer=cfg.mixer)
        opt_state, start_epoch = None, 0
    tlog, opt_state = train(dataset, cfg.train_config(), model,
                            start_epoch=start_epoch, opt_state=opt_state)
    save_model(cfg.model, model, opt_state)
    Path(cfg.model + ".log.json").write_text(tlog.to_json(), encoding="utf-8")
    if tlog.epoch_losses:
        click.echo(f"final loss {tlog.epoch_losses[-1]:.6f} "
                   f"after {opt_state.epochs_done} epochs")


def _load_model_for_inference(cfg: RunConfig, vectors: Optional[str]) -> ModelParams:
    model, _ = load_model(cfg.model)
    if vectors:
        d_model, records = read_ctxvec(vectors)
        if d_model != model.encoder.d_model:
            raise UserError(f"{vectors}: d_model {d_model} does not match model "
                            f"{model.encoder.d_model}")
        model = with_imported_vectors(model, records)
    return model


@cli.command("rewrite")
@config_option
@click.option("--data", default=None, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None)
@click.option("--theta", default=None, type=float)
@click.option("--unify/--no-unify", default=None)
@click.option("--vectors", default=None, type=click.Path(exists=True),
              help="imported contextual-vector sidecar (.ctxvec)")
@click.option("--workers", default=None, type=int)
@click.option("--out", "out_path", default="-", help="output JSONL ('-' = stdout)")
def cmd_rewrite(config_path, data, model_path, theta, unify, vectors, workers, out_path):
    """Rewrite every dialogue in the input JSONL."""
    cfg = _load_config(config_path, data=data, model=model_path, theta=theta,
                       unify=unify, workers=workers)
    if not Path(cfg.model).exists():
        raise UserError(f"model file not found: {cfg.model}")
    model = _load_model_for_inference(cfg, vectors)
    dialogues = load_dialogues(cfg.data, cfg.data_format)
    lexicon = cfg.load_lexicon()
    parses = cfg.load_parses()
    sep = "" if cfg.lang == "zh" else " "

    def run(item):
        idx, dlg = item
        parse = parses[idx] if idx < len(parses) else None
        out, _ = rewrite_one(dlg, model, cfg.theta, lexicon, parse, cfg.unify)
        return {"id": dlg.example_id, "rewritten": out.text(sep)}

    items = list(enumerate(dialogues))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, items))  # map preserves input order
    else:
        results = [run(it) for it in items]
    sink = sys.stdout if out_path == "-" else open(out_path, "w", encoding="utf-8")
    try:
        for rec in results:
            sink.write(json.dumps(rec, ensure_ascii=False) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()


@cli.command("evaluate")
@config_option
@click.argument("hyp", type=click.Path(exists=True))
@click.argument("ref", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="print JSON instead of a table")
def cmd_evaluate(config_path, hyp, ref, as_json):
    """Score a hypothesis file against a reference file (one utterance per line)."""
    cfg = _load_config(config_path)
    mode = cfg.tokenize_mode

    def read(path):
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return [Utterance.from_text(line, mode) for line in lines]

    hyps, refs = read(hyp), read(ref)
    if len(hyps) != len(refs):
        raise UserError(f"line counts differ: {len(hyps)} vs {len(refs)}")
    if not hyps:
        raise UserError("empty corpus")
    result = evaluate_corpus(hyps, refs)
    click.echo(result.to_json() if as_json else result.table())


@cli.command("inspect-matrix")
@config_option
@click.argument("example_id")
@click.option("--data", default=None, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None)
@click.option("--theta", default=None, type=float)
@click.option("--vectors", default=None, type=click.Path(exists=True))
@click.option("--precise", is_flag=True, help="grids as 16-significant-digit strings")
def cmd_inspect_matrix(config_path, example_id, data, model_path, theta,
                       vectors, precise):
    """Dump decoding diagnostics (grids, labels, spans) for one example."""
    cfg = _load_config(config_path, data=data, model=model_path, theta=theta)
    if not Path(cfg.model).exists():
        raise UserError(f"model file not found: {cfg.model}")
    model = _load_model_for_inference(cfg, vectors)
    dialogues = load_dialogues(cfg.data, cfg.data_format)
    lexicon = cfg.load_lexicon()
    parses = cfg.load_parses()
    for idx, dlg in enumerate(dialogues):
        if dlg.example_id == example_id:
            parse = parses[idx] if idx < len(parses) else None
            _, diag = rewrite_one(dlg, model, cfg.theta, lexicon, parse, cfg.unify)
            click.echo(diag.to_json(precise=precise))
            return
    raise UserError(f"example id {example_id!r} not found in {cfg.data}")


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.ClickException,) as exc:
        exc.show()
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.Abort:
        return 1
    except Exception as exc:  # internal invariant violation
        click.echo(f"internal error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
