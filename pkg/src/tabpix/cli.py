"""Command-line toolchain: generate, render, patchify, measure.

Exit codes: 0 success, 1 usage error, 2 data error (the message names the
offending input line). The `build` subcommand runs the whole pipeline and
is byte-deterministic for a fixed config, regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterator

from . import patchkit, stats, synthgen, targets
from .errors import TabpixError
from .render import Image, RenderConfig, Setting, render, write_pgm
from .rng import Rng, mix
from .table import Table, parse_table, serialize_table

THREADS_ENV = "TABPIX_THREADS"

_SETTING_ORDER = (Setting.TCONTROL, Setting.LCONTROL, Setting.OPENE)


class DataError(TabpixError):
    """A bad input record, tagged with its 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; this toolchain reserves 2
    # for data errors, so usage problems are rethrown and mapped to 1.
    def error(self, message):
        raise _UsageError(self, message)


def _json_default(o):
    raise TypeError(f"not serializable: {o!r}")


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def read_tables(path) -> Iterator[tuple[int, Table]]:
    """Yield (line_number, table) pairs; bad lines raise DataError."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(lineno, f"invalid JSON: {e}") from e
            try:
                yield lineno, parse_table(record)
            except TabpixError as e:
                raise DataError(lineno, str(e)) from e


def _load_dist(path: str | None) -> synthgen.StructDist:
    if path is None:
        return synthgen.default_dist()
    try:
        return synthgen.load_dist(path)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        raise DataError(0, f"cannot load distribution {path}: {e}") from e


@dataclass(frozen=True)
class BuildConfig:
    """Everything `build` needs; flags override config-file keys."""

    out_dir: str
    seed: int = 0
    sizes: tuple[int, int, int] = (1000, 100, 100)
    dist_path: str | None = None
    settings: tuple[Setting, ...] = _SETTING_ORDER
    patch_setting: Setting = Setting.LCONTROL
    fit: patchkit.FitConfig = patchkit.FitConfig()
    render_cfg: RenderConfig = RenderConfig()
    workers: int = 0  # 0: use TABPIX_THREADS or the machine default


def _worker_count(requested: int) -> int:
    if requested > 0:
        return requested
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as e:
            raise DataError(0, f"{THREADS_ENV}={env!r} is not an integer") from e
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def _build_record(job: tuple) -> tuple[int, str, str, list[dict]]:
    """Produce one record end to end; safe to run in any process.

    Writes the record's image and patch files itself (paths are unique per
    record) and returns the JSONL lines for the split writers, keyed by
    record index so the parent can emit them in order.
    """
    index, split_dir, cfg = job
    dist = _load_dist(cfg.dist_path)
    rng = Rng(mix(cfg.seed ^ index))
    table = synthgen.generate_table(dist, rng, table_id=index)
    target = targets.structure_target(table)

    split = Path(split_dir)
    manifest_rows = []
    images: dict[Setting, Image] = {}
    for setting in cfg.settings:
        img = render(table, cfg.render_cfg, setting)
        images[setting] = img
        rel = f"images/{setting.value}/{index}.pgm"
        path = split / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(img, path)
        manifest_rows.append(
            {
                "id": index,
                "setting": setting.value,
                "width": img.width,
                "height": img.height,
                "path": rel,
            }
        )

    if cfg.patch_setting in images:
        fitted, scale_used, truncated = patchkit.gamma_fit(images[cfg.patch_setting], cfg.fit)
        seq = patchkit.extract_patches(fitted, cfg.fit.patch)
        rel = f"patches/{index}.tpx"
        path = split / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        patchkit.write_patches(seq, path)
        for row in manifest_rows:
            if row["setting"] == cfg.patch_setting.value:
                row.update(
                    {
                        "patches_path": rel,
                        "scale_used": scale_used,
                        "truncated": truncated,
                        "grid_rows": seq.grid_rows,
                        "grid_cols": seq.grid_cols,
                    }
                )

    table_line = _dump_line(serialize_table(table))
    target_line = _dump_line({"id": index, "target": target.text})
    return index, table_line, target_line, manifest_rows


def build_dataset(cfg: BuildConfig) -> dict:
    """Generate, render, and patchify all three splits.

    Record i is derived only from (seed, i, config), and output lines are
    ordered by record index, so reruns and different worker counts produce
    byte-identical trees.
    """
    dist = _load_dist(cfg.dist_path)  # fail early on a bad path
    del dist
    out = Path(cfg.out_dir)
    n_train, n_val, n_test = cfg.sizes
    splits = (
        ("train", 0, n_train),
        ("val", n_train, n_val),
        ("test", n_train + n_val, n_test),
    )
    workers = _worker_count(cfg.workers)
    summary: dict[str, Any] = {"out_dir": str(out), "splits": {}}

    for name, start, count in splits:
        split_dir = out / name
        split_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(start + i, str(split_dir), cfg) for i in range(count)]
        with (
            open(split_dir / "tables.jsonl", "w", encoding="utf-8") as tables_f,
            open(split_dir / "targets.jsonl", "w", encoding="utf-8") as targets_f,
            open(split_dir / "manifest.jsonl", "w", encoding="utf-8") as manifest_f,
        ):

            def write_all(results) -> None:
                for _index, table_line, target_line, manifest_rows in results:
                    tables_f.write(table_line + "\n")
                    targets_f.write(target_line + "\n")
                    for row in manifest_rows:
                        manifest_f.write(_dump_line(row) + "\n")

            if workers == 1 or count <= 1:
                write_all(map(_build_record, jobs))
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    write_all(pool.map(_build_record, jobs, chunksize=8))
        summary["splits"][name] = count
    return summary


# ---------------------------------------------------------------- commands


def _cmd_synth(args) -> int:
    dist = _load_dist(args.dist)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (
        open(out / "tables.jsonl", "w", encoding="utf-8") as tables_f,
        open(out / "targets.jsonl", "w", encoding="utf-8") as targets_f,
    ):
        for i in range(args.count):
            rng = Rng(mix(args.seed ^ i))
            if args.values == "positional":
                skeleton = synthgen.sample_structure(dist, rng)
                table = targets.positional_fill(skeleton)
                table = replace(
                    table,
                    page_title=f"Synthetic Table {i}",
                    section_title=f"Section {i}",
                )
            else:
                table = synthgen.generate_table(dist, rng, table_id=i)
            tables_f.write(_dump_line(serialize_table(table)) + "\n")
            if table.highlighted:
                target = targets.structure_target(table)
                targets_f.write(_dump_line({"id": i, "target": target.text}) + "\n")
    return 0


def _cmd_ssl_targets(args) -> int:
    with open(args.out, "w", encoding="utf-8") as out_f:
        masked_f = open(args.masked_tables, "w", encoding="utf-8") if args.masked_tables else None
        try:
            for index, (lineno, table) in enumerate(read_tables(args.tables)):
                if args.objective == "structure":
                    try:
                        target = targets.structure_target(table)
                    except TabpixError as e:
                        raise DataError(lineno, str(e)) from e
                    out_f.write(_dump_line({"id": index, "target": target.text}) + "\n")
                else:
                    n_cells = sum(len(r) for r in table.rows)
                    k = min(args.mask_k, n_cells)
                    rng = Rng(mix(args.seed ^ index))
                    try:
                        masked = targets.mask_cells(table, k, rng)
                    except TabpixError as e:
                        raise DataError(lineno, str(e)) from e
                    out_f.write(_dump_line({"id": index, "answer": masked.answer}) + "\n")
                    if masked_f:
                        masked_f.write(
                            _dump_line(serialize_table(masked.masked_table)) + "\n"
                        )
        finally:
            if masked_f:
                masked_f.close()
    return 0


def _parse_settings(text: str, parser) -> tuple[Setting, ...]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    out = []
    for name in names:
        try:
            out.append(Setting(name))
        except ValueError:
            raise _UsageError(parser, f"unknown setting {name!r}")
    if not out:
        raise _UsageError(parser, "no settings given")
    return tuple(out)


def _cmd_render(args, parser) -> int:
    settings = _parse_settings(args.settings, parser)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RenderConfig()
    with open(out / "manifest.jsonl", "w", encoding="utf-8") as manifest_f:
        for index, (lineno, table) in enumerate(read_tables(args.tables)):
            for setting in settings:
                try:
                    img = render(table, cfg, setting)
                except TabpixError as e:
                    raise DataError(lineno, str(e)) from e
                rel = f"images/{setting.value}/{index}.pgm"
                path = out / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                write_pgm(img, path)
                manifest_f.write(
                    _dump_line(
                        {
                            "id": index,
                            "setting": setting.value,
                            "width": img.width,
                            "height": img.height,
                            "path": rel,
                        }
                    )
                    + "\n"
                )
    return 0


def _cmd_patchify(args) -> int:
    from .render import read_pgm

    try:
        fit = patchkit.FitConfig(max_patches=args.max_patches, patch=args.patch, gamma=args.gamma)
    except ValueError as e:
        raise _UsageError(build_parser(), str(e)) from e
    root = Path(args.manifest).parent
    out = Path(args.out) if args.out else root
    out.mkdir(parents=True, exist_ok=True)
    with (
        open(args.manifest, "r", encoding="utf-8") as manifest_f,
        open(out / "patch_manifest.jsonl", "w", encoding="utf-8") as out_f,
    ):
        for lineno, line in enumerate(manifest_f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(lineno, f"invalid JSON: {e}") from e
            if row.get("setting") != args.setting:
                continue
            if "path" not in row or "id" not in row:
                raise DataError(lineno, "manifest row lacks 'path' or 'id'")
            try:
                img = read_pgm(root / row["path"])
            except (OSError, TabpixError) as e:
                raise DataError(lineno, f"cannot read image: {e}") from e
            fitted, scale_used, truncated = patchkit.gamma_fit(img, fit)
            seq = patchkit.extract_patches(fitted, fit.patch)
            rel = f"patches/{row['id']}.tpx"
            (out / "patches").mkdir(parents=True, exist_ok=True)
            patchkit.write_patches(seq, out / rel)
            row.update(
                {
                    "patches_path": rel,
                    "scale_used": scale_used,
                    "truncated": truncated,
                    "grid_rows": seq.grid_rows,
                    "grid_cols": seq.grid_cols,
                }
            )
            out_f.write(_dump_line(row) + "\n")
    return 0


def _cmd_stats(args) -> int:
    def tables():
        for _lineno, table in read_tables(args.tables):
            yield table

    report = stats.size_histogram(
        tables(), RenderConfig(), k=args.buckets, budget_px=args.budget
    )
    if args.targets:
        lengths = []
        with open(args.targets, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    lengths.append(len(targets.tokenize_target(row["target"])))
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise DataError(lineno, f"bad target row: {e}") from e
        report["length_coverage"] = stats.length_coverage(lengths, args.cap)
        report["length_cap"] = args.cap
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _cmd_extract_dist(args) -> int:
    def tables():
        for _lineno, table in read_tables(args.tables):
            yield table

    try:
        dist = synthgen.extract_dist(tables())
    except TabpixError as e:
        if isinstance(e, DataError):
            raise
        raise DataError(0, str(e)) from e
    synthgen.save_dist(dist, args.out)
    return 0


def _cmd_build(args, parser) -> int:
    file_cfg: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                file_cfg = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(0, f"cannot load config {args.config}: {e}") from e
        if not isinstance(file_cfg, dict):
            raise DataError(0, "config file must hold a JSON object")

    def pick(flag_value, key, fallback):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, fallback)

    out_dir = pick(args.out, "out_dir", None)
    if out_dir is None:
        raise _UsageError(parser, "build needs --out or an out_dir config key")
    sizes = (
        pick(args.train, "train", 1000),
        pick(args.val, "val", 100),
        pick(args.test, "test", 100),
    )
    settings = pick(args.settings, "settings", "tcontrol,lcontrol,opene")
    try:
        if isinstance(settings, str):
            settings = _parse_settings(settings, parser)
        else:
            settings = tuple(Setting(s) for s in settings)
        patch_setting = Setting(pick(args.patch_setting, "patch_setting", "lcontrol"))
        fit = patchkit.FitConfig(
            max_patches=pick(args.max_patches, "max_patches", 2048),
            patch=pick(args.patch, "patch", 16),
            gamma=pick(args.gamma, "gamma", 0.39),
        )
    except ValueError as e:
        raise _UsageError(parser, str(e)) from e
    cfg = BuildConfig(
        out_dir=out_dir,
        seed=pick(args.seed, "seed", 0),
        sizes=sizes,
        dist_path=pick(args.dist, "dist", None),
        settings=settings,
        patch_setting=patch_setting,
        fit=fit,
        workers=pick(args.workers, "workers", 0),
    )
    summary = build_dataset(cfg)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tabpix", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic tables and targets")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dist", help="distribution JSON (default: built-in)")
    p.add_argument("--values", choices=("identifiers", "positional"), default="identifiers")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("ssl-targets", help="derive training targets from tables")
    p.add_argument("--tables", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--objective", choices=("structure", "mask"), default="structure")
    p.add_argument("--mask-k", type=int, default=1, help="cells to mask per table")
    p.add_argument("--masked-tables", help="where to write masked tables (mask objective)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("render", help="rasterize tables to PGM images")
    p.add_argument("--tables", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--settings", default="tcontrol,lcontrol,opene")

    p = sub.add_parser("patchify", help="fit rendered images into patch files")
    p.add_argument("--manifest", required=True, help="manifest.jsonl from render")
    p.add_argument("--out", help="output directory (default: manifest directory)")
    p.add_argument("--setting", default="lcontrol")
    p.add_argument("--max-patches", type=int, default=2048)
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--gamma", type=float, default=0.39)

    p = sub.add_parser("stats", help="size and length statistics for a corpus")
    p.add_argument("--tables", required=True)
    p.add_argument("--buckets", type=int, default=stats.DEFAULT_BUCKETS)
    p.add_argument("--budget", type=int, default=stats.DEFAULT_BUDGET_PX)
    p.add_argument("--targets", help="targets.jsonl for length coverage")
    p.add_argument("--cap", type=int, default=128)
    p.add_argument("--out")

    p = sub.add_parser("extract-dist", help="measure a structure distribution")
    p.add_argument("--tables", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="run the full dataset pipeline")
    p.add_argument("--config", help="JSON config; flags override its keys")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--train", type=int)
    p.add_argument("--val", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--dist")
    p.add_argument("--settings")
    p.add_argument("--patch-setting")
    p.add_argument("--max-patches", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--workers", type=int)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser, "a subcommand is required")
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "ssl-targets":
            return _cmd_ssl_targets(args)
        if args.command == "render":
            return _cmd_render(args, parser)
        if args.command == "patchify":
            return _cmd_patchify(args)
        if args.command == "stats":
            return _cmd_stats(args)
        if args.command == "extract-dist":
            return _cmd_extract_dist(args)
        if args.command == "build":
            return _cmd_build(args, parser)
        raise _UsageError(parser, f"unknown command {args.command!r}")
    except _UsageError as e:
        print(e.parser.format_usage(), file=sys.stderr, end="")
        print(f"tabpix: error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"tabpix: error: {e}", file=sys.stderr)
        return 2
    except TabpixError as e:
        print(f"tabpix: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"tabpix: error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
