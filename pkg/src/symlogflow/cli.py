"""``symlogflow`` command line.

Exit status: 0 when the run finished (whatever the verdict), 1 on a
runtime error, 2 on a bad config, 3 when a replay finds a mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .pipeline import ConfigError, load_config, replay, run_pipeline, run_surface_suite, validate_config

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_MISMATCH = 0, 1, 2, 3


def _overrides(cfg: dict, args) -> dict:
    for key in ("backend", "precision", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "h_max", None) is not None:
        cfg.setdefault("scan", {})["h_max"] = args.h_max
    if getattr(args, "budget", None) is not None:
        cfg.setdefault("surface", {})["budget"] = args.budget
    return cfg


def _read(path: str) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(str(e)) from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return raw


def _out_dir(args, cfg: dict) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.get("output"):
        return Path(cfg["output"])
    return Path("runs") / Path(args.config).stem


def _run(args, kind: str) -> int:
    raw = _overrides(_read(args.config), args)
    if raw.get("kind") != kind:
        raise ConfigError(f"config kind is {raw.get('kind')!r}, expected {kind!r}")
    cfg = load_config(raw)
    out = _out_dir(args, cfg)
    if kind == "pipeline":
        ledger = run_pipeline(cfg, out, args.workers)
        print(f"{ledger['verdict']}: passing towers {ledger['passing_heights']} -> {out}")
    else:
        rep = run_surface_suite(cfg, out, args.workers)
        print(f"separation {'ok' if rep['separation_ok'] else 'VIOLATED'}"
              f"{'' if 'oracle_agrees' not in rep else ', lattice oracle ' + ('agrees' if rep['oracle_agrees'] else 'DISAGREES')}"
              f" -> {out}")
    return EXIT_OK


def _replay(args) -> int:
    rep = replay(args.run_dir, args.workers)
    for name in rep.checked:
        print(f"checked {name}")
    for m in rep.mismatches:
        print(f"MISMATCH {m}")
    print("identical" if rep.ok else "replay failed")
    return EXIT_OK if rep.ok else EXIT_MISMATCH


def _validate(args) -> int:
    errs = validate_config(_read(args.config))
    if errs:
        for e in errs:
            print(f"error: {e}")
        return EXIT_CONFIG
    print(json.dumps(load_config(args.config), sort_keys=True, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symlogflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("run-pipeline", help="tower hypothesis pipeline")
    rp.add_argument("config")
    rp.add_argument("--out")
    rp.add_argument("--workers", type=int, default=1)
    rp.add_argument("--backend", choices=["exact", "float"])
    rp.add_argument("--precision", type=int)
    rp.add_argument("--seed", type=int)
    rp.add_argument("--h-max", type=int, dest="h_max")

    rs = sub.add_parser("run-surface", help="cylinder counting suite")
    rs.add_argument("config")
    rs.add_argument("--out")
    rs.add_argument("--workers", type=int, default=1)
    rs.add_argument("--seed", type=int)
    rs.add_argument("--budget", type=int, help="orbit budget per direction")

    rr = sub.add_parser("replay", help="re-run a run directory and compare outputs")
    rr.add_argument("run_dir")
    rr.add_argument("--workers", type=int, default=1)

    rv = sub.add_parser("validate-config", help="check a config and print it with defaults")
    rv.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "run-pipeline":
            return _run(args, "pipeline")
        if args.command == "run-surface":
            return _run(args, "surface")
        if args.command == "replay":
            return _replay(args)
        return _validate(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - reported as a runtime failure
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
