"""Command-line entry point: ``dynwave <command> [--config FILE] [--key value ...]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration error,
3 numerical error (blow-up or singularity).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import COMMANDS, PRESET_PARAMS, RunConfig, parse_config
from .errors import ConfigError, NumericalError, PreconditionError, SingularityError
from .presets import COMMAND_RUNNERS, ExperimentResult, max_workers, run_preset

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _fmt(x) -> str:
    return "%.17g" % float(x)


def emit_csv(result: ExperimentResult, path, config: Optional[RunConfig] = None) -> None:
    """Write the series as CSV and a ``<path>.meta.json`` provenance sidecar."""
    path = Path(path)
    columns = list(result.series)
    n_rows = len(next(iter(result.series.values()))) if columns else 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for i in range(n_rows):
            writer.writerow([_fmt(result.series[c][i]) for c in columns])
    meta = {
        "experiment": result.name,
        "columns": columns,
        "n_rows": n_rows,
        "scalars": {k: float(v) for k, v in result.scalars.items()},
        "verdicts": [
            {"name": v.name, "value": v.value, "tolerance": v.tolerance, "passed": v.passed}
            for v in result.verdicts
        ],
        "passed": result.passed,
        "config": config.to_dict() if config is not None else None,
    }
    Path(f"{path}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _output_for(base: Optional[str], name: str, many: bool) -> Optional[Path]:
    if base is None:
        return None
    p = Path(base)
    return p.with_name(f"{p.stem}_{name}{p.suffix or '.csv'}") if many else p


def execute(config: RunConfig, out=None) -> int:
    """Run a resolved configuration; returns the exit code."""
    out = sys.stdout if out is None else out
    if config.command == "verify":
        names = [config.preset] if config.preset else list(PRESET_PARAMS)
        results = []
        for name in names:
            # each preset runs on its own parameters unless one was selected explicitly
            cfg = config if config.preset else parse_config(f"preset={name}")
            results.append((run_preset(name, cfg), cfg))
    else:
        results = [(COMMAND_RUNNERS[config.command](config), config)]

    ok = True
    for result, cfg in results:
        print(f"[{result.name}]", file=out)
        for key, val in result.scalars.items():
            print(f"  {key} = {val:.10g}", file=out)
        for v in result.verdicts:
            print(f"  {v.line()}", file=out)
        ok &= result.passed
        path = _output_for(config.output, result.name, len(results) > 1)
        if path is not None:
            emit_csv(result, path, cfg)
    return EXIT_OK if ok else EXIT_VERDICT


def _overrides(extra: Sequence[str]) -> str:
    lines = []
    it = iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise ConfigError(f"expected --key value, got {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for --{key}") from None
        lines.append(f"{key.replace('-', '_')}={value}")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="dynwave", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="key=value configuration file")
    args, extra = parser.parse_known_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
        # flags are appended after the file so they override it
        text = "\n".join([text, f"command={args.command}", _overrides(extra)])
        config = parse_config(text)
        max_workers()  # validate DYNWAVE_THREADS before any work starts
        return execute(config)
    except (ConfigError, PreconditionError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SingularityError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
