"""Command-line batch orchestration and reporting.

Runs three-level audits over a suite or a single test and writes two
artifacts into the output directory:

* ``report.jsonl`` - one JSON object per (test, statistic, variant) with the
  full configuration echo; byte-identical for identical configurations,
  regardless of thread count.
* ``report.txt``   - a human-readable table (rows = tests / statistics,
  columns include variant and generator) plus timing.

Exit codes: 0 run completed (extreme p-values are data, not errors),
2 usage or configuration error, 3 unwritable output path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

from ._version import __version__
from .bitstream import ConfigError, parse_generator
from .harness import get_test, run_three_level, validate_descriptor
from .nist import TestDescriptor

USAGE_EXIT = 2
OUTPUT_EXIT = 3

DEFAULT_SEED_HEX = "0123456789abcdef"

# Table-1 ordering; variants listed where a corrected form exists.
NIST_SUITE = [
    "frequency",
    "block_frequency",
    "cumulative_sums",
    "runs",
    "longest_run",
    "binary_matrix_rank",
    "dft",
    "non_overlapping_templates",
    "overlapping_template",
    "universal",
    "approximate_entropy",
    "serial",
    "linear_complexity",
]
CRUSH_SUBSET = ["sample_corr", "string_run", "savir2"]
# The analyzed-and-fixed TestU01 tests all come from Crush; none of the
# SmallCrush statistics needed a fix, so that subset is empty here.
SMALLCRUSH_SUBSET: list[str] = []

# Default first-level sample size per (tier, test), in the test's own unit.
_DESK_N = {"random_excursions": 10**6, "random_excursions_variant": 10**6,
           "sample_corr": 10**6, "string_run": 10**5, "savir2": 10**5,
           "identity": 32}
_PAPER_N = {"random_excursions": 10**7, "random_excursions_variant": 10**7,
            "sample_corr": 5 * 10**8, "string_run": 25 * 10**7, "savir2": 2 * 10**7,
            "identity": 32}
_TIER_DEFAULTS = {
    "desk": {"n": 10**5, "N": 100, "Nprime": 100, "per_test": _DESK_N},
    "paper": {"n": 10**6, "N": 1000, "Nprime": 1000, "per_test": _PAPER_N},
}

# Crude throughput model for the runtime guard, bits per minute.
_BITS_PER_MINUTE = 3.0e9


@dataclass
class RunConfig:
    suite: str = "single"
    test: str | None = None
    variant: str | None = None
    generator: str = "mt19937"
    seed: str = DEFAULT_SEED_HEX
    n: int | None = None
    N: int | None = None
    Nprime: int | None = None
    alpha: float = 0.01
    Jmin: int | None = None
    threads: int = 1
    tier: str = "desk"
    out: str = "rngaudit-out"
    force: bool = False
    budget_minutes: float = 15.0
    params: dict = field(default_factory=dict)

    def master_seed(self) -> bytes:
        try:
            seed = bytes.fromhex(self.seed)
        except ValueError as exc:
            raise ConfigError(f"--seed must be hex bytes: {exc}") from exc
        if not seed:
            raise ConfigError("--seed must be non-empty")
        return seed


_CONFIG_KEYS = {
    "suite", "test", "variant", "generator", "seed", "n", "N", "Nprime",
    "alpha", "Jmin", "threads", "tier", "out", "force", "budget_minutes",
    "params",
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rng-audit",
        description="Three-level audit of randomness-test p-value approximations.",
    )
    p.add_argument("--suite", choices=["nist", "smallcrush-subset", "crush-subset", "single"])
    p.add_argument("--test", help="single test id (implies --suite single)")
    p.add_argument("--variant", choices=["original", "modified"],
                   help="variant for a single test (suites run both where available)")
    p.add_argument("--generator", help="mt19937 | sha1 | file:<path>")
    p.add_argument("--seed", help="master seed as hex bytes")
    p.add_argument("--n", type=int, help="first-level sample size (test units)")
    p.add_argument("--N", type=int, help="second-level batch size")
    p.add_argument("--Nprime", type=int, help="number of batches (third level)")
    p.add_argument("--alpha", type=float, help="level-2 counting threshold")
    p.add_argument("--Jmin", type=int, help="cycle minimum for the excursions family")
    p.add_argument("--threads", type=int, help="worker threads (env RNG_AUDIT_THREADS)")
    p.add_argument("--tier", choices=["desk", "paper"])
    p.add_argument("--out", help="output directory (default rngaudit-out)")
    p.add_argument("--force", action="store_true", default=None,
                   help="run even if the runtime estimate exceeds the budget")
    p.add_argument("--budget-minutes", type=float, dest="budget_minutes")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--version", action="version", version=f"rng-audit {__version__}")
    return p


def parse_config(argv: list[str]) -> RunConfig:
    """Resolve flags plus optional config file into a validated RunConfig."""
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        raise SystemExit(USAGE_EXIT)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        raise SystemExit(USAGE_EXIT if exc.code not in (0, None) else exc.code)

    cfg = RunConfig()
    loaded: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            _usage_error(f"cannot read config file: {exc}")
        unknown = set(loaded) - _CONFIG_KEYS
        if unknown:
            _usage_error(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in loaded.items():
            setattr(cfg, key, value)

    for key in ("suite", "test", "variant", "generator", "seed", "n", "N",
                "Nprime", "alpha", "Jmin", "threads", "tier", "out", "force",
                "budget_minutes"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.threads is None and "threads" not in loaded:
        env_threads = os.environ.get("RNG_AUDIT_THREADS")
        if env_threads:
            try:
                cfg.threads = int(env_threads)
            except ValueError:
                _usage_error(f"RNG_AUDIT_THREADS must be an integer, got {env_threads!r}")

    if cfg.test and cfg.suite == "single":
        pass
    elif cfg.test and cfg.suite != "single":
        _usage_error("--test requires --suite single (or omit --suite)")

    try:
        _validate(cfg)
    except ConfigError as exc:
        _usage_error(str(exc))
    return cfg


def _usage_error(message: str) -> None:
    print(f"rng-audit: error: {message}", file=sys.stderr)
    raise SystemExit(USAGE_EXIT)


def _validate(cfg: RunConfig) -> None:
    if cfg.suite == "single" and not cfg.test:
        raise ConfigError("--suite single needs --test <id>")
    if cfg.test:
        get_test(cfg.test)
    if cfg.tier not in _TIER_DEFAULTS:
        raise ConfigError(f"unknown tier {cfg.tier!r}")
    if cfg.variant and cfg.suite != "single":
        raise ConfigError("--variant only applies to --test runs; suites run both variants")
    if cfg.Jmin is not None:
        if cfg.suite != "single" or not get_test(cfg.test).supports_jmin:
            raise ConfigError("--Jmin only applies to the random-excursions family")
        if cfg.Jmin < 1:
            raise ConfigError("--Jmin must be >= 1")
    for name in ("n", "N", "Nprime"):
        value = getattr(cfg, name)
        if value is not None and value < 1:
            raise ConfigError(f"--{name} must be positive")
    if not 0.0 < cfg.alpha < 1.0:
        raise ConfigError("--alpha must be in (0,1)")
    if cfg.threads < 1:
        raise ConfigError("--threads must be >= 1")
    parse_generator(cfg.generator)
    cfg.master_seed()


def resolve_descriptors(cfg: RunConfig) -> list[TestDescriptor]:
    """Expand the suite/test selection into fully-resolved descriptors."""
    tier = _TIER_DEFAULTS[cfg.tier]
    if cfg.suite == "nist":
        test_ids = NIST_SUITE
    elif cfg.suite == "crush-subset":
        test_ids = CRUSH_SUBSET
    elif cfg.suite == "smallcrush-subset":
        test_ids = SMALLCRUSH_SUBSET
    else:
        test_ids = [cfg.test]

    descriptors = []
    for test_id in test_ids:
        tdef = get_test(test_id)
        n = cfg.n if cfg.n is not None else tier["per_test"].get(test_id, tier["n"])
        params = dict(cfg.params)
        if cfg.Jmin is not None:
            params["J_min"] = cfg.Jmin
        if cfg.suite == "single":
            variants = [cfg.variant or "original"]
        else:
            variants = list(tdef.variants)
        for variant in variants:
            desc = TestDescriptor(test_id=test_id, n=n, variant=variant, params=params)
            validate_descriptor(desc)
            # echo fully-resolved parameters in the report records
            resolved = tdef.resolved_params(desc)
            descriptors.append(
                TestDescriptor(test_id=test_id, n=n, variant=variant, params=resolved)
            )
    return descriptors


def estimate_minutes(cfg: RunConfig, descriptors: list[TestDescriptor]) -> float:
    """Rough wall-time estimate from the total bit consumption."""
    total_bits = 0.0
    napps = (cfg.N or _TIER_DEFAULTS[cfg.tier]["N"]) * (
        cfg.Nprime or _TIER_DEFAULTS[cfg.tier]["Nprime"]
    )
    for desc in descriptors:
        unit = get_test(desc.test_id).unit
        if unit == "reals":
            bits = 32.0 * desc.n
        elif unit == "run-pairs":
            bits = 4.0 * desc.n
        elif unit == "draws":
            bits = 32.0 * desc.n * desc.param("t", 9)
        else:
            bits = float(desc.n)
        total_bits += bits * napps
    return total_bits / _BITS_PER_MINUTE


def emit_report(records: list[dict], outdir: str) -> tuple[str, str]:
    """Write report.jsonl and report.txt; returns the two paths."""
    try:
        os.makedirs(outdir, exist_ok=True)
        jsonl_path = os.path.join(outdir, "report.jsonl")
        txt_path = os.path.join(outdir, "report.txt")
        with open(jsonl_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
        with open(txt_path, "w", encoding="utf-8") as fh:
            fh.write(format_table(records) + "\n")
    except OSError as exc:
        print(f"rng-audit: cannot write output: {exc}", file=sys.stderr)
        raise SystemExit(OUTPUT_EXIT)
    return jsonl_path, txt_path


def format_table(records: list[dict]) -> str:
    headers = ["test", "stat", "variant", "generator", "n", "N", "N'", "h", "pvalue3", "discards"]
    rows = [
        [
            r["test_id"],
            r["stat_label"],
            r["variant"],
            r["generator"],
            str(r["n"]),
            str(r["N"]),
            str(r["Nprime"]),
            f"{r['h']:.4g}",
            r["pvalue3_str"] if r["pvalue3_str"] == "eps" else f"{r['pvalue3']:.3g}",
            str(r["discard_count"]),
        ]
        for r in records
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def run(cfg: RunConfig) -> list[dict]:
    gen = parse_generator(cfg.generator)
    tier = _TIER_DEFAULTS[cfg.tier]
    n2 = cfg.N if cfg.N is not None else tier["N"]
    n3 = cfg.Nprime if cfg.Nprime is not None else tier["Nprime"]
    descriptors = resolve_descriptors(cfg)

    est = estimate_minutes(cfg, descriptors)
    if est > cfg.budget_minutes and not cfg.force:
        _usage_error(
            f"estimated runtime {est:.0f} min exceeds budget {cfg.budget_minutes:.0f} min; "
            "pass --force to run anyway"
        )

    if not descriptors:
        print("rng-audit: selection is empty, emitting empty report", file=sys.stderr)

    seed = cfg.master_seed()
    records = []
    for desc in descriptors:
        t0 = time.perf_counter()
        reports = run_three_level(
            desc, gen, N=n2, Nprime=n3, alpha=cfg.alpha,
            master_seed=seed, threads=cfg.threads,
        )
        dt = time.perf_counter() - t0
        for rep in reports:
            records.append(rep.to_record())
        lead = reports[0]
        print(
            f"rng-audit: {desc.test_id}[{desc.variant}] done in {dt:.1f}s "
            f"(pvalue3[0]={lead.pvalue3_str}, discards={lead.discard_count})",
            file=sys.stderr,
        )
    return records


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        records = run(cfg)
        jsonl_path, _ = emit_report(records, cfg.out)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    except ConfigError as exc:
        print(f"rng-audit: error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    print(f"rng-audit: wrote {len(records)} records to {jsonl_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
