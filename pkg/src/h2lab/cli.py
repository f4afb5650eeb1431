"""h2lab command line: `h2lab <subcommand> --config cfg.json --out DIR [--seed N] [--workers N]`.

Exit codes: 0 ok, 2 configuration error, 3 budget exceeded.  Every CSV starts with a
`# config_sha256=...` line followed by the column header.  Outputs depend only on
the configuration and seed, never on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import experiments as ex
from .criterion import NotClosedOrbitPresentation, relation_to_json, solve_relations, teichmuller_criterion
from .lattice import LatticePair, basis_from_json
from .nondivergence import SublevelBudgetExceeded
from .prototypes import enumerate_eigenform_prototypes, enumerate_split_prototypes, lshape_splitting
from .sampling import haar_matrices, rng_for, seeded_pairs
from .spectra import PROBE_COLUMNS, OrbitTooLarge, probe_row
from .surface import BudgetExceeded

EXIT_CONFIG = 2
EXIT_BUDGET = 3


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "prototypes": {"D_min": 5, "D_max": 100},
    "flowstats": {"n_pairs": 20, "t_list": [0, 4, 8, 12], "eps_list": [0.05, 0.1, 0.2], "interval": [0, 1]},
    "equidist_X": {
        "n_pairs": 2,
        "include_closed_orbit": True,
        "t_list": [2, 4, 6, 8, 10, 12, 14],
        "r_resolution": 100_000,
        "bumps": list(ex.DEFAULT_PAIR_BUMPS),
    },
    "equidist_WD": {"m_list": [1, 2, 3, 4, 5], "t_list": [2, 4, 6, 8, 10, 12, 14], "r_resolution": 100_000},
    "density": {
        "source": {"kind": "seeded"},
        "targets_D": [5, 8, 12, 13, 16],
        "t_list": [0, 2, 4, 6, 8],
        "r_resolution": 10_000,
        "rho": 0.5,
    },
    "spectra": {"d_min": 4, "d_max": 30, "model": "gamma0", "orbit_cap": 200_000},
    "criterion": {"input": None, "lshape_d": []},
}


# ----- config --------------------------------------------------------------


def load_config(sub: str, path: str | None, seed: int | None) -> dict:
    cfg = dict(DEFAULTS[sub])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(user) - set(cfg) - {"seed"})
        if unknown:
            raise ConfigError(f"unknown config keys for {sub}: {', '.join(unknown)}")
        cfg.update(user)
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit nonnegative integer")
    _validate(sub, cfg)
    return cfg


def _nonempty_list(cfg: dict, key: str, kind=(int, float)) -> None:
    val = cfg[key]
    if not isinstance(val, list) or not val or not all(isinstance(x, kind) and not isinstance(x, bool) for x in val):
        raise ConfigError(f"{key} must be a nonempty list of numbers")


def _positive_int(cfg: dict, key: str) -> None:
    if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 1:
        raise ConfigError(f"{key} must be a positive integer")


def _validate(sub: str, cfg: dict) -> None:
    if sub == "prototypes":
        for k in ("D_min", "D_max"):
            _positive_int(cfg, k)
        if cfg["D_min"] > cfg["D_max"]:
            raise ConfigError("D_min exceeds D_max")
    elif sub == "flowstats":
        _positive_int(cfg, "n_pairs")
        _nonempty_list(cfg, "t_list")
        _nonempty_list(cfg, "eps_list")
        if any(t < 0 for t in cfg["t_list"]) or any(not 0 < e < 1 for e in cfg["eps_list"]):
            raise ConfigError("t must be >= 0 and eps in (0, 1)")
        iv = cfg["interval"]
        if not (isinstance(iv, list) and len(iv) == 2 and iv[0] < iv[1]):
            raise ConfigError("interval must be [a, b] with a < b")
    elif sub == "equidist_X":
        if not isinstance(cfg["n_pairs"], int) or cfg["n_pairs"] < 0:
            raise ConfigError("n_pairs must be a nonnegative integer")
        _nonempty_list(cfg, "t_list")
        _positive_int(cfg, "r_resolution")
        bad = [b for b in cfg["bumps"] if b not in ex.DEFAULT_PAIR_BUMPS]
        if not cfg["bumps"] or bad:
            raise ConfigError(f"bumps must be a nonempty subset of {list(ex.DEFAULT_PAIR_BUMPS)}")
    elif sub == "equidist_WD":
        _nonempty_list(cfg, "m_list", int)
        if any(m < 1 for m in cfg["m_list"]):
            raise ConfigError("m_list entries must be positive")
        _nonempty_list(cfg, "t_list")
        _positive_int(cfg, "r_resolution")
    elif sub == "density":
        _nonempty_list(cfg, "t_list")
        _nonempty_list(cfg, "targets_D", int)
        _positive_int(cfg, "r_resolution")
        src = cfg["source"]
        if not isinstance(src, dict) or src.get("kind") not in ("seeded", "lshape"):
            raise ConfigError("source.kind must be 'seeded' or 'lshape'")
        if src["kind"] == "lshape" and not isinstance(src.get("D"), int):
            raise ConfigError("source.D must be an integer for an lshape source")
        for D in cfg["targets_D"]:
            if D <= 0 or D % 4 not in (0, 1):
                raise ConfigError(f"targets_D contains invalid discriminant {D}")
    elif sub == "spectra":
        for k in ("d_min", "d_max", "orbit_cap"):
            _positive_int(cfg, k)
        if cfg["model"] not in ("gamma0", "origami"):
            raise ConfigError("model must be 'gamma0' or 'origami'")
    elif sub == "criterion":
        if cfg["input"] is None and not cfg["lshape_d"]:
            raise ConfigError("criterion needs an input file or lshape_d")
        if cfg["lshape_d"]:
            _nonempty_list(cfg, "lshape_d", int)


def config_hash(sub: str, cfg: dict) -> str:
    blob = json.dumps({"subcommand": sub, **cfg}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ----- output --------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_csv(path: Path, columns: list[str], rows: list[dict], digest: str) -> None:
    with path.open("w", newline="") as fh:
        fh.write(f"# config_sha256={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_json(path: Path, payload, digest: str) -> None:
    path.write_text(json.dumps({"config_sha256": digest, "results": payload}, indent=2, sort_keys=True) + "\n")


def run_cells(fn, cells: list, workers: int) -> list:
    """fn over cells, results in cell order whatever the worker count."""
    if workers <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


# ----- cells (top level so that worker processes can import them) ------------


def _prototype_cell(D: int):
    eig = [{"D": D, "e": p.e, "ell": p.ell, "m": p.m} for p in enumerate_eigenform_prototypes(D)]
    spl = [{"D": D, "a": p.a, "b": p.b, "c": p.c, "e": p.e} for p in enumerate_split_prototypes(D)]
    return eig, spl


def _flowstat_cell(args):
    pid, seed, t_list, eps_list, interval = args
    pair = seeded_pairs(seed, pid + 1)[pid]
    return ex.flowstat_rows(pid, pair, t_list, eps_list, interval)


def _equidist_cell(args):
    pid, P, t_list, res, bumps, refs = args
    return ex.birkhoff_rows(pid, P, t_list, res, bumps, refs)


def _wd_cell(args):
    m, g, t_list, res, ref = args
    return ex.coset_rows(m, g, t_list, res, ref)


def _density_cell(args):
    source, target, t_list, res, rho = args
    return ex.density_rows(source, target, t_list, res, rho)


def _spectra_cell(args):
    d, model, cap = args
    return probe_row(d, model, cap)


# ----- subcommands ---------------------------------------------------------


def cmd_prototypes(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Eigenform and splitting prototype tables for every valid D in range."""
    Ds = [D for D in range(cfg["D_min"], cfg["D_max"] + 1) if D % 4 in (0, 1)]
    res = run_cells(_prototype_cell, Ds, workers)
    eig = [r for e, _ in res for r in e]
    spl = [r for _, s in res for r in s]
    write_csv(out / "prototypes_eigenform.csv", ["D", "e", "ell", "m"], eig, digest)
    write_csv(out / "prototypes_split.csv", ["D", "a", "b", "c", "e"], spl, digest)


def cmd_flowstats(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Sublevel measures |{r : systole(a_t u_r x) < eps^2}| for seeded pairs."""
    cells = [(i, cfg["seed"], cfg["t_list"], cfg["eps_list"], tuple(cfg["interval"])) for i in range(cfg["n_pairs"])]
    rows = [r for part in run_cells(_flowstat_cell, cells, workers) for r in part]
    write_csv(out / "flowstats.csv", ["pair_id", "t", "eps", "measure", "ratio"], rows, digest)
    by_t = {}
    for r in rows:
        by_t.setdefault(r["t"], []).append(r)
    summary = {str(t): {"fitted_C": ex.fitted_constant(rs)} for t, rs in sorted(by_t.items())}
    write_json(out / "flowstats_summary.json", summary, digest)


def cmd_equidist_X(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Horocycle averages of the built-in test functions on X against Haar values."""
    pairs = [(f"seeded{i}", ex.pair_array(p)) for i, p in enumerate(seeded_pairs(cfg["seed"], cfg["n_pairs"]))]
    if cfg["include_closed_orbit"]:
        pairs.append(("closed_0_1_2", ex.closed_orbit_pair()))
    refs = {name: ex.pair_reference(name) for name in cfg["bumps"]}
    cells = [(pid, P, cfg["t_list"], cfg["r_resolution"], tuple(cfg["bumps"]), refs) for pid, P in pairs]
    rows = [r for part in run_cells(_equidist_cell, cells, workers) for r in part]
    cols = ["pair_id", "t", "bump", "average", "reference", "reference_error", "gap", "coarse_grid"]
    write_csv(out / "equidist_X.csv", cols, rows, digest)


def cmd_equidist_WD(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Horocycle averages on G/Gamma0(m) with tracked coset labels."""
    g = haar_matrices(rng_for(cfg["seed"], 7), 1)[0]
    ref = ex.factor_reference("bulk")
    cells = [(m, g, cfg["t_list"], cfg["r_resolution"], ref) for m in cfg["m_list"]]
    rows = [r for part in run_cells(_wd_cell, cells, workers) for r in part]
    cols = ["m", "index", "t", "bump", "average", "reference", "reference_error", "gap", "tracking_mismatch"]
    write_csv(out / "equidist_WD.csv", cols, rows, digest)


def cmd_density(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Minimal surrogate distance from a_t u_r x to prototype splittings."""
    src = cfg["source"]
    source = ex.seeded_point(cfg["seed"]) if src["kind"] == "seeded" else ex.lshape_point(src["D"])
    targets = ex.prototype_targets(cfg["targets_D"])
    cells = [(source, z, cfg["t_list"], cfg["r_resolution"], cfg["rho"]) for z in targets]
    res = run_cells(_density_cell, cells, workers)
    rows = [r for part, _ in res for r in part]
    events = [e for _, part in res for e in part]
    write_csv(out / "density.csv", ["source", "target", "D", "t", "min_distance", "r_at_min"], rows, digest)
    write_csv(out / "density_events.csv", ["D", "target", "t", "r", "distance"], events, digest)


def cmd_spectra(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Expansion probe of the Gamma0(D/4) or origami Schreier graphs."""
    ds = [d for d in range(cfg["d_min"], cfg["d_max"] + 1) if d % 2 == 0 and d >= 4]
    rows = run_cells(_spectra_cell, [(d, cfg["model"], cfg["orbit_cap"]) for d in ds], workers)
    write_csv(out / "spectra.csv", PROBE_COLUMNS, rows, digest)


def read_pairs(path: str) -> list[tuple[str, LatticePair]]:
    """JSON lines: {"id": ..., "first": [[a, b], [c, d]], "second": [[a, b], [c, d]]}, entries as text."""
    out = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: line {no}: expected an object")
        bases = []
        for field in ("first", "second"):
            if field not in obj:
                raise ConfigError(f"{path}: line {no}: missing field '{field}'")
            try:
                L = basis_from_json(obj[field])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: line {no}: field '{field}': {exc}") from exc
            if not L.exact:
                raise ConfigError(f"{path}: line {no}: field '{field}': entries must be exact (text)")
            bases.append(L)
        out.append((str(obj.get("id", no)), LatticePair(*bases)))
    return out


def criterion_record(pid: str, pair: LatticePair) -> dict:
    rec = {"id": pid}
    try:
        rel = solve_relations(pair)
    except NotClosedOrbitPresentation as exc:
        rec.update({"verdict": "undetermined", "reason": str(exc)})
        return rec
    v = teichmuller_criterion(pair)
    if v.shift is not None:
        rel = solve_relations(pair, shift=v.shift)
    rec.update(v.to_json())
    rec["relations"] = relation_to_json(rel)
    return rec


def cmd_criterion(cfg: dict, out: Path, digest: str, workers: int) -> None:
    """Teichmueller-curve verdicts for exact lattice pairs."""
    pairs = []
    if cfg["input"] is not None:
        pairs.extend(read_pairs(cfg["input"]))
    for d in cfg["lshape_d"]:
        try:
            t = lshape_splitting(d * d)
        except ValueError as exc:
            raise ConfigError(f"lshape_d: {exc}") from exc
        pairs.append((f"lshape_d{d}", LatticePair(t.lambda1, t.lambda2)))
    recs = [criterion_record(pid, p) for pid, p in pairs]
    write_json(out / "criterion.json", recs, digest)


COMMANDS = {
    "prototypes": cmd_prototypes,
    "flowstats": cmd_flowstats,
    "equidist_X": cmd_equidist_X,
    "equidist_WD": cmd_equidist_WD,
    "density": cmd_density,
    "spectra": cmd_spectra,
    "criterion": cmd_criterion,
}


def run(sub: str, config: str | None, out: str, seed: int | None = None, workers: int = 1) -> int:
    """Programmatic entry point; returns the exit code."""
    try:
        cfg = load_config(sub, config, seed)
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        COMMANDS[sub](cfg, outdir, config_hash(sub, cfg), max(1, workers))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (BudgetExceeded, SublevelBudgetExceeded, OrbitTooLarge) as exc:
        click.echo(f"budget exceeded: {exc}", err=True)
        return EXIT_BUDGET
    return 0


@click.group()
def main() -> None:
    """Experiments on genus-two translation surfaces and their absolute periods."""


def _register(name: str) -> None:
    @main.command(name=name, help=(COMMANDS[name].__doc__ or f"Run the {name} experiment."))
    @click.option("--config", "config", type=click.Path(dir_okay=False), default=None)
    @click.option("--out", "out", type=click.Path(file_okay=False), required=True)
    @click.option("--seed", type=int, default=None)
    @click.option("--workers", type=int, default=1, show_default=True)
    def _cmd(config, out, seed, workers):
        sys.exit(run(name, config, out, seed, workers))


for _name in COMMANDS:
    _register(_name)


if __name__ == "__main__":
    main()
