"""Command-line front end.

Subcommands
-----------
evaluate
    Report criteria values, cost and power of a user-supplied design.
search
    Exhaustive admissible-design search over a configured space.
ce-search
    Cross-entropy stochastic search at fixed (m, C, T).
sensitivity
    Grid of per-point optimal designs over (sigma2_c, sigma2_eps), plus an
    optional variance-ratio map for a fixed design.
analytic
    Closed-form utilities.

Configurations are versioned JSON documents; allocation matrices are
headerless CSV files of integer arm labels, one row per cluster.  Each run
persists its inputs and outputs under a run directory so results can be
reproduced byte for byte (timestamps live in a separate metadata file).
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import analytic as analytic_mod
from .designspace import CustomPredicate, DesignSpace, restriction_from_name
from .inference import PowerSpec, power_report
from .model import Design, NonIdentifiableError, VarianceComponents
from .search import (
    CandidateCapExceeded,
    CEParams,
    GridSpec,
    Objective,
    criterion_from_name,
    cross_entropy_search,
    evaluate_design,
    exhaustive_search,
    sensitivity_map,
    total_observations,
    variance_ratio_map,
)

SCHEMA_VERSION = 1
EXIT_NO_ADMISSIBLE = 3

__all__ = ["main", "read_design_csv", "write_design_csv", "load_config"]


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def read_design_csv(path) -> np.ndarray:
    """Read an allocation matrix from headerless CSV of integer labels."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            row = []
            for colno, cell in enumerate(cells, start=1):
                try:
                    row.append(int(cell.strip()))
                except ValueError:
                    raise click.ClickException(
                        f"{path}: line {lineno}, column {colno}: "
                        f"{cell.strip()!r} is not an integer arm label"
                    ) from None
            rows.append(row)
    if not rows:
        raise click.ClickException(f"{path}: no rows found")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise click.ClickException(
            f"{path}: rows have differing lengths {sorted(widths)}"
        )
    return np.array(rows, dtype=int)


def write_design_csv(X, path) -> None:
    """Write an allocation matrix as headerless CSV with LF line endings."""
    X = np.asarray(X, dtype=int)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in X:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _build_vc(block: dict) -> VarianceComponents:
    if "rho" in block:
        return VarianceComponents.from_rho(block.get("sigma2", 1.0), block["rho"])
    if "rho0" in block:
        return VarianceComponents.from_correlations(
            block.get("sigma2", 1.0),
            block["rho0"],
            block["rho1"],
            block["rho2"],
        )
    return VarianceComponents(
        sigma2_c=block.get("sigma2_c", 0.0),
        sigma2_theta=block.get("sigma2_theta", 0.0),
        sigma2_s=block.get("sigma2_s", 0.0),
        sigma2_eps=block.get("sigma2_eps", 1.0),
    )


def _build_restrictions(names) -> tuple:
    out = []
    for item in names or []:
        if isinstance(item, str):
            out.append(restriction_from_name(item))
        elif isinstance(item, dict) and "allowed_sequences" in item:
            out.append(
                CustomPredicate(
                    label=item.get("label", "whitelist"),
                    allowed=tuple(
                        tuple(int(v) for v in seq)
                        for seq in item["allowed_sequences"]
                    ),
                )
            )
        else:
            raise click.ClickException(f"unrecognized restriction: {item!r}")
    return tuple(out)


def _build_space(block: dict) -> DesignSpace:
    D = block["D"]
    restrictions = _build_restrictions(block.get("restrictions"))
    T_values = block["T"] if isinstance(block["T"], list) else [block["T"]]
    C_block = block["C"]
    if isinstance(C_block, dict):
        C_sets = {int(t): tuple(cs) for t, cs in C_block.items()}
    else:
        Cs = tuple(C_block) if isinstance(C_block, list) else (C_block,)
        C_sets = {T: Cs for T in T_values}
    m_block = block["m"]
    M_sets = {}
    for T in T_values:
        for C in C_sets[T]:
            if isinstance(m_block, dict):
                lo = m_block.get("min", 2)
                hi = m_block["budget"] // T
                if hi < lo:
                    raise click.ClickException(
                        f"budget {m_block['budget']} admits no m >= {lo} "
                        f"at T={T}"
                    )
                M_sets[(C, T)] = tuple(range(lo, hi + 1))
            elif isinstance(m_block, list):
                M_sets[(C, T)] = tuple(m_block)
            else:
                M_sets[(C, T)] = (int(m_block),)
    return DesignSpace(
        T_set=tuple(T_values),
        C_sets=C_sets,
        M_sets=M_sets,
        restrictions=restrictions,
        D=D,
    )


def _build_power(block: dict | None) -> PowerSpec:
    block = block or {}
    return PowerSpec(
        alpha=block.get("alpha", 0.05),
        correction=block.get("correction", "bonferroni"),
        beta=block.get("beta", 1.0),
        delta=block.get("delta", []),
        power_type=block.get("power_type", "individual"),
    )


def _build_objective(block: dict | None) -> Objective:
    block = block or {}
    return Objective(
        w=block.get("w", 0.0),
        criterion=criterion_from_name(block.get("criterion", "E")),
        cost_fn=total_observations,
    )


def load_config(path) -> dict:
    """Parse and validate a run configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{path}: invalid JSON: {exc}") from None
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise click.ClickException(
            f"{path}: schema_version {version!r} unsupported "
            f"(expected {SCHEMA_VERSION})"
        )
    return cfg


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _run_dir(out, config_path, mode) -> Path:
    if out:
        d = Path(out)
    else:
        stem = Path(config_path).stem if config_path else mode
        d = Path("runs") / f"{stem}-{mode}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_meta(run_dir) -> None:
    _dump_json({"written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
               run_dir / "meta.json")


def _design_payload(design: Design) -> dict:
    return {
        "m": design.m,
        "C": design.C,
        "T": design.T,
        "D": design.D,
        "X": design.X.tolist(),
    }


def _pct(new: float, old: float) -> str:
    delta = 100.0 * (new - old) / old
    return f"({delta:+.1f}%)"


def _report_lines(stats: dict, compare: dict | None) -> list[str]:
    lines = []
    power = stats.get("power")
    if power is not None:
        for f, val in enumerate(power.per_hypothesis, start=1):
            cmp_txt = ""
            if compare is not None:
                cmp_txt = " " + _pct(val, compare["power"].per_hypothesis[f - 1])
            lines.append(f"P(reject H0{f} | delta{f})  {val:.4f}{cmp_txt}")
        cmb = power.combined
        cmp_txt = (
            " " + _pct(cmb, compare["power"].combined) if compare else ""
        )
        lines.append(f"P(reject any H0)       {cmb:.4f}{cmp_txt}")
    for key, label in (("cost", "f(D)"), ("D", "det(Lambda_q)"),
                       ("A", "tr(Lambda_q)/q"), ("E", "max diag(Lambda_q)")):
        val = stats[key]
        cmp_txt = " " + _pct(val, compare[key]) if compare else ""
        if key == "cost":
            lines.append(f"{label:<22} {val:.0f}{cmp_txt}")
        else:
            lines.append(f"{label:<22} {val:.4g}{cmp_txt}")
    return lines


def _stats_csv(stats: dict, path) -> None:
    power = stats.get("power")
    cols = []
    vals = []
    if power is not None:
        for f, val in enumerate(power.per_hypothesis, start=1):
            cols.append(f"power_{f}")
            vals.append(repr(float(val)))
        cols.append("power_combined")
        vals.append(repr(float(power.combined)))
    for key, col in (("cost", "cost"), ("D", "det"),
                     ("A", "trace_over_q"), ("E", "max_diag")):
        cols.append(col)
        vals.append(repr(float(stats[key])))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        fh.write(",".join(vals) + "\n")


def _power_payload(power) -> dict | None:
    if power is None:
        return None
    return {
        "critical_value": power.critical_value,
        "per_hypothesis": [float(v) for v in power.per_hypothesis],
        "combined": float(power.combined),
        "meets_requirement": bool(power.meets_requirement),
    }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@click.group()
def main():
    """Design and power analysis for multi-arm stepped-wedge trials."""


def _common_eval(cfg, design_path, m_override):
    vc = _build_vc(cfg.get("model", {}))
    spec = _build_power(cfg.get("power"))
    X = read_design_csv(design_path)
    D = cfg.get("space", {}).get("D") or int(X.max()) + 1
    m = m_override or cfg.get("design", {}).get("m")
    if m is None:
        raise click.ClickException(
            "measurements per cluster-period not given: add a top-level "
            '"design": {"m": ...} block to the config'
        )
    design = Design(int(m), X.shape[0], X.shape[1], X, int(D))
    return design, vc, spec


def _comparator_stats(cfg, compare_path, vc, spec, seed, D, m):
    if not compare_path:
        return None
    X = read_design_csv(compare_path)
    cm = cfg.get("compare", {}).get("m", m)
    design = Design(int(cm), X.shape[0], X.shape[1], X, D)
    return evaluate_design(design, vc, spec, seed)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--design", "design_path", required=True, type=click.Path(exists=True))
@click.option("--compare", "compare_path", type=click.Path(exists=True))
@click.option("--m", "m_override", type=int, help="Measurements per cluster-period.")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path())
def evaluate(config_path, design_path, compare_path, m_override, seed, out):
    """Report criteria, cost and power for a design given as CSV."""
    cfg = load_config(config_path)
    try:
        design, vc, spec = _common_eval(cfg, design_path, m_override)
        stats = evaluate_design(design, vc, spec if spec.q == design.q else None,
                                seed)
    except NonIdentifiableError as exc:
        raise click.ClickException(f"design is not identifiable: {exc}")
    compare = _comparator_stats(
        cfg, compare_path, vc,
        spec if spec.q == design.q else None, seed, design.D, design.m
    )
    for line in _report_lines(stats, compare):
        click.echo(line)
    run_dir = _run_dir(out, config_path, "evaluate")
    _dump_json(cfg, run_dir / "config.json")
    _dump_json(
        {
            "design": _design_payload(design),
            "cost": stats["cost"],
            "criteria": {"D": stats["D"], "A": stats["A"], "E": stats["E"]},
            "power": _power_payload(stats.get("power")),
            "seed": seed,
        },
        run_dir / "result.json",
    )
    _stats_csv(stats, run_dir / "table.csv")
    _write_meta(run_dir)


def _workers_option(value):
    if value is not None:
        return value
    env = os.environ.get("SWDESIGN_WORKERS")
    return int(env) if env else 1


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--workers", type=int, default=None,
              help="Process count; defaults to $SWDESIGN_WORKERS or 1.")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path())
@click.option("--compare", "compare_path", type=click.Path(exists=True))
def search(config_path, workers, seed, out, compare_path):
    """Exhaustive admissible-design search."""
    cfg = load_config(config_path)
    workers = _workers_option(workers)
    vc = _build_vc(cfg.get("model", {}))
    spec = _build_power(cfg.get("power"))
    objective = _build_objective(cfg.get("objective"))
    space = _build_space(cfg["space"])
    try:
        result = exhaustive_search(
            space, vc, spec, objective, workers=workers,
            candidate_cap=cfg.get("candidate_cap", 10**8), seed=seed,
        )
    except CandidateCapExceeded as exc:
        raise click.ClickException(str(exc))
    run_dir = _run_dir(out, config_path, "search")
    cfg_power = spec if spec.q == space.D - 1 else None
    if result.best is not None:
        stats = evaluate_design(result.best, vc, cfg_power, seed)
        compare = _comparator_stats(
            cfg, compare_path, vc, cfg_power, seed, space.D, result.best.m
        )
        for line in _report_lines(stats, compare):
            click.echo(line)
        _stats_csv(stats, run_dir / "table.csv")
        write_design_csv(result.best.X, run_dir / "design.csv")
    _dump_json(cfg, run_dir / "config.json")
    _dump_json(
        {
            "status": result.status,
            "criterion": objective.criterion.name,
            "w": objective.w,
            "best": _design_payload(result.best) if result.best else None,
            "criterion_value": result.criterion_value,
            "cost": result.cost,
            "objective_value": result.objective_value,
            "scaling": {
                k: (None if not np.isfinite(v) else v)
                for k, v in result.scaling.items()
            },
            "n_evaluated": result.n_evaluated,
            "n_feasible": result.n_feasible,
            "power": _power_payload(result.power),
            "seed": seed,
            "workers": workers,
        },
        run_dir / "result.json",
    )
    _write_meta(run_dir)
    if result.status == "no-admissible-design":
        click.echo(
            "no design meets the power requirement; the reported design is "
            "the unconstrained criterion optimum", err=True,
        )
        sys.exit(EXIT_NO_ADMISSIBLE)


@main.command(name="ce-search")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path())
def ce_search(config_path, seed, out):
    """Cross-entropy stochastic search at fixed (m, C, T)."""
    cfg = load_config(config_path)
    vc = _build_vc(cfg.get("model", {}))
    spec = _build_power(cfg.get("power"))
    objective = _build_objective(cfg.get("objective"))
    space = _build_space(cfg["space"])
    blocks = list(space.blocks())
    if len(blocks) != 1:
        raise click.ClickException(
            "ce-search requires a single (m, C, T) combination in the space"
        )
    T, C, m = blocks[0]
    ce_cfg = cfg.get("ce", {})
    params = CEParams(
        population_size=ce_cfg.get("population_size", 1000),
        elite_fraction=ce_cfg.get("elite_fraction", 0.1),
        smoothing=ce_cfg.get("smoothing", 0.7),
        max_iterations=ce_cfg.get("max_iterations", 200),
        stall_limit=ce_cfg.get("stall_limit", 20),
        seed=seed if seed is not None else ce_cfg.get("seed", 0),
    )
    result = cross_entropy_search(
        C, T, m, space.D, space.restrictions, vc, objective, spec, params
    )
    run_dir = _run_dir(out, config_path, "ce-search")
    cfg_power = spec if spec.q == space.D - 1 else None
    stats = evaluate_design(result.best, vc, cfg_power, params.seed)
    for line in _report_lines(stats, None):
        click.echo(line)
    _stats_csv(stats, run_dir / "table.csv")
    write_design_csv(result.best.X, run_dir / "design.csv")
    _dump_json(cfg, run_dir / "config.json")
    _dump_json(
        {
            "status": result.status,
            "criterion": objective.criterion.name,
            "best": _design_payload(result.best),
            "criterion_value": result.criterion_value,
            "cost": result.cost,
            "n_evaluated": result.n_evaluated,
            "power": _power_payload(result.power),
            "seed": params.seed,
        },
        run_dir / "result.json",
    )
    _write_meta(run_dir)
    if result.status == "no-admissible-design":
        click.echo("no sampled design met the power requirement", err=True)
        sys.exit(EXIT_NO_ADMISSIBLE)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--design", "design_path", type=click.Path(exists=True),
              help="Fixed design for a variance-ratio map.")
@click.option("--workers", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path())
def sensitivity(config_path, design_path, workers, seed, out):
    """Optimal-design map over a (sigma2_c, sigma2_eps) grid."""
    cfg = load_config(config_path)
    workers = _workers_option(workers)
    spec = _build_power(cfg.get("power"))
    objective = _build_objective(cfg.get("objective"))
    space = _build_space(cfg["space"])
    g = cfg.get("sensitivity", {})
    grid = GridSpec(
        sigma2_c_range=tuple(g.get("sigma2_c_range", (0.001, 0.25))),
        sigma2_eps_range=tuple(g.get("sigma2_eps_range", (0.25, 4.0))),
        steps=g.get("steps", 26),
    )
    result = sensitivity_map(grid, space, objective, spec,
                             workers=workers, seed=seed)
    run_dir = _run_dir(out, config_path, "sensitivity")
    with open(run_dir / "grid.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sigma2_c,sigma2_eps,design_id,criterion_value\n")
        for i, sc2 in enumerate(result.sigma2_c_values):
            for j, se2 in enumerate(result.sigma2_eps_values):
                fh.write(
                    f"{float(sc2)!r},{float(se2)!r},"
                    f"{result.design_ids[i, j]},"
                    f"{float(result.criterion_values[i, j])!r}\n"
                )
    designs_payload = {
        did: _design_payload(d) for did, d in result.designs.items()
    }
    payload = {"designs": designs_payload, "seed": seed}
    if design_path:
        X = read_design_csv(design_path)
        ratios = variance_ratio_map(
            X, grid, space, objective, spec,
            m=cfg.get("design", {}).get("m"), workers=workers, seed=seed,
        )
        with open(run_dir / "ratio.csv", "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write("sigma2_c,sigma2_eps,variance_ratio\n")
            for i, sc2 in enumerate(result.sigma2_c_values):
                for j, se2 in enumerate(result.sigma2_eps_values):
                    fh.write(
                        f"{float(sc2)!r},{float(se2)!r},"
                        f"{float(ratios[i, j])!r}\n"
                    )
        payload["ratio_design"] = X.tolist()
    _dump_json(cfg, run_dir / "config.json")
    _dump_json(payload, run_dir / "result.json")
    _write_meta(run_dir)
    click.echo(
        f"{len(result.designs)} distinct optimal designs over "
        f"{result.design_ids.size} grid points"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--design", "design_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def analytic(config_path, design_path, out):
    """Closed-form design quantities."""
    cfg = load_config(config_path)
    block = cfg.get("analytic")
    if not block or "op" not in block:
        raise click.ClickException('config needs an "analytic" block with "op"')
    op = block["op"]
    if op == "cluster-mean-correlation":
        value = analytic_mod.cluster_mean_correlation(
            block["m"], block["T"], block["rho"]
        )
    elif op == "rho-from-E":
        value = analytic_mod.rho_from_E(block["m"], block["T"], block["E"])
    elif op == "sequence-count":
        value = analytic_mod.optimal_sequence_count(block["E"])
    elif op == "li-proportions":
        res = analytic_mod.li_optimal_proportions(
            block["m"], block["T"], block["rho0"], block["rho1"], block["rho2"]
        )
        value = {
            "p": [float(v) for v in res.p],
            "psi": res.psi,
            "xi": res.xi,
            "gamma": res.gamma,
        }
    elif op == "empirical-proportions":
        if not design_path:
            raise click.ClickException(
                "empirical-proportions requires --design"
            )
        value = [
            float(v)
            for v in analytic_mod.empirical_proportions(
                read_design_csv(design_path)
            )
        ]
    elif op == "binary-residual-variance":
        value = analytic_mod.binary_residual_variance(block["p_bar"])
    else:
        raise click.ClickException(f"unknown analytic op {op!r}")
    click.echo(json.dumps({"op": op, "value": value}, sort_keys=True))
    run_dir = _run_dir(out, config_path, "analytic")
    _dump_json(cfg, run_dir / "config.json")
    _dump_json({"op": op, "value": value}, run_dir / "result.json")
    _write_meta(run_dir)


if __name__ == "__main__":
    main()
