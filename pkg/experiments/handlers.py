"""
Эксперименты как наборы независимых единиц работы.

Каждый обработчик знает три вещи: как разложить конфиг на единицы
(точки развёртки, у каждой свой run_id и свой SeedSequence), как
выполнить одну единицу в процессе-воркере и как собрать результаты в
CSV и сводку в главном процессе.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from diagnostics.core import (
    basin_regions,
    default_regions,
    detect_memorization,
    gibbs_region_masses,
    hwang_weights,
    mean_event_length,
    memorized_fraction,
    occupation_measure,
    tracking_error,
    transition_stats,
)
from diagnostics.schemas import Region
from estimators.core import bias_curve, variance_scaling
from estimators.schemas import EstimatorConfig
from genchain.core import (
    absorption_oracle,
    check_barycenter,
    run_until_absorbed,
)
from genchain.schemas import GenChainConfig
from landscapes.registry import make_landscape
from markov_noise.registry import make_chain
from measures.core import new_measure
from score_diffusion.core import (
    optimal_coefficients,
    reverse_simulate,
    sample_prior,
    sample_summary,
    score_training_run,
)
from score_diffusion.schemas import ScoreModel
from sgd_dynamics.core import run_batch, single_scale_batch, validate_schedule
from sgd_dynamics.ode import max_dt, ode_flow
from sgd_dynamics.schemas import ConstantSchedule
from utils.csvio import write_csv
from utils.errors import (
    DimensionMismatchError,
    Mu0NotRepresentableError,
    NonFiniteIterateError,
    NotDifferentiableError,
    StateSpaceTooLargeError,
)
from utils.seeding import make_rng, spawn_sequences

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Handler:
    units: Callable[[Any], list[dict]]
    execute: Callable[[dict], dict]
    collect: Callable[[Any, list[dict], Path], dict]


def _units(cfg, points: list[dict]) -> list[dict]:
    seqs = spawn_sequences(cfg.seed, len(points))
    return [
        {
            "run_id": i,
            "experiment": cfg.experiment,
            "params": cfg.params,
            "seq": seq,
            **point,
        }
        for i, (point, seq) in enumerate(zip(points, seqs))
    ]


def _median(values) -> float | None:
    values = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.median(values)) if values else None


def _non_increasing(values) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def _landscape(section, **extra):
    return make_landscape(section.name, {**section.params, **extra})


def _chain(section):
    return make_chain(section.name, section.params)


# ---------- collapse ----------


def _collapse_units(cfg) -> list[dict]:
    return _units(cfg, [{"a": a} for a in cfg.params.a])


def _collapse_execute(unit: dict) -> dict:
    p, a = unit["params"], unit["a"]
    cfg = GenChainConfig(
        mu0=new_measure(p.mu0), a=a, N=p.N, max_steps=p.max_steps
    )
    rows = []
    for r, seq in enumerate(unit["seq"].spawn(p.runs)):
        rep = run_until_absorbed(cfg, seq)
        trace = rep.entropy_trace[1:] if rep.steps else rep.entropy_trace
        rows.append(
            [
                a,
                r,
                rep.absorbed,
                rep.absorbing_index,
                rep.steps_to_absorb,
                rep.steps,
                rep.final_entropy,
                float(trace[-p.entropy_window :].mean()),
                rep.dirac_visits,
            ]
        )

    oracle = None
    if a == 0.0 and p.oracle:
        try:
            oracle = absorption_oracle(cfg).array.tolist()
        except (StateSpaceTooLargeError, Mu0NotRepresentableError) as e:
            logger.warning("[collapse] oracle skipped: %s", e)
    return {"run_id": unit["run_id"], "a": a, "rows": rows, "oracle": oracle}


COLLAPSE_RUNS = [
    "a",
    "run",
    "absorbed",
    "absorbing_index",
    "steps_to_absorb",
    "steps",
    "final_entropy",
    "window_entropy",
    "dirac_visits",
]
COLLAPSE_FREQ = ["a", "index", "frequency", "oracle", "band_3sigma"]


def _collapse_collect(cfg, results: list[dict], out: Path) -> dict:
    p = cfg.params
    k = len(p.mu0)
    write_csv(
        out / "collapse_runs.csv",
        COLLAPSE_RUNS,
        [row for res in results for row in res["rows"]],
    )
    points, freq_rows = [], []
    for res in results:
        rows = res["rows"]
        hits = np.array([r[3] for r in rows if r[2]], dtype=np.int64)
        freq = np.bincount(hits, minlength=k) / len(rows)
        oracle = res["oracle"]
        within = None
        for i in range(k):
            o = oracle[i] if oracle else None
            band = (
                3.0 * float(np.sqrt(o * (1.0 - o) / len(rows)))
                if o is not None
                else None
            )
            freq_rows.append([res["a"], i, float(freq[i]), o, band])
            if band is not None:
                ok = bool(abs(freq[i] - o) <= band + 1e-12)
                within = ok if within is None else within and ok
        steps = [r[4] for r in rows if r[2]]
        window = [r[7] for r in rows]
        points.append(
            {
                "a": res["a"],
                "runs": len(rows),
                "absorption_fraction": len(hits) / len(rows),
                "absorbing_index_frequencies": freq.tolist(),
                "oracle": oracle,
                "frequencies_within_3sigma": within,
                "mean_steps_to_absorb": (
                    float(np.mean(steps)) if steps else None
                ),
                "median_window_entropy": _median(window),
                "high_entropy_fraction": float(
                    np.mean([w > p.entropy_threshold for w in window])
                ),
            }
        )
    write_csv(out / "collapse_frequencies.csv", COLLAPSE_FREQ, freq_rows)
    return {"points": points}


# ---------- barycenter-check ----------


def _barycenter_units(cfg) -> list[dict]:
    return _units(cfg, [{"state": i} for i in range(cfg.params.states)])


def _barycenter_bound(N: int, replications: int) -> float:
    # 4 сигмы биномиальной оценки при худшей дисперсии 1/4
    return 4.0 * float(np.sqrt(0.25 / (N * replications)))


def _barycenter_execute(unit: dict) -> dict:
    p = unit["params"]
    rng = make_rng(unit["seq"])
    cfg = GenChainConfig(mu0=new_measure(p.mu0), a=p.a, N=p.N)
    weights = rng.dirichlet(np.ones(len(p.mu0)))
    mu = new_measure(weights)
    dev = check_barycenter(mu, cfg, p.replications, rng)
    bound = _barycenter_bound(p.N, p.replications)
    return {
        "run_id": unit["run_id"],
        "row": [unit["state"], *mu.array.tolist(), dev, bound, dev < bound],
    }


def _barycenter_collect(cfg, results: list[dict], out: Path) -> dict:
    k = len(cfg.params.mu0)
    header = ["state", *[f"w{i}" for i in range(k)]]
    header += ["max_deviation", "bound", "within_bound"]
    rows = [res["row"] for res in results]
    write_csv(out / "barycenter.csv", header, rows)
    return {
        "states": len(rows),
        "bound": rows[0][-2],
        "max_deviation": max(r[-3] for r in rows),
        "all_within_bound": all(r[-1] for r in rows),
    }


# ---------- two-scale ----------


def _two_scale_units(cfg) -> list[dict]:
    return _units(cfg, [{"mode": m} for m in cfg.params.modes])


def _tracking_bound(p, mode: str) -> float:
    a_final = p.schedule.steps(p.n_steps - 1)[0]
    # усреднённый режим следит на уровне шага, мгновенный: на sqrt(a)
    if mode.startswith("averaged"):
        return 10.0 * a_final
    return 10.0 * float(np.sqrt(a_final))


def _two_scale_execute(unit: dict) -> dict:
    p, mode = unit["params"], unit["mode"]
    L, C = _landscape(p.landscape), _chain(p.chain)
    R = p.replicas
    records = run_batch(
        L,
        C,
        p.schedule,
        mode,
        np.tile(p.x0, (R, 1)),
        np.tile(p.y0, (R, 1)),
        p.n_steps,
        unit["seq"].spawn(R),
        thin=p.thin,
        estimator=p.estimator if mode == "instantaneous" else None,
        seeds=list(range(R)),
    )
    bound = _tracking_bound(p, mode)
    rows = []
    for r, rec in enumerate(records):
        tail = None
        if L.has_branches and len(rec):
            err = tracking_error(rec, L).error
            mask = rec.n >= p.tail_start * p.n_steps
            tail = float(np.median(err[mask])) if mask.any() else None
        rows.append(
            [
                mode,
                r,
                len(rec),
                rec.diverged_at,
                float(rec.loss[-1]),
                tail,
                bound,
                None if tail is None else tail < bound,
            ]
        )
    return {
        "run_id": unit["run_id"],
        "mode": mode,
        "rows": rows,
        "records": records,
    }


def _ode_endpoint(p) -> np.ndarray:
    L, C = _landscape(p.landscape), _chain(p.chain)
    dt = max_dt(L)
    every = int(np.ceil(p.ode_horizon / dt - 1e-9))
    try:
        flow = ode_flow(
            L, C, p.x0, p.y0, None, p.ode_horizon, dt, "full", every
        )
    except NotDifferentiableError:
        flow = ode_flow(
            L, C, p.x0, p.y0, None, p.ode_horizon, dt, "frozen", every
        )
    return np.concatenate([flow.x[-1], flow.y[-1]])


TWO_SCALE_RUNS = [
    "mode",
    "replica",
    "records",
    "diverged_at",
    "final_loss",
    "tail_median_tracking",
    "tracking_bound",
    "within_bound",
    "ode_distance",
]


def _two_scale_collect(cfg, results: list[dict], out: Path) -> dict:
    p = cfg.params
    endpoint = _ode_endpoint(p) if p.ode_horizon is not None else None
    rows, points, diverged = [], [], []
    for res in results:
        distances = []
        for row, rec in zip(res["rows"], res["records"]):
            dist = None
            if endpoint is not None and rec.diverged_at is None:
                final = np.concatenate([rec.x[-1], rec.y[-1]])
                dist = float(np.max(np.abs(final - endpoint)))
            distances.append(dist)
            rows.append([*row, dist])
            if rec.diverged_at is not None:
                diverged.append(
                    {
                        "mode": res["mode"],
                        "replica": row[1],
                        "diverged_at": rec.diverged_at,
                    }
                )
            if p.write_trajectories:
                rec.to_csv(
                    out / "trajectories" / f"{res['mode']}_{row[1]}.csv"
                )
        tails = [r[5] for r in res["rows"]]
        points.append(
            {
                "mode": res["mode"],
                "replicas": len(res["rows"]),
                "median_tail_tracking": _median(tails),
                "tracking_bound": res["rows"][0][6],
                "median_final_loss": _median([r[4] for r in res["rows"]]),
                "median_ode_distance": _median(distances),
            }
        )
    write_csv(out / "two_scale_runs.csv", TWO_SCALE_RUNS, rows)
    summary = {
        "schedule": validate_schedule(p.schedule).model_dump(),
        "points": points,
        "diverged": diverged,
    }
    if endpoint is not None:
        summary["ode_endpoint"] = endpoint.tolist()
    return summary


# ---------- hwang ----------


def _hwang_units(cfg) -> list[dict]:
    return _units(cfg, [{"a": a} for a in cfg.params.steps])


def _regions(L, kind: str) -> list[Region]:
    return basin_regions(L) if kind == "basin" else default_regions(L.minima)


def _hwang_execute(unit: dict) -> dict:
    p, a = unit["params"], unit["a"]
    L = _landscape(p.landscape)
    regions = _regions(L, p.regions)
    R = p.replicas
    records = single_scale_batch(
        L,
        a,
        p.sigma,
        np.tile(p.x0, (R, 1)),
        p.n_steps,
        unit["seq"].spawn(R),
        thin=p.thin,
    )
    rows, diverged = [], []
    for r, rec in enumerate(records):
        if rec.diverged_at is not None:
            diverged.append({"a": a, "replica": r, "n": rec.diverged_at})
        occ = occupation_measure(rec, regions)
        rate = transition_stats(rec, regions).switches_per_million
        for k in range(len(regions)):
            rows.append(
                [a, r, k, occ.fractions[k], occ.normalized[k], rate]
            )

    weights = hwang_weights([m.eigenvalues for m in L.minima])
    temperature = a * p.sigma**2 / 2.0
    try:
        masses = gibbs_region_masses(L, regions, temperature)
        gibbs = (masses / masses.sum()).tolist()
    except DimensionMismatchError as e:
        logger.warning("[hwang] quadrature skipped: %s", e)
        gibbs = None
    return {
        "run_id": unit["run_id"],
        "a": a,
        "rows": rows,
        "hwang": weights.tolist(),
        "gibbs": gibbs,
        "temperature": temperature,
        "diverged": diverged,
    }


HWANG_RUNS = [
    "a",
    "replica",
    "region",
    "fraction",
    "normalized_fraction",
    "switches_per_million",
]
HWANG_SUMMARY = [
    "a",
    "region",
    "median_normalized",
    "hwang_weight",
    "gibbs_mass",
    "deviation",
]


def _hwang_collect(cfg, results: list[dict], out: Path) -> dict:
    write_csv(
        out / "hwang_runs.csv",
        HWANG_RUNS,
        [row for res in results for row in res["rows"]],
    )
    table, points, diverged = [], [], []
    for res in results:
        K = len(res["hwang"])
        medians = [
            _median([row[4] for row in res["rows"] if row[2] == k])
            for k in range(K)
        ]
        deviations = []
        for k in range(K):
            dev = abs(medians[k] - res["hwang"][k])
            deviations.append(dev)
            gibbs = res["gibbs"][k] if res["gibbs"] else None
            table.append([res["a"], k, medians[k], res["hwang"][k], gibbs])
            table[-1].append(dev)
        gibbs_vs_hwang = None
        if res["gibbs"]:
            gibbs_vs_hwang = max(
                abs(g / w - 1.0) for g, w in zip(res["gibbs"], res["hwang"])
            )
        points.append(
            {
                "a": res["a"],
                "temperature": res["temperature"],
                "median_normalized": medians,
                "hwang_weights": res["hwang"],
                "gibbs_masses": res["gibbs"],
                "max_deviation": max(deviations),
                "gibbs_vs_hwang_rel": gibbs_vs_hwang,
                "median_switches_per_million": _median(
                    [row[5] for row in res["rows"] if row[2] == 0]
                ),
            }
        )
        diverged += res["diverged"]
    write_csv(out / "hwang_summary.csv", HWANG_SUMMARY, table)
    return {"points": points, "diverged": diverged}


# ---------- memorize ----------


def _memorize_units(cfg) -> list[dict]:
    p = cfg.params
    ratio = p.epsilon / p.a
    points = [{"sweep": "base", "a": p.a, "epsilon": p.epsilon}]
    points += [
        {"sweep": "epsilon", "a": p.a, "epsilon": e} for e in p.epsilons
    ]
    points += [
        {"sweep": "step", "a": a, "epsilon": ratio * a} for a in p.steps
    ]
    return _units(cfg, points)


def _start_branch(L) -> np.ndarray:
    lam = L.branches(np.zeros(L.dim_y))
    finite = [row for row in lam if np.all(np.isfinite(row))]
    # верхняя ветвь: последняя существующая при y = 0
    return finite[-1]


def _memorize_execute(unit: dict) -> dict:
    p, a, eps = unit["params"], unit["a"], unit["epsilon"]
    L = _landscape(p.landscape, epsilon=eps)
    C = _chain(p.chain)
    R = p.replicas
    records = run_batch(
        L,
        C,
        ConstantSchedule(a=a, epsilon=eps),
        "instantaneous",
        np.tile(_start_branch(L), (R, 1)),
        np.zeros((R, L.dim_y)),
        p.n_steps,
        unit["seq"].spawn(R),
        thin=p.thin,
    )
    regions = [
        Region(center=tuple(s.center), radius=s.radius) for s in p.regions
    ]
    head = [unit["sweep"], a, eps]
    events, points, diverged = [], [], []
    for r, rec in enumerate(records):
        if rec.diverged_at is not None:
            diverged.append(
                {
                    "sweep": unit["sweep"],
                    "a": a,
                    "epsilon": eps,
                    "replica": r,
                    "diverged_at": rec.diverged_at,
                }
            )
        found = detect_memorization(rec, L, p.tol, p.min_len)
        for e in found:
            events.append(
                [
                    *head,
                    r,
                    e.branch_index,
                    e.start_n,
                    e.end_n,
                    e.length,
                    e.mean_tracking_error,
                    e.y_drift,
                ]
            )
        points.append(
            [
                *head,
                r,
                len(found),
                len({e.branch_index for e in found}),
                memorized_fraction(found, rec),
                mean_event_length(found),
                transition_stats(rec, regions).switches,
            ]
        )
    return {
        "run_id": unit["run_id"],
        "sweep": unit["sweep"],
        "a": a,
        "epsilon": eps,
        "events": events,
        "points": points,
        "diverged": diverged,
    }


MEMORIZE_EVENTS = [
    "sweep",
    "a",
    "epsilon",
    "replica",
    "branch_index",
    "start_n",
    "end_n",
    "length",
    "mean_tracking_error",
    "y_drift",
]
MEMORIZE_POINTS = [
    "sweep",
    "a",
    "epsilon",
    "replica",
    "events",
    "distinct_branches",
    "memorized_fraction",
    "mean_event_length",
    "switches",
]


def _memorize_collect(cfg, results: list[dict], out: Path) -> dict:
    write_csv(
        out / "memorize_events.csv",
        MEMORIZE_EVENTS,
        [row for res in results for row in res["events"]],
    )
    write_csv(
        out / "memorize_points.csv",
        MEMORIZE_POINTS,
        [row for res in results for row in res["points"]],
    )
    points, diverged = [], []
    for res in results:
        rows = res["points"]
        points.append(
            {
                "sweep": res["sweep"],
                "a": res["a"],
                "epsilon": res["epsilon"],
                "median_events": _median([r[4] for r in rows]),
                "branches_seen": len({e[4] for e in res["events"]}),
                "median_memorized_fraction": _median([r[6] for r in rows]),
                "median_event_length": _median([r[7] for r in rows]),
            }
        )
        diverged += res["diverged"]

    def sweep(name, key, by):
        pts = sorted((q for q in points if q["sweep"] == name), key=by)
        return [q[key] for q in pts]

    base = next(q for q in points if q["sweep"] == "base")
    lengths = sweep("epsilon", "median_event_length", lambda q: q["epsilon"])
    fractions = sweep("step", "median_memorized_fraction", lambda q: q["a"])
    return {
        "points": points,
        "base_median_events": base["median_events"],
        "base_branches_seen": base["branches_seen"],
        "event_length_non_increasing_in_epsilon": _non_increasing(lengths),
        "memorized_fraction_non_increasing_in_a": _non_increasing(fractions),
        "diverged": diverged,
    }


# ---------- estimator-bias ----------


def _estimator_units(cfg) -> list[dict]:
    return _units(cfg, [{"kind": k} for k in cfg.params.kinds])


def _estimator_execute(unit: dict) -> dict:
    p, kind = unit["params"], unit["kind"]
    L, C = _landscape(p.landscape), _chain(p.chain)
    y = p.y if p.y is not None else np.zeros(L.dim_y)
    s_bias, s_m, s_delta = unit["seq"].spawn(3)
    curve = bias_curve(
        kind, L, C, p.x, y, p.deltas, p.batch, s_bias, clip_norm=p.clip_norm
    )
    cfg = EstimatorConfig(kind=kind, delta=p.deltas[0], clip_norm=p.clip_norm)
    by_m = variance_scaling(L, C, p.x, y, cfg, s_m, ms=p.ms, reps=p.reps)
    by_delta = variance_scaling(
        L, C, p.x, y, cfg, s_delta, deltas=p.deltas, reps=p.reps
    )
    bias_rows = [
        [kind, d, b, v, s, b < 3.0 * s]
        for d, b, v, s in zip(
            curve.deltas.tolist(),
            curve.bias_norm.tolist(),
            curve.variance.tolist(),
            curve.mc_sigma.tolist(),
        )
    ]
    var_rows = [
        [kind, vs.axis, g, v]
        for vs in (by_m, by_delta)
        for g, v in zip(vs.grid.tolist(), vs.variance.tolist())
    ]
    return {
        "run_id": unit["run_id"],
        "kind": kind,
        "bias_rows": bias_rows,
        "var_rows": var_rows,
        "bias_slope": curve.slope,
        "variance_slope_m": by_m.slope,
        "variance_slope_delta": by_delta.slope,
    }


ESTIMATOR_BIAS = [
    "kind",
    "delta",
    "bias_norm",
    "variance",
    "mc_sigma",
    "within_3sigma",
]


def _estimator_collect(cfg, results: list[dict], out: Path) -> dict:
    write_csv(
        out / "estimator_bias.csv",
        ESTIMATOR_BIAS,
        [row for res in results for row in res["bias_rows"]],
    )
    write_csv(
        out / "estimator_variance.csv",
        ["kind", "axis", "grid", "variance"],
        [row for res in results for row in res["var_rows"]],
    )
    return {
        "points": [
            {
                "kind": res["kind"],
                "bias_slope": res["bias_slope"],
                "variance_slope_m": res["variance_slope_m"],
                "variance_slope_delta": res["variance_slope_delta"],
                "bias_within_3sigma": all(r[5] for r in res["bias_rows"]),
            }
            for res in results
        ]
    }


# ---------- diffusion ----------


def _diffusion_units(cfg) -> list[dict]:
    return _units(cfg, [{}])


def _diffusion_execute(unit: dict) -> dict:
    p = unit["params"]
    ou = p.process
    s_train, s_prior, s_reverse = unit["seq"].spawn(3)
    # у обучения один масштаб шага; epsilon расписания не используется
    schedule = ConstantSchedule(a=p.step, epsilon=0.5)
    base = {"run_id": unit["run_id"]}
    try:
        res = score_training_run(
            ou,
            ScoreModel.zeros(p.knots),
            schedule,
            p.n_iters,
            p.batch,
            s_train,
            tail_fraction=p.tail_fraction,
        )
        samples = reverse_simulate(
            ou, res.averaged, sample_prior(ou, p.n_samples, s_prior), s_reverse
        )
    except NonFiniteIterateError as e:
        return {**base, "diverged_at": e.fields["n"]}
    return {
        **base,
        "diverged_at": None,
        "slopes": res.averaged.slopes.tolist(),
        "intercepts": res.averaged.intercepts.tolist(),
        "loss": res.loss_trace[:: p.loss_every].tolist(),
        "samples": sample_summary(samples),
    }


def _diffusion_collect(cfg, results: list[dict], out: Path) -> dict:
    p = cfg.params
    ou = p.process
    (res,) = results
    if res["diverged_at"] is not None:
        return {"diverged": [{"stage": "diffusion", "n": res["diverged_at"]}]}
    slopes_opt, intercepts_opt = optimal_coefficients(ou, np.array(p.knots))
    rows = []
    for k, t in enumerate(p.knots):
        s, c = res["slopes"][k], res["intercepts"][k]
        rel = abs(s / slopes_opt[k] - 1.0)
        rows.append([t, s, c, float(slopes_opt[k]), float(intercepts_opt[k])])
        rows[-1].append(rel)
    write_csv(
        out / "coefficients.csv",
        [
            "knot",
            "slope",
            "intercept",
            "optimal_slope",
            "optimal_intercept",
            "slope_rel_error",
        ],
        rows,
    )
    write_csv(
        out / "loss_trace.csv",
        ["iteration", "loss"],
        [[i * p.loss_every, v] for i, v in enumerate(res["loss"])],
    )
    s = res["samples"]
    return {
        "max_slope_rel_error": max(r[5] for r in rows),
        "samples": s,
        "sample_mean_error": abs(s["mean"] - ou.data_mean),
        "sample_var_rel_error": abs(s["var"] / ou.data_var - 1.0),
        "diverged": [],
    }


HANDLERS: dict[str, Handler] = {
    "collapse": Handler(_collapse_units, _collapse_execute, _collapse_collect),
    "barycenter-check": Handler(
        _barycenter_units, _barycenter_execute, _barycenter_collect
    ),
    "two-scale": Handler(
        _two_scale_units, _two_scale_execute, _two_scale_collect
    ),
    "hwang": Handler(_hwang_units, _hwang_execute, _hwang_collect),
    "memorize": Handler(_memorize_units, _memorize_execute, _memorize_collect),
    "estimator-bias": Handler(
        _estimator_units, _estimator_execute, _estimator_collect
    ),
    "diffusion": Handler(
        _diffusion_units, _diffusion_execute, _diffusion_collect
    ),
}


def execute_unit(unit: dict) -> dict:
    """Точка входа воркера: модульная функция, чтобы её можно было pickle."""
    return HANDLERS[unit["experiment"]].execute(unit)
