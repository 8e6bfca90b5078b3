"""Campaign runner: config parsing, worker fan-out, CSV artifacts.

Experiments:

- beam_sweep: minimum per-user rate and Jain CDFs for each beam count at
  depth M=1, plus the per-user sum-rate bound for the largest cluster.
- depth_sweep: CDFs for several scheduling depths M on a fixed cluster,
  with fictitious-color grouping when requested or forced by the cap.
- fsa_study: fixed-depth benchmark vs adaptive free-slot assignment at each
  FSA threshold, with availability/efficiency tables and complexity gains.
- oracle_check: bipartite-graph scheduling vs exhaustive search on random
  instances; reports exact max-min agreement.

Every run writes CSV artifacts plus a manifest. CSV bodies are byte-stable
for a fixed seed regardless of the worker count: work is cut into
fixed-size chunks seeded by chunk index, and results are reduced in chunk
order.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import AntennaPattern, NoiseModel, build_hex_layout, synthesize_generations
from .errors import BeamschedError, ConfigError
from .fsa import FsaConfig, adaptive_schedule, efficiency_accounting, fixed_depth_schedule
from .metrics import (
    CampaignStats,
    complexity_estimate,
    complexity_fsa,
    complexity_gain,
    outage_curve,
)
from .rates import batch_evaluate_slots, sum_rate
from .scheduling import (
    DEFAULT_ENUMERATION_CAP,
    DEFAULT_ORACLE_CAP,
    color_grouping,
    counting,
    exhaustive_search,
    schedule_generations,
)

EXPERIMENTS = ("beam_sweep", "depth_sweep", "fsa_study", "oracle_check")

RATE_GRID = np.round(np.arange(0.0, 10.0 + 1e-9, 0.01), 2)
JAIN_GRID = np.round(np.arange(0.0, 1.0 + 1e-9, 0.002), 3)


@dataclass
class CampaignConfig:
    experiment: str = "beam_sweep"
    b: int = 7
    b_list: tuple = ()
    m: int = 2
    m_list: tuple = ()
    n_ch: int = 5000
    snr_db: float = 15.0
    r_th: tuple = ()          # per m_fsa; empty = calibrate at p ~= 0.1
    m_fsa: tuple = (2, 3, 4)
    c_colors: int = 0         # 0 = automatic
    seed: int = 1
    output_dir: str = "campaign_out"
    enum_cap: int = DEFAULT_ENUMERATION_CAP
    oracle_cap: int = DEFAULT_ORACLE_CAP
    workers: int = 0          # 0 = all cores
    trials: int = 100
    chunk: int = 250          # generations per worker task
    beamwidth_deg: float = 0.6
    spacing_deg: float = 0.0  # 0 = contours touch (one beamwidth)
    sidelobe_floor_db: float = -30.0
    max_gain_db: float = 52.0
    outage_quantile: float = 0.1
    ungrouped_cap: int = 20_000  # adaptive stages search the full graph below this

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; pick one of {EXPERIMENTS}"
            )
        if self.n_ch < 1:
            raise ConfigError("n_ch must be >= 1")
        if not np.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        self.b_list = tuple(int(x) for x in _aslist(self.b_list))
        self.m_list = tuple(int(x) for x in _aslist(self.m_list))
        self.m_fsa = tuple(int(x) for x in _aslist(self.m_fsa))
        self.r_th = tuple(float(x) for x in _aslist(self.r_th))
        if self.experiment == "depth_sweep" and not self.m_list:
            self.m_list = (1, 2, 3, 5)
        if self.experiment == "beam_sweep" and not self.b_list:
            self.b_list = (2, 3, 4, 5, 6, 7)
        if self.r_th and len(self.r_th) not in (1, len(self.m_fsa)):
            raise ConfigError("r_th must be scalar or one value per m_fsa")

    def pattern(self):
        return AntennaPattern(
            beamwidth_deg=self.beamwidth_deg,
            max_gain_db=self.max_gain_db,
            sidelobe_floor_db=self.sidelobe_floor_db,
        )

    def layout(self, b):
        return build_hex_layout(
            b=b,
            spacing_deg=self.spacing_deg or None,
            pattern=self.pattern(),
        )

    def effective_workers(self):
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


def _aslist(value):
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def _parse_value(text):
    text = text.strip()
    if "," in text:
        return tuple(_parse_value(tok) for tok in text.split(",") if tok.strip())
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def load_config(path, **overrides):
    """Read a flat `key = value` campaign file; keyword overrides win."""
    values = {}
    valid = {f.name for f in fields(CampaignConfig)}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected `key = value`")
                key, text = (part.strip() for part in line.split("=", 1))
                if key not in valid:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _parse_value(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return CampaignConfig(**values)


def _subseed(cfg, *tags):
    return np.random.SeedSequence([int(cfg.seed)] + [int(t) for t in tags])


def _chunk_ranges(total, chunk):
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def _run_tasks(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _cfg_dict(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


# ----------------------------------------------------------------- tasks --
# Task functions take one picklable tuple and re-derive everything from it
# so that ProcessPoolExecutor can ship them to fork/spawn workers.


def _task_beam_chunk(args):
    cfg_d, b, start, stop, want_bound = args
    cfg = CampaignConfig(**cfg_d)
    layout = cfg.layout(b)
    noise = NoiseModel()
    n = stop - start
    _, matrices = synthesize_generations(
        layout, n, noise, cfg.snr_db, seed=_subseed(cfg, 1, b, start), first_generation=start
    )
    slots = np.stack([m.entries for m in matrices])
    _, rates = batch_evaluate_slots(slots, noise)
    mins = rates.min(axis=1)
    jains = (rates.sum(axis=1) ** 2) / (rates.shape[1] * (rates**2).sum(axis=1))
    bounds = (
        np.array([sum_rate(m.entries, noise) / b for m in matrices])
        if want_bound
        else None
    )
    return {"mins": mins, "jains": jains, "bounds": bounds, "evals": n}


def _task_depth_chunk(args):
    cfg_d, m, colors, start_group, stop_group = args
    cfg = CampaignConfig(**cfg_d)
    layout = cfg.layout(cfg.b)
    noise = NoiseModel()
    groups = color_grouping(layout, colors) if colors else None
    n_groups_total = -(-cfg.n_ch // m)

    mins, jains, worst = [], [], []
    evals = 0
    for g in range(start_group, stop_group):
        gen_start = g * m
        size = min(m, cfg.n_ch - gen_start)
        _, matrices = synthesize_generations(
            layout, size, noise, cfg.snr_db,
            seed=_subseed(cfg, 2, m, g), first_generation=gen_start,
        )
        if size == 1:
            _, rates = batch_evaluate_slots(matrices[0].entries[None, ...], noise)
            slot_rates = [rates[0]]
            evals += 1
        else:
            alloc = schedule_generations(
                matrices, noise,
                groups=groups if size > 1 else None,
                pairing_seed=g, cap=cfg.enum_cap,
            )
            slot_rates = [p.rates for p in alloc.paths]
            evals += alloc.n_evaluations
        slot_mins = [float(r.min()) for r in slot_rates]
        mins.extend(slot_mins)
        worst.append(min(slot_mins))
        jains.extend(
            float(r.sum()) ** 2 / (len(r) * float((r**2).sum())) for r in slot_rates
        )
    del n_groups_total
    return {
        "mins": np.array(mins),
        "jains": np.array(jains),
        "worst": np.array(worst),
        "evals": evals,
    }


def _records_to_samples(records):
    mins = np.concatenate([r.slot_min_rates for r in records])
    jains = np.concatenate([r.slot_jain for r in records])
    return mins, jains


def _task_fsa_arm(args):
    cfg_d, m_fsa, preset_r_th = args
    cfg = CampaignConfig(**cfg_d)
    layout = cfg.layout(cfg.b)
    noise = NoiseModel()
    colors = cfg.c_colors or (3 if cfg.b == 7 else 0)
    groups = color_grouping(layout, colors) if colors and colors < cfg.b else None

    # threshold calibration on an independent stream, mirroring the paper's
    # "pick r_th where the fixed-depth outage sits near the target quantile"
    if preset_r_th is None:
        _, cal = synthesize_generations(
            layout, cfg.n_ch, noise, cfg.snr_db, seed=_subseed(cfg, 3, m_fsa, 1)
        )
        cal_records = fixed_depth_schedule(
            cal, m_fsa, noise, groups=groups, cap=cfg.enum_cap, seed=m_fsa
        )
        cal_mins, _ = _records_to_samples(cal_records)
        r_th = float(np.quantile(cal_mins, cfg.outage_quantile))
    else:
        r_th = float(preset_r_th)

    _, study = synthesize_generations(
        layout, cfg.n_ch, noise, cfg.snr_db, seed=_subseed(cfg, 3, m_fsa, 0)
    )
    bench = fixed_depth_schedule(
        study, m_fsa, noise, r_th=r_th, groups=groups, cap=cfg.enum_cap, seed=m_fsa
    )
    fsa = adaptive_schedule(
        study,
        FsaConfig(r_th=r_th, m_fsa=m_fsa),
        noise,
        groups=groups,
        cap=cfg.enum_cap,
        seed=m_fsa,
        ungrouped_cap=cfg.ungrouped_cap,
    )
    return {"m_fsa": m_fsa, "r_th": r_th, "bench": bench, "fsa": fsa}


def _task_oracle_chunk(args):
    cfg_d, start, stop = args
    cfg = CampaignConfig(**cfg_d)
    layout = cfg.layout(cfg.b)
    noise = NoiseModel()
    rows = []
    evals = 0
    for trial in range(start, stop):
        _, matrices = synthesize_generations(
            layout, cfg.m, noise, cfg.snr_db, seed=_subseed(cfg, 4, trial)
        )
        bg = schedule_generations(matrices, noise, cap=cfg.enum_cap)
        es = exhaustive_search(matrices, noise, cap=cfg.oracle_cap)
        evals += (bg.n_evaluations or 0) + (es.n_evaluations or 0)
        rows.append((trial, bg.min_rate, es.min_rate, bg.min_rate == es.min_rate))
    return {"rows": rows, "evals": evals}


# ------------------------------------------------------------- reporting --


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_cdf_csv(path, stats_by_label, grid, attr="min_rate_samples"):
    rows = []
    for label, stats in stats_by_label.items():
        curve = outage_curve(getattr(stats, attr), grid)
        rows.extend((float(r), float(p), label) for r, p in zip(grid, curve))
    return _write_csv(path, ["r", "p_r", "label"], rows)


def emit_plot_data(stats, path, grid=None, jain=False):
    """Write one CDF curve as a two-column CSV (threshold, probability)."""
    samples = stats.jain_samples if jain else stats.min_rate_samples
    if samples is None or len(samples) == 0:
        raise ConfigError("no samples to emit")
    grid = (JAIN_GRID if jain else RATE_GRID) if grid is None else np.asarray(grid)
    curve = outage_curve(samples, grid)
    return _write_csv(path, ["r", "p_r"], list(zip(map(float, grid), map(float, curve))))


def _write_manifest(path, cfg, wall_time, counters):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in sorted(_cfg_dict(cfg).items()):
            fh.write(f"config.{key} = {value}\n")
        fh.write(f"wall_time_s = {wall_time:.3f}\n")
        for key, value in sorted(counters.items()):
            fh.write(f"{key} = {value}\n")
    return path


# ------------------------------------------------------------ experiments --


def _run_beam_sweep(cfg, out):
    workers = cfg.effective_workers()
    cfg_d = _cfg_dict(cfg)
    bound_b = max(cfg.b_list)
    tasks = [
        (cfg_d, b, start, stop, b == bound_b)
        for b in cfg.b_list
        for start, stop in _chunk_ranges(cfg.n_ch, cfg.chunk)
    ]
    results = _run_tasks(_task_beam_chunk, tasks, workers)

    stats = {}
    counters = {}
    for b in cfg.b_list:
        picks = [r for t, r in zip(tasks, results) if t[1] == b]
        mins = np.concatenate([p["mins"] for p in picks])
        jains = np.concatenate([p["jains"] for p in picks])
        stats[f"b{b}_m1"] = CampaignStats(
            label=f"b{b}_m1",
            min_rate_samples=mins,
            jain_samples=jains,
            n_sched=cfg.n_ch,
            n_evaluations=sum(p["evals"] for p in picks),
        )
        if b == bound_b:
            bounds = np.concatenate([p["bounds"] for p in picks])
            stats[f"bound_b{b}"] = CampaignStats(
                label=f"bound_b{b}",
                min_rate_samples=bounds,
                jain_samples=np.ones(1),
                n_sched=cfg.n_ch,
            )
        counters[f"evals_b{b}"] = sum(p["evals"] for p in picks)
        counters[f"evals_predicted_b{b}"] = cfg.n_ch * counting(1, b)["n_eval_bg"]

    files = {
        "cdf_min_rate": _write_cdf_csv(
            os.path.join(out, "cdf_min_rate.csv"), stats, RATE_GRID
        ),
        "cdf_jain": _write_cdf_csv(
            os.path.join(out, "cdf_jain.csv"),
            {k: v for k, v in stats.items() if not k.startswith("bound")},
            JAIN_GRID,
            attr="jain_samples",
        ),
    }
    return stats, files, counters


def _run_depth_sweep(cfg, out):
    workers = cfg.effective_workers()
    cfg_d = _cfg_dict(cfg)
    stats = {}
    counters = {}
    files = {}
    for m in cfg.m_list:
        colors = cfg.c_colors
        if not colors and m**cfg.b > cfg.enum_cap and cfg.b == 7:
            colors = 3
        n_groups = -(-cfg.n_ch // m)
        per_chunk = max(1, cfg.chunk // m)
        tasks = [
            (cfg_d, m, colors if m > 1 else 0, gs, ge)
            for gs, ge in _chunk_ranges(n_groups, per_chunk)
        ]
        results = _run_tasks(_task_depth_chunk, tasks, workers)
        mins = np.concatenate([r["mins"] for r in results])
        jains = np.concatenate([r["jains"] for r in results])
        worst = np.concatenate([r["worst"] for r in results])
        label = f"b{cfg.b}_m{m}"
        stats[label] = CampaignStats(
            label=label,
            min_rate_samples=mins,
            jain_samples=jains,
            n_sched=n_groups,
            complexity={"alpha_m": complexity_estimate(m, colors or 3)},
            n_evaluations=sum(r["evals"] for r in results),
        )
        stats[label].schedule_min_samples = worst
        counters[f"evals_m{m}"] = stats[label].n_evaluations
        full, tail = divmod(cfg.n_ch, m)
        width = colors if (colors and m > 1) else cfg.b
        predicted = full * m**width + (tail**width if tail else 0)
        counters[f"evals_predicted_m{m}"] = predicted
        counters[f"colors_m{m}"] = colors or cfg.b

    files["cdf_min_rate"] = _write_cdf_csv(
        os.path.join(out, "cdf_min_rate.csv"), stats, RATE_GRID
    )
    files["cdf_jain"] = _write_cdf_csv(
        os.path.join(out, "cdf_jain.csv"), stats, JAIN_GRID, attr="jain_samples"
    )
    return stats, files, counters


def _slot_share_columns(max_class):
    return [f"slots_with_m_{i}_pct" for i in range(1, max_class + 1)]


def _table_row(label, m_fsa, r_th, accounting, max_class):
    shares = accounting["slots_by_m"]
    row = [label, m_fsa, float(r_th)]
    row += [float(100.0 * shares.get(i, 0.0)) for i in range(1, max_class + 1)]
    row += [
        float(100.0 * accounting["availability"]),
        float(100.0 * accounting["efficiency"]),
        float(100.0 * accounting["efficiency_slots"]),
        float(100.0 * accounting["fsa_use"]),
    ]
    return row


def _run_fsa_study(cfg, out):
    workers = cfg.effective_workers()
    cfg_d = _cfg_dict(cfg)
    presets = {}
    for i, m_fsa in enumerate(cfg.m_fsa):
        if cfg.r_th:
            presets[m_fsa] = cfg.r_th[0] if len(cfg.r_th) == 1 else cfg.r_th[i]
        else:
            presets[m_fsa] = None
    tasks = [(cfg_d, m_fsa, presets[m_fsa]) for m_fsa in cfg.m_fsa]
    results = _run_tasks(_task_fsa_arm, tasks, workers)

    stats = {}
    counters = {}
    table_rows = []
    complexity_rows = []
    max_class = max(cfg.m_fsa) + 1
    for res in results:
        m_fsa = res["m_fsa"]
        r_th = res["r_th"]
        for kind, records in (("fixed", res["bench"]), ("fsa", res["fsa"])):
            mins, jains = _records_to_samples(records)
            label = f"{kind}_m{m_fsa}"
            acc = efficiency_accounting(records, r_th=r_th)
            stats[label] = CampaignStats(
                label=label,
                min_rate_samples=mins,
                jain_samples=jains,
                n_sched=len(records),
                n_evaluations=sum(r.n_evaluations for r in records),
            )
            stats[label].accounting = acc
            stats[label].r_th = r_th
            table_rows.append(_table_row(kind, m_fsa, r_th, acc, max_class))
            counters[f"evals_{label}"] = stats[label].n_evaluations
        acc = stats[f"fsa_m{m_fsa}"].accounting
        freqs = [acc["slots_by_m"].get(i, 0.0) for i in range(1, m_fsa + 2)]
        alpha_fsa = complexity_fsa(freqs, m_fsa)
        alpha_fixed = complexity_estimate(m_fsa)
        complexity_rows.append(
            [
                m_fsa,
                float(r_th),
                float(alpha_fsa),
                float(alpha_fixed),
                float(100.0 * complexity_gain(freqs, m_fsa)),
            ]
        )

    files = {
        "cdf_min_rate": _write_cdf_csv(
            os.path.join(out, "cdf_min_rate.csv"), stats, RATE_GRID
        ),
        "cdf_jain": _write_cdf_csv(
            os.path.join(out, "cdf_jain.csv"), stats, JAIN_GRID, attr="jain_samples"
        ),
        "table_scheduling": _write_csv(
            os.path.join(out, "table_scheduling.csv"),
            ["schedule", "m_fsa", "r_th"]
            + _slot_share_columns(max_class)
            + ["availability_pct", "efficiency_pct", "efficiency_slots_pct", "fsa_use_pct"],
            table_rows,
        ),
        "table_complexity": _write_csv(
            os.path.join(out, "table_complexity.csv"),
            ["m_fsa", "r_th", "alpha_fsa", "alpha_fixed", "gain_pct"],
            complexity_rows,
        ),
    }
    return stats, files, counters


def _run_oracle_check(cfg, out):
    workers = cfg.effective_workers()
    cfg_d = _cfg_dict(cfg)
    per_chunk = max(1, min(25, cfg.trials))
    tasks = [(cfg_d, s, e) for s, e in _chunk_ranges(cfg.trials, per_chunk)]
    results = _run_tasks(_task_oracle_chunk, tasks, workers)
    rows = [row for r in results for row in r["rows"]]
    matches = sum(1 for row in rows if row[3])
    counts = counting(cfg.m, cfg.b)
    counters = {
        "matches": matches,
        "trials": cfg.trials,
        "evals_total": sum(r["evals"] for r in results),
        "evals_predicted": cfg.trials * (counts["n_eval_es"] + counts["n_eval_bg"]),
    }
    files = {
        "oracle_report": _write_csv(
            os.path.join(out, "oracle_report.csv"),
            ["trial", "bg_min_rate", "es_min_rate", "match"],
            rows,
        )
    }
    stats = {
        "oracle": CampaignStats(
            label="oracle",
            min_rate_samples=np.array([row[1] for row in rows]),
            jain_samples=np.array([]),
            n_sched=cfg.trials,
            n_evaluations=counters["evals_total"],
        )
    }
    print(f"BG == ES on {matches}/{cfg.trials} instances")
    return stats, files, counters


def run_campaign(cfg):
    """Execute one experiment family; returns stats, file map and counters."""
    started = time.perf_counter()
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    runner = {
        "beam_sweep": _run_beam_sweep,
        "depth_sweep": _run_depth_sweep,
        "fsa_study": _run_fsa_study,
        "oracle_check": _run_oracle_check,
    }[cfg.experiment]
    try:
        stats, files, counters = runner(cfg, out)
    except BeamschedError:
        # remove partial CSVs so failed runs leave no half-written artifacts
        for name in os.listdir(out):
            if name.endswith(".csv"):
                os.unlink(os.path.join(out, name))
        raise
    counters.setdefault(
        "evals_total", sum(v for k, v in counters.items() if k.startswith("evals_") and "predicted" not in k)
    )
    files["manifest"] = _write_manifest(
        os.path.join(out, "manifest.txt"), cfg, time.perf_counter() - started, counters
    )
    return {"stats": stats, "files": files, "counters": counters}
