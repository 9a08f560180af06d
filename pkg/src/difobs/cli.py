"""Command-line interface: ``difobs <command> [options]``.

Exit status is 0 on success, 2 for usage and parameter errors, and 1 for
data or numerical failures.
"""

import argparse
from dataclasses import fields, replace
import json
import logging
import os
import sys

import numpy as np

from . import __version__, datagen, features, harness, io, kernel, spectral
from . import lift as liftmod
from . import observer as obsmod
from .config import Param, all_of, at_least, load_file, non_negative, open_unit, positive, resolve
from .errors import DifobsError, InvalidInputError, InvalidParameterError
from .modelfile import TrainedModel, covariance_recipe, load_model, save_model

log = logging.getLogger("difobs")

PRESETS = ("sphere", "circle", "ou", "music-synth")


def _dt_eff(v):
    if v in ("frame", "auto"):
        return None
    try:
        return None if float(v) > 0 else "must be 'frame', 'auto' or a positive number"
    except ValueError:
        return "must be 'frame', 'auto' or a positive number"


def _dimension(v):
    if v == "gap":
        return None
    try:
        return None if int(v) >= 1 else "must be 'gap' or an integer >= 1"
    except ValueError:
        return "must be 'gap' or an integer >= 1"


def _rank_policy(v):
    try:
        features.RankPolicy.parse(v)
    except InvalidParameterError as exc:
        return f"is invalid ({exc})"
    return None


OUTPUT = Param("output", "path", help="output file", short="-o")
FEATURES = Param("features", "path", help="feature series (.csv, .dob) or audio (.wav)")
MODEL = Param("model", "path", help="trained model file (.dob)")
STFT = (
    Param("frame_ms", float, 23.0, "STFT frame length for WAV input [ms]", positive),
    Param("hop_ms", float, 23.0, "STFT hop for WAV input [ms]", positive),
    Param("window", str, "hann", "STFT window name"),
)
def _auto_rate(v):
    return None if 0 < v < 2 else "must lie in (0, 2)"


OBSERVER_DEFAULTS = {"gamma": 0.85, "dt_eff": "frame", "auto_rate": 1.0}
OBSERVER = (
    Param("gamma", float, None, "observer gain in (0, 1) [model setting, else 0.85]", open_unit),
    Param("dt_eff", str, None, "observer step: 'frame', 'auto' or a length [model setting]", _dt_eff),
    Param("auto_rate", float, None, "(1-gamma) lam_max dt_eff when dt_eff=auto [model setting]", _auto_rate),
)

COMMANDS = {
    "simulate": (
        "simulate a toy system or synthesise audio",
        (
            Param("preset", str, "sphere", "system to simulate", choices=PRESETS),
            Param("steps", int, 6000, "Euler steps (a run has steps + 1 samples)", at_least(1)),
            Param("seed", int, 0, "random seed", non_negative),
            Param("dt", float, 0.1, "integration step", positive),
            Param("drift", float, 0.024, "sphere drift rate c", positive),
            Param("b", float, 0.005, "sphere diffusion scale", positive),
            Param("beta", float, 1.0, "inverse temperature (circle)", positive),
            Param("noise_rate", float, 0.1, "sphere sensor background rate", non_negative),
            Param("ou_k", float, 1.0, "OU stiffness", positive),
            Param("ou_mu", float, 0.0, "OU mean"),
            Param("ou_sigma", float, 1.0, "OU noise amplitude", positive),
            Param("seconds", float, 4.0, "music-synth duration [s]", positive),
            Param("rate", int, 16000, "music-synth sample rate [Hz]", at_least(1000)),
            OUTPUT,
        ),
    ),
    "featurize": (
        "turn observations or audio into per-frame features",
        (
            Param("input", "path", help="observation series (.csv, .dob) or audio (.wav)", short="-i"),
            Param("kind", str, None, "histogram | stft | raw (default: stft for .wav, else histogram)", choices=("histogram", "stft", "raw")),
            Param("frame_len", int, 60, "samples per histogram frame", at_least(1)),
            Param("bins", int, 10, "histogram bins per channel", at_least(2)),
            *STFT,
            OUTPUT,
        ),
    ),
    "embed": (
        "fit diffusion coordinates and a lift; write a model file",
        (
            FEATURES,
            Param("epsilon_factor", float, 1.0, "kernel scale as a multiple of the median distance", positive),
            Param("beta", float, 1.0, "inverse temperature used to convert eigenvalues to rates", positive),
            Param("dimension", str, "gap", "embedding dimension: 'gap' or an integer", _dimension),
            Param("count", int, 32, "eigenpairs to compute", at_least(3)),
            Param("cov_window", int, 30, "frames per local covariance window", at_least(2)),
            Param("rank_policy", str, "relative:1e-3", "pseudo-inverse rank: fixed:<d> or relative:<tau>", _rank_policy),
            Param("gamma", float, 0.85, "observer gain stored with the model, in (0, 1)", open_unit),
            Param("dt_eff", str, "frame", "observer step stored with the model", _dt_eff),
            Param("auto_rate", float, 1.0, "auto step rate stored with the model", _auto_rate),
            *STFT,
            OUTPUT,
            Param("coords", "path", help="also write the embedding coordinates as CSV"),
            Param("kernel_out", "path", help="also dump distances, K and W (.dob or .csv of W)"),
        ),
    ),
    "fit-lift": (
        "refit the lift of a model",
        (
            MODEL,
            Param("features", "path", help="features to fit on (default: the training features)"),
            Param("weighted", bool, False, "weight frames by the kernel degree (density estimate)"),
            Param("center", bool, True, "subtract the feature mean before fitting"),
            OUTPUT,
        ),
    ),
    "observe": (
        "run the observer over a feature series",
        (
            MODEL,
            FEATURES,
            *OBSERVER,
            Param("init", str, "auto", "initial state; auto uses the training coordinates when the "
                  "features are the training features, else zero", choices=("auto", "zero", "first-coordinate", "training")),
            Param("method", str, "recursion", "recursion or the closed-form filter", choices=("recursion", "filter")),
            *STFT,
            OUTPUT,
        ),
    ),
    "extend": (
        "extend the embedding to new frames",
        (
            MODEL,
            FEATURES,
            Param("trajectory", "path", help="observer trajectory CSV whose last row is the start state"),
            Param("method", str, "observer", "observer continuation or Nystrom", choices=("observer", "nystrom")),
            *OBSERVER,
            *STFT,
            OUTPUT,
        ),
    ),
}

EXPERIMENT_PARAMS = (
    Param("output", "path", "report", "output directory", short="-o"),
    Param("full_scale", bool, False, "use the full-size presets (slow)"),
    Param("seeds", "ints", None, "seed list", all_of(non_negative)),
    Param("drifts", "floats", None, "sphere drift rates", all_of(positive)),
    Param("n_frames", int, None, "frames per run", at_least(10)),
    Param("frame_len", int, None, "samples per histogram frame", at_least(1)),
    Param("bins", int, None, "histogram bins", at_least(2)),
    Param("b", float, None, "sphere diffusion scale", positive),
    Param("dt", float, None, "integration step", positive),
    Param("noise_rate", float, None, "sensor background rate", non_negative),
    Param("cov_window", int, None, "covariance window", at_least(2)),
    Param("rank_policy", str, None, "pseudo-inverse rank policy", _rank_policy),
    Param("epsilon_factor", float, None, "kernel scale factor", positive),
    Param("beta", float, None, "inverse temperature", positive),
    Param("m", int, None, "embedding dimension", at_least(1)),
    Param("gamma", float, None, "observer gain, in (0, 1)", open_unit),
    Param("dt_eff", str, None, "observer step", _dt_eff),
    Param("ma_windows", "ints", None, "moving-average windows", all_of(at_least(1))),
    Param("burst_len", int, None, "samples per burst", at_least(2)),
    Param("stride", int, None, "steps between burst anchors", at_least(1)),
    Param("burst_dt", float, None, "burst step", positive),
    Param("n_rates", int, None, "rates to estimate", at_least(1)),
    Param("n_train", int, None, "training frames", at_least(10)),
    Param("n_extend", int, None, "extension frames", at_least(1)),
)

FULL_SCALE = {
    "sphere": {"n_frames": 4000},
    "eigs": {"n_frames": 1600},
    "extend": {"n_train": 3000, "n_extend": 1000},
}


# ------------------------------------------------------------------ helpers


def _is_wav(path):
    return str(path).lower().endswith(".wav")


def _load_features(path, opts):
    if _is_wav(path):
        x, rate = io.read_wav(path)
        return features.stft_features(x, rate, opts["frame_ms"], opts["hop_ms"], opts["window"])
    t, values, _ = io.read_series(path)
    if values.shape[0] < 1:
        raise InvalidInputError(f"{path}: no frames")
    dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
    if not dt > 0:
        raise InvalidInputError(f"{path}: time column must be increasing")
    return features.FeatureSeries(values, dt, "file")


def _require(opts, *names):
    for name in names:
        if opts.get(name) is None:
            raise InvalidParameterError(f"--{name.replace('_', '-')} is required")


def _write_coords(path, t, states, prefix="psi"):
    io.write_series(path, t, states, prefix)
    log.info("wrote %s", path)


def _observer(tm, opts):
    merged = {k: opts[k] if opts.get(k) is not None else tm.settings.get(k, v) for k, v in OBSERVER_DEFAULTS.items()}
    dt = merged["dt_eff"]
    dt = dt if dt in ("frame", "auto") else float(dt)
    return obsmod.build_observer(tm.diffusion, tm.lift, merged["gamma"], dt, merged["auto_rate"])


def _initial_state(tm, feats, init):
    same = feats.frames.shape == tm.features.frames.shape and np.array_equal(feats.frames, tm.features.frames)
    if init == "training":
        if not same:
            raise InvalidParameterError("--init training needs the training features as input")
        return spectral.embedding(tm.diffusion, tm.lift.m)[0]
    if init == "auto":
        return spectral.embedding(tm.diffusion, tm.lift.m)[0] if same else "zero"
    return init


# ----------------------------------------------------------------- commands


def cmd_simulate(o):
    preset = o["preset"]
    if preset == "music-synth":
        if not _is_wav(o["output"]):
            raise InvalidParameterError("music-synth writes audio; the output must end in .wav")
        x = datagen.synth_tones(o["rate"], o["seconds"], seed=o["seed"])
        io.write_wav(o["output"], x, o["rate"])
        log.info("wrote %s (%d samples at %d Hz)", o["output"], x.size, o["rate"])
        return
    cfg = datagen.SimConfig(seed=o["seed"], dt=o["dt"], steps=o["steps"], beta=o["beta"])
    if preset == "sphere":
        traj, pos = datagen.simulate_sphere_toy(o["drift"], o["b"], cfg)
        obs = datagen.poisson_sensor_observe(pos, datagen.DEFAULT_SENSORS, o["noise_rate"], o["seed"])
        cols = [traj.states, obs.samples]
        names = ["theta_1", "theta_2"] + [f"x_{j + 1}" for j in range(obs.dim)]
    elif preset == "circle":
        traj, obs = datagen.simulate_circle_toy(cfg)
        cols = [traj.states, obs.samples]
        names = ["theta_1"] + [f"x_{j + 1}" for j in range(obs.dim)]
    else:
        cfg = replace(cfg, initial_state=(o["ou_mu"],))
        traj = datagen.simulate_ou(o["ou_k"], o["ou_mu"], o["ou_sigma"], cfg)
        cols = [traj.states, traj.states]
        names = ["theta_1", "x_1"]
    table = np.hstack(cols)
    if str(o["output"]).endswith(".dob"):
        io.write_dobs(o["output"], {"t": traj.times, "theta": traj.states, "x": table[:, traj.dim :]},
                      {"preset": preset, "columns": names[traj.dim :]})
    else:
        io.write_csv(o["output"], [traj.times] + list(table.T), ["t"] + names)
    log.info("wrote %s (%d samples)", o["output"], len(traj))


def cmd_featurize(o):
    src = o["input"]
    kind = o["kind"] or ("stft" if _is_wav(src) else "histogram")
    if _is_wav(src):
        if kind != "stft":
            raise InvalidParameterError("audio input supports only --kind stft")
        x, rate = io.read_wav(src)
        feats = features.stft_features(x, rate, o["frame_ms"], o["hop_ms"], o["window"])
    else:
        t, values, _ = io.read_series(src)
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        obs = datagen.ObservationSeries(dt, values)
        if kind == "histogram":
            feats = features.histogram_features(obs, o["frame_len"], o["bins"])
        elif kind == "raw":
            feats = features.raw_features(obs)
        else:
            raise InvalidParameterError("--kind stft needs a .wav input")
    io.write_series(o["output"], feats.times, feats.frames, "z", {"features": feats.meta})
    log.info("wrote %s (%d frames x %d features)", o["output"], len(feats), feats.dim)


def cmd_embed(o):
    feats = _load_features(o["features"], o)
    covs = features.local_covariances(feats, "window", o["cov_window"], rank_policy=o["rank_policy"])
    dim = o["dimension"] if o["dimension"] == "gap" else int(o["dimension"])
    model, op = spectral.fit_diffusion(feats, covs, o["epsilon_factor"], o["beta"], o["count"], dim)
    coords = spectral.embedding(model)
    lf = liftmod.fit_lift(feats, coords)
    settings = {
        "cov_mode": "window",
        "cov_window": o["cov_window"],
        "rank_policy": str(features.RankPolicy.parse(o["rank_policy"])),
        "epsilon_factor": o["epsilon_factor"],
        "lift_weighted": False,
        "lift_center": True,
        "gamma": o["gamma"],
        "dt_eff": o["dt_eff"],
        "auto_rate": o["auto_rate"],
    }
    # fail now rather than at observe time if the stored settings are unstable
    _observer(TrainedModel(model, lf, feats, covs, op.D, settings), {})
    save_model(o["output"], TrainedModel(model, lf, feats, covs, op.D, settings))
    log.info("wrote %s (eps=%.6g, m=%d, mu_1..m=%s)", o["output"], model.eps, model.m,
             np.array2string(model.mu[1 : model.m + 1], precision=4))
    if o["coords"]:
        _write_coords(o["coords"], feats.times, coords)
    if o["kernel_out"]:
        kernel.save_operator(o["kernel_out"], kernel.distance_matrix(feats, covs), op)
        log.info("wrote %s", o["kernel_out"])


def cmd_fit_lift(o):
    tm = load_model(o["model"])
    feats = tm.features if o["features"] is None else _load_features(o["features"], {"frame_ms": 23.0, "hop_ms": 23.0, "window": "hann"})
    if len(feats) != tm.diffusion.psi.shape[0]:
        raise InvalidInputError(
            f"{o['features']}: {len(feats)} frames but the model was trained on {tm.diffusion.psi.shape[0]}"
        )
    weights = tm.degrees / tm.degrees.sum() * len(tm.degrees) if o["weighted"] else None
    lf = liftmod.fit_lift(feats, spectral.embedding(tm.diffusion), weights, o["center"])
    settings = dict(tm.settings, lift_weighted=o["weighted"], lift_center=o["center"])
    save_model(o["output"], TrainedModel(tm.diffusion, lf, tm.features, tm.covs, tm.degrees, settings))
    log.info("wrote %s (lift rank %d)", o["output"], lf.rank)


def cmd_observe(o):
    tm = load_model(o["model"])
    feats = _load_features(o["features"], o)
    obs = _observer(tm, o)
    if o["method"] == "filter":
        if o["init"] not in ("zero", "auto"):
            raise InvalidParameterError("the closed-form filter starts from zero; use --init zero")
        traj = obsmod.diffusion_filter(obs, feats)
    else:
        traj = obsmod.run(obs, feats, init=_initial_state(tm, feats, o["init"]))
    t = np.arange(len(traj)) * feats.frame_dt
    _write_coords(o["output"], t, traj.states)


def cmd_extend(o):
    tm = load_model(o["model"])
    feats = _load_features(o["features"], o)
    if o["method"] == "nystrom":
        mode, window, policy = covariance_recipe(tm.settings)
        covs = features.local_covariances(feats, mode, window, rank_policy=policy)
        coords = harness.nystrom_coordinates(tm.diffusion, tm.features, tm.covs, feats, covs)
        _write_coords(o["output"], feats.times, coords)
        return
    obs = _observer(tm, o)
    if o["trajectory"]:
        _, states, _ = io.read_series(o["trajectory"])
        if states.shape[1] != obs.m:
            raise InvalidInputError(f"{o['trajectory']}: {states.shape[1]} columns, model uses {obs.m}")
        start = states[-1]
    else:
        start = np.zeros(obs.m)
    traj = obsmod.extend_observer(obs, feats, start)
    _write_coords(o["output"], np.arange(len(traj)) * feats.frame_dt, traj.states)


def _experiment_config(kind, o):
    base = {"sphere": harness.SphereConfig(), "eigs": harness.EigenConfig(), "extend": harness.ExtensionConfig()}[kind]
    values = {k: v for k, v in o.items() if v is not None and k not in ("output", "full_scale")}
    if o["full_scale"]:
        values = dict(FULL_SCALE[kind], **values)
    if kind == "extend":
        outer = {k: values.pop(k) for k in ("n_train", "n_extend") if k in values}
        inner = _apply(base.sphere, values, kind)
        return replace(base, sphere=inner, **outer)
    return _apply(base, values, kind)


def _apply(cfg, values, kind):
    names = {f.name for f in fields(cfg)}
    bad = sorted(set(values) - names)
    if bad:
        raise InvalidParameterError(f"experiment {kind}: keys not used by this experiment: {', '.join(bad)}")
    if "dt_eff" in values and values["dt_eff"] not in ("frame", "auto"):
        values["dt_eff"] = float(values["dt_eff"])
    return replace(cfg, **values)


def cmd_experiment(o, kind):
    from . import plotting

    cfg = _experiment_config(kind, o)
    out = o["output"]
    os.makedirs(out, exist_ok=True)
    run = {"sphere": harness.run_sphere_experiment, "eigs": harness.run_eigenvalue_experiment,
           "extend": harness.run_extension_experiment}[kind]
    report = run(cfg)
    log.info("%s experiment finished in %.1f s", kind, report.runtime)
    rows = report.rows
    csv_path = os.path.join(out, f"{kind}_report.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write("method,coord,c,seed,metric,value\n")
        for method, coord, c, seed, metric, value in rows:
            fh.write(f"{method},{coord},{c!r},{seed},{metric},{value!r}\n")
    summary = {}
    for metric in sorted({r[4] for r in rows}):
        for (method, coord, c), (mean, std, n) in sorted(report.summary(metric).items()):
            summary.setdefault(metric, []).append(
                {"method": method, "coord": coord, "c": c, "mean": mean, "std": std, "n": n}
            )
    meta = {"kind": kind, "version": __version__, "config": report.config, "config_hash": report.config_hash,
            "seeds": report.seeds, "summary": summary}
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if kind == "sphere":
        plotting.metric_vs_drift(report, "nrmse_db", os.path.join(out, "nrmse.svg"))
        plotting.metric_vs_drift(report, "correlation", os.path.join(out, "correlation.svg"))
    elif kind == "eigs":
        plotting.rate_estimates(report, os.path.join(out, "rates.svg"), cfg.n_rates)
    else:
        plotting.extension_comparison(report, os.path.join(out, "extension.svg"))
    log.info("wrote report files to %s", out)


HANDLERS = {
    "simulate": cmd_simulate,
    "featurize": cmd_featurize,
    "embed": cmd_embed,
    "fit-lift": cmd_fit_lift,
    "observe": cmd_observe,
    "extend": cmd_extend,
}


# ------------------------------------------------------------------- parser


def _add_params(p, params):
    for par in params:
        names = [par.flag] + ([par.short] if par.short else [])
        kw = {"dest": par.name, "default": None}
        if par.kind is bool:
            p.add_argument(*names, action=argparse.BooleanOptionalAction, help=par.help, **kw)
        else:
            meta = "PATH" if par.kind == "path" else par.name.upper()
            p.add_argument(*names, metavar=meta, help=par.help, **kw)


def _common(p):
    p.add_argument("--config", metavar="FILE", help="flat key = value configuration file")
    p.add_argument("--threads", type=int, metavar="N", help="cap BLAS/LAPACK threads")
    g = p.add_mutually_exclusive_group()
    g.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    g.add_argument("-v", "--verbose", action="store_true", help="print debug messages")


def build_parser():
    parser = argparse.ArgumentParser(prog="difobs", description="Diffusion-map observers for time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (desc, params) in COMMANDS.items():
        p = sub.add_parser(name, help=desc, description=desc)
        _add_params(p, params)
        _common(p)
    p = sub.add_parser("experiment", help="run a reproducible experiment and write CSV, JSON and SVG reports")
    p.add_argument("kind", choices=("sphere", "eigs", "extend"))
    _add_params(p, EXPERIMENT_PARAMS)
    _common(p)
    return parser


def _setup_logging(args):
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    log.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.addHandler(handler)
    log.setLevel(level)
    log.propagate = False


def _required(command):
    return {
        "simulate": ("output",),
        "featurize": ("input", "output"),
        "embed": ("features", "output"),
        "fit-lift": ("model", "output"),
        "observe": ("model", "features", "output"),
        "extend": ("model", "features", "output"),
    }.get(command, ())


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args)
    command = args.command
    params = EXPERIMENT_PARAMS if command == "experiment" else COMMANDS[command][1]
    try:
        file_values = load_file(args.config) if args.config else {}
        opts = resolve(params, vars(args), file_values, args.config or "config")
        _require(opts, *_required(command))
        if args.threads is not None and args.threads < 1:
            raise InvalidParameterError("--threads must be >= 1")
    except InvalidParameterError as exc:
        parser.exit(2, f"difobs {command}: error: {exc}\n")
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                _dispatch(command, opts, args)
        else:
            _dispatch(command, opts, args)
    except InvalidParameterError as exc:
        print(f"difobs {command}: error: {exc}", file=sys.stderr)
        return 2
    except (DifobsError, OSError, ArithmeticError, ValueError) as exc:
        print(f"difobs {command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def _dispatch(command, opts, args):
    if command == "experiment":
        cmd_experiment(opts, args.kind)
    else:
        HANDLERS[command](opts)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
