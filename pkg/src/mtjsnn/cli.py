"""Command-line front end.

Subcommands: ``pulse-demo`` (integrate-and-leak trajectory), ``sweep``
(switching-probability tables), ``calibrate`` (barrier report), ``train``
/ ``test`` (crossbar network), ``energy-report`` (ledger replay).  Every
artifact embeds the fully resolved configuration, the seed and the
package version; runs are byte-identical for a fixed seed regardless of
worker count.

Exit codes: 0 success, 2 configuration errors, 3 I/O and data-format
errors, 4 numerical failures (calibration, characterization).
"""

from __future__ import annotations

import argparse
import gzip
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import characterization as char
from . import magnetics
from .config import RunConfig
from .constants import CONSTANTS
from .datasets import ImageDataset, load_idx, synth_dataset
from .device import DeviceParams, charge_to_spin
from .errors import (CalibrationError, CharacterizationError, ConfigError,
                     DataFormatError, PhaseProtocolError)
from .estimator import MtjSpikingClassifier
from .snn import assign_classes, load_checkpoint, save_checkpoint

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICS = 4


def _dump_json(path: Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _stamp(cfg: RunConfig) -> dict:
    return {"version": __version__, "config": cfg.to_dict()}


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg.apply_overrides(args.set or [])
    return cfg


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_pulse_demo(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.io.out_dir)
    model, cal = char.calibrated_model(args.eb_kt, thickness=args.thickness)
    device = cfg.device_params()
    thermal = magnetics.ThermalConfig(temperature=args.temperature, dt=cfg.magnetics.dt,
                                      rng_seed=cfg.magnetics.seed)

    tilt = math.radians(args.tilt_deg)
    m0 = np.array([-math.cos(tilt), math.sin(tilt), 0.0])
    initial = magnetics.MagnetizationState(m=m0 / np.linalg.norm(m0))

    if args.amplitude_ua is None:
        # 0.7x the single-pulse reversal threshold integrates visibly during
        # each pulse yet leaks back without ever committing a reversal
        i_charge = 0.7 * find_pulse_threshold(model, device, initial, args.on,
                                              cfg.magnetics.dt)
    else:
        i_charge = args.amplitude_ua * 1e-6
    i_spin = charge_to_spin(i_charge, device)

    pulses = [magnetics.Pulse(start=args.off + k * (args.on + args.off),
                              duration=args.on, amplitude=i_spin)
              for k in range(args.n_pulses)]
    traj = magnetics.simulate_pulse_train(initial, pulses, thermal, model,
                                          total_time=args.off + args.n_pulses * (args.on + args.off))
    csv_path = out / f"{args.prefix}.csv"
    traj.to_csv(csv_path)
    meta = _stamp(cfg)
    meta.update({
        "amplitude_charge_A": i_charge,
        "amplitude_spin_A": i_spin,
        "pulses": [{"start_s": p.start, "duration_s": p.duration} for p in pulses],
        "barrier_kT": args.eb_kt,
        "thickness_m": model.geometry.thickness,
        "calibration_scaling": cal.scaling,
        "temperature_K": args.temperature,
        "final_mx": float(traj.m[-1, 0]),
    })
    _dump_json(out / f"{args.prefix}.meta.json", meta)
    print(f"wrote {csv_path} ({len(traj.times)} samples, final m_x = {traj.m[-1, 0]:+.3f})")
    return 0


def find_pulse_threshold(model, device: DeviceParams, initial, duration: float,
                         dt: float) -> float:
    """Zero-temperature charge current that just reverses within one pulse."""
    n_steps = int(round(duration / dt))

    def switches(i_charge: float) -> bool:
        i_spin = charge_to_spin(i_charge, device)
        m = magnetics.heun_run(initial.m[None, :], model, i_spin, n_steps, dt)
        # free relaxation shows whether the pulse committed the reversal
        m = magnetics.heun_run(m, model, 0.0, int(round(2e-9 / dt)), dt)
        return m[0, 0] > char.SWITCH_THRESHOLD

    lo = char.critical_current_estimate(model) / device.spin_hall_gain
    hi = lo
    for _ in range(30):
        if switches(hi):
            break
        hi *= 1.5
    else:
        raise CharacterizationError("no reversal found while bracketing the pulse threshold")
    for _ in range(28):
        mid = math.sqrt(lo * hi)
        if switches(mid):
            hi = mid
        else:
            lo = mid
    return hi


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.io.out_dir)
    sw = cfg.sweep
    spec = char.SweepSpec(
        currents=tuple(args.currents) if args.currents else (
            tuple(sw.currents) if sw.currents else None),
        barrier_targets=tuple(args.eb or sw.eb_kt),
        pulse_widths=tuple(args.tpw or sw.pulse_widths),
        trials_per_point=args.trials or sw.trials,
        temperature=sw.temperature,
        base_seed=args.seed if args.seed is not None else sw.seed,
        drive=args.drive or sw.drive,
        dt=cfg.magnetics.dt,
    )
    # reflect flag overrides back into the echoed config so the stamp is
    # the fully resolved run configuration
    cfg.sweep.eb_kt = list(spec.barrier_targets)
    cfg.sweep.pulse_widths = list(spec.pulse_widths)
    cfg.sweep.trials = spec.trials_per_point
    cfg.sweep.seed = spec.base_seed
    cfg.sweep.drive = spec.drive
    cfg.sweep.currents = list(spec.currents) if spec.currents else None
    device = cfg.device_params()
    table = char.sweep(spec, device=device, workers=args.workers)
    table.meta["stamp"] = _stamp(cfg)
    json_path = out / f"{args.prefix}.json"
    table.to_json(json_path)
    if cfg.io.csv:
        table.to_csv(out / f"{args.prefix}.csv")
    print(f"wrote {json_path} ({len(table.currents)} cells)")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.io.out_dir)
    report = _stamp(cfg)
    points = []
    targets = args.eb or [10.0, 20.0, 30.0]
    for eb in targets:
        thickness = args.thickness or char.THICKNESS_FOR_BARRIER.get(float(eb), 1.2e-9)
        target = eb * CONSTANTS.k_B * char.BARRIER_REFERENCE_T
        cal = char.calibrate_barrier(thickness, target)
        points.append({
            "EB_kT": eb,
            "thickness_m": thickness,
            "scaling": cal.scaling,
            "achieved_kT": cal.achieved / (CONSTANTS.k_B * char.BARRIER_REFERENCE_T),
            "relative_error": cal.relative_error,
            "tensor": {"n_x": cal.tensor.n_x, "n_y": cal.tensor.n_y, "n_z": cal.tensor.n_z},
        })
    report["calibrations"] = points
    path = Path(cfg.io.out_dir) / f"{args.prefix}.json"
    _dump_json(path, report)
    print(f"wrote {path}")
    for p in points:
        print(f"  E_B {p['EB_kT']:g} kT @ {p['thickness_m']*1e9:.1f} nm: "
              f"scaling {p['scaling']:.4f}, achieved {p['achieved_kT']:.6f} kT")
    return 0


def _load_dataset(args, cfg: RunConfig) -> ImageDataset:
    if args.dataset == "synth":
        return synth_dataset(args.images, seed=args.data_seed)
    if args.dataset == "idx":
        if not (args.idx_images and args.idx_labels):
            raise ConfigError("--idx-images and --idx-labels are required with --dataset idx")
        return load_idx(args.idx_images, args.idx_labels,
                        filter_classes=(0, 1), limit=args.images * 2)
    raise ConfigError(f"unknown dataset {args.dataset!r}")


def _write_raster(path: Path, raster) -> None:
    with open(path, "w") as f:
        f.write("step,neuron_id,image_index,label\n")
        for step, neuron, image_index, label in raster:
            f.write(f"{step},{neuron},{image_index},{label}\n")


def _write_events(path: Path, ledger) -> None:
    # mtime=0 keeps the artifact byte-identical across reruns
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(b"kind,current_A,resistance_ohm,duration_s,energy_J\n")
            for kind, a, b, c in ledger.events:
                if kind == "read":
                    gz.write(f"read,0.0,0.0,0.0,{a!r}\n".encode())
                else:
                    gz.write(f"{kind},{a!r},{b!r},{c!r},{a * a * b * c!r}\n".encode())


def _build_classifier(cfg: RunConfig, table_path, n_images_hint: int) -> MtjSpikingClassifier:
    table = char.SwitchingProbabilityTable.from_json(table_path)
    eb = table.meta.get("network_eb_kt", 20.0)
    tpw = table.meta.get("network_tpw_s", 0.5e-9)
    ebs = sorted({float(v) for v in table.eb_kt})
    tpws = sorted({float(v) for v in table.pulse_widths})
    eb = eb if eb in ebs else ebs[0]
    tpw = tpw if tpw in tpws else tpws[0]
    model = char.build_behavioral_model(table, eb, tpw)
    n = cfg.network
    return MtjSpikingClassifier(
        behavioral_model=model, n_neurons=n.n_neurons, steps_per_image=n.steps_per_image,
        p_max=n.p_max, tau_0=n.tau_0, tau_inh=n.tau_inh, tau_plus=n.tau_plus,
        tau_minus=n.tau_minus, eta_plus=n.eta_plus, eta_minus=n.eta_minus,
        homeostasis_beta=n.homeostasis_beta, v_row=n.v_row, seed=n.seed)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.io.out_dir)
    ds = _load_dataset(args, cfg)
    clf = _build_classifier(cfg, args.table, len(ds))
    clf.fit(ds.images, ds.labels)
    network = clf.network_

    save_checkpoint(out / f"{args.prefix}_checkpoint.json", network.synapses,
                    cfg.network.seed, epoch=len(ds))
    stats = _stamp(cfg)
    stats.update({
        "dataset": ds.source,
        "n_images": len(ds),
        "v_row_V": clf.v_row_,
        "training": clf.training_stats_.to_dict(),
        "neuron_classes": [int(v) for v in clf.neuron_classes_],
        "neuron_class_counts": [[int(v) for v in row] for row in clf.neuron_class_counts_],
        "energy": network.total_ledger().summary(),
    })
    _dump_json(out / f"{args.prefix}_stats.json", stats)
    _write_raster(out / f"{args.prefix}_raster.csv", network.raster)
    _write_events(out / f"{args.prefix}_events.csv.gz", network.total_ledger())
    print(f"wrote {out / (args.prefix + '_stats.json')} "
          f"({stats['energy']['spikes']} spikes, v_row = {clf.v_row_:.4f} V)")
    return 0


def cmd_test(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.io.out_dir)
    ds = _load_dataset(args, cfg)
    synapses, header = load_checkpoint(args.checkpoint)
    clf = _build_classifier(cfg, args.table, len(ds))
    if cfg.network.v_row is None:
        raise ConfigError("test mode needs network.v_row (copy v_row_V from the "
                          "training stats into the config or a --set override)")
    # rebuild the trained network around the checkpointed weights
    from .snn import (EncoderConfig, NetworkConfig, SpikingNetwork, StdpConfig)
    n = cfg.network
    network = SpikingNetwork(
        clf.behavioral_model,
        encoder=EncoderConfig(p_max=n.p_max, steps_per_image=n.steps_per_image,
                              tau_0=n.tau_0, v_row=n.v_row),
        stdp=StdpConfig(tau_plus=n.tau_plus, tau_minus=n.tau_minus,
                        eta_plus=n.eta_plus, eta_minus=n.eta_minus),
        net=NetworkConfig(n_inputs=synapses.levels.shape[0],
                          n_neurons=synapses.levels.shape[1], tau_inh=n.tau_inh,
                          homeostasis_beta=n.homeostasis_beta, seed=n.seed),
        device=cfg.device_params(), synapses=synapses)

    labels01 = ds.labels.copy()
    classes = np.unique(labels01)
    label_index = np.searchsorted(classes, labels01)
    counts = network.test(ds.images, label_index, n_classes=len(classes))
    neuron_classes = assign_classes(counts)
    per_image = network.per_image_spikes(ds.images)
    predictions = classes[neuron_classes[np.argmax(per_image, axis=1)]]
    accuracy = float(np.mean(predictions == labels01))

    stats = _stamp(cfg)
    stats.update({
        "dataset": ds.source,
        "n_images": len(ds),
        "checkpoint": str(args.checkpoint),
        "checkpoint_header": header,
        "counts_per_neuron_class": [[int(v) for v in row] for row in counts],
        "neuron_classes": [int(classes[v]) for v in neuron_classes],
        "predictions": [int(v) for v in predictions],
        "labels": [int(v) for v in labels01],
        "accuracy": accuracy,
        "energy": network.total_ledger().summary(),
    })
    _dump_json(out / f"{args.prefix}_stats.json", stats)
    _write_raster(out / f"{args.prefix}_raster.csv", network.raster)
    print(f"wrote {out / (args.prefix + '_stats.json')} (accuracy {accuracy:.2%})")
    return 0


def cmd_energy_report(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.io.out_dir)
    totals = {"write": 0.0, "read": 0.0, "reset": 0.0}
    spikes = 0
    with gzip.open(args.events, "rt") as f:
        header = f.readline().strip().split(",")
        if header[:4] != ["kind", "current_A", "resistance_ohm", "duration_s"]:
            raise DataFormatError(f"{args.events} is not an energy event log")
        for line in f:
            kind, i, r, t, _e = line.strip().split(",")
            if kind == "read":
                totals["read"] += float(_e)
            else:
                totals[kind] += float(i) ** 2 * float(r) * float(t)
                if kind == "reset":
                    spikes += 1
    report = _stamp(cfg)
    total = sum(totals.values())
    report["energy"] = {
        "write_fj": totals["write"] * 1e15,
        "read_fj": totals["read"] * 1e15,
        "reset_fj": totals["reset"] * 1e15,
        "spikes": spikes,
        "per_spike_fj": total * 1e15 / max(spikes, 1),
    }
    if args.stats:
        with open(args.stats) as f:
            recorded = json.load(f)["energy"]
        for key in ("write_fj", "read_fj", "reset_fj"):
            drift = abs(recorded[key] - report["energy"][key])
            if drift > 1e-9 * max(abs(recorded[key]), 1.0):
                raise CharacterizationError(
                    f"ledger drift in {key}: replay {report['energy'][key]} "
                    f"vs recorded {recorded[key]}")
        report["verified_against"] = str(args.stats)
    path = out / f"{args.prefix}.json"
    _dump_json(path, report)
    print(f"wrote {path} (per-spike {report['energy']['per_spike_fj']:.2f} fJ)")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtjsnn",
        description="Stochastic MTJ neuron and crossbar SNN simulator")
    parser.add_argument("--version", action="version", version=f"mtjsnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="config override (repeatable)")

    p = sub.add_parser("pulse-demo", help="integrate-and-leak trajectory export")
    common(p)
    p.add_argument("--eb-kt", type=float, default=30.0)
    p.add_argument("--thickness", type=float, default=1.5e-9)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--tilt-deg", type=float, default=3.0)
    p.add_argument("--n-pulses", type=int, default=3)
    p.add_argument("--on", type=float, default=2e-9, help="pulse duration [s]")
    p.add_argument("--off", type=float, default=1e-9, help="gap duration [s]")
    p.add_argument("--amplitude-ua", type=float, default=None,
                   help="charge current [uA]; default 0.7x the reversal threshold")
    p.add_argument("--prefix", default="pulse_demo")
    p.set_defaults(func=cmd_pulse_demo)

    p = sub.add_parser("sweep", help="Monte Carlo switching-probability table")
    common(p)
    p.add_argument("--eb", type=_parse_floats, help="barrier heights [kT], comma-separated")
    p.add_argument("--tpw", type=_parse_floats, help="pulse widths [s], comma-separated")
    p.add_argument("--currents", type=_parse_floats, help="explicit charge currents [A]")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--drive", choices=["spin_hall", "pinned_layer"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--prefix", default="sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="barrier calibration report")
    common(p)
    p.add_argument("--eb", type=_parse_floats)
    p.add_argument("--thickness", type=float)
    p.add_argument("--prefix", default="calibration")
    p.set_defaults(func=cmd_calibrate)

    for name in ("train", "test"):
        p = sub.add_parser(name, help=f"{name} the crossbar network")
        common(p)
        p.add_argument("--table", required=True, help="switching table JSON from 'sweep'")
        p.add_argument("--dataset", choices=["synth", "idx"], default="synth")
        p.add_argument("--images", type=int, default=20,
                       help="images per class (synth) or half the total cap (idx)")
        p.add_argument("--data-seed", type=int, default=1)
        p.add_argument("--idx-images")
        p.add_argument("--idx-labels")
        p.add_argument("--prefix", default=name)
        if name == "test":
            p.add_argument("--checkpoint", required=True)
            p.set_defaults(func=cmd_test)
        else:
            p.set_defaults(func=cmd_train)

    p = sub.add_parser("energy-report", help="replay an energy event log")
    common(p)
    p.add_argument("--events", required=True, help="energy_events.csv.gz from 'train'")
    p.add_argument("--stats", help="stats JSON to verify against")
    p.add_argument("--prefix", default="energy_report")
    p.set_defaults(func=cmd_energy_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CalibrationError, CharacterizationError, PhaseProtocolError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
